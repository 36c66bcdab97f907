//! Incentive-compatibility slack and the linear constraint system describing
//! one team's feasible, incentive-compatible mechanisms.
//!
//! Constraints are interim: one row per agent, true type, report and decision
//! rule on recommendations. With the prior fixed, the ex-ante best deviation
//! decomposes into independent per-type choices, so the interim rows cut out
//! the same set as the ex-ante inequality over strategy functions.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{
    behavior_law_filtered, enumerate_maps, expected_value_on_type, project, truthful_law,
    BehaviorStrategy, DeviationStrategy, DEFAULT_GENERATOR_CAP,
};
use crate::model::{GameSpec, MechanismZ, UtilityDomain, UtilityTable};

/// Default absolute tolerance for feasibility and IC checks.
pub const IC_TOL: f64 = 1e-9;

/// A deviation of one agent at one true type: report `report`, then map each
/// recommendation `a'` to `rule[a']` (obedient when `None`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterimDeviation {
    pub agent: usize,
    pub true_type: usize,
    pub report: usize,
    pub rule: Option<Vec<usize>>,
}

impl InterimDeviation {
    fn is_truthful_obedient(&self) -> bool {
        self.report == self.true_type
            && self
                .rule
                .as_ref()
                .is_none_or(|r| r.iter().enumerate().all(|(a, &b)| a == b))
    }

    /// Embeds this deviation into a full strategy that is truthful elsewhere.
    fn as_behavior(&self, spec: &GameSpec) -> BehaviorStrategy {
        let d = spec.dims();
        let mut report = vec![0; d.types];
        for (t, slot) in report.iter_mut().enumerate() {
            *slot = if t == self.true_type { self.report } else { t };
        }
        let rule = self.rule.as_ref().map(|r| {
            let mut full: Vec<usize> = (0..d.types * d.actions).map(|i| i % d.actions).collect();
            full[self.true_type * d.actions..(self.true_type + 1) * d.actions].copy_from_slice(r);
            full
        });
        BehaviorStrategy::from_pure(
            spec,
            &DeviationStrategy {
                agent: self.agent,
                report,
                rule,
            },
        )
    }
}

/// Per-type deviation options: every report, times every rule `A -> A`
/// outside obedience mode.
pub fn interim_options(
    spec: &GameSpec,
    agent: usize,
    true_type: usize,
) -> Result<Vec<InterimDeviation>> {
    let d = spec.dims();
    let per_type = if spec.obedience_enforced() {
        d.types as u128
    } else {
        d.types as u128 * (d.actions as u128).saturating_pow(d.actions as u32)
    };
    if per_type > DEFAULT_GENERATOR_CAP {
        return Err(Error::GeneratorCap {
            count: per_type,
            cap: DEFAULT_GENERATOR_CAP,
        });
    }
    let rules: Vec<Option<Vec<usize>>> = if spec.obedience_enforced() {
        vec![None]
    } else {
        enumerate_maps(d.actions, d.actions)
            .into_iter()
            .map(Some)
            .collect()
    };
    let mut out = Vec::with_capacity(per_type as usize);
    for report in 0..d.types {
        for rule in &rules {
            out.push(InterimDeviation {
                agent,
                true_type,
                report,
                rule: rule.clone(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackReport {
    pub agent: usize,
    /// Truthful value minus best deviation value; IC iff `>= 0` (it is never positive).
    pub slack: f64,
    pub truthful_value: f64,
    pub best_deviation_value: f64,
    pub best_deviation: DeviationStrategy,
}

/// IC slack of one agent, via deviation laws and their projections.
pub fn ic_slack(spec: &GameSpec, profile: &[MechanismZ], agent: usize) -> Result<SlackReport> {
    let d = spec.dims();
    if agent >= d.agents {
        return Err(Error::AgentOutOfRange {
            agent,
            agents: d.agents,
        });
    }
    let table = spec.member_utility(agent);
    let truthful = truthful_law(spec, profile)?;
    let mut best = DeviationStrategy::truthful(spec, agent);
    if !spec.obedience_enforced() {
        best.rule = Some((0..d.types * d.actions).map(|i| i % d.actions).collect());
    }
    let (mut truth_total, mut dev_total) = (0.0, 0.0);
    for theta in 0..d.types {
        let truth = expected_value_on_type(spec, &truthful, table, agent, theta);
        let mut best_value = truth;
        for opt in interim_options(spec, agent, theta)? {
            if opt.is_truthful_obedient() {
                continue;
            }
            let law = behavior_law_filtered(spec, profile, &opt.as_behavior(spec), Some(theta))?;
            let value = expected_value_on_type(spec, &project(&law), table, agent, theta);
            if value > best_value {
                best_value = value;
                best.report[theta] = opt.report;
                if let (Some(full), Some(rule)) = (best.rule.as_mut(), opt.rule.as_ref()) {
                    full[theta * d.actions..(theta + 1) * d.actions].copy_from_slice(rule);
                }
            }
        }
        truth_total += truth;
        dev_total += best_value;
    }
    Ok(SlackReport {
        agent,
        slack: truth_total - dev_total,
        truthful_value: truth_total,
        best_deviation_value: dev_total,
        best_deviation: best,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcReport {
    pub compatible: bool,
    pub min_slack: f64,
    pub worst_agent: usize,
    pub worst_deviation: DeviationStrategy,
    pub slacks: Vec<f64>,
}

/// Every agent's slack is at least `-tol`.
pub fn is_incentive_compatible(
    spec: &GameSpec,
    profile: &[MechanismZ],
    tol: f64,
) -> Result<IcReport> {
    let mut reports = Vec::with_capacity(spec.dims().agents);
    for k in 0..spec.dims().agents {
        reports.push(ic_slack(spec, profile, k)?);
    }
    let worst = reports
        .iter()
        .min_by(|a, b| a.slack.total_cmp(&b.slack))
        .expect("at least one agent");
    Ok(IcReport {
        compatible: worst.slack >= -tol,
        min_slack: worst.slack,
        worst_agent: worst.agent,
        worst_deviation: worst.best_deviation.clone(),
        slacks: reports.iter().map(|r| r.slack).collect(),
    })
}

/// Coefficients of a payoff expectation in team `team`'s `z`, with every other
/// team's mechanism held fixed. The payoff is restricted to `only` =
/// `(agent, true type)` when given, and evaluated under `deviation` when given;
/// a deviation always restricts to its own agent and true type.
pub fn linear_payoff(
    spec: &GameSpec,
    profile: &[MechanismZ],
    team: usize,
    table: &UtilityTable,
    only: Option<(usize, usize)>,
    deviation: Option<&InterimDeviation>,
) -> Result<Vec<f64>> {
    let d = spec.dims();
    if profile.len() != d.teams {
        return Err(Error::ProfileMismatch {
            expected: d.teams,
            got: profile.len(),
        });
    }
    if let UtilityDomain::Member { team: owner } = table.domain() {
        if owner != team {
            return Err(Error::InvalidParams(format!(
                "member table of team {owner} used for team {team}"
            )));
        }
    }
    let mut coefs = vec![0.0; d.z_len()];
    for t in 0..d.type_profiles {
        let h = spec.prior().mass(t);
        if h == 0.0 {
            continue;
        }
        let only = deviation.map(|dev| (dev.agent, dev.true_type)).or(only);
        if let Some((k, theta)) = only {
            if d.agent_type(t, k) != theta {
                continue;
            }
        }
        let reported = match deviation {
            Some(dev) => d.with_agent_type(t, dev.agent, dev.report),
            None => t,
        };
        let own_report = d.team_types_of(reported, team);
        for a_rec in 0..d.action_profiles {
            let mut others = 1.0;
            for (l, m) in profile.iter().enumerate() {
                if l == team {
                    continue;
                }
                others *= m.alpha(d, d.team_types_of(t, l), d.team_actions_of(a_rec, l));
                if others == 0.0 {
                    break;
                }
            }
            if others == 0.0 {
                continue;
            }
            let a_actual = match deviation.and_then(|dev| dev.rule.as_ref().map(|r| (dev.agent, r)))
            {
                Some((k, rule)) => d.with_agent_action(a_rec, k, rule[d.agent_action(a_rec, k)]),
                None => a_rec,
            };
            let own_rec = d.team_actions_of(a_rec, team);
            for w in 0..d.winnings_profiles {
                let lam = spec.winnings_prob(t, a_actual, w);
                if lam == 0.0 {
                    continue;
                }
                let own_w = d.team_winnings_of(w, team);
                let base = d.z_index(own_report, own_rec, own_w, 0);
                let weight = h * others * lam;
                for &r in spec.feasible_rewards(own_w) {
                    coefs[base + r] += weight * table.at_team_reward(d, t, a_actual, w, r);
                }
            }
        }
    }
    Ok(coefs)
}

/// Principal `team`'s expected payoff as coefficients on its own `z`.
pub fn principal_objective(
    spec: &GameSpec,
    profile: &[MechanismZ],
    team: usize,
) -> Result<Vec<f64>> {
    linear_payoff(
        spec,
        profile,
        team,
        spec.principal_utility(team),
        None,
        None,
    )
}

/// Principal payoff under truthful-obedient play, via the outcome law.
pub fn principal_value(spec: &GameSpec, profile: &[MechanismZ], team: usize) -> Result<f64> {
    let law = truthful_law(spec, profile)?;
    crate::laws::expected_value(spec, &law, spec.principal_utility(team))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Eq,
    Ge,
    Le,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Eq => "=",
            Sense::Ge => ">=",
            Sense::Le => "<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Normalization {
        report: usize,
        winnings: usize,
    },
    MarginalConsistency {
        report: usize,
        action: usize,
        winnings: usize,
    },
    SupportZero {
        report: usize,
        action: usize,
        winnings: usize,
        reward: usize,
    },
    IncentiveCompatibility {
        deviation: InterimDeviation,
        zero_probability: bool,
    },
    Extra {
        note: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
    pub provenance: Provenance,
}

impl ConstraintRow {
    pub fn lhs(&self, z: &[f64]) -> f64 {
        self.coeffs.iter().zip(z).map(|(c, v)| c * v).sum()
    }

    /// Amount by which `z` violates this row (zero when satisfied).
    pub fn violation(&self, z: &[f64]) -> f64 {
        let lhs = self.lhs(z);
        match self.sense {
            Sense::Eq => (lhs - self.rhs).abs(),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Le => (lhs - self.rhs).max(0.0),
        }
    }

    pub fn is_ic(&self) -> bool {
        matches!(self.provenance, Provenance::IncentiveCompatibility { .. })
    }
}

/// Linear rows over one team's `z` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSystem {
    pub team: usize,
    pub num_vars: usize,
    pub rows: Vec<ConstraintRow>,
}

impl ConstraintSystem {
    pub fn push(&mut self, row: ConstraintRow) -> Result<()> {
        if row.coeffs.len() != self.num_vars {
            return Err(Error::DimensionMismatch {
                expected: self.num_vars,
                got: row.coeffs.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn ic_rows(&self) -> impl Iterator<Item = &ConstraintRow> {
        self.rows.iter().filter(|r| r.is_ic())
    }

    pub fn max_violation(&self, z: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.violation(z)).fold(0.0, f64::max)
    }

    pub fn is_satisfied(&self, z: &[f64], tol: f64) -> bool {
        self.max_violation(z) <= tol
    }

    /// Plain-text tableau: one header line naming the columns
    /// `z[report;action;winnings;reward]` in index order followed by `sense`,
    /// `rhs` and `provenance`; then one line per row.
    pub fn to_tableau(&self, spec: &GameSpec) -> String {
        let d = spec.dims();
        let mut out = String::new();
        let mut header: Vec<String> = (0..self.num_vars)
            .map(|i| {
                let (t, a, w, r) = d.z_coords(i);
                format!(
                    "z[{};{};{};{}]",
                    spec.team_type_labels(t).join(","),
                    spec.team_action_labels(a).join(","),
                    spec.winnings().label(w),
                    spec.team_reward_labels(r).join(",")
                )
            })
            .collect();
        header.extend(["sense".into(), "rhs".into(), "provenance".into()]);
        let _ = writeln!(out, "{}", header.join("\t"));
        for row in &self.rows {
            let mut cells: Vec<String> = row.coeffs.iter().map(|c| format_sig(*c)).collect();
            cells.push(row.sense.symbol().into());
            cells.push(format_sig(row.rhs));
            cells.push(serde_json::to_string(&row.provenance).unwrap_or_default());
            let _ = writeln!(out, "{}", cells.join("\t"));
        }
        out
    }
}

/// Formats with 12 significant digits, trimming trailing zeros.
pub fn format_sig(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let s = format!("{:.11e}", v);
    let parsed: f64 = s.parse().unwrap_or(v);
    format!("{parsed}")
}

/// Feasibility, marginal-consistency, support and interim IC rows for team
/// `team`, holding every other entry of `profile` fixed. The team's own entry
/// is ignored.
pub fn ic_constraints(
    spec: &GameSpec,
    profile: &[MechanismZ],
    team: usize,
) -> Result<ConstraintSystem> {
    let d = spec.dims();
    if team >= d.teams {
        return Err(Error::InvalidParams(format!("team {team} out of range")));
    }
    let n = d.z_len();
    let mut sys = ConstraintSystem {
        team,
        num_vars: n,
        rows: Vec::new(),
    };
    for t in 0..d.team_types {
        for w in 0..d.winnings {
            let mut coeffs = vec![0.0; n];
            for a in 0..d.team_actions {
                for r in 0..d.team_rewards {
                    coeffs[d.z_index(t, a, w, r)] = 1.0;
                }
            }
            sys.push(ConstraintRow {
                coeffs,
                sense: Sense::Eq,
                rhs: 1.0,
                provenance: Provenance::Normalization {
                    report: t,
                    winnings: w,
                },
            })?;
        }
    }
    for t in 0..d.team_types {
        for a in 0..d.team_actions {
            for w in 1..d.winnings {
                let mut coeffs = vec![0.0; n];
                for r in 0..d.team_rewards {
                    coeffs[d.z_index(t, a, w, r)] = 1.0;
                    coeffs[d.z_index(t, a, 0, r)] = -1.0;
                }
                sys.push(ConstraintRow {
                    coeffs,
                    sense: Sense::Eq,
                    rhs: 0.0,
                    provenance: Provenance::MarginalConsistency {
                        report: t,
                        action: a,
                        winnings: w,
                    },
                })?;
            }
        }
    }
    for t in 0..d.team_types {
        for a in 0..d.team_actions {
            for w in 0..d.winnings {
                for r in 0..d.team_rewards {
                    if spec.is_feasible_reward(w, r) {
                        continue;
                    }
                    let mut coeffs = vec![0.0; n];
                    coeffs[d.z_index(t, a, w, r)] = 1.0;
                    sys.push(ConstraintRow {
                        coeffs,
                        sense: Sense::Eq,
                        rhs: 0.0,
                        provenance: Provenance::SupportZero {
                            report: t,
                            action: a,
                            winnings: w,
                            reward: r,
                        },
                    })?;
                }
            }
        }
    }
    for i in 0..d.members {
        let agent = team * d.members + i;
        let table = spec.member_utility(agent);
        for theta in 0..d.types {
            let type_mass: f64 = (0..d.type_profiles)
                .filter(|&t| d.agent_type(t, agent) == theta)
                .map(|t| spec.prior().mass(t))
                .sum();
            let truth = linear_payoff(spec, profile, team, table, Some((agent, theta)), None)?;
            for opt in interim_options(spec, agent, theta)? {
                if opt.is_truthful_obedient() {
                    continue;
                }
                let dev =
                    linear_payoff(spec, profile, team, table, Some((agent, theta)), Some(&opt))?;
                let coeffs = truth.iter().zip(&dev).map(|(a, b)| a - b).collect();
                sys.push(ConstraintRow {
                    coeffs,
                    sense: Sense::Ge,
                    rhs: 0.0,
                    provenance: Provenance::IncentiveCompatibility {
                        deviation: opt,
                        zero_probability: type_mass == 0.0,
                    },
                })?;
            }
        }
    }
    Ok(sys)
}
