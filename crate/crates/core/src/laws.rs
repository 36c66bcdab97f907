//! Outcome laws induced by mechanism profiles.
//!
//! The truthful-obedient law composes the prior, every team's action
//! recommendation, the winnings kernel and every team's reward kernel. A
//! deviation law additionally records the deviator's report and actual
//! action, in the order: true types, report, recommendation at the reported
//! profile, actual action, winnings at true types and actual actions, rewards
//! at reports and recommendations.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::model::{Dims, GameSpec, MechanismZ, UtilityTable};
use crate::spaces::MASS_TOL;

/// Default cap on the number of extended-outcome cells a law may occupy.
pub const DEFAULT_CELL_CAP: u128 = 1_000_000;

/// Default cap on the number of pure deviation generators per agent.
pub const DEFAULT_GENERATOR_CAP: u128 = 1_000_000;

/// Environment variable overriding [`DEFAULT_CELL_CAP`].
pub const CELL_CAP_ENV: &str = "TEAMGAME_CELL_CAP";

pub fn cell_cap() -> u128 {
    static CAP: OnceLock<u128> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var(CELL_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_CELL_CAP)
    })
}

fn check_cells(dims: &Dims) -> Result<usize> {
    let cells = dims.outcome_cells() * dims.types as u128 * dims.actions as u128;
    let cap = cell_cap();
    if cells > cap {
        return Err(Error::CellCap { cells, cap });
    }
    Ok(dims.outcome_cells() as usize)
}

/// Distribution over `X = T^{nN} x A^{nN} x W^N x R^{nN}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeLaw {
    dims: Dims,
    mass: Vec<f64>,
}

/// Distribution over `X` augmented with one agent's report and actual action.
/// The `X` action coordinates hold recommendations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedLaw {
    dims: Dims,
    agent: usize,
    mass: Vec<f64>,
}

impl OutcomeLaw {
    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Cells with positive mass, in index order.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(i, m)| (i, *m))
    }
}

impl ExtendedLaw {
    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Flat index of `(x, report, actual action)`.
    pub fn index(&self, x: usize, report: usize, action: usize) -> usize {
        (x * self.dims.types + report) * self.dims.actions + action
    }

    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(i, m)| (i, *m))
    }
}

/// Pure deviation: a report map and, outside obedience mode, a decision rule
/// `rule[true_type * |A| + recommendation]`. `rule: None` means obedient.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct DeviationStrategy {
    pub agent: usize,
    pub report: Vec<usize>,
    pub rule: Option<Vec<usize>>,
}

impl DeviationStrategy {
    pub fn truthful(spec: &GameSpec, agent: usize) -> Self {
        Self {
            agent,
            report: (0..spec.dims().types).collect(),
            rule: None,
        }
    }

    pub fn is_truthful_obedient(&self) -> bool {
        self.report.iter().enumerate().all(|(t, &r)| t == r) && self.is_obedient()
    }

    fn is_obedient(&self) -> bool {
        match &self.rule {
            None => true,
            Some(rule) => {
                let na = rule.len() / self.report.len().max(1);
                rule.iter().enumerate().all(|(i, &a)| a == i % na)
            }
        }
    }
}

/// Mixed behavior strategy: `report[t][t']` and `action[(t, t', a')][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorStrategy {
    pub agent: usize,
    pub report: Vec<Vec<f64>>,
    /// Rows indexed `(true_type * |T| + report) * |A| + recommendation`; `None` is obedient.
    pub action: Option<Vec<Vec<f64>>>,
}

impl BehaviorStrategy {
    pub fn from_pure(spec: &GameSpec, s: &DeviationStrategy) -> Self {
        let d = spec.dims();
        let report = s
            .report
            .iter()
            .map(|&r| {
                let mut row = vec![0.0; d.types];
                row[r] = 1.0;
                row
            })
            .collect();
        let action = s.rule.as_ref().map(|rule| {
            let mut rows = Vec::with_capacity(d.types * d.types * d.actions);
            for t in 0..d.types {
                for _rep in 0..d.types {
                    for a in 0..d.actions {
                        let mut row = vec![0.0; d.actions];
                        row[rule[t * d.actions + a]] = 1.0;
                        rows.push(row);
                    }
                }
            }
            rows
        });
        Self {
            agent: s.agent,
            report,
            action,
        }
    }

    fn check(&self, spec: &GameSpec) -> Result<()> {
        let d = spec.dims();
        if self.agent >= d.agents {
            return Err(Error::AgentOutOfRange {
                agent: self.agent,
                agents: d.agents,
            });
        }
        if self.report.len() != d.types || self.report.iter().any(|r| r.len() != d.types) {
            return Err(Error::InvalidParams("report kernel has wrong shape".into()));
        }
        if let Some(action) = &self.action {
            if action.len() != d.types * d.types * d.actions
                || action.iter().any(|r| r.len() != d.actions)
            {
                return Err(Error::InvalidParams("action kernel has wrong shape".into()));
            }
            if spec.obedience_enforced() {
                for (i, row) in action.iter().enumerate() {
                    let rec = i % d.actions;
                    if row.iter().enumerate().any(|(a, &p)| a != rec && p > 0.0) {
                        return Err(Error::ModeMismatch);
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_pure(spec: &GameSpec, s: &DeviationStrategy) -> Result<()> {
    let d = spec.dims();
    if s.agent >= d.agents {
        return Err(Error::AgentOutOfRange {
            agent: s.agent,
            agents: d.agents,
        });
    }
    if s.report.len() != d.types || s.report.iter().any(|&r| r >= d.types) {
        return Err(Error::InvalidParams("report map must be total on T".into()));
    }
    if let Some(rule) = &s.rule {
        if rule.len() != d.types * d.actions || rule.iter().any(|&a| a >= d.actions) {
            return Err(Error::InvalidParams(
                "decision rule must be total on T x A".into(),
            ));
        }
        if spec.obedience_enforced() && !s.is_obedient() {
            return Err(Error::ModeMismatch);
        }
    }
    Ok(())
}

/// Adds `weight * prod_j z_j(t_j, a_j, w_j, r_j)` to `out[base + r * stride]`
/// for every reward profile `r` with positive product.
fn spread_rewards(
    dims: &Dims,
    profile: &[MechanismZ],
    reported: usize,
    recommended: usize,
    w: usize,
    weight: f64,
    mut emit: impl FnMut(usize, f64),
) {
    // Per-team starting offsets into z; each team contributes team_rewards entries.
    let mut offsets = [0usize; 16];
    let mut heap_offsets;
    let offs: &mut [usize] = if dims.teams <= offsets.len() {
        &mut offsets[..dims.teams]
    } else {
        heap_offsets = vec![0; dims.teams];
        &mut heap_offsets
    };
    for (j, slot) in offs.iter_mut().enumerate() {
        *slot = dims.z_index(
            dims.team_types_of(reported, j),
            dims.team_actions_of(recommended, j),
            dims.team_winnings_of(w, j),
            0,
        );
    }
    fn recurse(
        dims: &Dims,
        profile: &[MechanismZ],
        offs: &[usize],
        j: usize,
        acc_r: usize,
        acc_w: f64,
        emit: &mut dyn FnMut(usize, f64),
    ) {
        if j == dims.teams {
            emit(acc_r, acc_w);
            return;
        }
        let place = dims.reward_profile_place(j);
        let row = &profile[j].values[offs[j]..offs[j] + dims.team_rewards];
        for (r, &z) in row.iter().enumerate() {
            if z > 0.0 {
                recurse(
                    dims,
                    profile,
                    offs,
                    j + 1,
                    acc_r + r * place,
                    acc_w * z,
                    emit,
                );
            }
        }
    }
    recurse(dims, profile, offs, 0, 0, weight, &mut emit);
}

impl Dims {
    pub(crate) fn reward_profile_place(&self, team: usize) -> usize {
        self.team_rewards.pow((self.teams - 1 - team) as u32)
    }
}

fn recommendation_weight(
    dims: &Dims,
    profile: &[MechanismZ],
    reported: usize,
    recommended: usize,
) -> f64 {
    let mut p = 1.0;
    for (j, m) in profile.iter().enumerate() {
        p *= m.alpha(
            dims,
            dims.team_types_of(reported, j),
            dims.team_actions_of(recommended, j),
        );
        if p == 0.0 {
            break;
        }
    }
    p
}

/// Law of outcomes when every agent reports truthfully and obeys.
pub fn truthful_law(spec: &GameSpec, profile: &[MechanismZ]) -> Result<OutcomeLaw> {
    spec.check_profile(profile)?;
    let d = spec.dims();
    let cells = check_cells(d)?;
    let mut mass = vec![0.0; cells];
    for t in 0..d.type_profiles {
        let h = spec.prior().mass(t);
        if h == 0.0 {
            continue;
        }
        for a in 0..d.action_profiles {
            if recommendation_weight(d, profile, t, a) == 0.0 {
                continue;
            }
            for w in 0..d.winnings_profiles {
                let lam = spec.winnings_prob(t, a, w);
                if lam == 0.0 {
                    continue;
                }
                let base = d.outcome_index(t, a, w, 0);
                spread_rewards(d, profile, t, a, w, h * lam, |r, m| mass[base + r] += m);
            }
        }
    }
    let law = OutcomeLaw {
        dims: d.clone(),
        mass,
    };
    debug_assert!((law.total() - 1.0).abs() <= 1e-9 || spec.prior().defect().is_some());
    Ok(law)
}

/// Composition engine shared by deviation laws and per-type restrictions.
/// `only_type` restricts the deviator's true type.
pub(crate) fn behavior_law_filtered(
    spec: &GameSpec,
    profile: &[MechanismZ],
    strategy: &BehaviorStrategy,
    only_type: Option<usize>,
) -> Result<ExtendedLaw> {
    spec.check_profile(profile)?;
    strategy.check(spec)?;
    let d = spec.dims();
    let cells = check_cells(d)?;
    let k = strategy.agent;
    let (nt, na) = (d.types, d.actions);
    let mut mass = vec![0.0; cells * nt * na];
    for t in 0..d.type_profiles {
        let h = spec.prior().mass(t);
        if h == 0.0 {
            continue;
        }
        let own = d.agent_type(t, k);
        if only_type.is_some_and(|o| o != own) {
            continue;
        }
        for (rep, &p_rep) in strategy.report[own].iter().enumerate() {
            if p_rep == 0.0 {
                continue;
            }
            let reported = d.with_agent_type(t, k, rep);
            for a_rec in 0..d.action_profiles {
                if recommendation_weight(d, profile, reported, a_rec) == 0.0 {
                    continue;
                }
                let rec_own = d.agent_action(a_rec, k);
                for act in 0..na {
                    let p_act = match &strategy.action {
                        None => {
                            if act == rec_own {
                                1.0
                            } else {
                                0.0
                            }
                        }
                        Some(rows) => rows[(own * nt + rep) * na + rec_own][act],
                    };
                    if p_act == 0.0 {
                        continue;
                    }
                    let a_actual = d.with_agent_action(a_rec, k, act);
                    for w in 0..d.winnings_profiles {
                        let lam = spec.winnings_prob(t, a_actual, w);
                        if lam == 0.0 {
                            continue;
                        }
                        let base = d.outcome_index(t, a_rec, w, 0);
                        spread_rewards(
                            d,
                            profile,
                            reported,
                            a_rec,
                            w,
                            h * p_rep * p_act * lam,
                            |r, m| mass[((base + r) * nt + rep) * na + act] += m,
                        );
                    }
                }
            }
        }
    }
    Ok(ExtendedLaw {
        dims: d.clone(),
        agent: k,
        mass,
    })
}

/// Extended law when `strategy.agent` deviates by a pure strategy and everyone
/// else is truthful and obedient.
pub fn deviation_law(
    spec: &GameSpec,
    profile: &[MechanismZ],
    strategy: &DeviationStrategy,
) -> Result<ExtendedLaw> {
    check_pure(spec, strategy)?;
    behavior_law_filtered(
        spec,
        profile,
        &BehaviorStrategy::from_pure(spec, strategy),
        None,
    )
}

/// Extended law under a mixed behavior strategy.
pub fn behavior_deviation_law(
    spec: &GameSpec,
    profile: &[MechanismZ],
    strategy: &BehaviorStrategy,
) -> Result<ExtendedLaw> {
    behavior_law_filtered(spec, profile, strategy, None)
}

/// Pushforward to `X`: drops the report and substitutes the actual action for
/// the deviator's recommendation.
pub fn project(law: &ExtendedLaw) -> OutcomeLaw {
    let d = &law.dims;
    let (nt, na) = (d.types, d.actions);
    let mut mass = vec![0.0; law.mass.len() / (nt * na)];
    for (i, &m) in law.mass.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let act = i % na;
        let x = i / (nt * na);
        let (t, a, w, r) = d.outcome_coords(x);
        let a_sub = d.with_agent_action(a, law.agent, act);
        mass[d.outcome_index(t, a_sub, w, r)] += m;
    }
    OutcomeLaw {
        dims: d.clone(),
        mass,
    }
}

/// Number of pure generators `|T|^|T| * |A|^(|T| |A|)` (or `|T|^|T|` under obedience).
pub fn generator_count(spec: &GameSpec) -> u128 {
    let d = spec.dims();
    let reports = (d.types as u128).saturating_pow(d.types as u32);
    if spec.obedience_enforced() {
        reports
    } else {
        reports.saturating_mul((d.actions as u128).saturating_pow((d.types * d.actions) as u32))
    }
}

/// All pure `(report, rule)` deviations for one agent, report map outermost,
/// each in lexicographic order.
pub fn deviation_generators(
    spec: &GameSpec,
    agent: usize,
    cap: u128,
) -> Result<Vec<DeviationStrategy>> {
    let d = spec.dims();
    if agent >= d.agents {
        return Err(Error::AgentOutOfRange {
            agent,
            agents: d.agents,
        });
    }
    let count = generator_count(spec);
    if count > cap {
        return Err(Error::GeneratorCap { count, cap });
    }
    let (nt, na) = (d.types, d.actions);
    let reports = enumerate_maps(nt, nt);
    let mut out = Vec::with_capacity(count as usize);
    if spec.obedience_enforced() {
        for report in reports {
            out.push(DeviationStrategy {
                agent,
                report,
                rule: None,
            });
        }
    } else {
        let rules = enumerate_maps(nt * na, na);
        for report in &reports {
            for rule in &rules {
                out.push(DeviationStrategy {
                    agent,
                    report: report.clone(),
                    rule: Some(rule.clone()),
                });
            }
        }
    }
    Ok(out)
}

/// Every map from a domain of size `n` into `0..k`, lexicographic.
pub(crate) fn enumerate_maps(n: usize, k: usize) -> Vec<Vec<usize>> {
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut v = vec![0; n];
            for slot in v.iter_mut().rev() {
                *slot = idx % k;
                idx /= k;
            }
            v
        })
        .collect()
}

/// `sum_x law(x) * table(x)`.
pub fn expected_value(spec: &GameSpec, law: &OutcomeLaw, table: &UtilityTable) -> Result<f64> {
    let d = spec.dims();
    if law.dims != *d {
        return Err(Error::DimensionMismatch {
            expected: d.outcome_cells() as usize,
            got: law.mass.len(),
        });
    }
    let expected_len = UtilityTable::expected_len(d, table.domain());
    if table.values().len() != expected_len {
        return Err(Error::DimensionMismatch {
            expected: expected_len,
            got: table.values().len(),
        });
    }
    Ok(law
        .support()
        .map(|(x, m)| {
            let (t, a, w, r) = d.outcome_coords(x);
            m * table.at(d, t, a, w, r)
        })
        .sum())
}

/// Expected value of an extended law, evaluated after projection.
pub fn expected_value_extended(
    spec: &GameSpec,
    law: &ExtendedLaw,
    table: &UtilityTable,
) -> Result<f64> {
    expected_value(spec, &project(law), table)
}

/// Expected value restricted to outcomes where `agent` has true type `only_type`.
pub(crate) fn expected_value_on_type(
    spec: &GameSpec,
    law: &OutcomeLaw,
    table: &UtilityTable,
    agent: usize,
    only_type: usize,
) -> f64 {
    let d = spec.dims();
    law.support()
        .filter_map(|(x, m)| {
            let (t, a, w, r) = d.outcome_coords(x);
            (d.agent_type(t, agent) == only_type).then(|| m * table.at(d, t, a, w, r))
        })
        .sum()
}

/// Normalization, nonnegativity and reward-support defects of a law, if any.
pub fn law_defect(spec: &GameSpec, law: &OutcomeLaw) -> Option<String> {
    let d = spec.dims();
    if law.mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
        return Some("negative or non-finite mass".into());
    }
    let total = law.total();
    if (total - 1.0).abs() > MASS_TOL {
        return Some(format!("total mass {total}"));
    }
    for (x, _) in law.support() {
        let (_, _, w, r) = d.outcome_coords(x);
        for j in 0..d.teams {
            if !spec.is_feasible_reward(d.team_winnings_of(w, j), d.team_rewards_of(r, j)) {
                return Some(format!("mass on infeasible reward at cell {x}"));
            }
        }
    }
    None
}
