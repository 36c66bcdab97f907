//! Linear programming, principal best responses, equilibrium verification and
//! best-response dynamics with cycle certificates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::incentives::{
    ic_constraints, is_incentive_compatible, principal_objective, ConstraintSystem, Sense,
};
use crate::model::{polish_mechanism, GameSpec, MechanismZ};

/// Pivot and reduced-cost tolerance.
pub const LP_EPS: f64 = 1e-9;

/// Phase-one residual above which a program is declared infeasible.
const FEAS_TOL: f64 = 1e-8;

const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

/// Maximize `objective . x` subject to `rows` and `x >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
}

impl LinearProgram {
    pub fn from_system(system: &ConstraintSystem, objective: Vec<f64>) -> Self {
        Self {
            objective,
            rows: system
                .rows
                .iter()
                .map(|r| LpRow {
                    coeffs: r.coeffs.clone(),
                    sense: r.sense,
                    rhs: r.rhs,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule on the columns flagged in `allowed`. Returns `false` if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool], pivots: &mut usize) -> Result<bool> {
        loop {
            let entering = (0..self.cols).find(|&j| {
                allowed[j] && !self.basis.contains(&j) && {
                    let reduced = cost[j]
                        - self
                            .basis
                            .iter()
                            .enumerate()
                            .map(|(i, &b)| cost[b] * self.rows[i][j])
                            .sum::<f64>();
                    reduced > LP_EPS
                }
            });
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > LP_EPS {
                    let ratio = self.rhs(i) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => {
                            ratio < best - LP_EPS
                                || (ratio <= best + LP_EPS && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, c);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::SolverStalled {
                    iterations: *pivots,
                });
            }
        }
    }
}

/// Dense two-phase simplex with Bland's anti-cycling rule.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    let n = lp.objective.len();
    for row in &lp.rows {
        if row.coeffs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.coeffs.len(),
            });
        }
    }
    // orient every row so its right-hand side is nonnegative
    let oriented: Vec<(Vec<f64>, Sense, f64)> = lp
        .rows
        .iter()
        .map(|r| {
            if r.rhs < 0.0 {
                let sense = match r.sense {
                    Sense::Ge => Sense::Le,
                    Sense::Le => Sense::Ge,
                    Sense::Eq => Sense::Eq,
                };
                (r.coeffs.iter().map(|c| -c).collect(), sense, -r.rhs)
            } else {
                (r.coeffs.clone(), r.sense, r.rhs)
            }
        })
        .collect();
    let slacks = oriented.iter().filter(|r| r.1 != Sense::Eq).count();
    let artificials = oriented.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + slacks + artificials;
    let mut tab = Tableau {
        rows: Vec::with_capacity(oriented.len()),
        basis: Vec::with_capacity(oriented.len()),
        cols,
    };
    let (mut next_slack, mut next_art) = (n, n + slacks);
    for (coeffs, sense, rhs) in &oriented {
        let mut row = vec![0.0; cols + 1];
        row[..n].copy_from_slice(coeffs);
        row[cols] = *rhs;
        match sense {
            Sense::Le => {
                row[next_slack] = 1.0;
                tab.basis.push(next_slack);
                next_slack += 1;
            }
            Sense::Ge => {
                row[next_slack] = -1.0;
                next_slack += 1;
                row[next_art] = 1.0;
                tab.basis.push(next_art);
                next_art += 1;
            }
            Sense::Eq => {
                row[next_art] = 1.0;
                tab.basis.push(next_art);
                next_art += 1;
            }
        }
        tab.rows.push(row);
    }
    let is_art = |j: usize| j >= n + slacks && j < cols;
    let mut pivots = 0;

    let phase1: Vec<f64> = (0..cols)
        .map(|j| if is_art(j) { -1.0 } else { 0.0 })
        .collect();
    tab.optimize(&phase1, &vec![true; cols], &mut pivots)?;
    let residual: f64 = tab
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| is_art(b))
        .map(|(i, _)| tab.rhs(i))
        .sum();
    if residual > FEAS_TOL {
        return Ok(LpOutcome::Infeasible);
    }
    // drive zero-level artificials out of the basis, dropping redundant rows
    let mut i = 0;
    while i < tab.rows.len() {
        if is_art(tab.basis[i]) {
            if let Some(c) = (0..n + slacks).find(|&j| tab.rows[i][j].abs() > LP_EPS) {
                tab.pivot(i, c);
            } else {
                tab.rows.remove(i);
                tab.basis.remove(i);
                continue;
            }
        }
        i += 1;
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(&lp.objective);
    let allowed: Vec<bool> = (0..cols).map(|j| !is_art(j)).collect();
    if !tab.optimize(&phase2, &allowed, &mut pivots)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(i).max(0.0);
        }
    }
    let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, value })
}

/// Whether team `team` has any feasible incentive-compatible mechanism
/// against the rest of `profile`.
pub fn ic_feasible(spec: &GameSpec, profile: &[MechanismZ], team: usize) -> Result<bool> {
    let sys = ic_constraints(spec, profile, team)?;
    let lp = LinearProgram::from_system(&sys, vec![0.0; sys.num_vars]);
    Ok(!matches!(solve_lp(&lp)?, LpOutcome::Infeasible))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub team: usize,
    pub mechanism: MechanismZ,
    /// Principal payoff of `mechanism` against the fixed opponents.
    pub value: f64,
    /// Optimal value reported by the LP before polishing.
    pub lp_value: f64,
    pub constraint_rows: usize,
    pub ic_rows: usize,
}

/// Constraint system and principal objective for a best response of `team`.
pub fn best_response_program(
    spec: &GameSpec,
    profile: &[MechanismZ],
    team: usize,
) -> Result<(ConstraintSystem, Vec<f64>)> {
    let sys = ic_constraints(spec, profile, team)?;
    let objective = principal_objective(spec, profile, team)?;
    Ok((sys, objective))
}

/// Payoff-maximizing feasible IC mechanism for principal `team`, others fixed.
pub fn best_response(spec: &GameSpec, profile: &[MechanismZ], team: usize) -> Result<BestResponse> {
    spec.check_profile(profile)?;
    let (sys, objective) = best_response_program(spec, profile, team)?;
    let lp = LinearProgram::from_system(&sys, objective.clone());
    match solve_lp(&lp)? {
        LpOutcome::Infeasible => Err(Error::InfeasibleIc { team }),
        LpOutcome::Unbounded => Err(Error::Unbounded),
        LpOutcome::Optimal { x, value } => {
            let mechanism = polish_mechanism(spec, team, &x)?;
            let polished = objective
                .iter()
                .zip(&mechanism.values)
                .map(|(a, b)| a * b)
                .sum();
            Ok(BestResponse {
                team,
                mechanism,
                value: polished,
                lp_value: value,
                constraint_rows: sys.rows.len(),
                ic_rows: sys.ic_rows().count(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnpeReport {
    pub is_equilibrium: bool,
    pub feasible: bool,
    pub incentive_compatible: bool,
    pub optimal: bool,
    /// First feasibility defect, if any.
    pub feasibility_error: Option<String>,
    pub min_slack: f64,
    pub slacks: Vec<f64>,
    /// Current principal payoffs.
    pub values: Vec<f64>,
    /// Best-response payoff minus current payoff, per team.
    pub gains: Vec<f64>,
    pub max_gain: f64,
}

/// Checks feasibility, incentive compatibility and principal optimality of a
/// profile, each to within `tol`.
pub fn verify_bnpe(spec: &GameSpec, profile: &[MechanismZ], tol: f64) -> Result<BnpeReport> {
    spec.check_profile(profile)?;
    let feasibility_error = profile
        .iter()
        .find_map(|m| m.validate(spec, tol).err().map(|e| e.to_string()));
    let ic = is_incentive_compatible(spec, profile, tol)?;
    let mut values = Vec::with_capacity(profile.len());
    let mut gains = Vec::with_capacity(profile.len());
    for team in 0..profile.len() {
        let obj = principal_objective(spec, profile, team)?;
        let current: f64 = obj
            .iter()
            .zip(&profile[team].values)
            .map(|(a, b)| a * b)
            .sum();
        let br = best_response(spec, profile, team)?;
        values.push(current);
        gains.push(br.value.max(br.lp_value) - current);
    }
    let max_gain = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let feasible = feasibility_error.is_none();
    let optimal = max_gain <= tol;
    Ok(BnpeReport {
        is_equilibrium: feasible && ic.compatible && optimal,
        feasible,
        incentive_compatible: ic.compatible,
        optimal,
        feasibility_error,
        min_slack: ic.min_slack,
        slacks: ic.slacks,
        values,
        gains,
        max_gain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// One team moves per step, in index order.
    #[default]
    Alternating,
    /// Every team best-responds to the same profile each step.
    Simultaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsSettings {
    pub schedule: Schedule,
    /// Weight on the new best response: `z <- damping * BR + (1 - damping) * z`.
    pub damping: f64,
    pub max_steps: usize,
    /// Largest entry change over a round that still counts as stationary.
    pub tol: f64,
    /// Tolerance passed to [`verify_bnpe`] at a stationary point.
    pub verify_tol: f64,
    /// Profiles are hashed after rounding to this many decimals.
    pub hash_decimals: u32,
}

impl Default for DynamicsSettings {
    fn default() -> Self {
        Self {
            schedule: Schedule::Alternating,
            damping: 1.0,
            max_steps: 1000,
            tol: 1e-9,
            verify_tol: 1e-7,
            hash_decimals: 6,
        }
    }
}

impl DynamicsSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParams("max_steps must be positive".into()));
        }
        if !(self.tol >= 0.0 && self.verify_tol >= 0.0) {
            return Err(Error::InvalidParams(
                "tolerances must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsStatus {
    Converged,
    Cycle,
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub movers: Vec<usize>,
    /// Best-response payoff of each mover, in `movers` order.
    pub values: Vec<f64>,
    /// Largest entry change applied this step.
    pub change: f64,
}

/// A repeating stretch of the dynamics: `profiles[i]` is the state before
/// step `i` of the cycle, in which `movers[i]` best-respond with payoffs
/// `values[i]`; applying step `period - 1` returns to `profiles[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleCertificate {
    pub start_step: usize,
    pub period: usize,
    pub profiles: Vec<Vec<MechanismZ>>,
    pub movers: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
    pub damping: f64,
}

impl CycleCertificate {
    /// Replays every step and checks it lands on the next listed profile
    /// with the listed payoffs, all to within `tol`.
    pub fn verify(&self, spec: &GameSpec, tol: f64) -> Result<bool> {
        if self.period == 0
            || self.profiles.len() != self.period
            || self.movers.len() != self.period
            || self.values.len() != self.period
        {
            return Ok(false);
        }
        for i in 0..self.period {
            let (next, values) =
                apply_step(spec, &self.profiles[i], &self.movers[i], self.damping)?;
            let target = &self.profiles[(i + 1) % self.period];
            let drift = next
                .iter()
                .zip(target)
                .map(|(a, b)| a.max_abs_diff(b))
                .fold(0.0, f64::max);
            if drift > tol || values.len() != self.values[i].len() {
                return Ok(false);
            }
            if values
                .iter()
                .zip(&self.values[i])
                .any(|(a, b)| (a - b).abs() > tol)
            {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    pub status: DynamicsStatus,
    pub steps: usize,
    pub profile: Vec<MechanismZ>,
    pub history: Vec<StepRecord>,
    pub cycle: Option<CycleCertificate>,
    pub equilibrium: Option<BnpeReport>,
}

fn apply_step(
    spec: &GameSpec,
    profile: &[MechanismZ],
    movers: &[usize],
    damping: f64,
) -> Result<(Vec<MechanismZ>, Vec<f64>)> {
    let mut next = profile.to_vec();
    let mut values = Vec::with_capacity(movers.len());
    for &j in movers {
        let br = best_response(spec, profile, j)?;
        values.push(br.value);
        next[j] = if damping == 1.0 {
            br.mechanism
        } else {
            br.mechanism.mix(&profile[j], damping)
        };
    }
    Ok((next, values))
}

fn state_key(profile: &[MechanismZ], next_mover: usize, decimals: u32) -> Vec<i64> {
    let scale = 10f64.powi(decimals as i32);
    let mut key: Vec<i64> = profile
        .iter()
        .flat_map(|m| m.values.iter().map(move |v| (v * scale).round() as i64))
        .collect();
    key.push(next_mover as i64);
    key
}

/// Iterated best responses from `init` until a verified stationary point, a
/// repeated state, or `max_steps`.
pub fn best_response_dynamics(
    spec: &GameSpec,
    init: &[MechanismZ],
    settings: &DynamicsSettings,
) -> Result<DynamicsReport> {
    settings.validate()?;
    spec.check_profile(init)?;
    let teams = spec.dims().teams;
    let round = match settings.schedule {
        Schedule::Alternating => teams,
        Schedule::Simultaneous => 1,
    };
    let movers_at = |step: usize| match settings.schedule {
        Schedule::Alternating => vec![step % teams],
        Schedule::Simultaneous => (0..teams).collect(),
    };
    let mut profile = init.to_vec();
    let mut states: Vec<Vec<MechanismZ>> = vec![profile.clone()];
    let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
    seen.insert(state_key(&profile, 0, settings.hash_decimals), 0);
    let mut history: Vec<StepRecord> = Vec::new();
    for step in 0..settings.max_steps {
        let movers = movers_at(step);
        let (next, values) = apply_step(spec, &profile, &movers, settings.damping)?;
        let change = next
            .iter()
            .zip(&profile)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max);
        history.push(StepRecord {
            step,
            movers,
            values,
            change,
        });
        profile = next;
        states.push(profile.clone());
        let done = step + 1;

        if done >= round
            && history[done - round..]
                .iter()
                .all(|h| h.change <= settings.tol)
        {
            let report = verify_bnpe(spec, &profile, settings.verify_tol)?;
            if report.is_equilibrium {
                return Ok(DynamicsReport {
                    status: DynamicsStatus::Converged,
                    steps: done,
                    profile,
                    history,
                    cycle: None,
                    equilibrium: Some(report),
                });
            }
        }

        let next_mover = match settings.schedule {
            Schedule::Alternating => done % teams,
            Schedule::Simultaneous => 0,
        };
        let key = state_key(&profile, next_mover, settings.hash_decimals);
        if let Some(&start) = seen.get(&key) {
            let period = done - start;
            let cycle = CycleCertificate {
                start_step: start,
                period,
                profiles: states[start..done].to_vec(),
                movers: history[start..done]
                    .iter()
                    .map(|h| h.movers.clone())
                    .collect(),
                values: history[start..done]
                    .iter()
                    .map(|h| h.values.clone())
                    .collect(),
                damping: settings.damping,
            };
            return Ok(DynamicsReport {
                status: DynamicsStatus::Cycle,
                steps: done,
                profile,
                history,
                cycle: Some(cycle),
                equilibrium: None,
            });
        }
        seen.insert(key, done);
    }
    Ok(DynamicsReport {
        status: DynamicsStatus::MaxSteps,
        steps: settings.max_steps,
        profile,
        history,
        cycle: None,
        equilibrium: None,
    })
}
