//! Builders for the two worked examples: the two-team coordination game with
//! cross-team payoff externalities, and the team contest with a ratio-form
//! contest success function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    deterministic_mechanism, Dims, GameParts, GameSpec, MechanismZ, UtilityDomain, UtilityTable,
};
use crate::spaces::{FiniteSpace, Kernel};

pub const THETA_A: &str = "θA";
pub const THETA_B: &str = "θB";

/// Two teams of one member; types {θA, θB}; actions {A, B, C}; payoffs routed
/// through utility tables over types and implemented actions.
pub fn myerson_scenario() -> GameSpec {
    let types = FiniteSpace::categorical([THETA_A, THETA_B]).expect("labels");
    let actions = FiniteSpace::categorical(["A", "B", "C"]).expect("labels");
    let bottom = FiniteSpace::categorical(["⊥"]).expect("labels");
    let dims = Dims::new(2, 1, 2, 3, 1, 1).expect("fixed sizes");
    const C: usize = 2;

    // cross-team payoff z_j: team 1 earns 2 when team 2 plays A or B; team 2
    // earns 2 when team 1 plays C
    let cross = |team: usize, other_action: usize| -> f64 {
        let other_plays_c = other_action == C;
        match (team, other_plays_c) {
            (0, false) | (1, true) => 2.0,
            _ => 1.0,
        }
    };
    let member_payoff = |team: usize, cell: &crate::model::Cell| -> f64 {
        let own_type = cell.types[team];
        let own = cell.actions[team];
        let z = cross(team, cell.actions[1 - team]);
        match own {
            C => 0.0,
            a if a == own_type => 1.0,
            _ => z,
        }
    };
    let principal_payoff = |team: usize, cell: &crate::model::Cell| -> f64 {
        match cell.actions[team] {
            C => 5.0,
            a if a == cell.types[team] => 6.0,
            _ => 0.0,
        }
    };
    let member_utility = (0..2)
        .map(|j| {
            UtilityTable::from_fn(&dims, UtilityDomain::Member { team: j }, |c| {
                member_payoff(j, c)
            })
            .values()
            .to_vec()
        })
        .collect();
    let principal_utility = (0..2)
        .map(|j| {
            UtilityTable::from_fn(&dims, UtilityDomain::Principal, |c| principal_payoff(j, c))
                .values()
                .to_vec()
        })
        .collect();
    GameSpec::new(GameParts {
        teams: 2,
        members: 1,
        types,
        actions,
        winnings: bottom.clone(),
        rewards: bottom,
        prior: vec![0.25; 4],
        winnings_kernel: vec![vec![1.0]; 4 * 9],
        feasible_rewards: vec![vec![0]],
        member_utility,
        principal_utility,
        obedience_enforced: true,
    })
    .expect("fixed scenario is well formed")
}

/// Mechanism recommending `action` whatever the report.
pub fn always(spec: &GameSpec, team: usize, action: &str) -> Result<MechanismZ> {
    let a = spec
        .actions()
        .position(action)
        .ok_or_else(|| Error::InvalidParams(format!("unknown action {action:?}")))?;
    let d = spec.dims();
    let profile = (0..d.members).fold(0, |acc, _| acc * d.actions + a);
    deterministic_mechanism(spec, team, |_| profile)
}

/// Mechanism recommending, to each member, the action at the same position as
/// their reported type (θA → A, θB → B).
pub fn matching(spec: &GameSpec, team: usize) -> Result<MechanismZ> {
    let d = spec.dims().clone();
    if d.actions < d.types {
        return Err(Error::InvalidParams(
            "matching needs at least as many actions as types".into(),
        ));
    }
    deterministic_mechanism(spec, team, |t| {
        (0..d.members).fold(0, |acc, i| acc * d.actions + d.member_type(t, i))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContestParams {
    pub teams: usize,
    pub members: usize,
    pub type_min: f64,
    pub type_max: f64,
    pub type_points: usize,
    pub action_min: f64,
    pub action_max: f64,
    pub action_points: usize,
    pub cost: f64,
    /// Reward grid step is `1 / reward_steps`.
    pub reward_steps: usize,
    /// Common marginal over the type grid; uniform when absent.
    pub type_marginal: Option<Vec<f64>>,
}

impl Default for ContestParams {
    fn default() -> Self {
        Self {
            teams: 2,
            members: 1,
            type_min: 1.0,
            type_max: 2.0,
            type_points: 2,
            action_min: 0.5,
            action_max: 1.0,
            action_points: 2,
            cost: 0.5,
            reward_steps: 4,
            type_marginal: None,
        }
    }
}

impl ContestParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.teams == 0 || self.members == 0 {
            return bad("need at least one team and one member".into());
        }
        if !(self.type_min > 0.0 && self.type_min < self.type_max && self.type_max.is_finite()) {
            return bad(format!(
                "type grid needs 0 < min < max < inf, got [{}, {}]",
                self.type_min, self.type_max
            ));
        }
        if !(self.action_min > 0.0
            && self.action_min < self.action_max
            && self.action_max.is_finite())
        {
            return bad(format!(
                "action grid needs 0 < min < max < inf, got [{}, {}]",
                self.action_min, self.action_max
            ));
        }
        if self.type_points == 0 || self.action_points == 0 || self.reward_steps == 0 {
            return bad("grid sizes must be positive".into());
        }
        if !(self.cost > 0.0 && self.cost.is_finite()) {
            return bad(format!("cost must be positive, got {}", self.cost));
        }
        if let Some(m) = &self.type_marginal {
            if m.len() != self.type_points {
                return bad(format!(
                    "type marginal has {} entries for {} grid points",
                    m.len(),
                    self.type_points
                ));
            }
        }
        Ok(())
    }

    pub fn type_space(&self) -> Result<FiniteSpace> {
        FiniteSpace::uniform_grid(self.type_min, self.type_max, self.type_points)
    }

    pub fn action_space(&self) -> Result<FiniteSpace> {
        FiniteSpace::uniform_grid(self.action_min, self.action_max, self.action_points)
    }

    pub fn reward_space(&self) -> Result<FiniteSpace> {
        FiniteSpace::uniform_grid(0.0, 1.0, self.reward_steps + 1)
    }
}

/// Team scores `s_j = sum_i t_ij * a_ij` for every type and action profile,
/// rows type-major.
fn scores(
    params: &ContestParams,
    dims: &Dims,
    types: &FiniteSpace,
    actions: &FiniteSpace,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(dims.type_profiles * dims.action_profiles);
    for t in 0..dims.type_profiles {
        for a in 0..dims.action_profiles {
            let s = (0..params.teams)
                .map(|j| {
                    (0..params.members)
                        .map(|i| {
                            let k = j * params.members + i;
                            types.value(dims.agent_type(t, k)).unwrap()
                                * actions.value(dims.agent_action(a, k)).unwrap()
                        })
                        .sum()
                })
                .collect();
            out.push(s);
        }
    }
    out
}

/// Ratio-form winner probabilities `s_j / sum s`.
pub fn ratio_form(scores: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = scores.iter().sum();
    if total.is_nan() || total <= 0.0 || scores.iter().any(|s| *s < 0.0) {
        return Err(Error::InvalidParams(format!(
            "scores must be nonnegative with positive total, got {scores:?}"
        )));
    }
    Ok(scores.iter().map(|s| s / total).collect())
}

/// Row over `W^N = {0,1}^N` with mass `probs[j]` on the vector where only team
/// `j` wins, summing to exactly 1.
pub fn winner_row(probs: &[f64], winnings_profiles: usize) -> Vec<f64> {
    let teams = probs.len();
    let mut row = vec![0.0; winnings_profiles];
    for (j, &pj) in probs.iter().enumerate() {
        row[1usize << (teams - 1 - j)] = pj;
    }
    make_sum_exact(&mut row);
    row
}

/// Moves the rounding residual of a probability vector onto its largest entry
/// until the left-to-right sum is exactly 1.
fn make_sum_exact(row: &mut [f64]) {
    let Some(big) = (0..row.len()).max_by(|&i, &j| row[i].total_cmp(&row[j])) else {
        return;
    };
    for _ in 0..8 {
        let total: f64 = row.iter().sum();
        if total == 1.0 {
            return;
        }
        let fixed = row[big] + (1.0 - total);
        row[big] = if fixed == row[big] {
            if total < 1.0 {
                row[big].next_up()
            } else {
                row[big].next_down()
            }
        } else {
            fixed
        };
    }
}

/// Winnings kernel over `W^N = {0,1}^N` putting mass only on one-hot winner vectors.
pub fn tullock_winnings(params: &ContestParams) -> Result<Kernel> {
    params.validate()?;
    let types = params.type_space()?;
    let actions = params.action_space()?;
    let dims = Dims::new(
        params.teams,
        params.members,
        types.len(),
        actions.len(),
        2,
        params.reward_steps + 1,
    )?;
    let rows = scores(params, &dims, &types, &actions)
        .iter()
        .map(|s| Ok(winner_row(&ratio_form(s)?, dims.winnings_profiles)))
        .collect::<Result<Vec<_>>>()?;
    Kernel::from_rows(dims.winnings_profiles, rows)
}

/// Win probabilities from the output-ranking integral
/// `P(j wins) = int_0^1 prod_{j' != j} F_j'(x) dF_j(x)` with `F_j(x) = x^{s_j}`,
/// evaluated numerically in the variable `u = F_j(x)`.
pub fn winner_probability_integral(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() || scores.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::InvalidParams(format!(
            "scores must be positive, got {scores:?}"
        )));
    }
    Ok((0..scores.len())
        .map(|j| {
            let exps: Vec<f64> = scores
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, s)| s / scores[j])
                .collect();
            let f = |u: f64| exps.iter().map(|e| u.powf(*e)).product::<f64>();
            adaptive_simpson(&f, 0.0, 1.0, 1e-9, 50)
        })
        .collect())
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// The team contest: ratio-form winnings, budget-balanced rewards
/// `sum_i r_i <= w`, member utility `r - c a / t`, principal utility `w_j`.
pub fn contest_scenario(params: &ContestParams) -> Result<GameSpec> {
    params.validate()?;
    let types = params.type_space()?;
    let actions = params.action_space()?;
    let rewards = params.reward_space()?;
    let winnings = FiniteSpace::numeric(&[0.0, 1.0])?;
    let dims = Dims::new(
        params.teams,
        params.members,
        types.len(),
        actions.len(),
        winnings.len(),
        rewards.len(),
    )?;
    let marginal = match &params.type_marginal {
        Some(m) => m.clone(),
        None => vec![1.0 / types.len() as f64; types.len()],
    };
    let prior = (0..dims.type_profiles)
        .map(|t| {
            (0..dims.agents)
                .map(|k| marginal[dims.agent_type(t, k)])
                .product()
        })
        .collect();
    let kernel = tullock_winnings(params)?;
    let winnings_kernel = kernel.rows().iter().map(|r| r.masses().to_vec()).collect();
    let g = params.reward_steps;
    let feasible_rewards = (0..winnings.len())
        .map(|w| {
            let budget = (winnings.value(w).unwrap() * g as f64).round() as usize;
            (0..dims.team_rewards)
                .filter(|&r| {
                    (0..dims.members)
                        .map(|i| dims.member_reward(r, i))
                        .sum::<usize>()
                        <= budget
                })
                .collect()
        })
        .collect();
    let member_utility = (0..dims.agents)
        .map(|k| {
            let (team, member) = (dims.team_of(k), dims.member_of(k));
            UtilityTable::from_fn(&dims, UtilityDomain::Member { team }, |c| {
                let r = rewards.value(c.rewards[member]).unwrap();
                let a = actions.value(c.actions[k]).unwrap();
                let t = types.value(c.types[k]).unwrap();
                r - params.cost * a / t
            })
            .values()
            .to_vec()
        })
        .collect();
    let principal_utility = (0..dims.teams)
        .map(|j| {
            UtilityTable::from_fn(&dims, UtilityDomain::Principal, |c| {
                winnings.value(c.winnings[j]).unwrap()
            })
            .values()
            .to_vec()
        })
        .collect();
    GameSpec::new(GameParts {
        teams: params.teams,
        members: params.members,
        types,
        actions,
        winnings,
        rewards,
        prior,
        winnings_kernel,
        feasible_rewards,
        member_utility,
        principal_utility,
        obedience_enforced: false,
    })
}
