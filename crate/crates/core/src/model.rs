//! Game specification, utility tables and mechanisms in joint coordinates.
//!
//! A team's mechanism is stored as the product table
//! `z(t', a', w, r) = alpha(a' | t') * kappa(r | t', a', w)`, indexed by the
//! team's reported type profile, recommended action profile, own winnings and
//! reward profile. All expectations are linear in `z`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spaces::{validate_kernel, FiniteDistribution, FiniteSpace, Kernel, MASS_TOL};

/// Sizes and place values of every product index used by a game.
///
/// Agents are ordered team-major: agent `k` is member `k % n` of team `k / n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dims {
    pub teams: usize,
    pub members: usize,
    pub types: usize,
    pub actions: usize,
    pub winnings: usize,
    pub rewards: usize,
    pub agents: usize,
    pub type_profiles: usize,
    pub action_profiles: usize,
    pub winnings_profiles: usize,
    pub reward_profiles: usize,
    pub team_types: usize,
    pub team_actions: usize,
    pub team_rewards: usize,
    type_place: Vec<usize>,
    action_place: Vec<usize>,
    team_type_place: Vec<usize>,
    team_action_place: Vec<usize>,
    winnings_place: Vec<usize>,
    reward_place: Vec<usize>,
    member_type_place: Vec<usize>,
    member_action_place: Vec<usize>,
    member_reward_place: Vec<usize>,
}

fn pow(base: usize, exp: usize) -> Result<usize> {
    base.checked_pow(exp as u32)
        .ok_or_else(|| Error::InvalidGame(format!("{base}^{exp} overflows")))
}

fn places(base: usize, digits: usize) -> Vec<usize> {
    (0..digits)
        .map(|p| base.pow((digits - 1 - p) as u32))
        .collect()
}

impl Dims {
    pub fn new(
        teams: usize,
        members: usize,
        types: usize,
        actions: usize,
        winnings: usize,
        rewards: usize,
    ) -> Result<Self> {
        if teams == 0 || members == 0 {
            return Err(Error::InvalidGame(
                "need at least one team and one member".into(),
            ));
        }
        if types == 0 || actions == 0 || winnings == 0 || rewards == 0 {
            return Err(Error::InvalidGame(
                "every space needs at least one point".into(),
            ));
        }
        let agents = teams * members;
        let team_types = pow(types, members)?;
        let team_actions = pow(actions, members)?;
        let team_rewards = pow(rewards, members)?;
        Ok(Self {
            teams,
            members,
            types,
            actions,
            winnings,
            rewards,
            agents,
            type_profiles: pow(types, agents)?,
            action_profiles: pow(actions, agents)?,
            winnings_profiles: pow(winnings, teams)?,
            reward_profiles: pow(team_rewards, teams)?,
            team_types,
            team_actions,
            team_rewards,
            type_place: places(types, agents),
            action_place: places(actions, agents),
            team_type_place: places(team_types, teams),
            team_action_place: places(team_actions, teams),
            winnings_place: places(winnings, teams),
            reward_place: places(team_rewards, teams),
            member_type_place: places(types, members),
            member_action_place: places(actions, members),
            member_reward_place: places(rewards, members),
        })
    }

    pub fn team_of(&self, agent: usize) -> usize {
        agent / self.members
    }

    pub fn member_of(&self, agent: usize) -> usize {
        agent % self.members
    }

    pub fn agent_type(&self, t: usize, agent: usize) -> usize {
        (t / self.type_place[agent]) % self.types
    }

    pub fn agent_action(&self, a: usize, agent: usize) -> usize {
        (a / self.action_place[agent]) % self.actions
    }

    pub fn with_agent_type(&self, t: usize, agent: usize, value: usize) -> usize {
        let old = self.agent_type(t, agent);
        t - old * self.type_place[agent] + value * self.type_place[agent]
    }

    pub fn with_agent_action(&self, a: usize, agent: usize, value: usize) -> usize {
        let old = self.agent_action(a, agent);
        a - old * self.action_place[agent] + value * self.action_place[agent]
    }

    pub fn team_types_of(&self, t: usize, team: usize) -> usize {
        (t / self.team_type_place[team]) % self.team_types
    }

    pub fn team_actions_of(&self, a: usize, team: usize) -> usize {
        (a / self.team_action_place[team]) % self.team_actions
    }

    pub fn team_winnings_of(&self, w: usize, team: usize) -> usize {
        (w / self.winnings_place[team]) % self.winnings
    }

    pub fn team_rewards_of(&self, r: usize, team: usize) -> usize {
        (r / self.reward_place[team]) % self.team_rewards
    }

    /// Combines per-team reward profiles into a full reward profile index.
    pub fn reward_profile(&self, per_team: &[usize]) -> usize {
        per_team
            .iter()
            .zip(&self.reward_place)
            .map(|(r, p)| r * p)
            .sum()
    }

    pub fn member_type(&self, team_t: usize, member: usize) -> usize {
        (team_t / self.member_type_place[member]) % self.types
    }

    pub fn member_action(&self, team_a: usize, member: usize) -> usize {
        (team_a / self.member_action_place[member]) % self.actions
    }

    pub fn member_reward(&self, team_r: usize, member: usize) -> usize {
        (team_r / self.member_reward_place[member]) % self.rewards
    }

    /// Length of one team's `z` table.
    pub fn z_len(&self) -> usize {
        self.team_types * self.team_actions * self.winnings * self.team_rewards
    }

    pub fn z_index(&self, t: usize, a: usize, w: usize, r: usize) -> usize {
        ((t * self.team_actions + a) * self.winnings + w) * self.team_rewards + r
    }

    /// Inverse of [`Dims::z_index`].
    pub fn z_coords(&self, idx: usize) -> (usize, usize, usize, usize) {
        let r = idx % self.team_rewards;
        let rest = idx / self.team_rewards;
        let w = rest % self.winnings;
        let rest = rest / self.winnings;
        (rest / self.team_actions, rest % self.team_actions, w, r)
    }

    /// Cells of the baseline outcome space `T^{nN} x A^{nN} x W^N x R^{nN}`.
    pub fn outcome_cells(&self) -> u128 {
        self.type_profiles as u128
            * self.action_profiles as u128
            * self.winnings_profiles as u128
            * self.reward_profiles as u128
    }

    pub fn outcome_index(&self, t: usize, a: usize, w: usize, r: usize) -> usize {
        ((t * self.action_profiles + a) * self.winnings_profiles + w) * self.reward_profiles + r
    }

    pub fn outcome_coords(&self, x: usize) -> (usize, usize, usize, usize) {
        let r = x % self.reward_profiles;
        let rest = x / self.reward_profiles;
        let w = rest % self.winnings_profiles;
        let rest = rest / self.winnings_profiles;
        (
            rest / self.action_profiles,
            rest % self.action_profiles,
            w,
            r,
        )
    }
}

/// What a utility table is indexed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UtilityDomain {
    /// `(type profile, action profile, winnings profile, own-team reward profile)`.
    Member { team: usize },
    /// `(type profile, action profile, winnings profile)`.
    Principal,
}

/// Decoded coordinates handed to table builders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell<'a> {
    pub types: &'a [usize],
    pub actions: &'a [usize],
    pub winnings: &'a [usize],
    /// Own-team member rewards (empty for principal tables).
    pub rewards: &'a [usize],
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    domain: UtilityDomain,
    values: Vec<f64>,
}

impl UtilityTable {
    pub fn expected_len(dims: &Dims, domain: UtilityDomain) -> usize {
        let base = dims.type_profiles * dims.action_profiles * dims.winnings_profiles;
        match domain {
            UtilityDomain::Member { .. } => base * dims.team_rewards,
            UtilityDomain::Principal => base,
        }
    }

    pub fn new(dims: &Dims, domain: UtilityDomain, values: Vec<f64>) -> Result<Self> {
        let expected = Self::expected_len(dims, domain);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self { domain, values })
    }

    pub fn from_fn(dims: &Dims, domain: UtilityDomain, f: impl Fn(&Cell) -> f64) -> Self {
        let len = Self::expected_len(dims, domain);
        let mut values = Vec::with_capacity(len);
        let mut types = vec![0; dims.agents];
        let mut actions = vec![0; dims.agents];
        let mut winnings = vec![0; dims.teams];
        let mut rewards = vec![0; dims.members];
        let reward_span = match domain {
            UtilityDomain::Member { .. } => dims.team_rewards,
            UtilityDomain::Principal => 1,
        };
        for t in 0..dims.type_profiles {
            for (k, slot) in types.iter_mut().enumerate() {
                *slot = dims.agent_type(t, k);
            }
            for a in 0..dims.action_profiles {
                for (k, slot) in actions.iter_mut().enumerate() {
                    *slot = dims.agent_action(a, k);
                }
                for w in 0..dims.winnings_profiles {
                    for (j, slot) in winnings.iter_mut().enumerate() {
                        *slot = dims.team_winnings_of(w, j);
                    }
                    for r in 0..reward_span {
                        let own: &[usize] = match domain {
                            UtilityDomain::Member { .. } => {
                                for (i, slot) in rewards.iter_mut().enumerate() {
                                    *slot = dims.member_reward(r, i);
                                }
                                &rewards
                            }
                            UtilityDomain::Principal => &[],
                        };
                        values.push(f(&Cell {
                            types: &types,
                            actions: &actions,
                            winnings: &winnings,
                            rewards: own,
                        }));
                    }
                }
            }
        }
        Self { domain, values }
    }

    pub fn domain(&self) -> UtilityDomain {
        self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at an outcome `(t, a, w, r)` given as profile indices.
    pub fn at(&self, dims: &Dims, t: usize, a: usize, w: usize, r: usize) -> f64 {
        let base = (t * dims.action_profiles + a) * dims.winnings_profiles + w;
        match self.domain {
            UtilityDomain::Member { team } => {
                self.values[base * dims.team_rewards + dims.team_rewards_of(r, team)]
            }
            UtilityDomain::Principal => self.values[base],
        }
    }

    /// Value with the own-team reward profile given directly.
    pub(crate) fn at_team_reward(
        &self,
        dims: &Dims,
        t: usize,
        a: usize,
        w: usize,
        team_r: usize,
    ) -> f64 {
        let base = (t * dims.action_profiles + a) * dims.winnings_profiles + w;
        match self.domain {
            UtilityDomain::Member { .. } => self.values[base * dims.team_rewards + team_r],
            UtilityDomain::Principal => self.values[base],
        }
    }
}

/// Raw parts of a game; [`GameSpec::new`] checks shapes.
#[derive(Debug, Clone)]
pub struct GameParts {
    pub teams: usize,
    pub members: usize,
    pub types: FiniteSpace,
    pub actions: FiniteSpace,
    pub winnings: FiniteSpace,
    pub rewards: FiniteSpace,
    /// Masses over `T^{nN}`.
    pub prior: Vec<f64>,
    /// One row over `W^N` per `(type profile, action profile)`, type-major.
    pub winnings_kernel: Vec<Vec<f64>>,
    /// Per team winnings value: feasible own-team reward profiles (indices into `R^n`).
    pub feasible_rewards: Vec<Vec<usize>>,
    /// One table per agent, team-major.
    pub member_utility: Vec<Vec<f64>>,
    pub principal_utility: Vec<Vec<f64>>,
    pub obedience_enforced: bool,
}

/// The complete finite game.
#[derive(Debug, Clone)]
pub struct GameSpec {
    dims: Dims,
    types: FiniteSpace,
    actions: FiniteSpace,
    winnings: FiniteSpace,
    rewards: FiniteSpace,
    prior: FiniteDistribution,
    winnings_kernel: Kernel,
    feasible_rewards: Vec<Vec<usize>>,
    feasible_mask: Vec<Vec<bool>>,
    member_utility: Vec<UtilityTable>,
    principal_utility: Vec<UtilityTable>,
    obedience_enforced: bool,
}

impl GameSpec {
    pub fn new(parts: GameParts) -> Result<Self> {
        let dims = Dims::new(
            parts.teams,
            parts.members,
            parts.types.len(),
            parts.actions.len(),
            parts.winnings.len(),
            parts.rewards.len(),
        )?;
        if parts.prior.len() != dims.type_profiles {
            return Err(Error::InvalidGame(format!(
                "prior has {} entries, expected {}",
                parts.prior.len(),
                dims.type_profiles
            )));
        }
        let kernel_rows = dims.type_profiles * dims.action_profiles;
        if parts.winnings_kernel.len() != kernel_rows {
            return Err(Error::InvalidGame(format!(
                "winnings kernel has {} rows, expected {kernel_rows}",
                parts.winnings_kernel.len()
            )));
        }
        let winnings_kernel = Kernel::from_rows(dims.winnings_profiles, parts.winnings_kernel)?;
        if parts.feasible_rewards.len() != dims.winnings {
            return Err(Error::InvalidGame(format!(
                "feasible rewards given for {} winnings values, expected {}",
                parts.feasible_rewards.len(),
                dims.winnings
            )));
        }
        let mut feasible_rewards = parts.feasible_rewards;
        let mut feasible_mask = Vec::with_capacity(dims.winnings);
        for set in feasible_rewards.iter_mut() {
            set.sort_unstable();
            set.dedup();
            let mut mask = vec![false; dims.team_rewards];
            for &r in set.iter() {
                if r >= dims.team_rewards {
                    return Err(Error::InvalidGame(format!(
                        "feasible reward profile {r} outside R^n ({})",
                        dims.team_rewards
                    )));
                }
                mask[r] = true;
            }
            feasible_mask.push(mask);
        }
        if parts.member_utility.len() != dims.agents {
            return Err(Error::InvalidGame(format!(
                "{} member utility tables for {} agents",
                parts.member_utility.len(),
                dims.agents
            )));
        }
        if parts.principal_utility.len() != dims.teams {
            return Err(Error::InvalidGame(format!(
                "{} principal utility tables for {} teams",
                parts.principal_utility.len(),
                dims.teams
            )));
        }
        let member_utility = parts
            .member_utility
            .into_iter()
            .enumerate()
            .map(|(k, v)| {
                UtilityTable::new(
                    &dims,
                    UtilityDomain::Member {
                        team: dims.team_of(k),
                    },
                    v,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let principal_utility = parts
            .principal_utility
            .into_iter()
            .map(|v| UtilityTable::new(&dims, UtilityDomain::Principal, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims,
            types: parts.types,
            actions: parts.actions,
            winnings: parts.winnings,
            rewards: parts.rewards,
            prior: FiniteDistribution::unchecked(parts.prior),
            winnings_kernel,
            feasible_rewards,
            feasible_mask,
            member_utility,
            principal_utility,
            obedience_enforced: parts.obedience_enforced,
        })
    }

    pub fn dims(&self) -> &Dims {
        &self.dims
    }

    pub fn types(&self) -> &FiniteSpace {
        &self.types
    }

    pub fn actions(&self) -> &FiniteSpace {
        &self.actions
    }

    pub fn winnings(&self) -> &FiniteSpace {
        &self.winnings
    }

    pub fn rewards(&self) -> &FiniteSpace {
        &self.rewards
    }

    pub fn prior(&self) -> &FiniteDistribution {
        &self.prior
    }

    pub fn winnings_kernel(&self) -> &Kernel {
        &self.winnings_kernel
    }

    pub fn feasible_rewards(&self, w: usize) -> &[usize] {
        &self.feasible_rewards[w]
    }

    pub fn is_feasible_reward(&self, w: usize, team_r: usize) -> bool {
        self.feasible_mask[w][team_r]
    }

    pub fn member_utility(&self, agent: usize) -> &UtilityTable {
        &self.member_utility[agent]
    }

    pub fn principal_utility(&self, team: usize) -> &UtilityTable {
        &self.principal_utility[team]
    }

    pub fn obedience_enforced(&self) -> bool {
        self.obedience_enforced
    }

    pub fn set_obedience_enforced(&mut self, on: bool) {
        self.obedience_enforced = on;
    }

    /// `Lambda(w | t, a)`.
    pub fn winnings_prob(&self, t: usize, a: usize, w: usize) -> f64 {
        self.winnings_kernel
            .prob(t * self.dims.action_profiles + a, w)
    }

    /// Label tuple of a team's reported type profile.
    pub fn team_type_labels(&self, team_t: usize) -> Vec<String> {
        (0..self.dims.members)
            .map(|i| {
                self.types
                    .label(self.dims.member_type(team_t, i))
                    .to_string()
            })
            .collect()
    }

    pub fn team_action_labels(&self, team_a: usize) -> Vec<String> {
        (0..self.dims.members)
            .map(|i| {
                self.actions
                    .label(self.dims.member_action(team_a, i))
                    .to_string()
            })
            .collect()
    }

    pub fn team_reward_labels(&self, team_r: usize) -> Vec<String> {
        (0..self.dims.members)
            .map(|i| {
                self.rewards
                    .label(self.dims.member_reward(team_r, i))
                    .to_string()
            })
            .collect()
    }

    pub fn check_profile(&self, profile: &[MechanismZ]) -> Result<()> {
        if profile.len() != self.dims.teams {
            return Err(Error::ProfileMismatch {
                expected: self.dims.teams,
                got: profile.len(),
            });
        }
        for (j, m) in profile.iter().enumerate() {
            if m.values.len() != self.dims.z_len() {
                return Err(Error::InvalidMechanism {
                    team: j,
                    reason: format!(
                        "table has {} entries, expected {}",
                        m.values.len(),
                        self.dims.z_len()
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// Finite metric spaces and the type prior on them.
    AmbientSpaces,
    /// The winnings transition probability.
    WinningsKernel,
    /// Nonempty feasible reward sets.
    FeasibleRewards,
    /// Bounded utility functions.
    BoundedUtilities,
}

impl Assumption {
    pub fn number(self) -> u8 {
        match self {
            Assumption::AmbientSpaces => 1,
            Assumption::WinningsKernel => 2,
            Assumption::FeasibleRewards => 3,
            Assumption::BoundedUtilities => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionViolation {
    pub assumption: Assumption,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecReport {
    pub violations: Vec<AssumptionViolation>,
    pub notes: Vec<String>,
}

impl SpecReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the standing assumptions on a finite game and reports every violation.
pub fn check_spec(spec: &GameSpec) -> SpecReport {
    let mut violations = Vec::new();
    let mut push = |assumption, message: String| {
        violations.push(AssumptionViolation {
            assumption,
            message,
        })
    };
    if let Some(defect) = spec.prior.defect() {
        let msg = match defect {
            crate::spaces::RowDefect::Sum { total } => {
                format!("prior not normalized (total mass {total})")
            }
            other => format!("prior invalid: {other}"),
        };
        push(Assumption::AmbientSpaces, msg);
    }
    if let Err(v) = validate_kernel(&spec.winnings_kernel) {
        push(
            Assumption::WinningsKernel,
            format!("winnings kernel invalid at {v}"),
        );
    }
    for (w, set) in spec.feasible_rewards.iter().enumerate() {
        if set.is_empty() {
            push(
                Assumption::FeasibleRewards,
                format!(
                    "feasible reward set empty for winnings {:?}",
                    spec.winnings.label(w)
                ),
            );
        }
    }
    let tables = spec
        .member_utility
        .iter()
        .enumerate()
        .map(|(k, t)| (format!("member utility of agent {k}"), t))
        .chain(
            spec.principal_utility
                .iter()
                .enumerate()
                .map(|(j, t)| (format!("principal utility of team {j}"), t)),
        );
    for (name, table) in tables {
        if let Some(i) = table.values.iter().position(|v| !v.is_finite()) {
            push(
                Assumption::BoundedUtilities,
                format!("{name} has a non-finite entry at cell {i}"),
            );
        }
    }
    let notes = vec![
        "assumptions: satisfied by finiteness (compactness and continuity hold on finite grids)"
            .to_string(),
    ];
    SpecReport { violations, notes }
}

/// One team's mechanism in joint coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MechanismZ {
    pub team: usize,
    pub values: Vec<f64>,
}

impl MechanismZ {
    /// Validated construction (tolerance [`MASS_TOL`]).
    pub fn new(spec: &GameSpec, team: usize, values: Vec<f64>) -> Result<Self> {
        let m = Self { team, values };
        m.validate(spec, MASS_TOL)?;
        Ok(m)
    }

    pub fn unchecked(team: usize, values: Vec<f64>) -> Self {
        Self { team, values }
    }

    pub fn get(&self, dims: &Dims, t: usize, a: usize, w: usize, r: usize) -> f64 {
        self.values[dims.z_index(t, a, w, r)]
    }

    /// Action marginal `alpha(a | t)`, read at the first winnings value.
    pub fn alpha(&self, dims: &Dims, t: usize, a: usize) -> f64 {
        let start = dims.z_index(t, a, 0, 0);
        self.values[start..start + dims.team_rewards].iter().sum()
    }

    /// Checks nonnegativity, normalization, marginal consistency and support.
    pub fn validate(&self, spec: &GameSpec, tol: f64) -> Result<()> {
        let d = spec.dims();
        let bad = |reason: String| Error::InvalidMechanism {
            team: self.team,
            reason,
        };
        if self.team >= d.teams {
            return Err(bad(format!("team index out of range ({} teams)", d.teams)));
        }
        if self.values.len() != d.z_len() {
            return Err(bad(format!(
                "table has {} entries, expected {}",
                self.values.len(),
                d.z_len()
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(bad(format!(
                "negative or non-finite entry {}",
                self.values[i]
            )));
        }
        for t in 0..d.team_types {
            let mut first_marginal = vec![0.0; d.team_actions];
            for w in 0..d.winnings {
                let mut total = 0.0;
                for (a, first) in first_marginal.iter_mut().enumerate() {
                    let mut marginal = 0.0;
                    for r in 0..d.team_rewards {
                        let v = self.get(d, t, a, w, r);
                        if v > 0.0 && !spec.is_feasible_reward(w, r) {
                            return Err(Error::SupportViolation {
                                location: format!(
                                    "team {} report {:?} action {:?} winnings {:?}",
                                    self.team,
                                    spec.team_type_labels(t),
                                    spec.team_action_labels(a),
                                    spec.winnings().label(w)
                                ),
                                reward: r,
                            });
                        }
                        marginal += v;
                    }
                    if w == 0 {
                        *first = marginal;
                    } else if (marginal - *first).abs() > tol {
                        return Err(bad(format!(
                            "action marginal for report {t} action {a} differs across winnings ({} vs {})",
                            *first, marginal
                        )));
                    }
                    total += marginal;
                }
                if (total - 1.0).abs() > tol {
                    return Err(bad(format!(
                        "row (report {t}, winnings {w}) sums to {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &MechanismZ, lambda: f64) -> MechanismZ {
        MechanismZ {
            team: self.team,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &MechanismZ) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// A mechanism as its two kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismFactored {
    pub team: usize,
    /// Rows indexed by reported team type profile, over team action profiles.
    pub alpha: Kernel,
    /// Rows indexed by `(report, recommendation, winnings)`, over team reward profiles.
    pub kappa: Kernel,
}

/// `z(t', a', w, r) = alpha(a' | t') * kappa(r | t', a', w)`.
pub fn compose_mechanism(m: &MechanismFactored, spec: &GameSpec) -> Result<MechanismZ> {
    let d = spec.dims();
    let shape = |what: &str, expected: (usize, usize), got: (usize, usize)| {
        if expected != got {
            Err(Error::InvalidMechanism {
                team: m.team,
                reason: format!("{what} kernel is {got:?}, expected {expected:?}"),
            })
        } else {
            Ok(())
        }
    };
    shape(
        "alpha",
        (d.team_types, d.team_actions),
        (m.alpha.source_len(), m.alpha.target_len()),
    )?;
    shape(
        "kappa",
        (d.team_types * d.team_actions * d.winnings, d.team_rewards),
        (m.kappa.source_len(), m.kappa.target_len()),
    )?;
    let mut values = vec![0.0; d.z_len()];
    for t in 0..d.team_types {
        for a in 0..d.team_actions {
            let alpha = m.alpha.prob(t, a);
            for w in 0..d.winnings {
                let row = (t * d.team_actions + a) * d.winnings + w;
                for r in 0..d.team_rewards {
                    let k = m.kappa.prob(row, r);
                    if k > 0.0 && !spec.is_feasible_reward(w, r) {
                        return Err(Error::SupportViolation {
                            location: format!("kappa row (report {t}, action {a}, winnings {w})"),
                            reward: r,
                        });
                    }
                    values[d.z_index(t, a, w, r)] = alpha * k;
                }
            }
        }
    }
    Ok(MechanismZ {
        team: m.team,
        values,
    })
}

/// Threshold below which an action marginal counts as zero when factoring.
pub const ALPHA_ZERO: f64 = 1e-12;

/// Recovers `(alpha, kappa)` from `z`. Rows of `kappa` behind a zero action
/// marginal are uniform over the feasible rewards.
pub fn factor_mechanism(z: &MechanismZ, spec: &GameSpec) -> MechanismFactored {
    let d = spec.dims();
    let mut alpha = Vec::with_capacity(d.team_types);
    let mut kappa = Vec::with_capacity(d.team_types * d.team_actions * d.winnings);
    for t in 0..d.team_types {
        let row: Vec<f64> = (0..d.team_actions).map(|a| z.alpha(d, t, a)).collect();
        for (a, &al) in row.iter().enumerate() {
            for w in 0..d.winnings {
                let krow = if al > ALPHA_ZERO {
                    (0..d.team_rewards)
                        .map(|r| z.get(d, t, a, w, r) / al)
                        .collect()
                } else {
                    uniform_over(spec.feasible_rewards(w), d.team_rewards)
                };
                kappa.push(krow);
            }
        }
        alpha.push(row);
    }
    MechanismFactored {
        team: z.team,
        alpha: Kernel::from_rows(d.team_actions, alpha).expect("alpha rows sized"),
        kappa: Kernel::from_rows(d.team_rewards, kappa).expect("kappa rows sized"),
    }
}

fn uniform_over(support: &[usize], len: usize) -> Vec<f64> {
    let mut row = vec![0.0; len];
    if !support.is_empty() {
        let m = 1.0 / support.len() as f64;
        for &r in support {
            row[r] = m;
        }
    }
    row
}

/// Mechanism with the given action kernel and uniform rewards over each feasible set.
pub fn mechanism_from_alpha(
    spec: &GameSpec,
    team: usize,
    alpha: Vec<Vec<f64>>,
) -> Result<MechanismZ> {
    let d = spec.dims();
    let alpha = Kernel::from_rows(d.team_actions, alpha)?;
    if alpha.source_len() != d.team_types {
        return Err(Error::InvalidMechanism {
            team,
            reason: format!(
                "alpha has {} rows, expected {}",
                alpha.source_len(),
                d.team_types
            ),
        });
    }
    let mut kappa = Vec::new();
    for _t in 0..d.team_types {
        for _a in 0..d.team_actions {
            for w in 0..d.winnings {
                kappa.push(uniform_over(spec.feasible_rewards(w), d.team_rewards));
            }
        }
    }
    let m = MechanismFactored {
        team,
        alpha,
        kappa: Kernel::from_rows(d.team_rewards, kappa)?,
    };
    compose_mechanism(&m, spec)
}

/// Deterministic recommendation `rule(report) -> recommended team action profile`.
pub fn deterministic_mechanism(
    spec: &GameSpec,
    team: usize,
    rule: impl Fn(usize) -> usize,
) -> Result<MechanismZ> {
    let d = spec.dims();
    let alpha = (0..d.team_types)
        .map(|t| {
            let mut row = vec![0.0; d.team_actions];
            row[rule(t)] = 1.0;
            row
        })
        .collect();
    mechanism_from_alpha(spec, team, alpha)
}

pub fn uniform_mechanism(spec: &GameSpec, team: usize) -> Result<MechanismZ> {
    let d = spec.dims();
    let row = vec![1.0 / d.team_actions as f64; d.team_actions];
    mechanism_from_alpha(spec, team, vec![row; d.team_types])
}

/// Cleans an approximately valid table (e.g. an LP solution): clips negatives,
/// zeroes infeasible rewards, renormalizes both kernels and recomposes.
pub fn polish_mechanism(spec: &GameSpec, team: usize, values: &[f64]) -> Result<MechanismZ> {
    let d = spec.dims();
    let mut cleaned: Vec<f64> = values
        .iter()
        .map(|&v| if v > ALPHA_ZERO { v } else { 0.0 })
        .collect();
    for (idx, v) in cleaned.iter_mut().enumerate() {
        let (_, _, w, r) = d.z_coords(idx);
        if !spec.is_feasible_reward(w, r) {
            *v = 0.0;
        }
    }
    let raw = MechanismZ::unchecked(team, cleaned);
    let f = factor_mechanism(&raw, spec);
    let normalize = |rows: &[FiniteDistribution]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|row| {
                let s = row.total();
                row.masses().iter().map(|m| m / s).collect()
            })
            .collect()
    };
    let alpha = Kernel::from_rows(d.team_actions, normalize(f.alpha.rows()))?;
    let kappa = Kernel::from_rows(d.team_rewards, normalize(f.kappa.rows()))?;
    compose_mechanism(&MechanismFactored { team, alpha, kappa }, spec)
}
