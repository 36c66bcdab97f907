//! Scenario configuration files (TOML).

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use teamgame::model::{Dims, UtilityDomain, UtilityTable};
use teamgame::scenarios::{
    contest_scenario, myerson_scenario, ratio_form, winner_row, ContestParams,
};
use teamgame::solver::{DynamicsSettings, Schedule};
use teamgame::spaces::FiniteSpace;
use teamgame::{GameParts, GameSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    Myerson,
    TullockContest,
    Custom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelId,
    pub teams: Option<usize>,
    pub members: Option<usize>,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub contest: Option<ContestParams>,
    pub spaces: Option<SpacesConfig>,
    pub prior: Option<PriorConfig>,
    pub winnings: Option<WinningsConfig>,
    pub rewards: Option<RewardsConfig>,
    pub utilities: Option<UtilitiesConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub obedience_enforced: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub schedule: Schedule,
    pub damping: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub verify_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = DynamicsSettings::default();
        Self {
            schedule: d.schedule,
            damping: d.damping,
            max_iter: d.max_steps,
            tol: d.tol,
            verify_tol: d.verify_tol,
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> DynamicsSettings {
        DynamicsSettings {
            schedule: self.schedule,
            damping: self.damping,
            max_steps: self.max_iter,
            tol: self.tol,
            verify_tol: self.verify_tol,
            ..DynamicsSettings::default()
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacesConfig {
    pub types: SpaceConfig,
    pub actions: SpaceConfig,
    pub winnings: SpaceConfig,
    pub rewards: SpaceConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SpaceConfig {
    Numeric(Vec<f64>),
    Labels(Vec<String>),
    Grid { min: f64, max: f64, points: usize },
}

impl SpaceConfig {
    fn build(&self, field: &str) -> Result<FiniteSpace> {
        let space = match self {
            SpaceConfig::Numeric(v) => FiniteSpace::numeric(v),
            SpaceConfig::Labels(l) => FiniteSpace::categorical(l.iter().map(String::as_str)),
            SpaceConfig::Grid { min, max, points } => {
                FiniteSpace::uniform_grid(*min, *max, *points)
            }
        };
        space.with_context(|| format!("spaces.{field}"))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PriorConfig {
    /// `"independent_uniform"`.
    Named(String),
    /// Masses over type profiles.
    Table(Vec<f64>),
    /// Independent types with a common marginal.
    Marginal { marginal: Vec<f64> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum WinningsConfig {
    Table { table: Vec<Vec<f64>> },
    Model { model: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RewardsConfig {
    Sets { feasible: Vec<Vec<usize>> },
    Rule { rule: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum UtilitiesConfig {
    Tables {
        member: Vec<Vec<f64>>,
        principal: Vec<Vec<f64>>,
    },
    Rule {
        rule: String,
        cost: f64,
    },
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn settings(&self) -> Result<DynamicsSettings> {
        let s = self.solver.settings();
        s.validate().context("solver")?;
        Ok(s)
    }

    pub fn build(&self) -> Result<GameSpec> {
        let stray = |name: &str, present: bool| -> Result<()> {
            if present {
                bail!("{name}: only allowed with model = \"custom\"");
            }
            Ok(())
        };
        if self.model != ModelId::Custom {
            stray("teams", self.teams.is_some())?;
            stray("members", self.members.is_some())?;
            stray("spaces", self.spaces.is_some())?;
            stray("prior", self.prior.is_some())?;
            stray("winnings", self.winnings.is_some())?;
            stray("rewards", self.rewards.is_some())?;
            stray("utilities", self.utilities.is_some())?;
        }
        if self.model != ModelId::TullockContest && self.contest.is_some() {
            bail!("contest: only allowed with model = \"tullock_contest\"");
        }
        let mut spec = match self.model {
            ModelId::Myerson => myerson_scenario(),
            ModelId::TullockContest => {
                contest_scenario(&self.contest.clone().unwrap_or_default()).context("contest")?
            }
            ModelId::Custom => self.build_custom()?,
        };
        if let Some(flag) = self.mode.obedience_enforced {
            spec.set_obedience_enforced(flag);
        }
        Ok(spec)
    }

    fn build_custom(&self) -> Result<GameSpec> {
        let need = |name: &str| anyhow!("{name}: required for model = \"custom\"");
        let teams = self.teams.ok_or_else(|| need("teams"))?;
        let members = self.members.ok_or_else(|| need("members"))?;
        let spaces = self.spaces.as_ref().ok_or_else(|| need("spaces"))?;
        let types = spaces.types.build("types")?;
        let actions = spaces.actions.build("actions")?;
        let winnings = spaces.winnings.build("winnings")?;
        let rewards = spaces.rewards.build("rewards")?;
        let dims = Dims::new(
            teams,
            members,
            types.len(),
            actions.len(),
            winnings.len(),
            rewards.len(),
        )?;

        let prior = match self.prior.as_ref().ok_or_else(|| need("prior"))? {
            PriorConfig::Named(name) if name == "independent_uniform" => {
                vec![1.0 / dims.type_profiles as f64; dims.type_profiles]
            }
            PriorConfig::Named(name) => {
                bail!("prior: unknown prior {name:?} (expected \"independent_uniform\")")
            }
            PriorConfig::Table(t) => {
                if t.len() != dims.type_profiles {
                    bail!(
                        "prior: {} masses for {} type profiles",
                        t.len(),
                        dims.type_profiles
                    );
                }
                t.clone()
            }
            PriorConfig::Marginal { marginal } => {
                if marginal.len() != dims.types {
                    bail!(
                        "prior.marginal: {} masses for {} types",
                        marginal.len(),
                        dims.types
                    );
                }
                (0..dims.type_profiles)
                    .map(|t| {
                        (0..dims.agents)
                            .map(|k| marginal[dims.agent_type(t, k)])
                            .product()
                    })
                    .collect()
            }
        };

        let winnings_kernel = match self.winnings.as_ref().ok_or_else(|| need("winnings"))? {
            WinningsConfig::Table { table } => {
                let rows = dims.type_profiles * dims.action_profiles;
                if table.len() != rows {
                    bail!("winnings.table: {} rows, expected {rows}", table.len());
                }
                if let Some(i) = table.iter().position(|r| r.len() != dims.winnings_profiles) {
                    bail!(
                        "winnings.table: row {i} has {} entries, expected {}",
                        table[i].len(),
                        dims.winnings_profiles
                    );
                }
                table.clone()
            }
            WinningsConfig::Model { model } if model == "ratio_form" => {
                ratio_form_kernel(&dims, &types, &actions, &winnings)?
            }
            WinningsConfig::Model { model } => {
                bail!("winnings.model: unknown model {model:?} (expected \"ratio_form\")")
            }
        };

        let feasible_rewards = match self.rewards.as_ref().ok_or_else(|| need("rewards"))? {
            RewardsConfig::Sets { feasible } => {
                if feasible.len() != dims.winnings {
                    bail!(
                        "rewards.feasible: {} sets for {} winnings values",
                        feasible.len(),
                        dims.winnings
                    );
                }
                for (w, set) in feasible.iter().enumerate() {
                    if let Some(r) = set.iter().find(|&&r| r >= dims.team_rewards) {
                        bail!(
                            "rewards.feasible[{w}]: reward profile index {r} out of range ({})",
                            dims.team_rewards
                        );
                    }
                }
                feasible.clone()
            }
            RewardsConfig::Rule { rule } if rule == "all" => {
                vec![(0..dims.team_rewards).collect(); dims.winnings]
            }
            RewardsConfig::Rule { rule } if rule == "budget" => {
                budget_sets(&dims, &winnings, &rewards)?
            }
            RewardsConfig::Rule { rule } => {
                bail!("rewards.rule: unknown rule {rule:?} (expected \"all\" or \"budget\")")
            }
        };

        let (member_utility, principal_utility) =
            match self.utilities.as_ref().ok_or_else(|| need("utilities"))? {
                UtilitiesConfig::Tables { member, principal } => {
                    if member.len() != dims.agents {
                        bail!(
                            "utilities.member: {} tables for {} agents",
                            member.len(),
                            dims.agents
                        );
                    }
                    if principal.len() != teams {
                        bail!(
                            "utilities.principal: {} tables for {teams} teams",
                            principal.len()
                        );
                    }
                    (member.clone(), principal.clone())
                }
                UtilitiesConfig::Rule { rule, cost } if rule == "contest" => {
                    contest_utilities(&dims, &types, &actions, &winnings, &rewards, *cost)?
                }
                UtilitiesConfig::Rule { rule, .. } => {
                    bail!("utilities.rule: unknown rule {rule:?} (expected \"contest\")")
                }
            };

        Ok(GameSpec::new(GameParts {
            teams,
            members,
            types,
            actions,
            winnings,
            rewards,
            prior,
            winnings_kernel,
            feasible_rewards,
            member_utility,
            principal_utility,
            obedience_enforced: self.mode.obedience_enforced.unwrap_or(false),
        })?)
    }
}

fn numeric(space: &FiniteSpace, field: &str, i: usize) -> Result<f64> {
    space
        .value(i)
        .ok_or_else(|| anyhow!("spaces.{field}: numeric values required by this rule"))
}

/// Winner-take-all over `W = {lose, win}` with ratio-form probabilities of
/// team scores `sum_i t_i a_i`.
fn ratio_form_kernel(
    dims: &Dims,
    types: &FiniteSpace,
    actions: &FiniteSpace,
    winnings: &FiniteSpace,
) -> Result<Vec<Vec<f64>>> {
    if winnings.len() != 2 {
        bail!("winnings.model = \"ratio_form\" needs exactly two winnings values (lose, win)");
    }
    let mut rows = Vec::with_capacity(dims.type_profiles * dims.action_profiles);
    for t in 0..dims.type_profiles {
        for a in 0..dims.action_profiles {
            let mut scores = vec![0.0; dims.teams];
            for (k, s) in (0..dims.agents).map(|k| (k, dims.team_of(k))) {
                scores[s] += numeric(types, "types", dims.agent_type(t, k))?
                    * numeric(actions, "actions", dims.agent_action(a, k))?;
            }
            let p = ratio_form(&scores).context("winnings.model")?;
            rows.push(winner_row(&p, dims.winnings_profiles));
        }
    }
    Ok(rows)
}

/// Team reward profiles whose values sum to at most the winnings value.
fn budget_sets(
    dims: &Dims,
    winnings: &FiniteSpace,
    rewards: &FiniteSpace,
) -> Result<Vec<Vec<usize>>> {
    (0..dims.winnings)
        .map(|w| {
            let cap = numeric(winnings, "winnings", w)?;
            let mut set = Vec::new();
            for r in 0..dims.team_rewards {
                let mut total = 0.0;
                for i in 0..dims.members {
                    total += numeric(rewards, "rewards", dims.member_reward(r, i))?;
                }
                if total <= cap + 1e-12 {
                    set.push(r);
                }
            }
            Ok(set)
        })
        .collect()
}

/// One flat utility table per agent or team.
type Tables = Vec<Vec<f64>>;

/// Member utility `r - cost * a / t`; principal utility is the team's winnings.
fn contest_utilities(
    dims: &Dims,
    types: &FiniteSpace,
    actions: &FiniteSpace,
    winnings: &FiniteSpace,
    rewards: &FiniteSpace,
    cost: f64,
) -> Result<(Tables, Tables)> {
    for (space, field) in [
        (types, "types"),
        (actions, "actions"),
        (winnings, "winnings"),
        (rewards, "rewards"),
    ] {
        numeric(space, field, 0)?;
    }
    if types.values().unwrap().iter().any(|v| v[0] <= 0.0) {
        bail!("spaces.types: the contest rule divides by the type, so types must be positive");
    }
    let member = (0..dims.agents)
        .map(|k| {
            let (team, i) = (dims.team_of(k), dims.member_of(k));
            UtilityTable::from_fn(dims, UtilityDomain::Member { team }, |c| {
                rewards.value(c.rewards[i]).unwrap()
                    - cost * actions.value(c.actions[k]).unwrap() / types.value(c.types[k]).unwrap()
            })
            .values()
            .to_vec()
        })
        .collect();
    let principal = (0..dims.teams)
        .map(|j| {
            UtilityTable::from_fn(dims, UtilityDomain::Principal, |c| {
                winnings.value(c.winnings[j]).unwrap()
            })
            .values()
            .to_vec()
        })
        .collect();
    Ok((member, principal))
}
