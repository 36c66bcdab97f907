//! Profile files: one `z` table per team with explicit index headers.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use teamgame::model::uniform_mechanism;
use teamgame::scenarios::{always, matching};
use teamgame::{GameSpec, MechanismZ};

pub const PROFILE_FORMAT: &str = "teamgame-profile/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDoc {
    pub format: String,
    pub teams: Vec<TeamTable>,
}

/// `z[report][recommendation][winnings][reward]`; each header lists the labels
/// of its axis, members joined by `,`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeamTable {
    pub team: usize,
    pub reports: Vec<String>,
    pub recommendations: Vec<String>,
    pub winnings: Vec<String>,
    pub rewards: Vec<String>,
    pub z: Vec<Vec<Vec<Vec<f64>>>>,
}

struct Headers {
    reports: Vec<String>,
    recommendations: Vec<String>,
    winnings: Vec<String>,
    rewards: Vec<String>,
}

fn headers(spec: &GameSpec) -> Headers {
    let d = spec.dims();
    Headers {
        reports: (0..d.team_types)
            .map(|t| spec.team_type_labels(t).join(","))
            .collect(),
        recommendations: (0..d.team_actions)
            .map(|a| spec.team_action_labels(a).join(","))
            .collect(),
        winnings: spec.winnings().labels().to_vec(),
        rewards: (0..d.team_rewards)
            .map(|r| spec.team_reward_labels(r).join(","))
            .collect(),
    }
}

pub fn team_table(spec: &GameSpec, m: &MechanismZ) -> TeamTable {
    let d = spec.dims();
    let h = headers(spec);
    let z = (0..d.team_types)
        .map(|t| {
            (0..d.team_actions)
                .map(|a| {
                    (0..d.winnings)
                        .map(|w| (0..d.team_rewards).map(|r| m.get(d, t, a, w, r)).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    TeamTable {
        team: m.team,
        reports: h.reports,
        recommendations: h.recommendations,
        winnings: h.winnings,
        rewards: h.rewards,
        z,
    }
}

pub fn to_doc(spec: &GameSpec, profile: &[MechanismZ]) -> ProfileDoc {
    ProfileDoc {
        format: PROFILE_FORMAT.into(),
        teams: profile.iter().map(|m| team_table(spec, m)).collect(),
    }
}

pub fn from_doc(spec: &GameSpec, doc: &ProfileDoc) -> Result<Vec<MechanismZ>> {
    if doc.format != PROFILE_FORMAT {
        bail!("format: expected {PROFILE_FORMAT:?}, got {:?}", doc.format);
    }
    let d = spec.dims();
    if doc.teams.len() != d.teams {
        bail!("teams: {} tables for {} teams", doc.teams.len(), d.teams);
    }
    let h = headers(spec);
    let mut out = Vec::with_capacity(d.teams);
    for (j, table) in doc.teams.iter().enumerate() {
        let at = |field: &str| format!("teams[{j}].{field}");
        if table.team != j {
            bail!("{}: expected {j}, got {}", at("team"), table.team);
        }
        for (field, got, want) in [
            ("reports", &table.reports, &h.reports),
            (
                "recommendations",
                &table.recommendations,
                &h.recommendations,
            ),
            ("winnings", &table.winnings, &h.winnings),
            ("rewards", &table.rewards, &h.rewards),
        ] {
            if got != want {
                bail!("{}: expected {want:?}, got {got:?}", at(field));
            }
        }
        let mut values = Vec::with_capacity(d.z_len());
        let shape_err = || {
            format!(
                "{}: shape must be {}x{}x{}x{}",
                at("z"),
                d.team_types,
                d.team_actions,
                d.winnings,
                d.team_rewards
            )
        };
        if table.z.len() != d.team_types {
            bail!(shape_err());
        }
        for by_a in &table.z {
            if by_a.len() != d.team_actions {
                bail!(shape_err());
            }
            for by_w in by_a {
                if by_w.len() != d.winnings {
                    bail!(shape_err());
                }
                for by_r in by_w {
                    if by_r.len() != d.team_rewards {
                        bail!(shape_err());
                    }
                    values.extend_from_slice(by_r);
                }
            }
        }
        out.push(MechanismZ::new(spec, j, values).with_context(|| at("z"))?);
    }
    Ok(out)
}

pub fn load(spec: &GameSpec, path: &Path) -> Result<Vec<MechanismZ>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: ProfileDoc = serde_json::from_str(&text)
        .with_context(|| format!("parsing profile {}", path.display()))?;
    from_doc(spec, &doc).with_context(|| format!("in profile {}", path.display()))
}

pub fn save(spec: &GameSpec, profile: &[MechanismZ], path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&to_doc(spec, profile))?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// One preset per team, joined by `_`: `match` (type-matching), `uniform`,
/// or an action label meaning "always recommend this action to every member".
pub fn preset(spec: &GameSpec, name: &str) -> Result<Vec<MechanismZ>> {
    let parts: Vec<&str> = name.split('_').collect();
    let teams = spec.dims().teams;
    if parts.len() != teams {
        bail!(
            "preset {name:?}: expected {teams} parts joined by '_', got {}",
            parts.len()
        );
    }
    parts
        .iter()
        .enumerate()
        .map(|(j, part)| {
            let m = match *part {
                "match" | "matching" => matching(spec, j),
                "uniform" => uniform_mechanism(spec, j),
                label => always(spec, j, label),
            };
            m.with_context(|| {
                format!(
                    "preset {name:?}, team {j}: {part:?} is not \"match\", \"uniform\", or an action label {:?}",
                    spec.actions().labels()
                )
            })
        })
        .collect()
}

/// A path to an existing profile file, otherwise a preset name.
pub fn resolve(spec: &GameSpec, arg: &str) -> Result<Vec<MechanismZ>> {
    let path = Path::new(arg);
    if path.is_file() {
        load(spec, path)
    } else {
        preset(spec, arg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use teamgame::scenarios::{contest_scenario, ContestParams};

    #[test]
    fn save_load_save_is_byte_identical() {
        let spec = contest_scenario(&ContestParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        let profile = preset(&spec, "uniform_match").unwrap();
        save(&spec, &profile, &a).unwrap();
        let loaded = load(&spec, &a).unwrap();
        assert_eq!(loaded, profile);
        save(&spec, &loaded, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn rejects_wrong_headers() {
        let spec = teamgame::scenarios::myerson_scenario();
        let mut doc = to_doc(&spec, &preset(&spec, "C_C").unwrap());
        doc.teams[1].recommendations.swap(0, 1);
        let err = from_doc(&spec, &doc).unwrap_err().to_string();
        assert!(err.contains("teams[1].recommendations"), "{err}");
    }

    #[test]
    fn preset_errors_name_the_part() {
        let spec = teamgame::scenarios::myerson_scenario();
        assert!(preset(&spec, "C").is_err());
        let err = format!("{:#}", preset(&spec, "C_Q").unwrap_err());
        assert!(err.contains("team 1"), "{err}");
    }
}
