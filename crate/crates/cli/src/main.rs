//! `teamgame`: run scenarios through the library and emit JSON reports.

mod config;
mod output;
mod profile;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use teamgame::incentives::{ic_slack, principal_value};
use teamgame::laws::DeviationStrategy;
use teamgame::metrics::robust_narrow_distance;
use teamgame::model::check_spec;
use teamgame::solver::{
    best_response, best_response_dynamics, best_response_program, verify_bnpe, BnpeReport, Schedule,
};
use teamgame::spaces::GroundKind;
use teamgame::{GameSpec, MechanismZ};

use config::ScenarioConfig;
use output::{fmt_float, render, write_csv};

#[derive(Parser)]
#[command(
    name = "teamgame",
    version,
    about = "Multi-principal mechanism design on finite spaces"
)]
struct Cli {
    /// Scenario configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Also write tables as CSV files into this directory.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the scenario against the standing assumptions.
    Validate,
    /// Best response of one principal with the other mechanisms fixed.
    BestResponse {
        /// Team index, starting at 0.
        #[arg(long)]
        team: usize,
        /// Profile file or preset such as `C_C`.
        #[arg(long)]
        given: String,
        /// Write the LP as a plain-text tableau.
        #[arg(long)]
        tableau: Option<PathBuf>,
        /// Write the resulting profile file.
        #[arg(long)]
        emit_profile: Option<PathBuf>,
    },
    /// Iterated best responses from an initial profile.
    Dynamics {
        /// Profile file or preset such as `C_C`.
        #[arg(long)]
        init: String,
        #[arg(long, value_enum)]
        schedule: Option<ScheduleArg>,
        #[arg(long)]
        damping: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Write the final profile file.
        #[arg(long)]
        emit_profile: Option<PathBuf>,
    },
    /// Check whether a profile is an equilibrium.
    Verify {
        #[arg(long)]
        profile: String,
        /// Tolerance; defaults to `solver.verify_tol` from the config.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Incentive-compatibility slack of every agent.
    IcSlack {
        #[arg(long)]
        profile: String,
    },
    /// Robust narrow distance between two profiles.
    Distance {
        #[arg(long)]
        profile_a: String,
        #[arg(long)]
        profile_b: String,
        #[arg(long, value_enum, default_value_t = GroundArg::ComponentMax)]
        ground: GroundArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Alternating,
    Simultaneous,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroundArg {
    ComponentMax,
    Discrete,
}

enum Failure {
    /// Bad input: config, profile, or a scenario violating the assumptions.
    Validation(anyhow::Error),
    /// The computation itself failed.
    Solver(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        use teamgame::Error as E;
        let solver = e.chain().any(|c| {
            matches!(
                c.downcast_ref::<E>(),
                Some(
                    E::InfeasibleIc { .. }
                        | E::Unbounded
                        | E::SolverStalled { .. }
                        | E::CellCap { .. }
                        | E::GeneratorCap { .. }
                )
            )
        });
        if solver {
            Failure::Solver(e)
        } else {
            Failure::Validation(e)
        }
    }
}

impl From<teamgame::Error> for Failure {
    fn from(e: teamgame::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

struct Ctx {
    config: ScenarioConfig,
    spec: GameSpec,
    csv: Option<PathBuf>,
}

impl Ctx {
    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        match &self.csv {
            Some(dir) => write_csv(dir, name, header, rows),
            None => Ok(()),
        }
    }

    fn profile(&self, arg: &str) -> Result<Vec<MechanismZ>> {
        profile::resolve(&self.spec, arg)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            let message = e.kind().as_str().unwrap_or("invalid arguments").to_string();
            print!(
                "{}",
                render(json!({"error": {"kind": "usage", "exit_code": 2, "message": message}}))
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok((report, code)) => {
            print!("{}", render(report));
            ExitCode::from(code)
        }
        Err(failure) => {
            let (kind, code, err) = match failure {
                Failure::Validation(e) => ("validation", 2, e),
                Failure::Solver(e) => ("solver", 3, e),
            };
            let message = format!("{err:#}");
            eprintln!("teamgame: {message}");
            print!(
                "{}",
                render(json!({"error": {"kind": kind, "exit_code": code, "message": message}}))
            );
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(Value, u8), Failure> {
    let Some(path) = cli.config.as_deref() else {
        return Err(Failure::Validation(anyhow::anyhow!(
            "--config <path> is required"
        )));
    };
    let config = ScenarioConfig::load(path)?;
    let spec = config.build().context("building scenario")?;
    let ctx = Ctx {
        config,
        spec,
        csv: cli.csv,
    };
    if let Command::Validate = cli.command {
        return validate(&ctx, path).map_err(Failure::from);
    }
    let report = check_spec(&ctx.spec);
    if !report.is_ok() {
        let msgs: Vec<String> = report
            .violations
            .iter()
            .map(|v| v.message.clone())
            .collect();
        return Err(Failure::Validation(anyhow::anyhow!(
            "scenario violates the standing assumptions: {}",
            msgs.join("; ")
        )));
    }
    let out = match cli.command {
        Command::Validate => unreachable!("handled above"),
        Command::BestResponse {
            team,
            given,
            tableau,
            emit_profile,
        } => cmd_best_response(
            &ctx,
            team,
            &given,
            tableau.as_deref(),
            emit_profile.as_deref(),
        )?,
        Command::Dynamics {
            init,
            schedule,
            damping,
            max_iter,
            emit_profile,
        } => cmd_dynamics(
            &ctx,
            &init,
            schedule,
            damping,
            max_iter,
            emit_profile.as_deref(),
        )?,
        Command::Verify { profile, tol } => cmd_verify(&ctx, &profile, tol)?,
        Command::IcSlack { profile } => cmd_ic_slack(&ctx, &profile)?,
        Command::Distance {
            profile_a,
            profile_b,
            ground,
        } => cmd_distance(&ctx, &profile_a, &profile_b, ground)?,
    };
    Ok((out, 0))
}

fn model_name(ctx: &Ctx) -> &'static str {
    match ctx.config.model {
        config::ModelId::Myerson => "myerson",
        config::ModelId::TullockContest => "tullock_contest",
        config::ModelId::Custom => "custom",
    }
}

fn validate(ctx: &Ctx, path: &Path) -> Result<(Value, u8)> {
    let spec = &ctx.spec;
    let d = spec.dims();
    let report = check_spec(spec);
    let violations: Vec<Value> = report
        .violations
        .iter()
        .map(|v| json!({"assumption": v.assumption.number(), "kind": v.assumption, "message": v.message}))
        .collect();
    ctx.csv(
        "violations.csv",
        &["assumption", "message"],
        &report
            .violations
            .iter()
            .map(|v| vec![v.assumption.number().to_string(), v.message.clone()])
            .collect::<Vec<_>>(),
    )?;
    let out = json!({
        "command": "validate",
        "config": path.display().to_string(),
        "model": model_name(ctx),
        "ok": report.is_ok(),
        "dims": {
            "teams": d.teams,
            "members": d.members,
            "types": d.types,
            "actions": d.actions,
            "winnings": d.winnings,
            "rewards": d.rewards,
            "outcome_cells": d.outcome_cells().to_string(),
            "z_len": d.z_len(),
        },
        "obedience_enforced": spec.obedience_enforced(),
        "violations": violations,
        "notes": report.notes,
    });
    Ok((out, if report.is_ok() { 0 } else { 2 }))
}

fn check_team(spec: &GameSpec, team: usize) -> Result<()> {
    if team >= spec.dims().teams {
        bail!(
            "--team {team} out of range ({} teams, indexed from 0)",
            spec.dims().teams
        );
    }
    Ok(())
}

fn z_rows(spec: &GameSpec, profile: &[MechanismZ]) -> Vec<Vec<String>> {
    let d = spec.dims();
    let mut rows = Vec::new();
    for m in profile {
        for idx in 0..d.z_len() {
            let (t, a, w, r) = d.z_coords(idx);
            rows.push(vec![
                m.team.to_string(),
                spec.team_type_labels(t).join(","),
                spec.team_action_labels(a).join(","),
                spec.winnings().label(w).to_string(),
                spec.team_reward_labels(r).join(","),
                fmt_float(m.values[idx]),
            ]);
        }
    }
    rows
}

const Z_HEADER: &[&str] = &[
    "team",
    "report",
    "recommendation",
    "winnings",
    "reward",
    "z",
];

fn cmd_best_response(
    ctx: &Ctx,
    team: usize,
    given: &str,
    tableau: Option<&Path>,
    emit: Option<&Path>,
) -> Result<Value> {
    let spec = &ctx.spec;
    check_team(spec, team)?;
    let mut profile = ctx.profile(given)?;
    if let Some(path) = tableau {
        let (sys, objective) = best_response_program(spec, &profile, team)?;
        let mut text = sys.to_tableau(spec);
        let coeffs: Vec<String> = objective
            .iter()
            .map(|c| teamgame::incentives::format_sig(*c))
            .collect();
        text.push_str(&format!("objective\t{}\n", coeffs.join("\t")));
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let current = principal_value(spec, &profile, team)?;
    let br = best_response(spec, &profile, team)?;
    profile[team] = br.mechanism.clone();
    if let Some(path) = emit {
        profile::save(spec, &profile, path)?;
    }
    ctx.csv(
        "mechanism.csv",
        Z_HEADER,
        &z_rows(spec, &profile[team..=team]),
    )?;
    Ok(json!({
        "command": "best-response",
        "team": team,
        "value": br.value,
        "lp_value": br.lp_value,
        "current_value": current,
        "gain": br.value - current,
        "constraint_rows": br.constraint_rows,
        "ic_rows": br.ic_rows,
        "mechanism": profile::team_table(spec, &br.mechanism),
        "profile": profile::to_doc(spec, &profile),
    }))
}

fn bnpe_json(r: &BnpeReport, tol: f64) -> Value {
    json!({
        "status": if r.is_equilibrium { "verified_bnpe" } else { "not_equilibrium" },
        "tol": tol,
        "feasible": r.feasible,
        "feasibility_error": r.feasibility_error,
        "incentive_compatible": r.incentive_compatible,
        "optimal": r.optimal,
        "min_slack": r.min_slack,
        "slacks": r.slacks,
        "values": r.values,
        "gains": r.gains,
        "max_gain": r.max_gain,
    })
}

fn cmd_dynamics(
    ctx: &Ctx,
    init: &str,
    schedule: Option<ScheduleArg>,
    damping: Option<f64>,
    max_iter: Option<usize>,
    emit: Option<&Path>,
) -> Result<Value> {
    let spec = &ctx.spec;
    let mut settings = ctx.config.settings()?;
    if let Some(s) = schedule {
        settings.schedule = match s {
            ScheduleArg::Alternating => Schedule::Alternating,
            ScheduleArg::Simultaneous => Schedule::Simultaneous,
        };
    }
    if let Some(d) = damping {
        settings.damping = d;
    }
    if let Some(m) = max_iter {
        settings.max_steps = m;
    }
    let start = ctx.profile(init)?;
    let report = best_response_dynamics(spec, &start, &settings)?;
    if let Some(path) = emit {
        profile::save(spec, &report.profile, path)?;
    }
    let history: Vec<Value> = report
        .history
        .iter()
        .map(
            |h| json!({"step": h.step, "movers": h.movers, "values": h.values, "change": h.change}),
        )
        .collect();
    ctx.csv(
        "history.csv",
        &["step", "movers", "values", "change"],
        &report
            .history
            .iter()
            .map(|h| {
                vec![
                    h.step.to_string(),
                    h.movers
                        .iter()
                        .map(|m| m.to_string())
                        .collect::<Vec<_>>()
                        .join(" "),
                    h.values
                        .iter()
                        .map(|v| fmt_float(*v))
                        .collect::<Vec<_>>()
                        .join(" "),
                    fmt_float(h.change),
                ]
            })
            .collect::<Vec<_>>(),
    )?;
    let cycle = match &report.cycle {
        None => Value::Null,
        Some(c) => {
            let verified = c.verify(spec, 1e-9)?;
            json!({
                "start_step": c.start_step,
                "period": c.period,
                "movers": c.movers,
                "values": c.values,
                "damping": c.damping,
                "verified": verified,
                "profiles": c.profiles.iter().map(|p| profile::to_doc(spec, p)).collect::<Vec<_>>(),
            })
        }
    };
    let equilibrium = report
        .equilibrium
        .as_ref()
        .map(|r| bnpe_json(r, settings.verify_tol))
        .unwrap_or(Value::Null);
    Ok(json!({
        "command": "dynamics",
        "status": report.status,
        "steps": report.steps,
        "settings": {
            "schedule": settings.schedule,
            "damping": settings.damping,
            "max_iter": settings.max_steps,
            "tol": settings.tol,
            "verify_tol": settings.verify_tol,
        },
        "history": history,
        "cycle": cycle,
        "equilibrium": equilibrium,
        "profile": profile::to_doc(spec, &report.profile),
    }))
}

fn cmd_verify(ctx: &Ctx, profile: &str, tol: Option<f64>) -> Result<Value> {
    let spec = &ctx.spec;
    let tol = tol.unwrap_or(ctx.config.solver.verify_tol);
    let p = ctx.profile(profile)?;
    let r = verify_bnpe(spec, &p, tol)?;
    ctx.csv(
        "teams.csv",
        &["team", "value", "gain"],
        &(0..r.values.len())
            .map(|j| vec![j.to_string(), fmt_float(r.values[j]), fmt_float(r.gains[j])])
            .collect::<Vec<_>>(),
    )?;
    let mut out = json!({"command": "verify"});
    if let (Value::Object(o), Value::Object(b)) = (&mut out, bnpe_json(&r, tol)) {
        o.extend(b);
    }
    Ok(out)
}

fn deviation_json(spec: &GameSpec, s: &DeviationStrategy) -> Value {
    let types = spec.types();
    let actions = spec.actions();
    let na = actions.len();
    let rule = s.rule.as_ref().map(|rule| {
        (0..types.len())
            .map(|t| {
                (0..na)
                    .map(|a| actions.label(rule[t * na + a]).to_string())
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<_>>()
    });
    json!({
        "report": s.report.iter().map(|&r| types.label(r)).collect::<Vec<_>>(),
        "rule": rule,
        "truthful_obedient": s.is_truthful_obedient(),
    })
}

fn cmd_ic_slack(ctx: &Ctx, profile: &str) -> Result<Value> {
    let spec = &ctx.spec;
    let p = ctx.profile(profile)?;
    let d = spec.dims();
    let mut agents = Vec::with_capacity(d.agents);
    let mut rows = Vec::with_capacity(d.agents);
    let mut min_slack = f64::INFINITY;
    for k in 0..d.agents {
        let s = ic_slack(spec, &p, k)?;
        min_slack = min_slack.min(s.slack);
        rows.push(vec![
            k.to_string(),
            d.team_of(k).to_string(),
            d.member_of(k).to_string(),
            fmt_float(s.slack),
        ]);
        agents.push(json!({
            "agent": k,
            "team": d.team_of(k),
            "member": d.member_of(k),
            "slack": s.slack,
            "truthful_value": s.truthful_value,
            "best_deviation_value": s.best_deviation_value,
            "best_deviation": deviation_json(spec, &s.best_deviation),
        }));
    }
    ctx.csv("slacks.csv", &["agent", "team", "member", "slack"], &rows)?;
    let tol = ctx.config.solver.verify_tol;
    Ok(json!({
        "command": "ic-slack",
        "tol": tol,
        "compatible": min_slack >= -tol,
        "min_slack": min_slack,
        "agents": agents,
    }))
}

fn cmd_distance(ctx: &Ctx, a: &str, b: &str, ground: GroundArg) -> Result<Value> {
    let spec = &ctx.spec;
    let (pa, pb) = (ctx.profile(a)?, ctx.profile(b)?);
    let kind = match ground {
        GroundArg::ComponentMax => GroundKind::ComponentMax,
        GroundArg::Discrete => GroundKind::Discrete,
    };
    let r = robust_narrow_distance(spec, &pa, &pb, kind)?;
    let mut rows = vec![vec![
        "truthful".to_string(),
        String::new(),
        fmt_float(r.truthful_component),
    ]];
    for (k, v) in r.per_agent.iter().enumerate() {
        rows.push(vec!["deviation".into(), k.to_string(), fmt_float(*v)]);
    }
    rows.push(vec!["value".into(), String::new(), fmt_float(r.value)]);
    ctx.csv("distance.csv", &["component", "agent", "value"], &rows)?;
    Ok(json!({
        "command": "distance",
        "ground": kind,
        "truthful_component": r.truthful_component,
        "deviation_component": r.deviation_component,
        "per_agent": r.per_agent,
        "value": r.value,
    }))
}
