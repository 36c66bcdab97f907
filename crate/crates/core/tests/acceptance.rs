//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::rngs::StdRng;
use rand::Rng;
use teamgame::incentives::{
    ic_constraints, ic_slack, is_incentive_compatible, principal_objective,
};
use teamgame::laws::{
    behavior_deviation_law, deviation_generators, deviation_law, expected_value, law_defect,
    project, truthful_law, BehaviorStrategy, ExtendedLaw, OutcomeLaw, DEFAULT_GENERATOR_CAP,
};
use teamgame::metrics::{
    hausdorff, prokhorov, prokhorov_with, robust_narrow_distance, total_variation,
};
use teamgame::model::{mechanism_from_alpha, polish_mechanism};
use teamgame::scenarios::{
    always, contest_scenario, matching, myerson_scenario, tullock_winnings,
    winner_probability_integral, ContestParams,
};
use teamgame::solver::{
    best_response, best_response_dynamics, solve_lp, verify_bnpe, DynamicsSettings, DynamicsStatus,
    LinearProgram, LpOutcome,
};
use teamgame::spaces::{FiniteSpace, GroundKind, GroundMetric};
use teamgame::{GameSpec, MechanismZ};

use common::{random_mechanism, random_profile, random_small_game, rng, simplex, simplex_on};

type Check = (bool, String);
type Criterion = (u32, &'static str, fn() -> Check);

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "Myerson best-response cycle", myerson_cycle),
        (
            2,
            "Myerson IC characterization against C-always",
            myerson_ic_characterization,
        ),
        (3, "Myerson non-equilibrium sweep", non_equilibrium_sweep),
        (
            4,
            "Tullock kernel vs output-ranking integral",
            tullock_consistency,
        ),
        (5, "symmetric contest equilibrium", contest_equilibrium),
        (6, "LP best response vs enumeration", lp_vs_enumeration),
        (
            7,
            "Prokhorov vs subset oracle; TV under discrete metric",
            prokhorov_oracle,
        ),
        (8, "law invariants", law_invariants),
        (
            9,
            "affinity of principal value; convexity of IC set",
            affinity_convexity,
        ),
        (10, "IC slack vs full-strategy enumeration", ic_slack_oracle),
        (11, "metric axioms for d_P, d_H, d*", metric_axioms),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        let secs = start.elapsed().as_secs_f64();
        println!(
            "{} [{id:>2}] {name}: {detail} ({secs:.2}s)",
            if ok { "PASS" } else { "FAIL" }
        );
        if !ok {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}

fn profile_diff(a: &[MechanismZ], b: &[MechanismZ]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}

fn myerson_cycle() -> Check {
    let start = Instant::now();
    let spec = myerson_scenario();
    let c = |j| always(&spec, j, "C").unwrap();
    let m = |j| matching(&spec, j).unwrap();
    let init = vec![c(0), c(1)];
    let report = best_response_dynamics(&spec, &init, &DynamicsSettings::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let Some(cycle) = report.cycle else {
        return (false, format!("status {:?}, no cycle", report.status));
    };
    let expected = [
        vec![c(0), c(1)],
        vec![m(0), c(1)],
        vec![m(0), m(1)],
        vec![c(0), m(1)],
    ];
    let want_values = [6.0, 6.0, 5.0, 5.0];
    let mut ok = cycle.period == 4 && cycle.profiles.len() == 4 && cycle.start_step == 0;
    let mut worst: f64 = 0.0;
    for i in 0..cycle.profiles.len().min(4) {
        worst = worst.max(profile_diff(&cycle.profiles[i], &expected[i]));
        worst = worst.max((cycle.values[i][0] - want_values[i]).abs());
        ok &= cycle.movers[i] == vec![i % 2];
    }
    let verified = cycle.verify(&spec, 1e-9).unwrap();
    ok &= worst <= 1e-9 && verified && elapsed < 1.0;
    let values: Vec<f64> = cycle.values.iter().map(|v| v[0]).collect();
    (
        ok,
        format!(
            "period {}, values {values:?}, max deviation {worst:.1e}, certificate verified {verified}, runtime {elapsed:.3}s",
            cycle.period
        ),
    )
}

/// Points of the 3-simplex with masses `i / steps`, as integer counts.
fn simplex_grid(steps: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..=steps {
        for j in 0..=steps - i {
            out.push([i, j, steps - i - j]);
        }
    }
    out
}

fn grid_mechanism(spec: &GameSpec, team: usize, rows: [[usize; 3]; 2], steps: usize) -> MechanismZ {
    let s = steps as f64;
    let alpha = rows
        .iter()
        .map(|r| r.iter().map(|&k| k as f64 / s).collect())
        .collect();
    mechanism_from_alpha(spec, team, alpha).unwrap()
}

fn myerson_ic_characterization() -> Check {
    let spec = myerson_scenario();
    let grid = simplex_grid(10);
    let opp = always(&spec, 1, "C").unwrap();
    let (mut checked, mut mismatches, mut ic_count) = (0, 0, 0);
    for ra in &grid {
        for rb in &grid {
            let m = grid_mechanism(&spec, 0, [*ra, *rb], 10);
            let rep = is_incentive_compatible(&spec, &[m, opp.clone()], 1e-9).unwrap();
            let equal_c = ra[2] == rb[2];
            checked += 1;
            ic_count += rep.compatible as usize;
            if rep.compatible != equal_c {
                mismatches += 1;
            }
        }
    }
    (
        mismatches == 0,
        format!(
            "{checked} alpha tables, {ic_count} IC, {mismatches} disagreements with equal-C rule"
        ),
    )
}

fn non_equilibrium_sweep() -> Check {
    let start = Instant::now();
    let spec = myerson_scenario();
    let grid = simplex_grid(4);
    let mechs: Vec<Vec<MechanismZ>> = (0..2)
        .map(|team| {
            grid.iter()
                .flat_map(|ra| grid.iter().map(move |rb| (*ra, *rb)))
                .map(|(ra, rb)| grid_mechanism(&spec, team, [ra, rb], 4))
                .collect()
        })
        .collect();
    let n = mechs[0].len();
    // best-response value and objective depend only on the opponent
    let mut cache: HashMap<(usize, usize), (f64, Vec<f64>)> = HashMap::new();
    for team in 0..2 {
        for o in 0..n {
            let mut p = vec![mechs[0][0].clone(), mechs[1][0].clone()];
            p[1 - team] = mechs[1 - team][o].clone();
            let br = best_response(&spec, &p, team).unwrap();
            let obj = principal_objective(&spec, &p, team).unwrap();
            cache.insert((team, o), (br.value, obj));
        }
    }
    let mut min_margin = f64::INFINITY;
    let mut worst = (0, 0);
    let mut cross_checks = 0;
    let mut cross_ok = true;
    for i in 0..n {
        for k in 0..n {
            let p = vec![mechs[0][i].clone(), mechs[1][k].clone()];
            let mut gains = [0.0; 2];
            for (team, own, opp) in [(0, i, k), (1, k, i)] {
                let (br, obj) = &cache[&(team, opp)];
                let current: f64 = obj
                    .iter()
                    .zip(&mechs[team][own].values)
                    .map(|(a, b)| a * b)
                    .sum();
                gains[team] = br - current;
            }
            let s0 = ic_slack(&spec, &p, 0).unwrap().slack;
            let s1 = ic_slack(&spec, &p, 1).unwrap().slack;
            let margin = gains[0].max(gains[1]).max(-s0).max(-s1);
            if margin < min_margin {
                min_margin = margin;
                worst = (i, k);
            }
            if (i * n + k).is_multiple_of(211) {
                cross_checks += 1;
                let v = verify_bnpe(&spec, &p, 1e-9).unwrap();
                let gain = gains[0].max(gains[1]);
                cross_ok &= !v.is_equilibrium
                    && (v.max_gain - gain).abs() <= 1e-9
                    && (v.min_slack - s0.min(s1)).abs() <= 1e-9;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    (
        min_margin >= 0.2 && cross_ok && elapsed < 30.0,
        format!(
            "{} profiles, min margin {min_margin:.6} at grid pair {worst:?}, {cross_checks} verify_bnpe cross-checks agree {cross_ok}, runtime {elapsed:.2}s",
            n * n
        ),
    )
}

fn tullock_consistency() -> Check {
    let params = ContestParams::default();
    let spec = contest_scenario(&params).unwrap();
    let kernel = tullock_winnings(&params).unwrap();
    let d = spec.dims();
    let types = params.type_space().unwrap();
    let actions = params.action_space().unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut rows = 0;
    for t in 0..d.type_profiles {
        for a in 0..d.action_profiles {
            let scores: Vec<f64> = (0..d.teams)
                .map(|j| {
                    types.value(d.agent_type(t, j)).unwrap()
                        * actions.value(d.agent_action(a, j)).unwrap()
                })
                .collect();
            let integral = winner_probability_integral(&scores).unwrap();
            let total: f64 = scores.iter().sum();
            for j in 0..d.teams {
                let p = kernel.prob(t * d.action_profiles + a, 1 << (d.teams - 1 - j));
                worst = worst.max((p - integral[j]).abs());
                worst_closed = worst_closed.max((p - scores[j] / total).abs());
            }
            rows += 1;
        }
    }
    (
        worst <= 1e-6 && worst_closed <= 1e-12,
        format!("{rows} profiles, max |kernel - integral| {worst:.2e}, max |kernel - s_j/sum s| {worst_closed:.2e}"),
    )
}

fn win_probabilities(spec: &GameSpec, law: &OutcomeLaw) -> Vec<f64> {
    let d = spec.dims();
    let mut p = vec![0.0; d.teams];
    for (x, m) in law.support() {
        let (_, _, w, _) = d.outcome_coords(x);
        for (j, slot) in p.iter_mut().enumerate() {
            if spec.winnings().label(d.team_winnings_of(w, j)) == "1" {
                *slot += m;
            }
        }
    }
    p
}

fn contest_equilibrium() -> Check {
    let spec = contest_scenario(&ContestParams::default()).unwrap();
    let init: Vec<MechanismZ> = (0..2)
        .map(|j| teamgame::model::uniform_mechanism(&spec, j).unwrap())
        .collect();
    let report = best_response_dynamics(&spec, &init, &DynamicsSettings::default()).unwrap();
    if report.status != DynamicsStatus::Converged {
        return (
            false,
            format!("status {:?} after {} steps", report.status, report.steps),
        );
    }
    let v = verify_bnpe(&spec, &report.profile, 1e-7).unwrap();
    let law = truthful_law(&spec, &report.profile).unwrap();
    let wins = win_probabilities(&spec, &law);
    let ok = v.is_equilibrium && wins.iter().all(|p| (p - 0.5).abs() <= 1e-6);
    (
        ok,
        format!(
            "converged in {} steps, verify_bnpe {} (max gain {:.2e}, min slack {:.2e}), win probabilities {wins:?}",
            report.steps, v.is_equilibrium, v.max_gain, v.min_slack
        ),
    )
}

fn lp_vs_enumeration() -> Check {
    let spec = myerson_scenario();
    let det_rows: Vec<[usize; 3]> = vec![[1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let deterministic = |team: usize| -> Vec<MechanismZ> {
        let mut out = Vec::new();
        for ra in &det_rows {
            for rb in &det_rows {
                out.push(grid_mechanism(&spec, team, [*ra, *rb], 1));
            }
        }
        out
    };
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for team in 0..2 {
        let own = deterministic(team);
        let mut candidates = own.clone();
        for i in 0..own.len() {
            for k in i + 1..own.len() {
                for step in 1..10 {
                    candidates.push(own[i].mix(&own[k], step as f64 / 10.0));
                }
            }
        }
        let mut opponents = deterministic(1 - team);
        opponents.push(teamgame::model::uniform_mechanism(&spec, 1 - team).unwrap());
        for opp in opponents {
            let mut p = vec![opp.clone(), opp.clone()];
            p[team] = own[0].clone();
            let br = best_response(&spec, &p, team).unwrap();
            let mut brute = f64::NEG_INFINITY;
            for cand in &candidates {
                p[team] = cand.clone();
                if ic_slack(&spec, &p, team).unwrap().slack >= -1e-9 {
                    let law = truthful_law(&spec, &p).unwrap();
                    brute = brute
                        .max(expected_value(&spec, &law, spec.principal_utility(team)).unwrap());
                }
            }
            worst = worst.max((br.value - brute).abs());
            cases += 1;
        }
    }
    (
        worst <= 1e-9,
        format!("{cases} opponent cases, max |LP - enumeration| {worst:.2e}"),
    )
}

/// Prokhorov distance from its definition: for each candidate radius, the
/// largest excess `P(A) - Q(A^eps)` over subsets of either support.
fn prokhorov_subset_oracle(p: &[f64], q: &[f64], dist: &dyn Fn(usize, usize) -> f64) -> f64 {
    let n = p.len();
    let mut cands = vec![0.0];
    for (i, &pi) in p.iter().enumerate() {
        for (j, &qj) in q.iter().enumerate() {
            if pi > 0.0 && qj > 0.0 {
                cands.push(dist(i, j));
            }
        }
    }
    let excess = |from: &[f64], to: &[f64], eps: f64| -> f64 {
        let support: Vec<usize> = (0..n).filter(|&i| from[i] > 0.0).collect();
        let mut best: f64 = 0.0;
        for mask in 1u32..(1 << support.len()) {
            let members: Vec<usize> = (0..support.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| support[b])
                .collect();
            let pa: f64 = members.iter().map(|&i| from[i]).sum();
            let qa: f64 = (0..n)
                .filter(|&y| to[y] > 0.0 && members.iter().any(|&x| dist(x, y) <= eps))
                .map(|y| to[y])
                .sum();
            best = best.max(pa - qa);
        }
        best
    };
    cands
        .iter()
        .map(|&eps| eps.max(excess(p, q, eps)).max(excess(q, p, eps)))
        .fold(f64::INFINITY, f64::min)
}

fn random_points(rng: &mut StdRng, n: usize) -> Vec<[f64; 2]> {
    (0..n)
        .map(|_| {
            [
                rng.gen_range(0..=8) as f64 / 8.0,
                rng.gen_range(0..=8) as f64 / 8.0,
            ]
        })
        .collect()
}

fn max_norm(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

fn prokhorov_oracle() -> Check {
    let mut rng = rng(7);
    let mut disagreements = 0;
    for _ in 0..200 {
        let n = 8;
        let pts = random_points(&mut rng, n);
        let support = |rng: &mut StdRng| -> Vec<usize> {
            let k = rng.gen_range(1..=n);
            let mut all: Vec<usize> = (0..n).collect();
            for i in 0..k {
                let j = rng.gen_range(i..n);
                all.swap(i, j);
            }
            all.truncate(k);
            all
        };
        let sp = support(&mut rng);
        let sq = support(&mut rng);
        let p = simplex_on(&mut rng, &sp, n, Some(5));
        let q = simplex_on(&mut rng, &sq, n, Some(5));
        let dist = |i: usize, j: usize| max_norm(pts[i], pts[j]);
        let flow = prokhorov_with(&p, &q, dist).unwrap();
        let oracle = prokhorov_subset_oracle(&p, &q, &dist);
        if flow != oracle {
            disagreements += 1;
        }
    }
    let space = FiniteSpace::categorical((0..6).map(|i| format!("x{i}"))).unwrap();
    let discrete = GroundMetric::new(vec![space], GroundKind::Discrete).unwrap();
    let mut tv_worst: f64 = 0.0;
    for _ in 0..200 {
        let p = simplex(&mut rng, 6, None);
        let q = simplex(&mut rng, 6, None);
        let direct = 0.5 * p.iter().zip(&q).map(|(a, b)| (a - b).abs()).sum::<f64>();
        let d = prokhorov(&p, &q, &discrete).unwrap();
        tv_worst = tv_worst
            .max((d - direct).abs())
            .max((total_variation(&p, &q) - direct).abs());
    }
    (
        disagreements == 0 && tv_worst <= 1e-12,
        format!("200 pairs, {disagreements} disagreements with subset oracle; TV max error {tv_worst:.2e}"),
    )
}

struct LawAudit {
    laws: usize,
    worst_total: f64,
    defects: Vec<String>,
}

impl LawAudit {
    fn outcome(&mut self, spec: &GameSpec, law: &OutcomeLaw) {
        self.laws += 1;
        self.worst_total = self.worst_total.max((law.total() - 1.0).abs());
        if let Some(d) = law_defect(spec, law) {
            self.defects.push(d);
        }
    }

    fn extended(&mut self, spec: &GameSpec, law: &ExtendedLaw) {
        self.laws += 1;
        self.worst_total = self.worst_total.max((law.total() - 1.0).abs());
        if law.masses().iter().any(|m| *m < 0.0 || !m.is_finite()) {
            self.defects.push("negative extended mass".into());
        }
        if let Some(d) = law_defect(spec, &project(law)) {
            self.defects.push(format!("projection: {d}"));
        }
    }

    fn profile(&mut self, spec: &GameSpec, profile: &[MechanismZ], rng: &mut StdRng) {
        self.outcome(spec, &truthful_law(spec, profile).unwrap());
        for agent in 0..spec.dims().agents {
            for g in deviation_generators(spec, agent, DEFAULT_GENERATOR_CAP).unwrap() {
                self.extended(spec, &deviation_law(spec, profile, &g).unwrap());
            }
            let b = random_behavior(spec, agent, rng);
            self.extended(spec, &behavior_deviation_law(spec, profile, &b).unwrap());
        }
    }
}

fn random_behavior(spec: &GameSpec, agent: usize, rng: &mut StdRng) -> BehaviorStrategy {
    let d = spec.dims();
    let report = (0..d.types).map(|_| simplex(rng, d.types, None)).collect();
    let action = (!spec.obedience_enforced()).then(|| {
        (0..d.types * d.types * d.actions)
            .map(|_| simplex(rng, d.actions, None))
            .collect()
    });
    BehaviorStrategy {
        agent,
        report,
        action,
    }
}

fn law_invariants() -> Check {
    let mut rng = rng(11);
    let mut audit = LawAudit {
        laws: 0,
        worst_total: 0.0,
        defects: Vec::new(),
    };
    let myerson = myerson_scenario();
    let grid = simplex_grid(4);
    for (i, ra) in grid.iter().enumerate().step_by(3) {
        for rb in grid.iter().skip(i % 5).step_by(4) {
            let p = vec![
                grid_mechanism(&myerson, 0, [*ra, *rb], 4),
                grid_mechanism(&myerson, 1, [*rb, *ra], 4),
            ];
            audit.profile(&myerson, &p, &mut rng);
        }
    }
    let contest = contest_scenario(&ContestParams::default()).unwrap();
    for _ in 0..10 {
        let p = random_profile(&contest, &mut rng, None);
        audit.profile(&contest, &p, &mut rng);
        let br = best_response(&contest, &p, 0).unwrap();
        audit.outcome(
            &contest,
            &truthful_law(&contest, &[br.mechanism, p[1].clone()]).unwrap(),
        );
    }
    for g in 0..60 {
        let spec = random_small_game(&mut rng, g % 2 == 0);
        let p = random_profile(&spec, &mut rng, None);
        audit.profile(&spec, &p, &mut rng);
    }
    (
        audit.defects.is_empty() && audit.worst_total <= 1e-12,
        format!(
            "{} laws, max |total - 1| {:.2e}, {} defects{}",
            audit.laws,
            audit.worst_total,
            audit.defects.len(),
            audit
                .defects
                .first()
                .map(|d| format!(" (first: {d})"))
                .unwrap_or_default()
        ),
    )
}

fn random_ic_vertex(
    spec: &GameSpec,
    profile: &[MechanismZ],
    team: usize,
    rng: &mut StdRng,
) -> MechanismZ {
    let sys = ic_constraints(spec, profile, team).unwrap();
    let objective = (0..sys.num_vars)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    match solve_lp(&LinearProgram::from_system(&sys, objective)).unwrap() {
        LpOutcome::Optimal { x, .. } => polish_mechanism(spec, team, &x).unwrap(),
        other => panic!("IC polytope unexpectedly {other:?}"),
    }
}

fn affinity_convexity() -> Check {
    let mut rng = rng(13);
    let specs = [
        myerson_scenario(),
        contest_scenario(&ContestParams::default()).unwrap(),
    ];
    let mut affine_worst: f64 = 0.0;
    let mut convex_failures = 0;
    let mut slack_worst: f64 = 0.0;
    for trial in 0..100 {
        let spec = &specs[trial % 2];
        let team = (trial / 2) % 2;
        let mut p = random_profile(spec, &mut rng, None);
        let z1 = random_mechanism(spec, team, &mut rng, None);
        let z2 = random_mechanism(spec, team, &mut rng, None);
        let lambda: f64 = rng.gen_range(0.0..1.0);
        let value = |z: &MechanismZ, p: &mut Vec<MechanismZ>| {
            p[team] = z.clone();
            teamgame::incentives::principal_value(spec, p, team).unwrap()
        };
        let (v1, v2) = (value(&z1, &mut p), value(&z2, &mut p));
        let vm = value(&z1.mix(&z2, lambda), &mut p);
        affine_worst = affine_worst.max((vm - (lambda * v1 + (1.0 - lambda) * v2)).abs());

        let a = random_ic_vertex(spec, &p, team, &mut rng);
        let b = random_ic_vertex(spec, &p, team, &mut rng);
        let mix = a.mix(&b, lambda);
        let sys = ic_constraints(spec, &p, team).unwrap();
        let mut slack = f64::INFINITY;
        for z in [&a, &b, &mix] {
            p[team] = z.clone();
            for i in 0..spec.dims().members {
                slack = slack.min(
                    ic_slack(spec, &p, team * spec.dims().members + i)
                        .unwrap()
                        .slack,
                );
            }
        }
        slack_worst = slack_worst.min(slack);
        if slack < -1e-9 || !sys.is_satisfied(&mix.values, 1e-9) {
            convex_failures += 1;
        }
    }
    (
        affine_worst <= 1e-12 && convex_failures == 0,
        format!(
            "100 pairs, max affinity error {affine_worst:.2e}; {convex_failures} convexity failures, min slack {slack_worst:.2e}"
        ),
    )
}

fn brute_force_slack(spec: &GameSpec, profile: &[MechanismZ], agent: usize) -> f64 {
    let table = spec.member_utility(agent);
    let truth = expected_value(spec, &truthful_law(spec, profile).unwrap(), table).unwrap();
    let best = deviation_generators(spec, agent, DEFAULT_GENERATOR_CAP)
        .unwrap()
        .iter()
        .map(|g| {
            expected_value(
                spec,
                &project(&deviation_law(spec, profile, g).unwrap()),
                table,
            )
            .unwrap()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    truth - best
}

fn ic_slack_oracle() -> Check {
    let mut rng = rng(17);
    let mut exact_cases = 0;
    let mut exact_mismatch = 0;
    let mut worst: f64 = 0.0;
    let mut myerson_free = myerson_scenario();
    myerson_free.set_obedience_enforced(false);
    let mut instances: Vec<(GameSpec, bool)> =
        vec![(myerson_scenario(), true), (myerson_free, true)];
    for g in 0..80 {
        instances.push((random_small_game(&mut rng, g % 2 == 0), true));
    }
    // Tullock probabilities are not dyadic, so this instance is compared to rounding
    instances.push((contest_scenario(&ContestParams::default()).unwrap(), false));
    for (spec, dyadic) in &instances {
        for _ in 0..3 {
            let p = random_profile(spec, &mut rng, Some(3));
            for agent in 0..spec.dims().agents {
                let fast = ic_slack(spec, &p, agent).unwrap().slack;
                let brute = brute_force_slack(spec, &p, agent);
                worst = worst.max((fast - brute).abs());
                if *dyadic {
                    exact_cases += 1;
                    if fast != brute {
                        exact_mismatch += 1;
                    }
                }
            }
        }
    }
    (
        exact_mismatch == 0 && worst <= 1e-12,
        format!(
            "{} instances, {exact_cases} exact comparisons with {exact_mismatch} mismatches, max |difference| {worst:.2e}",
            instances.len()
        ),
    )
}

fn axioms(d: &dyn Fn(usize, usize) -> f64, tol: f64) -> Option<String> {
    let m = [
        [d(0, 0), d(0, 1), d(0, 2)],
        [d(1, 0), d(1, 1), d(1, 2)],
        [d(2, 0), d(2, 1), d(2, 2)],
    ];
    for i in 0..3 {
        if m[i][i].abs() > tol {
            return Some(format!("self distance {}", m[i][i]));
        }
        for j in 0..3 {
            if m[i][j] < -tol {
                return Some(format!("negative distance {}", m[i][j]));
            }
            if (m[i][j] - m[j][i]).abs() > tol {
                return Some(format!("asymmetry {} vs {}", m[i][j], m[j][i]));
            }
            for k in 0..3 {
                if m[i][k] > m[i][j] + m[j][k] + tol {
                    return Some(format!("triangle {} > {} + {}", m[i][k], m[i][j], m[j][k]));
                }
            }
        }
    }
    None
}

fn metric_axioms() -> Check {
    let mut rng = rng(19);
    let tol = 1e-9;
    let mut failures: Vec<String> = Vec::new();
    let n = 6;
    for _ in 0..100 {
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])
            .collect();
        let dist = |i: usize, j: usize| max_norm(pts[i], pts[j]);
        let laws: Vec<Vec<f64>> = (0..3).map(|_| simplex(&mut rng, n, None)).collect();
        let dp = |i: usize, j: usize| prokhorov_with(&laws[i], &laws[j], dist).unwrap();
        if let Some(f) = axioms(&dp, tol) {
            failures.push(format!("d_P: {f}"));
        }
        let sets: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|_| {
                (0..rng.gen_range(1..=4))
                    .map(|_| simplex(&mut rng, n, None))
                    .collect()
            })
            .collect();
        let dh = |i: usize, j: usize| {
            hausdorff(&sets[i], &sets[j], |a: &Vec<f64>, b: &Vec<f64>| {
                prokhorov_with(a, b, dist)
            })
            .unwrap()
        };
        if let Some(f) = axioms(&dh, tol) {
            failures.push(format!("d_H: {f}"));
        }
    }
    let spec = myerson_scenario();
    for _ in 0..100 {
        let profiles: Vec<Vec<MechanismZ>> = (0..3)
            .map(|_| random_profile(&spec, &mut rng, None))
            .collect();
        let ds = |i: usize, j: usize| {
            robust_narrow_distance(&spec, &profiles[i], &profiles[j], GroundKind::ComponentMax)
                .unwrap()
                .value
        };
        if let Some(f) = axioms(&ds, tol) {
            failures.push(format!("d*: {f}"));
        }
    }
    (
        failures.is_empty(),
        format!(
            "100 triples each, {} failures{}",
            failures.len(),
            failures
                .first()
                .map(|f| format!(" (first: {f})"))
                .unwrap_or_default()
        ),
    )
}
