#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use teamgame::model::{compose_mechanism, Dims, MechanismFactored, UtilityDomain, UtilityTable};
use teamgame::spaces::{FiniteSpace, Kernel};
use teamgame::{GameParts, GameSpec, MechanismZ};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// Random point of the simplex. With `Some(k)` every mass is a multiple of
/// `2^-k`, so sums and products stay exact in floating point.
pub fn simplex(rng: &mut StdRng, n: usize, dyadic: Option<u32>) -> Vec<f64> {
    match dyadic {
        Some(k) => {
            let units = 1u64 << k;
            let mut counts = vec![0u64; n];
            for _ in 0..units {
                counts[rng.gen_range(0..n)] += 1;
            }
            counts.iter().map(|&c| c as f64 / units as f64).collect()
        }
        None => {
            let raw: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-9f64..1.0).ln()).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        }
    }
}

/// Random simplex point supported on `support` inside a vector of length `len`.
pub fn simplex_on(
    rng: &mut StdRng,
    support: &[usize],
    len: usize,
    dyadic: Option<u32>,
) -> Vec<f64> {
    let masses = simplex(rng, support.len(), dyadic);
    let mut row = vec![0.0; len];
    for (&i, m) in support.iter().zip(masses) {
        row[i] = m;
    }
    row
}

pub fn random_mechanism(
    spec: &GameSpec,
    team: usize,
    rng: &mut StdRng,
    dyadic: Option<u32>,
) -> MechanismZ {
    let d = spec.dims();
    let alpha: Vec<Vec<f64>> = (0..d.team_types)
        .map(|_| simplex(rng, d.team_actions, dyadic))
        .collect();
    let mut kappa = Vec::new();
    for _ in 0..d.team_types * d.team_actions {
        for w in 0..d.winnings {
            kappa.push(simplex_on(
                rng,
                spec.feasible_rewards(w),
                d.team_rewards,
                dyadic,
            ));
        }
    }
    let f = MechanismFactored {
        team,
        alpha: Kernel::from_rows(d.team_actions, alpha).unwrap(),
        kappa: Kernel::from_rows(d.team_rewards, kappa).unwrap(),
    };
    compose_mechanism(&f, spec).unwrap()
}

pub fn random_profile(spec: &GameSpec, rng: &mut StdRng, dyadic: Option<u32>) -> Vec<MechanismZ> {
    (0..spec.dims().teams)
        .map(|j| random_mechanism(spec, j, rng, dyadic))
        .collect()
}

fn labels(prefix: &str, n: usize) -> FiniteSpace {
    FiniteSpace::categorical((0..n).map(|i| format!("{prefix}{i}"))).unwrap()
}

/// Random game with one member per team, at most two types and three
/// actions, and dyadic primitives.
pub fn random_small_game(rng: &mut StdRng, obedience_enforced: bool) -> GameSpec {
    let teams = rng.gen_range(1..=2);
    let types = rng.gen_range(1..=2);
    let actions = rng.gen_range(1..=3);
    let winnings = rng.gen_range(1..=2);
    let rewards = rng.gen_range(1..=2);
    let dims = Dims::new(teams, 1, types, actions, winnings, rewards).unwrap();
    let prior = simplex(rng, dims.type_profiles, Some(4));
    let kernel = (0..dims.type_profiles * dims.action_profiles)
        .map(|_| simplex(rng, dims.winnings_profiles, Some(3)))
        .collect();
    let feasible = (0..winnings)
        .map(|_| {
            let mut s: Vec<usize> = (0..dims.team_rewards)
                .filter(|_| rng.gen_bool(0.6))
                .collect();
            if s.is_empty() {
                s.push(rng.gen_range(0..dims.team_rewards));
            }
            s
        })
        .collect();
    let mut value = || rng.gen_range(-16i32..=16) as f64 / 8.0;
    let member_utility = (0..dims.agents)
        .map(|k| {
            let len = UtilityTable::expected_len(&dims, UtilityDomain::Member { team: k });
            (0..len).map(|_| value()).collect()
        })
        .collect();
    let principal_utility = (0..teams)
        .map(|_| {
            let len = UtilityTable::expected_len(&dims, UtilityDomain::Principal);
            (0..len).map(|_| value()).collect()
        })
        .collect();
    GameSpec::new(GameParts {
        teams,
        members: 1,
        types: labels("t", types),
        actions: labels("a", actions),
        winnings: labels("w", winnings),
        rewards: labels("r", rewards),
        prior,
        winnings_kernel: kernel,
        feasible_rewards: feasible,
        member_utility,
        principal_utility,
        obedience_enforced,
    })
    .unwrap()
}
