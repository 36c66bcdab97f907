//! Prokhorov distance between finite laws, Hausdorff distance between sets of
//! laws, and the robust narrow distance between mechanism profiles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laws::{deviation_generators, deviation_law, truthful_law, DEFAULT_GENERATOR_CAP};
use crate::model::{GameSpec, MechanismZ};
use crate::spaces::{GroundKind, GroundMetric};

/// Residual capacities below this are treated as saturated.
const FLOW_EPS: f64 = 1e-15;

/// Metric on `X = T^{nN} x A^{nN} x W^N x R^{nN}`, coordinates in index order.
pub fn outcome_metric(spec: &GameSpec, kind: GroundKind) -> Result<GroundMetric> {
    GroundMetric::new(outcome_components(spec), kind)
}

/// Metric on the extended space `X x T x A` (deviator's report and actual action).
pub fn extended_metric(spec: &GameSpec, kind: GroundKind) -> Result<GroundMetric> {
    let mut comps = outcome_components(spec);
    comps.push(spec.types().clone());
    comps.push(spec.actions().clone());
    GroundMetric::new(comps, kind)
}

fn outcome_components(spec: &GameSpec) -> Vec<crate::spaces::FiniteSpace> {
    let d = spec.dims();
    let mut comps = Vec::with_capacity(3 * d.agents + d.teams);
    comps.extend(std::iter::repeat_n(spec.types().clone(), d.agents));
    comps.extend(std::iter::repeat_n(spec.actions().clone(), d.agents));
    comps.extend(std::iter::repeat_n(spec.winnings().clone(), d.teams));
    comps.extend(std::iter::repeat_n(spec.rewards().clone(), d.agents));
    comps
}

struct FlowNet {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    level: Vec<i64>,
    next: Vec<usize>,
}

impl FlowNet {
    fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![-1; nodes],
            next: vec![0; nodes],
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) {
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
    }

    fn bfs(&mut self, s: usize, t: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > FLOW_EPS && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[t] >= 0
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.next[u] < self.adj[u].len() {
            let e = self.adj[u][self.next[u]];
            let v = self.to[e];
            if self.cap[e] > FLOW_EPS && self.level[v] == self.level[u] + 1 {
                let got = self.dfs(v, t, pushed.min(self.cap[e]));
                if got > FLOW_EPS {
                    self.cap[e] -= got;
                    self.cap[e ^ 1] += got;
                    return got;
                }
            }
            self.next[u] += 1;
        }
        0.0
    }

    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        while self.bfs(s, t) {
            self.next.iter_mut().for_each(|n| *n = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= FLOW_EPS {
                    break;
                }
                total += f;
            }
        }
        total
    }
}

/// Two supports and the distances between them, row-major `p x q`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportInstance {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub dist: Vec<f64>,
}

impl TransportInstance {
    /// Restricts two mass vectors on a common index to their supports.
    pub fn from_masses(p: &[f64], q: &[f64], dist: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                got: q.len(),
            });
        }
        let sp: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
        let sq: Vec<usize> = (0..q.len()).filter(|&i| q[i] > 0.0).collect();
        let mut d = Vec::with_capacity(sp.len() * sq.len());
        for &i in &sp {
            for &j in &sq {
                d.push(dist(i, j));
            }
        }
        Ok(Self {
            p: sp.iter().map(|&i| p[i]).collect(),
            q: sq.iter().map(|&j| q[j]).collect(),
            dist: d,
        })
    }

    /// Largest mass movable from `p` to `q` along pairs at distance `<= threshold`.
    pub fn max_transport_within(&self, threshold: f64) -> f64 {
        let (m, k) = (self.p.len(), self.q.len());
        let (s, t) = (m + k, m + k + 1);
        let mut net = FlowNet::new(m + k + 2);
        for (i, &pm) in self.p.iter().enumerate() {
            net.add_edge(s, i, pm);
        }
        for (j, &qm) in self.q.iter().enumerate() {
            net.add_edge(m + j, t, qm);
        }
        for i in 0..m {
            for j in 0..k {
                if self.dist[i * k + j] <= threshold {
                    net.add_edge(i, m + j, f64::INFINITY);
                }
            }
        }
        net.max_flow(s, t)
    }

    /// Prokhorov distance: the smallest `eps` with `1 - M(eps) <= eps`, where
    /// `M(eps)` is the mass movable within distance `eps`. `M` only changes at
    /// pairwise distances, so the answer is `min_k max(d_k, 1 - M(d_k))`.
    pub fn prokhorov(&self) -> f64 {
        let mut cands: Vec<f64> = self.dist.clone();
        cands.push(0.0);
        cands.sort_by(f64::total_cmp);
        cands.dedup();
        let gap = |k: usize| 1.0 - self.max_transport_within(cands[k]);
        // first candidate where the distance has caught up with the untransported mass
        let (mut lo, mut hi) = (0usize, cands.len() - 1);
        if cands[hi] < gap(hi) {
            return cands[hi].max(gap(hi)).min(1.0);
        }
        while lo < hi {
            let mid = (lo + hi) / 2;
            if cands[mid] >= gap(mid) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let mut best = cands[lo].max(gap(lo));
        if lo > 0 {
            best = best.min(cands[lo - 1].max(gap(lo - 1)));
        }
        best.clamp(0.0, 1.0)
    }
}

/// Prokhorov distance between two laws on the points of `metric`.
pub fn prokhorov(p: &[f64], q: &[f64], metric: &GroundMetric) -> Result<f64> {
    if p.len() != metric.len() {
        return Err(Error::DimensionMismatch {
            expected: metric.len(),
            got: p.len(),
        });
    }
    prokhorov_with(p, q, |i, j| metric.distance_flat(i, j))
}

/// Prokhorov distance under an arbitrary distance on the common index.
pub fn prokhorov_with(p: &[f64], q: &[f64], dist: impl Fn(usize, usize) -> f64) -> Result<f64> {
    Ok(TransportInstance::from_masses(p, q, dist)?.prokhorov())
}

/// Half the L1 distance.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Hausdorff distance between two finite sets under `dist`.
pub fn hausdorff<T, F>(a: &[T], b: &[T], dist: F) -> Result<f64>
where
    T: Sync,
    F: Fn(&T, &T) -> Result<f64> + Sync,
{
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let pairs: Vec<(usize, usize)> = (0..a.len())
        .flat_map(|i| (0..b.len()).map(move |j| (i, j)))
        .collect();
    let flat: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| dist(&a[i], &b[j]))
        .collect::<Result<_>>()?;
    let k = b.len();
    let from_a = (0..a.len())
        .map(|i| {
            flat[i * k..(i + 1) * k]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let from_b = (0..k)
        .map(|j| {
            (0..a.len())
                .map(|i| flat[i * k + j])
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(from_a.max(from_b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustDistance {
    /// Hausdorff distance of each agent's deviation-law sets.
    pub per_agent: Vec<f64>,
    pub deviation_component: f64,
    /// Prokhorov distance of the truthful laws.
    pub truthful_component: f64,
    pub value: f64,
}

/// Robust narrow distance between two profiles: the larger of the worst
/// per-agent Hausdorff distance between generated deviation laws and the
/// Prokhorov distance between truthful laws.
pub fn robust_narrow_distance(
    spec: &GameSpec,
    a: &[MechanismZ],
    b: &[MechanismZ],
    kind: GroundKind,
) -> Result<RobustDistance> {
    let outcome = outcome_metric(spec, kind)?;
    let extended = extended_metric(spec, kind)?;
    let d = spec.dims();
    let mut per_agent = Vec::with_capacity(d.agents);
    for agent in 0..d.agents {
        let gens = deviation_generators(spec, agent, DEFAULT_GENERATOR_CAP)?;
        let laws = |profile: &[MechanismZ]| -> Result<Vec<Vec<f64>>> {
            gens.par_iter()
                .map(|g| deviation_law(spec, profile, g).map(|l| l.masses().to_vec()))
                .collect()
        };
        let (la, lb) = (laws(a)?, laws(b)?);
        per_agent.push(hausdorff(&la, &lb, |p, q| prokhorov(p, q, &extended))?);
    }
    let deviation_component = per_agent.iter().copied().fold(0.0, f64::max);
    let truthful_component = prokhorov(
        truthful_law(spec, a)?.masses(),
        truthful_law(spec, b)?.masses(),
        &outcome,
    )?;
    Ok(RobustDistance {
        per_agent,
        deviation_component,
        truthful_component,
        value: deviation_component.max(truthful_component),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{always, matching, myerson_scenario};
    use crate::spaces::FiniteSpace;

    fn line(points: &[f64]) -> GroundMetric {
        GroundMetric::new(
            vec![FiniteSpace::numeric(points).unwrap()],
            GroundKind::ComponentMax,
        )
        .unwrap()
    }

    #[test]
    fn point_masses_far_apart() {
        let m = line(&[0.0, 1.0]);
        assert_eq!(prokhorov(&[1.0, 0.0], &[0.0, 1.0], &m).unwrap(), 1.0);
        assert_eq!(prokhorov(&[1.0, 0.0], &[1.0, 0.0], &m).unwrap(), 0.0);
    }

    #[test]
    fn close_points_cost_their_distance() {
        let m = GroundMetric::new(
            vec![FiniteSpace::with_values(
                vec!["a".into(), "b".into()],
                vec![vec![0.0], vec![0.4]],
            )
            .unwrap()],
            GroundKind::ComponentMax,
        )
        .unwrap();
        let d = m.distance_flat(0, 1);
        let got = prokhorov(&[1.0, 0.0], &[0.0, 1.0], &m).unwrap();
        assert_eq!(got, d.min(1.0));
    }

    #[test]
    fn discrete_metric_is_total_variation() {
        let space = FiniteSpace::categorical(["a", "b", "c"]).unwrap();
        let m = GroundMetric::new(vec![space], GroundKind::Discrete).unwrap();
        let p = [0.5, 0.25, 0.25];
        let q = [0.25, 0.25, 0.5];
        assert_eq!(prokhorov(&p, &q, &m).unwrap(), 0.25);
        assert_eq!(total_variation(&p, &q), 0.25);
    }

    #[test]
    fn partial_overlap() {
        // half the mass stays, half moves across the unit gap
        let m = line(&[0.0, 1.0]);
        let got = prokhorov(&[1.0, 0.0], &[0.5, 0.5], &m).unwrap();
        assert_eq!(got, 0.5);
    }

    #[test]
    fn transport_grows_with_threshold() {
        let inst = TransportInstance::from_masses(&[0.5, 0.5, 0.0], &[0.0, 0.25, 0.75], |i, j| {
            (i as f64 - j as f64).abs() / 2.0
        })
        .unwrap();
        let mut last = -1.0;
        for thr in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let m = inst.max_transport_within(thr);
            assert!(m >= last);
            last = m;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn hausdorff_of_numbers() {
        let a = [0.0, 1.0];
        let b = [0.0, 3.0];
        let d = hausdorff(&a, &b, |x: &f64, y: &f64| Ok((x - y).abs())).unwrap();
        assert_eq!(d, 2.0);
        assert_eq!(
            hausdorff(&a, &[], |x: &f64, y: &f64| Ok((x - y).abs())),
            Err(Error::EmptySet)
        );
    }

    #[test]
    fn robust_distance_is_zero_on_identical_profiles() {
        let spec = myerson_scenario();
        let p = vec![matching(&spec, 0).unwrap(), always(&spec, 1, "C").unwrap()];
        let r = robust_narrow_distance(&spec, &p, &p, GroundKind::ComponentMax).unwrap();
        assert_eq!(r.value, 0.0);
        let q = vec![
            always(&spec, 0, "C").unwrap(),
            always(&spec, 1, "C").unwrap(),
        ];
        let r = robust_narrow_distance(&spec, &p, &q, GroundKind::Discrete).unwrap();
        // matching vs C-always for team 1 moves all truthful mass
        assert_eq!(r.truthful_component, 1.0);
        assert_eq!(r.value, 1.0);
    }
}
