//! Finite ambient spaces, product indexing, ground metrics, distributions and
//! transition kernels.
//!
//! Every product enumeration in the crate is lexicographic with the first
//! component most significant, so outputs are reproducible bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability normalization checks.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Max-norm on coordinates normalized to `[0, 1]` per axis.
    EuclideanMax,
    Discrete,
}

/// A finite grid or categorical set of points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpace {
    labels: Vec<String>,
    values: Option<Vec<Vec<f64>>>,
    coords: Option<Vec<Vec<f64>>>,
    metric: MetricKind,
}

impl FiniteSpace {
    /// Categorical space under the discrete metric.
    pub fn categorical<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        check_labels(&labels)?;
        Ok(Self {
            labels,
            values: None,
            coords: None,
            metric: MetricKind::Discrete,
        })
    }

    /// One-dimensional numeric space. Labels are the values' shortest decimal form.
    pub fn numeric(values: &[f64]) -> Result<Self> {
        let labels = values.iter().map(|v| format!("{v}")).collect();
        Self::with_values(labels, values.iter().map(|&v| vec![v]).collect())
    }

    /// `points` evenly spaced values from `lo` to `hi` inclusive.
    pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points == 0 || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidSpace(format!(
                "grid [{lo}, {hi}] with {points} points"
            )));
        }
        if points == 1 {
            return Self::numeric(&[lo]);
        }
        if hi <= lo {
            return Err(Error::InvalidSpace(format!("grid bounds {lo} >= {hi}")));
        }
        let step = (hi - lo) / (points - 1) as f64;
        let values: Vec<f64> = (0..points)
            .map(|k| {
                if k + 1 == points {
                    hi
                } else {
                    lo + step * k as f64
                }
            })
            .collect();
        Self::numeric(&values)
    }

    /// Numeric space with explicit labels and raw coordinate vectors. Coordinates
    /// are span-normalized to `[0, 1]` per axis for the metric.
    pub fn with_values(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        check_labels(&labels)?;
        if values.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: labels.len(),
                got: values.len(),
            });
        }
        let dim = values[0].len();
        if dim == 0 {
            return Err(Error::InvalidSpace(
                "coordinates must have at least one axis".into(),
            ));
        }
        for v in &values {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidSpace("non-finite coordinate".into()));
            }
        }
        let mut coords = values.clone();
        for axis in 0..dim {
            let lo = values.iter().map(|v| v[axis]).fold(f64::INFINITY, f64::min);
            let hi = values
                .iter()
                .map(|v| v[axis])
                .fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            for c in coords.iter_mut() {
                c[axis] = if span > 0.0 {
                    (c[axis] - lo) / span
                } else {
                    0.0
                };
            }
        }
        Ok(Self {
            labels,
            values: Some(values),
            coords: Some(coords),
            metric: MetricKind::EuclideanMax,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    /// Raw first-axis value of point `i`, if the space is numeric.
    pub fn value(&self, i: usize) -> Option<f64> {
        self.values.as_ref().map(|v| v[i][0])
    }

    pub fn values(&self) -> Option<&[Vec<f64>]> {
        self.values.as_deref()
    }

    pub fn coords(&self) -> Option<&[Vec<f64>]> {
        self.coords.as_deref()
    }

    /// Distance between two points of this space, in `[0, 1]`.
    pub fn distance(&self, p: usize, q: usize) -> f64 {
        if p == q {
            return 0.0;
        }
        match (&self.metric, &self.coords) {
            (MetricKind::EuclideanMax, Some(c)) => c[p]
                .iter()
                .zip(&c[q])
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
            _ => 1.0,
        }
    }
}

fn check_labels(labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::InvalidSpace("space has no points".into()));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::InvalidSpace(format!("duplicate label {l:?}")));
        }
    }
    Ok(())
}

/// Mixed-radix lexicographic index over a Cartesian product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductIndex {
    radices: Vec<usize>,
    len: usize,
}

impl ProductIndex {
    pub fn new(radices: Vec<usize>) -> Result<Self> {
        if radices.is_empty() {
            return Err(Error::EmptyProduct);
        }
        let mut len: usize = 1;
        for &r in &radices {
            if r == 0 {
                return Err(Error::InvalidSpace("empty factor in product".into()));
            }
            len = len
                .checked_mul(r)
                .ok_or_else(|| Error::InvalidSpace("product size overflows".into()))?;
        }
        Ok(Self { radices, len })
    }

    pub fn of_spaces(spaces: &[&FiniteSpace]) -> Result<Self> {
        Self::new(spaces.iter().map(|s| s.len()).collect())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn encode(&self, tuple: &[usize]) -> Result<usize> {
        if tuple.len() != self.radices.len() {
            return Err(Error::DimensionMismatch {
                expected: self.radices.len(),
                got: tuple.len(),
            });
        }
        let mut idx = 0;
        for (&digit, &radix) in tuple.iter().zip(&self.radices) {
            if digit >= radix {
                return Err(Error::InvalidSpace(format!(
                    "coordinate {digit} >= {radix}"
                )));
            }
            idx = idx * radix + digit;
        }
        Ok(idx)
    }

    pub fn decode_into(&self, mut idx: usize, out: &mut [usize]) {
        for (slot, &radix) in out.iter_mut().zip(&self.radices).rev() {
            *slot = idx % radix;
            idx /= radix;
        }
    }

    pub fn decode(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.radices.len()];
        self.decode_into(idx, &mut out);
        out
    }

    pub fn tuples(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len).map(|i| self.decode(i))
    }
}

/// Lexicographic enumeration of the product of `spaces`, as label tuples.
pub fn product_index(spaces: &[FiniteSpace]) -> Result<Vec<Vec<String>>> {
    let refs: Vec<&FiniteSpace> = spaces.iter().collect();
    let index = ProductIndex::of_spaces(&refs)?;
    Ok(index
        .tuples()
        .map(|t| {
            t.iter()
                .zip(spaces)
                .map(|(&i, s)| s.label(i).to_string())
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundKind {
    ComponentMax,
    Discrete,
}

/// Metric on a product of finite spaces.
#[derive(Debug, Clone)]
pub struct GroundMetric {
    components: Vec<FiniteSpace>,
    index: ProductIndex,
    kind: GroundKind,
    tables: Vec<Vec<f64>>,
}

impl GroundMetric {
    pub fn new(components: Vec<FiniteSpace>, kind: GroundKind) -> Result<Self> {
        let refs: Vec<&FiniteSpace> = components.iter().collect();
        let index = ProductIndex::of_spaces(&refs)?;
        let tables = components
            .iter()
            .map(|s| {
                let n = s.len();
                let mut t = vec![0.0; n * n];
                for p in 0..n {
                    for q in 0..n {
                        t[p * n + q] = s.distance(p, q);
                    }
                }
                t
            })
            .collect();
        Ok(Self {
            components,
            index,
            kind,
            tables,
        })
    }

    pub fn components(&self) -> &[FiniteSpace] {
        &self.components
    }

    pub fn index(&self) -> &ProductIndex {
        &self.index
    }

    pub fn kind(&self) -> GroundKind {
        self.kind
    }

    /// Number of points in the product space.
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn distance(&self, p: &[usize], q: &[usize]) -> Result<f64> {
        let k = self.components.len();
        for t in [p, q] {
            if t.len() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    got: t.len(),
                });
            }
        }
        for (c, (&a, &b)) in p.iter().zip(q).enumerate() {
            let n = self.components[c].len();
            if a >= n || b >= n {
                return Err(Error::InvalidSpace(format!(
                    "coordinate out of range in component {c}"
                )));
            }
        }
        Ok(self.distance_unchecked(p, q))
    }

    pub(crate) fn distance_unchecked(&self, p: &[usize], q: &[usize]) -> f64 {
        match self.kind {
            GroundKind::Discrete => {
                if p == q {
                    0.0
                } else {
                    1.0
                }
            }
            GroundKind::ComponentMax => {
                let mut d: f64 = 0.0;
                for (c, (&a, &b)) in p.iter().zip(q).enumerate() {
                    let n = self.components[c].len();
                    d = d.max(self.tables[c][a * n + b]);
                }
                d
            }
        }
    }

    /// Distance between two flat product indices.
    pub fn distance_flat(&self, p: usize, q: usize) -> f64 {
        let pt = self.index.decode(p);
        let qt = self.index.decode(q);
        self.distance_unchecked(&pt, &qt)
    }
}

/// Probability vector over an ordered finite index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    masses: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        let d = Self { masses };
        if let Some(defect) = d.defect() {
            return Err(Error::InvalidDistribution(defect.to_string()));
        }
        Ok(d)
    }

    /// Wraps masses without validation; use [`FiniteDistribution::defect`] to check.
    pub fn unchecked(masses: Vec<f64>) -> Self {
        Self { masses }
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        Ok(Self {
            masses: vec![1.0 / n as f64; n],
        })
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::InvalidDistribution(format!(
                "point {at} outside {n}"
            )));
        }
        let mut masses = vec![0.0; n];
        masses[at] = 1.0;
        Ok(Self { masses })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// First normalization defect, if any.
    pub fn defect(&self) -> Option<RowDefect> {
        if self.masses.is_empty() {
            return Some(RowDefect::Empty);
        }
        if let Some((i, &m)) = self
            .masses
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_finite() || **m < 0.0)
        {
            return Some(RowDefect::Negative { entry: i, mass: m });
        }
        let total = self.total();
        if (total - 1.0).abs() > MASS_TOL {
            return Some(RowDefect::Sum { total });
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowDefect {
    Empty,
    Negative { entry: usize, mass: f64 },
    Sum { total: f64 },
}

impl std::fmt::Display for RowDefect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RowDefect::Empty => write!(f, "empty row"),
            RowDefect::Negative { entry, mass } => {
                write!(f, "negative or non-finite mass {mass} at entry {entry}")
            }
            RowDefect::Sum { total } => write!(f, "masses sum to {total}, not 1"),
        }
    }
}

/// Transition probability: one distribution over the target per source point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    target_len: usize,
    rows: Vec<FiniteDistribution>,
}

impl Kernel {
    /// Builds a kernel without validating rows; see [`validate_kernel`].
    pub fn from_rows(target_len: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        for r in &rows {
            if r.len() != target_len {
                return Err(Error::DimensionMismatch {
                    expected: target_len,
                    got: r.len(),
                });
            }
        }
        Ok(Self {
            target_len,
            rows: rows
                .into_iter()
                .map(FiniteDistribution::unchecked)
                .collect(),
        })
    }

    pub fn source_len(&self) -> usize {
        self.rows.len()
    }

    pub fn target_len(&self) -> usize {
        self.target_len
    }

    pub fn row(&self, source: usize) -> &FiniteDistribution {
        &self.rows[source]
    }

    pub fn prob(&self, source: usize, target: usize) -> f64 {
        self.rows[source].masses[target]
    }

    pub fn rows(&self) -> &[FiniteDistribution] {
        &self.rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelViolation {
    pub row: usize,
    pub defect: RowDefect,
}

impl std::fmt::Display for KernelViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "row {}: {}", self.row, self.defect)
    }
}

/// Reports the first row that is not a valid distribution.
pub fn validate_kernel(k: &Kernel) -> std::result::Result<(), KernelViolation> {
    for (row, dist) in k.rows.iter().enumerate() {
        if let Some(defect) = dist.defect() {
            return Err(KernelViolation { row, defect });
        }
    }
    Ok(())
}
