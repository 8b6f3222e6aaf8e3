//! Finite metric spaces with exact rational distances.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Positional index of a point. Dense `0..n` within a space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub usize);

impl PointId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for PointId {
    fn from(i: usize) -> Self {
        PointId(i)
    }
}

/// One failed metric axiom, with the witnessing indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricViolation {
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    NonZeroDiagonal {
        x: usize,
    },
    Asymmetry {
        x: usize,
        y: usize,
    },
    NegativeDistance {
        x: usize,
        y: usize,
    },
    ZeroDistanceDistinctPoints {
        x: usize,
        y: usize,
    },
    /// `d(x, z) > d(x, y) + d(y, z)`
    TriangleViolation {
        x: usize,
        z: usize,
        via: usize,
    },
}

impl fmt::Display for MetricViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricViolation::NotSquare { row, len, expected } => {
                write!(f, "row {row} has {len} entries, expected {expected}")
            }
            MetricViolation::NonZeroDiagonal { x } => write!(f, "d({x},{x}) != 0"),
            MetricViolation::Asymmetry { x, y } => write!(f, "asymmetry at ({x},{y})"),
            MetricViolation::NegativeDistance { x, y } => {
                write!(f, "negative distance at ({x},{y})")
            }
            MetricViolation::ZeroDistanceDistinctPoints { x, y } => {
                write!(f, "zero distance between distinct points ({x},{y})")
            }
            MetricViolation::TriangleViolation { x, z, via } => {
                write!(f, "triangle violation at ({x},{z}) via {via}")
            }
        }
    }
}

/// A finite set of points with a validated, dense distance matrix.
///
/// Labels are display-only; identity is positional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    n: usize,
    dist: Vec<Rational>,
}

/// Checks every metric axiom and reports all violations.
pub fn validate_metric(matrix: &[Vec<Rational>]) -> std::result::Result<(), Vec<MetricViolation>> {
    let n = matrix.len();
    let mut out = Vec::new();
    for (row, r) in matrix.iter().enumerate() {
        if r.len() != n {
            out.push(MetricViolation::NotSquare {
                row,
                len: r.len(),
                expected: n,
            });
        }
    }
    if !out.is_empty() {
        return Err(out);
    }
    for x in 0..n {
        if !matrix[x][x].is_zero() {
            out.push(MetricViolation::NonZeroDiagonal { x });
        }
        for y in (x + 1)..n {
            if matrix[x][y] != matrix[y][x] {
                out.push(MetricViolation::Asymmetry { x, y });
            }
            if matrix[x][y].is_negative() || matrix[y][x].is_negative() {
                out.push(MetricViolation::NegativeDistance { x, y });
            } else if matrix[x][y].is_zero() || matrix[y][x].is_zero() {
                out.push(MetricViolation::ZeroDistanceDistinctPoints { x, y });
            }
        }
    }
    for x in 0..n {
        for z in (x + 1)..n {
            for via in 0..n {
                if via == x || via == z {
                    continue;
                }
                if matrix[x][z] > &matrix[x][via] + &matrix[via][z] {
                    out.push(MetricViolation::TriangleViolation { x, z, via });
                }
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

impl FiniteMetricSpace {
    /// Builds a space from a full matrix after checking every axiom.
    pub fn new(labels: Vec<String>, matrix: Vec<Vec<Rational>>) -> Result<Self> {
        validate_metric(&matrix).map_err(Error::InvalidMetric)?;
        if labels.len() != matrix.len() {
            return Err(Error::PreconditionViolated(format!(
                "{} labels for {} points",
                labels.len(),
                matrix.len()
            )));
        }
        let n = matrix.len();
        let dist = matrix.into_iter().flatten().collect();
        Ok(FiniteMetricSpace { labels, n, dist })
    }

    /// Same as [`FiniteMetricSpace::new`] with labels `0..n`.
    pub fn from_matrix(matrix: Vec<Vec<Rational>>) -> Result<Self> {
        let labels = (0..matrix.len()).map(|i| i.to_string()).collect();
        Self::new(labels, matrix)
    }

    /// Integer-valued convenience constructor, mostly for tests.
    pub fn from_integers(matrix: &[&[i64]]) -> Result<Self> {
        Self::from_matrix(
            matrix
                .iter()
                .map(|r| r.iter().map(|&v| Rational::from(v)).collect())
                .collect(),
        )
    }

    pub fn singleton(label: impl Into<String>) -> Self {
        FiniteMetricSpace {
            labels: vec![label.into()],
            n: 1,
            dist: vec![Rational::zero()],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn points(&self) -> impl Iterator<Item = PointId> + '_ {
        (0..self.n).map(PointId)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, p: PointId) -> &str {
        &self.labels[p.0]
    }

    pub fn contains(&self, p: PointId) -> bool {
        p.0 < self.n
    }

    pub fn check_point(&self, p: PointId) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::PointNotInSpace(p))
        }
    }

    /// Distance between two points; panics if either is out of range.
    pub fn d(&self, x: PointId, y: PointId) -> &Rational {
        &self.dist[x.0 * self.n + y.0]
    }

    pub fn row(&self, x: PointId) -> &[Rational] {
        &self.dist[x.0 * self.n..(x.0 + 1) * self.n]
    }

    pub fn matrix(&self) -> Vec<Vec<Rational>> {
        self.dist
            .chunks(self.n.max(1))
            .take(self.n)
            .map(|r| r.to_vec())
            .collect()
    }

    /// Maximum pairwise distance; 0 for a singleton.
    pub fn diameter(&self) -> Rational {
        self.dist
            .iter()
            .cloned()
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Smallest positive distance, `None` for a singleton.
    pub fn separation(&self) -> Option<Rational> {
        self.dist.iter().filter(|d| d.is_positive()).min().cloned()
    }

    pub fn dist_to_set(&self, x: PointId, set: &Subset) -> Result<Rational> {
        self.check_point(x)?;
        self.check_subset(set)?;
        Ok(self.dist_to_set_unchecked(x, set.members()))
    }

    pub(crate) fn dist_to_set_unchecked(&self, x: PointId, set: &[PointId]) -> Rational {
        set.iter()
            .map(|&y| self.d(x, y))
            .min()
            .cloned()
            .expect("nonempty set")
    }

    pub fn check_subset(&self, set: &Subset) -> Result<()> {
        if set.is_empty() {
            return Err(Error::EmptySubset);
        }
        match set.members().iter().find(|p| !self.contains(**p)) {
            Some(&p) => Err(Error::PointNotInSpace(p)),
            None => Ok(()),
        }
    }

    /// Induced submetric on `set`, with the map back to the parent indices.
    pub fn restrict(&self, set: &Subset) -> Result<Restriction> {
        self.check_subset(set)?;
        let ids = set.members();
        let labels = ids.iter().map(|&p| self.labels[p.0].clone()).collect();
        let mut dist = Vec::with_capacity(ids.len() * ids.len());
        for &x in ids {
            for &y in ids {
                dist.push(self.d(x, y).clone());
            }
        }
        Ok(Restriction {
            space: FiniteMetricSpace {
                labels,
                n: ids.len(),
                dist,
            },
            to_parent: ids.to_vec(),
        })
    }

    /// The first `n` points as a space of their own.
    pub fn prefix(&self, n: usize) -> FiniteMetricSpace {
        assert!(n >= 1 && n <= self.n);
        let mut dist = Vec::with_capacity(n * n);
        for x in 0..n {
            dist.extend_from_slice(&self.dist[x * self.n..x * self.n + n]);
        }
        FiniteMetricSpace {
            labels: self.labels[..n].to_vec(),
            n,
            dist,
        }
    }

    /// Appends one point whose distances to the existing points are
    /// `to_old`. The caller is responsible for the result being a metric.
    pub(crate) fn push_point_unchecked(&self, label: String, to_old: &[Rational]) -> Self {
        debug_assert_eq!(to_old.len(), self.n);
        let m = self.n + 1;
        let mut dist = Vec::with_capacity(m * m);
        for x in 0..self.n {
            dist.extend_from_slice(self.row(PointId(x)));
            dist.push(to_old[x].clone());
        }
        dist.extend_from_slice(to_old);
        dist.push(Rational::zero());
        let mut labels = self.labels.clone();
        labels.push(label);
        FiniteMetricSpace { labels, n: m, dist }
    }

    /// The bounded metric `d / (1 + d)`. Same isometries, diameter < 1.
    pub fn rescale_bounded(&self) -> FiniteMetricSpace {
        let one = Rational::one();
        let dist = self.dist.iter().map(|d| d / &(&one + d)).collect();
        FiniteMetricSpace {
            labels: self.labels.clone(),
            n: self.n,
            dist,
        }
    }

    pub fn is_valid(&self) -> bool {
        validate_metric(&self.matrix()).is_ok()
    }

    /// FMS v1 text form.
    pub fn to_fms(&self) -> String {
        let mut out = String::new();
        out.push_str("fms 1\n");
        out.push_str(&format!("points {}\n", self.n));
        for l in &self.labels {
            out.push_str(l);
            out.push('\n');
        }
        for x in 1..self.n {
            let row: Vec<String> = (0..x)
                .map(|y| self.d(PointId(x), PointId(y)).to_string())
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// Parses FMS v1 text into a candidate matrix without validating the
    /// metric axioms.
    pub fn parse_fms_unchecked(text: &str) -> Result<(Vec<String>, Vec<Vec<Rational>>)> {
        let body = text
            .strip_suffix('\n')
            .ok_or_else(|| Error::parse(0, "missing final newline"))?;
        let mut lines = body.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, format!("unexpected end of input, expected {what}")))
        };
        let (ln, header) = next("header")?;
        if header != "fms 1" {
            return Err(Error::parse(ln, format!("bad header `{header}`")));
        }
        let (ln, count) = next("point count")?;
        let n: usize = count
            .strip_prefix("points ")
            .and_then(|s| {
                if s.starts_with('+') || s.starts_with('0') && s.len() > 1 {
                    None
                } else {
                    s.parse().ok()
                }
            })
            .ok_or_else(|| Error::parse(ln, format!("bad point count `{count}`")))?;
        if n == 0 {
            return Err(Error::parse(ln, "empty space"));
        }
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, label) = next("label")?;
            if label.is_empty() || label.contains('\r') {
                return Err(Error::parse(ln, "labels must be nonempty single lines"));
            }
            labels.push(label.to_string());
        }
        let mut matrix = vec![vec![Rational::zero(); n]; n];
        for x in 1..n {
            let (ln, line) = next("distance row")?;
            let toks: Vec<&str> = line.split(' ').collect();
            if toks.len() != x {
                return Err(Error::parse(
                    ln,
                    format!("row {x} needs {x} entries, found {}", toks.len()),
                ));
            }
            for (y, tok) in toks.into_iter().enumerate() {
                let v: Rational = tok.parse().map_err(|e| Error::parse(ln, format!("{e}")))?;
                matrix[x][y] = v.clone();
                matrix[y][x] = v;
            }
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::parse(ln, "trailing content after distance rows"));
        }
        Ok((labels, matrix))
    }

    /// Parses and validates FMS v1 text.
    pub fn from_fms(text: &str) -> Result<Self> {
        let (labels, matrix) = Self::parse_fms_unchecked(text)?;
        Self::new(labels, matrix)
    }
}

/// The result of [`FiniteMetricSpace::restrict`].
#[derive(Debug, Clone)]
pub struct Restriction {
    pub space: FiniteMetricSpace,
    /// `to_parent[i]` is the parent index of local point `i`.
    pub to_parent: Vec<PointId>,
}

/// A sorted, duplicate-free set of point ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset(Vec<PointId>);

impl Subset {
    pub fn new(ids: impl IntoIterator<Item = PointId>) -> Self {
        let mut v: Vec<PointId> = ids.into_iter().collect();
        v.sort();
        v.dedup();
        Subset(v)
    }

    pub fn from_indices(ids: &[usize]) -> Self {
        Self::new(ids.iter().map(|&i| PointId(i)))
    }

    /// `{0, .., n-1}`
    pub fn prefix(n: usize) -> Self {
        Subset((0..n).map(PointId).collect())
    }

    pub fn members(&self) -> &[PointId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, p: PointId) -> bool {
        self.0.binary_search(&p).is_ok()
    }

    pub fn intersection(&self, other: &Subset) -> Subset {
        Subset(
            self.0
                .iter()
                .copied()
                .filter(|p| other.contains(*p))
                .collect(),
        )
    }
}
