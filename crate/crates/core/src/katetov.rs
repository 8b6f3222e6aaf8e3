//! Katětov maps with finite support.
//!
//! A map stores only its support pairs `(s, v_s)`; its value at `x` is always
//! recomputed as `min_s (v_s + d(x, s))`. Such a function is automatically
//! 1-Lipschitz, so the only part of the Katětov condition that can fail is
//! the lower bound `d(x, y) <= f(x) + f(y)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, KatetovViolation, Result};
use crate::metric::{FiniteMetricSpace, PointId, Subset};
use crate::rational::Rational;

#[derive(Clone)]
pub struct KatetovMap {
    space: Arc<FiniteMetricSpace>,
    support: Vec<(PointId, Rational)>,
}

impl fmt::Debug for KatetovMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_line())
    }
}

/// Equality is extensional: two maps are equal when they agree on every
/// point of the same space.
impl PartialEq for KatetovMap {
    fn eq(&self, other: &Self) -> bool {
        same_space(&self.space, &other.space) && self.values() == other.values()
    }
}

impl Eq for KatetovMap {}

pub(crate) fn same_space(a: &Arc<FiniteMetricSpace>, b: &Arc<FiniteMetricSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl KatetovMap {
    /// Builds a map from support pairs. Checks structure only (ids in range,
    /// no duplicates, values nonnegative); use [`KatetovMap::is_katetov`] for
    /// the metric condition.
    pub fn new(space: Arc<FiniteMetricSpace>, support: Vec<(PointId, Rational)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut support = support;
        support.sort_by_key(|(p, _)| *p);
        for w in support.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::PreconditionViolated(format!(
                    "duplicate support point {}",
                    w[0].0
                )));
            }
        }
        for (p, v) in &support {
            space.check_point(*p)?;
            if v.is_negative() {
                return Err(Error::InvalidKatetovMap(KatetovViolation::NegativeValue {
                    x: *p,
                }));
            }
        }
        Ok(KatetovMap { space, support })
    }

    /// The Kuratowski map `f_x = d(x, .)`.
    pub fn kuratowski(space: Arc<FiniteMetricSpace>, x: PointId) -> Result<Self> {
        space.check_point(x)?;
        Ok(KatetovMap {
            space,
            support: vec![(x, Rational::zero())],
        })
    }

    /// The axial map `x -> d + d(x, Y)`, an element of `E(X, Y)`.
    pub fn axial(space: Arc<FiniteMetricSpace>, base: &Subset, offset: Rational) -> Result<Self> {
        space.check_subset(base)?;
        if offset.is_negative() {
            return Err(Error::PreconditionViolated(format!(
                "axial offset {offset} is negative"
            )));
        }
        let support = base
            .members()
            .iter()
            .map(|&y| (y, offset.clone()))
            .collect();
        let f = KatetovMap { space, support };
        // Nonempty base and nonnegative offset always give a Katětov map.
        if let Err(v) = f.is_katetov() {
            return Err(Error::Internal(format!(
                "axial map failed the Katětov check: {v}"
            )));
        }
        Ok(f)
    }

    /// A map given by its full value table (support = every point).
    pub fn from_values(space: Arc<FiniteMetricSpace>, values: Vec<Rational>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::SpaceMismatch);
        }
        Self::new(
            space,
            values
                .into_iter()
                .enumerate()
                .map(|(i, v)| (PointId(i), v))
                .collect(),
        )
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn support(&self) -> &[(PointId, Rational)] {
        &self.support
    }

    pub fn support_points(&self) -> Subset {
        Subset::new(self.support.iter().map(|(p, _)| *p))
    }

    pub fn evaluate(&self, x: PointId) -> Result<Rational> {
        self.space.check_point(x)?;
        Ok(self.eval(x))
    }

    pub(crate) fn eval(&self, x: PointId) -> Rational {
        let d = &self.space;
        self.support
            .iter()
            .map(|(s, v)| v + d.d(x, *s))
            .min()
            .expect("support is nonempty")
    }

    /// Full value table, indexed by point.
    pub fn values(&self) -> Vec<Rational> {
        self.space.points().map(|x| self.eval(x)).collect()
    }

    /// Checks `|f(x) - f(y)| <= d(x, y) <= f(x) + f(y)` on every pair and
    /// returns the first failure in `(x, y)` order.
    pub fn is_katetov(&self) -> std::result::Result<(), KatetovViolation> {
        let vals = self.values();
        check_katetov_values(&self.space, &vals)
    }

    /// Sup-metric distance.
    pub fn sup_dist(&self, other: &KatetovMap) -> Result<Rational> {
        if !same_space(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        Ok(sup_dist_values(&self.values(), &other.values()))
    }

    /// The Katětov extension `f^(x) = min_{y in Y} (f(y) + d(x, y))` to a
    /// superspace, where `embedding[i]` is the parent index of local point
    /// `i`. The support is transported unchanged.
    pub fn katetov_extension(
        &self,
        parent: Arc<FiniteMetricSpace>,
        embedding: &[PointId],
    ) -> Result<KatetovMap> {
        let local = &self.space;
        if embedding.len() != local.len() {
            return Err(Error::PreconditionViolated(format!(
                "embedding has {} entries for a {}-point space",
                embedding.len(),
                local.len()
            )));
        }
        for &p in embedding {
            parent.check_point(p)?;
        }
        for a in local.points() {
            for b in local.points().skip(a.0 + 1) {
                if parent.d(embedding[a.0], embedding[b.0]) != local.d(a, b) {
                    return Err(Error::BadEmbedding { a, b });
                }
            }
        }
        let support = self
            .support
            .iter()
            .map(|(s, v)| (embedding[s.0], v.clone()))
            .collect();
        KatetovMap::new(parent, support)
    }

    /// Same map with every support value replaced by the map's actual value
    /// there. Idempotent.
    pub fn tightened(&self) -> KatetovMap {
        let support = self
            .support
            .iter()
            .map(|(s, _)| (*s, self.eval(*s)))
            .collect();
        KatetovMap {
            space: self.space.clone(),
            support,
        }
    }

    /// Canonical representation: the unique minimal support with tight
    /// values. Two maps are equal iff their canonical forms are identical.
    pub fn canonical(&self) -> KatetovMap {
        let vals = self.values();
        let support = essential_points(&self.space, &vals)
            .into_iter()
            .map(|p| (p, vals[p.0].clone()))
            .collect();
        KatetovMap {
            space: self.space.clone(),
            support,
        }
    }

    /// Whether `set` controls this map: `f(x) = min_{s in set} (f(s) + d(x, s))`
    /// for every `x`.
    pub fn is_controlled_by(&self, set: &[PointId]) -> bool {
        if set.is_empty() {
            return false;
        }
        controls(&self.space, &self.values(), set)
    }

    /// Relabels support points through a point permutation: `(phi f)(phi x) = f(x)`.
    pub(crate) fn relabel(&self, perm: &[usize]) -> KatetovMap {
        let support = self
            .support
            .iter()
            .map(|(s, v)| (PointId(perm[s.0]), v.clone()))
            .collect::<Vec<_>>();
        let mut support = support;
        support.sort_by_key(|(p, _)| *p);
        KatetovMap {
            space: self.space.clone(),
            support,
        }
    }

    /// `kat {0: 1/2, 3: 1}`
    pub fn to_line(&self) -> String {
        let body: Vec<String> = self
            .support
            .iter()
            .map(|(p, v)| format!("{}: {}", p.0, v))
            .collect();
        format!("kat {{{}}}", body.join(", "))
    }

    /// Parses the `kat {...}` line form against a given space. Support ids
    /// must be strictly increasing so that the line form is canonical.
    pub fn parse_line(space: Arc<FiniteMetricSpace>, line: &str) -> Result<KatetovMap> {
        let bad = |msg: &str| Error::parse(1, format!("{msg} in `{line}`"));
        let body = line
            .strip_prefix("kat {")
            .and_then(|s| s.strip_suffix('}'))
            .ok_or_else(|| bad("expected `kat {...}`"))?;
        if body.is_empty() {
            return Err(bad("empty support"));
        }
        let mut support = Vec::new();
        for entry in body.split(", ") {
            let (id, val) = entry
                .split_once(": ")
                .ok_or_else(|| bad("expected `id: value`"))?;
            if id.is_empty()
                || !id.bytes().all(|b| b.is_ascii_digit())
                || (id.len() > 1 && id.starts_with('0'))
            {
                return Err(bad("bad point index"));
            }
            let id: usize = id.parse().map_err(|_| bad("bad point index"))?;
            let val: Rational = val.parse().map_err(|e| bad(&format!("{e}")))?;
            if let Some((prev, _)) = support.last() {
                if PointId(id) <= *prev {
                    return Err(bad("support ids must be strictly increasing"));
                }
            }
            support.push((PointId(id), val));
        }
        KatetovMap::new(space, support)
    }
}

/// Katětov check on a full value table.
pub(crate) fn check_katetov_values(
    space: &FiniteMetricSpace,
    vals: &[Rational],
) -> std::result::Result<(), KatetovViolation> {
    for x in space.points() {
        if vals[x.0].is_negative() {
            return Err(KatetovViolation::NegativeValue { x });
        }
    }
    for x in space.points() {
        for y in space.points().skip(x.0 + 1) {
            let d = space.d(x, y);
            if &(&vals[x.0] - &vals[y.0]).abs() > d {
                return Err(KatetovViolation::Lipschitz { x, y });
            }
            if d > &(&vals[x.0] + &vals[y.0]) {
                return Err(KatetovViolation::LowerBound { x, y });
            }
        }
    }
    Ok(())
}

pub(crate) fn sup_dist_values(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .max()
        .unwrap_or_else(Rational::zero)
}

fn controls(space: &FiniteMetricSpace, vals: &[Rational], set: &[PointId]) -> bool {
    space.points().all(|x| {
        let via = set
            .iter()
            .map(|&s| &vals[s.0] + space.d(x, s))
            .min()
            .expect("nonempty set");
        via == vals[x.0]
    })
}

/// Points `s` with `f(s) < f(t) + d(s, t)` for every `t != s`.
///
/// For a 1-Lipschitz `f` on a finite space these form the unique minimal
/// support: every support must contain them, and following "controlled by"
/// links strictly decreases `f`, so every point is controlled by one of them.
pub(crate) fn essential_points(space: &FiniteMetricSpace, vals: &[Rational]) -> Vec<PointId> {
    space
        .points()
        .filter(|&s| {
            space
                .points()
                .filter(|&t| t != s)
                .all(|t| vals[s.0] < &vals[t.0] + space.d(s, t))
        })
        .collect()
}

/// A support of minimum cardinality for a map, found by exhaustive search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportCertificate {
    pub map: KatetovMap,
    pub minimal_support: Vec<PointId>,
    pub cardinality: usize,
}

impl SupportCertificate {
    /// Re-checks that the support controls the map and that no proper subset
    /// of it does (dropping any single point must break control; control is
    /// monotone under inclusion, so that suffices).
    pub fn verify(&self) -> bool {
        let s = &self.minimal_support;
        if s.len() != self.cardinality || !self.map.is_controlled_by(s) {
            return false;
        }
        (0..s.len()).all(|skip| {
            let rest: Vec<PointId> = s
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, p)| *p)
                .collect();
            !self.map.is_controlled_by(&rest)
        })
    }
}

/// Smallest support of `f`, searching subsets in increasing cardinality and,
/// within one cardinality, in lexicographic order of sorted ids.
///
/// Exponential in the size of the space; intended for spaces of a dozen
/// points or so.
pub fn minimal_support(f: &KatetovMap) -> SupportCertificate {
    let space = &f.space;
    let vals = f.values();
    let n = space.len();
    for k in 1..=n {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let set: Vec<PointId> = idx.iter().map(|&i| PointId(i)).collect();
            if controls(space, &vals, &set) {
                return SupportCertificate {
                    map: f.clone(),
                    cardinality: k,
                    minimal_support: set,
                };
            }
            if !next_combination(&mut idx, n) {
                break;
            }
        }
    }
    unreachable!("the whole space controls every 1-Lipschitz map")
}

/// Advances `idx` to the next k-combination of `0..n` in lexicographic order.
pub(crate) fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in (i + 1)..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
