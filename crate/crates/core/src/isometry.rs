//! Isometries of finite metric spaces as explicit permutations, the full
//! isometry group by backtracking, and the functorial extensions to Katětov
//! maps and through tower levels.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::katetov::KatetovMap;
use crate::metric::{FiniteMetricSpace, PointId, Subset};
use crate::rational::Rational;
use crate::tower::Tower;

/// A distance-preserving bijection, `perm[x]` being the image of `x`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Isometry {
    perm: Vec<usize>,
}

impl fmt::Debug for Isometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

impl Isometry {
    /// Checks bijectivity and `d(φx, φy) = d(x, y)`.
    pub fn new(space: &FiniteMetricSpace, perm: Vec<usize>) -> Result<Self> {
        if perm.len() != space.len() {
            return Err(Error::SpaceMismatch);
        }
        let mut hit = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() {
                return Err(Error::PointNotInSpace(PointId(p)));
            }
            if std::mem::replace(&mut hit[p], true) {
                return Err(Error::PreconditionViolated(format!(
                    "{p} is hit twice; not a bijection"
                )));
            }
        }
        for x in 0..perm.len() {
            for y in (x + 1)..perm.len() {
                if space.d(PointId(perm[x]), PointId(perm[y])) != space.d(PointId(x), PointId(y)) {
                    return Err(Error::NotAnIsometry {
                        a: PointId(x),
                        b: PointId(y),
                    });
                }
            }
        }
        Ok(Isometry { perm })
    }

    pub fn identity(n: usize) -> Self {
        Isometry {
            perm: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn apply(&self, x: PointId) -> PointId {
        PointId(self.perm[x.0])
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Isometry) -> Result<Isometry> {
        if self.len() != other.len() {
            return Err(Error::SpaceMismatch);
        }
        Ok(Isometry {
            perm: other.perm.iter().map(|&x| self.perm[x]).collect(),
        })
    }

    pub fn inverse(&self) -> Isometry {
        let mut inv = vec![0; self.perm.len()];
        for (x, &y) in self.perm.iter().enumerate() {
            inv[y] = x;
        }
        Isometry { perm: inv }
    }

    /// Whether `φ(set) = set`.
    pub fn stabilizes(&self, set: &Subset) -> bool {
        set.members().iter().all(|&p| set.contains(self.apply(p)))
    }

    /// Restriction to the prefix `0..n`, if that prefix is invariant.
    pub fn restrict_prefix(&self, n: usize) -> Option<Isometry> {
        let perm = self.perm[..n].to_vec();
        perm.iter().all(|&p| p < n).then_some(Isometry { perm })
    }

    /// `iso 0->2 1->0 2->1`
    pub fn to_line(&self) -> String {
        let mut s = String::from("iso");
        for (x, y) in self.perm.iter().enumerate() {
            s.push_str(&format!(" {x}->{y}"));
        }
        s
    }

    pub fn parse_line(space: &FiniteMetricSpace, line: &str) -> Result<Isometry> {
        let rest = line
            .strip_prefix("iso")
            .ok_or_else(|| Error::parse(1, "expected `iso`"))?;
        let mut perm = Vec::new();
        if !rest.is_empty() {
            let body = rest
                .strip_prefix(' ')
                .ok_or_else(|| Error::parse(1, "expected a space after `iso`"))?;
            for (i, tok) in body.split(' ').enumerate() {
                let (a, b) = tok
                    .split_once("->")
                    .ok_or_else(|| Error::parse(1, format!("bad mapping `{tok}`")))?;
                let a: usize = a
                    .parse()
                    .map_err(|_| Error::parse(1, format!("bad point `{a}`")))?;
                let b: usize = b
                    .parse()
                    .map_err(|_| Error::parse(1, format!("bad point `{b}`")))?;
                if a != i {
                    return Err(Error::parse(1, "mappings must be listed as 0, 1, 2, ..."));
                }
                perm.push(b);
            }
        }
        Isometry::new(space, perm)
    }
}

/// A finite isometry group stored as its sorted element list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsometryGroup {
    elements: Vec<Isometry>,
}

impl IsometryGroup {
    pub fn from_elements(mut elements: Vec<Isometry>) -> Self {
        elements.sort();
        elements.dedup();
        IsometryGroup { elements }
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[Isometry] {
        &self.elements
    }

    pub fn into_elements(self) -> Vec<Isometry> {
        self.elements
    }

    pub fn index_of(&self, g: &Isometry) -> Option<usize> {
        self.elements.binary_search(g).ok()
    }

    /// `table[a][b]` is the index of `elements[a] ∘ elements[b]`, or `None`
    /// if the set is not closed.
    pub fn composition_table(&self) -> Option<Vec<Vec<usize>>> {
        self.elements
            .iter()
            .map(|a| {
                self.elements
                    .iter()
                    .map(|b| a.compose(b).ok().and_then(|c| self.index_of(&c)))
                    .collect()
            })
            .collect()
    }

    /// Checks that the set holds the identity and is closed under
    /// composition and inversion. Associativity comes with permutations.
    pub fn verify_axioms(&self) -> bool {
        let Some(first) = self.elements.first() else {
            return false;
        };
        let id = Isometry::identity(first.len());
        self.index_of(&id).is_some()
            && self.composition_table().is_some()
            && self
                .elements
                .iter()
                .all(|g| self.index_of(&g.inverse()).is_some())
    }

    /// Orbit partition, each orbit sorted, orbits ordered by least element.
    pub fn orbits(&self) -> Vec<Vec<PointId>> {
        let n = self.elements.first().map_or(0, |g| g.len());
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for x in 0..n {
            if seen[x] {
                continue;
            }
            let mut orbit: Vec<usize> = self.elements.iter().map(|g| g.perm[x]).collect();
            orbit.sort_unstable();
            orbit.dedup();
            for &y in &orbit {
                seen[y] = true;
            }
            out.push(orbit.into_iter().map(PointId).collect());
        }
        out
    }
}

/// All isometries of `space`, sorted lexicographically by permutation.
///
/// A point can only map to a point with the same sorted distance row.
/// Points are assigned rarest profile first.
pub fn enumerate_isometries(space: &FiniteMetricSpace) -> IsometryGroup {
    let n = space.len();
    let profiles: Vec<Vec<Rational>> = space
        .points()
        .map(|x| {
            let mut r = space.row(x).to_vec();
            r.sort();
            r
        })
        .collect();
    let mut classes: HashMap<&[Rational], Vec<usize>> = HashMap::new();
    for (x, p) in profiles.iter().enumerate() {
        classes.entry(p.as_slice()).or_default().push(x);
    }
    let candidates: Vec<&[usize]> = profiles
        .iter()
        .map(|p| classes[p.as_slice()].as_slice())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&x| (candidates[x].len(), x));

    let mut found = Vec::new();
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    search(
        space,
        &order,
        &candidates,
        0,
        &mut perm,
        &mut used,
        &mut found,
    );
    IsometryGroup::from_elements(found)
}

fn search(
    space: &FiniteMetricSpace,
    order: &[usize],
    candidates: &[&[usize]],
    depth: usize,
    perm: &mut Vec<usize>,
    used: &mut Vec<bool>,
    found: &mut Vec<Isometry>,
) {
    if depth == order.len() {
        found.push(Isometry { perm: perm.clone() });
        return;
    }
    let x = order[depth];
    for &y in candidates[x] {
        if used[y] {
            continue;
        }
        let consistent = order[..depth]
            .iter()
            .all(|&z| space.d(PointId(y), PointId(perm[z])) == space.d(PointId(x), PointId(z)));
        if !consistent {
            continue;
        }
        perm[x] = y;
        used[y] = true;
        search(space, order, candidates, depth + 1, perm, used, found);
        used[y] = false;
        perm[x] = usize::MAX;
    }
}

/// `φ̃(f) = f ∘ φ⁻¹`: support points move, values stay.
pub fn extend_to_katetov(phi: &Isometry, f: &KatetovMap) -> Result<KatetovMap> {
    if phi.len() != f.space().len() {
        return Err(Error::SpaceMismatch);
    }
    Ok(f.relabel(&phi.perm))
}

/// The unique extension of `φ₀ ∈ Iso(X_0)` to the top level that maps every
/// level onto itself. Each adjoined point goes to the point realizing the
/// transported payload; if that point was never adjoined the tower is not
/// closed under `φ₀` and the offending record is reported.
pub fn extend_through_tower(phi0: &Isometry, tower: &Tower) -> Result<Isometry> {
    if phi0.len() != tower.level_size(0) {
        return Err(Error::SpaceMismatch);
    }
    let top = tower.top();
    let mut perm = phi0.perm.clone();
    perm.reserve(top.len() - perm.len());
    for l in 0..tower.depth() {
        let lo = tower.level_size(l);
        for z in lo..tower.level_size(l + 1) {
            let mut image = vec![Rational::zero(); lo];
            for x in 0..lo {
                image[perm[x]] = top.d(PointId(z), PointId(x)).clone();
            }
            let w = tower
                .find_by_profile(l, &image)
                .ok_or(Error::OrbitNotRealized {
                    record: z,
                    point: PointId(z),
                })?;
            perm.push(w.0);
        }
    }
    Isometry::new(top, perm)
        .map_err(|e| Error::Internal(format!("tower extension is not an isometry: {e}")))
}
