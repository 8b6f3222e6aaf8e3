//! Truncated Katětov towers `X_0 ⊆ X_1 ⊆ ... ⊆ X_L`.
//!
//! Level `i + 1` consists of `X_i` plus finitely many realized Katětov maps
//! on `X_i`: maps with support of size at most `i`, and axial maps
//! `x -> c + d(x, X_j)` for `j < i`, every value capped by `2 d_i` where
//! `d_i = diam(X_i)`. New points of one level are at sup-metric distance
//! from each other, so the level is a subspace of `E(X_i)`.
//!
//! All levels share one point numbering: `X_i` is the prefix of the top
//! level of length `level_size(i)`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isometry::{enumerate_isometries, extend_through_tower, Isometry};
use crate::katetov::{
    check_katetov_values, next_combination, same_space, sup_dist_values, KatetovMap,
};
use crate::metric::{FiniteMetricSpace, PointId, Subset};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProvenanceKind {
    Base,
    FiniteSupport,
    /// `x -> offset + d(x, X_base_level)`
    Axial {
        base_level: usize,
        offset: Rational,
    },
}

impl fmt::Display for ProvenanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProvenanceKind::Base => f.write_str("base"),
            ProvenanceKind::FiniteSupport => f.write_str("finite_support"),
            ProvenanceKind::Axial { .. } => f.write_str("axial"),
        }
    }
}

/// Where a point of the tower came from. For adjoined points, `level` is the
/// level the payload is defined on, and the point itself lives in
/// `level + 1` with `d(point, x) = payload(x)` for every `x` in `X_level`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProvenanceRecord {
    pub point: PointId,
    pub level: usize,
    pub kind: ProvenanceKind,
    pub payload: Option<KatetovMap>,
}

/// What to realize at the next level.
#[derive(Debug, Clone)]
pub enum Payload {
    FiniteSupport(KatetovMap),
    Axial { base_level: usize, offset: Rational },
}

#[derive(Debug, Clone)]
pub struct Adjunction {
    pub payload: Payload,
    pub label: Option<String>,
}

impl Adjunction {
    pub fn generic(map: KatetovMap) -> Self {
        Adjunction {
            payload: Payload::FiniteSupport(map),
            label: None,
        }
    }

    pub fn axial(base_level: usize, offset: Rational) -> Self {
        Adjunction {
            payload: Payload::Axial { base_level, offset },
            label: None,
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerConfig {
    /// Number of levels to build above `X_0`.
    pub depth: usize,
    /// Maximum number of finite-support points adjoined per level.
    pub budget: usize,
    /// Support values for sampled maps and offsets for axial maps.
    pub grid: Vec<Rational>,
}

impl TowerConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.grid.iter().find(|v| v.is_negative()) {
            return Err(Error::PreconditionViolated(format!(
                "negative grid value {v}"
            )));
        }
        Ok(())
    }

    fn sorted_grid(&self) -> Vec<Rational> {
        let mut g = self.grid.clone();
        g.sort();
        g.dedup();
        g
    }
}

/// Appends one point at distances `values` from every existing point.
///
/// The Katětov condition on `values` is exactly the set of triangle
/// inequalities involving the new point, so the result is a metric iff it
/// holds and no value is zero.
pub fn adjoin_point(
    space: &FiniteMetricSpace,
    f: &KatetovMap,
    label: impl Into<String>,
) -> Result<FiniteMetricSpace> {
    if **f.space() != *space {
        return Err(Error::SpaceMismatch);
    }
    adjoin_values(space, &f.values(), label.into())
}

fn adjoin_values(
    space: &FiniteMetricSpace,
    values: &[Rational],
    label: String,
) -> Result<FiniteMetricSpace> {
    if values.len() != space.len() {
        return Err(Error::SpaceMismatch);
    }
    check_katetov_values(space, values).map_err(Error::InvalidKatetovMap)?;
    if let Some(existing) = values.iter().position(|v| v.is_zero()) {
        return Err(Error::DuplicatePoint {
            existing: PointId(existing),
        });
    }
    Ok(space.push_point_unchecked(label, values))
}

#[derive(Debug, Clone)]
pub struct Tower {
    levels: Vec<Arc<FiniteMetricSpace>>,
    diameters: Vec<Rational>,
    records: Vec<ProvenanceRecord>,
    /// For each level `l + 1`, payload value tables of its new points.
    profiles: Vec<HashMap<Vec<Rational>, PointId>>,
    base_group: Vec<Isometry>,
}

impl Tower {
    pub fn new(base: FiniteMetricSpace) -> Tower {
        let base_group = enumerate_isometries(&base).into_elements();
        let records = base
            .points()
            .map(|p| ProvenanceRecord {
                point: p,
                level: 0,
                kind: ProvenanceKind::Base,
                payload: None,
            })
            .collect();
        Tower {
            diameters: vec![base.diameter()],
            levels: vec![Arc::new(base)],
            records,
            profiles: Vec::new(),
            base_group,
        }
    }

    /// `X_0` plus `cfg.depth` levels from [`Tower::build_level`].
    pub fn build(base: FiniteMetricSpace, cfg: &TowerConfig) -> Result<Tower> {
        cfg.validate()?;
        let mut t = Tower::new(base);
        for _ in 0..cfg.depth {
            t.build_level(cfg)?;
        }
        Ok(t)
    }

    /// Index of the top level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, l: usize) -> &Arc<FiniteMetricSpace> {
        &self.levels[l]
    }

    pub fn level_size(&self, l: usize) -> usize {
        self.levels[l].len()
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    pub fn level_subset(&self, l: usize) -> Subset {
        Subset::prefix(self.level_size(l))
    }

    pub fn top(&self) -> &Arc<FiniteMetricSpace> {
        self.levels.last().unwrap()
    }

    pub fn base(&self) -> &Arc<FiniteMetricSpace> {
        &self.levels[0]
    }

    pub fn diameters(&self) -> &[Rational] {
        &self.diameters
    }

    pub fn records(&self) -> &[ProvenanceRecord] {
        &self.records
    }

    pub fn record(&self, p: PointId) -> &ProvenanceRecord {
        &self.records[p.0]
    }

    /// Isometries of `X_0`, sorted.
    pub fn base_group(&self) -> &[Isometry] {
        &self.base_group
    }

    /// Smallest level containing `p`.
    pub fn level_of(&self, p: PointId) -> usize {
        self.levels
            .iter()
            .position(|l| p.0 < l.len())
            .expect("point in tower")
    }

    /// The new point of level `l + 1` whose distances to `X_l` are `profile`.
    pub fn find_by_profile(&self, l: usize, profile: &[Rational]) -> Option<PointId> {
        self.profiles.get(l).and_then(|m| m.get(profile).copied())
    }

    /// Number of new points of level `l + 1` with a given profile over `X_l`
    /// (0 or 1 in a well-formed tower; exposed for uniqueness checks).
    pub fn profile_multiplicity(&self, l: usize, profile: &[Rational]) -> usize {
        let lo = self.level_size(l);
        let hi = self.level_size(l + 1);
        let top = self.top();
        (lo..hi)
            .filter(|&z| (0..lo).all(|x| top.d(PointId(z), PointId(x)) == &profile[x]))
            .count()
    }

    /// Realizes a batch of maps on the top level `X_i` as level `i + 1`.
    pub fn push_level(&mut self, adjunctions: Vec<Adjunction>) -> Result<()> {
        let i = self.depth();
        let level = self.levels[i].clone();
        let cap = &self.diameters[i] * Rational::from(2);
        let mut cur: FiniteMetricSpace = (*level).clone();
        let mut batch: Vec<Vec<Rational>> = Vec::new();
        let mut profiles = HashMap::new();
        let mut new_records = Vec::new();
        for (k, adj) in adjunctions.into_iter().enumerate() {
            let point = PointId(level.len() + k);
            let (kind, map) = match adj.payload {
                Payload::FiniteSupport(map) => {
                    if !same_space(map.space(), &level) {
                        return Err(Error::SpaceMismatch);
                    }
                    let size = map.canonical().support().len();
                    if size > i {
                        return Err(Error::SupportTooLargeForLevel { level: i, size });
                    }
                    (ProvenanceKind::FiniteSupport, map)
                }
                Payload::Axial { base_level, offset } => {
                    if base_level >= i {
                        return Err(Error::PreconditionViolated(format!(
                            "axial base level {base_level} must be below {i}"
                        )));
                    }
                    let base = Subset::prefix(self.level_size(base_level));
                    let map = KatetovMap::axial(level.clone(), &base, offset.clone())?;
                    (ProvenanceKind::Axial { base_level, offset }, map)
                }
            };
            let vals = map.values();
            if let Some(x) = vals.iter().position(|v| *v > cap) {
                return Err(Error::CapExceeded {
                    point: PointId(x),
                    value: vals[x].clone(),
                    cap,
                });
            }
            if let Some(j) = batch.iter().position(|b| *b == vals) {
                return Err(Error::DuplicatePoint {
                    existing: PointId(level.len() + j),
                });
            }
            let mut full = vals.clone();
            full.extend(batch.iter().map(|b| sup_dist_values(&vals, b)));
            let label = adj.label.unwrap_or_else(|| {
                let tag = if matches!(kind, ProvenanceKind::FiniteSupport) {
                    "g"
                } else {
                    "ax"
                };
                format!("{tag}{}.{k}", i + 1)
            });
            cur = adjoin_values(&cur, &full, label)?;
            profiles.insert(vals.clone(), point);
            batch.push(vals);
            new_records.push(ProvenanceRecord {
                point,
                level: i,
                kind,
                payload: Some(map),
            });
        }
        self.diameters.push(cur.diameter());
        self.levels.push(Arc::new(cur));
        self.records.extend(new_records);
        self.profiles.push(profiles);
        Ok(())
    }

    /// Extended base isometries acting on the current top level.
    pub fn level_symmetries(&self) -> Result<Vec<Isometry>> {
        self.base_group
            .iter()
            .map(|g| extend_through_tower(g, self))
            .collect()
    }

    /// Appends the next level: up to `cfg.budget` sampled finite-support
    /// maps (whole orbits under the extended base group, so isometries keep
    /// extending), followed by every admissible axial map with an offset on
    /// the grid.
    ///
    /// Supports are scanned by size and then lexicographically, each with
    /// its grid tuples in lexicographic order. Scanning stops when the budget
    /// is full or the next orbit does not fit.
    pub fn build_level(&mut self, cfg: &TowerConfig) -> Result<()> {
        cfg.validate()?;
        let i = self.depth();
        let level = self.levels[i].clone();
        let n = level.len();
        let cap = &self.diameters[i] * Rational::from(2);
        let grid = cfg.sorted_grid();
        let admissible = |vals: &[Rational]| {
            vals.iter().all(|v| v.is_positive() && *v <= cap)
                && check_katetov_values(&level, vals).is_ok()
        };
        let mut seen: HashSet<Vec<Rational>> = HashSet::new();
        let mut adds = Vec::new();

        if i >= 1 && cfg.budget > 0 && !grid.is_empty() {
            let perms = self.level_symmetries()?;
            let mut used = 0;
            'scan: for size in 1..=i.min(n) {
                let mut idx: Vec<usize> = (0..size).collect();
                loop {
                    let mut choice = vec![0usize; size];
                    loop {
                        let support = idx
                            .iter()
                            .zip(&choice)
                            .map(|(&p, &g)| (PointId(p), grid[g].clone()))
                            .collect();
                        let f = KatetovMap::new(level.clone(), support)?;
                        let vals = f.values();
                        if admissible(&vals) && !seen.contains(&vals) {
                            let mut orbit = vec![(vals, f.clone())];
                            for g in &perms {
                                let img = f.relabel(g.as_slice());
                                let v = img.values();
                                if !orbit.iter().any(|(w, _)| *w == v) {
                                    orbit.push((v, img));
                                }
                            }
                            if used + orbit.len() > cfg.budget {
                                break 'scan;
                            }
                            for (v, m) in orbit {
                                seen.insert(v);
                                adds.push(Adjunction::generic(m));
                                used += 1;
                            }
                            if used == cfg.budget {
                                break 'scan;
                            }
                        }
                        if !advance(&mut choice, grid.len()) {
                            break;
                        }
                    }
                    if !next_combination(&mut idx, n) {
                        break;
                    }
                }
            }
        }

        for j in 0..i {
            let base = self.level_subset(j);
            for offset in &grid {
                let vals: Vec<Rational> = level
                    .points()
                    .map(|x| offset + level.dist_to_set_unchecked(x, base.members()))
                    .collect();
                if admissible(&vals) && seen.insert(vals) {
                    adds.push(Adjunction::axial(j, offset.clone()));
                }
            }
        }
        self.push_level(adds)
    }

    /// Appends a level holding the single axial map over `X_0` with the
    /// largest offset the cap allows; this doubles the diameter. At level 0
    /// no map is admissible and an empty level is appended. Returns whether
    /// the diameter grew.
    pub fn grow_level(&mut self) -> Result<bool> {
        let i = self.depth();
        let before = self.diameters[i].clone();
        if i == 0 || before.is_zero() {
            self.push_level(Vec::new())?;
            return Ok(false);
        }
        let level = &self.levels[i];
        let base = self.level_subset(0);
        let reach = level
            .points()
            .map(|x| level.dist_to_set_unchecked(x, base.members()))
            .max()
            .unwrap();
        let offset = &before * Rational::from(2) - reach;
        self.push_level(vec![Adjunction::axial(0, offset)])?;
        Ok(self.diameters[i + 1] > before)
    }

    /// Re-checks every structural invariant.
    pub fn verify(&self) -> Result<()> {
        let top = self.top();
        if !top.is_valid() {
            return Err(Error::Internal("top level is not a metric".into()));
        }
        for (l, level) in self.levels.iter().enumerate() {
            if **level != top.prefix(level.len()) {
                return Err(Error::Internal(format!(
                    "level {l} is not a prefix of the top"
                )));
            }
            if l > 0 && self.diameters[l] < self.diameters[l - 1] {
                return Err(Error::Internal(format!("diameter decreases at level {l}")));
            }
            if self.diameters[l] != level.diameter() {
                return Err(Error::Internal(format!("stale diameter at level {l}")));
            }
        }
        for rec in &self.records {
            let Some(payload) = &rec.payload else {
                continue;
            };
            let l = rec.level;
            if self.level_of(rec.point) != l + 1 {
                return Err(Error::Internal(format!(
                    "point {} sits at the wrong level",
                    rec.point
                )));
            }
            let cap = &self.diameters[l] * Rational::from(2);
            for x in self.levels[l].points() {
                let v = payload.eval(x);
                if *top.d(rec.point, x) != v {
                    return Err(Error::Internal(format!(
                        "realization equation fails for point {} at {x}",
                        rec.point
                    )));
                }
                if v > cap {
                    return Err(Error::CapExceeded {
                        point: x,
                        value: v,
                        cap,
                    });
                }
            }
        }
        Ok(())
    }

    /// Provenance sidecar text.
    pub fn to_sidecar(&self) -> String {
        let mut out = String::from("provenance 1\n");
        let sizes: Vec<String> = self.level_sizes().iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("levels {}\n", sizes.join(" ")));
        for rec in &self.records {
            let Some(payload) = &rec.payload else {
                continue;
            };
            let body = match &rec.kind {
                ProvenanceKind::Axial { base_level, offset } => {
                    format!("axial {base_level} {offset}")
                }
                _ => format!("finite_support {}", payload.to_line()),
            };
            out.push_str(&format!(
                "point {} level {} {}\n",
                rec.point, rec.level, body
            ));
        }
        out
    }

    /// Rebuilds a tower from the top level's FMS text and its sidecar, and
    /// checks that the stored distances agree with the recorded payloads.
    pub fn from_parts(fms: &str, sidecar: &str) -> Result<Tower> {
        let top = FiniteMetricSpace::from_fms(fms)?;
        let body = sidecar
            .strip_suffix('\n')
            .ok_or_else(|| Error::parse(0, "missing final newline"))?;
        let mut lines = body.split('\n').enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, "provenance 1")) => {}
            _ => return Err(Error::parse(1, "bad provenance header")),
        }
        let (ln, lv) = lines
            .next()
            .ok_or_else(|| Error::parse(2, "missing levels line"))?;
        let sizes: Vec<usize> = lv
            .strip_prefix("levels ")
            .ok_or_else(|| Error::parse(ln, "expected `levels ...`"))?
            .split(' ')
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::parse(ln, format!("bad level size `{s}`")))
            })
            .collect::<Result<_>>()?;
        if sizes.is_empty()
            || sizes[0] == 0
            || sizes.windows(2).any(|w| w[0] > w[1])
            || *sizes.last().unwrap() != top.len()
        {
            return Err(Error::parse(ln, "level sizes inconsistent with the space"));
        }
        let mut entries: Vec<(usize, usize, String)> = Vec::new();
        for (ln, line) in lines {
            let mut it = line.splitn(5, ' ');
            let (Some("point"), Some(p), Some("level"), Some(l), Some(rest)) =
                (it.next(), it.next(), it.next(), it.next(), it.next())
            else {
                return Err(Error::parse(
                    ln,
                    "expected `point <id> level <l> <payload>`",
                ));
            };
            let p: usize = p.parse().map_err(|_| Error::parse(ln, "bad point id"))?;
            let l: usize = l.parse().map_err(|_| Error::parse(ln, "bad level"))?;
            if p != sizes[0] + entries.len() {
                return Err(Error::parse(ln, "points must be listed in order"));
            }
            entries.push((l, ln, rest.to_string()));
        }
        if sizes[0] + entries.len() != top.len() {
            return Err(Error::parse(
                0,
                "provenance does not cover every adjoined point",
            ));
        }

        let mut tower = Tower::new(top.prefix(sizes[0]));
        let mut next = 0;
        for l in 0..sizes.len() - 1 {
            let count = sizes[l + 1] - sizes[l];
            let mut adds = Vec::with_capacity(count);
            for k in 0..count {
                let (lev, ln, rest) = &entries[next];
                let point = PointId(sizes[l] + k);
                next += 1;
                if *lev != l {
                    return Err(Error::parse(
                        *ln,
                        format!("point {point} should have level {l}"),
                    ));
                }
                let adj = if let Some(ax) = rest.strip_prefix("axial ") {
                    let (j, off) = ax
                        .split_once(' ')
                        .ok_or_else(|| Error::parse(*ln, "expected `axial <j> <offset>`"))?;
                    let j: usize = j
                        .parse()
                        .map_err(|_| Error::parse(*ln, "bad axial level"))?;
                    let off: Rational =
                        off.parse().map_err(|e| Error::parse(*ln, format!("{e}")))?;
                    Adjunction::axial(j, off)
                } else if let Some(kat) = rest.strip_prefix("finite_support ") {
                    let map = KatetovMap::parse_line(tower.top().clone(), kat)
                        .map_err(|e| Error::parse(*ln, e.to_string()))?;
                    Adjunction::generic(map)
                } else {
                    return Err(Error::parse(*ln, "unknown payload kind"));
                };
                adds.push(adj.labeled(top.label(point)));
            }
            tower.push_level(adds)?;
        }
        if **tower.top() != top {
            return Err(Error::Internal(
                "stored distances disagree with the provenance payloads".into(),
            ));
        }
        Ok(tower)
    }
}

/// Odometer over `0..base` digits, last digit fastest.
fn advance(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Result of [`finite_injectivity_audit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub max_subset: usize,
    pub checked: usize,
    /// `(K, f on K, realizing point)`
    pub realized: Vec<(Vec<PointId>, Vec<Rational>, PointId)>,
    pub unrealized: Vec<(Vec<PointId>, Vec<Rational>)>,
}

impl AuditReport {
    /// Realized fraction; 1 when nothing was checked.
    pub fn ratio(&self) -> Rational {
        if self.checked == 0 {
            Rational::one()
        } else {
            Rational::new(self.realized.len() as i64, self.checked as i64)
        }
    }
}

/// For every `K` of at most `max_subset` points of `domain` (default: all of
/// `space`) and every Katětov map on `K` with values in `grid`, looks for a
/// point `z` of `space` with `d(z, k) = f(k)` on `K`.
pub fn finite_injectivity_audit(
    space: &FiniteMetricSpace,
    max_subset: usize,
    grid: &[Rational],
    domain: Option<&Subset>,
) -> Result<AuditReport> {
    if max_subset == 0 {
        return Err(Error::PreconditionViolated(
            "subset size must be >= 1".into(),
        ));
    }
    let domain: Vec<PointId> = match domain {
        Some(d) => {
            space.check_subset(d)?;
            d.members().to_vec()
        }
        None => space.points().collect(),
    };
    let mut grid = grid.to_vec();
    grid.sort();
    grid.dedup();
    let mut report = AuditReport {
        max_subset,
        checked: 0,
        realized: Vec::new(),
        unrealized: Vec::new(),
    };
    if grid.is_empty() {
        return Ok(report);
    }
    for size in 1..=max_subset.min(domain.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let k: Vec<PointId> = idx.iter().map(|&i| domain[i]).collect();
            let mut choice = vec![0usize; size];
            loop {
                let vals: Vec<Rational> = choice.iter().map(|&g| grid[g].clone()).collect();
                if is_katetov_on(space, &k, &vals) {
                    report.checked += 1;
                    let z = space
                        .points()
                        .find(|&z| k.iter().zip(&vals).all(|(&p, v)| space.d(z, p) == v));
                    match z {
                        Some(z) => report.realized.push((k.clone(), vals, z)),
                        None => report.unrealized.push((k.clone(), vals)),
                    }
                }
                if !advance(&mut choice, grid.len()) {
                    break;
                }
            }
            if !next_combination(&mut idx, domain.len()) {
                break;
            }
        }
    }
    Ok(report)
}

fn is_katetov_on(space: &FiniteMetricSpace, k: &[PointId], vals: &[Rational]) -> bool {
    for a in 0..k.len() {
        for b in (a + 1)..k.len() {
            let d = space.d(k[a], k[b]);
            if (&vals[a] - &vals[b]).abs() > *d || *d > &vals[a] + &vals[b] {
                return false;
            }
        }
    }
    true
}
