//! Witness points `a_i` that pin down the tower levels, the set
//! `F = X_0 ∪ {a_i}`, and the finite-scale check that `Iso(F) ≅ Iso(X_0)`.
//!
//! Each witness realizes `x -> e_i + d(x, X_{k_i - 1})` over `X_{j_i}`.
//! Every extended isometry fixes it, and an isometry that fails to preserve
//! `X_n` must move some witness with `k_i = n + 1` by at least `δ/2`.

use serde::{Deserialize, Serialize};

use crate::certificate::Certificate;
use crate::error::{Error, Result};
use crate::isometry::{enumerate_isometries, extend_through_tower, Isometry, IsometryGroup};
use crate::metric::{FiniteMetricSpace, PointId, Subset};
use crate::rational::Rational;
use crate::tower::{Adjunction, Tower, TowerConfig};

/// The sequence `k_1, ..., k_N`, each of `1..=depth` repeated `reps` times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessPlan {
    pub depth: usize,
    pub reps: usize,
    pub k: Vec<usize>,
}

/// Round-robin: `depth = 2, reps = 2` gives `[1, 2, 1, 2]`.
pub fn plan_witnesses(depth: usize, reps: usize) -> Result<WitnessPlan> {
    if depth == 0 || reps == 0 {
        return Err(Error::PreconditionViolated(
            "witness plan needs depth >= 1 and reps >= 1".into(),
        ));
    }
    let k = (0..reps).flat_map(|_| 1..=depth).collect();
    Ok(WitnessPlan { depth, reps, k })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub k: usize,
    pub e: Rational,
    pub j: usize,
    pub point: PointId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessSet {
    pub witnesses: Vec<Witness>,
    /// `X_0` followed by the witnesses, as top-level point ids.
    pub f: Subset,
}

impl WitnessSet {
    pub fn new(tower: &Tower, witnesses: Vec<Witness>) -> Self {
        let f = Subset::new(
            (0..tower.level_size(0))
                .map(PointId)
                .chain(witnesses.iter().map(|w| w.point)),
        );
        WitnessSet { witnesses, f }
    }

    /// Largest `k_i`: the plan can only certify `φ(X_n) = X_n` for `n < coverage_bound`.
    pub fn coverage_bound(&self) -> usize {
        self.witnesses.iter().map(|w| w.k).max().unwrap_or(0)
    }

    /// Exact checks of the growth rule, the defining distances, the
    /// separation of witnesses, and fixedness under extended isometries.
    pub fn verify(&self, tower: &Tower) -> Result<()> {
        let top = tower.top();
        let base = tower.level_subset(0);
        let four = Rational::from(4);
        let fail = |msg: String| Err(Error::Internal(msg));
        for (i, w) in self.witnesses.iter().enumerate() {
            if i == 0 && w.e < four {
                return fail(format!("e_1 = {} < 4", w.e));
            }
            if i > 0 && w.e <= &four * &self.witnesses[i - 1].e {
                return fail(format!("e_{} is not above 4 e_{}", i + 1, i));
            }
            if w.k == 0 || w.j < w.k || w.j >= tower.depth() {
                return fail(format!(
                    "witness {} has bad indices k = {}, j = {}",
                    i + 1,
                    w.k,
                    w.j
                ));
            }
            if i > 0 && w.j < self.witnesses[i - 1].j {
                return fail("j is not nondecreasing".into());
            }
            if tower.level_of(w.point) != w.j + 1 {
                return fail(format!(
                    "witness {} does not live at level {}",
                    i + 1,
                    w.j + 1
                ));
            }
            if top.dist_to_set_unchecked(w.point, base.members()) != w.e {
                return fail(format!("d(a_{}, X_0) != e_{}", i + 1, i + 1));
            }
            let anchor = tower.level_subset(w.k - 1);
            for x in tower.level(w.j).points() {
                if *top.d(w.point, x) != &w.e + top.dist_to_set_unchecked(x, anchor.members()) {
                    return fail(format!("witness equation fails for a_{} at {x}", i + 1));
                }
            }
            for v in &self.witnesses[..i] {
                if *top.d(w.point, v.point) < (&w.e - &v.e).abs() {
                    return fail(format!("witnesses {} and {} are too close", i + 1, v.point));
                }
            }
        }
        let fx: Vec<PointId> = self.f.members().to_vec();
        for a in &fx {
            for b in &fx {
                if a < b
                    && !(base.contains(*a) && base.contains(*b))
                    && *top.d(*a, *b) <= Rational::one()
                {
                    return fail(format!(
                        "F-points {a} and {b} outside X_0 are within distance 1"
                    ));
                }
            }
        }
        for g in tower.base_group() {
            let ext = extend_through_tower(g, tower)?;
            if let Some(w) = self
                .witnesses
                .iter()
                .find(|w| ext.apply(w.point) != w.point)
            {
                return fail(format!("extended isometry moves witness {}", w.point));
            }
        }
        Ok(())
    }
}

/// Adjoins one witness per plan entry, growing the tower with axial levels
/// until `diam(X_j) >= e_i`. Each witness gets a fresh level of its own.
/// The tower's depth never exceeds `max_levels`.
pub fn choose_witnesses(
    tower: &mut Tower,
    plan: &WitnessPlan,
    max_levels: usize,
) -> Result<WitnessSet> {
    let four = Rational::from(4);
    let one = Rational::one();
    let mut e_prev = Rational::one();
    let mut witnesses = Vec::with_capacity(plan.k.len());
    for (i, &k) in plan.k.iter().enumerate() {
        if k == 0 {
            return Err(Error::PreconditionViolated(
                "witness index k must be >= 1".into(),
            ));
        }
        grow_until(tower, max_levels, |t| t.depth() >= k, &Rational::zero())?;
        let e = (&four * &e_prev + &one).max(&tower.diameters()[k] + &one);
        grow_until(tower, max_levels, |t| t.diameters()[t.depth()] >= e, &e)?;
        let j = tower.depth();
        if j + 1 > max_levels {
            return Err(Error::TowerGrowthFailed {
                needed: e,
                reached: tower.diameters()[j].clone(),
                max_levels,
            });
        }
        tower.push_level(vec![
            Adjunction::axial(k - 1, e.clone()).labeled(format!("a{}", i + 1))
        ])?;
        let point = PointId(tower.level_size(j + 1) - 1);
        witnesses.push(Witness {
            k,
            e: e.clone(),
            j,
            point,
        });
        e_prev = e;
    }
    Ok(WitnessSet::new(tower, witnesses))
}

fn grow_until(
    tower: &mut Tower,
    max_levels: usize,
    done: impl Fn(&Tower) -> bool,
    needed: &Rational,
) -> Result<()> {
    while !done(tower) {
        if tower.depth() >= max_levels {
            return Err(Error::TowerGrowthFailed {
                needed: needed.clone(),
                reached: tower.diameters()[tower.depth()].clone(),
                max_levels,
            });
        }
        tower.grow_level()?;
    }
    Ok(())
}

/// Outcome of the membership criterion and the stabilizer check on `F`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaReport {
    /// `(x, x ∈ X_0, some F-point lies at distance in (0, 1])`
    pub membership: Vec<(PointId, bool, bool)>,
    pub iso_f_order: usize,
    pub stabilizes_base: bool,
    pub fixes_witnesses: bool,
}

impl LemmaReport {
    pub fn holds(&self) -> bool {
        self.membership.iter().all(|(_, a, b)| a == b)
            && self.stabilizes_base
            && self.fixes_witnesses
    }
}

/// `x ∈ X_0 ⟺ ∃y ∈ F: 0 < d(x, y) ≤ 1` on `F`, and every isometry of `F`
/// maps `X_0` onto itself and fixes each witness.
pub fn check_lemma_sympa(tower: &Tower, ws: &WitnessSet) -> Result<LemmaReport> {
    let base = tower.base();
    if base.len() < 3 {
        return Err(Error::PreconditionViolated(format!(
            "X_0 has {} points; at least 3 are needed",
            base.len()
        )));
    }
    if base.diameter() > Rational::one() {
        return Err(Error::PreconditionViolated(format!(
            "X_0 has diameter {} > 1",
            base.diameter()
        )));
    }
    let r = tower.top().restrict(&ws.f)?;
    let n0 = base.len();
    let one = Rational::one();
    let membership = r
        .space
        .points()
        .map(|x| {
            let near = r.space.points().any(|y| {
                let d = r.space.d(x, y);
                d.is_positive() && *d <= one
            });
            (r.to_parent[x.0], x.0 < n0, near)
        })
        .collect();
    let group = enumerate_isometries(&r.space);
    let base_local = Subset::prefix(n0);
    let stabilizes_base = group.elements().iter().all(|g| g.stabilizes(&base_local));
    let fixes_witnesses = group
        .elements()
        .iter()
        .all(|g| (n0..r.space.len()).all(|x| g.apply(PointId(x)) == PointId(x)));
    Ok(LemmaReport {
        membership,
        iso_f_order: group.order(),
        stabilizes_base,
        fixes_witnesses,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub depth: usize,
    pub reps: usize,
    pub budget: usize,
    pub grid: Vec<Rational>,
    /// Upper bound on the tower depth while adjoining witnesses.
    pub max_levels: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            depth: 2,
            reps: 1,
            budget: 12,
            grid: vec![Rational::new(1, 2), Rational::one()],
            max_levels: 64,
        }
    }
}

/// Everything the pipeline produced, for callers that need more than the
/// certificate.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub rescaled: bool,
    pub tower: Tower,
    pub witnesses: WitnessSet,
    pub lemma: LemmaReport,
    pub iso_base: IsometryGroup,
    pub iso_f: IsometryGroup,
    /// `restriction[a]` is the index in `iso_base` of `iso_f[a]` restricted to `X_0`.
    pub restriction: Vec<usize>,
    /// `extension[b]` is the index in `iso_f` of `iso_base[b]` extended through the tower.
    pub extension: Vec<usize>,
    /// Adjoined points checked to be the unique point of their level with their distance profile.
    pub uniquely_realized: usize,
}

/// Builds the tower, adjoins witnesses, and checks that restriction to
/// `X_0` and extension through the tower are mutually inverse group
/// isomorphisms between `Iso(F)` and `Iso(X_0)`.
pub fn run_pipeline(x0: &FiniteMetricSpace, cfg: &PipelineConfig) -> Result<PipelineRun> {
    if !x0.is_valid() {
        return Err(Error::InvalidMetric(
            crate::metric::validate_metric(&x0.matrix())
                .err()
                .unwrap_or_default(),
        ));
    }
    if x0.len() < 3 {
        return Err(Error::PreconditionViolated(format!(
            "X_0 has {} points; at least 3 are needed",
            x0.len()
        )));
    }
    let rescaled = x0.diameter() > Rational::one();
    let base = if rescaled {
        x0.rescale_bounded()
    } else {
        x0.clone()
    };
    let tcfg = TowerConfig {
        depth: cfg.depth,
        budget: cfg.budget,
        grid: cfg.grid.clone(),
    };
    let mut tower = Tower::build(base, &tcfg)?;
    let plan = plan_witnesses(cfg.depth, cfg.reps)?;
    let witnesses = choose_witnesses(&mut tower, &plan, cfg.max_levels.max(cfg.depth))?;
    tower.verify()?;
    witnesses.verify(&tower)?;
    let lemma = check_lemma_sympa(&tower, &witnesses)?;
    if !lemma.holds() {
        return Err(Error::Internal(
            "membership criterion or stabilizer check failed on F".into(),
        ));
    }

    let n0 = tower.level_size(0);
    let iso_base = IsometryGroup::from_elements(tower.base_group().to_vec());
    let f_space = tower.top().restrict(&witnesses.f)?;
    let iso_f = enumerate_isometries(&f_space.space);

    let restriction = iso_f
        .elements()
        .iter()
        .map(|g| {
            g.restrict_prefix(n0)
                .and_then(|r| iso_base.index_of(&r))
                .ok_or_else(|| {
                    Error::Internal(format!("{g:?} does not restrict to an isometry of X_0"))
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let local: std::collections::HashMap<PointId, usize> = f_space
        .to_parent
        .iter()
        .enumerate()
        .map(|(i, p)| (*p, i))
        .collect();
    let extension = iso_base
        .elements()
        .iter()
        .map(|g| {
            let ext = extend_through_tower(g, &tower)?;
            let perm = f_space
                .to_parent
                .iter()
                .map(|p| local.get(&ext.apply(*p)).copied())
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| {
                    Error::Internal(format!("extension of {g:?} does not preserve F"))
                })?;
            let h = Isometry::new(&f_space.space, perm)?;
            iso_f
                .index_of(&h)
                .ok_or_else(|| Error::Internal(format!("extension of {g:?} missing from Iso(F)")))
        })
        .collect::<Result<Vec<_>>>()?;

    check_isomorphism(&iso_base, &iso_f, &restriction, &extension)?;

    let mut uniquely_realized = 0;
    for rec in tower.records().iter().filter(|r| r.payload.is_some()) {
        let profile: Vec<Rational> = tower
            .level(rec.level)
            .points()
            .map(|x| tower.top().d(rec.point, x).clone())
            .collect();
        if tower.profile_multiplicity(rec.level, &profile) != 1 {
            return Err(Error::Internal(format!(
                "point {} is not determined by its profile",
                rec.point
            )));
        }
        uniquely_realized += 1;
    }

    Ok(PipelineRun {
        rescaled,
        tower,
        witnesses,
        lemma,
        iso_base,
        iso_f,
        restriction,
        extension,
        uniquely_realized,
    })
}

/// Both maps are homomorphisms and mutually inverse.
pub(crate) fn check_isomorphism(
    iso_base: &IsometryGroup,
    iso_f: &IsometryGroup,
    restriction: &[usize],
    extension: &[usize],
) -> Result<()> {
    let bad = |m: &str| Err(Error::Internal(m.to_string()));
    if restriction.len() != iso_f.order() || extension.len() != iso_base.order() {
        return bad("bijection tables have the wrong size");
    }
    if (0..iso_base.order()).any(|b| restriction.get(extension[b]) != Some(&b)) {
        return bad("restriction after extension is not the identity");
    }
    if (0..iso_f.order()).any(|a| extension.get(restriction[a]) != Some(&a)) {
        return bad("extension after restriction is not the identity");
    }
    let (Some(tb), Some(tf)) = (iso_base.composition_table(), iso_f.composition_table()) else {
        return bad("a group is not closed under composition");
    };
    for a in 0..iso_f.order() {
        for b in 0..iso_f.order() {
            if restriction[tf[a][b]] != tb[restriction[a]][restriction[b]] {
                return bad("restriction is not a homomorphism");
            }
        }
    }
    for a in 0..iso_base.order() {
        for b in 0..iso_base.order() {
            if extension[tb[a][b]] != tf[extension[a]][extension[b]] {
                return bad("extension is not a homomorphism");
            }
        }
    }
    Ok(())
}

/// Runs the pipeline and packages the result as a certificate.
pub fn verify_main_theorem(x0: &FiniteMetricSpace, cfg: &PipelineConfig) -> Result<Certificate> {
    let run = run_pipeline(x0, cfg)?;
    Ok(Certificate::from_run(x0, cfg, &run))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeVerdict {
    /// `φ` maps every level onto itself.
    Compatible,
    /// `φ(X_n) = X_n`, though some other level is not preserved.
    Preserved { level: usize },
    /// `φ(x) ∈ X_n` for `x ∉ X_n`, and witness `i` (0-based) moves by `distance >= δ/2`.
    Violation {
        x: PointId,
        image: PointId,
        delta: Rational,
        witness: usize,
        distance: Rational,
    },
}

impl ProbeVerdict {
    /// For a violation, whether the witness moved by at least `δ/2`.
    pub fn bound_holds(&self) -> bool {
        match self {
            ProbeVerdict::Violation {
                delta, distance, ..
            } => *distance >= delta / Rational::from(2),
            _ => true,
        }
    }
}

/// Tests whether `φ` preserves `X_n`; if not, measures how far the witness
/// for `k = n + 1` is moved.
pub fn rigidity_probe(
    tower: &Tower,
    ws: &WitnessSet,
    phi: &Isometry,
    n: usize,
) -> Result<ProbeVerdict> {
    let top = tower.top();
    if phi.len() != top.len() {
        return Err(Error::SpaceMismatch);
    }
    if n > tower.depth() {
        return Err(Error::PreconditionViolated(format!(
            "level {n} is above the top level {}",
            tower.depth()
        )));
    }
    let size = tower.level_size(n);
    let Some(x) = (size..top.len())
        .map(PointId)
        .find(|&x| phi.apply(x).0 < size)
    else {
        let all = (0..=tower.depth()).all(|l| phi.restrict_prefix(tower.level_size(l)).is_some());
        return Ok(if all {
            ProbeVerdict::Compatible
        } else {
            ProbeVerdict::Preserved { level: n }
        });
    };
    let level = Subset::prefix(size);
    let delta = top.dist_to_set_unchecked(x, level.members());
    let lx = tower.level_of(x);
    let (i, w) = ws
        .witnesses
        .iter()
        .enumerate()
        .find(|(_, w)| w.k == n + 1 && w.j >= lx)
        .ok_or(Error::WitnessPlanInsufficient { k: n + 1, j: lx })?;
    Ok(ProbeVerdict::Violation {
        x,
        image: phi.apply(x),
        delta,
        witness: i,
        distance: top.d(phi.apply(w.point), w.point).clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::katetov::KatetovMap;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    fn equilateral(n: usize) -> FiniteMetricSpace {
        let m = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { q(0, 1) } else { q(1, 1) })
                    .collect()
            })
            .collect();
        FiniteMetricSpace::from_matrix(m).unwrap()
    }

    fn small_cfg(depth: usize, reps: usize) -> PipelineConfig {
        PipelineConfig {
            depth,
            reps,
            budget: 6,
            grid: vec![q(1, 2), q(1, 1)],
            max_levels: 64,
        }
    }

    #[test]
    fn plans_are_round_robin() {
        assert_eq!(plan_witnesses(1, 1).unwrap().k, vec![1]);
        assert_eq!(plan_witnesses(2, 2).unwrap().k, vec![1, 2, 1, 2]);
        assert!(plan_witnesses(0, 1).is_err());
        let p = plan_witnesses(4, 3).unwrap();
        for v in 1..=4 {
            assert_eq!(p.k.iter().filter(|&&k| k == v).count(), 3);
        }
    }

    #[test]
    fn e_sequence_with_small_diameters() {
        let mut t = Tower::new(equilateral(3));
        t.push_level(vec![]).unwrap();
        let plan = WitnessPlan {
            depth: 1,
            reps: 3,
            k: vec![1, 1, 1],
        };
        let ws = choose_witnesses(&mut t, &plan, 64).unwrap();
        let e: Vec<Rational> = ws.witnesses.iter().map(|w| w.e.clone()).collect();
        assert_eq!(e, vec![q(5, 1), q(21, 1), q(85, 1)]);
        ws.verify(&t).unwrap();
        t.verify().unwrap();
    }

    #[test]
    fn witness_equation_holds_on_its_level() {
        let run = run_pipeline(&equilateral(3), &small_cfg(2, 2)).unwrap();
        let t = &run.tower;
        for w in &run.witnesses.witnesses {
            let anchor = t.level_subset(w.k - 1);
            for x in t.level(w.j).points() {
                let d = t.top().d(w.point, x);
                assert_eq!(d - &w.e, t.top().dist_to_set(x, &anchor).unwrap());
            }
            assert_eq!(
                t.top().dist_to_set(w.point, &t.level_subset(0)).unwrap(),
                w.e
            );
        }
    }

    #[test]
    fn growth_failure_is_reported() {
        let mut t = Tower::new(equilateral(3));
        let plan = plan_witnesses(1, 2).unwrap();
        assert!(matches!(
            choose_witnesses(&mut t, &plan, 3),
            Err(Error::TowerGrowthFailed { .. })
        ));
    }

    #[test]
    fn membership_criterion_on_built_instance() {
        let run = run_pipeline(&equilateral(3), &small_cfg(2, 1)).unwrap();
        assert!(run.lemma.holds());
        let top = run.tower.top();
        for w in &run.witnesses.witnesses {
            let nearest = run
                .witnesses
                .f
                .members()
                .iter()
                .filter(|&&p| p != w.point)
                .map(|&p| top.d(w.point, p).clone())
                .min()
                .unwrap();
            assert!(nearest >= &w.e - q(1, 1));
            assert!(nearest > q(1, 1));
        }
    }

    #[test]
    fn membership_check_rejects_small_or_wide_bases() {
        let mut t = Tower::new(FiniteMetricSpace::from_integers(&[&[0, 1], &[1, 0]]).unwrap());
        let ws = choose_witnesses(&mut t, &plan_witnesses(1, 1).unwrap(), 64).unwrap();
        assert!(matches!(
            check_lemma_sympa(&t, &ws),
            Err(Error::PreconditionViolated(_))
        ));
        let wide = FiniteMetricSpace::from_integers(&[&[0, 2, 2], &[2, 0, 2], &[2, 2, 0]]).unwrap();
        let mut t = Tower::new(wide);
        let ws = choose_witnesses(&mut t, &plan_witnesses(1, 1).unwrap(), 64).unwrap();
        assert!(matches!(
            check_lemma_sympa(&t, &ws),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn iso_f_matches_iso_base_on_triangles() {
        let run = run_pipeline(&equilateral(3), &small_cfg(2, 1)).unwrap();
        assert_eq!(run.iso_f.order(), 6);
        assert_eq!(run.iso_base.order(), 6);
        assert!(!run.rescaled);
        let id_f = run
            .iso_f
            .index_of(&Isometry::identity(run.witnesses.f.len()))
            .unwrap();
        let id_0 = run.iso_base.index_of(&Isometry::identity(3)).unwrap();
        assert_eq!(run.restriction[id_f], id_0);

        let scalene = FiniteMetricSpace::from_matrix(vec![
            vec![q(0, 1), q(1, 1), q(9, 10)],
            vec![q(1, 1), q(0, 1), q(4, 5)],
            vec![q(9, 10), q(4, 5), q(0, 1)],
        ])
        .unwrap();
        let run = run_pipeline(&scalene, &small_cfg(2, 1)).unwrap();
        assert_eq!(run.iso_f.order(), 1);
    }

    #[test]
    fn wide_bases_are_rescaled() {
        let x = FiniteMetricSpace::from_integers(&[&[0, 2, 2], &[2, 0, 2], &[2, 2, 0]]).unwrap();
        let run = run_pipeline(&x, &small_cfg(1, 1)).unwrap();
        assert!(run.rescaled);
        assert_eq!(run.tower.base().d(PointId(0), PointId(1)), &q(2, 3));
    }

    /// `X_0 = {p, q}` at distance 5 with `u` and `v` both at distance 5 from
    /// everything, so swapping them is an isometry even though `u ∈ X_2`
    /// and `v ∉ X_3`.
    fn straddling_tower() -> (Tower, WitnessSet, Isometry) {
        let mut t = Tower::new(
            FiniteMetricSpace::new(
                vec!["p".into(), "q".into()],
                vec![vec![q(0, 1), q(5, 1)], vec![q(5, 1), q(0, 1)]],
            )
            .unwrap(),
        );
        t.push_level(vec![]).unwrap();
        t.push_level(vec![Adjunction::axial(0, q(5, 1)).labeled("u")])
            .unwrap();
        t.push_level(vec![]).unwrap();
        let v = KatetovMap::from_values(t.top().clone(), vec![q(5, 1); 3]).unwrap();
        t.push_level(vec![Adjunction::generic(v).labeled("v")])
            .unwrap();
        let twin = KatetovMap::new(
            t.top().clone(),
            vec![
                (PointId(0), q(5, 1)),
                (PointId(1), q(5, 1)),
                (PointId(3), q(5, 1)),
            ],
        )
        .unwrap();
        t.push_level(vec![
            Adjunction::axial(2, q(5, 1)).labeled("a"),
            Adjunction::generic(twin).labeled("a'"),
        ])
        .unwrap();
        t.verify().unwrap();
        let ws = WitnessSet::new(
            &t,
            vec![Witness {
                k: 3,
                e: q(5, 1),
                j: 4,
                point: PointId(4),
            }],
        );
        let phi = Isometry::new(t.top(), vec![0, 1, 3, 2, 5, 4]).unwrap();
        (t, ws, phi)
    }

    #[test]
    fn probe_detects_level_violation() {
        let (t, ws, phi) = straddling_tower();
        // Hand computation: x = v, δ = d(v, {p, q, u}) = 5, and a, a' differ
        // only at u (5 vs 10) and v (10 vs 5), so d(a, a') = 5 >= 5/2.
        let verdict = rigidity_probe(&t, &ws, &phi, 2).unwrap();
        assert_eq!(
            verdict,
            ProbeVerdict::Violation {
                x: PointId(3),
                image: PointId(2),
                delta: q(5, 1),
                witness: 0,
                distance: q(5, 1),
            }
        );
        assert!(verdict.bound_holds());
        assert!(matches!(
            rigidity_probe(&t, &ws, &phi, 3),
            Err(Error::WitnessPlanInsufficient { k: 4, j: 4 })
        ));
        assert_eq!(
            rigidity_probe(&t, &ws, &phi, 0).unwrap(),
            ProbeVerdict::Preserved { level: 0 }
        );
    }

    #[test]
    fn probe_accepts_extended_isometries() {
        let (t, ws, _) = straddling_tower();
        for g in t.base_group() {
            let ext = extend_through_tower(g, &t).unwrap();
            for n in 0..=t.depth() {
                assert_eq!(
                    rigidity_probe(&t, &ws, &ext, n).unwrap(),
                    ProbeVerdict::Compatible
                );
            }
        }
        let run = run_pipeline(&equilateral(3), &small_cfg(2, 1)).unwrap();
        for g in run.tower.base_group() {
            let ext = extend_through_tower(g, &run.tower).unwrap();
            assert_eq!(
                rigidity_probe(&run.tower, &run.witnesses, &ext, 1).unwrap(),
                ProbeVerdict::Compatible
            );
        }
    }
}
