//! JSON certificate for `Iso(F) ≅ Iso(X_0)` and an independent re-checker
//! that needs nothing but the certificate itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isometry::{enumerate_isometries, Isometry, IsometryGroup};
use crate::metric::{FiniteMetricSpace, PointId};
use crate::rational::Rational;
use crate::witness::{check_isomorphism, PipelineConfig, PipelineRun};

pub const FORMAT: &str = "urysohn-certificate 1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceRecord {
    pub labels: Vec<String>,
    pub distances: Vec<Vec<Rational>>,
}

impl SpaceRecord {
    fn of(space: &FiniteMetricSpace) -> Self {
        SpaceRecord {
            labels: space.labels().to_vec(),
            distances: space.matrix(),
        }
    }

    fn to_space(&self) -> Result<FiniteMetricSpace> {
        FiniteMetricSpace::new(self.labels.clone(), self.distances.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerSummary {
    pub level_sizes: Vec<usize>,
    pub diameters: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub k: usize,
    pub e: Rational,
    pub j: usize,
    /// Point id in the tower's top level.
    pub point: PointId,
    /// Index within `F`.
    pub f_index: usize,
    pub dist_to_base: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub order: usize,
    /// `iso ...` lines, sorted.
    pub elements: Vec<String>,
    pub table: Vec<Vec<usize>>,
    pub orbits: Vec<Vec<PointId>>,
}

impl GroupRecord {
    fn of(group: &IsometryGroup) -> Self {
        GroupRecord {
            order: group.order(),
            elements: group.elements().iter().map(Isometry::to_line).collect(),
            table: group.composition_table().unwrap_or_default(),
            orbits: group.orbits(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaRecord {
    /// Per `F` point: whether some other `F` point lies at distance in `(0, 1]`.
    pub near_point: Vec<bool>,
    pub stabilizes_base: bool,
    pub fixes_witnesses: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub format: String,
    pub config: PipelineConfig,
    pub input: SpaceRecord,
    pub rescaled: bool,
    pub tower: TowerSummary,
    /// The metric on `F`; the first `base_size` points are `X_0`.
    pub f: SpaceRecord,
    pub f_points: Vec<PointId>,
    pub base_size: usize,
    pub witnesses: Vec<WitnessRecord>,
    pub coverage_bound: usize,
    pub iso_base: GroupRecord,
    pub iso_f: GroupRecord,
    /// Index in `iso_base` of each `iso_f` element restricted to `X_0`.
    pub restriction: Vec<usize>,
    /// Index in `iso_f` of each `iso_base` element extended through the tower.
    pub extension: Vec<usize>,
    pub lemma: LemmaRecord,
    pub uniquely_realized: usize,
}

impl Certificate {
    pub fn from_run(x0: &FiniteMetricSpace, cfg: &PipelineConfig, run: &PipelineRun) -> Self {
        let tower = &run.tower;
        let f = tower
            .top()
            .restrict(&run.witnesses.f)
            .expect("F is a subset of the top level");
        let witnesses = run
            .witnesses
            .witnesses
            .iter()
            .map(|w| WitnessRecord {
                k: w.k,
                e: w.e.clone(),
                j: w.j,
                point: w.point,
                f_index: f
                    .to_parent
                    .iter()
                    .position(|p| *p == w.point)
                    .expect("witness in F"),
                dist_to_base: tower
                    .top()
                    .dist_to_set_unchecked(w.point, tower.level_subset(0).members()),
            })
            .collect();
        Certificate {
            format: FORMAT.to_string(),
            config: cfg.clone(),
            input: SpaceRecord::of(x0),
            rescaled: run.rescaled,
            tower: TowerSummary {
                level_sizes: tower.level_sizes(),
                diameters: tower.diameters().to_vec(),
            },
            f: SpaceRecord::of(&f.space),
            f_points: f.to_parent.clone(),
            base_size: tower.level_size(0),
            witnesses,
            coverage_bound: run.witnesses.coverage_bound(),
            iso_base: GroupRecord::of(&run.iso_base),
            iso_f: GroupRecord::of(&run.iso_f),
            restriction: run.restriction.clone(),
            extension: run.extension.clone(),
            lemma: LemmaRecord {
                near_point: run
                    .lemma
                    .membership
                    .iter()
                    .map(|(_, _, near)| *near)
                    .collect(),
                stabilizes_base: run.lemma.stabilizes_base,
                fixes_witnesses: run.lemma.fixes_witnesses,
            },
            uniquely_realized: run.uniquely_realized,
        }
    }

    /// Pretty JSON with a trailing newline. Field order is fixed, so equal
    /// certificates serialize to equal bytes.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("certificate serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Certificate> {
        serde_json::from_str(text).map_err(|e| Error::parse(e.line(), e.to_string()))
    }
}

/// Recomputes everything the certificate claims from its `F` metric alone:
/// both groups, their tables, the bijection and its homomorphism property,
/// the witness distances and the membership criterion.
pub fn verify_certificate(cert: &Certificate) -> Result<()> {
    let bad = |m: String| Err(Error::PreconditionViolated(format!("certificate: {m}")));
    if cert.format != FORMAT {
        return bad(format!("unknown format `{}`", cert.format));
    }
    let f = cert.f.to_space()?;
    let n0 = cert.base_size;
    if n0 < 3 || n0 > f.len() || cert.f_points.len() != f.len() {
        return bad("inconsistent sizes".into());
    }
    let base = f.prefix(n0);
    let input = cert.input.to_space()?;
    let expected = if cert.rescaled {
        input.rescale_bounded()
    } else {
        input
    };
    if expected.matrix() != base.matrix() {
        return bad("X_0 does not match the (rescaled) input".into());
    }

    let iso_base = enumerate_isometries(&base);
    let iso_f = enumerate_isometries(&f);
    for (rec, group, space) in [
        (&cert.iso_base, &iso_base, &base),
        (&cert.iso_f, &iso_f, &f),
    ] {
        let claimed = rec
            .elements
            .iter()
            .map(|l| Isometry::parse_line(space, l))
            .collect::<Result<Vec<_>>>()?;
        if claimed != group.elements() || rec.order != group.order() {
            return bad("group elements differ from enumeration".into());
        }
        if Some(&rec.table) != group.composition_table().as_ref() || rec.orbits != group.orbits() {
            return bad("group table or orbits differ".into());
        }
    }
    check_isomorphism(&iso_base, &iso_f, &cert.restriction, &cert.extension)?;
    for (a, g) in iso_f.elements().iter().enumerate() {
        if g.restrict_prefix(n0).as_ref() != Some(&iso_base.elements()[cert.restriction[a]]) {
            return bad(format!("restriction entry {a} is wrong"));
        }
    }

    let four = Rational::from(4);
    let base_ids: Vec<PointId> = base.points().collect();
    for (i, w) in cert.witnesses.iter().enumerate() {
        if w.f_index < n0 || w.f_index >= f.len() || cert.f_points[w.f_index] != w.point {
            return bad(format!("witness {} has a bad index", i + 1));
        }
        if f.dist_to_set_unchecked(PointId(w.f_index), &base_ids) != w.e || w.dist_to_base != w.e {
            return bad(format!("d(a_{}, X_0) != e_{}", i + 1, i + 1));
        }
        let grows = if i == 0 {
            w.e >= four
        } else {
            w.e > &four * &cert.witnesses[i - 1].e
        };
        if !grows {
            return bad(format!("e_{} breaks the growth rule", i + 1));
        }
    }
    let one = Rational::one();
    let near: Vec<bool> = f
        .points()
        .map(|x| {
            f.points()
                .any(|y| f.d(x, y).is_positive() && *f.d(x, y) <= one)
        })
        .collect();
    if near != cert.lemma.near_point || near.iter().enumerate().any(|(x, &b)| b != (x < n0)) {
        return bad("membership criterion does not separate X_0 from the witnesses".into());
    }
    if !cert.lemma.stabilizes_base || !cert.lemma.fixes_witnesses {
        return bad("stabilizer claims are false".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::witness::verify_main_theorem;

    fn cfg() -> PipelineConfig {
        PipelineConfig {
            depth: 2,
            reps: 1,
            budget: 6,
            grid: vec![Rational::new(1, 2), Rational::one()],
            max_levels: 64,
        }
    }

    fn triangle() -> FiniteMetricSpace {
        FiniteMetricSpace::from_integers(&[&[0, 1, 1], &[1, 0, 1], &[1, 1, 0]]).unwrap()
    }

    #[test]
    fn json_round_trip_and_recheck() {
        let cert = verify_main_theorem(&triangle(), &cfg()).unwrap();
        let text = cert.to_json();
        let back = Certificate::from_json(&text).unwrap();
        assert_eq!(back, cert);
        assert_eq!(back.to_json(), text);
        verify_certificate(&back).unwrap();
        assert_eq!(cert.iso_f.order, 6);
    }

    #[test]
    fn tampering_is_caught() {
        let cert = verify_main_theorem(&triangle(), &cfg()).unwrap();
        let mut c = cert.clone();
        c.restriction.swap(1, 2);
        assert!(verify_certificate(&c).is_err());
        let mut c = cert.clone();
        c.witnesses[0].e = Rational::from(3);
        assert!(verify_certificate(&c).is_err());
        let mut c = cert;
        c.iso_f.elements.pop();
        assert!(verify_certificate(&c).is_err());
    }
}
