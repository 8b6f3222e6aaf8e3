//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. All comparisons are exact.

use std::process::{Command, ExitCode};
use std::sync::Arc;

use itertools::Itertools;
use rand::Rng;

use urysohn::generate::{cauchy_sequence, random_katetov_map, random_space, seeded};
use urysohn::isometry::extend_through_tower;
use urysohn::katetov::minimal_support;
use urysohn::limit::limit_extract;
use urysohn::tower::Adjunction;
use urysohn::witness::{
    check_lemma_sympa, choose_witnesses, plan_witnesses, rigidity_probe, run_pipeline,
    PipelineConfig, ProbeVerdict, Witness, WitnessSet,
};
use urysohn::{
    enumerate_isometries, FiniteMetricSpace, Isometry, KatetovMap, PointId, Rational, Subset, Tower,
};

type Outcome = Result<String, String>;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn space(rows: &[&[Rational]]) -> FiniteMetricSpace {
    FiniteMetricSpace::from_matrix(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn constant(n: usize, d: Rational) -> FiniteMetricSpace {
    let m = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { Rational::zero() } else { d.clone() })
                .collect()
        })
        .collect();
    FiniteMetricSpace::from_matrix(m).unwrap()
}

// Oracles written independently of the library's evaluation paths.

fn eval_min_formula(f: &KatetovMap, x: PointId) -> Rational {
    let space = f.space();
    f.support()
        .iter()
        .map(|(s, v)| v + space.d(x, *s))
        .min()
        .unwrap()
}

fn sup_abs(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .max()
        .unwrap_or_else(Rational::zero)
}

fn brute_force_isometries(x: &FiniteMetricSpace) -> Vec<Vec<usize>> {
    let n = x.len();
    (0..n)
        .permutations(n)
        .filter(|p| {
            (0..n).all(|a| {
                ((a + 1)..n)
                    .all(|b| x.d(PointId(p[a]), PointId(p[b])) == x.d(PointId(a), PointId(b)))
            })
        })
        .collect()
}

/// Smallest `S` with `f(x) = min_{s in S} f(s) + d(x, s)` everywhere.
fn brute_force_support_size(f: &KatetovMap) -> usize {
    let x = f.space();
    let vals: Vec<Rational> = x.points().map(|p| eval_min_formula(f, p)).collect();
    for k in 1..=x.len() {
        for s in (0..x.len()).combinations(k) {
            let ok = x.points().all(|p| {
                s.iter()
                    .map(|&t| &vals[t] + x.d(p, PointId(t)))
                    .min()
                    .unwrap()
                    == vals[p.0]
            });
            if ok {
                return k;
            }
        }
    }
    unreachable!("the whole space is a support")
}

fn dist_to_prefix(x: &FiniteMetricSpace, p: PointId, n: usize) -> Rational {
    (0..n).map(|y| x.d(p, PointId(y)).clone()).min().unwrap()
}

fn criterion_1() -> Outcome {
    let mut rng = seeded(1);
    let mut maps = 0;
    for s in 0..100 {
        let n = 1 + s % 10;
        let x = Arc::new(random_space(&mut rng, n));
        let kur: Vec<KatetovMap> = x
            .points()
            .map(|p| KatetovMap::kuratowski(x.clone(), p).unwrap())
            .collect();
        for a in x.points() {
            for b in x.points() {
                let d = kur[a.0].sup_dist(&kur[b.0]).unwrap();
                ensure(&d == x.d(a, b), || {
                    format!("space {s}: d(f_{a}, f_{b}) = {d}")
                })?;
            }
        }
        for _ in 0..50 {
            let f = random_katetov_map(&mut rng, &x, 4);
            maps += 1;
            for p in x.points() {
                let fx = eval_min_formula(&f, p);
                let d = f.sup_dist(&kur[p.0]).unwrap();
                ensure(d == fx, || {
                    format!("space {s}: d(f, f_{p}) = {d}, f({p}) = {fx}")
                })?;
            }
        }
    }
    Ok(format!("100 spaces, {maps} maps, exact equality"))
}

fn criterion_2() -> Outcome {
    let mut rng = seeded(2);
    let mut pairs = 0;
    let mut samples = 0;
    for s in 0..100 {
        let n = 2 + s % 9;
        let x = Arc::new(random_space(&mut rng, n));
        let k = rng.random_range(1..=n);
        let ys = Subset::new(
            rand::seq::index::sample(&mut rng, n, k)
                .into_iter()
                .map(PointId),
        );
        let r = x.restrict(&ys).unwrap();
        let y = Arc::new(r.space);
        let f = random_katetov_map(&mut rng, &y, 3);
        let g = random_katetov_map(&mut rng, &y, 3);
        let fh = f.katetov_extension(x.clone(), &r.to_parent).unwrap();
        let gh = g.katetov_extension(x.clone(), &r.to_parent).unwrap();
        let on_y = sup_abs(&f.values(), &g.values());
        let on_x = sup_abs(&fh.values(), &gh.values());
        ensure(on_x == on_y, || {
            format!("case {s}: d(f^, g^) = {on_x} but d(f, g) = {on_y}")
        })?;
        pairs += 1;

        // 1-Lipschitz extensions of f: fix one extra value between the
        // least and greatest extensions, then take the least or greatest
        // extension of the enlarged data.
        let fv = f.values();
        let fhv = fh.values();
        let lower = |p: PointId| {
            r.to_parent
                .iter()
                .zip(&fv)
                .map(|(&t, v)| v - x.d(p, t))
                .max()
                .unwrap()
        };
        for _ in 0..10 {
            let z = PointId(rng.random_range(0..n));
            let t = q(rng.random_range(0..=4), 4);
            let vz = lower(z) + (&fhv[z.0] - lower(z)) * t;
            let mut anchors: Vec<(PointId, Rational)> = r
                .to_parent
                .iter()
                .copied()
                .zip(fv.iter().cloned())
                .collect();
            anchors.push((z, vz));
            let use_upper = rng.random_bool(0.5);
            let h: Vec<Rational> = x
                .points()
                .map(|p| {
                    let it = anchors.iter().map(|(a, v)| (v, x.d(p, *a)));
                    if use_upper {
                        it.map(|(v, d)| v + d).min().unwrap()
                    } else {
                        it.map(|(v, d)| v - d).max().unwrap()
                    }
                })
                .collect();
            for (i, &t) in r.to_parent.iter().enumerate() {
                ensure(h[t.0] == fv[i], || {
                    format!("case {s}: sampled map does not extend f")
                })?;
            }
            for a in x.points() {
                for b in x.points() {
                    ensure((&h[a.0] - &h[b.0]).abs() <= *x.d(a, b), || {
                        format!("case {s}: sample not 1-Lipschitz")
                    })?;
                }
                ensure(fhv[a.0] >= h[a.0], || {
                    format!("case {s}: f^({a}) = {} < {}", fhv[a.0], h[a.0])
                })?;
            }
            samples += 1;
        }
    }
    Ok(format!(
        "{pairs} pairs isometric, f^ dominates {samples} sampled 1-Lipschitz extensions"
    ))
}

fn corpus() -> Vec<FiniteMetricSpace> {
    let mut out = vec![
        space(&[
            &[q(0, 1), q(1, 1), q(9, 10)],
            &[q(1, 1), q(0, 1), q(4, 5)],
            &[q(9, 10), q(4, 5), q(0, 1)],
        ]),
        space(&[
            &[q(0, 1), q(1, 1), q(1, 1)],
            &[q(1, 1), q(0, 1), q(1, 2)],
            &[q(1, 1), q(1, 2), q(0, 1)],
        ]),
        constant(3, q(1, 1)),
        rectangle(),
        constant(4, q(1, 1)),
        FiniteMetricSpace::from_integers(&[&[0, 1, 3], &[1, 0, 2], &[3, 2, 0]]).unwrap(),
    ];
    // Hamming cube {0,1}^3: 8 points, group of order 48.
    let cube = (0..8)
        .map(|a: i64| {
            (0..8)
                .map(|b: i64| Rational::from((a ^ b).count_ones() as i64))
                .collect()
        })
        .collect();
    out.push(FiniteMetricSpace::from_matrix(cube).unwrap());
    let mut rng = seeded(3);
    for s in 0..60 {
        let n = 1 + s % 8;
        if s % 2 == 0 {
            out.push(random_space(&mut rng, n));
        } else {
            // {1, 2}-valued metrics have many symmetries.
            let mut m = vec![vec![Rational::zero(); n]; n];
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = Rational::from(rng.random_range(1..=2));
                    m[i][j] = v.clone();
                    m[j][i] = v;
                }
            }
            out.push(FiniteMetricSpace::from_matrix(m).unwrap());
        }
    }
    out
}

fn rectangle() -> FiniteMetricSpace {
    let (z, a, b, c) = (q(0, 1), q(1, 1), q(2, 1), q(5, 2));
    space(&[
        &[z.clone(), a.clone(), b.clone(), c.clone()],
        &[a.clone(), z.clone(), c.clone(), b.clone()],
        &[b.clone(), c.clone(), z.clone(), a.clone()],
        &[c, b, a, z],
    ])
}

fn criterion_3() -> Outcome {
    let spaces = corpus();
    let mut elements = 0;
    for (i, x) in spaces.iter().enumerate() {
        let g = enumerate_isometries(x);
        let got: Vec<Vec<usize>> = g.elements().iter().map(|e| e.as_slice().to_vec()).collect();
        let want = brute_force_isometries(x);
        ensure(got == want, || {
            format!("space {i}: {} vs {} elements", got.len(), want.len())
        })?;
        elements += got.len();
    }
    Ok(format!(
        "{} spaces of <= 8 points, {elements} elements identical",
        spaces.len()
    ))
}

fn criterion_4() -> Outcome {
    let mut rng = seeded(4);
    let mut count = 0;
    for s in 0..60 {
        let bound = 1 + s % 3;
        let n = 2 + s % 9;
        let x = Arc::new(random_space(&mut rng, n));
        let target = random_katetov_map(&mut rng, &x, bound);
        let len = rng.random_range(3..=8);
        let (seq, eps) = cauchy_sequence(&mut rng, &target, bound, len, 2);
        let out = limit_extract(&seq, bound, &eps).map_err(|e| format!("sequence {s}: {e}"))?;
        let card = out.certificate.cardinality;
        let oracle = brute_force_support_size(&target);
        ensure(out.limit == target, || format!("sequence {s}: wrong limit"))?;
        ensure(card <= bound, || {
            format!("sequence {s}: cardinality {card} > {bound}")
        })?;
        ensure(card == oracle, || {
            format!("sequence {s}: cardinality {card}, oracle {oracle}")
        })?;
        ensure(card == minimal_support(&out.limit).cardinality, || {
            format!("sequence {s}: disagrees with minimal_support")
        })?;
        count += 1;
    }
    Ok(format!(
        "{count} Cauchy sequences, bounds 1..3, cardinalities match the brute-force oracle"
    ))
}

fn pipeline_cfg() -> PipelineConfig {
    PipelineConfig {
        depth: 2,
        reps: 1,
        budget: 12,
        grid: vec![q(1, 2), q(1, 1)],
        max_levels: 64,
    }
}

fn criterion_5() -> Outcome {
    let cases = [
        ("trivial", corpus()[0].clone(), 1),
        ("cyclic", corpus()[1].clone(), 2),
        ("S3", constant(3, q(1, 1)), 6),
        ("Klein four", rectangle(), 4),
        ("S4", constant(4, q(1, 1)), 24),
    ];
    let mut parts = Vec::new();
    for (name, x0, order) in cases {
        let oracle = brute_force_isometries(&x0).len();
        ensure(oracle == order, || {
            format!("{name}: brute force gives {oracle}")
        })?;
        let run = run_pipeline(&x0, &pipeline_cfg()).map_err(|e| format!("{name}: {e}"))?;
        let f = run.tower.top().restrict(&run.witnesses.f).unwrap().space;
        let f_oracle = brute_force_isometries(&f).len();
        ensure(
            run.iso_base.order() == order && run.iso_f.order() == order && f_oracle == order,
            || {
                format!(
                    "{name}: |Iso(X0)| = {}, |Iso(F)| = {}, brute force F = {f_oracle}",
                    run.iso_base.order(),
                    run.iso_f.order()
                )
            },
        )?;
        let lemma = check_lemma_sympa(&run.tower, &run.witnesses).map_err(|e| e.to_string())?;
        ensure(lemma.holds(), || format!("{name}: membership criterion failed"))?;
        let cert = urysohn::certificate::Certificate::from_run(&x0, &pipeline_cfg(), &run);
        urysohn::certificate::verify_certificate(&cert).map_err(|e| format!("{name}: {e}"))?;
        parts.push(format!("{name} {order}"));
    }
    Ok(format!(
        "orders {}; bijection, tables and membership criterion verified",
        parts.join(", ")
    ))
}

fn criterion_6() -> Outcome {
    let mut rng = seeded(6);
    let mut bases = vec![
        constant(3, q(1, 1)),
        rectangle().rescale_bounded(),
        constant(4, q(1, 2)),
    ];
    for n in 3..7 {
        bases.push(random_space(&mut rng, n).rescale_bounded());
    }
    let four = Rational::from(4);
    let mut sets = 0;
    let mut witnesses = 0;
    for (b, base) in bases.iter().enumerate() {
        for depth in 1..=3 {
            for reps in 1..=2 {
                let mut tower = Tower::new(base.clone());
                let cfg = urysohn::TowerConfig {
                    depth,
                    budget: 8,
                    grid: vec![q(1, 2), q(1, 1)],
                };
                for _ in 0..depth {
                    tower.build_level(&cfg).map_err(|e| e.to_string())?;
                }
                let plan = plan_witnesses(depth, reps).unwrap();
                let ws = choose_witnesses(&mut tower, &plan, 64).map_err(|e| e.to_string())?;
                let top = tower.top();
                let n0 = tower.level_size(0);
                for (i, w) in ws.witnesses.iter().enumerate() {
                    let tag = format!("base {b}, depth {depth}, reps {reps}, witness {}", i + 1);
                    if i == 0 {
                        ensure(w.e >= four, || format!("{tag}: e_1 = {}", w.e))?;
                    } else {
                        let prev = &ws.witnesses[i - 1].e;
                        ensure(w.e > &four * prev, || {
                            format!("{tag}: e = {} vs previous {prev}", w.e)
                        })?;
                    }
                    ensure(dist_to_prefix(top, w.point, n0) == w.e, || {
                        format!("{tag}: d(a, X0) != e")
                    })?;
                    let anchor = tower.level_size(w.k - 1);
                    for x in 0..tower.level_size(w.j) {
                        let x = PointId(x);
                        let want = &w.e + dist_to_prefix(top, x, anchor);
                        ensure(*top.d(w.point, x) == want, || {
                            format!("{tag}: equation fails at {x}")
                        })?;
                    }
                    witnesses += 1;
                }
                sets += 1;
            }
        }
    }
    Ok(format!(
        "{sets} witness sets, {witnesses} witnesses, all exact"
    ))
}

/// `X_0 = {p, q}` at distance 5; `u` (axial) and `v` (generic) are both at
/// distance 5 from everything before them, so swapping them preserves the
/// metric even though `u ∈ X_2` and `v ∉ X_3`. The witness `a` realizes
/// `5 + d(x, X_2)` over `X_4`; its twin `a'` realizes the swapped values.
fn criterion_7() -> Outcome {
    let five = q(5, 1);
    let mut t = Tower::new(space(&[&[q(0, 1), five.clone()], &[five.clone(), q(0, 1)]]));
    let build = |t: &mut Tower| -> urysohn::Result<()> {
        t.push_level(vec![])?;
        t.push_level(vec![Adjunction::axial(0, five.clone()).labeled("u")])?;
        t.push_level(vec![])?;
        let v = KatetovMap::from_values(t.top().clone(), vec![five.clone(); 3])?;
        t.push_level(vec![Adjunction::generic(v).labeled("v")])?;
        let twin = KatetovMap::new(
            t.top().clone(),
            vec![
                (PointId(0), five.clone()),
                (PointId(1), five.clone()),
                (PointId(3), five.clone()),
            ],
        )?;
        t.push_level(vec![
            Adjunction::axial(2, five.clone()).labeled("a"),
            Adjunction::generic(twin).labeled("a'"),
        ])
    };
    build(&mut t).map_err(|e| e.to_string())?;
    t.verify().map_err(|e| e.to_string())?;
    let ws = WitnessSet::new(
        &t,
        vec![Witness {
            k: 3,
            e: five.clone(),
            j: 4,
            point: PointId(4),
        }],
    );
    let phi = Isometry::new(t.top(), vec![0, 1, 3, 2, 5, 4]).map_err(|e| e.to_string())?;

    // Hand oracle: δ = d(v, {p, q, u}) = 5; a and a' differ by 5 at u and v.
    let delta = five.clone();
    let moved = five.clone();
    let verdict = rigidity_probe(&t, &ws, &phi, 2).map_err(|e| e.to_string())?;
    let ProbeVerdict::Violation {
        delta: d, distance, ..
    } = &verdict
    else {
        return Err(format!("expected a violation, got {verdict:?}"));
    };
    ensure(*d == delta && *distance == moved, || {
        format!("δ = {d}, moved {distance}")
    })?;
    ensure(*distance >= &delta / q(2, 1), || {
        "violation below δ/2".into()
    })?;
    ensure(
        matches!(
            rigidity_probe(&t, &ws, &phi, 3),
            Err(urysohn::Error::WitnessPlanInsufficient { k: 4, j: 4 })
        ),
        || "uncovered level not reported".into(),
    )?;

    let mut compatible = 0;
    let run = run_pipeline(&constant(3, q(1, 1)), &pipeline_cfg()).map_err(|e| e.to_string())?;
    for (tower, ws) in [(&t, &ws), (&run.tower, &run.witnesses)] {
        for g in tower.base_group() {
            let ext = extend_through_tower(g, tower).map_err(|e| e.to_string())?;
            for n in 0..=tower.depth() {
                let v = rigidity_probe(tower, ws, &ext, n).map_err(|e| e.to_string())?;
                ensure(v == ProbeVerdict::Compatible, || {
                    format!("extended isometry flagged: {v:?}")
                })?;
                compatible += 1;
            }
        }
    }
    Ok(format!(
        "violation δ = {delta}, d(φa, a) = {moved} >= δ/2; {compatible} extended checks compatible"
    ))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("trivial.fms");
    std::fs::write(&input, "fms 1\npoints 3\na\nb\nc\n1\n9/10 4/5\n").map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_urysohn");
    let mut certs = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("cert{i}.json"));
        let status = Command::new(bin)
            .args(["witness", "build"])
            .arg(&input)
            .args(["--depth", "2", "--reps", "2", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?
            .status;
        ensure(status.success(), || format!("run {i} exited with {status}"))?;
        certs.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    ensure(certs[0] == certs[1], || "certificates differ".into())?;
    let verify = Command::new(bin)
        .args(["witness", "verify"])
        .arg(dir.path().join("cert0.json"))
        .output()
        .map_err(|e| e.to_string())?
        .status;
    ensure(verify.success(), || "certificate does not re-verify".into())?;
    Ok(format!(
        "two runs byte-identical ({} bytes)",
        certs[0].len()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("kuratowski identities", criterion_1),
        ("katetov extension is isometric and greatest", criterion_2),
        ("isometry enumeration matches brute force", criterion_3),
        ("limits of Cauchy sequences in E(X, i)", criterion_4),
        ("group isomorphism certificates", criterion_5),
        ("witness arithmetic", criterion_6),
        ("rigidity probe", criterion_7),
        ("deterministic witness build", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
