//! Limits of Cauchy sequences in `E(X, i)`.
//!
//! [`limit_extract`] follows the completeness argument for `E(X, i)` step by
//! step instead of just reading off the last term: it tracks the support
//! points of each term, splits them into the cluster whose values converge
//! to the limit's minimum and the cluster that stays bounded away from it,
//! identifies the limit points of the first cluster, and recurses on the
//! second one with a smaller support bound. The limit is reassembled as the
//! pointwise minimum of the two parts, and the support obtained this way is
//! the certificate.
//!
//! On a finite space the "up to extraction" steps of the infinite argument
//! become deterministic tail cuts: each threshold (α/4, η/4) selects the
//! first index after which the supplied tolerance schedule is below it.
//! The 2δ-separation of supports always holds with δ equal to half the
//! smallest positive distance, so the induction on collapsing supports
//! never triggers; it is still checked.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::katetov::{
    essential_points, same_space, sup_dist_values, KatetovMap, SupportCertificate,
};
use crate::metric::{FiniteMetricSpace, PointId};
use crate::rational::Rational;

/// How one recursion level split the sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionTrace {
    /// Support bound at this level.
    pub bound: usize,
    /// First index of the tail where near supports coincide with the limit's.
    pub tail_start: usize,
    /// Limit of `min f_n`.
    pub limit_min: Rational,
    /// Limit points of the converging cluster (`j <= p`).
    pub near: Vec<PointId>,
    /// Recursion on the bounded-away cluster, if any.
    pub residual: Option<Box<ExtractionTrace>>,
}

#[derive(Debug, Clone)]
pub struct LimitExtraction {
    pub limit: KatetovMap,
    pub certificate: SupportCertificate,
    pub trace: ExtractionTrace,
}

/// Extracts the limit of a Cauchy sequence in `E(X, bound)`.
///
/// `tolerances[n]` must bound `d(f_n, f_m)` for every `m >= n`, be
/// nonincreasing, and end in zero (the sequence has settled on its limit).
pub fn limit_extract(
    seq: &[KatetovMap],
    bound: usize,
    tolerances: &[Rational],
) -> Result<LimitExtraction> {
    if seq.is_empty() {
        return Err(Error::PreconditionViolated("empty sequence".into()));
    }
    if bound == 0 {
        return Err(Error::PreconditionViolated(
            "support bound must be >= 1".into(),
        ));
    }
    if tolerances.len() != seq.len() {
        return Err(Error::PreconditionViolated(format!(
            "{} tolerances for {} terms",
            tolerances.len(),
            seq.len()
        )));
    }
    let space = seq[0].space().clone();
    if seq.iter().any(|f| !same_space(f.space(), &space)) {
        return Err(Error::SpaceMismatch);
    }
    let values: Vec<Vec<Rational>> = seq.iter().map(|f| f.values()).collect();
    for (index, f) in seq.iter().enumerate() {
        if let Err(v) = f.is_katetov() {
            return Err(Error::InvalidKatetovMap(v));
        }
        let card = essential_points(&space, &values[index]).len();
        if card > bound {
            return Err(Error::SupportTooLarge {
                index,
                cardinality: card,
                bound,
            });
        }
    }
    check_cauchy(&values, tolerances)?;

    let terms: Vec<Term> = values
        .iter()
        .map(|v| Term::tight(&space, v.clone()))
        .collect();
    let (support, trace) = extract(&space, &terms, tolerances, bound)?;

    let limit = seq.last().unwrap().clone();
    let rebuilt = KatetovMap::new(space.clone(), support.clone())?;
    if rebuilt.values() != *values.last().unwrap() {
        return Err(Error::Internal(
            "min of the two clusters does not reproduce the limit".into(),
        ));
    }
    let minimal_support: Vec<PointId> = support.iter().map(|(p, _)| *p).collect();
    let certificate = SupportCertificate {
        map: limit.clone(),
        cardinality: minimal_support.len(),
        minimal_support,
    };
    if certificate.cardinality > bound || !certificate.verify() {
        return Err(Error::Internal(
            "assembled support is not a minimal support within the bound".into(),
        ));
    }
    Ok(LimitExtraction {
        limit,
        certificate,
        trace,
    })
}

fn check_cauchy(values: &[Vec<Rational>], eps: &[Rational]) -> Result<()> {
    for (index, e) in eps.iter().enumerate() {
        if e.is_negative() {
            return Err(Error::NotCauchy {
                index,
                reason: "negative tolerance".into(),
            });
        }
        if index + 1 < eps.len() && eps[index + 1] > *e {
            return Err(Error::NotCauchy {
                index: index + 1,
                reason: "tolerance schedule increases".into(),
            });
        }
    }
    if !eps.last().unwrap().is_zero() {
        return Err(Error::NotCauchy {
            index: eps.len() - 1,
            reason: "final tolerance must be 0 (sequence has not settled)".into(),
        });
    }
    for n in 0..values.len() {
        for m in (n + 1)..values.len() {
            let d = sup_dist_values(&values[n], &values[m]);
            if d > eps[n] {
                return Err(Error::NotCauchy {
                    index: n,
                    reason: format!("d(f_{n}, f_{m}) = {d} exceeds tolerance {}", eps[n]),
                });
            }
        }
    }
    Ok(())
}

/// One term: its full value table and its tight minimal support.
#[derive(Clone)]
struct Term {
    values: Vec<Rational>,
    support: Vec<(PointId, Rational)>,
}

impl Term {
    fn tight(space: &FiniteMetricSpace, values: Vec<Rational>) -> Term {
        let support = essential_points(space, &values)
            .into_iter()
            .map(|p| (p, values[p.0].clone()))
            .collect();
        Term { values, support }
    }

    fn from_support(space: &FiniteMetricSpace, support: Vec<(PointId, Rational)>) -> Term {
        let values = space
            .points()
            .map(|x| min_over(space, &support, x))
            .collect();
        Term { values, support }
    }

    fn min_value(&self) -> Rational {
        self.support.iter().map(|(_, v)| v.clone()).min().unwrap()
    }
}

fn min_over(space: &FiniteMetricSpace, support: &[(PointId, Rational)], x: PointId) -> Rational {
    support
        .iter()
        .map(|(s, v)| v + space.d(x, *s))
        .min()
        .expect("nonempty support")
}

fn opt_min(a: Option<Rational>, b: Option<Rational>) -> Option<Rational> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, None) => a,
        (None, b) => b,
    }
}

/// First index `n >= from` with `eps[n] < threshold` (schedule is
/// nonincreasing and ends in 0, so one exists when `threshold > 0`).
fn tail_from(eps: &[Rational], from: usize, threshold: &Option<Rational>) -> usize {
    match threshold {
        None => from,
        Some(t) => (from..eps.len())
            .find(|&n| eps[n] < *t)
            .expect("final tolerance is zero"),
    }
}

fn extract(
    space: &Arc<FiniteMetricSpace>,
    terms: &[Term],
    eps: &[Rational],
    bound: usize,
) -> Result<(Vec<(PointId, Rational)>, ExtractionTrace)> {
    let last = terms.last().unwrap();
    if last.support.len() > bound {
        return Err(Error::Internal("residual support exceeds its bound".into()));
    }

    // Supports are 2δ-separated with δ half the smallest positive distance.
    let delta = space.separation().map(|s| s / Rational::from(2));
    if let Some(delta) = &delta {
        let two_delta = delta * Rational::from(2);
        for t in terms {
            for (i, (a, _)) in t.support.iter().enumerate() {
                for (b, _) in &t.support[i + 1..] {
                    if *space.d(*a, *b) < two_delta {
                        return Err(Error::Internal("support points closer than 2δ".into()));
                    }
                }
            }
        }
    }

    // Split the limit's support at the minimum value d.
    let d = last.min_value();
    let near_lim: Vec<(PointId, Rational)> = last
        .support
        .iter()
        .filter(|(_, v)| *v == d)
        .cloned()
        .collect();
    let far_lim: Vec<(PointId, Rational)> = last
        .support
        .iter()
        .filter(|(_, v)| *v != d)
        .cloned()
        .collect();
    let delta_prime = far_lim.iter().map(|(_, v)| v - &d).min();
    let alpha = opt_min(delta.clone(), delta_prime);
    let quarter = |a: &Rational| a / Rational::from(4);
    let tail_start = tail_from(eps, 0, &alpha.as_ref().map(quarter));
    let near_cut = alpha.as_ref().map(|a| &d + a / Rational::from(2));
    let is_near = |v: &Rational| near_cut.as_ref().is_none_or(|c| v < c);

    // In the tail every near support point of f_n is matched by exactly one
    // near support point of the limit (and vice versa), at distance < δ.
    for (n, t) in terms.iter().enumerate().skip(tail_start) {
        let near_n: Vec<&(PointId, Rational)> =
            t.support.iter().filter(|(_, v)| is_near(v)).collect();
        for (y, _) in &near_lim {
            let hits = near_n
                .iter()
                .filter(|(k, vk)| {
                    t.values[y.0] == vk + space.d(*y, *k)
                        && delta.as_ref().is_none_or(|dl| space.d(*y, *k) < dl)
                })
                .count();
            if hits != 1 {
                return Err(Error::Internal(format!(
                    "term {n}: limit point {y} matched by {hits} near support points"
                )));
            }
        }
        for (k, _) in &near_n {
            if !near_lim.iter().any(|(y, _)| y == k) {
                return Err(Error::Internal(format!(
                    "term {n}: near support point {k} has no limit partner"
                )));
            }
        }
    }

    let near_points: Vec<PointId> = near_lim.iter().map(|(p, _)| *p).collect();
    let p = near_points.len();
    let f_tilde = Term::from_support(space, near_lim.clone());

    if far_lim.is_empty() {
        if f_tilde.values != last.values {
            return Err(Error::Internal(
                "converging cluster does not control the limit".into(),
            ));
        }
        let trace = ExtractionTrace {
            bound,
            tail_start,
            limit_min: d,
            near: near_points,
            residual: None,
        };
        return Ok((near_lim, trace));
    }
    if p >= bound {
        return Err(Error::Internal(
            "no room left for the bounded-away cluster".into(),
        ));
    }

    // The bounded-away cluster: each of its points is strictly below what the
    // converging cluster alone would give, by at least η.
    let eta_lim = far_lim
        .iter()
        .map(|(y, v)| &f_tilde.values[y.0] - v)
        .min()
        .unwrap();
    let start2 = tail_from(eps, tail_start, &Some(quarter(&eta_lim)));
    let split = |t: &Term| -> (Term, Vec<(PointId, Rational)>) {
        let near: Vec<(PointId, Rational)> = t
            .support
            .iter()
            .filter(|(_, v)| is_near(v))
            .cloned()
            .collect();
        let far: Vec<(PointId, Rational)> = t
            .support
            .iter()
            .filter(|(_, v)| !is_near(v))
            .cloned()
            .collect();
        (Term::from_support(space, near), far)
    };
    let parts: Vec<(Term, Vec<(PointId, Rational)>)> = terms[start2..].iter().map(split).collect();
    let mut eta = None;
    for (off, (ft, far)) in parts.iter().enumerate() {
        if far.is_empty() {
            return Err(Error::Internal(format!(
                "term {}: bounded-away cluster vanished in the tail",
                start2 + off
            )));
        }
        let gap = far.iter().map(|(y, v)| &ft.values[y.0] - v).min();
        eta = opt_min(eta, gap);
    }
    let eta = eta.unwrap();
    if !eta.is_positive() {
        return Err(Error::Internal(
            "bounded-away cluster is not essential".into(),
        ));
    }
    // Tail where both d(f_n, f_m) and d(f~_n, f~_m) are below η/4.
    let q_eta = quarter(&eta);
    let start3 = (start2..terms.len())
        .find(|&n| {
            eps[n] < q_eta
                && (n..terms.len()).all(|m| {
                    sup_dist_values(&parts[n - start2].0.values, &parts[m - start2].0.values)
                        < q_eta
                })
        })
        .expect("the settled tail qualifies");

    let residual: Vec<Term> = parts[start3 - start2..]
        .iter()
        .map(|(_, far)| Term::from_support(space, far.clone()))
        .collect();
    // f_m agrees with g~_m on far points of f_n, so d(g~_n, g~_m) <= d(f_n, f_m).
    for (a, ga) in residual.iter().enumerate() {
        let fa = &terms[start3 + a];
        for (b, gb) in residual.iter().enumerate() {
            let fb = &terms[start3 + b];
            for (y, _) in &ga.support {
                if fb.values[y.0] != gb.values[y.0] {
                    return Err(Error::Internal(format!(
                        "term {}: f and g~ disagree at far point {y}",
                        start3 + b
                    )));
                }
            }
            if sup_dist_values(&ga.values, &gb.values) > sup_dist_values(&fa.values, &fb.values) {
                return Err(Error::Internal(
                    "residual sequence is not contracted".into(),
                ));
            }
        }
    }

    let (g_support, g_trace) = extract(space, &residual, &eps[start3..], bound - p)?;
    let g_tilde = Term::from_support(space, g_support.clone());
    let assembled: Vec<Rational> = f_tilde
        .values
        .iter()
        .zip(&g_tilde.values)
        .map(|(a, b)| a.clone().min(b.clone()))
        .collect();
    if assembled != last.values {
        return Err(Error::Internal("min(f~, g~) differs from the limit".into()));
    }
    let mut support = near_lim;
    support.extend(g_support);
    support.sort_by_key(|(p, _)| *p);
    let trace = ExtractionTrace {
        bound,
        tail_start,
        limit_min: d,
        near: near_points,
        residual: Some(Box::new(g_trace)),
    };
    Ok((support, trace))
}
