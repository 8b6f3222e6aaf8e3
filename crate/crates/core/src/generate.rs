//! Seeded generators for test inputs: random finite metric spaces, Katětov
//! maps and Cauchy sequences. Nothing in the core math paths uses these.

use std::sync::Arc;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::katetov::KatetovMap;
use crate::metric::{FiniteMetricSpace, PointId};
use crate::rational::Rational;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shortest-path closure of random positive rational edge weights on the
/// complete graph. Always a metric with strictly positive off-diagonal
/// entries.
pub fn random_space<R: Rng>(rng: &mut R, n: usize) -> FiniteMetricSpace {
    assert!(n >= 1);
    let mut m = vec![vec![Rational::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let w = Rational::new(rng.random_range(1..=12), rng.random_range(1..=4));
            m[i][j] = w.clone();
            m[j][i] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = &m[i][k] + &m[k][j];
                if via < m[i][j] {
                    m[i][j] = via;
                }
            }
        }
    }
    FiniteMetricSpace::from_matrix(m).expect("shortest-path closure is a metric")
}

/// A Katětov map with at most `max_support` support points, by rejection
/// sampling over small rational values. Falls back to values of at least
/// half the diameter, which always satisfy the lower bound.
pub fn random_katetov_map<R: Rng>(
    rng: &mut R,
    space: &Arc<FiniteMetricSpace>,
    max_support: usize,
) -> KatetovMap {
    let n = space.len();
    let k = rng.random_range(1..=max_support.min(n).max(1));
    let pts: Vec<usize> = sample(rng, n, k).into_vec();
    let diam = space.diameter();
    for _ in 0..64 {
        let support = pts
            .iter()
            .map(|&p| (PointId(p), random_value(rng, &diam)))
            .collect();
        let f = KatetovMap::new(space.clone(), support).expect("well-formed support");
        if f.is_katetov().is_ok() {
            return f;
        }
    }
    let half = &diam / Rational::from(2);
    let support = pts
        .iter()
        .map(|&p| (PointId(p), &half + random_value(rng, &diam)))
        .collect();
    KatetovMap::new(space.clone(), support).expect("well-formed support")
}

fn random_value<R: Rng>(rng: &mut R, diam: &Rational) -> Rational {
    // 0 .. diam in steps of diam / 8, plus an occasional odd fraction
    let step = diam / Rational::from(8);
    let base = &step * Rational::from(rng.random_range(0..=8));
    if rng.random_bool(0.25) {
        base + Rational::new(1, rng.random_range(2..=7))
    } else {
        base
    }
}

/// A finite sequence in `E(X, i)` converging to `target`, with the tolerance
/// schedule `eps[n] = sup_{n <= n' <= m} d(f_n', f_m)` (nonincreasing, last
/// entry zero). Early terms may use unrelated support points; later terms
/// perturb the target's values upward by a shrinking amount; the last
/// `settle` terms equal the target.
pub fn cauchy_sequence<R: Rng>(
    rng: &mut R,
    target: &KatetovMap,
    bound: usize,
    len: usize,
    settle: usize,
) -> (Vec<KatetovMap>, Vec<Rational>) {
    let space = target.space().clone();
    let canon = target.canonical();
    let mut seq = Vec::with_capacity(len + settle);
    let noise_terms = rng.random_range(0..=2.min(len));
    for _ in 0..noise_terms {
        seq.push(random_katetov_map(rng, &space, bound));
    }
    for n in noise_terms..len {
        let scale = Rational::new(1, 1i64 << (n + 1).min(40));
        let support = canon
            .support()
            .iter()
            .map(|(p, v)| {
                let bump = Rational::from(rng.random_range(0..=3)) * &scale;
                (*p, v + bump)
            })
            .collect();
        seq.push(KatetovMap::new(space.clone(), support).expect("well-formed"));
    }
    for _ in 0..settle.max(1) {
        seq.push(target.clone());
    }
    let eps = tail_tolerances(&seq);
    (seq, eps)
}

/// `eps[n] = max_{n <= a <= b} d(f_a, f_b)`.
pub fn tail_tolerances(seq: &[KatetovMap]) -> Vec<Rational> {
    let vals: Vec<Vec<Rational>> = seq.iter().map(|f| f.values()).collect();
    let mut eps = vec![Rational::zero(); seq.len()];
    let mut running = Rational::zero();
    for a in (0..seq.len()).rev() {
        for b in a..seq.len() {
            let d = crate::katetov::sup_dist_values(&vals[a], &vals[b]);
            if d > running {
                running = d;
            }
        }
        eps[a] = running.clone();
    }
    eps
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_spaces_and_maps_are_valid() {
        let mut rng = seeded(7);
        for n in 1..9 {
            let x = Arc::new(random_space(&mut rng, n));
            assert!(x.is_valid());
            for _ in 0..10 {
                let f = random_katetov_map(&mut rng, &x, 3);
                assert!(f.is_katetov().is_ok());
                assert!(f.support().len() <= 3);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = random_space(&mut seeded(3), 6);
        let b = random_space(&mut seeded(3), 6);
        assert_eq!(a, b);
    }

    #[test]
    fn tolerances_bound_the_tail() {
        let mut rng = seeded(11);
        let x = Arc::new(random_space(&mut rng, 6));
        let target = random_katetov_map(&mut rng, &x, 2);
        let (seq, eps) = cauchy_sequence(&mut rng, &target, 2, 6, 2);
        assert_eq!(eps.last().unwrap(), &Rational::zero());
        assert!(eps.windows(2).all(|w| w[0] >= w[1]));
        for n in 0..seq.len() {
            for m in n..seq.len() {
                assert!(seq[n].sup_dist(&seq[m]).unwrap() <= eps[n]);
            }
        }
    }
}
