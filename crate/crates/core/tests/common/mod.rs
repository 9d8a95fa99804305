#![allow(dead_code)]

use divkit::WeightedSampleSet;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` points uniform on [-1, 1]^dim, optionally with random positive weights.
pub fn random_set(rng: &mut ChaCha8Rng, n: usize, dim: usize, weighted: bool) -> WeightedSampleSet {
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let weights = weighted.then(|| (0..n).map(|_| rng.random_range(0.1..1.0)).collect());
    WeightedSampleSet::new(points, weights).unwrap()
}

/// Standard normal points (Box-Muller).
pub fn gaussian_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let u: f64 = rng.random_range(f64::EPSILON..1.0);
                    let v: f64 = rng.random();
                    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
                })
                .collect()
        })
        .collect()
}

/// Affine image of `y` with the mean and covariance of `x`.
pub fn match_moments(x: &WeightedSampleSet, y: &WeightedSampleSet) -> WeightedSampleSet {
    let cx = x.covariance();
    let cy = y.covariance();
    let lx = cx.matrix.clone().cholesky().unwrap().l();
    let ly_inv = cy.matrix.clone().cholesky().unwrap().l().try_inverse().unwrap();
    let a: DMatrix<f64> = lx * ly_inv;
    y.map_points(|p| {
        let d = nalgebra::DVector::from_iterator(p.len(), p.iter().zip(cy.mean.iter()).map(|(v, m)| v - m));
        let out = &a * d + &cx.mean;
        out.iter().copied().collect()
    })
    .unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
