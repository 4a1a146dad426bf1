//! Seeded random linear-algebra helpers.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Approximately standard normal via the sum of 12 uniforms; plenty for
/// generating test geometry.
pub fn gauss<R: Rng>(rng: &mut R) -> f64 {
    (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0
}

pub fn gauss_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| gauss(rng)).collect()
}

pub fn unit_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v = gauss_vec(rng, dim);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Random orthogonal matrix (rows) from Gram-Schmidt over Gaussian draws,
/// with a re-orthogonalization pass for accuracy.
pub fn random_orthogonal<R: Rng>(rng: &mut R, dim: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut candidate = gauss_vec(rng, dim);
        for _ in 0..2 {
            for row in &rows {
                let dot: f64 = candidate.iter().zip(row).map(|(a, b)| a * b).sum();
                for (c, r) in candidate.iter_mut().zip(row) {
                    *c -= dot * r;
                }
            }
        }
        let norm = candidate.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(candidate.into_iter().map(|x| x / norm).collect());
        }
    }
    rows
}

/// Row-vector times matrix-of-rows: `x · M`.
pub fn mat_apply(matrix: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let cols = matrix[0].len();
    let mut out = vec![0.0; cols];
    for (xi, row) in x.iter().zip(matrix) {
        for (o, rij) in out.iter_mut().zip(row) {
            *o += xi * rij;
        }
    }
    out
}
