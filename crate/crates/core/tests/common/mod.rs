#![allow(dead_code)]

use funcsel::design::BlockLayout;
use funcsel::CovariancePair;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// `MᵀM + shift·I`, comfortably positive definite.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize, shift: f64) -> DMatrix<f64> {
    let m = random_matrix(rng, d, d);
    m.transpose() * &m + DMatrix::identity(d, d) * shift
}

/// Population covariance pair with `C₁₂ = C₁ B`.
pub fn population(c1: DMatrix<f64>, b: &DMatrix<f64>, dims: Vec<usize>) -> CovariancePair {
    let c12 = &c1 * b;
    let d = c1.nrows();
    let q = c12.ncols();
    CovariancePair {
        c1,
        c12,
        mean_x: DVector::zeros(d),
        mean_y: DVector::zeros(q),
        layout: BlockLayout::new(dims).unwrap(),
        n: 1_000_000,
    }
}

/// All non-empty subsets of `0..p` as sorted index lists.
pub fn subsets(p: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << p))
        .map(|mask| (0..p).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

/// A random population instance on `p` predictors with block sizes in
/// `1..=3`: returns the covariance pair and the (non-empty) support of `B`.
pub fn population_instance(rng: &mut ChaCha8Rng, p: usize) -> (CovariancePair, Vec<usize>) {
    let dims: Vec<usize> = (0..p).map(|_| rng.random_range(1..=3)).collect();
    let d: usize = dims.iter().sum();
    let q = rng.random_range(1..=3);
    let support: Vec<usize> = loop {
        let s: Vec<usize> = (0..p).filter(|_| rng.random_bool(0.5)).collect();
        if !s.is_empty() {
            break s;
        }
    };
    let mut b = random_matrix(rng, d, q);
    let layout = BlockLayout::new(dims.clone()).unwrap();
    for l in (0..p).filter(|l| !support.contains(l)) {
        for r in layout.range(l) {
            b.row_mut(r).fill(0.0);
        }
    }
    // Keep every relevant block clearly non-zero.
    for &l in &support {
        let r = layout.range(l).start;
        b[(r, 0)] += if b[(r, 0)] >= 0.0 { 1.0 } else { -1.0 };
    }
    let c1 = random_spd(rng, d, 1.0);
    (population(c1, &b, dims), support)
}

/// `C₁₂ − C₁ Aᵀ (A C₁ Aᵀ)⁻¹ A C₁₂` via explicit LU inversion.
pub fn oracle_xi(k: &[usize], cov: &CovariancePair) -> f64 {
    let cols = cov.layout.columns(k);
    let d = cov.c1.nrows();
    let mut a = DMatrix::zeros(cols.len(), d);
    for (r, &c) in cols.iter().enumerate() {
        a[(r, c)] = 1.0;
    }
    let inner = (&a * &cov.c1 * a.transpose()).lu().try_inverse().unwrap();
    let pi = a.transpose() * inner * &a;
    (&cov.c12 - &cov.c1 * pi * &cov.c12).norm()
}
