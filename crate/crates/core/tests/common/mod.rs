#![allow(dead_code)]

use panelgls_core::{Matrix, PanelData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize) -> Matrix {
    let a = gaussian(rng, n, n);
    &a * a.transpose() + Matrix::identity(n, n) * (n as f64)
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.amax()
}

/// `y_i = Dα_i + X_iβ_i + σ·noise`.
pub fn random_panel(seed: u64, t: usize, n: usize, s: usize, k: usize, sigma: f64) -> (PanelData, Matrix, Matrix) {
    let mut g = rng(seed);
    let mut d = gaussian(&mut g, t, s);
    if s > 0 {
        d.column_mut(0).fill(1.0);
    }
    let alpha = gaussian(&mut g, s, n);
    let beta = gaussian(&mut g, k, n);
    let x: Vec<Matrix> = (0..n).map(|_| gaussian(&mut g, t, k)).collect();
    let noise = gaussian(&mut g, t, n);
    let mut y = &d * &alpha + noise * sigma;
    for i in 0..n {
        let fit = &x[i] * beta.column(i);
        let mut col = y.column_mut(i);
        col += fit;
    }
    (PanelData::new(y, x, d).unwrap(), alpha, beta)
}

pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).amax() / b.amax().max(1e-300)
}
