mod common;

use common::{gaussian, rng};
use panelgls_core::dgp::{simulate, DgpSpec};
use panelgls_core::estimators::{fgls, fgls_with, joint_breve, ols, FglsOptions};
use panelgls_core::inference::{
    hac_cov_breve, hac_cov_fgls, wald_tests, HacMode, HacSpec, WaldBlocks,
};
use panelgls_core::panel::transform;
use panelgls_core::{Error, Matrix, PanelData, WeightMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

/// Units with `y_i = 1 + X_iβ + ε_i`, iid standard normal `X` and `ε`.
fn white_noise_panel(seed: u64, t: usize, n: usize, k: usize, beta: f64) -> PanelData {
    let mut g = rng(seed);
    let d = Matrix::from_element(t, 1, 1.0);
    let x: Vec<Matrix> = (0..n).map(|_| gaussian(&mut g, t, k)).collect();
    let mut y = Matrix::from_fn(t, n, |_, _| 1.0 + g.sample::<f64, _>(StandardNormal));
    for i in 0..n {
        let fit = x[i].column_sum() * beta;
        let mut col = y.column_mut(i);
        col += fit;
    }
    PanelData::new(y, x, d).unwrap()
}

#[test]
fn zero_bandwidth_is_the_heteroskedasticity_sandwich() {
    let (p, _, _) = simulate(&DgpSpec::with_size(40, 20, 1)).unwrap();
    let tp = transform(&p).unwrap();
    let est = fgls(&tp).unwrap();
    let inf = hac_cov_fgls(&tp, &est, &HacSpec::new(0, HacMode::WeightedRegressors)).unwrap();
    let winv = est.weight_used.as_ref().unwrap().to_dense().try_inverse().unwrap();
    let rows = tp.dim() as f64;
    for i in [0, 7, 39] {
        let x = &tp.x()[i];
        let xh = &winv * x;
        let g = (x.tr_mul(&xh) / rows).try_inverse().unwrap();
        let mut mid = Matrix::zeros(1, 1);
        for r in 0..tp.dim() {
            let s = xh.row(r) * est.residuals[(r, i)];
            mid += s.transpose() * s;
        }
        let direct = &g * (mid / rows) * &g;
        assert!((&inf.cov[i] - &direct).amax() <= 1e-10 * direct.amax(), "unit {i}");
    }
}

#[test]
fn iid_covariance_matches_textbook_formula() {
    let t = 5000;
    let sigma = 1.5;
    let mut g = rng(77);
    let d = Matrix::from_element(t, 1, 1.0);
    let x = gaussian(&mut g, t, 2);
    let y = Matrix::from_fn(t, 1, |_, _| sigma * g.sample::<f64, _>(StandardNormal)) + &x * Matrix::from_column_slice(2, 1, &[0.5, -1.0]);
    let p = PanelData::new(y, vec![x], d).unwrap();
    let tp = transform(&p).unwrap();
    let est = fgls_with(
        &tp,
        &FglsOptions {
            weight_override: Some(WeightMatrix::identity(tp.dim())),
            ..Default::default()
        },
    )
    .unwrap();
    let inf = hac_cov_fgls(&tp, &est, &HacSpec::new(0, HacMode::WeightedRegressors)).unwrap();
    let xt = &tp.x()[0];
    let analytic = (xt.tr_mul(xt) / tp.dim() as f64).try_inverse().unwrap() * (sigma * sigma);
    for r in 0..2 {
        let ratio = inf.cov[0][(r, r)] / analytic[(r, r)];
        assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    }
}

#[test]
fn bandwidth_must_be_shorter_than_sample() {
    let (p, _, _) = simulate(&DgpSpec::with_size(40, 20, 1)).unwrap();
    let tp = transform(&p).unwrap();
    let est = fgls(&tp).unwrap();
    let err = hac_cov_fgls(&tp, &est, &HacSpec::new(tp.dim(), HacMode::WeightedRegressors)).unwrap_err();
    assert!(matches!(err, Error::Bandwidth { .. }));
    let breve = joint_breve(&p).unwrap();
    assert!(hac_cov_breve(&p, &breve, &HacSpec::new(p.t(), HacMode::WeightedRegressors)).is_err());
}

#[test]
fn weighted_mode_needs_a_weight() {
    let (p, _, _) = simulate(&DgpSpec::with_size(10, 20, 1)).unwrap();
    let tp = transform(&p).unwrap();
    let o = ols(&tp).unwrap();
    assert!(hac_cov_fgls(&tp, &o, &HacSpec::new(2, HacMode::WeightedRegressors)).is_err());
    let inf = hac_cov_fgls(&tp, &o, &HacSpec::new(2, HacMode::Plain)).unwrap();
    assert_eq!(inf.cov.len(), 10);
}

#[test]
fn breve_covariance_is_symmetric_and_agrees_in_sign() {
    let (p, _, _) = simulate(&DgpSpec::with_size(100, 40, 12)).unwrap();
    let tp = transform(&p).unwrap();
    let spec = HacSpec::new(HacSpec::default_bandwidth(p.t()), HacMode::WeightedRegressors);
    let f = fgls(&tp).unwrap();
    let fi = hac_cov_fgls(&tp, &f, &spec).unwrap();
    let b = joint_breve(&p).unwrap();
    let bi = hac_cov_breve(&p, &b, &spec).unwrap();
    for c in &bi.cov {
        assert!((c - c.transpose()).amax() <= 1e-12);
        assert!(c.diagonal().iter().all(|&v| v >= 0.0));
    }
    let agree = (0..p.n())
        .filter(|&i| fi.tstats[(0, i)].signum() == bi.tstats[(p.s(), i)].signum())
        .count();
    assert!(agree as f64 >= 0.95 * p.n() as f64, "{agree}");
}

#[test]
fn wald_blocks_follow_the_coefficient_layout() {
    let (p, _, _) = simulate(&DgpSpec::with_size(60, 30, 4)).unwrap();
    let b = joint_breve(&p).unwrap();
    let inf = hac_cov_breve(&p, &b, &HacSpec::new(3, HacMode::WeightedRegressors)).unwrap();
    let blocks = WaldBlocks::standard(&inf, p.intercept_column());
    assert!(blocks.gamma.is_empty());
    assert_eq!(blocks.beta, vec![1]);
    let w = wald_tests(&b, &inf, &blocks).unwrap();
    assert!(w.iter().all(|s| s.gamma.is_none() && s.beta.is_some()));
    // one-coefficient Wald is the squared t-ratio
    for (i, s) in w.iter().enumerate() {
        let t = inf.tstats[(1, i)];
        assert!((s.beta.unwrap().stat - t * t).abs() <= 1e-8 * t * t);
        assert_eq!(s.joint, s.beta);
    }
}

#[test]
fn wald_is_near_chi_square_under_the_null() {
    let k = 2;
    let mut total = 0.0;
    let mut count = 0;
    for rep in 0..2 {
        let p = white_noise_panel(300 + rep, 60, 120, k, 0.0);
        let tp = transform(&p).unwrap();
        let est = fgls(&tp).unwrap();
        let spec = HacSpec::new(HacSpec::default_bandwidth(tp.dim()), HacMode::WeightedRegressors);
        let inf = hac_cov_fgls(&tp, &est, &spec).unwrap();
        let blocks = WaldBlocks::standard(&inf, None);
        for s in wald_tests(&est, &inf, &blocks).unwrap() {
            let w = s.beta.unwrap();
            total += w.stat / w.df as f64;
            count += 1;
        }
    }
    let mean = total / count as f64;
    assert!((0.7..=1.3).contains(&mean), "{mean}");
}
