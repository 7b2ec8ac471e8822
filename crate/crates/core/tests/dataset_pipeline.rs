//! End-to-end dataset checks: the noise-free limit against the Runge-Kutta
//! reference, and bit-identical file output for identical inputs.

mod common;

use common::{base_params, rk4_drift};
use sftm_core::dataset::{
    build_dataset, sample_parameters, save_dataset, BuildConfig, ParamRange, SamplingRanges,
};
use sftm_core::model::{Hypothesis, LandState};
use std::fs;

#[test]
fn noise_free_rows_match_rk4_observations() {
    // A single parameter set with vanishing noise: the simulated yearly
    // series must sit on the drift-ODE solution.
    let p = base_params(Hypothesis::Fsh);
    let ranges = SamplingRanges {
        mu: ParamRange { lo: p.mu, hi: p.mu },
        h: ParamRange { lo: p.h, hi: p.h },
        eta: ParamRange { lo: p.eta, hi: p.eta },
        beta: ParamRange { lo: p.beta, hi: p.beta },
        delta: ParamRange { lo: p.delta, hi: p.delta },
        lambda: ParamRange { lo: p.lambda, hi: p.lambda },
        gamma: ParamRange { lo: p.gamma, hi: p.gamma },
        alpha: ParamRange { lo: p.alpha, hi: p.alpha },
        sigma1: ParamRange { lo: 1e-12, hi: 1e-12 },
        sigma2: ParamRange { lo: 1e-12, hi: 1e-12 },
    };
    let samples = sample_parameters(1, &ranges, Hypothesis::Fsh, 0).unwrap();
    let cfg = BuildConfig {
        n2: 1,
        t: 30,
        dt: 1.0 / 999.0,
        ..BuildConfig::default()
    };
    let ds = build_dataset(&samples, &ranges, &cfg).unwrap();

    let reference = rk4_drift(&p, LandState { x: 0.2, y: 0.3 }, 30.0, 1.0 / 9990.0);
    for t in 1..=30usize {
        let idx = reference
            .iter()
            .position(|(rt, _)| (rt - t as f64).abs() < 1e-9)
            .unwrap();
        let rs = reference[idx].1;
        assert!(
            (ds.a[[0, t - 1]] - rs.x).abs() < 1e-3,
            "x at year {t}: {} vs RK4 {}",
            ds.a[[0, t - 1]],
            rs.x
        );
        assert!((ds.f[[0, t - 1]] - rs.y).abs() < 1e-3);
    }
}

#[test]
fn dataset_files_are_byte_identical_across_runs() {
    let ranges = SamplingRanges::default();
    let build = |dir: &std::path::Path| {
        let samples = sample_parameters(6, &ranges, Hypothesis::Esh, 77).unwrap();
        let ds = build_dataset(
            &samples,
            &ranges,
            &BuildConfig {
                n2: 3,
                t: 12,
                seed: 5,
                ..BuildConfig::default()
            },
        )
        .unwrap();
        save_dataset(&ds, dir).unwrap();
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    build(dir_a.path());
    build(dir_b.path());
    for name in ["meta.json", "A.csv", "F.csv", "P.csv", "Sigma.csv"] {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}
