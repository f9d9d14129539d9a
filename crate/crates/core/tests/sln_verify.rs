use anisogauss::sln_verify::*;
use anisogauss::spectral_model::{
    AnisoDensity, DiscreteAtoms, FbmDensity, HurstVector, QuadratureConfig, SpectralMeasure,
    SpectralModel,
};
use proptest::prelude::*;

fn brownian() -> SpectralModel {
    let f = FbmDensity::normalized(0.5, 1).unwrap();
    SpectralModel::new(SpectralMeasure::Fbm(f), QuadratureConfig::default()).unwrap()
}

fn aniso() -> (SpectralModel, HurstVector) {
    let h = HurstVector::new(vec![0.5, 1.0 / 3.0]).unwrap();
    let m = SpectralModel::new(
        SpectralMeasure::Aniso(AnisoDensity::new(h.clone())),
        QuadratureConfig::with_rtol(1e-4),
    )
    .unwrap();
    (m, h)
}

fn inst(u: Vec<f64>, ts: Vec<Vec<f64>>) -> ConditioningInstance {
    ConditioningInstance::new(u, ts).unwrap()
}

#[test]
fn brownian_conditioning_oracles() {
    let m = brownian();
    let v = conditional_variance(&m, &inst(vec![0.5], vec![vec![1.0]])).unwrap();
    assert!((v - 0.25).abs() < 1e-9, "{v}");
    let v = conditional_variance(&m, &inst(vec![0.7], vec![])).unwrap();
    assert!((v - 0.7).abs() < 1e-9);
    let v = conditional_variance(&m, &inst(vec![0.5], vec![vec![0.5 + 1e-3]])).unwrap();
    assert!(v <= 1e-3 + 1e-9, "{v}");
    // bridge between 0.2 and 0.6: (0.3 - 0.2)(0.6 - 0.3)/(0.6 - 0.2)
    let v = conditional_variance(&m, &inst(vec![0.3], vec![vec![0.6], vec![0.2], vec![0.2]])).unwrap();
    assert!((v - 0.075).abs() < 1e-9, "{v}");
    assert!(ConditioningInstance::new(vec![0.3], vec![vec![0.3]]).is_err());
    assert!(ConditioningInstance::new(vec![1.3], vec![]).is_err());
}

#[test]
fn min_rho_includes_the_origin() {
    let (_, h) = aniso();
    let i = inst(vec![0.01, 0.001], vec![vec![1.0, 1.0]]);
    let want = (0.01f64.sqrt() + 0.001f64.powf(1.0 / 3.0)).powi(2);
    assert!((i.min_rho_sq(&h).unwrap() - want).abs() < 1e-15);
}

#[test]
fn c1_fbm_ratio_is_one() {
    let m = brownian();
    let h = m.hurst().clone();
    let r = check_c1(&m, &h, 100, 3).unwrap();
    assert!((r.diag_f64("min_ratio").unwrap() - 1.0).abs() < 1e-9);
    assert!((r.diag_f64("max_ratio").unwrap() - 1.0).abs() < 1e-9);
    assert!(r.pass);
    let rho = r.table.column_f64("rho");
    assert!(rho.iter().cloned().fold(f64::INFINITY, f64::min) < 3e-3);
    assert!(rho.iter().cloned().fold(0.0, f64::max) > 0.3);
}

#[test]
fn c1_aniso_band_is_finite() {
    let (m, h) = aniso();
    let r = check_c1(&m, &h, 200, 1).unwrap();
    assert!(r.pass);
    let c = r.diag_f64("c_11").unwrap();
    assert!(c.is_finite() && c >= 1.0, "{c}");
}

#[test]
fn c2_aniso_has_positive_floor() {
    let (m, h) = aniso();
    let r = check_c2(&m, &h, &C2Options::new(300, 8, 7)).unwrap();
    assert!(r.pass, "{:?}", r.diagnostics);
    assert!(r.diag_f64("min_ratio").unwrap() > 0.0);
    assert_eq!(r.diag_f64("instances").unwrap(), 450.0);
}

#[test]
fn c2_discrete_example_near_origin() {
    let h = HurstVector::new(vec![0.5, 0.5]).unwrap();
    let q = h.q_exponent();
    let d = DiscreteAtoms::power_law(h.clone(), q + 2.0, 16).unwrap();
    let m = SpectralModel::new(SpectralMeasure::Discrete(d), QuadratureConfig::default()).unwrap();
    // T * 1.5 * N < log 2
    let side = 0.2;
    assert!(side * 1.5 * 2.0 < 2f64.ln());
    let opts = C2Options {
        side,
        ..C2Options::new(40, 4, 11)
    };
    let r = check_c2(&m, &h, &opts).unwrap();
    assert!(r.pass, "{:?}", r.diagnostics);
}

#[test]
fn c2_is_permutation_invariant() {
    let (m, _) = aniso();
    let ts = vec![vec![0.2, 0.9], vec![0.4, 0.41], vec![0.41, 0.4], vec![0.9, 0.1]];
    let a = conditional_variance(&m, &inst(vec![0.4, 0.4], ts.clone())).unwrap();
    let mut rev = ts;
    rev.reverse();
    rev.swap(0, 2);
    let b = conditional_variance(&m, &inst(vec![0.4, 0.4], rev)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn c2_rejects_zero_trials() {
    let (m, h) = aniso();
    let mut opts = C2Options::new(5, 3, 1);
    opts.trials = 0;
    assert!(check_c2(&m, &h, &opts).is_err());
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..0.99, 2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conditioning_never_increases_variance(u in point(), ts in prop::collection::vec(point(), 1..6)) {
        let (m, _) = aniso();
        prop_assume!(ts.iter().all(|t| *t != u));
        let mut prev = conditional_variance(&m, &inst(u.clone(), vec![])).unwrap();
        for k in 1..=ts.len() {
            let v = conditional_variance(&m, &inst(u.clone(), ts[..k].to_vec())).unwrap();
            prop_assert!(v <= prev * (1.0 + 1e-9) + 1e-15, "{} > {}", v, prev);
            prev = v;
        }
        // information inequality against every single conditioner
        let all = conditional_variance(&m, &inst(u.clone(), ts.clone())).unwrap();
        for t in &ts {
            let one = conditional_variance(&m, &inst(u.clone(), vec![t.clone()])).unwrap();
            prop_assert!(all <= one * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn conditional_variance_scales_with_operator_dilation(u in point(), ts in prop::collection::vec(point(), 0..4)) {
        let (m, h) = aniso();
        prop_assume!(ts.iter().all(|t| *t != u));
        let base = conditional_variance(&m, &inst(u.clone(), ts.clone())).unwrap();
        for c in [0.25f64, 0.5] {
            let dilate = |p: &Vec<f64>| -> Vec<f64> {
                p.iter().zip(h.as_slice()).map(|(x, hj)| x * c.powf(1.0 / hj)).collect()
            };
            let scaled = conditional_variance(&m, &inst(dilate(&u), ts.iter().map(dilate).collect())).unwrap();
            prop_assert!((scaled - c * c * base).abs() <= 1e-3 * c * c * base + 1e-12,
                "c = {}: {} vs {}", c, scaled, c * c * base);
        }
    }
}
