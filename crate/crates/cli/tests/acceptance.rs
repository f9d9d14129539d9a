//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails. `ACCEPTANCE_ONLY=3,7` runs a subset.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use anisogauss::fractal_analysis::{
    ball_indices, continuity_correction, dyadic_scales, gauge_cover_sum, sample_box_dimension,
    small_ball_fit, small_ball_from_sups, sojourn_moments_from_times, sojourn_times, sup_norm_over,
};
use anisogauss::report::EstimateReport;
use anisogauss::sln_verify::{check_c1, check_c2, C2Options};
use anisogauss::spectral_model::audits::{spectral_condition_audit, SpectralAuditOptions};
use anisogauss::spectral_model::{
    AnisoDensity, DiscreteAtoms, FbmDensity, GaugeFunction, HurstVector, QuadratureConfig, SpectralMeasure,
    SpectralModel,
};
use anisogauss::synthesis::{rng::replicate_seed, GaussianEnsemble, GridSpec, Sampler, SamplerSpec};
use anisogauss::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn brownian() -> SpectralModel {
    let f = FbmDensity::normalized(0.5, 1).unwrap();
    SpectralModel::new(SpectralMeasure::Fbm(f), QuadratureConfig::default()).unwrap()
}

fn aniso_h() -> HurstVector {
    HurstVector::new(vec![0.5, 1.0 / 3.0]).unwrap()
}

fn aniso(rtol: f64) -> SpectralModel {
    SpectralModel::new(SpectralMeasure::Aniso(AnisoDensity::new(aniso_h())), QuadratureConfig::with_rtol(rtol)).unwrap()
}

fn circulant(m: usize) -> Result<Sampler> {
    Sampler::prepare(&brownian(), &GridSpec::new(vec![m])?, &SamplerSpec::Circulant)
}

fn min_max(xs: &[f64]) -> (f64, f64) {
    xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn fmt(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.3}")).collect();
    format!("[{}]", parts.join(", "))
}

fn c1_fbm_calibration() -> Result<Outcome> {
    let m = brownian();
    let mut ratios = Vec::new();
    for k in 0..20 {
        let h = 10f64.powf(-3.0 + 3.0 * k as f64 / 19.0);
        ratios.push(m.variogram(&[h])? / h);
    }
    let (lo, hi) = min_max(&ratios);
    outcome(lo >= 0.99 && hi <= 1.01, format!("sigma^2(h)/|h| in [{lo:.6}, {hi:.6}] over 20 lags"))
}

fn c2_c1_audit() -> Result<Outcome> {
    let m = aniso(1e-4);
    let h = aniso_h();
    let a = check_c1(&m, &h, 200, 11)?.diag_f64("c_11").unwrap_or(f64::NAN);
    let b = check_c1(&m, &h, 400, 11)?.diag_f64("c_11").unwrap_or(f64::NAN);
    let rel = (b / a - 1.0).abs();
    outcome(
        a.is_finite() && b.is_finite() && rel <= 0.2,
        format!("c_11 = {a:.4} (200 pairs), {b:.4} (400 pairs), change {:.1}%", 100.0 * rel),
    )
}

fn c3_c2_audit() -> Result<Outcome> {
    let m = aniso(1e-4);
    let h = aniso_h();
    let a = check_c2(&m, &h, &C2Options::new(1000, 8, 13))?;
    let b = check_c2(&m, &h, &C2Options::new(2000, 8, 13))?;
    let ra = a.diag_f64("min_ratio").unwrap_or(f64::NAN);
    let rb = b.diag_f64("min_ratio").unwrap_or(f64::NAN);
    let factor = ra.max(rb) / ra.min(rb);
    outcome(
        ra > 0.0 && rb > 0.0 && factor <= 2.0,
        format!(
            "min ratio {ra:.4e} ({} instances), {rb:.4e} ({} instances), factor {factor:.3}",
            a.diag_f64("instances").unwrap_or(0.0),
            b.diag_f64("instances").unwrap_or(0.0)
        ),
    )
}

fn spectral_audit(m: &SpectralModel, h: &HurstVector) -> Result<EstimateReport> {
    let mut opts = SpectralAuditOptions::for_measure(m.measure());
    opts.seed = 17;
    spectral_condition_audit(m, h, &opts)
}

fn c4_spectral_condition() -> Result<Outcome> {
    let h = aniso_h();
    let q = h.q_exponent();
    let a = spectral_audit(&aniso(1e-5), &h)?;
    let disc = |e: f64| -> Result<SpectralModel> {
        let d = DiscreteAtoms::power_law(h.clone(), e, 64)?;
        SpectralModel::new(SpectralMeasure::Discrete(d), QuadratureConfig::default())
    };
    let d = spectral_audit(&disc(q + 2.0)?, &h)?;
    let fast = spectral_audit(&disc(q + 4.0)?, &h)?;
    let fast_mm = fast.diag_f64("min_over_max").unwrap_or(f64::NAN);
    let pass = a.pass && d.pass && !fast.pass && fast_mm < 1e-3;
    outcome(
        pass,
        format!(
            "aniso ratio {:.2} {}; discrete (Q+2) ratio {:.2} {}; counterexample (Q+4) ratio {:.1} {} with min/max {:.2e} (needs < 1e-3)",
            a.diag_f64("ratio").unwrap_or(f64::NAN),
            a.verdict(),
            d.diag_f64("ratio").unwrap_or(f64::NAN),
            d.verdict(),
            fast.diag_f64("ratio").unwrap_or(f64::NAN),
            fast.verdict(),
            fast_mm
        ),
    )
}

fn c5_dimension() -> Result<Outcome> {
    // Brownian motion in the plane
    let s = circulant(1 << 16)?;
    let ens = GaussianEnsemble::generate(&s, 2, 5, 8)?;
    let scales = dyadic_scales(0, 7);
    let mut slopes = Vec::new();
    let mut r2 = Vec::new();
    for x in &ens.replicates {
        let r = sample_box_dimension(x, &scales)?;
        slopes.push(r.estimate);
        r2.push(r.diag_f64("r2").unwrap_or(f64::NAN));
    }
    let bm = slopes.iter().sum::<f64>() / slopes.len() as f64;
    let bm_r2 = min_max(&r2).0;
    let bm_pass = (bm - 2.0).abs() <= 0.2 && bm_r2 >= 0.98;

    // N = 2, H = (1/2, 1/2), d = 5
    let h = HurstVector::new(vec![0.5, 0.5])?;
    let m = SpectralModel::new(SpectralMeasure::Aniso(AnisoDensity::new(h)), QuadratureConfig::with_rtol(1e-4))?;
    let s = Sampler::prepare(&m, &GridSpec::uniform(256, 2)?, &SamplerSpec::SpectralMc { n_freqs: 2048 })?;
    let ens = GaussianEnsemble::generate(&s, 5, 6, 4)?;
    let scales = dyadic_scales(-1, 5);
    let an: Vec<f64> = ens
        .replicates
        .iter()
        .map(|x| sample_box_dimension(x, &scales).map(|r| r.estimate))
        .collect::<Result<_>>()?;
    let am = an.iter().sum::<f64>() / an.len() as f64;
    let an_pass = (am - 4.0).abs() <= 0.35;
    outcome(
        bm_pass && an_pass,
        format!(
            "Brownian plane: mean slope {bm:.3} (per replicate {}), min R^2 {bm_r2:.4} {}; N=2 d=5: mean slope {am:.3} {}",
            fmt(&slopes),
            if bm_pass { "ok" } else { "out of 2.0 +- 0.2" },
            if an_pass { "ok" } else { "out of 4.0 +- 0.35" }
        ),
    )
}

fn c6_gauge_cover() -> Result<Outcome> {
    let s = circulant((1 << 17) + 1)?;
    let ens = GaussianEnsemble::generate(&s, 3, 8, 8)?;
    let h = HurstVector::new(vec![0.5])?;
    let level_means = |g: &GaugeFunction| -> Result<Vec<f64>> {
        (4..=8)
            .map(|n| {
                let mut total = 0.0;
                for x in &ens.replicates {
                    total += gauge_cover_sum(x, &h, n, g)?.estimate;
                }
                Ok(total / ens.len() as f64)
            })
            .collect()
    };
    let phi1 = level_means(&GaugeFunction::power_log_log(2.0)?)?;
    let (lo, hi) = min_max(&phi1);
    let monotone = phi1.windows(2).all(|w| w[1] > w[0]);
    let phi1_pass = hi / lo < 5.0 && !monotone;
    let pow = level_means(&GaugeFunction::power(1.8)?)?;
    let growth: Vec<f64> = pow.windows(2).map(|w| w[1] / w[0]).collect();
    let pow_pass = growth.iter().all(|g| *g >= 2.0);
    outcome(
        phi1_pass && pow_pass,
        format!(
            "phi_1 sums {} spread {:.2} {}; Power(1.8) sums {} growth {} {}",
            fmt(&phi1),
            hi / lo,
            if phi1_pass { "ok" } else { "unbounded" },
            fmt(&pow),
            fmt(&growth),
            if pow_pass { "ok" } else { "below 2x per level" }
        ),
    )
}

fn c7_sojourn_moments() -> Result<Outcome> {
    let s = circulant(4097)?;
    let rs = [0.05, 0.1, 0.2, 0.4];
    let mut times = Vec::new();
    let batch = 500;
    for b in 0..8 {
        let ens = GaussianEnsemble::generate_range(&s, 3, 7, b * batch..(b + 1) * batch)?;
        times.extend(sojourn_times(&ens, &rs)?);
    }
    let r = sojourn_moments_from_times(&times, &rs, &[1, 2, 3], 2.0, 4.0)?;
    outcome(
        r.pass,
        format!(
            "{} replicates: m(n, r) in [{:.3}, {:.3}], max/min {:.3}",
            times.len(),
            r.diag_f64("m_min").unwrap_or(f64::NAN),
            r.diag_f64("m_max").unwrap_or(f64::NAN),
            r.diag_f64("ratio").unwrap_or(f64::NAN)
        ),
    )
}

/// Restricted sups at `rho(0, t) <= r` for each radius, from `count` Brownian
/// paths in R^3 on `[0, 1]`.
fn brownian_sups(radii: &[f64], count: usize) -> Result<(Vec<Vec<f64>>, f64)> {
    let s = circulant(4097)?;
    let h = HurstVector::new(vec![0.5])?;
    let balls: Vec<Vec<usize>> = radii.iter().map(|&r| ball_indices(s.grid(), &h, r)).collect::<Result<_>>()?;
    let mut sups = vec![Vec::with_capacity(count); radii.len()];
    let batch = 5000;
    let mut cc = f64::NAN;
    for start in (0..count).step_by(batch) {
        let ens = GaussianEnsemble::generate_range(&s, 3, 8, start..(start + batch).min(count))?;
        if start == 0 {
            cc = continuity_correction(&ens.replicates[0], &h)?;
        }
        for x in &ens.replicates {
            for (k, b) in balls.iter().enumerate() {
                sups[k].push(sup_norm_over(x, b));
            }
        }
    }
    Ok((sups, cc))
}

fn c8_small_ball() -> Result<Outcome> {
    let radii = [1.0, 0.8];
    let (sups, cc) = brownian_sups(&radii, 100_000)?;
    let fit_for = |xs: &[f64]| -> Result<(EstimateReport, Vec<String>)> {
        let mut reps = Vec::new();
        let mut desc = Vec::new();
        for (k, &x) in xs.iter().enumerate() {
            let ri = k % radii.len();
            let r = radii[ri];
            let eps = r / x.sqrt();
            let rep = small_ball_from_sups(&sups[ri], r, eps, 2.0)?;
            desc.push(format!("{x}:{}", rep.diag_f64("successes").unwrap_or(0.0)));
            reps.push(rep);
        }
        Ok((small_ball_fit(&reps, 0.9)?, desc))
    };
    let (fit, desc) = fit_for(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])?;
    let (obs, _) = fit_for(&[0.5, 0.75, 1.0, 1.25, 1.5, 2.0])?;
    outcome(
        fit.pass,
        format!(
            "(r/eps)^2:successes {}; fit on {} pairs slope {} R^2 {}; continuity correction {cc:.4}; \
             on (r/eps)^2 in [0.5, 2]: slope {:.3} R^2 {:.4}",
            desc.join(" "),
            fit.diag_f64("pairs_in_fit").unwrap_or(0.0),
            fit.diag_f64("slope").map_or("n/a".into(), |x| format!("{x:.3}")),
            fit.diag_f64("r2").map_or("n/a".into(), |x| format!("{x:.4}")),
            obs.diag_f64("slope").unwrap_or(f64::NAN),
            obs.diag_f64("r2").unwrap_or(f64::NAN)
        ),
    )
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    sxy / (sxx * syy).sqrt()
}

fn c9_band_independence() -> Result<Outcome> {
    let m = aniso(1e-5);
    let grid = GridSpec::uniform(5, 2)?;
    let cuts = [0.0, 1.5, 4.0, f64::INFINITY];
    let low = Sampler::prepare(&m, &grid, &SamplerSpec::Band { a: 0.5, b: cuts[1], budget: None })?;
    let high = Sampler::prepare(&m, &grid, &SamplerSpec::Band { a: cuts[1], b: cuts[2], budget: None })?;
    let n = 4000u64;
    let mut lows = Vec::new();
    let mut highs = Vec::new();
    for k in 0..n {
        let seed = replicate_seed(9, k);
        lows.push(low.draw_values(1, seed)?);
        highs.push(high.draw_values(1, seed)?);
    }
    let se = 1.0 / (n as f64).sqrt();
    let points: Vec<usize> = (1..grid.len()).step_by(2).take(10).collect();
    let rs: Vec<f64> = points
        .iter()
        .map(|&p| {
            let x: Vec<f64> = lows.iter().map(|v| v[p]).collect();
            let y: Vec<f64> = highs.iter().map(|v| v[p]).collect();
            corr(&x, &y)
        })
        .collect();
    let corr_pass = rs.iter().all(|r| r.abs() <= 3.0 * se);
    let mut worst: f64 = 0.0;
    for t in [[0.25, 0.0], [0.0, 0.5], [0.5, 0.5], [1.0, 1.0], [0.1, 0.9]] {
        let full = m.variogram(&t)?;
        let sum: f64 = cuts
            .windows(2)
            .map(|w| m.band_variogram(&t, w[0], w[1]))
            .sum::<Result<f64>>()?;
        worst = worst.max((sum / full - 1.0).abs());
    }
    let sum_pass = worst <= 0.05;
    outcome(
        corr_pass && sum_pass,
        format!(
            "cross-correlations {} vs 3 stderr = {:.4}; band variogram sums within {:.3}%",
            fmt(&rs),
            3.0 * se,
            100.0 * worst
        ),
    )
}

fn run_cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_anisogauss")).args(args).status().map_or(-1, |s| s.code().unwrap_or(-1))
}

fn c10_determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version": 1,
 "model": {"measure": {"kind": "fbm", "hurst": 0.5, "n_dims": 1}},
 "grid": {"resolution": [4097]}, "d": 3, "seed": 2024, "replicates": 16,
 "sampler": {"method": "circulant"},
 "estimators": [
   {"name": "dim", "scales": [1.0, 0.5, 0.25, 0.125, 0.0625]},
   {"name": "cover", "levels": [3, 4, 5], "gauge": {"kind": "power_log_log", "q": 2.0}, "max_spread": 5.0},
   {"name": "sojourn", "r_values": [0.2, 0.4], "n_values": [1, 2]},
   {"name": "lil", "tau": 0, "r_values": [0.3, 0.2, 0.1]},
   {"name": "smallball", "pairs": [[1.0, 1.5], [1.0, 1.2], [0.8, 0.9]]}
 ]}"#,
    )?;
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let (cfg_s, a_s, b_s) = (cfg.to_str().unwrap(), a.to_str().unwrap(), b.to_str().unwrap());
    let mut codes = vec![
        run_cli(&["--threads", "1", "simulate", "--config", cfg_s, "--out", a_s]),
        run_cli(&["--threads", "1", "analyze", "--config", cfg_s, "--out", a_s]),
    ];
    let manifest = a.join("manifest.json");
    let m_s = manifest.to_str().unwrap();
    codes.push(run_cli(&["--threads", "4", "simulate", "--config", m_s, "--out", b_s]));
    codes.push(run_cli(&["--threads", "4", "analyze", "--config", m_s, "--out", b_s]));
    let ran = codes.iter().all(|c| *c == 0 || *c == 2) && codes[0] == 0 && codes[2] == 0;
    let (same, total) = compare_dirs(&a, &b)?;
    outcome(
        ran && same == total && total > 0,
        format!("exit codes {codes:?}; {same}/{total} files byte-identical across --threads 1 and 4"),
    )
}

fn compare_dirs(a: &Path, b: &Path) -> Result<(usize, usize)> {
    let mut same = 0;
    let mut total = 0;
    for e in std::fs::read_dir(a)? {
        let name = e?.file_name();
        total += 1;
        if let (Ok(x), Ok(y)) = (std::fs::read(a.join(&name)), std::fs::read(b.join(&name))) {
            same += (x == y) as usize;
        }
    }
    Ok((same, total))
}

type Criterion = (u32, &'static str, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "fbm calibration", c1_fbm_calibration),
        (2, "C1 audit", c2_c1_audit),
        (3, "C2 audit", c3_c2_audit),
        (4, "spectral condition", c4_spectral_condition),
        (5, "range dimension", c5_dimension),
        (6, "gauge covering", c6_gauge_cover),
        (7, "sojourn moments", c7_sojourn_moments),
        (8, "small-ball scaling", c8_small_ball),
        (9, "band independence", c9_band_independence),
        (10, "determinism", c10_determinism),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {verdict} [{name}] ({:.1}s) {detail}", t.elapsed().as_secs_f64());
        if !pass {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria PASS");
    } else {
        println!("acceptance: FAIL on criteria {failed:?}");
        std::process::exit(1);
    }
}
