use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anisogauss::fractal_analysis::{
    ball_indices, gauge_cover_sum, lil_statistic, sample_box_dimension, sample_hurst, small_ball_fit,
    small_ball_from_sups, sojourn_moment_check, sup_norm_over,
};
use anisogauss::report::{num, EstimateReport, Table, Uncertainty};
use anisogauss::sln_verify::{check_c1, check_c2, C2Options};
use anisogauss::spectral_model::audits::{spectral_condition_audit, truncation_audit, SpectralAuditOptions};
use anisogauss::spectral_model::SpectralModel;
use anisogauss::synthesis::io::{read_ensemble, write_ensemble};
use anisogauss::synthesis::{rng::replicate_seed, GaussianEnsemble, Sampler};
use anisogauss::ModelSpec;
use serde_json::Value;

use crate::config::{EstimatorSpec, ExperimentConfig, AUDIT_NAMES, ESTIMATOR_NAMES};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_file, Manifest};

pub const ENSEMBLE_FILE: &str = "ensemble.agf";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Outcome of a command that produced reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn of(reports: &[EstimateReport]) -> Self {
        if reports.iter().all(|r| r.pass) {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn seeds(cfg: &ExperimentConfig) -> Vec<u64> {
    (0..cfg.replicates as u64).map(|k| replicate_seed(cfg.seed, k)).collect()
}

fn write_report(dir: &Path, stem: &str, report: &EstimateReport, manifest: &mut Manifest) -> CliResult<()> {
    let json = dir.join(format!("{stem}.json"));
    let mut text = report.to_json()?;
    text.push('\n');
    std::fs::write(&json, text)?;
    let csv = dir.join(format!("{stem}.csv"));
    report.write_csv(BufWriter::new(File::create(&csv)?))?;
    for p in [json, csv] {
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        manifest.outputs.insert(name, sha256_file(&p)?);
    }
    Ok(())
}

/// Draws the ensemble and writes it with its manifest.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> CliResult<Outcome> {
    let model = cfg.validate()?;
    create_dir(out)?;
    let sampler = Sampler::prepare(&model, &cfg.grid, &cfg.sampler)?;
    let ens = GaussianEnsemble::generate(&sampler, cfg.d, cfg.seed, cfg.replicates)?;
    let path = out.join(ENSEMBLE_FILE);
    {
        let mut w = BufWriter::new(File::create(&path)?);
        write_ensemble(&mut w, &ens)?;
        w.flush()?;
    }
    let mut manifest = Manifest::new("simulate", None, cfg, ens.seeds());
    manifest.outputs.insert(ENSEMBLE_FILE.into(), sha256_file(&path)?);
    let diag = out.join("sampler.json");
    let mut text = serde_json::to_string_pretty(sampler.diagnostics())?;
    text.push('\n');
    std::fs::write(&diag, text)?;
    manifest.outputs.insert("sampler.json".into(), sha256_file(&diag)?);
    manifest.write(&out.join(MANIFEST_FILE))?;
    Ok(Outcome::Pass)
}

/// Runs one audit of the model.
pub fn audit(cfg: &ExperimentConfig, which: &str, out: &Path) -> CliResult<Outcome> {
    let model = cfg.validate()?;
    let h = model.hurst().clone();
    let a = &cfg.audits;
    let report = match which {
        "c1" => check_c1(&model, &h, a.c1_pairs, cfg.seed)?,
        "c2" => {
            let opts = C2Options {
                side: a.c2_side,
                ..C2Options::new(a.c2_trials, a.c2_n_max, cfg.seed)
            };
            check_c2(&model, &h, &opts)?
        }
        "spectral" => {
            let mut opts = SpectralAuditOptions::for_measure(model.measure());
            if let Some(s) = a.half_side {
                opts.half_side = s;
            }
            opts.shells = a.shells.clone();
            opts.random_directions = a.random_directions;
            opts.ratio_bound = a.ratio_bound;
            opts.seed = cfg.seed;
            spectral_condition_audit(&model, &h, &opts)?
        }
        "truncation" => truncation_audit(&model, &h, &a.a_values, &a.t_values(model.dims()))?,
        other => {
            return Err(CliError::Usage(format!(
                "unknown audit `{other}`; expected one of {}",
                AUDIT_NAMES.join(", ")
            )))
        }
    };
    create_dir(out)?;
    let mut manifest = Manifest::new("audit", Some(which), cfg, vec![cfg.seed]);
    let stem = format!("audit-{which}");
    write_report(out, &stem, &report, &mut manifest)?;
    manifest.write(&out.join(format!("{stem}.manifest.json")))?;
    Ok(Outcome::of(std::slice::from_ref(&report)))
}

/// Runs the configured estimators (or only `which`) on a stored ensemble.
pub fn analyze(cfg: &ExperimentConfig, ensemble: &Path, which: Option<&str>, out: &Path) -> CliResult<Outcome> {
    let model = cfg.validate()?;
    if let Some(w) = which {
        if !ESTIMATOR_NAMES.contains(&w) {
            return Err(CliError::Usage(format!(
                "unknown estimator `{w}`; expected one of {}",
                ESTIMATOR_NAMES.join(", ")
            )));
        }
        if !cfg.estimators.iter().any(|e| e.name() == w) {
            return Err(CliError::Config(format!("estimator `{w}` has no entry in the config")));
        }
    }
    let selected: Vec<&EstimatorSpec> = cfg
        .estimators
        .iter()
        .filter(|e| which.map_or(true, |w| e.name() == w))
        .collect();
    if selected.is_empty() {
        return Err(CliError::Config("the config lists no estimators".into()));
    }
    let ens = read_ensemble(BufReader::new(File::open(ensemble)?))?;
    check_matches(cfg, &model, &ens)?;
    create_dir(out)?;
    let mut manifest = Manifest::new("analyze", which, cfg, ens.seeds());
    manifest.inputs.insert(
        ensemble.file_name().map_or_else(|| "ensemble".into(), |n| n.to_string_lossy().into_owned()),
        sha256_file(ensemble)?,
    );
    let mut reports = Vec::new();
    for spec in selected {
        let report = run_estimator(spec, &ens)?;
        write_report(out, spec.name(), &report, &mut manifest)?;
        reports.push(report);
    }
    let stem = format!("analyze-{}", which.unwrap_or("all"));
    manifest.write(&out.join(format!("{stem}.manifest.json")))?;
    Ok(Outcome::of(&reports))
}

fn check_matches(cfg: &ExperimentConfig, model: &SpectralModel, ens: &GaussianEnsemble) -> CliResult<()> {
    let first = ens
        .replicates
        .first()
        .ok_or_else(|| CliError::Mismatch("ensemble is empty".into()))?;
    let want = ModelSpec::describe(model);
    if *first.model != want {
        return Err(CliError::Mismatch("model differs".into()));
    }
    if first.grid != cfg.grid {
        return Err(CliError::Mismatch(format!("grid {:?} vs {:?}", first.grid.resolution, cfg.grid.resolution)));
    }
    if first.d != cfg.d {
        return Err(CliError::Mismatch(format!("d = {} vs {}", first.d, cfg.d)));
    }
    if first.method != cfg.sampler.method() {
        return Err(CliError::Mismatch("sampler method differs".into()));
    }
    if ens.seeds() != seeds(cfg) {
        return Err(CliError::Mismatch("replicate seeds differ".into()));
    }
    Ok(())
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v.sqrt())
}

/// Ensemble-level report for one estimator.
pub fn run_estimator(spec: &EstimatorSpec, ens: &GaussianEnsemble) -> CliResult<EstimateReport> {
    match spec {
        EstimatorSpec::Dim {
            scales,
            target,
            tolerance,
            min_r2,
        } => {
            let mut crit = Vec::new();
            if let (Some(t), Some(tol)) = (target, tolerance) {
                crit.push(format!("|mean slope - {t}| <= {tol}"));
            }
            if let Some(r2) = min_r2 {
                crit.push(format!("every R^2 >= {r2}"));
            }
            if crit.is_empty() {
                crit.push("finite slopes".into());
            }
            let mut out = EstimateReport::new("box_dimension", crit.join(" and "))
                .param("scales", scales)
                .param("replicates", ens.len());
            let mut table = Table::new(["replicate", "seed", "slope", "r2", "counts"]);
            let mut slopes = Vec::new();
            let mut r2s = Vec::new();
            for (k, s) in ens.replicates.iter().enumerate() {
                let r = sample_box_dimension(s, scales)?;
                let r2 = r.diag_f64("r2").unwrap_or(f64::NAN);
                table.push(vec![
                    Value::from(k),
                    Value::from(s.seed.to_string()),
                    num(r.estimate),
                    num(r2),
                    Value::from(r.diagnostics["counts"].to_string()),
                ]);
                slopes.push(r.estimate);
                r2s.push(r2);
            }
            let (m, sd) = mean_sd(&slopes);
            let min_r2_seen = r2s.iter().cloned().fold(f64::INFINITY, f64::min);
            out.diag("slope_sd", num(sd));
            out.diag("min_r2", num(min_r2_seen));
            out.set_estimate(m, sd / (slopes.len() as f64).sqrt(), Uncertainty::StdErr);
            let mut pass = slopes.iter().all(|s| s.is_finite());
            if let (Some(t), Some(tol)) = (target, tolerance) {
                pass &= (m - t).abs() <= *tol;
            }
            if let Some(r2) = min_r2 {
                pass &= min_r2_seen >= *r2;
            }
            out.pass = pass;
            out.table = table;
            Ok(out)
        }
        EstimatorSpec::Cover {
            levels,
            gauge,
            max_spread,
            min_growth,
        } => cover_report(ens, levels, gauge, *max_spread, *min_growth),
        EstimatorSpec::Sojourn {
            r_values,
            n_values,
            bound,
        } => Ok(sojourn_moment_check(ens, r_values, n_values, *bound)?),
        EstimatorSpec::Lil {
            tau,
            r_values,
            growth_tol,
        } => Ok(lil_statistic(ens, *tau, r_values, *growth_tol)?),
        EstimatorSpec::Smallball { pairs, min_r2 } => {
            let first = ens
                .replicates
                .first()
                .ok_or_else(|| CliError::Mismatch("ensemble is empty".into()))?;
            let h = sample_hurst(first)?;
            let q = h.q_exponent();
            let mut radii: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            radii.sort_by(f64::total_cmp);
            radii.dedup();
            let balls: Vec<Vec<usize>> = radii
                .iter()
                .map(|&r| ball_indices(&first.grid, &h, r))
                .collect::<anisogauss::Result<_>>()?;
            let sups: Vec<Vec<f64>> = ens
                .replicates
                .iter()
                .map(|s| balls.iter().map(|b| sup_norm_over(s, b)).collect())
                .collect();
            let mut per_pair = Vec::new();
            for &(r, eps) in pairs {
                let k = radii.iter().position(|&x| x == r).unwrap();
                let col: Vec<f64> = sups.iter().map(|row| row[k]).collect();
                per_pair.push(small_ball_from_sups(&col, r, eps, q)?);
            }
            let mut fit = small_ball_fit(&per_pair, *min_r2)?;
            let mut table = Table::new(["r", "eps", "scaled_radius", "successes", "p", "ci_low", "ci_high"]);
            for (p, &(r, eps)) in per_pair.iter().zip(pairs) {
                table.push(vec![
                    num(r),
                    num(eps),
                    num(p.diag_f64("scaled_radius").unwrap_or(f64::NAN)),
                    num(p.diag_f64("successes").unwrap_or(f64::NAN)),
                    num(p.estimate),
                    num(p.diag_f64("ci_low").unwrap_or(f64::NAN)),
                    num(p.diag_f64("ci_high").unwrap_or(f64::NAN)),
                ]);
            }
            fit.table = table;
            Ok(fit.param("pairs", pairs).param("replicates", ens.len()))
        }
    }
}

/// Mean cover sum per level over the replicates.
pub fn cover_report(
    ens: &GaussianEnsemble,
    levels: &[u32],
    gauge: &anisogauss::spectral_model::GaugeFunction,
    max_spread: Option<f64>,
    min_growth: Option<f64>,
) -> CliResult<EstimateReport> {
    let first = ens
        .replicates
        .first()
        .ok_or_else(|| CliError::Mismatch("ensemble is empty".into()))?;
    if levels.len() < 2 {
        return Err(CliError::Config("cover needs at least two levels".into()));
    }
    let h = sample_hurst(first)?;
    let mut crit = Vec::new();
    if let Some(s) = max_spread {
        crit.push(format!("max/min of level means <= {s} and no monotone growth"));
    }
    if let Some(g) = min_growth {
        crit.push(format!("each level mean >= {g} x the previous"));
    }
    if crit.is_empty() {
        crit.push("finite sums".into());
    }
    let mut out = EstimateReport::new("gauge_cover_sum", crit.join(" and "))
        .param("levels", levels)
        .param("gauge", gauge)
        .param("replicates", ens.len());
    let mut table = Table::new(["level", "mean", "sd", "min", "max", "out_of_domain"]);
    let mut means = Vec::new();
    for &n in levels {
        let mut sums = Vec::new();
        let mut ood = 0.0;
        for s in &ens.replicates {
            let r = gauge_cover_sum(s, &h, n, gauge)?;
            ood += r.diag_f64("out_of_domain").unwrap_or(0.0);
            sums.push(r.estimate);
        }
        let (m, sd) = mean_sd(&sums);
        let lo = sums.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        table.push(vec![Value::from(n), num(m), num(sd), num(lo), num(hi), num(ood)]);
        means.push(m);
    }
    let growth: Vec<f64> = means.windows(2).map(|w| w[1] / w[0]).collect();
    let spread = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        / means.iter().cloned().fold(f64::INFINITY, f64::min);
    let monotone = growth.iter().all(|g| *g > 1.0);
    out.diag("level_means", means.iter().map(|x| num(*x)).collect::<Vec<_>>());
    out.diag("growth", growth.iter().map(|x| num(*x)).collect::<Vec<_>>());
    out.diag("spread", num(spread));
    out.diag("monotone_growth", monotone);
    let mut pass = means.iter().all(|m| m.is_finite());
    if let Some(s) = max_spread {
        pass &= spread < s && !monotone;
    }
    if let Some(g) = min_growth {
        pass &= growth.iter().all(|x| *x >= g);
    }
    out.set_estimate(*means.last().unwrap(), f64::NAN, Uncertainty::None);
    out.pass = pass;
    out.table = table;
    Ok(out)
}

/// Summarizes every report in `dir` into `summary.csv`.
pub fn report(dir: &Path) -> CliResult<(Outcome, String)> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|e| e == "json")
                && !p.to_string_lossy().ends_with("manifest.json")
                && p.file_name().is_some_and(|n| n != "sampler.json")
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no reports in {}", dir.display())));
    }
    let mut table = Table::new(["file", "estimator", "verdict", "estimate", "uncertainty", "criterion"]);
    let mut text = String::new();
    let mut reports = Vec::new();
    for p in &paths {
        let r: EstimateReport = serde_json::from_str(&std::fs::read_to_string(p)?)?;
        let file = p.file_name().unwrap().to_string_lossy().into_owned();
        text.push_str(&format!(
            "{:<24} {:<28} {} {:>12.6e}  {}\n",
            file,
            r.estimator,
            r.verdict(),
            r.estimate,
            r.criterion
        ));
        table.push(vec![
            Value::from(file.clone()),
            Value::from(r.estimator.clone()),
            Value::from(r.verdict()),
            num(r.estimate),
            num(r.uncertainty),
            Value::from(r.criterion.clone()),
        ]);
        reports.push(r);
    }
    table.write_csv(BufWriter::new(File::create(dir.join("summary.csv"))?))?;
    Ok((Outcome::of(&reports), text))
}
