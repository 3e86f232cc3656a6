//! Acceptance suite. Runs every criterion in order, prints one line per
//! criterion and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use chrono::{Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use solarcast::bayes::{build_prior, fit_bayes, posterior_update, BayesModel, GaussianVec};
use solarcast::clearsky::{clear_sky, clear_sky_series, solar_noon, SiteLocation};
use solarcast::data::DesignMatrix;
use solarcast::metrics::{crps_gaussian, crps_numeric, gaussian_bracket, mae, pinball, score_probabilistic, Forecasts, CRPS_TOL};
use solarcast::point::fit_ols;
use solarcast::quantile::{fit_quantile, fit_quantile_set, SolverOptions};
use solarcast::stats::{quantile_type7, standard_normal_quantile, EmpiricalCdf, Gaussian1D};

use common::*;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("x{i}")).collect()
}

fn design(data: &Linear) -> DesignMatrix {
    DesignMatrix::from_raw(&data.rows, data.y.clone(), &names(data.rows[0].len()), true).unwrap()
}

fn closed_form() -> Check {
    let prior = GaussianVec::isotropic(vec![0.0], 1.0).map_err(|e| e.to_string())?;
    let dm = DesignMatrix::from_raw(&[vec![2.0]], vec![4.0], &names(1), false).unwrap();
    let posterior = posterior_update(&prior, &dm, 1.0).map_err(|e| e.to_string())?;
    let model = BayesModel {
        prior,
        posterior,
        noise_std: 1.0,
        feature_names: names(1),
    };
    let g = model.predictive(&[3.0]).map_err(|e| e.to_string())?;
    let errs = [
        (model.posterior.cov()[(0, 0)] - 0.2).abs(),
        (model.posterior.mean()[0] - 1.6).abs(),
        (g.mean() - 4.8).abs(),
        (g.variance() - 2.8).abs(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    ensure(worst <= 1e-12, format!("max deviation {worst:.2e}"))
}

fn flat_prior_is_ols() -> Check {
    let data = linear_gaussian(1000, &[5.0, 2.0, -1.5], 2.0, 1.0, 7);
    let dm = design(&data);
    let ols = fit_ols(&dm).map_err(|e| e.to_string())?;
    let phi: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let oracle = ols_oracle(&phi, &data.y);
    let ols_err = max_abs_diff(&ols.weights, &oracle);
    let bayes = fit_bayes(&dm, 1e6, None).map_err(|e| e.to_string())?;
    let gap = bayes
        .posterior
        .mean()
        .iter()
        .zip(&ols.weights)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    ensure(
        gap <= 1e-3 && ols_err <= 1e-8,
        format!("|mu_N - w_OLS| = {gap:.2e}, |w_OLS - oracle| = {ols_err:.2e}"),
    )
}

fn conjugacy() -> Check {
    let data = linear_gaussian(300, &[1.0, 0.5, -2.0], 1.5, 0.8, 11);
    let dm = design(&data);
    let prior = build_prior(&dm, 1.0).map_err(|e| e.to_string())?;
    let full = posterior_update(&prior, &dm, 0.8).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p: f64 = rng.random_range(0.0..1.0);
        let (a, b): (Vec<usize>, Vec<usize>) = (0..dm.n()).partition(|_| rng.random_bool(p));
        let first = posterior_update(&prior, &dm.select_rows(&a), 0.8).map_err(|e| e.to_string())?;
        let seq = posterior_update(&first, &dm.select_rows(&b), 0.8).map_err(|e| e.to_string())?;
        worst = worst
            .max(max_abs_diff(seq.mean(), full.mean()))
            .max(max_abs_diff(seq.cov().as_slice(), full.cov().as_slice()));
    }
    ensure(worst <= 1e-8, format!("max deviation over 100 splits {worst:.2e}"))
}

fn crps_cross_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mu = rng.random_range(-50.0..50.0);
        let sigma = rng.random_range(0.1..20.0);
        let x = mu + sigma * rng.random_range(-4.0..4.0);
        let g = Gaussian1D::new(mu, sigma).unwrap();
        let (lo, hi) = gaussian_bracket(&g, x);
        let numeric = crps_numeric(|t| g.cdf(t), x, lo, hi, CRPS_TOL).map_err(|e| e.to_string())?;
        worst = worst.max((numeric - crps_gaussian(&g, x)).abs());
    }
    let at_zero = crps_gaussian(&Gaussian1D::standard(), 0.0);
    ensure(
        worst <= 1e-4 && (at_zero - 0.23370).abs() <= 1e-5,
        format!("max |numeric - closed form| {worst:.2e}, CRPS(N(0,1), 0) = {at_zero:.6}"),
    )
}

fn quantile_optimality() -> Check {
    let opts = SolverOptions::default();
    let mut worst_gap = 0.0f64;
    for (seed, sample) in [
        (1u64, normal_vec(1000, 10.0, 3.0, 21)),
        (2, uniform_vec(1000, -5.0, 5.0, 22)),
    ] {
        let rows = vec![Vec::new(); sample.len()];
        let dm = DesignMatrix::from_raw(&rows, sample.clone(), &[], true).unwrap();
        let mut sorted = sample.clone();
        sorted.sort_by(f64::total_cmp);
        for q in [0.1, 0.5, 0.9] {
            let fit = fit_quantile(&dm, q, &opts).map_err(|e| e.to_string())?;
            let w = fit.weights[0];
            let t7 = type7(&sample, q);
            // the pinball minimizer set is the order-statistic interval holding t7
            let h = (sample.len() - 1) as f64 * q;
            let lo = sorted[h.floor() as usize];
            let hi = sorted[(h.floor() as usize + 1).min(sorted.len() - 1)];
            let loss_gap = pinball_oracle(q, w, &sample) - pinball_oracle(q, t7, &sample);
            let rel = loss_gap.abs() / pinball_oracle(q, t7, &sample);
            if !(w >= lo - 1e-9 && w <= hi + 1e-9) || rel > 1e-9 {
                return Err(format!(
                    "seed {seed} q {q}: fit {w} outside [{lo}, {hi}] or loss gap {rel:.2e}"
                ));
            }
            worst_gap = worst_gap.max((w - t7).abs());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = rng.random_range(1..200);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let total: f64 = p.iter().zip(&a).map(|(&f, &y)| pinball(0.5, f, y).unwrap()).sum();
        let mean_pinball = total / n as f64;
        let half_mae = 0.5 * mae(&a, &p).unwrap();
        if mean_pinball != half_mae {
            return Err(format!("pinball(0.5) {mean_pinball} != MAE/2 {half_mae}"));
        }
    }
    Ok(format!(
        "fits inside the minimizing order-statistic interval, max |fit - type7| {worst_gap:.3e}; pinball(0.5) == MAE/2 on 50 vectors"
    ))
}

fn calibration() -> Check {
    let weights = [50.0, 3.0, -2.0];
    let train = linear_gaussian(2000, &weights, 2.0, 4.0, 31);
    let test = linear_gaussian(10_000, &weights, 2.0, 4.0, 32);
    let model = fit_bayes(&design(&train), 1.0, Some(4.0)).map_err(|e| e.to_string())?;
    let mut hits = 0;
    for (x, &y) in test.rows.iter().zip(&test.y) {
        let g = model.predictive(x).map_err(|e| e.to_string())?;
        let (lo, hi) = (g.quantile(0.025).unwrap(), g.quantile(0.975).unwrap());
        if lo <= y && y <= hi {
            hits += 1;
        }
    }
    let coverage = hits as f64 / test.y.len() as f64;
    ensure(
        (coverage - 0.95).abs() <= 0.03,
        format!("95% interval coverage {:.2}% over 10000 held-out points", 100.0 * coverage),
    )
}

fn method_ordering() -> Check {
    let weights = [200.0, 12.0, -6.0];
    let train = linear_gaussian(1500, &weights, 3.0, 20.0, 41);
    let test = linear_gaussian(2000, &weights, 3.0, 20.0, 42);
    let dm = design(&train);
    let bayes = fit_bayes(&dm, 1.0, None).map_err(|e| e.to_string())?;
    let qr = fit_quantile_set(&dm, &[0.025, 0.15, 0.5, 0.85, 0.975], &SolverOptions::default())
        .map_err(|e| e.to_string())?;
    let gs: Vec<Gaussian1D> = test.rows.iter().map(|x| bayes.predictive(x).unwrap()).collect();
    let sets = test.rows.iter().map(|x| qr.predict(x).unwrap()).collect();
    let b = score_probabilistic("bayes", &Forecasts::Gaussian(gs), &test.y, &[0.5]).map_err(|e| e.to_string())?;
    let q = score_probabilistic("quantile", &Forecasts::Quantiles(sets), &test.y, &[0.5]).map_err(|e| e.to_string())?;
    let (cb, cq) = (b.mean_crps.unwrap(), q.mean_crps.unwrap());
    ensure(cb <= cq, format!("mean CRPS bayes {cb:.4} vs quantile regression {cq:.4}"))
}

fn copula_anchor() -> Check {
    let exp: Vec<f64> = uniform_vec(10_000, 0.0, 1.0, 51).iter().map(|u| -(1.0 - u).ln()).collect();
    let lognormal: Vec<f64> = normal_vec(10_000, 0.0, 1.0, 52).iter().map(|z| z.exp()).collect();
    let samples = [
        ("normal", normal_vec(10_000, 25.0, 4.0, 53)),
        ("uniform", uniform_vec(10_000, 0.0, 1000.0, 54)),
        ("exponential", exp),
        ("lognormal", lognormal),
    ];
    let mut worst = 0.0f64;
    let mut detail = Vec::new();
    for (name, data) in samples {
        let p95 = quantile_type7(&data, 0.95).map_err(|e| e.to_string())?;
        let cdf = EmpiricalCdf::new(&data).map_err(|e| e.to_string())?;
        let score = standard_normal_quantile(cdf.rank(p95)).map_err(|e| e.to_string())?;
        worst = worst.max((score - 1.645).abs());
        detail.push(format!("{name} {score:.4}"));
    }
    ensure(worst <= 0.02, detail.join(", "))
}

fn clear_sky_sanity() -> Check {
    let site = SiteLocation::orlando();
    let day = NaiveDate::from_ymd_opt(2022, 4, 26).unwrap();
    let noon = solar_noon(&site, day);
    let peak = clear_sky(&site, noon, 3.0).map_err(|e| e.to_string())?;
    let midnight = day.and_hms_opt(0, 0, 0).unwrap();
    let series = clear_sky_series(&site, midnight, midnight + Duration::minutes(23 * 60 + 45), 3.0)
        .map_err(|e| e.to_string())?;
    let night_zero = series
        .iter()
        .filter(|p| p.solar_zenith >= 90.0)
        .all(|p| p.ghi == 0.0 && p.dni == 0.0)
        && series[0].ghi == 0.0;
    let top = series
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.ghi.total_cmp(&b.1.ghi))
        .unwrap()
        .0;
    let unimodal = series[..=top].windows(2).all(|w| w[0].ghi <= w[1].ghi)
        && series[top..].windows(2).all(|w| w[0].ghi >= w[1].ghi);
    ensure(
        (850.0..=1000.0).contains(&peak.ghi) && night_zero && unimodal,
        format!(
            "noon {} GHI {:.1} W/m2, DNI {:.1} W/m2, zero at night {night_zero}, unimodal {unimodal}",
            noon.format("%H:%M"),
            peak.ghi,
            peak.dni
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_solarcast"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let key = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(key, std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

const PIPELINE_CONFIG: &str = r#"{
  "data_path": "synthetic.csv",
  "output_dir": "out",
  "train_window": {"start": "2022-01-01 00:00", "end": "2022-01-10 23:45"},
  "forecast_window": {"start": "2022-01-11 11:45", "end": "2022-01-11 14:00"},
  "synth": {"n": 1200, "seed": 2024, "slope": 2.0, "intercept": 100.0, "noise_std": 5.0, "path": "synthetic.csv"}
}
"#;

fn pipeline_determinism() -> Check {
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        std::fs::write(dir.path().join("run.json"), PIPELINE_CONFIG).map_err(|e| e.to_string())?;
        let c = ["--config", "run.json"];
        run_cli(dir.path(), &["synth", c[0], c[1]])?;
        for kind in ["point", "quantile", "bayes"] {
            run_cli(dir.path(), &["train", kind, c[0], c[1]])?;
            let model = format!("out/model_{kind}.json");
            run_cli(dir.path(), &["forecast", "--model", &model, c[0], c[1]])?;
        }
        run_cli(
            dir.path(),
            &[
                "evaluate",
                "--forecast",
                "out/forecast_point.csv",
                "--forecast",
                "out/forecast_quantile.csv",
                "--forecast",
                "out/forecast_bayes.csv",
                c[0],
                c[1],
            ],
        )?;
        runs.push(snapshot(dir.path()));
    }
    let rows = runs[0]
        .get("out/forecast_bayes.csv")
        .map(|b| b.iter().filter(|&&c| c == b'\n').count() - 1)
        .unwrap_or(0);
    ensure(
        runs[0] == runs[1] && rows == 10,
        format!("{} artifacts byte-identical across runs: {}, forecast rows {rows}", runs[0].len(), runs[0] == runs[1]),
    )
}

type Criterion = (&'static str, f64, fn() -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        ("closed-form posterior and predictive", 1.0, closed_form),
        ("flat prior equals OLS, OLS equals oracle", 1.0, flat_prior_is_ols),
        ("sequential-update conjugacy", 5.0, conjugacy),
        ("CRPS numeric vs closed form", 5.0, crps_cross_oracle),
        ("pinball and quantile optimality", 5.0, quantile_optimality),
        ("95% predictive interval calibration", 10.0, calibration),
        ("method ordering by CRPS", 10.0, method_ordering),
        ("copula anchor 1.645", 1.0, copula_anchor),
        ("clear-sky sanity", 1.0, clear_sky_sanity),
        ("pipeline determinism", 10.0, pipeline_determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {:>2} {tag} {name} [{secs:.2}s of {budget:.0}s]: {detail}",
            i + 1
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
