//! Regret-versus-horizon studies.

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiment::run_experiment;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub t: usize,
    pub seed: u64,
    pub regret: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// `(T, mean regret)` per horizon.
    pub means: Vec<(usize, f64)>,
    /// Least-squares slope of `log mean regret` on `log T`.
    pub slope: f64,
    /// Standard error of the per-seed slopes.
    pub stderr: f64,
}

/// Least-squares slope of `ys` on `xs` and its standard error.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if xs.len() < 3 {
        return (slope, 0.0);
    }
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    (slope, (rss / (n - 2.0) / sxx).sqrt())
}

/// Log-log slope of positive pairs.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).unzip();
    least_squares_slope(&lx, &ly)
}

/// Aggregate trials `(T, seed, regret)` into a report.
pub fn summarize(mut rows: Vec<ScalingRow>) -> ScalingReport {
    rows.sort_by(|a, b| (a.t, a.seed).cmp(&(b.t, b.seed)));
    let mut horizons: Vec<usize> = rows.iter().map(|r| r.t).collect();
    horizons.dedup();
    let means: Vec<(usize, f64)> = horizons
        .iter()
        .map(|&t| {
            let v: Vec<f64> = rows.iter().filter(|r| r.t == t).map(|r| r.regret).collect();
            (t, v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    let xs: Vec<f64> = means.iter().map(|m| m.0 as f64).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.1).collect();
    let (slope, _) = loglog_slope(&xs, &ys);

    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let per_seed: Vec<f64> = seeds
        .iter()
        .filter_map(|s| {
            let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.seed == *s).map(|r| (r.t as f64, r.regret)).unzip();
            (y.iter().all(|v| *v > 0.0) && x.len() >= 2).then(|| loglog_slope(&x, &y).0)
        })
        .collect();
    let stderr = if per_seed.len() >= 2 {
        let k = per_seed.len() as f64;
        let mu = per_seed.iter().sum::<f64>() / k;
        (per_seed.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        f64::NAN
    };
    ScalingReport { rows, means, slope, stderr }
}

/// Run the template at every `(T, seed)` pair in parallel.
pub fn scaling_study(template: &ExperimentConfig, horizons: &[usize], seeds: &[u64]) -> Result<ScalingReport> {
    let trials: Vec<(usize, u64)> = horizons.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
    let rows: Result<Vec<ScalingRow>> = trials
        .par_iter()
        .map(|&(t, seed)| {
            let mut cfg = template.clone();
            cfg.t = t;
            cfg.seed = seed;
            cfg.output = None;
            let out = run_experiment(&cfg)?;
            log::info!("T = {t}, seed = {seed}: regret {:.4}", out.report.final_regret());
            Ok(ScalingRow { t, seed, regret: out.report.final_regret() })
        })
        .collect();
    Ok(summarize(rows?))
}
