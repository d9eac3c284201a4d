//! Experiment runners: method comparison, component ablation, privacy sweep,
//! scalability measurement, and permutation feature importance. Each runner
//! is a deterministic function of its config and writes one CSV.

use std::path::Path;

use crate::error::{Error, Result};
use crate::federation::PrivacyMode;
use crate::gnn::{GraphView, Predictor};
use crate::graph::NODE_FEATURE_DIM;
use crate::harness::config::{AblationFlags, ExperimentConfig};
use crate::harness::methods::{
    prepare, run_method, train_full_gat, Method, MethodOutcome, PreparedExperiment,
};
use crate::harness::metrics::{compute_metrics, MetricsReport};
use crate::harness::report;
use crate::privacy::noise_sigma;
use crate::rng::{derive_rng, shuffle};

/// Human-readable names for the generated node feature columns, in column
/// order: graph structure, flow statistics, timing, cross-border exposure,
/// account attributes, then the pure-noise tail.
pub fn node_feature_names() -> [&'static str; NODE_FEATURE_DIM] {
    [
        "degree",
        "out_ratio",
        "betweenness",
        "tx_per_day",
        "amount_mean",
        "amount_var",
        "off_hours_frac",
        "cross_border_ratio",
        "account_age_days",
        "role_level",
        "noise_0",
        "noise_1",
        "noise_2",
        "noise_3",
        "noise_4",
    ]
}

/// Train every method on one shared prepared experiment and rank the table
/// by F1 (ties broken by name). Writes `comparison.csv` under `out_dir`.
pub fn run_comparison(config: &ExperimentConfig) -> Result<Vec<(String, MetricsReport)>> {
    let prep = prepare(config)?;
    let mut rows: Vec<(String, MetricsReport)> = Vec::with_capacity(Method::ALL.len());
    for method in Method::ALL {
        let out = run_method(method, &prep, config)?;
        rows.push((method.name().to_string(), out.metrics));
    }
    rows.sort_by(|a, b| b.1.f1.total_cmp(&a.1.f1).then_with(|| a.0.cmp(&b.0)));
    let dir = Path::new(&config.out_dir);
    report::write_comparison(&dir.join("comparison.csv"), &rows, &prep.split_hash)?;
    Ok(rows)
}

pub const ABLATION_VARIANTS: [&str; 6] =
    ["full", "no_agi", "no_moe", "no_attention", "no_privacy", "no_fed"];

fn variant_flags(variant: &str) -> AblationFlags {
    AblationFlags {
        no_agi: variant == "no_agi",
        no_moe: variant == "no_moe",
        no_attention: variant == "no_attention",
        no_privacy: variant == "no_privacy",
        no_fed: variant == "no_fed",
    }
}

/// Knock one component out at a time and rerun the full pipeline on the same
/// prepared experiment. Rows come out in catalog order. Writes
/// `ablation.csv` under `out_dir`.
pub fn run_ablation(config: &ExperimentConfig) -> Result<Vec<(String, MetricsReport)>> {
    let prep = prepare(config)?;
    let mut rows = Vec::with_capacity(ABLATION_VARIANTS.len());
    for variant in ABLATION_VARIANTS {
        let mut varied = config.clone();
        varied.ablation = variant_flags(variant);
        let out = run_method(Method::FedgraphAgi, &prep, &varied)?;
        rows.push((variant.to_string(), out.metrics));
    }
    let dir = Path::new(&config.out_dir);
    report::write_ablation(&dir.join("ablation.csv"), &rows, &prep.split_hash)?;
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub sigma: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub eps_total_advanced: f64,
    pub eps_total_heuristic: f64,
}

/// One full-pipeline run per epsilon with the calibration-formula noise
/// multiplier (any explicit override is cleared). An infinite epsilon is the
/// no-privacy sentinel: the privacy stage is switched off entirely, so that
/// row matches a run without privacy bit for bit. Writes `sweep.csv`.
pub fn run_privacy_sweep(config: &ExperimentConfig, epsilons: &[f64]) -> Result<Vec<SweepPoint>> {
    if epsilons.is_empty() {
        return Err(Error::Config("sweep needs at least one epsilon".into()));
    }
    let prep = prepare(config)?;
    let mut points = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let mut varied = config.clone();
        let sigma = if eps.is_infinite() {
            varied.round.privacy = PrivacyMode::Off;
            0.0
        } else {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("sweep epsilon {eps} must be > 0")));
            }
            if varied.round.privacy == PrivacyMode::Off {
                varied.round.privacy = PrivacyMode::Dp;
            }
            varied.round.dp.epsilon = eps;
            varied.round.dp.sigma_override = None;
            noise_sigma(varied.round.dp.clip_norm, eps, varied.round.dp.delta)
        };
        let out = run_method(Method::FedgraphAgi, &prep, &varied)?;
        let last = out.records.last();
        points.push(SweepPoint {
            epsilon: eps,
            sigma,
            accuracy: out.metrics.accuracy,
            f1: out.metrics.f1,
            eps_total_advanced: last.map_or(0.0, |r| r.eps_cum_advanced),
            eps_total_heuristic: last.map_or(0.0, |r| r.eps_cum_heuristic),
        });
    }
    let dir = Path::new(&config.out_dir);
    report::write_sweep(&dir.join("sweep.csv"), &points, &prep.split_hash)?;
    Ok(points)
}

#[derive(Clone, Debug)]
pub struct ScalePoint {
    pub clients: usize,
    pub seconds_per_round: f64,
    pub bytes_per_round: usize,
}

/// Regenerate the dataset at each client count and measure full-pipeline
/// training rounds: mean wall-clock seconds per round and bytes moved per
/// round (constant across rounds; round 0 is reported). Writes `scale.csv`.
pub fn run_scalability(
    config: &ExperimentConfig,
    client_counts: &[usize],
) -> Result<Vec<ScalePoint>> {
    if client_counts.is_empty() {
        return Err(Error::Config("scalability needs at least one client count".into()));
    }
    let mut points = Vec::with_capacity(client_counts.len());
    for &k in client_counts {
        if k == 0 {
            return Err(Error::Config("client count must be >= 1".into()));
        }
        let mut varied = config.clone();
        varied.dataset.n_jurisdictions = k;
        if k == 1 {
            // A single jurisdiction cannot host cross-border edges.
            varied.dataset.cross_border_fraction = 0.0;
        }
        let prep = prepare(&varied)?;
        let (_, _, records) = train_full_gat(&prep, &varied)?;
        let seconds = if records.is_empty() {
            0.0
        } else {
            records.iter().map(|r| r.wall_clock_secs).sum::<f64>() / records.len() as f64
        };
        points.push(ScalePoint {
            clients: k,
            seconds_per_round: seconds,
            bytes_per_round: records.first().map_or(0, |r| r.bytes_exchanged),
        });
    }
    let dir = Path::new(&config.out_dir);
    report::write_scale(&dir.join("scale.csv"), &points)?;
    Ok(points)
}

/// Mean F1 drop over `n_perms` shuffles of each feature column, negatives
/// clamped to zero, normalized to sum 1 (uniform when nothing matters). The
/// drop is measured on `eval_idx` against `eval_labels`.
pub fn permutation_importance<M: Predictor>(
    model: &M,
    view: &GraphView,
    eval_idx: &[usize],
    eval_labels: &[u8],
    n_perms: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_perms == 0 {
        return Err(Error::Config("importance needs at least one permutation".into()));
    }
    let base_scores: Vec<f64> = {
        let probs = model.predict(view)?;
        eval_idx.iter().map(|&i| probs[i]).collect()
    };
    let base_f1 = compute_metrics(&base_scores, eval_labels, 0.5)?.f1;
    let n = view.features.rows;
    let d = view.features.cols;
    let mut importances = Vec::with_capacity(d);
    for feature in 0..d {
        let mut total_drop = 0.0;
        for perm in 0..n_perms {
            let mut rng = derive_rng(seed, "importance", &[feature as u64, perm as u64]);
            let mut order: Vec<usize> = (0..n).collect();
            shuffle(&mut order, &mut rng);
            let mut shuffled = view.clone();
            for (row, &src) in order.iter().enumerate() {
                *shuffled.features.at_mut(row, feature) = view.features.at(src, feature);
            }
            let probs = model.predict(&shuffled)?;
            let scores: Vec<f64> = eval_idx.iter().map(|&i| probs[i]).collect();
            let f1 = compute_metrics(&scores, eval_labels, 0.5)?.f1;
            total_drop += base_f1 - f1;
        }
        importances.push((total_drop / n_perms as f64).max(0.0));
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in &mut importances {
            *v /= total;
        }
    } else {
        importances.fill(1.0 / d as f64);
    }
    Ok(importances)
}

/// Train the full model, then rank features by permutation importance (10
/// permutations per feature on the test nodes). Writes `importance.csv`.
pub fn run_importance(config: &ExperimentConfig) -> Result<Vec<(String, f64)>> {
    let prep = prepare(config)?;
    let (model, _, _) = train_full_gat(&prep, config)?;
    let importances = permutation_importance(
        &model,
        &prep.fed.global_view,
        &prep.test_idx,
        &prep.test_labels,
        10,
        config.seed,
    )?;
    let names = node_feature_names();
    let mut rows: Vec<(String, f64)> = importances
        .iter()
        .enumerate()
        .map(|(i, &v)| (names.get(i).copied().unwrap_or("feature").to_string(), v))
        .collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let dir = Path::new(&config.out_dir);
    report::write_importance(&dir.join("importance.csv"), &rows)?;
    Ok(rows)
}

/// Full-pipeline training for the `train` subcommand: the prepared
/// experiment plus the method outcome, whose `model` holds the trained
/// weights for checkpointing.
pub fn run_training(config: &ExperimentConfig) -> Result<(PreparedExperiment, MethodOutcome)> {
    let prep = prepare(config)?;
    let out = run_method(Method::FedgraphAgi, &prep, config)?;
    Ok((prep, out))
}
