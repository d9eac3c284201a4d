//! Deterministic CSV and JSONL writers for experiment results. Every file
//! has a fixed header, `\n` line endings, and floats printed with six
//! decimal places so reruns with the same seed are byte-identical.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::federation::RoundRecord;
use crate::harness::metrics::MetricsReport;
use crate::harness::runners::{ScalePoint, SweepPoint};

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_auc(auc: Option<f64>) -> String {
    auc.map_or_else(|| "NA".to_string(), fmt)
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for line in lines {
        out.push_str(line);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

fn metrics_fields(m: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        fmt(m.accuracy),
        fmt(m.precision),
        fmt(m.recall),
        fmt(m.f1),
        fmt_auc(m.auc),
        m.true_positives,
        m.false_positives,
        m.true_negatives,
        m.false_negatives,
        fmt(m.threshold),
    )
}

pub fn write_comparison(
    path: &Path,
    rows: &[(String, MetricsReport)],
    split_hash: &str,
) -> Result<()> {
    let mut lines = vec![
        "method,accuracy,precision,recall,f1,auc,tp,fp,tn,fn,threshold,split_hash".to_string(),
    ];
    for (name, m) in rows {
        lines.push(format!("{name},{},{split_hash}", metrics_fields(m)));
    }
    write_lines(path, &lines)
}

pub fn write_ablation(
    path: &Path,
    rows: &[(String, MetricsReport)],
    split_hash: &str,
) -> Result<()> {
    let mut lines = vec![
        "variant,accuracy,precision,recall,f1,auc,tp,fp,tn,fn,threshold,split_hash".to_string(),
    ];
    for (name, m) in rows {
        lines.push(format!("{name},{},{split_hash}", metrics_fields(m)));
    }
    write_lines(path, &lines)
}

fn fmt_epsilon(eps: f64) -> String {
    if eps.is_infinite() {
        "inf".to_string()
    } else {
        fmt(eps)
    }
}

pub fn write_sweep(path: &Path, points: &[SweepPoint], split_hash: &str) -> Result<()> {
    let mut lines = vec![
        "epsilon,sigma,accuracy,f1,eps_total_advanced,eps_total_heuristic,split_hash".to_string(),
    ];
    for p in points {
        lines.push(format!(
            "{},{},{},{},{},{},{split_hash}",
            fmt_epsilon(p.epsilon),
            fmt(p.sigma),
            fmt(p.accuracy),
            fmt(p.f1),
            fmt(p.eps_total_advanced),
            fmt(p.eps_total_heuristic),
        ));
    }
    write_lines(path, &lines)
}

pub fn write_scale(path: &Path, points: &[ScalePoint]) -> Result<()> {
    let mut lines = vec!["clients,seconds_per_round,bytes_per_round".to_string()];
    for p in points {
        lines.push(format!(
            "{},{},{}",
            p.clients,
            fmt(p.seconds_per_round),
            p.bytes_per_round
        ));
    }
    write_lines(path, &lines)
}

pub fn write_importance(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut lines = vec!["rank,feature,importance".to_string()];
    for (rank, (name, v)) in rows.iter().enumerate() {
        lines.push(format!("{},{name},{}", rank + 1, fmt(*v)));
    }
    write_lines(path, &lines)
}

/// Per-round training trace. Gate-weight columns widen with the client
/// count; wall-clock time is deliberately not recorded so identical runs
/// produce identical files.
pub fn write_history(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let n_clients = records
        .first()
        .map_or(0, |r| r.mean_gate_weights.len());
    let mut header = String::from(
        "round,train_loss,val_loss,val_accuracy,eps_round,eps_cum_advanced,eps_cum_heuristic,bytes_exchanged",
    );
    for k in 0..n_clients {
        header.push_str(&format!(",weight_{k}"));
    }
    let mut lines = vec![header];
    for r in records {
        let train_loss = if r.per_client_loss.is_empty() {
            0.0
        } else {
            r.per_client_loss.iter().sum::<f64>() / r.per_client_loss.len() as f64
        };
        let mut line = format!(
            "{},{},{},{},{},{},{},{}",
            r.round,
            fmt(train_loss),
            fmt(r.val_loss),
            fmt(r.val_accuracy),
            fmt(r.eps_round),
            fmt(r.eps_cum_advanced),
            fmt(r.eps_cum_heuristic),
            r.bytes_exchanged,
        );
        for w in &r.mean_gate_weights {
            line.push_str(&format!(",{}", fmt(*w)));
        }
        lines.push(line);
    }
    write_lines(path, &lines)
}
