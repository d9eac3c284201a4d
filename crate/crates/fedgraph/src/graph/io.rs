//! Dataset directory format: `nodes.csv`, `edges.csv`, `meta.json`.
//!
//! Floats are written with 17 significant digits so a save/load round trip is
//! bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::generator::GeneratorConfig;
use crate::graph::types::{Edge, TransactionGraph};
use crate::linalg::Mat;

/// 17 significant digits: enough to reconstruct any finite f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetaCounts {
    pub nodes: usize,
    pub edges: usize,
    pub anomalies: usize,
    pub cross_border_edges: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetaDims {
    pub node: usize,
    pub edge: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// Generator config echo; present when the dataset came from the
    /// generator, which makes raw transaction history regenerable bit-exactly.
    pub config: Option<GeneratorConfig>,
    pub seed: u64,
    pub counts: MetaCounts,
    pub feature_dims: MetaDims,
}

impl DatasetMeta {
    pub fn for_graph(graph: &TransactionGraph, config: Option<&GeneratorConfig>) -> Self {
        let idx = graph.index_map();
        let cross = graph
            .edges
            .iter()
            .filter(|e| {
                let js = graph.home_jurisdiction.get(idx[&e.src]).copied().unwrap_or(0);
                let jd = graph.home_jurisdiction.get(idx[&e.dst]).copied().unwrap_or(0);
                js != jd
            })
            .count();
        DatasetMeta {
            config: config.cloned(),
            seed: config.map(|c| c.seed).unwrap_or(0),
            counts: MetaCounts {
                nodes: graph.n_nodes(),
                edges: graph.edges.len(),
                anomalies: graph.labels.iter().filter(|&&l| l == 1).count(),
                cross_border_edges: cross,
            },
            feature_dims: MetaDims {
                node: graph.node_features.cols,
                edge: graph.edges.first().map(|e| e.features.len()).unwrap_or(8),
            },
        }
    }
}

pub fn save_dataset(
    graph: &TransactionGraph,
    config: Option<&GeneratorConfig>,
    dir: &Path,
) -> Result<()> {
    graph.validate()?;
    fs::create_dir_all(dir)?;

    let d = graph.node_features.cols;
    let mut nodes_csv = fs::File::create(dir.join("nodes.csv"))?;
    let mut header = String::from("node_id");
    for i in 0..d {
        header.push_str(&format!(",f{i}"));
    }
    header.push_str(",label,jurisdiction\n");
    nodes_csv.write_all(header.as_bytes())?;
    for (i, &id) in graph.nodes.iter().enumerate() {
        let mut line = id.to_string();
        for v in graph.node_features.row(i) {
            line.push(',');
            line.push_str(&fmt_f64(*v));
        }
        let j = graph.home_jurisdiction.get(i).copied().unwrap_or(0);
        line.push_str(&format!(",{},{j}\n", graph.labels[i]));
        nodes_csv.write_all(line.as_bytes())?;
    }

    let d_e = graph.edges.first().map(|e| e.features.len()).unwrap_or(8);
    let mut edges_csv = fs::File::create(dir.join("edges.csv"))?;
    let mut header = String::from("src,dst");
    for i in 0..d_e {
        header.push_str(&format!(",e{i}"));
    }
    header.push_str(",first_ts\n");
    edges_csv.write_all(header.as_bytes())?;
    for e in &graph.edges {
        let mut line = format!("{},{}", e.src, e.dst);
        for v in &e.features {
            line.push(',');
            line.push_str(&fmt_f64(*v));
        }
        line.push_str(&format!(",{}\n", e.timestamp));
        edges_csv.write_all(line.as_bytes())?;
    }

    let meta = DatasetMeta::for_graph(graph, config);
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<(TransactionGraph, DatasetMeta)> {
    let nodes_path = dir.join("nodes.csv");
    let nodes_text = fs::read_to_string(&nodes_path)?;
    let mut lines = nodes_text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(&nodes_path, 1, "empty file"))?;
    let n_cols = header.split(',').count();
    if n_cols < 3 {
        return Err(parse_err(&nodes_path, 1, "header needs node_id, features, label, jurisdiction"));
    }
    let d = n_cols - 3;

    let mut nodes = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut jurisdictions = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n_cols {
            return Err(parse_err(
                &nodes_path,
                lineno,
                &format!("expected {n_cols} fields, got {}", fields.len()),
            ));
        }
        nodes.push(parse_field::<u32>(fields[0], "node_id", &nodes_path, lineno)?);
        let mut row = Vec::with_capacity(d);
        for (fi, raw) in fields[1..1 + d].iter().enumerate() {
            row.push(parse_field::<f64>(raw, &format!("f{fi}"), &nodes_path, lineno)?);
        }
        rows.push(row);
        labels.push(parse_field::<u8>(fields[1 + d], "label", &nodes_path, lineno)?);
        jurisdictions.push(parse_field::<u32>(fields[2 + d], "jurisdiction", &nodes_path, lineno)?);
    }

    let edges_path = dir.join("edges.csv");
    let edges_text = fs::read_to_string(&edges_path)?;
    let mut lines = edges_text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(&edges_path, 1, "empty file"))?;
    let e_cols = header.split(',').count();
    if e_cols < 3 {
        return Err(parse_err(&edges_path, 1, "header needs src, dst, features, first_ts"));
    }
    let d_e = e_cols - 3;

    let mut edges = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != e_cols {
            return Err(parse_err(
                &edges_path,
                lineno,
                &format!("expected {e_cols} fields, got {}", fields.len()),
            ));
        }
        let src = parse_field::<u32>(fields[0], "src", &edges_path, lineno)?;
        let dst = parse_field::<u32>(fields[1], "dst", &edges_path, lineno)?;
        let mut features = Vec::with_capacity(d_e);
        for (fi, raw) in fields[2..2 + d_e].iter().enumerate() {
            features.push(parse_field::<f64>(raw, &format!("e{fi}"), &edges_path, lineno)?);
        }
        let timestamp = parse_field::<i64>(fields[2 + d_e], "first_ts", &edges_path, lineno)?;
        edges.push(Edge {
            src,
            dst,
            features,
            timestamp,
        });
    }

    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path)?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text)
        .map_err(|e| parse_err(&meta_path, 1, &format!("invalid meta.json: {e}")))?;

    let n = nodes.len();
    let mut node_features = Mat::zeros(n, d);
    for (i, row) in rows.into_iter().enumerate() {
        node_features.row_mut(i).copy_from_slice(&row);
    }
    let graph = TransactionGraph {
        nodes,
        node_features,
        labels,
        edges,
        home_jurisdiction: jurisdictions,
    };
    graph.validate()?;
    Ok((graph, meta))
}

fn parse_err(path: &Path, line: usize, msg: &str) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.to_string(),
    }
}

fn parse_field<T: std::str::FromStr>(raw: &str, field: &str, path: &Path, line: usize) -> Result<T> {
    raw.parse::<T>()
        .map_err(|_| parse_err(path, line, &format!("field {field}: cannot parse {raw:?}")))
}
