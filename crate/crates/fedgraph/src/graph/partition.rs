//! Jurisdiction partitioning.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::rng::shuffle;
use crate::graph::types::{JurisdictionPartition, JurisdictionView, NodeId, TransactionGraph};
use crate::linalg::Mat;
use crate::rng::derive_rng;

/// Split a graph across `k` jurisdictions. When the graph carries a generator
/// assignment with exactly `k` distinct jurisdictions it is honored (that is
/// what keeps the planted cross-border fraction meaningful); otherwise nodes
/// are dealt uniformly at random into parts whose sizes differ by at most one.
pub fn partition_graph(graph: &TransactionGraph, k: usize, seed: u64) -> Result<JurisdictionPartition> {
    let n = graph.n_nodes();
    if k < 1 {
        return Err(Error::Config("partition needs K >= 1".into()));
    }
    if k > n {
        return Err(Error::Config(format!("K {k} exceeds node count {n}")));
    }

    let stored_matches = graph.home_jurisdiction.len() == n && {
        let distinct: std::collections::BTreeSet<u32> = graph.home_jurisdiction.iter().copied().collect();
        distinct.len() == k && graph.home_jurisdiction.iter().all(|&j| (j as usize) < k)
    };

    let mut assignment_by_index = vec![0u32; n];
    if stored_matches {
        assignment_by_index.copy_from_slice(&graph.home_jurisdiction);
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        shuffle(&mut order, &mut derive_rng(seed, "partition", &[k as u64]));
        let base = n / k;
        let extra = n % k;
        let mut pos = 0;
        for j in 0..k {
            let size = base + usize::from(j < extra);
            for _ in 0..size {
                assignment_by_index[order[pos]] = j as u32;
                pos += 1;
            }
        }
    }

    let mut assignment: BTreeMap<NodeId, u32> = BTreeMap::new();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &id) in graph.nodes.iter().enumerate() {
        assignment.insert(id, assignment_by_index[i]);
        members[assignment_by_index[i] as usize].push(i);
    }

    let mut local_views = Vec::with_capacity(k);
    for rows in members.iter() {
        let mut features = Mat::zeros(rows.len(), graph.node_features.cols);
        for (r, &i) in rows.iter().enumerate() {
            features.row_mut(r).copy_from_slice(graph.node_features.row(i));
        }
        local_views.push(JurisdictionView {
            nodes: rows.iter().map(|&i| graph.nodes[i]).collect(),
            internal_edges: Vec::new(),
            features,
            labels: rows.iter().map(|&i| graph.labels[i]).collect(),
        });
    }

    let mut cross_border_edges = Vec::new();
    for e in &graph.edges {
        let js = assignment[&e.src];
        let jd = assignment[&e.dst];
        if js == jd {
            local_views[js as usize].internal_edges.push(e.clone());
        } else {
            cross_border_edges.push(e.clone());
        }
    }

    Ok(JurisdictionPartition {
        k,
        assignment,
        local_views,
        cross_border_edges,
    })
}
