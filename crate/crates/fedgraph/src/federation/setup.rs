//! Builds per-client training state from a partitioned dataset: feature
//! views standardized on whole-graph statistics, ghost slots for boundary
//! neighbors, and a routing table telling each round's exchange which
//! sender node feeds which ghost.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::graph::{DatasetSplit, JurisdictionPartition, NodeId, TransactionGraph};
use crate::gnn::{GhostNeighbor, GraphView, ViewEdge};
use crate::linalg::Mat;

/// One jurisdiction's training state.
#[derive(Clone, Debug)]
pub struct FedClient {
    pub id: usize,
    pub jurisdiction: u32,
    pub view: GraphView,
    /// Global node ids in local row order.
    pub node_ids: Vec<NodeId>,
    pub train_nodes: Vec<usize>,
    pub train_labels: Vec<u8>,
    pub val_nodes: Vec<usize>,
    pub val_labels: Vec<u8>,
    /// Layer representations from the most recent evaluation pass; boundary
    /// messages for the next round are derived from these.
    pub prev_reps: Vec<Mat>,
}

/// Where one ghost slot's messages come from.
#[derive(Clone, Copy, Debug)]
pub struct GhostRoute {
    pub receiver: usize,
    pub ghost_idx: usize,
    pub sender: usize,
    pub sender_local: usize,
}

/// Everything the round loop needs: clients, boundary routing, and a
/// whole-graph oracle view the server uses for validation metrics and
/// gating training.
#[derive(Clone, Debug)]
pub struct FederationSetup {
    pub clients: Vec<FedClient>,
    pub routes: Vec<GhostRoute>,
    pub global_view: GraphView,
    pub global_index: BTreeMap<NodeId, usize>,
    pub val_nodes: Vec<usize>,
    pub val_labels: Vec<u8>,
    pub train_sizes: Vec<usize>,
}

/// Column-wise standardization. Constant columns are centered and left at
/// unit scale rather than divided by zero.
pub fn standardize_columns(m: &Mat) -> (Mat, Vec<f64>, Vec<f64>) {
    let (rows, cols) = (m.rows, m.cols);
    let mut means = vec![0.0; cols];
    let mut stds = vec![1.0; cols];
    if rows == 0 {
        return (m.clone(), means, stds);
    }
    for c in 0..cols {
        let mut sum = 0.0;
        for r in 0..rows {
            sum += m.at(r, c);
        }
        means[c] = sum / rows as f64;
        let mut var = 0.0;
        for r in 0..rows {
            let d = m.at(r, c) - means[c];
            var += d * d;
        }
        let std = (var / rows as f64).sqrt();
        stds[c] = if std > 1e-9 { std } else { 1.0 };
    }
    let mut out = m.clone();
    for r in 0..rows {
        for c in 0..cols {
            *out.at_mut(r, c) = (m.at(r, c) - means[c]) / stds[c];
        }
    }
    (out, means, stds)
}

fn standardize_with(features: &[f64], means: &[f64], stds: &[f64]) -> Vec<f64> {
    features
        .iter()
        .zip(means.iter().zip(stds))
        .map(|(&v, (&m, &s))| (v - m) / s)
        .collect()
}

/// Whole-graph oracle view: standardized node features with every edge
/// internal, plus the id → row index. This is the view checkpointed models
/// are applied to, standardized identically to training.
pub fn global_view(graph: &TransactionGraph) -> Result<(GraphView, BTreeMap<NodeId, usize>)> {
    graph.validate()?;
    let global_index = graph.index_map();
    let (node_features, _, _) = standardize_columns(&graph.node_features);
    let edge_mat = Mat::from_rows(graph.edges.iter().map(|e| e.features.clone()).collect());
    let (_, edge_means, edge_stds) = standardize_columns(&edge_mat);
    let mut view = GraphView::from_features(node_features);
    for e in &graph.edges {
        let (&a, &b) = match (global_index.get(&e.src), global_index.get(&e.dst)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::UnknownNode(e.src)),
        };
        view.edges.push(ViewEdge {
            a,
            b,
            features: standardize_with(&e.features, &edge_means, &edge_stds),
        });
    }
    Ok((view, global_index))
}

/// Build client views, ghost routing, and the oracle view from a dataset,
/// its jurisdiction partition, and a train/val/test split.
pub fn build_federation(
    graph: &TransactionGraph,
    partition: &JurisdictionPartition,
    split: &DatasetSplit,
) -> Result<FederationSetup> {
    let (global_view, global_index) = global_view(graph)?;
    let node_features = &global_view.features;

    // Edge-feature statistics come from every edge in the graph so both
    // sides of a boundary standardize identically.
    let edge_mat = Mat::from_rows(graph.edges.iter().map(|e| e.features.clone()).collect());
    let (_, edge_means, edge_stds) = standardize_columns(&edge_mat);

    let train_set: BTreeSet<NodeId> = split.train.iter().copied().collect();
    let val_set: BTreeSet<NodeId> = split.val.iter().copied().collect();

    let mut val_nodes = Vec::new();
    let mut val_labels = Vec::new();
    for (i, id) in graph.nodes.iter().enumerate() {
        if val_set.contains(id) {
            val_nodes.push(i);
            val_labels.push(graph.labels[i]);
        }
    }

    // Per-client views over local nodes and internal edges.
    let mut clients = Vec::with_capacity(partition.k);
    let mut local_index: Vec<BTreeMap<NodeId, usize>> = Vec::with_capacity(partition.k);
    for (k, jview) in partition.local_views.iter().enumerate() {
        let index: BTreeMap<NodeId, usize> = jview
            .nodes
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let rows = jview
            .nodes
            .iter()
            .map(|id| {
                let &g = global_index.get(id).ok_or(Error::UnknownNode(*id))?;
                Ok(node_features.row(g).to_vec())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut view = GraphView::from_features(Mat::from_rows(rows));
        for e in &jview.internal_edges {
            view.edges.push(ViewEdge {
                a: index[&e.src],
                b: index[&e.dst],
                features: standardize_with(&e.features, &edge_means, &edge_stds),
            });
        }
        let mut train_nodes = Vec::new();
        let mut train_labels = Vec::new();
        let mut val_nodes_k = Vec::new();
        let mut val_labels_k = Vec::new();
        for (i, id) in jview.nodes.iter().enumerate() {
            if train_set.contains(id) {
                train_nodes.push(i);
                train_labels.push(jview.labels[i]);
            } else if val_set.contains(id) {
                val_nodes_k.push(i);
                val_labels_k.push(jview.labels[i]);
            }
        }
        clients.push(FedClient {
            id: k,
            jurisdiction: k as u32,
            view,
            node_ids: jview.nodes.clone(),
            train_nodes,
            train_labels,
            val_nodes: val_nodes_k,
            val_labels: val_labels_k,
            prev_reps: Vec::new(),
        });
        local_index.push(index);
    }

    // Each boundary edge appears as a ghost on both sides: the remote
    // endpoint's messages stand in for the neighbor the local side cannot
    // see. Edge features are local knowledge (the receiver is a party to
    // the transaction), so they are filled in plaintext receiver-side.
    let mut routes = Vec::new();
    for e in &partition.cross_border_edges {
        let js = partition.assignment[&e.src] as usize;
        let jd = partition.assignment[&e.dst] as usize;
        let z = standardize_with(&e.features, &edge_means, &edge_stds);
        for (receiver, local_id, sender, remote_id) in
            [(jd, e.dst, js, e.src), (js, e.src, jd, e.dst)]
        {
            let ghost_idx = clients[receiver].view.ghosts.len();
            clients[receiver].view.ghosts.push(GhostNeighbor {
                local: local_index[receiver][&local_id],
                edge_features: z.clone(),
                messages: Vec::new(),
            });
            routes.push(GhostRoute {
                receiver,
                ghost_idx,
                sender,
                sender_local: local_index[sender][&remote_id],
            });
        }
    }

    let train_sizes = clients.iter().map(|c| c.train_nodes.len()).collect();
    Ok(FederationSetup {
        clients,
        routes,
        global_view,
        global_index,
        val_nodes,
        val_labels,
        train_sizes,
    })
}
