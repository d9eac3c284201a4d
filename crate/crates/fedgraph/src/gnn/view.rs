//! Graph views consumed by the models: feature rows for locally held nodes,
//! edges between them, and boundary messages standing in for neighbors held
//! by other parties.

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// An undirected edge between two local node indices. Both endpoints treat
/// the other as a neighbor and share the same edge features.
#[derive(Clone, Debug)]
pub struct ViewEdge {
    pub a: usize,
    pub b: usize,
    pub features: Vec<f64>,
}

/// A foreign neighbor visible only through precomputed per-layer messages.
///
/// `messages[layer][head]` holds the sender-side product W^(layer) · h_foreign
/// at the layer's per-head output width. The entries are constants during
/// local training: no gradient flows through them, and they are not refreshed
/// as local weights drift.
#[derive(Clone, Debug)]
pub struct GhostNeighbor {
    /// Local node the foreign neighbor is attached to.
    pub local: usize,
    pub edge_features: Vec<f64>,
    pub messages: Vec<Vec<Vec<f64>>>,
}

/// What one party sees of the graph.
#[derive(Clone, Debug)]
pub struct GraphView {
    pub features: Mat,
    pub edges: Vec<ViewEdge>,
    pub ghosts: Vec<GhostNeighbor>,
}

impl GraphView {
    pub fn n_nodes(&self) -> usize {
        self.features.rows
    }

    /// Local-only view with no edges, used by feature-only baselines and
    /// fixtures.
    pub fn from_features(features: Mat) -> Self {
        GraphView {
            features,
            edges: Vec::new(),
            ghosts: Vec::new(),
        }
    }

    pub fn validate(&self, edge_dim: usize) -> Result<()> {
        let n = self.n_nodes();
        for (i, e) in self.edges.iter().enumerate() {
            if e.a >= n || e.b >= n {
                return Err(Error::DimensionMismatch {
                    context: format!("view edge {i} endpoints"),
                    expected: n,
                    actual: e.a.max(e.b) + 1,
                });
            }
            if e.features.len() != edge_dim {
                return Err(Error::DimensionMismatch {
                    context: format!("view edge {i} features"),
                    expected: edge_dim,
                    actual: e.features.len(),
                });
            }
        }
        for (g, ghost) in self.ghosts.iter().enumerate() {
            if ghost.local >= n {
                return Err(Error::UnknownNode(ghost.local as u32));
            }
            if ghost.edge_features.len() != edge_dim {
                return Err(Error::DimensionMismatch {
                    context: format!("ghost {g} edge features"),
                    expected: edge_dim,
                    actual: ghost.edge_features.len(),
                });
            }
        }
        Ok(())
    }
}

/// One entry in a node's attention neighborhood.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeighborRef {
    /// The node itself; edge features are an all-zero vector.
    SelfLoop,
    /// The other endpoint of an internal edge.
    Internal { node: usize, edge: usize },
    /// A foreign neighbor represented by its message vectors.
    Ghost { ghost: usize },
}

/// Per-node neighbor lists in a fixed order: self-loop first, then internal
/// edges in edge order (an edge contributes to both endpoints), then ghosts
/// in ghost order. Every node therefore has at least one neighbor.
pub fn neighborhoods(view: &GraphView) -> Vec<Vec<NeighborRef>> {
    let n = view.n_nodes();
    let mut nbrs: Vec<Vec<NeighborRef>> = (0..n).map(|_| vec![NeighborRef::SelfLoop]).collect();
    for (ei, e) in view.edges.iter().enumerate() {
        nbrs[e.a].push(NeighborRef::Internal { node: e.b, edge: ei });
        nbrs[e.b].push(NeighborRef::Internal { node: e.a, edge: ei });
    }
    for (gi, g) in view.ghosts.iter().enumerate() {
        nbrs[g.local].push(NeighborRef::Ghost { ghost: gi });
    }
    nbrs
}
