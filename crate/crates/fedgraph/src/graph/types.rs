//! Core graph domain types.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub type NodeId = u32;

pub const NODE_FEATURE_DIM: usize = 15;
pub const EDGE_FEATURE_DIM: usize = 8;

/// One aggregated directed edge: all transactions between a (src, dst) pair
/// collapsed into a feature summary. `timestamp` is the first transaction's
/// time in seconds from dataset start.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub features: Vec<f64>,
    pub timestamp: i64,
}

/// Attributed transaction graph. `nodes[i]` names the node whose features sit
/// in `node_features` row i; ids need not be contiguous (subgraphs keep the
/// parent's ids).
#[derive(Clone, Debug, PartialEq)]
pub struct TransactionGraph {
    pub nodes: Vec<NodeId>,
    pub node_features: Mat,
    pub labels: Vec<u8>,
    pub edges: Vec<Edge>,
    /// Jurisdiction the generator assigned each node to; same order as `nodes`.
    pub home_jurisdiction: Vec<u32>,
}

impl TransactionGraph {
    pub fn empty(feature_dim: usize) -> Self {
        TransactionGraph {
            nodes: Vec::new(),
            node_features: Mat::zeros(0, feature_dim),
            labels: Vec::new(),
            edges: Vec::new(),
            home_jurisdiction: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Map from node id to row index.
    pub fn index_map(&self) -> BTreeMap<NodeId, usize> {
        self.nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect()
    }

    /// Check the structural invariants: consistent dimensions, binary labels,
    /// edge endpoints that exist.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.node_features.rows != n {
            return Err(Error::DimensionMismatch {
                context: "node feature rows".into(),
                expected: n,
                actual: self.node_features.rows,
            });
        }
        if self.labels.len() != n {
            return Err(Error::DimensionMismatch {
                context: "label count".into(),
                expected: n,
                actual: self.labels.len(),
            });
        }
        if !self.home_jurisdiction.is_empty() && self.home_jurisdiction.len() != n {
            return Err(Error::DimensionMismatch {
                context: "jurisdiction count".into(),
                expected: n,
                actual: self.home_jurisdiction.len(),
            });
        }
        if let Some(l) = self.labels.iter().find(|&&l| l > 1) {
            return Err(Error::Config(format!("label {l} outside {{0,1}}")));
        }
        let ids: BTreeSet<NodeId> = self.nodes.iter().copied().collect();
        if ids.len() != n {
            return Err(Error::Config("duplicate node ids".into()));
        }
        let d_e = self.edges.first().map(|e| e.features.len());
        for e in &self.edges {
            if !ids.contains(&e.src) {
                return Err(Error::UnknownNode(e.src));
            }
            if !ids.contains(&e.dst) {
                return Err(Error::UnknownNode(e.dst));
            }
            if Some(e.features.len()) != d_e {
                return Err(Error::DimensionMismatch {
                    context: "edge feature dims".into(),
                    expected: d_e.unwrap_or(0),
                    actual: e.features.len(),
                });
            }
        }
        Ok(())
    }

    /// Undirected adjacency as row-index lists, parallel edge entries kept.
    pub fn undirected_adjacency(&self) -> Vec<Vec<usize>> {
        let idx = self.index_map();
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            let s = idx[&e.src];
            let d = idx[&e.dst];
            if s != d {
                adj[s].push(d);
                adj[d].push(s);
            }
        }
        adj
    }

    /// Induced subgraph of everything within `h` undirected hops of `center`.
    pub fn khop_subgraph(&self, center: NodeId, h: usize) -> Result<TransactionGraph> {
        let idx = self.index_map();
        let &start = idx.get(&center).ok_or(Error::UnknownNode(center))?;
        let adj = self.undirected_adjacency();

        let mut dist = vec![usize::MAX; self.nodes.len()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            if dist[u] == h {
                continue;
            }
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }

        let keep: Vec<usize> = (0..self.nodes.len()).filter(|&i| dist[i] != usize::MAX).collect();
        let kept_ids: BTreeSet<NodeId> = keep.iter().map(|&i| self.nodes[i]).collect();

        let mut features = Mat::zeros(keep.len(), self.node_features.cols);
        for (row, &i) in keep.iter().enumerate() {
            features.row_mut(row).copy_from_slice(self.node_features.row(i));
        }
        Ok(TransactionGraph {
            nodes: keep.iter().map(|&i| self.nodes[i]).collect(),
            node_features: features,
            labels: keep.iter().map(|&i| self.labels[i]).collect(),
            edges: self
                .edges
                .iter()
                .filter(|e| kept_ids.contains(&e.src) && kept_ids.contains(&e.dst))
                .cloned()
                .collect(),
            home_jurisdiction: if self.home_jurisdiction.is_empty() {
                Vec::new()
            } else {
                keep.iter().map(|&i| self.home_jurisdiction[i]).collect()
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum ScenarioKind {
    PrivilegeEscalation,
    CollusionNetwork,
    LaunderingChain,
    OffHoursActivity,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::PrivilegeEscalation,
        ScenarioKind::CollusionNetwork,
        ScenarioKind::LaunderingChain,
        ScenarioKind::OffHoursActivity,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::PrivilegeEscalation => "privilege_escalation",
            ScenarioKind::CollusionNetwork => "collusion_network",
            ScenarioKind::LaunderingChain => "laundering_chain",
            ScenarioKind::OffHoursActivity => "off_hours_activity",
        }
    }

    /// Distinct participant accounts the template needs.
    pub fn min_participants(&self) -> usize {
        match self {
            ScenarioKind::PrivilegeEscalation => 1,
            ScenarioKind::CollusionNetwork => 3,
            ScenarioKind::LaunderingChain => 4,
            ScenarioKind::OffHoursActivity => 1,
        }
    }
}

/// A planted threat pattern and the transactions that realize it.
#[derive(Clone, Debug)]
pub struct ThreatScenario {
    pub kind: ScenarioKind,
    pub participants: Vec<NodeId>,
    /// (src, dst, timestamp) of each planted transaction, in planted order.
    pub planted_edges: Vec<(NodeId, NodeId, i64)>,
}

/// One jurisdiction's private view after partitioning.
#[derive(Clone, Debug)]
pub struct JurisdictionView {
    pub nodes: Vec<NodeId>,
    pub internal_edges: Vec<Edge>,
    pub features: Mat,
    pub labels: Vec<u8>,
}

#[derive(Clone, Debug)]
pub struct JurisdictionPartition {
    pub k: usize,
    /// node id -> jurisdiction index
    pub assignment: BTreeMap<NodeId, u32>,
    pub local_views: Vec<JurisdictionView>,
    pub cross_border_edges: Vec<Edge>,
}

impl JurisdictionPartition {
    pub fn cross_border_fraction(&self, total_edges: usize) -> f64 {
        if total_edges == 0 {
            0.0
        } else {
            self.cross_border_edges.len() as f64 / total_edges as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_with_edges(n: u32, pairs: &[(u32, u32)]) -> TransactionGraph {
        TransactionGraph {
            nodes: (0..n).collect(),
            node_features: Mat::zeros(n as usize, 2),
            labels: vec![0; n as usize],
            edges: pairs
                .iter()
                .map(|&(s, d)| Edge {
                    src: s,
                    dst: d,
                    features: vec![1.0; 3],
                    timestamp: 0,
                })
                .collect(),
            home_jurisdiction: vec![0; n as usize],
        }
    }

    #[test]
    fn khop_zero_returns_only_center() {
        let g = graph_with_edges(4, &[(0, 1), (1, 2), (2, 3)]);
        let sub = g.khop_subgraph(1, 0).unwrap();
        assert_eq!(sub.nodes, vec![1]);
        assert!(sub.edges.is_empty());
    }

    #[test]
    fn khop_one_covers_a_star() {
        let g = graph_with_edges(5, &[(0, 1), (0, 2), (3, 0), (4, 0)]);
        let sub = g.khop_subgraph(0, 1).unwrap();
        assert_eq!(sub.nodes, vec![0, 1, 2, 3, 4]);
        assert_eq!(sub.edges.len(), 4);
    }

    #[test]
    fn khop_matches_independent_bfs_oracle() {
        // Fixed 10-node graph; the oracle walks raw edge tuples with no shared
        // adjacency code.
        let pairs = [
            (0u32, 1u32), (1, 2), (2, 3), (3, 4), (4, 0),
            (5, 1), (6, 5), (7, 6), (8, 9), (9, 7), (2, 7),
        ];
        let g = graph_with_edges(10, &pairs);

        let mut frontier: BTreeSet<u32> = BTreeSet::from([0]);
        let mut reached = frontier.clone();
        for _ in 0..2 {
            let mut next = BTreeSet::new();
            for &(s, d) in &pairs {
                if frontier.contains(&s) && !reached.contains(&d) {
                    next.insert(d);
                }
                if frontier.contains(&d) && !reached.contains(&s) {
                    next.insert(s);
                }
            }
            reached.extend(next.iter().copied());
            frontier = next;
        }

        let sub = g.khop_subgraph(0, 2).unwrap();
        let got: BTreeSet<u32> = sub.nodes.iter().copied().collect();
        assert_eq!(got, reached);
        for e in &sub.edges {
            assert!(reached.contains(&e.src) && reached.contains(&e.dst));
        }
    }

    #[test]
    fn khop_node_set_is_monotone_in_h() {
        let pairs = [(0u32, 1u32), (1, 2), (2, 3), (3, 4), (1, 5), (5, 6), (6, 0)];
        let g = graph_with_edges(8, &pairs);
        let mut prev = 0;
        for h in 0..5 {
            let size = g.khop_subgraph(0, h).unwrap().nodes.len();
            assert!(size >= prev, "h={h}");
            prev = size;
        }
    }

    #[test]
    fn khop_unknown_center_errors() {
        let g = graph_with_edges(3, &[(0, 1)]);
        assert!(matches!(
            g.khop_subgraph(99, 1),
            Err(crate::Error::UnknownNode(99))
        ));
    }

    #[test]
    fn validate_rejects_dangling_edges_and_bad_labels() {
        let mut g = graph_with_edges(3, &[(0, 7)]);
        assert!(matches!(g.validate(), Err(crate::Error::UnknownNode(7))));
        g.edges.clear();
        g.labels[1] = 2;
        assert!(g.validate().is_err());
    }
}
