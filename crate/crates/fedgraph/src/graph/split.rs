//! Train/validation/test splitting, stratified by label within each
//! jurisdiction so every client sees its share of anomalies in every split.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::shuffle;
use crate::graph::types::{NodeId, TransactionGraph};
use crate::rng::derive_rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<NodeId>,
    pub val: Vec<NodeId>,
    pub test: Vec<NodeId>,
}

impl DatasetSplit {
    /// Stable fingerprint of the three id sets; experiment reports embed it so
    /// cross-method comparability is checkable.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (tag, set) in [(0u8, &self.train), (1, &self.val), (2, &self.test)] {
            hasher.update([tag]);
            for id in set {
                hasher.update(id.to_le_bytes());
            }
        }
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn split_dataset(
    graph: &TransactionGraph,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let (r_train, r_val, r_test) = ratios;
    let parts = [r_train, r_val, r_test];
    if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(Error::Config("split ratios must be finite and >= 0".into()));
    }
    let sum: f64 = parts.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios sum to {sum}, expected 1")));
    }
    let nonzero_parts = parts.iter().filter(|r| **r > 0.0).count();

    // Strata keyed by (jurisdiction, label), in node order.
    let mut strata: BTreeMap<(u32, u8), Vec<usize>> = BTreeMap::new();
    for i in 0..graph.n_nodes() {
        let j = graph.home_jurisdiction.get(i).copied().unwrap_or(0);
        strata.entry((j, graph.labels[i])).or_default().push(i);
    }

    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for ((jurisdiction, label), rows) in strata {
        if rows.len() < nonzero_parts {
            return Err(Error::StratumTooSmall {
                jurisdiction,
                label_kind: if label == 1 { "anomalous" } else { "normal" },
                count: rows.len(),
                parts: nonzero_parts,
            });
        }
        let counts = largest_remainder(rows.len(), &parts);
        let mut shuffled = rows;
        shuffle(
            &mut shuffled,
            &mut derive_rng(seed, "split", &[jurisdiction as u64, label as u64]),
        );
        let mut cursor = 0;
        for (part, &take) in counts.iter().enumerate() {
            for &row in &shuffled[cursor..cursor + take] {
                out[part].push(graph.nodes[row]);
            }
            cursor += take;
        }
    }

    for set in out.iter_mut() {
        set.sort_unstable();
    }
    let [train, val, test] = out;
    Ok(DatasetSplit { train, val, test })
}

/// Apportion `total` items across parts proportional to `ratios`: floors
/// first, remaining items to the largest fractional parts (ties favor the
/// earlier part).
pub fn largest_remainder(total: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        counts[order[i % ratios.len()]] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generator::{generate_dataset, GeneratorConfig};
    use crate::graph::types::{Edge, TransactionGraph};
    use crate::linalg::Mat;

    fn labeled_graph(labels: Vec<u8>, homes: Vec<u32>) -> TransactionGraph {
        let n = labels.len() as u32;
        TransactionGraph {
            nodes: (0..n).collect(),
            node_features: Mat::zeros(n as usize, 1),
            labels,
            edges: vec![Edge {
                src: 0,
                dst: 1,
                features: vec![0.0],
                timestamp: 0,
            }],
            home_jurisdiction: homes,
        }
    }

    #[test]
    fn everything_lands_in_train_when_ratio_is_one() {
        let g = labeled_graph(vec![0, 0, 1, 0, 1], vec![0; 5]);
        let s = split_dataset(&g, (1.0, 0.0, 0.0), 3).unwrap();
        assert_eq!(s.train.len(), 5);
        assert!(s.val.is_empty() && s.test.is_empty());
    }

    #[test]
    fn default_profile_sizes_match_ratios_up_to_rounding() {
        let (g, _) = generate_dataset(&GeneratorConfig::default()).unwrap();
        let s = split_dataset(&g, (0.6, 0.2, 0.2), 1).unwrap();
        let n = g.n_nodes() as f64;
        // Rounding happens inside each (jurisdiction, label) stratum, so the
        // totals can drift by at most one per stratum.
        let strata = 20.0;
        assert!((s.train.len() as f64 - 0.6 * n).abs() <= strata);
        assert!((s.val.len() as f64 - 0.2 * n).abs() <= strata);
        assert!((s.test.len() as f64 - 0.2 * n).abs() <= strata);
    }

    #[test]
    fn positive_counts_match_stratified_rounding_oracle() {
        // 20 nodes, 5 positives, one jurisdiction: quotas 3.0/1.0/1.0 for the
        // positive stratum and 9.0/3.0/3.0 for the negative one.
        let mut labels = vec![0u8; 20];
        for i in 0..5 {
            labels[i] = 1;
        }
        let g = labeled_graph(labels, vec![0; 20]);
        let s = split_dataset(&g, (0.6, 0.2, 0.2), 11).unwrap();
        let positives = |ids: &[u32]| ids.iter().filter(|&&i| i < 5).count();
        assert_eq!(positives(&s.train), 3);
        assert_eq!(positives(&s.val), 1);
        assert_eq!(positives(&s.test), 1);
        assert_eq!(s.train.len(), 12);
        assert_eq!(s.val.len(), 4);
        assert_eq!(s.test.len(), 4);
    }

    #[test]
    fn splits_are_disjoint_and_cover_all_nodes() {
        let (g, _) = generate_dataset(&GeneratorConfig::desk()).unwrap();
        let s = split_dataset(&g, (0.6, 0.2, 0.2), 7).unwrap();
        let mut all: Vec<u32> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        let expected: Vec<u32> = g.nodes.clone();
        assert_eq!(all, expected, "disjoint union must equal the node set");
    }

    #[test]
    fn tiny_stratum_errors_with_jurisdiction_named() {
        // Jurisdiction 1 holds a single anomalous node; three nonzero ratios
        // cannot each receive one. Its normal stratum is big enough.
        let g = labeled_graph(
            vec![0, 0, 0, 1, 0, 0, 0, 0, 0, 0],
            vec![0, 0, 0, 1, 1, 1, 1, 1, 0, 0],
        );
        match split_dataset(&g, (0.6, 0.2, 0.2), 0) {
            Err(crate::Error::StratumTooSmall { jurisdiction, label_kind, .. }) => {
                assert_eq!(jurisdiction, 1);
                assert_eq!(label_kind, "anomalous");
            }
            other => panic!("expected stratum error, got {other:?}"),
        }
    }

    #[test]
    fn ratios_must_sum_to_one() {
        let g = labeled_graph(vec![0, 0], vec![0, 0]);
        assert!(matches!(
            split_dataset(&g, (0.5, 0.2, 0.2), 0),
            Err(crate::Error::Config(_))
        ));
    }

    #[test]
    fn split_hash_is_stable_and_order_sensitive() {
        let a = DatasetSplit {
            train: vec![1, 2],
            val: vec![3],
            test: vec![4],
        };
        let b = DatasetSplit {
            train: vec![1, 2],
            val: vec![3],
            test: vec![4],
        };
        let c = DatasetSplit {
            train: vec![1, 2, 3],
            val: vec![],
            test: vec![4],
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
