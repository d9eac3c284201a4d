//! Threat hypothesis templates and their structural precondition checks.
//!
//! Each of the four catalog templates instantiates at most once per call,
//! deterministically, from the evidence subgraph and the node's history.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, NodeId, ScenarioKind, TransactionGraph, TxKind};
use crate::reasoning::history::TransactionHistory;

/// Cap on path search work so hub-heavy subgraphs stay cheap.
const MAX_CHAIN_LEN: usize = 8;
const SEARCH_BUDGET: usize = 20_000;

/// One instantiated threat template. `evidence_events` index into the
/// history the hypothesis was generated from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThreatHypothesis {
    PrivilegeEscalation {
        node: NodeId,
        from_level: f64,
        to_level: f64,
        /// First and last role-change timestamps.
        window: (i64, i64),
        evidence_events: Vec<usize>,
    },
    CollusionNetwork {
        members: Vec<NodeId>,
        evidence_events: Vec<usize>,
    },
    LaunderingChain {
        /// Time-ordered transfer path, at least 4 nodes.
        path: Vec<NodeId>,
        evidence_events: Vec<usize>,
    },
    OffHoursActivity {
        node: NodeId,
        rate: f64,
        evidence_events: Vec<usize>,
    },
}

impl ThreatHypothesis {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            ThreatHypothesis::PrivilegeEscalation { .. } => ScenarioKind::PrivilegeEscalation,
            ThreatHypothesis::CollusionNetwork { .. } => ScenarioKind::CollusionNetwork,
            ThreatHypothesis::LaunderingChain { .. } => ScenarioKind::LaunderingChain,
            ThreatHypothesis::OffHoursActivity { .. } => ScenarioKind::OffHoursActivity,
        }
    }

    pub fn evidence_events(&self) -> &[usize] {
        match self {
            ThreatHypothesis::PrivilegeEscalation { evidence_events, .. }
            | ThreatHypothesis::CollusionNetwork { evidence_events, .. }
            | ThreatHypothesis::LaunderingChain { evidence_events, .. }
            | ThreatHypothesis::OffHoursActivity { evidence_events, .. } => evidence_events,
        }
    }

    /// Every node slot must reference a node present in the subgraph.
    pub fn validate(&self, subgraph: &TransactionGraph) -> Result<()> {
        let ids: BTreeSet<NodeId> = subgraph.nodes.iter().copied().collect();
        let check = |n: NodeId| -> Result<()> {
            if ids.contains(&n) {
                Ok(())
            } else {
                Err(Error::UnknownNode(n))
            }
        };
        match self {
            ThreatHypothesis::PrivilegeEscalation { node, .. }
            | ThreatHypothesis::OffHoursActivity { node, .. } => check(*node),
            ThreatHypothesis::CollusionNetwork { members, .. } => {
                members.iter().try_for_each(|&m| check(m))
            }
            ThreatHypothesis::LaunderingChain { path, .. } => {
                path.iter().try_for_each(|&p| check(p))
            }
        }
    }
}

/// Instantiate every template whose structural precondition holds, in
/// catalog order, at most one each. Pure function of its inputs.
pub fn generate_hypotheses(
    subgraph: &TransactionGraph,
    history: &TransactionHistory,
) -> Vec<ThreatHypothesis> {
    let center = history.node;
    if !subgraph.nodes.contains(&center) {
        return Vec::new();
    }
    let mut out = Vec::new();
    if let Some(h) = privilege_escalation(center, history) {
        out.push(h);
    }
    if let Some(h) = collusion_network(subgraph, center, history) {
        out.push(h);
    }
    if let Some(h) = laundering_chain(subgraph, center, history) {
        out.push(h);
    }
    if let Some(h) = off_hours_activity(center, history) {
        out.push(h);
    }
    out
}

/// At least two role changes with a net level increase.
fn privilege_escalation(
    center: NodeId,
    history: &TransactionHistory,
) -> Option<ThreatHypothesis> {
    let changes: Vec<usize> = history
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == TxKind::PrivilegeChange && e.counterparty == center)
        .map(|(i, _)| i)
        .collect();
    if changes.len() < 2 {
        return None;
    }
    let first = &history.events[changes[0]];
    let last = &history.events[*changes.last().unwrap()];
    if last.amount <= first.amount {
        return None;
    }
    Some(ThreatHypothesis::PrivilegeEscalation {
        node: center,
        from_level: first.amount,
        to_level: last.amount,
        window: (first.timestamp, last.timestamp),
        evidence_events: changes,
    })
}

/// A clique of at least 3 nodes containing the center: seeded from adjacent
/// neighbor pairs, greedily extended over sorted candidates, keeping the
/// largest (lexicographically smallest on ties).
fn collusion_network(
    subgraph: &TransactionGraph,
    center: NodeId,
    history: &TransactionHistory,
) -> Option<ThreatHypothesis> {
    let adj = undirected_pairs(subgraph);
    let neighbors: Vec<NodeId> = adj
        .get(&center)
        .map(|s| s.iter().copied().collect())
        .unwrap_or_default();
    let linked = |a: NodeId, b: NodeId| adj.get(&a).is_some_and(|s| s.contains(&b));

    let mut best: Vec<NodeId> = Vec::new();
    for (i, &u) in neighbors.iter().enumerate() {
        for &v in &neighbors[i + 1..] {
            if !linked(u, v) {
                continue;
            }
            let mut clique = vec![center, u, v];
            for &w in &neighbors {
                if clique.contains(&w) {
                    continue;
                }
                if clique.iter().all(|&m| linked(m, w)) {
                    clique.push(w);
                }
            }
            clique.sort_unstable();
            if clique.len() > best.len() || (clique.len() == best.len() && clique < best) {
                best = clique;
            }
        }
    }
    if best.len() < 3 {
        return None;
    }
    let members: BTreeSet<NodeId> = best.iter().copied().collect();
    let evidence_events = history
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| members.contains(&e.counterparty) && e.counterparty != center)
        .map(|(i, _)| i)
        .collect();
    Some(ThreatHypothesis::CollusionNetwork {
        members: best,
        evidence_events,
    })
}

/// A simple directed path of >= 3 edges through the center that admits a
/// temporally ordered transaction sequence: greedy longest extension forward
/// from the center, then backward onto its head. Each edge aggregates every
/// transaction on its (src, dst) pair, so admissibility is judged against the
/// edge's [first, last] activity span rather than a single instant.
fn laundering_chain(
    subgraph: &TransactionGraph,
    center: NodeId,
    history: &TransactionHistory,
) -> Option<ThreatHypothesis> {
    let mut forward: BTreeMap<NodeId, Vec<(NodeId, i64, i64)>> = BTreeMap::new();
    let mut backward: BTreeMap<NodeId, Vec<(NodeId, i64, i64)>> = BTreeMap::new();
    for e in &subgraph.edges {
        if e.src != e.dst {
            let (first, last) = edge_span(e);
            forward.entry(e.src).or_default().push((e.dst, first, last));
            backward.entry(e.dst).or_default().push((e.src, first, last));
        }
    }
    for list in forward.values_mut().chain(backward.values_mut()) {
        list.sort_unstable_by_key(|&(n, first, _)| (first, n));
    }

    let mut budget = SEARCH_BUDGET;
    let mut visited = BTreeSet::from([center]);
    let down = longest_leg(
        &forward,
        center,
        i64::MIN,
        true,
        &mut visited,
        &mut budget,
        MAX_CHAIN_LEN,
    );
    for (n, _) in &down {
        visited.insert(*n);
    }
    let first_ts = down.first().map_or(i64::MAX, |&(_, t)| t);
    let up = longest_leg(
        &backward,
        center,
        first_ts,
        false,
        &mut visited,
        &mut budget,
        MAX_CHAIN_LEN,
    );

    // up is ordered away from the center; reverse it to read source-first.
    let mut path: Vec<NodeId> = up.iter().rev().map(|&(n, _)| n).collect();
    path.push(center);
    path.extend(down.iter().map(|&(n, _)| n));
    if path.len() < 4 {
        return None;
    }
    let on_path: BTreeSet<NodeId> = path.iter().copied().collect();
    let evidence_events = history
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            e.kind == TxKind::Transfer
                && e.counterparty != center
                && on_path.contains(&e.counterparty)
        })
        .map(|(i, _)| i)
        .collect();
    Some(ThreatHypothesis::LaunderingChain {
        path,
        evidence_events,
    })
}

/// The [first, last] transaction-time span of an aggregated edge. Falls back
/// to the point timestamp when the edge carries no span feature (hand-built
/// graphs, foreign feature layouts).
fn edge_span(e: &Edge) -> (i64, i64) {
    let last = e
        .features
        .get(5)
        .copied()
        .filter(|l| l.is_finite() && *l >= e.timestamp as f64)
        .map_or(e.timestamp, |l| l as i64);
    (e.timestamp, last)
}

/// Backtracking depth-first search for the longest simple extension from
/// `from`. A hop is admissible when some transaction inside the edge's
/// activity span fits the running time bound (at or after it walking forward,
/// at or before it walking backward); the recorded time is the tightest such
/// transaction time. `visited` is restored on return; `budget` caps total
/// expansions and `depth_left` caps leg length.
fn longest_leg(
    adj: &BTreeMap<NodeId, Vec<(NodeId, i64, i64)>>,
    from: NodeId,
    bound_ts: i64,
    forward: bool,
    visited: &mut BTreeSet<NodeId>,
    budget: &mut usize,
    depth_left: usize,
) -> Vec<(NodeId, i64)> {
    let mut best: Vec<(NodeId, i64)> = Vec::new();
    if *budget == 0 || depth_left == 0 {
        return best;
    }
    *budget -= 1;
    for &(next, first, last) in adj.get(&from).into_iter().flatten() {
        if best.len() >= depth_left {
            break;
        }
        let next_bound = if forward {
            if last < bound_ts {
                continue;
            }
            first.max(bound_ts)
        } else {
            if first > bound_ts {
                continue;
            }
            last.min(bound_ts)
        };
        if visited.contains(&next) {
            continue;
        }
        visited.insert(next);
        let tail = longest_leg(adj, next, next_bound, forward, visited, budget, depth_left - 1);
        visited.remove(&next);
        if tail.len() + 1 > best.len() {
            best = std::iter::once((next, next_bound)).chain(tail).collect();
        }
    }
    best
}

/// At least 20% of the node's events outside business hours.
fn off_hours_activity(center: NodeId, history: &TransactionHistory) -> Option<ThreatHypothesis> {
    if history.events.is_empty() {
        return None;
    }
    let rate = history.off_hours_rate();
    if rate < 0.2 {
        return None;
    }
    let evidence_events = history
        .events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.off_hours)
        .map(|(i, _)| i)
        .collect();
    Some(ThreatHypothesis::OffHoursActivity {
        node: center,
        rate,
        evidence_events,
    })
}

fn undirected_pairs(subgraph: &TransactionGraph) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
    let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for e in &subgraph.edges {
        if e.src != e.dst {
            adj.entry(e.src).or_default().insert(e.dst);
            adj.entry(e.dst).or_default().insert(e.src);
        }
    }
    adj
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, ScenarioMix};
    use crate::linalg::Mat;
    use crate::reasoning::history::TxEvent;

    fn bare_graph(nodes: &[NodeId], edges: Vec<(NodeId, NodeId, i64)>) -> TransactionGraph {
        TransactionGraph {
            nodes: nodes.to_vec(),
            node_features: Mat::zeros(nodes.len(), 2),
            labels: vec![0; nodes.len()],
            edges: edges
                .into_iter()
                .map(|(src, dst, timestamp)| Edge {
                    src,
                    dst,
                    features: vec![0.0; 3],
                    timestamp,
                })
                .collect(),
            home_jurisdiction: vec![0; nodes.len()],
        }
    }

    fn event(ts: i64, cp: NodeId, amount: f64, kind: TxKind, off: bool) -> TxEvent {
        TxEvent {
            timestamp: ts,
            counterparty: cp,
            amount,
            kind,
            off_hours: off,
        }
    }

    #[test]
    fn isolated_node_with_empty_history_yields_nothing() {
        let g = bare_graph(&[7], vec![]);
        let h = TransactionHistory::empty(7);
        assert!(generate_hypotheses(&g, &h).is_empty());
    }

    #[test]
    fn time_ordered_chain_is_found_through_the_center() {
        // 1 -> 2 -> 3 -> 4 with rising timestamps; center is 2.
        let g = bare_graph(&[1, 2, 3, 4], vec![(1, 2, 10), (2, 3, 20), (3, 4, 30)]);
        let h = TransactionHistory::empty(2);
        let hyps = generate_hypotheses(&g, &h);
        let chain = hyps.iter().find_map(|x| match x {
            ThreatHypothesis::LaunderingChain { path, .. } => Some(path.clone()),
            _ => None,
        });
        assert_eq!(chain, Some(vec![1, 2, 3, 4]));
    }

    #[test]
    fn a_time_violation_breaks_the_chain() {
        // Middle edge goes back in time: only 2 admissible consecutive hops.
        let g = bare_graph(&[1, 2, 3, 4], vec![(1, 2, 50), (2, 3, 20), (3, 4, 30)]);
        let h = TransactionHistory::empty(2);
        let hyps = generate_hypotheses(&g, &h);
        assert!(
            !hyps
                .iter()
                .any(|x| matches!(x, ThreatHypothesis::LaunderingChain { .. })),
            "3-hop chain should not exist: {hyps:?}"
        );
    }

    #[test]
    fn triangle_containing_the_center_becomes_a_collusion_hypothesis() {
        let g = bare_graph(
            &[1, 2, 3, 9],
            vec![(1, 2, 10), (2, 3, 11), (3, 1, 12), (9, 1, 13)],
        );
        let h = TransactionHistory::empty(1);
        let hyps = generate_hypotheses(&g, &h);
        let members = hyps.iter().find_map(|x| match x {
            ThreatHypothesis::CollusionNetwork { members, .. } => Some(members.clone()),
            _ => None,
        });
        assert_eq!(members, Some(vec![1, 2, 3]));
    }

    #[test]
    fn no_triangle_means_no_collusion() {
        let g = bare_graph(&[1, 2, 3], vec![(1, 2, 10), (1, 3, 11)]);
        let h = TransactionHistory::empty(1);
        assert!(!generate_hypotheses(&g, &h)
            .iter()
            .any(|x| matches!(x, ThreatHypothesis::CollusionNetwork { .. })));
    }

    #[test]
    fn rising_role_changes_trigger_escalation() {
        let g = bare_graph(&[5], vec![]);
        let h = TransactionHistory {
            node: 5,
            events: vec![
                event(10, 5, 2.0, TxKind::PrivilegeChange, false),
                event(50, 9, 100.0, TxKind::Payment, false),
                event(90, 5, 4.0, TxKind::PrivilegeChange, false),
            ],
        };
        let hyps = generate_hypotheses(&g, &h);
        match hyps.iter().find(|x| matches!(x, ThreatHypothesis::PrivilegeEscalation { .. })) {
            Some(ThreatHypothesis::PrivilegeEscalation {
                from_level,
                to_level,
                window,
                evidence_events,
                ..
            }) => {
                assert_eq!((*from_level, *to_level), (2.0, 4.0));
                assert_eq!(*window, (10, 90));
                assert_eq!(evidence_events, &vec![0, 2]);
            }
            other => panic!("expected escalation, got {other:?}"),
        }
    }

    #[test]
    fn flat_or_single_role_changes_do_not_trigger() {
        let g = bare_graph(&[5], vec![]);
        let single = TransactionHistory {
            node: 5,
            events: vec![event(10, 5, 2.0, TxKind::PrivilegeChange, false)],
        };
        let falling = TransactionHistory {
            node: 5,
            events: vec![
                event(10, 5, 4.0, TxKind::PrivilegeChange, false),
                event(90, 5, 3.0, TxKind::PrivilegeChange, false),
            ],
        };
        for h in [single, falling] {
            assert!(!generate_hypotheses(&g, &h)
                .iter()
                .any(|x| matches!(x, ThreatHypothesis::PrivilegeEscalation { .. })));
        }
    }

    #[test]
    fn off_hours_threshold_is_twenty_percent() {
        let g = bare_graph(&[5], vec![]);
        let mk = |off_count: usize| TransactionHistory {
            node: 5,
            events: (0..10)
                .map(|i| event(i as i64, 9, 1.0, TxKind::Payment, i < off_count))
                .collect(),
        };
        assert!(!generate_hypotheses(&g, &mk(0))
            .iter()
            .any(|x| matches!(x, ThreatHypothesis::OffHoursActivity { .. })));
        assert!(!generate_hypotheses(&g, &mk(1))
            .iter()
            .any(|x| matches!(x, ThreatHypothesis::OffHoursActivity { .. })));
        let hyps = generate_hypotheses(&g, &mk(2));
        match hyps.iter().find(|x| matches!(x, ThreatHypothesis::OffHoursActivity { .. })) {
            Some(ThreatHypothesis::OffHoursActivity { rate, evidence_events, .. }) => {
                assert!((rate - 0.2).abs() < 1e-15);
                assert_eq!(evidence_events, &vec![0, 1]);
            }
            other => panic!("expected off-hours hypothesis, got {other:?}"),
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let g = bare_graph(
            &[1, 2, 3, 4],
            vec![(1, 2, 10), (2, 3, 20), (3, 4, 30), (3, 1, 25)],
        );
        let h = TransactionHistory {
            node: 2,
            events: vec![
                event(10, 1, 4.0, TxKind::Transfer, true),
                event(20, 3, 4.0, TxKind::Transfer, false),
            ],
        };
        assert_eq!(generate_hypotheses(&g, &h), generate_hypotheses(&g, &h));
    }

    #[test]
    fn hypotheses_validate_against_their_subgraph() {
        let g = bare_graph(&[1, 2, 3, 4], vec![(1, 2, 10), (2, 3, 20), (3, 4, 30)]);
        let h = TransactionHistory::empty(2);
        for hyp in generate_hypotheses(&g, &h) {
            hyp.validate(&g).unwrap();
        }
        let foreign = ThreatHypothesis::OffHoursActivity {
            node: 99,
            rate: 0.5,
            evidence_events: vec![],
        };
        assert!(matches!(foreign.validate(&g), Err(Error::UnknownNode(99))));
    }

    #[test]
    fn planted_laundering_chain_is_recovered_from_the_generator() {
        let config = crate::graph::GeneratorConfig {
            n_nodes: 50,
            n_transactions: 150,
            n_jurisdictions: 2,
            anomaly_rate: 0.12,
            scenario_mix: ScenarioMix {
                privilege_escalation: 0.2,
                collusion_network: 0.0,
                laundering_chain: 1.0,
                off_hours_activity: 0.0,
            },
            seed: 19,
            ..crate::graph::GeneratorConfig::default()
        };
        let full = crate::graph::generate_full(&config).unwrap();
        let chain = full
            .scenarios
            .iter()
            .find(|s| s.kind == ScenarioKind::LaunderingChain)
            .expect("a planted chain");
        let center = chain.participants[0];
        let sub = full.graph.khop_subgraph(center, 2).unwrap();
        let hist = TransactionHistory::from_log(center, &full.transactions);
        let hyps = generate_hypotheses(&sub, &hist);
        let path = hyps
            .iter()
            .find_map(|x| match x {
                ThreatHypothesis::LaunderingChain { path, .. } => Some(path.clone()),
                _ => None,
            })
            .expect("chain hypothesis");
        let found: BTreeSet<NodeId> = path.iter().copied().collect();
        let missing: Vec<NodeId> = chain
            .participants
            .iter()
            .copied()
            .filter(|p| !found.contains(p))
            .collect();
        assert!(
            missing.is_empty(),
            "planted chain nodes {missing:?} absent from recovered path {path:?}"
        );
    }
}
