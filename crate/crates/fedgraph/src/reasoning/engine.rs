//! Deterministic rule-based scoring engine: the built-in stand-in for a
//! learned reasoner. Scores are a logistic over a weighted evidence sum and
//! explanations follow a fixed five-step chain.
//!
//! Evidence factors, each scaled into [0, 1]:
//!   chain      min(1, hops / 4)                 transfer-path length
//!   clique     min(1, members / 5)              collusion group size
//!   escalation min(1, level gain / 2)           role-level increase
//!   off_hours  min(1, rate / 0.5)               off-hours event rate
//!   attention  prefix-peak concentration        causal-attention evidence
//!
//! score = logistic(bias + w_kind * factor_kind + w_att * concentration)
//! with bias -2: zero evidence on every factor scores ~= 0.119.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{NodeId, TransactionGraph};
use crate::reasoning::attention::{causal_attention, CausalAttentionParams};
use crate::reasoning::history::TransactionHistory;
use crate::reasoning::hypothesis::ThreatHypothesis;
use crate::rng::derive_rng;

/// One step of a structured explanation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplanationStep {
    /// 1-based position in the five-step chain.
    pub step: usize,
    pub text: String,
    pub evidence_nodes: Vec<NodeId>,
    pub evidence_edges: Vec<(NodeId, NodeId)>,
}

/// Pluggable second-stage reasoner: score a hypothesis against the evidence
/// and explain the verdict.
pub trait ThreatEngine: Send + Sync {
    fn score(
        &self,
        subgraph: &TransactionGraph,
        history: &TransactionHistory,
        hypothesis: &ThreatHypothesis,
    ) -> Result<f64>;

    fn explain(
        &self,
        subgraph: &TransactionGraph,
        history: &TransactionHistory,
        hypothesis: &ThreatHypothesis,
    ) -> Vec<ExplanationStep>;
}

/// Fixed factor weights; documented in the module header.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvidenceWeights {
    pub chain: f64,
    pub clique: f64,
    pub escalation: f64,
    pub off_hours: f64,
    pub attention: f64,
    pub bias: f64,
}

impl Default for EvidenceWeights {
    fn default() -> Self {
        EvidenceWeights {
            chain: 4.0,
            clique: 4.0,
            escalation: 4.0,
            off_hours: 4.0,
            attention: 1.0,
            bias: -2.0,
        }
    }
}

/// The built-in rule engine. Construction is deterministic: the attention
/// projections come from a fixed internal seed, so equal inputs always score
/// equally across runs and platforms.
#[derive(Clone, Debug)]
pub struct RuleEngine {
    pub weights: EvidenceWeights,
    pub attention: CausalAttentionParams,
}

impl Default for RuleEngine {
    fn default() -> Self {
        RuleEngine {
            weights: EvidenceWeights::default(),
            attention: CausalAttentionParams::init(
                8,
                5,
                &mut derive_rng(0, "rule-engine-attention", &[]),
            ),
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl RuleEngine {
    /// Template-specific factor in [0, 1].
    fn kind_factor(&self, hypothesis: &ThreatHypothesis) -> (f64, f64) {
        match hypothesis {
            ThreatHypothesis::LaunderingChain { path, .. } => {
                let hops = path.len().saturating_sub(1) as f64;
                (self.weights.chain, (hops / 4.0).min(1.0))
            }
            ThreatHypothesis::CollusionNetwork { members, .. } => {
                (self.weights.clique, (members.len() as f64 / 5.0).min(1.0))
            }
            ThreatHypothesis::PrivilegeEscalation {
                from_level,
                to_level,
                ..
            } => (
                self.weights.escalation,
                ((to_level - from_level).max(0.0) / 2.0).min(1.0),
            ),
            ThreatHypothesis::OffHoursActivity { rate, .. } => {
                (self.weights.off_hours, (rate / 0.5).min(1.0))
            }
        }
    }

    /// How sharply causal attention peaks on the hypothesis's evidence
    /// events: mean over evidence rows j >= 1 of the prefix maximum,
    /// rescaled so a uniform row contributes 0 and a one-hot row 1.
    fn attention_concentration(
        &self,
        history: &TransactionHistory,
        evidence: &[usize],
    ) -> Result<f64> {
        let rows: Vec<usize> = evidence
            .iter()
            .copied()
            .filter(|&j| j >= 1 && j < history.events.len())
            .collect();
        if rows.is_empty() {
            return Ok(0.0);
        }
        let scores = causal_attention(history, &self.attention)?;
        let mut total = 0.0;
        for &j in &rows {
            let peak = (0..=j).map(|i| scores.at(j, i)).fold(0.0f64, f64::max);
            let base = 1.0 / (j as f64 + 1.0);
            total += (peak - base) / (1.0 - base);
        }
        Ok(total / rows.len() as f64)
    }
}

impl ThreatEngine for RuleEngine {
    fn score(
        &self,
        subgraph: &TransactionGraph,
        history: &TransactionHistory,
        hypothesis: &ThreatHypothesis,
    ) -> Result<f64> {
        hypothesis.validate(subgraph)?;
        let (w, factor) = self.kind_factor(hypothesis);
        let concentration =
            self.attention_concentration(history, hypothesis.evidence_events())?;
        Ok(logistic(
            self.weights.bias + w * factor + self.weights.attention * concentration,
        ))
    }

    fn explain(
        &self,
        subgraph: &TransactionGraph,
        history: &TransactionHistory,
        hypothesis: &ThreatHypothesis,
    ) -> Vec<ExplanationStep> {
        explain_steps(self, subgraph, history, hypothesis)
    }
}

fn path_edges(path: &[NodeId]) -> Vec<(NodeId, NodeId)> {
    path.windows(2).map(|w| (w[0], w[1])).collect()
}

fn no_evidence(step: usize, text: &str) -> ExplanationStep {
    ExplanationStep {
        step,
        text: format!("{text}: no evidence"),
        evidence_nodes: Vec::new(),
        evidence_edges: Vec::new(),
    }
}

/// The five-step reasoning chain: precondition check, privilege/transfer
/// path, timing consistency, causal chain, verdict.
pub fn explain_steps(
    engine: &RuleEngine,
    subgraph: &TransactionGraph,
    history: &TransactionHistory,
    hypothesis: &ThreatHypothesis,
) -> Vec<ExplanationStep> {
    let mut steps = Vec::with_capacity(5);
    let evidence = hypothesis.evidence_events();
    let evidence_ts: Vec<i64> = evidence
        .iter()
        .filter(|&&j| j < history.events.len())
        .map(|&j| history.events[j].timestamp)
        .collect();

    // Step 1: which structural precondition fired, and on what.
    steps.push(match hypothesis {
        ThreatHypothesis::PrivilegeEscalation {
            node,
            from_level,
            to_level,
            ..
        } => ExplanationStep {
            step: 1,
            text: format!(
                "precondition: role level of account {node} rose from {from_level} to {to_level} across {} recorded changes",
                evidence.len()
            ),
            evidence_nodes: vec![*node],
            evidence_edges: Vec::new(),
        },
        ThreatHypothesis::CollusionNetwork { members, .. } => ExplanationStep {
            step: 1,
            text: format!(
                "precondition: {} accounts form a fully connected transaction group",
                members.len()
            ),
            evidence_nodes: members.clone(),
            evidence_edges: Vec::new(),
        },
        ThreatHypothesis::LaunderingChain { path, .. } => ExplanationStep {
            step: 1,
            text: format!(
                "precondition: funds traverse a {}-hop time-ordered transfer path",
                path.len() - 1
            ),
            evidence_nodes: path.clone(),
            evidence_edges: Vec::new(),
        },
        ThreatHypothesis::OffHoursActivity { node, rate, .. } => {
            if evidence.is_empty() {
                no_evidence(1, "precondition")
            } else {
                ExplanationStep {
                    step: 1,
                    text: format!(
                        "precondition: {:.0}% of account {node}'s activity falls outside business hours",
                        rate * 100.0
                    ),
                    evidence_nodes: vec![*node],
                    evidence_edges: Vec::new(),
                }
            }
        }
    });

    // Step 2: the acquisition/transfer path in the graph, when one exists.
    steps.push(match hypothesis {
        ThreatHypothesis::LaunderingChain { path, .. } => ExplanationStep {
            step: 2,
            text: format!(
                "path: {} transfers funds across {} accounts",
                path.iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
                    .join(" -> "),
                path.len()
            ),
            evidence_nodes: path.clone(),
            evidence_edges: path_edges(path),
        },
        ThreatHypothesis::PrivilegeEscalation { node, .. } => {
            let has_self_edge = subgraph
                .edges
                .iter()
                .any(|e| e.src == *node && e.dst == *node);
            if has_self_edge {
                ExplanationStep {
                    step: 2,
                    text: format!(
                        "path: privilege acquired through account {node}'s own role-change records"
                    ),
                    evidence_nodes: vec![*node],
                    evidence_edges: vec![(*node, *node)],
                }
            } else {
                no_evidence(2, "path")
            }
        }
        _ => no_evidence(2, "path"),
    });

    // Step 3: timing consistency of the evidence.
    let ordered = evidence_ts.windows(2).all(|w| w[1] >= w[0]);
    steps.push(if evidence_ts.is_empty() {
        no_evidence(3, "timing")
    } else {
        ExplanationStep {
            step: 3,
            text: format!(
                "timing: {} evidence events between t={} and t={} are {}",
                evidence_ts.len(),
                evidence_ts.first().unwrap(),
                evidence_ts.last().unwrap(),
                if ordered {
                    "consistently ordered"
                } else {
                    "out of order"
                }
            ),
            evidence_nodes: vec![history.node],
            evidence_edges: Vec::new(),
        }
    });

    // Step 4: the causal chain of events leading to the flag.
    steps.push(match hypothesis {
        ThreatHypothesis::LaunderingChain { path, .. } => ExplanationStep {
            step: 4,
            text: format!(
                "causal chain: each hop funds the next ({})",
                path_edges(path)
                    .iter()
                    .map(|(a, b)| format!("({a},{b})"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            evidence_nodes: path.clone(),
            evidence_edges: path_edges(path),
        },
        ThreatHypothesis::CollusionNetwork { members, .. } => {
            let present: Vec<(NodeId, NodeId)> = subgraph
                .edges
                .iter()
                .filter(|e| members.contains(&e.src) && members.contains(&e.dst) && e.src != e.dst)
                .map(|e| (e.src, e.dst))
                .collect();
            ExplanationStep {
                step: 4,
                text: format!(
                    "causal chain: {} intra-group transfers bind the group together",
                    present.len()
                ),
                evidence_nodes: members.clone(),
                evidence_edges: present,
            }
        }
        ThreatHypothesis::PrivilegeEscalation { node, .. } => {
            if evidence_ts.is_empty() {
                no_evidence(4, "causal chain")
            } else {
                ExplanationStep {
                    step: 4,
                    text: format!(
                        "causal chain: successive role changes at t={} precede the flagged activity",
                        evidence_ts
                            .iter()
                            .map(|t| t.to_string())
                            .collect::<Vec<_>>()
                            .join(", t=")
                    ),
                    evidence_nodes: vec![*node],
                    evidence_edges: Vec::new(),
                }
            }
        }
        ThreatHypothesis::OffHoursActivity { node, .. } => {
            if evidence_ts.is_empty() {
                no_evidence(4, "causal chain")
            } else {
                ExplanationStep {
                    step: 4,
                    text: format!(
                        "causal chain: {} off-hours events cluster outside account {node}'s local business hours",
                        evidence_ts.len()
                    ),
                    evidence_nodes: vec![*node],
                    evidence_edges: Vec::new(),
                }
            }
        }
    });

    // Step 5: verdict with the engine's own score.
    let verdict = engine
        .score(subgraph, history, hypothesis)
        .unwrap_or(f64::NAN);
    steps.push(ExplanationStep {
        step: 5,
        text: format!(
            "verdict: {} hypothesis scores {verdict:.4}",
            hypothesis.kind().name()
        ),
        evidence_nodes: vec![history.node],
        evidence_edges: Vec::new(),
    });

    steps
}

/// Fraction of scored nodes that crossed the deep-analysis threshold.
pub fn deep_analysis_fraction(p_gnn: &[f64], threshold: f64) -> f64 {
    if p_gnn.is_empty() {
        return 0.0;
    }
    p_gnn.iter().filter(|&&p| p > threshold).count() as f64 / p_gnn.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_full, Edge, GeneratorConfig, ScenarioKind, ScenarioMix, TxKind};
    use crate::linalg::Mat;
    use crate::reasoning::history::TxEvent;
    use crate::reasoning::hypothesis::generate_hypotheses;

    fn graph_with(nodes: &[NodeId], edges: Vec<(NodeId, NodeId, i64)>) -> TransactionGraph {
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

    #[test]
    fn zero_evidence_scores_the_bias_logistic() {
        let engine = RuleEngine::default();
        let g = graph_with(&[1], vec![]);
        let h = TransactionHistory::empty(1);
        let hyp = ThreatHypothesis::OffHoursActivity {
            node: 1,
            rate: 0.0,
            evidence_events: vec![],
        };
        let s = engine.score(&g, &h, &hyp).unwrap();
        assert!((s - logistic(-2.0)).abs() < 1e-15);
        assert!((s - 0.119_202_922_022_117_58).abs() < 1e-12);
        assert!((s - 0.119).abs() < 1e-3);
    }

    #[test]
    fn scoring_is_deterministic() {
        let engine = RuleEngine::default();
        let g = graph_with(&[1, 2, 3, 4], vec![(1, 2, 10), (2, 3, 20), (3, 4, 30)]);
        let h = TransactionHistory {
            node: 2,
            events: vec![TxEvent {
                timestamp: 15,
                counterparty: 3,
                amount: 100.0,
                kind: TxKind::Transfer,
                off_hours: true,
            }],
        };
        let hyp = generate_hypotheses(&g, &h)
            .into_iter()
            .next()
            .expect("at least one hypothesis");
        let a = engine.score(&g, &h, &hyp).unwrap();
        let b = engine.score(&g, &h, &hyp).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, RuleEngine::default().score(&g, &h, &hyp).unwrap());
    }

    #[test]
    fn longer_chains_score_higher() {
        let engine = RuleEngine::default();
        let g = graph_with(
            &[1, 2, 3, 4, 5, 6],
            vec![(1, 2, 1), (2, 3, 2), (3, 4, 3), (4, 5, 4), (5, 6, 5)],
        );
        let h = TransactionHistory::empty(1);
        let score_of = |path: Vec<NodeId>| {
            engine
                .score(
                    &g,
                    &h,
                    &ThreatHypothesis::LaunderingChain {
                        path,
                        evidence_events: vec![],
                    },
                )
                .unwrap()
        };
        let s3 = score_of(vec![1, 2, 3, 4]);
        let s5 = score_of(vec![1, 2, 3, 4, 5, 6]);
        assert!(s3 > 0.5, "3-hop chain scored {s3}");
        assert!(s5 > s3);
    }

    fn planted_fixture(mix: ScenarioMix, seed: u64) -> crate::graph::GeneratedDataset {
        generate_full(&GeneratorConfig {
            n_nodes: 50,
            n_transactions: 300,
            n_jurisdictions: 2,
            anomaly_rate: 0.12,
            scenario_mix: mix,
            seed,
            ..GeneratorConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn every_planted_scenario_kind_scores_above_half() {
        let engine = RuleEngine::default();
        let mixes = [
            (
                ScenarioKind::PrivilegeEscalation,
                ScenarioMix {
                    privilege_escalation: 1.0,
                    collusion_network: 0.0,
                    laundering_chain: 0.0,
                    off_hours_activity: 0.0,
                },
            ),
            (
                ScenarioKind::CollusionNetwork,
                ScenarioMix {
                    privilege_escalation: 0.2,
                    collusion_network: 1.0,
                    laundering_chain: 0.0,
                    off_hours_activity: 0.0,
                },
            ),
            (
                ScenarioKind::LaunderingChain,
                ScenarioMix {
                    privilege_escalation: 0.2,
                    collusion_network: 0.0,
                    laundering_chain: 1.0,
                    off_hours_activity: 0.0,
                },
            ),
            (
                ScenarioKind::OffHoursActivity,
                ScenarioMix {
                    privilege_escalation: 0.0,
                    collusion_network: 0.0,
                    laundering_chain: 0.0,
                    off_hours_activity: 1.0,
                },
            ),
        ];
        for (kind, mix) in mixes {
            let full = planted_fixture(mix, 31);
            let scenario = full
                .scenarios
                .iter()
                .find(|s| s.kind == kind)
                .unwrap_or_else(|| panic!("no planted {kind:?}"));
            let center = scenario.participants[0];
            let sub = full.graph.khop_subgraph(center, 2).unwrap();
            let hist = TransactionHistory::from_log(center, &full.transactions);
            let hyps = generate_hypotheses(&sub, &hist);
            let hyp = hyps
                .iter()
                .find(|h| h.kind() == kind)
                .unwrap_or_else(|| panic!("no {kind:?} hypothesis generated: {hyps:?}"));
            let s = engine.score(&sub, &hist, hyp).unwrap();
            assert!(s > 0.5, "{kind:?} scored {s}");
        }
    }

    #[test]
    fn explanations_have_five_ordered_steps_with_real_references() {
        let engine = RuleEngine::default();
        let g = graph_with(&[1, 2, 3, 4], vec![(1, 2, 10), (2, 3, 20), (3, 4, 30)]);
        let h = TransactionHistory::empty(2);
        let hyps = generate_hypotheses(&g, &h);
        for hyp in &hyps {
            let steps = engine.explain(&g, &h, hyp);
            assert_eq!(steps.len(), 5);
            assert_eq!(steps.iter().map(|s| s.step).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
            // Referential integrity: every cited node and edge exists.
            for s in &steps {
                for n in &s.evidence_nodes {
                    assert!(g.nodes.contains(n), "step {} cites unknown node {n}", s.step);
                }
                for (a, b) in &s.evidence_edges {
                    assert!(
                        g.edges.iter().any(|e| e.src == *a && e.dst == *b),
                        "step {} cites unknown edge ({a},{b})",
                        s.step
                    );
                }
            }
        }
    }

    #[test]
    fn chain_explanation_lists_the_hop_edges_in_step_four() {
        let engine = RuleEngine::default();
        let g = graph_with(&[10, 11, 12, 13], vec![(10, 11, 1), (11, 12, 2), (12, 13, 3)]);
        let h = TransactionHistory::empty(11);
        let hyp = ThreatHypothesis::LaunderingChain {
            path: vec![10, 11, 12, 13],
            evidence_events: vec![],
        };
        let steps = engine.explain(&g, &h, &hyp);
        assert_eq!(
            steps[3].evidence_edges,
            vec![(10, 11), (11, 12), (12, 13)]
        );
        assert_eq!(steps[1].evidence_edges, steps[3].evidence_edges);
    }

    #[test]
    fn empty_evidence_explanation_marks_missing_steps() {
        let engine = RuleEngine::default();
        let g = graph_with(&[1], vec![]);
        let h = TransactionHistory::empty(1);
        let hyp = ThreatHypothesis::OffHoursActivity {
            node: 1,
            rate: 0.0,
            evidence_events: vec![],
        };
        let steps = engine.explain(&g, &h, &hyp);
        assert_eq!(steps.len(), 5);
        assert!(steps.iter().filter(|s| s.text.contains("no evidence")).count() >= 3);
        // The verdict still carries the rule score.
        assert!(steps[4].text.contains("0.1192"));
    }

    #[test]
    fn concentration_rises_with_peaked_attention_evidence() {
        // Evidence rows pointing at genuinely repeated structure should give
        // a non-negative concentration; rows of a uniform matrix give zero.
        let engine = RuleEngine::default();
        let e = TxEvent {
            timestamp: 100,
            counterparty: 3,
            amount: 10.0,
            kind: TxKind::Payment,
            off_hours: false,
        };
        let uniform = TransactionHistory {
            node: 0,
            events: vec![e.clone(), e.clone(), e.clone()],
        };
        let c = engine.attention_concentration(&uniform, &[1, 2]).unwrap();
        assert!(c.abs() < 1e-12, "uniform attention should concentrate 0, got {c}");
        assert_eq!(engine.attention_concentration(&uniform, &[]).unwrap(), 0.0);
        assert_eq!(engine.attention_concentration(&uniform, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn deep_analysis_fraction_counts_strict_crossings() {
        assert_eq!(deep_analysis_fraction(&[], 0.7), 0.0);
        assert_eq!(deep_analysis_fraction(&[0.7, 0.71, 0.2, 0.9], 0.7), 0.5);
    }
}
