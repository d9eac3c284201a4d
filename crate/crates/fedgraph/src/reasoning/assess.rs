//! Second-stage threat assessment: detector scores above a risk threshold
//! trigger subgraph extraction, hypothesis generation, engine scoring, and
//! a blended final probability with a structured explanation. Everything
//! below the threshold passes through untouched.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, TransactionGraph};
use crate::reasoning::engine::{ExplanationStep, ThreatEngine};
use crate::reasoning::history::TransactionHistory;
use crate::reasoning::hypothesis::{generate_hypotheses, ThreatHypothesis};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct AssessConfig {
    /// Detector scores strictly above this trigger deep analysis.
    pub threshold: f64,
    pub w_gnn: f64,
    pub w_lam: f64,
}

impl Default for AssessConfig {
    fn default() -> Self {
        AssessConfig {
            threshold: 0.7,
            w_gnn: 0.6,
            w_lam: 0.4,
        }
    }
}

impl AssessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "risk threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if self.w_gnn < 0.0 || self.w_lam < 0.0 || (self.w_gnn + self.w_lam - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "blend weights must be non-negative and sum to 1, got {} + {}",
                self.w_gnn, self.w_lam
            )));
        }
        Ok(())
    }
}

/// The pipeline's verdict on one node.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThreatAssessment {
    pub node: NodeId,
    pub p_gnn: f64,
    /// Maximum hypothesis score; absent when no deep analysis ran.
    pub p_lam: Option<f64>,
    pub p_final: f64,
    /// The highest-scoring hypothesis, when deep analysis ran and found one.
    pub hypothesis: Option<ThreatHypothesis>,
    /// Five ordered reasoning steps; present exactly when the detector score
    /// crossed the threshold and the engine ran cleanly.
    pub explanation: Option<Vec<ExplanationStep>>,
    /// Set when the engine failed and the assessment fell back to the
    /// detector score.
    pub warning: Option<String>,
}

fn passthrough(node: NodeId, p_gnn: f64, warning: Option<String>) -> ThreatAssessment {
    ThreatAssessment {
        node,
        p_gnn,
        p_lam: None,
        p_final: p_gnn,
        hypothesis: None,
        explanation: None,
        warning,
    }
}

/// Five placeholder steps for a flagged node on which no template fired.
fn no_hypothesis_steps(node: NodeId) -> Vec<ExplanationStep> {
    let texts = [
        "precondition: no threat template matches the evidence",
        "path: no evidence",
        "timing: no evidence",
        "causal chain: no evidence",
        "verdict: no hypothesis survived; deep analysis contributes 0",
    ];
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| ExplanationStep {
            step: i + 1,
            text: (*t).to_string(),
            evidence_nodes: vec![node],
            evidence_edges: Vec::new(),
        })
        .collect()
}

/// Assess one node. Pure function of its inputs; engine scoring failures
/// degrade to a detector passthrough with a warning rather than erroring.
pub fn assess(
    node: NodeId,
    p_gnn: f64,
    graph: &TransactionGraph,
    history: &TransactionHistory,
    engine: &dyn ThreatEngine,
    config: &AssessConfig,
) -> Result<ThreatAssessment> {
    config.validate()?;
    if !(0.0..=1.0).contains(&p_gnn) {
        return Err(Error::Config(format!(
            "detector probability {p_gnn} outside [0, 1] for node {node}"
        )));
    }
    if p_gnn <= config.threshold {
        return Ok(passthrough(node, p_gnn, None));
    }

    let subgraph = graph.khop_subgraph(node, 2)?;
    let hypotheses = generate_hypotheses(&subgraph, history);
    if hypotheses.is_empty() {
        return Ok(ThreatAssessment {
            node,
            p_gnn,
            p_lam: Some(0.0),
            p_final: config.w_gnn * p_gnn,
            hypothesis: None,
            explanation: Some(no_hypothesis_steps(node)),
            warning: None,
        });
    }

    let mut best: Option<(f64, &ThreatHypothesis)> = None;
    for h in &hypotheses {
        match engine.score(&subgraph, history, h) {
            Ok(p) if (0.0..=1.0).contains(&p) => {
                if best.is_none() || p > best.unwrap().0 {
                    best = Some((p, h));
                }
            }
            Ok(p) => {
                return Ok(passthrough(
                    node,
                    p_gnn,
                    Some(format!(
                        "engine returned out-of-range score {p} for {}; fell back to the detector",
                        h.kind().name()
                    )),
                ));
            }
            Err(e) => {
                return Ok(passthrough(
                    node,
                    p_gnn,
                    Some(format!(
                        "engine failed on {}: {e}; fell back to the detector",
                        h.kind().name()
                    )),
                ));
            }
        }
    }
    let (p_lam, winner) = best.expect("non-empty hypothesis list");
    Ok(ThreatAssessment {
        node,
        p_gnn,
        p_lam: Some(p_lam),
        p_final: config.w_gnn * p_gnn + config.w_lam * p_lam,
        hypothesis: Some(winner.clone()),
        explanation: Some(engine.explain(&subgraph, history, winner)),
        warning: None,
    })
}

/// Assess many nodes concurrently over a shared read-only graph. Output
/// order matches input order.
pub fn assess_all(
    scored: &[(NodeId, f64)],
    graph: &TransactionGraph,
    histories: &std::collections::BTreeMap<NodeId, TransactionHistory>,
    engine: &dyn ThreatEngine,
    config: &AssessConfig,
) -> Result<Vec<ThreatAssessment>> {
    scored
        .par_iter()
        .map(|&(node, p)| {
            let fallback = TransactionHistory::empty(node);
            let history = histories.get(&node).unwrap_or(&fallback);
            assess(node, p, graph, history, engine, config)
        })
        .collect()
}

/// Write assessments as JSON Lines: one object per node.
pub fn write_assessments(path: &Path, assessments: &[ThreatAssessment]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for a in assessments {
        serde_json::to_writer(&mut w, a)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_assessments(path: &Path) -> Result<Vec<ThreatAssessment>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;
    use crate::linalg::Mat;
    use crate::reasoning::engine::RuleEngine;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    struct FixedEngine(f64);
    impl ThreatEngine for FixedEngine {
        fn score(
            &self,
            _: &TransactionGraph,
            _: &TransactionHistory,
            _: &ThreatHypothesis,
        ) -> Result<f64> {
            Ok(self.0)
        }
        fn explain(
            &self,
            _: &TransactionGraph,
            _: &TransactionHistory,
            _: &ThreatHypothesis,
        ) -> Vec<ExplanationStep> {
            no_hypothesis_steps(0)
        }
    }

    struct FailingEngine;
    impl ThreatEngine for FailingEngine {
        fn score(
            &self,
            _: &TransactionGraph,
            _: &TransactionHistory,
            _: &ThreatHypothesis,
        ) -> Result<f64> {
            Err(Error::Integrity("engine offline".into()))
        }
        fn explain(
            &self,
            _: &TransactionGraph,
            _: &TransactionHistory,
            _: &ThreatHypothesis,
        ) -> Vec<ExplanationStep> {
            Vec::new()
        }
    }

    /// Chain graph whose center always generates a hypothesis.
    fn chain_graph() -> TransactionGraph {
        TransactionGraph {
            nodes: vec![1, 2, 3, 4],
            node_features: Mat::zeros(4, 2),
            labels: vec![0; 4],
            edges: vec![(1, 2, 10), (2, 3, 20), (3, 4, 30)]
                .into_iter()
                .map(|(src, dst, timestamp)| Edge {
                    src,
                    dst,
                    features: vec![0.0; 3],
                    timestamp,
                })
                .collect(),
            home_jurisdiction: vec![0; 4],
        }
    }

    #[test]
    fn below_threshold_passes_straight_through() {
        let g = chain_graph();
        let h = TransactionHistory::empty(2);
        let a = assess(2, 0.5, &g, &h, &RuleEngine::default(), &AssessConfig::default()).unwrap();
        assert_eq!(a.p_final, 0.5);
        assert!(a.explanation.is_none());
        assert!(a.p_lam.is_none());
        assert!(a.hypothesis.is_none());
        assert!(a.warning.is_none());
    }

    #[test]
    fn the_threshold_itself_is_not_enough() {
        let g = chain_graph();
        let h = TransactionHistory::empty(2);
        let a = assess(2, 0.7, &g, &h, &RuleEngine::default(), &AssessConfig::default()).unwrap();
        assert_eq!(a.p_final, 0.7);
        assert!(a.explanation.is_none());
    }

    #[test]
    fn blend_matches_the_hand_computed_example() {
        let g = chain_graph();
        let h = TransactionHistory::empty(2);
        let a = assess(
            2,
            0.8,
            &g,
            &h,
            &FixedEngine(0.9),
            &AssessConfig::default(),
        )
        .unwrap();
        assert_eq!(a.p_lam, Some(0.9));
        assert!((a.p_final - 0.84).abs() < 1e-12, "got {}", a.p_final);
        assert!(a.explanation.is_some());
        assert!(a.hypothesis.is_some());
    }

    #[test]
    fn flagged_node_without_hypotheses_blends_against_zero() {
        // Isolated node: 2-hop subgraph is just itself, no templates fire.
        let g = TransactionGraph {
            nodes: vec![9],
            node_features: Mat::zeros(1, 2),
            labels: vec![0],
            edges: vec![],
            home_jurisdiction: vec![0],
        };
        let h = TransactionHistory::empty(9);
        let a = assess(9, 0.9, &g, &h, &RuleEngine::default(), &AssessConfig::default()).unwrap();
        assert_eq!(a.p_lam, Some(0.0));
        assert!((a.p_final - 0.54).abs() < 1e-12);
        let steps = a.explanation.expect("explanation for flagged node");
        assert_eq!(steps.len(), 5);
        assert!(steps[4].text.contains("no hypothesis"));
    }

    #[test]
    fn engine_failure_falls_open_with_a_warning() {
        let g = chain_graph();
        let h = TransactionHistory::empty(2);
        let a = assess(2, 0.95, &g, &h, &FailingEngine, &AssessConfig::default()).unwrap();
        assert_eq!(a.p_final, 0.95);
        assert!(a.p_lam.is_none());
        assert!(a.explanation.is_none());
        let w = a.warning.expect("warning recorded");
        assert!(w.contains("engine offline"));
    }

    #[test]
    fn out_of_range_engine_scores_also_fall_open() {
        let g = chain_graph();
        let h = TransactionHistory::empty(2);
        let a = assess(2, 0.95, &g, &h, &FixedEngine(1.5), &AssessConfig::default()).unwrap();
        assert_eq!(a.p_final, 0.95);
        assert!(a.warning.unwrap().contains("out-of-range"));
    }

    #[test]
    fn invalid_inputs_are_pipeline_errors_not_fallbacks() {
        let g = chain_graph();
        let h = TransactionHistory::empty(2);
        let engine = RuleEngine::default();
        assert!(assess(2, 1.5, &g, &h, &engine, &AssessConfig::default()).is_err());
        assert!(assess(99, 0.9, &g, &h, &engine, &AssessConfig::default()).is_err());
        let bad = AssessConfig {
            w_gnn: 0.9,
            w_lam: 0.4,
            ..AssessConfig::default()
        };
        assert!(assess(2, 0.5, &g, &h, &engine, &bad).is_err());
    }

    #[test]
    fn batch_assessment_preserves_order_and_matches_single_calls() {
        let g = chain_graph();
        let histories: BTreeMap<NodeId, TransactionHistory> = BTreeMap::new();
        let engine = RuleEngine::default();
        let config = AssessConfig::default();
        let scored = vec![(2, 0.9), (1, 0.3), (3, 0.8)];
        let batch = assess_all(&scored, &g, &histories, &engine, &config).unwrap();
        assert_eq!(batch.len(), 3);
        for (a, &(node, p)) in batch.iter().zip(&scored) {
            let single = assess(
                node,
                p,
                &g,
                &TransactionHistory::empty(node),
                &engine,
                &config,
            )
            .unwrap();
            assert_eq!(a.node, node);
            assert_eq!(a.p_final, single.p_final);
        }
    }

    #[test]
    fn jsonl_roundtrip_preserves_every_field() {
        let g = chain_graph();
        let h = TransactionHistory::empty(2);
        let engine = RuleEngine::default();
        let config = AssessConfig::default();
        let assessments = vec![
            assess(2, 0.9, &g, &h, &engine, &config).unwrap(),
            assess(2, 0.4, &g, &h, &engine, &config).unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("assessments.jsonl");
        write_assessments(&path, &assessments).unwrap();
        let back = read_assessments(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].node, 2);
        assert_eq!(back[0].p_final, assessments[0].p_final);
        assert_eq!(back[0].hypothesis, assessments[0].hypothesis);
        assert_eq!(
            back[0].explanation.as_ref().map(|e| e.len()),
            assessments[0].explanation.as_ref().map(|e| e.len())
        );
        assert!(back[1].explanation.is_none());

        // The serialized line exposes the documented field names.
        let text = std::fs::read_to_string(&path).unwrap();
        let first = text.lines().next().unwrap();
        for key in [
            "\"node\"",
            "\"p_gnn\"",
            "\"p_lam\"",
            "\"p_final\"",
            "\"explanation\"",
            "\"step\"",
            "\"text\"",
            "\"evidence_nodes\"",
            "\"evidence_edges\"",
        ] {
            assert!(first.contains(key), "missing {key} in {first}");
        }
    }

    proptest! {
        // Blend bounds: the final score sits between the two inputs, and is
        // monotone in the engine score.
        #[test]
        fn blend_is_bounded_and_monotone(p_gnn in 0.701f64..1.0, p_lam in 0.0f64..1.0) {
            let g = chain_graph();
            let h = TransactionHistory::empty(2);
            let config = AssessConfig::default();
            let a = assess(2, p_gnn, &g, &h, &FixedEngine(p_lam), &config).unwrap();
            let lo = p_gnn.min(p_lam) - 1e-12;
            let hi = p_gnn.max(p_lam) + 1e-12;
            prop_assert!(a.p_final >= lo && a.p_final <= hi);

            let higher = assess(2, p_gnn, &g, &h, &FixedEngine((p_lam + 0.1).min(1.0)), &config).unwrap();
            prop_assert!(higher.p_final >= a.p_final - 1e-12);
        }
    }
}
