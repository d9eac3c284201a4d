//! Second-stage threat reasoning: per-node transaction histories, hypothesis
//! templates, causal attention over event sequences, a deterministic rule
//! engine, and blended final assessments with structured explanations.

mod assess;
mod attention;
mod engine;
mod history;
mod hypothesis;

pub use assess::{
    assess, assess_all, read_assessments, write_assessments, AssessConfig, ThreatAssessment,
};
pub use attention::{causal_attention, CausalAttentionParams};
pub use engine::{
    deep_analysis_fraction, explain_steps, logistic, EvidenceWeights, ExplanationStep,
    RuleEngine, ThreatEngine,
};
pub use history::{event_embeddings, node_histories, TransactionHistory, TxEvent};
pub use hypothesis::{generate_hypotheses, ThreatHypothesis};
