//! Federated graph learning simulator for cross-border insider-threat
//! detection.
//!
//! A desk-scale but faithful pipeline: a synthetic financial transaction graph
//! partitioned across jurisdictions, graph attention networks trained locally
//! with hand-written gradients, mixture-of-experts aggregation at a simulated
//! server, a differential-privacy / secret-sharing / Paillier privacy stack on
//! every exchanged update, and a rule-based second-stage reasoner that turns
//! confident detections into audited threat assessments.

pub mod error;
pub mod federation;
pub mod gnn;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod privacy;
pub mod reasoning;
pub mod rng;

pub use error::{Error, Result};
