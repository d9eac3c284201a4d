//! Federated training over jurisdiction-partitioned graphs: client setup,
//! weighted and mixture aggregation, gating, encrypted boundary exchange,
//! and the round loop.

mod aggregate;
mod exchange;
mod gating;
mod round;
mod setup;

pub use aggregate::{fedavg_aggregate, moe_aggregate};
pub use exchange::{
    exchange_boundary_message, open_boundary_message, seal_boundary_message, CryptoMode,
    KeyDirectory, MessageEnvelope, Payload,
};
pub use gating::{
    entropy, gate_weights, gating_loss_grad, moe_loss, moe_predict, GatingParams, GATING_SLOPE,
};
pub use round::{
    prime_federation, run_round, train_federated, AggregationMode, FedServer, PrivacyMode,
    RoundConfig, RoundRecord,
};
pub use setup::{
    build_federation, standardize_columns, FedClient, FederationSetup, GhostRoute,
};
