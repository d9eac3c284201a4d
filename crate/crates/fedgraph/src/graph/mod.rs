//! Transaction graph domain: types, synthetic dataset generator, jurisdiction
//! partitioning, subgraph extraction, splitting, and the on-disk format.

pub mod generator;
pub mod io;
pub mod partition;
pub mod split;
pub mod types;

pub use generator::{
    aggregate_edges, generate_dataset, generate_full, is_off_hours, local_hour, GeneratedDataset,
    GeneratorConfig, ScenarioMix, Transaction, TxKind,
};
pub use io::{load_dataset, save_dataset, DatasetMeta};
pub use partition::partition_graph;
pub use split::{largest_remainder, split_dataset, DatasetSplit};
pub use types::{
    Edge, JurisdictionPartition, JurisdictionView, NodeId, ScenarioKind, ThreatScenario,
    TransactionGraph, EDGE_FEATURE_DIM, NODE_FEATURE_DIM,
};
