//! Shared experiment plumbing and the method roster for the comparison table:
//! dataset preparation, per-method training pipelines, and scoring.

use std::collections::BTreeMap;
use std::path::Path;

use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::federation::{
    build_federation, train_federated, AggregationMode, FederationSetup, PrivacyMode, RoundConfig,
    RoundRecord,
};
use crate::gnn::{GatModel, MlpModel, ModelSpec, Predictor};
use crate::graph::{
    generate_full, load_dataset, partition_graph, split_dataset, DatasetSplit,
    JurisdictionPartition, NodeId, ThreatScenario, Transaction, TransactionGraph,
};
use crate::harness::config::{AblationFlags, ExperimentConfig};
use crate::harness::metrics::{compute_metrics, MetricsReport};
use crate::reasoning::{
    assess_all, node_histories, RuleEngine, ThreatAssessment, TransactionHistory,
};
use crate::rng::derive_rng;

/// Dataset, partition, split, and federation state shared by every method in
/// a run so the comparison is apples-to-apples.
pub struct PreparedExperiment {
    pub graph: TransactionGraph,
    pub scenarios: Vec<ThreatScenario>,
    pub transactions: Vec<Transaction>,
    pub histories: BTreeMap<NodeId, TransactionHistory>,
    pub partition: JurisdictionPartition,
    pub split: DatasetSplit,
    pub fed: FederationSetup,
    /// Test node positions in the global view, with labels in the same order.
    pub test_idx: Vec<usize>,
    pub test_labels: Vec<u8>,
    pub split_hash: String,
}

/// Generate (or load) the dataset, partition it, split it, and build the
/// federation. Everything downstream of `config.seed` is deterministic.
pub fn prepare(config: &ExperimentConfig) -> Result<PreparedExperiment> {
    config.validate()?;
    let (graph, scenarios, transactions) = match &config.dataset_path {
        Some(dir) => {
            let (graph, meta) = load_dataset(Path::new(dir))?;
            // The on-disk format stores aggregated edges only; raw
            // transactions are regenerated from the echoed generator config
            // when present, and empty otherwise (assessments then run on
            // empty histories).
            match meta.config {
                Some(gen) => {
                    let full = generate_full(&gen)?;
                    (graph, full.scenarios, full.transactions)
                }
                None => (graph, Vec::new(), Vec::new()),
            }
        }
        None => {
            let full = generate_full(&config.dataset)?;
            (full.graph, full.scenarios, full.transactions)
        }
    };
    let histories = node_histories(&transactions);
    let partition = partition_graph(&graph, config.dataset.n_jurisdictions, config.seed)?;
    let split = split_dataset(&graph, config.split, config.seed)?;
    let fed = build_federation(&graph, &partition, &split)?;
    let index = &fed.global_index;
    let mut test_idx = Vec::with_capacity(split.test.len());
    let mut test_labels = Vec::with_capacity(split.test.len());
    for id in &split.test {
        let &i = index.get(id).ok_or(Error::UnknownNode(*id))?;
        test_idx.push(i);
        test_labels.push(graph.labels[i]);
    }
    let split_hash = split.hash();
    Ok(PreparedExperiment {
        graph,
        scenarios,
        transactions,
        histories,
        partition,
        split,
        fed,
        test_idx,
        test_labels,
        split_hash,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    FedavgTabular,
    Fedprox,
    FedgnnAvg,
    FedgraphAgi,
    CentralizedGat,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::FedavgTabular,
        Method::Fedprox,
        Method::FedgnnAvg,
        Method::FedgraphAgi,
        Method::CentralizedGat,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::FedavgTabular => "fedavg_tabular",
            Method::Fedprox => "fedprox",
            Method::FedgnnAvg => "fedgnn_avg",
            Method::FedgraphAgi => "fedgraph_agi",
            Method::CentralizedGat => "centralized_gat",
        }
    }
}

/// The model a method trained, kept so callers can checkpoint it or probe it
/// further (feature importance, extra predictions).
pub enum TrainedModel {
    Mlp(MlpModel),
    Gat(GatModel),
}

/// Everything a method run produces: test metrics, per-round records, the
/// scores metrics were computed from, the trained model, and assessments
/// when the reasoning stage ran.
pub struct MethodOutcome {
    pub metrics: MetricsReport,
    pub records: Vec<RoundRecord>,
    /// Model probability per test node, before any reasoning.
    pub p_gnn: Vec<f64>,
    /// Final score per test node (equals `p_gnn` when reasoning is off).
    pub scores: Vec<f64>,
    pub model: TrainedModel,
    pub assessments: Option<Vec<ThreatAssessment>>,
}

fn model_init_rng(config: &RoundConfig) -> ChaCha12Rng {
    derive_rng(config.seed, "model-init", &[])
}

fn gat_spec(prep: &PreparedExperiment, config: &ExperimentConfig, uniform: bool) -> Result<ModelSpec> {
    let hyper = &config.round.hyper;
    let mut spec = ModelSpec::new(
        prep.fed.global_view.features.cols,
        prep.graph.edges.first().map(|e| e.features.len()).unwrap_or(0),
        hyper.layers,
        hyper.hidden_dim,
        hyper.heads,
    )?;
    spec.uniform_attention = uniform;
    Ok(spec)
}

/// A federation holding exactly one client. `client_idx` picks an existing
/// client (local view only, no boundary exchange); `None` builds the
/// centralized client whose view is the whole graph.
fn single_client_federation(
    prep: &PreparedExperiment,
    client_idx: Option<usize>,
) -> Result<FederationSetup> {
    let fed = &prep.fed;
    let client = match client_idx {
        Some(i) => {
            let mut c = fed
                .clients
                .get(i)
                .ok_or_else(|| Error::Config(format!("no client {i}")))?
                .clone();
            c.id = 0;
            c.prev_reps = Vec::new();
            c
        }
        None => {
            let index = &fed.global_index;
            let mut train_nodes = Vec::with_capacity(prep.split.train.len());
            let mut train_labels = Vec::with_capacity(prep.split.train.len());
            for id in &prep.split.train {
                let &pos = index.get(id).ok_or(Error::UnknownNode(*id))?;
                train_nodes.push(pos);
                train_labels.push(prep.graph.labels[pos]);
            }
            crate::federation::FedClient {
                id: 0,
                jurisdiction: 0,
                view: fed.global_view.clone(),
                node_ids: prep.graph.nodes.clone(),
                train_nodes,
                train_labels,
                val_nodes: fed.val_nodes.clone(),
                val_labels: fed.val_labels.clone(),
                prev_reps: Vec::new(),
            }
        }
    };
    let train_sizes = vec![client.train_nodes.len()];
    Ok(FederationSetup {
        clients: vec![client],
        routes: Vec::new(),
        global_view: fed.global_view.clone(),
        global_index: fed.global_index.clone(),
        val_nodes: fed.val_nodes.clone(),
        val_labels: fed.val_labels.clone(),
        train_sizes,
    })
}

/// Index of the client with the fewest training nodes (ties to the lowest
/// id), the "smallest jurisdiction" of the no-federation ablation.
pub fn smallest_client(fed: &FederationSetup) -> usize {
    fed.train_sizes
        .iter()
        .enumerate()
        .min_by_key(|&(i, &n)| (n, i))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn train_and_score<M: Predictor>(
    initial: M,
    mut fed: FederationSetup,
    round: &RoundConfig,
    test_idx: &[usize],
) -> Result<(M, Vec<f64>, Vec<RoundRecord>)> {
    let (model, records) = train_federated(initial, &mut fed, round)?;
    let probs = model.predict(&fed.global_view)?;
    let scores = test_idx.iter().map(|&i| probs[i]).collect();
    Ok((model, scores, records))
}

/// Baseline round settings: size-weighted averaging, no privacy machinery.
fn baseline_round(config: &ExperimentConfig, proximal_lambda: f64) -> RoundConfig {
    let mut round = config.round.clone();
    round.aggregation = AggregationMode::Fedavg;
    round.privacy = PrivacyMode::Off;
    round.hyper.proximal_lambda = proximal_lambda;
    round
}

/// Round settings for the full pipeline with the ablation flags applied.
fn full_round(config: &ExperimentConfig, flags: AblationFlags) -> RoundConfig {
    let mut round = config.round.clone();
    if flags.no_moe {
        round.aggregation = AggregationMode::Fedavg;
    }
    if flags.no_privacy {
        round.privacy = PrivacyMode::Off;
    }
    round
}

/// Train the full-pipeline graph model (ablation flags honored) and return
/// the model itself with its round records. `run_method` builds on this;
/// checkpointing and feature importance call it directly.
pub fn train_full_gat(
    prep: &PreparedExperiment,
    config: &ExperimentConfig,
) -> Result<(GatModel, Vec<f64>, Vec<RoundRecord>)> {
    let flags = config.ablation;
    let round = full_round(config, flags);
    let spec = gat_spec(prep, config, flags.no_attention)?;
    let initial = GatModel::init(&spec, &mut model_init_rng(&round));
    let fed = if flags.no_fed {
        single_client_federation(prep, Some(smallest_client(&prep.fed)))?
    } else {
        prep.fed.clone()
    };
    train_and_score(initial, fed, &round, &prep.test_idx)
}

/// Run one method end to end on a prepared experiment. The full pipeline
/// honors `config.ablation`; baselines ignore it.
pub fn run_method(
    method: Method,
    prep: &PreparedExperiment,
    config: &ExperimentConfig,
) -> Result<MethodOutcome> {
    let hyper = &config.round.hyper;
    let (model, p_gnn, records, with_reasoning) = match method {
        Method::FedavgTabular | Method::Fedprox => {
            let lambda = match method {
                Method::FedavgTabular => 0.0,
                _ => hyper.proximal_lambda,
            };
            let round = baseline_round(config, lambda);
            let initial = MlpModel::init(
                prep.fed.global_view.features.cols,
                hyper.hidden_dim,
                &mut model_init_rng(&round),
            );
            let (model, scores, records) =
                train_and_score(initial, prep.fed.clone(), &round, &prep.test_idx)?;
            (TrainedModel::Mlp(model), scores, records, false)
        }
        Method::FedgnnAvg => {
            let round = baseline_round(config, hyper.proximal_lambda);
            let spec = gat_spec(prep, config, false)?;
            let initial = GatModel::init(&spec, &mut model_init_rng(&round));
            let (model, scores, records) =
                train_and_score(initial, prep.fed.clone(), &round, &prep.test_idx)?;
            (TrainedModel::Gat(model), scores, records, false)
        }
        Method::CentralizedGat => {
            let round = baseline_round(config, hyper.proximal_lambda);
            let spec = gat_spec(prep, config, false)?;
            let initial = GatModel::init(&spec, &mut model_init_rng(&round));
            let fed = single_client_federation(prep, None)?;
            let (model, scores, records) = train_and_score(initial, fed, &round, &prep.test_idx)?;
            (TrainedModel::Gat(model), scores, records, false)
        }
        Method::FedgraphAgi => {
            let (model, scores, records) = train_full_gat(prep, config)?;
            (TrainedModel::Gat(model), scores, records, !config.ablation.no_agi)
        }
    };

    let (scores, assessments) = if with_reasoning {
        let scored: Vec<(NodeId, f64)> = prep
            .test_idx
            .iter()
            .map(|&i| prep.graph.nodes[i])
            .zip(p_gnn.iter().copied())
            .collect();
        let engine = RuleEngine::default();
        let assessments =
            assess_all(&scored, &prep.graph, &prep.histories, &engine, &config.assess)?;
        let finals = assessments.iter().map(|a| a.p_final).collect();
        (finals, Some(assessments))
    } else {
        (p_gnn.clone(), None)
    };

    let metrics = compute_metrics(&scores, &prep.test_labels, 0.5)?;
    Ok(MethodOutcome { metrics, records, p_gnn, scores, model, assessments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GeneratorConfig;

    pub(crate) fn quick_config(seed: u64) -> ExperimentConfig {
        let mut config = ExperimentConfig::default().with_seed(seed);
        config.dataset = GeneratorConfig {
            n_nodes: 120,
            n_transactions: 1500,
            n_jurisdictions: 3,
            anomaly_rate: 0.15,
            cross_border_fraction: 0.32,
            seed,
            ..GeneratorConfig::default()
        };
        config.round.rounds = 2;
        config.round.hyper.local_epochs = 2;
        config.round.hyper.hidden_dim = 8;
        config.round.hyper.heads = 2;
        config.round.hyper.layers = 2;
        config.round.key_bits = 128;
        config
    }

    #[test]
    fn prepare_builds_consistent_state() {
        let config = quick_config(3);
        let prep = prepare(&config).unwrap();
        assert_eq!(prep.fed.clients.len(), 3);
        assert_eq!(prep.test_idx.len(), prep.test_labels.len());
        assert!(!prep.test_idx.is_empty());
        assert_eq!(prep.split_hash.len(), 16);
        assert!(prep.split_hash.chars().all(|c| c.is_ascii_hexdigit()));
        assert!(!prep.histories.is_empty());
    }

    #[test]
    fn every_method_runs_and_reports_consistent_metrics() {
        let config = quick_config(4);
        let prep = prepare(&config).unwrap();
        for method in Method::ALL {
            let out = run_method(method, &prep, &config)
                .unwrap_or_else(|e| panic!("{} failed: {e}", method.name()));
            assert_eq!(out.scores.len(), prep.test_idx.len(), "{}", method.name());
            assert_eq!(
                out.metrics.true_positives
                    + out.metrics.false_positives
                    + out.metrics.true_negatives
                    + out.metrics.false_negatives,
                prep.test_idx.len(),
                "{}",
                method.name()
            );
            let expect_rounds = config.round.rounds;
            assert_eq!(out.records.len(), expect_rounds, "{}", method.name());
            assert_eq!(
                out.assessments.is_some(),
                method == Method::FedgraphAgi,
                "{}",
                method.name()
            );
        }
    }

    #[test]
    fn method_runs_are_deterministic() {
        let config = quick_config(5);
        let prep = prepare(&config).unwrap();
        let a = run_method(Method::FedgraphAgi, &prep, &config).unwrap();
        let b = run_method(Method::FedgraphAgi, &prep, &config).unwrap();
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn no_fed_trains_on_the_smallest_client_only() {
        let mut config = quick_config(6);
        config.ablation.no_fed = true;
        let prep = prepare(&config).unwrap();
        let smallest = smallest_client(&prep.fed);
        let out = run_method(Method::FedgraphAgi, &prep, &config).unwrap();
        assert_eq!(out.records[0].per_client_loss.len(), 1);
        assert!(prep.fed.train_sizes[smallest] <= *prep.fed.train_sizes.iter().max().unwrap());
        assert_eq!(out.scores.len(), prep.test_idx.len());
    }

    #[test]
    fn no_agi_skips_assessments_and_keeps_model_scores() {
        let mut config = quick_config(7);
        config.ablation.no_agi = true;
        let prep = prepare(&config).unwrap();
        let out = run_method(Method::FedgraphAgi, &prep, &config).unwrap();
        assert!(out.assessments.is_none());
        assert_eq!(out.scores, out.p_gnn);
    }

    #[test]
    fn centralized_uses_one_client_with_all_train_nodes() {
        let config = quick_config(8);
        let prep = prepare(&config).unwrap();
        let fed = single_client_federation(&prep, None).unwrap();
        assert_eq!(fed.clients.len(), 1);
        assert_eq!(fed.clients[0].train_nodes.len(), prep.split.train.len());
        assert!(fed.routes.is_empty());
    }
}
