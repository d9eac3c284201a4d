//! Communication rounds: broadcast, boundary message exchange, concurrent
//! local training, the privacy pipeline, aggregation, gating updates, and
//! per-round bookkeeping.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::federation::aggregate::{fedavg_aggregate, moe_aggregate};
use crate::federation::exchange::{exchange_boundary_message, CryptoMode, KeyDirectory};
use crate::federation::gating::{gate_weights, gating_loss_grad, GatingParams};
use crate::federation::setup::FederationSetup;
use crate::gnn::{bce_mean, local_train, Adam, Hyperparams, Predictor};
use crate::privacy::{
    clip_update, gaussian_mechanism, reconstruct, share_vector, Accountant, DpNoiseConfig,
    PrivacyLedger, RoundSpend,
};
use crate::rng::derive_rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    Fedavg,
    Moe,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyMode {
    Off,
    Dp,
    DpSecureagg,
}

/// Everything one training run needs to know about a round.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RoundConfig {
    pub rounds: usize,
    pub aggregation: AggregationMode,
    pub privacy: PrivacyMode,
    pub dp: DpNoiseConfig,
    /// Client sampling rate recorded in the budget ledger; all clients
    /// participate in every round regardless.
    pub sampling_rate: f64,
    pub entropy_weight: f64,
    /// Subtract the entropy term (reward spread-out gates) rather than add
    /// it as printed.
    pub diversity_bonus: bool,
    pub hyper: Hyperparams,
    pub gating_hidden: usize,
    pub gating_lr: f64,
    pub crypto: CryptoMode,
    pub key_bits: u64,
    pub seed: u64,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            rounds: 20,
            aggregation: AggregationMode::Fedavg,
            privacy: PrivacyMode::Off,
            dp: DpNoiseConfig::default(),
            sampling_rate: 1.0,
            entropy_weight: 0.01,
            diversity_bonus: true,
            hyper: Hyperparams::default(),
            gating_hidden: 128,
            gating_lr: 1e-3,
            crypto: CryptoMode::Simulated,
            key_bits: 512,
            seed: 0,
        }
    }
}

impl RoundConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if !self.entropy_weight.is_finite() || self.entropy_weight < 0.0 {
            return Err(Error::Config(format!(
                "entropy weight must be non-negative, got {}",
                self.entropy_weight
            )));
        }
        if !(self.sampling_rate > 0.0 && self.sampling_rate <= 1.0) {
            return Err(Error::Config(format!(
                "sampling rate must lie in (0, 1], got {}",
                self.sampling_rate
            )));
        }
        if self.gating_hidden == 0 {
            return Err(Error::Config("gating hidden width must be positive".into()));
        }
        if !self.gating_lr.is_finite() || self.gating_lr <= 0.0 {
            return Err(Error::Config("gating learning rate must be positive".into()));
        }
        if self.key_bits < crate::privacy::MIN_KEY_BITS {
            return Err(Error::Config(format!(
                "key size {} below the {}-bit minimum",
                self.key_bits,
                crate::privacy::MIN_KEY_BITS
            )));
        }
        if !matches!(self.privacy, PrivacyMode::Off) {
            self.dp.validate()?;
        }
        Ok(())
    }
}

/// One row of training history.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub per_client_loss: Vec<f64>,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Aggregation weights actually used: mean gate weights in mixture
    /// mode, size fractions otherwise. Always a distribution.
    pub mean_gate_weights: Vec<f64>,
    pub eps_round: f64,
    pub eps_cum_advanced: f64,
    pub eps_cum_heuristic: f64,
    pub bytes_exchanged: usize,
    pub wall_clock_secs: f64,
}

/// Server-side state across rounds.
pub struct FedServer<M: Predictor> {
    pub global: M,
    pub gating: GatingParams,
    gating_adam: Adam,
    pub ledger: PrivacyLedger,
    pub keys: KeyDirectory,
    pub config: RoundConfig,
}

impl<M: Predictor> FedServer<M> {
    pub fn new(initial: M, fed: &FederationSetup, config: RoundConfig) -> Result<Self> {
        config.validate()?;
        if fed.clients.is_empty() {
            return Err(Error::Config("no clients to federate".into()));
        }
        if config.rounds > 0 && fed.val_nodes.is_empty() {
            return Err(Error::Config(
                "validation set is empty; round metrics are undefined".into(),
            ));
        }
        let mut gating_rng = derive_rng(config.seed, "gating-init", &[]);
        let gating = GatingParams::init(
            fed.global_view.features.cols,
            config.gating_hidden,
            fed.clients.len(),
            &mut gating_rng,
        );
        let keys = match config.crypto {
            CryptoMode::Simulated => KeyDirectory::simulated(config.key_bits),
            CryptoMode::Paillier => {
                let jurisdictions: Vec<u32> =
                    fed.clients.iter().map(|c| c.jurisdiction).collect();
                KeyDirectory::generate(&jurisdictions, config.key_bits, config.seed)?
            }
        };
        let gating_adam = Adam::new(gating.n_params(), config.gating_lr, 0.0);
        Ok(FedServer {
            global: initial,
            gating,
            gating_adam,
            ledger: PrivacyLedger::default(),
            keys,
            config,
        })
    }
}

/// Shape every ghost slot for the model and cache initial representations,
/// so round 0's exchange has well-defined (zero-message) inputs.
pub fn prime_federation<M: Predictor>(
    server: &FedServer<M>,
    fed: &mut FederationSetup,
) -> Result<()> {
    if let Some(empty) = server.global.empty_messages() {
        for client in fed.clients.iter_mut() {
            for ghost in client.view.ghosts.iter_mut() {
                ghost.messages = empty.clone();
            }
        }
    }
    for client in fed.clients.iter_mut() {
        if let Some(reps) = server.global.cached_representations(&client.view)? {
            client.prev_reps = reps;
        }
    }
    Ok(())
}

/// Execute one communication round and return its record.
pub fn run_round<M: Predictor>(
    server: &mut FedServer<M>,
    fed: &mut FederationSetup,
    round: usize,
) -> Result<RoundRecord> {
    let start = Instant::now();
    let k = fed.clients.len();
    let n_params = server.global.n_params();
    let seed = server.config.seed;
    let mut bytes = 0usize;

    // Broadcast θ^(t) to every client.
    bytes += k * n_params * 8;

    // Boundary exchange: senders derive messages from the representations
    // they cached last round, under the just-broadcast parameters. Two
    // passes keep reads (sender reps) apart from writes (receiver ghosts).
    if server.global.empty_messages().is_some() {
        let mut deliveries = Vec::new();
        for (r_idx, route) in fed.routes.iter().enumerate() {
            let reps = &fed.clients[route.sender].prev_reps;
            let msgs = server
                .global
                .boundary_messages(reps, route.sender_local)
                .expect("model advertises message passing");
            let receiver_jur = fed.clients[route.receiver].jurisdiction;
            let mut rng = derive_rng(seed, "exchange", &[round as u64, r_idx as u64]);
            for (layer, per_head) in msgs.iter().enumerate() {
                let widths: Vec<usize> = per_head.iter().map(|h| h.len()).collect();
                let flat: Vec<f64> = per_head.concat();
                let (decoded, envelope) = exchange_boundary_message(
                    &flat,
                    route.sender,
                    route.receiver,
                    receiver_jur,
                    layer,
                    server.config.crypto,
                    &server.keys,
                    &mut rng,
                )?;
                bytes += envelope.byte_len();
                let mut per_head_out = Vec::with_capacity(widths.len());
                let mut at = 0;
                for w in widths {
                    per_head_out.push(decoded[at..at + w].to_vec());
                    at += w;
                }
                deliveries.push((route.receiver, route.ghost_idx, layer, per_head_out));
            }
        }
        for (receiver, ghost, layer, per_head) in deliveries {
            fed.clients[receiver].view.ghosts[ghost].messages[layer] = per_head;
        }
    }

    // Cache this round's representations for the next round's messages.
    for client in fed.clients.iter_mut() {
        if let Some(reps) = server.global.cached_representations(&client.view)? {
            client.prev_reps = reps;
        }
    }

    // Local training, concurrently, one independent RNG stream per client.
    let global = server.global.clone();
    let hyper = server.config.hyper.clone();
    let results: Vec<Result<(Vec<f64>, f64)>> = fed
        .clients
        .par_iter()
        .map(|client| {
            let mut rng = derive_rng(seed, "local-train", &[round as u64, client.id as u64]);
            let trained = local_train(
                &global,
                &client.view,
                &client.train_nodes,
                &client.train_labels,
                &hyper,
                &mut rng,
                client.id,
            )
            .map_err(|e| match e {
                Error::Divergence { client: c, epoch } => Error::RoundAborted { client: c, epoch },
                other => other,
            })?;
            let loss = trained.loss(
                &client.view,
                &client.train_nodes,
                &client.train_labels,
                None,
                0.0,
            )?;
            Ok((trained.flatten(), loss))
        })
        .collect();
    let mut trained_params = Vec::with_capacity(k);
    let mut per_client_loss = Vec::with_capacity(k);
    for r in results {
        let (p, l) = r?;
        trained_params.push(p);
        per_client_loss.push(l);
    }

    // Privacy pipeline: clip the update, add calibrated noise, rebase onto
    // the broadcast parameters.
    let theta_t = server.global.flatten();
    let dp_active = !matches!(server.config.privacy, PrivacyMode::Off);
    let mut released = Vec::with_capacity(k);
    for (c, params) in trained_params.iter().enumerate() {
        if dp_active {
            let delta: Vec<f64> = params.iter().zip(&theta_t).map(|(p, g)| p - g).collect();
            let clipped = clip_update(&delta, server.config.dp.clip_norm);
            let mut rng = derive_rng(seed, "update-noise", &[round as u64, c as u64]);
            let noised = gaussian_mechanism(&clipped, &server.config.dp, &mut rng)?;
            released.push(
                theta_t
                    .iter()
                    .zip(&noised)
                    .map(|(g, d)| g + d)
                    .collect::<Vec<f64>>(),
            );
        } else {
            released.push(params.clone());
        }
    }
    if dp_active {
        server.ledger.record(RoundSpend {
            round,
            epsilon: server.config.dp.epsilon,
            delta: server.config.dp.delta,
            sampling_rate: server.config.sampling_rate,
        });
    }

    // Aggregation weights: size fractions, or released mean gate vectors.
    let weights: Vec<f64> = match server.config.aggregation {
        AggregationMode::Fedavg => {
            let total: usize = fed.train_sizes.iter().sum();
            fed.train_sizes
                .iter()
                .map(|&n| n as f64 / total as f64)
                .collect()
        }
        AggregationMode::Moe if k == 1 => vec![1.0],
        AggregationMode::Moe => {
            // Each client reports its mean gate vector over local validation
            // nodes, noised like any other update; the round's recorded
            // spend covers both releases.
            let mut means = Vec::with_capacity(k);
            for client in fed.clients.iter() {
                let mut mean = vec![1.0 / k as f64; k];
                if !client.val_nodes.is_empty() {
                    mean = vec![0.0; k];
                    for &i in &client.val_nodes {
                        let w = gate_weights(&server.gating, client.view.features.row(i))?;
                        for (m, v) in mean.iter_mut().zip(&w) {
                            *m += v / client.val_nodes.len() as f64;
                        }
                    }
                }
                if dp_active {
                    let clipped = clip_update(&mean, server.config.dp.clip_norm);
                    let mut rng =
                        derive_rng(seed, "gate-noise", &[round as u64, client.id as u64]);
                    mean = gaussian_mechanism(&clipped, &server.config.dp, &mut rng)?;
                }
                bytes += k * 8;
                means.push(mean);
            }
            bytes += k * k * 8;
            let val_total: usize = fed.clients.iter().map(|c| c.val_nodes.len()).sum();
            let mut wbar = vec![0.0; k];
            for (client, mean) in fed.clients.iter().zip(&means) {
                let frac = if val_total == 0 {
                    1.0 / k as f64
                } else {
                    client.val_nodes.len() as f64 / val_total as f64
                };
                for (w, m) in wbar.iter_mut().zip(mean) {
                    *w += frac * m;
                }
            }
            // Noise can push entries negative; project back onto the simplex.
            for v in wbar.iter_mut() {
                *v = v.max(0.0);
            }
            let s: f64 = wbar.iter().sum();
            if s <= 0.0 {
                vec![1.0 / k as f64; k]
            } else {
                wbar.iter().map(|v| v / s).collect()
            }
        }
    };

    // Aggregate. Under secure aggregation the server reconstructs only the
    // weighted sum; otherwise it averages the released parameters directly.
    let new_flat = match server.config.privacy {
        PrivacyMode::DpSecureagg => {
            let mut pooled = Vec::with_capacity(k * k);
            for (c, params) in released.iter().enumerate() {
                let scaled: Vec<f64> = params.iter().map(|p| p * weights[c]).collect();
                let mut rng = derive_rng(seed, "share", &[round as u64, c as u64]);
                pooled.extend(share_vector(&scaled, k, &mut rng)?);
                bytes += k * n_params * 8;
            }
            reconstruct(&pooled)?
        }
        _ => {
            bytes += k * n_params * 8;
            match server.config.aggregation {
                AggregationMode::Fedavg => fedavg_aggregate(&released, &fed.train_sizes)?,
                AggregationMode::Moe => moe_aggregate(&released, &weights)?,
            }
        }
    };
    server.global = server.global.with_flat(&new_flat)?;

    // One gating step per round against oracle per-expert predictions on
    // the validation batch (the simulator holds the full graph; the paper's
    // per-node mixture is only evaluable there).
    if matches!(server.config.aggregation, AggregationMode::Moe) && k > 1 {
        let mut expert_probs = vec![vec![0.0; k]; fed.val_nodes.len()];
        for (c, params) in released.iter().enumerate() {
            let expert = server.global.with_flat(params)?;
            let probs = expert.predict(&fed.global_view)?;
            for (row, &v) in expert_probs.iter_mut().zip(fed.val_nodes.iter()) {
                row[c] = probs[v];
            }
        }
        let xs: Vec<&[f64]> = fed
            .val_nodes
            .iter()
            .map(|&i| fed.global_view.features.row(i))
            .collect();
        let (_, grad) = gating_loss_grad(
            &server.gating,
            &xs,
            &expert_probs,
            &fed.val_labels,
            server.config.entropy_weight,
            server.config.diversity_bonus,
        )?;
        let mut flat = server.gating.flatten();
        server.gating_adam.step(&mut flat, &grad);
        server.gating = server.gating.with_flat(&flat)?;
    }

    // Validation metrics under the new global parameters.
    let val_probs = server.global.predict(&fed.global_view)?;
    let val_loss = bce_mean(&val_probs, &fed.val_nodes, &fed.val_labels)?;
    let correct = fed
        .val_nodes
        .iter()
        .zip(&fed.val_labels)
        .filter(|&(&i, &y)| (val_probs[i] >= 0.5) == (y == 1))
        .count();
    let val_accuracy = correct as f64 / fed.val_nodes.len() as f64;

    let (eps_round, eps_cum_advanced, eps_cum_heuristic) = if dp_active {
        (
            server.config.dp.epsilon,
            server.ledger.compose(Accountant::AdvancedComposition).epsilon_total,
            server.ledger.compose(Accountant::SampledHeuristic).epsilon_total,
        )
    } else {
        (0.0, 0.0, 0.0)
    };

    let wsum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| w < 0.0) || (wsum - 1.0).abs() > 1e-9 {
        return Err(Error::Integrity(format!(
            "aggregation weights left the simplex (sum {wsum})"
        )));
    }

    Ok(RoundRecord {
        round,
        per_client_loss,
        val_loss,
        val_accuracy,
        mean_gate_weights: weights,
        eps_round,
        eps_cum_advanced,
        eps_cum_heuristic,
        bytes_exchanged: bytes,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}

/// Run the configured number of rounds from `initial`, returning the final
/// global model and the full history. Deterministic given (setup, config).
pub fn train_federated<M: Predictor>(
    initial: M,
    fed: &mut FederationSetup,
    config: &RoundConfig,
) -> Result<(M, Vec<RoundRecord>)> {
    let mut server = FedServer::new(initial, fed, config.clone())?;
    prime_federation(&server, fed)?;
    let mut records = Vec::with_capacity(config.rounds);
    for round in 0..config.rounds {
        records.push(run_round(&mut server, fed, round)?);
    }
    Ok((server.global, records))
}
