//! Synthetic cross-border transaction dataset generator.
//!
//! Emits a raw transaction log (recurring-pair background traffic plus planted
//! threat scenarios), aggregates repeated (src, dst) pairs into feature edges,
//! and derives 15 behavioral node features. Everything is a pure function of
//! (config, seed): rerunning with the same inputs reproduces the dataset
//! bit for bit.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::types::{
    Edge, NodeId, ScenarioKind, ThreatScenario, TransactionGraph, NODE_FEATURE_DIM,
};
use crate::linalg::Mat;
use crate::rng::{derive_rng, normal, shuffle};

pub const SECS_PER_DAY: i64 = 86_400;

/// Weights over the four threat templates. Zero disables a template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioMix {
    pub privilege_escalation: f64,
    pub collusion_network: f64,
    pub laundering_chain: f64,
    pub off_hours_activity: f64,
}

impl Default for ScenarioMix {
    fn default() -> Self {
        ScenarioMix {
            privilege_escalation: 1.0,
            collusion_network: 1.0,
            laundering_chain: 1.0,
            off_hours_activity: 1.0,
        }
    }
}

impl ScenarioMix {
    pub fn weights(&self) -> [(ScenarioKind, f64); 4] {
        [
            (ScenarioKind::PrivilegeEscalation, self.privilege_escalation),
            (ScenarioKind::CollusionNetwork, self.collusion_network),
            (ScenarioKind::LaunderingChain, self.laundering_chain),
            (ScenarioKind::OffHoursActivity, self.off_hours_activity),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_nodes: usize,
    pub n_transactions: usize,
    pub n_jurisdictions: usize,
    pub anomaly_rate: f64,
    pub cross_border_fraction: f64,
    pub duration_days: u32,
    pub seed: u64,
    pub scenario_mix: ScenarioMix,
    /// Strength of per-jurisdiction heterogeneity: shifts amount scales,
    /// activity levels, and skews how many scenarios land in each
    /// jurisdiction. 0 = IID.
    pub non_iid_strength: f64,
    /// How far planted behavior deviates from background (amount multipliers,
    /// event counts). 1.0 = calibrated default; lower is harder to detect.
    pub scenario_intensity: f64,
}

impl Default for GeneratorConfig {
    /// The published dataset profile: 1000 accounts, 50k transactions over two
    /// years, 10 jurisdictions, 4.93% anomalous accounts, 32% cross-border.
    fn default() -> Self {
        GeneratorConfig {
            n_nodes: 1000,
            n_transactions: 50_000,
            n_jurisdictions: 10,
            anomaly_rate: 0.0493,
            cross_border_fraction: 0.32,
            duration_days: 730,
            seed: 42,
            scenario_mix: ScenarioMix::default(),
            non_iid_strength: 0.5,
            scenario_intensity: 1.0,
        }
    }
}

impl GeneratorConfig {
    /// Desk-scale experiment profile: same graph size, five jurisdictions.
    pub fn desk() -> Self {
        GeneratorConfig {
            n_jurisdictions: 5,
            ..GeneratorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.anomaly_rate) {
            return Err(Error::Config(format!(
                "anomaly_rate {} outside [0,1]",
                self.anomaly_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.cross_border_fraction) {
            return Err(Error::Config(format!(
                "cross_border_fraction {} outside [0,1]",
                self.cross_border_fraction
            )));
        }
        if self.n_jurisdictions < 1 {
            return Err(Error::Config("n_jurisdictions must be >= 1".into()));
        }
        if self.n_nodes < self.n_jurisdictions {
            return Err(Error::Config(format!(
                "n_nodes {} < n_jurisdictions {}",
                self.n_nodes, self.n_jurisdictions
            )));
        }
        if self.n_jurisdictions == 1 && self.cross_border_fraction > 0.02 {
            return Err(Error::Config(
                "cross_border_fraction unreachable with a single jurisdiction".into(),
            ));
        }
        if self.duration_days == 0 {
            return Err(Error::Config("duration_days must be >= 1".into()));
        }
        if !(0.0..=10.0).contains(&self.non_iid_strength) {
            return Err(Error::Config("non_iid_strength must be in [0, 10]".into()));
        }
        if !(0.0..=10.0).contains(&self.scenario_intensity) {
            return Err(Error::Config("scenario_intensity must be in [0, 10]".into()));
        }
        let weights = self.scenario_mix.weights();
        if weights.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("scenario_mix weights must be finite and >= 0".into()));
        }
        let target = (self.anomaly_rate * self.n_nodes as f64).round() as usize;
        if target > 0 {
            if weights.iter().all(|(_, w)| *w == 0.0) {
                return Err(Error::Config(
                    "anomaly_rate > 0 but every scenario_mix weight is 0".into(),
                ));
            }
            for (kind, w) in weights {
                if w > 0.0 && kind.min_participants() > self.n_nodes {
                    return Err(Error::Infeasible(format!(
                        "{} needs {} nodes but n_nodes is {}",
                        kind.name(),
                        kind.min_participants(),
                        self.n_nodes
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TxKind {
    Payment,
    Transfer,
    PrivilegeChange,
    Approval,
}

impl TxKind {
    pub const ALL: [TxKind; 4] = [
        TxKind::Payment,
        TxKind::Transfer,
        TxKind::PrivilegeChange,
        TxKind::Approval,
    ];

    pub fn index(&self) -> usize {
        match self {
            TxKind::Payment => 0,
            TxKind::Transfer => 1,
            TxKind::PrivilegeChange => 2,
            TxKind::Approval => 3,
        }
    }
}

/// One raw event. `PrivilegeChange` events are self-events (src == dst) whose
/// amount field carries the new role level.
#[derive(Clone, Debug, PartialEq)]
pub struct Transaction {
    pub src: NodeId,
    pub dst: NodeId,
    pub timestamp: i64,
    pub amount: f64,
    pub kind: TxKind,
    pub off_hours: bool,
}

pub struct GeneratedDataset {
    pub graph: TransactionGraph,
    pub scenarios: Vec<ThreatScenario>,
    /// Raw log, sorted by timestamp. Regenerable bit-exactly from the config.
    pub transactions: Vec<Transaction>,
}

pub fn generate_dataset(config: &GeneratorConfig) -> Result<(TransactionGraph, Vec<ThreatScenario>)> {
    let full = generate_full(config)?;
    Ok((full.graph, full.scenarios))
}

/// Local-time UTC offset in hours for a jurisdiction.
fn tz_offset_hours(jurisdiction: u32) -> i64 {
    ((jurisdiction as i64 * 3) % 24) - 12
}

pub fn local_hour(timestamp: i64, jurisdiction: u32) -> i64 {
    ((timestamp / 3600 + tz_offset_hours(jurisdiction)).rem_euclid(24)) as i64
}

pub fn is_off_hours(timestamp: i64, jurisdiction: u32) -> bool {
    let h = local_hour(timestamp, jurisdiction);
    !(8..18).contains(&h)
}

struct NodeAttrs {
    home: Vec<u32>,
    hub: Vec<bool>,
    age_days: Vec<f64>,
    role: Vec<f64>,
    activity: Vec<f64>,
}

pub fn generate_full(config: &GeneratorConfig) -> Result<GeneratedDataset> {
    config.validate()?;
    let mut rng = derive_rng(config.seed, "generate", &[]);
    let n = config.n_nodes;

    let mut attrs = assign_attributes(config, &mut rng);
    let (scenarios, mut transactions) = plant_scenarios(config, &mut attrs, &mut rng)?;

    let planted = transactions.len();
    if planted > config.n_transactions {
        return Err(Error::Infeasible(format!(
            "planted scenarios need {} transactions but n_transactions is {}",
            planted, config.n_transactions
        )));
    }
    background_transactions(
        config,
        &attrs,
        &scenarios,
        config.n_transactions - planted,
        &mut transactions,
        &mut rng,
    );

    transactions.sort_by(|a, b| {
        (a.timestamp, a.src, a.dst, a.amount.to_bits())
            .cmp(&(b.timestamp, b.src, b.dst, b.amount.to_bits()))
    });

    let edges = aggregate_edges(&transactions);
    let mut labels = vec![0u8; n];
    for s in &scenarios {
        for &p in &s.participants {
            labels[p as usize] = 1;
        }
    }
    let node_features = compute_node_features(config, &attrs, &transactions, &edges, &mut rng);

    let graph = TransactionGraph {
        nodes: (0..n as NodeId).collect(),
        node_features,
        labels,
        edges,
        home_jurisdiction: attrs.home.clone(),
    };
    graph.validate()?;
    Ok(GeneratedDataset {
        graph,
        scenarios,
        transactions,
    })
}

fn assign_attributes(config: &GeneratorConfig, rng: &mut ChaCha12Rng) -> NodeAttrs {
    let n = config.n_nodes;
    let k = config.n_jurisdictions;

    // Near-equal jurisdiction sizes over a seeded shuffle of the ids.
    let mut order: Vec<usize> = (0..n).collect();
    shuffle(&mut order, rng);
    let mut home = vec![0u32; n];
    let base = n / k;
    let extra = n % k;
    let mut pos = 0;
    for j in 0..k {
        let size = base + usize::from(j < extra);
        for _ in 0..size {
            home[order[pos]] = j as u32;
            pos += 1;
        }
    }

    // A few high-degree institution hubs per jurisdiction.
    let mut hub = vec![false; n];
    let mut by_j: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        by_j[home[i] as usize].push(i);
    }
    for members in &by_j {
        let n_hubs = (members.len() / 40).max(1).min(members.len());
        let mut pool = members.clone();
        shuffle(&mut pool, rng);
        for &i in pool.iter().take(n_hubs) {
            hub[i] = true;
        }
    }

    let mut age_days = vec![0.0; n];
    let mut role = vec![0.0; n];
    let mut activity = vec![0.0; n];
    for i in 0..n {
        age_days[i] = if hub[i] {
            rng.gen_range(1500.0..3000.0)
        } else {
            rng.gen_range(30.0..2500.0)
        };
        role[i] = if hub[i] {
            3.0
        } else {
            let r: f64 = rng.gen();
            if r < 0.5 {
                1.0
            } else if r < 0.85 {
                2.0
            } else {
                3.0
            }
        };
        // Lognormal activity, hubs far heavier; mild per-jurisdiction skew.
        let iid_shift = jurisdiction_scale(config, home[i]);
        let z: f64 = normal(rng);
        activity[i] = if hub[i] { 25.0 } else { (0.7 * z).exp() } * iid_shift;
    }

    NodeAttrs {
        home,
        hub,
        age_days,
        role,
        activity,
    }
}

/// Multiplicative heterogeneity factor for amounts/activity in jurisdiction j.
fn jurisdiction_scale(config: &GeneratorConfig, j: u32) -> f64 {
    let k = config.n_jurisdictions as f64;
    if k <= 1.0 {
        return 1.0;
    }
    let centered = (j as f64 - (k - 1.0) / 2.0) / ((k - 1.0) / 2.0);
    1.0 + 0.15 * config.non_iid_strength * centered
}

fn plant_scenarios(
    config: &GeneratorConfig,
    attrs: &mut NodeAttrs,
    rng: &mut ChaCha12Rng,
) -> Result<(Vec<ThreatScenario>, Vec<Transaction>)> {
    let n = config.n_nodes;
    let k = config.n_jurisdictions;
    let target = (config.anomaly_rate * n as f64).round() as usize;
    let mut scenarios = Vec::new();
    let mut transactions = Vec::new();
    if target == 0 {
        return Ok((scenarios, transactions));
    }

    let weights = config.scenario_mix.weights();
    let active: Vec<(ScenarioKind, f64)> = weights.iter().copied().filter(|(_, w)| *w > 0.0).collect();

    // Free (not yet planted) nodes per jurisdiction. Hubs are kept out of
    // scenarios so institutional degree stays an innocent signal.
    let mut free: Vec<Vec<usize>> = vec![Vec::new(); k];
    for i in 0..n {
        if !attrs.hub[i] {
            free[attrs.home[i] as usize].push(i);
        }
    }
    // Skewed share of scenarios per jurisdiction when non-IID.
    let skew: Vec<f64> = (0..k)
        .map(|j| (1.0 + config.non_iid_strength).powi(j as i32))
        .collect();
    let mut planted_per_j = vec![0usize; k];
    let mut planted_total = 0usize;
    let floor_per_j = if target >= 3 * k { 3 } else { 0 };

    while planted_total < target {
        let remaining = target - planted_total;
        // First satisfy the per-jurisdiction floor, then follow the skew.
        let home_j = if let Some(j) = (0..k).find(|&j| planted_per_j[j] < floor_per_j) {
            j
        } else {
            (0..k)
                .max_by(|&a, &b| {
                    let da = skew[a] * (planted_total as f64 + 1.0) - planted_per_j[a] as f64 * skew.iter().sum::<f64>();
                    let db = skew[b] * (planted_total as f64 + 1.0) - planted_per_j[b] as f64 * skew.iter().sum::<f64>();
                    da.partial_cmp(&db).unwrap()
                })
                .unwrap()
        };

        // Weighted kind draw among templates that still fit the quota.
        let fitting: Vec<(ScenarioKind, f64)> = active
            .iter()
            .copied()
            .filter(|(kind, _)| kind.min_participants() <= remaining)
            .collect();
        let kind = if fitting.is_empty() {
            // Only oversized templates remain. A small overshoot keeps the
            // anomaly fraction inside its half-point tolerance; anything
            // larger is unreachable for this mix.
            let smallest = active
                .iter()
                .copied()
                .min_by_key(|(kind, _)| kind.min_participants())
                .unwrap()
                .0;
            let tolerance = ((n as f64) * 0.005).floor().max(1.0) as usize;
            if smallest.min_participants() - remaining > tolerance {
                return Err(Error::Infeasible(format!(
                    "{} needs {} participants but only {} remain before anomaly_rate drifts past tolerance",
                    smallest.name(),
                    smallest.min_participants(),
                    remaining
                )));
            }
            smallest
        } else {
            fitting[weighted_index(&fitting, rng)].0
        };

        let size = match kind {
            ScenarioKind::PrivilegeEscalation => 1,
            ScenarioKind::OffHoursActivity => 1,
            ScenarioKind::CollusionNetwork => 3 + usize::from(rng.gen::<f64>() < 0.4),
            ScenarioKind::LaunderingChain => 4 + usize::from(rng.gen::<f64>() < 0.5),
        };
        // Land exactly on the quota whenever the template allows it.
        let size = size.min(remaining.max(kind.min_participants()));
        let participants = draw_participants(kind, size, home_j, k, &mut free, rng).ok_or_else(|| {
            Error::Infeasible(format!(
                "{} needs {} free nodes but the pool is exhausted",
                kind.name(),
                size
            ))
        })?;
        for &p in &participants {
            planted_per_j[attrs.home[p as usize] as usize] += 1;
        }
        planted_total += participants.len();

        let scenario = emit_scenario(config, kind, &participants, attrs, rng);
        transactions.extend(scenario.1);
        scenarios.push(scenario.0);
    }

    Ok((scenarios, transactions))
}

/// Pick scenario members: center from the home jurisdiction, laundering and
/// collusion reach into neighboring jurisdictions so the pattern crosses
/// borders.
fn draw_participants(
    kind: ScenarioKind,
    size: usize,
    home_j: usize,
    k: usize,
    free: &mut [Vec<usize>],
    rng: &mut ChaCha12Rng,
) -> Option<Vec<NodeId>> {
    let total_free: usize = free.iter().map(|f| f.len()).sum();
    if total_free < size {
        return None;
    }
    let mut take = |preferred: usize, rng: &mut ChaCha12Rng| -> Option<usize> {
        let order: Vec<usize> = (0..k).map(|d| (preferred + d) % k).collect();
        for j in order {
            if !free[j].is_empty() {
                let at = rng.gen_range(0..free[j].len());
                return Some(free[j].swap_remove(at));
            }
        }
        None
    };

    let mut out = Vec::with_capacity(size);
    for slot in 0..size {
        let preferred = match kind {
            // Spread cycle hops across jurisdictions; one collusion member abroad.
            ScenarioKind::LaunderingChain => (home_j + slot) % k,
            ScenarioKind::CollusionNetwork if slot == size - 1 && k > 1 => (home_j + 1) % k,
            _ => home_j,
        };
        out.push(take(preferred, rng)? as NodeId);
    }
    Some(out)
}

fn weighted_index(items: &[(ScenarioKind, f64)], rng: &mut ChaCha12Rng) -> usize {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut r = rng.gen::<f64>() * total;
    for (i, (_, w)) in items.iter().enumerate() {
        r -= w;
        if r <= 0.0 {
            return i;
        }
    }
    items.len() - 1
}

/// Timestamp with a requested local hour on a given day.
fn ts_at_local_hour(day: i64, hour: i64, jurisdiction: u32, rng: &mut ChaCha12Rng) -> i64 {
    let utc_hour = (hour - tz_offset_hours(jurisdiction)).rem_euclid(24);
    day * SECS_PER_DAY + utc_hour * 3600 + rng.gen_range(0..3600)
}

fn business_hours_ts(day: i64, jurisdiction: u32, rng: &mut ChaCha12Rng) -> i64 {
    let z: f64 = normal(rng);
    let hour = (13.0 + 2.5 * z).clamp(6.0, 21.0) as i64;
    ts_at_local_hour(day, hour, jurisdiction, rng)
}

fn night_ts(day: i64, jurisdiction: u32, rng: &mut ChaCha12Rng) -> i64 {
    let hour = [22, 23, 0, 1, 2, 3, 4, 5][rng.gen_range(0..8)];
    ts_at_local_hour(day, hour, jurisdiction, rng)
}

fn push_tx(
    out: &mut Vec<Transaction>,
    planted: &mut Vec<(NodeId, NodeId, i64)>,
    src: NodeId,
    dst: NodeId,
    ts: i64,
    amount: f64,
    kind: TxKind,
    src_home: u32,
) {
    out.push(Transaction {
        src,
        dst,
        timestamp: ts,
        amount,
        kind,
        off_hours: is_off_hours(ts, src_home),
    });
    planted.push((src, dst, ts));
}

fn emit_scenario(
    config: &GeneratorConfig,
    kind: ScenarioKind,
    participants: &[NodeId],
    attrs: &mut NodeAttrs,
    rng: &mut ChaCha12Rng,
) -> (ThreatScenario, Vec<Transaction>) {
    let duration = config.duration_days as i64;
    let intensity = config.scenario_intensity;
    let window_start = rng.gen_range((duration / 10)..(duration * 8 / 10).max(duration / 10 + 1));
    let mut txs = Vec::new();
    let mut planted = Vec::new();

    match kind {
        ScenarioKind::PrivilegeEscalation => {
            let x = participants[0];
            let xi = x as usize;
            let home = attrs.home[xi];
            let start_role = attrs.role[xi].min(2.0);
            let steps = 2 + usize::from(rng.gen::<f64>() < 0.5);
            let mut day = window_start;
            let mut role = start_role;
            for _ in 0..steps {
                role += 1.0;
                let ts = business_hours_ts(day, home, rng);
                push_tx(&mut txs, &mut planted, x, x, ts, role, TxKind::PrivilegeChange, home);
                day += rng.gen_range(2..6);
            }
            attrs.role[xi] = role;
            // Post-escalation abuse: outsized transfers, some at night.
            let n_abuse = 4 + rng.gen_range(0..4);
            for _ in 0..n_abuse {
                let dst = random_other(config.n_nodes, x, rng);
                let amount = base_amount(attrs, xi, config) * (2.0 + 2.0 * intensity) * lognoise(rng, 0.3);
                let ts = if rng.gen::<f64>() < 0.5 {
                    night_ts(day, home, rng)
                } else {
                    business_hours_ts(day, home, rng)
                };
                push_tx(&mut txs, &mut planted, x, dst, ts, amount, TxKind::Transfer, home);
                day += rng.gen_range(1..4);
            }
        }
        ScenarioKind::CollusionNetwork => {
            // Every ordered pair transacts with similar amounts in one burst
            // window: feature-quiet, structure-loud.
            let scenario_amount = base_amount(attrs, participants[0] as usize, config) * lognoise(rng, 0.2);
            let mut day = window_start;
            for a in participants {
                for b in participants {
                    if a == b {
                        continue;
                    }
                    let reps = 2 + rng.gen_range(0..2);
                    for _ in 0..reps {
                        let home = attrs.home[*a as usize];
                        let ts = business_hours_ts(day + rng.gen_range(0..14), home, rng);
                        let amount = scenario_amount * lognoise(rng, 0.1);
                        push_tx(&mut txs, &mut planted, *a, *b, ts, amount, TxKind::Transfer, home);
                    }
                }
                day += rng.gen_range(0..3);
            }
        }
        ScenarioKind::LaunderingChain => {
            // Funds cycle back to origin: c0 -> c1 -> ... -> c0, timestamps
            // strictly increasing along the loop, two layering passes.
            let l = participants.len();
            let base = base_amount(attrs, participants[0] as usize, config) * (3.0 + 3.0 * intensity);
            let mut ts_day = window_start;
            for pass in 0..2 {
                let mut amount = base * lognoise(rng, 0.15) * (1.0 - 0.1 * pass as f64);
                for hop in 0..l {
                    let src = participants[hop];
                    let dst = participants[(hop + 1) % l];
                    let home = attrs.home[src as usize];
                    let ts = if rng.gen::<f64>() < 0.4 {
                        night_ts(ts_day, home, rng)
                    } else {
                        business_hours_ts(ts_day, home, rng)
                    };
                    push_tx(&mut txs, &mut planted, src, dst, ts, amount, TxKind::Transfer, home);
                    amount *= 0.95; // layering fee
                    ts_day += rng.gen_range(1..3);
                }
            }
        }
        ScenarioKind::OffHoursActivity => {
            let x = participants[0];
            let home = attrs.home[x as usize];
            let n_ev = (8.0 + 8.0 * intensity) as usize + rng.gen_range(0..4);
            let n_partners = 2 + rng.gen_range(0..3);
            let partners: Vec<NodeId> = (0..n_partners)
                .map(|_| random_other(config.n_nodes, x, rng))
                .collect();
            let mut day = window_start;
            for i in 0..n_ev {
                let dst = partners[i % partners.len()];
                let ts = night_ts(day, home, rng);
                let amount = base_amount(attrs, x as usize, config) * lognoise(rng, 0.4);
                push_tx(&mut txs, &mut planted, x, dst, ts, amount, TxKind::Payment, home);
                day += rng.gen_range(1..4);
            }
        }
    }

    // Planted timestamps must stay inside the dataset window.
    let horizon = duration * SECS_PER_DAY - 1;
    for t in txs.iter_mut() {
        t.timestamp = t.timestamp.min(horizon);
    }
    for p in planted.iter_mut() {
        p.2 = p.2.min(horizon);
    }

    (
        ThreatScenario {
            kind,
            participants: participants.to_vec(),
            planted_edges: planted,
        },
        txs,
    )
}

fn random_other(n: usize, not: NodeId, rng: &mut ChaCha12Rng) -> NodeId {
    loop {
        let c = rng.gen_range(0..n) as NodeId;
        if c != not {
            return c;
        }
    }
}

fn base_amount(attrs: &NodeAttrs, i: usize, config: &GeneratorConfig) -> f64 {
    let role_mu = 4.0 + 0.35 * attrs.role[i];
    role_mu.exp() * jurisdiction_scale(config, attrs.home[i])
}

fn lognoise(rng: &mut ChaCha12Rng, sigma: f64) -> f64 {
    (sigma * normal(rng)).exp()
}

fn background_transactions(
    config: &GeneratorConfig,
    attrs: &NodeAttrs,
    scenarios: &[ThreatScenario],
    count: usize,
    out: &mut Vec<Transaction>,
    rng: &mut ChaCha12Rng,
) {
    let n = config.n_nodes;
    let k = config.n_jurisdictions;
    let duration = config.duration_days as i64;

    // Distinct-pair bookkeeping starts from the planted scenario pairs so the
    // cross-border controller accounts for them too.
    let mut pairs: BTreeMap<(NodeId, NodeId), ()> = BTreeMap::new();
    let mut cross_pairs = 0usize;
    for s in scenarios {
        for &(src, dst, _) in &s.planted_edges {
            if src != dst && pairs.insert((src, dst), ()).is_none() {
                if attrs.home[src as usize] != attrs.home[dst as usize] {
                    cross_pairs += 1;
                }
            }
        }
    }

    // Aim for heavy pair reuse: ~17 transactions per distinct edge at the
    // published scale, with a floor so tiny configs still form a graph.
    let target_pairs = ((config.n_transactions as f64 / 16.7).round() as usize)
        .max((2 * n).min(config.n_transactions))
        .max(pairs.len());

    let cum = cumulative_weights(&attrs.activity);
    let mut hub_pool: Vec<Vec<NodeId>> = vec![Vec::new(); k];
    let mut member_pool: Vec<Vec<NodeId>> = vec![Vec::new(); k];
    for i in 0..n {
        let j = attrs.home[i] as usize;
        if attrs.hub[i] {
            hub_pool[j].push(i as NodeId);
        }
        member_pool[j].push(i as NodeId);
    }
    let mut partners: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for (&(s, d), _) in &pairs {
        partners[s as usize].push(d);
    }

    for step in 0..count {
        let src = sample_weighted(&cum, rng) as NodeId;
        let si = src as usize;
        let home = attrs.home[si];

        // Open a new pair while the pair count trails its schedule, otherwise
        // reuse an established counterparty.
        let want_new = pairs.len() < target_pairs * (step + 1) / count.max(1)
            || partners[si].is_empty();
        let dst = if want_new {
            let go_cross = k > 1
                && (cross_pairs as f64) < config.cross_border_fraction * (pairs.len() as f64 + 1.0);
            let j = if go_cross {
                let mut other = rng.gen_range(0..k - 1);
                if other >= home as usize {
                    other += 1;
                }
                other
            } else {
                home as usize
            };
            let pool = if rng.gen::<f64>() < 0.5 && !hub_pool[j].is_empty() {
                &hub_pool[j]
            } else {
                &member_pool[j]
            };
            let mut d = pool[rng.gen_range(0..pool.len())];
            if d == src {
                d = random_other(n, src, rng);
            }
            d
        } else {
            partners[si][rng.gen_range(0..partners[si].len())]
        };

        if src != dst && pairs.insert((src, dst), ()).is_none() {
            partners[si].push(dst);
            if attrs.home[dst as usize] != home {
                cross_pairs += 1;
            }
        }

        let day = rng.gen_range(0..duration);
        let ts = business_hours_ts(day, home, rng).min(duration * SECS_PER_DAY - 1);
        let amount = base_amount(attrs, si, config) * lognoise(rng, 0.8);
        let r: f64 = rng.gen();
        let kind = if r < 0.70 {
            TxKind::Payment
        } else if r < 0.95 {
            TxKind::Transfer
        } else {
            TxKind::Approval
        };
        out.push(Transaction {
            src,
            dst,
            timestamp: ts,
            amount,
            kind,
            off_hours: is_off_hours(ts, home),
        });
    }
}

fn cumulative_weights(w: &[f64]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for &x in w {
        acc += x;
        cum.push(acc);
    }
    cum
}

fn sample_weighted(cum: &[f64], rng: &mut ChaCha12Rng) -> usize {
    let total = *cum.last().unwrap();
    let r = rng.gen::<f64>() * total;
    match cum.binary_search_by(|x| x.partial_cmp(&r).unwrap()) {
        Ok(i) => i,
        Err(i) => i.min(cum.len() - 1),
    }
}

/// Collapse the log into one edge per directed (src, dst) pair. Eight summary
/// features: count, total, mean, variance, first_ts, last_ts, off-hours
/// fraction, type entropy. Self-events (privilege changes) are node history,
/// not graph edges.
pub fn aggregate_edges(transactions: &[Transaction]) -> Vec<Edge> {
    struct Agg {
        count: f64,
        total: f64,
        sq_total: f64,
        first_ts: i64,
        last_ts: i64,
        off_hours: f64,
        kinds: [f64; 4],
    }
    let mut map: BTreeMap<(NodeId, NodeId), Agg> = BTreeMap::new();
    for t in transactions {
        if t.src == t.dst {
            continue;
        }
        let a = map.entry((t.src, t.dst)).or_insert(Agg {
            count: 0.0,
            total: 0.0,
            sq_total: 0.0,
            first_ts: t.timestamp,
            last_ts: t.timestamp,
            off_hours: 0.0,
            kinds: [0.0; 4],
        });
        a.count += 1.0;
        a.total += t.amount;
        a.sq_total += t.amount * t.amount;
        a.first_ts = a.first_ts.min(t.timestamp);
        a.last_ts = a.last_ts.max(t.timestamp);
        a.off_hours += f64::from(t.off_hours);
        a.kinds[t.kind.index()] += 1.0;
    }

    let mut edges: Vec<Edge> = map
        .into_iter()
        .map(|((src, dst), a)| {
            let mean = a.total / a.count;
            let var = (a.sq_total / a.count - mean * mean).max(0.0);
            let entropy = -a
                .kinds
                .iter()
                .filter(|&&c| c > 0.0)
                .map(|&c| {
                    let p = c / a.count;
                    p * p.ln()
                })
                .sum::<f64>();
            Edge {
                src,
                dst,
                features: vec![
                    a.count,
                    a.total,
                    mean,
                    var,
                    a.first_ts as f64,
                    a.last_ts as f64,
                    a.off_hours / a.count,
                    entropy,
                ],
                timestamp: a.first_ts,
            }
        })
        .collect();
    edges.sort_by(|a, b| (a.timestamp, a.src, a.dst).cmp(&(b.timestamp, b.src, b.dst)));
    edges
}

fn compute_node_features(
    config: &GeneratorConfig,
    attrs: &NodeAttrs,
    transactions: &[Transaction],
    edges: &[Edge],
    rng: &mut ChaCha12Rng,
) -> Mat {
    let n = config.n_nodes;
    let mut out_tx = vec![0.0; n];
    let mut in_tx = vec![0.0; n];
    let mut amount_sum = vec![0.0; n];
    let mut amount_sq = vec![0.0; n];
    let mut off_hours = vec![0.0; n];
    for t in transactions {
        if t.src == t.dst {
            continue; // self privilege events are history, not flow
        }
        let s = t.src as usize;
        let d = t.dst as usize;
        out_tx[s] += 1.0;
        in_tx[d] += 1.0;
        amount_sum[s] += t.amount;
        amount_sq[s] += t.amount * t.amount;
        amount_sum[d] += t.amount;
        amount_sq[d] += t.amount * t.amount;
        off_hours[s] += f64::from(t.off_hours);
        off_hours[d] += f64::from(t.off_hours);
    }

    let mut degree = vec![0.0; n];
    let mut cross = vec![0.0; n];
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in edges {
        let s = e.src as usize;
        let d = e.dst as usize;
        degree[s] += 1.0;
        degree[d] += 1.0;
        let is_cross = attrs.home[s] != attrs.home[d];
        cross[s] += f64::from(is_cross);
        cross[d] += f64::from(is_cross);
        adj[s].push(d);
        adj[d].push(s);
    }

    let betweenness = betweenness_estimate(n, &adj, rng);

    let mut features = Mat::zeros(n, NODE_FEATURE_DIM);
    for i in 0..n {
        let tx_total = out_tx[i] + in_tx[i];
        let mean = if tx_total > 0.0 { amount_sum[i] / tx_total } else { 0.0 };
        let var = if tx_total > 0.0 {
            (amount_sq[i] / tx_total - mean * mean).max(0.0)
        } else {
            0.0
        };
        let row = features.row_mut(i);
        row[0] = degree[i];
        row[1] = (out_tx[i] + 1.0) / (tx_total + 2.0);
        row[2] = betweenness[i];
        row[3] = tx_total / config.duration_days as f64;
        row[4] = mean;
        row[5] = var;
        row[6] = if tx_total > 0.0 { off_hours[i] / tx_total } else { 0.0 };
        row[7] = if degree[i] > 0.0 { cross[i] / degree[i] } else { 0.0 };
        row[8] = attrs.age_days[i];
        row[9] = attrs.role[i];
        for d in 10..NODE_FEATURE_DIM {
            row[d] = normal(rng);
        }
    }
    features
}

/// Brandes betweenness over sampled sources (undirected, unweighted),
/// normalized by sample count.
fn betweenness_estimate(n: usize, adj: &[Vec<usize>], rng: &mut ChaCha12Rng) -> Vec<f64> {
    let mut centrality = vec![0.0; n];
    if n == 0 {
        return centrality;
    }
    let mut sources: Vec<usize> = (0..n).collect();
    shuffle(&mut sources, rng);
    sources.truncate(64.min(n));

    for &s in &sources {
        let mut stack = Vec::new();
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![i64::MAX; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adj[v] {
                if dist[w] == i64::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += (sigma[v] / sigma[w]) * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    let norm = sources.len() as f64;
    for c in centrality.iter_mut() {
        *c /= norm;
    }
    centrality
}
