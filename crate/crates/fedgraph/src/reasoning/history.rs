//! Per-node transaction histories: the time-ordered event sequences the
//! second-stage reasoner works over.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{NodeId, Transaction, TxKind};
use crate::linalg::Mat;

/// One event as seen from a node's perspective.
#[derive(Clone, Debug, PartialEq)]
pub struct TxEvent {
    pub timestamp: i64,
    /// The other account involved; the node itself for self-events such as
    /// role changes.
    pub counterparty: NodeId,
    /// Transaction amount, or the new role level for privilege changes.
    pub amount: f64,
    pub kind: TxKind,
    pub off_hours: bool,
}

/// Time-ordered event list for one node. Simultaneous events keep their
/// original log order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransactionHistory {
    pub node: NodeId,
    pub events: Vec<TxEvent>,
}

impl TransactionHistory {
    /// Empty history for a node with no recorded activity.
    pub fn empty(node: NodeId) -> Self {
        TransactionHistory {
            node,
            events: Vec::new(),
        }
    }

    /// Extract the node's events from a raw transaction log.
    pub fn from_log(node: NodeId, log: &[Transaction]) -> Self {
        let mut events: Vec<TxEvent> = log
            .iter()
            .filter(|t| t.src == node || t.dst == node)
            .map(|t| TxEvent {
                timestamp: t.timestamp,
                counterparty: if t.src == node { t.dst } else { t.src },
                amount: t.amount,
                kind: t.kind,
                off_hours: t.off_hours,
            })
            .collect();
        events.sort_by_key(|e| e.timestamp);
        TransactionHistory { node, events }
    }

    /// Restrict to events with timestamps in `[start, end]`.
    pub fn window(&self, start: i64, end: i64) -> Self {
        TransactionHistory {
            node: self.node,
            events: self
                .events
                .iter()
                .filter(|e| (start..=end).contains(&e.timestamp))
                .cloned()
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for pair in self.events.windows(2) {
            if pair[1].timestamp < pair[0].timestamp {
                return Err(Error::Config(format!(
                    "history for node {} is not time-ordered ({} after {})",
                    self.node, pair[1].timestamp, pair[0].timestamp
                )));
            }
        }
        Ok(())
    }

    /// Fraction of events outside local business hours.
    pub fn off_hours_rate(&self) -> f64 {
        if self.events.is_empty() {
            return 0.0;
        }
        self.events.iter().filter(|e| e.off_hours).count() as f64 / self.events.len() as f64
    }
}

/// Histories for every node that appears in the log.
pub fn node_histories(log: &[Transaction]) -> BTreeMap<NodeId, TransactionHistory> {
    let mut map: BTreeMap<NodeId, Vec<TxEvent>> = BTreeMap::new();
    for t in log {
        map.entry(t.src).or_default().push(TxEvent {
            timestamp: t.timestamp,
            counterparty: t.dst,
            amount: t.amount,
            kind: t.kind,
            off_hours: t.off_hours,
        });
        if t.dst != t.src {
            map.entry(t.dst).or_default().push(TxEvent {
                timestamp: t.timestamp,
                counterparty: t.src,
                amount: t.amount,
                kind: t.kind,
                off_hours: t.off_hours,
            });
        }
    }
    map.into_iter()
        .map(|(node, mut events)| {
            events.sort_by_key(|e| e.timestamp);
            (node, TransactionHistory { node, events })
        })
        .collect()
}

/// Embed each event as a 5-vector with every field scaled into [0, 1]:
/// timestamp min-max within the history, counterparty and amount relative to
/// their history maxima, kind as its index over 3, and the off-hours flag.
pub fn event_embeddings(history: &TransactionHistory) -> Mat {
    let n = history.events.len();
    let mut m = Mat::zeros(n, 5);
    if n == 0 {
        return m;
    }
    let ts_min = history.events.iter().map(|e| e.timestamp).min().unwrap();
    let ts_max = history.events.iter().map(|e| e.timestamp).max().unwrap();
    let ts_span = (ts_max - ts_min).max(1) as f64;
    let cp_max = history
        .events
        .iter()
        .map(|e| e.counterparty)
        .max()
        .unwrap()
        .max(1) as f64;
    let amt_max = history
        .events
        .iter()
        .map(|e| e.amount.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    for (i, e) in history.events.iter().enumerate() {
        let row = m.row_mut(i);
        row[0] = (e.timestamp - ts_min) as f64 / ts_span;
        row[1] = e.counterparty as f64 / cp_max;
        row[2] = e.amount.abs() / amt_max;
        row[3] = e.kind.index() as f64 / 3.0;
        row[4] = f64::from(e.off_hours);
    }
    m
}
