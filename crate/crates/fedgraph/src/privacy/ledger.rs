//! Cumulative privacy-budget accounting across training rounds.

use serde::{Deserialize, Serialize};

/// One round's recorded privacy spend.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSpend {
    pub round: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Client sampling rate; only the sampled heuristic consults it.
    pub sampling_rate: f64,
}

/// Rule used to total per-round spends into one overall budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accountant {
    /// ε_total = ε·√(2T·ln(1/δ)), δ_total = T·δ.
    AdvancedComposition,
    /// ε_total = ε·√(T·q) + q·T·ε/δ with q the sampling rate; the second
    /// term explodes for any practical q, so this is selectable for
    /// comparison but never the default.
    SampledHeuristic,
}

/// Budget totals under one accountant, with the accountant recorded so a
/// report can never be read against the wrong rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BudgetReport {
    pub accountant: Accountant,
    pub epsilon_total: f64,
    pub delta_total: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PrivacyLedger {
    pub rounds: Vec<RoundSpend>,
}

impl PrivacyLedger {
    pub fn record(&mut self, spend: RoundSpend) {
        self.rounds.push(spend);
    }

    pub fn compose(&self, accountant: Accountant) -> BudgetReport {
        compose_budget(&self.rounds, accountant)
    }
}

/// Total (ε, δ) spend over the recorded rounds. Per-round budgets are
/// constant in this system; if entries ever differ, the largest ε, δ, and
/// sampling rate are used so the total stays conservative.
pub fn compose_budget(rounds: &[RoundSpend], accountant: Accountant) -> BudgetReport {
    let t = rounds.len() as f64;
    if rounds.is_empty() {
        return BudgetReport {
            accountant,
            epsilon_total: 0.0,
            delta_total: 0.0,
        };
    }
    let eps = rounds.iter().map(|r| r.epsilon).fold(0.0, f64::max);
    let delta = rounds.iter().map(|r| r.delta).fold(0.0, f64::max);
    let q = rounds.iter().map(|r| r.sampling_rate).fold(0.0, f64::max);
    match accountant {
        Accountant::AdvancedComposition => BudgetReport {
            accountant,
            epsilon_total: eps * (2.0 * t * (1.0 / delta).ln()).sqrt(),
            delta_total: t * delta,
        },
        // Reported verbatim; δ passes through unchanged because the rule
        // only defines an ε total.
        Accountant::SampledHeuristic => BudgetReport {
            accountant,
            epsilon_total: eps * (t * q).sqrt() + q * t * eps / delta,
            delta_total: delta,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_rounds(t: usize, epsilon: f64, delta: f64, q: f64) -> Vec<RoundSpend> {
        (0..t)
            .map(|round| RoundSpend {
                round,
                epsilon,
                delta,
                sampling_rate: q,
            })
            .collect()
    }

    #[test]
    fn advanced_composition_hundred_rounds() {
        // sqrt(2·100·ln(1e5)) evaluated independently at full precision.
        let rounds = uniform_rounds(100, 1.0, 1e-5, 0.01);
        let report = compose_budget(&rounds, Accountant::AdvancedComposition);
        assert!((report.epsilon_total - 47.98525912188081).abs() < 1e-10);
        assert!((report.epsilon_total - 47.99).abs() < 0.01);
        assert!((report.delta_total - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn advanced_composition_single_round() {
        let rounds = uniform_rounds(1, 1.0, 1e-5, 0.01);
        let report = compose_budget(&rounds, Accountant::AdvancedComposition);
        assert!((report.epsilon_total - 4.798525912188081).abs() < 1e-12);
        assert!((report.delta_total - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn sampled_heuristic_reports_the_exploding_total_verbatim() {
        let rounds = uniform_rounds(100, 1.0, 1e-5, 0.01);
        let report = compose_budget(&rounds, Accountant::SampledHeuristic);
        // 1·sqrt(100·0.01) + 0.01·100·1/1e-5 = 1 + 1e5.
        assert!((report.epsilon_total - 100_001.0).abs() < 1e-3);
        assert!((report.delta_total - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn report_carries_its_accountant() {
        let rounds = uniform_rounds(3, 0.5, 1e-6, 0.1);
        for accountant in [Accountant::AdvancedComposition, Accountant::SampledHeuristic] {
            assert_eq!(compose_budget(&rounds, accountant).accountant, accountant);
        }
    }

    #[test]
    fn empty_ledger_totals_zero() {
        let ledger = PrivacyLedger::default();
        let report = ledger.compose(Accountant::AdvancedComposition);
        assert_eq!(report.epsilon_total, 0.0);
        assert_eq!(report.delta_total, 0.0);
    }

    #[test]
    fn ledger_accumulates_records() {
        let mut ledger = PrivacyLedger::default();
        for spend in uniform_rounds(5, 2.0, 1e-4, 0.01) {
            ledger.record(spend);
        }
        let report = ledger.compose(Accountant::AdvancedComposition);
        let expected = 2.0 * (2.0 * 5.0 * (1e4f64).ln()).sqrt();
        assert!((report.epsilon_total - expected).abs() < 1e-12);
        assert!((report.delta_total - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn accountant_names_serialize_as_snake_case() {
        let adv = serde_json::to_string(&Accountant::AdvancedComposition).unwrap();
        let heu = serde_json::to_string(&Accountant::SampledHeuristic).unwrap();
        assert_eq!(adv, "\"advanced_composition\"");
        assert_eq!(heu, "\"sampled_heuristic\"");
    }
}
