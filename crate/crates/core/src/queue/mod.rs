//! Severity-ordered anomaly processing queue.
//!
//! Events wait in a binary max-heap keyed by severity and are served one at a
//! time by a three-stage single server (collect, categorize, push to the
//! decision stage), each stage with its own exponential rate. The module
//! offers two cross-checkable views of the same system: closed-form M/M/1/K
//! analytics ([`analytics`]) treating the service as a single exponential
//! stage at the effective rate `1 / x_bar`, and an exact discrete-event
//! simulation ([`sim`]) of the three stages.

mod analytics;
mod heap;
mod sim;

pub use analytics::{mm1k_analytics, Mm1kAnalytics};
pub use heap::SeverityQueue;
pub use sim::{simulate, simulate_detailed, Completion, EventSource, SimOptions, SimStats};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-stage service rates, events/second, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageRates {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
}

impl StageRates {
    pub fn new(mu1: f64, mu2: f64, mu3: f64) -> Result<Self> {
        let rates = StageRates { mu1, mu2, mu3 };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, mu) in [("mu1", self.mu1), ("mu2", self.mu2), ("mu3", self.mu3)] {
            if !mu.is_finite() || mu <= 0.0 {
                return Err(Error::invalid_argument(format!(
                    "{name} must be finite and > 0, got {mu}"
                )));
            }
        }
        Ok(())
    }
}

/// What to do with an arrival when the system already holds `capacity_k` events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverflowPolicy {
    /// Drop the newcomer; matches the finite-capacity analytics.
    RejectArrival,
    /// Drop the least severe waiting event instead, if the newcomer outranks it.
    EvictLowestSeverity,
}

/// Queue configuration.
///
/// `lambda` is the Poisson arrival rate; trace-driven simulations ignore it,
/// so zero is tolerated there, but any use that feeds the M/M/1/K math
/// requires it to be strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueConfig {
    pub lambda: f64,
    pub rates: StageRates,
    pub capacity_k: usize,
    pub overflow_policy: OverflowPolicy,
}

impl QueueConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::invalid_argument("lambda must be finite and >= 0"));
        }
        self.rates.validate()?;
        if self.capacity_k < 1 {
            return Err(Error::invalid_argument("capacity_k must be >= 1"));
        }
        Ok(())
    }
}

/// Mean total service time across the three stages: `1/mu1 + 1/mu2 + 1/mu3`.
pub fn mean_service_time(rates: &StageRates) -> f64 {
    1.0 / rates.mu1 + 1.0 / rates.mu2 + 1.0 / rates.mu3
}

/// Mean queue wait from the mean queue length and the arrival rate.
pub fn wq_from_lq(lq: f64, lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::invalid_argument("lambda must be > 0"));
    }
    if !lq.is_finite() || lq < 0.0 {
        return Err(Error::invalid_argument("lq must be >= 0"));
    }
    Ok(lq / lambda)
}

/// Mean response time in the queue: wait plus mean service time.
pub fn response_time_in_queue(wq: f64, x_bar: f64) -> f64 {
    wq + x_bar
}

/// Overall system response: queue response time plus adaptation enactment time.
pub fn system_response(rtq: f64, r_at: f64) -> f64 {
    rtq + r_at
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_service_time_sums_stage_means() {
        let r = StageRates::new(10.0, 10.0, 10.0).unwrap();
        assert!((mean_service_time(&r) - 0.3).abs() < 1e-15);
        let r = StageRates::new(20.0, 10.0, 5.0).unwrap();
        assert!((mean_service_time(&r) - 0.35).abs() < 1e-15);
        let r = StageRates::new(1e9, 1e9, 1e9).unwrap();
        assert!((mean_service_time(&r) - 3e-9).abs() < 1e-21);
    }

    #[test]
    fn stage_rates_reject_non_positive_values() {
        assert!(StageRates::new(0.0, 1.0, 1.0).is_err());
        assert!(StageRates::new(1.0, -2.0, 1.0).is_err());
        assert!(StageRates::new(1.0, 1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn wq_examples() {
        assert_eq!(wq_from_lq(0.0, 5.0).unwrap(), 0.0);
        assert!((wq_from_lq(4.0, 2.0).unwrap() - 2.0).abs() < 1e-15);
        // Back-solved from a published run: 10 events at the implied arrival
        // rate wait about 2400.48 s. Consistency only, not ground truth.
        let lambda = 10.0 / 2400.48;
        assert!((wq_from_lq(10.0, lambda).unwrap() - 2400.48).abs() < 1e-9);
        assert!(wq_from_lq(1.0, 0.0).is_err());
        assert!(wq_from_lq(1.0, -2.0).is_err());
    }

    #[test]
    fn rtq_and_rs_are_sums() {
        assert!((response_time_in_queue(0.0, 0.3) - 0.3).abs() < 1e-15);
        assert!((response_time_in_queue(2400.48, 0.146) - 2400.626).abs() < 1e-9);
        assert!((response_time_in_queue(2.0, 1.0) - 3.0).abs() < 1e-15);
        assert!((system_response(0.0, 0.54) - 0.54).abs() < 1e-15);
        assert!((system_response(3.0, 1.0) - 4.0).abs() < 1e-15);
        assert!((system_response(2400.626, 300.0) - 2700.626).abs() < 1e-9);
    }

    #[test]
    fn queue_config_validation() {
        let cfg = QueueConfig {
            lambda: 1.0,
            rates: StageRates::new(1.0, 1.0, 1.0).unwrap(),
            capacity_k: 0,
            overflow_policy: OverflowPolicy::RejectArrival,
        };
        assert!(cfg.validate().is_err());
        let cfg = QueueConfig { capacity_k: 1, ..cfg };
        assert!(cfg.validate().is_ok());
    }
}
