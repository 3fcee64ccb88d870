//! Closed-form M/M/1/K metrics.
//!
//! State probabilities come from the birth-death stationary distribution:
//! `Pn = rho^n (1 - rho) / (1 - rho^(K+1))` for `rho != 1` and uniform
//! `1/(K+1)` at `rho = 1`. They are evaluated as normalized exponentials of
//! `n * ln(rho)` so large `K` and `rho > 1` neither overflow nor need a
//! special case at `rho = 1`.

use crate::error::{Error, Result};

/// Stationary metrics of an M/M/1/K queue.
#[derive(Debug, Clone, PartialEq)]
pub struct Mm1kAnalytics {
    pub lambda: f64,
    pub mu: f64,
    pub capacity_k: usize,
    pub rho: f64,
    /// `P0..PK`; sums to 1 within 1e-12.
    pub state_probs: Vec<f64>,
    /// Probability an arrival finds the system full (`PK`).
    pub blocking_prob: f64,
    /// Mean number in system.
    pub l: f64,
    /// Mean number waiting.
    pub lq: f64,
    /// Accepted arrival rate `lambda * (1 - PK)`.
    pub effective_lambda: f64,
    /// Mean time in system for accepted arrivals.
    pub w: f64,
    /// Mean wait for accepted arrivals.
    pub wq: f64,
}

pub fn mm1k_analytics(lambda: f64, mu: f64, capacity_k: usize) -> Result<Mm1kAnalytics> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::invalid_argument("lambda must be finite and > 0"));
    }
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::invalid_argument("mu must be finite and > 0"));
    }
    if capacity_k < 1 {
        return Err(Error::invalid_argument("capacity K must be >= 1"));
    }

    let rho = lambda / mu;
    let ln_rho = rho.ln();
    // Normalize by the largest geometric weight so the exponentials stay tame.
    let peak = if ln_rho > 0.0 { capacity_k as f64 * ln_rho } else { 0.0 };
    let weights: Vec<f64> = (0..=capacity_k)
        .map(|n| (n as f64 * ln_rho - peak).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let state_probs: Vec<f64> = weights.iter().map(|w| w / total).collect();

    let l: f64 = state_probs
        .iter()
        .enumerate()
        .map(|(n, p)| n as f64 * p)
        .sum();
    let blocking_prob = state_probs[capacity_k];
    let effective_lambda = lambda * (1.0 - blocking_prob);
    let lq = l - (1.0 - state_probs[0]);
    let w = l / effective_lambda;
    let wq = lq / effective_lambda;

    Ok(Mm1kAnalytics {
        lambda,
        mu,
        capacity_k,
        rho,
        state_probs,
        blocking_prob,
        l,
        lq,
        effective_lambda,
        w,
        wq,
    })
}
