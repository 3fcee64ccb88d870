//! Shared fixtures for the criterion benchmarks.

use vradapt_core::monitor::{AnomalyCategory, AnomalyEvent};

/// Deterministic pseudo-random event without pulling in an RNG: good enough
/// to exercise heap paths with plenty of severity ties.
pub fn synthetic_event(id: u64) -> AnomalyEvent {
    AnomalyEvent {
        id,
        arrival_time_s: id as f64 * 0.25,
        category: AnomalyCategory::QoS,
        trigger_metric: "packets_out".into(),
        trigger_value: 7000.0,
        severity_ms: ((id.wrapping_mul(2654435761)) % 4001) as f64 * 0.01,
        session_id: "bench".into(),
    }
}
