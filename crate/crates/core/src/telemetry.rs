//! Seeded synthetic session telemetry with injectable fault scenarios.
//!
//! Baseline streams stay strictly inside the benign operating bands (packet
//! rate at or above 7280 pkt/s, CPU at or below 8%, latency around the
//! 23.5 ms session baseline, at most one login attempt per window), so a
//! monitor with default thresholds raises no alarm on them. Scenarios perturb
//! samples only inside their `[start, start + duration)` window; everything
//! outside is passed through untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latency of a healthy session in milliseconds; excess above this is the
/// objective discomfort (cybersickness) measure used throughout the crate.
pub const BASELINE_LATENCY_MS: f64 = 23.5;

/// Lowest benign outbound packet rate, packets/second.
pub const BASELINE_MIN_PACKETS_OUT: u64 = 7280;
/// Highest benign outbound packet rate, packets/second.
pub const BASELINE_MAX_PACKETS_OUT: u64 = 8000;
/// Benign CPU utilization band, percent.
pub const BASELINE_MIN_CPU: f64 = 2.0;
pub const BASELINE_MAX_CPU: f64 = 8.0;
/// Baseline latency jitter as a fraction of [`BASELINE_LATENCY_MS`].
pub const BASELINE_LATENCY_JITTER: f64 = 0.10;

/// One timestamped snapshot of session telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    /// Seconds since session start; strictly increasing within a stream.
    pub timestamp_s: f64,
    /// Outbound packets per second.
    pub packets_out: u64,
    /// CPU utilization in percent, within `[0, 100]`.
    pub cpu_utilization: f64,
    /// Round-trip latency in milliseconds, non-negative.
    pub latency_ms: f64,
    /// Login attempts observed in this sampling window.
    pub login_attempts: u32,
    /// Packets flagged as tampered in this window (0 on a healthy stream).
    pub tampered_packets: u64,
    /// Opaque session identifier.
    pub session_id: String,
}

impl MetricSample {
    /// Checks the sample's own field invariants.
    pub fn validate(&self) -> Result<()> {
        if !self.timestamp_s.is_finite() || self.timestamp_s < 0.0 {
            return Err(Error::invalid_argument("timestamp must be finite and >= 0"));
        }
        if !(0.0..=100.0).contains(&self.cpu_utilization) {
            return Err(Error::invalid_argument("cpu_utilization must be in [0, 100]"));
        }
        if !self.latency_ms.is_finite() || self.latency_ms < 0.0 {
            return Err(Error::invalid_argument("latency must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Fault scenario kinds with their scenario-specific magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Drop a fraction of outbound packets.
    PacketDrop { drop_fraction: f64 },
    /// Drop packets and add network lag on top.
    PacketDropPlusLag { drop_fraction: f64, added_lag_ms: f64 },
    /// Flood: packet rate and CPU inflate by a common factor.
    DosFlood { surge_factor: f64 },
    /// Duplicated traffic plus tampered packets.
    DuplicationPlusTampering { dup_factor: f64, tampered_packets: u64 },
    /// Repeated login attempts from an unauthorized party.
    UnauthorizedAccess { attempts: u32 },
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::PacketDrop { .. } => "packet_drop",
            ScenarioKind::PacketDropPlusLag { .. } => "packet_drop_plus_lag",
            ScenarioKind::DosFlood { .. } => "dos_flood",
            ScenarioKind::DuplicationPlusTampering { .. } => "duplication_plus_tampering",
            ScenarioKind::UnauthorizedAccess { .. } => "unauthorized_access",
        }
    }
}

/// A fault scenario applied to a telemetry stream over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScenario {
    pub kind: ScenarioKind,
    /// Window start, seconds since session start.
    pub start_s: f64,
    /// Window length in seconds; must be positive.
    pub duration_s: f64,
}

impl AnomalyScenario {
    pub fn validate(&self) -> Result<()> {
        if !self.duration_s.is_finite() || self.duration_s <= 0.0 {
            return Err(Error::invalid_argument("scenario duration must be > 0"));
        }
        if !self.start_s.is_finite() {
            return Err(Error::invalid_argument("scenario start must be finite"));
        }
        match &self.kind {
            ScenarioKind::PacketDrop { drop_fraction } => {
                if !(0.0..=1.0).contains(drop_fraction) {
                    return Err(Error::invalid_argument("drop_fraction must be in [0, 1]"));
                }
            }
            ScenarioKind::PacketDropPlusLag { drop_fraction, added_lag_ms } => {
                if !(0.0..=1.0).contains(drop_fraction) {
                    return Err(Error::invalid_argument("drop_fraction must be in [0, 1]"));
                }
                if !added_lag_ms.is_finite() || *added_lag_ms < 0.0 {
                    return Err(Error::invalid_argument("added_lag_ms must be >= 0"));
                }
            }
            ScenarioKind::DosFlood { surge_factor } => {
                if !surge_factor.is_finite() || *surge_factor < 1.0 {
                    return Err(Error::invalid_argument("surge_factor must be >= 1"));
                }
            }
            ScenarioKind::DuplicationPlusTampering { dup_factor, .. } => {
                if !dup_factor.is_finite() || *dup_factor < 1.0 {
                    return Err(Error::invalid_argument("dup_factor must be >= 1"));
                }
            }
            ScenarioKind::UnauthorizedAccess { .. } => {}
        }
        Ok(())
    }

    /// True when `t` falls inside the scenario window `[start, start + duration)`.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t < self.start_s + self.duration_s
    }
}

/// Generates a benign telemetry stream of `floor(duration / step)` samples at
/// `t = 0, step, 2*step, ...`. Identical `(seed, duration, step)` inputs yield
/// bit-identical streams.
pub fn generate_baseline(
    seed: u64,
    duration_s: f64,
    step_s: f64,
    session_id: &str,
) -> Result<Vec<MetricSample>> {
    if !duration_s.is_finite() || duration_s <= 0.0 {
        return Err(Error::invalid_argument("duration must be > 0"));
    }
    if !step_s.is_finite() || step_s <= 0.0 {
        return Err(Error::invalid_argument("step must be > 0"));
    }
    let count = (duration_s / step_s).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = BASELINE_LATENCY_MS * BASELINE_LATENCY_JITTER;
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        // Fixed draw order keeps streams reproducible across calls.
        let packets_out = rng.random_range(BASELINE_MIN_PACKETS_OUT..=BASELINE_MAX_PACKETS_OUT);
        let cpu_utilization = rng.random_range(BASELINE_MIN_CPU..=BASELINE_MAX_CPU);
        let latency_ms = rng.random_range(BASELINE_LATENCY_MS - jitter..=BASELINE_LATENCY_MS + jitter);
        let login_attempts = rng.random_range(0..=1u32);
        samples.push(MetricSample {
            timestamp_s: i as f64 * step_s,
            packets_out,
            cpu_utilization,
            latency_ms,
            login_attempts,
            tampered_packets: 0,
            session_id: session_id.to_string(),
        });
    }
    Ok(samples)
}

/// Applies a scenario to a stream. Samples outside the scenario window are
/// returned bit-identical to the input; inside the window only the fields the
/// scenario targets are perturbed. Pure: no randomness is consumed.
pub fn inject(stream: &[MetricSample], scenario: &AnomalyScenario) -> Result<Vec<MetricSample>> {
    scenario.validate()?;
    let mut out = Vec::with_capacity(stream.len());
    for sample in stream {
        if !scenario.contains(sample.timestamp_s) {
            out.push(sample.clone());
            continue;
        }
        let mut s = sample.clone();
        match &scenario.kind {
            ScenarioKind::PacketDrop { drop_fraction } => {
                s.packets_out = scale_packets(s.packets_out, 1.0 - drop_fraction);
            }
            ScenarioKind::PacketDropPlusLag { drop_fraction, added_lag_ms } => {
                s.packets_out = scale_packets(s.packets_out, 1.0 - drop_fraction);
                s.latency_ms += added_lag_ms;
            }
            ScenarioKind::DosFlood { surge_factor } => {
                s.packets_out = scale_packets(s.packets_out, *surge_factor);
                s.cpu_utilization = (s.cpu_utilization * surge_factor).min(100.0);
            }
            ScenarioKind::DuplicationPlusTampering { dup_factor, tampered_packets } => {
                s.packets_out = scale_packets(s.packets_out, *dup_factor);
                s.tampered_packets = *tampered_packets;
            }
            ScenarioKind::UnauthorizedAccess { attempts } => {
                s.login_attempts = *attempts;
            }
        }
        out.push(s);
    }
    Ok(out)
}

fn scale_packets(packets: u64, factor: f64) -> u64 {
    (packets as f64 * factor).round().max(0.0) as u64
}
