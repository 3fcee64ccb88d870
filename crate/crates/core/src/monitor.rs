//! Threshold alarms over telemetry, producing classified anomaly events.
//!
//! All comparisons are strict: a sample sitting exactly on a threshold is
//! benign. Every violated rule yields its own event, so one sample can raise
//! several. Severity is expressed in milliseconds of latency excess over the
//! session baseline; samples without inflated latency fall back to a
//! per-category default so the priority queue always has a total order.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::telemetry::{MetricSample, BASELINE_LATENCY_MS};

/// Anomaly classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnomalyCategory {
    /// Application performance issue (high CPU).
    QoA,
    /// Network service issue (packet rate below floor).
    QoS,
    /// Denial-of-service style traffic anomaly (packet surge or tampering).
    SecurityDoS,
    /// Unauthorized access (excess login attempts).
    Intrusion,
}

impl AnomalyCategory {
    pub const ALL: [AnomalyCategory; 4] = [
        AnomalyCategory::QoA,
        AnomalyCategory::QoS,
        AnomalyCategory::SecurityDoS,
        AnomalyCategory::Intrusion,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AnomalyCategory::QoA => "QoA",
            AnomalyCategory::QoS => "QoS",
            AnomalyCategory::SecurityDoS => "SecurityDoS",
            AnomalyCategory::Intrusion => "Intrusion",
        }
    }
}

impl fmt::Display for AnomalyCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyCategory {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qoa" => Ok(AnomalyCategory::QoA),
            "qos" => Ok(AnomalyCategory::QoS),
            "dos" | "securitydos" | "security_dos" => Ok(AnomalyCategory::SecurityDoS),
            "intrusion" | "ua" | "unauthorized_access" => Ok(AnomalyCategory::Intrusion),
            other => Err(Error::invalid_argument(format!(
                "unknown anomaly category {other:?} (expected QoA, QoS, SecurityDoS/DoS, or Intrusion/UA)"
            ))),
        }
    }
}

impl Serialize for AnomalyCategory {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AnomalyCategory {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A classified anomaly with a latency-excess severity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    /// Unique within a session (monotonically assigned by the monitor).
    pub id: u64,
    /// Seconds since session start.
    pub arrival_time_s: f64,
    pub category: AnomalyCategory,
    /// Name of the metric that tripped the rule.
    pub trigger_metric: String,
    /// Observed value of that metric.
    pub trigger_value: f64,
    /// Milliseconds of latency excess over baseline, >= 0.
    pub severity_ms: f64,
    pub session_id: String,
}

/// Alarm thresholds. Defaults follow the monitored session's operating floor:
/// packet rate below 7280 pkt/s, CPU above 8%, more than 5 login attempts, or
/// a packet surge past 2x the rolling baseline median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdRuleSet {
    pub qos_min_packets_out: u64,
    pub qoa_max_cpu: f64,
    pub intrusion_max_logins: u32,
    pub dos_packet_surge_factor: f64,
}

impl Default for ThresholdRuleSet {
    fn default() -> Self {
        ThresholdRuleSet {
            qos_min_packets_out: 7280,
            qoa_max_cpu: 8.0,
            intrusion_max_logins: 5,
            dos_packet_surge_factor: 2.0,
        }
    }
}

impl ThresholdRuleSet {
    pub fn validate(&self) -> Result<()> {
        if self.qos_min_packets_out == 0 {
            return Err(Error::invalid_argument("qos_min_packets_out must be > 0"));
        }
        if !self.qoa_max_cpu.is_finite() || self.qoa_max_cpu <= 0.0 {
            return Err(Error::invalid_argument("qoa_max_cpu must be > 0"));
        }
        if self.intrusion_max_logins == 0 {
            return Err(Error::invalid_argument("intrusion_max_logins must be > 0"));
        }
        if !self.dos_packet_surge_factor.is_finite() || self.dos_packet_surge_factor <= 0.0 {
            return Err(Error::invalid_argument("dos_packet_surge_factor must be > 0"));
        }
        Ok(())
    }
}

/// Fallback severities (ms of latency excess) for events whose sample carries
/// no inflated latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeverityDefaults {
    pub qoa_ms: f64,
    pub qos_ms: f64,
    pub dos_ms: f64,
    pub intrusion_ms: f64,
}

impl Default for SeverityDefaults {
    fn default() -> Self {
        SeverityDefaults { qoa_ms: 10.0, qos_ms: 12.0, dos_ms: 15.0, intrusion_ms: 8.0 }
    }
}

impl SeverityDefaults {
    pub fn for_category(&self, category: AnomalyCategory) -> f64 {
        match category {
            AnomalyCategory::QoA => self.qoa_ms,
            AnomalyCategory::QoS => self.qos_ms,
            AnomalyCategory::SecurityDoS => self.dos_ms,
            AnomalyCategory::Intrusion => self.intrusion_ms,
        }
    }
}

/// Latency excess over baseline, clamped at zero.
pub fn estimate_severity(sample: &MetricSample, baseline_latency_ms: f64) -> f64 {
    (sample.latency_ms - baseline_latency_ms).max(0.0)
}

/// Stateful alarm evaluator for one session.
///
/// Holds the rolling packet-rate window backing the surge rule and the event
/// id counter; instances are independent and can move between threads, but a
/// single instance is not meant to be shared concurrently.
#[derive(Debug, Clone)]
pub struct Monitor {
    rules: ThresholdRuleSet,
    severity_defaults: SeverityDefaults,
    baseline_latency_ms: f64,
    /// Recent benign packet rates; the surge rule compares against their median.
    packet_window: VecDeque<u64>,
    window_capacity: usize,
    next_id: u64,
}

impl Monitor {
    pub fn new(rules: ThresholdRuleSet) -> Self {
        Monitor {
            rules,
            severity_defaults: SeverityDefaults::default(),
            baseline_latency_ms: BASELINE_LATENCY_MS,
            packet_window: VecDeque::new(),
            window_capacity: 64,
            next_id: 1,
        }
    }

    pub fn with_severity_defaults(mut self, defaults: SeverityDefaults) -> Self {
        self.severity_defaults = defaults;
        self
    }

    pub fn with_baseline_latency(mut self, baseline_ms: f64) -> Self {
        self.baseline_latency_ms = baseline_ms;
        self
    }

    pub fn rules(&self) -> &ThresholdRuleSet {
        &self.rules
    }

    pub fn baseline_latency_ms(&self) -> f64 {
        self.baseline_latency_ms
    }

    /// Applies every threshold rule to one sample; returns one event per
    /// violated rule (possibly none). Total over valid samples.
    pub fn evaluate(&mut self, sample: &MetricSample) -> Vec<AnomalyEvent> {
        let mut events = Vec::new();

        if sample.packets_out < self.rules.qos_min_packets_out {
            events.push(self.event(sample, AnomalyCategory::QoS, "packets_out", sample.packets_out as f64));
        }
        if sample.cpu_utilization > self.rules.qoa_max_cpu {
            events.push(self.event(sample, AnomalyCategory::QoA, "cpu_utilization", sample.cpu_utilization));
        }
        if sample.login_attempts > self.rules.intrusion_max_logins {
            events.push(self.event(sample, AnomalyCategory::Intrusion, "login_attempts", sample.login_attempts as f64));
        }

        let mut dos = false;
        if let Some(median) = self.rolling_median() {
            if (sample.packets_out as f64) > self.rules.dos_packet_surge_factor * median {
                events.push(self.event(sample, AnomalyCategory::SecurityDoS, "packets_out", sample.packets_out as f64));
                dos = true;
            }
        }
        if !dos && sample.tampered_packets > 0 {
            events.push(self.event(sample, AnomalyCategory::SecurityDoS, "tampered_packets", sample.tampered_packets as f64));
            dos = true;
        }

        // Only rates that did not look like a surge feed the baseline window,
        // so a sustained flood cannot drag the median up after itself.
        if !dos {
            if self.packet_window.len() == self.window_capacity {
                self.packet_window.pop_front();
            }
            self.packet_window.push_back(sample.packets_out);
        }

        events
    }

    fn event(
        &mut self,
        sample: &MetricSample,
        category: AnomalyCategory,
        metric: &str,
        value: f64,
    ) -> AnomalyEvent {
        let excess = estimate_severity(sample, self.baseline_latency_ms);
        let severity_ms = if excess > 0.0 {
            excess
        } else {
            self.severity_defaults.for_category(category)
        };
        let id = self.next_id;
        self.next_id += 1;
        AnomalyEvent {
            id,
            arrival_time_s: sample.timestamp_s,
            category,
            trigger_metric: metric.to_string(),
            trigger_value: value,
            severity_ms,
            session_id: sample.session_id.clone(),
        }
    }

    fn rolling_median(&self) -> Option<f64> {
        if self.packet_window.is_empty() {
            return None;
        }
        let mut rates: Vec<u64> = self.packet_window.iter().copied().collect();
        rates.sort_unstable();
        let n = rates.len();
        Some(if n % 2 == 1 {
            rates[n / 2] as f64
        } else {
            (rates[n / 2 - 1] as f64 + rates[n / 2] as f64) / 2.0
        })
    }
}
