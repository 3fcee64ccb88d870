//! Run configuration: one TOML document describing the telemetry to
//! synthesize, the monitor thresholds, the queue, and the control options.
//!
//! ```toml
//! [telemetry]
//! seed = 42
//! duration_s = 120.0
//! step_s = 1.0
//! session_id = "demo"
//!
//! [[telemetry.scenarios]]
//! kind = "packet_drop_plus_lag"
//! start_s = 30.0
//! duration_s = 20.0
//! drop_fraction = 0.2
//! added_lag_ms = 18.0
//!
//! [queue]
//! mu1 = 8.0
//! mu2 = 12.0
//! mu3 = 10.0
//! capacity_k = 64
//! ```
//!
//! Paths in `[paths]` are resolved relative to the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::monitor::{SeverityDefaults, ThresholdRuleSet};
use crate::queue::{OverflowPolicy, QueueConfig, StageRates};
use crate::telemetry::{AnomalyScenario, ScenarioKind, BASELINE_LATENCY_MS};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub telemetry: TelemetrySection,
    #[serde(default)]
    pub monitor: MonitorSection,
    pub queue: QueueSection,
    #[serde(default)]
    pub control: ControlSection,
    #[serde(default)]
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelemetrySection {
    pub seed: u64,
    pub duration_s: f64,
    pub step_s: f64,
    #[serde(default = "default_session_id")]
    pub session_id: String,
    #[serde(default)]
    pub scenarios: Vec<ScenarioEntry>,
}

fn default_session_id() -> String {
    "session".to_string()
}

/// Flat scenario form used in config files; magnitudes are per-kind.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioEntry {
    pub kind: String,
    pub start_s: f64,
    pub duration_s: f64,
    pub drop_fraction: Option<f64>,
    pub added_lag_ms: Option<f64>,
    pub surge_factor: Option<f64>,
    pub dup_factor: Option<f64>,
    pub tampered_packets: Option<u64>,
    pub login_attempts: Option<u32>,
}

impl ScenarioEntry {
    pub fn to_scenario(&self) -> Result<AnomalyScenario> {
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| {
                Error::Config(format!("scenario kind {:?} requires field {name}", self.kind))
            })
        };
        let kind = match self.kind.as_str() {
            "packet_drop" => ScenarioKind::PacketDrop {
                drop_fraction: need("drop_fraction", self.drop_fraction)?,
            },
            "packet_drop_plus_lag" => ScenarioKind::PacketDropPlusLag {
                drop_fraction: need("drop_fraction", self.drop_fraction)?,
                added_lag_ms: need("added_lag_ms", self.added_lag_ms)?,
            },
            "dos_flood" => ScenarioKind::DosFlood {
                surge_factor: need("surge_factor", self.surge_factor)?,
            },
            "duplication_plus_tampering" => ScenarioKind::DuplicationPlusTampering {
                dup_factor: need("dup_factor", self.dup_factor)?,
                tampered_packets: self.tampered_packets.unwrap_or(1),
            },
            "unauthorized_access" => ScenarioKind::UnauthorizedAccess {
                attempts: self.login_attempts.ok_or_else(|| {
                    Error::Config("scenario kind \"unauthorized_access\" requires login_attempts".into())
                })?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown scenario kind {other:?} (expected packet_drop, packet_drop_plus_lag, \
                     dos_flood, duplication_plus_tampering, or unauthorized_access)"
                )))
            }
        };
        let scenario =
            AnomalyScenario { kind, start_s: self.start_s, duration_s: self.duration_s };
        scenario.validate()?;
        Ok(scenario)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSection {
    pub thresholds: ThresholdRuleSet,
    pub severity_defaults: SeverityDefaults,
    pub baseline_latency_ms: f64,
}

impl Default for MonitorSection {
    fn default() -> Self {
        MonitorSection {
            thresholds: ThresholdRuleSet::default(),
            severity_defaults: SeverityDefaults::default(),
            baseline_latency_ms: BASELINE_LATENCY_MS,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueueSection {
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    pub capacity_k: usize,
    #[serde(default = "default_policy")]
    pub overflow_policy: OverflowPolicy,
    #[serde(default = "default_severe_threshold")]
    pub severe_threshold_ms: f64,
    /// Seed for the service-time draws (independent of the telemetry seed).
    #[serde(default)]
    pub seed: u64,
}

fn default_policy() -> OverflowPolicy {
    OverflowPolicy::RejectArrival
}

fn default_severe_threshold() -> f64 {
    15.0
}

impl QueueSection {
    pub fn to_queue_config(&self) -> Result<QueueConfig> {
        let config = QueueConfig {
            // The pipeline is trace-driven; arrivals come from the monitor.
            lambda: 0.0,
            rates: StageRates::new(self.mu1, self.mu2, self.mu3)?,
            capacity_k: self.capacity_k,
            overflow_policy: self.overflow_policy,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    /// Master switch; false reproduces the no-adaptation baseline.
    pub adapt: bool,
    /// Enact this catalog entry (when cataloged for the event's category)
    /// instead of the decision module's pick.
    pub force_adaptation: Option<String>,
    /// Active user count, drives per-user enactment times.
    pub users: u32,
}

impl Default for ControlSection {
    fn default() -> Self {
        ControlSection { adapt: true, force_adaptation: None, users: 1 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Adaptation catalog TOML; builtin catalog when omitted.
    pub catalog: Option<PathBuf>,
    /// Recommendation rules TOML; builtin rules when omitted.
    pub rules: Option<PathBuf>,
    /// Knowledge-base CSV; in-memory store when omitted.
    pub kb: Option<PathBuf>,
    /// Directory for report files; reports stay in memory when omitted.
    pub report_dir: Option<PathBuf>,
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub seed: Option<u64>,
    pub no_adaptation: bool,
    pub severe_threshold_ms: Option<f64>,
    pub kb_path: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads and validates a config file, resolving `[paths]` entries
    /// relative to the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            config.paths.resolve_relative_to(base);
        }
        Ok(config)
    }

    pub fn apply_overrides(&mut self, overrides: &RunOverrides) {
        if let Some(seed) = overrides.seed {
            self.telemetry.seed = seed;
        }
        if overrides.no_adaptation {
            self.control.adapt = false;
        }
        if let Some(t) = overrides.severe_threshold_ms {
            self.queue.severe_threshold_ms = t;
        }
        if let Some(kb) = &overrides.kb_path {
            self.paths.kb = Some(kb.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.telemetry.duration_s.is_finite() || self.telemetry.duration_s <= 0.0 {
            return Err(Error::Config("telemetry.duration_s must be > 0".into()));
        }
        if !self.telemetry.step_s.is_finite() || self.telemetry.step_s <= 0.0 {
            return Err(Error::Config("telemetry.step_s must be > 0".into()));
        }
        for entry in &self.telemetry.scenarios {
            entry.to_scenario()?;
        }
        self.monitor.thresholds.validate()?;
        if !self.monitor.baseline_latency_ms.is_finite() || self.monitor.baseline_latency_ms <= 0.0 {
            return Err(Error::Config("monitor.baseline_latency_ms must be > 0".into()));
        }
        self.queue.to_queue_config()?;
        if !self.queue.severe_threshold_ms.is_finite() || self.queue.severe_threshold_ms < 0.0 {
            return Err(Error::Config("queue.severe_threshold_ms must be >= 0".into()));
        }
        if self.control.users == 0 {
            return Err(Error::Config("control.users must be >= 1".into()));
        }
        Ok(())
    }
}

impl PathsSection {
    fn resolve_relative_to(&mut self, base: &Path) {
        for path in [&mut self.catalog, &mut self.rules, &mut self.kb, &mut self.report_dir]
            .into_iter()
            .flatten()
        {
            if path.is_relative() {
                *path = base.join(&path);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [telemetry]
        seed = 1
        duration_s = 10.0
        step_s = 1.0

        [queue]
        mu1 = 8.0
        mu2 = 12.0
        mu3 = 10.0
        capacity_k = 16
    "#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(config.telemetry.session_id, "session");
        assert!(config.telemetry.scenarios.is_empty());
        assert_eq!(config.monitor.thresholds, ThresholdRuleSet::default());
        assert_eq!(config.queue.severe_threshold_ms, 15.0);
        assert!(config.control.adapt);
        assert_eq!(config.control.users, 1);
        assert!(config.paths.kb.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[bogus]\nx = 1\n");
        assert!(matches!(ScenarioConfig::from_toml_str(&text), Err(Error::Config(_))));
    }

    #[test]
    fn scenario_entries_validate_per_kind() {
        let entry = ScenarioEntry {
            kind: "packet_drop".into(),
            start_s: 0.0,
            duration_s: 5.0,
            drop_fraction: Some(0.2),
            added_lag_ms: None,
            surge_factor: None,
            dup_factor: None,
            tampered_packets: None,
            login_attempts: None,
        };
        assert!(entry.to_scenario().is_ok());
        let missing = ScenarioEntry { drop_fraction: None, ..entry.clone() };
        assert!(missing.to_scenario().is_err());
        let unknown = ScenarioEntry { kind: "meteor_strike".into(), ..entry };
        assert!(matches!(unknown.to_scenario(), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_take_effect() {
        let mut config = ScenarioConfig::from_toml_str(MINIMAL).unwrap();
        config.apply_overrides(&RunOverrides {
            seed: Some(99),
            no_adaptation: true,
            severe_threshold_ms: Some(20.0),
            kb_path: Some(PathBuf::from("/tmp/kb.csv")),
        });
        assert_eq!(config.telemetry.seed, 99);
        assert!(!config.control.adapt);
        assert_eq!(config.queue.severe_threshold_ms, 20.0);
        assert_eq!(config.paths.kb.as_deref(), Some(Path::new("/tmp/kb.csv")));
    }

    #[test]
    fn invalid_numbers_fail_validation() {
        let text = MINIMAL.replace("duration_s = 10.0", "duration_s = 0.0");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
        let text = MINIMAL.replace("capacity_k = 16", "capacity_k = 0");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
        let text = MINIMAL.replace("mu2 = 12.0", "mu2 = -1.0");
        assert!(ScenarioConfig::from_toml_str(&text).is_err());
    }

    #[test]
    fn relative_paths_resolve_against_the_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("run.toml");
        std::fs::write(&config_path, format!("{MINIMAL}\n[paths]\nkb = \"out/kb.csv\"\n")).unwrap();
        let config = ScenarioConfig::load(&config_path).unwrap();
        assert_eq!(config.paths.kb.as_deref(), Some(dir.path().join("out/kb.csv").as_path()));
    }
}
