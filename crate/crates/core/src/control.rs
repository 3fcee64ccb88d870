//! Risk and cost aware adaptation control.
//!
//! Holds the adaptation catalog (what each adaptation costs, how long it
//! takes to enact, and what it does to the session), the failure-risk and
//! cost bucket scoring, the IF–THEN–ELSE recommendation rules, and the
//! enactment/feedback model.
//!
//! The latency effect model scales the *excess* over the session baseline by
//! `1 - delta_cs`, leaving the baseline itself a fixed point: an adaptation
//! can remove discomfort, not make a healthy session faster. Feedback then
//! recovers `delta_cs` exactly from the pre/post excess pair.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kb::{KbRecord, KnowledgeBase};
use crate::monitor::AnomalyCategory;
use crate::telemetry::BASELINE_LATENCY_MS;

/// Semi-quantitative bucket used for both risk and cost levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Low,
    Medium,
    High,
}

impl Level {
    pub fn letter(&self) -> &'static str {
        match self {
            Level::Low => "L",
            Level::Medium => "M",
            Level::High => "H",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Level::Low => "Low",
            Level::Medium => "Medium",
            Level::High => "High",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l" | "low" => Ok(Level::Low),
            "m" | "medium" => Ok(Level::Medium),
            "h" | "high" => Ok(Level::High),
            other => Err(Error::invalid_argument(format!(
                "unknown level {other:?} (expected low, medium, or high)"
            ))),
        }
    }
}

impl Serialize for Level {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(match self {
            Level::Low => "low",
            Level::Medium => "medium",
            Level::High => "high",
        })
    }
}

impl<'de> Deserialize<'de> for Level {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Outcome of the failure-risk formula `Rf = 1 - (L + I) / 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskAssessment {
    pub likelihood: f64,
    pub impact: f64,
    pub failure_risk: f64,
    pub bucket: Level,
}

/// Failure risk from decision likelihood and impact, both on the 0–1 scale
/// (1 = very high). Low confidence in either drives the risk up.
pub fn assess_risk(likelihood: f64, impact: f64) -> Result<RiskAssessment> {
    for (name, v) in [("likelihood", likelihood), ("impact", impact)] {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid_argument(format!("{name} must be in [0, 1], got {v}")));
        }
    }
    let failure_risk = 1.0 - (likelihood + impact) / 2.0;
    Ok(RiskAssessment { likelihood, impact, failure_risk, bucket: risk_bucket(failure_risk) })
}

/// Buckets a failure risk: below 1/3 low, below 2/3 medium, else high.
pub fn risk_bucket(failure_risk: f64) -> Level {
    if failure_risk < 1.0 / 3.0 {
        Level::Low
    } else if failure_risk < 2.0 / 3.0 {
        Level::Medium
    } else {
        Level::High
    }
}

/// Buckets an hourly cost: below $0.25 low, below $2.50 medium, else high.
/// The boundaries keep every catalog (cost, label) pair consistent.
pub fn cost_bucket(cost_per_hr: f64) -> Result<Level> {
    if !cost_per_hr.is_finite() || cost_per_hr < 0.0 {
        return Err(Error::invalid_argument("cost must be finite and >= 0"));
    }
    Ok(if cost_per_hr < 0.25 {
        Level::Low
    } else if cost_per_hr < 2.5 {
        Level::Medium
    } else {
        Level::High
    })
}

/// Rank-based decision likelihood: the head of a sorted candidate list of
/// size `n` scores 1, the tail approaches `1/n`. Rank is 1-based.
pub fn likelihood_from_rank(rank: usize, candidates: usize) -> f64 {
    assert!(rank >= 1 && candidates >= rank, "rank {rank} of {candidates}");
    1.0 - (rank - 1) as f64 / candidates as f64
}

/// Enactment response time: fixed seconds or scaled by active user count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rat {
    Fixed(f64),
    PerUser { per_user_s: f64 },
}

impl Rat {
    pub fn seconds(&self, users: u32) -> f64 {
        match self {
            Rat::Fixed(s) => *s,
            Rat::PerUser { per_user_s } => per_user_s * users as f64,
        }
    }

    /// Value used when ordering candidates (single-user nominal).
    pub fn sort_seconds(&self) -> f64 {
        self.seconds(1)
    }
}

/// Machine-applicable post-condition of an adaptation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdEffect {
    /// Pin CPU utilization to the given percentage.
    SetCpuPercent(f64),
    /// Bring the packet rate back up to at least the given floor.
    RestorePacketRate(u64),
    /// Cap login attempts at the given count.
    CapLoginAttempts(u32),
}

/// One catalog row: an adaptation, what it targets, and what it does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationCatalogEntry {
    pub name: String,
    pub description: String,
    /// The anomaly category this entry is cataloged under.
    pub anomaly_issue: AnomalyCategory,
    pub cost_per_hr: f64,
    pub rat_s: Rat,
    /// Fractional reduction of latency excess, when measured.
    #[serde(default)]
    pub delta_cs: Option<f64>,
    /// Human-readable threshold post-condition for reports.
    #[serde(default)]
    pub threshold_metric: String,
    /// Machine effects applied on enactment.
    #[serde(default)]
    pub effects: Vec<ThresholdEffect>,
    /// True for bundled adaptations (cost summed, enactment time is the max).
    #[serde(default)]
    pub combination: bool,
}

impl AdaptationCatalogEntry {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config("catalog entry has an empty name".into()));
        }
        if !self.cost_per_hr.is_finite() || self.cost_per_hr < 0.0 {
            return Err(Error::Config(format!("{}: cost_per_hr must be >= 0", self.name)));
        }
        if self.rat_s.sort_seconds() < 0.0 || !self.rat_s.sort_seconds().is_finite() {
            return Err(Error::Config(format!("{}: rat_s must be >= 0", self.name)));
        }
        if let Some(d) = self.delta_cs {
            if !d.is_finite() || !(0.0..=1.0).contains(&d) {
                return Err(Error::Config(format!("{}: delta_cs must be in [0, 1]", self.name)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptationCatalog {
    #[serde(rename = "adaptation")]
    pub entries: Vec<AdaptationCatalogEntry>,
}

impl AdaptationCatalog {
    /// The catalog shipped with the crate: A1–A8 plus the measured bundles.
    pub fn builtin() -> Self {
        use AnomalyCategory::*;
        use ThresholdEffect::*;
        let entry = |name: &str,
                     description: &str,
                     anomaly_issue: AnomalyCategory,
                     cost_per_hr: f64,
                     rat_s: Rat,
                     delta_cs: Option<f64>,
                     threshold_metric: &str,
                     effects: Vec<ThresholdEffect>,
                     combination: bool| AdaptationCatalogEntry {
            name: name.into(),
            description: description.into(),
            anomaly_issue,
            cost_per_hr,
            rat_s,
            delta_cs,
            threshold_metric: threshold_metric.into(),
            effects,
            combination,
        };
        AdaptationCatalog {
            entries: vec![
                entry("A1", "Upgrading Instance Type", QoA, 0.23, Rat::Fixed(0.54),
                    Some(0.2643), "CPU utilization rate is decreased to 4%",
                    vec![SetCpuPercent(4.0)], false),
                entry("A2", "Higher Resources", QoA, 2.4, Rat::Fixed(300.0),
                    Some(0.1346), "", vec![], false),
                entry("A3", "Modifying Instance Volume", QoA, 0.10, Rat::Fixed(120.0),
                    None, "", vec![], false),
                entry("A4", "Enabling Enhanced Networking", QoS, 0.10, Rat::Fixed(1.0),
                    Some(0.3028), "Packet rate at 7280 packets/second",
                    vec![RestorePacketRate(7280)], false),
                entry("A5", "Higher Network Bandwidth", QoS, 0.10, Rat::Fixed(300.0),
                    None, "", vec![], false),
                entry("A6", "Amazon Route 53", SecurityDoS, 0.50, Rat::Fixed(60.0),
                    None, "Packet rate restored via DNS failover",
                    vec![RestorePacketRate(7280)], false),
                entry("A7", "AWS GuardDuty", SecurityDoS, 0.33, Rat::Fixed(0.51),
                    None, "Packet data measure", vec![RestorePacketRate(7280)], false),
                entry("A8", "Blacklist IP via third-party app", Intrusion, 0.02,
                    Rat::PerUser { per_user_s: 0.1 }, Some(0.207),
                    "Number of login attempts <5", vec![CapLoginAttempts(4)], false),
                entry("A1+A4", "Upgrading Instance Type + Enhanced Networking", QoA, 0.33,
                    Rat::Fixed(1.0), Some(0.2939), "CPU at 4%, packet rate restored",
                    vec![SetCpuPercent(4.0), RestorePacketRate(7280)], true),
                entry("A1+A4", "Upgrading Instance Type + Enhanced Networking", QoS, 0.33,
                    Rat::Fixed(1.0), Some(0.2048), "CPU at 4%, packet rate restored",
                    vec![SetCpuPercent(4.0), RestorePacketRate(7280)], true),
                entry("A1+A6", "Upgrading Instance Type + Route 53", SecurityDoS, 0.73,
                    Rat::Fixed(60.0), Some(0.361), "CPU at 4%, packet rate restored",
                    vec![SetCpuPercent(4.0), RestorePacketRate(7280)], true),
                entry("A1+A7", "Upgrading Instance Type + GuardDuty", SecurityDoS, 0.56,
                    Rat::Fixed(0.54), None, "CPU at 4%, packet rate restored",
                    vec![SetCpuPercent(4.0), RestorePacketRate(7280)], true),
            ],
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let catalog: AdaptationCatalog =
            toml::from_str(text).map_err(|e| Error::Config(format!("catalog: {e}")))?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for entry in &self.entries {
            entry.validate()?;
            if !seen.insert((entry.anomaly_issue, entry.name.clone())) {
                return Err(Error::Config(format!(
                    "duplicate catalog entry ({}, {})",
                    entry.anomaly_issue, entry.name
                )));
            }
        }
        Ok(())
    }

    /// Plain (non-bundle) adaptations cataloged under a category, in catalog
    /// order; these seed the decision units.
    pub fn candidates_for(&self, category: AnomalyCategory) -> Vec<&AdaptationCatalogEntry> {
        self.entries
            .iter()
            .filter(|e| e.anomaly_issue == category && !e.combination)
            .collect()
    }

    /// Entry for `(category, name)`, falling back to the first entry with the
    /// name under any category (rules may recommend across categories).
    pub fn find(&self, category: AnomalyCategory, name: &str) -> Option<&AdaptationCatalogEntry> {
        self.entries
            .iter()
            .find(|e| e.anomaly_issue == category && e.name == name)
            .or_else(|| self.entries.iter().find(|e| e.name == name))
    }

    pub fn contains_name(&self, name: &str) -> bool {
        self.entries.iter().any(|e| e.name == name)
    }
}

/// One branch of a recommendation rule, carrying its published risk/cost
/// levels and measured reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcaBranch {
    pub adaptation: String,
    pub risk_level: Level,
    pub cost_level: Level,
    #[serde(default)]
    pub delta_cs: Option<f64>,
}

/// IF (anomaly, scenario) THEN branch ELSE branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcaRule {
    pub anomaly: AnomalyCategory,
    pub scenario: String,
    #[serde(rename = "then")]
    pub then_branch: EcaBranch,
    #[serde(rename = "else")]
    pub else_branch: EcaBranch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EcaRuleSet {
    #[serde(rename = "rule")]
    pub rules: Vec<EcaRule>,
}

impl EcaRuleSet {
    /// The recommendation table shipped with the crate.
    pub fn builtin() -> Self {
        use AnomalyCategory::*;
        let branch = |adaptation: &str, risk: Level, cost: Level, delta: Option<f64>| EcaBranch {
            adaptation: adaptation.into(),
            risk_level: risk,
            cost_level: cost,
            delta_cs: delta,
        };
        EcaRuleSet {
            rules: vec![
                EcaRule {
                    anomaly: QoA,
                    scenario: "Increasing number of users; To improve application run time".into(),
                    then_branch: branch("A1", Level::Low, Level::Low, Some(0.2643)),
                    else_branch: branch("A2", Level::Medium, Level::Medium, Some(0.1346)),
                },
                EcaRule {
                    anomaly: QoS,
                    scenario: "Lower latency in VRLE content".into(),
                    then_branch: branch("A4", Level::Low, Level::Low, Some(0.3028)),
                    else_branch: branch("A1+A4", Level::Low, Level::Medium, Some(0.2048)),
                },
                EcaRule {
                    anomaly: Intrusion,
                    scenario: "Only valid users in VRLE session".into(),
                    then_branch: branch("A8", Level::Low, Level::Low, Some(0.207)),
                    else_branch: branch("A7", Level::Medium, Level::High, None),
                },
                EcaRule {
                    anomaly: SecurityDoS,
                    scenario: "Avoid loss of content availability".into(),
                    then_branch: branch("A1+A6", Level::Medium, Level::Medium, Some(0.361)),
                    else_branch: branch("A1+A7", Level::Medium, Level::High, None),
                },
            ],
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let rules: EcaRuleSet =
            toml::from_str(text).map_err(|e| Error::Config(format!("rules: {e}")))?;
        Ok(rules)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_toml_str(&text)
    }

    /// Every branch must name a cataloged adaptation.
    pub fn validate(&self, catalog: &AdaptationCatalog) -> Result<()> {
        for rule in &self.rules {
            for branch in [&rule.then_branch, &rule.else_branch] {
                if !catalog.contains_name(&branch.adaptation) {
                    return Err(Error::Config(format!(
                        "rule ({}, {:?}) references unknown adaptation {}",
                        rule.anomaly, rule.scenario, branch.adaptation
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Picks a rule branch for `(anomaly, scenario_key)`. The THEN branch wins
/// when the caller's precondition holds and its published risk and cost
/// levels fit inside the caps; otherwise the ELSE branch is returned.
/// Scenario matching is a case-insensitive substring test.
pub fn recommend<'a>(
    rules: &'a EcaRuleSet,
    anomaly: AnomalyCategory,
    scenario_key: &str,
    max_risk: Level,
    max_cost: Level,
    then_viable: bool,
) -> Result<&'a EcaBranch> {
    let key = scenario_key.to_lowercase();
    let rule = rules
        .rules
        .iter()
        .find(|r| r.anomaly == anomaly && r.scenario.to_lowercase().contains(&key))
        .ok_or_else(|| Error::NoRecommendation {
            anomaly: anomaly.to_string(),
            scenario: scenario_key.to_string(),
        })?;
    let then = &rule.then_branch;
    if then_viable && then.risk_level <= max_risk && then.cost_level <= max_cost {
        Ok(then)
    } else {
        Ok(&rule.else_branch)
    }
}

/// Observable session state the control loop acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub latency_ms: f64,
    pub cpu_utilization: f64,
    pub packets_out: u64,
    pub login_attempts: u32,
    /// Total adaptation spend so far; never decreases within a session.
    pub accrued_cost: f64,
    pub active_adaptations: BTreeSet<String>,
}

impl SystemState {
    /// Healthy mid-band session state.
    pub fn startup() -> Self {
        SystemState {
            latency_ms: BASELINE_LATENCY_MS,
            cpu_utilization: 5.0,
            packets_out: 7640,
            login_attempts: 0,
            accrued_cost: 0.0,
            active_adaptations: BTreeSet::new(),
        }
    }
}

/// Timing context for one enactment.
#[derive(Debug, Clone, Copy)]
pub struct EnactContext {
    /// Simulated time the decision lands, seconds.
    pub clock_s: f64,
    /// End of the session; the adaptation stays active (and billed) until then.
    pub session_end_s: f64,
    /// Active user count (drives per-user enactment times).
    pub users: u32,
    pub baseline_latency_ms: f64,
}

/// What one enactment did.
#[derive(Debug, Clone, PartialEq)]
pub struct EnactmentRecord {
    pub adaptation: String,
    /// When the effect lands: decision time plus enactment response time.
    pub applied_at_s: f64,
    pub rat_s: f64,
    pub pre_latency_ms: f64,
    pub post_latency_ms: f64,
    pub active_hours: f64,
    pub cost_accrued: f64,
}

/// Applies an adaptation to the session state: latency excess scales by
/// `1 - delta_cs`, threshold effects land, and cost accrues for the time the
/// adaptation stays active. The effect lands `rat` seconds after `clock`.
pub fn enact(
    entry: &AdaptationCatalogEntry,
    state: &SystemState,
    ctx: &EnactContext,
) -> Result<(SystemState, EnactmentRecord)> {
    if entry.delta_cs.is_none() && entry.effects.is_empty() {
        return Err(Error::UnknownEffect(entry.name.clone()));
    }
    entry.validate().map_err(|e| Error::invalid_argument(e.to_string()))?;

    let rat_s = entry.rat_s.seconds(ctx.users);
    let applied_at_s = ctx.clock_s + rat_s;
    let active_hours = ((ctx.session_end_s - applied_at_s).max(0.0)) / 3600.0;
    let cost_accrued = entry.cost_per_hr * active_hours;

    let mut next = state.clone();
    if let Some(delta) = entry.delta_cs {
        let excess = (state.latency_ms - ctx.baseline_latency_ms).max(0.0);
        next.latency_ms = ctx.baseline_latency_ms + excess * (1.0 - delta);
    }
    for effect in &entry.effects {
        match effect {
            ThresholdEffect::SetCpuPercent(v) => next.cpu_utilization = *v,
            ThresholdEffect::RestorePacketRate(floor) => {
                next.packets_out = next.packets_out.max(*floor)
            }
            ThresholdEffect::CapLoginAttempts(cap) => {
                next.login_attempts = next.login_attempts.min(*cap)
            }
        }
    }
    next.accrued_cost += cost_accrued;
    next.active_adaptations.insert(entry.name.clone());

    let record = EnactmentRecord {
        adaptation: entry.name.clone(),
        applied_at_s,
        rat_s,
        pre_latency_ms: state.latency_ms,
        post_latency_ms: next.latency_ms,
        active_hours,
        cost_accrued,
    };
    Ok((next, record))
}

/// Scope metadata for one feedback measurement.
#[derive(Debug, Clone)]
pub struct FeedbackCtx<'a> {
    pub session_id: &'a str,
    pub timestamp_s: f64,
    pub baseline_latency_ms: f64,
    /// Anomaly category the adaptation was applied to (the decision units for
    /// that category are what this measurement trains).
    pub category: AnomalyCategory,
}

/// Measures the realized impact of an enactment from the pre/post latency
/// pair and persists it: `i = (pre_excess - post_excess) / pre_excess`,
/// clamped to [0, 1].
pub fn feedback(
    pre_latency_ms: f64,
    post_latency_ms: f64,
    entry: &AdaptationCatalogEntry,
    kb: &mut KnowledgeBase,
    ctx: &FeedbackCtx<'_>,
) -> Result<f64> {
    let pre_excess = pre_latency_ms - ctx.baseline_latency_ms;
    if pre_excess <= 0.0 {
        return Err(Error::NothingToMeasure);
    }
    let post_excess = (post_latency_ms - ctx.baseline_latency_ms).max(0.0);
    let impact = ((pre_excess - post_excess) / pre_excess).clamp(0.0, 1.0);
    kb.append(KbRecord::feedback_measured(
        ctx.session_id,
        ctx.timestamp_s,
        ctx.category,
        &entry.name,
        impact,
        Some(post_latency_ms),
    ))?;
    Ok(impact)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_formula_corners() {
        let r = assess_risk(1.0, 1.0).unwrap();
        assert_eq!(r.failure_risk, 0.0);
        assert_eq!(r.bucket, Level::Low);
        let r = assess_risk(0.0, 0.0).unwrap();
        assert_eq!(r.failure_risk, 1.0);
        assert_eq!(r.bucket, Level::High);
        let r = assess_risk(0.8, 0.6).unwrap();
        assert!((r.failure_risk - 0.3).abs() < 1e-15);
        assert_eq!(r.bucket, Level::Low);
        assert!(assess_risk(1.2, 0.0).is_err());
        assert!(assess_risk(0.5, -0.1).is_err());
    }

    #[test]
    fn cost_buckets_match_catalog_labels() {
        assert_eq!(cost_bucket(0.23).unwrap(), Level::Low); // A1
        assert_eq!(cost_bucket(2.4).unwrap(), Level::Medium); // A2
        assert_eq!(cost_bucket(0.0).unwrap(), Level::Low);
        assert_eq!(cost_bucket(2.5).unwrap(), Level::High);
        assert!(cost_bucket(-0.1).is_err());
    }

    #[test]
    fn builtin_catalog_is_valid_and_complete() {
        let catalog = AdaptationCatalog::builtin();
        catalog.validate().unwrap();
        for category in AnomalyCategory::ALL {
            assert!(!catalog.candidates_for(category).is_empty(), "{category} has no candidates");
        }
        // Category-specific bundles resolve to the right measured reduction.
        let qoa = catalog.find(AnomalyCategory::QoA, "A1+A4").unwrap();
        assert_eq!(qoa.delta_cs, Some(0.2939));
        let qos = catalog.find(AnomalyCategory::QoS, "A1+A4").unwrap();
        assert_eq!(qos.delta_cs, Some(0.2048));
        // Cross-category fallback (rules may recommend A7 for intrusions).
        assert!(catalog.find(AnomalyCategory::Intrusion, "A7").is_some());
        assert!(catalog.find(AnomalyCategory::QoA, "nope").is_none());
    }

    #[test]
    fn builtin_rules_reference_the_catalog() {
        let catalog = AdaptationCatalog::builtin();
        let rules = EcaRuleSet::builtin();
        rules.validate(&catalog).unwrap();
    }

    #[test]
    fn recommend_follows_caps_and_preconditions() {
        let rules = EcaRuleSet::builtin();
        let b = recommend(&rules, AnomalyCategory::QoA, "improve application run time",
            Level::Low, Level::Low, true).unwrap();
        assert_eq!(b.adaptation, "A1");
        assert_eq!(b.delta_cs, Some(0.2643));

        let b = recommend(&rules, AnomalyCategory::QoS, "lower latency",
            Level::Low, Level::Low, true).unwrap();
        assert_eq!(b.adaptation, "A4");
        assert_eq!(b.delta_cs, Some(0.3028));

        // THEN branch ruled out by a failed caller precondition.
        let b = recommend(&rules, AnomalyCategory::Intrusion, "only valid users",
            Level::Medium, Level::High, false).unwrap();
        assert_eq!(b.adaptation, "A7");

        // Tight caps push the DoS rule to its ELSE branch.
        let b = recommend(&rules, AnomalyCategory::SecurityDoS, "content availability",
            Level::Low, Level::Low, true).unwrap();
        assert_eq!(b.adaptation, "A1+A7");

        assert!(matches!(
            recommend(&rules, AnomalyCategory::QoA, "no such scenario", Level::High, Level::High, true),
            Err(Error::NoRecommendation { .. })
        ));
    }

    #[test]
    fn recommend_is_deterministic() {
        let rules = EcaRuleSet::builtin();
        let a = recommend(&rules, AnomalyCategory::QoS, "lower latency", Level::High, Level::Medium, true).unwrap();
        let b = recommend(&rules, AnomalyCategory::QoS, "lower latency", Level::High, Level::Medium, true).unwrap();
        assert_eq!(a, b);
    }

    fn ctx() -> EnactContext {
        EnactContext {
            clock_s: 0.0,
            session_end_s: 3600.0,
            users: 1,
            baseline_latency_ms: BASELINE_LATENCY_MS,
        }
    }

    #[test]
    fn enact_scales_latency_excess() {
        let catalog = AdaptationCatalog::builtin();
        let a1 = catalog.find(AnomalyCategory::QoA, "A1").unwrap();
        let mut state = SystemState::startup();
        state.latency_ms = 40.0;
        state.cpu_utilization = 9.0;
        let (next, record) = enact(a1, &state, &ctx()).unwrap();
        assert!((next.latency_ms - 35.63905).abs() < 1e-9);
        assert!((next.latency_ms - (23.5 + 16.5 * (1.0 - 0.2643))).abs() < 1e-12);
        assert_eq!(next.cpu_utilization, 4.0);
        assert_eq!(record.rat_s, 0.54);
        assert!(next.active_adaptations.contains("A1"));
    }

    #[test]
    fn zero_delta_leaves_latency_alone() {
        let entry = AdaptationCatalogEntry {
            name: "X".into(),
            description: "test".into(),
            anomaly_issue: AnomalyCategory::QoA,
            cost_per_hr: 0.0,
            rat_s: Rat::Fixed(0.0),
            delta_cs: Some(0.0),
            threshold_metric: String::new(),
            effects: vec![],
            combination: false,
        };
        let mut state = SystemState::startup();
        state.latency_ms = 40.0;
        let (next, _) = enact(&entry, &state, &ctx()).unwrap();
        assert_eq!(next.latency_ms, 40.0);
    }

    #[test]
    fn effectless_entries_cannot_be_enacted() {
        let catalog = AdaptationCatalog::builtin();
        let a3 = catalog.find(AnomalyCategory::QoA, "A3").unwrap();
        let state = SystemState::startup();
        assert!(matches!(enact(a3, &state, &ctx()), Err(Error::UnknownEffect(_))));
    }

    #[test]
    fn cost_accrues_for_the_active_window() {
        let catalog = AdaptationCatalog::builtin();
        let a2 = catalog.find(AnomalyCategory::QoA, "A2").unwrap();
        let mut state = SystemState::startup();
        state.latency_ms = 30.0;
        let ctx = EnactContext { clock_s: 300.0, ..ctx() };
        let (next, record) = enact(a2, &state, &ctx).unwrap();
        // Applied at 600 s, active for 3000 s = 5/6 h at $2.4/hr.
        assert!((record.active_hours - 3000.0 / 3600.0).abs() < 1e-12);
        assert!((record.cost_accrued - 2.4 * 3000.0 / 3600.0).abs() < 1e-9);
        assert!((next.accrued_cost - record.cost_accrued).abs() < 1e-12);
    }

    #[test]
    fn per_user_rat_scales() {
        let catalog = AdaptationCatalog::builtin();
        let a8 = catalog.find(AnomalyCategory::Intrusion, "A8").unwrap();
        assert!((a8.rat_s.seconds(12) - 1.2).abs() < 1e-12);
        assert!((a8.rat_s.sort_seconds() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn feedback_recovers_the_measured_reduction() {
        let catalog = AdaptationCatalog::builtin();
        let a1 = catalog.find(AnomalyCategory::QoA, "A1").unwrap();
        let mut kb = KnowledgeBase::in_memory();
        let fctx = FeedbackCtx {
            session_id: "s",
            timestamp_s: 1.0,
            baseline_latency_ms: BASELINE_LATENCY_MS,
            category: AnomalyCategory::QoA,
        };
        let i = feedback(40.0, 35.63905, a1, &mut kb, &fctx).unwrap();
        assert!((i - 0.2643).abs() < 1e-9);
        assert_eq!(kb.len(), 1);

        let i = feedback(40.0, 40.0, a1, &mut kb, &FeedbackCtx { timestamp_s: 2.0, ..fctx.clone() }).unwrap();
        assert_eq!(i, 0.0);
        let i = feedback(40.0, 23.5, a1, &mut kb, &FeedbackCtx { timestamp_s: 3.0, ..fctx.clone() }).unwrap();
        assert_eq!(i, 1.0);
        assert!(matches!(
            feedback(23.5, 23.5, a1, &mut kb, &FeedbackCtx { timestamp_s: 4.0, ..fctx }),
            Err(Error::NothingToMeasure)
        ));
    }

    #[test]
    fn catalog_toml_round_trips() {
        let catalog = AdaptationCatalog::builtin();
        let text = toml::to_string_pretty(&catalog).unwrap();
        let parsed = AdaptationCatalog::from_toml_str(&text).unwrap();
        assert_eq!(parsed, catalog);
        let rules = EcaRuleSet::builtin();
        let text = toml::to_string_pretty(&rules).unwrap();
        let parsed = EcaRuleSet::from_toml_str(&text).unwrap();
        assert_eq!(parsed, rules);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn risk_is_symmetric_and_decreasing(
                l in 0.0f64..=1.0,
                i in 0.0f64..=1.0,
                eps in 0.001f64..0.2,
            ) {
                let a = assess_risk(l, i).unwrap();
                let b = assess_risk(i, l).unwrap();
                prop_assert_eq!(a.failure_risk, b.failure_risk);
                prop_assert!((a.failure_risk - (1.0 - (l + i) / 2.0)).abs() <= 1e-12);
                let bumped = (l + eps).min(1.0);
                if bumped > l {
                    let c = assess_risk(bumped, i).unwrap();
                    prop_assert!(c.failure_risk < a.failure_risk);
                }
            }

            #[test]
            fn buckets_are_monotone(a in 0.0f64..10.0, b in 0.0f64..10.0) {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                prop_assert!(cost_bucket(lo).unwrap() <= cost_bucket(hi).unwrap());
                let (rl, rh) = (lo / 10.0, hi / 10.0);
                prop_assert!(risk_bucket(rl) <= risk_bucket(rh));
            }

            #[test]
            fn enact_then_feedback_recovers_delta(delta in 0.0f64..=1.0, excess in 0.1f64..100.0) {
                let entry = AdaptationCatalogEntry {
                    name: "X".into(),
                    description: "test".into(),
                    anomaly_issue: AnomalyCategory::QoA,
                    cost_per_hr: 0.0,
                    rat_s: Rat::Fixed(0.0),
                    delta_cs: Some(delta),
                    threshold_metric: String::new(),
                    effects: vec![],
                    combination: false,
                };
                let mut state = SystemState::startup();
                state.latency_ms = BASELINE_LATENCY_MS + excess;
                let (next, _) = enact(&entry, &state, &ctx()).unwrap();
                let mut kb = KnowledgeBase::in_memory();
                let fctx = FeedbackCtx {
                    session_id: "s",
                    timestamp_s: 0.0,
                    baseline_latency_ms: BASELINE_LATENCY_MS,
                    category: AnomalyCategory::QoA,
                };
                let i = feedback(state.latency_ms, next.latency_ms, &entry, &mut kb, &fctx).unwrap();
                prop_assert!((i - delta).abs() <= 1e-9);
            }
        }
    }
}
