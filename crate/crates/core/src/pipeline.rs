//! End-to-end session runner: telemetry → monitor → queue → decision →
//! control → feedback → knowledge base, plus report generation.
//!
//! The queue phase replays the detected events through the discrete-event
//! simulation (trace-driven, drained to completion); decisions are then taken
//! in departure order, which is severity order whenever events overlap in the
//! queue. Knowledge-base records are written along a single merged timeline
//! (detections at arrival times, decision/enactment/feedback at departure
//! times) so per-session timestamps never regress.
//!
//! Everything is a pure function of the config, so identical configs produce
//! byte-identical reports.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::config::ScenarioConfig;
use crate::control::{
    assess_risk, enact, feedback, likelihood_from_rank, AdaptationCatalog, EcaRuleSet,
    EnactContext, EnactmentRecord, FeedbackCtx, SystemState,
};
use crate::decision::{build_decision_units, record_use, select_adaptation};
use crate::error::{Error, Result};
use crate::kb::{KbRecord, KnowledgeBase};
use crate::monitor::{AnomalyCategory, AnomalyEvent, Monitor};
use crate::queue::{simulate_detailed, Completion, EventSource, SimOptions, SimStats};
use crate::report::{self, Reports};
use crate::telemetry::generate_baseline;
use crate::telemetry::inject;

/// One aggregated adaptation-ledger row (per anomaly category and adaptation).
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerRow {
    pub category: AnomalyCategory,
    pub adaptation: String,
    /// How many events resolved to this adaptation.
    pub decisions: u64,
    pub cost_per_hr: f64,
    pub rat_s: f64,
    pub threshold_metric: String,
    /// Measured reduction of latency excess, percent; absent when the
    /// adaptation never produced a measurable enactment.
    pub measured_delta_cs_pct: Option<f64>,
}

/// Everything a run produces besides files.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub session_id: String,
    pub samples: usize,
    pub anomalies_total: u64,
    pub anomalies_by_category: Vec<(AnomalyCategory, u64)>,
    pub queue: SimStats,
    /// Mean of (queue response time + enactment time) over completions.
    pub mean_rs_s: f64,
    pub ledger: Vec<LedgerRow>,
    pub enactments: Vec<EnactmentRecord>,
    /// Events whose chosen adaptation could not be enacted (no effect model).
    pub unenactable: u64,
    pub mean_pre_excess_ms: f64,
    pub mean_post_excess_ms: f64,
    pub final_state: SystemState,
    pub kb_records: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub reports: Reports,
    /// Files written, empty when no report directory was configured.
    pub written: Vec<PathBuf>,
}

enum TimelineItem {
    Detected(AnomalyEvent),
    Departed(Completion),
}

impl TimelineItem {
    fn time(&self) -> f64 {
        match self {
            TimelineItem::Detected(e) => e.arrival_time_s,
            TimelineItem::Departed(c) => c.departure_s,
        }
    }
}

/// Runs one configured session end to end.
pub fn run_session(config: &ScenarioConfig) -> Result<RunOutcome> {
    config.validate()?;

    let catalog = match &config.paths.catalog {
        Some(path) => AdaptationCatalog::load(path)?,
        None => AdaptationCatalog::builtin(),
    };
    let rules = match &config.paths.rules {
        Some(path) => EcaRuleSet::load(path)?,
        None => EcaRuleSet::builtin(),
    };
    rules.validate(&catalog)?;

    // Telemetry: baseline plus injected scenarios.
    let mut stream = generate_baseline(
        config.telemetry.seed,
        config.telemetry.duration_s,
        config.telemetry.step_s,
        &config.telemetry.session_id,
    )?;
    for entry in &config.telemetry.scenarios {
        stream = inject(&stream, &entry.to_scenario()?)?;
    }

    // Monitor: classify every sample.
    let mut monitor = Monitor::new(config.monitor.thresholds.clone())
        .with_severity_defaults(config.monitor.severity_defaults.clone())
        .with_baseline_latency(config.monitor.baseline_latency_ms);
    let mut events = Vec::new();
    for sample in &stream {
        events.extend(monitor.evaluate(sample));
    }

    // Queue: trace-driven, drained to completion.
    let queue_config = config.queue.to_queue_config()?;
    let sim_options = SimOptions {
        horizon_s: None,
        seed: config.queue.seed,
        severe_threshold_ms: config.queue.severe_threshold_ms,
        r_at_s: None,
    };
    let (queue_stats, completions) =
        simulate_detailed(&queue_config, EventSource::Trace(events.clone()), &sim_options)?;

    let mut kb = match &config.paths.kb {
        Some(path) => KnowledgeBase::open(path)?,
        None => KnowledgeBase::in_memory(),
    };

    // Merge detections and departures into one chronological record stream.
    let mut timeline: Vec<TimelineItem> = events
        .iter()
        .cloned()
        .map(TimelineItem::Detected)
        .chain(completions.iter().cloned().map(TimelineItem::Departed))
        .collect();
    timeline.sort_by(|a, b| {
        a.time().total_cmp(&b.time()).then_with(|| {
            // A detection sorts ahead of a departure at the same instant.
            let rank = |i: &TimelineItem| matches!(i, TimelineItem::Departed(_)) as u8;
            rank(a).cmp(&rank(b))
        })
    });

    let session_id = &config.telemetry.session_id;
    let session_end_s = config.telemetry.duration_s;
    let mut state = SystemState::startup();
    let mut enactments = Vec::new();
    let mut unenactable = 0u64;
    let mut sum_rs = 0.0f64;
    let mut sum_pre_excess = 0.0f64;
    let mut sum_post_excess = 0.0f64;
    let mut counts: BTreeMap<AnomalyCategory, u64> = BTreeMap::new();
    // (category, adaptation) -> (decisions, entry index, measured impact)
    let mut ledger: BTreeMap<(AnomalyCategory, String), (u64, Option<f64>)> = BTreeMap::new();

    for item in timeline {
        match item {
            TimelineItem::Detected(event) => {
                *counts.entry(event.category).or_default() += 1;
                kb.append(KbRecord::anomaly_detected(
                    session_id,
                    event.arrival_time_s,
                    event.category,
                    event.severity_ms,
                ))?;
            }
            TimelineItem::Departed(completion) => {
                let event = &completion.event;
                let t = completion.departure_s;
                sum_pre_excess += event.severity_ms;

                if !config.control.adapt {
                    sum_post_excess += event.severity_ms;
                    sum_rs += completion.rtq_s();
                    continue;
                }

                // Decide: forced adaptation if cataloged for this category,
                // otherwise the head of the decision unit.
                let unit =
                    build_decision_units(&[event.category], &kb, &catalog)?.pop().expect("one unit");
                let forced = config
                    .control
                    .force_adaptation
                    .as_deref()
                    .filter(|name| {
                        catalog.entries.iter().any(|e| {
                            e.anomaly_issue == event.category && e.name == *name
                        })
                    });
                let (chosen_name, impact_estimate) = match forced {
                    Some(name) => {
                        let entry = catalog.find(event.category, name).expect("filtered above");
                        (name.to_string(), entry.delta_cs.unwrap_or(0.0))
                    }
                    None => {
                        let tuple = select_adaptation(&unit, &catalog)?;
                        (tuple.name.clone(), tuple.impact)
                    }
                };
                record_use(&mut kb, &catalog, session_id, t, event.category, &chosen_name)?;
                let row = ledger.entry((event.category, chosen_name.clone())).or_default();
                row.0 += 1;

                // Control: enact once per adaptation per session.
                let entry = catalog
                    .find(event.category, &chosen_name)
                    .ok_or_else(|| Error::NotFound(format!("adaptation {chosen_name}")))?;
                let mut rat_applied = 0.0;
                if !state.active_adaptations.contains(&chosen_name) {
                    // Ground the pre-enactment state in the observed trigger.
                    state.latency_ms = config.monitor.baseline_latency_ms + event.severity_ms;
                    match event.trigger_metric.as_str() {
                        "cpu_utilization" => state.cpu_utilization = event.trigger_value,
                        "packets_out" => state.packets_out = event.trigger_value as u64,
                        "login_attempts" => state.login_attempts = event.trigger_value as u32,
                        _ => {}
                    }
                    let ctx = EnactContext {
                        clock_s: t,
                        session_end_s,
                        users: config.control.users,
                        baseline_latency_ms: config.monitor.baseline_latency_ms,
                    };
                    match enact(entry, &state, &ctx) {
                        Ok((next, record)) => {
                            let likelihood = likelihood_from_rank(1, unit.candidates.len().max(1));
                            let risk = assess_risk(likelihood, impact_estimate.clamp(0.0, 1.0))?;
                            kb.append(KbRecord::adaptation_enacted(
                                session_id,
                                t,
                                event.category,
                                &chosen_name,
                                record.rat_s,
                                entry.cost_per_hr,
                                Some(risk.failure_risk),
                                Some(record.post_latency_ms),
                            ))?;
                            let fctx = FeedbackCtx {
                                session_id,
                                timestamp_s: t,
                                baseline_latency_ms: config.monitor.baseline_latency_ms,
                                category: event.category,
                            };
                            let measured = feedback(
                                record.pre_latency_ms,
                                record.post_latency_ms,
                                entry,
                                &mut kb,
                                &fctx,
                            )?;
                            row.1.get_or_insert(measured);
                            rat_applied = record.rat_s;
                            sum_post_excess += event.severity_ms * (1.0 - measured);
                            state = next;
                            enactments.push(record);
                        }
                        Err(Error::UnknownEffect(_)) => {
                            unenactable += 1;
                            sum_post_excess += event.severity_ms;
                        }
                        Err(other) => return Err(other),
                    }
                } else {
                    // Already active; the event rides the existing adaptation.
                    let already = ledger
                        .get(&(event.category, chosen_name.clone()))
                        .and_then(|(_, measured)| *measured)
                        .unwrap_or(0.0);
                    sum_post_excess += event.severity_ms * (1.0 - already);
                }
                sum_rs += completion.rtq_s() + rat_applied;
            }
        }
    }

    let processed = queue_stats.processed_total;
    let mean = |sum: f64| if processed == 0 { 0.0 } else { sum / processed as f64 };
    let ledger_rows: Vec<LedgerRow> = ledger
        .into_iter()
        .map(|((category, adaptation), (decisions, measured))| {
            let entry = catalog.find(category, &adaptation);
            LedgerRow {
                category,
                adaptation,
                decisions,
                cost_per_hr: entry.map(|e| e.cost_per_hr).unwrap_or(0.0),
                rat_s: entry.map(|e| e.rat_s.seconds(config.control.users)).unwrap_or(0.0),
                threshold_metric: entry.map(|e| e.threshold_metric.clone()).unwrap_or_default(),
                measured_delta_cs_pct: measured.map(|m| m * 100.0),
            }
        })
        .collect();

    let summary = RunSummary {
        session_id: session_id.clone(),
        samples: stream.len(),
        anomalies_total: events.len() as u64,
        anomalies_by_category: counts.into_iter().collect(),
        queue: queue_stats,
        mean_rs_s: mean(sum_rs),
        ledger: ledger_rows,
        enactments,
        unenactable,
        mean_pre_excess_ms: mean(sum_pre_excess),
        mean_post_excess_ms: mean(sum_post_excess),
        final_state: state,
        kb_records: kb.len(),
    };

    let reports = report::render(&summary, &rules);
    let written = match &config.paths.report_dir {
        Some(dir) => report::write_files(&reports, dir)?,
        None => Vec::new(),
    };

    Ok(RunOutcome { summary, reports, written })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn config(scenarios: &str, control: &str) -> ScenarioConfig {
        let text = format!(
            r#"
            [telemetry]
            seed = 7
            duration_s = 120.0
            step_s = 1.0
            session_id = "t"
            {scenarios}

            [queue]
            mu1 = 8.0
            mu2 = 12.0
            mu3 = 10.0
            capacity_k = 64

            [control]
            {control}
            "#
        );
        ScenarioConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn benign_run_reports_nothing() {
        let outcome = run_session(&config("", "")).unwrap();
        assert_eq!(outcome.summary.anomalies_total, 0);
        assert_eq!(outcome.summary.queue.processed_total, 0);
        assert!(outcome.summary.ledger.is_empty());
        assert!(outcome.summary.enactments.is_empty());
        assert_eq!(outcome.summary.final_state.accrued_cost, 0.0);
    }

    const QOS_SCENARIO: &str = r#"
        [[telemetry.scenarios]]
        kind = "packet_drop_plus_lag"
        start_s = 30.0
        duration_s = 10.0
        drop_fraction = 0.2
        added_lag_ms = 18.0
    "#;

    #[test]
    fn qos_scenario_selects_a4_and_measures_its_reduction() {
        let outcome = run_session(&config(QOS_SCENARIO, "")).unwrap();
        assert!(outcome.summary.anomalies_total >= 10);
        let row = outcome
            .summary
            .ledger
            .iter()
            .find(|r| r.category == AnomalyCategory::QoS)
            .expect("a QoS ledger row");
        assert_eq!(row.adaptation, "A4");
        let pct = row.measured_delta_cs_pct.unwrap();
        assert!((pct - 30.28).abs() < 1e-9, "measured {pct}");
        assert_eq!(outcome.summary.enactments.len(), 1);
        assert!(outcome.summary.mean_post_excess_ms < outcome.summary.mean_pre_excess_ms);
        assert!(outcome.summary.final_state.accrued_cost > 0.0);
    }

    #[test]
    fn qoa_events_default_to_a1() {
        // A flood inflates CPU past the QoA threshold; with no history the
        // decision module picks the instance upgrade.
        let scenario = r#"
            [[telemetry.scenarios]]
            kind = "dos_flood"
            start_s = 30.0
            duration_s = 20.0
            surge_factor = 3.0
        "#;
        let outcome = run_session(&config(scenario, "")).unwrap();
        let row = outcome
            .summary
            .ledger
            .iter()
            .find(|r| r.category == AnomalyCategory::QoA)
            .expect("a QoA ledger row");
        assert_eq!(row.adaptation, "A1");
        assert!((row.measured_delta_cs_pct.unwrap() - 26.43).abs() < 1e-9);
    }

    #[test]
    fn no_adaptation_leaves_the_excess_in_place() {
        let outcome = run_session(&config(QOS_SCENARIO, "adapt = false")).unwrap();
        assert!(outcome.summary.anomalies_total > 0);
        assert!(outcome.summary.ledger.is_empty());
        assert_eq!(outcome.summary.mean_pre_excess_ms, outcome.summary.mean_post_excess_ms);
        assert!(outcome.summary.mean_pre_excess_ms > 0.0);
    }

    #[test]
    fn forced_adaptation_wins_when_cataloged() {
        let outcome =
            run_session(&config(QOS_SCENARIO, "force_adaptation = \"A1+A4\"")).unwrap();
        let row = outcome
            .summary
            .ledger
            .iter()
            .find(|r| r.category == AnomalyCategory::QoS)
            .expect("a QoS ledger row");
        assert_eq!(row.adaptation, "A1+A4");
        assert!((row.measured_delta_cs_pct.unwrap() - 20.48).abs() < 1e-9);
    }

    #[test]
    fn identical_configs_produce_identical_reports() {
        let a = run_session(&config(QOS_SCENARIO, "")).unwrap();
        let b = run_session(&config(QOS_SCENARIO, "")).unwrap();
        assert_eq!(a.reports, b.reports);
        let c = run_session(&config(QOS_SCENARIO, "adapt = false")).unwrap();
        assert_ne!(a.reports, c.reports);
    }

    #[test]
    fn cost_accounting_matches_the_enactment_ledger() {
        let outcome = run_session(&config(QOS_SCENARIO, "")).unwrap();
        let total: f64 = outcome.summary.enactments.iter().map(|e| e.cost_accrued).sum();
        assert!((outcome.summary.final_state.accrued_cost - total).abs() < 1e-9);
    }
}
