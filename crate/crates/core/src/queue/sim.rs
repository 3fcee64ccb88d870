//! Discrete-event simulation of the severity-ordered three-stage server.
//!
//! One event is in service at a time; its service time is the sum of three
//! exponential stage draws (rates `mu1..mu3`). Waiting events sit in the
//! severity heap, so the most severe event is always dequeued next
//! (non-preemptive). Capacity counts everything in the system, waiting plus
//! in service; overflow behavior follows the configured policy. Runs are
//! deterministic for a given seed, and a longer horizon replays the same
//! realization further rather than changing it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::error::{Error, Result};
use crate::monitor::{AnomalyCategory, AnomalyEvent};

use super::heap::{cmp_priority, SeverityQueue};
use super::{OverflowPolicy, QueueConfig};

/// Where arriving events come from.
#[derive(Debug, Clone)]
pub enum EventSource {
    /// Poisson arrivals at `config.lambda`, severities uniform in `[lo, hi)`.
    Poisson { severity_lo_ms: f64, severity_hi_ms: f64 },
    /// A prerecorded event trace; arrival times must be non-decreasing.
    Trace(Vec<AnomalyEvent>),
}

/// Simulation controls.
#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Stop time in seconds. `None` drains a trace completely (Poisson
    /// sources always need a horizon).
    pub horizon_s: Option<f64>,
    pub seed: u64,
    /// Severity strictly above this counts as severe.
    pub severe_threshold_ms: f64,
    /// Adaptation enactment time folded into the mean system response.
    pub r_at_s: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { horizon_s: None, seed: 0, severe_threshold_ms: 15.0, r_at_s: None }
    }
}

/// One finished event with its timing.
#[derive(Debug, Clone)]
pub struct Completion {
    pub event: AnomalyEvent,
    pub arrival_s: f64,
    pub service_start_s: f64,
    pub departure_s: f64,
}

impl Completion {
    pub fn wait_s(&self) -> f64 {
        self.service_start_s - self.arrival_s
    }

    pub fn service_s(&self) -> f64 {
        self.departure_s - self.service_start_s
    }

    /// Queue response time: wait plus service.
    pub fn rtq_s(&self) -> f64 {
        self.departure_s - self.arrival_s
    }
}

/// Aggregated simulation outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimStats {
    /// Mean wait of events that entered service.
    pub mean_wq_s: f64,
    /// Time-averaged number waiting.
    pub mean_lq: f64,
    /// Time-averaged number in system.
    pub mean_l: f64,
    /// Mean observed total service time.
    pub mean_x_bar_s: f64,
    /// Mean queue response time (wait + service) over completions.
    pub mean_rtq_s: f64,
    /// `mean_rtq_s + r_at` when an enactment time was supplied.
    pub mean_rs_s: Option<f64>,
    pub processed_total: u64,
    pub processed_severe: u64,
    pub rejected: u64,
    pub arrivals: u64,
    pub in_system_at_end: u64,
    /// Accepted arrivals per second of simulated time.
    pub effective_lambda: f64,
    /// Fraction of arrivals turned away.
    pub blocking_prob: f64,
    pub elapsed_s: f64,
}

struct InService {
    event: AnomalyEvent,
    arrival_s: f64,
    start_s: f64,
    end_s: f64,
}

/// Runs the simulation and returns aggregate statistics.
pub fn simulate(config: &QueueConfig, source: EventSource, opts: &SimOptions) -> Result<SimStats> {
    simulate_detailed(config, source, opts).map(|(stats, _)| stats)
}

/// Like [`simulate`], additionally returning every completion in departure
/// order, which is also the order decisions are taken downstream.
pub fn simulate_detailed(
    config: &QueueConfig,
    source: EventSource,
    opts: &SimOptions,
) -> Result<(SimStats, Vec<Completion>)> {
    config.validate()?;
    if let Some(h) = opts.horizon_s {
        if !h.is_finite() || h <= 0.0 {
            return Err(Error::invalid_argument("horizon must be > 0"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut arrivals_src = ArrivalStream::new(source, config, opts.horizon_s)?;
    let stage_dists = [
        Exp::new(config.rates.mu1).expect("validated rate"),
        Exp::new(config.rates.mu2).expect("validated rate"),
        Exp::new(config.rates.mu3).expect("validated rate"),
    ];

    let mut clock = 0.0f64;
    let mut waiting = SeverityQueue::new();
    let mut in_service: Option<InService> = None;
    let mut next_arrival = arrivals_src.next(&mut rng);

    let mut completions = Vec::new();
    let mut area_l = 0.0f64;
    let mut area_lq = 0.0f64;
    let mut arrivals = 0u64;
    let mut rejected = 0u64;
    let mut started = 0u64;
    let mut sum_wait = 0.0f64;

    loop {
        let t_arrival = next_arrival.as_ref().map(|e| e.arrival_time_s);
        let t_departure = in_service.as_ref().map(|s| s.end_s);
        let (t_next, is_departure) = match (t_arrival, t_departure) {
            (None, None) => break,
            (Some(a), None) => (a, false),
            (None, Some(d)) => (d, true),
            // A completion at the same instant frees its slot before the
            // arrival is admitted.
            (Some(a), Some(d)) => {
                if d <= a {
                    (d, true)
                } else {
                    (a, false)
                }
            }
        };

        if let Some(h) = opts.horizon_s {
            if t_next >= h {
                break;
            }
        }

        let dt = t_next - clock;
        let n_sys = waiting.len() + usize::from(in_service.is_some());
        area_l += n_sys as f64 * dt;
        area_lq += waiting.len() as f64 * dt;
        clock = t_next;

        if is_departure {
            let done = in_service.take().expect("departure implies a service");
            completions.push(Completion {
                event: done.event,
                arrival_s: done.arrival_s,
                service_start_s: done.start_s,
                departure_s: done.end_s,
            });
            if let Ok(next) = waiting.extract_max() {
                let arrival_s = next.arrival_time_s;
                sum_wait += clock - arrival_s;
                started += 1;
                in_service = Some(start_service(next, arrival_s, clock, &stage_dists, &mut rng));
            }
        } else {
            let event = next_arrival.take().expect("arrival implies an event");
            arrivals += 1;
            let n_sys = waiting.len() + usize::from(in_service.is_some());
            if n_sys >= config.capacity_k {
                match config.overflow_policy {
                    OverflowPolicy::RejectArrival => rejected += 1,
                    OverflowPolicy::EvictLowestSeverity => {
                        let displaces = waiting
                            .iter()
                            .min_by(|a, b| cmp_priority(a, b))
                            .map(|low| cmp_priority(&event, low) == std::cmp::Ordering::Greater)
                            .unwrap_or(false);
                        if displaces {
                            waiting.remove_lowest()?;
                            rejected += 1;
                            waiting.insert(event)?;
                        } else {
                            rejected += 1;
                        }
                    }
                }
            } else if in_service.is_none() {
                let arrival_s = event.arrival_time_s;
                started += 1; // zero wait
                in_service = Some(start_service(event, arrival_s, clock, &stage_dists, &mut rng));
            } else {
                waiting.insert(event)?;
            }
            next_arrival = arrivals_src.next(&mut rng);
        }
    }

    // Close the books: integrate the idle tail up to the horizon, if any.
    let elapsed = match opts.horizon_s {
        Some(h) => {
            let dt = h - clock;
            if dt > 0.0 {
                let n_sys = waiting.len() + usize::from(in_service.is_some());
                area_l += n_sys as f64 * dt;
                area_lq += waiting.len() as f64 * dt;
            }
            h
        }
        None => clock,
    };

    let processed_total = completions.len() as u64;
    let processed_severe = completions
        .iter()
        .filter(|c| c.event.severity_ms > opts.severe_threshold_ms)
        .count() as u64;
    let in_system_at_end = (waiting.len() + usize::from(in_service.is_some())) as u64;

    let mean = |sum: f64, n: u64| if n == 0 { 0.0 } else { sum / n as f64 };
    let mean_wq_s = mean(sum_wait, started);
    let mean_x_bar_s = mean(completions.iter().map(Completion::service_s).sum(), processed_total);
    let mean_rtq_s = mean(completions.iter().map(Completion::rtq_s).sum(), processed_total);

    let stats = SimStats {
        mean_wq_s,
        mean_lq: if elapsed > 0.0 { area_lq / elapsed } else { 0.0 },
        mean_l: if elapsed > 0.0 { area_l / elapsed } else { 0.0 },
        mean_x_bar_s,
        mean_rtq_s,
        mean_rs_s: opts.r_at_s.map(|r| mean_rtq_s + r),
        processed_total,
        processed_severe,
        rejected,
        arrivals,
        in_system_at_end,
        effective_lambda: if elapsed > 0.0 {
            (arrivals - rejected) as f64 / elapsed
        } else {
            0.0
        },
        blocking_prob: if arrivals > 0 { rejected as f64 / arrivals as f64 } else { 0.0 },
        elapsed_s: elapsed,
    };
    Ok((stats, completions))
}

fn start_service(
    event: AnomalyEvent,
    arrival_s: f64,
    clock: f64,
    stages: &[Exp<f64>; 3],
    rng: &mut ChaCha8Rng,
) -> InService {
    let service: f64 = stages.iter().map(|d| d.sample(rng)).sum();
    InService { event, arrival_s, start_s: clock, end_s: clock + service }
}

enum ArrivalStream {
    Poisson { inter: Exp<f64>, severity_lo: f64, severity_hi: f64, next_t: f64, next_id: u64 },
    Trace { events: std::vec::IntoIter<AnomalyEvent> },
}

impl ArrivalStream {
    fn new(source: EventSource, config: &QueueConfig, horizon: Option<f64>) -> Result<Self> {
        match source {
            EventSource::Poisson { severity_lo_ms, severity_hi_ms } => {
                if config.lambda <= 0.0 {
                    return Err(Error::invalid_argument(
                        "a Poisson source requires lambda > 0",
                    ));
                }
                if horizon.is_none() {
                    return Err(Error::invalid_argument(
                        "a Poisson source requires a finite horizon",
                    ));
                }
                if severity_lo_ms < 0.0 || severity_hi_ms <= severity_lo_ms {
                    return Err(Error::invalid_argument(
                        "severity range must satisfy 0 <= lo < hi",
                    ));
                }
                Ok(ArrivalStream::Poisson {
                    inter: Exp::new(config.lambda).expect("lambda checked positive"),
                    severity_lo: severity_lo_ms,
                    severity_hi: severity_hi_ms,
                    next_t: 0.0,
                    next_id: 1,
                })
            }
            EventSource::Trace(events) => {
                let mut prev = f64::NEG_INFINITY;
                let mut seen = std::collections::HashSet::new();
                for e in &events {
                    if e.arrival_time_s < prev {
                        return Err(Error::invalid_argument(
                            "trace arrival times must be non-decreasing",
                        ));
                    }
                    prev = e.arrival_time_s;
                    if !seen.insert(e.id) {
                        return Err(Error::invalid_argument(format!(
                            "trace contains duplicate event id {}",
                            e.id
                        )));
                    }
                }
                Ok(ArrivalStream::Trace { events: events.into_iter() })
            }
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> Option<AnomalyEvent> {
        match self {
            ArrivalStream::Poisson { inter, severity_lo, severity_hi, next_t, next_id } => {
                *next_t += inter.sample(rng);
                let severity = rng.random_range(*severity_lo..*severity_hi);
                let id = *next_id;
                *next_id += 1;
                Some(AnomalyEvent {
                    id,
                    arrival_time_s: *next_t,
                    category: AnomalyCategory::QoS,
                    trigger_metric: "synthetic".into(),
                    trigger_value: 0.0,
                    severity_ms: severity,
                    session_id: "sim".into(),
                })
            }
            ArrivalStream::Trace { events } => events.next(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queue::{mean_service_time, mm1k_analytics, StageRates};

    fn config(lambda: f64, rates: (f64, f64, f64), k: usize) -> QueueConfig {
        QueueConfig {
            lambda,
            rates: StageRates::new(rates.0, rates.1, rates.2).unwrap(),
            capacity_k: k,
            overflow_policy: OverflowPolicy::RejectArrival,
        }
    }

    fn trace_event(id: u64, arrival: f64, severity: f64) -> AnomalyEvent {
        AnomalyEvent {
            id,
            arrival_time_s: arrival,
            category: AnomalyCategory::QoS,
            trigger_metric: "t".into(),
            trigger_value: 0.0,
            severity_ms: severity,
            session_id: "s".into(),
        }
    }

    #[test]
    fn empty_source_produces_empty_stats() {
        let cfg = config(0.0, (1.0, 1.0, 1.0), 5);
        let stats = simulate(&cfg, EventSource::Trace(Vec::new()), &SimOptions::default()).unwrap();
        assert_eq!(stats.processed_total, 0);
        assert_eq!(stats.arrivals, 0);
        assert_eq!(stats.mean_wq_s, 0.0);
        assert_eq!(stats.mean_lq, 0.0);
    }

    #[test]
    fn equal_severities_depart_in_arrival_order() {
        let trace: Vec<_> = (0..50).map(|i| trace_event(i, i as f64 * 0.1, 10.0)).collect();
        let cfg = config(0.0, (3.0, 3.0, 3.0), 100);
        let opts = SimOptions { seed: 3, ..SimOptions::default() };
        let (_, completions) = simulate_detailed(&cfg, EventSource::Trace(trace), &opts).unwrap();
        assert_eq!(completions.len(), 50);
        let ids: Vec<u64> = completions.iter().map(|c| c.event.id).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn severe_events_jump_the_waiting_line() {
        // Three events arrive while the first is still in service; the most
        // severe of the waiters must depart ahead of the rest.
        let trace = vec![
            trace_event(1, 0.0, 1.0),
            trace_event(2, 0.01, 5.0),
            trace_event(3, 0.02, 50.0),
            trace_event(4, 0.03, 20.0),
        ];
        let cfg = config(0.0, (0.3, 30.0, 30.0), 10);
        let opts = SimOptions { seed: 1, ..SimOptions::default() };
        let (_, completions) = simulate_detailed(&cfg, EventSource::Trace(trace), &opts).unwrap();
        let order: Vec<u64> = completions.iter().map(|c| c.event.id).collect();
        assert_eq!(order, vec![1, 3, 4, 2]);
    }

    #[test]
    fn conservation_of_events() {
        let cfg = config(2.0, (4.0, 9.0, 7.0), 8);
        let opts = SimOptions {
            horizon_s: Some(500.0),
            seed: 11,
            ..SimOptions::default()
        };
        let stats = simulate(
            &cfg,
            EventSource::Poisson { severity_lo_ms: 0.0, severity_hi_ms: 30.0 },
            &opts,
        )
        .unwrap();
        assert!(stats.arrivals > 500);
        assert_eq!(
            stats.arrivals,
            stats.processed_total + stats.rejected + stats.in_system_at_end
        );
    }

    #[test]
    fn matches_analytics_at_half_load() {
        let rates = StageRates::new(1.2, 240.0, 240.0).unwrap();
        let x_bar = mean_service_time(&rates);
        let mu_eff = 1.0 / x_bar;
        let lambda = 0.5 * mu_eff;
        let cfg = QueueConfig {
            lambda,
            rates,
            capacity_k: 50,
            overflow_policy: OverflowPolicy::RejectArrival,
        };
        let horizon = 120_000.0 / lambda; // ~120k arrivals
        let opts = SimOptions { horizon_s: Some(horizon), seed: 7, ..SimOptions::default() };
        let stats = simulate(
            &cfg,
            EventSource::Poisson { severity_lo_ms: 0.0, severity_hi_ms: 30.0 },
            &opts,
        )
        .unwrap();
        let a = mm1k_analytics(lambda, mu_eff, 50).unwrap();
        assert!((stats.mean_wq_s - a.wq).abs() / a.wq < 0.10, "{} vs {}", stats.mean_wq_s, a.wq);
        assert!((stats.mean_lq - a.lq).abs() / a.lq < 0.10, "{} vs {}", stats.mean_lq, a.lq);
        // Little's law on the run itself.
        assert!((stats.mean_lq - stats.effective_lambda * stats.mean_wq_s).abs() <= 0.05 * stats.mean_lq);
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let cfg = config(1.0, (2.0, 5.0, 3.0), 6);
        let source = || EventSource::Poisson { severity_lo_ms: 0.0, severity_hi_ms: 30.0 };
        let opts = SimOptions { horizon_s: Some(300.0), seed: 5, ..SimOptions::default() };
        let a = simulate(&cfg, source(), &opts).unwrap();
        let b = simulate(&cfg, source(), &opts).unwrap();
        assert_eq!(a, b);
        let opts2 = SimOptions { seed: 6, ..opts };
        let c = simulate(&cfg, source(), &opts2).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn eviction_keeps_the_severe_arrival() {
        // Capacity 2: one in service plus one waiting. A severe latecomer must
        // displace the mild waiter.
        let trace = vec![
            trace_event(1, 0.0, 10.0),
            trace_event(2, 0.01, 1.0),
            trace_event(3, 0.02, 99.0),
        ];
        let mut cfg = config(0.0, (0.5, 50.0, 50.0), 2);
        cfg.overflow_policy = OverflowPolicy::EvictLowestSeverity;
        let opts = SimOptions { seed: 2, ..SimOptions::default() };
        let (stats, completions) =
            simulate_detailed(&cfg, EventSource::Trace(trace), &opts).unwrap();
        assert_eq!(stats.rejected, 1);
        let ids: Vec<u64> = completions.iter().map(|c| c.event.id).collect();
        assert_eq!(ids, vec![1, 3]);
    }

    #[test]
    fn rejecting_policy_drops_the_newcomer() {
        let trace = vec![
            trace_event(1, 0.0, 10.0),
            trace_event(2, 0.01, 1.0),
            trace_event(3, 0.02, 99.0),
        ];
        let cfg = config(0.0, (0.5, 50.0, 50.0), 2);
        let opts = SimOptions { seed: 2, ..SimOptions::default() };
        let (stats, completions) =
            simulate_detailed(&cfg, EventSource::Trace(trace), &opts).unwrap();
        assert_eq!(stats.rejected, 1);
        let ids: Vec<u64> = completions.iter().map(|c| c.event.id).collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let cfg = config(0.0, (1.0, 1.0, 1.0), 5);
        let poisson = EventSource::Poisson { severity_lo_ms: 0.0, severity_hi_ms: 30.0 };
        // lambda = 0 with a Poisson source.
        assert!(simulate(&cfg, poisson.clone(), &SimOptions { horizon_s: Some(10.0), ..SimOptions::default() }).is_err());
        // Poisson without a horizon.
        let cfg2 = config(1.0, (1.0, 1.0, 1.0), 5);
        assert!(simulate(&cfg2, poisson, &SimOptions::default()).is_err());
        // Unordered trace.
        let trace = vec![trace_event(1, 5.0, 1.0), trace_event(2, 1.0, 1.0)];
        assert!(simulate(&cfg, EventSource::Trace(trace), &SimOptions::default()).is_err());
    }

    #[test]
    fn severe_count_honors_the_threshold() {
        let trace = vec![
            trace_event(1, 0.0, 15.0),
            trace_event(2, 1.0, 15.1),
            trace_event(3, 2.0, 40.0),
        ];
        let cfg = config(0.0, (10.0, 10.0, 10.0), 10);
        let opts = SimOptions { severe_threshold_ms: 15.0, seed: 0, ..SimOptions::default() };
        let stats = simulate(&cfg, EventSource::Trace(trace), &opts).unwrap();
        assert_eq!(stats.processed_total, 3);
        assert_eq!(stats.processed_severe, 2); // strictly above 15
    }
}
