use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use vradapt_bench::synthetic_event;
use vradapt_core::monitor::{Monitor, ThresholdRuleSet};
use vradapt_core::queue::{
    mean_service_time, mm1k_analytics, simulate, EventSource, OverflowPolicy, QueueConfig,
    SeverityQueue, SimOptions, StageRates,
};
use vradapt_core::telemetry::generate_baseline;

fn bench_heap(c: &mut Criterion) {
    c.bench_function("heap_insert_extract_10k", |b| {
        b.iter(|| {
            let mut queue = SeverityQueue::new();
            for id in 0..10_000u64 {
                queue.insert(synthetic_event(id)).unwrap();
            }
            let mut checksum = 0.0;
            while let Ok(event) = queue.extract_max() {
                checksum += event.severity_ms;
            }
            black_box(checksum)
        })
    });
}

fn bench_analytics(c: &mut Criterion) {
    c.bench_function("mm1k_analytics_k1000", |b| {
        b.iter(|| black_box(mm1k_analytics(0.95, 1.0, 1000).unwrap()))
    });
}

fn bench_des(c: &mut Criterion) {
    let rates = StageRates::new(1.0, 1000.0, 1000.0).unwrap();
    let lambda = 0.7 / mean_service_time(&rates);
    let config = QueueConfig {
        lambda,
        rates,
        capacity_k: 50,
        overflow_policy: OverflowPolicy::RejectArrival,
    };
    let opts = SimOptions {
        horizon_s: Some(50_000.0 / lambda),
        seed: 1,
        severe_threshold_ms: 15.0,
        r_at_s: None,
    };
    c.bench_function("des_50k_arrivals", |b| {
        b.iter(|| {
            let source = EventSource::Poisson { severity_lo_ms: 0.0, severity_hi_ms: 30.0 };
            black_box(simulate(&config, source, &opts).unwrap())
        })
    });
}

fn bench_telemetry_monitor(c: &mut Criterion) {
    c.bench_function("baseline_10k_samples", |b| {
        b.iter(|| black_box(generate_baseline(7, 10_000.0, 1.0, "bench").unwrap()))
    });
    let stream = generate_baseline(7, 10_000.0, 1.0, "bench").unwrap();
    c.bench_function("monitor_10k_samples", |b| {
        b.iter(|| {
            let mut monitor = Monitor::new(ThresholdRuleSet::default());
            let mut alarms = 0usize;
            for sample in &stream {
                alarms += monitor.evaluate(sample).len();
            }
            black_box(alarms)
        })
    });
}

criterion_group!(benches, bench_heap, bench_analytics, bench_des, bench_telemetry_monitor);
criterion_main!(benches);
