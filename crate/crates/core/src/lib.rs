//! Self-adaptation toolkit for networked VR session telemetry.
//!
//! The crate closes a monitor → decide → control → knowledge loop over
//! synthetic session telemetry:
//!
//! * [`telemetry`] generates seeded baseline metric streams and injects
//!   performance/security fault scenarios into them.
//! * [`monitor`] turns metric samples into classified anomaly events with a
//!   latency-based severity.
//! * [`queue`] processes events through a severity-ordered binary heap and a
//!   three-stage single server, with both closed-form M/M/1/K analytics and a
//!   discrete-event simulation.
//! * [`decision`] builds per-anomaly-type decision units from recorded history
//!   and picks the best candidate adaptation.
//! * [`control`] holds the adaptation catalog, risk/cost scoring, the
//!   IF–THEN–ELSE recommendation rules, and the enactment/feedback model.
//! * [`kb`] is the append-only knowledge base with CSV interchange.
//! * [`pipeline`] wires the whole loop together for a configured session run.

pub mod config;
pub mod control;
pub mod decision;
pub mod error;
pub mod kb;
pub mod monitor;
pub mod pipeline;
pub mod queue;
pub mod report;
pub mod telemetry;

pub use error::{Error, Result};
pub use monitor::{AnomalyCategory, AnomalyEvent};
pub use telemetry::MetricSample;
