//! Decision units: per-anomaly-type candidate lists and head selection.
//!
//! A decision unit for an anomaly type holds one tuple per candidate
//! adaptation: its name, how often it has been chosen before, and its
//! (smoothed) measured impact on the latency excess. Units are seeded from
//! the knowledge base where history exists and from catalog defaults where it
//! does not. Selection sorts by impact, then usage count, then enactment
//! response time, then name, and takes the head — a total order, so the
//! outcome is independent of candidate arrangement.

use std::cmp::Ordering;

use crate::control::AdaptationCatalog;
use crate::error::{Error, Result};
use crate::kb::{KbRecord, KnowledgeBase};
use crate::monitor::AnomalyCategory;

/// Impact assumed for candidates with no measured reduction anywhere: they
/// stay selectable but rank behind anything with real data.
pub const DEFAULT_IMPACT_FLOOR: f64 = 0.05;

/// One candidate adaptation inside a decision unit.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationTuple {
    pub name: String,
    /// How many times this adaptation was chosen for this anomaly type.
    pub uses: u64,
    /// Expected fractional reduction of latency excess, in [0, 1].
    pub impact: f64,
}

/// Candidate adaptations for one anomaly type.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionUnit {
    pub category: AnomalyCategory,
    pub candidates: Vec<AdaptationTuple>,
}

/// Direction usage counts sort in. Descending trusts a frequently chosen
/// adaptation; ascending favors exploration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CtOrder {
    #[default]
    Descending,
    Ascending,
}

/// Builds one decision unit per requested anomaly type, in input order.
/// Candidates come from the catalog; usage counts and impacts come from the
/// knowledge base where recorded, otherwise from catalog defaults (measured
/// reduction if any, else the [`DEFAULT_IMPACT_FLOOR`]).
pub fn build_decision_units(
    categories: &[AnomalyCategory],
    kb: &KnowledgeBase,
    catalog: &AdaptationCatalog,
) -> Result<Vec<DecisionUnit>> {
    categories
        .iter()
        .map(|&category| {
            let entries = catalog.candidates_for(category);
            if entries.is_empty() {
                return Err(Error::UnknownAnomalyType(category.to_string()));
            }
            let history = kb.history(category);
            let candidates = entries
                .iter()
                .map(|entry| {
                    let recorded = history.iter().find(|h| h.adaptation == entry.name);
                    let uses = recorded.map(|h| h.uses).unwrap_or(0);
                    let impact = recorded
                        .and_then(|h| h.impact)
                        .or(entry.delta_cs)
                        .unwrap_or(DEFAULT_IMPACT_FLOOR);
                    AdaptationTuple { name: entry.name.clone(), uses, impact }
                })
                .collect();
            Ok(DecisionUnit { category, candidates })
        })
        .collect()
}

/// Selection key: impact desc, usage desc (configurable), enactment response
/// time asc, name asc. `Greater` means `a` is preferred.
fn cmp_candidates(
    a: &AdaptationTuple,
    b: &AdaptationTuple,
    unit: &DecisionUnit,
    catalog: &AdaptationCatalog,
    ct_order: CtOrder,
) -> Ordering {
    let rat = |t: &AdaptationTuple| {
        catalog
            .find(unit.category, &t.name)
            .map(|e| e.rat_s.sort_seconds())
            .unwrap_or(f64::INFINITY)
    };
    let ct = |t: &AdaptationTuple| t.uses;
    a.impact
        .total_cmp(&b.impact)
        .then_with(|| match ct_order {
            CtOrder::Descending => ct(a).cmp(&ct(b)),
            CtOrder::Ascending => ct(b).cmp(&ct(a)),
        })
        .then_with(|| rat(b).total_cmp(&rat(a)))
        .then_with(|| b.name.cmp(&a.name))
}

/// The head of the sorted candidate list: the most suitable adaptation.
pub fn select_adaptation<'a>(
    unit: &'a DecisionUnit,
    catalog: &AdaptationCatalog,
) -> Result<&'a AdaptationTuple> {
    select_adaptation_with(unit, catalog, CtOrder::Descending)
}

/// [`select_adaptation`] with an explicit usage-count sort direction.
pub fn select_adaptation_with<'a>(
    unit: &'a DecisionUnit,
    catalog: &AdaptationCatalog,
    ct_order: CtOrder,
) -> Result<&'a AdaptationTuple> {
    unit.candidates
        .iter()
        .max_by(|a, b| cmp_candidates(a, b, unit, catalog, ct_order))
        .ok_or(Error::NoCandidates)
}

/// Records that an adaptation was chosen for an anomaly type: appends a
/// decision record and returns the updated usage count. The adaptation must
/// be known to the catalog or already present in the knowledge base.
pub fn record_use(
    kb: &mut KnowledgeBase,
    catalog: &AdaptationCatalog,
    session_id: &str,
    timestamp_s: f64,
    category: AnomalyCategory,
    adaptation: &str,
) -> Result<u64> {
    if !catalog.contains_name(adaptation) && !kb.knows_adaptation(adaptation) {
        return Err(Error::NotFound(format!("adaptation {adaptation}")));
    }
    let ct = kb.usage_count(category, adaptation) + 1;
    kb.append(KbRecord::decision_made(session_id, timestamp_s, category, adaptation, ct))?;
    Ok(ct)
}
