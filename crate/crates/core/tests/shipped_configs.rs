//! The TOML files shipped under configs/ must stay in lockstep with the
//! compiled-in defaults.

use std::path::PathBuf;

use vradapt_core::config::ScenarioConfig;
use vradapt_core::control::{AdaptationCatalog, EcaRuleSet};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_catalog_matches_builtin() {
    let loaded = AdaptationCatalog::load(configs_dir().join("catalog.toml")).unwrap();
    assert_eq!(loaded, AdaptationCatalog::builtin());
}

#[test]
fn shipped_rules_match_builtin() {
    let loaded = EcaRuleSet::load(configs_dir().join("rules.toml")).unwrap();
    assert_eq!(loaded, EcaRuleSet::builtin());
    loaded.validate(&AdaptationCatalog::builtin()).unwrap();
}

#[test]
fn shipped_run_configs_parse() {
    for name in ["demo.toml", "benign.toml"] {
        let config = ScenarioConfig::load(configs_dir().join(name)).unwrap();
        config.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
