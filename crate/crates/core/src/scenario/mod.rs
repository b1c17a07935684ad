//! Config-driven scenarios: parsing, running, snapshots and shipped presets.

mod check;
mod config;
mod run;
pub mod snapshot;

pub use check::{oracle_check, OracleReport};
pub use config::{
    load_config, parse_config, to_toml_string, InitialSpec, OutputSpec, ScenarioConfig,
};
pub use run::{
    heatmap_text, initial_state, output_dir, run_scenario, series_csv, ScenarioOutcome,
    OUTPUT_ROOT_ENV, SERIES_COLUMNS,
};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot, SnapshotHeader};

use crate::error::{ConfigIssue, Error, Result};
use crate::propagate::Engine;

/// Text of the shipped Morse preset.
pub const FIG2_PRESET: &str = include_str!("../../presets/fig2.toml");
/// Text of the shipped harmonic preset.
pub const HARMONIC_PRESET: &str = include_str!("../../presets/harmonic.toml");

fn with_engine(
    mut config: ScenarioConfig,
    engine: Engine,
    kappa: Option<f64>,
) -> Result<ScenarioConfig> {
    config.propagation.engine = engine;
    if let Some(k) = kappa {
        config.params = config
            .params
            .with_kappa(k)
            .map_err(|e| Error::Config(vec![ConfigIssue::new(None, format!("--kappa: {e}"))]))?;
    }
    let base = config.output.dir.to_string_lossy().into_owned();
    config.output.dir = match (engine, kappa) {
        (Engine::Unified, Some(k)) => format!("{base}_unified_k{k}"),
        _ => format!("{base}_{}", engine.name()),
    }
    .into();
    Ok(config)
}

/// The Morse preset for `engine`, optionally at another kappa. The output
/// directory is suffixed with the engine (and kappa when given).
pub fn fig2(engine: Engine, kappa: Option<f64>) -> Result<ScenarioConfig> {
    with_engine(parse_config(FIG2_PRESET)?, engine, kappa)
}

/// The harmonic preset for `engine`.
pub fn harmonic(engine: Engine) -> Result<ScenarioConfig> {
    with_engine(parse_config(HARMONIC_PRESET)?, engine, None)
}
