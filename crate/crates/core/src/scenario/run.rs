//! Running a scenario and writing its artifact bundle.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::{classify_with, EvolutionVerdict};
use crate::error::{ConfigIssue, Error, Result};
use crate::propagate::{propagate, TrajectoryRecord};
use crate::scenario::config::{to_toml_string, InitialSpec, ScenarioConfig};
use crate::scenario::snapshot::{read_snapshot, snapshot_name, write_snapshot};
use crate::states::{gaussian_state, PhaseSpaceState};

/// Environment variable naming the root that relative output directories
/// are placed under.
pub const OUTPUT_ROOT_ENV: &str = "NEGAFLOW_OUT";

/// Header of `series.csv`.
pub const SERIES_COLUMNS: [&str; 12] = [
    "t", "norm", "purity", "integral", "n_minus", "n_plus", "neg_area", "x_mean", "p_mean",
    "x2_mean", "p2_mean", "energy",
];

/// Resolves the configured output directory against the output root.
pub fn output_dir(config: &ScenarioConfig) -> PathBuf {
    let dir = &config.output.dir;
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() && !root.is_empty() => PathBuf::from(root).join(dir),
        _ => dir.clone(),
    }
}

/// Result of [`run_scenario`].
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub dir: PathBuf,
    pub record: TrajectoryRecord,
    pub verdict: EvolutionVerdict,
    pub final_state: PhaseSpaceState,
}

/// Builds the initial state described by the config.
pub fn initial_state(config: &ScenarioConfig) -> Result<PhaseSpaceState> {
    match &config.initial {
        InitialSpec::Gaussian(spec) => gaussian_state(spec, config.state_params(), &config.grid),
        InitialSpec::Snapshot { path } => {
            let snap = read_snapshot(path)?;
            let mut issues = Vec::new();
            if snap.state.grid() != &config.grid {
                issues.push(ConfigIssue::new(
                    None,
                    format!(
                        "snapshot {} was taken on a different grid than [grid]",
                        path.display()
                    ),
                ));
            }
            if snap.state.params() != &config.state_params() {
                issues.push(ConfigIssue::new(
                    None,
                    format!(
                        "snapshot {} has parameters {:?}, the scenario needs {:?}",
                        path.display(),
                        snap.state.params(),
                        config.state_params()
                    ),
                ));
            }
            if issues.is_empty() {
                Ok(snap.state)
            } else {
                Err(Error::Config(issues))
            }
        }
    }
}

/// Formats the recorded series as CSV with round-trip precision.
pub fn series_csv(record: &TrajectoryRecord) -> String {
    let mut out = SERIES_COLUMNS.join(",");
    out.push('\n');
    for s in &record.samples {
        let row = [
            s.t,
            s.norm,
            s.purity,
            s.integral,
            s.negativity.n_minus,
            s.negativity.n_plus,
            s.negativity.negative_area,
            s.x_mean,
            s.p_mean,
            s.x2_mean,
            s.p2_mean,
            s.energy,
        ];
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Real part of the field on the Wigner (or density) scale as a whitespace
/// separated matrix: one line per x row, one column per p.
pub fn heatmap_text(state: &PhaseSpaceState) -> String {
    let w = state.wigner_real();
    let grid = state.grid();
    let mut out = String::with_capacity(w.len() * 24);
    let _ = writeln!(
        out,
        "# {} x {} ; rows x in [{}, {}), columns p in [{}, {})",
        grid.nx, grid.np, grid.x_min, grid.x_max, grid.p_min, grid.p_max
    );
    for row in w.rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

fn verdict_text(
    config: &ScenarioConfig,
    record: &TrajectoryRecord,
    v: &EvolutionVerdict,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "verdict: {}", v.label);
    let _ = writeln!(out, "engine: {}", config.propagation.engine.name());
    let _ = writeln!(out, "kappa: {}", record.params.kappa);
    let _ = writeln!(out, "t_final: {}", record.last().map_or(0.0, |s| s.t));
    let _ = writeln!(out, "tolerance: {}", v.tolerance);
    let _ = writeln!(out, "floor: {}", v.floor);
    let _ = writeln!(out, "drift_n_minus: {}", v.drift_n_minus);
    let _ = writeln!(out, "drift_n_plus: {}", v.drift_n_plus);
    let _ = writeln!(out, "drift_negative_area: {}", v.drift_negative_area);
    for w in &record.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Propagates the scenario and writes `series.csv`, snapshots, heat maps,
/// `verdict.txt` and the canonical `config.toml` into the output directory.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome> {
    let dir = output_dir(config);
    let initial = initial_state(config)?;
    log::info!(
        "running {} engine for {} steps of dt = {} on {}x{}",
        config.propagation.engine.name(),
        config.propagation.n_steps,
        config.propagation.dt,
        config.grid.nx,
        config.grid.np
    );
    let (final_state, record) = propagate(&initial, &config.potential, &config.propagation)?;
    let verdict = classify_with(&record, config.output.tolerance, config.output.floor)?;

    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write(&dir.join("config.toml"), to_toml_string(config).as_bytes())?;
    write(&dir.join("series.csv"), series_csv(&record).as_bytes())?;
    for (step, t, state) in &record.snapshots {
        write_snapshot(&dir.join(snapshot_name(*step)), state, *t)?;
        if config.output.heatmaps {
            write(
                &dir.join(format!("heatmap_{step:06}.txt")),
                heatmap_text(state).as_bytes(),
            )?;
        }
    }
    write(
        &dir.join("verdict.txt"),
        verdict_text(config, &record, &verdict).as_bytes(),
    )?;
    log::info!("{} -> {}", verdict.label, dir.display());
    Ok(ScenarioOutcome {
        dir,
        record,
        verdict,
        final_state,
    })
}
