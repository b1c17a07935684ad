//! Small-lattice comparison of a scenario's propagator with the dense oracle.

use std::fmt;

use crate::domain::PhaseSpaceGrid;
use crate::error::{Error, Result};
use crate::oracle::{split_error_study, SplitErrorStudy, MAX_ORACLE_SITES};
use crate::scenario::config::{InitialSpec, ScenarioConfig};
use crate::scenario::run::initial_state;
use crate::states::gaussian_state;

/// Lattice points per axis of a reduced oracle grid.
pub const REDUCED_POINTS: usize = 16;
/// Half-width of a reduced grid in units of the initial widths.
const REDUCED_HALF_WIDTH: f64 = 7.5;
/// Number of halvings of the configured time step.
const LEVELS: usize = 3;
/// Global comparisons run for this many of the coarsest steps.
const GLOBAL_STEPS: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub grid: PhaseSpaceGrid,
    /// True when the scenario grid was too large and a reduced grid around
    /// the initial state was used instead.
    pub reduced: bool,
    pub study: SplitErrorStudy,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = &self.grid;
        writeln!(
            f,
            "oracle grid: {}x{} on x in [{}, {}), p in [{}, {}){}",
            g.nx,
            g.np,
            g.x_min,
            g.x_max,
            g.p_min,
            g.p_max,
            if self.reduced { " (reduced)" } else { "" }
        )?;
        writeln!(f, "global comparison at t = {}", self.study.t_global)?;
        writeln!(
            f,
            "{:>12} {:>14} {:>8} {:>14} {:>8}",
            "dt", "local", "ratio", "global", "ratio"
        )?;
        let lr = self.study.local_ratios();
        let gr = self.study.global_ratios();
        for i in 0..self.study.dts.len() {
            let show = |r: Option<&f64>| r.map_or_else(|| "-".to_string(), |r| format!("{r:.3}"));
            writeln!(
                f,
                "{:>12} {:>14.6e} {:>8} {:>14.6e} {:>8}",
                self.study.dts[i],
                self.study.local[i],
                show(i.checked_sub(1).and_then(|j| lr.get(j))),
                self.study.global[i],
                show(i.checked_sub(1).and_then(|j| gr.get(j))),
            )?;
        }
        write!(
            f,
            "expected ratios: local 8 (third order), global 4 (second order)"
        )
    }
}

/// Runs the split-step/dense comparison for a scenario.
pub fn oracle_check(config: &ScenarioConfig) -> Result<OracleReport> {
    let dt = config.propagation.dt;
    let engine = config.propagation.engine;
    let (state, reduced) = if config.grid.sites() <= MAX_ORACLE_SITES {
        (initial_state(config)?, false)
    } else {
        let InitialSpec::Gaussian(spec) = &config.initial else {
            return Err(Error::Oracle(format!(
                "the grid has {} sites (limit {MAX_ORACLE_SITES}) and a snapshot initial state cannot be reduced",
                config.grid.sites()
            )));
        };
        let params = config.state_params();
        let h_eff = if params.kappa > 0.0 {
            params.hbar_kappa()
        } else {
            params.hbar
        };
        let sigma_p = h_eff / (2.0 * spec.sigma_x);
        let (hx, hp) = (
            REDUCED_HALF_WIDTH * spec.sigma_x,
            REDUCED_HALF_WIDTH * sigma_p,
        );
        let grid = PhaseSpaceGrid::new(
            REDUCED_POINTS,
            REDUCED_POINTS,
            spec.x0 - hx,
            spec.x0 + hx,
            spec.p0 - hp,
            spec.p0 + hp,
        )?;
        (gaussian_state(spec, params, &grid)?, true)
    };
    let study = split_error_study(
        &state,
        &config.potential,
        engine,
        dt,
        LEVELS,
        GLOBAL_STEPS * dt,
    )?;
    Ok(OracleReport {
        grid: state.grid().clone(),
        reduced,
        study,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagate::Engine;
    use crate::scenario::fig2;

    #[test]
    fn reduced_fig2_check_shows_second_order() {
        let mut config = fig2(Engine::Unified, None).unwrap();
        config.propagation.dt = 0.01;
        let report = oracle_check(&config).unwrap();
        assert!(report.reduced);
        assert_eq!(report.grid.sites(), REDUCED_POINTS * REDUCED_POINTS);
        for r in report.study.global_ratios() {
            assert!((r - 4.0).abs() < 0.5, "{report}");
        }
        let text = report.to_string();
        assert!(text.contains("(reduced)"));
    }
}
