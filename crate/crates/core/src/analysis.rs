//! Negativity metrics, the negativity-conservation verdict, and Ehrenfest
//! residuals of recorded trajectories.

use std::fmt;

use crate::domain::PhysicalParams;
use crate::error::{Error, Result};
use crate::propagate::TrajectoryRecord;
use crate::states::PhaseSpaceState;

/// Largest `|Im W| / max |W|` accepted by [`negativity`].
pub const MAX_IMAGINARY_RESIDUE: f64 = 1e-8;
/// Noise threshold for area counting, relative to `max |W|`.
pub const AREA_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_TOLERANCE: f64 = 0.05;
pub const DEFAULT_FLOOR: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativityMetrics {
    /// `sum min(W, 0) dx dp`
    pub n_minus: f64,
    /// `sum max(W, 0) dx dp`
    pub n_plus: f64,
    /// Area of sites with `W < -threshold`.
    pub negative_area: f64,
    /// Area of sites with `|W| > threshold`.
    pub support_area: f64,
    pub threshold: f64,
}

impl NegativityMetrics {
    pub fn integral(&self) -> f64 {
        self.n_plus + self.n_minus
    }
}

/// Metrics of a real Wigner function (or density), rejecting fields whose
/// imaginary part is more than numerical residue.
pub fn negativity(state: &PhaseSpaceState) -> Result<NegativityMetrics> {
    let residue = state.imaginary_residue();
    if residue > MAX_IMAGINARY_RESIDUE {
        return Err(Error::ImaginaryResidue {
            residue,
            limit: MAX_IMAGINARY_RESIDUE,
        });
    }
    Ok(negativity_of_real_part(state))
}

/// Metrics of the real part of the field on the Wigner scale.
pub fn negativity_of_real_part(state: &PhaseSpaceState) -> NegativityMetrics {
    let w = state.wigner_real();
    let area = state.grid().cell_area();
    let max = w.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let threshold = AREA_THRESHOLD * max;
    let (mut minus, mut plus) = (0.0, 0.0);
    let (mut neg_sites, mut support_sites) = (0usize, 0usize);
    for &v in w.iter() {
        if v < 0.0 {
            minus += v;
        } else {
            plus += v;
        }
        if v < -threshold {
            neg_sites += 1;
        }
        if v.abs() > threshold {
            support_sites += 1;
        }
    }
    NegativityMetrics {
        n_minus: minus * area,
        n_plus: plus * area,
        negative_area: neg_sites as f64 * area,
        support_area: support_sites as f64 * area,
        threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    ClassicallyImplementable,
    MandatoryQuantum,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ClassicallyImplementable => "ClassicallyImplementable",
            Verdict::MandatoryQuantum => "MandatoryQuantum",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionVerdict {
    pub label: Verdict,
    pub drift_n_minus: f64,
    pub drift_n_plus: f64,
    pub drift_negative_area: f64,
    pub tolerance: f64,
    pub floor: f64,
}

impl EvolutionVerdict {
    pub fn max_drift(&self) -> f64 {
        self.drift_n_minus
            .max(self.drift_n_plus)
            .max(self.drift_negative_area)
    }
}

/// Largest `|m(t) - m(0)| / max(|m(0)|, floor)` over a series.
pub fn relative_drift(series: &[f64], floor: f64) -> f64 {
    let Some(&m0) = series.first() else {
        return 0.0;
    };
    let scale = m0.abs().max(floor);
    if scale == 0.0 {
        return if series.iter().all(|v| *v == m0) {
            0.0
        } else {
            f64::INFINITY
        };
    }
    series
        .iter()
        .map(|m| (m - m0).abs() / scale)
        .fold(0.0, f64::max)
}

/// Applies the negativity-conservation criterion with the default floor.
pub fn classify(trajectory: &TrajectoryRecord, tolerance: f64) -> Result<EvolutionVerdict> {
    classify_with(trajectory, tolerance, DEFAULT_FLOOR)
}

/// Drifts are measured against t = 0. The floor is taken relative to the
/// initial total variation `n_plus - n_minus` for the integrals and to the
/// initial support area for the negative area, so the verdict does not
/// change when every series is rescaled by the same constant.
pub fn classify_with(
    trajectory: &TrajectoryRecord,
    tolerance: f64,
    floor: f64,
) -> Result<EvolutionVerdict> {
    if trajectory.samples.len() < 2 {
        return Err(Error::Analysis(format!(
            "classification needs at least 2 samples, got {}",
            trajectory.samples.len()
        )));
    }
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::Analysis(format!(
            "tolerance must be > 0, got {tolerance}"
        )));
    }
    let metrics: Vec<NegativityMetrics> = trajectory.samples.iter().map(|s| s.negativity).collect();
    if metrics
        .iter()
        .any(|m| !(m.n_minus.is_finite() && m.n_plus.is_finite() && m.negative_area.is_finite()))
    {
        return Err(Error::Analysis(
            "trajectory has missing negativity metrics".into(),
        ));
    }
    let m0 = metrics[0];
    let mass_floor = floor * (m0.n_plus - m0.n_minus);
    let area_floor = floor * m0.support_area;
    let series = |f: fn(&NegativityMetrics) -> f64| metrics.iter().map(f).collect::<Vec<_>>();
    let drift_n_minus = relative_drift(&series(|m| m.n_minus), mass_floor);
    let drift_n_plus = relative_drift(&series(|m| m.n_plus), mass_floor);
    let drift_negative_area = relative_drift(&series(|m| m.negative_area), area_floor);
    let exceeded = [drift_n_minus, drift_n_plus, drift_negative_area]
        .iter()
        .any(|d| *d > tolerance);
    Ok(EvolutionVerdict {
        label: if exceeded {
            Verdict::MandatoryQuantum
        } else {
            Verdict::ClassicallyImplementable
        },
        drift_n_minus,
        drift_n_plus,
        drift_negative_area,
        tolerance,
        floor,
    })
}

/// `m d<x_q>/dt - <p_q>` and `d<p_q>/dt + <U'(x_q)>` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EhrenfestResiduals {
    pub times: Vec<f64>,
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
    /// True where a one-sided difference was used.
    pub one_sided: Vec<bool>,
}

impl EhrenfestResiduals {
    /// Largest absolute residual of either series, optionally skipping endpoints.
    pub fn max_abs(&self, include_endpoints: bool) -> f64 {
        self.position
            .iter()
            .zip(&self.momentum)
            .zip(&self.one_sided)
            .filter(|(_, flagged)| include_endpoints || !**flagged)
            .map(|((a, b), _)| a.abs().max(b.abs()))
            .fold(0.0, f64::max)
    }
}

fn derivative(series: &[f64], h: f64) -> Vec<f64> {
    let n = series.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (-3.0 * series[0] + 4.0 * series[1] - series[2]) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * series[n - 1] - 4.0 * series[n - 2] + series[n - 3]) / (2.0 * h)
            } else {
                (series[i + 1] - series[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Second-order finite differences of the recorded moments; the endpoints use
/// three-point one-sided stencils and are flagged.
pub fn ehrenfest_residuals(
    trajectory: &TrajectoryRecord,
    params: &PhysicalParams,
) -> Result<EhrenfestResiduals> {
    let n = trajectory.samples.len();
    if n < 3 {
        return Err(Error::Analysis(format!(
            "Ehrenfest residuals need at least 3 samples, got {n}"
        )));
    }
    let times = trajectory.times();
    let h = times[1] - times[0];
    if h.is_nan()
        || h <= 0.0
        || times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs())
    {
        return Err(Error::Analysis(
            "Ehrenfest residuals need uniform sampling".into(),
        ));
    }
    let x = trajectory.series(|s| s.x_mean);
    let p = trajectory.series(|s| s.p_mean);
    let force = trajectory.series(|s| s.force_mean);
    let dx = derivative(&x, h);
    let dp = derivative(&p, h);
    let position = dx
        .iter()
        .zip(&p)
        .map(|(d, p)| params.mass * d - p)
        .collect();
    let momentum = dp.iter().zip(&force).map(|(d, f)| d + f).collect();
    let one_sided = (0..n).map(|i| i == 0 || i == n - 1).collect();
    Ok(EhrenfestResiduals {
        times,
        position,
        momentum,
        one_sided,
    })
}
