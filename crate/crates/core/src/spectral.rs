//! FFT plumbing along the two lattice axes.
//!
//! Fields are stored row-major as `(x index, p index)`. A forward transform
//! along the p axis moves to the mixed `(x, lambda_p)` representation; along
//! the x axis to `(lambda_x, p)`. Inverses include the `1/n` factor.

use std::sync::Arc;

use ndarray::{Array2, ArrayViewMut1, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::domain::PhaseSpaceGrid;

/// Lattice axis of a phase-space field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeAxis {
    X,
    P,
}

impl LatticeAxis {
    fn ndarray_axis(self) -> Axis {
        match self {
            LatticeAxis::X => Axis(0),
            LatticeAxis::P => Axis(1),
        }
    }
}

#[derive(Clone)]
struct AxisPlans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    len: usize,
}

impl AxisPlans {
    fn new(planner: &mut FftPlanner<f64>, len: usize) -> Self {
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
            len,
        }
    }
}

/// Precomputed FFT plans for a grid.
#[derive(Clone)]
pub struct Transforms {
    x: AxisPlans,
    p: AxisPlans,
}

impl std::fmt::Debug for Transforms {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transforms")
            .field("nx", &self.x.len)
            .field("np", &self.p.len)
            .finish()
    }
}

impl Transforms {
    pub fn new(grid: &PhaseSpaceGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            x: AxisPlans::new(&mut planner, grid.nx),
            p: AxisPlans::new(&mut planner, grid.np),
        }
    }

    pub fn forward(&self, field: &mut Array2<Complex64>, axis: LatticeAxis) {
        self.run(field, axis, false);
    }

    pub fn inverse(&self, field: &mut Array2<Complex64>, axis: LatticeAxis) {
        self.run(field, axis, true);
    }

    fn run(&self, field: &mut Array2<Complex64>, axis: LatticeAxis, inverse: bool) {
        let plans = match axis {
            LatticeAxis::X => &self.x,
            LatticeAxis::P => &self.p,
        };
        let fft = if inverse {
            &plans.inverse
        } else {
            &plans.forward
        };
        let scale = 1.0 / plans.len as f64;
        // Lanes run orthogonal to the transform axis.
        let lane_axis = match axis.ndarray_axis() {
            Axis(0) => Axis(1),
            _ => Axis(0),
        };
        field
            .axis_iter_mut(lane_axis)
            .into_par_iter()
            .for_each_init(
                || {
                    (
                        vec![Complex64::default(); plans.len],
                        vec![Complex64::default(); fft.get_inplace_scratch_len()],
                    )
                },
                |(buf, scratch), lane| {
                    transform_lane(lane, buf, scratch, fft.as_ref(), inverse, scale)
                },
            );
    }
}

fn transform_lane(
    mut lane: ArrayViewMut1<'_, Complex64>,
    buf: &mut [Complex64],
    scratch: &mut [Complex64],
    fft: &dyn Fft<f64>,
    inverse: bool,
    scale: f64,
) {
    if let Some(slice) = lane.as_slice_mut() {
        fft.process_with_scratch(slice, scratch);
        if inverse {
            slice.iter_mut().for_each(|v| *v *= scale);
        }
        return;
    }
    for (b, v) in buf.iter_mut().zip(lane.iter()) {
        *b = *v;
    }
    fft.process_with_scratch(buf, scratch);
    if inverse {
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = *b * scale;
        }
    } else {
        for (v, b) in lane.iter_mut().zip(buf.iter()) {
            *v = *b;
        }
    }
}

/// Spectral derivative of periodic samples spaced by `d`.
pub fn spectral_derivative(samples: &[Complex64], d: f64) -> Vec<Complex64> {
    let n = samples.len();
    let mut planner = FftPlanner::new();
    let mut buf = samples.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    let freqs = crate::domain::fft_frequencies(n, d);
    for (v, k) in buf.iter_mut().zip(freqs) {
        *v *= Complex64::new(0.0, k);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter_mut().for_each(|v| *v /= n as f64);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_resolved_mode() {
        let g = PhaseSpaceGrid::new(64, 8, -3.0, 5.0, -1.0, 1.0).unwrap();
        let l = g.x_max - g.x_min;
        let k = 3.0 * 2.0 * PI / l;
        let samples: Vec<_> = g
            .xs()
            .iter()
            .map(|&x| Complex64::new(0.0, k * x).exp())
            .collect();
        let d = spectral_derivative(&samples, g.dx);
        for (x, v) in g.xs().iter().zip(d) {
            let exact = Complex64::new(0.0, k) * Complex64::new(0.0, k * x).exp();
            assert!((v - exact).norm() < 1e-12, "{v} vs {exact}");
        }
    }

    #[test]
    fn round_trip_both_axes() {
        let g = PhaseSpaceGrid::new(32, 16, -1.0, 1.0, -2.0, 2.0).unwrap();
        let t = Transforms::new(&g);
        let original = Array2::from_shape_fn(g.shape(), |(i, j)| {
            Complex64::new(
                (i as f64 * 0.37).sin() + j as f64,
                (j as f64 * 1.3).cos() - i as f64,
            )
        });
        let max = original.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for axis in [LatticeAxis::X, LatticeAxis::P] {
            let mut f = original.clone();
            t.forward(&mut f, axis);
            t.inverse(&mut f, axis);
            let err = f
                .iter()
                .zip(original.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err / max < 1e-12);
        }
    }

    #[test]
    fn axis_transform_matches_naive_dft() {
        let g = PhaseSpaceGrid::new(8, 10, 0.0, 1.0, 0.0, 1.0).unwrap();
        let t = Transforms::new(&g);
        let f0 = Array2::from_shape_fn(g.shape(), |(i, j)| {
            Complex64::new(i as f64 + 0.5 * j as f64, (i * j) as f64 * 0.1)
        });
        let mut f = f0.clone();
        t.forward(&mut f, LatticeAxis::X);
        for j in 0..g.np {
            for m in 0..g.nx {
                let mut acc = Complex64::default();
                for i in 0..g.nx {
                    acc += f0[[i, j]]
                        * Complex64::from_polar(1.0, -2.0 * PI * (m * i) as f64 / g.nx as f64);
                }
                assert!((acc - f[[m, j]]).norm() < 1e-12);
            }
        }
    }
}
