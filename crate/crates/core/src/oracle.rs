//! Dense-matrix reference propagation on small lattices.
//!
//! The lattice generator is assembled from dense spectral operators and
//! exponentiated, either directly by scaling and squaring or through its
//! Hermitian eigendecomposition when one generator is applied at many
//! times; split-step error studies compare against it.

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;

use crate::domain::{kappa_potential_kernel, PhaseSpaceGrid, PhysicalParams, Potential};
use crate::error::{Error, Result};
use crate::propagate::{density_of, Engine, SplitStepper};
use crate::states::PhaseSpaceState;

/// Largest lattice (in sites) the dense oracle accepts.
pub const MAX_ORACLE_SITES: usize = 1024;

/// `(1/n) sum_m exp(2 pi i m a / n) d_m exp(-2 pi i m b / n)`: a diagonal
/// frequency-space operator written in the sample basis.
fn spectral_operator(diag: &[f64]) -> DMatrix<Complex64> {
    let n = diag.len();
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    DMatrix::from_fn(n, n, |a, b| {
        let mut acc = Complex64::default();
        for (m, d) in diag.iter().enumerate() {
            let phase = tau * (m as f64) * (a as f64 - b as f64);
            acc += Complex64::from_polar(*d, phase);
        }
        acc / n as f64
    })
}

/// Generator `H / hbar` on the flattened lattice (index `ix * np + ip`), so
/// that the propagator is `exp(-i t H / hbar)`.
pub fn dense_generator(
    grid: &PhaseSpaceGrid,
    pot: &Potential,
    params: &PhysicalParams,
    engine: Engine,
) -> Result<DMatrix<Complex64>> {
    let sites = grid.sites();
    if sites > MAX_ORACLE_SITES {
        return Err(Error::Oracle(format!(
            "{}x{} lattice has {sites} sites; the dense oracle is limited to {MAX_ORACLE_SITES}",
            grid.nx, grid.np
        )));
    }
    let (nx, np) = grid.shape();
    let dyn_params = PhysicalParams {
        kappa: engine.effective_kappa(params),
        ..*params
    };
    let kernel = kappa_potential_kernel(grid, pot, &dyn_params)?;
    let mut gen = DMatrix::<Complex64>::zeros(sites, sites);

    // Kinetic part: (p / m) lambda_x along each p column.
    let derivative_x = spectral_operator(&grid.lambda_x);
    for ip in 0..np {
        let c = grid.p(ip) / params.mass;
        for a in 0..nx {
            for b in 0..nx {
                gen[(a * np + ip, b * np + ip)] += derivative_x[(a, b)] * c;
            }
        }
    }
    // Potential part: K(x, lambda_p) / hbar along each x row.
    for ix in 0..nx {
        let diag: Vec<f64> = kernel.row(ix).iter().map(|k| k / params.hbar).collect();
        let op = spectral_operator(&diag);
        for a in 0..np {
            for b in 0..np {
                gen[(ix * np + a, ix * np + b)] += op[(a, b)];
            }
        }
    }
    Ok(gen)
}

/// Dense propagator `exp(-i t H / hbar)`.
pub fn dense_propagator(
    grid: &PhaseSpaceGrid,
    pot: &Potential,
    params: &PhysicalParams,
    engine: Engine,
    t: f64,
) -> Result<DMatrix<Complex64>> {
    let gen = dense_generator(grid, pot, params, engine)?;
    Ok((gen * Complex64::new(0.0, -t)).exp())
}

/// Applies a dense lattice operator to a field.
pub fn apply_dense(op: &DMatrix<Complex64>, field: &Array2<Complex64>) -> Array2<Complex64> {
    let dim = field.dim();
    let v = DVector::from_iterator(field.len(), field.iter().copied());
    let out = op * v;
    Array2::from_shape_vec(dim, out.iter().copied().collect()).expect("shape preserved")
}

/// `exp(-i t H / hbar)` through the eigendecomposition of the Hermitian
/// generator: one O(n^3) factorization, then O(n^2) per application.
#[derive(Debug, Clone)]
pub struct EigenPropagator {
    values: DVector<f64>,
    vectors: DMatrix<Complex64>,
}

impl EigenPropagator {
    pub fn new(generator: DMatrix<Complex64>) -> Self {
        let eigen = generator.symmetric_eigen();
        Self {
            values: eigen.eigenvalues,
            vectors: eigen.eigenvectors,
        }
    }

    /// Evolves `field` over time `t`.
    pub fn apply(&self, t: f64, field: &Array2<Complex64>) -> Array2<Complex64> {
        let dim = field.dim();
        let v = DVector::from_iterator(field.len(), field.iter().copied());
        let mut c = self.vectors.ad_mul(&v);
        for (c, l) in c.iter_mut().zip(self.values.iter()) {
            *c *= Complex64::from_polar(1.0, -t * l);
        }
        let out = &self.vectors * c;
        Array2::from_shape_vec(dim, out.iter().copied().collect()).expect("shape preserved")
    }
}

/// Reference evolution of `state` to time `t` under `engine`.
pub fn dense_oracle(
    state: &PhaseSpaceState,
    pot: &Potential,
    engine: Engine,
    t: f64,
) -> Result<PhaseSpaceState> {
    let start = match engine {
        Engine::Liouville => density_of(state)?,
        _ => state.clone(),
    };
    let gen = dense_generator(start.grid(), pot, start.params(), engine)?;
    let mut out = EigenPropagator::new(gen).apply(t, start.raw());
    if engine == Engine::Liouville {
        out.mapv_inplace(|v| Complex64::from(v.re));
    }
    // The stored scaling of the input is kept; only the values change.
    let mut result = start;
    *result.raw_mut() = out;
    Ok(result)
}

/// Split-step errors against the dense propagator over a ladder of halved
/// time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitErrorStudy {
    pub dts: Vec<f64>,
    /// `max |step(dt) f - exp(-i H dt / hbar) f|` for one step.
    pub local: Vec<f64>,
    /// The same after `t_global / dt` steps against `exp(-i H t_global / hbar)`.
    pub global: Vec<f64>,
    pub t_global: f64,
}

impl SplitErrorStudy {
    fn ratios(errors: &[f64]) -> Vec<f64> {
        errors.windows(2).map(|w| w[0] / w[1]).collect()
    }

    /// Successive local error ratios; 8 for a third-order local error.
    pub fn local_ratios(&self) -> Vec<f64> {
        Self::ratios(&self.local)
    }

    /// Successive global error ratios; 4 for a second-order method.
    pub fn global_ratios(&self) -> Vec<f64> {
        Self::ratios(&self.global)
    }
}

fn max_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Compares the split-step propagator with the dense exponential for
/// `dt0, dt0/2, ...` (`levels` values). `t_global` must be a whole number of
/// steps at every level.
pub fn split_error_study(
    state: &PhaseSpaceState,
    pot: &Potential,
    engine: Engine,
    dt0: f64,
    levels: usize,
    t_global: f64,
) -> Result<SplitErrorStudy> {
    if levels < 2 {
        return Err(Error::Oracle(
            "an error study needs at least two time steps".into(),
        ));
    }
    let start = match engine {
        Engine::Liouville => density_of(state)?,
        _ => state.clone(),
    };
    let (grid, params) = (start.grid(), start.params());
    let field = start.raw();
    let exact = EigenPropagator::new(dense_generator(grid, pot, params, engine)?);
    let exact_global = exact.apply(t_global, field);
    let mut study = SplitErrorStudy {
        dts: Vec::with_capacity(levels),
        local: Vec::with_capacity(levels),
        global: Vec::with_capacity(levels),
        t_global,
    };
    for level in 0..levels {
        let dt = dt0 / f64::from(1u32 << level);
        let steps = (t_global / dt).round();
        if steps < 1.0 || ((steps * dt - t_global) / t_global).abs() > 1e-12 {
            return Err(Error::Oracle(format!(
                "t = {t_global} is not a whole number of steps of dt = {dt}"
            )));
        }
        let stepper = SplitStepper::new(grid, pot, params, engine, dt)?;
        let exact_local = exact.apply(dt, field);
        let mut one = field.clone();
        stepper.step(&mut one);
        let mut many = field.clone();
        stepper.advance(&mut many, steps as usize);
        study.dts.push(dt);
        study.local.push(max_diff(&one, &exact_local));
        study.global.push(max_diff(&many, &exact_global));
    }
    Ok(study)
}
