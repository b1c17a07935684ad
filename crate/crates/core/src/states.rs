//! Configuration-space pure states, density matrices, Wigner functions and
//! unified phase-space amplitudes.

use std::borrow::Cow;
use std::f64::consts::{PI, SQRT_2};

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use statrs::function::erf::erfc;

use crate::domain::{PhaseSpaceGrid, PhysicalParams, Potential};
use crate::error::{Error, Result};
use crate::spectral::{LatticeAxis, Transforms};

const NORMALIZATION_TOL: f64 = 1e-10;
/// Mass allowed outside the lattice when building an initial state.
pub const FOOTPRINT_TOL: f64 = 1e-10;
/// Spectral weight beyond which shifted-argument aliasing is reported.
pub const ALIASING_WARN: f64 = 1e-10;
const MAX_OBSERVABLE_DEGREE: usize = 8;

/// Pure state `phi(x_j)` on the x axis of a phase-space grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationState {
    amplitudes: Vec<Complex64>,
    x_min: f64,
    dx: f64,
    params: PhysicalParams,
}

impl ConfigurationState {
    pub fn new(
        grid: &PhaseSpaceGrid,
        params: PhysicalParams,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        params.validate()?;
        if amplitudes.len() != grid.nx {
            return Err(Error::State(format!(
                "expected {} amplitudes, got {}",
                grid.nx,
                amplitudes.len()
            )));
        }
        let state = Self {
            amplitudes,
            x_min: grid.x_min,
            dx: grid.dx,
            params,
        };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::State(format!(
                "configuration state must be normalized, sum |phi|^2 dx = {norm}"
            )));
        }
        Ok(state)
    }

    /// Samples `f` on the grid and normalizes the result.
    pub fn from_fn(
        grid: &PhaseSpaceGrid,
        params: PhysicalParams,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let mut amplitudes: Vec<Complex64> = grid.xs().into_iter().map(f).collect();
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * grid.dx;
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::State(format!(
                "cannot normalize amplitudes with norm {norm}"
            )));
        }
        let s = 1.0 / norm.sqrt();
        amplitudes.iter_mut().for_each(|a| *a *= s);
        Self::new(grid, params, amplitudes)
    }

    /// Harmonic-oscillator eigenstate of order 0 or 1 centred at `x0` with
    /// momentum `p0`, position width `sigma_x` (std. dev. of `|phi|^2` for n = 0).
    pub fn hermite_gaussian(
        grid: &PhaseSpaceGrid,
        params: PhysicalParams,
        x0: f64,
        p0: f64,
        sigma_x: f64,
        order: u8,
    ) -> Result<Self> {
        let hk = params.hbar_kappa();
        if hk <= 0.0 {
            return Err(Error::ZeroKappa(
                "configuration-space states need hbar*kappa > 0; build phase-space amplitudes directly".into(),
            ));
        }
        if order > 1 {
            return Err(Error::State(format!(
                "hermite order must be 0 or 1, got {order}"
            )));
        }
        Self::from_fn(grid, params, |x| {
            let u = (x - x0) / sigma_x;
            let envelope = (-0.25 * u * u).exp();
            let poly = if order == 0 { 1.0 } else { u };
            Complex64::from_polar(poly * envelope, p0 * (x - x0) / hk)
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dx
    }

    /// `<phi| G(x_q) F(p_q) |phi>` with `x_q = x`, `p_q = -i hbar kappa d/dx`;
    /// F is applied first.
    pub fn expectation(&self, obs: &ObservableSpec) -> Result<Complex64> {
        obs.validate()?;
        let n = self.amplitudes.len();
        let hk = self.params.hbar_kappa();
        let mut planner = FftPlanner::new();
        let mut buf = self.amplitudes.clone();
        planner.plan_fft_forward(n).process(&mut buf);
        let freqs = crate::domain::fft_frequencies(n, self.dx);
        for (v, k) in buf.iter_mut().zip(freqs) {
            *v *= obs.f.eval(hk * k);
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        let mut acc = Complex64::default();
        for (j, (phi, fphi)) in self.amplitudes.iter().zip(&buf).enumerate() {
            acc += phi.conj() * obs.g.eval(self.x(j)) * (*fphi / n as f64);
        }
        Ok(acc * self.dx)
    }
}

/// `rho(x, x')` sampled on the x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub rho: Array2<Complex64>,
    pub dx: f64,
    pub params: PhysicalParams,
}

impl DensityMatrix {
    pub fn from_pure(phi: &ConfigurationState) -> Self {
        let a = phi.amplitudes();
        let rho = Array2::from_shape_fn((a.len(), a.len()), |(i, j)| a[i] * a[j].conj());
        Self {
            rho,
            dx: phi.dx(),
            params: *phi.params(),
        }
    }

    /// Convex combination of density matrices on the same axis.
    pub fn mixture(parts: &[(f64, &DensityMatrix)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::State("empty mixture".into()))?
            .1;
        let mut rho = Array2::zeros(first.rho.raw_dim());
        for (w, d) in parts {
            if d.rho.raw_dim() != first.rho.raw_dim() {
                return Err(Error::State("mixture components differ in size".into()));
            }
            rho.scaled_add(Complex64::from(*w), &d.rho);
        }
        Ok(Self {
            rho,
            dx: first.dx,
            params: first.params,
        })
    }

    pub fn trace(&self) -> f64 {
        self.rho.diag().iter().map(|v| v.re).sum::<f64>() * self.dx
    }

    /// Largest `|rho(x,x') - rho(x',x)^*|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.rho.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.rho[[i, j]] - self.rho[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx * self.dx
    }
}

/// Interpretation of a phase-space field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// Wigner quasiprobability `W(x, p)`.
    Wigner,
    /// Unified amplitude `Psi = sqrt(2 pi hbar kappa) W`.
    Unified,
    /// Real classical phase-space density.
    Density,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Wigner => "wigner",
            Representation::Unified => "unified",
            Representation::Density => "density",
        }
    }
}

/// A complex field over the phase-space lattice.
///
/// Values are kept in the scaling they were produced in; [`convert`] only
/// changes the reported representation, so conversions never touch the
/// stored numbers and a round trip restores the state exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceState {
    values: Array2<Complex64>,
    stored: Representation,
    repr: Representation,
    grid: PhaseSpaceGrid,
    params: PhysicalParams,
}

impl PhaseSpaceState {
    pub fn new(
        grid: PhaseSpaceGrid,
        params: PhysicalParams,
        repr: Representation,
        field: Array2<Complex64>,
    ) -> Result<Self> {
        params.validate()?;
        if field.dim() != grid.shape() {
            return Err(Error::State(format!(
                "field shape {:?} does not match grid {:?}",
                field.dim(),
                grid.shape()
            )));
        }
        Ok(Self {
            values: field,
            stored: repr,
            repr,
            grid,
            params,
        })
    }

    pub fn density(
        grid: PhaseSpaceGrid,
        params: PhysicalParams,
        rho: &Array2<f64>,
    ) -> Result<Self> {
        Self::new(
            grid,
            params,
            Representation::Density,
            rho.mapv(Complex64::from),
        )
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn representation(&self) -> Representation {
        self.repr
    }

    /// Field values in the current representation.
    pub fn field(&self) -> Cow<'_, Array2<Complex64>> {
        let s = self.factor_to(self.repr);
        if s == 1.0 {
            Cow::Borrowed(&self.values)
        } else {
            Cow::Owned(self.values.mapv(|v| v * s))
        }
    }

    /// Stored values, whatever their scaling. Linear propagation acts on these directly.
    pub(crate) fn raw(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub(crate) fn raw_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    /// Rebuilds a state from stored values, their scaling and the reported tag.
    pub(crate) fn from_stored(
        grid: PhaseSpaceGrid,
        params: PhysicalParams,
        stored: Representation,
        repr: Representation,
        values: Array2<Complex64>,
    ) -> Result<Self> {
        if (stored == Representation::Density) != (repr == Representation::Density) {
            return Err(Error::State(format!(
                "a {} field cannot be reported as {}",
                stored.name(),
                repr.name()
            )));
        }
        let mut state = Self::new(grid, params, stored, values)?;
        state.repr = repr;
        Ok(state)
    }

    /// Representation whose scaling the stored values carry.
    pub(crate) fn stored_representation(&self) -> Representation {
        self.stored
    }

    /// Factor taking stored values to `target` scaling.
    pub(crate) fn factor_to(&self, target: Representation) -> f64 {
        use Representation::*;
        let root = self.params.norm_scale().sqrt();
        match (self.stored, target) {
            (Wigner, Unified) => root,
            (Unified, Wigner) => 1.0 / root,
            _ => 1.0,
        }
    }

    /// Factor from stored values to the Wigner scale (or density for densities).
    pub(crate) fn wigner_factor(&self) -> f64 {
        match self.stored {
            Representation::Density => 1.0,
            _ => self.factor_to(Representation::Wigner),
        }
    }

    pub(crate) fn unified_factor(&self) -> f64 {
        match self.stored {
            Representation::Density => 1.0,
            _ => self.factor_to(Representation::Unified),
        }
    }

    /// Real part of the field on the Wigner scale.
    pub fn wigner_real(&self) -> Array2<f64> {
        let s = self.wigner_factor();
        self.values.mapv(|v| v.re * s)
    }

    /// Largest `|Im W|` relative to the largest `|W|`.
    pub fn imaginary_residue(&self) -> f64 {
        let max = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return 0.0;
        }
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max) / max
    }

    /// Linear combination `a * self + b * other` on the Wigner scale.
    pub fn combine(&self, a: f64, other: &PhaseSpaceState, b: f64) -> Result<Self> {
        if self.grid != other.grid || self.params != other.params {
            return Err(Error::State(
                "cannot combine states on different grids or params".into(),
            ));
        }
        let (sa, sb) = (a * self.wigner_factor(), b * other.wigner_factor());
        let values = ndarray::Zip::from(&self.values)
            .and(&other.values)
            .map_collect(|x, y| x * sa + y * sb);
        let repr = if self.stored == Representation::Density {
            Representation::Density
        } else {
            Representation::Wigner
        };
        Self::new(self.grid.clone(), self.params, repr, values)
    }

    /// Mirror image `x -> x_min + x_max - x` on the lattice; the site `j`
    /// maps to `(nx - j) mod nx`.
    pub fn reflect_x(&self) -> Self {
        let nx = self.grid.nx;
        let values =
            Array2::from_shape_fn(self.values.dim(), |(j, k)| self.values[[(nx - j) % nx, k]]);
        Self {
            values,
            ..self.clone()
        }
    }
}

/// Builds the Wigner function of a pure state by direct transform over the
/// lattice offsets `y = 2 n dx` for each x row.
pub fn wigner_from_pure(
    phi: &ConfigurationState,
    grid: &PhaseSpaceGrid,
) -> Result<PhaseSpaceState> {
    let params = *phi.params();
    let hk = params.hbar_kappa();
    if hk <= 0.0 {
        return Err(Error::ZeroKappa(
            "the Wigner construction needs hbar*kappa > 0; use gaussian_state for classical amplitudes".into(),
        ));
    }
    if phi.amplitudes().len() != grid.nx || phi.dx() != grid.dx {
        return Err(Error::State(
            "configuration state does not live on this grid".into(),
        ));
    }
    let nx = grid.nx;
    let np = grid.np;
    let a = phi.amplitudes();
    // phase[n][k] = exp(i p_k 2 n dx / (hbar kappa)), n >= 0
    let mut phases = Array2::<Complex64>::zeros((nx, np));
    for ((n, k), v) in phases.indexed_iter_mut() {
        *v = Complex64::from_polar(1.0, grid.p(k) * 2.0 * n as f64 * grid.dx / hk);
    }
    let weight = grid.dx / (PI * hk);
    let mut field = Array2::<Complex64>::zeros((nx, np));
    field
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(j, mut row)| {
            let reach = j.min(nx - 1 - j) as isize;
            for n in -reach..=reach {
                let c = a[(j as isize - n) as usize] * a[(j as isize + n) as usize].conj() * weight;
                let phase_row = phases.row(n.unsigned_abs());
                if n >= 0 {
                    for (w, ph) in row.iter_mut().zip(phase_row.iter()) {
                        *w += c * ph;
                    }
                } else {
                    for (w, ph) in row.iter_mut().zip(phase_row.iter()) {
                        *w += c * ph.conj();
                    }
                }
            }
        });
    PhaseSpaceState::new(grid.clone(), params, Representation::Wigner, field)
}

/// Rescales between the Wigner and unified representations.
pub fn convert(state: &PhaseSpaceState, target: Representation) -> Result<PhaseSpaceState> {
    if state.params.kappa <= 0.0 {
        return Err(Error::ZeroKappa(
            "the Wigner/unified scaling sqrt(2 pi hbar kappa) vanishes".into(),
        ));
    }
    match (state.repr, target) {
        (Representation::Density, _) | (_, Representation::Density) => Err(Error::State(
            "densities have no Wigner/unified counterpart".into(),
        )),
        _ => {
            let mut out = state.clone();
            out.repr = target;
            Ok(out)
        }
    }
}

/// Norm, purity and integral of a phase-space state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormPurity {
    /// `sum |Psi|^2 dx dp`; `sum rho dx dp` for densities.
    pub norm: f64,
    /// `2 pi hbar kappa sum |W|^2 dx dp`; NaN for densities.
    pub purity: f64,
    /// `sum Re W dx dp`.
    pub integral: f64,
}

pub fn norm_and_purity(state: &PhaseSpaceState) -> NormPurity {
    let area = state.grid.cell_area();
    if state.stored == Representation::Density {
        let mass = state.values.iter().map(|v| v.re).sum::<f64>() * area;
        return NormPurity {
            norm: mass,
            purity: f64::NAN,
            integral: mass,
        };
    }
    let sq: f64 = state.values.iter().map(|v| v.norm_sqr()).sum();
    let re: f64 = state.values.iter().map(|v| v.re).sum();
    let u = state.unified_factor();
    let w = state.wigner_factor();
    NormPurity {
        norm: sq * u * u * area,
        purity: state.params.norm_scale() * sq * w * w * area,
        integral: re * w * area,
    }
}

/// One-variable function used in `G(x_q) F(p_q)` observables.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable1D {
    /// The constant 1.
    Identity,
    /// `t`
    Coordinate,
    /// `t^2`
    Square,
    /// `t^n`
    Monomial(u32),
    /// `sum c[n] t^n`
    Polynomial(Vec<f64>),
    /// `U(t)`
    PotentialValue(Potential),
    /// `U'(t)`
    PotentialDerivative(Potential),
}

impl Observable1D {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Observable1D::Identity => 1.0,
            Observable1D::Coordinate => t,
            Observable1D::Square => t * t,
            Observable1D::Monomial(n) => t.powi(*n as i32),
            Observable1D::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &c| acc * t + c),
            Observable1D::PotentialValue(p) => p.value(t),
            Observable1D::PotentialDerivative(p) => p.derivative(t),
        }
    }

    fn is_constant(&self) -> bool {
        match self {
            Observable1D::Identity | Observable1D::Monomial(0) => true,
            Observable1D::Polynomial(c) => c.iter().skip(1).all(|v| *v == 0.0),
            _ => false,
        }
    }

    fn degree(&self) -> Option<usize> {
        match self {
            Observable1D::Identity => Some(0),
            Observable1D::Coordinate => Some(1),
            Observable1D::Square => Some(2),
            Observable1D::Monomial(n) => Some(*n as usize),
            Observable1D::Polynomial(c) => Some(c.len().saturating_sub(1)),
            _ => None,
        }
    }
}

/// `G(x_q) F(p_q)`, applied right to left (F first).
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    pub g: Observable1D,
    pub f: Observable1D,
}

impl ObservableSpec {
    pub fn new(g: Observable1D, f: Observable1D) -> Self {
        Self { g, f }
    }

    pub fn position(g: Observable1D) -> Self {
        Self::new(g, Observable1D::Identity)
    }

    pub fn momentum(f: Observable1D) -> Self {
        Self::new(Observable1D::Identity, f)
    }

    pub fn validate(&self) -> Result<()> {
        for part in [&self.g, &self.f] {
            if let Some(d) = part.degree() {
                if d > MAX_OBSERVABLE_DEGREE {
                    return Err(Error::State(format!(
                        "observable degree {d} exceeds {MAX_OBSERVABLE_DEGREE}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Result of a phase-space expectation value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Expectation {
    pub value: Complex64,
    /// Fraction of spectral weight whose shifted argument falls off the lattice.
    pub overflow_fraction: f64,
}

impl Expectation {
    pub fn real(&self) -> f64 {
        self.value.re
    }

    pub fn imaginary_residue(&self) -> f64 {
        self.value.im
    }
}

/// `<Psi| G(x_q) F(p_q) |Psi>` with `x_q = x - hbar kappa lambda_p / 2` and
/// `p_q = p + hbar kappa lambda_x / 2`.
pub fn expectation(state: &PhaseSpaceState, obs: &ObservableSpec) -> Result<Expectation> {
    let transforms = Transforms::new(&state.grid);
    expectation_with(state, obs, state.params.kappa, &transforms)
}

/// As [`expectation`] with an explicit quantumness for the shifted operators.
pub fn expectation_with(
    state: &PhaseSpaceState,
    obs: &ObservableSpec,
    kappa: f64,
    transforms: &Transforms,
) -> Result<Expectation> {
    obs.validate()?;
    if state.stored == Representation::Density {
        return Err(Error::State(
            "operator expectations need an amplitude, not a density".into(),
        ));
    }
    let grid = &state.grid;
    let hk = state.params.hbar * kappa;
    let u = state.unified_factor();
    let psi = state.values.mapv(|v| v * u);
    let mut work = psi.clone();
    let mut overflow = 0.0f64;

    if !obs.f.is_constant() {
        transforms.forward(&mut work, LatticeAxis::X);
        let mut outside = 0.0;
        let mut total = 0.0;
        for ((ix, ip), v) in work.indexed_iter_mut() {
            let arg = grid.p(ip) + 0.5 * hk * grid.lambda_x[ix];
            let w = v.norm_sqr();
            total += w;
            if arg < grid.p_min || arg >= grid.p_max {
                outside += w;
            }
            *v *= obs.f.eval(arg);
        }
        if total > 0.0 {
            overflow = overflow.max(outside / total);
        }
        transforms.inverse(&mut work, LatticeAxis::X);
    } else {
        let c = obs.f.eval(0.0);
        work.mapv_inplace(|v| v * c);
    }

    if !obs.g.is_constant() {
        transforms.forward(&mut work, LatticeAxis::P);
        let mut outside = 0.0;
        let mut total = 0.0;
        for ((ix, ip), v) in work.indexed_iter_mut() {
            let arg = grid.x(ix) - 0.5 * hk * grid.lambda_p[ip];
            let w = v.norm_sqr();
            total += w;
            if arg < grid.x_min || arg >= grid.x_max {
                outside += w;
            }
            *v *= obs.g.eval(arg);
        }
        if total > 0.0 {
            overflow = overflow.max(outside / total);
        }
        transforms.inverse(&mut work, LatticeAxis::P);
    } else {
        let c = obs.g.eval(0.0);
        work.mapv_inplace(|v| v * c);
    }

    let value: Complex64 = psi
        .iter()
        .zip(work.iter())
        .map(|(a, b)| a.conj() * b)
        .sum::<Complex64>()
        * grid.cell_area();
    if overflow > ALIASING_WARN {
        log::warn!("shifted-argument support exceeds the grid: overflow fraction {overflow:e}");
    }
    Ok(Expectation {
        value,
        overflow_fraction: overflow,
    })
}

/// Position and momentum marginals of the Wigner-scale field.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
}

pub fn marginals(state: &PhaseSpaceState) -> Marginals {
    let w = state.wigner_real();
    let grid = &state.grid;
    let position = w.sum_axis(Axis(1)).mapv(|v| v * grid.dp).to_vec();
    let momentum = w.sum_axis(Axis(0)).mapv(|v| v * grid.dx).to_vec();
    Marginals { position, momentum }
}

/// Initial-state description for [`gaussian_state`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianSpec {
    pub x0: f64,
    pub p0: f64,
    pub sigma_x: f64,
    pub hermite_order: u8,
}

/// Upper-tail mass of the standardized order-0 / order-1 Hermite-Gaussian density.
fn hermite_tail(z: f64, order: u8) -> f64 {
    let q = 0.5 * erfc(z / SQRT_2);
    if order == 0 {
        q
    } else {
        z * (-0.5 * z * z).exp() / (2.0 * PI).sqrt() + q
    }
}

/// Momentum width `hbar_eff / (2 sigma_x)`, with `hbar_eff = hbar kappa`
/// (or `hbar` for the classical amplitude at kappa = 0).
fn gaussian_sigma_p(spec: &GaussianSpec, params: &PhysicalParams) -> f64 {
    let h_eff = if params.kappa > 0.0 {
        params.hbar_kappa()
    } else {
        params.hbar
    };
    h_eff / (2.0 * spec.sigma_x)
}

/// Checks a Gaussian spec against a grid without building the state: widths,
/// order, lattice resolution, and the mass falling outside the lattice.
pub fn check_gaussian(
    spec: &GaussianSpec,
    params: &PhysicalParams,
    grid: &PhaseSpaceGrid,
) -> Result<()> {
    params.validate()?;
    let GaussianSpec {
        x0,
        p0,
        sigma_x,
        hermite_order: order,
    } = *spec;
    if !(sigma_x.is_finite() && sigma_x > 0.0) {
        return Err(Error::State(format!("sigma_x must be > 0, got {sigma_x}")));
    }
    if order > 1 {
        return Err(Error::State(format!(
            "hermite order must be 0 or 1, got {order}"
        )));
    }
    let sigma_p = gaussian_sigma_p(spec, params);
    let x_tail = hermite_tail((x0 - grid.x_min) / sigma_x, order)
        + hermite_tail((grid.x_max - x0) / sigma_x, order);
    let p_tail = hermite_tail((p0 - grid.p_min) / sigma_p, order)
        + hermite_tail((grid.p_max - p0) / sigma_p, order);
    if x_tail > FOOTPRINT_TOL || p_tail > FOOTPRINT_TOL {
        return Err(Error::Footprint(format!(
            "mass outside the lattice: {x_tail:e} in x, {p_tail:e} in p (limit {FOOTPRINT_TOL:e})"
        )));
    }
    if sigma_p < grid.dp || sigma_x < grid.dx {
        return Err(Error::Footprint(format!(
            "widths sigma_x = {sigma_x}, sigma_p = {sigma_p} are below the lattice spacing ({}, {})",
            grid.dx, grid.dp
        )));
    }
    Ok(())
}

/// Displaced Gaussian (order 0) or first Hermite-Gaussian (order 1) on phase space.
///
/// The Wigner function of the Hermite-Gaussian is written in closed form at
/// scale `hbar_eff` (`hbar kappa`, or `hbar` at kappa = 0). Transforming the
/// sampled amplitude instead would truncate the offset sum at the lattice
/// edge, leaving ~1e-10 relative noise that shows up as spurious negativity.
pub fn gaussian_state(
    spec: &GaussianSpec,
    params: PhysicalParams,
    grid: &PhaseSpaceGrid,
) -> Result<PhaseSpaceState> {
    check_gaussian(spec, &params, grid)?;
    let GaussianSpec {
        x0,
        p0,
        sigma_x,
        hermite_order: order,
    } = *spec;
    let sigma_p = gaussian_sigma_p(spec, &params);
    let h_eff = if params.kappa > 0.0 {
        params.hbar_kappa()
    } else {
        params.hbar
    };

    let pref = 1.0 / (PI * h_eff);
    let field = Array2::from_shape_fn(grid.shape(), |(j, k)| {
        let u = (grid.x(j) - x0) / sigma_x;
        let v = (grid.p(k) - p0) / sigma_p;
        let r2 = u * u + v * v;
        let poly = if order == 0 { 1.0 } else { r2 - 1.0 };
        Complex64::from(pref * poly * (-0.5 * r2).exp())
    });
    PhaseSpaceState::new(grid.clone(), params, Representation::Wigner, field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid() -> PhaseSpaceGrid {
        PhaseSpaceGrid::new(128, 128, -6.0, 6.0, -6.0, 6.0).unwrap()
    }

    fn fock(order: u8) -> PhaseSpaceState {
        let spec = GaussianSpec {
            x0: 0.0,
            p0: 0.0,
            sigma_x: SQRT_2.recip(),
            hermite_order: order,
        };
        gaussian_state(&spec, PhysicalParams::atomic(), &grid()).unwrap()
    }

    fn center(s: &PhaseSpaceState) -> f64 {
        s.wigner_real()[[64, 64]]
    }

    #[test]
    fn configuration_state_requires_normalization() {
        let g = grid();
        let amps = vec![Complex64::new(1.0, 0.0); g.nx];
        assert!(ConfigurationState::new(&g, PhysicalParams::atomic(), amps).is_err());
    }

    #[test]
    fn wigner_is_real_and_normalized() {
        for order in [0, 1] {
            let w = fock(order);
            assert!(w.imaginary_residue() < 1e-10);
            let np = norm_and_purity(&w);
            assert_relative_eq!(np.integral, 1.0, epsilon = 1e-8);
            assert_relative_eq!(np.purity, 1.0, epsilon = 1e-6);
            assert_relative_eq!(np.norm, np.purity, epsilon = 1e-14);
        }
    }

    #[test]
    fn fock_centres_have_expected_sign() {
        assert_relative_eq!(center(&fock(0)), 1.0 / PI, epsilon = 1e-8);
        assert_relative_eq!(center(&fock(1)), -1.0 / PI, epsilon = 1e-8);
    }

    #[test]
    fn kappa_zero_is_rejected_by_wigner_construction() {
        let g = grid();
        let phi =
            ConfigurationState::hermite_gaussian(&g, PhysicalParams::atomic(), 0.0, 0.0, 0.7, 0)
                .unwrap();
        let mut p = *phi.params();
        p.kappa = 0.0;
        let classical = ConfigurationState { params: p, ..phi };
        assert!(matches!(
            wigner_from_pure(&classical, &g),
            Err(Error::ZeroKappa(_))
        ));
    }

    #[test]
    fn classical_gaussian_matches_quantum_form() {
        let g = PhaseSpaceGrid::new(128, 128, -8.0, 8.0, -8.0, 8.0).unwrap();
        let spec = GaussianSpec {
            x0: 0.1875,
            p0: -0.375,
            sigma_x: 0.7,
            hermite_order: 1,
        };
        let q = gaussian_state(&spec, PhysicalParams::atomic(), &g).unwrap();
        let c =
            gaussian_state(&spec, PhysicalParams::atomic().with_kappa(0.0).unwrap(), &g).unwrap();
        assert_eq!(q.raw(), c.raw());
        let phi = ConfigurationState::hermite_gaussian(
            &g,
            PhysicalParams::atomic(),
            0.1875,
            -0.375,
            0.7,
            1,
        )
        .unwrap();
        let t = wigner_from_pure(&phi, &g).unwrap();
        let diff = (&q.wigner_real() - &t.wigner_real())
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-8, "diff {diff}");
        let np = norm_and_purity(&c);
        assert_relative_eq!(np.norm, 1.0, epsilon = 1e-8);
        assert!(convert(&c, Representation::Unified).is_err());
    }

    #[test]
    fn convert_scaling_and_involution() {
        let g = PhaseSpaceGrid::new(8, 8, -1.0, 1.0, -1.0, 1.0).unwrap();
        let params = PhysicalParams::new(1.0, 1.0, 0.25).unwrap();
        let c = 0.37;
        let s = PhaseSpaceState::new(
            g.clone(),
            params,
            Representation::Wigner,
            Array2::from_elem(g.shape(), Complex64::from(c)),
        )
        .unwrap();
        let u = convert(&s, Representation::Unified).unwrap();
        let factor = (PI / 2.0).sqrt();
        assert_relative_eq!(
            params.wigner_scale().unwrap(),
            1.253_314_137_315_500_3,
            max_relative = 1e-15
        );
        assert!(u.field().iter().all(|v| *v == Complex64::from(c) * factor));
        let back = convert(&u, Representation::Wigner).unwrap();
        assert_eq!(back, s);
        assert_eq!(*back.field(), *s.field());
    }

    #[test]
    fn zero_field_has_zero_norm() {
        let g = grid();
        let s = PhaseSpaceState::new(
            g.clone(),
            PhysicalParams::atomic(),
            Representation::Wigner,
            Array2::zeros(g.shape()),
        )
        .unwrap();
        assert_eq!(norm_and_purity(&s).norm, 0.0);
    }

    #[test]
    fn equal_mixture_has_half_purity() {
        let g = grid();
        let mixed = fock(0).combine(0.5, &fock(1), 0.5).unwrap();
        let purity = norm_and_purity(&mixed).purity;
        // Independent route: Tr rho^2 from configuration-space density matrices.
        let p = PhysicalParams::atomic();
        let r0 = DensityMatrix::from_pure(
            &ConfigurationState::hermite_gaussian(&g, p, 0.0, 0.0, SQRT_2.recip(), 0).unwrap(),
        );
        let r1 = DensityMatrix::from_pure(
            &ConfigurationState::hermite_gaussian(&g, p, 0.0, 0.0, SQRT_2.recip(), 1).unwrap(),
        );
        let rho = DensityMatrix::mixture(&[(0.5, &r0), (0.5, &r1)]).unwrap();
        assert_relative_eq!(rho.trace(), 1.0, epsilon = 1e-10);
        assert!(rho.hermiticity_defect() < 1e-15);
        assert_relative_eq!(rho.purity(), 0.5, epsilon = 1e-10);
        assert_relative_eq!(purity, rho.purity(), epsilon = 1e-8);
    }

    #[test]
    fn ground_state_moments() {
        let w = fock(0);
        let x = expectation(&w, &ObservableSpec::position(Observable1D::Coordinate)).unwrap();
        assert!(x.value.norm() < 1e-12);
        let x2 = expectation(&w, &ObservableSpec::position(Observable1D::Square)).unwrap();
        assert_relative_eq!(x2.real(), 0.5, epsilon = 1e-8);
        let p2obs = ObservableSpec::momentum(Observable1D::Square);
        let p2 = expectation(&w, &p2obs).unwrap();
        assert_relative_eq!(p2.real(), 0.5, epsilon = 1e-8);
        let phi = ConfigurationState::hermite_gaussian(
            &grid(),
            PhysicalParams::atomic(),
            0.0,
            0.0,
            SQRT_2.recip(),
            0,
        )
        .unwrap();
        let oracle = phi.expectation(&p2obs).unwrap();
        assert!((oracle - p2.value).norm() < 1e-6);
    }

    #[test]
    fn marginals_reproduce_position_density() {
        let g = grid();
        let w = fock(0);
        let phi = ConfigurationState::hermite_gaussian(
            &g,
            PhysicalParams::atomic(),
            0.0,
            0.0,
            SQRT_2.recip(),
            0,
        )
        .unwrap();
        let m = marginals(&w);
        for (a, b) in m.position.iter().zip(phi.amplitudes()) {
            assert!((a - b.norm_sqr()).abs() < 1e-8);
        }
        let ix: f64 = m.position.iter().sum::<f64>() * g.dx;
        let ip: f64 = m.momentum.iter().sum::<f64>() * g.dp;
        let total = norm_and_purity(&w).integral;
        assert_relative_eq!(ix, total, epsilon = 1e-12);
        assert_relative_eq!(ip, total, epsilon = 1e-12);
        let mean: f64 = m
            .position
            .iter()
            .zip(g.xs())
            .map(|(d, x)| d * x)
            .sum::<f64>()
            * g.dx;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn gaussian_factory_edge_cases() {
        let g = grid();
        let p = PhysicalParams::atomic();
        // Offsets are truncated at the lattice edge, so the clean tail needs
        // a domain wider than the state by a comfortable margin.
        let wide = PhaseSpaceGrid::new(128, 128, -8.0, 8.0, -8.0, 8.0).unwrap();
        let spec = GaussianSpec {
            x0: 0.3,
            p0: -0.5,
            sigma_x: 0.6,
            hermite_order: 0,
        };
        let ground = gaussian_state(&spec, p, &wide).unwrap();
        assert!(ground.wigner_real().iter().all(|v| *v >= -1e-10));
        assert_relative_eq!(norm_and_purity(&ground).purity, 1.0, epsilon = 1e-6);
        let off = GaussianSpec {
            x0: 5.5,
            p0: 0.0,
            sigma_x: 0.7,
            hermite_order: 0,
        };
        assert!(matches!(
            gaussian_state(&off, p, &g),
            Err(Error::Footprint(_))
        ));
        let bad = GaussianSpec {
            x0: 0.0,
            p0: 0.0,
            sigma_x: 0.7,
            hermite_order: 2,
        };
        assert!(gaussian_state(&bad, p, &g).is_err());
    }

    #[test]
    fn shifted_fock_minimum_depends_on_hbar_kappa() {
        let g = PhaseSpaceGrid::new(128, 128, -6.0, 6.0, -4.0, 4.0).unwrap();
        let params = PhysicalParams::new(1.0, 1.0, 0.5).unwrap();
        let spec = GaussianSpec {
            x0: 0.75,
            p0: 0.5,
            sigma_x: 0.6,
            hermite_order: 1,
        };
        let w = gaussian_state(&spec, params, &g).unwrap();
        // x0 and p0 sit on lattice sites: x index 72, p index 72.
        assert_relative_eq!(w.wigner_real()[[72, 72]], -1.0 / (PI * 0.5), epsilon = 1e-8);
    }

    #[test]
    fn expectation_rejects_densities() {
        let g = grid();
        let s = PhaseSpaceState::density(
            g.clone(),
            PhysicalParams::atomic(),
            &Array2::zeros(g.shape()),
        )
        .unwrap();
        assert!(expectation(&s, &ObservableSpec::position(Observable1D::Coordinate)).is_err());
    }
}
