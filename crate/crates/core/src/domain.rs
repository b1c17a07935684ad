//! Grids, physical parameters, potentials and the kappa-dependent potential kernel.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Below this kappa the potential kernel switches to its analytic classical limit.
pub const SMALL_KAPPA: f64 = 1e-6;

/// Planck constant, particle mass and quantumness parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    pub hbar: f64,
    pub mass: f64,
    pub kappa: f64,
}

impl PhysicalParams {
    pub fn new(hbar: f64, mass: f64, kappa: f64) -> Result<Self> {
        let p = Self { hbar, mass, kappa };
        p.validate()?;
        Ok(p)
    }

    /// Atomic units with full quantumness.
    pub fn atomic() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            kappa: 1.0,
        }
    }

    pub fn with_kappa(self, kappa: f64) -> Result<Self> {
        Self::new(self.hbar, self.mass, kappa)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hbar.is_finite() && self.hbar > 0.0) {
            return Err(Error::Params(format!(
                "hbar must be > 0, got {}",
                self.hbar
            )));
        }
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::Params(format!(
                "mass must be > 0, got {}",
                self.mass
            )));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::Params(format!(
                "kappa must lie in [0,1], got {}",
                self.kappa
            )));
        }
        Ok(())
    }

    /// Effective Planck constant hbar * kappa.
    pub fn hbar_kappa(&self) -> f64 {
        self.hbar * self.kappa
    }

    /// `sqrt(2 pi hbar kappa)`, the factor between the unified amplitude and W.
    /// `None` at kappa = 0 where the Wigner connection does not exist.
    pub fn wigner_scale(&self) -> Option<f64> {
        (self.kappa > 0.0).then(|| (2.0 * PI * self.hbar_kappa()).sqrt())
    }

    /// Normalization scale `2 pi hbar kappa` used for norm and purity.
    ///
    /// Classical (kappa = 0) amplitudes are built with the hbar-scale functional
    /// form, so they are normalized on `2 pi hbar`.
    pub fn norm_scale(&self) -> f64 {
        if self.kappa > 0.0 {
            2.0 * PI * self.hbar_kappa()
        } else {
            2.0 * PI * self.hbar
        }
    }
}

/// Discrete Fourier angular frequencies for `n` samples spaced by `d`, in the
/// standard FFT output order (non-negative half first, Nyquist as negative).
pub fn fft_frequencies(n: usize, d: f64) -> Vec<f64> {
    let scale = 2.0 * PI / (n as f64 * d);
    (0..n)
        .map(|k| {
            let signed = if k < n.div_ceil(2) {
                k as f64
            } else {
                k as f64 - n as f64
            };
            signed * scale
        })
        .collect()
}

/// Frequencies used by the lattice operators: [`fft_frequencies`] with the
/// unpaired Nyquist entry of an even-length axis set to zero. Multipliers
/// that are odd in the frequency (the kinetic term, the potential kernel)
/// then map real fields to real fields exactly.
pub fn lattice_frequencies(n: usize, d: f64) -> Vec<f64> {
    let mut freqs = fft_frequencies(n, d);
    if n.is_multiple_of(2) {
        freqs[n / 2] = 0.0;
    }
    freqs
}

/// Uniform periodic (x, p) lattice with its conjugate frequency lattices.
///
/// Site `(j, k)` sits at `x = x_min + j dx`, `p = p_min + k dp`; the upper
/// bounds are excluded (periodic images of the lower ones).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub nx: usize,
    pub np: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub dx: f64,
    pub dp: f64,
    pub lambda_x: Vec<f64>,
    pub lambda_p: Vec<f64>,
}

impl PhaseSpaceGrid {
    pub fn new(
        nx: usize,
        np: usize,
        x_min: f64,
        x_max: f64,
        p_min: f64,
        p_max: f64,
    ) -> Result<Self> {
        for (name, n) in [("nx", nx), ("np", np)] {
            if n < 8 {
                return Err(Error::Grid(format!("{name} must be at least 8, got {n}")));
            }
            if n % 2 != 0 {
                return Err(Error::Grid(format!("{name} must be even, got {n}")));
            }
        }
        for (axis, lo, hi) in [("x", x_min, x_max), ("p", p_min, p_max)] {
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::Grid(format!("{axis} extent must be finite")));
            }
            if hi <= lo {
                return Err(Error::Grid(format!(
                    "{axis}_max ({hi}) must exceed {axis}_min ({lo})"
                )));
            }
        }
        let dx = (x_max - x_min) / nx as f64;
        let dp = (p_max - p_min) / np as f64;
        Ok(Self {
            nx,
            np,
            x_min,
            x_max,
            p_min,
            p_max,
            dx,
            dp,
            lambda_x: lattice_frequencies(nx, dx),
            lambda_p: lattice_frequencies(np, dp),
        })
    }

    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx
    }

    #[inline]
    pub fn p(&self, k: usize) -> f64 {
        self.p_min + k as f64 * self.dp
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.x(j)).collect()
    }

    pub fn ps(&self) -> Vec<f64> {
        (0..self.np).map(|k| self.p(k)).collect()
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dp
    }

    pub fn sites(&self) -> usize {
        self.nx * self.np
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.np)
    }
}

/// Built-in potential families with closed-form value and derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Free,
    /// `m w^2 x^2 / 2`
    Harmonic {
        mass: f64,
        omega: f64,
    },
    /// `D (1 - exp(-a x))^2`
    Morse {
        depth: f64,
        width: f64,
    },
    /// `sum_n c[n] x^n`
    Polynomial {
        coefficients: Vec<f64>,
    },
}

impl Potential {
    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Potential(format!("{what} must be finite")))
            }
        };
        match self {
            Potential::Free => Ok(()),
            Potential::Harmonic { mass, omega } => {
                finite(*mass, "harmonic mass")?;
                finite(*omega, "harmonic omega")?;
                if *mass <= 0.0 {
                    return Err(Error::Potential("harmonic mass must be > 0".into()));
                }
                Ok(())
            }
            Potential::Morse { depth, width } => {
                finite(*depth, "morse depth")?;
                finite(*width, "morse width")
            }
            Potential::Polynomial { coefficients } => {
                if coefficients.is_empty() {
                    return Err(Error::Potential(
                        "polynomial needs at least one coefficient".into(),
                    ));
                }
                coefficients
                    .iter()
                    .try_for_each(|c| finite(*c, "polynomial coefficient"))
            }
        }
    }

    pub fn is_quadratic(&self) -> bool {
        match self {
            Potential::Free | Potential::Harmonic { .. } => true,
            Potential::Morse { .. } => false,
            Potential::Polynomial { coefficients } => {
                coefficients.iter().skip(3).all(|c| *c == 0.0)
            }
        }
    }

    /// `U(x)` and `U'(x)`.
    pub fn evaluate(&self, x: f64) -> Result<(f64, f64)> {
        let (u, du) = self.evaluate_unchecked(x);
        if u.is_finite() && du.is_finite() {
            Ok((u, du))
        } else {
            Err(Error::Potential(format!(
                "non-finite value at x = {x}: U = {u}, U' = {du}"
            )))
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.evaluate_unchecked(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.evaluate_unchecked(x).1
    }

    fn evaluate_unchecked(&self, x: f64) -> (f64, f64) {
        match self {
            Potential::Free => (0.0, 0.0),
            Potential::Harmonic { mass, omega } => {
                let k = mass * omega * omega;
                (0.5 * k * x * x, k * x)
            }
            Potential::Morse { depth, width } => {
                let e = (-width * x).exp();
                let one_minus = 1.0 - e;
                (
                    depth * one_minus * one_minus,
                    2.0 * depth * width * e * one_minus,
                )
            }
            Potential::Polynomial { coefficients } => {
                // Horner for both value and derivative.
                let mut u = 0.0;
                let mut du = 0.0;
                for &c in coefficients.iter().rev() {
                    du = du * x + u;
                    u = u * x + c;
                }
                (u, du)
            }
        }
    }

    /// `(1/kappa) [U(x - kappa s) - U(x + kappa s)]` with `s = hbar lambda_p / 2`.
    ///
    /// Each family uses the closed form of its odd part, so no cancellation
    /// occurs as kappa shrinks. Below [`SMALL_KAPPA`] the classical limit
    /// `-2 s U'(x)` is used.
    pub fn shift_difference(&self, x: f64, half_shift: f64, kappa: f64) -> f64 {
        let classical = kappa < SMALL_KAPPA;
        match self {
            Potential::Free => 0.0,
            Potential::Harmonic { mass, omega } => -2.0 * half_shift * mass * omega * omega * x,
            Potential::Morse { depth, width } => {
                if classical {
                    -2.0 * half_shift * self.derivative(x)
                } else {
                    let e = (-width * x).exp();
                    let arg = width * kappa * half_shift;
                    depth / kappa * (2.0 * e * e * (2.0 * arg).sinh() - 4.0 * e * arg.sinh())
                }
            }
            Potential::Polynomial { coefficients } => {
                // U(x-t) - U(x+t) = -2 sum_n c_n sum_{j odd} C(n,j) x^{n-j} t^j, t = kappa s.
                let mut total = 0.0;
                for (n, &c) in coefficients.iter().enumerate() {
                    if c == 0.0 || n == 0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    let mut j = 1;
                    while j <= n {
                        if classical && j > 1 {
                            break;
                        }
                        let kappa_pow = if j == 1 {
                            1.0
                        } else {
                            kappa.powi(j as i32 - 1)
                        };
                        inner += binomial(n, j)
                            * x.powi((n - j) as i32)
                            * half_shift.powi(j as i32)
                            * kappa_pow;
                        j += 2;
                    }
                    total += c * inner;
                }
                -2.0 * total
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Tabulate `K(x_j, lambda_p_k) = (1/kappa)[U(x - hbar kappa lambda_p/2) - U(x + hbar kappa lambda_p/2)]`
/// on the mixed (x, lambda_p) lattice.
pub fn kappa_potential_kernel(
    grid: &PhaseSpaceGrid,
    pot: &Potential,
    params: &PhysicalParams,
) -> Result<Array2<f64>> {
    params.validate()?;
    pot.validate()?;
    let mut kernel = Array2::<f64>::zeros(grid.shape());
    for ((ix, ik), value) in kernel.indexed_iter_mut() {
        let x = grid.x(ix);
        let lp = grid.lambda_p[ik];
        let k = pot.shift_difference(x, 0.5 * params.hbar * lp, params.kappa);
        if !k.is_finite() {
            return Err(Error::NonFiniteKernel {
                ix,
                ik,
                x,
                lambda_p: lp,
            });
        }
        *value = k;
    }
    Ok(kernel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn frequencies_for_four_unit_samples() {
        let f = fft_frequencies(4, 1.0);
        assert_eq!(f, vec![0.0, PI / 2.0, -PI, -PI / 2.0]);
    }

    #[test]
    fn grid_spacing() {
        let g = PhaseSpaceGrid::new(256, 256, -6.0, 6.0, -6.0, 6.0).unwrap();
        assert_eq!(g.dx, 0.046875);
        assert_eq!(g.dp, 0.046875);
        assert_eq!(g.lambda_x.len(), 256);
        assert_relative_eq!(g.lambda_x[1], 2.0 * PI / 12.0, max_relative = 1e-15);
        assert_relative_eq!(
            g.lambda_x[129],
            -127.0 * PI / (128.0 * g.dx),
            max_relative = 1e-15
        );
        // The unpaired Nyquist mode carries no frequency on the lattice.
        assert_eq!(g.lambda_x[128], 0.0);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(PhaseSpaceGrid::new(7, 8, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(PhaseSpaceGrid::new(9, 8, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(PhaseSpaceGrid::new(4, 8, 0.0, 1.0, 0.0, 1.0).is_err());
        assert!(PhaseSpaceGrid::new(8, 8, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(PhaseSpaceGrid::new(8, 8, 0.0, 1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(PhysicalParams::new(1.0, 1.0, 1.5).is_err());
        assert!(PhysicalParams::new(0.0, 1.0, 0.5).is_err());
        assert!(PhysicalParams::new(1.0, -1.0, 0.5).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, 0.0).is_ok());
        let p = PhysicalParams::new(1.0, 1.0, 0.25).unwrap();
        assert_relative_eq!(
            p.wigner_scale().unwrap(),
            (PI / 2.0).sqrt(),
            max_relative = 1e-15
        );
        assert!(PhysicalParams::new(1.0, 1.0, 0.0)
            .unwrap()
            .wigner_scale()
            .is_none());
    }

    #[test]
    fn morse_values() {
        let m = Potential::Morse {
            depth: 20.0,
            width: 0.16,
        };
        assert_eq!(m.evaluate(0.0).unwrap(), (0.0, 0.0));
        let (u, _) = m.evaluate(500.0).unwrap();
        assert_relative_eq!(u, 20.0, max_relative = 1e-12);
    }

    #[test]
    fn harmonic_values() {
        let h = Potential::Harmonic {
            mass: 1.0,
            omega: 1.0,
        };
        assert_eq!(h.evaluate(2.0).unwrap(), (2.0, 2.0));
    }

    #[test]
    fn polynomial_overflow_reported() {
        let p = Potential::Polynomial {
            coefficients: vec![0.0, 0.0, 0.0, 0.0, 1e300],
        };
        assert!(p.evaluate(1e10).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let pots = [
            Potential::Harmonic {
                mass: 2.0,
                omega: 0.7,
            },
            Potential::Morse {
                depth: 20.0,
                width: 0.16,
            },
            Potential::Polynomial {
                coefficients: vec![1.0, -0.5, 0.25, 0.1, -0.02],
            },
        ];
        let h = 1e-5;
        for pot in &pots {
            for &x in &[-2.0, -0.3, 0.0, 1.1, 3.7] {
                let fd = (pot.value(x + h) - pot.value(x - h)) / (2.0 * h);
                assert_relative_eq!(pot.derivative(x), fd, epsilon = 1e-8, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn shift_difference_matches_direct_difference() {
        let pots = [
            Potential::Morse {
                depth: 20.0,
                width: 0.16,
            },
            Potential::Polynomial {
                coefficients: vec![0.3, 1.0, -0.5, 0.25, 0.05],
            },
        ];
        for pot in &pots {
            for &kappa in &[1.0, 0.5, 0.1] {
                for &x in &[-2.5, 0.0, 1.3, 4.0] {
                    for &s in &[-3.0, -0.2, 0.01, 1.7] {
                        let t = kappa * s;
                        let direct = (pot.value(x - t) - pot.value(x + t)) / kappa;
                        let closed = pot.shift_difference(x, s, kappa);
                        assert_relative_eq!(closed, direct, epsilon = 1e-10, max_relative = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn quadratic_kernel_is_kappa_independent_and_classical() {
        let g = PhaseSpaceGrid::new(16, 16, -4.0, 4.0, -5.0, 5.0).unwrap();
        let quad = [
            Potential::Harmonic {
                mass: 1.0,
                omega: 1.3,
            },
            Potential::Polynomial {
                coefficients: vec![0.5, -0.2, 0.8],
            },
        ];
        for pot in &quad {
            let k1 = kappa_potential_kernel(&g, pot, &PhysicalParams::atomic()).unwrap();
            for kappa in [0.0, 1e-9, 0.3] {
                let p = PhysicalParams::atomic().with_kappa(kappa).unwrap();
                let kk = kappa_potential_kernel(&g, pot, &p).unwrap();
                assert_eq!(k1, kk);
            }
            for ((ix, ik), v) in k1.indexed_iter() {
                let expect = -g.lambda_p[ik] * pot.derivative(g.x(ix));
                assert_relative_eq!(*v, expect, epsilon = 1e-13, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn free_kernel_vanishes() {
        let g = PhaseSpaceGrid::new(8, 8, -1.0, 1.0, -1.0, 1.0).unwrap();
        let k = kappa_potential_kernel(&g, &Potential::Free, &PhysicalParams::atomic()).unwrap();
        assert!(k.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn morse_kernel_small_kappa_agrees_to_first_order() {
        // (1/k)[U(x-ks) - U(x+ks)] = -2 s U' - (k^2 s^3 / 3) U''' + O(k^4 s^5)
        let (d, a) = (20.0, 0.16);
        let pot = Potential::Morse { depth: d, width: a };
        let third = |x: f64| {
            let e = (-a * x).exp();
            2.0 * d * a * a * a * (e - 4.0 * e * e)
        };
        for &x in &[-1.0, 0.0, 2.5] {
            for &s in &[1e-3, 1e-2, 5e-2] {
                let quantum = pot.shift_difference(x, s, 1.0);
                let limit = pot.shift_difference(x, s, 1e-9);
                assert_relative_eq!(limit, -2.0 * s * pot.derivative(x), max_relative = 1e-14);
                let taylor = -(s * s * s / 3.0) * third(x);
                assert_relative_eq!(
                    quantum - limit,
                    taylor,
                    epsilon = 1e-13,
                    max_relative = 1e-3
                );
            }
        }
    }

    #[test]
    fn nonfinite_kernel_reports_site() {
        let g = PhaseSpaceGrid::new(8, 8, -2000.0, 2000.0, -1.0, 1.0).unwrap();
        let pot = Potential::Morse {
            depth: 20.0,
            width: 1.0,
        };
        match kappa_potential_kernel(&g, &pot, &PhysicalParams::atomic()) {
            Err(Error::NonFiniteKernel { ix, .. }) => assert_eq!(ix, 0),
            other => panic!("expected non-finite kernel error, got {other:?}"),
        }
    }
}
