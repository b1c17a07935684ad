//! Strang-split spectral propagation for the unified (kappa), Koopman-von
//! Neumann and Liouville equations, plus trajectory recording.
//!
//! One step is `V/2 T V/2`: a half potential phase `exp(-i K dt / 2 hbar)` in
//! the `(x, lambda_p)` representation, a full kinetic phase
//! `exp(-i p lambda_x dt / m)` in `(lambda_x, p)`, and the second half phase.
//! Consecutive half phases between unrecorded steps are fused.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

use crate::analysis::{self, NegativityMetrics};
use crate::domain::{kappa_potential_kernel, PhaseSpaceGrid, PhysicalParams, Potential};
use crate::error::{Error, Result};
use crate::spectral::{LatticeAxis, Transforms};
use crate::states::{norm_and_purity, PhaseSpaceState, Representation};

/// Relative boundary mass above which a contamination warning is issued.
pub const BOUNDARY_WARN: f64 = 1e-10;
/// Relative negativity tolerated in a Liouville density before it is rejected.
pub const DENSITY_NEGATIVITY_TOL: f64 = 1e-12;

/// Which evolution equation drives the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Interpolating kappa equation; kappa = 1 is the Wigner (Moyal) equation.
    Unified,
    /// Koopman-von Neumann transport of a complex amplitude.
    Kvn,
    /// Classical Liouville transport of a real density.
    Liouville,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Unified => "unified",
            Engine::Kvn => "kvn",
            Engine::Liouville => "liouville",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unified" => Some(Engine::Unified),
            "kvn" => Some(Engine::Kvn),
            "liouville" => Some(Engine::Liouville),
            _ => None,
        }
    }

    /// Quantumness used by the dynamics and by recorded observables.
    pub fn effective_kappa(self, params: &PhysicalParams) -> f64 {
        match self {
            Engine::Unified => params.kappa,
            Engine::Kvn | Engine::Liouville => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    Strang,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
    /// Keep a copy of the state every this many steps (plus the first and last).
    pub snapshot_every: Option<usize>,
    pub scheme: Scheme,
    pub engine: Engine,
}

impl PropagatorConfig {
    pub fn new(engine: Engine, dt: f64, n_steps: usize, record_every: usize) -> Self {
        Self {
            dt,
            n_steps,
            record_every,
            snapshot_every: None,
            scheme: Scheme::Strang,
            engine,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::Propagator(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Propagator("record_every must be positive".into()));
        }
        if !self.n_steps.is_multiple_of(self.record_every) {
            return Err(Error::Propagator(format!(
                "record_every ({}) must divide n_steps ({})",
                self.record_every, self.n_steps
            )));
        }
        if let Some(s) = self.snapshot_every {
            if s == 0 || s % self.record_every != 0 {
                return Err(Error::Propagator(format!(
                    "snapshot_every ({s}) must be a positive multiple of record_every ({})",
                    self.record_every
                )));
            }
        }
        Ok(())
    }
}

/// Precomputed phase tables for one engine, grid and time step.
#[derive(Debug, Clone)]
pub struct SplitStepper {
    engine: Engine,
    transforms: Transforms,
    /// `exp(-i K dt / 2 hbar)` on `(x, lambda_p)`.
    potential_half: Array2<Complex64>,
    /// `exp(-i K dt / hbar)` on `(x, lambda_p)`.
    potential_full: Array2<Complex64>,
    /// `exp(-i p lambda_x dt / m)` on `(lambda_x, p)`.
    kinetic: Array2<Complex64>,
    dt: f64,
}

impl SplitStepper {
    pub fn new(
        grid: &PhaseSpaceGrid,
        pot: &Potential,
        params: &PhysicalParams,
        engine: Engine,
        dt: f64,
    ) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Propagator(format!("dt must be > 0, got {dt}")));
        }
        let dyn_params = PhysicalParams {
            kappa: engine.effective_kappa(params),
            ..*params
        };
        let kernel = kappa_potential_kernel(grid, pot, &dyn_params)?;
        let hbar = params.hbar;
        let potential_half = kernel.mapv(|k| Complex64::from_polar(1.0, -k * dt / (2.0 * hbar)));
        let potential_full = kernel.mapv(|k| Complex64::from_polar(1.0, -k * dt / hbar));
        let kinetic = Array2::from_shape_fn(grid.shape(), |(ix, ip)| {
            Complex64::from_polar(1.0, -grid.p(ip) * grid.lambda_x[ix] * dt / params.mass)
        });
        Ok(Self {
            engine,
            transforms: Transforms::new(grid),
            potential_half,
            potential_full,
            kinetic,
            dt,
        })
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn potential(&self, field: &mut Array2<Complex64>, phases: &Array2<Complex64>) {
        self.transforms.forward(field, LatticeAxis::P);
        Zip::from(&mut *field)
            .and(phases)
            .for_each(|v, ph| *v *= ph);
        self.transforms.inverse(field, LatticeAxis::P);
    }

    fn kinetic(&self, field: &mut Array2<Complex64>) {
        self.transforms.forward(field, LatticeAxis::X);
        Zip::from(&mut *field)
            .and(&self.kinetic)
            .for_each(|v, ph| *v *= ph);
        self.transforms.inverse(field, LatticeAxis::X);
    }

    /// Applies `n` Strang steps, fusing the inner half potential phases.
    pub fn advance(&self, field: &mut Array2<Complex64>, n: usize) {
        if n == 0 {
            return;
        }
        self.potential(field, &self.potential_half);
        for i in 0..n {
            self.kinetic(field);
            if i + 1 < n {
                self.potential(field, &self.potential_full);
            }
        }
        self.potential(field, &self.potential_half);
        if self.engine == Engine::Liouville {
            field.mapv_inplace(|v| Complex64::from(v.re));
        }
    }

    pub fn step(&self, field: &mut Array2<Complex64>) {
        self.advance(field, 1);
    }
}

fn ensure_finite(field: &Array2<Complex64>, step: usize) -> Result<()> {
    if field.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteField { step })
    }
}

fn single_step(
    state: &PhaseSpaceState,
    pot: &Potential,
    dt: f64,
    engine: Engine,
) -> Result<PhaseSpaceState> {
    let stepper = SplitStepper::new(state.grid(), pot, state.params(), engine, dt)?;
    let mut out = state.clone();
    stepper.step(out.raw_mut());
    ensure_finite(out.raw(), 1)?;
    Ok(out)
}

/// One step of the unified kappa equation.
pub fn step_unified(state: &PhaseSpaceState, pot: &Potential, dt: f64) -> Result<PhaseSpaceState> {
    if state.representation() == Representation::Density {
        return Err(Error::State("the unified engine needs an amplitude".into()));
    }
    single_step(state, pot, dt, Engine::Unified)
}

/// One step of the Koopman-von Neumann transport equation.
pub fn step_kvn(state: &PhaseSpaceState, pot: &Potential, dt: f64) -> Result<PhaseSpaceState> {
    if state.representation() == Representation::Density {
        return Err(Error::State("the KvN engine needs an amplitude".into()));
    }
    single_step(state, pot, dt, Engine::Kvn)
}

/// One step of the classical Liouville equation for a real density.
pub fn step_liouville(
    density: &PhaseSpaceState,
    pot: &Potential,
    dt: f64,
) -> Result<PhaseSpaceState> {
    check_density(density)?;
    single_step(density, pot, dt, Engine::Liouville)
}

fn check_density(state: &PhaseSpaceState) -> Result<()> {
    if state.representation() != Representation::Density {
        return Err(Error::State("the Liouville engine needs a density".into()));
    }
    let field = state.raw();
    let max = field.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let imag = field.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let min = field.iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
    if imag > 0.0 {
        return Err(Error::State("density must be real".into()));
    }
    if min < -DENSITY_NEGATIVITY_TOL * max {
        return Err(Error::State(format!("density has negative value {min:e}")));
    }
    Ok(())
}

/// `|Psi|^2` on the unified scale as a Liouville density.
pub fn density_of(state: &PhaseSpaceState) -> Result<PhaseSpaceState> {
    if state.representation() == Representation::Density {
        return Ok(state.clone());
    }
    let u = state.unified_factor();
    let rho = state.raw().mapv(|v| (v * u).norm_sqr());
    PhaseSpaceState::density(state.grid().clone(), *state.params(), &rho)
}

/// Observables recorded at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub norm: f64,
    pub purity: f64,
    pub integral: f64,
    pub negativity: NegativityMetrics,
    pub x_mean: f64,
    pub p_mean: f64,
    pub x2_mean: f64,
    pub p2_mean: f64,
    pub energy: f64,
    /// `<U'(x_q)>`; the classical engines average over the transported field.
    pub force_mean: f64,
    /// Fraction of the norm within the outer boundary band of the lattice.
    pub boundary_mass: f64,
}

/// Time series of a propagation run.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub engine: Engine,
    pub params: PhysicalParams,
    pub samples: Vec<Sample>,
    /// `(step, t, state)` copies taken at snapshot times.
    pub snapshots: Vec<(usize, f64, PhaseSpaceState)>,
    pub warnings: Vec<String>,
}

impl TrajectoryRecord {
    pub fn times(&self) -> Vec<f64> {
        self.series(|s| s.t)
    }

    pub fn series(&self, f: impl Fn(&Sample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

/// Evaluates the recorded observables of a field.
#[derive(Debug, Clone)]
pub struct Recorder {
    engine: Engine,
    potential: Potential,
    transforms: Transforms,
}

impl Recorder {
    pub fn new(grid: &PhaseSpaceGrid, pot: &Potential, engine: Engine) -> Self {
        Self {
            engine,
            potential: pot.clone(),
            transforms: Transforms::new(grid),
        }
    }

    pub fn sample(&self, state: &PhaseSpaceState, t: f64) -> Result<Sample> {
        let grid = state.grid();
        let params = state.params();
        let np = norm_and_purity(state);
        let negativity = match self.engine {
            Engine::Unified => analysis::negativity(state)?,
            Engine::Kvn | Engine::Liouville => analysis::negativity_of_real_part(state),
        };
        let area = grid.cell_area();
        let mass = self.boundary_mass(state);
        let pot = &self.potential;

        let (x_mean, x2_mean, u_mean, force_mean, p_mean, p2_mean);
        if self.engine != Engine::Unified {
            // Classical engines: phase-space averages of the transported real
            // field (the Wigner function for KvN, the density for Liouville).
            let field = state.wigner_real();
            let mut acc = [0.0f64; 6];
            for ((ix, ip), &w) in field.indexed_iter() {
                let (x, p) = (grid.x(ix), grid.p(ip));
                let (u, du) = (pot.value(x), pot.derivative(x));
                acc[0] += w * x;
                acc[1] += w * x * x;
                acc[2] += w * u;
                acc[3] += w * du;
                acc[4] += w * p;
                acc[5] += w * p * p;
            }
            let a = acc.map(|v| v * area);
            (x_mean, x2_mean, u_mean, force_mean, p_mean, p2_mean) =
                (a[0], a[1], a[2], a[3], a[4], a[5]);
        } else {
            // Parseval: diagonal observables are weighted sums of |Psi|^2 in
            // the representation where they act diagonally.
            let hk = params.hbar * self.engine.effective_kappa(params);
            let u = state.unified_factor();
            let mut work = state.raw().mapv(|v| v * u);
            self.transforms.forward(&mut work, LatticeAxis::P);
            let mut acc = [0.0f64; 4];
            for ((ix, ik), v) in work.indexed_iter() {
                let xq = grid.x(ix) - 0.5 * hk * grid.lambda_p[ik];
                let w = v.norm_sqr();
                acc[0] += w * xq;
                acc[1] += w * xq * xq;
                acc[2] += w * pot.value(xq);
                acc[3] += w * pot.derivative(xq);
            }
            let s = area / grid.np as f64;
            let a = acc.map(|v| v * s);
            (x_mean, x2_mean, u_mean, force_mean) = (a[0], a[1], a[2], a[3]);

            let mut work = state.raw().mapv(|v| v * u);
            self.transforms.forward(&mut work, LatticeAxis::X);
            let mut acc = [0.0f64; 2];
            for ((ik, ip), v) in work.indexed_iter() {
                let pq = grid.p(ip) + 0.5 * hk * grid.lambda_x[ik];
                let w = v.norm_sqr();
                acc[0] += w * pq;
                acc[1] += w * pq * pq;
            }
            let s = area / grid.nx as f64;
            (p_mean, p2_mean) = (acc[0] * s, acc[1] * s);
        }
        Ok(Sample {
            t,
            norm: np.norm,
            purity: np.purity,
            integral: np.integral,
            negativity,
            x_mean,
            p_mean,
            x2_mean,
            p2_mean,
            energy: p2_mean / (2.0 * params.mass) + u_mean,
            force_mean,
            boundary_mass: mass,
        })
    }

    fn boundary_mass(&self, state: &PhaseSpaceState) -> f64 {
        let grid = state.grid();
        let bx = (grid.nx / 32).max(1);
        let bp = (grid.np / 32).max(1);
        let weight = |v: &Complex64| match self.engine {
            Engine::Liouville => v.re.abs(),
            _ => v.norm_sqr(),
        };
        let mut edge = 0.0;
        let mut total = 0.0;
        for ((ix, ip), v) in state.raw().indexed_iter() {
            let w = weight(v);
            total += w;
            if ix < bx || ix >= grid.nx - bx || ip < bp || ip >= grid.np - bp {
                edge += w;
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }
}

/// Runs `config.n_steps` steps of the configured engine, recording every
/// `config.record_every` steps including t = 0.
pub fn propagate(
    state: &PhaseSpaceState,
    pot: &Potential,
    config: &PropagatorConfig,
) -> Result<(PhaseSpaceState, TrajectoryRecord)> {
    config.validate()?;
    let mut current = match config.engine {
        Engine::Liouville => {
            let rho = density_of(state)?;
            check_density(&rho)?;
            rho
        }
        _ => {
            if state.representation() == Representation::Density {
                return Err(Error::State(format!(
                    "the {} engine needs an amplitude, got a density",
                    config.engine.name()
                )));
            }
            state.clone()
        }
    };
    let grid = current.grid().clone();
    let stepper = SplitStepper::new(&grid, pot, current.params(), config.engine, config.dt)?;
    let recorder = Recorder::new(&grid, pot, config.engine);
    let mut record = TrajectoryRecord {
        engine: config.engine,
        params: *current.params(),
        samples: Vec::with_capacity(config.n_steps / config.record_every + 1),
        snapshots: Vec::new(),
        warnings: Vec::new(),
    };

    let mut boundary_warned = false;
    let mut observe = |record: &mut TrajectoryRecord,
                       state: &PhaseSpaceState,
                       step: usize|
     -> Result<()> {
        let t = step as f64 * config.dt;
        let sample = recorder.sample(state, t).map_err(|e| Error::AtStep {
            step,
            source: Box::new(e),
        })?;
        if sample.boundary_mass > BOUNDARY_WARN && !boundary_warned {
            boundary_warned = true;
            let msg = format!(
                "boundary contamination at step {step} (t = {t}): {:e} of the mass lies in the edge band",
                sample.boundary_mass
            );
            log::warn!("{msg}");
            record.warnings.push(msg);
        }
        record.samples.push(sample);
        let snap = match config.snapshot_every {
            Some(every) => step.is_multiple_of(every) || step == config.n_steps,
            None => step == 0 || step == config.n_steps,
        };
        if snap {
            record.snapshots.push((step, t, state.clone()));
        }
        Ok(())
    };

    observe(&mut record, &current, 0)?;
    let mut step = 0;
    while step < config.n_steps {
        stepper.advance(current.raw_mut(), config.record_every);
        step += config.record_every;
        ensure_finite(current.raw(), step)?;
        observe(&mut record, &current, step)?;
    }
    Ok((current, record))
}
