//! Phase-space dynamics for Wigner, interpolated and Koopman-von Neumann states.
//!
//! The crate propagates fields over a uniform `(x, p)` lattice with
//! Strang-split spectral steps, measures Wigner negativity along the way,
//! and classifies whether an evolution conserved its negativity.

pub mod analysis;
pub mod domain;
pub mod error;
pub mod oracle;
pub mod propagate;
pub mod scenario;
pub mod spectral;
pub mod states;

pub use analysis::{
    classify, classify_with, ehrenfest_residuals, negativity, EvolutionVerdict, NegativityMetrics,
    Verdict,
};
pub use domain::{kappa_potential_kernel, PhaseSpaceGrid, PhysicalParams, Potential};
pub use error::{Error, ErrorKind, Result};
pub use propagate::{propagate, Engine, PropagatorConfig, SplitStepper, TrajectoryRecord};
pub use states::{
    check_gaussian, convert, expectation, gaussian_state, marginals, norm_and_purity,
    wigner_from_pure, ConfigurationState, DensityMatrix, GaussianSpec, Observable1D,
    ObservableSpec, PhaseSpaceState, Representation,
};
