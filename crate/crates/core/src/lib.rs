//! Numerical laboratory for fitness-driven reaction-drift-diffusion flows,
//! viewed as gradient flows in the Hellinger-Kantorovich geometry.
//!
//! The crate is organised bottom-up:
//!
//! - [`profiles`]: reaction profiles `g` and entropy densities `psi`.
//! - [`mesh`]: grids, densities, quadrature and level-set geometry.
//! - [`entropy`]: relative entropy and its Wasserstein/Hellinger production.
//! - [`flow`]: explicit time integration of the full, Wasserstein-only and
//!   Hellinger-only flows.
//! - [`harness`]: functional-inequality reports, counterexample families,
//!   rate and decay fits, and empirical entropy-production constants.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod flow;
pub mod harness;
pub mod io;
pub mod mesh;
pub mod profiles;

pub use entropy::{production, production_band, relative_entropy, EntropyReport, RatioField};
pub use error::{Error, Result};
pub use flow::{rhs, simulate, stable_dt, FlowConfig, FlowMode, Integrator, SeriesTable, Trajectory};
pub use harness::{
    algterm_scan, counterexample_sequence, decay_fit, eep_sweep, inequality_report, rate_fit_loglog, AlgtermScan,
    CounterexampleKind, DecayFit, InequalityCase, InequalityName, InequalityParams, InequalityReport, SequenceColumn,
    SequenceRow, SweepReport,
};
pub use mesh::{
    build_density, build_grid, coarea_sides, gradient_sq, integrate, level_measures, lp_distance, DensityBuilder,
    DensityKind, DomainKind, Field, Grid,
};
pub use profiles::{eval_g, eval_psi, make_g, make_psi, validate_pair, GFamily, GSpec, PsiFamily, PsiSpec};
