//! Numerical evolution of the perturbed wave system on a uniform grid.

pub mod background;
pub mod manufactured;
pub mod solver;
pub mod source;

pub use background::{Background, BackgroundFamily, Bump};
pub use manufactured::{ManufacturedConfig, ManufacturedSource, Target};
pub use solver::{Boundary, ExactSolution, Forcing, NoForcing, RunState, Solver, CFL_LIMIT};
pub use source::{build_source, SourceSpec, SourceTerm, TermKind};
pub mod experiment;

pub use experiment::{
    manufactured_study, plane_wave_study, run_experiment, ComponentConfig, ConvergenceReport, ExperimentConfig,
    ExperimentOutput, GridConfig, InitialData, MonitorConfig, StepLog,
};
