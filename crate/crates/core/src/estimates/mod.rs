//! Quantitative checks of the commutator, decay and energy estimates.

pub mod energy_estimate;

pub use energy_estimate::{estimate_slice_terms, EstimateLine, EstimateReport, EstimateSeries, EstimateSliceTerms};
pub mod commutator;

pub use commutator::{check_pair, random_pair, CommutatorEngine, IdentitySummary, LieCache};
pub mod bound;
pub mod family;

pub use bound::{
    bound_terms, commutator_at, gradient_frame_bound_check, in_exterior_set, lbar_decoupling_defect, measure_bound, measure_bound_polished, BoundStudy, BoundTerm, CommutatorReport, CommutatorSample, LhsNorm, TermValue,
    Factor, FrameSet, Operand,
};
pub use family::{decay_lattice, enveloped_pair, exterior_lattice, Enveloped, JetSource, LbarPerturbed};
pub mod decay;

pub use decay::{decay_constants, DecayConstants};
