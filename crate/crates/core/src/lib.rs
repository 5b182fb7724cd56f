//! Finite-dimensional calculus of complex interpolation on Köthe sequence
//! spaces.
//!
//! The crate realizes, at exact finite scale, the objects that appear when a
//! pair of lattice norms is joined by the complex method: interpolated norms
//! via optimal multiplicative factorizations, the associated derivative maps
//! ("centralizers"), indicator functionals and their Legendre-type inversion,
//! twisted-sum quasi-norms, and a unit-circle grid laboratory where the
//! classical log-type centralizers and the analytic projection can be played
//! against each other numerically.
//!
//! Everything is deterministic: every stochastic search takes an explicit
//! seed, every optimizer is pure, and repeated runs with the same
//! configuration reproduce results bit for bit.

pub mod centralizer;
pub mod circle;
pub mod error;
pub mod indicator;
pub mod interp;
pub mod measure;
pub mod opt;
pub mod sample;
pub mod spaces;
pub mod twisted;

pub use centralizer::{
    check_axioms, default_shrink_schedule, fit_equivalence, lift, lift_through, phi_omega,
    split_centralizer, AxiomReport, Centralizer, CentralizerKind, EquivFit, PhiOmega,
    SplitOutcome,
};
pub use circle::{
    commutator_experiment, commutator_ratio, concentrated_near_one, omega1, omega2, omega3,
    operator_growth, project_hardy, random_trig_poly, CircleGrid, CircleOmega, CircleRow,
    CircleTable, SzegoProjection,
};
pub use error::{CalcError, Result};
pub use indicator::{
    check_indicator, delta_phi, estimate_delta, indicator_affine, indicator_eval,
    indicator_extend, indicator_of_space, lozanovsky_factorize, norm_from_indicator,
    DeltaEstimate, IndicatorCheck, IndicatorFn, IndicatorKind, Lozanovsky, NormRecovery,
};
pub use interp::{
    calderon_norm, canonical_omega, scaling_shift, wolff_glue, Couple, Factorization,
    InterpResult, WolffGlue,
};
pub use measure::{l0_dist, lp_norm, measure_of_superlevel, pair, MVec, MeasureSpace, PExp};
pub use opt::NumOpts;
pub use spaces::{dual_norm, multiplier_apply, KotheSpace, Multiplier, SpaceKind};
pub use twisted::{
    commutator_bound, derived_norm_upper, kappa, twisted_quasinorm, DerivedBound,
    LinearOperator, OperatorKind, TwistedElement,
};
