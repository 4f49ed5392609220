//! Computational tools for iterated function systems (IFSs) on compact real
//! intervals.
//!
//! Compact sets are modelled as finite unions of closed intervals
//! ([`IntervalSet`]), maps as continuous piecewise-monotone functions
//! ([`PiecewiseMonotoneMap`]), and probability measures as piecewise-uniform
//! densities on a uniform bin grid ([`GridMeasure`], [`HatMeasure`]).
//!
//! On top of these the crate provides the Barnsley-Hutchinson operator and
//! its fixed points, finite-depth approximations of fibres and of the target
//! set, chaos-game orbits, splitting and separability checkers for Markov
//! measures, and Markov-operator iteration for stationary measures.


// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chaos;
pub mod error;
pub mod ifs;
pub mod intervals;
pub mod maps;
pub mod measures;
pub mod presets;
pub mod stochastic;
pub mod symbolic;

pub use chaos::{chaos_probe, orbit, tail_cover, ChaosMode, ChaosParams, ChaosReport, Orbit};
pub use error::{Error, Result};
pub use ifs::{ConleyVerdict, Deadline, Ifs, StarSet, TargetApprox, TargetOptions};
pub use intervals::{Interval, IntervalSet, SetLimits};
pub use maps::{BranchKind, MonotoneBranch, PiecewiseMonotoneMap};
pub use measures::{GridMeasure, HatMeasure};
pub use stochastic::{StationaryVector, TransitionMatrix};
pub use symbolic::{SymbolStream, Word};
