//! Numerical laboratory for interference alignment (IA) on the K-user
//! interference channel.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds configurations, channel sets and precoder/decoder pairs,
//!   plus seeded generation of generic channels under each sparsity pattern.
//! * [`counting`] is exact (big-integer / rational) bookkeeping: equation and
//!   variable counts, properness, the time-extension DoF series and the
//!   dimension of the free channel space.
//! * [`verify`] checks a candidate solution against the zero-forcing and
//!   direct-link rank conditions.
//! * [`cj3`] builds the explicit three-user diagonal-channel solution.
//! * [`probe`] solves the linearised system `P h = 0` for random beamformers
//!   and tracks the span of the channel solutions.
//! * [`solve`] runs alternating leakage minimisation and a Monte Carlo
//!   feasibility classifier.
//! * [`poly`] writes the alignment equations as a plain-text polynomial
//!   system for external algebra tools.
//!
//! All floating-point code is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the usual `f64` instantiation.

pub mod cj3;
pub mod counting;
mod error;
pub mod linalg;
pub mod model;
pub mod poly;
pub mod probe;
mod rng;
mod scalar;
pub mod solve;
pub mod verify;

pub use error::{Error, Result};
pub use rng::substream;
pub use scalar::{CMat, Cx, Real};

pub use counting::{CjParameters, PropernessReport};
pub use model::{ChannelSet, ChannelStructure, IaSolution, StructureKind, SystemConfig};
pub use probe::ProbeReport;
pub use solve::{Classification, FeasibilityVerdict, SolverOptions};
pub use verify::{Tolerances, VerificationResult};

/// Exact rational used by the bound calculators.
pub type Exact = num_rational::BigRational;

/// Channel set in double precision.
pub type Channels = ChannelSet<f64>;
/// Channel set in single precision.
pub type Channels32 = ChannelSet<f32>;
/// Precoder/decoder pair in double precision.
pub type Solution = IaSolution<f64>;
/// Precoder/decoder pair in single precision.
pub type Solution32 = IaSolution<f32>;
/// Verification result in double precision.
pub type Verification = VerificationResult<f64>;
/// Three-user explicit construction in double precision.
pub type Cj3 = cj3::Cj3Instance<f64>;
