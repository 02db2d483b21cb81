//! Global stability certificates for analytic vector fields on the polydisc,
//! built from the matrix of the Koopman generator in the monomial basis of the
//! Hardy space.
//!
//! The pipeline: ingest Taylor coefficients ([`vectorfield`]), check the
//! standing assumptions, compute a certified radius of global asymptotic
//! stability ([`certify`]), build the matching Lyapunov function
//! ([`lyapunov`]) and validate it numerically ([`numerics`]).

pub mod catalog;
pub mod certify;
pub mod error;
pub mod koopman;
pub mod lyapunov;
pub mod multiindex;
pub mod numerics;
pub mod poly;
pub mod problem;
pub mod report;
pub mod series;
pub mod vectorfield;

pub use error::{Error, Result};
pub use multiindex::{MonomialIndexMap, MultiIndex};
pub use vectorfield::{AssumptionReport, FieldKind, TailEnvelope, TaylorVectorField};
