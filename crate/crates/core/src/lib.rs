//! Asymptotic homology of curves and solenoid leaves on tori.
//!
//! Schwartzman classes are computed by several independent routes (closed-up
//! windows, calibrating functions, closed 1-forms, circle maps, hypersurface
//! crossings) and compared with Ruelle–Sullivan classes of measured
//! suspensions. The stable norm on `H_1` is computed from minimal loop lengths.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with non-positives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod homology;
pub mod trig;
pub mod torus;
pub mod ode;
pub mod curve;
pub mod calibration;
pub mod asymptotic;
pub mod solenoid;
pub mod ksolenoid;
pub mod stable_norm;

pub use error::{Error, Result};
pub use homology::{HomologyVector, IntegralClass, PointSet, Window};
pub use torus::TorusGeometry;
pub use curve::LiftedCurve;
