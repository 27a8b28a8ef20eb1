//! Rate-distortion-perception computations for discrete memoryless sources.
//!
//! The crate traces three families of curves for a finite-alphabet source:
//!
//! * the classic rate-distortion function, via Blahut–Arimoto ([`ba`]);
//! * the rate-distortion function under a perfect-perception constraint
//!   (reconstruction distribution pinned to the source distribution), via
//!   symmetric log-domain Sinkhorn scaling over joint distribution matrices
//!   ([`entropic`]);
//! * operational frontiers of deterministic encoders paired with either a
//!   conditional-mean decoder or a posterior-sampling decoder ([`two_stage`]).
//!
//! [`dal`] holds a tabular distortion-plus-divergence decoder baseline and
//! [`report`] ties everything together for the command-line front end.

pub mod ba;
pub mod curve;
pub mod dal;
pub mod entropic;
mod error;
pub mod info;
pub mod kernel;
pub mod report;
pub mod source;
pub mod two_stage;

pub use crate::curve::{Curve, Perception, RDPoint};
pub use crate::error::{Error, Result};
pub use crate::kernel::{ConditionalKernel, Orientation};
pub use crate::source::{DistortionKind, DistortionMatrix, Source};
