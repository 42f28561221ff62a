//! Design and evaluation of pi-pulse dynamical-decoupling sequences for a
//! dephasing qubit.
//!
//! * [`sequences`] builds the pulse-timing families (UDD, CPMG, bang-bang,
//!   concatenated, iterated UDD, custom lists).
//! * [`filter`] evaluates the filter function `y(z)` and the order
//!   conditions at `z = 0`.
//! * [`bath`] and [`decoherence`] compute the suppression exponent, phase
//!   and signal for ohmic baths with hard or power-law cutoffs.
//! * [`optimizer`] re-derives the optimal timings by Newton iteration.
//! * [`general_bath`] checks the order conditions of the general dephasing
//!   model through an exact or high-precision coefficient recursion.

pub mod bath;
pub mod cli;
pub mod decoherence;
pub mod error;
pub mod filter;
pub mod general_bath;
pub mod optimizer;
pub mod quadrature;
pub mod sequences;
pub mod special;

pub use bath::{Cutoff, Environment, Mode, SpectralDensity};
pub use decoherence::{DecoherenceCurve, DecoherencePoint, QuadratureConfig};
pub use error::{Error, Result};
pub use filter::{ClosedForm, Filter, FilterEvaluation};
pub use general_bath::{Arithmetic, BinaryWord, OrderReport};
pub use sequences::{Family, PulseSequence};
