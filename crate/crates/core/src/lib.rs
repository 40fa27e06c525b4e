//! Continuous surjections `R^m → R^n` built from Hilbert-curve
//! approximants, the `2 sinh(r t)` span family on top of them, and
//! re-checkable numerical certificates for both.
//!
//! The curve core ([`curve`]) works in exact dyadic arithmetic
//! ([`dyadic`]); [`factory`] assembles expression trees; [`phi`] holds the
//! span algebra; [`certify`] produces coverage certificates and rank
//! reports; [`spec`] is the declarative file format used by the CLI.
//!
//! There is no continuous surjection `R^m → R^ℕ`, so nothing here
//! attempts one.

pub mod certify;
pub mod cli;
pub mod curve;
pub mod dyadic;
pub mod factory;
pub mod phi;
pub mod rank;
pub mod spec;

pub use dyadic::Dyadic;
pub use factory::{EvalRequest, Evaluation, FunctionExpr, Witness};
pub use phi::{ScalarSpan, VectorSpanMember};
