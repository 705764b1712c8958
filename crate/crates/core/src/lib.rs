//! Maximum-entropy posterior inference under expected-loss constraints.
//!
//! The crate computes exponential tilts and I-projections of finite
//! distributions, Bayes decisions under arbitrary loss matrices, and the exact
//! finite-sample quantities (type-class enumeration, Monte Carlo hit rates,
//! conditioned empirical means) needed to check large-deviation statements
//! about them at desk scale.
//!
//! | module | contents |
//! |--------|----------|
//! | [`measures`] | distributions, types, loss matrices, KL, entropy, Bayes classifier |
//! | [`maxent`] | tilt solver, I-projection, projections under other divergences |
//! | [`ldp`] | type-class tables, Sanov rates, Gibbs conditioning, error rate function |
//! | [`meta`] | error-value distributions, max-ent fits over them, MAP model search |
//! | [`correlation`] | loss versus correlation for Gaussian pair models |
//! | [`harness`] | config-driven experiment runner behind the CLI |

pub mod correlation;
pub mod error;
pub mod harness;
pub mod ldp;
pub mod maxent;
pub mod measures;
pub mod meta;
pub mod numeric;

pub use error::{Error, ErrorFamily, Result};
