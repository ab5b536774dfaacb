//! Simulation library for an operator-supervised mobile-data trading market.
//!
//! Subscribers of a single macro-cell operator can resell leftover monthly
//! data caps to nearby users, acting as access points of a user-provided
//! network (UPN). Buyers pick between the macro-cell base station and nearby
//! sellers; the association forms a one-to-many matching with externalities
//! (co-channel interference, seller load) solved by swap proposals, while
//! per-UPN trading prices are driven to market equilibrium by tatonnement.
//!
//! Module layout:
//! - [`scenario`]: world description, units, deterministic scenario generation
//! - [`radio`]: channel gains, SINR, link capacity, availability indicators
//! - [`economics`]: utilities, demand/supply curves, operator revenue, price benchmark
//! - [`matching`]: the matching state, swap evaluation, stability, enumeration oracle
//! - [`pricing`]: tatonnement price adjustment and its stability bound
//! - [`harness`]: full two-stage runs, baselines, Monte Carlo experiment drivers

// validators write `!(x > 0.0)` so NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod economics;
pub mod error;
pub mod harness;
pub mod matching;
pub mod pricing;
pub mod radio;
pub mod scenario;
pub mod units;

pub use error::{Error, Result};
pub use matching::Matching;
pub use pricing::MarketState;
pub use scenario::Scenario;
