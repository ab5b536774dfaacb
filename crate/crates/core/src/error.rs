use thiserror::Error;

/// Library-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or override value violates an invariant. Carries the
    /// offending field name so callers can report it precisely.
    #[error("invalid value for `{field}`: {message}")]
    Validation { field: String, message: String },

    /// The demand curve is singular at or below the WSP reward: the
    /// second branch of the demand function requires `price - reward + penalty > 0`.
    #[error("price {price} is not above the reward margin {margin}; demand undefined")]
    PriceBelowReward { price: f64, margin: f64 },

    /// An economics formula was called outside its domain.
    #[error("domain error in {op}: {message}")]
    Domain { op: &'static str, message: String },

    /// Tatonnement failed to reach the convergence threshold. Carries the
    /// full iteration trace for diagnosis.
    #[error("price iteration did not converge after {iterations} steps (last price {last_price}, last |step| {last_step})")]
    NonConvergence {
        iterations: usize,
        last_price: f64,
        last_step: f64,
        trace: Box<crate::pricing::PriceTrace>,
    },

    /// The swap loop exceeded its round budget without settling. Carries the
    /// last matching and price state so partial results can still be written.
    #[error("matching did not settle after {rounds} swap rounds ({swaps_applied} swaps applied)")]
    CycleGuard {
        rounds: usize,
        swaps_applied: usize,
        matching: Box<crate::matching::Matching>,
        market: Box<crate::pricing::MarketState>,
    },

    /// Exhaustive enumeration was requested on an instance that is too large.
    #[error("instance too large to enumerate: {buyers} buyers x {sellers} sellers (guard: {max_buyers} x {max_sellers})")]
    SizeGuard {
        buyers: usize,
        sellers: usize,
        max_buyers: usize,
        max_sellers: usize,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }
}
