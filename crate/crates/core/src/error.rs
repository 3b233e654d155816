use thiserror::Error;

use crate::lattice::Site;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} lies outside the window [{first}, {last}] under empty boundary")]
    SiteOutOfWindow { site: Site, first: Site, last: Site },

    #[error("window of length {len} exceeds the supported maximum {max}")]
    WindowTooLarge { len: usize, max: usize },

    #[error("state space of {states} configurations exceeds the enumeration budget {budget}")]
    BudgetExceeded { states: u128, budget: u128 },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("invalid constraint family: {0}")]
    InvalidFamily(String),

    #[error("site {0} is not occupied")]
    Unoccupied(Site),

    #[error("non-canonical eventually periodic configuration: {0}")]
    NotCanonical(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("rate at bond {bond} cannot be resolved: {reason}")]
    Unresolvable { bond: Site, reason: String },

    #[error("time step {dt} exceeds the stability bound {max_dt}")]
    Unstable { dt: f64, max_dt: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("negative argument ({0}, {1})")]
    NegativeInput(f64, f64),

    #[error("density {0} must lie strictly between 0 and 1")]
    InvalidDensity(f64),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
