//! Finite-n checks of large-deviation statements for empirical measures.
//!
//! Exact probabilities come from enumerating type classes (compositions of
//! `n`) with multinomial weights; Monte Carlo estimates use seeded,
//! schedule-independent substreams. The speed is always `n`.

mod gibbs;
mod rate;
mod sampler;
mod sanov;
mod types;

pub use gibbs::{gibbs_conditioning, ConditioningResult};
pub use rate::{contract_rate, error_rate_function, ContractedRate};
pub use sampler::SeededSampler;
pub use sanov::{
    sanov_exact, sanov_monte_carlo, wilson_interval, PointStatus, RateEstimate, RateMethod,
    RatePoint, MIN_HITS, TRIAL_BLOCK, WILSON_Z,
};
pub use types::{
    check_table_size, enumerate_types, event_is_empty, for_each_composition, in_window,
    table_size, type_mean, TypeClassTable, MAX_TABLE_ENTRIES,
};
