//! The two synchronous-transmission dissemination backends: Glossy-style
//! one-to-all flooding and Chaos-style all-to-all aggregation.

pub mod chaos;
pub mod glossy;

pub use chaos::{chaos_round, merge_aggregate, ChaosAggregate, ChaosParams};
pub use glossy::{glossy_flood, FloodResult, GlossyParams};
