//! Core vocabulary: values, databases, valuations, and EGD constraints.

mod database;
mod egd;
mod valuation;
mod value;

pub use database::Database;
pub use egd::{satisfies_egds, Egd, EgdAtom};
pub use valuation::Valuation;
pub use value::{display_tuple, Constant, Value};

/// Errors raised by the core model operations.
#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("relation {relation} declared with arity {declared} but used with arity {used}")]
    ArityConflict {
        relation: String,
        declared: usize,
        used: usize,
    },
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("valuation has no value for null _{0}")]
    MissingNull(String),
    #[error("invalid EGD: {0}")]
    InvalidEgd(String),
}

#[cfg(test)]
mod tests {
    // the core types are immutable after construction and cross threads
    #[test]
    fn core_types_are_send_and_sync() {
        fn check<T: Send + Sync>() {}
        check::<super::Value>();
        check::<super::Database>();
        check::<super::Valuation>();
        check::<super::Egd>();
        check::<crate::query::Formula>();
        check::<crate::datalog::DatalogProgram>();
        check::<crate::rewrite::RewritingBundle>();
        check::<crate::best::BestRewriting>();
    }
}
