//! Query answering over incomplete databases with marked nulls.
//!
//! An incomplete database stores constants and named (marked) nulls; a
//! valuation turns it into a complete database by substituting constants
//! for nulls. This crate computes, for first-order queries and optional
//! equality-generating dependencies (EGDs):
//!
//! * naive query answers (nulls treated as fresh constants),
//! * certain answers (true under every consistent valuation),
//! * best answers (answers whose support of valuations is maximal),
//!
//! both by brute-force enumeration of valuation patterns and by compiling
//! queries into Datalog-with-negation or first-order rewritings whose
//! naive evaluation returns exactly the certain (or best) answers.

pub mod best;
pub mod chase;
pub mod cli;
pub mod datalog;
pub mod eval;
pub mod fixtures;
mod lex;
pub mod model;
pub mod oracle;
pub mod query;
pub mod rewrite;

pub use lex::ParseError;

pub use model::{Constant, Database, Egd, ModelError, Valuation, Value};
pub use query::{Formula, QueryClass, Term};
