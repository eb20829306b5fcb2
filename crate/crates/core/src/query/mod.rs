//! The query language: FO formula AST, parser, structural classification,
//! and normal-form transformations.

mod ast;
mod display;
mod nrv;
mod parser;

pub use ast::{Formula, QueryClass, Term};
pub use nrv::{normalize_egd, parse_egds, to_dnf_bccq, to_nrv, DnfBccq, DnfDisjunct, NrvCq, RawEgd};
pub use parser::{
    parse_family_text, parse_query, parse_raw_egds, parse_tuple_set_text, parse_tuple_text,
    parse_value,
};

use crate::lex::ParseError;
use crate::model::ModelError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum QueryError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("expected a {expected} query, found {found}")]
    WrongClass {
        expected: QueryClass,
        found: QueryClass,
    },
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error("EGDs may not contain constants")]
    ConstantInEgd,
    #[error("EGD variable {0} does not occur in any body atom")]
    EgdVarNotInBody(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}
