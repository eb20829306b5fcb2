//! A two-stratum Datalog fragment: a recursive, negation-free rule set
//! defining idb relations, followed by a nonrecursive FO formula (which
//! may use negation) over the database schema extended with those
//! relations.

mod detect;
mod eval;
mod text;

pub use detect::{detect_equiv_program, DetectedEquiv, EquivSpec};
pub use eval::{eval_program, eval_stratum_naive, eval_stratum_semi_naive, materialize_stratum};
pub use text::parse_program;

use std::collections::BTreeSet;

use crate::lex::ParseError;
use crate::model::{Constant, ModelError};
use crate::query::{Formula, Term};

/// A relational atom `R(t1, ..., tk)` with variable or constant terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub relation: String,
    pub terms: Vec<Term>,
}

impl Atom {
    pub fn new(relation: impl Into<String>, terms: Vec<Term>) -> Atom {
        Atom {
            relation: relation.into(),
            terms,
        }
    }

    pub fn vars(&self) -> impl Iterator<Item = &String> {
        self.terms.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        })
    }
}

/// A body literal of a rule: a positive relational atom or an equality.
/// The first stratum has no negation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BodyAtom {
    Rel(Atom),
    Eq(Term, Term),
}

/// `head :- body.` A rule with an empty body is a fact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<BodyAtom>,
}

/// The program: recursive positive rules defining the idb relations, plus
/// an FO layer evaluated naively over the extended schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatalogProgram {
    pub rules: Vec<Rule>,
    pub fo_layer: Formula,
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum DatalogError {
    #[error("unsafe rule `{rule}`: variable {var} is not range-restricted")]
    UnsafeRule { rule: String, var: String },
    #[error("relation {0} is both defined by rules and stored in the database")]
    IdbEdbClash(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl DatalogProgram {
    pub fn new(rules: Vec<Rule>, fo_layer: Formula) -> DatalogProgram {
        DatalogProgram { rules, fo_layer }
    }

    /// The idb relations: every relation defined by some rule head.
    pub fn idb_relations(&self) -> BTreeSet<String> {
        self.rules.iter().map(|r| r.head.relation.clone()).collect()
    }

    /// Constants appearing anywhere in the rules.
    pub fn rule_constants(&self) -> BTreeSet<Constant> {
        let mut out = BTreeSet::new();
        let mut term = |t: &Term| {
            if let Term::Const(c) = t {
                out.insert(c.clone());
            }
        };
        for rule in &self.rules {
            rule.head.terms.iter().for_each(&mut term);
            for b in &rule.body {
                match b {
                    BodyAtom::Rel(a) => a.terms.iter().for_each(&mut term),
                    BodyAtom::Eq(x, y) => {
                        term(x);
                        term(y);
                    }
                }
            }
        }
        out
    }

    /// Checks rule safety: every head variable must be range-restricted,
    /// i.e. bound by a relational body atom or equated (possibly through a
    /// chain of equalities) to a bound variable or a constant. Returns,
    /// for each rule, a processing order of the body that binds variables
    /// left to right.
    pub fn validate(&self) -> Result<Vec<Vec<usize>>, DatalogError> {
        let mut orders = Vec::new();
        for rule in &self.rules {
            let mut bound: BTreeSet<String> = BTreeSet::new();
            let mut remaining: Vec<usize> = (0..rule.body.len()).collect();
            let mut order = Vec::new();
            while !remaining.is_empty() {
                // relational atoms always bind; equalities need one side
                // bound or constant
                let next = remaining
                    .iter()
                    .position(|&i| matches!(rule.body[i], BodyAtom::Rel(_)))
                    .or_else(|| {
                        remaining.iter().position(|&i| match &rule.body[i] {
                            BodyAtom::Eq(a, b) => [a, b].iter().any(|t| match t {
                                Term::Var(v) => bound.contains(v),
                                Term::Const(_) => true,
                            }),
                            BodyAtom::Rel(_) => false,
                        })
                    });
                let Some(pos) = next else {
                    let var = remaining
                        .iter()
                        .find_map(|&i| match &rule.body[i] {
                            BodyAtom::Eq(Term::Var(v), _) => Some(v.clone()),
                            _ => None,
                        })
                        .unwrap_or_default();
                    return Err(DatalogError::UnsafeRule {
                        rule: rule.to_string(),
                        var,
                    });
                };
                let i = remaining.remove(pos);
                match &rule.body[i] {
                    BodyAtom::Rel(a) => bound.extend(a.vars().cloned()),
                    BodyAtom::Eq(a, b) => {
                        for t in [a, b] {
                            if let Term::Var(v) = t {
                                bound.insert(v.clone());
                            }
                        }
                    }
                }
                order.push(i);
            }
            for v in rule.head.vars() {
                if !bound.contains(v) {
                    return Err(DatalogError::UnsafeRule {
                        rule: rule.to_string(),
                        var: v.clone(),
                    });
                }
            }
            orders.push(order);
        }
        Ok(orders)
    }
}
