use std::collections::{BTreeMap, BTreeSet};

use crate::model::Constant;

/// A term of the query language: a variable or a constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Constant),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn int(n: i64) -> Term {
        Term::Const(Constant::Int(n))
    }

    pub fn str(s: impl Into<String>) -> Term {
        Term::Const(Constant::Str(s.into()))
    }
}

/// First-order formulas over relational atoms and equality, with an
/// `IsNull` test that only rewriting output uses.
///
/// `And(vec![])` is the true formula and `Or(vec![])` the false one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Rel { relation: String, terms: Vec<Term> },
    Eq(Term, Term),
    IsNull(Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Exists(Vec<String>, Box<Formula>),
    Forall(Vec<String>, Box<Formula>),
}

/// Structural query classes, from most to least restrictive. `Bccq` is the
/// closure of conjunctive queries under intersection, union and difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum QueryClass {
    Cq,
    Ucq,
    Bccq,
    Fo,
}

impl std::fmt::Display for QueryClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryClass::Cq => write!(f, "CQ"),
            QueryClass::Ucq => write!(f, "UCQ"),
            QueryClass::Bccq => write!(f, "BCCQ"),
            QueryClass::Fo => write!(f, "FO"),
        }
    }
}

impl Formula {
    pub fn rel(relation: impl Into<String>, terms: Vec<Term>) -> Formula {
        Formula::Rel {
            relation: relation.into(),
            terms,
        }
    }

    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Eq(a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    /// Conjunction; flattens directly nested `And`s and unwraps singletons.
    pub fn and(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::And(parts) => out.extend(parts),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Formula::And(out)
        }
    }

    /// Disjunction; flattens directly nested `Or`s and unwraps singletons.
    pub fn or(fs: Vec<Formula>) -> Formula {
        let mut out = Vec::new();
        for f in fs {
            match f {
                Formula::Or(parts) => out.extend(parts),
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Formula::Or(out)
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::or(vec![Formula::not(a), b])
    }

    pub fn exists(vars: Vec<String>, f: Formula) -> Formula {
        if vars.is_empty() {
            f
        } else {
            Formula::Exists(vars, Box::new(f))
        }
    }

    pub fn forall(vars: Vec<String>, f: Formula) -> Formula {
        if vars.is_empty() {
            f
        } else {
            Formula::Forall(vars, Box::new(f))
        }
    }

    pub fn tru() -> Formula {
        Formula::And(vec![])
    }

    pub fn fls() -> Formula {
        Formula::Or(vec![])
    }

    /// Free variables of the formula.
    pub fn free_vars(&self) -> BTreeSet<String> {
        fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
            let term = |t: &Term, bound: &Vec<String>, out: &mut BTreeSet<String>| {
                if let Term::Var(v) = t {
                    if !bound.contains(v) {
                        out.insert(v.clone());
                    }
                }
            };
            match f {
                Formula::Rel { terms, .. } => terms.iter().for_each(|t| term(t, bound, out)),
                Formula::Eq(a, b) => {
                    term(a, bound, out);
                    term(b, bound, out);
                }
                Formula::IsNull(t) => term(t, bound, out),
                Formula::Not(g) => go(g, bound, out),
                Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| go(g, bound, out)),
                Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
                    let n = bound.len();
                    bound.extend(vs.iter().cloned());
                    go(g, bound, out);
                    bound.truncate(n);
                }
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Free variables in canonical (sorted) order: the answer-column order
    /// used everywhere in this crate.
    pub fn answer_vars(&self) -> Vec<String> {
        self.free_vars().into_iter().collect()
    }

    /// The constants occurring in the formula (its active domain).
    pub fn constants(&self) -> BTreeSet<Constant> {
        fn go(f: &Formula, out: &mut BTreeSet<Constant>) {
            let term = |t: &Term, out: &mut BTreeSet<Constant>| {
                if let Term::Const(c) = t {
                    out.insert(c.clone());
                }
            };
            match f {
                Formula::Rel { terms, .. } => terms.iter().for_each(|t| term(t, out)),
                Formula::Eq(a, b) => {
                    term(a, out);
                    term(b, out);
                }
                Formula::IsNull(t) => term(t, out),
                Formula::Not(g) => go(g, out),
                Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| go(g, out)),
                Formula::Exists(_, g) | Formula::Forall(_, g) => go(g, out),
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }

    /// Relation names used by the formula.
    pub fn relations(&self) -> BTreeSet<String> {
        fn go(f: &Formula, out: &mut BTreeSet<String>) {
            match f {
                Formula::Rel { relation, .. } => {
                    out.insert(relation.clone());
                }
                Formula::Eq(..) | Formula::IsNull(_) => {}
                Formula::Not(g) => go(g, out),
                Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| go(g, out)),
                Formula::Exists(_, g) | Formula::Forall(_, g) => go(g, out),
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut out);
        out
    }

    /// Substitutes terms for free occurrences of variables. Bound variables
    /// shadow; callers must keep substituted terms clear of bound names.
    pub fn substitute(&self, map: &BTreeMap<String, Term>) -> Formula {
        let term = |t: &Term| match t {
            Term::Var(v) => map.get(v).cloned().unwrap_or_else(|| t.clone()),
            Term::Const(_) => t.clone(),
        };
        match self {
            Formula::Rel { relation, terms } => Formula::Rel {
                relation: relation.clone(),
                terms: terms.iter().map(term).collect(),
            },
            Formula::Eq(a, b) => Formula::Eq(term(a), term(b)),
            Formula::IsNull(t) => Formula::IsNull(term(t)),
            Formula::Not(g) => Formula::not(g.substitute(map)),
            Formula::And(fs) => Formula::And(fs.iter().map(|g| g.substitute(map)).collect()),
            Formula::Or(fs) => Formula::Or(fs.iter().map(|g| g.substitute(map)).collect()),
            Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
                let inner: BTreeMap<String, Term> = map
                    .iter()
                    .filter(|(k, _)| !vs.contains(k))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                let body = g.substitute(&inner);
                match self {
                    Formula::Exists(..) => Formula::Exists(vs.clone(), Box::new(body)),
                    _ => Formula::Forall(vs.clone(), Box::new(body)),
                }
            }
        }
    }

    /// Structural classification.
    pub fn classify(&self) -> QueryClass {
        match self {
            Formula::Rel { .. } | Formula::Eq(..) => QueryClass::Cq,
            Formula::IsNull(_) => QueryClass::Fo,
            Formula::And(fs) => fs
                .iter()
                .map(|f| f.classify())
                .max()
                .unwrap_or(QueryClass::Cq),
            Formula::Or(fs) => fs
                .iter()
                .map(|f| f.classify())
                .max()
                .unwrap_or(QueryClass::Ucq)
                .max(QueryClass::Ucq),
            Formula::Not(g) => {
                if g.classify() <= QueryClass::Bccq {
                    QueryClass::Bccq
                } else {
                    QueryClass::Fo
                }
            }
            Formula::Exists(_, g) => match g.classify() {
                c @ (QueryClass::Cq | QueryClass::Ucq) => c,
                _ => QueryClass::Fo,
            },
            Formula::Forall(..) => QueryClass::Fo,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;

    #[test]
    fn classify_examples() {
        let cq = parse_query("exists y (R(y) & S(y, x))").unwrap();
        assert_eq!(cq.classify(), QueryClass::Cq);
        assert_eq!(cq.answer_vars(), vec!["x".to_string()]);

        let bccq = parse_query("R(x, y) & !(R(x, y) & x = y)").unwrap();
        assert_eq!(bccq.classify(), QueryClass::Bccq);

        let fo = parse_query("forall y (R(y))").unwrap();
        assert_eq!(fo.classify(), QueryClass::Fo);

        let ucq = parse_query("exists y (R(x, y) | S(x, y))").unwrap();
        assert_eq!(ucq.classify(), QueryClass::Ucq);

        // negation under a quantifier falls outside BCCQ
        let not_bccq = parse_query("exists x (R(x) & !(S(x)))").unwrap();
        assert_eq!(not_bccq.classify(), QueryClass::Fo);
    }

    #[test]
    fn difference_is_sugar_for_and_not() {
        let a = parse_query("R(x, y) - (R(x, y) & x = y)").unwrap();
        let b = parse_query("R(x, y) & !(R(x, y) & x = y)").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn free_vars_respect_quantifiers() {
        let f = parse_query("exists y (R(y) & S(y, x)) & T(y)").unwrap();
        assert_eq!(
            f.free_vars(),
            ["x".to_string(), "y".to_string()].into_iter().collect()
        );
    }

    #[test]
    fn smart_constructors_flatten() {
        let f = Formula::and(vec![
            Formula::rel("R", vec![Term::var("x")]),
            Formula::and(vec![
                Formula::rel("S", vec![Term::var("x")]),
                Formula::rel("T", vec![Term::var("x")]),
            ]),
        ]);
        assert!(matches!(&f, Formula::And(fs) if fs.len() == 3));
    }
}
