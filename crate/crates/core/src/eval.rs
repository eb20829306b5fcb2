//! Naive active-domain evaluation of FO formulas: nulls are treated as
//! fresh constants distinct from each other and from all real constants,
//! and quantified variables range over the active domain of the database
//! plus the constants of the formula.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{Constant, Database, ModelError, Value};
use crate::query::{Formula, Term};

/// The result of evaluating a formula: the answer columns (free variables
/// in canonical order) and the set of satisfying tuples. A Boolean query
/// has no columns; its truth value is whether the empty tuple is present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswerSet {
    pub vars: Vec<String>,
    pub tuples: BTreeSet<Vec<Value>>,
}

impl AnswerSet {
    pub fn is_boolean(&self) -> bool {
        self.vars.is_empty()
    }

    /// For Boolean queries: whether the query holds.
    pub fn truth(&self) -> Option<bool> {
        if self.is_boolean() {
            Some(!self.tuples.is_empty())
        } else {
            None
        }
    }
}

impl fmt::Display for AnswerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(b) = self.truth() {
            return writeln!(f, "{b}");
        }
        for t in &self.tuples {
            writeln!(f, "{}", crate::model::display_tuple(t))?;
        }
        Ok(())
    }
}

/// Membership test of a computed relation.
pub type MembershipFn<'a> = Box<dyn Fn(&[Value]) -> bool + 'a>;

/// A relation computed on demand rather than stored: an arity plus a
/// membership test.
pub struct VirtualRel<'a> {
    pub arity: usize,
    pub member: MembershipFn<'a>,
}

/// A database together with extra constants for the quantifier range and
/// computed relations overlaying the stored ones.
pub struct Interp<'a> {
    db: &'a Database,
    extra_constants: BTreeSet<Constant>,
    virtuals: BTreeMap<String, VirtualRel<'a>>,
}

impl<'a> Interp<'a> {
    pub fn new(db: &'a Database) -> Interp<'a> {
        Interp {
            db,
            extra_constants: BTreeSet::new(),
            virtuals: BTreeMap::new(),
        }
    }

    pub fn database(&self) -> &Database {
        self.db
    }

    pub fn add_constants<I: IntoIterator<Item = Constant>>(&mut self, cs: I) {
        self.extra_constants.extend(cs);
    }

    pub fn add_virtual(
        &mut self,
        name: impl Into<String>,
        rel: VirtualRel<'a>,
    ) -> Result<(), ModelError> {
        let name = name.into();
        if self.db.arity(&name).is_some() {
            return Err(ModelError::ArityConflict {
                relation: name,
                declared: rel.arity,
                used: rel.arity,
            });
        }
        self.virtuals.insert(name, rel);
        Ok(())
    }

    fn arity_of(&self, name: &str) -> Option<usize> {
        self.virtuals
            .get(name)
            .map(|v| v.arity)
            .or_else(|| self.db.arity(name))
    }

    fn contains(&self, name: &str, tuple: &[Value]) -> bool {
        match self.virtuals.get(name) {
            Some(v) => (v.member)(tuple),
            None => self.db.contains(name, tuple),
        }
    }

    /// The evaluation domain for a formula: adom(db), the formula's
    /// constants, and any registered extra constants.
    pub fn domain(&self, q: &Formula) -> Vec<Value> {
        let mut dom: BTreeSet<Value> = self.db.adom();
        dom.extend(q.constants().into_iter().map(Value::Const));
        dom.extend(self.extra_constants.iter().cloned().map(Value::Const));
        dom.into_iter().collect()
    }
}

/// Checks that every relational atom refers to a known relation with the
/// right arity.
fn check_schema(q: &Formula, interp: &Interp) -> Result<(), ModelError> {
    match q {
        Formula::Rel { relation, terms } => match interp.arity_of(relation) {
            None => Err(ModelError::UnknownRelation(relation.clone())),
            Some(a) if a != terms.len() => Err(ModelError::ArityConflict {
                relation: relation.clone(),
                declared: a,
                used: terms.len(),
            }),
            Some(_) => Ok(()),
        },
        Formula::Eq(..) | Formula::IsNull(_) => Ok(()),
        Formula::Not(g) => check_schema(g, interp),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().try_for_each(|g| check_schema(g, interp)),
        Formula::Exists(_, g) | Formula::Forall(_, g) => check_schema(g, interp),
    }
}

struct Env {
    stack: Vec<(String, Value)>,
}

impl Env {
    fn get(&self, v: &str) -> &Value {
        self.stack
            .iter()
            .rev()
            .find(|(name, _)| name == v)
            .map(|(_, val)| val)
            .unwrap_or_else(|| unreachable!("unbound variable {v}"))
    }
}

fn resolve(t: &Term, env: &Env) -> Value {
    match t {
        Term::Var(v) => env.get(v).clone(),
        Term::Const(c) => Value::Const(c.clone()),
    }
}

fn sat(f: &Formula, interp: &Interp, domain: &[Value], env: &mut Env) -> bool {
    match f {
        Formula::Rel { relation, terms } => {
            let tuple: Vec<Value> = terms.iter().map(|t| resolve(t, env)).collect();
            interp.contains(relation, &tuple)
        }
        Formula::Eq(a, b) => resolve(a, env) == resolve(b, env),
        Formula::IsNull(t) => resolve(t, env).is_null(),
        Formula::Not(g) => !sat(g, interp, domain, env),
        Formula::And(fs) => fs.iter().all(|g| sat(g, interp, domain, env)),
        Formula::Or(fs) => fs.iter().any(|g| sat(g, interp, domain, env)),
        Formula::Exists(vs, g) => quantify(vs, 0, g, interp, domain, env, true),
        Formula::Forall(vs, g) => !quantify(vs, 0, g, interp, domain, env, false),
    }
}

/// When `witness` is set, searches for an assignment making the body true;
/// otherwise for one making it false.
fn quantify(
    vs: &[String],
    i: usize,
    body: &Formula,
    interp: &Interp,
    domain: &[Value],
    env: &mut Env,
    witness: bool,
) -> bool {
    if i == vs.len() {
        return sat(body, interp, domain, env) == witness;
    }
    for val in domain {
        env.stack.push((vs[i].clone(), val.clone()));
        let found = quantify(vs, i + 1, body, interp, domain, env, witness);
        env.stack.pop();
        if found {
            return true;
        }
    }
    false
}

/// Evaluates a formula over an interpretation, returning every assignment
/// of the free variables (over the evaluation domain) that satisfies it.
pub fn eval_on(q: &Formula, interp: &Interp) -> Result<AnswerSet, ModelError> {
    check_schema(q, interp)?;
    let vars: Vec<String> = q.answer_vars();
    let domain = interp.domain(q);
    let mut tuples = BTreeSet::new();
    let mut env = Env { stack: Vec::new() };
    enumerate_answers(q, interp, &domain, &vars, 0, &mut env, &mut tuples);
    Ok(AnswerSet { vars, tuples })
}

fn enumerate_answers(
    q: &Formula,
    interp: &Interp,
    domain: &[Value],
    vars: &[String],
    i: usize,
    env: &mut Env,
    out: &mut BTreeSet<Vec<Value>>,
) {
    if i == vars.len() {
        if sat(q, interp, domain, env) {
            out.insert(env.stack.iter().map(|(_, v)| v.clone()).collect());
        }
        return;
    }
    for val in domain {
        env.stack.push((vars[i].clone(), val.clone()));
        enumerate_answers(q, interp, domain, vars, i + 1, env, out);
        env.stack.pop();
    }
}

/// Naive evaluation of `q` over `d`.
pub fn eval_fo(q: &Formula, d: &Database) -> Result<AnswerSet, ModelError> {
    eval_on(q, &Interp::new(d))
}

/// Naive evaluation with additional constants in the quantifier and
/// answer ranges (used when a rewriting must range over the constants of
/// the original query).
pub fn eval_with_constants(
    q: &Formula,
    d: &Database,
    extra: &BTreeSet<Constant>,
) -> Result<AnswerSet, ModelError> {
    let mut interp = Interp::new(d);
    interp.add_constants(extra.iter().cloned());
    eval_on(q, &interp)
}
