//! Program evaluation: the first stratum runs to a least fixpoint by
//! semi-naive iteration with nulls treated as constants, then the FO layer
//! is evaluated naively over the database extended with the idb relations.
//!
//! Programs whose rules match the equivalence template are instead
//! evaluated with per-assignment union-find closures behind virtual
//! relations; the answer is the same (tested against the generic fixpoint
//! on small inputs) but the closure path avoids materializing relations of
//! arity `|parameters| + 2`.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use crate::datalog::{
    detect_equiv_program, Atom, BodyAtom, DatalogError, DatalogProgram, DetectedEquiv, Rule,
};
use crate::eval::{eval_on, AnswerSet, Interp, VirtualRel};
use crate::model::{Database, ModelError, Value};
use crate::query::Term;
use crate::rewrite::EquivProvider;

type Facts = BTreeMap<String, BTreeSet<Vec<Value>>>;

/// Arity map over idb heads and the stored schema; also rejects idb/edb
/// clashes, inconsistent idb arities, and unknown body relations.
fn static_check(p: &DatalogProgram, d: &Database) -> Result<BTreeMap<String, usize>, DatalogError> {
    let mut arities: BTreeMap<String, usize> = d
        .schema()
        .iter()
        .map(|(k, &v)| (k.clone(), v))
        .collect();
    for rule in &p.rules {
        let name = &rule.head.relation;
        if d.arity(name).is_some() {
            return Err(DatalogError::IdbEdbClash(name.clone()));
        }
        let arity = rule.head.terms.len();
        match arities.get(name) {
            Some(&a) if a != arity => {
                return Err(ModelError::ArityConflict {
                    relation: name.clone(),
                    declared: a,
                    used: arity,
                }
                .into())
            }
            _ => {
                arities.insert(name.clone(), arity);
            }
        }
    }
    for rule in &p.rules {
        for b in &rule.body {
            if let BodyAtom::Rel(atom) = b {
                match arities.get(&atom.relation) {
                    None => return Err(ModelError::UnknownRelation(atom.relation.clone()).into()),
                    Some(&a) if a != atom.terms.len() => {
                        return Err(ModelError::ArityConflict {
                            relation: atom.relation.clone(),
                            declared: a,
                            used: atom.terms.len(),
                        }
                        .into())
                    }
                    Some(_) => {}
                }
            }
        }
    }
    Ok(arities)
}

/// Extends the environment by matching `atom` against `tuple`; returns the
/// variables newly bound, or `None` on mismatch.
fn bind(
    atom: &Atom,
    tuple: &[Value],
    env: &mut BTreeMap<String, Value>,
) -> Option<Vec<String>> {
    let mut bound = Vec::new();
    for (t, v) in atom.terms.iter().zip(tuple) {
        match t {
            Term::Const(c) => {
                if &Value::Const(c.clone()) != v {
                    for b in bound.drain(..) {
                        env.remove(&b);
                    }
                    return None;
                }
            }
            Term::Var(x) => match env.get(x) {
                Some(existing) if existing != v => {
                    for b in bound.drain(..) {
                        env.remove(&b);
                    }
                    return None;
                }
                Some(_) => {}
                None => {
                    env.insert(x.clone(), v.clone());
                    bound.push(x.clone());
                }
            },
        }
    }
    Some(bound)
}

fn resolve(t: &Term, env: &BTreeMap<String, Value>) -> Option<Value> {
    match t {
        Term::Const(c) => Some(Value::Const(c.clone())),
        Term::Var(v) => env.get(v).cloned(),
    }
}

/// Matches the rule body (in the safety-validated order) and calls `emit`
/// with each satisfying environment. When `delta_at` designates a body
/// position, that atom reads `delta` instead of the current idb state.
#[allow(clippy::too_many_arguments)]
fn match_body(
    rule: &Rule,
    order: &[usize],
    oi: usize,
    d: &Database,
    idb: &Facts,
    delta_at: Option<usize>,
    delta: &Facts,
    env: &mut BTreeMap<String, Value>,
    emit: &mut dyn FnMut(&BTreeMap<String, Value>),
) {
    if oi == order.len() {
        emit(env);
        return;
    }
    let idx = order[oi];
    match &rule.body[idx] {
        BodyAtom::Rel(atom) => {
            let source: Option<&BTreeSet<Vec<Value>>> = if delta_at == Some(idx) {
                delta.get(&atom.relation)
            } else if let Some(s) = idb.get(&atom.relation) {
                Some(s)
            } else {
                d.relation(&atom.relation)
            };
            let Some(tuples) = source else { return };
            for tuple in tuples {
                if let Some(bound) = bind(atom, tuple, env) {
                    match_body(rule, order, oi + 1, d, idb, delta_at, delta, env, emit);
                    for b in bound {
                        env.remove(&b);
                    }
                }
            }
        }
        BodyAtom::Eq(a, b) => match (resolve(a, env), resolve(b, env)) {
            (Some(va), Some(vb)) => {
                if va == vb {
                    match_body(rule, order, oi + 1, d, idb, delta_at, delta, env, emit);
                }
            }
            (Some(va), None) | (None, Some(va)) => {
                let unbound = match (a, b) {
                    (Term::Var(v), _) if env.get(v).is_none() => v.clone(),
                    (_, Term::Var(v)) => v.clone(),
                    _ => unreachable!(),
                };
                env.insert(unbound.clone(), va);
                match_body(rule, order, oi + 1, d, idb, delta_at, delta, env, emit);
                env.remove(&unbound);
            }
            (None, None) => unreachable!("body order leaves equality unbound"),
        },
    }
}

fn head_tuple(rule: &Rule, env: &BTreeMap<String, Value>) -> Vec<Value> {
    rule.head
        .terms
        .iter()
        .map(|t| resolve(t, env).expect("safety guarantees head variables are bound"))
        .collect()
}

fn rule_reads_idb(rule: &Rule, idb_names: &BTreeSet<String>) -> Vec<usize> {
    rule.body
        .iter()
        .enumerate()
        .filter_map(|(i, b)| match b {
            BodyAtom::Rel(a) if idb_names.contains(&a.relation) => Some(i),
            _ => None,
        })
        .collect()
}

/// Least fixpoint of the rules by semi-naive iteration.
pub fn eval_stratum_semi_naive(p: &DatalogProgram, d: &Database) -> Result<Facts, DatalogError> {
    let orders = p.validate()?;
    static_check(p, d)?;
    let idb_names = p.idb_relations();
    let mut state: Facts = idb_names.iter().map(|n| (n.clone(), BTreeSet::new())).collect();

    // seed: rules that read no idb relation fire exactly once
    let mut delta: Facts = idb_names.iter().map(|n| (n.clone(), BTreeSet::new())).collect();
    for (rule, order) in p.rules.iter().zip(&orders) {
        if rule_reads_idb(rule, &idb_names).is_empty() {
            let mut env = BTreeMap::new();
            let mut derived = Vec::new();
            match_body(rule, order, 0, d, &state, None, &state, &mut env, &mut |e| {
                derived.push(head_tuple(rule, e));
            });
            for t in derived {
                if state.get_mut(&rule.head.relation).unwrap().insert(t.clone()) {
                    delta.get_mut(&rule.head.relation).unwrap().insert(t);
                }
            }
        }
    }

    loop {
        let mut new_delta: Facts = idb_names
            .iter()
            .map(|n| (n.clone(), BTreeSet::new()))
            .collect();
        let mut grew = false;
        for (rule, order) in p.rules.iter().zip(&orders) {
            let idb_positions = rule_reads_idb(rule, &idb_names);
            for &pos in &idb_positions {
                let mut env = BTreeMap::new();
                let mut derived = Vec::new();
                match_body(
                    rule,
                    order,
                    0,
                    d,
                    &state,
                    Some(pos),
                    &delta,
                    &mut env,
                    &mut |e| derived.push(head_tuple(rule, e)),
                );
                for t in derived {
                    if state.get_mut(&rule.head.relation).unwrap().insert(t.clone()) {
                        new_delta.get_mut(&rule.head.relation).unwrap().insert(t);
                        grew = true;
                    }
                }
            }
        }
        if !grew {
            return Ok(state);
        }
        delta = new_delta;
    }
}

/// Naive fixpoint (re-derive everything each round); the reference the
/// semi-naive evaluator is tested against.
pub fn eval_stratum_naive(p: &DatalogProgram, d: &Database) -> Result<Facts, DatalogError> {
    let orders = p.validate()?;
    static_check(p, d)?;
    let idb_names = p.idb_relations();
    let mut state: Facts = idb_names.iter().map(|n| (n.clone(), BTreeSet::new())).collect();
    loop {
        let mut grew = false;
        for (rule, order) in p.rules.iter().zip(&orders) {
            let mut env = BTreeMap::new();
            let mut derived = Vec::new();
            match_body(rule, order, 0, d, &state, None, &state, &mut env, &mut |e| {
                derived.push(head_tuple(rule, e));
            });
            for t in derived {
                if state.get_mut(&rule.head.relation).unwrap().insert(t) {
                    grew = true;
                }
            }
        }
        if !grew {
            return Ok(state);
        }
    }
}

/// The database extended with the materialized idb relations.
pub fn materialize_stratum(p: &DatalogProgram, d: &Database) -> Result<Database, DatalogError> {
    let facts = eval_stratum_semi_naive(p, d)?;
    let mut out = d.clone();
    for rule in &p.rules {
        out.declare_relation(&rule.head.relation, rule.head.terms.len())
            .map_err(DatalogError::Model)?;
    }
    for (name, tuples) in facts {
        for t in tuples {
            out.insert_fact(&name, t).map_err(DatalogError::Model)?;
        }
    }
    Ok(out)
}

/// Evaluates a program: stratum one to a least fixpoint, then the FO layer
/// over the extended database, with quantifiers ranging over the active
/// domain of the database plus the program's constants.
pub fn eval_program(p: &DatalogProgram, d: &Database) -> Result<AnswerSet, DatalogError> {
    if p.rules.is_empty() {
        let mut interp = Interp::new(d);
        interp.add_constants(p.rule_constants());
        return eval_on(&p.fo_layer, &interp).map_err(DatalogError::Model);
    }
    p.validate()?;
    static_check(p, d)?;
    if let Some(detected) = detect_equiv_program(p) {
        return eval_with_closures(p, d, &detected);
    }
    let extended = materialize_stratum(p, d)?;
    let mut interp = Interp::new(&extended);
    interp.add_constants(p.rule_constants());
    eval_on(&p.fo_layer, &interp).map_err(DatalogError::Model)
}

fn eval_with_closures(
    p: &DatalogProgram,
    d: &Database,
    detected: &DetectedEquiv,
) -> Result<AnswerSet, DatalogError> {
    let mut dom: BTreeSet<Value> = detected
        .dom_constants
        .iter()
        .cloned()
        .map(Value::Const)
        .collect();
    for (rel, pos) in &detected.dom_positions {
        for tuple in d
            .relation(rel)
            .ok_or_else(|| ModelError::UnknownRelation(rel.clone()))?
        {
            dom.insert(tuple[*pos].clone());
        }
    }
    let dom = Rc::new(dom);

    let mut interp = Interp::new(d);
    interp.add_constants(p.rule_constants());
    {
        let dom = dom.clone();
        interp
            .add_virtual(
                detected.dom_relation.clone(),
                VirtualRel {
                    arity: 1,
                    member: Box::new(move |t: &[Value]| dom.contains(&t[0])),
                },
            )
            .map_err(DatalogError::Model)?;
    }
    for spec in &detected.equivs {
        let provider = Rc::new(
            EquivProvider::new(d, &spec.theory, &spec.egds, (*dom).clone())
                .map_err(DatalogError::Model)?,
        );
        let n = spec.theory.vars.len();
        interp
            .add_virtual(
                spec.relation.clone(),
                VirtualRel {
                    arity: n + 2,
                    member: Box::new(move |t: &[Value]| {
                        provider.holds(&t[..n], &t[n], &t[n + 1])
                    }),
                },
            )
            .map_err(DatalogError::Model)?;
    }
    eval_on(&p.fo_layer, &interp).map_err(DatalogError::Model)
}
