//! Recognition of the equivalence-relation rule template.
//!
//! Programs built by the rewriter define each `equiv` idb by the same five
//! rule shapes: reflexivity over a domain relation, one rule per equality
//! atom, transitivity, symmetry, and one rule per EGD. When a whole
//! program matches, the engine may evaluate those relations by a
//! per-assignment union-find closure instead of materializing them; the
//! two paths are interchangeable (and tested against each other).

use std::collections::{BTreeMap, BTreeSet};

use crate::datalog::{Atom, BodyAtom, DatalogProgram, Rule};
use crate::model::{Constant, Egd, EgdAtom};
use crate::query::Term;
use crate::rewrite::EqualityTheory;

#[derive(Debug, Clone)]
pub struct EquivSpec {
    pub relation: String,
    pub theory: EqualityTheory,
    pub egds: Vec<Egd>,
}

#[derive(Debug, Clone)]
pub struct DetectedEquiv {
    pub dom_relation: String,
    /// `(edb relation, column)` pairs whose values populate the domain.
    pub dom_positions: Vec<(String, usize)>,
    pub dom_constants: BTreeSet<Constant>,
    pub equivs: Vec<EquivSpec>,
}

fn head_var(t: &Term) -> Option<&String> {
    match t {
        Term::Var(v) => Some(v),
        Term::Const(_) => None,
    }
}

/// All-distinct variable heads like `E(p1, ..., pn, z, z')`.
fn distinct_vars(terms: &[Term]) -> Option<Vec<String>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for t in terms {
        let v = head_var(t)?;
        if !seen.insert(v.clone()) {
            return None;
        }
        out.push(v.clone());
    }
    Some(out)
}

struct DomShape {
    positions: Vec<(String, usize)>,
    constants: BTreeSet<Constant>,
}

/// A unary idb is domain-shaped when every defining rule is a ground fact
/// or copies one column of a single stored relation.
fn dom_shape(rules: &[&Rule], idbs: &BTreeSet<String>) -> Option<DomShape> {
    let mut positions = Vec::new();
    let mut constants = BTreeSet::new();
    for rule in rules {
        if rule.head.terms.len() != 1 {
            return None;
        }
        match (&rule.head.terms[0], rule.body.as_slice()) {
            (Term::Const(c), []) => {
                constants.insert(c.clone());
            }
            (Term::Var(x), [BodyAtom::Rel(atom)]) if !idbs.contains(&atom.relation) => {
                let vars = distinct_vars(&atom.terms)?;
                let pos = vars.iter().position(|v| v == x)?;
                positions.push((atom.relation.clone(), pos));
            }
            _ => return None,
        }
    }
    Some(DomShape {
        positions,
        constants,
    })
}

enum RuleShape {
    Reflexivity,
    Equality(Term, Term),
    Transitivity,
    Symmetry,
    EgdRule(Egd),
}

/// Matches one rule of an equiv relation `rel` with `n` parameters against
/// the template, given the domain relation name.
fn equiv_rule_shape(
    rule: &Rule,
    rel: &str,
    n: usize,
    dom: &str,
    idbs: &BTreeSet<String>,
) -> Option<RuleShape> {
    if rule.head.terms.len() != n + 2 {
        return None;
    }
    let head_params: Vec<&Term> = rule.head.terms.iter().take(n).collect();
    let params: Vec<String> = head_params
        .iter()
        .map(|t| head_var(t).cloned())
        .collect::<Option<_>>()?;
    let param_index: BTreeMap<&String, usize> =
        params.iter().enumerate().map(|(i, v)| (v, i)).collect();
    if param_index.len() != n {
        return None;
    }
    let z = head_var(&rule.head.terms[n])?;
    let z2 = head_var(&rule.head.terms[n + 1])?;

    // a body atom dom(p_i)?
    let dom_param = |b: &BodyAtom| -> Option<usize> {
        match b {
            BodyAtom::Rel(a) if a.relation == dom && a.terms.len() == 1 => match &a.terms[0] {
                Term::Var(v) => param_index.get(v).copied(),
                Term::Const(_) => None,
            },
            _ => None,
        }
    };
    // a body atom equiv(params, a, b) with the head's parameter tuple?
    let self_atom = |b: &BodyAtom| -> Option<(Term, Term)> {
        match b {
            BodyAtom::Rel(a) if a.relation == rel && a.terms.len() == n + 2 => {
                for (i, t) in a.terms.iter().take(n).enumerate() {
                    if head_var(t)? != &params[i] {
                        return None;
                    }
                }
                Some((a.terms[n].clone(), a.terms[n + 1].clone()))
            }
            _ => None,
        }
    };

    // reflexivity: E(p, z, z) :- dom(p1), ..., dom(pn), dom(z).
    if z == z2 && rule.body.len() == n + 1 {
        let mut covered = BTreeSet::new();
        let mut z_covered = false;
        let mut all_dom = true;
        for b in &rule.body {
            if let Some(i) = dom_param(b) {
                covered.insert(i);
            } else if matches!(b, BodyAtom::Rel(a) if a.relation == dom && a.terms == [Term::Var(z.clone())])
            {
                z_covered = true;
            } else {
                all_dom = false;
            }
        }
        if all_dom && z_covered && covered.len() == n {
            return Some(RuleShape::Reflexivity);
        }
    }
    if z == z2 {
        return None;
    }

    // transitivity: E(p, z, z') :- E(p, z, u), E(p, u, z').
    if rule.body.len() == 2 {
        if let (Some((a1, b1)), Some((a2, b2))) =
            (self_atom(&rule.body[0]), self_atom(&rule.body[1]))
        {
            if let (Some(x1), Some(u1), Some(u2), Some(x2)) =
                (head_var(&a1), head_var(&b1), head_var(&a2), head_var(&b2))
            {
                if x1 == z && x2 == z2 && u1 == u2 && !param_index.contains_key(u1) {
                    return Some(RuleShape::Transitivity);
                }
            }
        }
    }
    // symmetry: E(p, z, z') :- E(p, z', z).
    if rule.body.len() == 1 {
        if let Some((a, b)) = self_atom(&rule.body[0]) {
            if head_var(&a) == Some(z2) && head_var(&b) == Some(z) {
                return Some(RuleShape::Symmetry);
            }
        }
    }

    // equality rule: E(p, z, z') :- z = A, z' = B, dom(p1), ..., dom(pn).
    if rule.body.len() == n + 2 {
        let mut z_def = None;
        let mut z2_def = None;
        let mut covered = BTreeSet::new();
        let mut clean = true;
        for b in &rule.body {
            match b {
                BodyAtom::Eq(Term::Var(v), rhs) if v == z && z_def.is_none() => {
                    z_def = Some(rhs.clone())
                }
                BodyAtom::Eq(Term::Var(v), rhs) if v == z2 && z2_def.is_none() => {
                    z2_def = Some(rhs.clone())
                }
                other => match dom_param(other) {
                    Some(i) => {
                        covered.insert(i);
                    }
                    None => clean = false,
                },
            }
        }
        if clean && covered.len() == n {
            if let (Some(a), Some(b)) = (z_def, z2_def) {
                // sides must be parameters or constants, canonicalized to y{i+1}
                let side = |t: &Term| -> Option<Term> {
                    match t {
                        Term::Var(v) => param_index.get(v).map(|i| Term::var(format!("y{}", i + 1))),
                        Term::Const(c) => Some(Term::Const(c.clone())),
                    }
                };
                if let (Some(a), Some(b)) = (side(&a), side(&b)) {
                    return Some(RuleShape::Equality(a, b));
                }
            }
        }
    }

    // EGD rule: E(p, z, z') :- atoms..., E(p, w, w'), ..., dom(p1), ...
    {
        let mut atoms: Vec<EgdAtom> = Vec::new();
        let mut psi: Vec<(String, String)> = Vec::new();
        let mut covered = BTreeSet::new();
        for b in &rule.body {
            if let Some(i) = dom_param(b) {
                covered.insert(i);
            } else if let Some((w, w2)) = self_atom(b) {
                psi.push((head_var(&w)?.clone(), head_var(&w2)?.clone()));
            } else if let BodyAtom::Rel(Atom { relation, terms }) = b {
                if idbs.contains(relation) {
                    return None;
                }
                atoms.push(EgdAtom {
                    relation: relation.clone(),
                    vars: distinct_vars(terms)?,
                });
            } else {
                return None;
            }
        }
        if covered.len() == n && !atoms.is_empty() {
            let egd = Egd::new(atoms, psi, (z.clone(), z2.clone())).ok()?;
            return Some(RuleShape::EgdRule(egd));
        }
    }
    None
}

/// Tries to recognize the whole program as domain rules plus
/// equivalence-template relations. Any deviation returns `None` and the
/// engine falls back to generic materialization.
pub fn detect_equiv_program(p: &DatalogProgram) -> Option<DetectedEquiv> {
    let idbs = p.idb_relations();
    let mut by_head: BTreeMap<&String, Vec<&Rule>> = BTreeMap::new();
    for rule in &p.rules {
        by_head.entry(&rule.head.relation).or_default().push(rule);
    }

    let dom_shapes: BTreeMap<&String, DomShape> = by_head
        .iter()
        .filter_map(|(name, rules)| dom_shape(rules, &idbs).map(|s| (*name, s)))
        .collect();

    let mut equivs = Vec::new();
    let mut dom_used: Option<&String> = None;
    for (name, rules) in &by_head {
        if dom_shapes.contains_key(*name) {
            continue;
        }
        let n = rules[0].head.terms.len().checked_sub(2)?;
        // the dom relation is named by the reflexivity rule's body
        let dom = dom_used.or_else(|| {
            rules.iter().find_map(|r| {
                r.body.iter().find_map(|b| match b {
                    BodyAtom::Rel(a) if dom_shapes.contains_key(&a.relation) => by_head
                        .keys()
                        .find(|k| ***k == a.relation)
                        .copied(),
                    _ => None,
                })
            })
        })?;
        match dom_used {
            None => dom_used = Some(dom),
            Some(d) if d != dom => return None,
            Some(_) => {}
        }

        let mut has_refl = 0;
        let mut has_trans = 0;
        let mut has_sym = 0;
        let mut equalities = Vec::new();
        let mut egds = Vec::new();
        for rule in rules.iter() {
            match equiv_rule_shape(rule, name, n, dom, &idbs)? {
                RuleShape::Reflexivity => has_refl += 1,
                RuleShape::Transitivity => has_trans += 1,
                RuleShape::Symmetry => has_sym += 1,
                RuleShape::Equality(a, b) => equalities.push((a, b)),
                RuleShape::EgdRule(e) => egds.push(e),
            }
        }
        if has_refl != 1 || has_trans != 1 || has_sym != 1 {
            return None;
        }
        let vars = (1..=n).map(|i| format!("y{i}")).collect();
        equivs.push(EquivSpec {
            relation: (*name).clone(),
            theory: EqualityTheory::new(vars, equalities),
            egds,
        });
    }
    if equivs.is_empty() {
        return None;
    }
    let dom_name = dom_used?;
    let dom = &dom_shapes[dom_name];

    // the closure's element set is the dom set, so every theory constant
    // and every EGD-matched value must land in it
    let dom_relations: BTreeSet<&String> = dom.positions.iter().map(|(r, _)| r).collect();
    for spec in &equivs {
        if !spec
            .theory
            .constants()
            .iter()
            .all(|c| dom.constants.contains(c))
        {
            return None;
        }
        for egd in &spec.egds {
            for atom in egd.body() {
                if !dom_relations.contains(&atom.relation) {
                    return None;
                }
                for i in 0..atom.vars.len() {
                    if !dom.positions.contains(&(atom.relation.clone(), i)) {
                        return None;
                    }
                }
            }
        }
    }
    Some(DetectedEquiv {
        dom_relation: dom_name.clone(),
        dom_positions: dom.positions.clone(),
        dom_constants: dom.constants.clone(),
        equivs,
    })
}
