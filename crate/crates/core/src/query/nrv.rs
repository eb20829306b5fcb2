//! Normal forms: the non-repeating-variable (NRV) form for conjunctive
//! queries, disjunctive normal form over CQ literals for BCCQs, and EGD
//! normalization.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Constant, Egd, EgdAtom};
use crate::query::{Formula, QueryClass, QueryError, Term};

/// A conjunctive query in NRV normal form:
/// `Q(x) = exists w (q(w) & e(x, w))` where the relational subquery `q`
/// uses each of the pairwise-distinct variables `w` at most once and
/// carries no constants, while the equality subquery `e` may use constants
/// and mentions every variable of `x` at least once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NrvCq {
    /// Answer variables, in canonical (sorted) order.
    pub free_vars: Vec<String>,
    /// The quantified variables, one per atom position, in atom order.
    pub rel_vars: Vec<String>,
    /// Relational subquery: each variable occurs exactly once overall.
    pub rel_atoms: Vec<(String, Vec<String>)>,
    /// Equality subquery over `free_vars`, `rel_vars` and constants.
    pub equalities: Vec<(Term, Term)>,
}

impl NrvCq {
    /// The CQ as a formula, for evaluation and printing.
    pub fn to_formula(&self) -> Formula {
        let mut parts: Vec<Formula> = self
            .rel_atoms
            .iter()
            .map(|(rel, vars)| {
                Formula::rel(
                    rel.clone(),
                    vars.iter().map(|v| Term::Var(v.clone())).collect(),
                )
            })
            .collect();
        parts.extend(
            self.equalities
                .iter()
                .map(|(a, b)| Formula::Eq(a.clone(), b.clone())),
        );
        Formula::exists(self.rel_vars.clone(), Formula::and(parts))
    }

    /// Constants of the equality subquery (its active domain).
    pub fn constants(&self) -> BTreeSet<Constant> {
        self.equalities
            .iter()
            .flat_map(|(a, b)| [a, b])
            .filter_map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect()
    }

    /// Pads the equality subquery with dummy `c = c` atoms until its
    /// constant set covers `target`.
    pub fn pad_constants(&mut self, target: &BTreeSet<Constant>) {
        let have = self.constants();
        for c in target {
            if !have.contains(c) {
                self.equalities
                    .push((Term::Const(c.clone()), Term::Const(c.clone())));
            }
        }
    }

    /// Checks the structural invariants of the normal form.
    pub fn validate(&self) -> Result<(), QueryError> {
        let mut seen = BTreeSet::new();
        for (_, vars) in &self.rel_atoms {
            for v in vars {
                if !seen.insert(v.clone()) {
                    return Err(QueryError::Unsupported(format!(
                        "NRV violation: variable {v} repeats in the relational subquery"
                    )));
                }
                if self.free_vars.contains(v) {
                    return Err(QueryError::Unsupported(format!(
                        "NRV violation: {v} is both free and relational"
                    )));
                }
            }
        }
        let eq_vars: BTreeSet<&String> = self
            .equalities
            .iter()
            .flat_map(|(a, b)| [a, b])
            .filter_map(|t| match t {
                Term::Var(v) => Some(v),
                Term::Const(_) => None,
            })
            .collect();
        for x in &self.free_vars {
            if !eq_vars.contains(x) {
                return Err(QueryError::Unsupported(format!(
                    "NRV violation: free variable {x} occurs in no equality"
                )));
            }
        }
        Ok(())
    }

    /// The trivial, always-true CQ over the given answer variables: no
    /// relational atoms and one dummy equality `x = x` per variable.
    pub fn trivial(answer_vars: &[String]) -> NrvCq {
        NrvCq {
            free_vars: answer_vars.to_vec(),
            rel_vars: Vec::new(),
            rel_atoms: Vec::new(),
            equalities: answer_vars
                .iter()
                .map(|x| (Term::var(x.clone()), Term::var(x.clone())))
                .collect(),
        }
    }
}

/// A BCCQ in disjunctive normal form over NRV CQs: each disjunct is one
/// positive CQ plus a list of negated CQs, all over the same answer
/// variables and, within a disjunct, the same constant set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnfBccq {
    pub answer_vars: Vec<String>,
    pub disjuncts: Vec<DnfDisjunct>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnfDisjunct {
    pub positive: NrvCq,
    pub negated: Vec<NrvCq>,
}

impl DnfBccq {
    /// The whole BCCQ as a formula.
    pub fn to_formula(&self) -> Formula {
        Formula::or(
            self.disjuncts
                .iter()
                .map(|d| {
                    let mut parts = vec![d.positive.to_formula()];
                    parts.extend(d.negated.iter().map(|n| Formula::not(n.to_formula())));
                    Formula::and(parts)
                })
                .collect(),
        )
    }
}

fn fresh_name(base: &str, n: usize, taken: &BTreeSet<String>) -> String {
    let mut i = n;
    loop {
        let name = format!("{base}{i}");
        if !taken.contains(&name) {
            return name;
        }
        i += 1;
    }
}

/// A conjunctive query flattened to prenex shape: bound variables renamed
/// apart, atoms and equalities collected.
struct FlatCq {
    atoms: Vec<(String, Vec<Term>)>,
    equalities: Vec<(Term, Term)>,
    bound: BTreeSet<String>,
}

fn flatten_cq(f: &Formula) -> Result<FlatCq, QueryError> {
    fn go(
        f: &Formula,
        scope: &BTreeMap<String, String>,
        counter: &mut usize,
        out: &mut FlatCq,
    ) -> Result<(), QueryError> {
        let term = |t: &Term, scope: &BTreeMap<String, String>| match t {
            Term::Var(v) => Term::Var(scope.get(v).cloned().unwrap_or_else(|| v.clone())),
            Term::Const(_) => t.clone(),
        };
        match f {
            Formula::Rel { relation, terms } => {
                out.atoms
                    .push((relation.clone(), terms.iter().map(|t| term(t, scope)).collect()));
                Ok(())
            }
            Formula::Eq(a, b) => {
                out.equalities.push((term(a, scope), term(b, scope)));
                Ok(())
            }
            Formula::And(fs) => {
                for g in fs {
                    go(g, scope, counter, out)?;
                }
                Ok(())
            }
            Formula::Exists(vs, g) => {
                let mut inner = scope.clone();
                for v in vs {
                    *counter += 1;
                    let fresh = format!("__b{counter}");
                    out.bound.insert(fresh.clone());
                    inner.insert(v.clone(), fresh);
                }
                go(g, &inner, counter, out)
            }
            other => Err(QueryError::WrongClass {
                expected: QueryClass::Cq,
                found: other.classify(),
            }),
        }
    }
    let mut out = FlatCq {
        atoms: Vec::new(),
        equalities: Vec::new(),
        bound: BTreeSet::new(),
    };
    go(f, &BTreeMap::new(), &mut 0, &mut out)?;
    Ok(out)
}

/// Rewrites a conjunctive query into NRV normal form: one fresh variable
/// per atom position, with equalities chaining co-occurrences of the same
/// variable and binding constants.
///
/// A free variable that occurs in no relational atom is rejected.
pub fn to_nrv(q: &Formula) -> Result<NrvCq, QueryError> {
    if q.classify() > QueryClass::Cq {
        return Err(QueryError::WrongClass {
            expected: QueryClass::Cq,
            found: q.classify(),
        });
    }
    let free: Vec<String> = q.answer_vars();
    let nrv = nrv_core(q, &free)?;
    for x in &free {
        // strict contract: every free variable must reach a relational atom,
        // which nrv_core records as an equality w = x
        if !nrv.rel_link.contains(x) {
            return Err(QueryError::Unsupported(format!(
                "free variable {x} occurs in no relational atom"
            )));
        }
    }
    nrv.cq.validate()?;
    Ok(nrv.cq)
}

struct NrvBuild {
    cq: NrvCq,
    /// Free variables that occur in at least one relational atom.
    rel_link: BTreeSet<String>,
}

fn nrv_core(q: &Formula, free: &[String]) -> Result<NrvBuild, QueryError> {
    let flat = flatten_cq(q)?;
    let taken: BTreeSet<String> = free.iter().cloned().collect();

    let mut rel_vars = Vec::new();
    let mut rel_atoms = Vec::new();
    let mut equalities: Vec<(Term, Term)> = Vec::new();
    // per original variable: the w variables of its occurrences, in order
    let mut occurrences: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut const_bindings: Vec<(String, Constant)> = Vec::new();
    let mut order: Vec<String> = Vec::new();

    let mut next_w = 1usize;
    for (rel, terms) in &flat.atoms {
        let mut vars = Vec::new();
        for t in terms {
            let w = fresh_name("w", next_w, &taken);
            next_w += 1;
            rel_vars.push(w.clone());
            match t {
                Term::Var(v) => {
                    if !occurrences.contains_key(v) {
                        order.push(v.clone());
                    }
                    occurrences.entry(v.clone()).or_default().push(w.clone());
                }
                Term::Const(c) => const_bindings.push((w.clone(), c.clone())),
            }
            vars.push(w);
        }
        rel_atoms.push((rel.clone(), vars));
    }

    // constant bindings in position order
    for (w, c) in const_bindings {
        equalities.push((Term::Var(w), Term::Const(c)));
    }
    // chains and free-variable links, in first-occurrence order
    let mut rel_link = BTreeSet::new();
    for v in &order {
        let ws = &occurrences[v];
        for pair in ws.windows(2) {
            equalities.push((Term::var(pair[0].clone()), Term::var(pair[1].clone())));
        }
        if !flat.bound.contains(v) {
            equalities.push((Term::var(ws[0].clone()), Term::var(v.clone())));
            rel_link.insert(v.clone());
        }
    }
    // original equality atoms, with bound variables redirected to their
    // first atom occurrence
    for (a, b) in &flat.equalities {
        let side = |t: &Term| -> Result<Term, QueryError> {
            match t {
                Term::Var(v) if flat.bound.contains(v) => match occurrences.get(v) {
                    Some(ws) => Ok(Term::var(ws[0].clone())),
                    None => Err(QueryError::Unsupported(
                        "quantified variable occurs only in equalities".to_string(),
                    )),
                },
                other => Ok(other.clone()),
            }
        };
        equalities.push((side(a)?, side(b)?));
    }

    Ok(NrvBuild {
        cq: NrvCq {
            free_vars: free.to_vec(),
            rel_vars,
            rel_atoms,
            equalities,
        },
        rel_link,
    })
}

/// NRV conversion for a DNF literal: free variables may live in equalities
/// only, and any answer variable the literal does not mention is padded
/// with a dummy `x = x`.
fn nrv_literal(cq: &Formula, answer_vars: &[String]) -> Result<NrvCq, QueryError> {
    let own_free: Vec<String> = cq.answer_vars();
    let build = nrv_core(cq, &own_free)?;
    let mut out = build.cq;
    out.free_vars = answer_vars.to_vec();
    for x in answer_vars {
        if !own_free.contains(x) {
            out.equalities.push((Term::var(x.clone()), Term::var(x.clone())));
        }
    }
    out.validate()?;
    Ok(out)
}

type Lit = (Vec<Formula>, Vec<Formula>);

fn cross(acc: Vec<Lit>, parts: Vec<Lit>) -> Vec<Lit> {
    let mut out = Vec::new();
    for (apos, aneg) in &acc {
        for (bpos, bneg) in &parts {
            let mut pos = apos.clone();
            pos.extend(bpos.iter().cloned());
            let mut neg = aneg.clone();
            neg.extend(bneg.iter().cloned());
            out.push((pos, neg));
        }
    }
    out
}

fn dnf_pos(f: &Formula) -> Vec<Lit> {
    if f.classify() <= QueryClass::Cq {
        return vec![(vec![f.clone()], vec![])];
    }
    match f {
        Formula::Or(fs) => fs.iter().flat_map(dnf_pos).collect(),
        Formula::And(fs) => {
            let mut acc = vec![(vec![], vec![])];
            for g in fs {
                acc = cross(acc, dnf_pos(g));
            }
            acc
        }
        Formula::Not(g) => dnf_neg(g),
        Formula::Exists(vs, body) => dnf_pos(body)
            .into_iter()
            .map(|(pos, neg)| {
                debug_assert!(neg.is_empty());
                (
                    vec![Formula::exists(vs.clone(), Formula::and(pos))],
                    vec![],
                )
            })
            .collect(),
        _ => unreachable!("dnf_pos on non-BCCQ"),
    }
}

fn dnf_neg(f: &Formula) -> Vec<Lit> {
    if f.classify() <= QueryClass::Cq {
        return vec![(vec![], vec![f.clone()])];
    }
    match f {
        Formula::And(fs) => fs.iter().flat_map(dnf_neg).collect(),
        Formula::Or(fs) => {
            let mut acc = vec![(vec![], vec![])];
            for g in fs {
                acc = cross(acc, dnf_neg(g));
            }
            acc
        }
        Formula::Not(g) => dnf_pos(g),
        Formula::Exists(vs, body) => {
            let negs = dnf_pos(body)
                .into_iter()
                .map(|(pos, neg)| {
                    debug_assert!(neg.is_empty());
                    Formula::exists(vs.clone(), Formula::and(pos))
                })
                .collect();
            vec![(vec![], negs)]
        }
        _ => unreachable!("dnf_neg on non-BCCQ"),
    }
}

/// Renames the quantified variables of a literal to `w{counter}` names
/// that are globally unique across the whole DNF, so that literals can be
/// nested under each other's quantifiers in rewritings.
fn renumber_rel_vars(mut cq: NrvCq, counter: &mut usize, taken: &BTreeSet<String>) -> NrvCq {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    let mut new_vars = Vec::new();
    for old in &cq.rel_vars {
        let name = loop {
            *counter += 1;
            let candidate = format!("w{counter}");
            if !taken.contains(&candidate) {
                break candidate;
            }
        };
        map.insert(old.clone(), name.clone());
        new_vars.push(name);
    }
    cq.rel_vars = new_vars;
    for (_, vars) in &mut cq.rel_atoms {
        for v in vars {
            if let Some(n) = map.get(v) {
                *v = n.clone();
            }
        }
    }
    for (a, b) in &mut cq.equalities {
        for t in [a, b] {
            if let Term::Var(v) = t {
                if let Some(n) = map.get(v) {
                    *t = Term::var(n.clone());
                }
            }
        }
    }
    cq
}

/// Puts a BCCQ (or its negation, when `negate` is set) into DNF normal
/// form over NRV CQs: each disjunct carries exactly one positive CQ
/// (conjoining multiple positives, or the trivial CQ when there are none)
/// plus the negated CQs, with per-disjunct constant sets aligned. The
/// quantified variables of distinct literals never share names.
pub fn to_dnf_bccq(q: &Formula, negate: bool) -> Result<DnfBccq, QueryError> {
    if q.classify() > QueryClass::Bccq {
        return Err(QueryError::WrongClass {
            expected: QueryClass::Bccq,
            found: q.classify(),
        });
    }
    let answer_vars: Vec<String> = q.answer_vars();
    let taken: BTreeSet<String> = answer_vars.iter().cloned().collect();
    let mut counter = 0usize;
    let lits = if negate { dnf_neg(q) } else { dnf_pos(q) };

    let mut disjuncts = Vec::new();
    for (pos, neg) in lits {
        let positive = if pos.is_empty() {
            NrvCq::trivial(&answer_vars)
        } else {
            renumber_rel_vars(
                nrv_literal(&Formula::and(pos), &answer_vars)?,
                &mut counter,
                &taken,
            )
        };
        let negated: Vec<NrvCq> = neg
            .iter()
            .map(|c| {
                nrv_literal(c, &answer_vars).map(|cq| renumber_rel_vars(cq, &mut counter, &taken))
            })
            .collect::<Result<_, _>>()?;

        // align the constant sets within the disjunct
        let mut all_consts = positive.constants();
        for n in &negated {
            all_consts.extend(n.constants());
        }
        let mut positive = positive;
        positive.pad_constants(&all_consts);
        let mut negated = negated;
        for n in &mut negated {
            n.pad_constants(&all_consts);
        }
        disjuncts.push(DnfDisjunct { positive, negated });
    }
    Ok(DnfBccq {
        answer_vars,
        disjuncts,
    })
}

/// A raw EGD as parsed: body atoms may repeat variables and come with
/// explicit equalities; the head is a pair of terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEgd {
    pub body_atoms: Vec<(String, Vec<Term>)>,
    pub body_equalities: Vec<(Term, Term)>,
    pub head: (Term, Term),
}

/// Normalizes an EGD so that no variable occurs twice across body atoms:
/// each atom position gets a fresh variable and repetitions become
/// equalities. Constants anywhere in an EGD are unsupported.
pub fn normalize_egd(raw: &RawEgd) -> Result<Egd, QueryError> {
    let mut body = Vec::new();
    let mut occurrences: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut order = Vec::new();
    let mut next = 1usize;
    for (rel, terms) in &raw.body_atoms {
        let mut vars = Vec::new();
        for t in terms {
            let u = format!("u{next}");
            next += 1;
            match t {
                Term::Var(v) => {
                    if !occurrences.contains_key(v) {
                        order.push(v.clone());
                    }
                    occurrences.entry(v.clone()).or_default().push(u.clone());
                }
                Term::Const(_) => return Err(QueryError::ConstantInEgd),
            }
            vars.push(u);
        }
        body.push(EgdAtom {
            relation: rel.clone(),
            vars,
        });
    }

    let mut equalities = Vec::new();
    for v in &order {
        for pair in occurrences[v].windows(2) {
            equalities.push((pair[0].clone(), pair[1].clone()));
        }
    }
    let resolve = |t: &Term| -> Result<String, QueryError> {
        match t {
            Term::Var(v) => occurrences
                .get(v)
                .map(|ws| ws[0].clone())
                .ok_or_else(|| QueryError::EgdVarNotInBody(v.clone())),
            Term::Const(_) => Err(QueryError::ConstantInEgd),
        }
    };
    for (a, b) in &raw.body_equalities {
        equalities.push((resolve(a)?, resolve(b)?));
    }
    let head = (resolve(&raw.head.0)?, resolve(&raw.head.1)?);
    Ok(Egd::new(body, equalities, head)?)
}

/// Parses and normalizes a constraint file.
pub fn parse_egds(text: &str) -> Result<Vec<Egd>, QueryError> {
    crate::query::parse_raw_egds(text)?
        .iter()
        .map(normalize_egd)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_query;

    #[test]
    fn nrv_of_join_query() {
        // exists y (R(y) & S(y, x)) becomes
        // exists w1 w2 w3 (R(w1) & S(w2, w3) & w1 = w2 & w3 = x)
        let q = parse_query("exists y (R(y) & S(y, x))").unwrap();
        let nrv = to_nrv(&q).unwrap();
        assert_eq!(nrv.free_vars, vec!["x"]);
        assert_eq!(nrv.rel_vars, vec!["w1", "w2", "w3"]);
        assert_eq!(
            nrv.rel_atoms,
            vec![
                ("R".to_string(), vec!["w1".to_string()]),
                ("S".to_string(), vec!["w2".to_string(), "w3".to_string()]),
            ]
        );
        assert_eq!(
            nrv.equalities,
            vec![
                (Term::var("w1"), Term::var("w2")),
                (Term::var("w3"), Term::var("x")),
            ]
        );
    }

    #[test]
    fn nrv_of_single_atom() {
        let q = parse_query("R(x)").unwrap();
        let nrv = to_nrv(&q).unwrap();
        assert_eq!(nrv.rel_atoms, vec![("R".to_string(), vec!["w1".to_string()])]);
        assert_eq!(nrv.equalities, vec![(Term::var("w1"), Term::var("x"))]);
    }

    #[test]
    fn nrv_extracts_constants() {
        let q = parse_query("R(1, x)").unwrap();
        let nrv = to_nrv(&q).unwrap();
        assert_eq!(
            nrv.equalities,
            vec![
                (Term::var("w1"), Term::int(1)),
                (Term::var("w2"), Term::var("x")),
            ]
        );
    }

    #[test]
    fn nrv_rejects_free_variable_without_atom() {
        let q = parse_query("R(x) & x = y").unwrap();
        assert!(matches!(to_nrv(&q), Err(QueryError::Unsupported(_))));
    }

    #[test]
    fn nrv_renames_shadowed_bound_variables() {
        let q = parse_query("exists y (R(y)) & exists y (S(y, x))").unwrap();
        let nrv = to_nrv(&q).unwrap();
        // the two `y`s are distinct, so no chain between w1 and w2
        assert_eq!(
            nrv.equalities,
            vec![(Term::var("w3"), Term::var("x"))]
        );
    }

    #[test]
    fn dnf_of_difference_query() {
        let q = parse_query("R(x, y) - (R(x, y) & x = y)").unwrap();
        let dnf = to_dnf_bccq(&q, false).unwrap();
        assert_eq!(dnf.disjuncts.len(), 1);
        assert_eq!(dnf.disjuncts[0].positive.rel_atoms.len(), 1);
        assert_eq!(dnf.disjuncts[0].negated.len(), 1);
    }

    #[test]
    fn negated_dnf_of_cq_uses_trivial_positive() {
        let q = parse_query("R(x)").unwrap();
        let dnf = to_dnf_bccq(&q, true).unwrap();
        assert_eq!(dnf.disjuncts.len(), 1);
        let d = &dnf.disjuncts[0];
        assert!(d.positive.rel_atoms.is_empty());
        assert_eq!(d.positive.equalities, vec![(Term::var("x"), Term::var("x"))]);
        assert_eq!(d.negated.len(), 1);
    }

    #[test]
    fn dnf_pads_missing_answer_variables() {
        let q = parse_query("R(x, y) | U(x)").unwrap();
        let dnf = to_dnf_bccq(&q, false).unwrap();
        assert_eq!(dnf.answer_vars, vec!["x", "y"]);
        let u_disjunct = &dnf.disjuncts[1];
        assert!(u_disjunct
            .positive
            .equalities
            .contains(&(Term::var("y"), Term::var("y"))));
    }

    #[test]
    fn dnf_aligns_constants_within_disjunct() {
        let q = parse_query("R(x) - (S(x) & x = 1)").unwrap();
        let dnf = to_dnf_bccq(&q, false).unwrap();
        let d = &dnf.disjuncts[0];
        assert_eq!(d.positive.constants(), d.negated[0].constants());
    }

    #[test]
    fn normalize_key_egd() {
        let raw = crate::query::parse_raw_egds("R(x, y) & R(x, z) -> y = z .").unwrap();
        let egd = normalize_egd(&raw[0]).unwrap();
        assert_eq!(egd.body().len(), 2);
        assert_eq!(egd.equalities(), &[("u1".to_string(), "u3".to_string())]);
        assert_eq!(egd.head(), ("u2", "u4"));
    }

    #[test]
    fn normalize_is_idempotent_on_normalized_input() {
        let raw1 = crate::query::parse_raw_egds("R(x, y) & R(x, z) -> y = z .").unwrap();
        let egd1 = normalize_egd(&raw1[0]).unwrap();
        let raw2 = crate::query::parse_raw_egds(&egd1.to_string()).unwrap();
        let egd2 = normalize_egd(&raw2[0]).unwrap();
        assert_eq!(egd1, egd2);
    }

    #[test]
    fn reflexive_head_is_rejected() {
        let raw = crate::query::parse_raw_egds("R(x, x) -> x = x .").unwrap();
        assert!(matches!(
            normalize_egd(&raw[0]),
            Err(QueryError::Model(_))
        ));
    }

    #[test]
    fn constants_in_egd_are_unsupported() {
        let raw = crate::query::parse_raw_egds("R(x, 1) -> x = x .").unwrap();
        assert!(matches!(
            normalize_egd(&raw[0]),
            Err(QueryError::ConstantInEgd)
        ));
    }
}
