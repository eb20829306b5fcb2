//! Equality theories and their induced equivalence of database elements.
//!
//! A theory is a conjunction of equality atoms `gamma(y)` over parameter
//! variables and constants. For a database `D`, EGDs `sigma`, and an
//! assignment `t` of the parameters, the induced relation holds between
//! elements that every consistent valuation satisfying `gamma(t)` must
//! collapse. It is computed here by a union-find closure saturated under
//! the EGDs, and (when `sigma` is empty) also expressed purely in FO as a
//! disjunction over bounded chains of syntactically equated elements.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::rc::Rc;

use crate::model::{Constant, Database, Egd, ModelError, Value};
use crate::query::{Formula, NrvCq, Term};

/// A conjunction of equality atoms over ordered parameter variables and
/// constants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EqualityTheory {
    /// The parameter tuple (for a CQ in NRV form: answer variables then
    /// relational variables).
    pub vars: Vec<String>,
    /// Equality atoms; every variable mentioned must be a parameter.
    pub equalities: Vec<(Term, Term)>,
}

impl EqualityTheory {
    pub fn new(vars: Vec<String>, equalities: Vec<(Term, Term)>) -> EqualityTheory {
        let known: BTreeSet<&String> = vars.iter().collect();
        for (a, b) in &equalities {
            for t in [a, b] {
                if let Term::Var(v) = t {
                    assert!(known.contains(v), "equality variable {v} is not a parameter");
                }
            }
        }
        EqualityTheory { vars, equalities }
    }

    /// The equality subquery of an NRV CQ, with parameters `x w`.
    pub fn from_nrv(cq: &NrvCq) -> EqualityTheory {
        let mut vars = cq.free_vars.clone();
        vars.extend(cq.rel_vars.iter().cloned());
        EqualityTheory::new(vars, cq.equalities.clone())
    }

    /// Constants of the theory (its active domain).
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

    /// The syntactic equivalence `~`: the reflexive symmetric transitive
    /// closure of the equality atoms, over the variables and constants
    /// that occur in them. Returned as a list of classes.
    pub fn sim_classes(&self) -> Vec<BTreeSet<Term>> {
        let mut elems: Vec<Term> = Vec::new();
        let mut index: BTreeMap<Term, usize> = BTreeMap::new();
        let add = |t: &Term, elems: &mut Vec<Term>, index: &mut BTreeMap<Term, usize>| {
            if !index.contains_key(t) {
                index.insert(t.clone(), elems.len());
                elems.push(t.clone());
            }
        };
        for (a, b) in &self.equalities {
            add(a, &mut elems, &mut index);
            add(b, &mut elems, &mut index);
        }
        let mut uf = UnionFind::new(elems.len());
        for (a, b) in &self.equalities {
            uf.union(index[a], index[b]);
        }
        let mut classes: BTreeMap<usize, BTreeSet<Term>> = BTreeMap::new();
        for (t, &i) in &index {
            classes.entry(uf.find(i)).or_default().insert(t.clone());
        }
        classes.into_values().collect()
    }

    /// Instantiates the equality atoms at an assignment of the parameters,
    /// then checks them under a valuation of nulls. This is the semantic
    /// ground truth the closures and rewritings are tested against.
    pub fn holds_under(
        &self,
        assignment: &[Value],
        valuation: &crate::model::Valuation,
    ) -> Result<bool, ModelError> {
        assert_eq!(assignment.len(), self.vars.len());
        let resolve = |t: &Term| -> &Value {
            match t {
                Term::Var(v) => {
                    let i = self.vars.iter().position(|x| x == v).unwrap();
                    &assignment[i]
                }
                Term::Const(_) => unreachable!(),
            }
        };
        for (a, b) in &self.equalities {
            let va = match a {
                Term::Const(c) => Value::Const(c.clone()),
                _ => valuation.apply_value(resolve(a))?,
            };
            let vb = match b {
                Term::Const(c) => Value::Const(c.clone()),
                _ => valuation.apply_value(resolve(b))?,
            };
            if va != vb {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// A partition of a fixed element set; the result of a closure.
#[derive(Debug, Clone)]
pub struct Partition {
    elems: Vec<Value>,
    root: Vec<usize>,
}

impl Partition {
    fn index(&self, v: &Value) -> Option<usize> {
        self.elems.binary_search(v).ok()
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.index(v).is_some()
    }

    /// Whether the two elements are in the same class; `None` when either
    /// is outside the element set.
    pub fn same(&self, a: &Value, b: &Value) -> Option<bool> {
        Some(self.root[self.index(a)?] == self.root[self.index(b)?])
    }

    pub fn classes(&self) -> Vec<BTreeSet<Value>> {
        let mut by_root: BTreeMap<usize, BTreeSet<Value>> = BTreeMap::new();
        for (i, v) in self.elems.iter().enumerate() {
            by_root.entry(self.root[i]).or_default().insert(v.clone());
        }
        by_root.into_values().collect()
    }

    /// All related pairs `(a, b)` with `a != b`.
    pub fn nontrivial_pairs(&self) -> Vec<(Value, Value)> {
        let mut out = Vec::new();
        for class in self.classes() {
            let vs: Vec<&Value> = class.iter().collect();
            for i in 0..vs.len() {
                for j in 0..vs.len() {
                    if i != j {
                        out.push((vs[i].clone(), vs[j].clone()));
                    }
                }
            }
        }
        out
    }

    /// Whether every class of `self` is contained in a class of `other`
    /// (restricted to shared elements): the support-inclusion test behind
    /// the `imply` formula.
    pub fn refines(&self, other: &Partition) -> bool {
        for class in self.classes() {
            let mut first: Option<&Value> = None;
            for v in &class {
                match first {
                    None => first = Some(v),
                    Some(f) => {
                        if other.same(f, v) != Some(true) {
                            return false;
                        }
                    }
                }
            }
        }
        true
    }
}

/// Term compiled against a parameter tuple: a position or a fixed value.
#[derive(Debug, Clone)]
enum Slot {
    Pos(usize),
    Val(Value),
}

struct EgdMatch {
    head: (Value, Value),
    psi: Vec<(Value, Value)>,
}

/// Computes, per parameter assignment, the equivalence of database
/// elements induced by an equality theory and a set of EGDs: the
/// union-find closure of the instantiated equalities, saturated under the
/// EGDs. Results are cached per assignment.
pub struct EquivProvider {
    theory_arity: usize,
    elems: Vec<Value>,
    eq_slots: Vec<(Slot, Slot)>,
    egd_matches: Vec<EgdMatch>,
    cache: RefCell<HashMap<Vec<Value>, Rc<Partition>>>,
}

impl EquivProvider {
    /// `elements` must cover the active domain of `db` (so that EGD
    /// matches resolve) and the constants of the theory.
    pub fn new(
        db: &Database,
        theory: &EqualityTheory,
        sigma: &[Egd],
        elements: BTreeSet<Value>,
    ) -> Result<EquivProvider, ModelError> {
        let elems: Vec<Value> = elements.into_iter().collect();
        let var_pos: BTreeMap<&String, usize> = theory
            .vars
            .iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        let slot = |t: &Term| match t {
            Term::Var(v) => Slot::Pos(var_pos[v]),
            Term::Const(c) => Slot::Val(Value::Const(c.clone())),
        };
        let eq_slots = theory
            .equalities
            .iter()
            .map(|(a, b)| (slot(a), slot(b)))
            .collect();
        let mut egd_matches = Vec::new();
        for egd in sigma {
            let (z, z2) = egd.head();
            for env in egd.matches_unfiltered(db)? {
                egd_matches.push(EgdMatch {
                    head: (env[z].clone(), env[z2].clone()),
                    psi: egd
                        .equalities()
                        .iter()
                        .map(|(a, b)| (env[a].clone(), env[b].clone()))
                        .collect(),
                });
            }
        }
        Ok(EquivProvider {
            theory_arity: theory.vars.len(),
            elems,
            eq_slots,
            egd_matches,
            cache: RefCell::new(HashMap::new()),
        })
    }

    fn index(&self, v: &Value) -> Option<usize> {
        self.elems.binary_search(v).ok()
    }

    /// The partition for a parameter assignment, or `None` when some
    /// assigned value lies outside the element set (the `Dom` guard of
    /// the rule template).
    pub fn partition(&self, assignment: &[Value]) -> Option<Rc<Partition>> {
        assert_eq!(assignment.len(), self.theory_arity);
        if let Some(p) = self.cache.borrow().get(assignment) {
            return Some(p.clone());
        }
        for v in assignment {
            self.index(v)?;
        }
        let mut uf = UnionFind::new(self.elems.len());
        let resolve = |s: &Slot| -> usize {
            match s {
                Slot::Pos(i) => self.index(&assignment[*i]).unwrap(),
                Slot::Val(v) => self
                    .index(v)
                    .expect("theory constant outside the element set"),
            }
        };
        for (a, b) in &self.eq_slots {
            uf.union(resolve(a), resolve(b));
        }
        loop {
            let mut changed = false;
            for m in &self.egd_matches {
                let ok = m.psi.iter().all(|(a, b)| {
                    let (ia, ib) = (self.index(a).unwrap(), self.index(b).unwrap());
                    uf.find(ia) == uf.find(ib)
                });
                if ok {
                    let (ha, hb) = (self.index(&m.head.0).unwrap(), self.index(&m.head.1).unwrap());
                    if uf.union(ha, hb) {
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let root = (0..self.elems.len()).map(|i| uf.find(i)).collect();
        let p = Rc::new(Partition {
            elems: self.elems.clone(),
            root,
        });
        self.cache
            .borrow_mut()
            .insert(assignment.to_vec(), p.clone());
        Some(p)
    }

    /// Membership test for the induced relation of arity `|vars| + 2`.
    pub fn holds(&self, assignment: &[Value], a: &Value, b: &Value) -> bool {
        match self.partition(assignment) {
            Some(p) => p.same(a, b) == Some(true),
            None => false,
        }
    }
}

/// The FO rendition of the induced equivalence when there are no EGDs:
/// `z = z'` or a chain of `m` syntactically equated pairs connecting `z`
/// to `z'`, where `m` is the number of `~` classes. Logically identical
/// disjuncts are deduplicated.
pub struct EquivFo {
    pub formula: Formula,
    pub z: String,
    pub z2: String,
}

pub fn build_equiv_fo(theory: &EqualityTheory) -> EquivFo {
    let taken: BTreeSet<String> = theory.vars.iter().cloned().collect();
    let fresh = |base: &str| {
        let mut name = base.to_string();
        while taken.contains(&name) {
            name.push('_');
        }
        name
    };
    let z = fresh("z");
    let z2 = fresh("zz");

    let classes = theory.sim_classes();
    let m = classes.len();

    // chain elements: all parameters and theory constants; elements outside
    // every equality form singleton ~ classes
    let mut class_of: BTreeMap<Term, usize> = BTreeMap::new();
    for (i, class) in classes.iter().enumerate() {
        for t in class {
            class_of.insert(t.clone(), i);
        }
    }
    let mut elements: Vec<Term> = theory.vars.iter().map(|v| Term::var(v.clone())).collect();
    for c in theory.constants() {
        elements.push(Term::Const(c));
    }
    for (i, t) in elements.iter().enumerate() {
        class_of.entry(t.clone()).or_insert(m + i);
    }
    // related pairs (u, v) with u ~ v, including the reflexive ones
    let mut pairs: Vec<(Term, Term)> = Vec::new();
    for u in &elements {
        for v in &elements {
            if class_of[u] == class_of[v] {
                pairs.push((u.clone(), v.clone()));
            }
        }
    }

    let mut disjuncts: BTreeSet<Vec<(Term, Term)>> = BTreeSet::new();
    if m > 0 {
        // depth-first over chains of exactly m pairs, with on-the-fly
        // deduplication of (first, links, last) states
        type State = (Term, Vec<(Term, Term)>, Term);
        let canon = |a: &Term, b: &Term| -> Option<(Term, Term)> {
            if a == b {
                None
            } else if a < b {
                Some((a.clone(), b.clone()))
            } else {
                Some((b.clone(), a.clone()))
            }
        };
        let mut frontier: HashSet<State> = pairs
            .iter()
            .map(|(u, v)| (u.clone(), Vec::new(), v.clone()))
            .collect();
        for _ in 1..m {
            let mut next: HashSet<State> = HashSet::new();
            for (first, links, last) in &frontier {
                for (u, v) in &pairs {
                    let mut ls = links.clone();
                    if let Some(link) = canon(last, u) {
                        if !ls.contains(&link) {
                            ls.push(link);
                            ls.sort();
                        }
                    }
                    next.insert((first.clone(), ls, v.clone()));
                }
            }
            frontier = next;
        }
        for (first, links, last) in frontier {
            let mut eqs: Vec<(Term, Term)> = vec![
                (Term::var(z.clone()), first.clone()),
                (Term::var(z2.clone()), last.clone()),
            ];
            eqs.extend(links);
            disjuncts.insert(eqs);
        }
    }

    // drop disjuncts subsumed by a strictly smaller one: a conjunction
    // extending another is implied by it
    let as_sets: Vec<BTreeSet<(Term, Term)>> = disjuncts
        .iter()
        .map(|eqs| eqs.iter().cloned().collect())
        .collect();
    let kept: Vec<&Vec<(Term, Term)>> = disjuncts
        .iter()
        .zip(&as_sets)
        .filter(|(_, set)| {
            !as_sets
                .iter()
                .any(|other| other.len() < set.len() && other.is_subset(set))
        })
        .map(|(eqs, _)| eqs)
        .collect();

    let mut parts: Vec<Formula> = vec![Formula::Eq(Term::var(z.clone()), Term::var(z2.clone()))];
    for eqs in kept {
        parts.push(Formula::and(
            eqs.iter()
                .map(|(a, b)| Formula::Eq(a.clone(), b.clone()))
                .collect(),
        ));
    }
    EquivFo {
        formula: Formula::or(parts),
        z,
        z2,
    }
}
