//! Compilation of BCCQs (with optional EGDs) into rewritings whose naive
//! evaluation returns certain answers.
//!
//! A tuple is a certain answer to `Q` exactly when the support of `not Q`
//! is empty, so the compiler takes `not Q` in DNF over NRV CQs and emits
//! `rho(x) = AND_i forall w. not poss_i(x, w)`, where `poss_i` states that
//! disjunct `i` has a possible answer: its positive CQ has a fact match
//! whose equality subquery some consistent valuation can satisfy (`comp`),
//! compatible with every negated CQ (`cons`, via `imply`). Equivalence of
//! database elements is the recursive ingredient: with EGDs it is a
//! Datalog-defined relation (first stratum), without them it inlines as
//! the FO formula of `build_equiv_fo`.

mod theory;

pub use theory::{build_equiv_fo, EqualityTheory, EquivFo, EquivProvider, Partition};

use std::collections::{BTreeMap, BTreeSet};

use crate::datalog::{Atom, BodyAtom, DatalogError, DatalogProgram, Rule};
use crate::eval::{eval_with_constants, AnswerSet};
use crate::model::{Constant, Database, Egd, ModelError};
use crate::query::{to_dnf_bccq, DnfBccq, Formula, NrvCq, QueryClass, QueryError, Term};

#[derive(Debug, Clone, thiserror::Error)]
pub enum RewriteError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("first-order rewritings require an empty constraint set")]
    FoNeedsEmptySigma,
    #[error("database relation {0} is outside the rewriting's schema; use the brute-force method")]
    OutsideSchema(String),
    #[error(transparent)]
    Datalog(#[from] DatalogError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Fresh-name supply that avoids a set of reserved names.
pub struct Namer {
    taken: BTreeSet<String>,
    counter: usize,
}

impl Namer {
    pub fn new<I: IntoIterator<Item = String>>(taken: I) -> Namer {
        Namer {
            taken: taken.into_iter().collect(),
            counter: 0,
        }
    }

    pub fn fresh(&mut self, base: &str) -> String {
        loop {
            self.counter += 1;
            let name = format!("{base}{}", self.counter);
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }
}

pub(crate) fn pick_relation_name(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    let mut i = 1;
    loop {
        let name = format!("{base}_{i}");
        if !taken.contains(&name) {
            return name;
        }
        i += 1;
    }
}

/// How formulas refer to the equivalence induced by one equality theory:
/// an idb relation of the Datalog stratum, or an inlined FO formula.
pub enum EquivRef {
    Idb(String),
    Inline(EquivFo),
}

impl EquivRef {
    /// The formula `equiv(params, a, b)`.
    pub fn apply(&self, theory: &EqualityTheory, params: &[Term], a: Term, b: Term) -> Formula {
        debug_assert_eq!(params.len(), theory.vars.len());
        match self {
            EquivRef::Idb(name) => {
                let mut terms = params.to_vec();
                terms.push(a);
                terms.push(b);
                Formula::rel(name.clone(), terms)
            }
            EquivRef::Inline(fo) => {
                let mut map: BTreeMap<String, Term> = theory
                    .vars
                    .iter()
                    .cloned()
                    .zip(params.iter().cloned())
                    .collect();
                map.insert(fo.z.clone(), a);
                map.insert(fo.z2.clone(), b);
                fo.formula.substitute(&map)
            }
        }
    }
}

/// `comp(params)`: there is a consistent valuation collapsing all
/// equivalent elements, i.e. no two distinct constants are equivalent:
/// `forall z z' (equiv(params, z, z') & !null(z) & !null(z') -> z = z')`.
pub fn comp_formula(
    equiv: &EquivRef,
    theory: &EqualityTheory,
    params: &[Term],
    namer: &mut Namer,
) -> Formula {
    let z = namer.fresh("v");
    let z2 = namer.fresh("v");
    let body = Formula::implies(
        Formula::and(vec![
            equiv.apply(theory, params, Term::var(z.clone()), Term::var(z2.clone())),
            Formula::not(Formula::IsNull(Term::var(z.clone()))),
            Formula::not(Formula::IsNull(Term::var(z2.clone()))),
        ]),
        Formula::Eq(Term::var(z.clone()), Term::var(z2.clone())),
    );
    Formula::forall(vec![z, z2], body)
}

/// `imply(params, params2)`: the equivalence induced by `theory2` at
/// `params2` is contained in the one induced by `theory` at `params`:
/// `forall z z' (equiv2(params2, z, z') -> equiv(params, z, z'))`.
pub fn imply_formula(
    equiv: &EquivRef,
    theory: &EqualityTheory,
    params: &[Term],
    equiv2: &EquivRef,
    theory2: &EqualityTheory,
    params2: &[Term],
    namer: &mut Namer,
) -> Formula {
    debug_assert_eq!(
        theory.constants(),
        theory2.constants(),
        "imply requires aligned constant sets"
    );
    let z = namer.fresh("v");
    let z2 = namer.fresh("v");
    let body = Formula::implies(
        equiv2.apply(theory2, params2, Term::var(z.clone()), Term::var(z2.clone())),
        equiv.apply(theory, params, Term::var(z.clone()), Term::var(z2.clone())),
    );
    Formula::forall(vec![z, z2], body)
}

fn atoms_formula(cq: &NrvCq) -> Vec<Formula> {
    cq.rel_atoms
        .iter()
        .map(|(rel, vars)| {
            Formula::rel(
                rel.clone(),
                vars.iter().map(|v| Term::var(v.clone())).collect(),
            )
        })
        .collect()
}

fn param_terms(cq: &NrvCq) -> Vec<Term> {
    cq.free_vars
        .iter()
        .chain(cq.rel_vars.iter())
        .map(|v| Term::var(v.clone()))
        .collect()
}

/// One disjunct of a DNF BCCQ compiled to theories and equiv references.
struct CompiledDisjunct<'a> {
    positive: &'a NrvCq,
    positive_theory: EqualityTheory,
    positive_ref: EquivRef,
    negated: Vec<(&'a NrvCq, EqualityTheory, EquivRef)>,
}

/// `poss(x, w)` for one disjunct: the positive CQ's facts exist, its
/// equality subquery is satisfiable by a consistent valuation, and for
/// every match of a negated CQ satisfiability of the positive theory does
/// not force the negated one.
fn poss_formula(disjunct: &CompiledDisjunct, namer: &mut Namer) -> Formula {
    let pos_params = param_terms(disjunct.positive);
    let mut parts = atoms_formula(disjunct.positive);
    parts.push(comp_formula(
        &disjunct.positive_ref,
        &disjunct.positive_theory,
        &pos_params,
        namer,
    ));
    for (neg, neg_theory, neg_ref) in &disjunct.negated {
        let neg_params = param_terms(neg);
        let mut antecedent = atoms_formula(neg);
        antecedent.push(comp_formula(neg_ref, neg_theory, &neg_params, namer));
        let consequent = Formula::not(imply_formula(
            &disjunct.positive_ref,
            &disjunct.positive_theory,
            &pos_params,
            neg_ref,
            neg_theory,
            &neg_params,
            namer,
        ));
        parts.push(Formula::forall(
            neg.rel_vars.clone(),
            Formula::implies(Formula::and(antecedent), consequent),
        ));
    }
    Formula::and(parts)
}

/// `poss` for one DNF disjunct with the equivalences inlined as FO
/// formulas (the constraint-free form): the positive CQ's facts exist,
/// a consistent valuation can satisfy its equality subquery, and no
/// negated CQ is forced. Its free variables are the answer variables plus
/// the positive CQ's quantified ones. Under constraints the same shape is
/// built against the Datalog-defined equivalences by `rewrite_certain`.
pub fn build_poss_fo(disjunct: &crate::query::DnfDisjunct) -> Formula {
    let mut taken: BTreeSet<String> = disjunct.positive.free_vars.iter().cloned().collect();
    for cq in std::iter::once(&disjunct.positive).chain(disjunct.negated.iter()) {
        taken.extend(cq.rel_vars.iter().cloned());
    }
    let mut namer = Namer::new(taken);
    let positive_theory = EqualityTheory::from_nrv(&disjunct.positive);
    let positive_ref = EquivRef::Inline(build_equiv_fo(&positive_theory));
    let negated = disjunct
        .negated
        .iter()
        .map(|cq| {
            let theory = EqualityTheory::from_nrv(cq);
            let r = EquivRef::Inline(build_equiv_fo(&theory));
            (cq, theory, r)
        })
        .collect();
    poss_formula(
        &CompiledDisjunct {
            positive: &disjunct.positive,
            positive_theory,
            positive_ref,
            negated,
        },
        &mut namer,
    )
}

/// The rule template defining the equivalence relation for one theory:
/// reflexivity over the domain, one rule per equality atom, transitivity,
/// symmetry, and one rule per EGD.
pub fn build_equiv_program(
    theory: &EqualityTheory,
    sigma: &[Egd],
    relation: &str,
    dom: &str,
) -> Vec<Rule> {
    let mut namer = Namer::new(theory.vars.iter().cloned());
    let z = namer.fresh("z");
    let z2 = namer.fresh("z");
    let u = namer.fresh("z");
    let params: Vec<Term> = theory.vars.iter().map(|v| Term::var(v.clone())).collect();
    let head = |a: &str, b: &str| -> Atom {
        let mut terms = params.clone();
        terms.push(Term::var(a.to_string()));
        terms.push(Term::var(b.to_string()));
        Atom::new(relation, terms)
    };
    let self_atom = |a: Term, b: Term| -> BodyAtom {
        let mut terms = params.clone();
        terms.push(a);
        terms.push(b);
        BodyAtom::Rel(Atom::new(relation, terms))
    };
    let dom_params: Vec<BodyAtom> = theory
        .vars
        .iter()
        .map(|v| BodyAtom::Rel(Atom::new(dom, vec![Term::var(v.clone())])))
        .collect();

    let mut rules = Vec::new();
    // reflexivity over the domain
    {
        let mut body = dom_params.clone();
        body.push(BodyAtom::Rel(Atom::new(dom, vec![Term::var(z.clone())])));
        rules.push(Rule {
            head: head(&z, &z),
            body,
        });
    }
    // one rule per equality atom of the theory
    for (a, b) in &theory.equalities {
        let mut body = vec![
            BodyAtom::Eq(Term::var(z.clone()), a.clone()),
            BodyAtom::Eq(Term::var(z2.clone()), b.clone()),
        ];
        body.extend(dom_params.iter().cloned());
        rules.push(Rule {
            head: head(&z, &z2),
            body,
        });
    }
    // transitivity and symmetry
    rules.push(Rule {
        head: head(&z, &z2),
        body: vec![
            self_atom(Term::var(z.clone()), Term::var(u.clone())),
            self_atom(Term::var(u.clone()), Term::var(z2.clone())),
        ],
    });
    rules.push(Rule {
        head: head(&z, &z2),
        body: vec![self_atom(Term::var(z2.clone()), Term::var(z.clone()))],
    });
    // one rule per EGD: the body atoms fire and the repetition equalities
    // already hold up to equivalence
    for egd in sigma {
        let rename: BTreeMap<&String, String> = egd
            .body()
            .iter()
            .flat_map(|a| a.vars.iter())
            .map(|v| (v, namer.fresh("e")))
            .collect();
        let mut body: Vec<BodyAtom> = egd
            .body()
            .iter()
            .map(|a| {
                BodyAtom::Rel(Atom::new(
                    a.relation.clone(),
                    a.vars.iter().map(|v| Term::var(rename[v].clone())).collect(),
                ))
            })
            .collect();
        for (w, w2) in egd.equalities() {
            body.push(self_atom(
                Term::var(rename[w].clone()),
                Term::var(rename[w2].clone()),
            ));
        }
        body.extend(dom_params.iter().cloned());
        let (hz, hz2) = egd.head();
        rules.push(Rule {
            head: head(&rename[&hz.to_string()], &rename[&hz2.to_string()]),
            body,
        });
    }
    rules
}

/// Domain rules: one per column of each schema relation, plus one fact per
/// required constant.
pub fn build_dom_rules(
    schema: &BTreeMap<String, usize>,
    constants: &BTreeSet<Constant>,
    dom: &str,
    namer: &mut Namer,
) -> Vec<Rule> {
    let mut rules = Vec::new();
    for (rel, &arity) in schema {
        for pos in 0..arity {
            let vars: Vec<String> = (0..arity).map(|_| namer.fresh("a")).collect();
            rules.push(Rule {
                head: Atom::new(dom, vec![Term::var(vars[pos].clone())]),
                body: vec![BodyAtom::Rel(Atom::new(
                    rel.clone(),
                    vars.into_iter().map(Term::Var).collect(),
                ))],
            });
        }
    }
    for c in constants {
        rules.push(Rule {
            head: Atom::new(dom, vec![Term::Const(c.clone())]),
            body: vec![],
        });
    }
    rules
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewriteTarget {
    Datalog,
    Fo,
}

/// A compiled certain-answer rewriting. The bundle is data-independent:
/// it stores only syntax plus the metadata needed to evaluate it the way
/// the source query would be (answer variables, query constants, schema).
#[derive(Debug, Clone)]
pub struct RewritingBundle {
    pub answer_vars: Vec<String>,
    pub query_constants: BTreeSet<Constant>,
    /// Relations of the query and the EGDs; databases must stay within.
    pub schema_relations: BTreeSet<String>,
    pub kind: BundleKind,
}

#[derive(Debug, Clone)]
pub enum BundleKind {
    Datalog(DatalogProgram),
    Fo(Formula),
}

impl RewritingBundle {
    pub fn target(&self) -> RewriteTarget {
        match self.kind {
            BundleKind::Datalog(_) => RewriteTarget::Datalog,
            BundleKind::Fo(_) => RewriteTarget::Fo,
        }
    }

    /// The rewriting as text: a Datalog program or an FO formula.
    pub fn emit_text(&self) -> String {
        match &self.kind {
            BundleKind::Datalog(p) => p.to_string(),
            BundleKind::Fo(f) => format!("{f}\n"),
        }
    }

    /// Naive evaluation of the rewriting over a database; by construction
    /// this returns the certain answers of the source query.
    ///
    /// A Datalog bundle is tied to the vocabulary its domain rules cover,
    /// so the database may not contain other relations (compile with
    /// `rewrite_certain_for_schema` to widen the vocabulary). The FO
    /// target mentions no domain relation and works over any database
    /// that has the query's relations.
    pub fn evaluate(&self, d: &Database) -> Result<AnswerSet, RewriteError> {
        match &self.kind {
            BundleKind::Datalog(p) => {
                for rel in d.schema().keys() {
                    if !self.schema_relations.contains(rel) {
                        return Err(RewriteError::OutsideSchema(rel.clone()));
                    }
                }
                Ok(crate::datalog::eval_program(p, d)?)
            }
            BundleKind::Fo(f) => Ok(eval_with_constants(f, d, &self.query_constants)?),
        }
    }
}

fn all_variable_names(dnf: &DnfBccq) -> BTreeSet<String> {
    let mut names: BTreeSet<String> = dnf.answer_vars.iter().cloned().collect();
    for d in &dnf.disjuncts {
        for cq in std::iter::once(&d.positive).chain(d.negated.iter()) {
            names.extend(cq.rel_vars.iter().cloned());
            names.extend(cq.free_vars.iter().cloned());
        }
    }
    names
}

/// Compiles a BCCQ and a set of EGDs into a certain-answer rewriting over
/// the vocabulary of the query and the EGDs. See
/// `rewrite_certain_for_schema` to widen the vocabulary.
pub fn rewrite_certain(
    q: &Formula,
    sigma: &[Egd],
    target: RewriteTarget,
) -> Result<RewritingBundle, RewriteError> {
    rewrite_certain_for_schema(q, sigma, target, &BTreeMap::new())
}

/// Compiles a BCCQ and a set of EGDs into a certain-answer rewriting.
///
/// For the Datalog target the bundle's first stratum defines the domain
/// over the full vocabulary (the query's relations, the EGDs', and
/// `extra_schema` — normally the database schema) and one equivalence
/// relation per equality subquery of `not Q`'s DNF; the FO layer is
/// `rho`. The FO target (empty `sigma` only) inlines the equivalences as
/// FO formulas, so the whole rewriting is one formula.
pub fn rewrite_certain_for_schema(
    q: &Formula,
    sigma: &[Egd],
    target: RewriteTarget,
    extra_schema: &BTreeMap<String, usize>,
) -> Result<RewritingBundle, RewriteError> {
    if q.classify() > QueryClass::Bccq {
        return Err(QueryError::WrongClass {
            expected: QueryClass::Bccq,
            found: q.classify(),
        }
        .into());
    }
    if target == RewriteTarget::Fo && !sigma.is_empty() {
        return Err(RewriteError::FoNeedsEmptySigma);
    }
    let negated_dnf = to_dnf_bccq(q, true)?;

    let mut schema_relations = q.relations();
    for egd in sigma {
        schema_relations.extend(egd.relations());
    }
    schema_relations.extend(extra_schema.keys().cloned());

    let mut namer = Namer::new(all_variable_names(&negated_dnf));
    let mut relation_names: BTreeSet<String> = schema_relations.clone();
    let dom_name = pick_relation_name("dom", &relation_names);
    relation_names.insert(dom_name.clone());

    // compile each disjunct's theories and equivalence references
    let mut rules: Vec<Rule> = Vec::new();
    let mut all_theory_constants: BTreeSet<Constant> = BTreeSet::new();
    let mut compiled: Vec<CompiledDisjunct> = Vec::new();
    let mut equiv_index = 0usize;
    for disjunct in &negated_dnf.disjuncts {
        let mut make_ref = |cq: &NrvCq,
                            rules: &mut Vec<Rule>,
                            relation_names: &mut BTreeSet<String>|
         -> (EqualityTheory, EquivRef) {
            let theory = EqualityTheory::from_nrv(cq);
            let r = match target {
                RewriteTarget::Fo => EquivRef::Inline(build_equiv_fo(&theory)),
                RewriteTarget::Datalog => {
                    let name =
                        pick_relation_name(&format!("equiv_{equiv_index}"), relation_names);
                    relation_names.insert(name.clone());
                    equiv_index += 1;
                    rules.extend(build_equiv_program(&theory, sigma, &name, &dom_name));
                    EquivRef::Idb(name)
                }
            };
            (theory, r)
        };
        let (positive_theory, positive_ref) =
            make_ref(&disjunct.positive, &mut rules, &mut relation_names);
        all_theory_constants.extend(positive_theory.constants());
        let negated = disjunct
            .negated
            .iter()
            .map(|cq| {
                let (th, r) = make_ref(cq, &mut rules, &mut relation_names);
                all_theory_constants.extend(th.constants());
                (cq, th, r)
            })
            .collect();
        compiled.push(CompiledDisjunct {
            positive: &disjunct.positive,
            positive_theory,
            positive_ref,
            negated,
        });
    }

    // rho(x) = AND_i forall w. not poss_i(x, w)
    let rho = Formula::and(
        compiled
            .iter()
            .map(|disjunct| {
                let poss = poss_formula(disjunct, &mut namer);
                Formula::forall(disjunct.positive.rel_vars.clone(), Formula::not(poss))
            })
            .collect(),
    );
    debug_assert_eq!(rho.answer_vars(), negated_dnf.answer_vars);

    let kind = match target {
        RewriteTarget::Fo => BundleKind::Fo(rho),
        RewriteTarget::Datalog => {
            let schema_arities: BTreeMap<String, usize> = {
                let mut m = extra_schema.clone();
                collect_arities(q, &mut m);
                for egd in sigma {
                    for atom in egd.body() {
                        m.insert(atom.relation.clone(), atom.vars.len());
                    }
                }
                m
            };
            let mut dom_rules =
                build_dom_rules(&schema_arities, &all_theory_constants, &dom_name, &mut namer);
            dom_rules.extend(rules);
            BundleKind::Datalog(DatalogProgram::new(dom_rules, rho))
        }
    };
    Ok(RewritingBundle {
        answer_vars: negated_dnf.answer_vars,
        query_constants: q.constants(),
        schema_relations,
        kind,
    })
}

fn collect_arities(f: &Formula, out: &mut BTreeMap<String, usize>) {
    match f {
        Formula::Rel { relation, terms } => {
            out.insert(relation.clone(), terms.len());
        }
        Formula::Eq(..) | Formula::IsNull(_) => {}
        Formula::Not(g) => collect_arities(g, out),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|g| collect_arities(g, out)),
        Formula::Exists(_, g) | Formula::Forall(_, g) => collect_arities(g, out),
    }
}
