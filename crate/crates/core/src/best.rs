//! FO rewriting of best answers for UCQs.
//!
//! The support-inclusion formula `incl(x, x')` holds when every valuation
//! witnessing `x` as an answer also witnesses `x'`: each match of a
//! disjunct supporting `x` must be absorbed, via `imply`, by a match of
//! some disjunct at `x'`. Best answers are the tuples whose support is
//! maximal, so `best(x) = forall x' (incl(x, x') -> incl(x', x))` and
//! naive evaluation of `best` returns exactly them.

use std::collections::{BTreeMap, BTreeSet};

use crate::datalog::DatalogProgram;
use crate::eval::{eval_with_constants, AnswerSet};
use crate::model::{Constant, Database, Egd};
use crate::query::{to_dnf_bccq, Formula, NrvCq, QueryClass, QueryError, Term};
use crate::rewrite::{
    build_dom_rules, build_equiv_fo, build_equiv_program, comp_formula, imply_formula,
    EqualityTheory, EquivRef, Namer, RewriteError, RewriteTarget,
};

/// The support-inclusion formula `incl(x, x')` for a UCQ, together with
/// the two answer-variable tuples it compares.
#[derive(Debug, Clone)]
pub struct SupportInclusion {
    pub formula: Formula,
    pub left_vars: Vec<String>,
    pub right_vars: Vec<String>,
}

/// A compiled best-answer rewriting.
#[derive(Debug, Clone)]
pub struct BestRewriting {
    pub answer_vars: Vec<String>,
    pub query_constants: BTreeSet<Constant>,
    pub schema_relations: BTreeSet<String>,
    pub kind: BestKind,
}

#[derive(Debug, Clone)]
pub enum BestKind {
    Fo(Formula),
    /// Experimental: the EGD-aware variant backed by the Datalog-defined
    /// equivalence relations. Validated against the brute-force oracle
    /// only; the verified path is `Fo`.
    Datalog(DatalogProgram),
}

impl BestRewriting {
    pub fn formula(&self) -> Option<&Formula> {
        match &self.kind {
            BestKind::Fo(f) => Some(f),
            BestKind::Datalog(_) => None,
        }
    }

    pub fn emit_text(&self) -> String {
        match &self.kind {
            BestKind::Fo(f) => format!("{f}\n"),
            BestKind::Datalog(p) => p.to_string(),
        }
    }

    pub fn evaluate(&self, d: &Database) -> Result<AnswerSet, RewriteError> {
        match &self.kind {
            BestKind::Fo(f) => Ok(eval_with_constants(f, d, &self.query_constants)?),
            BestKind::Datalog(p) => {
                for rel in d.schema().keys() {
                    if !self.schema_relations.contains(rel) {
                        return Err(RewriteError::OutsideSchema(rel.clone()));
                    }
                }
                Ok(crate::datalog::eval_program(p, d)?)
            }
        }
    }
}

struct Compiled {
    cq: NrvCq,
    theory: EqualityTheory,
    equiv: EquivRef,
    /// The same relational subquery with freshly renamed quantified
    /// variables, for use on the primed side.
    primed_atoms: Vec<Formula>,
    primed_vars: Vec<String>,
}

fn atoms_of(cq: &NrvCq) -> Vec<Formula> {
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

struct BestBuild {
    incl: SupportInclusion,
    rules: Vec<crate::datalog::Rule>,
    answer_vars: Vec<String>,
    namer: Namer,
}

fn build_inclusion(
    q: &Formula,
    sigma: &[Egd],
    target: RewriteTarget,
    extra_schema: &BTreeMap<String, usize>,
) -> Result<BestBuild, RewriteError> {
    if q.classify() > QueryClass::Ucq {
        return Err(QueryError::WrongClass {
            expected: QueryClass::Ucq,
            found: q.classify(),
        }
        .into());
    }
    let dnf = to_dnf_bccq(q, false)?;
    let answer_vars = dnf.answer_vars.clone();

    // one global constant set so that imply is defined across disjuncts
    let mut all_consts: BTreeSet<Constant> = BTreeSet::new();
    for d in &dnf.disjuncts {
        debug_assert!(d.negated.is_empty(), "a UCQ has no negated literals");
        all_consts.extend(d.positive.constants());
    }

    let mut taken: BTreeSet<String> = answer_vars.iter().cloned().collect();
    for d in &dnf.disjuncts {
        taken.extend(d.positive.rel_vars.iter().cloned());
    }
    let mut namer = Namer::new(taken);

    let mut relation_names: BTreeSet<String> = q.relations();
    for egd in sigma {
        relation_names.extend(egd.relations());
    }
    let dom_name = crate::rewrite::pick_relation_name("dom", &relation_names);
    relation_names.insert(dom_name.clone());

    let mut rules = Vec::new();
    let mut compiled: Vec<Compiled> = Vec::new();
    for (i, d) in dnf.disjuncts.iter().enumerate() {
        let mut cq = d.positive.clone();
        cq.pad_constants(&all_consts);
        let theory = EqualityTheory::from_nrv(&cq);
        let equiv = match target {
            RewriteTarget::Fo => EquivRef::Inline(build_equiv_fo(&theory)),
            RewriteTarget::Datalog => {
                let name =
                    crate::rewrite::pick_relation_name(&format!("equiv_{i}"), &relation_names);
                relation_names.insert(name.clone());
                rules.extend(build_equiv_program(&theory, sigma, &name, &dom_name));
                EquivRef::Idb(name)
            }
        };
        let primed_vars: Vec<String> = cq.rel_vars.iter().map(|_| namer.fresh("w")).collect();
        let rename: BTreeMap<&String, &String> =
            cq.rel_vars.iter().zip(primed_vars.iter()).collect();
        let primed_atoms = cq
            .rel_atoms
            .iter()
            .map(|(rel, vars)| {
                Formula::rel(
                    rel.clone(),
                    vars.iter().map(|v| Term::var(rename[v].clone())).collect(),
                )
            })
            .collect();
        compiled.push(Compiled {
            cq,
            theory,
            equiv,
            primed_atoms,
            primed_vars,
        });
    }

    // primed answer variables x'
    let right_vars: Vec<String> = answer_vars.iter().map(|_| namer.fresh("x")).collect();

    let params = |c: &Compiled, frees: &[String], rels: &[String]| -> Vec<Term> {
        debug_assert_eq!(c.cq.free_vars.len(), frees.len());
        frees
            .iter()
            .chain(rels.iter())
            .map(|v| Term::var(v.clone()))
            .collect()
    };

    let mut conjuncts = Vec::new();
    for ci in &compiled {
        let left_params = params(ci, &answer_vars, &ci.cq.rel_vars);
        let mut antecedent = atoms_of(&ci.cq);
        antecedent.push(comp_formula(&ci.equiv, &ci.theory, &left_params, &mut namer));
        let mut alternatives = Vec::new();
        for cj in &compiled {
            let right_params = params(cj, &right_vars, &cj.primed_vars);
            let mut body = cj.primed_atoms.clone();
            body.push(imply_formula(
                &ci.equiv,
                &ci.theory,
                &left_params,
                &cj.equiv,
                &cj.theory,
                &right_params,
                &mut namer,
            ));
            alternatives.push(Formula::exists(cj.primed_vars.clone(), Formula::and(body)));
        }
        conjuncts.push(Formula::forall(
            ci.cq.rel_vars.clone(),
            Formula::implies(Formula::and(antecedent), Formula::or(alternatives)),
        ));
    }
    let incl = SupportInclusion {
        formula: Formula::and(conjuncts),
        left_vars: answer_vars.clone(),
        right_vars,
    };
    let mut build = BestBuild {
        incl,
        rules,
        answer_vars,
        namer,
    };
    if target == RewriteTarget::Datalog {
        // prepend the shared domain rules
        let mut schema_arities: BTreeMap<String, usize> = extra_schema.clone();
        collect_arities(q, &mut schema_arities);
        for egd in sigma {
            for atom in egd.body() {
                schema_arities.insert(atom.relation.clone(), atom.vars.len());
            }
        }
        let mut theory_consts = BTreeSet::new();
        for c in &compiled {
            theory_consts.extend(c.theory.constants());
        }
        let mut dom_rules =
            build_dom_rules(&schema_arities, &theory_consts, &dom_name, &mut build.namer);
        dom_rules.extend(std::mem::take(&mut build.rules));
        build.rules = dom_rules;
    }
    Ok(build)
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

/// `incl(x, x')`: the support of `x` is included in the support of `x'`.
pub fn build_support_inclusion(q: &Formula) -> Result<SupportInclusion, RewriteError> {
    Ok(build_inclusion(q, &[], RewriteTarget::Fo, &BTreeMap::new())?.incl)
}

fn best_formula(incl: &SupportInclusion) -> Formula {
    // best(x) = forall x' (incl(x, x') -> incl(x', x))
    let mut swap: BTreeMap<String, Term> = BTreeMap::new();
    for (l, r) in incl.left_vars.iter().zip(&incl.right_vars) {
        swap.insert(l.clone(), Term::var(r.clone()));
        swap.insert(r.clone(), Term::var(l.clone()));
    }
    let flipped = incl.formula.substitute(&swap);
    Formula::forall(
        incl.right_vars.clone(),
        Formula::implies(incl.formula.clone(), flipped),
    )
}

/// Compiles a UCQ into the FO best-answer rewriting (no constraints).
pub fn rewrite_best(q: &Formula) -> Result<BestRewriting, RewriteError> {
    let build = build_inclusion(q, &[], RewriteTarget::Fo, &BTreeMap::new())?;
    let formula = best_formula(&build.incl);
    debug_assert_eq!(formula.answer_vars(), build.answer_vars);
    Ok(BestRewriting {
        answer_vars: build.answer_vars,
        query_constants: q.constants(),
        schema_relations: q.relations(),
        kind: BestKind::Fo(formula),
    })
}

/// Experimental EGD-aware variant: substitutes the Datalog-defined
/// equivalence relations into `comp` and `imply`. Only oracle-validated;
/// use `rewrite_best` for the verified constraint-free path.
pub fn rewrite_best_egds_experimental(
    q: &Formula,
    sigma: &[Egd],
    extra_schema: &BTreeMap<String, usize>,
) -> Result<BestRewriting, RewriteError> {
    let build = build_inclusion(q, sigma, RewriteTarget::Datalog, extra_schema)?;
    let formula = best_formula(&build.incl);
    let mut schema_relations = q.relations();
    for egd in sigma {
        schema_relations.extend(egd.relations());
    }
    schema_relations.extend(extra_schema.keys().cloned());
    Ok(BestRewriting {
        answer_vars: build.answer_vars,
        query_constants: q.constants(),
        schema_relations,
        kind: BestKind::Datalog(DatalogProgram::new(build.rules, formula)),
    })
}
