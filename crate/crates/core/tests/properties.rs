//! Property tests for the module-level invariants: format round trips,
//! genericity under null renaming, monotonicity, normal-form equivalence,
//! and the support-inclusion semantics of the best-answer rewriting.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use certalog::best::build_support_inclusion;
use certalog::eval::eval_fo;
use certalog::fixtures::{best_ucq_pool, gen_random, ucq_pool, RandomParams, Rng};
use certalog::model::{Constant, Database, Valuation, Value};
use certalog::oracle::{best_oracle, certain_oracle, support_of, OracleConfig};
use certalog::query::{parse_query, to_dnf_bccq, to_nrv, Formula, QueryError, Term};

fn constant_strategy() -> impl Strategy<Value = Constant> {
    prop_oneof![
        (0..4i64).prop_map(Constant::Int),
        prop_oneof![Just("a"), Just("b"), Just("a b\"c\\d")]
            .prop_map(|s| Constant::Str(s.to_string())),
    ]
}

fn value_strategy() -> impl Strategy<Value = Value> {
    prop_oneof![
        constant_strategy().prop_map(Value::Const),
        (1..5usize).prop_map(|i| Value::null(format!("n{i}"))),
    ]
}

/// Random databases over the corpus schema R/2, S/2, U/1.
fn db_strategy() -> impl Strategy<Value = Database> {
    let fact = prop_oneof![
        (value_strategy(), value_strategy()).prop_map(|(a, b)| ("R", vec![a, b])),
        (value_strategy(), value_strategy()).prop_map(|(a, b)| ("S", vec![a, b])),
        value_strategy().prop_map(|a| ("U", vec![a])),
    ];
    proptest::collection::vec(fact, 0..8).prop_map(|facts| {
        let mut db = Database::new();
        db.declare_relation("R", 2).unwrap();
        db.declare_relation("S", 2).unwrap();
        db.declare_relation("U", 1).unwrap();
        for (rel, tuple) in facts {
            db.insert_fact(rel, tuple).unwrap();
        }
        db
    })
}

fn rename_nulls_db(d: &Database, map: &BTreeMap<String, String>) -> Database {
    let mut out = Database::new();
    for (name, &arity) in d.schema() {
        out.declare_relation(name, arity).unwrap();
    }
    for (name, tuple) in d.facts() {
        let renamed = tuple
            .iter()
            .map(|v| match v {
                Value::Null(n) => Value::null(map[n].clone()),
                c => c.clone(),
            })
            .collect();
        out.insert_fact(name, renamed).unwrap();
    }
    out
}

fn rename_nulls_tuple(t: &[Value], map: &BTreeMap<String, String>) -> Vec<Value> {
    t.iter()
        .map(|v| match v {
            Value::Null(n) => Value::null(map[n].clone()),
            c => c.clone(),
        })
        .collect()
}

proptest! {
    #[test]
    fn database_text_round_trips(d in db_strategy()) {
        let text = d.to_text();
        prop_assert_eq!(Database::from_text(&text).unwrap(), d);
    }

    /// Naive evaluation commutes with bijective renaming of nulls.
    #[test]
    fn eval_is_generic_in_null_names(d in db_strategy(), qi in 0..10usize) {
        let q = &ucq_pool()[qi];
        let map: BTreeMap<String, String> = d
            .nulls()
            .into_iter()
            .map(|n| (n.clone(), format!("renamed_{n}")))
            .collect();
        let renamed = rename_nulls_db(&d, &map);
        let before = eval_fo(q, &d).unwrap();
        let after = eval_fo(q, &renamed).unwrap();
        let mapped: BTreeSet<Vec<Value>> = before
            .tuples
            .iter()
            .map(|t| rename_nulls_tuple(t, &map))
            .collect();
        prop_assert_eq!(after.tuples, mapped);
    }

    /// Valuations commute with bijective renaming of nulls:
    /// (v o rho^-1)(rho(d)) = v(d).
    #[test]
    fn apply_valuation_is_generic(d in db_strategy(), picks in proptest::collection::vec(constant_strategy(), 8)) {
        let nulls: Vec<String> = d.nulls().into_iter().collect();
        let v = Valuation::from_pairs(
            nulls
                .iter()
                .enumerate()
                .map(|(i, n)| (n.clone(), picks[i % picks.len()].clone())),
        );
        let map: BTreeMap<String, String> = nulls
            .iter()
            .map(|n| (n.clone(), format!("rho_{n}")))
            .collect();
        let renamed_db = rename_nulls_db(&d, &map);
        let v_after_rho = Valuation::from_pairs(
            nulls
                .iter()
                .map(|n| (map[n].clone(), v.get(n).unwrap().clone())),
        );
        prop_assert_eq!(v_after_rho.apply(&renamed_db).unwrap(), v.apply(&d).unwrap());
    }

    /// UCQs are monotone: adding facts never removes answers.
    #[test]
    fn ucqs_are_monotone(d in db_strategy(), extra in db_strategy(), qi in 0..10usize) {
        let q = &ucq_pool()[qi];
        let mut bigger = d.clone();
        for (rel, tuple) in extra.facts() {
            bigger.insert_fact(rel, tuple.clone()).unwrap();
        }
        let small = eval_fo(q, &d).unwrap();
        let large = eval_fo(q, &bigger).unwrap();
        prop_assert!(small.tuples.is_subset(&large.tuples));
    }
}

proptest! {
    /// Naive evaluation also commutes with renaming constants that the
    /// query does not mention.
    #[test]
    fn eval_is_generic_in_foreign_constants(d in db_strategy(), qi in 0..10usize) {
        let q = &ucq_pool()[qi];
        let q_consts = q.constants();
        let shift = |v: &Value| match v {
            Value::Const(Constant::Int(n)) if !q_consts.contains(&Constant::Int(*n)) => {
                Value::int(n + 100)
            }
            other => other.clone(),
        };
        let mut renamed = Database::new();
        for (name, &arity) in d.schema() {
            renamed.declare_relation(name, arity).unwrap();
        }
        for (name, tuple) in d.facts() {
            renamed
                .insert_fact(name, tuple.iter().map(&shift).collect())
                .unwrap();
        }
        let before = eval_fo(q, &d).unwrap();
        let after = eval_fo(q, &renamed).unwrap();
        let mapped: BTreeSet<Vec<Value>> = before
            .tuples
            .iter()
            .map(|t| t.iter().map(&shift).collect())
            .collect();
        prop_assert_eq!(after.tuples, mapped);
    }
}

/// Random small conjunctive queries whose free variables all occur in
/// relational atoms, so the strict NRV conversion applies.
fn random_cq(rng: &mut Rng) -> Formula {
    let vars = ["x", "y", "z", "w"];
    let n_atoms = 1 + rng.below(3);
    let mut atoms = Vec::new();
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for _ in 0..n_atoms {
        let term = |rng: &mut Rng, used: &mut BTreeSet<&str>| -> Term {
            if rng.chance(25) {
                Term::int(1 + rng.below(3) as i64)
            } else {
                let v = *rng.pick(&vars);
                used.insert(v);
                Term::var(v)
            }
        };
        let atom = match rng.below(3) {
            0 => Formula::rel("R", vec![term(rng, &mut used), term(rng, &mut used)]),
            1 => Formula::rel("S", vec![term(rng, &mut used), term(rng, &mut used)]),
            _ => Formula::rel("U", vec![term(rng, &mut used)]),
        };
        atoms.push(atom);
    }
    // maybe an equality among used variables or a constant
    if !used.is_empty() && rng.chance(50) {
        let a: &str = rng.pick(&used.iter().copied().collect::<Vec<_>>());
        let b = if rng.chance(50) {
            Term::int(1 + rng.below(3) as i64)
        } else {
            Term::var(*rng.pick(&used.iter().copied().collect::<Vec<_>>()))
        };
        atoms.push(Formula::Eq(Term::var(a), b));
    }
    // quantify a random subset of the used variables
    let bound: Vec<String> = used
        .iter()
        .filter(|_| rng.chance(50))
        .map(|v| v.to_string())
        .collect();
    Formula::exists(bound, Formula::and(atoms))
}

#[test]
fn nrv_conversion_preserves_naive_semantics() {
    let mut rng = Rng::new(0x9e3);
    let params = RandomParams::default();
    let mut checked = 0usize;
    for i in 0..150u64 {
        let q = random_cq(&mut rng);
        let nrv = match to_nrv(&q) {
            Ok(nrv) => nrv,
            Err(QueryError::Unsupported(_)) => continue,
            Err(e) => panic!("unexpected error {e} for {q}"),
        };
        nrv.validate().unwrap();
        let back = nrv.to_formula();
        let d = gen_random(9000 + i, &params).db;
        assert_eq!(
            eval_fo(&q, &d).unwrap().tuples,
            eval_fo(&back, &d).unwrap().tuples,
            "query {q} vs NRV {back}"
        );
        checked += 1;
    }
    assert!(checked > 100, "only {checked} queries exercised");
}

#[test]
fn dnf_conversion_preserves_naive_semantics() {
    let params = RandomParams::default();
    let pool = certalog::fixtures::bccq_pool();
    for (qi, q) in pool.iter().enumerate() {
        let plain = to_dnf_bccq(q, false).unwrap();
        let negated = to_dnf_bccq(q, true).unwrap();
        for seed in 0..40u64 {
            let d = gen_random(11_000 + 100 * qi as u64 + seed, &params).db;
            let want = eval_fo(q, &d).unwrap();
            let got = eval_fo(&plain.to_formula(), &d).unwrap();
            assert_eq!(got.tuples, want.tuples, "q={q} db:\n{d}");
            let want_neg = eval_fo(&Formula::not(q.clone()), &d).unwrap();
            let got_neg = eval_fo(&negated.to_formula(), &d).unwrap();
            assert_eq!(got_neg.tuples, want_neg.tuples, "!q for q={q} db:\n{d}");
        }
    }
}

/// cert is contained in best, and when cert is nonempty the two coincide.
#[test]
fn cert_is_contained_in_best() {
    let cfg = OracleConfig::default();
    let params = RandomParams {
        query_pool: best_ucq_pool(),
        ..RandomParams::default()
    };
    let mut nonempty = 0usize;
    for seed in 12_000..12_150u64 {
        let inst = gen_random(seed, &params);
        let cert = certain_oracle(&inst.query, &inst.db, &[], &cfg).unwrap();
        let best = best_oracle(&inst.query, &inst.db, &[], &cfg).unwrap();
        assert!(
            cert.tuples.is_subset(&best.tuples),
            "cert not within best at seed {seed}"
        );
        if !cert.tuples.is_empty() {
            nonempty += 1;
            assert_eq!(cert.tuples, best.tuples, "cert nonempty but != best at {seed}");
        }
        // the dominance order is strict, so maximal candidates always exist
        if !inst.query.answer_vars().is_empty() && !inst.db.adom().is_empty() {
            assert!(!best.tuples.is_empty(), "best empty at seed {seed}");
        }
    }
    assert!(nonempty > 20, "corpus exercised only {nonempty} nonempty certs");
}

/// The support-inclusion formula selects exactly the pairs whose oracle
/// supports are included.
#[test]
fn support_inclusion_formula_matches_oracle_supports() {
    let cfg = OracleConfig::default();
    let params = RandomParams::default();
    // unary queries keep the pair space small
    let queries = [
        parse_query("exists y (U(y) & R(y, x))").unwrap(),
        parse_query("exists y (R(x, y)) | U(x)").unwrap(),
        parse_query("U(x)").unwrap(),
    ];
    for (qi, q) in queries.iter().enumerate() {
        let incl = build_support_inclusion(q).unwrap();
        for seed in 0..25u64 {
            let d = gen_random(13_000 + 100 * qi as u64 + seed, &params).db;
            let ans = eval_fo(&incl.formula, &d).unwrap();

            let mut domain: BTreeSet<Value> = d.adom();
            domain.extend(q.constants().into_iter().map(Value::Const));
            let supports: BTreeMap<Value, BTreeSet<String>> = domain
                .iter()
                .map(|v| {
                    let s = support_of(q, &d, &[], std::slice::from_ref(v), &cfg)
                        .unwrap()
                        .iter()
                        .map(|p| p.to_string())
                        .collect();
                    (v.clone(), s)
                })
                .collect();

            for s in &domain {
                for t in &domain {
                    let expected = supports[s].is_subset(&supports[t]);
                    // columns are the sorted pair of variables
                    let mut cols = vec![
                        (incl.left_vars[0].clone(), s.clone()),
                        (incl.right_vars[0].clone(), t.clone()),
                    ];
                    cols.sort();
                    let tuple: Vec<Value> = cols.into_iter().map(|(_, v)| v).collect();
                    assert_eq!(
                        ans.tuples.contains(&tuple),
                        expected,
                        "incl({s}, {t}) on q={q} db:\n{d}"
                    );
                }
            }
        }
    }
}
