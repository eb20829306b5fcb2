//! The classical chase with EGDs: repeatedly unify the two values an EGD
//! forces to be equal, failing when both are distinct constants. On
//! success the result satisfies the EGDs naively, and naive evaluation of
//! a UCQ over it yields the certain answers under the EGDs.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Database, Egd, ModelError, Value};

/// Chooses which pending violation to apply next.
pub type ViolationPicker<'a> = dyn FnMut(&[(Value, Value)]) -> usize + 'a;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChaseOutcome {
    Complete(Database),
    /// Some chase step had to equate two distinct constants: no valuation
    /// is consistent with the EGDs.
    Inconsistent,
}

impl ChaseOutcome {
    pub fn database(&self) -> Option<&Database> {
        match self {
            ChaseOutcome::Complete(d) => Some(d),
            ChaseOutcome::Inconsistent => None,
        }
    }
}

/// All value pairs currently forced equal by some EGD but not yet equal,
/// in deterministic order.
fn violations(d: &Database, sigma: &[Egd]) -> Result<Vec<(Value, Value)>, ModelError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for egd in sigma {
        let (z, z2) = egd.head();
        for env in egd.matches(d)? {
            let (a, b) = (env[z].clone(), env[z2].clone());
            if a != b && seen.insert((a.clone(), b.clone())) {
                out.push((a, b));
            }
        }
    }
    Ok(out)
}

/// Replaces `from` by `to` everywhere in the database.
fn substitute(d: &Database, from: &Value, to: &Value) -> Database {
    let mut out = Database::new();
    for (name, &arity) in d.schema() {
        out.declare_relation(name, arity).unwrap();
    }
    for (name, tuple) in d.facts() {
        let new: Vec<Value> = tuple
            .iter()
            .map(|v| if v == from { to.clone() } else { v.clone() })
            .collect();
        out.insert_fact(name, new).unwrap();
    }
    out
}

/// One unification step: equate `a` and `b`, returning the new database
/// plus the (dropped, kept) values. Null-null unification keeps the
/// canonically smaller null name, for deterministic output.
fn unify(d: &Database, a: &Value, b: &Value) -> Option<(Database, Value, Value)> {
    let (dropped, kept) = match (a, b) {
        (Value::Const(_), Value::Const(_)) => return None,
        (Value::Null(_), Value::Const(_)) => (a.clone(), b.clone()),
        (Value::Const(_), Value::Null(_)) => (b.clone(), a.clone()),
        (Value::Null(_), Value::Null(_)) => {
            if a < b {
                (b.clone(), a.clone())
            } else {
                (a.clone(), b.clone())
            }
        }
    };
    Some((substitute(d, &dropped, &kept), dropped, kept))
}

/// A completed chase together with the unification map it applied: for
/// each null of the input database, the value that replaced it (nulls not
/// in the map survived unchanged).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChasedDatabase {
    pub database: Database,
    pub substitution: BTreeMap<String, Value>,
}

impl ChasedDatabase {
    /// Applies the unification map to a tuple over the input database.
    pub fn map_tuple(&self, tuple: &[Value]) -> Vec<Value> {
        tuple
            .iter()
            .map(|v| match v {
                Value::Null(name) => self.substitution.get(name).cloned().unwrap_or_else(|| v.clone()),
                Value::Const(_) => v.clone(),
            })
            .collect()
    }
}

/// The chase with a caller-chosen application order, for confluence tests.
pub fn chase_with(
    d: &Database,
    sigma: &[Egd],
    pick: &mut ViolationPicker,
) -> Result<ChaseOutcome, ModelError> {
    Ok(match chase_mapped_with(d, sigma, pick)? {
        Some(chased) => ChaseOutcome::Complete(chased.database),
        None => ChaseOutcome::Inconsistent,
    })
}

fn chase_mapped_with(
    d: &Database,
    sigma: &[Egd],
    pick: &mut ViolationPicker,
) -> Result<Option<ChasedDatabase>, ModelError> {
    let mut db = d.clone();
    let mut substitution: BTreeMap<String, Value> = BTreeMap::new();
    loop {
        let pending = violations(&db, sigma)?;
        if pending.is_empty() {
            return Ok(Some(ChasedDatabase {
                database: db,
                substitution,
            }));
        }
        let (a, b) = &pending[pick(&pending).min(pending.len() - 1)];
        let Some((next, dropped, kept)) = unify(&db, a, b) else {
            return Ok(None);
        };
        db = next;
        for v in substitution.values_mut() {
            if *v == dropped {
                *v = kept.clone();
            }
        }
        if let Value::Null(name) = &dropped {
            substitution.insert(name.clone(), kept);
        }
    }
}

/// The standard chase: applies the first applicable violation until none
/// remain (EGD chases always terminate) or a constant-constant clash
/// signals inconsistency.
pub fn chase(d: &Database, sigma: &[Egd]) -> Result<ChaseOutcome, ModelError> {
    chase_with(d, sigma, &mut |_| 0)
}

/// The chase, also reporting which null each unification step replaced.
/// `None` means inconsistency.
pub fn chase_mapped(d: &Database, sigma: &[Egd]) -> Result<Option<ChasedDatabase>, ModelError> {
    chase_mapped_with(d, sigma, &mut |_| 0)
}

/// Certain answers of a UCQ via the chase: a candidate tuple over the
/// input database is certain exactly when its image under the chase's
/// unification map is a naive answer over the chased database. `None`
/// means the chase failed, i.e. certainty is vacuous.
pub fn certain_answers_via_chase(
    q: &crate::query::Formula,
    d: &Database,
    sigma: &[Egd],
) -> Result<Option<crate::eval::AnswerSet>, ModelError> {
    let Some(chased) = chase_mapped(d, sigma)? else {
        return Ok(None);
    };
    let answers = crate::eval::eval_fo(q, &chased.database)?;
    let vars = answers.vars.clone();
    let mut domain: BTreeSet<Value> = d.adom();
    domain.extend(q.constants().into_iter().map(Value::Const));
    let mut tuples: BTreeSet<Vec<Value>> = [Vec::new()].into_iter().collect();
    for _ in 0..vars.len() {
        tuples = tuples
            .iter()
            .flat_map(|t| {
                domain.iter().map(move |v| {
                    let mut t2 = t.clone();
                    t2.push(v.clone());
                    t2
                })
            })
            .collect();
    }
    tuples.retain(|t| answers.tuples.contains(&chased.map_tuple(t)));
    Ok(Some(crate::eval::AnswerSet { vars, tuples }))
}

/// Whether two databases are equal up to a bijective renaming of nulls.
/// Intended for tests at desk scale; the search is over permutations.
pub fn isomorphic_up_to_null_renaming(a: &Database, b: &Database) -> bool {
    let nulls_a: Vec<String> = a.nulls().into_iter().collect();
    let nulls_b: Vec<String> = b.nulls().into_iter().collect();
    if nulls_a.len() != nulls_b.len() {
        return false;
    }
    assert!(nulls_a.len() <= 8, "isomorphism search is for small databases");
    fn perms<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
        if items.is_empty() {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for (i, x) in items.iter().enumerate() {
            let mut rest = items.to_vec();
            rest.remove(i);
            for mut p in perms(&rest) {
                p.insert(0, x.clone());
                out.push(p);
            }
        }
        out
    }
    for perm in perms(&nulls_b) {
        let mut renamed = a.clone();
        // two-phase rename through temporaries to avoid collisions
        for (i, from) in nulls_a.iter().enumerate() {
            renamed = substitute(
                &renamed,
                &Value::Null(from.clone()),
                &Value::Null(format!("__tmp{i}")),
            );
        }
        for (i, to) in perm.iter().enumerate() {
            renamed = substitute(
                &renamed,
                &Value::Null(format!("__tmp{i}")),
                &Value::Null(to.clone()),
            );
        }
        if &renamed == b {
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::parse_egds;

    fn db(text: &str) -> Database {
        Database::from_text(text).unwrap()
    }

    fn key_r() -> Vec<Egd> {
        parse_egds("R(x, y) & R(x, z) -> y = z .").unwrap()
    }

    #[test]
    fn null_unifies_with_constant() {
        let d = db("R(1, _n1).\nR(1, 2).\nS(_n1).");
        let out = chase(&d, &key_r()).unwrap();
        // derivation of the frozen value: every consistent valuation
        // pattern must send _n1 to 2
        let q = crate::query::parse_query("R(x, y)").unwrap();
        let space = crate::oracle::enumerate_patterns(
            &d,
            &q,
            &key_r(),
            &crate::oracle::OracleConfig::default(),
        )
        .unwrap();
        let consistent: Vec<_> = space.consistent().collect();
        assert!(!consistent.is_empty());
        for p in &consistent {
            assert_eq!(p.valuation.get("n1"), Some(&crate::model::Constant::Int(2)));
        }
        assert_eq!(out, ChaseOutcome::Complete(db("R(1, 2).\nS(2).")));
    }

    #[test]
    fn constant_clash_is_inconsistent() {
        let d = db("R(1, 2).\nR(1, 3).");
        assert_eq!(chase(&d, &key_r()).unwrap(), ChaseOutcome::Inconsistent);
    }

    #[test]
    fn empty_sigma_leaves_database_unchanged() {
        let d = db("R(1, _n1).\nR(1, 2).");
        assert_eq!(chase(&d, &[]).unwrap(), ChaseOutcome::Complete(d));
    }

    #[test]
    fn null_null_unification_keeps_smaller_name() {
        let d = db("R(1, _b).\nR(1, _a).");
        let out = chase(&d, &key_r()).unwrap();
        assert_eq!(out, ChaseOutcome::Complete(db("R(1, _a).")));
    }

    #[test]
    fn chase_is_idempotent() {
        let d = db("R(1, _n1).\nR(1, _n2).\nR(2, _n2).");
        let once = chase(&d, &key_r()).unwrap();
        let chased = once.database().unwrap();
        let twice = chase(chased, &key_r()).unwrap();
        assert_eq!(twice.database().unwrap(), chased);
    }

    #[test]
    fn confluence_up_to_null_renaming() {
        // a chain forcing several unifications; apply in different orders
        let d = db("R(1, _n1).\nR(1, _n2).\nR(_n1, _n3).\nR(_n1, _n4).\nS(_n3, _n4).");
        let first = chase(&d, &key_r()).unwrap();
        let mut step = 0usize;
        let scrambled = chase_with(&d, &key_r(), &mut |vs| {
            step += 1;
            (step * 7) % vs.len()
        })
        .unwrap();
        let last_choice = chase_with(&d, &key_r(), &mut |vs| vs.len() - 1).unwrap();
        for other in [&scrambled, &last_choice] {
            match (&first, other) {
                (ChaseOutcome::Complete(a), ChaseOutcome::Complete(b)) => {
                    assert!(isomorphic_up_to_null_renaming(a, b));
                }
                (x, y) => assert_eq!(&x, &y),
            }
        }
    }

    #[test]
    fn substitution_records_unifications() {
        let d = db("R(1, _n1).\nR(1, 2).\nR(2, _n2).\nR(2, _n3).");
        let chased = chase_mapped(&d, &key_r()).unwrap().unwrap();
        assert_eq!(chased.substitution.get("n1"), Some(&Value::int(2)));
        // _n2 and _n3 unify; the smaller name survives
        assert_eq!(chased.substitution.get("n3"), Some(&Value::null("n2")));
        assert_eq!(
            chased.map_tuple(&[Value::null("n1"), Value::null("n3")]),
            vec![Value::int(2), Value::null("n2")]
        );
    }

    #[test]
    fn certain_via_chase_keeps_unified_null_answers() {
        // the chase collapses _n1 into 2; (1, _n1) is still a certain
        // answer over the original database
        let q = crate::query::parse_query("R(x, y)").unwrap();
        let d = db("R(1, _n1).\nR(1, 2).");
        let ans = certain_answers_via_chase(&q, &d, &key_r()).unwrap().unwrap();
        assert!(ans.tuples.contains(&vec![Value::int(1), Value::int(2)]));
        assert!(ans.tuples.contains(&vec![Value::int(1), Value::null("n1")]));
        assert_eq!(ans.tuples.len(), 2);
    }

    #[test]
    fn certain_via_chase_none_on_inconsistency() {
        let q = crate::query::parse_query("R(x, y)").unwrap();
        let d = db("R(1, 2).\nR(1, 3).");
        assert!(certain_answers_via_chase(&q, &d, &key_r()).unwrap().is_none());
    }

    #[test]
    fn isomorphism_check_distinguishes() {
        let a = db("R(_x, _y).");
        let b = db("R(_p, _p).");
        assert!(!isomorphic_up_to_null_renaming(&a, &b));
        let c = db("R(_q, _r).");
        assert!(isomorphic_up_to_null_renaming(&a, &c));
    }
}
