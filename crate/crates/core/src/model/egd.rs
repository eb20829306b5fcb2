use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{Database, ModelError, Value};

/// A relational atom in a (normalized) EGD body: distinct variables only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EgdAtom {
    pub relation: String,
    pub vars: Vec<String>,
}

/// A normalized equality-generating dependency
/// `forall u ((phi(u) & psi(u)) -> z = z')`.
///
/// Normal form: no variable occurs twice across the body atoms, all value
/// sharing is expressed by the equality set `psi`, and the head names two
/// distinct body variables. Bodies are constant-free.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Egd {
    body: Vec<EgdAtom>,
    equalities: Vec<(String, String)>,
    head: (String, String),
}

impl Egd {
    pub fn new(
        body: Vec<EgdAtom>,
        equalities: Vec<(String, String)>,
        head: (String, String),
    ) -> Result<Egd, ModelError> {
        if head.0 == head.1 {
            return Err(ModelError::InvalidEgd(format!(
                "head variables must be distinct, got {} = {}",
                head.0, head.1
            )));
        }
        let mut seen = BTreeSet::new();
        for atom in &body {
            for v in &atom.vars {
                if !seen.insert(v.clone()) {
                    return Err(ModelError::InvalidEgd(format!(
                        "variable {v} occurs twice in the body; repetitions belong in equalities"
                    )));
                }
            }
        }
        for (a, b) in &equalities {
            if !seen.contains(a) || !seen.contains(b) {
                return Err(ModelError::InvalidEgd(format!(
                    "equality {a} = {b} uses a variable not in the body"
                )));
            }
        }
        for h in [&head.0, &head.1] {
            if !seen.contains(h) {
                return Err(ModelError::InvalidEgd(format!(
                    "head variable {h} does not occur in the body"
                )));
            }
        }
        Ok(Egd {
            body,
            equalities,
            head,
        })
    }

    pub fn body(&self) -> &[EgdAtom] {
        &self.body
    }

    pub fn equalities(&self) -> &[(String, String)] {
        &self.equalities
    }

    pub fn head(&self) -> (&str, &str) {
        (&self.head.0, &self.head.1)
    }

    pub fn relations(&self) -> BTreeSet<String> {
        self.body.iter().map(|a| a.relation.clone()).collect()
    }

    /// Enumerates assignments of body variables to facts of `d` that satisfy
    /// all the equalities (values compared naively, nulls as themselves).
    pub fn matches(&self, d: &Database) -> Result<Vec<BTreeMap<String, Value>>, ModelError> {
        self.matches_impl(d, true)
    }

    /// Like `matches`, but without filtering by the equalities: every
    /// combination of facts for the body atoms. The equivalence closure
    /// needs these, since it checks the equalities up to the equivalence
    /// computed so far rather than literally.
    pub fn matches_unfiltered(
        &self,
        d: &Database,
    ) -> Result<Vec<BTreeMap<String, Value>>, ModelError> {
        self.matches_impl(d, false)
    }

    fn matches_impl(
        &self,
        d: &Database,
        filter: bool,
    ) -> Result<Vec<BTreeMap<String, Value>>, ModelError> {
        for atom in &self.body {
            match d.arity(&atom.relation) {
                None => return Err(ModelError::UnknownRelation(atom.relation.clone())),
                Some(a) if a != atom.vars.len() => {
                    return Err(ModelError::ArityConflict {
                        relation: atom.relation.clone(),
                        declared: a,
                        used: atom.vars.len(),
                    })
                }
                Some(_) => {}
            }
        }
        let mut out = Vec::new();
        let mut env = BTreeMap::new();
        self.match_rec(d, 0, filter, &mut env, &mut out);
        Ok(out)
    }

    fn match_rec(
        &self,
        d: &Database,
        i: usize,
        filter: bool,
        env: &mut BTreeMap<String, Value>,
        out: &mut Vec<BTreeMap<String, Value>>,
    ) {
        if i == self.body.len() {
            if !filter || self.equalities.iter().all(|(a, b)| env[a] == env[b]) {
                out.push(env.clone());
            }
            return;
        }
        let atom = &self.body[i];
        for fact in d.relation(&atom.relation).into_iter().flatten() {
            for (var, value) in atom.vars.iter().zip(fact) {
                env.insert(var.clone(), value.clone());
            }
            self.match_rec(d, i + 1, filter, env, out);
        }
        for var in &self.body[i].vars {
            env.remove(var);
        }
    }
}

impl fmt::Display for Egd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, atom) in self.body.iter().enumerate() {
            if i > 0 {
                write!(f, " & ")?;
            }
            write!(f, "{}({})", atom.relation, atom.vars.join(", "))?;
        }
        for (a, b) in &self.equalities {
            write!(f, " & {a} = {b}")?;
        }
        write!(f, " -> {} = {} .", self.head.0, self.head.1)
    }
}

/// Checks every EGD of `sigma` on `d`. The check is naive: nulls count as
/// distinct constants, so on complete databases this is the semantic check
/// and on incomplete ones the caller must treat it as such.
pub fn satisfies_egds(d: &Database, sigma: &[Egd]) -> Result<bool, ModelError> {
    for egd in sigma {
        let (z, z2) = egd.head();
        for env in egd.matches(d)? {
            if env[z] != env[z2] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn key_first_of_r() -> Egd {
        // R(u1, u2) & R(u3, u4) & u1 = u3 -> u2 = u4
        Egd::new(
            vec![
                EgdAtom {
                    relation: "R".into(),
                    vars: vec!["u1".into(), "u2".into()],
                },
                EgdAtom {
                    relation: "R".into(),
                    vars: vec!["u3".into(), "u4".into()],
                },
            ],
            vec![("u1".into(), "u3".into())],
            ("u2".into(), "u4".into()),
        )
        .unwrap()
    }

    #[test]
    fn key_violation_detected() {
        let d = Database::from_text("R(1, 2).\nR(1, 3).").unwrap();
        assert!(!satisfies_egds(&d, &[key_first_of_r()]).unwrap());
    }

    #[test]
    fn key_satisfied() {
        let d = Database::from_text("R(1, 2).").unwrap();
        assert!(satisfies_egds(&d, &[key_first_of_r()]).unwrap());
    }

    #[test]
    fn empty_sigma_always_holds() {
        let d = Database::from_text("R(1, 2).\nR(2, 2).").unwrap();
        assert!(satisfies_egds(&d, &[]).unwrap());
    }

    #[test]
    fn unknown_relation_is_schema_error() {
        let d = Database::from_text("S(1).").unwrap();
        assert!(matches!(
            satisfies_egds(&d, &[key_first_of_r()]),
            Err(ModelError::UnknownRelation(r)) if r == "R"
        ));
    }

    #[test]
    fn head_must_be_distinct_variables() {
        let r = Egd::new(
            vec![EgdAtom {
                relation: "R".into(),
                vars: vec!["u1".into(), "u2".into()],
            }],
            vec![],
            ("u1".into(), "u1".into()),
        );
        assert!(matches!(r, Err(ModelError::InvalidEgd(_))));
    }

    /// Independent oracle: check an EGD by enumerating every assignment of
    /// its variables over the active domain, rather than by per-atom
    /// matching.
    fn satisfied_by_exhaustive_assignment(d: &Database, egd: &Egd) -> bool {
        let vars: Vec<&String> = egd.body().iter().flat_map(|a| a.vars.iter()).collect();
        let adom: Vec<Value> = d.adom().into_iter().collect();
        let mut assignment = vec![0usize; vars.len()];
        loop {
            let env: BTreeMap<&String, &Value> = vars
                .iter()
                .zip(&assignment)
                .map(|(v, &i)| (*v, &adom[i]))
                .collect();
            let body_holds = egd.body().iter().all(|atom| {
                let tuple: Vec<Value> = atom.vars.iter().map(|v| env[v].clone()).collect();
                d.contains(&atom.relation, &tuple)
            }) && egd.equalities().iter().all(|(a, b)| env[a] == env[b]);
            if body_holds {
                let (z, z2) = egd.head();
                if env[&z.to_owned()] != env[&z2.to_owned()] {
                    return false;
                }
            }
            let mut i = 0;
            loop {
                if i == assignment.len() {
                    return true;
                }
                assignment[i] += 1;
                if assignment[i] == adom.len() {
                    assignment[i] = 0;
                    i += 1;
                } else {
                    break;
                }
            }
        }
    }

    #[test]
    fn matching_agrees_with_exhaustive_assignment_enumeration() {
        let egd = key_first_of_r();
        for text in [
            "R(1, 2).",
            "R(1, 2).\nR(1, 3).",
            "R(1, 2).\nR(2, 2).\nR(2, 3).",
            "R(_a, 1).\nR(_a, _b).",
            "R(_a, _b).\nR(_c, _d).\nR(_a, _d).",
        ] {
            let d = Database::from_text(text).unwrap();
            assert_eq!(
                satisfies_egds(&d, std::slice::from_ref(&egd)).unwrap(),
                satisfied_by_exhaustive_assignment(&d, &egd),
                "on {text}"
            );
        }
    }

    #[test]
    fn naive_check_treats_nulls_as_distinct() {
        // R(1, _a) and R(1, _b): naive check flags _a != _b as a violation
        let d = Database::from_text("R(1, _a).\nR(1, _b).").unwrap();
        assert!(!satisfies_egds(&d, &[key_first_of_r()]).unwrap());
        let d2 = Database::from_text("R(1, _a).\nR(2, _a).").unwrap();
        assert!(satisfies_egds(&d2, &[key_first_of_r()]).unwrap());
    }
}
