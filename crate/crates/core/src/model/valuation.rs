use std::collections::BTreeMap;
use std::fmt;

use crate::model::{Constant, Database, ModelError, Value};

/// A map from null names to constants. Applying a valuation to a database
/// or a tuple replaces each null by its image and nothing else.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Valuation {
    map: BTreeMap<String, Constant>,
}

impl Valuation {
    pub fn new() -> Valuation {
        Valuation::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Valuation
    where
        I: IntoIterator<Item = (S, Constant)>,
        S: Into<String>,
    {
        Valuation {
            map: pairs.into_iter().map(|(n, c)| (n.into(), c)).collect(),
        }
    }

    pub fn bind(&mut self, null: impl Into<String>, c: Constant) {
        self.map.insert(null.into(), c);
    }

    pub fn get(&self, null: &str) -> Option<&Constant> {
        self.map.get(null)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Constant)> {
        self.map.iter()
    }

    pub fn is_total_on(&self, d: &Database) -> bool {
        d.nulls().iter().all(|n| self.map.contains_key(n))
    }

    pub fn apply_value(&self, v: &Value) -> Result<Value, ModelError> {
        match v {
            Value::Const(c) => Ok(Value::Const(c.clone())),
            Value::Null(name) => self
                .map
                .get(name)
                .map(|c| Value::Const(c.clone()))
                .ok_or_else(|| ModelError::MissingNull(name.clone())),
        }
    }

    pub fn apply_tuple(&self, tuple: &[Value]) -> Result<Vec<Value>, ModelError> {
        tuple.iter().map(|v| self.apply_value(v)).collect()
    }

    /// Replaces every null of `d` by its image; the result is null-free.
    /// Tuples that become equal collapse (set semantics). A null of `d`
    /// missing from the valuation is an error.
    pub fn apply(&self, d: &Database) -> Result<Database, ModelError> {
        let mut out = Database::new();
        for (name, &arity) in d.schema() {
            out.declare_relation(name, arity)?;
        }
        for (name, tuple) in d.facts() {
            out.insert_fact(name, self.apply_tuple(tuple)?)?;
        }
        Ok(out)
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (n, c)) in self.map.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "_{n} -> {c}")?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_nulls() {
        let d = Database::from_text("R(1, _n1).").unwrap();
        let v = Valuation::from_pairs([("n1", Constant::Int(2))]);
        let out = v.apply(&d).unwrap();
        assert_eq!(out, Database::from_text("R(1, 2).").unwrap());
    }

    #[test]
    fn collapses_duplicates() {
        // both nulls map to 1, so R(_n1) and R(1) collapse
        let d = Database::from_text("R(_n1).\nR(1).\nS(_n2, _n2).").unwrap();
        let v = Valuation::from_pairs([("n1", Constant::Int(1)), ("n2", Constant::Int(1))]);
        let out = v.apply(&d).unwrap();
        assert_eq!(out, Database::from_text("R(1).\nS(1, 1).").unwrap());
        assert_eq!(out.fact_count(), 2);
    }

    #[test]
    fn empty_valuation_keeps_complete_database() {
        let d = Database::from_text("R(1, 2).").unwrap();
        let out = Valuation::new().apply(&d).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn missing_null_is_an_error() {
        let d = Database::from_text("R(_n1).").unwrap();
        assert!(matches!(
            Valuation::new().apply(&d),
            Err(ModelError::MissingNull(n)) if n == "n1"
        ));
    }

    #[test]
    fn idempotent_on_null_free_result() {
        let d = Database::from_text("R(_n1, _n2).").unwrap();
        let v = Valuation::from_pairs([("n1", Constant::Int(1)), ("n2", Constant::Str("a".into()))]);
        let once = v.apply(&d).unwrap();
        let twice = v.apply(&once).unwrap();
        assert_eq!(once, twice);
        assert!(once.is_complete());
    }
}
