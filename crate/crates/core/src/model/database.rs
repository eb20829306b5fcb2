use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::lex::{tokenize, ParseError, TokenKind, Tokens};
use crate::model::{Constant, ModelError, Value};

/// A database: a schema (relation name to arity) plus finite relations of
/// value tuples. Relations are sets, so duplicate facts collapse.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Database {
    schema: BTreeMap<String, usize>,
    relations: BTreeMap<String, BTreeSet<Vec<Value>>>,
}

impl Database {
    pub fn new() -> Database {
        Database::default()
    }

    /// Declares a relation, possibly empty. Re-declaring with the same
    /// arity is a no-op; a different arity is an error.
    pub fn declare_relation(&mut self, name: &str, arity: usize) -> Result<(), ModelError> {
        match self.schema.get(name) {
            Some(&a) if a != arity => Err(ModelError::ArityConflict {
                relation: name.to_string(),
                declared: a,
                used: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.schema.insert(name.to_string(), arity);
                self.relations.insert(name.to_string(), BTreeSet::new());
                Ok(())
            }
        }
    }

    /// Inserts a fact, declaring the relation on first use.
    pub fn insert_fact(&mut self, name: &str, tuple: Vec<Value>) -> Result<(), ModelError> {
        self.declare_relation(name, tuple.len())?;
        self.relations.get_mut(name).unwrap().insert(tuple);
        Ok(())
    }

    pub fn schema(&self) -> &BTreeMap<String, usize> {
        &self.schema
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.schema.get(name).copied()
    }

    pub fn relation(&self, name: &str) -> Option<&BTreeSet<Vec<Value>>> {
        self.relations.get(name)
    }

    pub fn contains(&self, name: &str, tuple: &[Value]) -> bool {
        self.relations
            .get(name)
            .map(|r| r.contains(tuple))
            .unwrap_or(false)
    }

    pub fn fact_count(&self) -> usize {
        self.relations.values().map(|r| r.len()).sum()
    }

    /// All facts as `(relation, tuple)` pairs in canonical order.
    pub fn facts(&self) -> impl Iterator<Item = (&str, &Vec<Value>)> {
        self.relations
            .iter()
            .flat_map(|(name, rel)| rel.iter().map(move |t| (name.as_str(), t)))
    }

    /// The active domain: every value occurring in some fact.
    pub fn adom(&self) -> BTreeSet<Value> {
        self.facts().flat_map(|(_, t)| t.iter().cloned()).collect()
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        self.facts()
            .flat_map(|(_, t)| t.iter())
            .filter_map(|v| v.as_constant().cloned())
            .collect()
    }

    pub fn nulls(&self) -> BTreeSet<String> {
        self.facts()
            .flat_map(|(_, t)| t.iter())
            .filter_map(|v| match v {
                Value::Null(name) => Some(name.clone()),
                Value::Const(_) => None,
            })
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.facts().all(|(_, t)| t.iter().all(|v| !v.is_null()))
    }

    /// Parses the database text format: one fact per line, `R(1, _n1, "a").`,
    /// `#` comments, and `R/2.` to declare a possibly-empty relation.
    pub fn from_text(text: &str) -> Result<Database, ParseError> {
        let mut db = Database::new();
        let mut toks = Tokens::new(tokenize(text)?);
        while !toks.at_eof() {
            let t = toks.next();
            let name = match t.kind {
                TokenKind::Ident(name) => name,
                other => {
                    return Err(ParseError::new(
                        t.line,
                        t.col,
                        format!("expected relation name, found {other}"),
                    ))
                }
            };
            match toks.peek().kind {
                TokenKind::Slash => {
                    toks.next();
                    let t = toks.next();
                    let arity = match t.kind {
                        TokenKind::Int(n) if n >= 0 => n as usize,
                        other => {
                            return Err(ParseError::new(
                                t.line,
                                t.col,
                                format!("expected arity, found {other}"),
                            ))
                        }
                    };
                    db.declare_relation(&name, arity)
                        .map_err(|e| ParseError::new(t.line, t.col, e.to_string()))?;
                }
                _ => {
                    toks.expect(&TokenKind::LParen)?;
                    let mut tuple = Vec::new();
                    if toks.peek().kind != TokenKind::RParen {
                        loop {
                            let t = toks.next();
                            let v = match t.kind {
                                TokenKind::Int(n) => Value::int(n),
                                TokenKind::Str(s) => Value::str(s),
                                TokenKind::Null(n) => Value::null(n),
                                other => {
                                    return Err(ParseError::new(
                                        t.line,
                                        t.col,
                                        format!("expected value, found {other}"),
                                    ))
                                }
                            };
                            tuple.push(v);
                            if toks.peek().kind == TokenKind::Comma {
                                toks.next();
                            } else {
                                break;
                            }
                        }
                    }
                    let close = toks.expect(&TokenKind::RParen)?;
                    db.insert_fact(&name, tuple)
                        .map_err(|e| ParseError::new(close.line, close.col, e.to_string()))?;
                }
            }
            toks.expect(&TokenKind::Dot)?;
        }
        Ok(db)
    }

    /// Deterministic rendering; `from_text(to_text(db)) == db`.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, rel) in &self.relations {
            if rel.is_empty() {
                writeln!(f, "{}/{}.", name, self.schema[name])?;
            }
            for tuple in rel {
                writeln!(f, "{}({}).", name, super::value::display_tuple(tuple))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn db(text: &str) -> Database {
        Database::from_text(text).unwrap()
    }

    #[test]
    fn parse_and_print_round_trip() {
        let d = db("# a comment\nR(1, _n1, \"a\").\nR(2, _n2, \"b\").\nS/2.\n");
        assert_eq!(d.arity("R"), Some(3));
        assert_eq!(d.arity("S"), Some(2));
        assert_eq!(d.fact_count(), 2);
        let reparsed = db(&d.to_text());
        assert_eq!(d, reparsed);
    }

    #[test]
    fn duplicate_facts_collapse() {
        let d = db("R(1).\nR(1).\n");
        assert_eq!(d.fact_count(), 1);
    }

    #[test]
    fn arity_conflict_is_an_error() {
        assert!(Database::from_text("R(1).\nR(1, 2).\n").is_err());
    }

    #[test]
    fn adom_splits_into_constants_and_nulls() {
        let d = db("R(1, _x).\nS(\"a\").\n");
        assert_eq!(d.adom().len(), 3);
        assert_eq!(d.constants().len(), 2);
        assert_eq!(d.nulls(), ["x".to_string()].into_iter().collect());
        assert!(!d.is_complete());
    }
}
