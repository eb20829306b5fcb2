use std::collections::BTreeSet;

use crate::lex::{tokenize, ParseError, TokenKind, Tokens};
use crate::model::Value;
use crate::query::{Formula, RawEgd, Term};

const KEYWORDS: [&str; 5] = ["exists", "forall", "null", "true", "false"];

/// Parses a formula in the query grammar.
///
/// Atoms `R(t1, ..., tk)`, equalities `t1 = t2`, connectives `&`, `|`, `!`,
/// quantifiers `exists x1 x2 (...)` and `forall x (...)`, difference sugar
/// `A - B` for `A & !(B)`, `null(t)` tests, constants as integers or
/// double-quoted strings, variables as bare identifiers. Free variables are
/// the answer variables.
pub fn parse_query(text: &str) -> Result<Formula, ParseError> {
    let mut toks = Tokens::new(tokenize(text)?);
    let f = parse_or(&mut toks)?;
    if !toks.at_eof() {
        return Err(toks.error(format!("unexpected {}", toks.peek().kind)));
    }
    Ok(f)
}

fn parse_or(toks: &mut Tokens) -> Result<Formula, ParseError> {
    let mut parts = vec![parse_and(toks)?];
    while toks.peek().kind == TokenKind::Pipe {
        toks.next();
        parts.push(parse_and(toks)?);
    }
    Ok(Formula::or(parts))
}

fn parse_and(toks: &mut Tokens) -> Result<Formula, ParseError> {
    let mut parts = vec![parse_diff(toks)?];
    while toks.peek().kind == TokenKind::Amp {
        toks.next();
        parts.push(parse_diff(toks)?);
    }
    Ok(Formula::and(parts))
}

fn parse_diff(toks: &mut Tokens) -> Result<Formula, ParseError> {
    let mut f = parse_unary(toks)?;
    while toks.peek().kind == TokenKind::Minus {
        toks.next();
        let rhs = parse_unary(toks)?;
        f = Formula::and(vec![f, Formula::not(rhs)]);
    }
    Ok(f)
}

fn parse_unary(toks: &mut Tokens) -> Result<Formula, ParseError> {
    match &toks.peek().kind {
        TokenKind::Bang => {
            toks.next();
            Ok(Formula::not(parse_unary(toks)?))
        }
        TokenKind::Ident(name) if name == "exists" || name == "forall" => {
            let forall = name == "forall";
            toks.next();
            let mut vars = Vec::new();
            loop {
                match &toks.peek().kind {
                    TokenKind::Ident(v) if !KEYWORDS.contains(&v.as_str()) => {
                        vars.push(v.clone());
                        toks.next();
                    }
                    TokenKind::LParen if !vars.is_empty() => break,
                    _ => {
                        return Err(toks.error(format!(
                            "expected quantified variable or `(`, found {}",
                            toks.peek().kind
                        )))
                    }
                }
            }
            toks.expect(&TokenKind::LParen)?;
            let body = parse_or(toks)?;
            toks.expect(&TokenKind::RParen)?;
            Ok(if forall {
                Formula::forall(vars, body)
            } else {
                Formula::exists(vars, body)
            })
        }
        _ => parse_primary(toks),
    }
}

fn parse_primary(toks: &mut Tokens) -> Result<Formula, ParseError> {
    let t = toks.next();
    match t.kind {
        TokenKind::LParen => {
            let f = parse_or(toks)?;
            toks.expect(&TokenKind::RParen)?;
            Ok(f)
        }
        TokenKind::Ident(name) if name == "true" => Ok(Formula::tru()),
        TokenKind::Ident(name) if name == "false" => Ok(Formula::fls()),
        TokenKind::Ident(name) if name == "null" => {
            toks.expect(&TokenKind::LParen)?;
            let term = parse_term(toks)?;
            toks.expect(&TokenKind::RParen)?;
            Ok(Formula::IsNull(term))
        }
        TokenKind::Ident(name) => {
            if toks.peek().kind == TokenKind::LParen {
                toks.next();
                let mut terms = Vec::new();
                if toks.peek().kind != TokenKind::RParen {
                    loop {
                        terms.push(parse_term(toks)?);
                        if toks.peek().kind == TokenKind::Comma {
                            toks.next();
                        } else {
                            break;
                        }
                    }
                }
                toks.expect(&TokenKind::RParen)?;
                Ok(Formula::rel(name, terms))
            } else {
                // bare identifier: must be the left side of an equality
                finish_equality(toks, Term::Var(name), t.line, t.col)
            }
        }
        TokenKind::Int(n) => finish_equality(toks, Term::int(n), t.line, t.col),
        TokenKind::Str(s) => finish_equality(toks, Term::str(s), t.line, t.col),
        other => Err(ParseError::new(
            t.line,
            t.col,
            format!("expected a formula, found {other}"),
        )),
    }
}

fn finish_equality(
    toks: &mut Tokens,
    left: Term,
    line: usize,
    col: usize,
) -> Result<Formula, ParseError> {
    if toks.peek().kind != TokenKind::Eq {
        return Err(ParseError::new(
            line,
            col,
            "a bare term must be part of an equality `t1 = t2`",
        ));
    }
    toks.next();
    let right = parse_term(toks)?;
    Ok(Formula::Eq(left, right))
}

fn parse_term(toks: &mut Tokens) -> Result<Term, ParseError> {
    let t = toks.next();
    match t.kind {
        TokenKind::Ident(v) if !KEYWORDS.contains(&v.as_str()) => Ok(Term::Var(v)),
        TokenKind::Int(n) => Ok(Term::int(n)),
        TokenKind::Str(s) => Ok(Term::str(s)),
        other => Err(ParseError::new(
            t.line,
            t.col,
            format!("expected a term, found {other}"),
        )),
    }
}

/// Parses a constraint file: one EGD per line in the form
/// `R(x, y) & R(x, z) -> y = z .` Bodies may repeat variables and may
/// include explicit equalities; `normalize_egd` turns the result into
/// normal form.
pub fn parse_raw_egds(text: &str) -> Result<Vec<RawEgd>, ParseError> {
    let mut toks = Tokens::new(tokenize(text)?);
    let mut out = Vec::new();
    while !toks.at_eof() {
        out.push(parse_raw_egd(&mut toks)?);
    }
    Ok(out)
}

fn parse_raw_egd(toks: &mut Tokens) -> Result<RawEgd, ParseError> {
    let mut atoms = Vec::new();
    let mut equalities = Vec::new();
    loop {
        // each conjunct is either R(t1, ..., tk) or t1 = t2
        let t = toks.next();
        match t.kind {
            TokenKind::Ident(name) if toks.peek().kind == TokenKind::LParen => {
                toks.next();
                let mut terms = Vec::new();
                if toks.peek().kind != TokenKind::RParen {
                    loop {
                        terms.push(parse_term(toks)?);
                        if toks.peek().kind == TokenKind::Comma {
                            toks.next();
                        } else {
                            break;
                        }
                    }
                }
                toks.expect(&TokenKind::RParen)?;
                atoms.push((name, terms));
            }
            TokenKind::Ident(v) => {
                toks.expect(&TokenKind::Eq)?;
                equalities.push((Term::Var(v), parse_term(toks)?));
            }
            TokenKind::Int(n) => {
                toks.expect(&TokenKind::Eq)?;
                equalities.push((Term::int(n), parse_term(toks)?));
            }
            TokenKind::Str(s) => {
                toks.expect(&TokenKind::Eq)?;
                equalities.push((Term::str(s), parse_term(toks)?));
            }
            other => {
                return Err(ParseError::new(
                    t.line,
                    t.col,
                    format!("expected an EGD body conjunct, found {other}"),
                ))
            }
        }
        match toks.peek().kind {
            TokenKind::Amp => {
                toks.next();
            }
            TokenKind::Arrow => break,
            _ => return Err(toks.error(format!("expected `&` or `->`, found {}", toks.peek().kind))),
        }
    }
    toks.expect(&TokenKind::Arrow)?;
    let left = parse_term(toks)?;
    toks.expect(&TokenKind::Eq)?;
    let right = parse_term(toks)?;
    toks.expect(&TokenKind::Dot)?;
    Ok(RawEgd {
        body_atoms: atoms,
        body_equalities: equalities,
        head: (left, right),
    })
}

/// Parses one value: `1`, `"a"` or `_n1`.
pub fn parse_value(toks: &mut Tokens) -> Result<Value, ParseError> {
    let t = toks.next();
    match t.kind {
        TokenKind::Int(n) => Ok(Value::int(n)),
        TokenKind::Str(s) => Ok(Value::str(s)),
        TokenKind::Null(n) => Ok(Value::null(n)),
        other => Err(ParseError::new(
            t.line,
            t.col,
            format!("expected a value, found {other}"),
        )),
    }
}

/// Parses a tuple: `()` for the empty tuple or `v1, v2, ...`, optionally
/// parenthesized.
pub fn parse_tuple_text(text: &str) -> Result<Vec<Value>, ParseError> {
    let mut toks = Tokens::new(tokenize(text)?);
    let tuple = parse_tuple(&mut toks)?;
    if !toks.at_eof() {
        return Err(toks.error(format!("unexpected {}", toks.peek().kind)));
    }
    Ok(tuple)
}

fn parse_tuple(toks: &mut Tokens) -> Result<Vec<Value>, ParseError> {
    let mut parens = false;
    if toks.peek().kind == TokenKind::LParen {
        toks.next();
        parens = true;
        if toks.peek().kind == TokenKind::RParen {
            toks.next();
            return Ok(Vec::new());
        }
    }
    let mut tuple = vec![parse_value(toks)?];
    while toks.peek().kind == TokenKind::Comma {
        toks.next();
        tuple.push(parse_value(toks)?);
    }
    if parens {
        toks.expect(&TokenKind::RParen)?;
    }
    Ok(tuple)
}

/// Parses a set of tuples: `{}`, `{(1, 2); (3, 4)}`, or `{()}`.
pub fn parse_tuple_set_text(text: &str) -> Result<BTreeSet<Vec<Value>>, ParseError> {
    let mut toks = Tokens::new(tokenize(text)?);
    let set = parse_tuple_set(&mut toks)?;
    if !toks.at_eof() {
        return Err(toks.error(format!("unexpected {}", toks.peek().kind)));
    }
    Ok(set)
}

fn parse_tuple_set(toks: &mut Tokens) -> Result<BTreeSet<Vec<Value>>, ParseError> {
    toks.expect(&TokenKind::LBrace)?;
    let mut set = BTreeSet::new();
    if toks.peek().kind != TokenKind::RBrace {
        loop {
            set.insert(parse_tuple(toks)?);
            if toks.peek().kind == TokenKind::Semi {
                toks.next();
            } else {
                break;
            }
        }
    }
    toks.expect(&TokenKind::RBrace)?;
    Ok(set)
}

/// Parses a family of tuple sets: `[]` or `[{...}; {...}]`.
pub fn parse_family_text(text: &str) -> Result<BTreeSet<BTreeSet<Vec<Value>>>, ParseError> {
    let mut toks = Tokens::new(tokenize(text)?);
    toks.expect(&TokenKind::LBracket)?;
    let mut family = BTreeSet::new();
    if toks.peek().kind != TokenKind::RBracket {
        loop {
            family.insert(parse_tuple_set(&mut toks)?);
            if toks.peek().kind == TokenKind::Semi {
                toks.next();
            } else {
                break;
            }
        }
    }
    toks.expect(&TokenKind::RBracket)?;
    if !toks.at_eof() {
        return Err(toks.error(format!("unexpected {}", toks.peek().kind)));
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::QueryClass;

    #[test]
    fn parses_quantified_query() {
        let f = parse_query("exists y (R(y) & S(y, x))").unwrap();
        assert_eq!(f.classify(), QueryClass::Cq);
        assert_eq!(f.to_string(), "exists y (R(y) & S(y, x))");
    }

    #[test]
    fn reports_line_and_column() {
        let err = parse_query("R(x) &\n& S(x)").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.col, 1);
    }

    #[test]
    fn rejects_trailing_garbage() {
        assert!(parse_query("R(x) S(y)").is_err());
    }

    #[test]
    fn parses_constants() {
        let f = parse_query("R(1, \"a\") & x = \"b\"").unwrap();
        assert_eq!(f.constants().len(), 3);
    }

    #[test]
    fn parses_raw_egd_line() {
        let raw = parse_raw_egds("R(x, y) & R(x, z) -> y = z .").unwrap();
        assert_eq!(raw.len(), 1);
        assert_eq!(raw[0].body_atoms.len(), 2);
        assert_eq!(raw[0].body_equalities.len(), 0);
    }

    #[test]
    fn parses_payloads() {
        assert_eq!(parse_tuple_text("()").unwrap(), Vec::<Value>::new());
        assert_eq!(
            parse_tuple_text("1, _n1").unwrap(),
            vec![Value::int(1), Value::null("n1")]
        );
        let set = parse_tuple_set_text("{(1); (2)}").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(parse_tuple_set_text("{}").unwrap().len(), 0);
        let fam = parse_family_text("[{(1)}; {}]").unwrap();
        assert_eq!(fam.len(), 2);
    }
}
