//! Program text: one rule per line `head :- a1, ..., an.`, facts as
//! `head.`, then a `%% FO LAYER` marker followed by the formula in the
//! query grammar. Lines starting with `%%` are otherwise comments.

use std::fmt;

use crate::datalog::{Atom, BodyAtom, DatalogProgram, Rule};
use crate::lex::{tokenize, ParseError, TokenKind, Tokens};
use crate::query::{parse_query, Term};

pub const FO_LAYER_MARKER: &str = "%% FO LAYER";

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{t}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BodyAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BodyAtom::Rel(a) => write!(f, "{a}"),
            BodyAtom::Eq(a, b) => write!(f, "{a} = {b}"),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            write!(f, " :- ")?;
            for (i, b) in self.body.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{b}")?;
            }
        }
        write!(f, ".")
    }
}

impl fmt::Display for DatalogProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        writeln!(f, "{FO_LAYER_MARKER}")?;
        writeln!(f, "{}", self.fo_layer)
    }
}

/// The inverse of `Display`: `parse_program(p.to_string()) == p`.
pub fn parse_program(text: &str) -> Result<DatalogProgram, ParseError> {
    let mut rule_lines = Vec::new();
    let mut fo_lines = Vec::new();
    let mut in_fo = false;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed == FO_LAYER_MARKER {
            if in_fo {
                return Err(ParseError::new(i + 1, 1, "duplicate FO layer marker"));
            }
            in_fo = true;
            continue;
        }
        if trimmed.starts_with("%%") {
            continue;
        }
        if in_fo {
            fo_lines.push(line);
        } else {
            rule_lines.push(line);
        }
    }
    if !in_fo {
        return Err(ParseError::new(1, 1, "missing `%% FO LAYER` marker"));
    }

    let mut toks = Tokens::new(tokenize(&rule_lines.join("\n"))?);
    let mut rules = Vec::new();
    while !toks.at_eof() {
        rules.push(parse_rule(&mut toks)?);
    }
    let fo_layer = parse_query(&fo_lines.join("\n"))?;
    Ok(DatalogProgram::new(rules, fo_layer))
}

fn parse_term(toks: &mut Tokens) -> Result<Term, ParseError> {
    let t = toks.next();
    match t.kind {
        TokenKind::Ident(v) => Ok(Term::Var(v)),
        TokenKind::Int(n) => Ok(Term::int(n)),
        TokenKind::Str(s) => Ok(Term::str(s)),
        other => Err(ParseError::new(
            t.line,
            t.col,
            format!("expected a term, found {other}"),
        )),
    }
}

fn parse_atom(toks: &mut Tokens, relation: String) -> Result<Atom, ParseError> {
    toks.expect(&TokenKind::LParen)?;
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
    Ok(Atom::new(relation, terms))
}

fn parse_rule(toks: &mut Tokens) -> Result<Rule, ParseError> {
    let t = toks.next();
    let name = match t.kind {
        TokenKind::Ident(name) => name,
        other => {
            return Err(ParseError::new(
                t.line,
                t.col,
                format!("expected a rule head, found {other}"),
            ))
        }
    };
    let head = parse_atom(toks, name)?;
    let mut body = Vec::new();
    if toks.peek().kind == TokenKind::ColonDash {
        toks.next();
        loop {
            let t = toks.next();
            let lit = match t.kind {
                TokenKind::Ident(name) if toks.peek().kind == TokenKind::LParen => {
                    BodyAtom::Rel(parse_atom(toks, name)?)
                }
                TokenKind::Ident(v) => {
                    toks.expect(&TokenKind::Eq)?;
                    BodyAtom::Eq(Term::Var(v), parse_term(toks)?)
                }
                TokenKind::Int(n) => {
                    toks.expect(&TokenKind::Eq)?;
                    BodyAtom::Eq(Term::int(n), parse_term(toks)?)
                }
                TokenKind::Str(s) => {
                    toks.expect(&TokenKind::Eq)?;
                    BodyAtom::Eq(Term::str(s), parse_term(toks)?)
                }
                other => {
                    return Err(ParseError::new(
                        t.line,
                        t.col,
                        format!("expected a body literal, found {other}"),
                    ))
                }
            };
            body.push(lit);
            if toks.peek().kind == TokenKind::Comma {
                toks.next();
            } else {
                break;
            }
        }
    }
    toks.expect(&TokenKind::Dot)?;
    Ok(Rule { head, body })
}
