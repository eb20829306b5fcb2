//! Rendering of formulas in the query grammar; `parse_query` inverts it.

use std::fmt;

use crate::query::{Formula, Term};

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_ATOM: u8 = 3;

fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Or(fs) if fs.len() != 1 => PREC_OR,
        Formula::And(fs) if fs.len() > 1 => PREC_AND,
        _ => PREC_ATOM,
    }
}

fn write_at(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(f);
    let parens = p < min;
    if parens {
        write!(out, "(")?;
    }
    match f {
        Formula::Rel { relation, terms } => {
            write!(out, "{relation}(")?;
            for (i, t) in terms.iter().enumerate() {
                if i > 0 {
                    write!(out, ", ")?;
                }
                write!(out, "{t}")?;
            }
            write!(out, ")")?;
        }
        Formula::Eq(a, b) => write!(out, "{a} = {b}")?,
        Formula::IsNull(t) => write!(out, "null({t})")?,
        Formula::Not(g) => {
            write!(out, "!(")?;
            write_at(g, 0, out)?;
            write!(out, ")")?;
        }
        Formula::And(fs) => {
            if fs.is_empty() {
                write!(out, "true")?;
            } else {
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(out, " & ")?;
                    }
                    write_at(g, PREC_AND + 1, out)?;
                }
            }
        }
        Formula::Or(fs) => {
            if fs.is_empty() {
                write!(out, "false")?;
            } else {
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(out, " | ")?;
                    }
                    write_at(g, PREC_OR + 1, out)?;
                }
            }
        }
        Formula::Exists(vs, g) => {
            write!(out, "exists {} (", vs.join(" "))?;
            write_at(g, 0, out)?;
            write!(out, ")")?;
        }
        Formula::Forall(vs, g) => {
            write!(out, "forall {} (", vs.join(" "))?;
            write_at(g, 0, out)?;
            write!(out, ")")?;
        }
    }
    if parens {
        write!(out, ")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_at(self, 0, f)
    }
}

#[cfg(test)]
mod tests {
    use crate::query::parse_query;

    fn round_trip(text: &str) {
        let f = parse_query(text).unwrap();
        let printed = f.to_string();
        let reparsed = parse_query(&printed)
            .unwrap_or_else(|e| panic!("reparse of `{printed}` failed: {e}"));
        assert_eq!(f, reparsed, "round trip changed `{text}` -> `{printed}`");
    }

    #[test]
    fn display_round_trips() {
        for text in [
            "R(x)",
            "exists y (R(y) & S(y, x))",
            "R(x, y) & !(R(x, y) & x = y)",
            "forall x (R(x) | exists y (S(x, y)))",
            "R(1, \"a b\") | x = 2",
            "null(x) & !(null(y))",
            "true",
            "false",
            "exists x (R(x) & (S(x) | T(x)))",
        ] {
            round_trip(text);
        }
    }
}
