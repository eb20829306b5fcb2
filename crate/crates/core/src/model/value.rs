use std::fmt;

/// A constant: an integer or a string. The two kinds never compare equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Int(i64),
    Str(String),
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Str(s) => {
                write!(f, "\"")?;
                for c in s.chars() {
                    match c {
                        '"' => write!(f, "\\\"")?,
                        '\\' => write!(f, "\\\\")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"")
            }
        }
    }
}

/// A database value: a constant or a marked null with a distinct name.
///
/// Two nulls are equal iff their names are equal. The derived ordering is
/// the canonical one used for all printed output: constants sort before
/// nulls, and each kind sorts lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Const(Constant),
    Null(String),
}

impl Value {
    pub fn int(n: i64) -> Value {
        Value::Const(Constant::Int(n))
    }

    pub fn str(s: impl Into<String>) -> Value {
        Value::Const(Constant::Str(s.into()))
    }

    pub fn null(name: impl Into<String>) -> Value {
        Value::Null(name.into())
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null(_))
    }

    pub fn as_constant(&self) -> Option<&Constant> {
        match self {
            Value::Const(c) => Some(c),
            Value::Null(_) => None,
        }
    }
}

impl From<Constant> for Value {
    fn from(c: Constant) -> Value {
        Value::Const(c)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Const(c) => write!(f, "{c}"),
            Value::Null(name) => write!(f, "_{name}"),
        }
    }
}

/// Render a tuple as `v1, v2, ...`; the empty tuple renders as `()`.
pub fn display_tuple(tuple: &[Value]) -> String {
    if tuple.is_empty() {
        return "()".to_string();
    }
    tuple
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_sort_before_nulls() {
        let mut vs = vec![Value::null("a"), Value::str("z"), Value::int(7)];
        vs.sort();
        assert_eq!(vs, vec![Value::int(7), Value::str("z"), Value::null("a")]);
    }

    #[test]
    fn cross_kind_equality_is_false() {
        assert_ne!(Value::int(1), Value::str("1"));
        assert_ne!(Value::int(1), Value::null("1"));
    }

    #[test]
    fn null_equality_is_by_name() {
        assert_eq!(Value::null("n1"), Value::null("n1"));
        assert_ne!(Value::null("n1"), Value::null("n2"));
    }

    #[test]
    fn display_escapes_strings() {
        assert_eq!(Value::str("a\"b\\c").to_string(), r#""a\"b\\c""#);
        assert_eq!(Value::null("n1").to_string(), "_n1");
    }
}
