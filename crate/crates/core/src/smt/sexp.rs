//! Just enough s-expression reading for solver responses.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn as_list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(xs) => Some(xs),
            Sexp::Atom(_) => None,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(a) => Some(a),
            Sexp::List(_) => None,
        }
    }

    /// Integer literal, including `(- n)`.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Sexp::Atom(a) => a.parse::<i64>().ok(),
            Sexp::List(xs) => match xs.as_slice() {
                [Sexp::Atom(m), Sexp::Atom(n)] if m == "-" => {
                    let u: u64 = n.parse().ok()?;
                    if u == 1u64 << 63 {
                        Some(i64::MIN)
                    } else {
                        i64::try_from(u).ok().map(|v| -v)
                    }
                }
                _ => None,
            },
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.as_atom()? {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        }
    }
}

/// Returns the first complete s-expression of `input` and the number of
/// bytes consumed, or `None` when more input is needed.
pub fn parse_one(input: &str) -> Option<(Sexp, usize)> {
    let bytes = input.as_bytes();
    let mut i = 0;
    let mut stack: Vec<Vec<Sexp>> = Vec::new();
    loop {
        while i < bytes.len() && (bytes[i] as char).is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() {
            return None;
        }
        let item = match bytes[i] {
            b'(' => {
                stack.push(Vec::new());
                i += 1;
                continue;
            }
            b')' => {
                i += 1;
                Sexp::List(stack.pop()?)
            }
            b'"' => {
                let start = i;
                i += 1;
                loop {
                    if i >= bytes.len() {
                        return None;
                    }
                    if bytes[i] == b'"' {
                        if bytes.get(i + 1) == Some(&b'"') {
                            i += 2;
                            continue;
                        }
                        i += 1;
                        break;
                    }
                    i += 1;
                }
                Sexp::Atom(input[start..i].to_string())
            }
            b'|' => {
                let start = i + 1;
                let end = input[start..].find('|')? + start;
                i = end + 1;
                Sexp::Atom(input[start..end].to_string())
            }
            _ => {
                let start = i;
                while i < bytes.len() && !matches!(bytes[i], b'(' | b')' | b' ' | b'\n' | b'\r' | b'\t') {
                    i += 1;
                }
                if i >= bytes.len() && stack.is_empty() {
                    // A bare atom may still be growing.
                    return None;
                }
                Sexp::Atom(input[start..i].to_string())
            }
        };
        match stack.last_mut() {
            Some(top) => top.push(item),
            None => return Some((item, i)),
        }
    }
}
