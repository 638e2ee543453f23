//! Minimal s-expression reader for solver responses and serialized terms.

use std::collections::HashMap;

use super::term::{BvOp, CmpOp, Sort, Term, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("s-expression parse error: {0}")]
pub struct ParseError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError(msg.into()))
}

impl SExpr {
    pub fn atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(a) => Some(a),
            SExpr::List(_) => None,
        }
    }

    pub fn list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(l) => Some(l),
            SExpr::Atom(_) => None,
        }
    }
}

/// Parses every top-level s-expression in `text`.
pub fn parse_all(text: &str) -> Result<Vec<SExpr>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut out = Vec::new();
    let mut stack: Vec<Vec<SExpr>> = Vec::new();
    while pos < chars.len() {
        let c = chars[pos];
        match c {
            ';' => {
                while pos < chars.len() && chars[pos] != '\n' {
                    pos += 1;
                }
            }
            c if c.is_whitespace() => pos += 1,
            '(' => {
                stack.push(Vec::new());
                pos += 1;
            }
            ')' => {
                let done = stack.pop().ok_or_else(|| ParseError("unbalanced `)`".into()))?;
                let e = SExpr::List(done);
                match stack.last_mut() {
                    Some(parent) => parent.push(e),
                    None => out.push(e),
                }
                pos += 1;
            }
            _ => {
                let start = pos;
                let atom = if c == '"' {
                    pos += 1;
                    while pos < chars.len() {
                        if chars[pos] == '"' {
                            if pos + 1 < chars.len() && chars[pos + 1] == '"' {
                                pos += 2;
                                continue;
                            }
                            break;
                        }
                        pos += 1;
                    }
                    pos += 1;
                    chars[start..pos.min(chars.len())].iter().collect::<String>()
                } else if c == '|' {
                    pos += 1;
                    while pos < chars.len() && chars[pos] != '|' {
                        pos += 1;
                    }
                    pos += 1;
                    chars[start + 1..pos.saturating_sub(1)].iter().collect::<String>()
                } else {
                    while pos < chars.len() && !chars[pos].is_whitespace() && chars[pos] != '(' && chars[pos] != ')' {
                        pos += 1;
                    }
                    chars[start..pos].iter().collect::<String>()
                };
                let e = SExpr::Atom(atom);
                match stack.last_mut() {
                    Some(parent) => parent.push(e),
                    None => out.push(e),
                }
            }
        }
    }
    if !stack.is_empty() {
        return err("unbalanced `(`");
    }
    Ok(out)
}

pub fn parse_one(text: &str) -> Result<SExpr, ParseError> {
    let mut all = parse_all(text)?;
    if all.len() != 1 {
        return err(format!("expected one s-expression, found {}", all.len()));
    }
    Ok(all.pop().unwrap())
}

pub fn parse_sort(text: &str) -> Result<Sort, ParseError> {
    sort_of(&parse_one(text)?)
}

fn sort_of(e: &SExpr) -> Result<Sort, ParseError> {
    match e {
        SExpr::Atom(a) if a == "Bool" => Ok(Sort::Bool),
        SExpr::Atom(a) if a == "Int" => Ok(Sort::Int),
        SExpr::List(l) if l.len() == 3 && l[0].atom() == Some("_") && l[1].atom() == Some("BitVec") => {
            let w = l[2].atom().and_then(|a| a.parse().ok());
            w.map(Sort::Bv).ok_or_else(|| ParseError("bad bit-vector width".into()))
        }
        _ => err(format!("unknown sort {e:?}")),
    }
}

/// Parses a literal value as printed by `get-value`.
pub fn parse_value(e: &SExpr) -> Result<Value, ParseError> {
    match e {
        SExpr::Atom(a) if a == "true" => Ok(Value::Bool(true)),
        SExpr::Atom(a) if a == "false" => Ok(Value::Bool(false)),
        SExpr::Atom(a) if a.starts_with("#b") => {
            let digits = &a[2..];
            let v = u64::from_str_radix(digits, 2).map_err(|e| ParseError(e.to_string()))?;
            Ok(Value::Bv { width: digits.len() as u32, value: v })
        }
        SExpr::Atom(a) if a.starts_with("#x") => {
            let digits = &a[2..];
            let v = u64::from_str_radix(digits, 16).map_err(|e| ParseError(e.to_string()))?;
            Ok(Value::Bv { width: 4 * digits.len() as u32, value: v })
        }
        SExpr::Atom(a) => a.parse::<i64>().map(Value::Int).map_err(|_| ParseError(format!("unexpected value `{a}`"))),
        SExpr::List(l) => match l.as_slice() {
            [SExpr::Atom(m), inner] if m == "-" => match parse_value(inner)? {
                Value::Int(i) => Ok(Value::Int(-i)),
                _ => err("negated non-integer"),
            },
            [SExpr::Atom(u), SExpr::Atom(bv), SExpr::Atom(w)] if u == "_" && bv.starts_with("bv") => {
                let v = bv[2..].parse::<u64>().map_err(|e| ParseError(e.to_string()))?;
                let w = w.parse::<u32>().map_err(|e| ParseError(e.to_string()))?;
                Ok(Value::Bv { width: w, value: v })
            }
            _ => err(format!("unexpected value {e:?}")),
        },
    }
}

/// Name-to-term bindings used while reading terms back.
#[derive(Debug, Default, Clone)]
pub struct TermScope {
    bound: HashMap<String, Term>,
}

impl TermScope {
    pub fn bind(&mut self, name: String, t: Term) {
        self.bound.insert(name, t);
    }

    pub fn parse_term(&self, text: &str) -> Result<Term, ParseError> {
        self.term(&parse_one(text)?)
    }

    pub fn term(&self, e: &SExpr) -> Result<Term, ParseError> {
        match e {
            SExpr::Atom(a) => {
                if let Some(t) = self.bound.get(a) {
                    return Ok(t.clone());
                }
                match parse_value(e) {
                    Ok(v) => Ok(v.to_term()),
                    Err(_) => err(format!("unbound symbol `{a}`")),
                }
            }
            SExpr::List(l) => {
                if let Ok(v) = parse_value(e) {
                    return Ok(v.to_term());
                }
                let (head, args) = l.split_first().ok_or_else(|| ParseError("empty application".into()))?;
                if let SExpr::List(h) = head {
                    // ((_ zero_extend k) t)
                    if h.len() == 3 && h[0].atom() == Some("_") && h[1].atom() == Some("zero_extend") {
                        let k =
                            h[2].atom().and_then(|a| a.parse().ok()).ok_or_else(|| ParseError("bad extend".into()))?;
                        let [a] = args else { return err("zero_extend arity") };
                        return Ok(self.term(a)?.zero_extend(k));
                    }
                    return err(format!("unsupported head {head:?}"));
                }
                let op = head.atom().unwrap();
                let xs = args.iter().map(|a| self.term(a)).collect::<Result<Vec<_>, _>>()?;
                let bin = |xs: &[Term]| -> Result<(Term, Term), ParseError> {
                    match xs {
                        [a, b] => Ok((a.clone(), b.clone())),
                        _ => err(format!("`{op}` expects two arguments")),
                    }
                };
                let bvop = |o: BvOp| -> Result<Term, ParseError> {
                    let (a, b) = bin(&xs)?;
                    Ok(Term::bvop(o, &a, &b))
                };
                match op {
                    "not" => match xs.as_slice() {
                        [a] => Ok(a.not()),
                        _ => err("not arity"),
                    },
                    "and" => Ok(Term::and(xs)),
                    "or" => Ok(Term::or(xs)),
                    "=>" => {
                        let (a, b) = bin(&xs)?;
                        Ok(a.implies(&b))
                    }
                    "=" => {
                        let (a, b) = bin(&xs)?;
                        Ok(a.eq_to(&b))
                    }
                    "ite" => match xs.as_slice() {
                        [c, a, b] => Ok(Term::ite(c, a, b)),
                        _ => err("ite arity"),
                    },
                    "bvadd" => bvop(BvOp::Add),
                    "bvsub" => bvop(BvOp::Sub),
                    "bvmul" => bvop(BvOp::Mul),
                    "bvand" => bvop(BvOp::And),
                    "bvor" => bvop(BvOp::Or),
                    "bvxor" => bvop(BvOp::Xor),
                    "bvshl" => bvop(BvOp::Shl),
                    "bvlshr" => bvop(BvOp::Lshr),
                    "bvult" | "bvule" | "bvugt" | "bvuge" => {
                        let (a, b) = bin(&xs)?;
                        let c = match op {
                            "bvult" => CmpOp::Lt,
                            "bvule" => CmpOp::Le,
                            "bvugt" => CmpOp::Gt,
                            _ => CmpOp::Ge,
                        };
                        Ok(Term::bv_cmp(c, &a, &b))
                    }
                    "<" | "<=" | ">" | ">=" => {
                        let (a, b) = bin(&xs)?;
                        let c = match op {
                            "<" => CmpOp::Lt,
                            "<=" => CmpOp::Le,
                            ">" => CmpOp::Gt,
                            _ => CmpOp::Ge,
                        };
                        Ok(Term::int_cmp(c, &a, &b))
                    }
                    "+" => Ok(Term::int_add(xs)),
                    _ => err(format!("unsupported operator `{op}`")),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_solver_values() {
        let e = parse_one("((miss.1 true) (sec.key #x0ff) (c (- 3)) (b #b101))").unwrap();
        let pairs = e.list().unwrap();
        assert_eq!(parse_value(&pairs[0].list().unwrap()[1]).unwrap(), Value::Bool(true));
        assert_eq!(parse_value(&pairs[1].list().unwrap()[1]).unwrap(), Value::Bv { width: 12, value: 255 });
        assert_eq!(parse_value(&pairs[2].list().unwrap()[1]).unwrap(), Value::Int(-3));
        assert_eq!(parse_value(&pairs[3].list().unwrap()[1]).unwrap(), Value::Bv { width: 3, value: 5 });
    }

    #[test]
    fn rejects_unbalanced() {
        assert!(parse_all("(a (b)").is_err());
        assert!(parse_all("a)").is_err());
    }

    #[test]
    fn quoted_symbols_and_comments() {
        let all = parse_all("; hi\n(|a b| \"x\"\"y\")").unwrap();
        assert_eq!(all.len(), 1);
        let l = all[0].list().unwrap();
        assert_eq!(l[0].atom(), Some("a b"));
    }
}
