//! Canonical pretty printer. Parsing its output yields an equal [`Program`].

use std::fmt::{self, Write as _};

use super::ast::*;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, 0)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, parent_prec: u8) -> fmt::Result {
    match e {
        Expr::Int(v) => write!(f, "{v}"),
        Expr::Bool(b) => write!(f, "{b}"),
        Expr::Var(v) => write!(f, "{v}"),
        Expr::Not(inner) => {
            f.write_char('!')?;
            match inner.as_ref() {
                Expr::Bin(..) => {
                    f.write_char('(')?;
                    write_expr(f, inner, 0)?;
                    f.write_char(')')
                }
                _ => write_expr(f, inner, u8::MAX),
            }
        }
        Expr::Bin(op, a, b) => {
            let prec = op.precedence();
            let paren = prec < parent_prec;
            if paren {
                f.write_char('(')?;
            }
            // left-associative: the right operand needs parentheses at equal precedence
            write_expr(f, a, prec)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, b, prec + 1)?;
            if paren {
                f.write_char(')')?;
            }
            Ok(())
        }
    }
}

fn write_block(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        write_stmt(out, s, depth);
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    let pad = "    ".repeat(depth);
    match s {
        Stmt::Access { kind, array, index } => {
            let kw = match kind {
                AccessKind::Load => "load",
                AccessKind::Store => "store",
            };
            let _ = writeln!(out, "{pad}{kw} {array}[{index}];");
        }
        Stmt::Let { name, value } => {
            let _ = writeln!(out, "{pad}let {name} = {value};");
        }
        Stmt::Assign { name, value } => {
            let _ = writeln!(out, "{pad}{name} = {value};");
        }
        Stmt::If { cond, then_body, else_body } => {
            let _ = writeln!(out, "{pad}if ({cond}) {{");
            write_block(out, then_body, depth + 1);
            if else_body.is_empty() {
                let _ = writeln!(out, "{pad}}}");
            } else {
                let _ = writeln!(out, "{pad}}} else {{");
                write_block(out, else_body, depth + 1);
                let _ = writeln!(out, "{pad}}}");
            }
        }
        Stmt::For { var, lo, hi, body } => {
            let _ = writeln!(out, "{pad}for {var} in {lo}..{hi} {{");
            write_block(out, body, depth + 1);
            let _ = writeln!(out, "{pad}}}");
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        let _ = writeln!(out, "program {};", self.name);
        for s in &self.secrets {
            let _ = writeln!(out, "secret {}:u{};", s.name, s.width);
        }
        for a in &self.arrays {
            let _ = writeln!(out, "array {}[{}]:{} @{:#x};", a.name, a.count, a.elem_size, a.base);
        }
        write_block(&mut out, &self.body, 0);
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_program;

    #[test]
    fn round_trip_keeps_structure() {
        let src = "secret k:u4; secret j:u2; array A[16]:4 @0x40; array B[8]:32 @0x400;
            let t = (k + 1) * 4 - (j << 1);
            if (k < 3 && !(j == 1 || k >= 2)) { load A[t & 15] } else if (j != 0) { store B[j] } else { t = 0 }
            for i in 0..3 { load A[k - i - 1] load B[(i ^ j) | 1] }";
        let p = parse_program(src).unwrap();
        let printed = p.to_string();
        let q = parse_program(&printed).unwrap();
        assert_eq!(p, q);
        assert_eq!(printed, q.to_string());
    }
}
