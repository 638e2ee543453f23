//! Lexer and recursive-descent parser with a precedence-climbing expression
//! core. Identifiers are resolved and expressions type checked while parsing.

use std::collections::HashMap;

use super::ast::*;
use super::ProgramError;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

const PUNCTS: [&str; 27] = [
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "..", "+", "-", "*", "&", "|", "^", "<", ">", "!", "=", "(", ")",
    "{", "}", "[", "]", ";", ":",
];

fn lex(text: &str) -> Result<Vec<Token>, ProgramError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += (i - s) as u32;
            out.push(Token { tok: Tok::Ident(chars[s..i].iter().collect()), line: start_line, col: start_col });
            continue;
        }
        if c.is_ascii_digit() {
            let s = i;
            let (radix, digits_from) =
                if c == '0' && matches!(chars.get(i + 1), Some('x') | Some('X')) { (16, i + 2) } else { (10, i) };
            i = digits_from;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += (i - s) as u32;
            let digits: String = chars[digits_from..i].iter().filter(|&&d| d != '_').collect();
            let v = u64::from_str_radix(&digits, radix).map_err(|_| ProgramError::Syntax {
                line: start_line,
                col: start_col,
                msg: format!("malformed integer literal `{}`", chars[s..i].iter().collect::<String>()),
            })?;
            out.push(Token { tok: Tok::Int(v), line: start_line, col: start_col });
            continue;
        }
        if c == '@' {
            i += 1;
            col += 1;
            out.push(Token { tok: Tok::Punct("@"), line: start_line, col: start_col });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let Some(p) = PUNCTS.iter().find(|p| rest.starts_with(**p)) else {
            return Err(ProgramError::Syntax { line, col, msg: format!("unexpected character `{c}`") });
        };
        i += p.len();
        col += p.len() as u32;
        out.push(Token { tok: Tok::Punct(p), line: start_line, col: start_col });
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}

const KEYWORDS: [&str; 12] =
    ["secret", "array", "program", "load", "store", "let", "if", "else", "for", "in", "true", "false"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Secret,
    Local,
    Counter,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    scopes: Vec<HashMap<String, VarKind>>,
    program: Program,
}

type PResult<T> = Result<T, ProgramError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, t: &Token, msg: impl Into<String>) -> PResult<T> {
        Err(ProgramError::Syntax { line: t.line, col: t.col, msg: msg.into() })
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek().tok, Tok::Punct(q) if q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        let t = self.next();
        if matches!(t.tok, Tok::Punct(q) if q == p) {
            Ok(t)
        } else {
            self.err(&t, format!("expected `{p}`, found {}", Self::describe(&t.tok)))
        }
    }

    fn is_keyword(&self, k: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == k)
    }

    fn expect_ident(&mut self) -> PResult<(String, Token)> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => Ok((s.clone(), t.clone())),
            other => self.err(&t, format!("expected identifier, found {}", Self::describe(other))),
        }
    }

    fn expect_int(&mut self) -> PResult<(u64, Token)> {
        let t = self.next();
        match t.tok {
            Tok::Int(v) => Ok((v, t)),
            ref other => self.err(&t, format!("expected integer literal, found {}", Self::describe(other))),
        }
    }

    fn lookup(&self, name: &str) -> Option<VarKind> {
        self.scopes.iter().rev().find_map(|s| s.get(name).copied())
    }

    fn declared_anywhere(&self, name: &str) -> bool {
        self.program.array(name).is_some() || self.lookup(name).is_some()
    }

    fn program(mut self) -> PResult<Program> {
        loop {
            if self.peek().tok == Tok::Eof {
                break;
            }
            if self.is_keyword("program") {
                self.next();
                let (name, _) = self.expect_ident()?;
                self.program.name = name;
                self.expect_punct(";")?;
            } else if self.is_keyword("secret") {
                self.secret_decl()?;
            } else if self.is_keyword("array") {
                self.array_decl()?;
            } else {
                let s = self.stmt()?;
                self.program.body.push(s);
            }
        }
        Ok(self.program)
    }

    fn secret_decl(&mut self) -> PResult<()> {
        self.next();
        let (name, at) = self.expect_ident()?;
        if self.declared_anywhere(&name) {
            return self.err(&at, format!("`{name}` is already declared"));
        }
        self.expect_punct(":")?;
        let (ty, ty_at) = self.expect_ident()?;
        let width =
            ty.strip_prefix('u').and_then(|w| w.parse::<u32>().ok()).filter(|w| (1..=MAX_SECRET_WIDTH).contains(w));
        let Some(width) = width else {
            return self.err(&ty_at, format!("secret type must be u1..u{MAX_SECRET_WIDTH}, found `{ty}`"));
        };
        self.expect_punct(";")?;
        self.scopes[0].insert(name.clone(), VarKind::Secret);
        self.program.secrets.push(Secret { name, width });
        Ok(())
    }

    fn array_decl(&mut self) -> PResult<()> {
        self.next();
        let (name, at) = self.expect_ident()?;
        if self.declared_anywhere(&name) {
            return self.err(&at, format!("`{name}` is already declared"));
        }
        self.expect_punct("[")?;
        let (count, count_at) = self.expect_int()?;
        self.expect_punct("]")?;
        self.expect_punct(":")?;
        let (elem_size, size_at) = self.expect_int()?;
        self.expect_punct("@")?;
        let (base, _) = self.expect_int()?;
        self.expect_punct(";")?;
        if count == 0 {
            return self.err(&count_at, "array must have at least one element");
        }
        if elem_size == 0 {
            return self.err(&size_at, "element size must be positive");
        }
        let arr = ArrayDecl { name, count, elem_size, base };
        if count.checked_mul(elem_size).and_then(|n| n.checked_add(base)).is_none_or(|end| end > 1 << 32) {
            return self.err(&at, format!("array `{}` does not fit in the 32-bit address space", arr.name));
        }
        if base % elem_size != 0 {
            return Err(ProgramError::Misaligned { name: arr.name, base, elem_size });
        }
        if let Some(other) = self.program.arrays.iter().find(|o| o.base < arr.end() && arr.base < o.end()) {
            return Err(ProgramError::Overlap(other.name.clone(), arr.name));
        }
        self.program.arrays.push(arr);
        Ok(())
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        self.scopes.push(HashMap::new());
        let mut body = Vec::new();
        while !self.is_punct("}") {
            if self.peek().tok == Tok::Eof {
                let t = self.peek().clone();
                return self.err(&t, "unclosed block, expected `}`");
            }
            body.push(self.stmt()?);
        }
        self.next();
        self.scopes.pop();
        Ok(body)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let t = self.peek().clone();
        let Tok::Ident(word) = &t.tok else {
            return self.err(&t, format!("expected statement, found {}", Self::describe(&t.tok)));
        };
        let s = match word.as_str() {
            "load" | "store" => {
                self.next();
                let kind = if word == "load" { AccessKind::Load } else { AccessKind::Store };
                let (array, at) = self.expect_ident()?;
                if self.program.array(&array).is_none() {
                    return Err(ProgramError::Unknown { line: at.line, col: at.col, name: array });
                }
                self.expect_punct("[")?;
                let index = self.expr_of(Ty::Int)?;
                self.expect_punct("]")?;
                Stmt::Access { kind, array, index }
            }
            "let" => {
                self.next();
                let (name, at) = self.expect_ident()?;
                if self.program.array(&name).is_some() || self.lookup(&name) == Some(VarKind::Secret) {
                    return self.err(&at, format!("`{name}` cannot be redeclared"));
                }
                self.expect_punct("=")?;
                let value = self.expr_of(Ty::Int)?;
                self.scopes.last_mut().unwrap().insert(name.clone(), VarKind::Local);
                Stmt::Let { name, value }
            }
            "if" => {
                self.next();
                self.expect_punct("(")?;
                let cond = self.expr_of(Ty::Bool)?;
                self.expect_punct(")")?;
                let then_body = self.block()?;
                let else_body = if self.is_keyword("else") {
                    self.next();
                    if self.is_keyword("if") {
                        vec![self.stmt()?]
                    } else {
                        self.block()?
                    }
                } else {
                    Vec::new()
                };
                return Ok(Stmt::If { cond, then_body, else_body });
            }
            "for" => {
                self.next();
                let (var, at) = self.expect_ident()?;
                if self.program.array(&var).is_some() || self.lookup(&var) == Some(VarKind::Secret) {
                    return self.err(&at, format!("`{var}` cannot be used as a loop counter"));
                }
                if !self.is_keyword("in") {
                    let t = self.peek().clone();
                    return self.err(&t, "expected `in`");
                }
                self.next();
                let lo = self.loop_bound()?;
                self.expect_punct("..")?;
                let hi = self.loop_bound()?;
                self.scopes.push(HashMap::from([(var.clone(), VarKind::Counter)]));
                let body = self.block();
                self.scopes.pop();
                return Ok(Stmt::For { var, lo, hi, body: body? });
            }
            _ => {
                let (name, at) = self.expect_ident()?;
                match self.lookup(&name) {
                    Some(VarKind::Local) => {}
                    Some(VarKind::Secret) | Some(VarKind::Counter) => {
                        return self.err(&at, format!("`{name}` is read-only"));
                    }
                    None => return Err(ProgramError::Unknown { line: at.line, col: at.col, name }),
                }
                self.expect_punct("=")?;
                let value = self.expr_of(Ty::Int)?;
                Stmt::Assign { name, value }
            }
        };
        self.eat_punct(";");
        Ok(s)
    }

    fn loop_bound(&mut self) -> PResult<u32> {
        let t = self.next();
        match t.tok {
            Tok::Int(v) if v <= u32::MAX as u64 => Ok(v as u32),
            Tok::Int(_) => self.err(&t, "loop bound exceeds 32 bits"),
            _ => Err(ProgramError::NonConstBound { line: t.line, col: t.col }),
        }
    }

    fn expr_of(&mut self, want: Ty) -> PResult<Expr> {
        let at = self.peek().clone();
        let (e, ty) = self.expr(0)?;
        if ty != want {
            return Err(type_error(&at, want, ty));
        }
        Ok(e)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek().tok else { return None };
        Some(match p {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "&" => BinOp::BitAnd,
            "|" => BinOp::BitOr,
            "^" => BinOp::BitXor,
            "<<" => BinOp::Shl,
            ">>" => BinOp::Shr,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        })
    }

    fn expr(&mut self, min_prec: u8) -> PResult<(Expr, Ty)> {
        let first = self.peek().clone();
        let (mut lhs, mut lty) = self.primary()?;
        while let Some(op) = self.peek_binop() {
            let prec = op.precedence();
            if prec <= min_prec {
                break;
            }
            self.next();
            let rhs_at = self.peek().clone();
            let (rhs, rty) = self.expr(prec)?;
            let (arg, res) = op.signature();
            if lty != arg {
                return Err(type_error(&first, arg, lty));
            }
            if rty != arg {
                return Err(type_error(&rhs_at, arg, rty));
            }
            lhs = Expr::bin(op, lhs, rhs);
            lty = res;
        }
        Ok((lhs, lty))
    }

    fn primary(&mut self) -> PResult<(Expr, Ty)> {
        let t = self.next();
        match &t.tok {
            Tok::Int(v) => {
                if *v > u32::MAX as u64 {
                    return self.err(&t, "integer literal exceeds 32 bits");
                }
                Ok((Expr::Int(*v as u32), Ty::Int))
            }
            Tok::Ident(s) if s == "true" => Ok((Expr::Bool(true), Ty::Bool)),
            Tok::Ident(s) if s == "false" => Ok((Expr::Bool(false), Ty::Bool)),
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                if self.lookup(s).is_none() {
                    return Err(ProgramError::Unknown { line: t.line, col: t.col, name: s.clone() });
                }
                Ok((Expr::Var(s.clone()), Ty::Int))
            }
            Tok::Punct("(") => {
                let (e, ty) = self.expr(0)?;
                self.expect_punct(")")?;
                Ok((e, ty))
            }
            Tok::Punct("!") => {
                let at = self.peek().clone();
                let (e, ty) = self.primary()?;
                if ty != Ty::Bool {
                    return Err(type_error(&at, Ty::Bool, ty));
                }
                Ok((Expr::Not(Box::new(e)), Ty::Bool))
            }
            other => self.err(&t, format!("expected expression, found {}", Self::describe(other))),
        }
    }
}

fn type_error(at: &Token, want: Ty, got: Ty) -> ProgramError {
    let name = |t: Ty| match t {
        Ty::Int => "integer",
        Ty::Bool => "boolean",
    };
    ProgramError::Type {
        line: at.line,
        col: at.col,
        msg: format!("expected {} expression, found {}", name(want), name(got)),
    }
}

pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let toks = lex(text)?;
    let parser = Parser {
        toks,
        pos: 0,
        scopes: vec![HashMap::new()],
        program: Program { name: "main".to_string(), secrets: Vec::new(), arrays: Vec::new(), body: Vec::new() },
    };
    parser.program()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let p = parse_program("secret key:u8; array A[128]:4 @0x000; load A[0]").unwrap();
        assert_eq!(p.secrets, vec![Secret { name: "key".into(), width: 8 }]);
        assert_eq!(p.arrays.len(), 1);
        assert_eq!(p.body.len(), 1);
        assert_eq!(p.site_count(), 1);
    }

    #[test]
    fn misaligned_base_is_rejected() {
        let e = parse_program("array A[4]:4 @0x002;").unwrap_err();
        assert!(matches!(e, ProgramError::Misaligned { base: 2, elem_size: 4, .. }));
    }

    #[test]
    fn overlapping_arrays_are_rejected() {
        let e = parse_program("array A[4]:4 @0x0; array B[4]:4 @0xC;").unwrap_err();
        assert_eq!(e, ProgramError::Overlap("A".into(), "B".into()));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_program("secret k:u4;\narray A[4]:4 @0;\nload A[k +]").unwrap_err();
        assert!(matches!(e, ProgramError::Syntax { line: 3, col: 11, .. }), "{e:?}");
        let e = parse_program("array A[4]:4 @0;\n  load A[x]").unwrap_err();
        assert_eq!(e, ProgramError::Unknown { line: 2, col: 10, name: "x".into() });
        let e = parse_program("secret k:u4; array A[4]:4 @0; for i in 0..k { load A[i] }").unwrap_err();
        assert!(matches!(e, ProgramError::NonConstBound { .. }));
    }

    #[test]
    fn type_errors() {
        assert!(matches!(
            parse_program("secret k:u4; array A[4]:4 @0; if (k) { load A[0] }").unwrap_err(),
            ProgramError::Type { .. }
        ));
        assert!(matches!(
            parse_program("secret k:u4; array A[4]:4 @0; load A[k < 2]").unwrap_err(),
            ProgramError::Type { .. }
        ));
    }

    #[test]
    fn precedence_follows_c() {
        let p = parse_program("secret k:u4; array A[64]:1 @0; load A[1 + k * 2 & 7]").unwrap();
        let Stmt::Access { index, .. } = &p.body[0] else { panic!() };
        let expected = Expr::bin(
            BinOp::BitAnd,
            Expr::bin(BinOp::Add, Expr::Int(1), Expr::bin(BinOp::Mul, Expr::Var("k".into()), Expr::Int(2))),
            Expr::Int(7),
        );
        assert_eq!(index, &expected);
    }

    #[test]
    fn scoping_rules() {
        // block-local declarations are invisible afterwards
        assert!(parse_program("secret k:u1; array A[4]:4 @0; if (k == 0) { let t = 1 } load A[t]").is_err());
        // counters and secrets are read-only
        assert!(parse_program("secret k:u1; array A[4]:4 @0; for i in 0..2 { i = 1 }").is_err());
        assert!(parse_program("secret k:u1; k = 1").is_err());
        // outer locals may be updated inside branches
        assert!(parse_program("secret k:u1; array A[4]:4 @0; let t = 0; if (k == 1) { t = 2 } load A[t]").is_ok());
    }
}
