//! Direct concrete interpreter over the syntax tree.
//!
//! Independent of [`super::unroll`]: it executes only the taken arm of each
//! branch and advances the access-site counter past untaken arms by their
//! static site count, so its site indices line up with the unrolled trace.

use std::collections::HashMap;

use super::ast::*;
use super::unroll::Assignment;

/// One executed memory access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Executed {
    /// 1-based site index in the unrolled trace.
    pub site: usize,
    pub address: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Val {
    Int(u32),
    Bool(bool),
}

impl Val {
    fn int(self) -> u32 {
        match self {
            Val::Int(v) => v,
            Val::Bool(_) => unreachable!("type checked"),
        }
    }

    fn bool(self) -> bool {
        match self {
            Val::Bool(b) => b,
            Val::Int(_) => unreachable!("type checked"),
        }
    }
}

struct Interp<'p> {
    program: &'p Program,
    scopes: Vec<HashMap<String, u32>>,
    site: usize,
    out: Vec<Executed>,
}

impl Interp<'_> {
    fn eval(&self, e: &Expr) -> Val {
        match e {
            Expr::Int(v) => Val::Int(*v),
            Expr::Bool(b) => Val::Bool(*b),
            Expr::Var(n) => Val::Int(*self.scopes.iter().rev().find_map(|s| s.get(n)).expect("resolved by parser")),
            Expr::Not(a) => Val::Bool(!self.eval(a).bool()),
            Expr::Bin(BinOp::And, a, b) => Val::Bool(self.eval(a).bool() && self.eval(b).bool()),
            Expr::Bin(BinOp::Or, a, b) => Val::Bool(self.eval(a).bool() || self.eval(b).bool()),
            Expr::Bin(op, a, b) => {
                let (x, y) = (self.eval(a).int(), self.eval(b).int());
                match op {
                    BinOp::Add => Val::Int(x.wrapping_add(y)),
                    BinOp::Sub => Val::Int(x.wrapping_sub(y)),
                    BinOp::Mul => Val::Int(x.wrapping_mul(y)),
                    BinOp::BitAnd => Val::Int(x & y),
                    BinOp::BitOr => Val::Int(x | y),
                    BinOp::BitXor => Val::Int(x ^ y),
                    BinOp::Shl => Val::Int(x.checked_shl(y).unwrap_or(0)),
                    BinOp::Shr => Val::Int(x.checked_shr(y).unwrap_or(0)),
                    BinOp::Eq => Val::Bool(x == y),
                    BinOp::Ne => Val::Bool(x != y),
                    BinOp::Lt => Val::Bool(x < y),
                    BinOp::Le => Val::Bool(x <= y),
                    BinOp::Gt => Val::Bool(x > y),
                    BinOp::Ge => Val::Bool(x >= y),
                    BinOp::And | BinOp::Or => unreachable!(),
                }
            }
        }
    }

    fn block(&mut self, body: &[Stmt]) {
        self.scopes.push(HashMap::new());
        for s in body {
            self.stmt(s);
        }
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Access { array, index, .. } => {
                let arr = self.program.array(array).expect("resolved by parser");
                let i = self.eval(index).int();
                let address = (arr.base as u32).wrapping_add(i.wrapping_mul(arr.elem_size as u32));
                self.site += 1;
                self.out.push(Executed { site: self.site, address });
            }
            Stmt::Let { name, value } => {
                let v = self.eval(value).int();
                self.scopes.last_mut().unwrap().insert(name.clone(), v);
            }
            Stmt::Assign { name, value } => {
                let v = self.eval(value).int();
                let scope = self.scopes.iter_mut().rev().find(|s| s.contains_key(name)).expect("resolved by parser");
                scope.insert(name.clone(), v);
            }
            Stmt::If { cond, then_body, else_body } => {
                if self.eval(cond).bool() {
                    self.block(then_body);
                    self.site += block_sites(else_body) as usize;
                } else {
                    self.site += block_sites(then_body) as usize;
                    self.block(else_body);
                }
            }
            Stmt::For { var, lo, hi, body } => {
                for k in *lo..*hi {
                    self.scopes.push(HashMap::from([(var.clone(), k)]));
                    self.block(body);
                    self.scopes.pop();
                }
            }
        }
    }
}

/// Executes `p` on concrete secrets and returns the accesses in order.
/// The program must already satisfy the unroll limit.
pub fn run_concrete(p: &Program, secrets: &Assignment) -> Vec<Executed> {
    let globals = p.secrets.iter().zip(&secrets.0).map(|(s, v)| (s.name.clone(), *v as u32)).collect();
    let mut it = Interp { program: p, scopes: vec![globals], site: 0, out: Vec::new() };
    it.block(&p.body);
    it.out
}
