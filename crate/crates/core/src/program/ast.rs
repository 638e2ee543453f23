//! Syntax tree of the analyzed language.

use serde::{Deserialize, Serialize};

/// Widest secret accepted by the parser, in bits.
pub const MAX_SECRET_WIDTH: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Secret {
    pub name: String,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArrayDecl {
    pub name: String,
    pub count: u64,
    pub elem_size: u64,
    pub base: u64,
}

impl ArrayDecl {
    /// One past the last byte of the region.
    pub fn end(&self) -> u64 {
        self.base + self.count * self.elem_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    BitAnd,
    BitOr,
    BitXor,
    Shl,
    Shr,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::BitAnd => "&",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding power; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::BitOr => 4,
            BinOp::BitXor => 5,
            BinOp::BitAnd => 6,
            BinOp::Shl | BinOp::Shr => 7,
            BinOp::Add | BinOp::Sub => 8,
            BinOp::Mul => 9,
        }
    }

    /// Type of the operands and of the result.
    pub fn signature(self) -> (Ty, Ty) {
        match self {
            BinOp::Add
            | BinOp::Sub
            | BinOp::Mul
            | BinOp::BitAnd
            | BinOp::BitOr
            | BinOp::BitXor
            | BinOp::Shl
            | BinOp::Shr => (Ty::Int, Ty::Int),
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => (Ty::Int, Ty::Bool),
            BinOp::And | BinOp::Or => (Ty::Bool, Ty::Bool),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ty {
    Int,
    Bool,
}

/// Expressions. Integers are 32-bit unsigned with wrapping arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Expr {
    Int(u32),
    Bool(bool),
    Var(String),
    Not(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessKind {
    Load,
    Store,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stmt {
    Access {
        kind: AccessKind,
        array: String,
        index: Expr,
    },
    /// Declares a variable in the current block.
    Let {
        name: String,
        value: Expr,
    },
    /// Updates the nearest visible variable.
    Assign {
        name: String,
        value: Expr,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    /// `for var in lo..hi`, `hi` exclusive.
    For {
        var: String,
        lo: u32,
        hi: u32,
        body: Vec<Stmt>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Program {
    pub name: String,
    pub secrets: Vec<Secret>,
    pub arrays: Vec<ArrayDecl>,
    pub body: Vec<Stmt>,
}

impl Program {
    pub fn array(&self, name: &str) -> Option<&ArrayDecl> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn secret_bits(&self) -> u32 {
        self.secrets.iter().map(|s| s.width).sum()
    }

    /// Number of access sites after unrolling, saturating.
    pub fn site_count(&self) -> u64 {
        block_sites(&self.body)
    }
}

pub fn block_sites(body: &[Stmt]) -> u64 {
    body.iter().fold(0u64, |acc, s| acc.saturating_add(stmt_sites(s)))
}

pub(crate) fn stmt_sites(s: &Stmt) -> u64 {
    match s {
        Stmt::Access { .. } => 1,
        Stmt::Let { .. } | Stmt::Assign { .. } => 0,
        Stmt::If { then_body, else_body, .. } => block_sites(then_body).saturating_add(block_sites(else_body)),
        Stmt::For { lo, hi, body, .. } => (hi.saturating_sub(*lo) as u64).saturating_mul(block_sites(body)),
    }
}
