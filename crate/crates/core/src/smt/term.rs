//! Hash-consed-by-value term DAG shared by the program model, the cache
//! semantics encoding and the solver front end.
//!
//! Terms are immutable and reference counted. Structural equality is cached
//! through a per-node hash, so large DAGs with heavy sharing (address
//! expressions, predicate definitions, chained reload conditions) compare and
//! hash cheaply. Smart constructors perform light constant folding only; they
//! never flatten nested conjunctions, which keeps shared sub-chains shared.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sort {
    Bool,
    Int,
    Bv(u32),
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Bool => write!(f, "Bool"),
            Sort::Int => write!(f, "Int"),
            Sort::Bv(w) => write!(f, "(_ BitVec {w})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BvOp {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    Lshr,
}

impl BvOp {
    pub fn smt_name(self) -> &'static str {
        match self {
            BvOp::Add => "bvadd",
            BvOp::Sub => "bvsub",
            BvOp::Mul => "bvmul",
            BvOp::And => "bvand",
            BvOp::Or => "bvor",
            BvOp::Xor => "bvxor",
            BvOp::Shl => "bvshl",
            BvOp::Lshr => "bvlshr",
        }
    }

    /// Concrete semantics on `width`-bit unsigned values (SMT-LIB rules:
    /// wrapping arithmetic, shifts by at least the width yield zero).
    pub fn apply(self, width: u32, a: u64, b: u64) -> u64 {
        let mask = width_mask(width);
        let r = match self {
            BvOp::Add => a.wrapping_add(b),
            BvOp::Sub => a.wrapping_sub(b),
            BvOp::Mul => a.wrapping_mul(b),
            BvOp::And => a & b,
            BvOp::Or => a | b,
            BvOp::Xor => a ^ b,
            BvOp::Shl => {
                if b >= width as u64 {
                    0
                } else {
                    a << b
                }
            }
            BvOp::Lshr => {
                if b >= width as u64 {
                    0
                } else {
                    a >> b
                }
            }
        };
        r & mask
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn holds<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    fn bv_name(self) -> &'static str {
        match self {
            CmpOp::Lt => "bvult",
            CmpOp::Le => "bvule",
            CmpOp::Gt => "bvugt",
            CmpOp::Ge => "bvuge",
        }
    }

    fn int_name(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

pub(crate) fn width_mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    BoolLit(bool),
    IntLit(i64),
    BvLit { width: u32, value: u64 },
    Var { name: Arc<str>, sort: Sort },
    Not(Term),
    And(Vec<Term>),
    Or(Vec<Term>),
    Implies(Term, Term),
    Eq(Term, Term),
    Ite(Term, Term, Term),
    Bv(BvOp, Term, Term),
    BvCmp(CmpOp, Term, Term),
    ZeroExtend(u32, Term),
    IntAdd(Vec<Term>),
    IntCmp(CmpOp, Term, Term),
}

struct Inner {
    node: Node,
    sort: Sort,
    hash: u64,
}

/// A node in the term DAG. Cloning is a reference-count bump.
#[derive(Clone)]
pub struct Term(Arc<Inner>);

/// A boolean-sorted term.
pub type Formula = Term;

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.node == other.0.node)
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::smt::emit::term_to_string(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", crate::smt::emit::term_to_string(self))
    }
}

/// Concrete value of a term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Bv { width: u32, value: u64 },
}

impl Value {
    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_u64(self) -> Option<u64> {
        match self {
            Value::Bv { value, .. } => Some(value),
            Value::Int(i) if i >= 0 => Some(i as u64),
            _ => None,
        }
    }

    pub fn sort(self) -> Sort {
        match self {
            Value::Bool(_) => Sort::Bool,
            Value::Int(_) => Sort::Int,
            Value::Bv { width, .. } => Sort::Bv(width),
        }
    }

    pub fn to_term(self) -> Term {
        match self {
            Value::Bool(b) => Term::bool(b),
            Value::Int(i) => Term::int(i),
            Value::Bv { width, value } => Term::bv(width, value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("no value for variable `{0}`")]
    Unbound(String),
    #[error("sort mismatch while evaluating `{0}`")]
    SortMismatch(String),
}

impl Term {
    fn mk(node: Node, sort: Sort) -> Term {
        let mut h = DefaultHasher::new();
        node.hash(&mut h);
        sort.hash(&mut h);
        Term(Arc::new(Inner { node, sort, hash: h.finish() }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn sort(&self) -> Sort {
        self.0.sort
    }

    pub(crate) fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    pub fn bool(b: bool) -> Term {
        Term::mk(Node::BoolLit(b), Sort::Bool)
    }

    pub fn tt() -> Term {
        Term::bool(true)
    }

    pub fn ff() -> Term {
        Term::bool(false)
    }

    pub fn int(i: i64) -> Term {
        Term::mk(Node::IntLit(i), Sort::Int)
    }

    pub fn bv(width: u32, value: u64) -> Term {
        Term::mk(Node::BvLit { width, value: value & width_mask(width) }, Sort::Bv(width))
    }

    pub fn var(name: impl AsRef<str>, sort: Sort) -> Term {
        Term::mk(Node::Var { name: Arc::from(name.as_ref()), sort }, sort)
    }

    pub fn as_bool_lit(&self) -> Option<bool> {
        match self.node() {
            Node::BoolLit(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_bv_lit(&self) -> Option<u64> {
        match self.node() {
            Node::BvLit { value, .. } => Some(*value),
            _ => None,
        }
    }

    pub fn as_int_lit(&self) -> Option<i64> {
        match self.node() {
            Node::IntLit(i) => Some(*i),
            _ => None,
        }
    }

    pub fn var_name(&self) -> Option<&str> {
        match self.node() {
            Node::Var { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        self.as_bool_lit() == Some(true)
    }

    pub fn is_false(&self) -> bool {
        self.as_bool_lit() == Some(false)
    }

    pub fn not(&self) -> Term {
        match self.node() {
            Node::BoolLit(b) => Term::bool(!b),
            Node::Not(inner) => inner.clone(),
            _ => Term::mk(Node::Not(self.clone()), Sort::Bool),
        }
    }

    pub fn and(parts: impl IntoIterator<Item = Term>) -> Term {
        let mut kept = Vec::new();
        for p in parts {
            debug_assert_eq!(p.sort(), Sort::Bool);
            match p.as_bool_lit() {
                Some(true) => {}
                Some(false) => return Term::ff(),
                None => kept.push(p),
            }
        }
        match kept.len() {
            0 => Term::tt(),
            1 => kept.pop().unwrap(),
            _ => Term::mk(Node::And(kept), Sort::Bool),
        }
    }

    pub fn or(parts: impl IntoIterator<Item = Term>) -> Term {
        let mut kept = Vec::new();
        for p in parts {
            debug_assert_eq!(p.sort(), Sort::Bool);
            match p.as_bool_lit() {
                Some(false) => {}
                Some(true) => return Term::tt(),
                None => kept.push(p),
            }
        }
        match kept.len() {
            0 => Term::ff(),
            1 => kept.pop().unwrap(),
            _ => Term::mk(Node::Or(kept), Sort::Bool),
        }
    }

    pub fn and2(&self, other: &Term) -> Term {
        Term::and([self.clone(), other.clone()])
    }

    pub fn or2(&self, other: &Term) -> Term {
        Term::or([self.clone(), other.clone()])
    }

    pub fn implies(&self, other: &Term) -> Term {
        match (self.as_bool_lit(), other.as_bool_lit()) {
            (Some(false), _) | (_, Some(true)) => Term::tt(),
            (Some(true), _) => other.clone(),
            (_, Some(false)) => self.not(),
            _ => Term::mk(Node::Implies(self.clone(), other.clone()), Sort::Bool),
        }
    }

    /// Equality; on booleans this is equivalence.
    pub fn eq_to(&self, other: &Term) -> Term {
        debug_assert_eq!(self.sort(), other.sort());
        if self == other {
            return Term::tt();
        }
        match (self.node(), other.node()) {
            (Node::BoolLit(a), Node::BoolLit(b)) => Term::bool(a == b),
            (Node::IntLit(a), Node::IntLit(b)) => Term::bool(a == b),
            (Node::BvLit { value: a, .. }, Node::BvLit { value: b, .. }) => Term::bool(a == b),
            (_, Node::BoolLit(true)) => self.clone(),
            (_, Node::BoolLit(false)) => self.not(),
            (Node::BoolLit(true), _) => other.clone(),
            (Node::BoolLit(false), _) => other.not(),
            _ => Term::mk(Node::Eq(self.clone(), other.clone()), Sort::Bool),
        }
    }

    pub fn iff(&self, other: &Term) -> Term {
        self.eq_to(other)
    }

    pub fn ite(cond: &Term, then: &Term, els: &Term) -> Term {
        debug_assert_eq!(then.sort(), els.sort());
        match cond.as_bool_lit() {
            Some(true) => then.clone(),
            Some(false) => els.clone(),
            None if then == els => then.clone(),
            None => Term::mk(Node::Ite(cond.clone(), then.clone(), els.clone()), then.sort()),
        }
    }

    pub fn bvop(op: BvOp, a: &Term, b: &Term) -> Term {
        let width = match a.sort() {
            Sort::Bv(w) => w,
            s => panic!("bit-vector operation on {s}"),
        };
        debug_assert_eq!(a.sort(), b.sort());
        if let (Some(x), Some(y)) = (a.as_bv_lit(), b.as_bv_lit()) {
            return Term::bv(width, op.apply(width, x, y));
        }
        Term::mk(Node::Bv(op, a.clone(), b.clone()), Sort::Bv(width))
    }

    pub fn bv_cmp(op: CmpOp, a: &Term, b: &Term) -> Term {
        debug_assert_eq!(a.sort(), b.sort());
        if let (Some(x), Some(y)) = (a.as_bv_lit(), b.as_bv_lit()) {
            return Term::bool(op.holds(x, y));
        }
        Term::mk(Node::BvCmp(op, a.clone(), b.clone()), Sort::Bool)
    }

    pub fn zero_extend(&self, extra: u32) -> Term {
        let width = match self.sort() {
            Sort::Bv(w) => w,
            s => panic!("zero_extend on {s}"),
        };
        if extra == 0 {
            return self.clone();
        }
        if let Some(v) = self.as_bv_lit() {
            return Term::bv(width + extra, v);
        }
        Term::mk(Node::ZeroExtend(extra, self.clone()), Sort::Bv(width + extra))
    }

    pub fn int_add(parts: impl IntoIterator<Item = Term>) -> Term {
        let mut constant = 0i64;
        let mut kept = Vec::new();
        for p in parts {
            debug_assert_eq!(p.sort(), Sort::Int);
            match p.as_int_lit() {
                Some(c) => constant += c,
                None => kept.push(p),
            }
        }
        if kept.is_empty() {
            return Term::int(constant);
        }
        if constant != 0 {
            kept.push(Term::int(constant));
        }
        if kept.len() == 1 {
            return kept.pop().unwrap();
        }
        Term::mk(Node::IntAdd(kept), Sort::Int)
    }

    pub fn int_cmp(op: CmpOp, a: &Term, b: &Term) -> Term {
        if let (Some(x), Some(y)) = (a.as_int_lit(), b.as_int_lit()) {
            return Term::bool(op.holds(x, y));
        }
        Term::mk(Node::IntCmp(op, a.clone(), b.clone()), Sort::Bool)
    }

    /// `ite(self, 1, 0)` as an integer.
    pub fn indicator(&self) -> Term {
        Term::ite(self, &Term::int(1), &Term::int(0))
    }

    pub fn children(&self) -> Vec<&Term> {
        match self.node() {
            Node::BoolLit(_) | Node::IntLit(_) | Node::BvLit { .. } | Node::Var { .. } => vec![],
            Node::Not(a) | Node::ZeroExtend(_, a) => vec![a],
            Node::And(v) | Node::Or(v) | Node::IntAdd(v) => v.iter().collect(),
            Node::Implies(a, b) | Node::Eq(a, b) | Node::Bv(_, a, b) | Node::BvCmp(_, a, b) | Node::IntCmp(_, a, b) => {
                vec![a, b]
            }
            Node::Ite(c, a, b) => vec![c, a, b],
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.node(), Node::BoolLit(_) | Node::IntLit(_) | Node::BvLit { .. } | Node::Var { .. })
    }

    /// Free variables, sorted by name.
    pub fn free_vars(&self) -> Vec<(String, Sort)> {
        free_vars_of(std::slice::from_ref(self))
    }

    /// Evaluates under `env`; shared sub-terms are evaluated once.
    pub fn eval(&self, env: &dyn Fn(&str) -> Option<Value>) -> Result<Value, EvalError> {
        let mut memo = HashMap::new();
        eval_memo(self, env, &mut memo)
    }

    pub fn eval_bool(&self, env: &dyn Fn(&str) -> Option<Value>) -> Result<bool, EvalError> {
        self.eval(env)?.as_bool().ok_or_else(|| EvalError::SortMismatch(self.to_string()))
    }

    /// Replaces variables by terms. Variables absent from `map` are kept.
    pub fn substitute(&self, map: &HashMap<String, Term>) -> Term {
        let mut memo = HashMap::new();
        subst_memo(self, map, &mut memo)
    }

    /// Number of distinct nodes in the DAG.
    pub fn dag_size(&self) -> usize {
        dag_size_of(std::slice::from_ref(self))
    }
}

/// Number of distinct nodes reachable from any of `roots`.
pub fn dag_size_of(roots: &[Term]) -> usize {
    let mut seen = std::collections::HashSet::new();
    let mut stack: Vec<Term> = roots.to_vec();
    while let Some(t) = stack.pop() {
        if seen.insert(t.ptr()) {
            stack.extend(t.children().into_iter().cloned());
        }
    }
    seen.len()
}

pub fn free_vars_of(roots: &[Term]) -> Vec<(String, Sort)> {
    let mut seen = std::collections::HashSet::new();
    let mut vars = std::collections::BTreeMap::new();
    let mut stack: Vec<Term> = roots.to_vec();
    while let Some(t) = stack.pop() {
        if !seen.insert(t.ptr()) {
            continue;
        }
        if let Node::Var { name, sort } = t.node() {
            vars.insert(name.to_string(), *sort);
        }
        stack.extend(t.children().into_iter().cloned());
    }
    vars.into_iter().collect()
}

fn eval_memo(
    t: &Term,
    env: &dyn Fn(&str) -> Option<Value>,
    memo: &mut HashMap<usize, Value>,
) -> Result<Value, EvalError> {
    if let Some(v) = memo.get(&t.ptr()) {
        return Ok(*v);
    }
    let mismatch = || EvalError::SortMismatch(t.to_string());
    let b = |v: Value| v.as_bool().ok_or_else(mismatch);
    let v = match t.node() {
        Node::BoolLit(x) => Value::Bool(*x),
        Node::IntLit(x) => Value::Int(*x),
        Node::BvLit { width, value } => Value::Bv { width: *width, value: *value },
        Node::Var { name, .. } => env(name).ok_or_else(|| EvalError::Unbound(name.to_string()))?,
        Node::Not(a) => Value::Bool(!b(eval_memo(a, env, memo)?)?),
        Node::And(xs) => {
            let mut r = true;
            for x in xs {
                if !b(eval_memo(x, env, memo)?)? {
                    r = false;
                    break;
                }
            }
            Value::Bool(r)
        }
        Node::Or(xs) => {
            let mut r = false;
            for x in xs {
                if b(eval_memo(x, env, memo)?)? {
                    r = true;
                    break;
                }
            }
            Value::Bool(r)
        }
        Node::Implies(x, y) => {
            let x = b(eval_memo(x, env, memo)?)?;
            Value::Bool(!x || b(eval_memo(y, env, memo)?)?)
        }
        Node::Eq(x, y) => {
            let x = eval_memo(x, env, memo)?;
            let y = eval_memo(y, env, memo)?;
            Value::Bool(x == y)
        }
        Node::Ite(c, x, y) => {
            if b(eval_memo(c, env, memo)?)? {
                eval_memo(x, env, memo)?
            } else {
                eval_memo(y, env, memo)?
            }
        }
        Node::Bv(op, x, y) => {
            let (Value::Bv { width, value: xv }, Value::Bv { value: yv, .. }) =
                (eval_memo(x, env, memo)?, eval_memo(y, env, memo)?)
            else {
                return Err(mismatch());
            };
            Value::Bv { width, value: op.apply(width, xv, yv) }
        }
        Node::BvCmp(op, x, y) => {
            let (Value::Bv { value: xv, .. }, Value::Bv { value: yv, .. }) =
                (eval_memo(x, env, memo)?, eval_memo(y, env, memo)?)
            else {
                return Err(mismatch());
            };
            Value::Bool(op.holds(xv, yv))
        }
        Node::ZeroExtend(extra, x) => match eval_memo(x, env, memo)? {
            Value::Bv { width, value } => Value::Bv { width: width + extra, value },
            _ => return Err(mismatch()),
        },
        Node::IntAdd(xs) => {
            let mut s = 0i64;
            for x in xs {
                match eval_memo(x, env, memo)? {
                    Value::Int(i) => s += i,
                    _ => return Err(mismatch()),
                }
            }
            Value::Int(s)
        }
        Node::IntCmp(op, x, y) => match (eval_memo(x, env, memo)?, eval_memo(y, env, memo)?) {
            (Value::Int(a), Value::Int(c)) => Value::Bool(op.holds(a, c)),
            _ => return Err(mismatch()),
        },
    };
    if v.sort() != t.sort() {
        return Err(mismatch());
    }
    memo.insert(t.ptr(), v);
    Ok(v)
}

fn subst_memo(t: &Term, map: &HashMap<String, Term>, memo: &mut HashMap<usize, Term>) -> Term {
    if let Some(r) = memo.get(&t.ptr()) {
        return r.clone();
    }
    let mut s = |x: &Term| subst_memo(x, map, memo);
    let r = match t.node() {
        Node::BoolLit(_) | Node::IntLit(_) | Node::BvLit { .. } => t.clone(),
        Node::Var { name, .. } => map.get(name.as_ref()).cloned().unwrap_or_else(|| t.clone()),
        Node::Not(a) => s(a).not(),
        Node::And(xs) => Term::and(xs.iter().map(&mut s).collect::<Vec<_>>()),
        Node::Or(xs) => Term::or(xs.iter().map(&mut s).collect::<Vec<_>>()),
        Node::Implies(a, b) => {
            let a = s(a);
            a.implies(&s(b))
        }
        Node::Eq(a, b) => {
            let a = s(a);
            a.eq_to(&s(b))
        }
        Node::Ite(c, a, b) => {
            let c = s(c);
            let a = s(a);
            Term::ite(&c, &a, &s(b))
        }
        Node::Bv(op, a, b) => {
            let a = s(a);
            Term::bvop(*op, &a, &s(b))
        }
        Node::BvCmp(op, a, b) => {
            let a = s(a);
            Term::bv_cmp(*op, &a, &s(b))
        }
        Node::ZeroExtend(k, a) => s(a).zero_extend(*k),
        Node::IntAdd(xs) => Term::int_add(xs.iter().map(&mut s).collect::<Vec<_>>()),
        Node::IntCmp(op, a, b) => {
            let a = s(a);
            Term::int_cmp(*op, &a, &s(b))
        }
    };
    memo.insert(t.ptr(), r.clone());
    r
}

pub(crate) fn cmp_smt_name(op: CmpOp, bv: bool) -> &'static str {
    if bv {
        op.bv_name()
    } else {
        op.int_name()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<Value> {
        None
    }

    #[test]
    fn folding_of_constants() {
        let a = Term::bv(8, 200);
        let b = Term::bv(8, 100);
        assert_eq!(Term::bvop(BvOp::Add, &a, &b).as_bv_lit(), Some(44));
        assert_eq!(Term::bvop(BvOp::Shl, &a, &Term::bv(8, 9)).as_bv_lit(), Some(0));
        assert!(Term::bv_cmp(CmpOp::Lt, &b, &a).is_true());
        assert!(Term::and([Term::tt(), Term::ff()]).is_false());
        assert!(Term::or(Vec::<Term>::new()).is_false());
        assert!(Term::and(Vec::<Term>::new()).is_true());
    }

    #[test]
    fn structural_equality_ignores_sharing() {
        let x = Term::var("x", Sort::Bv(32));
        let a = Term::bvop(BvOp::Add, &x, &Term::bv(32, 1));
        let b = Term::bvop(BvOp::Add, &Term::var("x", Sort::Bv(32)), &Term::bv(32, 1));
        assert_eq!(a, b);
        assert!(a.eq_to(&b).is_true());
    }

    #[test]
    fn evaluation_matches_smt_semantics() {
        let x = Term::var("x", Sort::Bv(8));
        let e = Term::bvop(BvOp::Sub, &Term::bv(8, 3), &x).zero_extend(8);
        let env = |n: &str| (n == "x").then_some(Value::Bv { width: 8, value: 5 });
        assert_eq!(e.eval(&env).unwrap(), Value::Bv { width: 16, value: 254 });
        assert!(matches!(e.eval(&no_env), Err(EvalError::Unbound(_))));
    }

    #[test]
    fn substitution_refolds() {
        let x = Term::var("x", Sort::Bool);
        let y = Term::var("y", Sort::Bool);
        let f = x.and2(&y.not());
        let mut map = HashMap::new();
        map.insert("y".to_string(), Term::tt());
        assert!(f.substitute(&map).is_false());
    }
}
