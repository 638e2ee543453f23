//! Bounded unrolling into a guarded access sequence.
//!
//! Symbolic values are 32-bit terms over the secret variables `sec.<name>`.
//! Both arms of every branch contribute their accesses, guarded by the
//! branch condition and its negation. Locals updated inside an arm are
//! merged after the branch with `ite`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::ProgramError;
use crate::smt::{BvOp, CmpOp, Sort, Term, Value};

pub const DEFAULT_UNROLL_LIMIT: usize = 4096;
/// Bound on executed loop iterations during unrolling, independent of accesses.
const ITERATION_LIMIT: u64 = 1 << 22;

/// Name of the solver variable holding secret `name`.
pub fn secret_var_name(name: &str) -> String {
    format!("sec.{name}")
}

pub fn secret_var(s: &Secret) -> Term {
    Term::var(secret_var_name(&s.name), Sort::Bv(s.width))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessSite {
    /// 1-based position in the unrolled sequence.
    pub index: usize,
    pub kind: AccessKind,
    pub array: String,
    pub guard: Term,
    pub address: Term,
    /// Present iff the address mentions no secret.
    pub const_address: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnrolledTrace {
    pub secrets: Vec<Secret>,
    pub accesses: Vec<AccessSite>,
}

impl UnrolledTrace {
    pub fn len(&self) -> usize {
        self.accesses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accesses.is_empty()
    }

    /// 1-based access lookup.
    pub fn site(&self, i: usize) -> &AccessSite {
        &self.accesses[i - 1]
    }

    pub fn secret_vars(&self) -> Vec<Term> {
        self.secrets.iter().map(secret_var).collect()
    }
}

/// Concrete secret values, in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment(pub Vec<u64>);

impl Assignment {
    /// Environment binding `sec.<name>` for term evaluation.
    pub fn env<'a>(&'a self, secrets: &'a [Secret]) -> impl Fn(&str) -> Option<Value> + 'a {
        move |n: &str| {
            let name = n.strip_prefix("sec.")?;
            let k = secrets.iter().position(|s| s.name == name)?;
            Some(Value::Bv { width: secrets[k].width, value: self.0[k] })
        }
    }

    /// `name=value` pairs joined by commas.
    pub fn describe(&self, secrets: &[Secret]) -> String {
        secrets.iter().zip(&self.0).map(|(s, v)| format!("{}={v}", s.name)).collect::<Vec<_>>().join(",")
    }

    /// Inverse of [`Assignment::describe`]; pairs may be separated by commas
    /// or whitespace and must name every secret once, within its width.
    pub fn parse(secrets: &[Secret], text: &str) -> Result<Assignment, ProgramError> {
        let err = |msg: String| ProgramError::Assignment { text: text.to_string(), msg };
        let mut values: Vec<Option<u64>> = vec![None; secrets.len()];
        for pair in text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
            let (name, value) = pair.split_once('=').ok_or_else(|| err(format!("`{pair}` is not name=value")))?;
            let k = secrets.iter().position(|s| s.name == name).ok_or_else(|| err(format!("no secret `{name}`")))?;
            let v = match value.strip_prefix("0x") {
                Some(hex) => u64::from_str_radix(hex, 16),
                None => value.parse(),
            }
            .map_err(|_| err(format!("`{value}` is not a number")))?;
            if secrets[k].width < 64 && v >> secrets[k].width != 0 {
                return Err(err(format!("{v} does not fit in {} bits", secrets[k].width)));
            }
            if values[k].replace(v).is_some() {
                return Err(err(format!("`{name}` given twice")));
            }
        }
        let values = values
            .into_iter()
            .zip(secrets)
            .map(|(v, s)| v.ok_or_else(|| err(format!("missing `{}`", s.name))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Assignment(values))
    }

    /// Conjunction `sec.x = v` over all secrets.
    pub fn as_formula(&self, secrets: &[Secret]) -> Term {
        Term::and(secrets.iter().zip(&self.0).map(|(s, v)| secret_var(s).eq_to(&Term::bv(s.width, *v))))
    }

    /// Reads secret values out of a model, defaulting unconstrained ones to 0.
    pub fn from_model(secrets: &[Secret], get: impl Fn(&str) -> Option<Value>) -> Assignment {
        Assignment(
            secrets.iter().map(|s| get(&secret_var_name(&s.name)).and_then(Value::as_u64).unwrap_or(0)).collect(),
        )
    }
}

struct Unroller<'p> {
    program: &'p Program,
    scopes: Vec<HashMap<String, Term>>,
    out: Vec<AccessSite>,
    iterations: u64,
}

impl Unroller<'_> {
    fn lookup(&self, name: &str) -> Term {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(name).cloned())
            .unwrap_or_else(|| panic!("parser admitted unknown variable `{name}`"))
    }

    fn expr(&self, e: &Expr) -> Term {
        match e {
            Expr::Int(v) => Term::bv(32, *v as u64),
            Expr::Bool(b) => Term::bool(*b),
            Expr::Var(v) => self.lookup(v),
            Expr::Not(a) => self.expr(a).not(),
            Expr::Bin(op, a, b) => {
                let (x, y) = (self.expr(a), self.expr(b));
                let arith = |o| Term::bvop(o, &x, &y);
                match op {
                    BinOp::Add => arith(BvOp::Add),
                    BinOp::Sub => arith(BvOp::Sub),
                    BinOp::Mul => arith(BvOp::Mul),
                    BinOp::BitAnd => arith(BvOp::And),
                    BinOp::BitOr => arith(BvOp::Or),
                    BinOp::BitXor => arith(BvOp::Xor),
                    BinOp::Shl => arith(BvOp::Shl),
                    BinOp::Shr => arith(BvOp::Lshr),
                    BinOp::Eq => x.eq_to(&y),
                    BinOp::Ne => x.eq_to(&y).not(),
                    BinOp::Lt => Term::bv_cmp(CmpOp::Lt, &x, &y),
                    BinOp::Le => Term::bv_cmp(CmpOp::Le, &x, &y),
                    BinOp::Gt => Term::bv_cmp(CmpOp::Gt, &x, &y),
                    BinOp::Ge => Term::bv_cmp(CmpOp::Ge, &x, &y),
                    BinOp::And => x.and2(&y),
                    BinOp::Or => x.or2(&y),
                }
            }
        }
    }

    fn block(&mut self, body: &[Stmt], guard: &Term) -> Result<(), ProgramError> {
        self.scopes.push(HashMap::new());
        for s in body {
            self.stmt(s, guard)?;
        }
        self.scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt, guard: &Term) -> Result<(), ProgramError> {
        match s {
            Stmt::Access { kind, array, index } => {
                let arr = self.program.array(array).expect("parser checked array names");
                let offset = Term::bvop(BvOp::Mul, &self.expr(index), &Term::bv(32, arr.elem_size));
                let address = Term::bvop(BvOp::Add, &Term::bv(32, arr.base), &offset);
                let const_address = address.as_bv_lit().map(|a| a as u32);
                self.out.push(AccessSite {
                    index: self.out.len() + 1,
                    kind: *kind,
                    array: array.clone(),
                    guard: guard.clone(),
                    address,
                    const_address,
                });
            }
            Stmt::Let { name, value } => {
                let v = self.expr(value);
                self.scopes.last_mut().unwrap().insert(name.clone(), v);
            }
            Stmt::Assign { name, value } => {
                let v = self.expr(value);
                let scope = self
                    .scopes
                    .iter_mut()
                    .rev()
                    .find(|s| s.contains_key(name))
                    .expect("parser checked assignment targets");
                scope.insert(name.clone(), v);
            }
            Stmt::If { cond, then_body, else_body } => {
                let c = self.expr(cond);
                let before = self.scopes.clone();
                self.block(then_body, &guard.and2(&c))?;
                let after_then = std::mem::replace(&mut self.scopes, before);
                self.block(else_body, &guard.and2(&c.not()))?;
                for (level, scope) in self.scopes.iter_mut().enumerate() {
                    for (name, v_else) in scope.iter_mut() {
                        let v_then = &after_then[level][name];
                        if v_then != v_else {
                            *v_else = Term::ite(&c, v_then, v_else);
                        }
                    }
                }
            }
            Stmt::For { var, lo, hi, body } => {
                for k in *lo..*hi {
                    self.iterations += 1;
                    if self.iterations > ITERATION_LIMIT {
                        return Err(ProgramError::TooManyIterations { limit: ITERATION_LIMIT });
                    }
                    self.scopes.push(HashMap::from([(var.clone(), Term::bv(32, k as u64))]));
                    let r = self.block(body, guard);
                    self.scopes.pop();
                    r?;
                }
            }
        }
        Ok(())
    }
}

/// Unrolls with the default access limit.
pub fn unroll(p: &Program) -> Result<UnrolledTrace, ProgramError> {
    unroll_with_limit(p, DEFAULT_UNROLL_LIMIT)
}

pub fn unroll_with_limit(p: &Program, limit: usize) -> Result<UnrolledTrace, ProgramError> {
    let count = p.site_count();
    if count > limit as u64 {
        return Err(ProgramError::TooManyAccesses { count, limit });
    }
    let globals: HashMap<String, Term> =
        p.secrets.iter().map(|s| (s.name.clone(), secret_var(s).zero_extend(32 - s.width))).collect();
    let mut u = Unroller { program: p, scopes: vec![globals], out: Vec::new(), iterations: 0 };
    u.block(&p.body, &Term::tt())?;
    Ok(UnrolledTrace { secrets: p.secrets.clone(), accesses: u.out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;

    fn trace(src: &str) -> UnrolledTrace {
        unroll(&parse_program(src).unwrap()).unwrap()
    }

    #[test]
    fn straight_line_guards_are_true() {
        let t = trace("array A[8]:4 @0x100; load A[0] load A[1] store A[2]");
        assert_eq!(t.len(), 3);
        assert!(t.accesses.iter().all(|a| a.guard.is_true()));
        assert_eq!(t.site(3).const_address, Some(0x108));
    }

    #[test]
    fn loops_unroll_with_constant_counters() {
        let t = trace("array A[8]:4 @0x100; for i in 0..4 { load A[i] }");
        let addrs: Vec<_> = t.accesses.iter().map(|a| a.const_address.unwrap()).collect();
        assert_eq!(addrs, vec![0x100, 0x104, 0x108, 0x10c]);
    }

    #[test]
    fn branch_arms_get_exclusive_guards() {
        let t = trace("secret k:u2; array A[8]:4 @0; if (k == 1) { load A[0] } else { load A[1] }");
        assert_eq!(t.len(), 2);
        for v in 0..4 {
            let a = Assignment(vec![v]);
            let env = a.env(&t.secrets);
            let g1 = t.site(1).guard.eval_bool(&env).unwrap();
            let g2 = t.site(2).guard.eval_bool(&env).unwrap();
            assert!(g1 ^ g2);
        }
    }

    #[test]
    fn branch_updates_merge() {
        let t = trace("secret k:u2; array A[8]:4 @0; let x = 1; if (k == 3) { x = 5 } load A[x]");
        let addr = &t.site(1).address;
        assert!(!addr.free_vars().is_empty());
        for (v, want) in [(3u64, 20u64), (0, 4)] {
            let a = Assignment(vec![v]);
            assert_eq!(addr.eval(&a.env(&t.secrets)).unwrap().as_u64(), Some(want));
        }
    }

    #[test]
    fn limit_is_enforced() {
        let p = parse_program("array A[8]:4 @0; for i in 0..100 { load A[0] }").unwrap();
        assert!(matches!(unroll_with_limit(&p, 99), Err(ProgramError::TooManyAccesses { count: 100, limit: 99 })));
    }

    #[test]
    fn assignments_parse_back() {
        let secrets = vec![Secret { name: "k".into(), width: 4 }, Secret { name: "j".into(), width: 2 }];
        let a = Assignment(vec![9, 3]);
        assert_eq!(Assignment::parse(&secrets, &a.describe(&secrets)).unwrap(), a);
        assert_eq!(Assignment::parse(&secrets, "j=3 k=0x9").unwrap(), a);
        for bad in ["k=9", "k=16,j=0", "k=1,j=1,k=2", "k=1,x=0", "k=1,j", "k=z,j=0"] {
            assert!(matches!(Assignment::parse(&secrets, bad), Err(ProgramError::Assignment { .. })), "{bad}");
        }
    }
}
