//! Set-equality and tag-inequality predicates between pairs of accesses.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::smt::{Sort, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredKind {
    /// `set(r_j) = set(r_i)`
    Set,
    /// `tag(r_j) != tag(r_i)`
    Tag,
}

/// Predicate between accesses `j < i` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PredId {
    pub kind: PredKind,
    pub j: usize,
    pub i: usize,
}

impl PredId {
    pub fn set(j: usize, i: usize) -> PredId {
        debug_assert!(j < i);
        PredId { kind: PredKind::Set, j, i }
    }

    pub fn tag(j: usize, i: usize) -> PredId {
        debug_assert!(j < i);
        PredId { kind: PredKind::Tag, j, i }
    }

    /// Name of the boolean standing for this predicate.
    pub fn var_name(&self) -> String {
        self.to_string()
    }

    pub fn var(&self) -> Term {
        Term::var(self.var_name(), Sort::Bool)
    }
}

/// Ordered by later access, then earlier access, then kind.
impl Ord for PredId {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.i, self.j, self.kind).cmp(&(other.i, other.j, other.kind))
    }
}

impl PartialOrd for PredId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PredId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            PredKind::Set => "set",
            PredKind::Tag => "tag",
        };
        write!(f, "rho.{k}.{}.{}", self.j, self.i)
    }
}

impl FromStr for PredId {
    type Err = String;

    fn from_str(s: &str) -> Result<PredId, String> {
        let bad = || format!("not a predicate name: `{s}`");
        let mut parts = s.split('.');
        if parts.next() != Some("rho") {
            return Err(bad());
        }
        let kind = match parts.next() {
            Some("set") => PredKind::Set,
            Some("tag") => PredKind::Tag,
            _ => return Err(bad()),
        };
        let j: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        let i: usize = parts.next().and_then(|x| x.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() || j == 0 || j >= i {
            return Err(bad());
        }
        Ok(PredId { kind, j, i })
    }
}

/// All predicates over `n` accesses, in [`PredId`] order.
pub fn universe(n: usize) -> Vec<PredId> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 2..=n {
        for j in 1..i {
            out.push(PredId::set(j, i));
            out.push(PredId::tag(j, i));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn universe_size_and_names() {
        for n in 0..8 {
            let u = universe(n);
            let pairs = n * n.saturating_sub(1) / 2;
            assert_eq!(u.iter().filter(|p| p.kind == PredKind::Set).count(), pairs);
            assert_eq!(u.iter().filter(|p| p.kind == PredKind::Tag).count(), pairs);
            let mut sorted = u.clone();
            sorted.sort();
            assert_eq!(sorted, u);
        }
        let p = PredId::set(3, 4);
        assert_eq!(p.var_name(), "rho.set.3.4");
        assert_eq!("rho.set.3.4".parse::<PredId>().unwrap(), p);
        assert!("rho.tag.4.3".parse::<PredId>().is_err());
        assert!("miss.3".parse::<PredId>().is_err());
    }
}
