//! Exhaustive enumeration of secret assignments.

use super::ast::Program;
use super::unroll::Assignment;
use super::ProgramError;

/// Largest total secret width that may be enumerated.
pub const ENUMERATION_LIMIT_BITS: u32 = 20;

/// All assignments of a program's secrets in ascending lexicographic order,
/// the first declared secret being most significant.
#[derive(Debug, Clone)]
pub struct SecretDomain {
    widths: Vec<u32>,
    next: u64,
    end: u64,
}

impl SecretDomain {
    pub fn size(&self) -> u64 {
        self.end
    }
}

impl Iterator for SecretDomain {
    type Item = Assignment;

    fn next(&mut self) -> Option<Assignment> {
        if self.next >= self.end {
            return None;
        }
        let mut rest = self.next;
        let mut vals = vec![0u64; self.widths.len()];
        for (k, w) in self.widths.iter().enumerate().rev() {
            vals[k] = rest & ((1u64 << w) - 1);
            rest >>= w;
        }
        self.next += 1;
        Some(Assignment(vals))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.end - self.next) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for SecretDomain {}

pub fn enumerate_secrets(p: &Program) -> Result<SecretDomain, ProgramError> {
    let bits = p.secret_bits();
    if bits > ENUMERATION_LIMIT_BITS {
        return Err(ProgramError::EnumerationLimit { bits, limit: ENUMERATION_LIMIT_BITS });
    }
    Ok(SecretDomain { widths: p.secrets.iter().map(|s| s.width).collect(), next: 0, end: 1u64 << bits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;

    #[test]
    fn sizes_and_order() {
        let p = parse_program("secret a:u2;").unwrap();
        let all: Vec<_> = enumerate_secrets(&p).unwrap().map(|a| a.0[0]).collect();
        assert_eq!(all, vec![0, 1, 2, 3]);
        assert_eq!(enumerate_secrets(&parse_program("secret a:u8;").unwrap()).unwrap().count(), 256);

        let p = parse_program("secret a:u8; secret b:u8;").unwrap();
        let mut d = enumerate_secrets(&p).unwrap();
        assert_eq!(d.size(), 65536);
        assert_eq!(d.next(), Some(Assignment(vec![0, 0])));
        assert_eq!(d.next(), Some(Assignment(vec![0, 1])));
        assert_eq!(d.last(), Some(Assignment(vec![255, 255])));
    }

    #[test]
    fn refuses_wide_domains() {
        let p = parse_program("secret a:u16; secret b:u5;").unwrap();
        assert_eq!(
            enumerate_secrets(&p).unwrap_err(),
            ProgramError::EnumerationLimit { bits: 21, limit: ENUMERATION_LIMIT_BITS }
        );
    }

    #[test]
    fn no_secrets_is_one_assignment() {
        let p = parse_program("array A[1]:1 @0;").unwrap();
        assert_eq!(enumerate_secrets(&p).unwrap().collect::<Vec<_>>(), vec![Assignment(vec![])]);
    }
}
