//! Desk programs and a seeded generator of small random programs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cache::{CacheConfig, Policy};
use crate::program::{parse_program, AccessKind, ArrayDecl, BinOp, Expr, Program, Secret, Stmt};

pub const EX_A: &str = include_str!("../corpus/exA.prog");
pub const EX_B: &str = include_str!("../corpus/exB.prog");
pub const TRI: &str = include_str!("../corpus/tri.prog");
pub const LRU_FIXTURE: &str = include_str!("../corpus/lru_fixture.prog");
pub const FIFO_FIXTURE: &str = include_str!("../corpus/fifo_fixture.prog");
pub const DESK_CACHE: &str = include_str!("../corpus/desk.toml");

pub fn ex_a() -> Program {
    parse_program(EX_A).expect("exA parses")
}

pub fn ex_b() -> Program {
    parse_program(EX_B).expect("exB parses")
}

pub fn tri() -> Program {
    parse_program(TRI).expect("tri parses")
}

/// 1KB direct-mapped cache with 32-byte lines.
pub fn desk_cache() -> CacheConfig {
    CacheConfig::from_toml(DESK_CACHE).expect("desk cache config is valid")
}

/// Small caches that make the random programs conflict: direct-mapped with
/// four 16-byte sets, and 2-way LRU and FIFO with two 16-byte sets.
pub fn corpus_caches() -> [CacheConfig; 3] {
    [
        CacheConfig::direct(4, 16),
        CacheConfig::new(2, 16, 2, Policy::Lru).expect("valid"),
        CacheConfig::new(2, 16, 2, Policy::Fifo).expect("valid"),
    ]
}

pub const CORPUS_LINE: u64 = 16;
pub const MAX_ACCESSES: u64 = 20;
pub const MAX_SECRET_BITS: u32 = 8;

struct Gen {
    rng: ChaCha8Rng,
    /// Only line-internal secret offsets and branches with identical arms.
    safe: bool,
    secrets: Vec<Secret>,
    arrays: Vec<ArrayDecl>,
    locals: Vec<String>,
    counters: Vec<String>,
    budget: u64,
    fresh: usize,
}

impl Gen {
    fn secret(&mut self) -> (Expr, u32) {
        let s = self.secrets.choose(&mut self.rng).unwrap().clone();
        (Expr::Var(s.name), s.width)
    }

    fn lit(&mut self, hi: u32) -> Expr {
        Expr::Int(self.rng.gen_range(0..hi.max(1)))
    }

    fn cond(&mut self) -> Expr {
        let (s, w) = self.secret();
        let max = 1u32 << w;
        let c = self.rng.gen_range(0..max);
        let base = match self.rng.gen_range(0..5) {
            0 => Expr::bin(BinOp::Lt, s, Expr::Int(c.max(1))),
            1 => Expr::bin(BinOp::Eq, s, Expr::Int(c)),
            2 => Expr::bin(
                BinOp::Eq,
                Expr::bin(BinOp::BitAnd, s, Expr::Int(1 << self.rng.gen_range(0..w))),
                Expr::Int(0),
            ),
            3 => Expr::bin(BinOp::Ge, s, Expr::Int(c)),
            _ => Expr::bin(BinOp::Ne, s, Expr::Int(c)),
        };
        if self.secrets.len() > 1 && self.rng.gen_bool(0.25) {
            let (s2, w2) = self.secret();
            let other = Expr::bin(BinOp::Lt, s2, Expr::Int(self.rng.gen_range(1..=(1u32 << w2))));
            let op = if self.rng.gen_bool(0.5) { BinOp::And } else { BinOp::Or };
            return Expr::bin(op, base, other);
        }
        base
    }

    /// Index into `arr`, secret-dependent with some probability.
    fn index(&mut self, arr: &ArrayDecl) -> Expr {
        let per_line = (CORPUS_LINE / arr.elem_size).max(1) as u32;
        let lines = (arr.count as u32).div_ceil(per_line);
        if !self.counters.is_empty() && self.rng.gen_bool(0.4) {
            let i = Expr::Var(self.counters.choose(&mut self.rng).unwrap().clone());
            return if self.rng.gen_bool(0.5) { i } else { Expr::bin(BinOp::Add, i, self.lit(2)) };
        }
        if self.rng.gen_bool(0.35) {
            return self.lit(arr.count as u32);
        }
        if self.safe {
            // an offset inside one line: per_line * line + (s & (per_line - 1))
            let line = self.rng.gen_range(0..lines);
            let start = Expr::Int(line * per_line);
            if per_line == 1 {
                return start;
            }
            let (s, _) = self.secret();
            return Expr::bin(BinOp::Add, start, Expr::bin(BinOp::BitAnd, s, Expr::Int(per_line - 1)));
        }
        if !self.locals.is_empty() && self.rng.gen_bool(0.3) {
            return Expr::Var(self.locals.choose(&mut self.rng).unwrap().clone());
        }
        let (s, w) = self.secret();
        match self.rng.gen_range(0..6) {
            0 => s,
            1 => Expr::bin(BinOp::BitAnd, s, Expr::Int((arr.count as u32 - 1).max(1))),
            2 => Expr::bin(BinOp::Shr, s, Expr::Int(self.rng.gen_range(1..=w))),
            3 => Expr::bin(BinOp::BitAnd, Expr::bin(BinOp::Add, s, self.lit(8)), Expr::Int(7)),
            4 => Expr::bin(BinOp::Mul, s, Expr::Int(2)),
            _ => Expr::bin(BinOp::BitXor, s, self.lit(4)),
        }
    }

    fn access(&mut self) -> Stmt {
        // a safe secret offset needs several elements per line
        let narrow: Vec<&ArrayDecl> = self.arrays.iter().filter(|a| a.elem_size < CORPUS_LINE).collect();
        let arr = if self.safe && !narrow.is_empty() && self.rng.gen_bool(0.7) {
            (*narrow.choose(&mut self.rng).unwrap()).clone()
        } else {
            self.arrays.choose(&mut self.rng).unwrap().clone()
        };
        let kind = if self.rng.gen_bool(0.8) { AccessKind::Load } else { AccessKind::Store };
        let index = self.index(&arr);
        Stmt::Access { kind, array: arr.name, index }
    }

    fn block(&mut self, depth: u32, max_sites: u64) -> Vec<Stmt> {
        let mut body = Vec::new();
        let mut sites = 0;
        let target = self.rng.gen_range(1..=max_sites.max(1));
        while sites < target && self.budget > 0 {
            let room = (target - sites).min(self.budget);
            let pick = self.rng.gen_range(0..10);
            if pick < 2 && depth < 2 && room >= 2 {
                let cond = self.cond();
                let locals = self.locals.len();
                let then_body = self.block(depth + 1, room / 2);
                self.locals.truncate(locals);
                let else_body = if self.safe {
                    let n = crate::program::block_sites(&then_body);
                    if self.budget < n {
                        Vec::new()
                    } else {
                        self.budget -= n;
                        then_body.clone()
                    }
                } else if self.rng.gen_bool(0.3) {
                    Vec::new()
                } else {
                    let r = self.block(depth + 1, (room / 2).max(1));
                    self.locals.truncate(locals);
                    r
                };
                if self.safe && crate::program::block_sites(&else_body) != crate::program::block_sites(&then_body) {
                    // out of budget for a balanced copy: keep only the unconditional arm
                    sites += crate::program::block_sites(&then_body);
                    body.extend(then_body);
                    continue;
                }
                sites += crate::program::block_sites(&then_body) + crate::program::block_sites(&else_body);
                body.push(Stmt::If { cond, then_body, else_body });
            } else if pick < 3 && depth < 2 && room >= 2 {
                let trips = self.rng.gen_range(2..=3u32).min(room as u32);
                let var = format!("i{}", self.fresh);
                self.fresh += 1;
                self.counters.push(var.clone());
                let per = self.rng.gen_range(1..=2u64).min(room / trips as u64).max(1);
                let mut inner = Vec::new();
                for _ in 0..per {
                    inner.push(self.access());
                }
                self.counters.pop();
                let total = per * trips as u64;
                self.budget = self.budget.saturating_sub(total);
                sites += total;
                body.push(Stmt::For { var, lo: 0, hi: trips, body: inner });
            } else if pick < 4 && !self.safe {
                let name = format!("t{}", self.fresh);
                self.fresh += 1;
                let (s, _) = self.secret();
                let value = Expr::bin(BinOp::Add, s, self.lit(4));
                self.locals.push(name.clone());
                body.push(Stmt::Let { name, value });
            } else {
                body.push(self.access());
                self.budget -= 1;
                sites += 1;
            }
        }
        body
    }
}

/// Random program with at most [`MAX_ACCESSES`] unrolled accesses and at
/// most [`MAX_SECRET_BITS`] secret bits. Deterministic in `seed`.
pub fn random_program(seed: u64) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let safe = rng.gen_bool(0.5);
    let secrets = if rng.gen_bool(0.6) {
        vec![Secret { name: "k".into(), width: rng.gen_range(2..=MAX_SECRET_BITS) }]
    } else {
        let w1 = rng.gen_range(1..=4);
        let w2 = rng.gen_range(1..=MAX_SECRET_BITS - w1).min(4);
        vec![Secret { name: "k".into(), width: w1 }, Secret { name: "j".into(), width: w2 }]
    };
    let mut arrays = Vec::new();
    let mut next_base = 0u64;
    for (k, name) in ["A", "B", "C"].iter().take(rng.gen_range(2..=3)).enumerate() {
        // safe programs get at least one array that can hide a secret offset in a line
        let elem_size = if safe && k == 0 { 4 } else { *[4u64, 16].choose(&mut rng).unwrap() };
        let count = *[4u64, 8, 16].choose(&mut rng).unwrap();
        let base = next_base + CORPUS_LINE * rng.gen_range(0..4);
        arrays.push(ArrayDecl { name: (*name).into(), count, elem_size, base });
        next_base = (base + count * elem_size).next_multiple_of(CORPUS_LINE);
    }
    let budget = if safe { rng.gen_range(6..=MAX_ACCESSES) } else { rng.gen_range(3..=MAX_ACCESSES) };
    let mut g = Gen { rng, safe, secrets, arrays, locals: Vec::new(), counters: Vec::new(), budget, fresh: 0 };
    let mut body = Vec::new();
    while g.budget > 0 {
        let more = g.block(0, budget);
        body.extend(more);
    }
    let p = Program { name: format!("rand{seed}"), secrets: g.secrets, arrays: g.arrays, body };
    // the printed form is the canonical one
    parse_program(&p.to_string()).expect("generated program parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_respects_bounds() {
        for seed in 0..300 {
            let p = random_program(seed);
            assert!(p.site_count() >= 1 && p.site_count() <= MAX_ACCESSES, "seed {seed}: {}", p.site_count());
            assert!(p.secret_bits() <= MAX_SECRET_BITS);
            assert_eq!(random_program(seed), p);
        }
    }

    #[test]
    fn desk_programs_parse() {
        assert_eq!(ex_a().site_count(), 4);
        assert_eq!(ex_b().site_count(), 4);
        assert_eq!(tri().site_count(), 5);
        assert_eq!(desk_cache(), CacheConfig::direct(32, 32));
    }
}
