//! Exact concrete cache simulation from an empty initial state.

use std::collections::VecDeque;

use super::config::{CacheConfig, Policy};

/// Per-set contents ordered from most recently inserted (or used, for LRU)
/// to the next victim.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheState {
    cfg: CacheConfig,
    sets: Vec<VecDeque<u64>>,
}

impl CacheState {
    pub fn new(cfg: CacheConfig) -> CacheState {
        CacheState { cfg, sets: vec![VecDeque::new(); cfg.sets as usize] }
    }

    /// Accesses `block`; returns `true` on a miss.
    pub fn access(&mut self, block: u64) -> bool {
        let set = &mut self.sets[(block & (self.cfg.sets as u64 - 1)) as usize];
        if let Some(pos) = set.iter().position(|&b| b == block) {
            if self.cfg.policy == Policy::Lru {
                set.remove(pos);
                set.push_front(block);
            }
            return false;
        }
        set.push_front(block);
        if set.len() > self.cfg.assoc as usize {
            set.pop_back();
        }
        true
    }

    /// Blocks held by set `s`, newest first.
    pub fn set_contents(&self, s: usize) -> Vec<u64> {
        self.sets[s].iter().copied().collect()
    }
}

/// Miss vector (`true` = miss) of a block sequence.
pub fn simulate(cfg: &CacheConfig, blocks: &[u64]) -> Vec<bool> {
    let mut st = CacheState::new(*cfg);
    blocks.iter().map(|&b| st.access(b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_set(assoc: u32, policy: Policy) -> CacheConfig {
        CacheConfig::new(1, 32, assoc, policy).unwrap()
    }

    #[test]
    fn lru_hit_refreshes() {
        assert_eq!(simulate(&one_set(2, Policy::Lru), &[1, 2, 2, 1]), vec![true, true, false, false]);
        // 1 refreshed by the hit, so 2 is the victim for 3
        assert_eq!(simulate(&one_set(2, Policy::Lru), &[1, 2, 1, 3, 1, 2]), vec![true, true, false, true, false, true]);
    }

    #[test]
    fn fifo_hit_keeps_order() {
        assert_eq!(simulate(&one_set(2, Policy::Fifo), &[1, 2, 1, 1]), vec![true, true, false, false]);
        // 1 stays oldest despite the hit and is evicted by 3
        assert_eq!(simulate(&one_set(2, Policy::Fifo), &[1, 2, 1, 3, 1]), vec![true, true, false, true, true]);
    }

    #[test]
    fn direct_mapped_ping_pong() {
        let c = CacheConfig::direct(4, 16);
        assert_eq!(simulate(&c, &[0, 4, 0]), vec![true, true, true]);
        assert_eq!(simulate(&c, &[0, 1, 0]), vec![true, true, false]);
    }

    #[test]
    fn fifo_hit_leaves_state_identical() {
        let mut st = CacheState::new(one_set(2, Policy::Fifo));
        st.access(5);
        st.access(6);
        let before = st.clone();
        assert!(!st.access(5));
        assert_eq!(st, before);
    }
}
