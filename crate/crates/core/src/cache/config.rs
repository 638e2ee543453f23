//! Cache geometry and address mapping.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Direct,
    Lru,
    Fifo,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Direct => "direct",
            Policy::Lru => "lru",
            Policy::Fifo => "fifo",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read cache config: {0}")]
    Syntax(String),
    #[error("`{key}` must be a power of two, found {value}")]
    NotPowerOfTwo { key: &'static str, value: u64 },
    #[error("associativity must be at least 1")]
    ZeroAssoc,
    #[error(
        "policy `direct` requires assoc = 1 and `lru`/`fifo` require assoc >= 2 (found {policy} with assoc = {assoc})"
    )]
    PolicyAssoc { policy: Policy, assoc: u32 },
}

/// `sets` sets of `assoc` lines of `line_size` bytes each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheConfig {
    pub sets: u32,
    pub line_size: u32,
    pub assoc: u32,
    pub policy: Policy,
}

/// Position of an address in the cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mapped {
    pub block: u64,
    pub set: u64,
    pub tag: u64,
}

impl CacheConfig {
    pub fn new(sets: u32, line_size: u32, assoc: u32, policy: Policy) -> Result<CacheConfig, ConfigError> {
        let c = CacheConfig { sets, line_size, assoc, policy };
        c.validate()?;
        Ok(c)
    }

    pub fn direct(sets: u32, line_size: u32) -> CacheConfig {
        CacheConfig::new(sets, line_size, 1, Policy::Direct).expect("valid direct-mapped geometry")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, value) in [("sets", self.sets), ("line_size", self.line_size)] {
            if !value.is_power_of_two() {
                return Err(ConfigError::NotPowerOfTwo { key, value: value as u64 });
            }
        }
        if self.assoc == 0 {
            return Err(ConfigError::ZeroAssoc);
        }
        if (self.policy == Policy::Direct) != (self.assoc == 1) {
            return Err(ConfigError::PolicyAssoc { policy: self.policy, assoc: self.assoc });
        }
        Ok(())
    }

    /// Parses the `key = value` config format.
    pub fn from_toml(text: &str) -> Result<CacheConfig, ConfigError> {
        let c: CacheConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        format!(
            "sets = {}\nline_size = {}\nassoc = {}\npolicy = \"{}\"\n",
            self.sets, self.line_size, self.assoc, self.policy
        )
    }

    /// log2 of the line size.
    pub fn line_bits(&self) -> u32 {
        self.line_size.trailing_zeros()
    }

    /// log2 of the number of sets.
    pub fn set_bits(&self) -> u32 {
        self.sets.trailing_zeros()
    }

    pub fn map_address(&self, addr: u64) -> Mapped {
        let block = addr >> self.line_bits();
        Mapped { block, set: block & (self.sets as u64 - 1), tag: block >> self.set_bits() }
    }
}

impl fmt::Display for CacheConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sets={} line_size={} assoc={} policy={}", self.sets, self.line_size, self.assoc, self.policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mapping_on_1kb_direct_mapped() {
        let c = CacheConfig::direct(32, 32);
        assert_eq!(c.map_address(0x0), Mapped { block: 0, set: 0, tag: 0 });
        assert_eq!(c.map_address(0x420), Mapped { block: 33, set: 1, tag: 1 });
        assert_eq!(c.map_address(0x41F), Mapped { block: 32, set: 0, tag: 1 });
    }

    #[test]
    fn toml_round_trip_and_validation() {
        let c = CacheConfig::from_toml("sets = 2\nline_size = 16\nassoc = 2\npolicy = \"lru\"\n").unwrap();
        assert_eq!(c, CacheConfig { sets: 2, line_size: 16, assoc: 2, policy: Policy::Lru });
        assert_eq!(CacheConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert!(matches!(
            CacheConfig::from_toml("sets = 3\nline_size = 16\nassoc = 1\npolicy = \"direct\""),
            Err(ConfigError::NotPowerOfTwo { key: "sets", value: 3 })
        ));
        assert!(matches!(
            CacheConfig::from_toml("sets = 4\nline_size = 16\nassoc = 2\npolicy = \"direct\""),
            Err(ConfigError::PolicyAssoc { .. })
        ));
        assert!(matches!(
            CacheConfig::from_toml("sets = 4\nline_size = 16\nassoc = 1\npolicy = \"fifo\""),
            Err(ConfigError::PolicyAssoc { .. })
        ));
        assert!(CacheConfig::from_toml("sets = 4\nline_size = 16\nassoc = 1\npolicy = \"direct\"\nways = 2").is_err());
    }
}
