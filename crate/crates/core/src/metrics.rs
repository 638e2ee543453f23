//! Leakage metrics over observation classes, computed exactly.
//!
//! Every quantity is a rational combination of base-2 logarithms of
//! integers. [`LogSum`] keeps it as `sum c_p * log2(p)` over primes `p` with
//! rational `c_p`; since the logarithms of distinct primes are linearly
//! independent over the rationals, two values are equal exactly when their
//! coefficient maps are equal.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fmt::Write as _;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Deserialize;
use serde_json::json;

use crate::cache::OracleReport;
use crate::program::{enumerate_secrets, Assignment, Program, ProgramError};

/// Largest accepted prior weight; keeps factoring of class totals cheap.
pub const MAX_WEIGHT: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LogSum {
    /// Nonzero coefficients only.
    terms: BTreeMap<u128, BigRational>,
}

impl LogSum {
    pub fn zero() -> LogSum {
        LogSum::default()
    }

    /// `log2(n)`; `n` must be positive.
    pub fn log2(n: u128) -> LogSum {
        assert!(n > 0, "logarithm of zero");
        let mut out = LogSum::zero();
        for (p, e) in factor(n) {
            out.add_term(p, BigRational::from_integer(BigInt::from(e)));
        }
        out
    }

    fn add_term(&mut self, p: u128, c: BigRational) {
        let entry = self.terms.entry(p).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&p);
        }
    }

    pub fn add(&self, other: &LogSum) -> LogSum {
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(*p, c.clone());
        }
        out
    }

    pub fn sub(&self, other: &LogSum) -> LogSum {
        self.add(&other.scale(&BigRational::from_integer(BigInt::from(-1))))
    }

    pub fn scale(&self, r: &BigRational) -> LogSum {
        if r.is_zero() {
            return LogSum::zero();
        }
        LogSum { terms: self.terms.iter().map(|(p, c)| (*p, c * r)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn to_f64(&self) -> f64 {
        // a fold from +0.0, since an empty f64 sum is -0.0
        self.terms.iter().fold(0.0, |acc, (p, c)| acc + c.to_f64().unwrap_or(f64::NAN) * (*p as f64).log2())
    }
}

/// `c1*log2(p1) + c2*log2(p2) ...`, or `0`.
impl fmt::Display for LogSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (p, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{c}*log2({p})")?;
        }
        Ok(())
    }
}

/// Prime factorization by trial division.
fn factor(mut n: u128) -> Vec<(u128, u32)> {
    let mut out = Vec::new();
    let mut d = 2u128;
    while d * d <= n {
        let mut e = 0;
        while n.is_multiple_of(d) {
            n /= d;
            e += 1;
        }
        if e > 0 {
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

fn ratio(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `sum w * log2(w)` over positive weights.
fn weighted_logs(weights: impl IntoIterator<Item = u64>) -> LogSum {
    let mut cache: HashMap<u64, LogSum> = HashMap::new();
    let mut counts: BTreeMap<u64, u128> = BTreeMap::new();
    for w in weights.into_iter().filter(|&w| w > 0) {
        *counts.entry(w).or_default() += 1;
    }
    let mut out = LogSum::zero();
    for (w, times) in counts {
        let l = cache.entry(w).or_insert_with(|| LogSum::log2(w as u128));
        out = out.add(&l.scale(&BigRational::from_integer(BigInt::from(w as u128 * times))));
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no observation classes")]
    Empty,
    #[error("prior has zero total weight")]
    ZeroMass,
    #[error("weight {0} exceeds the limit {MAX_WEIGHT}")]
    Weight(u64),
    #[error("input {0} is not in the prior's domain")]
    Domain(String),
    #[error("classes cover {classes} inputs but the prior has {prior}")]
    Size { classes: usize, prior: usize },
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error("malformed prior file: {0}")]
    File(#[from] serde_json::Error),
}

/// Integer weights over the secret domain; probabilities are weights over
/// their total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prior {
    weights: BTreeMap<Assignment, u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorFile {
    #[serde(default = "one")]
    default: u64,
    #[serde(default)]
    weights: BTreeMap<String, u64>,
}

fn one() -> u64 {
    1
}

impl Prior {
    pub fn uniform(p: &Program) -> Result<Prior, MetricsError> {
        Ok(Prior { weights: enumerate_secrets(p)?.map(|a| (a, 1)).collect() })
    }

    pub fn from_weights(weights: BTreeMap<Assignment, u64>) -> Result<Prior, MetricsError> {
        if let Some(&w) = weights.values().find(|&&w| w > MAX_WEIGHT) {
            return Err(MetricsError::Weight(w));
        }
        if weights.values().all(|&w| w == 0) {
            return Err(MetricsError::ZeroMass);
        }
        Ok(Prior { weights })
    }

    /// Reads `{"default": w, "weights": {"<input>": w, ...}}`, where inputs
    /// are written as `name=value` pairs and `default` (1 when omitted)
    /// applies to every input not listed.
    pub fn from_json(p: &Program, text: &str) -> Result<Prior, MetricsError> {
        let file: PriorFile = serde_json::from_str(text)?;
        let mut weights: BTreeMap<Assignment, u64> = enumerate_secrets(p)?.map(|a| (a, file.default)).collect();
        for (input, w) in file.weights {
            let a = Assignment::parse(&p.secrets, &input)?;
            *weights.get_mut(&a).ok_or(MetricsError::Domain(input))? = w;
        }
        Prior::from_weights(weights)
    }

    pub fn weight(&self, a: &Assignment) -> Option<u64> {
        self.weights.get(a).copied()
    }

    pub fn total(&self) -> u128 {
        self.weights.values().map(|&w| w as u128).sum()
    }

    pub fn is_uniform(&self) -> bool {
        let mut it = self.weights.values();
        let first = it.next();
        it.all(|w| Some(w) == first)
    }

    /// Shannon entropy in bits: `log2 W - (1/W) sum w log2 w`.
    pub fn shannon(&self) -> LogSum {
        let total = self.total();
        LogSum::log2(total).sub(&weighted_logs(self.weights.values().copied()).scale(&ratio(1, total)))
    }

    /// Min entropy in bits: `log2 W - log2 max w`.
    pub fn min_entropy(&self) -> LogSum {
        let max = self.weights.values().copied().max().unwrap_or(0) as u128;
        LogSum::log2(self.total()).sub(&LogSum::log2(max))
    }
}

/// The metrics block of a report, in exact form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metrics {
    pub classes: usize,
    pub capacity: LogSum,
    pub shannon_prior: LogSum,
    pub shannon_remaining: LogSum,
    pub min_prior: LogSum,
    pub min_remaining: LogSum,
}

/// Channel capacity in bits: `log2` of the number of classes.
pub fn channel_capacity(classes: usize) -> Result<LogSum, MetricsError> {
    if classes == 0 {
        return Err(MetricsError::Empty);
    }
    Ok(LogSum::log2(classes as u128))
}

/// Expected remaining Shannon entropy after observing the class:
/// `sum_o pr(o) H(prior | o) = (1/W) (sum_o W_o log2 W_o - sum w log2 w)`.
pub fn shannon_remaining(classes: &[Vec<u64>], total: u128) -> LogSum {
    let class_totals = classes.iter().map(|c| c.iter().sum::<u64>());
    let within = weighted_logs(classes.iter().flatten().copied());
    weighted_logs(class_totals).sub(&within).scale(&ratio(1, total))
}

/// Remaining min entropy: `-log2 sum_o pr(o) max_k pr(k | o)`, which is
/// `log2 W - log2 sum_o max_{k in o} w_k`.
pub fn min_entropy_remaining(classes: &[Vec<u64>], total: u128) -> LogSum {
    let vulnerability: u128 = classes.iter().map(|c| c.iter().copied().max().unwrap_or(0) as u128).sum();
    LogSum::log2(total).sub(&LogSum::log2(vulnerability))
}

impl Metrics {
    /// Metrics of the classes of `report` under `prior`, which must weigh
    /// exactly the enumerated inputs.
    pub fn compute(report: &OracleReport, prior: &Prior) -> Result<Metrics, MetricsError> {
        let sizes: usize = report.classes.values().map(Vec::len).sum();
        if sizes != prior.weights.len() {
            return Err(MetricsError::Size { classes: sizes, prior: prior.weights.len() });
        }
        let classes: Vec<Vec<u64>> = report
            .classes
            .values()
            .map(|members| {
                members
                    .iter()
                    .map(|a| prior.weight(a).ok_or_else(|| MetricsError::Domain(a.describe(&report.secrets))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        Metrics::from_class_weights(&classes, prior)
    }

    pub fn from_class_weights(classes: &[Vec<u64>], prior: &Prior) -> Result<Metrics, MetricsError> {
        let total = prior.total();
        Ok(Metrics {
            classes: classes.len(),
            capacity: channel_capacity(classes.len())?,
            shannon_prior: prior.shannon(),
            shannon_remaining: shannon_remaining(classes, total),
            min_prior: prior.min_entropy(),
            min_remaining: min_entropy_remaining(classes, total),
        })
    }

    /// Metrics under the uniform prior over the inputs of `report`.
    pub fn uniform(report: &OracleReport) -> Result<Metrics, MetricsError> {
        let prior = Prior { weights: report.classes.values().flatten().map(|a| (a.clone(), 1)).collect() };
        Metrics::compute(report, &prior)
    }

    pub fn capacity_bits(&self) -> f64 {
        self.capacity.to_f64()
    }

    fn rows(&self) -> [(&'static str, &LogSum); 5] {
        [
            ("capacity_bits", &self.capacity),
            ("shannon_prior", &self.shannon_prior),
            ("shannon_remaining", &self.shannon_remaining),
            ("min_prior", &self.min_prior),
            ("min_remaining", &self.min_remaining),
        ]
    }

    /// `key value exact` lines, each key prefixed by `prefix`.
    pub fn to_text(&self, prefix: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{prefix}classes {}", self.classes);
        for (key, v) in self.rows() {
            let _ = writeln!(out, "{prefix}{key} {:.6} {v}", v.to_f64());
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "classes": self.classes });
        for (key, x) in self.rows() {
            v[key] = json!(x.to_f64());
            v[format!("{key}_exact")] = json!(x.to_string());
        }
        v
    }
}
