use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive};

/// Upper bound on the number of distinct TTL steps before the cap. A growth
/// factor so close to 1 that it needs more steps than this is refused.
const MAX_STEPS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TtlError {
    #[error("base_ttl must be at least 1 second")]
    ZeroBase,
    #[error("max_ttl ({max}) must be at least base_ttl ({base})")]
    MaxBelowBase { base: u64, max: u64 },
    #[error("growth factor must be a rational number >= 1, got {0:?}")]
    BadGrowth(String),
    #[error("growth factor {0} needs more than {MAX_STEPS} steps to reach max_ttl")]
    GrowthTooSlow(String),
}

/// Lifetime schedule for blacklist entries:
/// `ttl(h) = min(floor(base * growth^(h-1)), max)` for hit count `h >= 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TtlPolicy {
    base: u64,
    growth: Ratio<u64>,
    max: u64,
    /// `ttl(1)..` up to and including the first capped value.
    steps: Vec<u64>,
}

impl TtlPolicy {
    pub fn new(base: u64, growth: Ratio<u64>, max: u64) -> Result<Self, TtlError> {
        if base == 0 {
            return Err(TtlError::ZeroBase);
        }
        if max < base {
            return Err(TtlError::MaxBelowBase { base, max });
        }
        if *growth.denom() == 0 || growth < Ratio::one() {
            return Err(TtlError::BadGrowth(growth.to_string()));
        }
        let steps = schedule(base, growth, max).ok_or_else(|| TtlError::GrowthTooSlow(growth.to_string()))?;
        Ok(TtlPolicy { base, growth, max, steps })
    }

    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn growth(&self) -> Ratio<u64> {
        self.growth
    }

    pub fn max(&self) -> u64 {
        self.max
    }

    /// Lifetime in seconds granted at hit count `hits` (treated as 1 if 0).
    pub fn ttl(&self, hits: u64) -> u64 {
        let idx = hits.saturating_sub(1);
        match usize::try_from(idx) {
            Ok(i) if i < self.steps.len() => self.steps[i],
            _ => *self.steps.last().expect("schedule is never empty"),
        }
    }
}

impl Default for TtlPolicy {
    fn default() -> Self {
        TtlPolicy::new(3600, Ratio::from_integer(2), 86_400).expect("default ttl policy is valid")
    }
}

/// Exact schedule, stopping at the first value that reaches the cap. When
/// `growth == 1` the schedule is the single value `min(base, max)`.
fn schedule(base: u64, growth: Ratio<u64>, max: u64) -> Option<Vec<u64>> {
    let mut steps = vec![base.min(max)];
    if growth.is_integer() && *growth.numer() == 1 {
        return Some(steps);
    }
    let (p, q) = (BigUint::from(*growth.numer()), BigUint::from(*growth.denom()));
    let mut num = BigUint::from(base);
    let mut den = BigUint::one();
    let cap = BigUint::from(max);
    while *steps.last().expect("non-empty") < max {
        if steps.len() > MAX_STEPS {
            return None;
        }
        num *= &p;
        den *= &q;
        let value = &num / &den;
        steps.push(if value >= cap { max } else { value.to_u64().expect("below u64 cap") });
    }
    Some(steps)
}

/// Parses a growth factor written as an integer (`2`), a decimal (`1.5`) or
/// a fraction (`3/2`).
pub fn parse_growth(text: &str) -> Result<Ratio<u64>, TtlError> {
    let bad = || TtlError::BadGrowth(text.to_string());
    let text = text.trim();
    if let Some((int, frac)) = text.split_once('.') {
        if frac.is_empty() || frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let denom = 10u64.pow(frac.len() as u32);
        let frac: u64 = frac.parse().map_err(|_| bad())?;
        let numer = int.checked_mul(denom).and_then(|n| n.checked_add(frac)).ok_or_else(bad)?;
        return Ok(Ratio::new(numer, denom));
    }
    Ratio::from_str(text).map_err(|_| bad())
}

impl fmt::Display for TtlPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "base={}s growth={} max={}s", self.base, self.growth, self.max)
    }
}
