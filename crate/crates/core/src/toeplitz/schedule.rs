use crate::error::{Error, Result};
use crate::group::QuotientChain;
use num_rational::Ratio;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;

/// Target hole density `κ = p/q ∈ [0, 1)`, kept in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Kappa(Ratio<u64>);

impl Kappa {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidParameter("kappa denominator is zero".into()));
        }
        if p >= q {
            return Err(Error::KappaOutOfRange(format!("{p}/{q}")));
        }
        Ok(Kappa(Ratio::new(p, q)))
    }

    pub fn zero() -> Self {
        Kappa(Ratio::new(0, 1))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// The unique `a` with `(a−1)/idx ≤ κ < a/idx`, i.e. `⌊κ·idx⌋ + 1`.
    pub fn bracket(&self, index: usize) -> usize {
        (self.numer() as u128 * index as u128 / self.denom() as u128) as usize + 1
    }

    /// Exact check of `(a−1)/idx ≤ κ < a/idx`.
    pub fn in_bracket(&self, a: usize, index: usize) -> bool {
        let (p, q) = (self.numer() as u128, self.denom() as u128);
        let (a, idx) = (a as u128, index as u128);
        a >= 1 && (a - 1) * q <= p * idx && p * idx < a * q
    }
}

impl fmt::Display for Kappa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for Kappa {
    type Err = Error;

    /// Accepts `p/q` or an integer; decimal notation is rejected.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains('.') || s.contains('e') || s.contains('E') {
            return Err(Error::InvalidParameter(format!("kappa `{s}` must be a rational p/q, not a decimal")));
        }
        let parse = |t: &str| {
            t.trim().parse::<u64>().map_err(|_| Error::InvalidParameter(format!("kappa `{s}` is not a rational p/q")))
        };
        match s.split_once('/') {
            Some((p, q)) => Kappa::new(parse(p)?, parse(q)?),
            None => Kappa::new(parse(s)?, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScheduleEntry {
    /// 0-based chain level.
    pub level: usize,
    pub index: usize,
    pub holes: usize,
}

/// Hole budgets `a_n` on a subsequence of chain levels.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleSchedule {
    pub kappa: Kappa,
    pub k: usize,
    pub entries: Vec<ScheduleEntry>,
    /// Chain levels skipped because `a_n < a_prev·[H_prev:H_n]` failed.
    pub dropped: Vec<usize>,
}

impl HoleSchedule {
    pub fn entry(&self, level: usize) -> Option<&ScheduleEntry> {
        self.entries.iter().find(|e| e.level == level)
    }

    /// Bracketing and `a_n < a_prev·ratio` along the retained levels.
    pub fn check(&self) -> std::result::Result<(), String> {
        for e in &self.entries {
            if !self.kappa.in_bracket(e.holes, e.index) {
                return Err(format!("level {}: kappa outside [(a-1)/idx, a/idx) for a = {}", e.level + 1, e.holes));
            }
        }
        for w in self.entries.windows(2) {
            let ratio = w[1].index / w[0].index;
            if w[1].holes >= w[0].holes * ratio {
                return Err(format!("level {}: a = {} is not below {}", w[1].level + 1, w[1].holes, w[0].holes * ratio));
            }
        }
        Ok(())
    }
}

/// Brackets `κ` at every chain level and keeps a level only when it colors
/// at least one coset relative to the previously kept level.
pub fn schedule(kappa: Kappa, k: usize, chain: &QuotientChain) -> Result<HoleSchedule> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("alphabet size must be at least 2, got {k}")));
    }
    let mut entries: Vec<ScheduleEntry> = Vec::new();
    let mut dropped = Vec::new();
    for (n, l) in chain.levels.iter().enumerate() {
        let holes = kappa.bracket(l.size);
        let e = ScheduleEntry { level: n, index: l.size, holes };
        match entries.last() {
            None => entries.push(e),
            Some(prev) => {
                let ratio = l.size / prev.index;
                if holes < prev.holes * ratio {
                    entries.push(e);
                } else {
                    dropped.push(n);
                }
            }
        }
    }
    if entries.len() < 2 && chain.depth() > 1 {
        return Err(Error::Infeasible(format!(
            "no level after level {} satisfies a_n < a_prev * [H_prev:H_n] for kappa {kappa}",
            entries[0].level + 1
        )));
    }
    Ok(HoleSchedule { kappa, k, entries, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsing() {
        assert_eq!("1/2".parse::<Kappa>().unwrap(), Kappa::new(2, 4).unwrap());
        assert_eq!("0".parse::<Kappa>().unwrap(), Kappa::zero());
        assert!("0.5".parse::<Kappa>().is_err());
        assert!(matches!("1".parse::<Kappa>(), Err(Error::KappaOutOfRange(_))));
        assert!(matches!("3/2".parse::<Kappa>(), Err(Error::KappaOutOfRange(_))));
        assert!("1/0".parse::<Kappa>().is_err());
    }

    #[test]
    fn kappa_zero_gives_single_holes() {
        let ch = QuotientChain::dyadic(8).unwrap();
        let s = schedule(Kappa::zero(), 2, &ch).unwrap();
        assert!(s.entries.iter().all(|e| e.holes == 1));
        assert_eq!(s.entries.len(), 8);
        s.check().unwrap();
    }

    #[test]
    fn kappa_half_on_dyadic_chain() {
        let ch = QuotientChain::dyadic(10).unwrap();
        let s = schedule(Kappa::new(1, 2).unwrap(), 2, &ch).unwrap();
        for e in &s.entries {
            assert_eq!(e.holes, e.index / 2 + 1);
        }
        assert!(s.dropped.is_empty());
        s.check().unwrap();
    }

    #[test]
    fn kappa_quarter_drops_level_two() {
        let ch = QuotientChain::dyadic(6).unwrap();
        let s = schedule(Kappa::new(1, 4).unwrap(), 2, &ch).unwrap();
        assert_eq!(s.dropped, [1]);
        s.check().unwrap();
    }

    #[test]
    fn bracket_is_exact() {
        let k = Kappa::new(2, 3).unwrap();
        for idx in 1..200 {
            let a = k.bracket(idx);
            assert!(k.in_bracket(a, idx));
            assert!(!k.in_bracket(a + 1, idx));
            assert!(!k.in_bracket(a - 1, idx));
        }
    }
}
