//! Finite windows of the full shift `k^G`: patterns, pseudometrics,
//! pseudoorbits, pullbacks, microstates and separated sets.

use crate::error::{Error, Result};
use crate::group::{ChainLevel, GroupPresentation, Word};
use crate::sofic::SoficLevel;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, HashSet};

/// Letters are `0..k`; the hole symbol is outside every alphabet.
pub const HOLE: u8 = u8::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alphabet {
    k: u8,
}

impl Alphabet {
    pub fn new(k: usize) -> Result<Self> {
        if !(2..HOLE as usize).contains(&k) {
            return Err(Error::InvalidParameter(format!("alphabet size must be in 2..255, got {k}")));
        }
        Ok(Alphabet { k: k as u8 })
    }

    pub fn size(&self) -> usize {
        self.k as usize
    }

    pub fn contains(&self, x: u8) -> bool {
        x < self.k
    }
}

/// A finite pattern `window → letters`, keyed by normal forms.
pub type Pattern = BTreeMap<Word, u8>;

/// `(g·p)` with window `g·window` and `(g·p)(g h) = p(h)`.
pub fn shift_pattern(group: &GroupPresentation, g: &Word, p: &Pattern) -> Pattern {
    p.iter().map(|(h, &x)| (group.mul(g, h), x)).collect()
}

/// Patterns sharing one window, stored as value vectors in window order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSet {
    pub window: Vec<Word>,
    pub patterns: HashSet<Vec<u8>>,
}

impl PatternSet {
    pub fn new(window: Vec<Word>) -> Self {
        PatternSet { window, patterns: HashSet::new() }
    }

    /// Every pattern over the window (the whole shift).
    pub fn full(window: Vec<Word>, k: usize) -> Self {
        let n = window.len();
        let mut patterns = HashSet::new();
        let total = k.pow(n as u32);
        for code in 0..total {
            patterns.insert(decode(code, k, n));
        }
        PatternSet { window, patterns }
    }

    pub fn contains(&self, values: &[u8]) -> bool {
        self.patterns.contains(values)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Patterns in a fixed (lexicographic) order.
    pub fn sorted(&self) -> Vec<Vec<u8>> {
        let mut v: Vec<Vec<u8>> = self.patterns.iter().cloned().collect();
        v.sort();
        v
    }
}

fn decode(mut code: usize, k: usize, n: usize) -> Vec<u8> {
    let mut out = vec![0u8; n];
    for x in out.iter_mut() {
        *x = (code % k) as u8;
        code /= k;
    }
    out
}

/// A map `φ: V → k` or `φ: V → X`, with configurations given on a probe window.
#[derive(Debug, Clone, PartialEq)]
pub enum FiniteMap {
    Letters(Vec<u8>),
    Configs { window: Vec<Word>, values: Vec<Vec<u8>> },
}

impl FiniteMap {
    pub fn len(&self) -> usize {
        match self {
            FiniteMap::Letters(v) => v.len(),
            FiniteMap::Configs { values, .. } => values.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn slot(window: &[Word], w: &Word) -> Option<usize> {
        window.iter().position(|x| x == w)
    }

    /// Value of `φ(v)` at coordinate `e`.
    pub fn at_identity(&self, v: usize) -> Result<u8> {
        match self {
            FiniteMap::Letters(x) => Ok(x[v]),
            FiniteMap::Configs { window, values } => {
                let i = Self::slot(window, &Word::identity()).ok_or_else(|| Error::ProbeWindowMissing("e".into()))?;
                Ok(values[v][i])
            }
        }
    }

    /// `φ∘ψ` for `ψ: U → V`.
    pub fn compose(&self, psi: &[usize]) -> FiniteMap {
        match self {
            FiniteMap::Letters(x) => FiniteMap::Letters(psi.iter().map(|&v| x[v]).collect()),
            FiniteMap::Configs { window, values } => FiniteMap::Configs {
                window: window.clone(),
                values: psi.iter().map(|&v| values[v].clone()).collect(),
            },
        }
    }

    fn identity_values(&self) -> Result<Vec<u8>> {
        (0..self.len()).map(|v| self.at_identity(v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    D2,
    Dinf,
}

/// `d₂` or `d∞` with base metric `d(x, y) = [x_e ≠ y_e]`.
pub fn dists(phi: &FiniteMap, psi: &FiniteMap, mode: Mode) -> Result<f64> {
    if phi.len() != psi.len() {
        return Err(Error::SizeMismatch(format!("{} vs {} points", phi.len(), psi.len())));
    }
    let (a, b) = (phi.identity_values()?, psi.identity_values()?);
    let bad = a.iter().zip(&b).filter(|(x, y)| x != y).count();
    Ok(match mode {
        Mode::D2 => (bad as f64 / a.len().max(1) as f64).sqrt(),
        Mode::Dinf => {
            if bad > 0 {
                1.0
            } else {
                0.0
            }
        }
    })
}

/// Per `s ∈ F`, the points `v` with `φ(σ_s v)_e ≠ φ(v)_{s⁻¹}`.
pub fn pseudoorbit_disagreements(phi: &FiniteMap, f: &[Word], level: &SoficLevel) -> Result<Vec<Vec<bool>>> {
    let FiniteMap::Configs { window, values } = phi else {
        return Err(Error::InvalidParameter("pseudoorbits take configuration values".into()));
    };
    if values.len() != level.size {
        return Err(Error::SizeMismatch(format!("map on {} points, level has {}", values.len(), level.size)));
    }
    let g = &level.group;
    let e = FiniteMap::slot(window, &Word::identity()).ok_or_else(|| Error::ProbeWindowMissing("e".into()))?;
    f.iter()
        .map(|s| {
            let si = g.inverse(s);
            let j = FiniteMap::slot(window, &si).ok_or_else(|| Error::ProbeWindowMissing(g.format_word(&si)))?;
            (0..level.size).map(|v| Ok(values[level.apply(s, v)?][e] != values[v][j])).collect()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PseudoorbitCheck {
    pub defects: Vec<f64>,
    pub accepted: bool,
}

/// Whether `d₂(φσ_s, α_sφ) ≤ δ` for all `s ∈ F`.
pub fn is_pseudoorbit(phi: &FiniteMap, f: &[Word], delta: f64, level: &SoficLevel) -> Result<PseudoorbitCheck> {
    let bad = pseudoorbit_disagreements(phi, f, level)?;
    let defects: Vec<f64> = bad
        .iter()
        .map(|row| (row.iter().filter(|&&b| b).count() as f64 / level.size.max(1) as f64).sqrt())
        .collect();
    let accepted = defects.iter().all(|&d| d <= delta);
    Ok(PseudoorbitCheck { defects, accepted })
}

/// Values of `Π_v(φ)(g) = φ(σ(g)⁻¹v)` for `g` in `f`, in order.
pub fn pullback_values(phi: &[u8], v: usize, level: &SoficLevel, f: &[Word]) -> Result<Vec<u8>> {
    f.iter().map(|g| Ok(phi[level.apply_inverse(g, v)?])).collect()
}

pub fn pullback(phi: &[u8], v: usize, level: &SoficLevel, f: &[Word]) -> Result<Pattern> {
    let vals = pullback_values(phi, v, level, f)?;
    Ok(f.iter().cloned().zip(vals).collect())
}

/// Whether at least a `1 − δ` fraction of pullbacks land in `U`; returns the good fraction.
pub fn is_microstate(phi: &[u8], delta: f64, u: &PatternSet, level: &SoficLevel) -> Result<(bool, f64)> {
    let mut good = 0usize;
    for v in 0..level.size {
        if u.contains(&pullback_values(phi, v, level, &u.window)?) {
            good += 1;
        }
    }
    let bad = level.size - good;
    Ok((bad <= allowed_bad(delta, level.size), good as f64 / level.size.max(1) as f64))
}

/// `⌊δ·n⌋` with a small tolerance so that decimal `δ` like `0.1` behave as written.
fn allowed_bad(delta: f64, n: usize) -> usize {
    if delta >= 1.0 {
        n
    } else {
        (delta * n as f64 + 1e-9).floor().max(0.0) as usize
    }
}

/// Brute-force microstate enumeration with precomputed pullback tables.
pub struct MicrostateCounter {
    n: usize,
    k: usize,
    table: Vec<Vec<usize>>,
    accept: Vec<bool>,
    allowed_bad: usize,
}

impl MicrostateCounter {
    pub fn new(level: &SoficLevel, k: usize, delta: f64, u: &PatternSet, max_bits: f64) -> Result<Self> {
        let n = level.size;
        let bits = n as f64 * (k as f64).log2();
        if bits > max_bits {
            return Err(Error::TooLarge(format!("{k}^{n} maps exceed the 2^{max_bits} enumeration budget")));
        }
        let w = u.window.len();
        let codes = k.checked_pow(w as u32).filter(|&c| c <= 1 << 24).ok_or_else(|| {
            Error::TooLarge(format!("pattern space {k}^{w} too large for a lookup table"))
        })?;
        let mut accept = vec![false; codes];
        for p in &u.patterns {
            if p.len() == w && p.iter().all(|&x| (x as usize) < k) {
                let code = p.iter().rev().fold(0usize, |acc, &x| acc * k + x as usize);
                accept[code] = true;
            }
        }
        let table = (0..n)
            .map(|v| u.window.iter().map(|g| level.apply_inverse(g, v)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(MicrostateCounter { n, k, table, accept, allowed_bad: allowed_bad(delta, n) })
    }

    pub fn is_microstate(&self, phi: &[u8]) -> bool {
        let mut bad = 0;
        for row in &self.table {
            let code = row.iter().rev().fold(0usize, |acc, &x| acc * self.k + phi[x] as usize);
            if !self.accept[code] {
                bad += 1;
                if bad > self.allowed_bad {
                    return false;
                }
            }
        }
        true
    }

    /// Total number of maps `k^n`.
    pub fn total(&self) -> u128 {
        (self.k as u128).pow(self.n as u32)
    }

    /// Exact count; blocks fixed by the leading coordinates run in parallel.
    pub fn count(&self) -> u64 {
        let prefix = self.n.min(4);
        let blocks = self.k.pow(prefix as u32);
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut phi = vec![0u8; self.n];
                let mut x = b;
                for i in (0..prefix).rev() {
                    phi[i] = (x % self.k) as u8;
                    x /= self.k;
                }
                let mut count = 0u64;
                loop {
                    if self.is_microstate(&phi) {
                        count += 1;
                    }
                    if !advance(&mut phi[prefix..], self.k) {
                        break;
                    }
                }
                count
            })
            .sum()
    }

    /// All microstates in lexicographic order (small instances).
    pub fn list(&self) -> Vec<Vec<u8>> {
        let mut phi = vec![0u8; self.n];
        let mut out = Vec::new();
        loop {
            if self.is_microstate(&phi) {
                out.push(phi.clone());
            }
            if !advance(&mut phi, self.k) {
                break;
            }
        }
        out
    }
}

/// Lexicographic successor, last coordinate fastest.
fn advance(digits: &mut [u8], k: usize) -> bool {
    for d in digits.iter_mut().rev() {
        if (*d as usize) + 1 < k {
            *d += 1;
            return true;
        }
        *d = 0;
    }
    false
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparatedSet {
    pub count: usize,
    pub members: Vec<usize>,
    /// False when the greedy fallback produced only a lower bound.
    pub exact: bool,
}

/// Maximum `ε`-separated subfamily (pairwise distance `> ε`).
pub fn count_separated(maps: &[FiniteMap], eps: f64, mode: Mode, exact_threshold: usize) -> Result<SeparatedSet> {
    if eps <= 0.0 {
        return Err(Error::InvalidParameter("ε must be positive".into()));
    }
    let n = maps.len();
    let mut far = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = dists(&maps[i], &maps[j], mode)?;
            far[i][j] = d > eps;
            far[j][i] = far[i][j];
        }
    }
    if n <= exact_threshold.min(64) {
        let adj: Vec<u64> =
            (0..n).map(|i| (0..n).filter(|&j| far[i][j]).fold(0u64, |m, j| m | (1u64 << j))).collect();
        let mut best = 0u64;
        let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        max_clique(&adj, 0, all, &mut best);
        let members: Vec<usize> = (0..n).filter(|&i| best >> i & 1 == 1).collect();
        Ok(SeparatedSet { count: members.len(), members, exact: true })
    } else {
        let mut members: Vec<usize> = Vec::new();
        for i in 0..n {
            if members.iter().all(|&j| far[i][j]) {
                members.push(i);
            }
        }
        Ok(SeparatedSet { count: members.len(), members, exact: false })
    }
}

fn max_clique(adj: &[u64], current: u64, mut cand: u64, best: &mut u64) {
    if cand == 0 {
        if current.count_ones() > best.count_ones() || (*best == 0 && current != 0) {
            *best = current;
        }
        return;
    }
    while cand != 0 {
        if current.count_ones() + cand.count_ones() <= best.count_ones() {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        cand &= !(1u64 << v);
        max_clique(adj, current | (1u64 << v), cand & adj[v], best);
    }
}

/// `Ψ(φ)(v) = φ(v)_e`.
pub fn psi_readout(phi: &FiniteMap) -> Result<Vec<u8>> {
    phi.identity_values()
}

/// A source of configurations able to complete finite patterns.
pub trait Completion {
    /// Values on `window` of the least configuration matching `constraints`.
    fn complete(&self, constraints: &[(Word, u8)], window: &[Word]) -> Option<Vec<u8>>;
}

/// `Φ(ψ)(v)`: the least configuration extending `Π_v(ψ)|_{F'}`, else one with
/// `x_e = ψ(v)`, else any configuration; values on `window`.
pub fn phi_completion(
    psi: &[u8],
    source: &dyn Completion,
    level: &SoficLevel,
    f_prime: &[Word],
    window: &[Word],
) -> Result<FiniteMap> {
    let mut values = Vec::with_capacity(level.size);
    for v in 0..level.size {
        let pat = pullback_values(psi, v, level, f_prime)?;
        let cons: Vec<(Word, u8)> = f_prime.iter().cloned().zip(pat).collect();
        let x = source
            .complete(&cons, window)
            .or_else(|| source.complete(&[(Word::identity(), psi[v])], window))
            .or_else(|| source.complete(&[], window))
            .ok_or(Error::EmptySource)?;
        values.push(x);
    }
    Ok(FiniteMap::Configs { window: window.to_vec(), values })
}

/// The orbit closure of periodic points: colorings of a finite quotient
/// `G/H` closed under left translation. `x_g = c(coset(g))`.
#[derive(Debug, Clone)]
pub struct FiniteSubshift {
    pub group: GroupPresentation,
    pub quotient: ChainLevel,
    pub k: usize,
    /// Distinct colorings in lexicographic order.
    pub configs: Vec<Vec<u8>>,
}

impl FiniteSubshift {
    pub fn from_seeds(group: GroupPresentation, quotient: ChainLevel, k: usize, seeds: &[Vec<u8>]) -> Result<Self> {
        let n = quotient.size;
        let mut set: HashSet<Vec<u8>> = HashSet::new();
        let lefts: Vec<Vec<usize>> = (0..n)
            .map(|t| quotient.left_mult(t).ok_or_else(|| Error::InvalidParameter("quotient kernel is not normal".into())))
            .collect::<Result<_>>()?;
        for seed in seeds {
            if seed.len() != n || seed.iter().any(|&x| x as usize >= k) {
                return Err(Error::InvalidParameter("seed must color every coset with a letter".into()));
            }
            for l in &lefts {
                set.insert(l.iter().map(|&q| seed[q]).collect());
            }
        }
        let mut configs: Vec<Vec<u8>> = set.into_iter().collect();
        configs.sort();
        Ok(FiniteSubshift { group, quotient, k, configs })
    }

    pub fn value(&self, config: usize, w: &Word) -> u8 {
        self.configs[config][self.quotient.coset(w)]
    }

    /// `B_F(X)`.
    pub fn pattern_set(&self, window: &[Word]) -> PatternSet {
        let cosets: Vec<usize> = window.iter().map(|w| self.quotient.coset(w)).collect();
        let patterns = self.configs.iter().map(|c| cosets.iter().map(|&q| c[q]).collect()).collect();
        PatternSet { window: window.to_vec(), patterns }
    }

    /// The orbit map `v ↦ (σ-translate of x)` on a coset level of the same
    /// quotient: `φ(v) = g_v⁻¹ x` where `v = coset(g_v)`, on the probe window.
    pub fn orbit_map(&self, config: usize, level: &ChainLevel, reps: &[Word], window: &[Word]) -> FiniteMap {
        let values = (0..level.size)
            .map(|v| {
                let g = &reps[v];
                window.iter().map(|h| self.value(config, &self.group.mul(g, h))).collect()
            })
            .collect();
        FiniteMap::Configs { window: window.to_vec(), values }
    }

    /// All maps `V → X` with zero pseudoorbit defect for `F`, by backtracking.
    /// Fails with `TooLarge` beyond `limit` solutions.
    pub fn zero_defect_pseudoorbits(
        &self,
        level: &SoficLevel,
        f: &[Word],
        window: &[Word],
        limit: usize,
    ) -> Result<Vec<FiniteMap>> {
        let g = &self.group;
        let e = window.iter().position(|w| w.is_identity()).ok_or_else(|| Error::ProbeWindowMissing("e".into()))?;
        let mut slots = Vec::with_capacity(f.len());
        for s in f {
            let si = g.inverse(s);
            slots.push(window.iter().position(|w| *w == si).ok_or_else(|| Error::ProbeWindowMissing(g.format_word(&si)))?);
        }
        let values: Vec<Vec<u8>> =
            (0..self.configs.len()).map(|c| window.iter().map(|h| self.value(c, h)).collect()).collect();
        let n = level.size;
        // Constraint (v, s): values[φ(σ_s v)][e] == values[φ(v)][slot_s].
        let edges: Vec<Vec<usize>> =
            f.iter().map(|s| (0..n).map(|v| level.apply(s, v)).collect::<Result<Vec<_>>>()).collect::<Result<_>>()?;
        let mut assign = vec![usize::MAX; n];
        let mut out = Vec::new();
        #[allow(clippy::too_many_arguments)]
        fn rec(
            v: usize,
            assign: &mut [usize],
            values: &[Vec<u8>],
            edges: &[Vec<usize>],
            slots: &[usize],
            e: usize,
            out: &mut Vec<Vec<usize>>,
            limit: usize,
        ) -> bool {
            let n = assign.len();
            if v == n {
                out.push(assign.to_vec());
                return out.len() <= limit;
            }
            'cand: for c in 0..values.len() {
                assign[v] = c;
                for (si, edge) in edges.iter().enumerate() {
                    for u in 0..n {
                        let w = edge[u];
                        if assign[u] != usize::MAX
                            && assign[w] != usize::MAX
                            && (u == v || w == v)
                            && values[assign[w]][e] != values[assign[u]][slots[si]]
                        {
                            continue 'cand;
                        }
                    }
                }
                if !rec(v + 1, assign, values, edges, slots, e, out, limit) {
                    assign[v] = usize::MAX;
                    return false;
                }
            }
            assign[v] = usize::MAX;
            true
        }
        let mut raw = Vec::new();
        if !rec(0, &mut assign, &values, &edges, &slots, e, &mut raw, limit) {
            return Err(Error::TooLarge(format!("more than {limit} zero-defect pseudoorbits")));
        }
        for a in raw {
            out.push(FiniteMap::Configs { window: window.to_vec(), values: a.iter().map(|&c| values[c].clone()).collect() });
        }
        Ok(out)
    }
}

impl Completion for FiniteSubshift {
    fn complete(&self, constraints: &[(Word, u8)], window: &[Word]) -> Option<Vec<u8>> {
        let cons: Vec<(usize, u8)> = constraints.iter().map(|(w, x)| (self.quotient.coset(w), *x)).collect();
        let c = self.configs.iter().find(|c| cons.iter().all(|&(q, x)| c[q] == x))?;
        Some(window.iter().map(|h| c[self.quotient.coset(h)]).collect())
    }
}

/// Distinct `Ψ` images of a family, for injectivity checks.
pub fn psi_images(maps: &[FiniteMap]) -> Result<HashMap<Vec<u8>, usize>> {
    let mut out = HashMap::new();
    for m in maps {
        *out.entry(psi_readout(m)?).or_insert(0) += 1;
    }
    Ok(out)
}
