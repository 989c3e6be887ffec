use crate::error::{Error, Result};
use crate::group::{ChainLevel, FundamentalDomain, GroupPresentation, QuotientChain, Word};
use crate::shift::{pseudoorbit_disagreements, FiniteMap, MicrostateCounter, PatternSet, HOLE};
use crate::sofic::SoficLevel;
use crate::toeplitz::{Kappa, ToeplitzTower};
use num_bigint::BigUint;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::HashSet;
use std::fmt::Write as _;

/// Natural log of a big integer.
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// A configuration readable at group elements, `None` where undetermined.
pub trait PatternSource {
    fn k(&self) -> usize;
    fn value(&self, g: &Word) -> Option<u8>;
}

/// A tower read at one of its levels.
pub struct TowerView<'a> {
    pub tower: &'a ToeplitzTower,
    pub chain: &'a QuotientChain,
    /// 0-based chain level present in the tower.
    pub level: usize,
}

impl PatternSource for TowerView<'_> {
    fn k(&self) -> usize {
        self.tower.k
    }

    fn value(&self, g: &Word) -> Option<u8> {
        let l = self.tower.level(self.level)?;
        let c = l.colors[self.chain.levels[self.level].coset(g)];
        (c != HOLE).then_some(c)
    }
}

/// `x_g = colors[coset(g)]` for a fully colored finite quotient.
pub struct PeriodicPoint {
    pub quotient: ChainLevel,
    pub k: usize,
    pub colors: Vec<u8>,
}

impl PatternSource for PeriodicPoint {
    fn k(&self) -> usize {
        self.k
    }

    fn value(&self, g: &Word) -> Option<u8> {
        let c = self.colors[self.quotient.coset(g)];
        (c != HOLE).then_some(c)
    }
}

#[derive(Debug, Clone)]
pub struct WordCount {
    /// Distinct patterns, holes kept as a symbol.
    pub distinct: usize,
    /// Distinct hole-free patterns.
    pub resolved: usize,
    /// `Σ k^h` over distinct patterns with `h` holes.
    pub hole_expanded: BigUint,
    pub patterns: PatternSet,
}

/// Distinct patterns `(x_{gf})_{f∈F}` over the probe shifts `g`.
pub fn word_count(
    group: &GroupPresentation,
    src: &dyn PatternSource,
    window: &[Word],
    probes: &[Word],
) -> WordCount {
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    for g in probes {
        seen.insert(window.iter().map(|f| src.value(&group.mul(g, f)).unwrap_or(HOLE)).collect());
    }
    let k = BigUint::from(src.k());
    let mut hole_expanded = BigUint::zero();
    let mut patterns = PatternSet::new(window.to_vec());
    for p in &seen {
        let h = p.iter().filter(|&&x| x == HOLE).count();
        hole_expanded += k.pow(h as u32);
        if h == 0 {
            patterns.patterns.insert(p.clone());
        }
    }
    WordCount { distinct: seen.len(), resolved: patterns.len(), hole_expanded, patterns }
}

/// `(#holes / [G:H_n]) · ln k` as the exact coefficient of `ln k` and its value.
pub fn product_bound(tower: &ToeplitzTower, level: usize) -> Result<(Ratio<u64>, f64)> {
    let l = tower.level(level).ok_or(Error::LevelAbsent { level: level + 1 })?;
    let coeff = Ratio::new(l.holes() as u64, l.index as u64);
    Ok((coeff, coeff.to_f64().unwrap() * (tower.k as f64).ln()))
}

/// Number of left translations of `G/H_n` preserving the level's skeleton.
/// The distinct translates of the skeleton number `[G:H_n] / |Per|`.
pub fn skeleton_period(chain: &QuotientChain, dom: &FundamentalDomain, colors: &[u8]) -> usize {
    let lvl = &chain.levels[dom.level];
    let (order, parent) = lvl.bfs_tree();
    // Steps to replay the spanning tree: (point, parent, generator, forward).
    let steps: Vec<(usize, usize, usize, bool)> = order[1..]
        .iter()
        .map(|&x| {
            let (p, s) = parent[x].unwrap();
            (x, p, s, lvl.gens[s].apply(p) == x)
        })
        .collect();
    let mut class_size = std::collections::HashMap::<u8, usize>::new();
    for &c in colors {
        *class_size.entry(c).or_default() += 1;
    }
    let c0 = (0..lvl.size).min_by_key(|&c| (class_size[&colors[c]], c)).unwrap();
    let r0 = dom.rep(c0);
    let mut image = vec![0usize; lvl.size];
    (0..lvl.size)
        .filter(|&c1| colors[c1] == colors[c0])
        .filter(|&c1| {
            let t = lvl.apply_word_inverse(c1, r0);
            image[lvl.id] = t;
            if colors[t] != colors[lvl.id] {
                return false;
            }
            for &(x, p, s, fwd) in &steps {
                let y = if fwd { lvl.gens[s].apply(image[p]) } else { lvl.gens[s].pow_apply(image[p], -1) };
                if colors[y] != colors[x] {
                    return false;
                }
                image[x] = y;
            }
            true
        })
        .count()
}

#[derive(Debug, Clone)]
pub struct LowerBoundFamily {
    /// 0-based level `β` of the stage.
    pub level: usize,
    pub f: Vec<Word>,
    pub window: Vec<Word>,
    pub maps: Vec<FiniteMap>,
    /// Per `s ∈ F`, the number of points with `φ(σ_s v)_e ≠ φ(v)_{s⁻¹}`, summed over the family.
    pub disagreements: Vec<usize>,
    /// Pairwise `d∞ = 1`, i.e. identity coordinates pairwise distinct.
    pub separated: bool,
    pub count: BigUint,
}

impl LowerBoundFamily {
    pub fn verified(&self) -> bool {
        self.separated && self.disagreements.iter().all(|&d| d == 0)
    }
}

/// The `k^A` maps `φ_γ(v)_h = x_{w_γ g_v h}` for the stage starting at `level`,
/// with `g_v` the fundamental-domain representative of `v`.
pub fn lower_bound_family(
    tower: &ToeplitzTower,
    chain: &QuotientChain,
    domains: &[FundamentalDomain],
    level: usize,
    f: Option<Vec<Word>>,
) -> Result<LowerBoundFamily> {
    let stage = tower
        .log
        .stages
        .iter()
        .find(|s| s.beta == level)
        .ok_or_else(|| Error::InvalidParameter(format!("no marker stage starts at level {}", level + 1)))?;
    let group = &chain.group;
    let dom = &domains[level];
    let in_dom: HashSet<&Word> = dom.words.iter().collect();
    let allowed = |w: &Word| in_dom.contains(w) || in_dom.contains(&group.inverse(w));
    let f = match f {
        Some(f) => {
            if let Some(bad) = f.iter().find(|w| !allowed(w)) {
                return Err(Error::InvalidParameter(format!(
                    "{} is not in the level-{} domain or its inverse",
                    group.format_word(bad),
                    level + 1
                )));
            }
            f
        }
        None => std::iter::once(Word::identity()).chain(group.letters().into_iter().filter(|w| allowed(w))).collect(),
    };
    let mut window = vec![Word::identity()];
    for s in &f {
        let si = group.inverse(s);
        if !window.contains(&si) {
            window.push(si);
        }
    }
    let sofic = SoficLevel::from_chain_level(group, &chain.levels[level]);
    let mut maps = Vec::with_capacity(stage.markers.len());
    for (_, w) in &stage.markers {
        let mut values = Vec::with_capacity(sofic.size);
        for v in 0..sofic.size {
            let base = group.mul(w, dom.rep(v));
            let row = window
                .iter()
                .map(|h| {
                    tower.eval(chain, &group.mul(&base, h)).ok_or_else(|| {
                        Error::Infeasible(format!("probe window reaches beyond the built depth at level {}", level + 1))
                    })
                })
                .collect::<Result<Vec<u8>>>()?;
            values.push(row);
        }
        maps.push(FiniteMap::Configs { window: window.clone(), values });
    }
    let mut disagreements = vec![0usize; f.len()];
    for m in &maps {
        for (i, row) in pseudoorbit_disagreements(m, &f, &sofic)?.iter().enumerate() {
            disagreements[i] += row.iter().filter(|&&b| b).count();
        }
    }
    let ids: HashSet<Vec<u8>> =
        maps.iter().map(|m| (0..m.len()).map(|v| m.at_identity(v)).collect::<Result<Vec<u8>>>()).collect::<Result<_>>()?;
    let separated = ids.len() == maps.len();
    let count = BigUint::from(maps.len());
    Ok(LowerBoundFamily { level, f, window, maps, disagreements, separated, count })
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelRow {
    /// 1-based chain level.
    pub level: usize,
    pub index: usize,
    pub holes: usize,
    pub scheduled: usize,
    /// Distinct translates of the skeleton on `F_n`.
    pub translates: usize,
    /// `translates · k^holes`.
    pub hole_expanded: String,
    /// `ln(hole_expanded) / [G:H_n]`.
    pub word_entropy: f64,
    pub product_bound: f64,
    pub hole_density_bound: f64,
    pub lower_count: Option<String>,
    pub lower_log: Option<f64>,
    pub lower_verified: Option<bool>,
    /// `(a−1)/idx ≤ κ < a/idx` for the recounted hole count.
    pub bracket: bool,
    #[serde(skip)]
    hole_expanded_big: BigUint,
    #[serde(skip)]
    lower_big: Option<BigUint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyReport {
    pub k: usize,
    pub kappa: String,
    pub unit: &'static str,
    pub rows: Vec<LevelRow>,
}

pub const CSV_HEADER: &str = "level,index,holes,scheduled,translates,hole_expanded,word_entropy,product_bound,hole_density_bound,lower_count,lower_log,lower_verified,bracket";

fn fmt_f64(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

impl EntropyReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.level,
                r.index,
                r.holes,
                r.scheduled,
                r.translates,
                r.hole_expanded,
                fmt_f64(r.word_entropy),
                fmt_f64(r.product_bound),
                fmt_f64(r.hole_density_bound),
                r.lower_count.as_deref().unwrap_or(""),
                r.lower_log.map(fmt_f64).unwrap_or_default(),
                r.lower_verified.map(|b| b.to_string()).unwrap_or_default(),
                r.bracket
            );
        }
        out
    }
}

/// Per tower level: recounted holes, product bound, hole-expanded word
/// surrogate on `F_n`, and at marker levels the verified lower-bound family.
pub fn entropy_report(
    tower: &ToeplitzTower,
    chain: &QuotientChain,
    domains: &[FundamentalDomain],
) -> Result<EntropyReport> {
    let issues = tower.check(chain);
    if let Some(i) = issues.iter().find(|i| i.reason.contains("index") || i.reason.contains("chain has only")) {
        return Err(Error::SizeMismatch(format!("tower does not match the chain at level {}: {}", i.level, i.reason)));
    }
    let lnk = (tower.k as f64).ln();
    let kb = BigUint::from(tower.k);
    let mut rows = Vec::with_capacity(tower.levels.len());
    for l in &tower.levels {
        let holes = l.holes();
        let period = skeleton_period(chain, &domains[l.level], &l.colors);
        let translates = l.index / period;
        let hole_expanded_big = BigUint::from(translates) * kb.pow(holes as u32);
        let word_entropy = ln_big(&hole_expanded_big) / l.index as f64;
        let (_, product) = product_bound(tower, l.level)?;
        let hole_density = holes as f64 / l.index as f64 * lnk;
        let (lower_big, lower_verified) = if tower.log.stages.iter().any(|s| s.beta == l.level) {
            let fam = lower_bound_family(tower, chain, domains, l.level, None)?;
            (Some(fam.count.clone()), Some(fam.verified()))
        } else {
            (None, None)
        };
        rows.push(LevelRow {
            level: l.level + 1,
            index: l.index,
            holes,
            scheduled: l.holes_scheduled,
            translates,
            hole_expanded: hole_expanded_big.to_string(),
            word_entropy,
            product_bound: product,
            hole_density_bound: hole_density,
            lower_count: lower_big.as_ref().map(|c| c.to_string()),
            lower_log: lower_big.as_ref().map(|c| ln_big(c) / l.index as f64),
            lower_verified,
            bracket: tower.kappa.in_bracket(holes, l.index),
            hole_expanded_big,
            lower_big,
        });
    }
    Ok(EntropyReport { k: tower.k, kappa: tower.kappa.to_string(), unit: "nats", rows })
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct BoundCheck {
    pub level: usize,
    /// `lower ≤ surrogate`; `None` where no lower bound is computed.
    pub lower_le_surrogate: Option<bool>,
    /// `surrogate ≤ product + ln|F_n|/|F_n|`.
    pub surrogate_le_product: bool,
    /// Hole density not above the previous level's.
    pub monotone: bool,
    /// `lower = product` exactly, with the family verified.
    pub lower_eq_product: Option<bool>,
    pub holes_match: bool,
}

impl BoundCheck {
    pub fn passes(&self) -> bool {
        self.lower_le_surrogate != Some(false)
            && self.surrogate_le_product
            && self.monotone
            && self.lower_eq_product != Some(false)
            && self.holes_match
    }
}

/// Exact comparisons: every quantity is `ln` of an integer over the same index.
pub fn bound_chain_check(report: &EntropyReport) -> Vec<BoundCheck> {
    let kb = BigUint::from(report.k);
    let mut out = Vec::with_capacity(report.rows.len());
    for (i, r) in report.rows.iter().enumerate() {
        let product_count = kb.pow(r.holes as u32);
        let lower_le_surrogate = r.lower_big.as_ref().map(|c| *c <= r.hole_expanded_big);
        let surrogate_le_product = r.hole_expanded_big <= BigUint::from(r.index) * &product_count;
        let monotone = i == 0 || {
            let p = &report.rows[i - 1];
            (r.holes as u128) * (p.index as u128) <= (p.holes as u128) * (r.index as u128)
        };
        let lower_eq_product = r.lower_big.as_ref().map(|c| *c == product_count && r.lower_verified == Some(true));
        out.push(BoundCheck {
            level: r.level,
            lower_le_surrogate,
            surrogate_le_product,
            monotone,
            lower_eq_product,
            holes_match: r.holes == r.scheduled && r.bracket,
        });
    }
    out
}

/// Exact hole-density monotonicity along a sequence of `(holes, index)`.
pub fn densities_nonincreasing(levels: &[(usize, usize)]) -> bool {
    levels.windows(2).all(|w| (w[1].0 as u128) * (w[0].1 as u128) <= (w[0].0 as u128) * (w[1].1 as u128))
}

#[derive(Debug, Clone, Serialize)]
pub struct StirlingCheck {
    pub n: u64,
    pub factorial: String,
    pub ln_lower: f64,
    pub ln_factorial: f64,
    pub ln_upper: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// Rational `L ≤ e ≤ U` from `Σ_{i≤M} 1/i!` with tail below `1/(M!·M)`.
fn e_bounds() -> ((BigUint, BigUint), (BigUint, BigUint)) {
    const M: u64 = 40;
    let mut fact = BigUint::one();
    for i in 1..=M {
        fact *= i;
    }
    let mut num = BigUint::zero();
    let mut term = fact.clone();
    for i in 0..=M {
        if i > 0 {
            term /= i;
        }
        num += &term;
    }
    let lower = (num.clone(), fact.clone());
    let upper = (num * M + 1u32, fact * M);
    (lower, upper)
}

/// Checks `e(n/e)ⁿ ≤ n! ≤ e·n·(n/e)ⁿ` exactly using rational bounds on `e`.
pub fn stirling_bounds(n: u64) -> Result<StirlingCheck> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let ((lp, lq), (up, uq)) = e_bounds();
    let mut fact = BigUint::one();
    for i in 2..=n {
        fact *= i;
    }
    let nb = BigUint::from(n);
    let e = (n - 1) as u32;
    let nn = nb.pow(n as u32);
    // n!·L^{n−1} ≥ nⁿ implies n!·e^{n−1} ≥ nⁿ.
    let lower_holds = &fact * lp.pow(e) >= &nn * lq.pow(e);
    // n!·U^{n−1} ≤ n^{n+1} implies n!·e^{n−1} ≤ n^{n+1}.
    let upper_holds = &fact * up.pow(e) <= &nn * &nb * uq.pow(e);
    let ln_n = (n as f64).ln();
    Ok(StirlingCheck {
        n,
        ln_lower: 1.0 + n as f64 * (ln_n - 1.0),
        ln_factorial: ln_big(&fact),
        ln_upper: 1.0 + ln_n + n as f64 * (ln_n - 1.0),
        factorial: fact.to_string(),
        lower_holds,
        upper_holds,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BinomRate {
    pub n: u64,
    pub m: u64,
    pub beta: f64,
    pub binomial: String,
    pub holds: bool,
}

pub fn binomial(n: u64, m: u64) -> BigUint {
    let m = m.min(n - m.min(n));
    let mut c = BigUint::one();
    for i in 0..m {
        c = c * (n - i) / (i + 1);
    }
    c
}

/// `β = H(δ) + ln(n+1)/n` (nats) with `C(n, ⌈(1−δ)n⌉) ≤ e^{βn}` checked exactly.
pub fn binom_rate(delta: f64, n: u64) -> Result<BinomRate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta} outside (0, 1)")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let h = -delta * delta.ln() - (1.0 - delta) * (1.0 - delta).ln();
    let beta = h + ((n + 1) as f64).ln() / n as f64;
    let m = (((1.0 - delta) * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as u64;
    let c = binomial(n, m);
    let holds = ln_big(&c) <= beta * n as f64;
    Ok(BinomRate { n, m, beta, binomial: c.to_string(), holds })
}

#[derive(Debug, Clone, Serialize)]
pub struct MicrostateLog {
    pub points: usize,
    pub count: u64,
    pub total: String,
    /// `ln|Ω| / |V|` in nats; `-inf` when `Ω` is empty.
    pub log_per_point: f64,
}

/// Exact microstate count at one level.
pub fn microstate_log(level: &SoficLevel, k: usize, delta: f64, u: &PatternSet, max_bits: f64) -> Result<MicrostateLog> {
    let counter = MicrostateCounter::new(level, k, delta, u, max_bits)?;
    let count = counter.count();
    let log_per_point = if count == 0 { f64::NEG_INFINITY } else { (count as f64).ln() / level.size as f64 };
    Ok(MicrostateLog { points: level.size, count, total: counter.total().to_string(), log_per_point })
}

/// The `κ`-bracket `[(a−1)/idx, a/idx)` as exact fractions.
pub fn bracket_of(kappa: &Kappa, index: usize) -> (usize, usize, usize) {
    let a = kappa.bracket(index);
    (a - 1, a, index)
}
