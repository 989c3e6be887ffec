//! Finite sofic levels `σ: G → Sym(V)`, their quality metrics,
//! amplification, orbit decomposition and `(F,δ)`-isomorphisms.

use crate::error::{Error, Result};
use crate::group::{GroupKind, GroupPresentation, QuotientChain, Word};
use crate::perm::Perm;
use serde::Serialize;
use std::collections::{BTreeMap, HashMap, VecDeque};

#[derive(Debug, Clone)]
enum SoficMap {
    /// Images of the generators; words are evaluated syllable-wise.
    Homomorphic(Vec<Perm>),
    /// Explicit `(σ(w), σ(w)⁻¹)` over a declared word support.
    Table(BTreeMap<Word, (Perm, Perm)>),
}

/// One level `σ: G → Sym(V)` with `V = 0..size`.
#[derive(Debug, Clone)]
pub struct SoficLevel {
    pub group: GroupPresentation,
    pub size: usize,
    map: SoficMap,
}

impl SoficLevel {
    pub fn homomorphic(group: GroupPresentation, gens: Vec<Perm>) -> Result<Self> {
        if gens.len() != group.rank() {
            return Err(Error::SizeMismatch(format!("{} images for rank {}", gens.len(), group.rank())));
        }
        let size = gens[0].len();
        if gens.iter().any(|p| p.len() != size) {
            return Err(Error::SizeMismatch("generator images of different sizes".into()));
        }
        Ok(SoficLevel { group, size, map: SoficMap::Homomorphic(gens) })
    }

    /// A level given only on the listed words. Evaluation elsewhere is an error.
    pub fn from_table(group: GroupPresentation, size: usize, entries: Vec<(Word, Perm)>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for (w, p) in entries {
            if p.len() != size {
                return Err(Error::SizeMismatch(format!("table entry of size {} for |V| = {size}", p.len())));
            }
            let inv = p.inverse();
            table.insert(w, (p, inv));
        }
        Ok(SoficLevel { group, size, map: SoficMap::Table(table) })
    }

    /// `σ(g)(c) = c·g⁻¹` on the points of a chain level.
    pub fn from_chain_level(group: &GroupPresentation, level: &crate::group::ChainLevel) -> Self {
        let gens = level.gens.iter().map(Perm::inverse).collect();
        SoficLevel { group: group.clone(), size: level.size, map: SoficMap::Homomorphic(gens) }
    }

    pub fn is_homomorphism(&self) -> bool {
        matches!(self.map, SoficMap::Homomorphic(_))
    }

    /// Generator images of a homomorphic level.
    pub fn generators(&self) -> Option<&[Perm]> {
        match &self.map {
            SoficMap::Homomorphic(g) => Some(g),
            SoficMap::Table(_) => None,
        }
    }

    /// Declared support of a table level.
    pub fn support(&self) -> Option<Vec<Word>> {
        match &self.map {
            SoficMap::Homomorphic(_) => None,
            SoficMap::Table(t) => Some(t.keys().cloned().collect()),
        }
    }

    fn undefined(&self, w: &Word) -> Error {
        Error::UndefinedOnWord(self.group.format_word(w))
    }

    /// `σ(w)v`.
    pub fn apply(&self, w: &Word, v: usize) -> Result<usize> {
        match &self.map {
            SoficMap::Homomorphic(g) => {
                Ok(w.syllables().iter().rev().fold(v, |x, &(s, e)| g[s as usize].pow_apply(x, e)))
            }
            SoficMap::Table(t) => t.get(w).map(|p| p.0.apply(v)).ok_or_else(|| self.undefined(w)),
        }
    }

    /// `σ(w)⁻¹v`.
    pub fn apply_inverse(&self, w: &Word, v: usize) -> Result<usize> {
        match &self.map {
            SoficMap::Homomorphic(g) => Ok(w.syllables().iter().fold(v, |x, &(s, e)| g[s as usize].pow_apply(x, -e))),
            SoficMap::Table(t) => t.get(w).map(|p| p.1.apply(v)).ok_or_else(|| self.undefined(w)),
        }
    }

    pub fn sigma(&self, w: &Word) -> Result<Perm> {
        match &self.map {
            SoficMap::Homomorphic(_) => {
                let images = (0..self.size).map(|v| self.apply(w, v).map(|x| x as u32)).collect::<Result<Vec<_>>>()?;
                Ok(Perm::from_images(images).expect("composition of permutations"))
            }
            SoficMap::Table(t) => t.get(w).map(|p| p.0.clone()).ok_or_else(|| self.undefined(w)),
        }
    }

    /// Copies of the point set with the copy index preserved:
    /// point `(i, v)` is `i·|V| + v` and `σ̃(g)(i, v) = (i, σ(g)v)`.
    pub fn amplify(&self, copies: usize) -> Result<SoficLevel> {
        if copies == 0 {
            return Err(Error::InvalidParameter("copies must be positive".into()));
        }
        let n = self.size;
        let blow = |p: &Perm| {
            let images = (0..copies * n).map(|x| ((x / n) * n + p.apply(x % n)) as u32).collect();
            Perm::from_images(images).expect("block permutation")
        };
        let map = match &self.map {
            SoficMap::Homomorphic(g) => SoficMap::Homomorphic(g.iter().map(blow).collect()),
            SoficMap::Table(t) => {
                SoficMap::Table(t.iter().map(|(w, (p, _))| (w.clone(), (blow(p), blow(p).inverse()))).collect())
            }
        };
        Ok(SoficLevel { group: self.group.clone(), size: copies * n, map })
    }
}

/// A finite list of independent levels.
#[derive(Debug, Clone)]
pub struct SoficApprox {
    pub levels: Vec<SoficLevel>,
}

/// Natural action `σ_n(g)(cH_n) = cg⁻¹H_n` on the cosets of each chain level.
pub fn coset_sofic(chain: &QuotientChain) -> SoficApprox {
    SoficApprox { levels: chain.levels.iter().map(|l| SoficLevel::from_chain_level(&chain.group, l)).collect() }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairEntry {
    pub s: usize,
    pub t: usize,
    /// `|{v : σ(st)v = σ(s)σ(t)v}|`.
    pub multiplicative_points: usize,
    /// `|{v : σ(t)v ≠ σ(s)v}|`, only for `s ≠ t` as group elements.
    pub free_points: Option<usize>,
    pub size: usize,
}

impl PairEntry {
    pub fn multiplicativity(&self) -> f64 {
        self.multiplicative_points as f64 / self.size as f64
    }

    pub fn freeness(&self) -> Option<f64> {
        self.free_points.map(|x| x as f64 / self.size as f64)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SoficityReport {
    pub entries: Vec<PairEntry>,
}

/// Multiplicativity and freeness fractions for every `(s, t) ∈ F × F`.
pub fn soficity_report(level: &SoficLevel, f: &[Word]) -> Result<SoficityReport> {
    let g = &level.group;
    let mut entries = Vec::with_capacity(f.len() * f.len());
    for (i, s) in f.iter().enumerate() {
        for (j, t) in f.iter().enumerate() {
            let st = g.mul(s, t);
            let mut mult = 0;
            let mut free = 0;
            for v in 0..level.size {
                let tv = level.apply(t, v)?;
                if level.apply(&st, v)? == level.apply(s, tv)? {
                    mult += 1;
                }
                if tv != level.apply(s, v)? {
                    free += 1;
                }
            }
            entries.push(PairEntry {
                s: i,
                t: j,
                multiplicative_points: mult,
                free_points: if s != t { Some(free) } else { None },
                size: level.size,
            });
        }
    }
    Ok(SoficityReport { entries })
}

/// Orbits of a homomorphic level with transporting words.
#[derive(Debug, Clone)]
pub struct OrbitDecomposition {
    pub reps: Vec<usize>,
    pub orbit_of: Vec<usize>,
    pub orbits: Vec<Vec<usize>>,
    /// `words[u]` satisfies `σ(words[u]) v_i = u` for the orbit representative `v_i` of `u`.
    pub words: Vec<Word>,
}

impl OrbitDecomposition {
    pub fn copies(&self) -> usize {
        self.reps.len()
    }

    /// `[G : Stab(v_i)]`, the size of orbit `i`.
    pub fn stabilizer_index(&self, i: usize) -> usize {
        self.orbits[i].len()
    }

    pub fn in_stabilizer(&self, level: &SoficLevel, i: usize, w: &Word) -> bool {
        level.apply(w, self.reps[i]).map(|x| x == self.reps[i]).unwrap_or(false)
    }

    /// Kernel membership: trivial action on every point.
    pub fn in_kernel(&self, level: &SoficLevel, w: &Word) -> bool {
        (0..level.size).all(|v| level.apply(w, v).map(|x| x == v).unwrap_or(false))
    }

    /// Rebuilds `⨿ G/Stab(v_i)` with left multiplication decided only by
    /// stabilizer membership, and compares it with `σ` through
    /// `(i, r Stab) ↦ σ(r)v_i`, generator by generator.
    pub fn reassembly_holds(&self, level: &SoficLevel) -> bool {
        let g = &level.group;
        for (i, orbit) in self.orbits.iter().enumerate() {
            for s in 0..g.rank() {
                let gen = Word::power(s as u32, 1);
                for &u in orbit {
                    let sr = g.mul(&gen, &self.words[u]);
                    let target = orbit
                        .iter()
                        .copied()
                        .find(|&u2| self.in_stabilizer(level, i, &g.mul(&g.inverse(&self.words[u2]), &sr)));
                    let Some(u2) = target else { return false };
                    // σ(s) σ(r) v_i must equal σ(r') v_i.
                    match (level.apply(&gen, u), level.apply(&self.words[u2], self.reps[i])) {
                        (Ok(a), Ok(b)) if a == b => {}
                        _ => return false,
                    }
                }
            }
        }
        true
    }
}

pub fn orbit_decompose(level: &SoficLevel) -> Result<OrbitDecomposition> {
    let gens = level.generators().ok_or(Error::NotHomomorphic)?;
    let n = level.size;
    let mut orbit_of = vec![usize::MAX; n];
    let mut words = vec![Word::identity(); n];
    let mut reps = Vec::new();
    let mut orbits = Vec::new();
    for start in 0..n {
        if orbit_of[start] != usize::MAX {
            continue;
        }
        let id = reps.len();
        reps.push(start);
        orbit_of[start] = id;
        let mut orbit = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for (s, p) in gens.iter().enumerate() {
                for e in [1i64, -1] {
                    let x = p.pow_apply(u, e);
                    if orbit_of[x] == usize::MAX {
                        orbit_of[x] = id;
                        words[x] = level.group.mul(&Word::power(s as u32, e), &words[u]);
                        orbit.push(x);
                        queue.push_back(x);
                    }
                }
            }
        }
        orbits.push(orbit);
    }
    Ok(OrbitDecomposition { reps, orbit_of, orbits, words })
}

/// The finite permutation group `σ(G) ≅ G/ker σ`, identity first, in
/// breadth-first order over the generators.
pub fn image_group(level: &SoficLevel, cap: usize) -> Result<Vec<Perm>> {
    let gens = level.generators().ok_or(Error::NotHomomorphic)?;
    let id = Perm::identity(level.size);
    let mut seen: HashMap<Perm, usize> = HashMap::from([(id.clone(), 0)]);
    let mut elems = vec![id];
    let mut i = 0;
    while i < elems.len() {
        for p in gens {
            let q = p.compose(&elems[i]);
            if !seen.contains_key(&q) {
                if elems.len() >= cap {
                    return Err(Error::TooLarge(format!("image group exceeds {cap} elements")));
                }
                seen.insert(q.clone(), elems.len());
                elems.push(q);
            }
        }
        i += 1;
    }
    Ok(elems)
}

/// `⨿_i G/K` with `K = ker σ`: point `(i, p)` is `i·|P| + p` for `p` in the
/// image group `P`, with `σ̈(g)(i, p) = (i, σ(g)∘p)`. Returns the level and
/// the factor map `(i, p) ↦ p(v_i)` onto `V`.
pub fn kernel_quotient(level: &SoficLevel, decomp: &OrbitDecomposition, cap: usize) -> Result<(SoficLevel, Vec<usize>)> {
    let group = image_group(level, cap)?;
    let index: HashMap<&Perm, usize> = group.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let m = group.len();
    let f = decomp.copies();
    let gens = level.generators().ok_or(Error::NotHomomorphic)?;
    let lifted = gens
        .iter()
        .map(|s| {
            let mut images = vec![0u32; f * m];
            for (j, p) in group.iter().enumerate() {
                let k = index[&s.compose(p)];
                for i in 0..f {
                    images[i * m + j] = (i * m + k) as u32;
                }
            }
            Perm::from_images(images).expect("left multiplication is a bijection")
        })
        .collect();
    let proj = (0..f * m).map(|x| group[x % m].apply(decomp.reps[x / m])).collect();
    Ok((SoficLevel::homomorphic(level.group.clone(), lifted)?, proj))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Exact,
    Greedy,
}

#[derive(Debug, Clone, Serialize)]
pub struct IsoWitness {
    /// `d₂(φσ^U(f), σ^V(f)φ)` per element of `F`.
    pub defects: Vec<f64>,
    pub matched_u: Vec<usize>,
    pub matched_v: Vec<usize>,
    pub mode: MatchMode,
    pub accepted: bool,
}

impl IsoWitness {
    pub fn ratio(&self, size: usize) -> f64 {
        self.matched_u.len().min(self.matched_v.len()) as f64 / size as f64
    }
}

/// Checks whether `φ: U → V` is an `(F,δ)`-isomorphism.
pub fn check_iso(
    phi: &[usize],
    sigma_u: &SoficLevel,
    sigma_v: &SoficLevel,
    f: &[Word],
    delta: f64,
) -> Result<IsoWitness> {
    let n = sigma_u.size;
    if sigma_v.size != n || phi.len() != n {
        return Err(Error::SizeMismatch(format!("|U| = {n}, |V| = {}, |φ| = {}", sigma_v.size, phi.len())));
    }
    if let Some(&x) = phi.iter().find(|&&x| x >= n) {
        return Err(Error::PointOutOfRange { point: x, size: n });
    }
    let mut defects = Vec::with_capacity(f.len());
    for w in f {
        let mut bad = 0usize;
        for u in 0..n {
            if phi[sigma_u.apply(w, u)?] != sigma_v.apply(w, phi[u])? {
                bad += 1;
            }
        }
        defects.push((bad as f64 / n as f64).sqrt());
    }
    let (mode, pairs) = if n <= 64 { (MatchMode::Exact, max_matching(phi, n)) } else { (MatchMode::Greedy, greedy_matching(phi, n)) };
    let (matched_u, matched_v): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
    let ratio = matched_u.len() as f64 / n as f64;
    let accepted = defects.iter().all(|&d| d < delta) && ratio > 1.0 - delta;
    Ok(IsoWitness { defects, matched_u, matched_v, mode, accepted })
}

/// Largest set on which `φ` is injective, via augmenting paths on the edges `(u, φ(u))`.
fn max_matching(phi: &[usize], n: usize) -> Vec<(usize, usize)> {
    let adj: Vec<Vec<usize>> = phi.iter().map(|&v| vec![v]).collect();
    let mut match_v = vec![usize::MAX; n];
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], match_v: &mut [usize]) -> bool {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                if match_v[v] == usize::MAX || augment(match_v[v], adj, seen, match_v) {
                    match_v[v] = u;
                    return true;
                }
            }
        }
        false
    }
    for u in 0..n {
        let mut seen = vec![false; n];
        augment(u, &adj, &mut seen, &mut match_v);
    }
    let mut pairs: Vec<(usize, usize)> =
        match_v.iter().enumerate().filter(|(_, &u)| u != usize::MAX).map(|(v, &u)| (u, v)).collect();
    pairs.sort_unstable();
    pairs
}

fn greedy_matching(phi: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut used = vec![false; n];
    let mut pairs = Vec::new();
    for (u, &v) in phi.iter().enumerate() {
        if !used[v] {
            used[v] = true;
            pairs.push((u, v));
        }
    }
    pairs
}

/// The homomorphic level agreeing with `level` on the generators.
pub fn homomorphize_free(level: &SoficLevel) -> Result<SoficLevel> {
    if level.group.kind != GroupKind::Free {
        return Err(Error::NotFree);
    }
    if level.is_homomorphism() {
        return Ok(level.clone());
    }
    let gens = (0..level.group.rank() as u32)
        .map(|s| {
            level.sigma(&Word::power(s, 1)).or_else(|_| level.sigma(&Word::power(s, -1)).map(|p| p.inverse()))
        })
        .collect::<Result<Vec<_>>>()?;
    SoficLevel::homomorphic(level.group.clone(), gens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::QuotientChain;

    fn zmod(n: usize) -> SoficLevel {
        let ch = QuotientChain::cyclic(&[n]).unwrap();
        coset_sofic(&ch).levels.remove(0)
    }

    fn int(e: i64) -> Word {
        Word::power(0, e)
    }

    #[test]
    fn coset_level_is_negated_translation() {
        let l = zmod(8);
        for v in 0..8 {
            for g in -9..9i64 {
                assert_eq!(l.apply(&int(g), v).unwrap() as i64, (v as i64 - g).rem_euclid(8));
            }
        }
        assert!(l.sigma(&Word::identity()).unwrap().is_identity());
    }

    #[test]
    fn sym3_generator_image_is_inverse_cycle() {
        let a = Perm::from_images(vec![1, 2, 0]).unwrap();
        let ch = QuotientChain::new(
            GroupPresentation::free(2),
            vec![crate::group::ChainLevel::new(vec![a.clone(), Perm::identity(3)], 0).unwrap()],
            vec![],
        )
        .unwrap();
        let l = &coset_sofic(&ch).levels[0];
        assert_eq!(l.sigma(&Word::power(0, 1)).unwrap(), a.inverse());
    }

    #[test]
    fn amplification_preserves_copies_and_fractions() {
        let l = zmod(4);
        let a = l.amplify(3).unwrap();
        assert_eq!(a.size, 12);
        for x in 0..12 {
            assert_eq!(a.apply(&int(1), x).unwrap() / 4, x / 4);
        }
        let f = [int(1), int(2)];
        let r1 = soficity_report(&l, &f).unwrap();
        let r2 = soficity_report(&l.amplify(2).unwrap(), &f).unwrap();
        let e1 = r1.entries.iter().find(|e| e.s == 0 && e.t == 1).unwrap();
        let e2 = r2.entries.iter().find(|e| e.s == 0 && e.t == 1).unwrap();
        assert_eq!(e1.freeness(), e2.freeness());
        assert_eq!(e2.free_points, Some(8));
        let same = l.amplify(1).unwrap();
        for v in 0..4 {
            assert_eq!(same.apply(&int(3), v).unwrap(), l.apply(&int(3), v).unwrap());
        }
    }

    #[test]
    fn soficity_examples() {
        let l = zmod(8);
        let f = [int(0), int(1), int(3), int(8)];
        let r = soficity_report(&l, &f).unwrap();
        assert!(r.entries.iter().all(|e| e.multiplicative_points == 8));
        let get = |s: usize, t: usize| r.entries.iter().find(|e| e.s == s && e.t == t).unwrap().freeness();
        assert_eq!(get(0, 3), Some(0.0));
        assert_eq!(get(1, 2), Some(1.0));
        assert_eq!(get(1, 1), None);
    }

    #[test]
    fn table_level_refuses_unknown_words() {
        let g = GroupPresentation::integers();
        let l = SoficLevel::from_table(g, 3, vec![(int(1), Perm::rotation(3, 1))]).unwrap();
        assert!(l.apply(&int(1), 0).is_ok());
        assert!(matches!(l.apply(&int(2), 0), Err(Error::UndefinedOnWord(_))));
        assert!(soficity_report(&l, &[int(1)]).is_err());
    }

    #[test]
    fn orbit_examples() {
        let d = orbit_decompose(&zmod(4)).unwrap();
        assert_eq!(d.copies(), 1);
        assert!(d.in_kernel(&zmod(4), &int(4)));
        assert!(!d.in_kernel(&zmod(4), &int(2)));

        // ℤ/2 ⊔ ℤ/4 on six points.
        let p = Perm::from_images(vec![1, 0, 3, 4, 5, 2]).unwrap();
        let l = SoficLevel::homomorphic(GroupPresentation::integers(), vec![p]).unwrap();
        let d = orbit_decompose(&l).unwrap();
        assert_eq!(d.copies(), 2);
        let mut idx: Vec<usize> = (0..2).map(|i| d.stabilizer_index(i)).collect();
        idx.sort();
        assert_eq!(idx, [2, 4]);
        assert!(d.reassembly_holds(&l));
        assert!(matches!(
            orbit_decompose(&SoficLevel::from_table(GroupPresentation::integers(), 1, vec![]).unwrap()),
            Err(Error::NotHomomorphic)
        ));
    }

    #[test]
    fn sym3_orbit_kernel_contains_b() {
        let a = Perm::from_images(vec![1, 2, 0]).unwrap();
        let l = SoficLevel::homomorphic(GroupPresentation::free(2), vec![a, Perm::identity(3)]).unwrap();
        let d = orbit_decompose(&l).unwrap();
        assert_eq!(d.copies(), 1);
        assert_eq!(d.stabilizer_index(0), 3);
        assert!(d.in_kernel(&l, &Word::power(1, 1)));
        assert!(d.reassembly_holds(&l));
    }

    #[test]
    fn iso_examples() {
        let l = zmod(4);
        let f = [int(1), int(2)];
        let id: Vec<usize> = (0..4).collect();
        let w = check_iso(&id, &l, &l, &f, 1e-9).unwrap();
        assert!(w.accepted && w.defects.iter().all(|&d| d == 0.0));
        assert_eq!(w.mode, MatchMode::Exact);
        let constant = vec![0; 4];
        for delta in [0.25, 0.5, 0.75] {
            assert!(!check_iso(&constant, &l, &l, &f, delta).unwrap().accepted);
        }
        // Coset relabeling v ↦ v + 1 commutes with translations.
        let shift: Vec<usize> = (0..4).map(|v| (v + 1) % 4).collect();
        let w = check_iso(&shift, &l, &l, &f, 1e-9).unwrap();
        assert!(w.accepted);
        assert!(check_iso(&id, &l, &zmod(8), &f, 0.5).is_err());
    }

    #[test]
    fn homomorphize_perturbed_level() {
        // Two permutations never differ at a single point, so the perturbation
        // touches 2 of 16 points: a disagreement fraction of 1/8.
        let g = GroupPresentation::free(2);
        let a = Perm::rotation(16, 1);
        let b = Perm::rotation(16, 3);
        let mut ab: Vec<u32> = a.compose(&b).images().to_vec();
        ab.swap(0, 1);
        let ab = Perm::from_images(ab).unwrap();
        let word_ab = g.parse_word("a b").unwrap();
        let table = SoficLevel::from_table(
            g.clone(),
            16,
            vec![(Word::power(0, 1), a.clone()), (Word::power(1, 1), b.clone()), (word_ab.clone(), ab)],
        )
        .unwrap();
        let h = homomorphize_free(&table).unwrap();
        assert!(h.is_homomorphism());
        let id: Vec<usize> = (0..16).collect();
        let f = std::slice::from_ref(&word_ab);
        let threshold = (1.0f64 / 8.0).sqrt();
        let w = check_iso(&id, &table, &h, f, threshold).unwrap();
        assert_eq!(w.defects[0], threshold);
        assert!(!w.accepted);
        assert!(check_iso(&id, &table, &h, f, threshold + 1e-9).unwrap().accepted);
        assert!(matches!(
            homomorphize_free(&SoficLevel::homomorphic(GroupPresentation::free_abelian(1), vec![a]).unwrap()),
            Err(Error::NotFree)
        ));
    }
}
