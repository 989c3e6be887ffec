use super::{GroupKind, GroupPresentation, Word};
use crate::error::{Error, Result};
use crate::perm::Perm;
use serde::Serialize;
use std::collections::VecDeque;

/// A finite transitive right action `q·s` of the group on `0..size`.
///
/// Point `coset(w) = id·w` stands for the coset `H w` of the kernel `H` of
/// the action on `id`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLevel {
    pub size: usize,
    pub gens: Vec<Perm>,
    pub id: usize,
}

impl ChainLevel {
    pub fn new(gens: Vec<Perm>, id: usize) -> Result<Self> {
        let size = gens.first().map_or(0, |p| p.len());
        if size == 0 {
            return Err(Error::InvalidParameter("a level needs at least one generator and one point".into()));
        }
        if gens.iter().any(|p| p.len() != size) {
            return Err(Error::SizeMismatch("generator images of different sizes".into()));
        }
        if id >= size {
            return Err(Error::PointOutOfRange { point: id, size });
        }
        Ok(ChainLevel { size, gens, id })
    }

    /// `c·w`, applying syllables left to right.
    #[inline]
    pub fn apply_word(&self, c: usize, w: &Word) -> usize {
        w.syllables().iter().fold(c, |q, &(g, e)| self.gens[g as usize].pow_apply(q, e))
    }

    /// `c·w⁻¹`.
    #[inline]
    pub fn apply_word_inverse(&self, c: usize, w: &Word) -> usize {
        w.syllables().iter().rev().fold(c, |q, &(g, e)| self.gens[g as usize].pow_apply(q, -e))
    }

    #[inline]
    pub fn coset(&self, w: &Word) -> usize {
        self.apply_word(self.id, w)
    }

    /// Left action `σ_g(c) = c·g⁻¹`; satisfies `act(c, gh) = act(act(c, h), g)`.
    pub fn act(&self, c: usize, g: &Word) -> Result<usize> {
        if c >= self.size {
            return Err(Error::PointOutOfRange { point: c, size: self.size });
        }
        Ok(self.apply_word_inverse(c, g))
    }

    /// Whether `w` lies in the kernel `H` (acts trivially on `id`; for a
    /// normal kernel this is trivial action on every point).
    pub fn in_kernel(&self, w: &Word) -> bool {
        self.coset(w) == self.id
    }

    /// Breadth-first spanning tree from `id` over the generator images:
    /// visit order and, per point, `(parent, generator)`.
    pub fn bfs_tree(&self) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
        let mut parent = vec![None; self.size];
        let mut seen = vec![false; self.size];
        let mut order = Vec::with_capacity(self.size);
        let mut queue = VecDeque::from([self.id]);
        seen[self.id] = true;
        while let Some(q) = queue.pop_front() {
            order.push(q);
            for (s, p) in self.gens.iter().enumerate() {
                for x in [p.apply(q), p.pow_apply(q, -1)] {
                    if !seen[x] {
                        seen[x] = true;
                        parent[x] = Some((q, s));
                        queue.push_back(x);
                    }
                }
            }
        }
        (order, parent)
    }

    pub fn is_transitive(&self) -> bool {
        self.bfs_tree().0.len() == self.size
    }

    /// The map `L(id·w) = t·w`, defined from `L(id) = t` by commuting with
    /// the right action. `None` if that is not well defined, which for
    /// some `t` happens exactly when the kernel is not normal.
    pub fn left_mult(&self, t: usize) -> Option<Vec<usize>> {
        let mut map = vec![usize::MAX; self.size];
        map[self.id] = t;
        let mut queue = VecDeque::from([self.id]);
        while let Some(q) = queue.pop_front() {
            for p in &self.gens {
                let (x, y) = (p.apply(q), p.apply(map[q]));
                if map[x] == usize::MAX {
                    map[x] = y;
                    queue.push_back(x);
                } else if map[x] != y {
                    return None;
                }
            }
        }
        if map.contains(&usize::MAX) {
            return None;
        }
        Some(map)
    }

    /// Exact normality test: left multiplication by every generator is well
    /// defined on the point set. Requires transitivity.
    pub fn is_normal(&self) -> bool {
        self.gens.iter().all(|p| {
            let t = p.apply(self.id);
            self.left_mult(t).is_some()
        })
    }

    pub fn generators_commute(&self) -> bool {
        let n = self.gens.len();
        (0..n).all(|i| {
            (i + 1..n).all(|j| {
                let (a, b) = (&self.gens[i], &self.gens[j]);
                (0..self.size).all(|q| a.apply(b.apply(q)) == b.apply(a.apply(q)))
            })
        })
    }
}

/// A truncated chain `H_1 ⊃ H_2 ⊃ …` given by finite levels and
/// refinement maps `refinements[i]: level i+1 → level i` (0-based).
#[derive(Debug, Clone)]
pub struct QuotientChain {
    pub group: GroupPresentation,
    pub levels: Vec<ChainLevel>,
    pub refinements: Vec<Vec<usize>>,
}

impl QuotientChain {
    /// Checks shapes only; semantics are checked by [`QuotientChain::validate`].
    pub fn new(group: GroupPresentation, levels: Vec<ChainLevel>, refinements: Vec<Vec<usize>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidParameter("chain has no levels".into()));
        }
        for (i, l) in levels.iter().enumerate() {
            if l.gens.len() != group.rank() {
                return Err(Error::InvalidLevel {
                    level: i + 1,
                    reason: format!("{} generator images for rank {}", l.gens.len(), group.rank()),
                });
            }
        }
        if refinements.len() + 1 != levels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} refinement maps for {} levels",
                refinements.len(),
                levels.len()
            )));
        }
        for (i, r) in refinements.iter().enumerate() {
            let bad = |reason: String| Error::InvalidRefinement { level: i + 2, next: i + 1, reason };
            if r.len() != levels[i + 1].size {
                return Err(bad(format!("length {} but level {} has {} points", r.len(), i + 2, levels[i + 1].size)));
            }
            if let Some(p) = r.iter().position(|&x| x >= levels[i].size) {
                return Err(bad(format!("entry {p} out of range")));
            }
        }
        Ok(QuotientChain { group, levels, refinements })
    }

    /// `ℤ` with levels `ℤ/m_1, ℤ/m_2, …`, each modulus dividing the next.
    pub fn cyclic(moduli: &[usize]) -> Result<Self> {
        Self::torus(GroupPresentation::integers(), moduli)
    }

    /// `H_n = 2ⁿℤ` for `n = 1..=depth`.
    pub fn dyadic(depth: usize) -> Result<Self> {
        let moduli: Vec<usize> = (1..=depth).map(|n| 1usize << n).collect();
        Self::cyclic(&moduli)
    }

    /// Levels `(ℤ/m)^r` with generator `i` adding 1 to coordinate `i`.
    /// Point index is `Σ c_i m^i`.
    pub fn torus(group: GroupPresentation, moduli: &[usize]) -> Result<Self> {
        let r = group.rank();
        let mut levels = Vec::new();
        let mut refinements = Vec::new();
        for (n, &m) in moduli.iter().enumerate() {
            if m < 1 {
                return Err(Error::InvalidParameter("modulus must be positive".into()));
            }
            let size = m.checked_pow(r as u32).ok_or_else(|| Error::TooLarge("torus level".into()))?;
            let gens = (0..r)
                .map(|i| {
                    let stride = m.pow(i as u32);
                    let images: Vec<usize> = (0..size)
                        .map(|q| {
                            let c = (q / stride) % m;
                            q - c * stride + ((c + 1) % m) * stride
                        })
                        .collect();
                    Perm::from_usize(&images)
                })
                .collect::<Result<Vec<_>>>()?;
            levels.push(ChainLevel::new(gens, 0)?);
            if n > 0 {
                let pm = moduli[n - 1];
                if m % pm != 0 {
                    return Err(Error::InvalidParameter(format!("modulus {pm} does not divide {m}")));
                }
                let map = (0..size)
                    .map(|q| (0..r).map(|i| ((q / m.pow(i as u32)) % m % pm) * pm.pow(i as u32)).sum())
                    .collect();
                refinements.push(map);
            }
        }
        Self::new(group, levels, refinements)
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn index(&self, level: usize) -> usize {
        self.levels[level].size
    }

    /// Composite refinement from level `from` down to level `to ≤ from`.
    pub fn refinement_between(&self, from: usize, to: usize) -> Vec<usize> {
        assert!(to <= from);
        let mut map: Vec<usize> = (0..self.levels[from].size).collect();
        for n in (to..from).rev() {
            let r = &self.refinements[n];
            for x in map.iter_mut() {
                *x = r[*x];
            }
        }
        map
    }

    /// Restricts the chain to the given increasing list of levels.
    pub fn subchain(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() || keep.windows(2).any(|w| w[0] >= w[1]) || *keep.last().unwrap() >= self.depth() {
            return Err(Error::InvalidParameter("subchain levels must be increasing and present".into()));
        }
        let levels = keep.iter().map(|&i| self.levels[i].clone()).collect();
        let refinements = keep.windows(2).map(|w| self.refinement_between(w[1], w[0])).collect();
        Self::new(self.group.clone(), levels, refinements)
    }

    pub fn validate(&self) -> ChainReport {
        let levels: Vec<LevelReport> = self
            .levels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let transitive = l.is_transitive();
                LevelReport {
                    level: i + 1,
                    index: l.size,
                    transitive,
                    normal: transitive && l.is_normal(),
                    commuting: match self.group.kind {
                        GroupKind::FreeAbelian => Some(l.generators_commute()),
                        GroupKind::Free => None,
                    },
                }
            })
            .collect();
        let refinements = self
            .refinements
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let (lo, hi) = (&self.levels[i], &self.levels[i + 1]);
                let equivariant =
                    (0..hi.size).all(|q| (0..hi.gens.len()).all(|s| r[hi.gens[s].apply(q)] == lo.gens[s].apply(r[q])));
                let mut fiber = vec![0usize; lo.size];
                for &x in r {
                    fiber[x] += 1;
                }
                let surjective = fiber.iter().all(|&f| f > 0);
                let uniform = fiber.iter().all(|&f| f == fiber[0]);
                let ratio = if hi.size % lo.size == 0 { Some(hi.size / lo.size) } else { None };
                RefinementReport {
                    level: i + 2,
                    next: i + 1,
                    equivariant,
                    surjective,
                    identity_preserved: r[hi.id] == lo.id,
                    uniform_fibers: uniform,
                    ratio,
                }
            })
            .collect();
        ChainReport { levels, refinements }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelReport {
    pub level: usize,
    pub index: usize,
    pub transitive: bool,
    /// Certified exactly (left multiplication is well defined).
    pub normal: bool,
    /// Free-abelian chains only: generator images commute.
    pub commuting: Option<bool>,
}

impl LevelReport {
    pub fn passes(&self) -> bool {
        self.transitive && self.normal && self.commuting.unwrap_or(true)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RefinementReport {
    pub level: usize,
    pub next: usize,
    pub equivariant: bool,
    pub surjective: bool,
    pub identity_preserved: bool,
    pub uniform_fibers: bool,
    pub ratio: Option<usize>,
}

impl RefinementReport {
    pub fn passes(&self) -> bool {
        self.equivariant
            && self.surjective
            && self.identity_preserved
            && self.uniform_fibers
            && self.ratio.is_some_and(|r| r >= 2)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub levels: Vec<LevelReport>,
    pub refinements: Vec<RefinementReport>,
}

impl ChainReport {
    pub fn all_pass(&self) -> bool {
        self.levels.iter().all(LevelReport::passes) && self.refinements.iter().all(RefinementReport::passes)
    }

    pub fn first_failure(&self) -> Option<String> {
        for l in &self.levels {
            if !l.passes() {
                return Some(format!("level {} fails (transitive={}, normal={})", l.level, l.transitive, l.normal));
            }
        }
        for r in &self.refinements {
            if !r.passes() {
                return Some(format!(
                    "refinement {}->{} fails (equivariant={}, surjective={}, ratio={:?})",
                    r.level, r.next, r.equivariant, r.surjective, r.ratio
                ));
            }
        }
        None
    }
}
