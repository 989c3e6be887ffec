use super::Kappa;
use crate::error::{Error, Result};
use crate::group::{GroupPresentation, QuotientChain, Word};
use crate::shift::HOLE;
use serde::Serialize;

/// A partial coloring of `G/H_n`: letters `0..k` or `HOLE`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TowerLevel {
    /// 0-based chain level.
    pub level: usize,
    pub index: usize,
    pub holes_scheduled: usize,
    pub colors: Vec<u8>,
}

impl TowerLevel {
    pub fn holes(&self) -> usize {
        self.colors.iter().filter(|&&c| c == HOLE).count()
    }

    pub fn colored(&self) -> usize {
        self.index - self.holes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepLog {
    /// 1-based step within the stage.
    pub step: usize,
    pub level: usize,
    pub prefix_level: usize,
    /// `F_L ∩ H_prefix` in shortlex order.
    pub transversal: Vec<Word>,
    /// Per prefix (in lexicographic order of color prefixes), the chosen elements.
    pub chosen: Vec<Vec<Word>>,
    pub padding_color: u8,
    /// Cosets colored by padding, in order.
    pub padded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageLog {
    /// 1-based stage number.
    pub stage: usize,
    /// Level `β` the stage starts from.
    pub beta: usize,
    pub b_tilde: usize,
    /// Least element in a hole at `β`.
    pub g: Word,
    /// Hole representatives `s_1, …, s_A`, the hole of `g` first.
    pub hole_reps: Vec<Word>,
    /// Hole-lying elements of `F(F ∪ F⁻¹) \ F`, one per deepest-level coset.
    pub q: Vec<Word>,
    /// `R_j = {s_j} ∪ {η ∈ Q : η ≡ s_j}`.
    pub regions: Vec<Vec<Word>>,
    pub steps: Vec<StepLog>,
    /// `(γ, w_γ)` for all `γ ∈ k^A`, lexicographic.
    pub markers: Vec<(Vec<u8>, Word)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TailStep {
    pub level: usize,
    pub element: Word,
    pub padded: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConstructionLog {
    pub initial_level: usize,
    pub stages: Vec<StageLog>,
    pub tail: Vec<TailStep>,
    /// Why staged construction stopped before the chain ran out, if it did.
    pub stopped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToeplitzTower {
    pub group: GroupPresentation,
    pub k: usize,
    pub kappa: Kappa,
    pub levels: Vec<TowerLevel>,
    pub log: ConstructionLog,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct TowerIssue {
    /// 1-based chain level.
    pub level: usize,
    pub reason: String,
}

impl ToeplitzTower {
    pub fn level(&self, level: usize) -> Option<&TowerLevel> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub fn deepest(&self) -> &TowerLevel {
        self.levels.last().expect("tower has at least one level")
    }

    pub fn is_complete(&self) -> bool {
        self.log.stopped.is_none()
    }

    /// `x_g` read from the deepest level, `None` if still undetermined.
    pub fn eval(&self, chain: &QuotientChain, g: &Word) -> Option<u8> {
        let d = self.deepest();
        let c = d.colors[chain.levels[d.level].coset(g)];
        (c != HOLE).then_some(c)
    }

    /// Cosets at `level` carrying `symbol` (`None` for holes): the periodic
    /// part `Per_{H_n}(x, symbol)` as a union of cosets.
    pub fn periodic_part(&self, level: usize, symbol: Option<u8>) -> Result<Vec<usize>> {
        let l = self.level(level).ok_or(Error::LevelAbsent { level: level + 1 })?;
        let want = symbol.unwrap_or(HOLE);
        if want != HOLE && want as usize >= self.k {
            return Err(Error::InvalidParameter(format!("letter {want} outside alphabet of size {}", self.k)));
        }
        Ok((0..l.index).filter(|&c| l.colors[c] == want).collect())
    }

    /// Fraction of `window` determined at the deepest level.
    pub fn coverage(&self, chain: &QuotientChain, window: &[Word]) -> f64 {
        if window.is_empty() {
            return 1.0;
        }
        window.iter().filter(|g| self.eval(chain, g).is_some()).count() as f64 / window.len() as f64
    }

    /// Structural checks against `chain`: indices, letters, scheduled hole
    /// counts, and consistency of colors under the composite refinements.
    pub fn check(&self, chain: &QuotientChain) -> Vec<TowerIssue> {
        let mut issues = Vec::new();
        let mut push = |level: usize, reason: String| issues.push(TowerIssue { level: level + 1, reason });
        if self.levels.is_empty() {
            push(0, "tower has no levels".into());
            return issues;
        }
        for (i, l) in self.levels.iter().enumerate() {
            if i > 0 && l.level <= self.levels[i - 1].level {
                push(l.level, "levels are not strictly increasing".into());
                continue;
            }
            if l.level >= chain.depth() {
                push(l.level, format!("chain has only {} levels", chain.depth()));
                continue;
            }
            if l.index != chain.index(l.level) || l.colors.len() != l.index {
                push(l.level, format!("index {} does not match chain index {}", l.index, chain.index(l.level)));
                continue;
            }
            if let Some(c) = l.colors.iter().find(|&&c| c != HOLE && c as usize >= self.k) {
                push(l.level, format!("color {c} outside alphabet of size {}", self.k));
            }
            if l.holes() != l.holes_scheduled {
                push(l.level, format!("{} holes but {} scheduled", l.holes(), l.holes_scheduled));
            }
            if !self.kappa.in_bracket(l.holes_scheduled, l.index) {
                push(l.level, format!("{} holes out of {} do not bracket kappa {}", l.holes_scheduled, l.index, self.kappa));
            }
            if i > 0 {
                let prev = &self.levels[i - 1];
                if prev.level < chain.depth() && prev.colors.len() == prev.index {
                    let r = chain.refinement_between(l.level, prev.level);
                    let bad = (0..l.index).find(|&c| {
                        let up = prev.colors[r[c]];
                        up != HOLE && l.colors[c] != up
                    });
                    if let Some(c) = bad {
                        push(l.level, format!("coset {c} changes a color inherited from level {}", prev.level + 1));
                    }
                }
            }
        }
        issues
    }
}
