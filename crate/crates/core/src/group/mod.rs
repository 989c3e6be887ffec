//! Free and free-abelian groups: normal forms, shortlex order, enumeration.

mod chain;
mod domain;

pub use chain::{ChainLevel, ChainReport, LevelReport, QuotientChain, RefinementReport};
pub use domain::{build_domains, DomainBudget, FundamentalDomain};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    Free,
    FreeAbelian,
}

/// A group element in normal form: a list of `(generator, exponent)` syllables.
///
/// Free kind: adjacent syllables have distinct generators. Free-abelian kind:
/// syllables are sorted by generator (a sparse exponent vector). Exponents are
/// never zero in either kind.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Word(Vec<(u32, i64)>);

impl Word {
    pub fn identity() -> Word {
        Word(Vec::new())
    }

    /// `gen^exp` (already in normal form for either kind).
    pub fn power(gen: u32, exp: i64) -> Word {
        if exp == 0 {
            Word::identity()
        } else {
            Word(vec![(gen, exp)])
        }
    }

    pub fn syllables(&self) -> &[(u32, i64)] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// Word length with respect to the generators and their inverses.
    pub fn len(&self) -> u64 {
        self.0.iter().map(|&(_, e)| e.unsigned_abs()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Generator names plus the kind; the rank is the number of names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPresentation {
    pub kind: GroupKind,
    pub generators: Vec<String>,
}

impl GroupPresentation {
    pub fn new(kind: GroupKind, generators: Vec<String>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::InvalidPresentation("rank must be positive".into()));
        }
        let mut seen = HashSet::new();
        for g in &generators {
            if g.is_empty() || g == "e" || !g.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(Error::InvalidPresentation(format!("bad generator name `{g}`")));
            }
            if g.chars().next().is_some_and(|c| c.is_ascii_digit()) {
                return Err(Error::InvalidPresentation(format!("bad generator name `{g}`")));
            }
            if !seen.insert(g.clone()) {
                return Err(Error::InvalidPresentation(format!("duplicate generator `{g}`")));
            }
        }
        Ok(GroupPresentation { kind, generators })
    }

    /// `ℤ` as the free group on one generator `a`.
    pub fn integers() -> Self {
        GroupPresentation { kind: GroupKind::Free, generators: vec!["a".into()] }
    }

    /// Free group with generators `a, b, c, …` (rank ≤ 26).
    pub fn free(rank: usize) -> Self {
        Self::lettered(GroupKind::Free, rank)
    }

    pub fn free_abelian(rank: usize) -> Self {
        Self::lettered(GroupKind::FreeAbelian, rank)
    }

    fn lettered(kind: GroupKind, rank: usize) -> Self {
        assert!((1..=26).contains(&rank));
        let generators = (0..rank).map(|i| ((b'a' + i as u8) as char).to_string()).collect();
        GroupPresentation { kind, generators }
    }

    pub fn rank(&self) -> usize {
        self.generators.len()
    }

    /// Normalizes a raw syllable list.
    pub fn reduce(&self, raw: &[(u32, i64)]) -> Result<Word> {
        let r = self.rank();
        for &(g, _) in raw {
            if g as usize >= r {
                return Err(Error::UnknownGenerator { index: g as usize, rank: r });
            }
        }
        Ok(match self.kind {
            GroupKind::Free => {
                let mut out: Vec<(u32, i64)> = Vec::with_capacity(raw.len());
                for &(g, e) in raw {
                    push_free(&mut out, g, e);
                }
                Word(out)
            }
            GroupKind::FreeAbelian => {
                let mut exps = std::collections::BTreeMap::new();
                for &(g, e) in raw {
                    *exps.entry(g).or_insert(0i64) += e;
                }
                Word(exps.into_iter().filter(|&(_, e)| e != 0).collect())
            }
        })
    }

    pub fn mul(&self, u: &Word, v: &Word) -> Word {
        match self.kind {
            GroupKind::Free => {
                let mut out = u.0.clone();
                for &(g, e) in &v.0 {
                    push_free(&mut out, g, e);
                }
                Word(out)
            }
            GroupKind::FreeAbelian => {
                let (a, b) = (&u.0, &v.0);
                let mut out = Vec::with_capacity(a.len() + b.len());
                let (mut i, mut j) = (0, 0);
                while i < a.len() || j < b.len() {
                    if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                        out.push(a[i]);
                        i += 1;
                    } else if i == a.len() || b[j].0 < a[i].0 {
                        out.push(b[j]);
                        j += 1;
                    } else {
                        let e = a[i].1 + b[j].1;
                        if e != 0 {
                            out.push((a[i].0, e));
                        }
                        i += 1;
                        j += 1;
                    }
                }
                Word(out)
            }
        }
    }

    pub fn mul_all<'a>(&self, words: impl IntoIterator<Item = &'a Word>) -> Word {
        words.into_iter().fold(Word::identity(), |acc, w| self.mul(&acc, w))
    }

    pub fn inverse(&self, w: &Word) -> Word {
        match self.kind {
            GroupKind::Free => Word(w.0.iter().rev().map(|&(g, e)| (g, -e)).collect()),
            GroupKind::FreeAbelian => Word(w.0.iter().map(|&(g, e)| (g, -e)).collect()),
        }
    }

    /// Letter runs of the shortlex-defining letter sequence. Letter `g < r`
    /// is generator `g`, letter `r + g` its inverse. For the abelian kind the
    /// sequence is the sorted (lex-least) geodesic spelling.
    fn runs(&self, w: &Word) -> Vec<(u32, u64)> {
        let r = self.rank() as u32;
        let letter = |g: u32, e: i64| if e > 0 { g } else { r + g };
        match self.kind {
            GroupKind::Free => w.0.iter().map(|&(g, e)| (letter(g, e), e.unsigned_abs())).collect(),
            GroupKind::FreeAbelian => {
                let mut v: Vec<(u32, u64)> =
                    w.0.iter().map(|&(g, e)| (letter(g, e), e.unsigned_abs())).collect();
                v.sort_unstable();
                v
            }
        }
    }

    /// Shortlex comparison: length first, then the letter sequence.
    pub fn shortlex_cmp(&self, u: &Word, v: &Word) -> Ordering {
        u.len().cmp(&v.len()).then_with(|| cmp_runs(&self.runs(u), &self.runs(v)))
    }

    /// The letters `s` and `s⁻¹` for each generator, in shortlex letter order.
    pub fn letters(&self) -> Vec<Word> {
        let r = self.rank() as u32;
        (0..r).map(|g| Word::power(g, 1)).chain((0..r).map(|g| Word::power(g, -1))).collect()
    }

    pub fn parse_word(&self, text: &str) -> Result<Word> {
        let bad = |reason: &str| Error::MalformedWord { word: text.to_string(), reason: reason.to_string() };
        let text_t = text.trim();
        if text_t.is_empty() {
            return Err(bad("empty word (write `e` for the identity)"));
        }
        let mut raw = Vec::new();
        for tok in text_t.split_whitespace() {
            if tok == "e" {
                continue;
            }
            let (name, exp) = match tok.split_once('^') {
                Some((n, x)) => (n, x.parse::<i64>().map_err(|_| bad(&format!("bad exponent in `{tok}`")))?),
                None => (tok, 1),
            };
            let g = self
                .generators
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::UnknownGeneratorName(name.to_string()))?;
            raw.push((g as u32, exp));
        }
        self.reduce(&raw)
    }

    pub fn display<'a>(&'a self, w: &'a Word) -> WordDisplay<'a> {
        WordDisplay { group: self, word: w }
    }

    pub fn format_word(&self, w: &Word) -> String {
        self.display(w).to_string()
    }
}

fn push_free(out: &mut Vec<(u32, i64)>, g: u32, e: i64) {
    if e == 0 {
        return;
    }
    match out.last_mut() {
        Some(last) if last.0 == g => {
            last.1 += e;
            if last.1 == 0 {
                out.pop();
            }
        }
        _ => out.push((g, e)),
    }
}

fn cmp_runs(a: &[(u32, u64)], b: &[(u32, u64)]) -> Ordering {
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a.first().map_or(0, |x| x.1), b.first().map_or(0, |x| x.1));
    loop {
        match (i < a.len(), j < b.len()) {
            (false, false) => return Ordering::Equal,
            (false, true) => return Ordering::Less,
            (true, false) => return Ordering::Greater,
            _ => {}
        }
        let c = a[i].0.cmp(&b[j].0);
        if c != Ordering::Equal {
            return c;
        }
        let m = ra.min(rb);
        ra -= m;
        rb -= m;
        if ra == 0 {
            i += 1;
            ra = a.get(i).map_or(0, |x| x.1);
        }
        if rb == 0 {
            j += 1;
            rb = b.get(j).map_or(0, |x| x.1);
        }
    }
}

pub struct WordDisplay<'a> {
    group: &'a GroupPresentation,
    word: &'a Word,
}

impl fmt::Display for WordDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.word.is_identity() {
            return write!(f, "e");
        }
        for (i, &(g, e)) in self.word.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            let name = &self.group.generators[g as usize];
            if e == 1 {
                write!(f, "{name}")?;
            } else {
                write!(f, "{name}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Lazily grown shortlex enumeration `g_1 = e, g_2, …` of the group,
/// organized in breadth-first layers by word length.
#[derive(Debug, Clone)]
pub struct Enumerator {
    group: GroupPresentation,
    elements: Vec<Word>,
    layer_start: Vec<usize>,
    max_len: usize,
    max_elements: usize,
}

impl Enumerator {
    pub fn new(group: GroupPresentation, max_len: usize, max_elements: usize) -> Self {
        Enumerator { group, elements: vec![Word::identity()], layer_start: vec![0, 1], max_len, max_elements }
    }

    pub fn group(&self) -> &GroupPresentation {
        &self.group
    }

    /// Length of the longest complete layer.
    pub fn complete_len(&self) -> usize {
        self.layer_start.len() - 2
    }

    fn grow(&mut self) -> bool {
        let len = self.complete_len();
        if len >= self.max_len || self.elements.len() >= self.max_elements {
            return false;
        }
        let prev = self.layer_start[len]..self.layer_start[len + 1];
        let r = self.group.rank() as u32;
        let mut layer: Vec<Word> = Vec::new();
        match self.group.kind {
            GroupKind::Free => {
                for i in prev {
                    let w = &self.elements[i];
                    let last = w.0.last().map(|&(g, e)| if e > 0 { g } else { r + g });
                    for l in 0..2 * r {
                        let inv = if l < r { l + r } else { l - r };
                        if len > 0 && last == Some(inv) {
                            continue;
                        }
                        let (g, e) = if l < r { (l, 1) } else { (l - r, -1) };
                        let mut syl = w.0.clone();
                        push_free(&mut syl, g, e);
                        layer.push(Word(syl));
                    }
                }
            }
            GroupKind::FreeAbelian => {
                let mut seen = HashSet::new();
                for i in prev {
                    for l in self.group.letters() {
                        let w = self.group.mul(&self.elements[i], &l);
                        if w.len() as usize == len + 1 && seen.insert(w.clone()) {
                            layer.push(w);
                        }
                    }
                }
                let g = self.group.clone();
                layer.sort_by(|a, b| g.shortlex_cmp(a, b));
            }
        }
        if self.elements.len() + layer.len() > self.max_elements {
            return false;
        }
        self.elements.extend(layer);
        self.layer_start.push(self.elements.len());
        true
    }

    /// The `i`-th element (0-based), or `None` once the budget is exhausted.
    pub fn get(&mut self, i: usize) -> Option<&Word> {
        while i >= self.elements.len() {
            if !self.grow() {
                return None;
            }
        }
        Some(&self.elements[i])
    }

    /// All elements of length at most `len` (within budget).
    pub fn ball(&mut self, len: usize) -> &[Word] {
        while self.complete_len() < len && self.grow() {}
        let l = len.min(self.complete_len());
        &self.elements[..self.layer_start[l + 1]]
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_reduction_examples() {
        let g = GroupPresentation::free(2);
        assert!(g.reduce(&[(0, 1), (0, -1)]).unwrap().is_identity());
        let u = g.reduce(&[(0, 2), (1, -1)]).unwrap();
        let v = g.reduce(&[(1, 1), (0, 1)]).unwrap();
        assert_eq!(g.mul(&u, &v), Word::power(0, 3));
        assert!(matches!(g.reduce(&[(2, 1)]), Err(Error::UnknownGenerator { .. })));
    }

    #[test]
    fn abelian_reduction_examples() {
        let g = GroupPresentation::free_abelian(2);
        let u = g.reduce(&[(0, 2), (1, -1)]).unwrap();
        let v = g.reduce(&[(0, -2), (1, 1)]).unwrap();
        assert!(g.mul(&u, &v).is_identity());
        assert_eq!(g.reduce(&[(1, 1), (0, 1), (1, 2)]).unwrap(), Word(vec![(0, 1), (1, 3)]));
    }

    #[test]
    fn parse_and_display_round_trip() {
        let g = GroupPresentation::free(2);
        let w = g.parse_word("a^2 b^-1 b a").unwrap();
        assert_eq!(g.format_word(&w), "a^3");
        let w = g.parse_word("b a^-1").unwrap();
        assert_eq!(g.parse_word(&g.format_word(&w)).unwrap(), w);
        assert!(g.parse_word("e").unwrap().is_identity());
        assert!(g.parse_word("c").is_err());
        assert!(g.parse_word("a^x").is_err());
    }

    #[test]
    fn enumeration_is_shortlex_free() {
        let g = GroupPresentation::free(2);
        let mut en = Enumerator::new(g.clone(), 6, 1 << 20);
        let ball = en.ball(4).to_vec();
        assert_eq!(ball.len(), 1 + 4 + 12 + 36 + 108);
        let shown: Vec<String> = ball[..9].iter().map(|w| g.format_word(w)).collect();
        assert_eq!(shown, ["e", "a", "b", "a^-1", "b^-1", "a^2", "a b", "a b^-1", "b a"]);
        for w in ball.windows(2) {
            assert_eq!(g.shortlex_cmp(&w[0], &w[1]), Ordering::Less);
        }
    }

    #[test]
    fn enumeration_is_shortlex_abelian() {
        let g = GroupPresentation::free_abelian(2);
        let mut en = Enumerator::new(g.clone(), 6, 1 << 20);
        let ball = en.ball(3).to_vec();
        // |x|+|y| ≤ 3 has 1 + 4 + 8 + 12 points.
        assert_eq!(ball.len(), 25);
        for w in ball.windows(2) {
            assert_eq!(g.shortlex_cmp(&w[0], &w[1]), Ordering::Less);
        }
    }

    #[test]
    fn integers_enumerate_alternating() {
        let mut en = Enumerator::new(GroupPresentation::integers(), 100, 1000);
        let ints: Vec<i64> = (0..7)
            .map(|i| en.get(i).unwrap().syllables().first().map_or(0, |s| s.1))
            .collect();
        assert_eq!(ints, [0, 1, -1, 2, -2, 3, -3]);
    }
}
