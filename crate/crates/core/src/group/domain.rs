use super::{Enumerator, QuotientChain, Word};
use crate::error::{Error, Result};

/// Limits for the shortlex searches behind fundamental domains.
#[derive(Debug, Clone, Copy)]
pub struct DomainBudget {
    pub max_word_len: usize,
    pub max_elements: usize,
}

impl Default for DomainBudget {
    fn default() -> Self {
        DomainBudget { max_word_len: 1 << 16, max_elements: 1 << 22 }
    }
}

/// Coset representatives for one chain level.
///
/// `words` lists the representatives in telescoping order: for levels after
/// the first, entry `t·|F_prev| + f` is `transversal[t] · F_prev[f]`.
#[derive(Debug, Clone)]
pub struct FundamentalDomain {
    pub level: usize,
    pub words: Vec<Word>,
    /// Coset of `words[i]`.
    pub coset_of: Vec<usize>,
    /// Position in `words` of the representative of each coset.
    pub position: Vec<usize>,
    /// Representatives of `H_prev / H_level` inside `H_prev` (empty at the first level).
    pub transversal: Vec<Word>,
    /// Cosets ordered by the shortlex order of their representatives.
    pub shortlex_cosets: Vec<usize>,
}

impl FundamentalDomain {
    pub fn rep(&self, coset: usize) -> &Word {
        &self.words[self.position[coset]]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Recovers `(t, f)` with `words[i] = transversal[t] · F_prev[f]`.
    pub fn factor(&self, i: usize, prev_len: usize) -> (usize, usize) {
        (i / prev_len, i % prev_len)
    }
}

/// Telescoping fundamental domains for every level of a validated chain.
pub fn build_domains(chain: &QuotientChain, budget: DomainBudget) -> Result<Vec<FundamentalDomain>> {
    let report = chain.validate();
    if let Some(why) = report.first_failure() {
        return Err(Error::InvalidParameter(format!("chain not valid: {why}")));
    }
    let group = &chain.group;
    let mut en = Enumerator::new(group.clone(), budget.max_word_len, budget.max_elements);
    let exhausted = |ctx: String| Error::SearchExhausted { budget: budget.max_word_len, context: ctx };
    let mut out: Vec<FundamentalDomain> = Vec::with_capacity(chain.depth());

    let l0 = &chain.levels[0];
    let mut rep: Vec<Option<Word>> = vec![None; l0.size];
    let mut found = 0;
    let mut i = 0;
    while found < l0.size {
        let w = en.get(i).ok_or_else(|| exhausted("covering the cosets of level 1".into()))?;
        let c = l0.coset(w);
        if rep[c].is_none() {
            rep[c] = Some(w.clone());
            found += 1;
        }
        i += 1;
    }
    let mut pairs: Vec<(usize, Word)> = rep.into_iter().enumerate().map(|(c, w)| (c, w.unwrap())).collect();
    pairs.sort_by(|a, b| group.shortlex_cmp(&a.1, &b.1));
    out.push(finish(0, pairs.iter().map(|p| p.1.clone()).collect(), l0.size, |w| l0.coset(w), vec![], group));

    for n in 1..chain.depth() {
        let (lo, hi) = (&chain.levels[n - 1], &chain.levels[n]);
        let ratio = hi.size / lo.size;
        let mut transversal: Vec<Word> = Vec::with_capacity(ratio);
        let mut taken = vec![false; hi.size];
        let mut i = 0;
        while transversal.len() < ratio {
            let w = en
                .get(i)
                .ok_or_else(|| exhausted(format!("finding a transversal of level {} inside level {}", n + 1, n)))?;
            if lo.in_kernel(w) {
                let c = hi.coset(w);
                if !taken[c] {
                    taken[c] = true;
                    transversal.push(w.clone());
                }
            }
            i += 1;
        }
        let prev = &out[n - 1];
        let mut words = Vec::with_capacity(hi.size);
        for t in &transversal {
            for f in &prev.words {
                words.push(group.mul(t, f));
            }
        }
        out.push(finish(n, words, hi.size, |w| hi.coset(w), transversal, group));
    }
    Ok(out)
}

fn finish(
    level: usize,
    words: Vec<Word>,
    size: usize,
    coset: impl Fn(&Word) -> usize,
    transversal: Vec<Word>,
    group: &super::GroupPresentation,
) -> FundamentalDomain {
    let coset_of: Vec<usize> = words.iter().map(&coset).collect();
    let mut position = vec![usize::MAX; size];
    for (i, &c) in coset_of.iter().enumerate() {
        debug_assert_eq!(position[c], usize::MAX);
        position[c] = i;
    }
    let mut order: Vec<usize> = (0..words.len()).collect();
    order.sort_by(|&a, &b| group.shortlex_cmp(&words[a], &words[b]));
    let shortlex_cosets = order.into_iter().map(|i| coset_of[i]).collect();
    FundamentalDomain { level, words, coset_of, position, transversal, shortlex_cosets }
}
