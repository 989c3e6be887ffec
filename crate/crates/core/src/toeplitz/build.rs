use super::tower::{ConstructionLog, StageLog, StepLog, TailStep, ToeplitzTower, TowerLevel};
use super::HoleSchedule;
use crate::error::{Error, Result};
use crate::group::{DomainBudget, Enumerator, FundamentalDomain, QuotientChain, Word};
use crate::shift::HOLE;
use std::collections::{HashMap, HashSet};

struct Plan {
    g: Word,
    hole_reps: Vec<Word>,
    q: Vec<Word>,
    regions: Vec<Vec<Word>>,
    b_tilde: usize,
    /// `(L_j, prefix level)` per step.
    steps: Vec<(usize, usize)>,
}

struct Builder<'a> {
    chain: &'a QuotientChain,
    domains: &'a [FundamentalDomain],
    k: usize,
    cand: Vec<usize>,
    a_of: HashMap<usize, usize>,
    en: Enumerator,
    levels: Vec<TowerLevel>,
}

/// Builds a Toeplitz tower realizing the schedule's hole budgets, with the
/// staged marker construction that certifies the entropy lower bound.
/// When a stage cannot be planned within the chain, the remaining levels are
/// filled by plain padding and the log records why.
pub fn build_krieger(
    chain: &QuotientChain,
    domains: &[FundamentalDomain],
    sched: &HoleSchedule,
    budget: DomainBudget,
) -> Result<ToeplitzTower> {
    if domains.len() != chain.depth() {
        return Err(Error::SizeMismatch(format!("{} domains for {} chain levels", domains.len(), chain.depth())));
    }
    if let Err(why) = sched.check() {
        return Err(Error::Infeasible(why));
    }
    for e in &sched.entries {
        if e.level >= chain.depth() || chain.index(e.level) != e.index {
            return Err(Error::SizeMismatch(format!("schedule entry for level {} does not match the chain", e.level + 1)));
        }
    }
    let k = sched.k;
    if k > HOLE as usize {
        return Err(Error::InvalidParameter(format!("alphabet size {k} too large")));
    }
    let mut b = Builder {
        chain,
        domains,
        k,
        cand: sched.entries.iter().map(|e| e.level).collect(),
        a_of: sched.entries.iter().map(|e| (e.level, e.holes)).collect(),
        en: Enumerator::new(chain.group.clone(), budget.max_word_len, budget.max_elements),
        levels: Vec::new(),
    };
    let first = sched.entries[0];
    let mut colors = vec![HOLE; first.index];
    for &c in domains[first.level].shortlex_cosets.iter().take(first.index - first.holes) {
        colors[c] = 0;
    }
    b.levels.push(TowerLevel { level: first.level, index: first.index, holes_scheduled: first.holes, colors });
    let mut log = ConstructionLog { initial_level: first.level, ..Default::default() };

    loop {
        let cur = b.levels.last().unwrap().level;
        if !b.cand.iter().any(|&l| l > cur) {
            break;
        }
        match b.plan()? {
            Ok(plan) => {
                let stage = b.run(plan, log.stages.len() + 1)?;
                log.stages.push(stage);
            }
            Err(why) => {
                log.stopped = Some(format!("stage {}: {why}", log.stages.len() + 1));
                log.tail = b.tail()?;
                break;
            }
        }
    }
    Ok(ToeplitzTower { group: chain.group.clone(), k, kappa: sched.kappa, levels: b.levels, log })
}

impl Builder<'_> {
    fn lift(&self, to: usize) -> Vec<u8> {
        let from = self.levels.last().unwrap();
        self.chain.refinement_between(to, from.level).iter().map(|&c| from.colors[c]).collect()
    }

    fn least_hole_element(&mut self) -> Result<Word> {
        let top = self.levels.last().unwrap();
        let lvl = &self.chain.levels[top.level];
        let budget = self.en.max_len();
        let mut i = 0;
        loop {
            let w = self.en.get(i).ok_or_else(|| Error::SearchExhausted {
                budget,
                context: format!("searching for an undetermined element at level {}", top.level + 1),
            })?;
            if top.colors[lvl.coset(w)] == HOLE {
                return Ok(w.clone());
            }
            i += 1;
        }
    }

    fn plan(&mut self) -> Result<std::result::Result<Plan, String>> {
        let top = self.levels.last().unwrap().clone();
        let (p, a_p, k) = (top.level, top.holes_scheduled, self.k as u128);
        let max_index = self.chain.levels.last().unwrap().size as u128;
        let mut kp: u128 = 1;
        for _ in 0..a_p {
            kp *= k;
            if kp > max_index {
                return Ok(Err(format!(
                    "{} markers for {a_p} holes at level {} exceed every index in the chain",
                    if a_p < 128 { format!("{}^{a_p}", self.k) } else { "too many".into() },
                    p + 1
                )));
            }
        }
        let g = self.least_hole_element()?;
        let group = &self.chain.group;
        let lvl = &self.chain.levels[p];
        let dom = &self.domains[p];
        let g_hole = lvl.coset(&g);
        let mut hole_cosets = vec![g_hole];
        hole_cosets.extend(dom.shortlex_cosets.iter().copied().filter(|&c| top.colors[c] == HOLE && c != g_hole));
        let hole_reps: Vec<Word> = hole_cosets.iter().map(|&c| dom.rep(c).clone()).collect();

        // η = f₁f₂ lands in hole h exactly when f₁ represents h·f₂⁻¹.
        let in_f: HashSet<&Word> = dom.words.iter().collect();
        let mut f2s: Vec<Word> = dom.words.clone();
        f2s.extend(dom.words.iter().map(|w| group.inverse(w)));
        f2s.sort_by(|a, b| group.shortlex_cmp(a, b));
        f2s.dedup();
        let mut q: Vec<Word> = Vec::new();
        let mut seen: HashSet<Word> = HashSet::new();
        for &h in &hole_cosets {
            for f2 in &f2s {
                let eta = group.mul(dom.rep(lvl.apply_word_inverse(h, f2)), f2);
                if !in_f.contains(&eta) && seen.insert(eta.clone()) {
                    q.push(eta);
                }
            }
        }
        q.sort_by(|a, b| group.shortlex_cmp(a, b));
        // Elements that no chain level separates behave identically; keep the first.
        let deep = self.chain.levels.last().unwrap();
        let mut keys: HashSet<usize> = hole_reps.iter().map(|w| deep.coset(w)).collect();
        q.retain(|w| keys.insert(deep.coset(w)));

        let regions: Vec<Vec<Word>> = hole_cosets
            .iter()
            .zip(&hole_reps)
            .map(|(&h, s)| {
                let mut r = vec![s.clone()];
                r.extend(q.iter().filter(|w| lvl.coset(w) == h).cloned());
                r
            })
            .collect();

        let all: Vec<&Word> = hole_reps.iter().chain(&q).collect();
        let b_tilde = (p..self.chain.depth())
            .find(|&b| {
                let l = &self.chain.levels[b];
                all.iter().map(|w| l.coset(w)).collect::<HashSet<_>>().len() == all.len()
            })
            .expect("the deepest level separates by construction");

        let sizes: Vec<u128> = regions.iter().map(|r| r.len() as u128).collect();
        let mut steps = Vec::with_capacity(a_p);
        let (mut prev, mut a_prev, mut prefix) = (p, a_p as u128, b_tilde);
        let mut kj: u128 = 1;
        for j in 1..=a_p {
            kj *= k;
            let first = (j == 1) as u128;
            let colored = kj * sizes[j - 1] + first;
            let forced: u128 = kj * sizes[j..].iter().sum::<u128>();
            let min_t = k + first;
            let found = self.cand.iter().copied().find(|&l| {
                if l <= prev || l <= prefix {
                    return false;
                }
                let idx = self.chain.index(l) as u128;
                let t = idx / self.chain.index(prefix) as u128;
                let ratio = idx / self.chain.index(prev) as u128;
                let a_l = self.a_of[&l] as u128;
                t >= min_t && forced <= a_l && colored + a_l <= a_prev * ratio
            });
            match found {
                Some(l) => {
                    steps.push((l, prefix));
                    a_prev = self.a_of[&l] as u128;
                    prev = l;
                    prefix = l;
                }
                None => {
                    return Ok(Err(format!(
                        "no chain level after level {} can host step {j} of {a_p} from level {}",
                        prefix + 1,
                        p + 1
                    )))
                }
            }
        }
        Ok(Ok(Plan { g, hole_reps, q, regions, b_tilde, steps }))
    }

    fn run(&mut self, plan: Plan, stage: usize) -> Result<StageLog> {
        let chain = self.chain;
        let group = &chain.group;
        let beta = self.levels.last().unwrap().level;
        let k = self.k;
        let a = plan.regions.len();
        let internal = |what: String| Error::Internal(format!("stage {stage}: {what}"));
        let mut prefixes: Vec<(Vec<u8>, Word)> = vec![(Vec::new(), Word::identity())];
        let mut steps = Vec::with_capacity(a);

        for (j0, &(l, prefix_level)) in plan.steps.iter().enumerate() {
            let j = j0 + 1;
            let lvl = &chain.levels[l];
            let dom = &self.domains[l];
            let mut colors = self.lift(l);
            let mut order: Vec<usize> = (0..dom.len()).collect();
            order.sort_by(|&x, &y| group.shortlex_cmp(&dom.words[x], &dom.words[y]));
            let pre = &chain.levels[prefix_level];
            let transversal: Vec<Word> =
                order.iter().map(|&i| &dom.words[i]).filter(|w| pre.in_kernel(w)).cloned().collect();
            let g_coset = lvl.coset(&plan.g);

            let mut touched: HashSet<usize> = HashSet::new();
            let mut forced: HashSet<usize> = HashSet::new();
            let mut next = Vec::with_capacity(prefixes.len() * k);
            let mut chosen_all = Vec::with_capacity(prefixes.len());
            for (gamma, p) in &prefixes {
                let chosen: Vec<Word> = transversal
                    .iter()
                    .filter(|t| {
                        j > 1 || plan.regions[0].iter().all(|y| lvl.coset(&group.mul_all([*t, p, y])) != g_coset)
                    })
                    .take(k)
                    .cloned()
                    .collect();
                if chosen.len() < k {
                    return Err(internal(format!("step {j}: only {} usable elements in the transversal", chosen.len())));
                }
                for (c, t) in chosen.iter().enumerate() {
                    let np = group.mul(t, p);
                    let mut seen_here: HashSet<usize> = HashSet::new();
                    for y in &plan.regions[j0] {
                        let cos = lvl.coset(&group.mul(&np, y));
                        if colors[cos] != HOLE && !seen_here.contains(&cos) {
                            return Err(internal(format!("step {j}: target coset {cos} is already colored")));
                        }
                        if seen_here.insert(cos) && !touched.insert(cos) {
                            return Err(internal(format!("step {j}: target coset {cos} hit twice")));
                        }
                        colors[cos] = c as u8;
                    }
                    for region in &plan.regions[j..] {
                        for y in region {
                            let cos = lvl.coset(&group.mul(&np, y));
                            if colors[cos] != HOLE || touched.contains(&cos) {
                                return Err(internal(format!("step {j}: reserved coset {cos} collides")));
                            }
                            forced.insert(cos);
                        }
                    }
                    let mut g2 = gamma.clone();
                    g2.push(c as u8);
                    next.push((g2, np));
                }
                chosen_all.push(chosen);
            }
            let padding_color = (j % k) as u8;
            if j == 1 {
                if colors[g_coset] != HOLE || forced.contains(&g_coset) {
                    return Err(internal("the least undetermined element was covered".into()));
                }
                colors[g_coset] = padding_color;
            }
            let a_l = self.a_of[&l];
            let mut holes = colors.iter().filter(|&&c| c == HOLE).count();
            let mut padded = Vec::new();
            for &c in &dom.shortlex_cosets {
                if holes <= a_l {
                    break;
                }
                if colors[c] == HOLE && !forced.contains(&c) {
                    colors[c] = padding_color;
                    padded.push(c);
                    holes -= 1;
                }
            }
            if holes != a_l {
                return Err(internal(format!("step {j}: {holes} holes remain, {a_l} scheduled")));
            }
            self.levels.push(TowerLevel { level: l, index: lvl.size, holes_scheduled: a_l, colors });
            steps.push(StepLog { step: j, level: l, prefix_level, transversal, chosen: chosen_all, padding_color, padded });
            prefixes = next;
        }

        let top = self.levels.last().unwrap();
        let lvl = &chain.levels[top.level];
        for (gamma, w) in &prefixes {
            for (j, region) in plan.regions.iter().enumerate() {
                for y in region {
                    if top.colors[lvl.coset(&group.mul(w, y))] != gamma[j] {
                        return Err(internal("a marker does not read back its color word".into()));
                    }
                }
            }
        }
        Ok(StageLog {
            stage,
            beta,
            b_tilde: plan.b_tilde,
            g: plan.g,
            hole_reps: plan.hole_reps,
            q: plan.q,
            regions: plan.regions,
            steps,
            markers: prefixes,
        })
    }

    /// Colors one undetermined element per remaining usable level, then pads with 0.
    fn tail(&mut self) -> Result<Vec<TailStep>> {
        let mut out = Vec::new();
        for l in self.cand.clone() {
            let top = self.levels.last().unwrap();
            if l <= top.level {
                continue;
            }
            let a_l = self.a_of[&l];
            let ratio = self.chain.index(l) / top.index;
            if a_l >= top.holes_scheduled * ratio {
                continue;
            }
            let g = self.least_hole_element()?;
            let lvl = &self.chain.levels[l];
            let mut colors = self.lift(l);
            colors[lvl.coset(&g)] = 0;
            let mut holes = colors.iter().filter(|&&c| c == HOLE).count();
            let mut padded = 0;
            for &c in &self.domains[l].shortlex_cosets {
                if holes <= a_l {
                    break;
                }
                if colors[c] == HOLE {
                    colors[c] = 0;
                    padded += 1;
                    holes -= 1;
                }
            }
            self.levels.push(TowerLevel { level: l, index: lvl.size, holes_scheduled: a_l, colors });
            out.push(TailStep { level: l, element: g, padded });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{build_domains, GroupPresentation};
    use crate::toeplitz::{schedule, Kappa};

    fn build(chain: &QuotientChain, kappa: Kappa, k: usize) -> ToeplitzTower {
        let d = build_domains(chain, DomainBudget::default()).unwrap();
        let s = schedule(kappa, k, chain).unwrap();
        build_krieger(chain, &d, &s, DomainBudget::default()).unwrap()
    }

    fn step_levels(t: &ToeplitzTower) -> Vec<Vec<usize>> {
        t.log.stages.iter().map(|s| s.steps.iter().map(|x| x.level + 1).collect()).collect()
    }

    #[test]
    fn half_on_integers() {
        let ch = QuotientChain::dyadic(10).unwrap();
        let t = build(&ch, Kappa::new(1, 2).unwrap(), 2);
        assert!(t.check(&ch).is_empty(), "{:?}", t.check(&ch));
        assert_eq!(step_levels(&t), [vec![4, 8]]);
        let s = &t.log.stages[0];
        assert_eq!((s.beta, s.b_tilde), (0, 1));
        assert_eq!(s.markers.len(), 4);
        assert!(!t.is_complete());
        assert_eq!(t.deepest().level, 9);
    }

    #[test]
    fn two_thirds_on_integers() {
        let ch = QuotientChain::dyadic(10).unwrap();
        let t = build(&ch, Kappa::new(2, 3).unwrap(), 2);
        assert!(t.check(&ch).is_empty());
        assert_eq!(step_levels(&t), [vec![4, 10]]);
    }

    #[test]
    fn zero_on_integers() {
        let ch = QuotientChain::dyadic(14).unwrap();
        let t = build(&ch, Kappa::zero(), 2);
        assert!(t.check(&ch).is_empty());
        let betas: Vec<usize> = t.log.stages.iter().map(|s| s.beta + 1).collect();
        assert_eq!(betas, [1, 4, 7]);
        assert_eq!(step_levels(&t), [[4], [7], [11]]);
        assert_eq!(t.log.tail.iter().map(|s| s.level + 1).collect::<Vec<_>>(), [12, 13, 14]);
        let window: Vec<Word> = (-200..=200).map(|n| Word::power(0, n)).collect();
        assert!(t.coverage(&ch, &window) > 0.99);
    }

    #[test]
    fn markers_read_back() {
        let ch = QuotientChain::dyadic(10).unwrap();
        let t = build(&ch, Kappa::new(1, 2).unwrap(), 2);
        let g = &ch.group;
        for s in &t.log.stages {
            for (gamma, w) in &s.markers {
                for (j, region) in s.regions.iter().enumerate() {
                    for y in region {
                        assert_eq!(t.eval(&ch, &g.mul(w, y)), Some(gamma[j]));
                    }
                }
            }
        }
    }

    #[test]
    fn free_group_torus_chain() {
        let g = GroupPresentation::free(2);
        let ch = QuotientChain::torus(g, &[2, 4, 8]).unwrap();
        let t = build(&ch, Kappa::zero(), 2);
        assert!(t.check(&ch).is_empty());
        assert_eq!(t.log.stages.len(), 1);
        assert_eq!(t.log.stages[0].markers.len(), 2);
        let two = QuotientChain::torus(GroupPresentation::free(2), &[2, 4]).unwrap();
        let t2 = build(&two, Kappa::zero(), 2);
        assert!(t2.check(&two).is_empty());
        assert!(t2.log.stages.is_empty() && !t2.is_complete());
        assert_eq!(t2.levels.len(), 2);
    }

    #[test]
    fn three_letters() {
        let ch = QuotientChain::cyclic(&[3, 9, 27, 81, 243, 729]).unwrap();
        let t = build(&ch, Kappa::new(1, 3).unwrap(), 3);
        assert!(t.check(&ch).is_empty(), "{:?}", t.check(&ch));
    }
}
