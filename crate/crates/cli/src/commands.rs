//! The five subcommands. Each writes its artifacts plus
//! `manifest.<command>.json` into the output directory and reports whether all checks passed.

use crate::config::{self, LoadedConfig, SCHEMA_VERSION};
use crate::output::{to_json, Run, Sci};
use crate::tower_doc::TowerDoc;
use crate::CliError;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::PathBuf;
use toeplitz_lab::entropy::{bound_chain_check, bracket_of, entropy_report, microstate_log, BoundCheck, EntropyReport};
use toeplitz_lab::group::{build_domains, ChainReport, GroupPresentation, QuotientChain, Word};
use toeplitz_lab::shift::{count_separated, FiniteSubshift, Mode};
use toeplitz_lab::sofic::{coset_sofic, orbit_decompose, soficity_report};
use toeplitz_lab::toeplitz::{build_krieger, schedule, HoleSchedule, ToeplitzTower};

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub exact_threshold: usize,
    pub depth: Option<usize>,
    pub tower: Option<PathBuf>,
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub pass: bool,
    pub summary: String,
}

fn start(opts: &Options, command: &str) -> Result<(LoadedConfig, Run), CliError> {
    let cfg = config::load(&opts.config)?;
    let dir = opts
        .out
        .clone()
        .or_else(|| cfg.config.output.as_ref().map(|o| cfg.dir.join(&o.dir)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let run = Run::new(&dir, command, &cfg.bytes)?;
    Ok((cfg, run))
}

fn words(g: &GroupPresentation, ws: &[Word]) -> Vec<String> {
    ws.iter().map(|w| g.format_word(w)).collect()
}

#[derive(Serialize)]
struct DomainSummary {
    level: usize,
    size: usize,
    max_word_length: u64,
}

#[derive(Serialize)]
struct ChainDoc {
    schema_version: u32,
    command: &'static str,
    group: GroupPresentation,
    indices: Vec<usize>,
    #[serde(flatten)]
    report: ChainReport,
    domains: Vec<DomainSummary>,
    domain_error: Option<String>,
    pass: bool,
}

pub fn chain_validate(opts: &Options) -> Result<Outcome, CliError> {
    let (cfg, mut run) = start(opts, "chain-validate")?;
    let chain = run.timed("chain", || cfg.chain(opts.depth))?;
    let report = run.timed("validate", || chain.validate());
    let mut domains = Vec::new();
    let mut domain_error = None;
    if report.all_pass() {
        match run.timed("domains", || build_domains(&chain, cfg.budget())) {
            Ok(ds) => {
                domains = ds
                    .iter()
                    .map(|d| DomainSummary {
                        level: d.level + 1,
                        size: d.len(),
                        max_word_length: d.words.iter().map(Word::len).max().unwrap_or(0),
                    })
                    .collect()
            }
            Err(e) => domain_error = Some(e.to_string()),
        }
    }
    let pass = report.all_pass() && domain_error.is_none();
    let summary = match (report.first_failure(), &domain_error) {
        (Some(why), _) => format!("chain fails validation: {why}"),
        (None, Some(e)) => format!("fundamental domains failed: {e}"),
        (None, None) => format!("chain valid: {} levels, indices {:?}", chain.depth(), indices(&chain)),
    };
    let doc = ChainDoc {
        schema_version: SCHEMA_VERSION,
        command: "chain-validate",
        group: chain.group.clone(),
        indices: indices(&chain),
        report,
        domains,
        domain_error,
        pass,
    };
    run.write("chain_report.json", &to_json(&doc)?)?;
    run.finish()?;
    Ok(Outcome { pass, summary })
}

fn indices(chain: &QuotientChain) -> Vec<usize> {
    (0..chain.depth()).map(|n| chain.index(n)).collect()
}

fn valid_chain(cfg: &LoadedConfig, run: &mut Run, depth: Option<usize>) -> Result<QuotientChain, CliError> {
    let chain = run.timed("chain", || cfg.chain(depth))?;
    if let Some(why) = chain.validate().first_failure() {
        return Err(CliError::domain(format!("chain fails validation: {why}")));
    }
    Ok(chain)
}

#[derive(Serialize)]
struct PairDoc {
    s: String,
    t: String,
    s1_points: usize,
    s1_fraction: Sci,
    s2_points: Option<usize>,
    s2_fraction: Option<Sci>,
}

#[derive(Serialize)]
struct SoficLevelDoc {
    level: usize,
    size: usize,
    /// Number of orbits `f_n`.
    orbits: usize,
    stabilizer_indices: Vec<usize>,
    min_s1: Sci,
    min_s2: Option<Sci>,
    pairs: Vec<PairDoc>,
}

#[derive(Serialize)]
struct SoficDoc {
    schema_version: u32,
    command: &'static str,
    window: Vec<String>,
    levels: Vec<SoficLevelDoc>,
}

pub fn sofic_report(opts: &Options) -> Result<Outcome, CliError> {
    let (cfg, mut run) = start(opts, "sofic-report")?;
    let chain = valid_chain(&cfg, &mut run, opts.depth)?;
    let g = &chain.group;
    let f = cfg.probe_window(g)?;
    let names = words(g, &f);
    let approx = coset_sofic(&chain);
    let mut levels = Vec::new();
    let mut csv = String::from("level,size,s,t,s1_points,s1_fraction,s2_points,s2_fraction\n");
    for (n, level) in approx.levels.iter().enumerate() {
        let (rep, dec) = run.timed(&format!("level {}", n + 1), || -> Result<_, CliError> {
            Ok((soficity_report(level, &f)?, orbit_decompose(level)?))
        })?;
        let mut pairs = Vec::with_capacity(rep.entries.len());
        for e in &rep.entries {
            let s2 = e.freeness().map(Sci);
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                n + 1,
                e.size,
                names[e.s],
                names[e.t],
                e.multiplicative_points,
                Sci(e.multiplicativity()).text(),
                e.free_points.map(|x| x.to_string()).unwrap_or_default(),
                s2.map(Sci::text).unwrap_or_default()
            );
            pairs.push(PairDoc {
                s: names[e.s].clone(),
                t: names[e.t].clone(),
                s1_points: e.multiplicative_points,
                s1_fraction: Sci(e.multiplicativity()),
                s2_points: e.free_points,
                s2_fraction: s2,
            });
        }
        let min_s1 = rep.entries.iter().map(|e| e.multiplicativity()).fold(1.0, f64::min);
        let min_s2 = rep.entries.iter().filter_map(|e| e.freeness()).reduce(f64::min);
        levels.push(SoficLevelDoc {
            level: n + 1,
            size: level.size,
            orbits: dec.copies(),
            stabilizer_indices: (0..dec.copies()).map(|i| dec.stabilizer_index(i)).collect(),
            min_s1: Sci(min_s1),
            min_s2: min_s2.map(Sci),
            pairs,
        });
    }
    let last = levels.last().map(|l| (l.min_s1.text(), l.min_s2.map(Sci::text).unwrap_or_else(|| "n/a".into())));
    let doc = SoficDoc { schema_version: SCHEMA_VERSION, command: "sofic-report", window: names, levels };
    run.write("sofic_report.json", &to_json(&doc)?)?;
    run.write("sofic_report.csv", &csv)?;
    run.finish()?;
    let (s1, s2) = last.unwrap_or_default();
    Ok(Outcome { pass: true, summary: format!("{} levels; deepest level min S1 {s1}, min S2 {s2}", chain.depth()) })
}

fn construction_log(tower: &ToeplitzTower, sched: &HoleSchedule) -> String {
    let g = &tower.group;
    let mut out = String::new();
    let _ = writeln!(out, "k = {}, kappa = {}", tower.k, tower.kappa);
    let _ = writeln!(out, "schedule (level: holes / index):");
    for e in &sched.entries {
        let _ = writeln!(out, "  {}: {} / {}", e.level + 1, e.holes, e.index);
    }
    if !sched.dropped.is_empty() {
        let dropped: Vec<String> = sched.dropped.iter().map(|l| (l + 1).to_string()).collect();
        let _ = writeln!(out, "  dropped levels: {}", dropped.join(", "));
    }
    let _ = writeln!(out, "initial level {}", tower.log.initial_level + 1);
    for s in &tower.log.stages {
        let _ = writeln!(
            out,
            "stage {}: beta {}, m {}, b_tilde {}, |W| {}, |Q| {}, g = {}, markers {}",
            s.stage,
            s.beta + 1,
            s.b_tilde - s.beta,
            s.b_tilde + 1,
            s.hole_reps.len(),
            s.q.len(),
            g.format_word(&s.g),
            s.markers.len()
        );
        let _ = writeln!(out, "  W = [{}]", words(g, &s.hole_reps).join(", "));
        let _ = writeln!(out, "  Q = [{}]", words(g, &s.q).join(", "));
        for st in &s.steps {
            let _ = writeln!(
                out,
                "  step {}: level {} over level {}, padding color {}, {} padded",
                st.step,
                st.level + 1,
                st.prefix_level + 1,
                st.padding_color,
                st.padded.len()
            );
        }
        for (gamma, w) in &s.markers {
            let gamma: String = gamma.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "  marker {gamma}: {}", g.format_word(w));
        }
    }
    for t in &tower.log.tail {
        let _ = writeln!(out, "tail: level {}, element {}, {} padded", t.level + 1, g.format_word(&t.element), t.padded);
    }
    if let Some(why) = &tower.log.stopped {
        let _ = writeln!(out, "staged construction stopped: {why}");
    }
    out
}

pub fn toeplitz_build(opts: &Options) -> Result<Outcome, CliError> {
    let (cfg, mut run) = start(opts, "toeplitz-build")?;
    let kappa = cfg.kappa()?;
    let chain = valid_chain(&cfg, &mut run, opts.depth)?;
    let sched = run.timed("schedule", || schedule(kappa, cfg.config.k, &chain))?;
    let domains = run.timed("domains", || build_domains(&chain, cfg.budget()))?;
    let tower = run.timed("build", || build_krieger(&chain, &domains, &sched, cfg.budget()))?;
    let issues = tower.check(&chain);
    if let Some(i) = issues.first() {
        return Err(CliError::Internal(format!("built tower fails its own check at level {}: {}", i.level, i.reason)));
    }
    let doc = TowerDoc::from_tower(&tower)?;
    run.write("tower.json", &doc.to_json())?;
    run.write("construction_log.txt", &construction_log(&tower, &sched))?;
    run.finish()?;
    let stages = tower.log.stages.len();
    let note = tower.log.stopped.as_deref().map(|s| format!("; staged construction stopped ({s})")).unwrap_or_default();
    Ok(Outcome {
        pass: true,
        summary: format!("tower with {} levels, {stages} stages, kappa {kappa}{note}", tower.levels.len()),
    })
}

#[derive(Serialize)]
struct RowDoc {
    level: usize,
    index: usize,
    holes: usize,
    scheduled: usize,
    translates: usize,
    hole_expanded: String,
    word_entropy: Sci,
    product_bound: Sci,
    hole_density_bound: Sci,
    lower_count: Option<String>,
    lower_log: Option<Sci>,
    lower_verified: Option<bool>,
    bracket: bool,
}

#[derive(Serialize)]
struct SummaryLevel {
    level: usize,
    /// `[(a−1)/idx, a/idx)` for the scheduled `a`.
    bracket_low: String,
    bracket_high: String,
    bracket_holds: bool,
    #[serde(flatten)]
    checks: BoundCheck,
    pass: bool,
}

#[derive(Serialize)]
struct EntropyDoc {
    schema_version: u32,
    command: &'static str,
    k: usize,
    kappa: String,
    unit: &'static str,
    rows: Vec<RowDoc>,
    summary: Vec<SummaryLevel>,
    all_pass: bool,
}

fn entropy_doc(report: &EntropyReport, tower: &ToeplitzTower, checks: Vec<BoundCheck>) -> EntropyDoc {
    let rows = report
        .rows
        .iter()
        .map(|r| RowDoc {
            level: r.level,
            index: r.index,
            holes: r.holes,
            scheduled: r.scheduled,
            translates: r.translates,
            hole_expanded: r.hole_expanded.clone(),
            word_entropy: Sci(r.word_entropy),
            product_bound: Sci(r.product_bound),
            hole_density_bound: Sci(r.hole_density_bound),
            lower_count: r.lower_count.clone(),
            lower_log: r.lower_log.map(Sci),
            lower_verified: r.lower_verified,
            bracket: r.bracket,
        })
        .collect();
    let summary: Vec<SummaryLevel> = checks
        .into_iter()
        .zip(&report.rows)
        .map(|(c, r)| {
            let (lo, hi, idx) = bracket_of(&tower.kappa, r.index);
            SummaryLevel {
                level: r.level,
                bracket_low: format!("{lo}/{idx}"),
                bracket_high: format!("{hi}/{idx}"),
                bracket_holds: r.bracket,
                pass: c.passes(),
                checks: c,
            }
        })
        .collect();
    let all_pass = summary.iter().all(|s| s.pass);
    EntropyDoc {
        schema_version: SCHEMA_VERSION,
        command: "entropy-report",
        k: report.k,
        kappa: report.kappa.clone(),
        unit: report.unit,
        rows,
        summary,
        all_pass,
    }
}

pub fn entropy_cmd(opts: &Options) -> Result<Outcome, CliError> {
    let path = opts.tower.as_ref().ok_or_else(|| CliError::domain("entropy-report needs --tower PATH"))?;
    let (cfg, mut run) = start(opts, "entropy-report")?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::domain(format!("cannot read tower {}: {e}", path.display())))?;
    let tower = TowerDoc::parse(&text)?.to_tower()?;
    let chain = valid_chain(&cfg, &mut run, opts.depth)?;
    if tower.group != chain.group {
        return Err(CliError::domain("tower/chain mismatch: tower was built over a different group presentation"));
    }
    if tower.k != cfg.config.k {
        return Err(CliError::domain(format!("tower/chain mismatch: tower has k = {}, config has k = {}", tower.k, cfg.config.k)));
    }
    if cfg.config.kappa.is_some() && cfg.kappa()? != tower.kappa {
        return Err(CliError::domain(format!("tower/chain mismatch: tower has kappa {}, config has {}", tower.kappa, cfg.kappa()?)));
    }
    let issues = tower.check(&chain);
    if !issues.is_empty() {
        let list: Vec<String> = issues.iter().map(|i| format!("level {}: {}", i.level, i.reason)).collect();
        return Err(CliError::domain(format!("tower fails structural checks: {}", list.join("; "))));
    }
    let domains = run.timed("domains", || build_domains(&chain, cfg.budget()))?;
    let report = run.timed("report", || entropy_report(&tower, &chain, &domains))?;
    let checks = bound_chain_check(&report);
    let doc = entropy_doc(&report, &tower, checks);
    let failing: Vec<String> = doc.summary.iter().filter(|s| !s.pass).map(|s| s.level.to_string()).collect();
    run.write("entropy_report.json", &to_json(&doc)?)?;
    run.write("entropy_report.csv", &report.to_csv())?;
    run.finish()?;
    let summary = if failing.is_empty() {
        format!("{} levels, all bound checks pass", doc.rows.len())
    } else {
        format!("bound checks fail at levels {}", failing.join(", "))
    };
    Ok(Outcome { pass: failing.is_empty(), summary })
}

#[derive(Serialize)]
struct MicroRow {
    level: usize,
    points: usize,
    delta: Sci,
    count: u64,
    total: String,
    log_per_point: Sci,
    epsilon: Option<Sci>,
    /// Maximum ε-separated family of zero-defect pseudoorbits (δ = 0 rows).
    n_eps: Option<usize>,
    n_eps_exact: Option<bool>,
}

#[derive(Serialize)]
struct MicroDoc {
    schema_version: u32,
    command: &'static str,
    k: usize,
    window: Vec<String>,
    subshift_size: usize,
    rows: Vec<MicroRow>,
}

/// Exhaustive enumeration budget, in bits of `k^|V|`.
const MICROSTATE_BITS: f64 = 28.0;

pub fn microstates(opts: &Options) -> Result<Outcome, CliError> {
    let (cfg, mut run) = start(opts, "microstates")?;
    let desc = cfg.config.subshift.clone().ok_or_else(|| CliError::domain("microstates needs a `subshift` section"))?;
    let chain = valid_chain(&cfg, &mut run, opts.depth)?;
    let g = &chain.group;
    let level_of = |n: usize, what: &str| {
        n.checked_sub(1)
            .filter(|&i| i < chain.depth())
            .ok_or_else(|| CliError::domain(format!("subshift {what} {n} outside chain levels 1..={}", chain.depth())))
    };
    let q = level_of(desc.quotient_level, "quotient_level")?;
    let k = cfg.config.k;
    let sub = FiniteSubshift::from_seeds(g.clone(), chain.levels[q].clone(), k, &desc.seeds)?;
    let f = cfg.probe_window(g)?;
    let mut window = f.clone();
    for s in &f {
        let si = g.inverse(s);
        if !window.contains(&si) {
            window.push(si);
        }
    }
    if !window.iter().any(Word::is_identity) {
        window.push(Word::identity());
    }
    let u = sub.pattern_set(&f);
    let deltas = if cfg.config.probe.delta.is_empty() { vec![0.0] } else { cfg.config.probe.delta.clone() };
    let epsilons = if cfg.config.probe.epsilon.is_empty() { vec![0.5] } else { cfg.config.probe.epsilon.clone() };
    if let Some(d) = deltas.iter().find(|d| !(0.0..=1.0).contains(*d)) {
        return Err(CliError::domain(format!("delta {d} outside [0, 1]")));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(CliError::domain(format!("epsilon {e} outside (0, 1]")));
    }
    let approx = coset_sofic(&chain);
    let mut rows = Vec::new();
    let mut csv = String::from("level,points,delta,count,total,log_per_point,epsilon,n_eps,n_eps_exact\n");
    let mut zero_matches = Vec::new();
    for &n in &desc.levels {
        let li = level_of(n, "level")?;
        let level = &approx.levels[li];
        let too_large = |e: toeplitz_lab::Error| match e {
            toeplitz_lab::Error::TooLarge(m) => {
                CliError::domain(format!("level {n}: {m}; use a smaller level or alphabet"))
            }
            e => e.into(),
        };
        for &delta in &deltas {
            let log = run.timed(&format!("count level {n} delta {delta}"), || microstate_log(level, k, delta, &u, MICROSTATE_BITS))
                .map_err(too_large)?;
            let separated: Vec<(f64, Option<(usize, bool)>)> = if delta == 0.0 {
                let maps = sub.zero_defect_pseudoorbits(level, &f, &window, 1 << 16).map_err(too_large)?;
                epsilons
                    .iter()
                    .map(|&eps| {
                        let sep = count_separated(&maps, eps, Mode::Dinf, opts.exact_threshold)?;
                        Ok((eps, Some((sep.count, sep.exact))))
                    })
                    .collect::<Result<_, toeplitz_lab::Error>>()?
            } else {
                vec![(f64::NAN, None)]
            };
            for (eps, nsep) in separated {
                if let Some((c, _)) = nsep {
                    zero_matches.push(c as u64 == log.count);
                }
                let row = MicroRow {
                    level: n,
                    points: log.points,
                    delta: Sci(delta),
                    count: log.count,
                    total: log.total.clone(),
                    log_per_point: Sci(log.log_per_point),
                    epsilon: nsep.map(|_| Sci(eps)),
                    n_eps: nsep.map(|(c, _)| c),
                    n_eps_exact: nsep.map(|(_, x)| x),
                };
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{},{},{},{},{}",
                    row.level,
                    row.points,
                    row.delta.text(),
                    row.count,
                    row.total,
                    row.log_per_point.text(),
                    row.epsilon.map(Sci::text).unwrap_or_default(),
                    row.n_eps.map(|x| x.to_string()).unwrap_or_default(),
                    row.n_eps_exact.map(|x| x.to_string()).unwrap_or_default()
                );
                rows.push(row);
            }
        }
    }
    let doc = MicroDoc {
        schema_version: SCHEMA_VERSION,
        command: "microstates",
        k,
        window: words(g, &f),
        subshift_size: sub.configs.len(),
        rows,
    };
    run.write("microstates.json", &to_json(&doc)?)?;
    run.write("microstates.csv", &csv)?;
    run.finish()?;
    let matched = zero_matches.iter().filter(|&&m| m).count();
    Ok(Outcome {
        pass: true,
        summary: format!("{} rows; |Omega| equals N_eps on {matched} of {} delta = 0 rows", doc.rows.len(), zero_matches.len()),
    })
}
