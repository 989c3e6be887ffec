//! Experiment configuration and chain description documents.
//!
//! A config is a JSON object:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "chain": { "builtin": "dyadic", "depth": 10 },
//!   "k": 2,
//!   "kappa": "1/2",
//!   "depth": { "max_levels": 12, "max_index": 16384 },
//!   "probe": { "f": ["a^-1", "e", "a"], "delta": [0.0], "epsilon": [0.5] },
//!   "subshift": { "quotient_level": 1, "seeds": [[0, 1]], "levels": [2] },
//!   "budget": { "max_word_len": 65536, "max_elements": 4194304 },
//!   "output": { "dir": "out" },
//!   "verbosity": 0
//! }
//! ```
//!
//! `chain` takes one of three forms:
//! - builtin: `{"builtin": "cyclic", "moduli": [2, 4, 8]}`, `{"builtin":
//!   "dyadic", "depth": n}`, or `{"builtin": "torus", "group": {...},
//!   "moduli": [2, 4]}`;
//! - file: `{"file": "path.json"}`, resolved against the config's directory
//!   and holding an inline description;
//! - inline: `{"group": {"kind": "free" | "free-abelian", "generators":
//!   ["a", "b"]}, "levels": [{"generators": [[1, 0], [0, 1]], "identity": 0},
//!   ...], "refinements": [[...], ...]}` where `generators[i]` is the 0-based
//!   image array of generator `i` acting on the right and `refinements[n]`
//!   maps points of level `n + 2` to points of level `n + 1`.

use crate::CliError;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use toeplitz_lab::group::{ChainLevel, GroupPresentation, QuotientChain, Word};
use toeplitz_lab::perm::Perm;
use toeplitz_lab::toeplitz::Kappa;
use toeplitz_lab::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub chain: ChainDesc,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub kappa: Option<String>,
    #[serde(default)]
    pub depth: DepthLimits,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub subshift: Option<SubshiftConfig>,
    #[serde(default)]
    pub budget: Option<BudgetConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
    #[serde(default)]
    pub verbosity: u8,
}

fn default_k() -> usize {
    2
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainDesc {
    pub builtin: Option<String>,
    pub moduli: Option<Vec<usize>>,
    pub depth: Option<usize>,
    pub file: Option<PathBuf>,
    pub group: Option<GroupPresentation>,
    pub levels: Option<Vec<LevelDesc>>,
    pub refinements: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelDesc {
    pub generators: Vec<Vec<u32>>,
    #[serde(default)]
    pub identity: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthLimits {
    pub max_levels: Option<usize>,
    pub max_index: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub f: Option<Vec<String>>,
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub epsilon: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubshiftConfig {
    /// 1-based chain level whose quotient carries the periodic seeds.
    pub quotient_level: usize,
    pub seeds: Vec<Vec<u8>>,
    /// 1-based chain levels used as sofic levels.
    pub levels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub max_word_len: usize,
    pub max_elements: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

/// A parsed config together with its raw bytes and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub bytes: Vec<u8>,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::domain(format!("cannot read config {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::domain(format!("config {}: {e}", path.display())))?;
    if config.schema_version != SCHEMA_VERSION {
        return Err(CliError::domain(format!(
            "config {}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
            path.display(),
            config.schema_version
        )));
    }
    if config.k < 2 {
        return Err(CliError::domain(format!("k must be at least 2, got {}", config.k)));
    }
    if config.depth.max_levels == Some(0) || config.depth.max_index == Some(0) {
        return Err(CliError::domain("depth limits must be positive"));
    }
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(LoadedConfig { config, bytes, dir })
}

impl LoadedConfig {
    /// The chain after applying depth limits; `depth_override` replaces
    /// `max_levels`.
    pub fn chain(&self, depth_override: Option<usize>) -> Result<QuotientChain, CliError> {
        let chain = resolve_chain(&self.config.chain, &self.dir)?;
        let limits = &self.config.depth;
        let max_levels = depth_override.or(limits.max_levels).unwrap_or(usize::MAX);
        if max_levels == 0 {
            return Err(CliError::domain("--depth must be positive"));
        }
        let max_index = limits.max_index.unwrap_or(usize::MAX);
        let keep: Vec<usize> =
            (0..chain.depth()).take_while(|&n| chain.index(n) <= max_index).take(max_levels).collect();
        if keep.is_empty() {
            return Err(CliError::domain(format!("no chain level has index at most {max_index}")));
        }
        if keep.len() == chain.depth() {
            return Ok(chain);
        }
        Ok(chain.subchain(&keep)?)
    }

    pub fn kappa(&self) -> Result<Kappa, CliError> {
        let text = self.config.kappa.as_deref().ok_or_else(|| CliError::domain("config has no kappa"))?;
        Ok(text.parse::<Kappa>()?)
    }

    /// Probe window `F`; defaults to `e` and every generator with its inverse.
    pub fn probe_window(&self, group: &GroupPresentation) -> Result<Vec<Word>, CliError> {
        match &self.config.probe.f {
            Some(list) => {
                if list.is_empty() {
                    return Err(CliError::domain("probe window f is empty"));
                }
                Ok(list.iter().map(|w| group.parse_word(w)).collect::<Result<_, _>>()?)
            }
            None => {
                let mut f = vec![Word::identity()];
                for s in group.letters() {
                    f.push(group.inverse(&s));
                    f.push(s);
                }
                Ok(f)
            }
        }
    }

    pub fn budget(&self) -> toeplitz_lab::group::DomainBudget {
        let mut b = toeplitz_lab::group::DomainBudget::default();
        if let Some(x) = self.config.budget {
            b.max_word_len = x.max_word_len;
            b.max_elements = x.max_elements;
        }
        b
    }
}

fn resolve_chain(desc: &ChainDesc, dir: &Path) -> Result<QuotientChain, CliError> {
    if let Some(file) = &desc.file {
        let path = dir.join(file);
        let bytes =
            std::fs::read(&path).map_err(|e| CliError::domain(format!("cannot read chain file {}: {e}", path.display())))?;
        let inner: ChainDesc = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::domain(format!("chain file {}: {e}", path.display())))?;
        if inner.file.is_some() {
            return Err(CliError::domain("chain files cannot reference other files"));
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return resolve_chain(&inner, &base);
    }
    if let Some(name) = &desc.builtin {
        return builtin(name, desc);
    }
    let (Some(group), Some(levels)) = (&desc.group, &desc.levels) else {
        return Err(CliError::domain("chain needs one of `builtin`, `file`, or inline `group` and `levels`"));
    };
    let group = GroupPresentation::new(group.kind, group.generators.clone())?;
    let mut built = Vec::with_capacity(levels.len());
    for (n, l) in levels.iter().enumerate() {
        let mut gens = Vec::with_capacity(l.generators.len());
        for (i, images) in l.generators.iter().enumerate() {
            let perm = Perm::from_images(images.clone()).map_err(|index| Error::NotABijection {
                level: n + 1,
                generator: group.generators.get(i).cloned().unwrap_or_else(|| format!("#{i}")),
                index,
            })?;
            gens.push(perm);
        }
        built.push(ChainLevel::new(gens, l.identity).map_err(|e| Error::InvalidLevel { level: n + 1, reason: e.to_string() })?);
    }
    let refinements = desc.refinements.clone().unwrap_or_default();
    Ok(QuotientChain::new(group, built, refinements)?)
}

fn builtin(name: &str, desc: &ChainDesc) -> Result<QuotientChain, CliError> {
    let moduli = || desc.moduli.clone().ok_or_else(|| CliError::domain(format!("builtin `{name}` needs `moduli`")));
    let chain = match name {
        "cyclic" => QuotientChain::cyclic(&moduli()?)?,
        "dyadic" => {
            let depth = desc.depth.ok_or_else(|| CliError::domain("builtin `dyadic` needs `depth`"))?;
            if depth == 0 || depth >= usize::BITS as usize - 1 {
                return Err(CliError::domain(format!("dyadic depth {depth} out of range")));
            }
            QuotientChain::dyadic(depth)?
        }
        "torus" => {
            let g = desc.group.as_ref().ok_or_else(|| CliError::domain("builtin `torus` needs `group`"))?;
            let group = GroupPresentation::new(g.kind, g.generators.clone())?;
            QuotientChain::torus(group, &moduli()?)?
        }
        other => return Err(CliError::domain(format!("unknown builtin chain `{other}` (cyclic, dyadic, torus)"))),
    };
    Ok(chain)
}
