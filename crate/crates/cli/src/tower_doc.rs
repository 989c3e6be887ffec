//! Tower documents: per-level color strings plus the construction log.
//!
//! Colors are one character per coset: letters `0-9a-z` (base 36) and `*`
//! for holes. Words are written in the group's generator names. Levels are
//! 1-based throughout the document.

use crate::CliError;
use serde::{Deserialize, Serialize};
use toeplitz_lab::group::{GroupPresentation, Word};
use toeplitz_lab::shift::HOLE;
use toeplitz_lab::toeplitz::{ConstructionLog, StageLog, StepLog, TailStep, ToeplitzTower, TowerLevel};

pub const TOWER_SCHEMA: u32 = 1;
const DIGITS: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TowerDoc {
    pub schema_version: u32,
    pub group: GroupPresentation,
    pub k: usize,
    pub kappa: String,
    pub levels: Vec<LevelDoc>,
    pub log: LogDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelDoc {
    pub level: usize,
    pub index: usize,
    pub holes_scheduled: usize,
    pub colors: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogDoc {
    pub initial_level: usize,
    pub stages: Vec<StageDoc>,
    pub tail: Vec<TailDoc>,
    pub stopped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageDoc {
    pub stage: usize,
    pub beta: usize,
    /// `b̃ − β`: how many levels deeper all of `W ∪ Q` separate.
    pub m: usize,
    pub b_tilde: usize,
    pub w_size: usize,
    pub q_size: usize,
    pub g: String,
    pub hole_reps: Vec<String>,
    pub q: Vec<String>,
    pub regions: Vec<Vec<String>>,
    pub steps: Vec<StepDoc>,
    pub markers: Vec<MarkerDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDoc {
    pub step: usize,
    pub level: usize,
    pub prefix_level: usize,
    pub transversal: Vec<String>,
    pub chosen: Vec<Vec<String>>,
    pub padding_color: u8,
    pub padded: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerDoc {
    pub gamma: String,
    pub word: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailDoc {
    pub level: usize,
    pub element: String,
    pub padded: usize,
}

fn encode_colors(colors: &[u8]) -> Result<String, CliError> {
    colors
        .iter()
        .map(|&c| match c {
            HOLE => Ok('*'),
            c if (c as usize) < DIGITS.len() => Ok(DIGITS[c as usize] as char),
            c => Err(CliError::domain(format!("letter {c} cannot be written (alphabets up to 36 letters)"))),
        })
        .collect()
}

fn decode_colors(text: &str, level: usize) -> Result<Vec<u8>, CliError> {
    text.chars()
        .enumerate()
        .map(|(i, ch)| match ch {
            '*' => Ok(HOLE),
            _ => ch
                .to_digit(36)
                .filter(|_| !ch.is_ascii_uppercase())
                .map(|d| d as u8)
                .ok_or_else(|| CliError::domain(format!("tower level {level}: bad color `{ch}` at coset {i}"))),
        })
        .collect()
}

fn words(g: &GroupPresentation, ws: &[Word]) -> Vec<String> {
    ws.iter().map(|w| g.format_word(w)).collect()
}

fn parse_words(g: &GroupPresentation, ws: &[String]) -> Result<Vec<Word>, CliError> {
    Ok(ws.iter().map(|w| g.parse_word(w)).collect::<Result<_, _>>()?)
}

impl TowerDoc {
    pub fn from_tower(t: &ToeplitzTower) -> Result<Self, CliError> {
        let g = &t.group;
        let levels = t
            .levels
            .iter()
            .map(|l| {
                Ok(LevelDoc {
                    level: l.level + 1,
                    index: l.index,
                    holes_scheduled: l.holes_scheduled,
                    colors: encode_colors(&l.colors)?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        let stages = t
            .log
            .stages
            .iter()
            .map(|s| {
                Ok(StageDoc {
                    stage: s.stage,
                    beta: s.beta + 1,
                    m: s.b_tilde - s.beta,
                    b_tilde: s.b_tilde + 1,
                    w_size: s.hole_reps.len(),
                    q_size: s.q.len(),
                    g: g.format_word(&s.g),
                    hole_reps: words(g, &s.hole_reps),
                    q: words(g, &s.q),
                    regions: s.regions.iter().map(|r| words(g, r)).collect(),
                    steps: s
                        .steps
                        .iter()
                        .map(|st| StepDoc {
                            step: st.step,
                            level: st.level + 1,
                            prefix_level: st.prefix_level + 1,
                            transversal: words(g, &st.transversal),
                            chosen: st.chosen.iter().map(|c| words(g, c)).collect(),
                            padding_color: st.padding_color,
                            padded: st.padded.clone(),
                        })
                        .collect(),
                    markers: s
                        .markers
                        .iter()
                        .map(|(gamma, w)| Ok(MarkerDoc { gamma: encode_colors(gamma)?, word: g.format_word(w) }))
                        .collect::<Result<_, CliError>>()?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        let tail = t
            .log
            .tail
            .iter()
            .map(|s| TailDoc { level: s.level + 1, element: g.format_word(&s.element), padded: s.padded })
            .collect();
        Ok(TowerDoc {
            schema_version: TOWER_SCHEMA,
            group: g.clone(),
            k: t.k,
            kappa: t.kappa.to_string(),
            levels,
            log: LogDoc { initial_level: t.log.initial_level + 1, stages, tail, stopped: t.log.stopped.clone() },
        })
    }

    pub fn to_tower(&self) -> Result<ToeplitzTower, CliError> {
        if self.schema_version != TOWER_SCHEMA {
            return Err(CliError::domain(format!("tower schema_version {} is not supported", self.schema_version)));
        }
        let g = GroupPresentation::new(self.group.kind, self.group.generators.clone())?;
        let zero_based = |n: usize, what: &str| {
            n.checked_sub(1).ok_or_else(|| CliError::domain(format!("tower {what} must be 1-based, got 0")))
        };
        let levels = self
            .levels
            .iter()
            .map(|l| {
                Ok(TowerLevel {
                    level: zero_based(l.level, "level")?,
                    index: l.index,
                    holes_scheduled: l.holes_scheduled,
                    colors: decode_colors(&l.colors, l.level)?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        let mut stages = Vec::with_capacity(self.log.stages.len());
        for s in &self.log.stages {
            let beta = zero_based(s.beta, "stage beta")?;
            let b_tilde = zero_based(s.b_tilde, "stage b_tilde")?;
            if b_tilde < beta || s.m != b_tilde - beta || s.w_size != s.hole_reps.len() || s.q_size != s.q.len() {
                return Err(CliError::domain(format!("tower stage {}: inconsistent summary fields", s.stage)));
            }
            let mut steps = Vec::with_capacity(s.steps.len());
            for st in &s.steps {
                steps.push(StepLog {
                    step: st.step,
                    level: zero_based(st.level, "step level")?,
                    prefix_level: zero_based(st.prefix_level, "step prefix_level")?,
                    transversal: parse_words(&g, &st.transversal)?,
                    chosen: st.chosen.iter().map(|c| parse_words(&g, c)).collect::<Result<_, _>>()?,
                    padding_color: st.padding_color,
                    padded: st.padded.clone(),
                });
            }
            let markers = s
                .markers
                .iter()
                .map(|m| Ok((decode_colors(&m.gamma, s.beta)?, g.parse_word(&m.word)?)))
                .collect::<Result<_, CliError>>()?;
            stages.push(StageLog {
                stage: s.stage,
                beta,
                b_tilde,
                g: g.parse_word(&s.g)?,
                hole_reps: parse_words(&g, &s.hole_reps)?,
                q: parse_words(&g, &s.q)?,
                regions: s.regions.iter().map(|r| parse_words(&g, r)).collect::<Result<_, _>>()?,
                steps,
                markers,
            });
        }
        let tail = self
            .log
            .tail
            .iter()
            .map(|s| {
                Ok(TailStep { level: zero_based(s.level, "tail level")?, element: g.parse_word(&s.element)?, padded: s.padded })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(ToeplitzTower {
            group: g,
            k: self.k,
            kappa: self.kappa.parse()?,
            levels,
            log: ConstructionLog {
                initial_level: zero_based(self.log.initial_level, "initial_level")?,
                stages,
                tail,
                stopped: self.log.stopped.clone(),
            },
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tower document serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::domain(format!("tower file: {e}")))
    }
}
