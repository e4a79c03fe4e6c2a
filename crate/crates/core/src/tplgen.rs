//! Template expansion into synthetic source/target pairs.
//!
//! ```text
//! name: nom-ine
//! src: (N Sg Nom) (N Sg Ine)
//! tgt: (N Case=Nom Number=Sing) (N Case=Ine Number=Sing)
//! ```
//!
//! A parenthesized source slot is filled with a random lemma of that POS
//! inflected by the generator; a bare word is a fixed surface. Each filled
//! surface is analyzed again, so the source side carries the full ambiguity
//! while the target side is the template's annotation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexmorph::{Analyzer, LexiconEntry};
use crate::seqcodec::{encode_source_with, encode_target, Cohort, Sentence, TokenSequence};
use crate::tagmap::UdAnnotation;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("template {template}: {slots} source slots but {targets} target annotations")]
    ArityMismatch {
        template: String,
        slots: usize,
        targets: usize,
    },
    #[error("template {template}: no {pos} lemma realizes slot {slot} after {attempts} draws")]
    ExhaustedAttempts {
        template: String,
        slot: String,
        pos: String,
        attempts: usize,
    },
    #[error("template {template}: lexicon has no {pos} entries")]
    SlotUnfillable { template: String, pos: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Slot {
    /// Tags start with the POS.
    Open {
        pos: String,
        tags: Vec<String>,
    },
    Fixed {
        surface: String,
    },
}

impl std::fmt::Display for Slot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Slot::Open { tags, .. } => write!(f, "({})", tags.join(" ")),
            Slot::Fixed { surface } => f.write_str(surface),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: String,
    pub slots: Vec<Slot>,
    pub target: Vec<UdAnnotation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionConfig {
    pub per_template: usize,
    pub seed: u64,
    pub max_attempts: usize,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            per_template: 20,
            seed: 1,
            max_attempts: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub sentence: Sentence,
    pub source: TokenSequence,
    pub target: TokenSequence,
}

/// Splits `(a b) c (d)` into groups; bare words are `(false, [word])`.
fn parse_groups(text: &str, line: usize) -> Result<Vec<(bool, Vec<String>)>, TemplateError> {
    let bad = |reason: &str| TemplateError::Parse {
        line,
        reason: reason.to_owned(),
    };
    let mut groups = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        if let Some(inner) = rest.strip_prefix('(') {
            let close = inner.find(')').ok_or_else(|| bad("unclosed `(`"))?;
            let words: Vec<String> = inner[..close]
                .split_whitespace()
                .map(str::to_owned)
                .collect();
            if words.is_empty() {
                return Err(bad("empty slot `()`"));
            }
            if words.iter().any(|w| w.contains('(')) {
                return Err(bad("nested `(`"));
            }
            groups.push((true, words));
            rest = inner[close + 1..].trim_start();
        } else {
            let end = rest
                .find(|c: char| c.is_whitespace() || c == '(')
                .unwrap_or(rest.len());
            let word = &rest[..end];
            if word.contains(')') {
                return Err(bad("unmatched `)`"));
            }
            groups.push((false, vec![word.to_owned()]));
            rest = rest[end..].trim_start();
        }
    }
    Ok(groups)
}

pub fn parse_templates(text: &str) -> Result<Vec<Template>, TemplateError> {
    let mut templates = Vec::new();
    let mut name: Option<String> = None;
    let mut pending: Option<(usize, Vec<Slot>)> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| TemplateError::Parse {
            line,
            reason: reason.to_owned(),
        };
        if let Some(n) = content.strip_prefix("name:") {
            if pending.is_some() {
                return Err(bad("`name:` between `src:` and `tgt:`"));
            }
            name = Some(n.trim().to_owned());
        } else if let Some(src) = content.strip_prefix("src:") {
            if pending.is_some() {
                return Err(bad("`src:` without a following `tgt:`"));
            }
            let slots = parse_groups(src, line)?
                .into_iter()
                .map(|(open, words)| {
                    if open {
                        Slot::Open {
                            pos: words[0].clone(),
                            tags: words,
                        }
                    } else {
                        Slot::Fixed {
                            surface: crate::lexmorph::nfc(&words[0]),
                        }
                    }
                })
                .collect();
            pending = Some((line, slots));
        } else if let Some(tgt) = content.strip_prefix("tgt:") {
            let (_, slots) = pending.take().ok_or_else(|| bad("`tgt:` without `src:`"))?;
            let mut target = Vec::new();
            for (open, words) in parse_groups(tgt, line)? {
                if !open {
                    return Err(bad("target annotations must be parenthesized"));
                }
                let (upos, feats) = words.split_first().expect("non-empty group");
                if upos.contains('=') {
                    return Err(bad("target annotation must start with its POS"));
                }
                if feats
                    .iter()
                    .any(|f| crate::tagmap::split_feature(f).is_none())
                {
                    return Err(bad("target features must be Key=Value"));
                }
                target.push(UdAnnotation::new(upos, feats.iter().cloned()));
            }
            let name = name
                .take()
                .unwrap_or_else(|| format!("template-{}", templates.len() + 1));
            if slots.len() != target.len() {
                return Err(TemplateError::ArityMismatch {
                    template: name,
                    slots: slots.len(),
                    targets: target.len(),
                });
            }
            templates.push(Template {
                name,
                slots,
                target,
            });
        } else {
            return Err(bad("expected `name:`, `src:` or `tgt:`"));
        }
    }
    if let Some((line, _)) = pending {
        return Err(TemplateError::Parse {
            line,
            reason: "`src:` without a following `tgt:`".into(),
        });
    }
    Ok(templates)
}

pub fn load_templates(path: &Path) -> Result<Vec<Template>, TemplateError> {
    let text = std::fs::read_to_string(path).map_err(|source| TemplateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_templates(&text)
}

/// Expands one template with its own RNG seeded from `cfg.seed`.
///
/// Lemmas are drawn with replacement across sentences but not reused for
/// two slots of the same POS within one sentence, unless the lexicon has
/// only one such lemma.
pub fn expand(
    template: &Template,
    lexicon: &[LexiconEntry],
    analyzer: &Analyzer,
    cfg: &ExpansionConfig,
    aliases: &BTreeMap<String, String>,
) -> Result<Vec<Expansion>, TemplateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut by_pos: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for entry in lexicon {
        by_pos
            .entry(entry.pos.as_str())
            .or_default()
            .push(entry.lemma.as_str());
    }
    for slot in &template.slots {
        if let Slot::Open { pos, .. } = slot {
            if !by_pos.contains_key(pos.as_str()) {
                return Err(TemplateError::SlotUnfillable {
                    template: template.name.clone(),
                    pos: pos.clone(),
                });
            }
        }
    }

    let target = encode_target(&template.target);
    let mut out = Vec::with_capacity(cfg.per_template);
    for _ in 0..cfg.per_template {
        let mut used: BTreeSet<(&str, &str)> = BTreeSet::new();
        let mut cohorts = Vec::with_capacity(template.slots.len());
        for slot in &template.slots {
            let surface = match slot {
                Slot::Fixed { surface } => surface.clone(),
                Slot::Open { pos, tags } => {
                    let all = &by_pos[pos.as_str()];
                    let fresh: Vec<&str> = all
                        .iter()
                        .copied()
                        .filter(|l| !used.contains(&(pos.as_str(), *l)))
                        .collect();
                    let pool = if fresh.is_empty() { all.clone() } else { fresh };
                    let mut realized = None;
                    for _ in 0..cfg.max_attempts {
                        let lemma = pool[rng.random_range(0..pool.len())];
                        if let Some(s) = analyzer.generate(lemma, tags) {
                            used.insert((pos.as_str(), lemma));
                            realized = Some(s);
                            break;
                        }
                    }
                    realized.ok_or_else(|| TemplateError::ExhaustedAttempts {
                        template: template.name.clone(),
                        slot: slot.to_string(),
                        pos: pos.clone(),
                        attempts: cfg.max_attempts,
                    })?
                }
            };
            let readings = analyzer.analyze(&surface);
            cohorts.push(Cohort::new(surface, readings));
        }
        let sentence = Sentence::new(cohorts);
        out.push(Expansion {
            source: encode_source_with(&sentence, aliases),
            target: target.clone(),
            sentence,
        });
    }
    Ok(out)
}

/// Expands all templates; template `i` uses sub-seed `seed ^ i`.
pub fn expand_all(
    templates: &[Template],
    lexicon: &[LexiconEntry],
    analyzer: &Analyzer,
    cfg: &ExpansionConfig,
    aliases: &BTreeMap<String, String>,
) -> Result<Vec<Expansion>, TemplateError> {
    let mut all = Vec::new();
    for (i, t) in templates.iter().enumerate() {
        let sub = ExpansionConfig {
            seed: cfg.seed ^ i as u64,
            ..*cfg
        };
        all.extend(expand(t, lexicon, analyzer, &sub, aliases)?);
    }
    Ok(all)
}

/// Sentences whose surface sequence already occurred earlier in the list.
pub fn count_duplicates(expansions: &[Expansion]) -> usize {
    let mut seen = BTreeSet::new();
    expansions
        .iter()
        .filter(|e| {
            let key: Vec<&str> = e
                .sentence
                .cohorts
                .iter()
                .map(|c| c.surface.as_str())
                .collect();
            !seen.insert(key)
        })
        .count()
}
