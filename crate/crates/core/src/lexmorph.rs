//! Paradigm-driven lexical transducer.
//!
//! A lexicon of lemmas is compiled against suffix-substitution paradigms into
//! two indexes: surface form to readings (analysis) and lemma plus tag string
//! to surface form (generation). All strings are NFC-normalized on the way in.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// Tag attached to punctuation readings (clause boundary).
pub const CLAUSE_BOUNDARY: &str = "CLB";

/// Surfaces treated as punctuation when no other class is configured.
pub const DEFAULT_PUNCTUATION: &[&str] = &[
    ".", ",", "?", "!", ":", ";", "(", ")", "\"", "'", "-", "–", "—", "«", "»", "…", "...",
];

#[derive(Debug, Error)]
pub enum LexError {
    #[error("lemma {lemma:?} refers to unknown paradigm {id:?}")]
    UnresolvedParadigm { lemma: String, id: String },
    #[error("rule {rule} of paradigm {paradigm:?} cannot apply to lemma {lemma:?}")]
    InapplicableRule {
        lemma: String,
        paradigm: String,
        rule: SuffixRule,
    },
    #[error("lemma {lemma:?} has POS {entry_pos} but paradigm {paradigm:?} is {paradigm_pos}")]
    PosMismatch {
        lemma: String,
        entry_pos: String,
        paradigm: String,
        paradigm_pos: String,
    },
    #[error("empty lemma in lexicon entry for paradigm {0:?}")]
    EmptyLemma(String),
    #[error("paradigm {paradigm:?} defines tag sequence {tags} twice")]
    DuplicateForm { paradigm: String, tags: String },
    #[error("paradigm {0:?} is defined twice")]
    DuplicateParadigm(String),
    #[error("({lemma}, {tags}) generates both {first:?} and {second:?}")]
    AmbiguousGeneration {
        lemma: String,
        tags: String,
        first: String,
        second: String,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// One morphological analysis: lemma plus ordered tags, POS first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Reading {
    pub lemma: String,
    pub tags: Vec<String>,
}

impl Reading {
    pub fn new<L, I, T>(lemma: L, tags: I) -> Self
    where
        L: Into<String>,
        I: IntoIterator<Item = T>,
        T: Into<String>,
    {
        Reading {
            lemma: lemma.into(),
            tags: tags.into_iter().map(Into::into).collect(),
        }
    }

    pub fn pos(&self) -> Option<&str> {
        self.tags.first().map(String::as_str)
    }

    /// Parses the `lemma+Tag+Tag` rendering. The lemma runs up to the first
    /// `+` after its first character, so a lone `+` can still be a lemma.
    pub fn parse(s: &str) -> Option<Reading> {
        let split = s.char_indices().skip(1).find(|&(_, c)| c == '+')?.0;
        let lemma = &s[..split];
        let tags: Vec<String> = s[split + 1..].split('+').map(str::to_owned).collect();
        if tags.iter().any(String::is_empty) {
            return None;
        }
        Some(Reading {
            lemma: lemma.to_owned(),
            tags,
        })
    }

    pub fn tag_rendering(&self) -> String {
        self.tags.join("+")
    }
}

impl fmt::Display for Reading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lemma)?;
        for tag in &self.tags {
            write!(f, "+{tag}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SuffixRule {
    pub strip: String,
    pub append: String,
}

impl SuffixRule {
    pub fn new(strip: impl Into<String>, append: impl Into<String>) -> Self {
        SuffixRule {
            strip: strip.into(),
            append: append.into(),
        }
    }

    pub fn apply(&self, lemma: &str) -> Option<String> {
        let stem = lemma.strip_suffix(self.strip.as_str())?;
        Some(format!("{stem}{}", self.append))
    }
}

impl fmt::Display for SuffixRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let strip = if self.strip.is_empty() {
            "0"
        } else {
            &self.strip
        };
        let append = if self.append.is_empty() {
            "0"
        } else {
            &self.append
        };
        write!(f, "-{strip}/+{append}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParadigmForm {
    /// Full tag sequence of the form, POS first.
    pub tags: Vec<String>,
    pub rule: SuffixRule,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paradigm {
    pub id: String,
    pub pos: String,
    pub forms: Vec<ParadigmForm>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub lemma: String,
    pub pos: String,
    pub paradigm_id: String,
}

impl LexiconEntry {
    pub fn new(lemma: &str, pos: &str, paradigm_id: &str) -> Self {
        LexiconEntry {
            lemma: lemma.to_owned(),
            pos: pos.to_owned(),
            paradigm_id: paradigm_id.to_owned(),
        }
    }
}

/// Compiled, immutable analyzer/generator.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Analyzer {
    surface_index: BTreeMap<String, BTreeSet<Reading>>,
    generation_index: BTreeMap<(String, String), String>,
    punct_class: BTreeSet<String>,
}

impl Analyzer {
    /// Compiles with the default punctuation class.
    pub fn compile(entries: &[LexiconEntry], paradigms: &[Paradigm]) -> Result<Self, LexError> {
        Self::compile_with_punctuation(entries, paradigms, DEFAULT_PUNCTUATION.iter().copied())
    }

    pub fn compile_with_punctuation<'a>(
        entries: &[LexiconEntry],
        paradigms: &[Paradigm],
        punctuation: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, LexError> {
        let mut by_id: BTreeMap<&str, &Paradigm> = BTreeMap::new();
        for p in paradigms {
            if by_id.insert(p.id.as_str(), p).is_some() {
                return Err(LexError::DuplicateParadigm(p.id.clone()));
            }
            let mut seen = BTreeSet::new();
            for form in &p.forms {
                if !seen.insert(&form.tags) {
                    return Err(LexError::DuplicateForm {
                        paradigm: p.id.clone(),
                        tags: form.tags.join("+"),
                    });
                }
            }
        }

        let mut analyzer = Analyzer {
            punct_class: punctuation.into_iter().map(nfc).collect(),
            ..Analyzer::default()
        };
        for entry in entries {
            let lemma = nfc(&entry.lemma);
            if lemma.is_empty() {
                return Err(LexError::EmptyLemma(entry.paradigm_id.clone()));
            }
            let paradigm = by_id.get(entry.paradigm_id.as_str()).ok_or_else(|| {
                LexError::UnresolvedParadigm {
                    lemma: lemma.clone(),
                    id: entry.paradigm_id.clone(),
                }
            })?;
            if paradigm.pos != entry.pos {
                return Err(LexError::PosMismatch {
                    lemma,
                    entry_pos: entry.pos.clone(),
                    paradigm: paradigm.id.clone(),
                    paradigm_pos: paradigm.pos.clone(),
                });
            }
            for form in &paradigm.forms {
                let rule = SuffixRule::new(nfc(&form.rule.strip), nfc(&form.rule.append));
                let surface = rule
                    .apply(&lemma)
                    .ok_or_else(|| LexError::InapplicableRule {
                        lemma: lemma.clone(),
                        paradigm: paradigm.id.clone(),
                        rule: form.rule.clone(),
                    })?;
                let reading = Reading {
                    lemma: lemma.clone(),
                    tags: form.tags.clone(),
                };
                let key = (lemma.clone(), reading.tag_rendering());
                if let Some(existing) = analyzer.generation_index.get(&key) {
                    if *existing != surface {
                        return Err(LexError::AmbiguousGeneration {
                            lemma: key.0,
                            tags: key.1,
                            first: existing.clone(),
                            second: surface,
                        });
                    }
                }
                analyzer.generation_index.insert(key, surface.clone());
                analyzer
                    .surface_index
                    .entry(surface)
                    .or_default()
                    .insert(reading);
            }
        }
        Ok(analyzer)
    }

    /// All readings of `surface`; empty when unknown.
    pub fn analyze(&self, surface: &str) -> BTreeSet<Reading> {
        let surface = nfc(surface);
        if self.punct_class.contains(&surface) {
            let mut set = BTreeSet::new();
            set.insert(Reading::new(surface, [CLAUSE_BOUNDARY]));
            return set;
        }
        self.surface_index
            .get(&surface)
            .cloned()
            .unwrap_or_default()
    }

    pub fn generate<T: AsRef<str>>(&self, lemma: &str, tags: &[T]) -> Option<String> {
        let rendering = tags.iter().map(AsRef::as_ref).collect::<Vec<_>>().join("+");
        self.generation_index.get(&(nfc(lemma), rendering)).cloned()
    }

    pub fn is_punctuation(&self, surface: &str) -> bool {
        self.punct_class.contains(surface)
    }

    pub fn punctuation(&self) -> impl Iterator<Item = &str> {
        self.punct_class.iter().map(String::as_str)
    }

    pub fn surfaces(&self) -> impl Iterator<Item = &str> {
        self.surface_index.keys().map(String::as_str)
    }

    /// Every (lemma, tags, surface) triple known to the generator.
    pub fn forms(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.generation_index
            .iter()
            .map(|((l, t), s)| (l.as_str(), t.as_str(), s.as_str()))
    }

    /// Every tag occurring in some reading, plus the punctuation tag.
    pub fn tag_inventory(&self) -> BTreeSet<String> {
        let mut tags: BTreeSet<String> = self
            .surface_index
            .values()
            .flatten()
            .flat_map(|r| r.tags.iter().cloned())
            .collect();
        if !self.punct_class.is_empty() {
            tags.insert(CLAUSE_BOUNDARY.to_owned());
        }
        tags
    }

    pub fn surface_count(&self) -> usize {
        self.surface_index.len()
    }

    pub fn form_count(&self) -> usize {
        self.generation_index.len()
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let trimmed = line.trim_end();
        if trimmed.trim_start().is_empty() || trimmed.trim_start().starts_with('#') {
            None
        } else {
            Some((i + 1, trimmed))
        }
    })
}

/// Parses `lemma<TAB>pos<TAB>paradigm_id` lines.
pub fn parse_lexicon(text: &str) -> Result<Vec<LexiconEntry>, LexError> {
    content_lines(text)
        .map(|(line, content)| {
            let fields: Vec<&str> = content.split('\t').collect();
            match fields.as_slice() {
                [lemma, pos, id] if !lemma.is_empty() && !pos.is_empty() && !id.is_empty() => {
                    Ok(LexiconEntry::new(&nfc(lemma), pos.trim(), id.trim()))
                }
                _ => Err(LexError::Parse {
                    line,
                    reason: format!("expected lemma<TAB>pos<TAB>paradigm, got {content:?}"),
                }),
            }
        })
        .collect()
}

fn parse_affix(field: &str, marker: char) -> Option<String> {
    let body = field.strip_prefix(marker)?;
    if body.is_empty() {
        return None;
    }
    Some(if body == "0" {
        String::new()
    } else {
        nfc(body)
    })
}

/// Parses `paradigm <id> <pos>` blocks of indented `<tags><TAB>-strip/+append` lines.
/// A form whose tag list does not start with the paradigm POS gets it prepended.
pub fn parse_paradigms(text: &str) -> Result<Vec<Paradigm>, LexError> {
    let mut paradigms: Vec<Paradigm> = Vec::new();
    for (line, content) in content_lines(text) {
        let indented = content.starts_with([' ', '\t']);
        if !indented {
            let words: Vec<&str> = content.split_whitespace().collect();
            match words.as_slice() {
                ["paradigm", id, pos] => paradigms.push(Paradigm {
                    id: (*id).to_owned(),
                    pos: (*pos).to_owned(),
                    forms: Vec::new(),
                }),
                _ => {
                    return Err(LexError::Parse {
                        line,
                        reason: format!("expected `paradigm <id> <pos>`, got {content:?}"),
                    })
                }
            }
            continue;
        }
        let Some(current) = paradigms.last_mut() else {
            return Err(LexError::Parse {
                line,
                reason: "form line before any paradigm header".into(),
            });
        };
        let bad = |reason: &str| LexError::Parse {
            line,
            reason: format!("{reason}: {:?}", content.trim()),
        };
        let (tags, rule) = content
            .trim()
            .split_once('\t')
            .ok_or_else(|| bad("expected <tags><TAB>-strip/+append"))?;
        let (strip, append) = rule
            .trim()
            .split_once('/')
            .ok_or_else(|| bad("rule needs `/`"))?;
        let strip = parse_affix(strip, '-').ok_or_else(|| bad("strip must look like -x or -0"))?;
        let append =
            parse_affix(append, '+').ok_or_else(|| bad("append must look like +x or +0"))?;
        let mut tags: Vec<String> = tags.trim().split('+').map(str::to_owned).collect();
        if tags.iter().any(String::is_empty) {
            return Err(bad("empty tag"));
        }
        if tags[0] != current.pos {
            tags.insert(0, current.pos.clone());
        }
        current.forms.push(ParadigmForm {
            tags,
            rule: SuffixRule { strip, append },
        });
    }
    Ok(paradigms)
}

fn read(path: &Path) -> Result<String, LexError> {
    std::fs::read_to_string(path).map_err(|source| LexError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_lexicon(path: &Path) -> Result<Vec<LexiconEntry>, LexError> {
    parse_lexicon(&read(path)?)
}

pub fn load_paradigms(path: &Path) -> Result<Vec<Paradigm>, LexError> {
    parse_paradigms(&read(path)?)
}

/// Loads both files and compiles them.
pub fn load_analyzer(lexicon: &Path, paradigms: &Path) -> Result<Analyzer, LexError> {
    Analyzer::compile(&load_lexicon(lexicon)?, &load_paradigms(paradigms)?)
}
