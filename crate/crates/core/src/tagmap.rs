//! Analyzer tags to UD-style POS and features.
//!
//! Mapping file lines:
//!
//! ```text
//! pos N => N                 # POS rule
//! Sg3 => Number=Sing Person=3
//! Ind => Mood=Ind VerbForm=Fin
//! drop TV IV Subqst          # tags that contribute nothing
//! alias PrsPrc => PrsPc      # source-side spelling used by the tag codec
//! ```
//!
//! A feature rule fires when all of its source tags occur in the reading. A
//! bare right-hand token without `=` overrides the POS.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::lexmorph::Reading;

#[derive(Debug, Error)]
pub enum TagMapError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: pattern {pattern} already has a rule")]
    DuplicatePattern { line: usize, pattern: String },
    #[error("no mapping rule covers tag {0:?}")]
    UnmappedTag(String),
    #[error("rules disagree on {key}: {first} vs {second}")]
    FeatureConflict {
        key: String,
        first: String,
        second: String,
    },
    #[error("reading {0:?} has no tags")]
    NoPos(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// UD-style annotation of one word: POS plus `Key=Value` features.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UdAnnotation {
    pub upos: String,
    pub feats: BTreeSet<String>,
}

impl UdAnnotation {
    pub fn new<I, S>(upos: &str, feats: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        UdAnnotation {
            upos: upos.to_owned(),
            feats: feats.into_iter().map(Into::into).collect(),
        }
    }

    /// `Case=Nom|Number=Sing`, or `_` without features.
    pub fn feats_column(&self) -> String {
        if self.feats.is_empty() {
            "_".to_owned()
        } else {
            self.feats.iter().cloned().collect::<Vec<_>>().join("|")
        }
    }
}

impl fmt::Display for UdAnnotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.upos)?;
        for feat in &self.feats {
            write!(f, " {feat}")?;
        }
        f.write_str(")")
    }
}

/// Splits `Key=Value`; both sides must be non-empty.
pub fn split_feature(feat: &str) -> Option<(&str, &str)> {
    let (k, v) = feat.split_once('=')?;
    (!k.is_empty() && !v.is_empty()).then_some((k, v))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingRule {
    pub source_pattern: BTreeSet<String>,
    pub emit_upos: Option<String>,
    pub emit_feats: BTreeSet<String>,
    pub drop: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MappingTable {
    rules: Vec<MappingRule>,
    pos_rules: BTreeMap<String, String>,
    aliases: BTreeMap<String, String>,
}

impl MappingTable {
    pub fn rules(&self) -> &[MappingRule] {
        &self.rules
    }

    pub fn pos_rules(&self) -> &BTreeMap<String, String> {
        &self.pos_rules
    }

    /// Source-side tag renamings applied by the tag codec.
    pub fn aliases(&self) -> &BTreeMap<String, String> {
        &self.aliases
    }

    pub fn convert(&self, reading: &Reading) -> Result<UdAnnotation, TagMapError> {
        let (pos, rest) = reading
            .tags
            .split_first()
            .ok_or_else(|| TagMapError::NoPos(reading.to_string()))?;
        let all: BTreeSet<&str> = reading.tags.iter().map(String::as_str).collect();
        let mut upos = self.pos_rules.get(pos).unwrap_or(pos).clone();
        let mut covered: BTreeSet<&str> = BTreeSet::new();
        let mut emitted: BTreeMap<String, String> = BTreeMap::new();

        for rule in &self.rules {
            if !rule.source_pattern.iter().all(|t| all.contains(t.as_str())) {
                continue;
            }
            covered.extend(rule.source_pattern.iter().map(String::as_str));
            if rule.drop {
                continue;
            }
            if let Some(u) = &rule.emit_upos {
                upos = u.clone();
            }
            for feat in &rule.emit_feats {
                let (key, value) = split_feature(feat).expect("validated at load");
                match emitted.get(key) {
                    Some(prev) if prev != value => {
                        return Err(TagMapError::FeatureConflict {
                            key: key.to_owned(),
                            first: format!("{key}={prev}"),
                            second: feat.clone(),
                        })
                    }
                    _ => {
                        emitted.insert(key.to_owned(), value.to_owned());
                    }
                }
            }
        }
        if let Some(tag) = rest.iter().find(|t| !covered.contains(t.as_str())) {
            return Err(TagMapError::UnmappedTag(tag.clone()));
        }
        Ok(UdAnnotation {
            upos,
            feats: emitted
                .into_iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect(),
        })
    }

    /// Tags with no feature rule, POS rule or drop rule.
    pub fn uncovered<'a>(&self, tags: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
        tags.into_iter()
            .filter(|t| {
                !self.pos_rules.contains_key(*t)
                    && !self.rules.iter().any(|r| r.source_pattern.contains(*t))
            })
            .map(str::to_owned)
            .collect()
    }
}

pub fn parse_mapping(text: &str) -> Result<MappingTable, TagMapError> {
    let mut table = MappingTable::default();
    let mut patterns: BTreeSet<BTreeSet<String>> = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let bad = |reason: String| TagMapError::Parse { line, reason };

        if let Some(rest) = content.strip_prefix("drop ") {
            for tag in rest.split_whitespace() {
                let pattern: BTreeSet<String> = [tag.to_owned()].into();
                if !patterns.insert(pattern.clone()) {
                    return Err(TagMapError::DuplicatePattern {
                        line,
                        pattern: tag.to_owned(),
                    });
                }
                table.rules.push(MappingRule {
                    source_pattern: pattern,
                    emit_upos: None,
                    emit_feats: BTreeSet::new(),
                    drop: true,
                });
            }
            continue;
        }

        let (lhs, rhs) = content
            .split_once("=>")
            .ok_or_else(|| bad(format!("expected `=>` in {content:?}")))?;
        let (lhs, rhs) = (lhs.trim(), rhs.trim());

        if let Some(src) = lhs.strip_prefix("pos ").map(str::trim) {
            if src.is_empty() || rhs.is_empty() || rhs.contains(char::is_whitespace) {
                return Err(bad("pos rule must be `pos SRC => UPOS`".into()));
            }
            if table
                .pos_rules
                .insert(src.to_owned(), rhs.to_owned())
                .is_some()
            {
                return Err(TagMapError::DuplicatePattern {
                    line,
                    pattern: format!("pos {src}"),
                });
            }
            continue;
        }
        if let Some(src) = lhs.strip_prefix("alias ").map(str::trim) {
            if src.is_empty() || rhs.is_empty() || rhs.contains(char::is_whitespace) {
                return Err(bad("alias must be `alias SRC => DST`".into()));
            }
            table.aliases.insert(src.to_owned(), rhs.to_owned());
            continue;
        }

        let pattern: BTreeSet<String> = lhs.split(',').map(|s| s.trim().to_owned()).collect();
        if pattern
            .iter()
            .any(|t| t.is_empty() || t.contains(char::is_whitespace))
        {
            return Err(bad(format!("bad source pattern {lhs:?}")));
        }
        let mut emit_upos = None;
        let mut emit_feats = BTreeSet::new();
        let mut keys = BTreeSet::new();
        for token in rhs.split_whitespace() {
            if token.contains('=') {
                let (key, _) =
                    split_feature(token).ok_or_else(|| bad(format!("bad feature {token:?}")))?;
                if !keys.insert(key) {
                    return Err(bad(format!("feature key {key} emitted twice")));
                }
                emit_feats.insert(token.to_owned());
            } else if emit_upos.replace(token.to_owned()).is_some() {
                return Err(bad("at most one POS override per rule".into()));
            }
        }
        if emit_upos.is_none() && emit_feats.is_empty() {
            return Err(bad("rule emits nothing; use `drop`".into()));
        }
        if !patterns.insert(pattern.clone()) {
            return Err(TagMapError::DuplicatePattern {
                line,
                pattern: lhs.to_owned(),
            });
        }
        table.rules.push(MappingRule {
            source_pattern: pattern,
            emit_upos,
            emit_feats,
            drop: false,
        });
    }
    Ok(table)
}

pub fn load_mapping(path: &Path) -> Result<MappingTable, TagMapError> {
    let text = std::fs::read_to_string(path).map_err(|source| TagMapError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mapping(&text)
}
