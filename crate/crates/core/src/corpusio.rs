//! Corpus formats: CoNLL-U treebanks, cohort streams and paired
//! `.src`/`.tgt` line files.
//!
//! Cohort stream, readings indented by one tab:
//!
//! ```text
//! "<máddi>"
//!     máddat+V+TV+Imprt+Du2
//!     máddi+N+Sg+Nom
//! "<?>"
//!     ?+CLB
//!
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lexmorph::{Analyzer, Reading};
use crate::seqcodec::{encode_source_with, encode_target, Cohort, Sentence, TokenSequence};
use crate::tagmap::{split_feature, MappingTable, UdAnnotation};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: malformed cohort: {reason}")]
    MalformedCohort { line: usize, reason: String },
    #[error("{path}: line {line}: {reason}")]
    MalformedPair {
        path: String,
        line: usize,
        reason: String,
    },
    #[error("{src} has {src_lines} lines but {tgt} has {tgt_lines}")]
    PairCountMismatch {
        src: String,
        src_lines: usize,
        tgt: String,
        tgt_lines: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub(crate) fn read_text(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), CorpusError> {
    std::fs::write(path, text).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConlluToken {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub upos: String,
    pub feats: BTreeSet<String>,
}

impl ConlluToken {
    pub fn annotation(&self) -> UdAnnotation {
        UdAnnotation {
            upos: self.upos.clone(),
            feats: self.feats.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Treebank {
    pub sentences: Vec<Vec<ConlluToken>>,
    /// Multiword ranges and empty nodes that were skipped.
    pub skipped: usize,
}

pub fn parse_conllu(text: &str) -> Result<Treebank, CorpusError> {
    let mut bank = Treebank::default();
    let mut current: Vec<ConlluToken> = Vec::new();
    let flush = |current: &mut Vec<ConlluToken>, bank: &mut Treebank| {
        if !current.is_empty() {
            bank.sentences.push(std::mem::take(current));
        }
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let bad = |reason: String| CorpusError::MalformedLine { line, reason };
        if raw.trim().is_empty() {
            flush(&mut current, &mut bank);
            continue;
        }
        if raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 10 {
            return Err(bad(format!("expected 10 columns, found {}", cols.len())));
        }
        if cols[0].contains('-') || cols[0].contains('.') {
            bank.skipped += 1;
            continue;
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| bad(format!("bad ID {:?}", cols[0])))?;
        if id != current.len() + 1 {
            return Err(bad(format!("ID {id} follows {}", current.len())));
        }
        let feats = if cols[5] == "_" {
            BTreeSet::new()
        } else {
            cols[5]
                .split('|')
                .map(|f| {
                    split_feature(f)
                        .map(|_| f.to_owned())
                        .ok_or_else(|| bad(format!("bad feature {f:?}")))
                })
                .collect::<Result<_, _>>()?
        };
        if cols[1].is_empty() || cols[3].is_empty() {
            return Err(bad("empty FORM or UPOS".into()));
        }
        current.push(ConlluToken {
            id,
            form: cols[1].to_owned(),
            lemma: cols[2].to_owned(),
            upos: cols[3].to_owned(),
            feats,
        });
    }
    flush(&mut current, &mut bank);
    Ok(bank)
}

pub fn read_conllu(path: &Path) -> Result<Treebank, CorpusError> {
    parse_conllu(&read_text(path)?)
}

/// Writes the columns this toolkit uses; the rest are `_`.
pub fn write_conllu(sentences: &[Vec<ConlluToken>]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        for t in sentence {
            let feats = t.annotation().feats_column();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t_\t{}\t_\t_\t_\t_",
                t.id, t.form, t.lemma, t.upos, feats
            );
        }
        out.push('\n');
    }
    out
}

pub fn render_cohorts(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for sentence in sentences {
        for cohort in &sentence.cohorts {
            let _ = writeln!(out, "\"<{}>\"", cohort.surface);
            for reading in &cohort.readings {
                let _ = writeln!(out, "\t{reading}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_cohorts(text: &str) -> Result<Vec<Sentence>, CorpusError> {
    let mut sentences = Vec::new();
    let mut current = Sentence::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let bad = |reason: &str| CorpusError::MalformedCohort {
            line,
            reason: reason.to_owned(),
        };
        if raw.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
        } else if let Some(reading) = raw.strip_prefix('\t') {
            let cohort = current
                .cohorts
                .last_mut()
                .ok_or_else(|| bad("reading before any cohort"))?;
            let reading = Reading::parse(reading.trim_end())
                .ok_or_else(|| bad("reading must look like lemma+Tag+..."))?;
            cohort.readings.insert(reading);
        } else {
            let surface = raw
                .strip_prefix("\"<")
                .and_then(|s| s.strip_suffix(">\""))
                .ok_or_else(|| bad("expected \"<surface>\""))?;
            if surface.is_empty() {
                return Err(bad("empty surface"));
            }
            current.cohorts.push(Cohort::new(surface, []));
        }
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    Ok(sentences)
}

pub fn read_cohorts(path: &Path) -> Result<Vec<Sentence>, CorpusError> {
    parse_cohorts(&read_text(path)?)
}

pub fn write_cohorts(sentences: &[Sentence], path: &Path) -> Result<(), CorpusError> {
    write_text(path, &render_cohorts(sentences))
}

/// Analyzes every token form of the treebank.
pub fn analyze_treebank(treebank: &Treebank, analyzer: &Analyzer) -> Vec<Sentence> {
    treebank
        .sentences
        .iter()
        .map(|tokens| {
            Sentence::new(
                tokens
                    .iter()
                    .map(|t| Cohort::new(t.form.clone(), analyzer.analyze(&t.form)))
                    .collect(),
            )
        })
        .collect()
}

/// Source from analyzer readings, target from the treebank's own UPOS/FEATS.
pub fn build_dataset(
    treebank: &Treebank,
    analyzer: &Analyzer,
    table: &MappingTable,
) -> Vec<(TokenSequence, TokenSequence)> {
    analyze_treebank(treebank, analyzer)
        .iter()
        .zip(&treebank.sentences)
        .map(|(sentence, tokens)| {
            let gold: Vec<UdAnnotation> = tokens.iter().map(ConlluToken::annotation).collect();
            (
                encode_source_with(sentence, table.aliases()),
                encode_target(&gold),
            )
        })
        .collect()
}

/// `prefix.src` and `prefix.tgt`.
pub fn pair_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let mut src = prefix.as_os_str().to_owned();
    src.push(".src");
    let mut tgt = prefix.as_os_str().to_owned();
    tgt.push(".tgt");
    (src.into(), tgt.into())
}

pub fn write_pairs(
    prefix: &Path,
    pairs: &[(TokenSequence, TokenSequence)],
) -> Result<(), CorpusError> {
    let (src, tgt) = pair_paths(prefix);
    let mut s = String::new();
    let mut t = String::new();
    for (a, b) in pairs {
        let _ = writeln!(s, "{a}");
        let _ = writeln!(t, "{b}");
    }
    write_text(&src, &s)?;
    write_text(&tgt, &t)
}

pub fn read_sequences(path: &Path) -> Result<Vec<TokenSequence>, CorpusError> {
    read_text(path)?
        .lines()
        .enumerate()
        .map(|(i, line)| {
            line.parse().map_err(
                |e: crate::seqcodec::CodecError| CorpusError::MalformedPair {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason: e.to_string(),
                },
            )
        })
        .collect()
}

pub fn read_pairs(prefix: &Path) -> Result<Vec<(TokenSequence, TokenSequence)>, CorpusError> {
    let (src, tgt) = pair_paths(prefix);
    let s = read_sequences(&src)?;
    let t = read_sequences(&tgt)?;
    if s.len() != t.len() {
        return Err(CorpusError::PairCountMismatch {
            src: src.display().to_string(),
            src_lines: s.len(),
            tgt: tgt.display().to_string(),
            tgt_lines: t.len(),
        });
    }
    Ok(s.into_iter().zip(t).collect())
}
