//! Evaluation of disambiguation output.
//!
//! A word's error magnitude is its slot distance: one slot for the POS and
//! one per feature key, so a substituted value (`Case=Ine` for `Case=Ela`)
//! costs one, not two.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::seqcodec::{decode_target, Sentence, WordPrediction};
use crate::tagmap::{split_feature, UdAnnotation};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{gold} gold sentences but {pred} predictions")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("corpus has no words")]
    EmptyCorpus,
}

fn values_by_key<'a>(
    feats: impl IntoIterator<Item = &'a String>,
) -> BTreeMap<&'a str, BTreeSet<&'a str>> {
    let mut map: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for feat in feats {
        if let Some((k, v)) = split_feature(feat) {
            map.entry(k).or_default().insert(v);
        }
    }
    map
}

/// Number of wrong slots in `pred` relative to `gold`.
pub fn slot_distance(gold: &UdAnnotation, pred: &WordPrediction) -> usize {
    let pos_wrong = usize::from(pred.upos.as_deref() != Some(gold.upos.as_str()));
    let g = values_by_key(&gold.feats);
    let p = values_by_key(&pred.feats);
    let keys: BTreeSet<&str> = g.keys().chain(p.keys()).copied().collect();
    pos_wrong + keys.into_iter().filter(|k| g.get(k) != p.get(k)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ErrorBucket {
    One,
    Two,
    Three,
    More,
}

impl ErrorBucket {
    pub const ALL: [ErrorBucket; 4] = [Self::One, Self::Two, Self::Three, Self::More];

    /// Bucket for a non-zero distance.
    pub fn of(distance: usize) -> Self {
        match distance {
            0 | 1 => Self::One,
            2 => Self::Two,
            3 => Self::Three,
            _ => Self::More,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::One => "1 tag",
            Self::Two => "2 tags",
            Self::Three => "3 tags",
            Self::More => "more tags",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Self::One => "errors_1",
            Self::Two => "errors_2",
            Self::Three => "errors_3",
            Self::More => "errors_more",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub n_sentences: usize,
    pub n_words: usize,
    pub n_mismatched_sentences: usize,
    pub fully_correct_sentences: usize,
    pub fully_correct_words: usize,
    pub pos_correct: usize,
    pub fully_correct_sentences_pct: f64,
    pub fully_correct_words_pct: f64,
    pub pos_correct_pct: f64,
    /// Wrong words per bucket.
    pub error_counts: [usize; 4],
    /// Share of wrong words per bucket; empty when no word is wrong.
    pub error_histogram: BTreeMap<ErrorBucket, f64>,
    pub avg_ambiguity: Option<f64>,
}

fn pct(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        100.0 * part as f64 / whole as f64
    }
}

/// Scores raw predicted token lines against gold annotations.
pub fn evaluate<S: AsRef<[String]>>(
    gold: &[Vec<UdAnnotation>],
    pred: &[S],
) -> Result<EvalReport, MetricsError> {
    if gold.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    let mut report = EvalReport {
        n_sentences: gold.len(),
        ..EvalReport::default()
    };
    for (gold_words, tokens) in gold.iter().zip(pred) {
        let (words, mismatch) = decode_target(tokens.as_ref(), gold_words.len());
        let mut all_correct = mismatch == 0;
        for (g, p) in gold_words.iter().zip(&words) {
            report.n_words += 1;
            if p.upos.as_deref() == Some(g.upos.as_str()) {
                report.pos_correct += 1;
            }
            match slot_distance(g, p) {
                0 => report.fully_correct_words += 1,
                d => {
                    all_correct = false;
                    report.error_counts[ErrorBucket::of(d).index()] += 1;
                }
            }
        }
        if mismatch != 0 {
            report.n_mismatched_sentences += 1;
        }
        if all_correct {
            report.fully_correct_sentences += 1;
        }
    }
    report.fully_correct_sentences_pct = pct(report.fully_correct_sentences, report.n_sentences);
    report.fully_correct_words_pct = pct(report.fully_correct_words, report.n_words);
    report.pos_correct_pct = pct(report.pos_correct, report.n_words);
    let wrong: usize = report.error_counts.iter().sum();
    if wrong > 0 {
        report.error_histogram = ErrorBucket::ALL
            .into_iter()
            .map(|b| (b, pct(report.error_counts[b.index()], wrong)))
            .collect();
    }
    Ok(report)
}

/// Mean readings per cohort, unknown words counting as one.
pub fn average_ambiguity(sentences: &[Sentence]) -> Result<f64, MetricsError> {
    let counts: Vec<usize> = sentences
        .iter()
        .flat_map(|s| &s.cohorts)
        .map(|c| c.readings.len().max(1))
        .collect();
    if counts.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    Ok(counts.iter().sum::<usize>() as f64 / counts.len() as f64)
}

impl EvalReport {
    pub fn with_ambiguity(mut self, avg: f64) -> Self {
        self.avg_ambiguity = Some(avg);
        self
    }

    /// Text tables followed by a `key=value` block.
    pub fn render(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model: {name}");
        let _ = writeln!(
            out,
            "| {:<24} | {:>8} | {:>8} | {:>8} |",
            "", "sentences", "words", "POS"
        );
        let _ = writeln!(
            out,
            "| {:<24} | {:>8.1}% | {:>7.1}% | {:>7.1}% |",
            "fully correct",
            self.fully_correct_sentences_pct,
            self.fully_correct_words_pct,
            self.pos_correct_pct
        );
        out.push('\n');
        let _ = write!(out, "| {:<24} |", "erroneous tags per word");
        for b in ErrorBucket::ALL {
            let _ = write!(out, " {:>9} |", b.label());
        }
        out.push('\n');
        let _ = write!(out, "| {:<24} |", "share of wrong words");
        for b in ErrorBucket::ALL {
            match self.error_histogram.get(&b) {
                Some(p) => {
                    let _ = write!(out, " {:>8.1}% |", p);
                }
                None => {
                    let _ = write!(out, " {:>9} |", "-");
                }
            }
        }
        out.push_str("\n\n");
        out.push_str(&self.to_string());
        out
    }
}

impl fmt::Display for EvalReport {
    /// Machine-readable `key=value` lines.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_sentences={}", self.n_sentences)?;
        writeln!(f, "n_words={}", self.n_words)?;
        writeln!(f, "n_mismatched_sentences={}", self.n_mismatched_sentences)?;
        writeln!(
            f,
            "fully_correct_sentences_pct={}",
            self.fully_correct_sentences_pct
        )?;
        writeln!(
            f,
            "fully_correct_words_pct={}",
            self.fully_correct_words_pct
        )?;
        writeln!(f, "pos_correct_pct={}", self.pos_correct_pct)?;
        for b in ErrorBucket::ALL {
            match self.error_histogram.get(&b) {
                Some(p) => writeln!(f, "{}={}", b.key(), p)?,
                None => writeln!(f, "{}=", b.key())?,
            }
        }
        match self.avg_ambiguity {
            Some(a) => writeln!(f, "avg_ambiguity={a}"),
            None => writeln!(f, "avg_ambiguity="),
        }
    }
}
