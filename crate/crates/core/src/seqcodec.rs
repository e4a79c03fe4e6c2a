//! Lemma-free tag sequences.
//!
//! Source side: per word, the byte-sorted union of all tags of all candidate
//! readings. Target side: per word, the byte-sorted features followed by the
//! POS. Words are separated by the boundary token `_`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::lexmorph::Reading;
use crate::metrics::slot_distance;
use crate::tagmap::{split_feature, MappingTable, TagMapError, UdAnnotation};

pub const BOUNDARY: &str = "_";
/// Source token emitted for a word without readings.
pub const UNKNOWN_WORD: &str = "X";

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("cohort {0:?} has no readings to choose from")]
    NoReadings(String),
    #[error(transparent)]
    Mapping(#[from] TagMapError),
    #[error("invalid token sequence: {0}")]
    InvalidSequence(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Cohort {
    pub surface: String,
    pub readings: BTreeSet<Reading>,
}

impl Cohort {
    pub fn new(surface: impl Into<String>, readings: impl IntoIterator<Item = Reading>) -> Self {
        Cohort {
            surface: surface.into(),
            readings: readings.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sentence {
    pub cohorts: Vec<Cohort>,
}

impl Sentence {
    pub fn new(cohorts: Vec<Cohort>) -> Self {
        Sentence { cohorts }
    }

    pub fn len(&self) -> usize {
        self.cohorts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cohorts.is_empty()
    }
}

/// Flat tag tokens; serialized as one space-joined line.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Wraps tokens after checking the boundary invariants.
    pub fn new(tokens: Vec<String>) -> Result<Self, CodecError> {
        let seq = TokenSequence(tokens);
        seq.validate()?;
        Ok(seq)
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn word_count(&self) -> usize {
        if self.0.is_empty() {
            0
        } else {
            self.boundary_count() + 1
        }
    }

    pub fn boundary_count(&self) -> usize {
        self.0.iter().filter(|t| *t == BOUNDARY).count()
    }

    pub fn words(&self) -> impl Iterator<Item = &[String]> {
        self.0.split(|t| t == BOUNDARY)
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let t = &self.0;
        if t.iter()
            .any(|tok| tok.is_empty() || tok.contains(char::is_whitespace))
        {
            return Err(CodecError::InvalidSequence(
                "empty or whitespace token".into(),
            ));
        }
        if t.first().is_some_and(|f| f == BOUNDARY) || t.last().is_some_and(|l| l == BOUNDARY) {
            return Err(CodecError::InvalidSequence(
                "leading or trailing boundary".into(),
            ));
        }
        if t.windows(2).any(|w| w[0] == BOUNDARY && w[1] == BOUNDARY) {
            return Err(CodecError::InvalidSequence("adjacent boundaries".into()));
        }
        Ok(())
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

impl FromStr for TokenSequence {
    type Err = CodecError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        TokenSequence::new(line.split_whitespace().map(str::to_owned).collect())
    }
}

fn join_words(words: impl IntoIterator<Item = Vec<String>>) -> TokenSequence {
    let mut tokens = Vec::new();
    for (i, word) in words.into_iter().enumerate() {
        if i > 0 {
            tokens.push(BOUNDARY.to_owned());
        }
        tokens.extend(word);
    }
    TokenSequence(tokens)
}

/// Source encoding with tags used verbatim.
pub fn encode_source(sentence: &Sentence) -> TokenSequence {
    encode_source_with(sentence, &BTreeMap::new())
}

/// Source encoding with tag renamings applied before sorting.
pub fn encode_source_with(
    sentence: &Sentence,
    aliases: &BTreeMap<String, String>,
) -> TokenSequence {
    join_words(sentence.cohorts.iter().map(|cohort| {
        if cohort.readings.is_empty() {
            return vec![UNKNOWN_WORD.to_owned()];
        }
        // BTreeSet<String> iterates in byte order
        let tags: BTreeSet<&str> = cohort
            .readings
            .iter()
            .flat_map(|r| r.tags.iter())
            .map(|t| aliases.get(t).unwrap_or(t).as_str())
            .collect();
        tags.into_iter().map(str::to_owned).collect()
    }))
}

pub fn encode_target_word(annotation: &UdAnnotation) -> Vec<String> {
    annotation
        .feats
        .iter()
        .cloned()
        .chain(std::iter::once(annotation.upos.clone()))
        .collect()
}

pub fn encode_target(annotations: &[UdAnnotation]) -> TokenSequence {
    join_words(annotations.iter().map(encode_target_word))
}

/// One decoded word group.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordPrediction {
    pub upos: Option<String>,
    pub feats: BTreeSet<String>,
    pub raw_tokens: Vec<String>,
}

impl WordPrediction {
    pub fn from_tokens(tokens: &[String]) -> Self {
        let (feats, others): (Vec<&String>, Vec<&String>) =
            tokens.iter().partition(|t| split_feature(t).is_some());
        WordPrediction {
            upos: match others.as_slice() {
                [only] => Some((*only).clone()),
                _ => None,
            },
            feats: feats.into_iter().cloned().collect(),
            raw_tokens: tokens.to_vec(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.raw_tokens.is_empty()
    }
}

/// Splits raw model output into word groups aligned to `expected_words`.
///
/// Returns the predictions and `produced - expected`. Surplus groups are
/// dropped; missing trailing words are empty predictions.
pub fn decode_target(tokens: &[String], expected_words: usize) -> (Vec<WordPrediction>, i64) {
    let groups: Vec<&[String]> = if tokens.is_empty() {
        Vec::new()
    } else {
        tokens.split(|t| t == BOUNDARY).collect()
    };
    let mismatch = groups.len() as i64 - expected_words as i64;
    let mut predictions: Vec<WordPrediction> = groups
        .iter()
        .take(expected_words)
        .map(|g| WordPrediction::from_tokens(g))
        .collect();
    predictions.resize_with(expected_words, WordPrediction::default);
    (predictions, mismatch)
}

/// Picks the reading whose UD conversion is closest to the prediction.
/// Ties go to the smallest `lemma+Tag` rendering.
pub fn select_reading(
    cohort: &Cohort,
    prediction: &WordPrediction,
    table: &MappingTable,
) -> Result<Reading, CodecError> {
    let mut best: Option<(usize, String, &Reading)> = None;
    for reading in &cohort.readings {
        let distance = slot_distance(&table.convert(reading)?, prediction);
        let rendering = reading.to_string();
        let better = match &best {
            None => true,
            Some((d, r, _)) => (distance, &rendering) < (*d, r),
        };
        if better {
            best = Some((distance, rendering, reading));
        }
    }
    best.map(|(_, _, r)| r.clone())
        .ok_or_else(|| CodecError::NoReadings(cohort.surface.clone()))
}
