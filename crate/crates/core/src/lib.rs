//! Cross-lingual morphological disambiguation on lemma-free tag sequences.
//!
//! A paradigm analyzer ([`lexmorph`]) lists every reading of a word; the
//! tag codec ([`seqcodec`]) flattens a sentence's ambiguity into a source
//! sequence; a sequence-to-sequence model ([`seq2seq`]) trained on a
//! related language plus template data ([`tplgen`]) emits the disambiguated
//! UD-style tags, which are matched back onto readings and scored
//! ([`metrics`]).

pub mod config;
pub mod corpusio;
pub mod lexmorph;
pub mod metrics;
pub mod pipeline;
pub mod seq2seq;
pub mod seqcodec;
pub mod tagmap;
pub mod tplgen;

pub use lexmorph::{Analyzer, LexiconEntry, Paradigm, Reading, SuffixRule};
pub use metrics::EvalReport;
pub use seq2seq::Scalar;
pub use seqcodec::{Cohort, Sentence, TokenSequence, WordPrediction};
pub use tagmap::{MappingTable, UdAnnotation};

/// Double-precision model; the default everywhere in the toolkit.
pub type Seq2SeqModel = seq2seq::Model<f64>;
/// Single-precision model, for inference experiments.
pub type Seq2SeqModelF32 = seq2seq::Model<f32>;
pub type Params = seq2seq::Params<f64>;
pub type TrainOutcome = seq2seq::TrainOutcome<f64>;
