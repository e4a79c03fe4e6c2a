//! Sequence-to-sequence disambiguator built from scratch: embeddings, a
//! bidirectional recurrent encoder, a recurrent decoder with general global
//! attention, cross-entropy training and greedy decoding.
//!
//! Everything is generic over [`Scalar`]; the crate root exposes `f64`
//! aliases.

pub mod cell;
pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod tensor;
pub mod train;
pub mod vocab;

pub use cell::CellKind;
pub use checkpoint::CheckpointError;
pub use gradcheck::{gradient_check, GradCheck};
pub use model::{Decoded, ForwardOutput, Model, ModelConfig, ModelError, Params};
pub use tensor::{Matrix, Scalar};
pub use train::{
    encode_pairs, exact_matches, loss_csv, token_accuracy, train, train_model, IdPair,
    OptimizerKind, TrainConfig, TrainError, TrainOutcome,
};
pub use vocab::Vocabulary;

use crate::seqcodec::TokenSequence;

impl<T: Scalar> Model<T> {
    /// Greedy target tokens for a source sequence (reserved ids dropped).
    pub fn predict(&self, source: &TokenSequence) -> Result<Vec<String>, ModelError> {
        let ids = self.src_vocab.encode(source);
        let out = self.greedy_decode(&ids, self.config.max_tgt_len)?;
        Ok(self.tgt_vocab.decode(&out.ids))
    }
}
