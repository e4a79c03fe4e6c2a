//! Central finite-difference check of the analytic backward pass.

use super::model::{Model, ModelConfig, ModelError};
use super::vocab::Vocabulary;
use crate::seqcodec::TokenSequence;

pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Worst relative error per tensor, in checkpoint order.
    pub per_tensor: Vec<(String, f64)>,
    pub entries: usize,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares every parameter entry of `model` on one pair.
pub fn check_model(
    model: &Model<f64>,
    src: &[usize],
    tgt: &[usize],
) -> Result<GradCheck, ModelError> {
    let mut grads = model.params.clone();
    grads.zero_grad();
    model.accumulate_gradients(src, tgt, 1.0, &mut grads)?;

    let names = model.params.tensor_names();
    let mut probe = model.clone();
    let mut per_tensor = Vec::with_capacity(names.len());
    let mut entries = 0;
    for (k, name) in names.into_iter().enumerate() {
        let len = probe.params.tensors()[k].data().len();
        let mut worst: f64 = 0.0;
        for i in 0..len {
            let orig = probe.params.tensors()[k].data()[i];
            probe.params.tensors_mut()[k].data_mut()[i] = orig + FD_STEP;
            let plus = probe.loss(src, tgt)?;
            probe.params.tensors_mut()[k].data_mut()[i] = orig - FD_STEP;
            let minus = probe.loss(src, tgt)?;
            probe.params.tensors_mut()[k].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let analytic = grads.tensors()[k].data()[i];
            worst = worst.max(rel_error(analytic, numeric));
            entries += 1;
        }
        per_tensor.push((name, worst));
    }
    let max_rel_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheck {
        max_rel_error,
        per_tensor,
        entries,
    })
}

/// Builds a model for `mc` around one sample and checks all its gradients.
/// Meant for tiny dimensions (embedding and hidden sizes of 8 or less).
pub fn gradient_check(
    mc: &ModelConfig,
    sample: (&TokenSequence, &TokenSequence),
) -> Result<GradCheck, ModelError> {
    let src_vocab = Vocabulary::build([sample.0], 1);
    let tgt_vocab = Vocabulary::build([sample.1], 1);
    let src = src_vocab.encode(sample.0);
    let tgt = tgt_vocab.encode(sample.1);
    let model = Model::new(*mc, src_vocab, tgt_vocab)?;
    check_model(&model, &src, &tgt)
}
