//! Bidirectional recurrent encoder, input-feeding attentional decoder.
//!
//! Encoder layer `l` runs a forward and a backward cell over its inputs; the
//! two states at each position are concatenated and projected back to the
//! hidden size by `proj_w`/`proj_b`. The same projection, applied to the
//! concatenated final states, gives the initial state of decoder layer `l`.
//!
//! Decoder step `t`:
//!
//! ```text
//! x_t      = [emb(y_{t-1}); h̃_{t-1}]          (h̃_0 = 0)
//! h_t      = stacked cells over x_t
//! score_s  = h_tᵀ W_a h̄_s,  a_t = softmax(score)
//! c_t      = Σ_s a_ts h̄_s
//! h̃_t      = tanh(W_c [c_t; h_t])
//! p_t      = softmax(W_o h̃_t + b_o)
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cell::{Cell, CellKind, State, StepCache};
use super::tensor::{argmax, axpy, concat, dot, softmax, Matrix, Scalar};
use super::vocab::{Vocabulary, BOS, EOS};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("token id {id} outside vocabulary of {size}")]
    OutOfVocab { id: usize, size: usize },
    #[error("sequence of {len} tokens exceeds the limit of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("empty source sequence")]
    EmptySource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub emb_dim: usize,
    pub hidden_dim: usize,
    pub enc_layers: usize,
    pub dec_layers: usize,
    pub cell: CellKind,
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    pub seed: u64,
    /// Parameters start uniform in `[-init_range, init_range]`.
    pub init_range: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            emb_dim: 64,
            hidden_dim: 128,
            enc_layers: 2,
            dec_layers: 2,
            cell: CellKind::Lstm,
            max_src_len: 200,
            max_tgt_len: 200,
            seed: 1,
            init_range: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("emb_dim", self.emb_dim),
            ("hidden_dim", self.hidden_dim),
            ("enc_layers", self.enc_layers),
            ("dec_layers", self.dec_layers),
            ("max_src_len", self.max_src_len),
            ("max_tgt_len", self.max_tgt_len),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ModelError::DimensionMismatch(format!(
                "{name} must be positive"
            )));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return Err(ModelError::DimensionMismatch(
                "init_range must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer<T> {
    pub fwd: Cell<T>,
    pub bwd: Cell<T>,
    pub proj_w: Matrix<T>,
    pub proj_b: Matrix<T>,
}

/// All trainable tensors. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub src_emb: Matrix<T>,
    pub tgt_emb: Matrix<T>,
    pub encoder: Vec<EncoderLayer<T>>,
    pub decoder: Vec<Cell<T>>,
    /// General attention `W_a`.
    pub attn: Matrix<T>,
    /// Attentional combiner `W_c` over `[c_t; h_t]`.
    pub combine: Matrix<T>,
    pub out_w: Matrix<T>,
    pub out_b: Matrix<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(cfg: &ModelConfig, src_vocab: usize, tgt_vocab: usize) -> Self {
        let (e, h, kind) = (cfg.emb_dim, cfg.hidden_dim, cfg.cell);
        Params {
            src_emb: Matrix::zeros(src_vocab, e),
            tgt_emb: Matrix::zeros(tgt_vocab, e),
            encoder: (0..cfg.enc_layers)
                .map(|l| {
                    let input = if l == 0 { e } else { h };
                    EncoderLayer {
                        fwd: Cell::zeros(kind, input, h),
                        bwd: Cell::zeros(kind, input, h),
                        proj_w: Matrix::zeros(h, 2 * h),
                        proj_b: Matrix::zeros(h, 1),
                    }
                })
                .collect(),
            decoder: (0..cfg.dec_layers)
                .map(|l| Cell::zeros(kind, if l == 0 { e + h } else { h }, h))
                .collect(),
            attn: Matrix::zeros(h, h),
            combine: Matrix::zeros(h, 2 * h),
            out_w: Matrix::zeros(tgt_vocab, h),
            out_b: Matrix::zeros(tgt_vocab, 1),
        }
    }

    /// Tensors in checkpoint order.
    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut v = vec![&self.src_emb, &self.tgt_emb];
        for layer in &self.encoder {
            v.extend([&layer.fwd.w, &layer.fwd.b, &layer.bwd.w, &layer.bwd.b]);
            v.extend([&layer.proj_w, &layer.proj_b]);
        }
        for cell in &self.decoder {
            v.extend([&cell.w, &cell.b]);
        }
        v.extend([&self.attn, &self.combine, &self.out_w, &self.out_b]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut v = vec![&mut self.src_emb, &mut self.tgt_emb];
        for layer in &mut self.encoder {
            v.extend([
                &mut layer.fwd.w,
                &mut layer.fwd.b,
                &mut layer.bwd.w,
                &mut layer.bwd.b,
            ]);
            v.extend([&mut layer.proj_w, &mut layer.proj_b]);
        }
        for cell in &mut self.decoder {
            v.extend([&mut cell.w, &mut cell.b]);
        }
        v.extend([
            &mut self.attn,
            &mut self.combine,
            &mut self.out_w,
            &mut self.out_b,
        ]);
        v
    }

    pub fn tensor_names(&self) -> Vec<String> {
        let mut v = vec!["src_emb".to_owned(), "tgt_emb".to_owned()];
        for l in 0..self.encoder.len() {
            for part in ["fwd.w", "fwd.b", "bwd.w", "bwd.b", "proj.w", "proj.b"] {
                v.push(format!("enc{l}.{part}"));
            }
        }
        for l in 0..self.decoder.len() {
            v.push(format!("dec{l}.w"));
            v.push(format!("dec{l}.b"));
        }
        v.extend(["attn.w", "combine.w", "out.w", "out.b"].map(str::to_owned));
        v
    }

    pub fn zero_grad(&mut self) {
        self.tensors_mut().into_iter().for_each(Matrix::fill_zero);
    }

    pub fn global_norm(&self) -> T {
        self.tensors()
            .iter()
            .map(|t| t.sum_squares())
            .fold(T::zero(), |a, b| a + b)
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.data().len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub params: Params<T>,
}

/// Probability and attention rows, one per target prefix position.
#[derive(Debug, Clone)]
pub struct ForwardOutput<T> {
    pub probs: Vec<Vec<T>>,
    pub attention: Vec<Vec<T>>,
}

/// Greedy output without BOS/EOS. `truncated` means EOS was never produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub ids: Vec<usize>,
    pub truncated: bool,
}

struct EncLayerCache<T> {
    fwd: Vec<StepCache<T>>,
    /// Indexed by source position.
    bwd: Vec<StepCache<T>>,
    concat: Vec<Vec<T>>,
    final_h: Vec<T>,
    final_c: Vec<T>,
}

struct Encoded<T> {
    layers: Vec<EncLayerCache<T>>,
    memory: Vec<Vec<T>>,
    /// `W_a h̄_s` per source position.
    keys: Vec<Vec<T>>,
    init: Vec<State<T>>,
}

struct DecStep<T> {
    input: usize,
    layers: Vec<StepCache<T>>,
    h_top: Vec<T>,
    attention: Vec<T>,
    cat: Vec<T>,
    htilde: Vec<T>,
    probs: Vec<T>,
}

impl<T: Scalar> Model<T> {
    /// Fresh model with parameters drawn from the configured seed.
    pub fn new(
        config: ModelConfig,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut params = Params::zeros(&config, src_vocab.len(), tgt_vocab.len());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for t in params.tensors_mut() {
            let (r, c) = t.shape();
            *t = Matrix::uniform(r, c, config.init_range, &mut rng);
        }
        Ok(Model {
            config,
            src_vocab,
            tgt_vocab,
            params,
        })
    }

    fn check_ids(ids: &[usize], size: usize, max: usize) -> Result<(), ModelError> {
        if ids.len() > max {
            return Err(ModelError::SequenceTooLong {
                len: ids.len(),
                max,
            });
        }
        match ids.iter().find(|&&id| id >= size) {
            Some(&id) => Err(ModelError::OutOfVocab { id, size }),
            None => Ok(()),
        }
    }

    fn check_src(&self, src: &[usize]) -> Result<(), ModelError> {
        if src.is_empty() {
            return Err(ModelError::EmptySource);
        }
        Self::check_ids(src, self.params.src_emb.rows(), self.config.max_src_len)
    }

    fn encode(&self, src: &[usize]) -> Encoded<T> {
        let p = &self.params;
        let kind = self.config.cell;
        let h = self.config.hidden_dim;
        let n = src.len();
        let mut xs: Vec<Vec<T>> = src.iter().map(|&id| p.src_emb.row(id).to_vec()).collect();
        let mut layers = Vec::with_capacity(p.encoder.len());
        let mut init = Vec::with_capacity(p.encoder.len());
        for layer in &p.encoder {
            let mut state = State::zeros(kind, h);
            let mut fwd = Vec::with_capacity(n);
            let mut hf = Vec::with_capacity(n);
            for x in &xs {
                let (next, cache) = layer.fwd.step(x, &state);
                hf.push(next.h.clone());
                fwd.push(cache);
                state = next;
            }
            let last_f = state;

            let mut state = State::zeros(kind, h);
            let mut bwd: Vec<Option<StepCache<T>>> = (0..n).map(|_| None).collect();
            let mut hb = vec![Vec::new(); n];
            for s in (0..n).rev() {
                let (next, cache) = layer.bwd.step(&xs[s], &state);
                hb[s] = next.h.clone();
                bwd[s] = Some(cache);
                state = next;
            }
            let last_b = state;

            let concat_s: Vec<Vec<T>> = (0..n).map(|s| concat(&hf[s], &hb[s])).collect();
            xs = concat_s
                .iter()
                .map(|c| layer.proj_w.matvec(c, Some(&layer.proj_b)))
                .collect();
            let final_h = concat(&last_f.h, &last_b.h);
            let final_c = concat(&last_f.c, &last_b.c);
            init.push(State {
                h: layer.proj_w.matvec(&final_h, Some(&layer.proj_b)),
                c: if final_c.is_empty() {
                    Vec::new()
                } else {
                    layer.proj_w.matvec(&final_c, Some(&layer.proj_b))
                },
            });
            layers.push(EncLayerCache {
                fwd,
                bwd: bwd.into_iter().map(|c| c.expect("filled")).collect(),
                concat: concat_s,
                final_h,
                final_c,
            });
        }
        let keys = xs.iter().map(|m| p.attn.matvec(m, None)).collect();
        Encoded {
            layers,
            memory: xs,
            keys,
            init,
        }
    }

    fn initial_states(&self, enc: &Encoded<T>) -> Vec<State<T>> {
        (0..self.config.dec_layers)
            .map(|l| {
                enc.init
                    .get(l)
                    .cloned()
                    .unwrap_or_else(|| State::zeros(self.config.cell, self.config.hidden_dim))
            })
            .collect()
    }

    fn decoder_step(
        &self,
        enc: &Encoded<T>,
        input: usize,
        states: &mut [State<T>],
        htilde_prev: &[T],
    ) -> DecStep<T> {
        let p = &self.params;
        let mut x = concat(p.tgt_emb.row(input), htilde_prev);
        let mut layers = Vec::with_capacity(states.len());
        for (cell, state) in p.decoder.iter().zip(states.iter_mut()) {
            let (next, cache) = cell.step(&x, state);
            x = next.h.clone();
            *state = next;
            layers.push(cache);
        }
        let h_top = x;
        let scores: Vec<T> = enc.keys.iter().map(|k| dot(&h_top, k)).collect();
        let attention = softmax(&scores);
        let mut context = vec![T::zero(); h_top.len()];
        for (a, m) in attention.iter().zip(&enc.memory) {
            axpy(*a, m, &mut context);
        }
        let cat = concat(&context, &h_top);
        let htilde: Vec<T> = p
            .combine
            .matvec(&cat, None)
            .into_iter()
            .map(T::tanh)
            .collect();
        let probs = softmax(&p.out_w.matvec(&htilde, Some(&p.out_b)));
        DecStep {
            input,
            layers,
            h_top,
            attention,
            cat,
            htilde,
            probs,
        }
    }

    fn run_decoder(&self, enc: &Encoded<T>, inputs: &[usize]) -> Vec<DecStep<T>> {
        let mut states = self.initial_states(enc);
        let mut htilde = vec![T::zero(); self.config.hidden_dim];
        let mut steps = Vec::with_capacity(inputs.len());
        for &y in inputs {
            let step = self.decoder_step(enc, y, &mut states, &htilde);
            htilde = step.htilde.clone();
            steps.push(step);
        }
        steps
    }

    /// Next-token distributions for every position of `tgt_prefix`.
    pub fn forward(
        &self,
        src: &[usize],
        tgt_prefix: &[usize],
    ) -> Result<ForwardOutput<T>, ModelError> {
        self.check_src(src)?;
        Self::check_ids(
            tgt_prefix,
            self.params.tgt_emb.rows(),
            self.config.max_tgt_len + 1,
        )?;
        let enc = self.encode(src);
        let steps = self.run_decoder(&enc, tgt_prefix);
        Ok(ForwardOutput {
            probs: steps.iter().map(|s| s.probs.clone()).collect(),
            attention: steps.into_iter().map(|s| s.attention).collect(),
        })
    }

    fn teacher_forcing(
        &self,
        src: &[usize],
        tgt: &[usize],
    ) -> Result<(Vec<usize>, Vec<usize>), ModelError> {
        self.check_src(src)?;
        Self::check_ids(tgt, self.params.tgt_emb.rows(), self.config.max_tgt_len)?;
        let inputs = std::iter::once(BOS).chain(tgt.iter().copied()).collect();
        let outputs = tgt.iter().copied().chain(std::iter::once(EOS)).collect();
        Ok((inputs, outputs))
    }

    /// Summed cross-entropy of `tgt` followed by EOS.
    pub fn loss(&self, src: &[usize], tgt: &[usize]) -> Result<T, ModelError> {
        let (inputs, outputs) = self.teacher_forcing(src, tgt)?;
        let enc = self.encode(src);
        let steps = self.run_decoder(&enc, &inputs);
        Ok(steps
            .iter()
            .zip(&outputs)
            .map(|(s, &y)| -s.probs[y].ln())
            .fold(T::zero(), |a, b| a + b))
    }

    /// Teacher-forced argmax hits and number of predicted positions.
    pub fn teacher_forced_hits(
        &self,
        src: &[usize],
        tgt: &[usize],
    ) -> Result<(usize, usize), ModelError> {
        let (inputs, outputs) = self.teacher_forcing(src, tgt)?;
        let enc = self.encode(src);
        let steps = self.run_decoder(&enc, &inputs);
        let hits = steps
            .iter()
            .zip(&outputs)
            .filter(|(s, &y)| argmax(&s.probs) == y)
            .count();
        Ok((hits, outputs.len()))
    }

    /// Adds `weight · ∂loss/∂θ` into `grads` and returns the unweighted loss.
    pub fn accumulate_gradients(
        &self,
        src: &[usize],
        tgt: &[usize],
        weight: T,
        grads: &mut Params<T>,
    ) -> Result<T, ModelError> {
        let (inputs, outputs) = self.teacher_forcing(src, tgt)?;
        let p = &self.params;
        let cfg = &self.config;
        let (h, e) = (cfg.hidden_dim, cfg.emb_dim);
        let enc = self.encode(src);
        let steps = self.run_decoder(&enc, &inputs);
        let n = src.len();
        let one = T::one();

        let mut loss = T::zero();
        let mut dstate_h = vec![vec![T::zero(); h]; cfg.dec_layers];
        let mut dstate_c: Vec<Vec<T>> = match cfg.cell {
            CellKind::Lstm => vec![vec![T::zero(); h]; cfg.dec_layers],
            CellKind::Gru => vec![Vec::new(); cfg.dec_layers],
        };
        let mut dhtilde_next = vec![T::zero(); h];
        let mut dmemory = vec![vec![T::zero(); h]; n];
        let mut dkeys = vec![vec![T::zero(); h]; n];

        for (step, &y) in steps.iter().zip(&outputs).rev() {
            loss += -step.probs[y].ln();
            let mut dlogits: Vec<T> = step.probs.iter().map(|&q| q * weight).collect();
            dlogits[y] -= weight;
            grads.out_w.outer_acc(&dlogits, &step.htilde);
            grads.out_b.add_vec(&dlogits);
            let mut dhtilde = dhtilde_next.clone();
            p.out_w.matvec_t_acc(&dlogits, &mut dhtilde);

            let dpre: Vec<T> = dhtilde
                .iter()
                .zip(&step.htilde)
                .map(|(&d, &t)| d * (one - t * t))
                .collect();
            grads.combine.outer_acc(&dpre, &step.cat);
            let mut dcat = vec![T::zero(); 2 * h];
            p.combine.matvec_t_acc(&dpre, &mut dcat);
            let mut dh_top = dcat.split_off(h);
            let dcontext = dcat;

            let dweights: Vec<T> = enc.memory.iter().map(|m| dot(&dcontext, m)).collect();
            let expected: T = step
                .attention
                .iter()
                .zip(&dweights)
                .fold(T::zero(), |acc, (&a, &d)| acc + a * d);
            for s in 0..n {
                let a = step.attention[s];
                axpy(a, &dcontext, &mut dmemory[s]);
                let dscore = a * (dweights[s] - expected);
                axpy(dscore, &enc.keys[s], &mut dh_top);
                axpy(dscore, &step.h_top, &mut dkeys[s]);
            }

            let mut dh = dh_top;
            for l in (0..cfg.dec_layers).rev() {
                axpy(one, &dstate_h[l], &mut dh);
                let g = p.decoder[l].backward(
                    &step.layers[l],
                    &dh,
                    &dstate_c[l],
                    &mut grads.decoder[l],
                );
                dstate_h[l] = g.dh_prev;
                dstate_c[l] = g.dc_prev;
                dh = g.dx;
            }
            axpy(one, &dh[..e], grads.tgt_emb.row_mut(step.input));
            dhtilde_next = dh.split_off(e);
        }

        for s in 0..n {
            grads.attn.outer_acc(&dkeys[s], &enc.memory[s]);
            p.attn.matvec_t_acc(&dkeys[s], &mut dmemory[s]);
        }

        let mut dout = dmemory;
        for l in (0..cfg.enc_layers).rev() {
            let layer = &p.encoder[l];
            let cache = &enc.layers[l];
            let glayer = &mut grads.encoder[l];
            let mut dconcat = vec![vec![T::zero(); 2 * h]; n];
            for s in 0..n {
                glayer.proj_w.outer_acc(&dout[s], &cache.concat[s]);
                glayer.proj_b.add_vec(&dout[s]);
                layer.proj_w.matvec_t_acc(&dout[s], &mut dconcat[s]);
            }
            let mut dfinal_h = vec![T::zero(); 2 * h];
            let mut dfinal_c = vec![T::zero(); cache.final_c.len()];
            if l < cfg.dec_layers {
                glayer.proj_w.outer_acc(&dstate_h[l], &cache.final_h);
                glayer.proj_b.add_vec(&dstate_h[l]);
                layer.proj_w.matvec_t_acc(&dstate_h[l], &mut dfinal_h);
                if !cache.final_c.is_empty() {
                    glayer.proj_w.outer_acc(&dstate_c[l], &cache.final_c);
                    glayer.proj_b.add_vec(&dstate_c[l]);
                    layer.proj_w.matvec_t_acc(&dstate_c[l], &mut dfinal_c);
                }
            }
            let split = |v: &[T]| -> (Vec<T>, Vec<T>) {
                if v.is_empty() {
                    (Vec::new(), Vec::new())
                } else {
                    (v[..h].to_vec(), v[h..].to_vec())
                }
            };
            let (dhf_last, dhb_first) = split(&dfinal_h);
            let (dcf_last, dcb_first) = split(&dfinal_c);

            let input_dim = layer.fwd.input;
            let mut din = vec![vec![T::zero(); input_dim]; n];

            let (mut dh_next, mut dc_next) = (dhf_last, dcf_last);
            for s in (0..n).rev() {
                let mut dh = dconcat[s][..h].to_vec();
                axpy(one, &dh_next, &mut dh);
                let g = layer
                    .fwd
                    .backward(&cache.fwd[s], &dh, &dc_next, &mut glayer.fwd);
                axpy(one, &g.dx, &mut din[s]);
                dh_next = g.dh_prev;
                dc_next = g.dc_prev;
            }
            let (mut dh_next, mut dc_next) = (dhb_first, dcb_first);
            for s in 0..n {
                let mut dh = dconcat[s][h..].to_vec();
                axpy(one, &dh_next, &mut dh);
                let g = layer
                    .bwd
                    .backward(&cache.bwd[s], &dh, &dc_next, &mut glayer.bwd);
                axpy(one, &g.dx, &mut din[s]);
                dh_next = g.dh_prev;
                dc_next = g.dc_prev;
            }
            dout = din;
        }
        for (s, &id) in src.iter().enumerate() {
            axpy(one, &dout[s], grads.src_emb.row_mut(id));
        }
        Ok(loss)
    }

    /// Greedy argmax decoding from BOS until EOS or `max_len` tokens.
    pub fn greedy_decode(&self, src: &[usize], max_len: usize) -> Result<Decoded, ModelError> {
        self.check_src(src)?;
        let enc = self.encode(src);
        let mut states = self.initial_states(&enc);
        let mut htilde = vec![T::zero(); self.config.hidden_dim];
        let mut input = BOS;
        let mut ids = Vec::new();
        while ids.len() < max_len {
            let step = self.decoder_step(&enc, input, &mut states, &htilde);
            let next = argmax(&step.probs);
            if next == EOS {
                return Ok(Decoded {
                    ids,
                    truncated: false,
                });
            }
            ids.push(next);
            input = next;
            htilde = step.htilde;
        }
        Ok(Decoded {
            ids,
            truncated: true,
        })
    }
}
