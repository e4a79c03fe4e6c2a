//! Straight-line recomputation of the forward pass with plain nested vectors,
//! written from the model definition rather than the library code.

use morphdis::seq2seq::{CellKind, Matrix, Model, ModelConfig, Vocabulary};

type M = Vec<Vec<f64>>;

fn mat(m: &Matrix<f64>) -> M {
    (0..m.rows())
        .map(|r| m.data()[r * m.cols()..(r + 1) * m.cols()].to_vec())
        .collect()
}

fn mv(w: &M, x: &[f64]) -> Vec<f64> {
    w.iter()
        .map(|row| {
            assert_eq!(row.len(), x.len());
            let mut s = 0.0;
            for j in 0..x.len() {
                s += row[j] * x[j];
            }
            s
        })
        .collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn cat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|v| v / z).collect()
}

struct OCell {
    w: M,
    b: Vec<f64>,
    gru: bool,
}

impl OCell {
    /// Returns (h, c).
    fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = h.len();
        if !self.gru {
            let pre = add(&mv(&self.w, &cat(x, h)), &self.b);
            let mut h2 = vec![0.0; n];
            let mut c2 = vec![0.0; n];
            for k in 0..n {
                let i = sig(pre[k]);
                let f = sig(pre[n + k]);
                let g = pre[2 * n + k].tanh();
                let o = sig(pre[3 * n + k]);
                c2[k] = f * c[k] + i * g;
                h2[k] = o * c2[k].tanh();
            }
            (h2, c2)
        } else {
            let xh = cat(x, h);
            let mut r = vec![0.0; n];
            let mut z = vec![0.0; n];
            for k in 0..n {
                r[k] = sig(mv(&self.w[k..k + 1].to_vec(), &xh)[0] + self.b[k]);
                z[k] = sig(mv(&self.w[n + k..n + k + 1].to_vec(), &xh)[0] + self.b[n + k]);
            }
            let rh: Vec<f64> = (0..n).map(|k| r[k] * h[k]).collect();
            let xrh = cat(x, &rh);
            let mut h2 = vec![0.0; n];
            for k in 0..n {
                let cand = (mv(&self.w[2 * n + k..2 * n + k + 1].to_vec(), &xrh)[0]
                    + self.b[2 * n + k])
                    .tanh();
                h2[k] = (1.0 - z[k]) * cand + z[k] * h[k];
            }
            (h2, Vec::new())
        }
    }
}

fn ocell(c: &morphdis::seq2seq::cell::Cell<f64>) -> OCell {
    OCell {
        w: mat(&c.w),
        b: c.b.data().to_vec(),
        gru: c.kind == CellKind::Gru,
    }
}

/// Per-step (probabilities, attention) for a teacher-forced prefix.
fn oracle(m: &Model<f64>, src: &[usize], prefix: &[usize]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let p = &m.params;
    let hd = m.config.hidden_dim;
    let gru = m.config.cell == CellKind::Gru;
    let zero_c = |n: usize| if gru { Vec::new() } else { vec![0.0; n] };
    let src_emb = mat(&p.src_emb);
    let tgt_emb = mat(&p.tgt_emb);

    let mut xs: M = src.iter().map(|&i| src_emb[i].clone()).collect();
    let mut dec_init = Vec::new();
    for layer in &p.encoder {
        let (fw, bw) = (ocell(&layer.fwd), ocell(&layer.bwd));
        let pw = mat(&layer.proj_w);
        let pb = layer.proj_b.data().to_vec();
        let mut hf = Vec::new();
        let (mut h, mut c) = (vec![0.0; hd], zero_c(hd));
        for x in &xs {
            let s = fw.step(x, &h, &c);
            h = s.0;
            c = s.1;
            hf.push(h.clone());
        }
        let (fh, fc) = (h, c);
        let mut hb = vec![Vec::new(); xs.len()];
        let (mut h, mut c) = (vec![0.0; hd], zero_c(hd));
        for t in (0..xs.len()).rev() {
            let s = bw.step(&xs[t], &h, &c);
            h = s.0;
            c = s.1;
            hb[t] = h.clone();
        }
        let init_h = add(&mv(&pw, &cat(&fh, &h)), &pb);
        let init_c = if gru {
            Vec::new()
        } else {
            add(&mv(&pw, &cat(&fc, &c)), &pb)
        };
        dec_init.push((init_h, init_c));
        xs = (0..xs.len())
            .map(|t| add(&mv(&pw, &cat(&hf[t], &hb[t])), &pb))
            .collect();
    }
    let memory = xs;

    let wa = mat(&p.attn);
    let wc = mat(&p.combine);
    let wo = mat(&p.out_w);
    let bo = p.out_b.data().to_vec();
    let cells: Vec<OCell> = p.decoder.iter().map(ocell).collect();
    let mut states = dec_init;
    let mut htilde = vec![0.0; hd];
    let mut out = Vec::new();
    for &y in prefix {
        let mut x = cat(&tgt_emb[y], &htilde);
        for (l, cell) in cells.iter().enumerate() {
            let (h, c) = cell.step(&x, &states[l].0, &states[l].1);
            x = h.clone();
            states[l] = (h, c);
        }
        let ht = x;
        let scores: Vec<f64> = memory
            .iter()
            .map(|hs| {
                let k = mv(&wa, hs);
                ht.iter().zip(&k).map(|(a, b)| a * b).sum()
            })
            .collect();
        let a = softmax(&scores);
        let mut ctx = vec![0.0; hd];
        for (w, hs) in a.iter().zip(&memory) {
            for k in 0..hd {
                ctx[k] += w * hs[k];
            }
        }
        htilde = mv(&wc, &cat(&ctx, &ht)).iter().map(|v| v.tanh()).collect();
        let probs = softmax(&add(&mv(&wo, &htilde), &bo));
        out.push((probs, a));
    }
    out
}

fn model(cell: CellKind) -> Model<f64> {
    let v = |t: &[&str]| Vocabulary::from_tokens(t.iter().map(|s| s.to_string()).collect());
    let mc = ModelConfig {
        emb_dim: 5,
        hidden_dim: 6,
        cell,
        seed: 7,
        init_range: 0.4,
        ..ModelConfig::default()
    };
    Model::new(
        mc,
        v(&["Adv", "_", "N", "Sg"]),
        v(&["Adv", "_", "N", "Number=Sing"]),
    )
    .unwrap()
}

fn compare(cell: CellKind) {
    let m = model(cell);
    let src = [4, 5, 6];
    let prefix = [1, 4, 5, 7, 6];
    let got = m.forward(&src, &prefix).unwrap();
    let want = oracle(&m, &src, &prefix);
    assert_eq!(got.probs.len(), want.len());
    for (t, (p, a)) in want.iter().enumerate() {
        for (x, y) in got.probs[t].iter().zip(p) {
            assert!((x - y).abs() < 1e-12, "{cell:?} step {t}: {x} vs {y}");
        }
        for (x, y) in got.attention[t].iter().zip(a) {
            assert!((x - y).abs() < 1e-12, "{cell:?} attention {t}: {x} vs {y}");
        }
    }
    let loss: f64 = want
        .iter()
        .zip([4, 5, 7, 6, 2])
        .map(|((p, _), y)| -p[y].ln())
        .sum();
    assert!((m.loss(&src, &[4, 5, 7, 6]).unwrap() - loss).abs() < 1e-10);
}

#[test]
fn lstm_forward_matches_oracle() {
    compare(CellKind::Lstm);
}

#[test]
fn gru_forward_matches_oracle() {
    compare(CellKind::Gru);
}
