//! LSTM and GRU cells with explicit backward passes.
//!
//! Gate weights for one cell live in a single matrix over the concatenated
//! input `[x; h]`. LSTM rows are ordered input, forget, candidate, output.
//! GRU rows are reset, update, candidate; the candidate sees `[x; r ⊙ h]`.

#![allow(clippy::needless_range_loop)]

use serde::{Deserialize, Serialize};

use super::tensor::{axpy, dot, sigmoid, Matrix, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    #[default]
    Lstm,
    Gru,
}

impl CellKind {
    pub fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            CellKind::Lstm => 0,
            CellKind::Gru => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(CellKind::Lstm),
            1 => Some(CellKind::Gru),
            _ => None,
        }
    }
}

impl std::str::FromStr for CellKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(format!("unknown cell {other:?} (lstm or gru)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell<T> {
    pub kind: CellKind,
    pub hidden: usize,
    pub input: usize,
    pub w: Matrix<T>,
    pub b: Matrix<T>,
}

/// Recurrent state; `c` is empty for GRU.
#[derive(Debug, Clone, PartialEq)]
pub struct State<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

impl<T: Scalar> State<T> {
    pub fn zeros(kind: CellKind, hidden: usize) -> Self {
        State {
            h: vec![T::zero(); hidden],
            c: match kind {
                CellKind::Lstm => vec![T::zero(); hidden],
                CellKind::Gru => Vec::new(),
            },
        }
    }
}

/// Forward values kept for backpropagation.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    /// `[x; h_prev]`
    xh: Vec<T>,
    /// Activated gates.
    gates: Vec<T>,
    c_prev: Vec<T>,
    tanh_c: Vec<T>,
    /// GRU candidate input `[x; r ⊙ h_prev]`.
    xrh: Vec<T>,
}

/// Gradients leaving a step.
pub struct StepGrads<T> {
    pub dx: Vec<T>,
    pub dh_prev: Vec<T>,
    pub dc_prev: Vec<T>,
}

impl<T: Scalar> Cell<T> {
    pub fn zeros(kind: CellKind, input: usize, hidden: usize) -> Self {
        Cell {
            kind,
            hidden,
            input,
            w: Matrix::zeros(kind.gates() * hidden, input + hidden),
            b: Matrix::zeros(kind.gates() * hidden, 1),
        }
    }

    pub fn step(&self, x: &[T], state: &State<T>) -> (State<T>, StepCache<T>) {
        debug_assert_eq!(x.len(), self.input);
        let h = self.hidden;
        let mut xh = Vec::with_capacity(self.input + h);
        xh.extend_from_slice(x);
        xh.extend_from_slice(&state.h);
        match self.kind {
            CellKind::Lstm => {
                let mut gates = self.w.matvec(&xh, Some(&self.b));
                for (k, g) in gates.iter_mut().enumerate() {
                    *g = if (2 * h..3 * h).contains(&k) {
                        g.tanh()
                    } else {
                        sigmoid(*g)
                    };
                }
                let (i, rest) = gates.split_at(h);
                let (f, rest) = rest.split_at(h);
                let (g, o) = rest.split_at(h);
                let c: Vec<T> = (0..h).map(|k| f[k] * state.c[k] + i[k] * g[k]).collect();
                let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
                let h_new = (0..h).map(|k| o[k] * tanh_c[k]).collect();
                let cache = StepCache {
                    xh,
                    c_prev: state.c.clone(),
                    tanh_c,
                    gates,
                    xrh: Vec::new(),
                };
                (State { h: h_new, c }, cache)
            }
            CellKind::Gru => {
                let mut gates = vec![T::zero(); 3 * h];
                for k in 0..2 * h {
                    gates[k] = sigmoid(self.b.data()[k] + dot(self.w.row(k), &xh));
                }
                let mut xrh = xh.clone();
                for k in 0..h {
                    xrh[self.input + k] = gates[k] * state.h[k];
                }
                for k in 0..h {
                    let row = 2 * h + k;
                    gates[row] = (self.b.data()[row] + dot(self.w.row(row), &xrh)).tanh();
                }
                let h_new = (0..h)
                    .map(|k| {
                        let z = gates[h + k];
                        (T::one() - z) * gates[2 * h + k] + z * state.h[k]
                    })
                    .collect();
                let cache = StepCache {
                    xh,
                    gates,
                    c_prev: Vec::new(),
                    tanh_c: Vec::new(),
                    xrh,
                };
                (
                    State {
                        h: h_new,
                        c: Vec::new(),
                    },
                    cache,
                )
            }
        }
    }

    /// Backpropagates `dh`/`dc` through one step, accumulating into `grad`.
    pub fn backward(
        &self,
        cache: &StepCache<T>,
        dh: &[T],
        dc: &[T],
        grad: &mut Cell<T>,
    ) -> StepGrads<T> {
        let h = self.hidden;
        let one = T::one();
        match self.kind {
            CellKind::Lstm => {
                let gates = &cache.gates;
                let mut dpre = vec![T::zero(); 4 * h];
                let mut dc_prev = vec![T::zero(); h];
                for k in 0..h {
                    let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                    let tc = cache.tanh_c[k];
                    let dct = dc[k] + dh[k] * o * (one - tc * tc);
                    dpre[k] = dct * g * i * (one - i);
                    dpre[h + k] = dct * cache.c_prev[k] * f * (one - f);
                    dpre[2 * h + k] = dct * i * (one - g * g);
                    dpre[3 * h + k] = dh[k] * tc * o * (one - o);
                    dc_prev[k] = dct * f;
                }
                grad.w.outer_acc(&dpre, &cache.xh);
                grad.b.add_vec(&dpre);
                let mut dxh = vec![T::zero(); self.input + h];
                self.w.matvec_t_acc(&dpre, &mut dxh);
                let dh_prev = dxh.split_off(self.input);
                StepGrads {
                    dx: dxh,
                    dh_prev,
                    dc_prev,
                }
            }
            CellKind::Gru => {
                let gates = &cache.gates;
                let h_prev = &cache.xh[self.input..];
                let mut dh_prev = vec![T::zero(); h];
                let mut dn_pre = vec![T::zero(); h];
                let mut drz_pre = vec![T::zero(); 2 * h];
                for k in 0..h {
                    let (z, n) = (gates[h + k], gates[2 * h + k]);
                    let dz = dh[k] * (h_prev[k] - n);
                    dn_pre[k] = dh[k] * (one - z) * (one - n * n);
                    drz_pre[h + k] = dz * z * (one - z);
                    dh_prev[k] = dh[k] * z;
                }
                // candidate rows
                let mut dxrh = vec![T::zero(); self.input + h];
                for k in 0..h {
                    let row = 2 * h + k;
                    axpy(dn_pre[k], &cache.xrh, grad.w.row_mut(row));
                    grad.b.data_mut()[row] += dn_pre[k];
                    axpy(dn_pre[k], self.w.row(row), &mut dxrh);
                }
                for k in 0..h {
                    let r = gates[k];
                    let d_rh = dxrh[self.input + k];
                    drz_pre[k] = d_rh * h_prev[k] * r * (one - r);
                    dh_prev[k] += d_rh * r;
                }
                let mut dx = dxrh;
                dx.truncate(self.input);
                // reset and update rows see [x; h_prev]
                let mut dxh = vec![T::zero(); self.input + h];
                for k in 0..2 * h {
                    axpy(drz_pre[k], &cache.xh, grad.w.row_mut(k));
                    grad.b.data_mut()[k] += drz_pre[k];
                    axpy(drz_pre[k], self.w.row(k), &mut dxh);
                }
                axpy(one, &dxh[..self.input], &mut dx);
                axpy(one, &dxh[self.input..], &mut dh_prev);
                StepGrads {
                    dx,
                    dh_prev,
                    dc_prev: Vec::new(),
                }
            }
        }
    }
}
