//! Stacked LSTM over per-round features with a sigmoid output head.
//!
//! `z_t = W_in x_t + b_in`, then per layer (gates in order i, f, g, o):
//!
//! ```text
//! [i f g o] = [sig sig tanh sig](Wx u_t + Wh h_{t-1} + b)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```
//!
//! with `u_t` the layer input (`z_t` for the first layer). The logit is
//! `w_out . h_t + b_out` of the top layer. All parameters live in one flat
//! vector; [`Layout`] gives the offsets.
//!
//! Batches are stored batch-innermost (`[t][unit][b]`) so the inner loops
//! run over contiguous memory.

use rand::Rng;
use thiserror::Error;

use super::features::EncodedGame;
use crate::rng::SimRng;

#[derive(Debug, Error, PartialEq)]
pub enum ShapeError {
    #[error("expected {expected} parameters, got {got}")]
    Params { expected: usize, got: usize },
    #[error("input has {got} values, not a multiple of the input width {width}")]
    Input { width: usize, got: usize },
    #[error("shape must have positive input, hidden and layer sizes")]
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmShape {
    pub input: usize,
    pub hidden: usize,
    pub layers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerOffsets {
    /// `4H x in` input weights.
    pub wx: usize,
    /// `4H x H` recurrent weights.
    pub wh: usize,
    /// `4H` bias.
    pub b: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    /// `H x input` projection.
    pub w_in: usize,
    pub b_in: usize,
    pub layers: Vec<LayerOffsets>,
    pub w_out: usize,
    pub b_out: usize,
    pub len: usize,
}

impl Layout {
    pub fn new(s: LstmShape) -> Self {
        let h = s.hidden;
        let mut off = 0;
        let mut take = |n: usize| {
            let o = off;
            off += n;
            o
        };
        let w_in = take(h * s.input);
        let b_in = take(h);
        let layers = (0..s.layers)
            .map(|_| LayerOffsets { wx: take(4 * h * h), wh: take(4 * h * h), b: take(4 * h) })
            .collect();
        let w_out = take(h);
        let b_out = take(1);
        Layout { w_in, b_in, layers, w_out, b_out, len: off }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    shape: LstmShape,
    layout: Layout,
    pub params: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `max(l, 0) - l y + ln(1 + e^-|l|)`: cross-entropy of `sigmoid(l)` vs `y`.
pub fn bce_with_logit(logit: f64, y: f64) -> f64 {
    logit.max(0.0) - logit * y + (-logit.abs()).exp().ln_1p()
}

/// `out[M x B] += w[M x K] * x[K x B]`
fn matmul_acc(out: &mut [f64], w: &[f64], x: &[f64], m: usize, k: usize, b: usize) {
    for i in 0..m {
        let orow = &mut out[i * b..(i + 1) * b];
        let wrow = &w[i * k..(i + 1) * k];
        for (kk, &wik) in wrow.iter().enumerate() {
            let xrow = &x[kk * b..(kk + 1) * b];
            for (o, &xv) in orow.iter_mut().zip(xrow) {
                *o += wik * xv;
            }
        }
    }
}

/// `out[K x B] += w[M x K]^T * d[M x B]`
fn matmul_t_acc(out: &mut [f64], w: &[f64], d: &[f64], m: usize, k: usize, b: usize) {
    for i in 0..m {
        let drow = &d[i * b..(i + 1) * b];
        let wrow = &w[i * k..(i + 1) * k];
        for (kk, &wik) in wrow.iter().enumerate() {
            let orow = &mut out[kk * b..(kk + 1) * b];
            for (o, &dv) in orow.iter_mut().zip(drow) {
                *o += wik * dv;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            acc[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// `g[M x K] += d[M x B] * x[K x B]^T`
fn outer_acc(g: &mut [f64], d: &[f64], x: &[f64], m: usize, k: usize, b: usize) {
    for i in 0..m {
        let drow = &d[i * b..(i + 1) * b];
        for kk in 0..k {
            g[i * k + kk] += dot(drow, &x[kk * b..(kk + 1) * b]);
        }
    }
}

/// Padded batch: `x[(t * F + k) * B + b]`, `y` and `mask` as `[t][b]`.
struct Batch {
    b: usize,
    t: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    mask: Vec<f64>,
    n: usize,
}

impl Batch {
    fn new(games: &[&EncodedGame], width: usize) -> Self {
        let b = games.len();
        let t = games.iter().map(|g| g.len()).max().unwrap_or(0);
        let mut x = vec![0.0; t * width * b];
        let mut y = vec![0.0; t * b];
        let mut mask = vec![0.0; t * b];
        let mut n = 0;
        for (bi, g) in games.iter().enumerate() {
            for ti in 0..g.len() {
                for k in 0..width {
                    x[(ti * width + k) * b + bi] = g.x[ti * width + k];
                }
                y[ti * b + bi] = g.y[ti];
                mask[ti * b + bi] = 1.0;
                n += 1;
            }
        }
        Batch { b, t, x, y, mask, n }
    }
}

struct Cache {
    z: Vec<f64>,
    /// Per layer, `[t][4H][b]` activated gates.
    gates: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    tc: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

impl Lstm {
    pub fn zeros(shape: LstmShape) -> Result<Self, ShapeError> {
        if shape.input == 0 || shape.hidden == 0 || shape.layers == 0 {
            return Err(ShapeError::Degenerate);
        }
        let layout = Layout::new(shape);
        Ok(Lstm { shape, params: vec![0.0; layout.len], layout })
    }

    /// Uniform init on `[-1/sqrt(fan), 1/sqrt(fan)]`, fan being the input
    /// width for the projection and the hidden width elsewhere.
    pub fn init(shape: LstmShape, rng: &mut SimRng) -> Result<Self, ShapeError> {
        let mut m = Self::zeros(shape)?;
        let k_in = 1.0 / (shape.input as f64).sqrt();
        let k_h = 1.0 / (shape.hidden as f64).sqrt();
        let proj_end = m.layout.layers.first().map_or(m.layout.w_out, |l| l.wx);
        for (i, p) in m.params.iter_mut().enumerate() {
            let k = if i < proj_end { k_in } else { k_h };
            *p = rng.random_range(-k..=k);
        }
        Ok(m)
    }

    pub fn from_params(shape: LstmShape, params: Vec<f64>) -> Result<Self, ShapeError> {
        let mut m = Self::zeros(shape)?;
        if params.len() != m.params.len() {
            return Err(ShapeError::Params { expected: m.params.len(), got: params.len() });
        }
        m.params = params;
        Ok(m)
    }

    pub fn shape(&self) -> LstmShape {
        self.shape
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn run(&self, batch: &Batch) -> Cache {
        let (h, b, t_len) = (self.shape.hidden, batch.b, batch.t);
        let f_in = self.shape.input;
        let p = &self.params;
        let lay = &self.layout;
        let hb = h * b;
        let gb = 4 * hb;

        let mut z = vec![0.0; t_len * hb];
        for t in 0..t_len {
            let zt = &mut z[t * hb..(t + 1) * hb];
            for j in 0..h {
                zt[j * b..(j + 1) * b].fill(p[lay.b_in + j]);
            }
            matmul_acc(zt, &p[lay.w_in..lay.w_in + h * f_in], &batch.x[t * f_in * b..(t + 1) * f_in * b], h, f_in, b);
        }

        let n_layers = self.shape.layers;
        let mut gates = Vec::with_capacity(n_layers);
        let mut cs = Vec::with_capacity(n_layers);
        let mut tcs = Vec::with_capacity(n_layers);
        let mut hs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
        for (l, off) in lay.layers.iter().enumerate() {
            let input: &[f64] = if l == 0 { &z } else { &hs[l - 1] };
            let wx = &p[off.wx..off.wx + 4 * h * h];
            let wh = &p[off.wh..off.wh + 4 * h * h];
            let mut g = vec![0.0; t_len * gb];
            let mut c = vec![0.0; t_len * hb];
            let mut tc = vec![0.0; t_len * hb];
            let mut hh = vec![0.0; t_len * hb];
            for t in 0..t_len {
                let gt = &mut g[t * gb..(t + 1) * gb];
                for r in 0..4 * h {
                    gt[r * b..(r + 1) * b].fill(p[off.b + r]);
                }
                matmul_acc(gt, wx, &input[t * hb..(t + 1) * hb], 4 * h, h, b);
                if t > 0 {
                    matmul_acc(gt, wh, &hh[(t - 1) * hb..t * hb], 4 * h, h, b);
                }
                for v in gt[..2 * hb].iter_mut() {
                    *v = sigmoid(*v);
                }
                for v in gt[2 * hb..3 * hb].iter_mut() {
                    *v = v.tanh();
                }
                for v in gt[3 * hb..].iter_mut() {
                    *v = sigmoid(*v);
                }
                for e in 0..hb {
                    let c_prev = if t > 0 { c[(t - 1) * hb + e] } else { 0.0 };
                    let (i, f, gg, o) = (gt[e], gt[hb + e], gt[2 * hb + e], gt[3 * hb + e]);
                    let ct = f * c_prev + i * gg;
                    c[t * hb + e] = ct;
                    let th = ct.tanh();
                    tc[t * hb + e] = th;
                    hh[t * hb + e] = o * th;
                }
            }
            gates.push(g);
            cs.push(c);
            tcs.push(tc);
            hs.push(hh);
        }

        let top = &hs[n_layers - 1];
        let mut logits = vec![0.0; t_len * b];
        for t in 0..t_len {
            let lt = &mut logits[t * b..(t + 1) * b];
            lt.fill(p[lay.b_out]);
            matmul_acc(lt, &p[lay.w_out..lay.w_out + h], &top[t * hb..(t + 1) * hb], 1, h, b);
        }
        Cache { z, gates, c: cs, tc: tcs, h: hs, logits }
    }

    fn check_input(&self, x: &[f64]) -> Result<usize, ShapeError> {
        let w = self.shape.input;
        if !x.len().is_multiple_of(w) {
            return Err(ShapeError::Input { width: w, got: x.len() });
        }
        Ok(x.len() / w)
    }

    /// Per-round go probabilities for one sequence (row-major features).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ShapeError> {
        let len = self.check_input(x)?;
        let g = EncodedGame {
            dm_id: String::new(),
            expert: crate::experts::ExpertStrategy::Greedy,
            stage_index: 1,
            game_index: 1,
            x: x.to_vec(),
            y: vec![0.0; len],
        };
        Ok(self.predict_batch(&[&g]).remove(0))
    }

    /// Go probabilities for each game of the batch.
    pub fn predict_batch(&self, games: &[&EncodedGame]) -> Vec<Vec<f64>> {
        let batch = Batch::new(games, self.shape.input);
        let cache = self.run(&batch);
        games
            .iter()
            .enumerate()
            .map(|(bi, g)| (0..g.len()).map(|t| sigmoid(cache.logits[t * batch.b + bi])).collect())
            .collect()
    }

    /// Mean cross-entropy over every decision of the batch.
    pub fn loss(&self, games: &[&EncodedGame]) -> f64 {
        let batch = Batch::new(games, self.shape.input);
        let cache = self.run(&batch);
        Self::batch_loss(&batch, &cache)
    }

    fn batch_loss(batch: &Batch, cache: &Cache) -> f64 {
        let mut s = 0.0;
        for (i, &l) in cache.logits.iter().enumerate() {
            if batch.mask[i] != 0.0 {
                s += bce_with_logit(l, batch.y[i]);
            }
        }
        s / batch.n.max(1) as f64
    }

    /// Mean cross-entropy and its exact gradient (backpropagation through
    /// time).
    pub fn loss_and_gradient(&self, games: &[&EncodedGame]) -> (f64, Vec<f64>) {
        let batch = Batch::new(games, self.shape.input);
        let cache = self.run(&batch);
        let loss = Self::batch_loss(&batch, &cache);
        let (h, b, t_len, f_in) = (self.shape.hidden, batch.b, batch.t, self.shape.input);
        let hb = h * b;
        let gb = 4 * hb;
        let p = &self.params;
        let lay = &self.layout;
        let mut grad = vec![0.0; p.len()];
        let n = batch.n.max(1) as f64;

        let dlogit: Vec<f64> = cache
            .logits
            .iter()
            .zip(&batch.y)
            .zip(&batch.mask)
            .map(|((&l, &y), &m)| m * (sigmoid(l) - y) / n)
            .collect();

        let n_layers = self.shape.layers;
        let top = &cache.h[n_layers - 1];
        let mut dh_above = vec![0.0; t_len * hb];
        for t in 0..t_len {
            let dl = &dlogit[t * b..(t + 1) * b];
            grad[lay.b_out] += dl.iter().sum::<f64>();
            outer_acc(&mut grad[lay.w_out..lay.w_out + h], dl, &top[t * hb..(t + 1) * hb], 1, h, b);
            matmul_t_acc(&mut dh_above[t * hb..(t + 1) * hb], &p[lay.w_out..lay.w_out + h], dl, 1, h, b);
        }

        let mut da = vec![0.0; gb];
        for l in (0..n_layers).rev() {
            let off = lay.layers[l];
            let input: &[f64] = if l == 0 { &cache.z } else { &cache.h[l - 1] };
            let (g, c, tc, hh) = (&cache.gates[l], &cache.c[l], &cache.tc[l], &cache.h[l]);
            let wx = &p[off.wx..off.wx + 4 * h * h];
            let wh = &p[off.wh..off.wh + 4 * h * h];
            let mut dh_next = vec![0.0; hb];
            let mut dc_next = vec![0.0; hb];
            let mut d_below = vec![0.0; t_len * hb];
            for t in (0..t_len).rev() {
                let gt = &g[t * gb..(t + 1) * gb];
                for e in 0..hb {
                    let dh = dh_above[t * hb + e] + dh_next[e];
                    let (i, f, gg, o) = (gt[e], gt[hb + e], gt[2 * hb + e], gt[3 * hb + e]);
                    let th = tc[t * hb + e];
                    let c_prev = if t > 0 { c[(t - 1) * hb + e] } else { 0.0 };
                    let d_o = dh * th;
                    let dc = dh * o * (1.0 - th * th) + dc_next[e];
                    dc_next[e] = dc * f;
                    da[e] = dc * gg * i * (1.0 - i);
                    da[hb + e] = dc * c_prev * f * (1.0 - f);
                    da[2 * hb + e] = dc * i * (1.0 - gg * gg);
                    da[3 * hb + e] = d_o * o * (1.0 - o);
                }
                for r in 0..4 * h {
                    grad[off.b + r] += da[r * b..(r + 1) * b].iter().sum::<f64>();
                }
                outer_acc(&mut grad[off.wx..off.wx + 4 * h * h], &da, &input[t * hb..(t + 1) * hb], 4 * h, h, b);
                dh_next.fill(0.0);
                if t > 0 {
                    outer_acc(&mut grad[off.wh..off.wh + 4 * h * h], &da, &hh[(t - 1) * hb..t * hb], 4 * h, h, b);
                    matmul_t_acc(&mut dh_next, wh, &da, 4 * h, h, b);
                }
                matmul_t_acc(&mut d_below[t * hb..(t + 1) * hb], wx, &da, 4 * h, h, b);
            }
            dh_above = d_below;
        }

        for t in 0..t_len {
            let dz = &dh_above[t * hb..(t + 1) * hb];
            for j in 0..h {
                grad[lay.b_in + j] += dz[j * b..(j + 1) * b].iter().sum::<f64>();
            }
            outer_acc(&mut grad[lay.w_in..lay.w_in + h * f_in], dz, &batch.x[t * f_in * b..(t + 1) * f_in * b], h, f_in, b);
        }
        (loss, grad)
    }
}
