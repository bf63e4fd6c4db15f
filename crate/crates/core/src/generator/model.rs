//! Recurrent cell, action heads and their backward passes.

use super::params::{ModelParams, Tensor};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// out[i] += sum_j w[i, j] x[j]
pub(crate) fn matvec_add(w: &[f64], cols: usize, x: &[f64], out: &mut [f64]) {
    for (row, o) in w.chunks_exact(cols).zip(out.iter_mut()) {
        *o += dot(row, x);
    }
}

/// out[j] += sum_i w[i, j] y[i]
fn matvec_t_add(w: &[f64], cols: usize, y: &[f64], out: &mut [f64]) {
    for (row, &yi) in w.chunks_exact(cols).zip(y) {
        if yi != 0.0 {
            axpy(yi, row, out);
        }
    }
}

/// g[i, j] += y[i] x[j]
fn outer_add(g: &mut [f64], cols: usize, y: &[f64], x: &[f64]) {
    for (row, &yi) in g.chunks_exact_mut(cols).zip(y) {
        if yi != 0.0 {
            axpy(yi, x, row);
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn axpy(k: f64, x: &[f64], out: &mut [f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += k * v;
    }
}

/// Values kept from one recurrent step for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub un_h: Vec<f64>,
    pub h: Vec<f64>,
}

/// z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br),
/// n = tanh(Wn x + r * (Un h) + bn), h' = (1 - z) n + z h
pub(crate) fn gru_forward(p: &ModelParams, x: &[f64], h_prev: &[f64]) -> GruCache {
    let dims = p.dims();
    let (d, hs) = (dims.d, dims.h);
    let gate = |w: Tensor, u: Tensor, b: Tensor| {
        let mut v = p.get(b).to_vec();
        matvec_add(p.get(w), d, x, &mut v);
        matvec_add(p.get(u), hs, h_prev, &mut v);
        v.iter_mut().for_each(|a| *a = sigmoid(*a));
        v
    };
    let z = gate(Tensor::Wz, Tensor::Uz, Tensor::Bz);
    let r = gate(Tensor::Wr, Tensor::Ur, Tensor::Br);
    let mut un_h = vec![0.0; hs];
    matvec_add(p.get(Tensor::Un), hs, h_prev, &mut un_h);
    let mut n = p.get(Tensor::Bn).to_vec();
    matvec_add(p.get(Tensor::Wn), d, x, &mut n);
    for i in 0..hs {
        n[i] = (n[i] + r[i] * un_h[i]).tanh();
    }
    let h: Vec<f64> = (0..hs).map(|i| (1.0 - z[i]) * n[i] + z[i] * h_prev[i]).collect();
    GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        n,
        un_h,
        h,
    }
}

/// Accumulates parameter gradients into `g`; returns (dx, dh_prev).
pub(crate) fn gru_backward(
    p: &ModelParams,
    c: &GruCache,
    dh: &[f64],
    g: &mut ModelParams,
) -> (Vec<f64>, Vec<f64>) {
    let dims = *p.dims();
    let (d, hs) = (dims.d, dims.h);
    let mut dx = vec![0.0; d];
    let mut dh_prev: Vec<f64> = (0..hs).map(|i| dh[i] * c.z[i]).collect();
    let dn_pre: Vec<f64> = (0..hs)
        .map(|i| dh[i] * (1.0 - c.z[i]) * (1.0 - c.n[i] * c.n[i]))
        .collect();
    let dz_pre: Vec<f64> = (0..hs)
        .map(|i| dh[i] * (c.h_prev[i] - c.n[i]) * c.z[i] * (1.0 - c.z[i]))
        .collect();
    let dr_pre: Vec<f64> = (0..hs)
        .map(|i| dn_pre[i] * c.un_h[i] * c.r[i] * (1.0 - c.r[i]))
        .collect();
    let dun: Vec<f64> = (0..hs).map(|i| dn_pre[i] * c.r[i]).collect();

    outer_add(g.get_mut(Tensor::Wn), d, &dn_pre, &c.x);
    axpy(1.0, &dn_pre, g.get_mut(Tensor::Bn));
    matvec_t_add(p.get(Tensor::Wn), d, &dn_pre, &mut dx);
    outer_add(g.get_mut(Tensor::Un), hs, &dun, &c.h_prev);
    matvec_t_add(p.get(Tensor::Un), hs, &dun, &mut dh_prev);

    for (pre, w, u, b) in [
        (&dz_pre, Tensor::Wz, Tensor::Uz, Tensor::Bz),
        (&dr_pre, Tensor::Wr, Tensor::Ur, Tensor::Br),
    ] {
        outer_add(g.get_mut(w), d, pre, &c.x);
        outer_add(g.get_mut(u), hs, pre, &c.h_prev);
        axpy(1.0, pre, g.get_mut(b));
        matvec_t_add(p.get(w), d, pre, &mut dx);
        matvec_t_add(p.get(u), hs, pre, &mut dh_prev);
    }
    (dx, dh_prev)
}

/// Logits of a two-way head (node-add or stop).
pub(crate) fn binary_logits(p: &ModelParams, w: Tensor, b: Tensor, ctx: &[f64]) -> [f64; 2] {
    let mut l = [0.0; 2];
    l.copy_from_slice(p.get(b));
    matvec_add(p.get(w), p.dims().h, ctx, &mut l);
    l
}

pub(crate) fn binary_backward(
    p: &ModelParams,
    w: Tensor,
    b: Tensor,
    ctx: &[f64],
    dl: &[f64],
    g: &mut ModelParams,
    dctx: &mut [f64],
) {
    let hs = p.dims().h;
    outer_add(g.get_mut(w), hs, dl, ctx);
    axpy(1.0, dl, g.get_mut(b));
    matvec_t_add(p.get(w), hs, dl, dctx);
}

/// Query vector of the identity or connectivity head.
pub(crate) fn query(p: &ModelParams, w: Tensor, b: Tensor, ctx: &[f64]) -> Vec<f64> {
    let mut q = p.get(b).to_vec();
    matvec_add(p.get(w), p.dims().h, ctx, &mut q);
    q
}

pub(crate) fn query_backward(
    p: &ModelParams,
    w: Tensor,
    b: Tensor,
    ctx: &[f64],
    dq: &[f64],
    g: &mut ModelParams,
    dctx: &mut [f64],
) {
    let hs = p.dims().h;
    outer_add(g.get_mut(w), hs, dq, ctx);
    axpy(1.0, dq, g.get_mut(b));
    matvec_t_add(p.get(w), hs, dq, dctx);
}

/// Masked log-softmax cross-entropy of `target`: returns the loss and the
/// gradient with respect to the logits (zero on masked entries).
pub(crate) fn masked_xent(logits: &[f64], valid: &[bool], target: usize) -> (f64, Vec<f64>) {
    let probs = masked_softmax(logits, valid, 1.0);
    let loss = -probs[target].ln();
    let mut dl = probs;
    dl[target] -= 1.0;
    (loss, dl)
}

/// Softmax over valid entries of logits / temperature; masked entries are 0.
pub(crate) fn masked_softmax(logits: &[f64], valid: &[bool], temperature: f64) -> Vec<f64> {
    let m = logits
        .iter()
        .zip(valid)
        .filter(|(_, &v)| v)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits
        .iter()
        .zip(valid)
        .map(|(l, &v)| if v { ((l - m) / temperature).exp() } else { 0.0 })
        .collect();
    let s: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= s);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_masks_exactly() {
        let p = masked_softmax(&[1.0, 5.0, 2.0], &[true, false, true], 1.0);
        assert_eq!(p[1], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let (loss, dl) = masked_xent(&[3.0, 1.0], &[false, true], 1);
        assert_eq!(loss, 0.0);
        assert_eq!(dl, vec![0.0, 0.0]);
        let (loss, _) = masked_xent(&[0.0, 0.0], &[true, true], 0);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
