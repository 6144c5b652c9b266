//! Multi-head self-attention and the post-norm transformer layer,
//! operating on a [`ParamSet`] through a path prefix.
//!
//! Sequences are flattened: activations are (batch * seq, dim) with
//! batch and seq passed alongside. `mask[b * seq + j] == true` marks
//! position j of sentence b as padding; masked positions are removed
//! from the attention keys by a -1e9 score bias.

use super::norm::{layernorm_backward, layernorm_forward, LnCache, LN_EPS};
use super::ops::{dense_backward, dense_forward, relu_backward, relu_forward};
use super::{NnError, ParamSet, Tensor};
use crate::rng::Rng64;

const MASK_BIAS: f64 = -1e9;

/// y = x @ w + b with parameters `{prefix}.w`, `{prefix}.b`.
pub fn dense_forward_ps(ps: &ParamSet, prefix: &str, x: &Tensor) -> Result<Tensor, NnError> {
    dense_forward(
        ps.value(&format!("{prefix}.w")),
        ps.value(&format!("{prefix}.b")),
        x,
    )
}

/// Accumulates dw/db for `{prefix}` and returns dx.
pub fn dense_backward_ps(ps: &mut ParamSet, prefix: &str, x: &Tensor, dy: &Tensor) -> Tensor {
    let w_path = format!("{prefix}.w");
    let b_path = format!("{prefix}.b");
    // Split the update so we never hold two mutable borrows at once.
    let w = ps.value(&w_path).clone();
    let mut dw = Tensor::zeros(&w.shape);
    let mut db = Tensor::zeros(&[w.shape[1]]);
    let dx = dense_backward(&w, x, dy, &mut dw, &mut db);
    ps.accumulate_grad(&w_path, &dw);
    ps.accumulate_grad(&b_path, &db);
    dx
}

pub fn layernorm_forward_ps(ps: &ParamSet, prefix: &str, x: &Tensor) -> (Tensor, LnCache) {
    layernorm_forward(
        ps.value(&format!("{prefix}.gamma")),
        ps.value(&format!("{prefix}.beta")),
        x,
        LN_EPS,
    )
}

pub fn layernorm_backward_ps(
    ps: &mut ParamSet,
    prefix: &str,
    cache: &LnCache,
    dy: &Tensor,
) -> Tensor {
    let gamma_path = format!("{prefix}.gamma");
    let beta_path = format!("{prefix}.beta");
    let gamma = ps.value(&gamma_path).clone();
    let mut dgamma = Tensor::zeros(&gamma.shape);
    let mut dbeta = Tensor::zeros(&gamma.shape);
    let dx = layernorm_backward(&gamma, cache, dy, &mut dgamma, &mut dbeta);
    ps.accumulate_grad(&gamma_path, &dgamma);
    ps.accumulate_grad(&beta_path, &dbeta);
    dx
}

/// Everything the attention backward needs.
#[derive(Debug, Clone)]
pub struct MhaCache {
    x: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// Attention weights, (batch * heads * seq, seq) row-major.
    attn: Tensor,
    ctx: Tensor,
    batch: usize,
    seq: usize,
    heads: usize,
}

/// Inserts q/k/v/o projection parameters under `prefix`.
pub fn insert_attention(ps: &mut ParamSet, prefix: &str, dim: usize, rng: &mut Rng64) {
    for name in ["q", "k", "v", "o"] {
        super::insert_dense(ps, &format!("{prefix}.{name}"), dim, dim, rng);
    }
}

/// Scaled dot-product multi-head self-attention.
pub fn multihead_attention_forward(
    ps: &ParamSet,
    prefix: &str,
    x: &Tensor,
    batch: usize,
    seq: usize,
    heads: usize,
    mask: Option<&[bool]>,
) -> Result<(Tensor, MhaCache), NnError> {
    let (rows, dim) = x.dims2();
    assert_eq!(rows, batch * seq, "rows must equal batch * seq");
    if dim % heads != 0 {
        return Err(NnError::HeadSplit { dim, heads });
    }
    if let Some(m) = mask {
        assert_eq!(m.len(), rows, "mask must cover every position");
    }
    let dh = dim / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let q = dense_forward_ps(ps, &format!("{prefix}.q"), x)?;
    let k = dense_forward_ps(ps, &format!("{prefix}.k"), x)?;
    let v = dense_forward_ps(ps, &format!("{prefix}.v"), x)?;

    let mut attn = Tensor::zeros(&[batch * heads * seq, seq]);
    let mut ctx = Tensor::zeros(&[rows, dim]);
    let mut scores = vec![0.0; seq];
    for b in 0..batch {
        for h in 0..heads {
            let col = h * dh;
            for i in 0..seq {
                let q_row = &q.data[(b * seq + i) * dim + col..(b * seq + i) * dim + col + dh];
                for (j, s) in scores.iter_mut().enumerate() {
                    let k_row = &k.data[(b * seq + j) * dim + col..(b * seq + j) * dim + col + dh];
                    let dot: f64 = q_row.iter().zip(k_row).map(|(a, c)| a * c).sum();
                    *s = dot * scale
                        + if mask.is_some_and(|m| m[b * seq + j]) {
                            MASK_BIAS
                        } else {
                            0.0
                        };
                }
                // Row softmax with max shift.
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let a_row_base = ((b * heads + h) * seq + i) * seq;
                let mut sum = 0.0;
                for (j, &s) in scores.iter().enumerate() {
                    let e = (s - max).exp();
                    attn.data[a_row_base + j] = e;
                    sum += e;
                }
                for j in 0..seq {
                    attn.data[a_row_base + j] /= sum;
                }
                // Context = attn-weighted values.
                for j in 0..seq {
                    let w = attn.data[a_row_base + j];
                    if w == 0.0 {
                        continue;
                    }
                    let v_row = &v.data[(b * seq + j) * dim + col..(b * seq + j) * dim + col + dh];
                    let c_row =
                        &mut ctx.data[(b * seq + i) * dim + col..(b * seq + i) * dim + col + dh];
                    for (c, vv) in c_row.iter_mut().zip(v_row) {
                        *c += w * vv;
                    }
                }
            }
        }
    }
    let y = dense_forward_ps(ps, &format!("{prefix}.o"), &ctx)?;
    Ok((
        y,
        MhaCache {
            x: x.clone(),
            q,
            k,
            v,
            attn,
            ctx,
            batch,
            seq,
            heads,
        },
    ))
}

/// Backward of [`multihead_attention_forward`]; returns dx.
pub fn multihead_attention_backward(
    ps: &mut ParamSet,
    prefix: &str,
    cache: &MhaCache,
    dy: &Tensor,
) -> Tensor {
    let (rows, dim) = cache.x.dims2();
    let (batch, seq, heads) = (cache.batch, cache.seq, cache.heads);
    let dh = dim / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let dctx = dense_backward_ps(ps, &format!("{prefix}.o"), &cache.ctx, dy);

    let mut dq = Tensor::zeros(&[rows, dim]);
    let mut dk = Tensor::zeros(&[rows, dim]);
    let mut dv = Tensor::zeros(&[rows, dim]);
    let mut dattn = vec![0.0; seq];
    let mut dscore = vec![0.0; seq];
    for b in 0..batch {
        for h in 0..heads {
            let col = h * dh;
            for i in 0..seq {
                let a_row_base = ((b * heads + h) * seq + i) * seq;
                let dctx_row =
                    &dctx.data[(b * seq + i) * dim + col..(b * seq + i) * dim + col + dh];
                // dattn and dv.
                for (j, da) in dattn.iter_mut().enumerate() {
                    let v_row =
                        &cache.v.data[(b * seq + j) * dim + col..(b * seq + j) * dim + col + dh];
                    *da = dctx_row.iter().zip(v_row).map(|(a, c)| a * c).sum();
                    let w = cache.attn.data[a_row_base + j];
                    if w != 0.0 {
                        let dv_row =
                            &mut dv.data[(b * seq + j) * dim + col..(b * seq + j) * dim + col + dh];
                        for (d, g) in dv_row.iter_mut().zip(dctx_row) {
                            *d += w * g;
                        }
                    }
                }
                // Softmax backward.
                let attn_row = &cache.attn.data[a_row_base..a_row_base + seq];
                let dot: f64 = attn_row.iter().zip(&dattn).map(|(a, d)| a * d).sum();
                for ((ds, &a), &da) in dscore.iter_mut().zip(attn_row).zip(&dattn) {
                    *ds = a * (da - dot);
                }
                // dq and dk.
                let dq_row =
                    &mut dq.data[(b * seq + i) * dim + col..(b * seq + i) * dim + col + dh];
                for (j, &dsj) in dscore.iter().enumerate() {
                    let ds = dsj * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    let k_row =
                        &cache.k.data[(b * seq + j) * dim + col..(b * seq + j) * dim + col + dh];
                    for (d, kk) in dq_row.iter_mut().zip(k_row) {
                        *d += ds * kk;
                    }
                    let q_row =
                        &cache.q.data[(b * seq + i) * dim + col..(b * seq + i) * dim + col + dh];
                    let dk_row =
                        &mut dk.data[(b * seq + j) * dim + col..(b * seq + j) * dim + col + dh];
                    for (d, qq) in dk_row.iter_mut().zip(q_row) {
                        *d += ds * qq;
                    }
                }
            }
        }
    }

    let mut dx = dense_backward_ps(ps, &format!("{prefix}.q"), &cache.x, &dq);
    let dx_k = dense_backward_ps(ps, &format!("{prefix}.k"), &cache.x, &dk);
    let dx_v = dense_backward_ps(ps, &format!("{prefix}.v"), &cache.x, &dv);
    for ((a, b2), c) in dx.data.iter_mut().zip(&dx_k.data).zip(&dx_v.data) {
        *a += b2 + c;
    }
    dx
}

/// Post-norm transformer layer cache.
#[derive(Debug, Clone)]
pub struct LayerCache {
    attn: MhaCache,
    ln1: LnCache,
    n1: Tensor,
    /// Post-ReLU hidden activation of the feed-forward block.
    hidden: Tensor,
    ln2: LnCache,
}

/// Inserts one transformer layer's parameters under `prefix`.
pub fn insert_transformer_layer(
    ps: &mut ParamSet,
    prefix: &str,
    dim: usize,
    ff_dim: usize,
    rng: &mut Rng64,
) {
    insert_attention(ps, &format!("{prefix}.attn"), dim, rng);
    super::insert_layernorm(ps, &format!("{prefix}.ln1"), dim);
    super::insert_dense(ps, &format!("{prefix}.ff1"), dim, ff_dim, rng);
    super::insert_dense(ps, &format!("{prefix}.ff2"), ff_dim, dim, rng);
    super::insert_layernorm(ps, &format!("{prefix}.ln2"), dim);
}

/// Attention sublayer + residual + norm, then feed-forward sublayer +
/// residual + norm.
pub fn transformer_layer_forward(
    ps: &ParamSet,
    prefix: &str,
    x: &Tensor,
    batch: usize,
    seq: usize,
    heads: usize,
    mask: Option<&[bool]>,
) -> Result<(Tensor, LayerCache), NnError> {
    let (a, attn_cache) =
        multihead_attention_forward(ps, &format!("{prefix}.attn"), x, batch, seq, heads, mask)?;
    let r1 = add(x, &a);
    let (n1, ln1) = layernorm_forward_ps(ps, &format!("{prefix}.ln1"), &r1);
    let pre = dense_forward_ps(ps, &format!("{prefix}.ff1"), &n1)?;
    let hidden = relu_forward(&pre);
    let f = dense_forward_ps(ps, &format!("{prefix}.ff2"), &hidden)?;
    let r2 = add(&n1, &f);
    let (y, ln2) = layernorm_forward_ps(ps, &format!("{prefix}.ln2"), &r2);
    Ok((
        y,
        LayerCache {
            attn: attn_cache,
            ln1,
            n1,
            hidden,
            ln2,
        },
    ))
}

/// Backward of [`transformer_layer_forward`]; returns dx.
pub fn transformer_layer_backward(
    ps: &mut ParamSet,
    prefix: &str,
    cache: &LayerCache,
    dy: &Tensor,
) -> Tensor {
    let dr2 = layernorm_backward_ps(ps, &format!("{prefix}.ln2"), &cache.ln2, dy);
    let dh = dense_backward_ps(ps, &format!("{prefix}.ff2"), &cache.hidden, &dr2);
    let dpre = relu_backward(&cache.hidden, &dh);
    let dn1_ff = dense_backward_ps(ps, &format!("{prefix}.ff1"), &cache.n1, &dpre);
    let dn1 = add(&dr2, &dn1_ff);
    let dr1 = layernorm_backward_ps(ps, &format!("{prefix}.ln1"), &cache.ln1, &dn1);
    let dx_attn = multihead_attention_backward(ps, &format!("{prefix}.attn"), &cache.attn, &dr1);
    add(&dr1, &dx_attn)
}

fn add(a: &Tensor, b: &Tensor) -> Tensor {
    debug_assert_eq!(a.shape, b.shape);
    Tensor::from_vec(
        &a.shape,
        a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect(),
    )
}
