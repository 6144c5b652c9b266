//! Dense algebra: matmul kernels, dense layers, ReLU, softmax, and
//! masked cross-entropy, each with its hand-derived backward.

use super::{NnError, Tensor};

/// c = a @ b with a (m,k), b (k,n), all row-major.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    c.fill(0.0);
    for i in 0..m {
        let c_row = &mut c[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b[kk * n..(kk + 1) * n];
            for (cj, bj) in c_row.iter_mut().zip(b_row) {
                *cj += aik * bj;
            }
        }
    }
}

/// c += a @ b^T with a (m,n), b (k,n): used for dx = dy @ w^T.
pub fn matmul_bt_acc(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * k);
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for kk in 0..k {
            let b_row = &b[kk * n..(kk + 1) * n];
            let dot: f64 = a_row.iter().zip(b_row).map(|(x, y)| x * y).sum();
            c[i * k + kk] += dot;
        }
    }
}

/// c += a^T @ b with a (m,k), b (m,n): used for dw = x^T @ dy.
pub fn matmul_at_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, c: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(c.len(), k * n);
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for kk in 0..k {
            let aik = a[i * k + kk];
            if aik == 0.0 {
                continue;
            }
            let c_row = &mut c[kk * n..(kk + 1) * n];
            for (cj, bj) in c_row.iter_mut().zip(b_row) {
                *cj += aik * bj;
            }
        }
    }
}

/// y = x @ w + b, x (rows, in), w (in, out), b (out).
pub fn dense_forward(w: &Tensor, b: &Tensor, x: &Tensor) -> Result<Tensor, NnError> {
    let (rows, x_in) = x.dims2();
    let (w_in, w_out) = w.dims2();
    if x_in != w_in || b.numel() != w_out {
        return Err(NnError::Shape {
            expected: vec![x_in, w_out],
            got: w.shape.clone(),
        });
    }
    let mut y = Tensor::zeros(&[rows, w_out]);
    matmul(&x.data, &w.data, rows, x_in, w_out, &mut y.data);
    for r in 0..rows {
        let y_row = &mut y.data[r * w_out..(r + 1) * w_out];
        for (yj, bj) in y_row.iter_mut().zip(&b.data) {
            *yj += bj;
        }
    }
    Ok(y)
}

/// Backward of [`dense_forward`]: accumulates into `dw`, `db`; returns dx.
pub fn dense_backward(
    w: &Tensor,
    x: &Tensor,
    dy: &Tensor,
    dw: &mut Tensor,
    db: &mut Tensor,
) -> Tensor {
    let (rows, in_dim) = x.dims2();
    let (_, out_dim) = w.dims2();
    debug_assert_eq!(dy.shape, vec![rows, out_dim]);
    matmul_at_acc(&x.data, &dy.data, rows, in_dim, out_dim, &mut dw.data);
    for r in 0..rows {
        let dy_row = &dy.data[r * out_dim..(r + 1) * out_dim];
        for (dbj, dyj) in db.data.iter_mut().zip(dy_row) {
            *dbj += dyj;
        }
    }
    let mut dx = Tensor::zeros(&[rows, in_dim]);
    matmul_bt_acc(&dy.data, &w.data, rows, out_dim, in_dim, &mut dx.data);
    dx
}

/// Elementwise max(x, 0); the returned copy doubles as backward cache.
pub fn relu_forward(x: &Tensor) -> Tensor {
    Tensor::from_vec(&x.shape, x.data.iter().map(|&v| v.max(0.0)).collect())
}

pub fn relu_backward(y: &Tensor, dy: &Tensor) -> Tensor {
    Tensor::from_vec(
        &y.shape,
        y.data
            .iter()
            .zip(&dy.data)
            .map(|(&yi, &di)| if yi > 0.0 { di } else { 0.0 })
            .collect(),
    )
}

/// Row-wise softmax with max shift.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let (rows, cols) = x.dims2();
    let mut out = Tensor::zeros(&[rows, cols]);
    for r in 0..rows {
        let row = &x.data[r * cols..(r + 1) * cols];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out_row = &mut out.data[r * cols..(r + 1) * cols];
        let mut sum = 0.0;
        for (o, &v) in out_row.iter_mut().zip(row) {
            *o = (v - max).exp();
            sum += *o;
        }
        for o in out_row.iter_mut() {
            *o /= sum;
        }
    }
    out
}

/// Mean negative log-likelihood of `targets` under softmax(logits),
/// counting only rows where `include` is true. Returns the loss and
/// d(loss)/d(logits).
pub fn cross_entropy(
    logits: &Tensor,
    targets: &[u32],
    include: &[bool],
) -> Result<(f64, Tensor), NnError> {
    let (rows, vocab) = logits.dims2();
    if targets.len() != rows || include.len() != rows {
        return Err(NnError::Shape {
            expected: vec![rows],
            got: vec![targets.len()],
        });
    }
    let count = include.iter().filter(|&&m| m).count().max(1);
    let probs = softmax_rows(logits);
    let mut loss = 0.0;
    let mut dlogits = Tensor::zeros(&[rows, vocab]);
    for r in 0..rows {
        if !include[r] {
            continue;
        }
        let t = targets[r] as usize;
        if t >= vocab {
            return Err(NnError::IdOutOfRange(targets[r], vocab));
        }
        let p_row = &probs.data[r * vocab..(r + 1) * vocab];
        loss -= p_row[t].max(1e-300).ln();
        let d_row = &mut dlogits.data[r * vocab..(r + 1) * vocab];
        for (d, &p) in d_row.iter_mut().zip(p_row) {
            *d = p / count as f64;
        }
        d_row[t] -= 1.0 / count as f64;
    }
    Ok((loss / count as f64, dlogits))
}

/// Embedding lookup: ids -> rows of `table` as a (len(ids), dim) tensor.
pub fn embedding_forward(table: &Tensor, ids: &[u32]) -> Result<Tensor, NnError> {
    let (vocab, dim) = table.dims2();
    let mut out = Tensor::zeros(&[ids.len(), dim]);
    for (r, &id) in ids.iter().enumerate() {
        if id as usize >= vocab {
            return Err(NnError::IdOutOfRange(id, vocab));
        }
        let src = &table.data[id as usize * dim..(id as usize + 1) * dim];
        out.data[r * dim..(r + 1) * dim].copy_from_slice(src);
    }
    Ok(out)
}

/// Backward of the lookup: scatter-adds rows of `dy` into `dtable`.
pub fn embedding_backward(dtable: &mut Tensor, ids: &[u32], dy: &Tensor) {
    let (_, dim) = dtable.dims2();
    for (r, &id) in ids.iter().enumerate() {
        let dst = &mut dtable.data[id as usize * dim..(id as usize + 1) * dim];
        let src = &dy.data[r * dim..(r + 1) * dim];
        for (d, s) in dst.iter_mut().zip(src) {
            *d += s;
        }
    }
}

/// Sinusoidal positional encoding table, shape (max_len, dim).
pub fn positional_encoding(max_len: usize, dim: usize) -> Tensor {
    let mut pe = Tensor::zeros(&[max_len, dim]);
    for pos in 0..max_len {
        for i in 0..dim {
            let angle = pos as f64 / 10000f64.powf((2 * (i / 2)) as f64 / dim as f64);
            pe.data[pos * dim + i] = if i % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    pe
}
