//! Layer normalization over the last dimension.

use super::Tensor;

pub const LN_EPS: f64 = 1e-5;

/// Cache for the backward pass.
#[derive(Debug, Clone)]
pub struct LnCache {
    /// Normalized inputs (x - mean) * rstd.
    pub xhat: Tensor,
    /// 1 / sqrt(var + eps) per row.
    pub rstd: Vec<f64>,
}

/// y = gamma * (x - mean) / sqrt(var + eps) + beta, per row.
pub fn layernorm_forward(gamma: &Tensor, beta: &Tensor, x: &Tensor, eps: f64) -> (Tensor, LnCache) {
    let (rows, cols) = x.dims2();
    assert!(cols >= 2, "layer norm needs at least 2 features");
    assert_eq!(gamma.numel(), cols);
    assert_eq!(beta.numel(), cols);
    let mut y = Tensor::zeros(&[rows, cols]);
    let mut xhat = Tensor::zeros(&[rows, cols]);
    let mut rstd = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x.data[r * cols..(r + 1) * cols];
        let mean = row.iter().sum::<f64>() / cols as f64;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let rs = 1.0 / (var + eps).sqrt();
        rstd.push(rs);
        let xhat_row = &mut xhat.data[r * cols..(r + 1) * cols];
        let y_row = &mut y.data[r * cols..(r + 1) * cols];
        for (c, &v) in row.iter().enumerate() {
            let h = (v - mean) * rs;
            xhat_row[c] = h;
            y_row[c] = gamma.data[c] * h + beta.data[c];
        }
    }
    (y, LnCache { xhat, rstd })
}

/// Backward of [`layernorm_forward`]: accumulates dgamma/dbeta, returns dx.
pub fn layernorm_backward(
    gamma: &Tensor,
    cache: &LnCache,
    dy: &Tensor,
    dgamma: &mut Tensor,
    dbeta: &mut Tensor,
) -> Tensor {
    let (rows, cols) = dy.dims2();
    let mut dx = Tensor::zeros(&[rows, cols]);
    for r in 0..rows {
        let dy_row = &dy.data[r * cols..(r + 1) * cols];
        let xhat_row = &cache.xhat.data[r * cols..(r + 1) * cols];
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for c in 0..cols {
            let dxhat = dy_row[c] * gamma.data[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xhat_row[c];
            dgamma.data[c] += dy_row[c] * xhat_row[c];
            dbeta.data[c] += dy_row[c];
        }
        let inv_n = 1.0 / cols as f64;
        for c in 0..cols {
            let dxhat = dy_row[c] * gamma.data[c];
            dx.data[r * cols + c] =
                cache.rstd[r] * (dxhat - inv_n * sum_dxhat - xhat_row[c] * inv_n * sum_dxhat_xhat);
        }
    }
    dx
}
