//! Neural mutual-information estimation between transmitted and
//! received symbol vectors, via the Donsker-Varadhan lower bound
//! `E_joint[f] - log(E_marginal[exp f])` with a learned critic `f`.
//!
//! The critic is a two-hidden-layer ReLU perceptron over concatenated
//! `(x, y)` sample pairs. Marginal pairs come from shuffling `y`
//! within the batch.

use crate::nnkit::adam::{adam_step, AdamConfig};
use crate::nnkit::ops::{dense_backward, dense_forward, relu_backward, relu_forward};
use crate::nnkit::{glorot, ParamSet, Tensor};
use crate::rng::Rng64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MineError {
    #[error("need at least 2 sample pairs, got {0}")]
    BatchTooSmall(usize),
    #[error("sample dimension mismatch: estimator expects {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite bound during MINE training (bound = {0})")]
    NonFinite(f64),
}

/// The statistics network and its optimizer state.
#[derive(Debug, Clone)]
pub struct MineEstimator {
    pub params: ParamSet,
    /// Dimension of one x (and one y) sample; critic input is twice this.
    input_dim: usize,
    /// Decay of the moving-average gradient bias correction; `None`
    /// uses the raw Donsker-Varadhan gradient.
    ema_decay: Option<f64>,
    /// log of the running mean of exp(f) over marginal samples.
    log_ema: Option<f64>,
}

impl MineEstimator {
    pub fn new(input_dim: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = Rng64::new(seed);
        let mut params = ParamSet::new();
        params.insert("fc1.w", glorot(&[2 * input_dim, hidden], &mut rng));
        params.insert("fc1.b", Tensor::zeros(&[hidden]));
        params.insert("fc2.w", glorot(&[hidden, hidden], &mut rng));
        params.insert("fc2.b", Tensor::zeros(&[hidden]));
        params.insert("fc3.w", glorot(&[hidden, 1], &mut rng));
        params.insert("fc3.b", Tensor::zeros(&[1]));
        MineEstimator {
            params,
            input_dim,
            ema_decay: None,
            log_ema: None,
        }
    }

    /// Enables the moving-average denominator correction on the
    /// training gradient (the bound value itself is unchanged). The
    /// raw gradient's denominator is the batch mean of exp(f); here it
    /// is replaced by an exponential moving average with the given
    /// decay, which removes the batch-size bias of the raw estimator.
    pub fn with_ema_correction(mut self, decay: f64) -> Self {
        assert!((0.0..1.0).contains(&decay), "decay must be in [0, 1)");
        self.ema_decay = Some(decay);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Critic scores for a batch of concatenated pairs, with caches.
    fn critic_forward(&self, pairs: &Tensor) -> (Vec<f64>, CriticCache) {
        let h1 = relu_forward(
            &dense_forward(
                self.params.value("fc1.w"),
                self.params.value("fc1.b"),
                pairs,
            )
            .expect("fc1 shapes"),
        );
        let h2 = relu_forward(
            &dense_forward(self.params.value("fc2.w"), self.params.value("fc2.b"), &h1)
                .expect("fc2 shapes"),
        );
        let out = dense_forward(self.params.value("fc3.w"), self.params.value("fc3.b"), &h2)
            .expect("fc3 shapes");
        (
            out.data.clone(),
            CriticCache {
                input: pairs.clone(),
                h1,
                h2,
            },
        )
    }

    /// Backward of the critic given d(loss)/d(score); accumulates
    /// parameter grads and returns d(loss)/d(pairs).
    fn critic_backward(&mut self, cache: &CriticCache, dscores: &[f64]) -> Tensor {
        let rows = dscores.len();
        let dy = Tensor::from_vec(&[rows, 1], dscores.to_vec());
        let dh2 = self.backward_layer("fc3", &cache.h2, &dy);
        let dh2 = relu_backward(&cache.h2, &dh2);
        let dh1 = self.backward_layer("fc2", &cache.h1, &dh2);
        let dh1 = relu_backward(&cache.h1, &dh1);
        self.backward_layer("fc1", &cache.input, &dh1)
    }

    fn backward_layer(&mut self, prefix: &str, x: &Tensor, dy: &Tensor) -> Tensor {
        let w_path = format!("{prefix}.w");
        let b_path = format!("{prefix}.b");
        let w = self.params.value(&w_path).clone();
        let mut dw = Tensor::zeros(&w.shape);
        let mut db = Tensor::zeros(&[w.shape[1]]);
        let dx = dense_backward(&w, x, dy, &mut dw, &mut db);
        self.params.accumulate_grad(&w_path, &dw);
        self.params.accumulate_grad(&b_path, &db);
        dx
    }
}

#[derive(Debug, Clone)]
struct CriticCache {
    input: Tensor,
    h1: Tensor,
    h2: Tensor,
}

/// Forward state of one bound evaluation, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MineForward {
    joint_cache: CriticCache,
    marg_cache: CriticCache,
    joint_scores: Vec<f64>,
    marg_scores: Vec<f64>,
    /// softmax of marginal scores (max-shifted), reused in backward.
    marg_softmax: Vec<f64>,
    /// log(mean exp(f)) over the marginal batch.
    log_mean_exp: f64,
    pub bound: f64,
}

/// Donsker-Varadhan bound over aligned joint pairs and shuffled
/// marginal pairs, each a (batch, 2 * input_dim) tensor. The
/// `exp` in the marginal term is max-shifted for overflow safety.
pub fn mine_forward(
    est: &MineEstimator,
    joint: &Tensor,
    marginal: &Tensor,
) -> Result<MineForward, MineError> {
    let (n, d2) = joint.dims2();
    if n < 2 {
        return Err(MineError::BatchTooSmall(n));
    }
    if d2 != 2 * est.input_dim || marginal.dims2() != (n, d2) {
        return Err(MineError::DimMismatch {
            expected: 2 * est.input_dim,
            got: d2,
        });
    }
    let (joint_scores, joint_cache) = est.critic_forward(joint);
    let (marg_scores, marg_cache) = est.critic_forward(marginal);

    let joint_mean = joint_scores.iter().sum::<f64>() / n as f64;
    let max = marg_scores
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = marg_scores.iter().map(|&s| (s - max).exp()).collect();
    let sum_exp: f64 = exps.iter().sum();
    // log(mean exp(f)) = max + log(sum exp(f - max)) - log n
    let log_mean_exp = max + sum_exp.ln() - (n as f64).ln();
    let bound = joint_mean - log_mean_exp;
    let marg_softmax = exps.iter().map(|&e| e / sum_exp).collect();
    Ok(MineForward {
        joint_cache,
        marg_cache,
        joint_scores,
        marg_scores,
        marg_softmax,
        log_mean_exp,
        bound,
    })
}

/// Convenience eval-only bound.
pub fn mine_lower_bound(
    est: &MineEstimator,
    joint: &Tensor,
    marginal: &Tensor,
) -> Result<f64, MineError> {
    Ok(mine_forward(est, joint, marginal)?.bound)
}

/// Backpropagates `scale * bound`: accumulates critic parameter grads
/// and returns `(d joint, d marginal)` input gradients.
pub fn mine_backward(est: &mut MineEstimator, fwd: &MineForward, scale: f64) -> (Tensor, Tensor) {
    let n = fwd.joint_scores.len();
    let d_joint_scores: Vec<f64> = vec![scale / n as f64; n];
    let d_marg_scores: Vec<f64> = fwd.marg_softmax.iter().map(|&p| -scale * p).collect();
    let d_joint = est.critic_backward(&fwd.joint_cache, &d_joint_scores);
    let d_marg = est.critic_backward(&fwd.marg_cache, &d_marg_scores);
    (d_joint, d_marg)
}

/// Critic-training gradient with the moving-average denominator: the
/// marginal term divides by `n * exp(log_denom)` instead of the batch
/// sum, which de-biases the ascent direction.
fn mine_backward_ema(est: &mut MineEstimator, fwd: &MineForward, scale: f64, log_denom: f64) {
    let n = fwd.joint_scores.len();
    let d_joint_scores: Vec<f64> = vec![scale / n as f64; n];
    let d_marg_scores: Vec<f64> = fwd
        .marg_scores
        .iter()
        .map(|&f| -scale * (f - log_denom).min(30.0).exp() / n as f64)
        .collect();
    est.critic_backward(&fwd.joint_cache, &d_joint_scores);
    est.critic_backward(&fwd.marg_cache, &d_marg_scores);
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Concatenates per-sample x and y rows into (batch, 2d) pairs,
/// permuting the y rows by `perm` (identity for joint pairs).
pub fn build_pairs(x: &Tensor, y: &Tensor, perm: Option<&[usize]>) -> Tensor {
    let (n, d) = x.dims2();
    debug_assert_eq!(y.dims2(), (n, d));
    let mut out = Tensor::zeros(&[n, 2 * d]);
    for i in 0..n {
        let yi = perm.map_or(i, |p| p[i]);
        out.data[i * 2 * d..i * 2 * d + d].copy_from_slice(&x.data[i * d..(i + 1) * d]);
        out.data[i * 2 * d + d..(i + 1) * 2 * d].copy_from_slice(&y.data[yi * d..(yi + 1) * d]);
    }
    out
}

/// One ascent step on the bound: shuffles the marginal pairing from
/// `rng`, updates the critic by Adam, and returns the bound value.
pub fn mine_train_step(
    est: &mut MineEstimator,
    x: &Tensor,
    y: &Tensor,
    lr: f64,
    rng: &mut Rng64,
) -> Result<f64, MineError> {
    let (n, _) = x.dims2();
    if n < 2 {
        return Err(MineError::BatchTooSmall(n));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut perm);
    let joint = build_pairs(x, y, None);
    let marginal = build_pairs(x, y, Some(&perm));
    let fwd = mine_forward(est, &joint, &marginal)?;
    if !fwd.bound.is_finite() {
        return Err(MineError::NonFinite(fwd.bound));
    }
    // Maximize the bound: descend on -bound.
    match est.ema_decay {
        None => {
            let _ = mine_backward(est, &fwd, -1.0);
        }
        Some(decay) => {
            let updated = match est.log_ema {
                None => fwd.log_mean_exp,
                Some(prev) => log_add_exp(
                    prev + decay.ln(),
                    fwd.log_mean_exp + (1.0 - decay).ln(),
                ),
            };
            est.log_ema = Some(updated);
            mine_backward_ema(est, &fwd, -1.0, updated);
        }
    }
    adam_step(&mut est.params, &AdamConfig::with_lr(lr));
    Ok(fwd.bound)
}

/// Draws `n` correlated scalar Gaussian pairs with correlation `rho`.
pub fn gaussian_pair_batch(rho: f64, n: usize, rng: &mut Rng64) -> (Tensor, Tensor) {
    let mut x = Tensor::zeros(&[n, 1]);
    let mut y = Tensor::zeros(&[n, 1]);
    let noise = (1.0 - rho * rho).sqrt();
    for i in 0..n {
        let a = rng.next_gaussian();
        let b = rng.next_gaussian();
        x.data[i] = a;
        y.data[i] = rho * a + noise * b;
    }
    (x, y)
}

/// Closed-form mutual information of the correlated Gaussian pair.
pub fn gaussian_mi(rho: f64) -> f64 {
    -0.5 * (1.0 - rho * rho).ln()
}

/// Trains a critic on fresh correlated-Gaussian batches, then reports
/// a pooled bound over fresh evaluation samples.
pub fn gaussian_benchmark(
    rho: f64,
    steps: usize,
    batch: usize,
    lr: f64,
    seed: u64,
) -> Result<f64, MineError> {
    gaussian_benchmark_with(rho, steps, batch, lr, seed, None)
}

/// [`gaussian_benchmark`] with an optional moving-average gradient
/// correction decay.
pub fn gaussian_benchmark_with(
    rho: f64,
    steps: usize,
    batch: usize,
    lr: f64,
    seed: u64,
    ema_decay: Option<f64>,
) -> Result<f64, MineError> {
    let mut rng = Rng64::new(seed);
    let mut est = MineEstimator::new(1, 64, seed ^ 0x51ED);
    if let Some(decay) = ema_decay {
        est = est.with_ema_correction(decay);
    }
    for _ in 0..steps {
        let (x, y) = gaussian_pair_batch(rho, batch, &mut rng);
        mine_train_step(&mut est, &x, &y, lr, &mut rng)?;
    }
    // Pooled evaluation on fresh draws: one big-sample estimate.
    let eval_batches = 24;
    let eval_n = 4096;
    let mut joint_scores: Vec<f64> = Vec::with_capacity(eval_batches * eval_n);
    let mut marg_scores: Vec<f64> = Vec::with_capacity(eval_batches * eval_n);
    for _ in 0..eval_batches {
        let (x, y) = gaussian_pair_batch(rho, eval_n, &mut rng);
        let mut perm: Vec<usize> = (0..eval_n).collect();
        rng.shuffle(&mut perm);
        let joint = build_pairs(&x, &y, None);
        let marginal = build_pairs(&x, &y, Some(&perm));
        let (j, _) = est.critic_forward(&joint);
        let (m, _) = est.critic_forward(&marginal);
        joint_scores.extend(j);
        marg_scores.extend(m);
    }
    let n = joint_scores.len() as f64;
    let joint_mean = joint_scores.iter().sum::<f64>() / n;
    let max = marg_scores
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = max + (marg_scores.iter().map(|&s| (s - max).exp()).sum::<f64>()).ln() - n.ln();
    Ok(joint_mean - lse)
}
