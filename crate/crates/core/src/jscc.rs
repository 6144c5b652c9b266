//! Transformer joint source-channel codec for sentences.
//!
//! Transmit side: token embedding + positional encoding, a stack of
//! transformer layers (partition `beta`), then two dense layers down
//! to `channel_dim_per_token` reals per token (partition `alpha`),
//! power-normalized per sentence. Receive side: two dense layers back
//! up to model width plus a layer norm (partition `delta`), a second
//! transformer stack, and a vocabulary projection (partition `chi`).
//!
//! Training minimizes masked cross-entropy minus `lambda` times the
//! mutual-information bound between transmitted and received symbols,
//! with the channel treated as a straight-through map (the noise
//! realization is constant with respect to parameters). Cross-training
//! alternates phases: the channel pair (alpha, delta) trains while the
//! semantic pair (beta, chi) is frozen, then the other way around.

use crate::channel::{apply_channel, noise_sigma, ChannelConfig, SymbolBlock};
use crate::corpus::{TokenSequence, END_ID, PAD_ID, UNK_ID};
use crate::mine::{
    build_pairs, mine_backward, mine_forward, mine_train_step, MineError, MineEstimator,
};
use crate::nnkit::adam::{adam_step, AdamConfig};
use crate::nnkit::attention::{
    dense_backward_ps, dense_forward_ps, insert_transformer_layer, layernorm_backward_ps,
    layernorm_forward_ps, transformer_layer_backward, transformer_layer_forward, LayerCache,
};
use crate::nnkit::checkpoint::{self, CheckpointError};
use crate::nnkit::norm::LnCache;
use crate::nnkit::ops::{
    cross_entropy, embedding_backward, embedding_forward, positional_encoding, relu_backward,
    relu_forward,
};
use crate::nnkit::{glorot, insert_dense, insert_layernorm, NnError, ParamSet, Tensor};
use crate::rng::Rng64;
use std::path::Path;
use thiserror::Error;

/// Width of the hidden layer in the channel encoder and decoder.
const CHANNEL_HIDDEN: usize = 256;

#[derive(Debug, Error)]
pub enum JsccError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Mine(#[from] MineError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("invalid codec config: {0}")]
    BadConfig(String),
    #[error("encoder produced an all-zero symbol block")]
    DegenerateSymbols,
    #[error("checkpoint parameter {name} has shape {found:?}, expected {expected:?}")]
    Incompatible {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("checkpoint is missing parameter {0}")]
    MissingParam(String),
    #[error(
        "non-finite loss (ce={ce}, mi={mi}) in round {round} phase {phase} epoch {epoch} batch {batch}"
    )]
    NonFinite {
        round: usize,
        phase: char,
        epoch: usize,
        batch: usize,
        ce: f64,
        mi: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsccConfig {
    pub vocab_size: usize,
    pub max_len: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub layers: usize,
    /// Real channel dimensions per token; must be even (complex pairs).
    pub channel_dim_per_token: usize,
    /// Weight of the mutual-information term in the loss.
    pub lambda_mi: f64,
    /// Per-batch training SNR is drawn uniformly from this range (dB).
    pub train_snr_range_db: (f64, f64),
    /// Channel gain used during training.
    pub fading_h: f64,
}

impl JsccConfig {
    pub fn new(vocab_size: usize, max_len: usize) -> Self {
        JsccConfig {
            vocab_size,
            max_len,
            model_dim: 128,
            heads: 8,
            ff_dim: 512,
            layers: 3,
            channel_dim_per_token: 16,
            lambda_mi: 0.05,
            train_snr_range_db: (5.0, 10.0),
            fading_h: 0.9,
        }
    }

    pub fn validate(&self) -> Result<(), JsccError> {
        if !self.channel_dim_per_token.is_multiple_of(2) || self.channel_dim_per_token == 0 {
            return Err(JsccError::BadConfig(format!(
                "channel_dim_per_token must be a positive even number, got {}",
                self.channel_dim_per_token
            )));
        }
        if self.lambda_mi < 0.0 {
            return Err(JsccError::BadConfig("lambda_mi must be >= 0".into()));
        }
        if !self.model_dim.is_multiple_of(self.heads) {
            return Err(JsccError::BadConfig(format!(
                "model_dim {} not divisible by {} heads",
                self.model_dim, self.heads
            )));
        }
        if self.max_len < 3 || self.vocab_size < 5 {
            return Err(JsccError::BadConfig(
                "max_len must be >= 3 and vocab_size >= 5".into(),
            ));
        }
        Ok(())
    }

    /// Complex channel symbols spent per sentence.
    pub fn symbols_per_sentence(&self) -> usize {
        self.max_len * self.channel_dim_per_token / 2
    }
}

/// The four-partition codec model.
#[derive(Debug, Clone)]
pub struct JsccModel {
    pub cfg: JsccConfig,
    /// Semantic encoder: embedding + transformer stack.
    pub beta: ParamSet,
    /// Channel encoder: two dense layers.
    pub alpha: ParamSet,
    /// Channel decoder: two dense layers + layer norm.
    pub delta: ParamSet,
    /// Semantic decoder: transformer stack + vocabulary projection.
    pub chi: ParamSet,
    pe: Tensor,
}

impl JsccModel {
    pub fn new(cfg: JsccConfig, seed: u64) -> Result<Self, JsccError> {
        cfg.validate()?;
        let mut rng = Rng64::new(seed);
        let d = cfg.model_dim;
        let c = cfg.channel_dim_per_token;

        let mut beta = ParamSet::new();
        beta.insert("embed", glorot(&[cfg.vocab_size, d], &mut rng));
        for l in 0..cfg.layers {
            insert_transformer_layer(&mut beta, &format!("enc{l}"), d, cfg.ff_dim, &mut rng);
        }

        let mut alpha = ParamSet::new();
        insert_dense(&mut alpha, "fc1", d, CHANNEL_HIDDEN, &mut rng);
        insert_dense(&mut alpha, "fc2", CHANNEL_HIDDEN, c, &mut rng);

        let mut delta = ParamSet::new();
        insert_dense(&mut delta, "fc1", c, CHANNEL_HIDDEN, &mut rng);
        insert_dense(&mut delta, "fc2", CHANNEL_HIDDEN, d, &mut rng);
        insert_layernorm(&mut delta, "ln", d);

        let mut chi = ParamSet::new();
        for l in 0..cfg.layers {
            insert_transformer_layer(&mut chi, &format!("dec{l}"), d, cfg.ff_dim, &mut rng);
        }
        insert_dense(&mut chi, "out", d, cfg.vocab_size, &mut rng);

        let pe = positional_encoding(cfg.max_len, d);
        Ok(JsccModel {
            cfg,
            beta,
            alpha,
            delta,
            chi,
            pe,
        })
    }

    /// Flattens every partition as `partition.path` records.
    pub fn save(&self, path: &Path) -> Result<(), JsccError> {
        let mut records: Vec<(String, &Tensor)> = Vec::new();
        for (prefix, ps) in self.partitions() {
            for (name, p) in ps.iter() {
                records.push((format!("{prefix}.{name}"), &p.value));
            }
        }
        checkpoint::save(path, &records)?;
        Ok(())
    }

    /// Rebuilds a model from a checkpoint; every expected parameter
    /// must be present with the right shape.
    pub fn load(path: &Path, cfg: JsccConfig) -> Result<Self, JsccError> {
        let mut model = JsccModel::new(cfg, 0)?;
        let records = checkpoint::load(path)?;
        let lookup: std::collections::BTreeMap<String, Tensor> = records.into_iter().collect();
        for (prefix, ps) in [
            ("beta", &mut model.beta),
            ("alpha", &mut model.alpha),
            ("delta", &mut model.delta),
            ("chi", &mut model.chi),
        ] {
            for (name, p) in ps.iter_mut() {
                let full = format!("{prefix}.{name}");
                let rec = lookup
                    .get(&full)
                    .ok_or_else(|| JsccError::MissingParam(full.clone()))?;
                if rec.shape != p.value.shape {
                    return Err(JsccError::Incompatible {
                        name: full,
                        expected: p.value.shape.clone(),
                        found: rec.shape.clone(),
                    });
                }
                p.value = rec.clone();
            }
        }
        Ok(model)
    }

    fn partitions(&self) -> [(&'static str, &ParamSet); 4] {
        [
            ("beta", &self.beta),
            ("alpha", &self.alpha),
            ("delta", &self.delta),
            ("chi", &self.chi),
        ]
    }
}

fn flatten_batch(batch: &[TokenSequence], max_len: usize) -> (Vec<u32>, Vec<bool>, Vec<bool>) {
    let mut ids = Vec::with_capacity(batch.len() * max_len);
    let mut pad_mask = Vec::with_capacity(batch.len() * max_len);
    let mut include = Vec::with_capacity(batch.len() * max_len);
    for seq in batch {
        assert_eq!(seq.ids.len(), max_len, "sequence length mismatch");
        for (t, &id) in seq.ids.iter().enumerate() {
            ids.push(id);
            pad_mask.push(t >= seq.true_len);
            include.push(t < seq.true_len);
        }
    }
    (ids, pad_mask, include)
}

/// Forward-pass state of the encoder half.
pub struct EncodeCache {
    ids: Vec<u32>,
    enc_caches: Vec<LayerCache>,
    enc_out: Tensor,
    alpha_hidden: Tensor,
    x_raw: Tensor,
    scales: Vec<f64>,
    sumsqs: Vec<f64>,
    batch: usize,
}

/// Token batch -> power-normalized symbol block (`max_len *
/// channel_dim_per_token` reals per sentence).
pub fn jscc_encode(model: &JsccModel, batch: &[TokenSequence]) -> Result<SymbolBlock, JsccError> {
    Ok(encode_forward(model, batch, None)?.0)
}

pub(crate) fn encode_forward(
    model: &JsccModel,
    batch: &[TokenSequence],
    input_override: Option<&[u32]>,
) -> Result<(SymbolBlock, EncodeCache), JsccError> {
    let cfg = &model.cfg;
    let t_len = cfg.max_len;
    let d = cfg.model_dim;
    let (orig_ids, mask, _) = flatten_batch(batch, t_len);
    let ids: Vec<u32> = match input_override {
        Some(o) => {
            assert_eq!(o.len(), orig_ids.len());
            o.to_vec()
        }
        None => orig_ids,
    };

    let mut emb = embedding_forward(model.beta.value("embed"), &ids)?;
    for (r, chunk) in emb.data.chunks_mut(d).enumerate() {
        let t = r % t_len;
        for (e, p) in chunk.iter_mut().zip(&model.pe.data[t * d..(t + 1) * d]) {
            *e += p;
        }
    }

    let mut enc_caches = Vec::with_capacity(cfg.layers);
    let mut h = emb.clone();
    for l in 0..cfg.layers {
        let (next, cache) = transformer_layer_forward(
            &model.beta,
            &format!("enc{l}"),
            &h,
            batch.len(),
            t_len,
            cfg.heads,
            Some(&mask),
        )?;
        enc_caches.push(cache);
        h = next;
    }
    let enc_out = h;

    let alpha_hidden = relu_forward(&dense_forward_ps(&model.alpha, "fc1", &enc_out)?);
    let x_raw = dense_forward_ps(&model.alpha, "fc2", &alpha_hidden)?;

    // Per-sentence unit average complex power.
    let per_sentence = t_len * cfg.channel_dim_per_token;
    let complex_per_sentence = (per_sentence / 2) as f64;
    let mut values = vec![0.0; batch.len() * per_sentence];
    let mut scales = Vec::with_capacity(batch.len());
    let mut sumsqs = Vec::with_capacity(batch.len());
    for b in 0..batch.len() {
        let seg = &x_raw.data[b * per_sentence..(b + 1) * per_sentence];
        let sumsq: f64 = seg.iter().map(|v| v * v).sum();
        if sumsq == 0.0 {
            return Err(JsccError::DegenerateSymbols);
        }
        let scale = (complex_per_sentence / sumsq).sqrt();
        for (o, &v) in values[b * per_sentence..(b + 1) * per_sentence]
            .iter_mut()
            .zip(seg)
        {
            *o = scale * v;
        }
        scales.push(scale);
        sumsqs.push(sumsq);
    }
    let block = SymbolBlock::new(values).expect("even length by construction");
    Ok((
        block,
        EncodeCache {
            ids,
            enc_caches,
            enc_out,
            alpha_hidden,
            x_raw,
            scales,
            sumsqs,
            batch: batch.len(),
        },
    ))
}

/// Backpropagates d(loss)/d(x_normalized) through the encoder half.
fn encode_backward(model: &mut JsccModel, cache: &EncodeCache, dx: &Tensor) {
    let cfg = model.cfg.clone();
    let per_sentence = cfg.max_len * cfg.channel_dim_per_token;

    // Through the per-sentence normalization x = s(u) * u, where
    // s = sqrt(M / sum(u^2)): du_j = s * (dx_j - u_j * <dx, u> / sum(u^2)).
    let mut du = Tensor::zeros(&cache.x_raw.shape);
    for b in 0..cache.batch {
        let u = &cache.x_raw.data[b * per_sentence..(b + 1) * per_sentence];
        let dxs = &dx.data[b * per_sentence..(b + 1) * per_sentence];
        let s = cache.scales[b];
        let sumsq = cache.sumsqs[b];
        let dot: f64 = dxs.iter().zip(u).map(|(g, v)| g * v).sum();
        for (o, (&g, &v)) in du.data[b * per_sentence..(b + 1) * per_sentence]
            .iter_mut()
            .zip(dxs.iter().zip(u))
        {
            *o = s * (g - v * dot / sumsq);
        }
    }

    let dh = dense_backward_ps(&mut model.alpha, "fc2", &cache.alpha_hidden, &du);
    let dpre = relu_backward(&cache.alpha_hidden, &dh);
    let mut denc = dense_backward_ps(&mut model.alpha, "fc1", &cache.enc_out, &dpre);
    for l in (0..cfg.layers).rev() {
        denc = transformer_layer_backward(
            &mut model.beta,
            &format!("enc{l}"),
            &cache.enc_caches[l],
            &denc,
        );
    }
    embedding_backward(&mut model.beta.param_mut("embed").grad, &cache.ids, &denc);
}

/// Forward-pass state of the decoder half.
pub struct DecodeCache {
    y_in: Tensor,
    delta_hidden: Tensor,
    ln: LnCache,
    dec_caches: Vec<LayerCache>,
    dec_out: Tensor,
}

/// Received block -> per-position vocabulary logits,
/// shape (batch * max_len, vocab).
pub fn jscc_decode(model: &JsccModel, y: &SymbolBlock, batch: usize) -> Result<Tensor, JsccError> {
    Ok(decode_forward(model, y, batch)?.0)
}

pub(crate) fn decode_forward(
    model: &JsccModel,
    y: &SymbolBlock,
    batch: usize,
) -> Result<(Tensor, DecodeCache), JsccError> {
    let cfg = &model.cfg;
    let c = cfg.channel_dim_per_token;
    let rows = batch * cfg.max_len;
    if y.len() != rows * c {
        return Err(NnError::Shape {
            expected: vec![rows, c],
            got: vec![y.len() / c.max(1), c],
        }
        .into());
    }
    let y_in = Tensor::from_vec(&[rows, c], y.values().to_vec());
    let delta_hidden = relu_forward(&dense_forward_ps(&model.delta, "fc1", &y_in)?);
    let z = dense_forward_ps(&model.delta, "fc2", &delta_hidden)?;
    let (zn, ln) = layernorm_forward_ps(&model.delta, "ln", &z);

    let mut dec_caches = Vec::with_capacity(cfg.layers);
    let mut h = zn;
    for l in 0..cfg.layers {
        let (next, cache) = transformer_layer_forward(
            &model.chi,
            &format!("dec{l}"),
            &h,
            batch,
            cfg.max_len,
            cfg.heads,
            None,
        )?;
        dec_caches.push(cache);
        h = next;
    }
    let dec_out = h;
    let logits = dense_forward_ps(&model.chi, "out", &dec_out)?;
    Ok((
        logits,
        DecodeCache {
            y_in,
            delta_hidden,
            ln,
            dec_caches,
            dec_out,
        },
    ))
}

/// Backpropagates d(loss)/d(logits); returns d(loss)/d(y).
fn decode_backward(model: &mut JsccModel, cache: &DecodeCache, dlogits: &Tensor) -> Tensor {
    let layers = model.cfg.layers;
    let mut dh = dense_backward_ps(&mut model.chi, "out", &cache.dec_out, dlogits);
    for l in (0..layers).rev() {
        dh = transformer_layer_backward(
            &mut model.chi,
            &format!("dec{l}"),
            &cache.dec_caches[l],
            &dh,
        );
    }
    let dz = layernorm_backward_ps(&mut model.delta, "ln", &cache.ln, &dh);
    let dhid = dense_backward_ps(&mut model.delta, "fc2", &cache.delta_hidden, &dz);
    let dpre = relu_backward(&cache.delta_hidden, &dhid);
    dense_backward_ps(&mut model.delta, "fc1", &cache.y_in, &dpre)
}

/// Masked mean cross-entropy between logits and target sequences.
pub fn ce_loss(logits: &Tensor, batch: &[TokenSequence]) -> Result<f64, JsccError> {
    let max_len = batch[0].ids.len();
    let (ids, _, include) = flatten_batch(batch, max_len);
    Ok(cross_entropy(logits, &ids, &include)?.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub ce: f64,
    pub mi_bound: f64,
}

/// Full training loss on one batch: cross-entropy minus `lambda` times
/// the mutual-information bound, with the channel noise fixed by
/// `noise_seed`. Evaluation only; see [`total_loss_with_grads`].
pub fn total_loss(
    model: &JsccModel,
    mine: &MineEstimator,
    batch: &[TokenSequence],
    snr_db: f64,
    noise_seed: u64,
) -> Result<LossParts, JsccError> {
    let pieces = forward_pieces(model, mine, batch, None, snr_db, noise_seed)?;
    Ok(pieces.parts)
}

struct ForwardPieces {
    parts: LossParts,
    enc_cache: EncodeCache,
    dec_cache: DecodeCache,
    dlogits: Tensor,
    mine_fwd: crate::mine::MineForward,
    perm: Vec<usize>,
    n_rows: usize,
}

fn forward_pieces(
    model: &JsccModel,
    mine: &MineEstimator,
    batch: &[TokenSequence],
    input_override: Option<&[u32]>,
    snr_db: f64,
    noise_seed: u64,
) -> Result<ForwardPieces, JsccError> {
    let cfg = &model.cfg;
    let c = cfg.channel_dim_per_token;
    let (x_block, enc_cache) = encode_forward(model, batch, input_override)?;
    let n_rows = batch.len() * cfg.max_len;

    // Channel with noise fixed by seed: y = h x + sigma n.
    let mut rng = Rng64::new(noise_seed);
    let sigma = noise_sigma(snr_db);
    let h = cfg.fading_h;
    let y_values: Vec<f64> = x_block
        .values()
        .iter()
        .map(|&x| h * x + sigma * rng.next_gaussian())
        .collect();
    let y_block = SymbolBlock::new(y_values).expect("even");

    let (logits, dec_cache) = decode_forward(model, &y_block, batch.len())?;
    let max_len = cfg.max_len;
    let (target_ids, _, include) = flatten_batch(batch, max_len);
    let (ce, dlogits) = cross_entropy(&logits, &target_ids, &include)?;

    // Per-token MI pairs between transmitted and received symbols.
    let x_tok = Tensor::from_vec(&[n_rows, c], x_block.values().to_vec());
    let y_tok = Tensor::from_vec(&[n_rows, c], y_block.values().to_vec());
    let mut perm: Vec<usize> = (0..n_rows).collect();
    rng.shuffle(&mut perm);
    let joint = build_pairs(&x_tok, &y_tok, None);
    let marginal = build_pairs(&x_tok, &y_tok, Some(&perm));
    let mine_fwd = mine_forward(mine, &joint, &marginal)?;

    let parts = LossParts {
        total: ce - cfg.lambda_mi * mine_fwd.bound,
        ce,
        mi_bound: mine_fwd.bound,
    };
    Ok(ForwardPieces {
        parts,
        enc_cache,
        dec_cache,
        dlogits,
        mine_fwd,
        perm,
        n_rows,
    })
}

/// As [`total_loss`], but also accumulates gradients into all four
/// codec partitions. The critic's own gradient accumulators are left
/// untouched (zeroed on exit); its parameters act as constants here.
pub fn total_loss_with_grads(
    model: &mut JsccModel,
    mine: &mut MineEstimator,
    batch: &[TokenSequence],
    input_override: Option<&[u32]>,
    snr_db: f64,
    noise_seed: u64,
) -> Result<LossParts, JsccError> {
    let pieces = forward_pieces(model, mine, batch, input_override, snr_db, noise_seed)?;
    let cfg = model.cfg.clone();
    let c = cfg.channel_dim_per_token;
    let n_rows = pieces.n_rows;

    // CE path into the received block.
    let dy_ce = decode_backward(model, &pieces.dec_cache, &pieces.dlogits);

    // MI path into both blocks; the term enters the total as -lambda * bound.
    let (d_joint, d_marg) = mine_backward(mine, &pieces.mine_fwd, -cfg.lambda_mi);
    mine.params.zero_grads();

    let mut dx = Tensor::zeros(&[n_rows, c]);
    let mut dy = dy_ce;
    for i in 0..n_rows {
        for j in 0..c {
            dx.data[i * c + j] += d_joint.data[i * 2 * c + j] + d_marg.data[i * 2 * c + j];
            dy.data[i * c + j] += d_joint.data[i * 2 * c + c + j];
            dy.data[pieces.perm[i] * c + j] += d_marg.data[i * 2 * c + c + j];
        }
    }
    // Straight-through channel: dL/dx += h * dL/dy.
    for (xg, yg) in dx.data.iter_mut().zip(&dy.data) {
        *xg += cfg.fading_h * yg;
    }
    encode_backward(model, &pieces.enc_cache, &dx);
    Ok(pieces.parts)
}

/// Per-position argmax with ties broken toward the lower token id;
/// output sequences are cut at their first end marker.
pub fn greedy_decode(logits: &Tensor, batch: usize, max_len: usize) -> Vec<TokenSequence> {
    let (rows, vocab) = logits.dims2();
    assert_eq!(rows, batch * max_len);
    let mut out = Vec::with_capacity(batch);
    for b in 0..batch {
        let mut ids = Vec::with_capacity(max_len);
        for t in 0..max_len {
            let row = &logits.data[(b * max_len + t) * vocab..(b * max_len + t + 1) * vocab];
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            ids.push(best as u32);
        }
        let true_len = ids
            .iter()
            .position(|&id| id == END_ID)
            .map_or(max_len, |p| p + 1);
        for id in ids.iter_mut().skip(true_len) {
            *id = PAD_ID;
        }
        out.push(TokenSequence { ids, true_len });
    }
    out
}

/// Fraction of non-pad positions whose argmax equals the target.
pub fn token_accuracy(logits: &Tensor, batch: &[TokenSequence]) -> f64 {
    let max_len = batch[0].ids.len();
    let (ids, _, include) = flatten_batch(batch, max_len);
    let (rows, vocab) = logits.dims2();
    assert_eq!(rows, ids.len());
    let mut hit = 0usize;
    let mut total = 0usize;
    for r in 0..rows {
        if !include[r] {
            continue;
        }
        let row = &logits.data[r * vocab..(r + 1) * vocab];
        let mut best = 0usize;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        total += 1;
        if best as u32 == ids[r] {
            hit += 1;
        }
    }
    if total == 0 {
        1.0
    } else {
        hit as f64 / total as f64
    }
}

/// Sends a batch through encoder, channel, and decoder; returns the
/// greedy-decoded sequences and the complex symbols actually
/// transmitted (counted from the block, not the config).
pub fn transmit(
    model: &JsccModel,
    batch: &[TokenSequence],
    ch: &ChannelConfig,
    rng: &mut Rng64,
) -> Result<(Vec<TokenSequence>, usize), JsccError> {
    let x = jscc_encode(model, batch)?;
    let complex_symbols = x.complex_len();
    let y = apply_channel(&x, ch, rng);
    let logits = jscc_decode(model, &y, batch.len())?;
    Ok((
        greedy_decode(&logits, batch.len(), model.cfg.max_len),
        complex_symbols,
    ))
}

/// Which partitions a cross-training phase updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Trains alpha + delta; beta + chi frozen.
    Channel,
    /// Trains beta + chi; alpha + delta frozen.
    Semantic,
}

impl Phase {
    pub fn tag(&self) -> char {
        match self {
            Phase::Channel => 'A',
            Phase::Semantic => 'B',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub mine_lr: f64,
    pub epochs_per_phase: usize,
    pub max_rounds: usize,
    /// Probability of replacing a word token by unk on the encoder
    /// input during the semantic phase.
    pub unk_noise_prob: f64,
    pub seed: u64,
    /// Stop when both phases improve by less than this over a round.
    pub convergence_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            lr: 1e-3,
            mine_lr: 1e-3,
            epochs_per_phase: 8,
            max_rounds: 3,
            unk_noise_prob: 0.1,
            seed: 1,
            convergence_delta: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub round: usize,
    pub phase: char,
    pub epoch: usize,
    pub ce: f64,
    pub mi_bound: f64,
    pub total: f64,
}

/// Cross-training loop. Per batch: the SNR is drawn uniformly from the
/// configured range, the critic takes one ascent step on fresh
/// encoder output, then the codec takes one descent step on the total
/// loss with the phase's frozen partitions left untouched.
pub fn train(
    model: &mut JsccModel,
    mine: &mut MineEstimator,
    corpus: &[TokenSequence],
    tc: &TrainConfig,
) -> Result<Vec<EpochRecord>, JsccError> {
    assert!(!corpus.is_empty(), "training corpus is empty");
    let mut rng = Rng64::new(tc.seed);
    let mut history = Vec::new();
    let (snr_lo, snr_hi) = model.cfg.train_snr_range_db;
    let adam = AdamConfig::with_lr(tc.lr);
    let mut prev_phase_totals: Option<(f64, f64)> = None;

    for round in 0..tc.max_rounds {
        let mut phase_totals = (f64::NAN, f64::NAN);
        for phase in [Phase::Channel, Phase::Semantic] {
            let mut last_epoch_total = 0.0;
            for epoch in 0..tc.epochs_per_phase {
                let mut order: Vec<usize> = (0..corpus.len()).collect();
                rng.shuffle(&mut order);
                let (mut sum_ce, mut sum_mi, mut sum_total) = (0.0, 0.0, 0.0);
                let mut batches = 0usize;
                for (batch_idx, chunk) in order.chunks(tc.batch_size).enumerate() {
                    if chunk.len() < 2 {
                        continue; // MI shuffle needs at least 2 sentences
                    }
                    let batch: Vec<TokenSequence> =
                        chunk.iter().map(|&i| corpus[i].clone()).collect();
                    let snr_db = rng.uniform(snr_lo, snr_hi);

                    // Critic ascent on fresh encoder output, before the
                    // codec step.
                    let (x_block, _) = encode_forward(model, &batch, None)?;
                    let sigma = noise_sigma(snr_db);
                    let h = model.cfg.fading_h;
                    let y_values: Vec<f64> = x_block
                        .values()
                        .iter()
                        .map(|&x| h * x + sigma * rng.next_gaussian())
                        .collect();
                    let rows = batch.len() * model.cfg.max_len;
                    let c = model.cfg.channel_dim_per_token;
                    let x_tok = Tensor::from_vec(&[rows, c], x_block.values().to_vec());
                    let y_tok = Tensor::from_vec(&[rows, c], y_values);
                    mine_train_step(mine, &x_tok, &y_tok, tc.mine_lr, &mut rng)?;

                    // Optional denoising corruption on the encoder input
                    // during the semantic phase.
                    let input_override = if phase == Phase::Semantic && tc.unk_noise_prob > 0.0 {
                        Some(corrupt_inputs(&batch, tc.unk_noise_prob, &mut rng))
                    } else {
                        None
                    };

                    let noise_seed = rng.next_u64();
                    let parts = total_loss_with_grads(
                        model,
                        mine,
                        &batch,
                        input_override.as_deref(),
                        snr_db,
                        noise_seed,
                    )?;
                    if !parts.total.is_finite() {
                        return Err(JsccError::NonFinite {
                            round,
                            phase: phase.tag(),
                            epoch,
                            batch: batch_idx,
                            ce: parts.ce,
                            mi: parts.mi_bound,
                        });
                    }
                    match phase {
                        Phase::Channel => {
                            adam_step(&mut model.alpha, &adam);
                            adam_step(&mut model.delta, &adam);
                            model.beta.zero_grads();
                            model.chi.zero_grads();
                        }
                        Phase::Semantic => {
                            adam_step(&mut model.beta, &adam);
                            adam_step(&mut model.chi, &adam);
                            model.alpha.zero_grads();
                            model.delta.zero_grads();
                        }
                    }
                    sum_ce += parts.ce;
                    sum_mi += parts.mi_bound;
                    sum_total += parts.total;
                    batches += 1;
                }
                let denom = batches.max(1) as f64;
                last_epoch_total = sum_total / denom;
                history.push(EpochRecord {
                    round,
                    phase: phase.tag(),
                    epoch,
                    ce: sum_ce / denom,
                    mi_bound: sum_mi / denom,
                    total: last_epoch_total,
                });
            }
            match phase {
                Phase::Channel => phase_totals.0 = last_epoch_total,
                Phase::Semantic => phase_totals.1 = last_epoch_total,
            }
        }
        if let Some((pa, pb)) = prev_phase_totals {
            let improved_a = pa - phase_totals.0;
            let improved_b = pb - phase_totals.1;
            if improved_a < tc.convergence_delta && improved_b < tc.convergence_delta {
                break;
            }
        }
        prev_phase_totals = Some(phase_totals);
    }
    Ok(history)
}

/// Replaces word tokens (never markers or padding) by unk with the
/// given probability.
fn corrupt_inputs(batch: &[TokenSequence], prob: f64, rng: &mut Rng64) -> Vec<u32> {
    let max_len = batch[0].ids.len();
    let mut out = Vec::with_capacity(batch.len() * max_len);
    for seq in batch {
        for (t, &id) in seq.ids.iter().enumerate() {
            let is_word = t > 0 && t + 1 < seq.true_len;
            if is_word && rng.next_f64() < prob {
                out.push(UNK_ID);
            } else {
                out.push(id);
            }
        }
    }
    out
}
