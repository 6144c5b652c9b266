//! Acceptance suite: one test per release criterion, each printing a
//! `[PASS]`/`[FAIL]` line with the measured numbers.
//!
//! Run with:
//!   cargo test -p semlink --test acceptance -- --nocapture
//!
//! Criteria 7-9 share three trained codecs (seeds 1-3, bundled
//! 200-sentence corpus); the first of them to run pays the training
//! cost once.

use semlink::channel::{apply_channel, noise_sigma, ChannelConfig};
use semlink::classic::bits::BitVec;
use semlink::classic::huffman::{byte_frequencies, huffman_build, huffman_decode, huffman_encode};
use semlink::classic::qam::{qam64_ber_approx, qam64_demodulate, qam64_modulate};
use semlink::classic::rs::{rs_decode, rs_encode, RsParams};
use semlink::corpus::{encode_sentence, load_corpus, tokenize, Vocabulary};
use semlink::harness::{
    emit_csv, run_sweep, run_training, BudgetMode, ExperimentConfig, LinkSelection, SweepRow,
};
use semlink::jscc::{self, JsccModel};
use semlink::metrics::{bleu, BleuWeights};
use semlink::mine::{
    build_pairs, gaussian_benchmark, gaussian_mi, mine_backward, mine_forward, mine_lower_bound,
    MineEstimator,
};
use semlink::nnkit::adam::{adam_step, AdamConfig};
use semlink::nnkit::gradcheck::gradient_check;
use semlink::nnkit::{ParamSet, Tensor};
use semlink::rng::Rng64;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

fn corpus_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/captions.txt")
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

fn work_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("semlink-acceptance-{}", std::process::id()));
    let _ = fs::create_dir_all(&dir);
    dir
}

/// Base experiment configuration for the desk-scale corpus: a 3-layer
/// codec at matched symbol budget over AWGN, trained at 5-10 dB.
fn desk_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(corpus_path());
    cfg.budget = BudgetMode::Matched;
    cfg.max_len = 14;
    cfg.model_dim = 64;
    cfg.heads = 4;
    cfg.ff_dim = 256;
    cfg.layers = 3;
    cfg.epochs_per_phase = 10;
    cfg.max_rounds = 2;
    cfg
}

struct TrainedModels {
    checkpoints: Vec<PathBuf>,
    seeds: Vec<u64>,
    first_epoch_total: Vec<f64>,
    last_epoch_total: Vec<f64>,
}

fn trained_models() -> &'static TrainedModels {
    static MODELS: OnceLock<TrainedModels> = OnceLock::new();
    MODELS.get_or_init(|| {
        let dir = work_dir();
        let seeds = vec![1u64, 2, 3];
        let mut checkpoints = Vec::new();
        let mut first = Vec::new();
        let mut last = Vec::new();
        for &seed in &seeds {
            let mut cfg = desk_config();
            cfg.train_seed = seed;
            let ckpt = dir.join(format!("model-seed{seed}.ckpt"));
            let summary = run_training(&cfg, &ckpt).expect("training succeeds");
            let history = fs::read_to_string(&summary.history_csv).unwrap();
            let totals: Vec<f64> = history
                .lines()
                .skip(1)
                .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
                .collect();
            first.push(totals[0]);
            last.push(*totals.last().unwrap());
            checkpoints.push(ckpt);
        }
        TrainedModels {
            checkpoints,
            seeds,
            first_epoch_total: first,
            last_epoch_total: last,
        }
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

/// Sweeps one trained model over the given SNR points with the channel
/// seed equal to its training seed.
fn sweep_model(ckpt: &Path, seed: u64, link: LinkSelection, snrs: &[f64]) -> Vec<SweepRow> {
    let mut cfg = desk_config();
    cfg.link = link;
    cfg.snr_points_db = snrs.to_vec();
    cfg.seeds = vec![seed];
    cfg.checkpoint = Some(ckpt.to_path_buf());
    cfg.threads = 4;
    run_sweep(&cfg).expect("sweep succeeds").rows
}

#[test]
fn criterion_1_codec_correctness() {
    // Huffman: lossless on every corpus sentence.
    let sentences = load_corpus(&corpus_path()).unwrap();
    assert_eq!(sentences.len(), 200);
    let mut all = Vec::new();
    for s in &sentences {
        all.extend_from_slice(s.as_bytes());
    }
    let book = huffman_build(&byte_frequencies(&all)).unwrap();
    let mut huffman_ok = 0;
    for s in &sentences {
        let bits = huffman_encode(&book, s.as_bytes()).unwrap();
        if huffman_decode(&book, &bits).unwrap() == s.as_bytes() {
            huffman_ok += 1;
        }
    }

    // RS(7,5): exhaustive single-symbol error injection.
    let rs75 = RsParams::new(7, 5).unwrap();
    let data = [3u8, 141, 59, 26, 255];
    let cw = rs_encode(&rs75, &data).unwrap();
    let mut exhaustive_ok = 0;
    for pos in 0..7 {
        for val in 1..=255u8 {
            let mut rx = cw.clone();
            rx[pos] ^= val;
            if let Ok((decoded, 1)) = rs_decode(&rs75, &rx) {
                if decoded == data {
                    exhaustive_ok += 1;
                }
            }
        }
    }

    // RS(42,30): 10^4 random patterns of up to 6 symbol errors.
    let rs4230 = RsParams::new(42, 30).unwrap();
    let mut rng = Rng64::new(0xACC1);
    let mut random_ok = 0;
    for _ in 0..10_000 {
        let data: Vec<u8> = (0..30).map(|_| rng.next_u64() as u8).collect();
        let cw = rs_encode(&rs4230, &data).unwrap();
        let mut rx = cw.clone();
        let errors = 1 + rng.next_below(6) as usize;
        let mut positions: Vec<usize> = (0..42).collect();
        rng.shuffle(&mut positions);
        for &p in &positions[..errors] {
            rx[p] ^= 1 + rng.next_below(255) as u8;
        }
        if let Ok((decoded, c)) = rs_decode(&rs4230, &rx) {
            if decoded == data && c == errors {
                random_ok += 1;
            }
        }
    }

    let pass = huffman_ok == 200 && exhaustive_ok == 7 * 255 && random_ok == 10_000;
    report(
        "criterion 1 (codec correctness)",
        pass,
        &format!(
            "huffman {huffman_ok}/200, rs(7,5) exhaustive {exhaustive_ok}/{}, rs(42,30) random {random_ok}/10000",
            7 * 255
        ),
    );
}

#[test]
fn criterion_2_modulation() {
    // Exhaustive noiseless roundtrip over all 64 points.
    let mut roundtrip_ok = 0;
    for sym in 0..64u32 {
        let mut bits = BitVec::new();
        bits.push_bits(sym, 6);
        let (block, _) = qam64_modulate(&bits);
        if qam64_demodulate(&block, 1.0) == bits {
            roundtrip_ok += 1;
        }
    }

    // Gray adjacency: axis neighbors differ in exactly one bit.
    let gray = [0b000u8, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100];
    let mut adjacency_ok = true;
    for a in 0..7 {
        for b in 0..8 {
            let i_step = (gray[a] << 3 | gray[b]) ^ (gray[a + 1] << 3 | gray[b]);
            let q_step = (gray[b] << 3 | gray[a]) ^ (gray[b] << 3 | gray[a + 1]);
            adjacency_ok &= i_step.count_ones() == 1 && q_step.count_ones() == 1;
        }
    }

    // Monte-Carlo BER at 18 dB over 1.2e7 bits vs the analytic
    // nearest-neighbor approximation.
    let n_bits = 12_000_000usize;
    let snr_db = 18.0;
    let mut rng = Rng64::new(0xACC2);
    let mut tx = BitVec::with_capacity(n_bits);
    for _ in 0..n_bits {
        tx.push(rng.next_u64() & 1 == 1);
    }
    let (block, _) = qam64_modulate(&tx);
    let cfg = ChannelConfig::awgn(snr_db, 0xACC3);
    let rx = apply_channel(&block, &cfg, &mut Rng64::new(cfg.seed));
    let demod = qam64_demodulate(&rx, 1.0);
    let errors = (0..n_bits).filter(|&i| demod.get(i) != tx.get(i)).count();
    let ber = errors as f64 / n_bits as f64;
    let analytic = qam64_ber_approx(snr_db);
    let rel = (ber - analytic).abs() / analytic;

    let pass = roundtrip_ok == 64 && adjacency_ok && rel < 0.10;
    report(
        "criterion 2 (modulation)",
        pass,
        &format!(
            "roundtrip {roundtrip_ok}/64, gray adjacency {adjacency_ok}, BER {ber:.6} vs analytic {analytic:.6} (rel {rel:.3})"
        ),
    );
}

#[test]
fn criterion_3_channel_calibration() {
    let n = 1_000_000usize;
    let mut worst_rel = 0.0f64;
    for (i, snr_db) in [0.0, 10.0, 20.0].into_iter().enumerate() {
        let sigma2 = noise_sigma(snr_db).powi(2);
        let zeros = semlink::channel::SymbolBlock::new(vec![0.0; n]).unwrap();
        let cfg = ChannelConfig::awgn(snr_db, 0xCA11 + i as u64);
        let y = apply_channel(&zeros, &cfg, &mut Rng64::new(cfg.seed));
        let mean: f64 = y.values().iter().sum::<f64>() / n as f64;
        let var: f64 = y.values().iter().map(|v| v * v).sum::<f64>() / n as f64 - mean * mean;
        worst_rel = worst_rel.max((var - sigma2).abs() / sigma2);
    }

    // Bit-exact replay.
    let block =
        semlink::channel::SymbolBlock::new((0..1000).map(|i| (i as f64 * 0.013).sin()).collect())
            .unwrap();
    let cfg = ChannelConfig::awgn(7.0, 0xCA22);
    let y1 = apply_channel(&block, &cfg, &mut Rng64::new(cfg.seed));
    let y2 = apply_channel(&block, &cfg, &mut Rng64::new(cfg.seed));
    let replay_exact = y1
        .values()
        .iter()
        .zip(y2.values())
        .all(|(a, b)| a.to_bits() == b.to_bits());

    let pass = worst_rel < 0.02 && replay_exact;
    report(
        "criterion 3 (channel calibration)",
        pass,
        &format!("worst variance rel err {worst_rel:.4} over 0/10/20 dB, bit-exact replay {replay_exact}"),
    );
}

#[test]
fn criterion_4_differentiation() {
    use semlink::nnkit::attention::{
        dense_backward_ps, dense_forward_ps, insert_attention, insert_transformer_layer,
        layernorm_backward_ps, layernorm_forward_ps, multihead_attention_backward,
        multihead_attention_forward, transformer_layer_backward, transformer_layer_forward,
    };
    use semlink::nnkit::{glorot, insert_dense, insert_layernorm};

    let rand_tensor = |shape: &[usize], rng: &mut Rng64| -> Tensor {
        Tensor::from_vec(
            shape,
            (0..shape.iter().product())
                .map(|_| rng.uniform(-1.0, 1.0))
                .collect(),
        )
    };
    let project =
        |y: &Tensor, r: &Tensor| -> f64 { y.data.iter().zip(&r.data).map(|(a, b)| a * b).sum() };
    let mut detail = String::new();
    let mut pass = true;

    // Dense.
    {
        let mut rng = Rng64::new(0xD1);
        let mut ps = ParamSet::new();
        insert_dense(&mut ps, "fc", 4, 3, &mut rng);
        ps.param_mut("fc.w").value = glorot(&[4, 3], &mut rng);
        let x = rand_tensor(&[4, 4], &mut rng);
        let r = rand_tensor(&[4, 3], &mut rng);
        dense_forward_ps(&ps, "fc", &x).unwrap();
        dense_backward_ps(&mut ps, "fc", &x, &r);
        let worst = gradient_check(
            &mut ps,
            |p| project(&dense_forward_ps(p, "fc", &x).unwrap(), &r),
            1e-5,
            200,
            &mut Rng64::new(0xD2),
        );
        pass &= worst < 1e-6;
        detail.push_str(&format!("dense {worst:.2e}, "));
    }

    // Layer norm.
    {
        let mut rng = Rng64::new(0xD3);
        let mut ps = ParamSet::new();
        insert_layernorm(&mut ps, "ln", 6);
        ps.param_mut("ln.gamma").value = rand_tensor(&[6], &mut rng);
        ps.param_mut("ln.beta").value = rand_tensor(&[6], &mut rng);
        let x = rand_tensor(&[3, 6], &mut rng);
        let r = rand_tensor(&[3, 6], &mut rng);
        let (_, cache) = layernorm_forward_ps(&ps, "ln", &x);
        layernorm_backward_ps(&mut ps, "ln", &cache, &r);
        let worst = gradient_check(
            &mut ps,
            |p| project(&layernorm_forward_ps(p, "ln", &x).0, &r),
            1e-5,
            200,
            &mut Rng64::new(0xD4),
        );
        pass &= worst < 1e-5;
        detail.push_str(&format!("layernorm {worst:.2e}, "));
    }

    // Attention (2 heads, 3 tokens, one masked key).
    {
        let mut rng = Rng64::new(0xD5);
        let mut ps = ParamSet::new();
        insert_attention(&mut ps, "attn", 8, &mut rng);
        let x = rand_tensor(&[3, 8], &mut rng);
        let r = rand_tensor(&[3, 8], &mut rng);
        let mask = vec![false, false, true];
        let (_, cache) =
            multihead_attention_forward(&ps, "attn", &x, 1, 3, 2, Some(&mask)).unwrap();
        multihead_attention_backward(&mut ps, "attn", &cache, &r);
        let worst = gradient_check(
            &mut ps,
            |p| {
                project(
                    &multihead_attention_forward(p, "attn", &x, 1, 3, 2, Some(&mask))
                        .unwrap()
                        .0,
                    &r,
                )
            },
            1e-5,
            300,
            &mut Rng64::new(0xD6),
        );
        pass &= worst < 1e-4;
        detail.push_str(&format!("attention {worst:.2e}, "));
    }

    // Full transformer layer.
    {
        let mut rng = Rng64::new(0xD7);
        let mut ps = ParamSet::new();
        insert_transformer_layer(&mut ps, "layer", 8, 16, &mut rng);
        let x = rand_tensor(&[4, 8], &mut rng);
        let r = rand_tensor(&[4, 8], &mut rng);
        let (_, cache) = transformer_layer_forward(&ps, "layer", &x, 2, 2, 2, None).unwrap();
        transformer_layer_backward(&mut ps, "layer", &cache, &r);
        let worst = gradient_check(
            &mut ps,
            |p| {
                project(
                    &transformer_layer_forward(p, "layer", &x, 2, 2, 2, None)
                        .unwrap()
                        .0,
                    &r,
                )
            },
            1e-5,
            300,
            &mut Rng64::new(0xD8),
        );
        pass &= worst < 1e-4;
        detail.push_str(&format!("transformer layer {worst:.2e}, "));
    }

    // Full JSCC loss, fixed noise, every partition.
    {
        let sentences = vec![
            "a man smiling".to_string(),
            "a woman with glasses".to_string(),
            "an old man with a beard".to_string(),
            "a child running".to_string(),
        ];
        let vocab = Vocabulary::build(&sentences, 1).unwrap();
        let mut cfg = jscc::JsccConfig::new(vocab.size(), 8);
        cfg.model_dim = 16;
        cfg.heads = 2;
        cfg.ff_dim = 32;
        cfg.channel_dim_per_token = 4;
        cfg.lambda_mi = 0.1;
        let mut model = JsccModel::new(cfg, 0xD9).unwrap();
        let mut mine = MineEstimator::new(4, 16, 0xDA);
        let batch: Vec<_> = sentences
            .iter()
            .map(|s| encode_sentence(&vocab, s, 8))
            .collect();
        let (snr_db, noise_seed) = (6.0, 0xDB);
        jscc::total_loss_with_grads(&mut model, &mut mine, &batch, None, snr_db, noise_seed)
            .unwrap();
        let mut worst_all = 0.0f64;
        for partition in ["beta", "alpha", "delta", "chi"] {
            let mut ps = match partition {
                "beta" => model.beta.clone(),
                "alpha" => model.alpha.clone(),
                "delta" => model.delta.clone(),
                _ => model.chi.clone(),
            };
            let worst = gradient_check(
                &mut ps,
                |p| {
                    let mut m = model.clone();
                    match partition {
                        "beta" => m.beta = p.clone(),
                        "alpha" => m.alpha = p.clone(),
                        "delta" => m.delta = p.clone(),
                        _ => m.chi = p.clone(),
                    }
                    jscc::total_loss(&m, &mine, &batch, snr_db, noise_seed)
                        .unwrap()
                        .total
                },
                1e-5,
                100,
                &mut Rng64::new(0xDC),
            );
            worst_all = worst_all.max(worst);
        }
        pass &= worst_all < 1e-4;
        detail.push_str(&format!("jscc total loss {worst_all:.2e}, "));
    }

    // MINE loss.
    {
        let mut est = MineEstimator::new(3, 12, 0xDD);
        let mut rng = Rng64::new(0xDE);
        let n = 8;
        let x = Tensor::from_vec(&[n, 3], (0..n * 3).map(|_| rng.next_gaussian()).collect());
        let y = Tensor::from_vec(&[n, 3], (0..n * 3).map(|_| rng.next_gaussian()).collect());
        let mut perm: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut perm);
        let joint = build_pairs(&x, &y, None);
        let marginal = build_pairs(&x, &y, Some(&perm));
        let fwd = mine_forward(&est, &joint, &marginal).unwrap();
        mine_backward(&mut est, &fwd, 1.0);
        let mut ps = est.params.clone();
        let worst = gradient_check(
            &mut ps,
            |p| {
                let mut e = est.clone();
                e.params = p.clone();
                mine_lower_bound(&e, &joint, &marginal).unwrap()
            },
            1e-5,
            200,
            &mut Rng64::new(0xDF),
        );
        pass &= worst < 1e-4;
        detail.push_str(&format!("mine loss {worst:.2e}"));
    }

    report("criterion 4 (differentiation)", pass, &detail);
}

#[test]
fn criterion_5_mine_benchmark() {
    let target = gaussian_mi(0.9);
    let correlated = gaussian_benchmark(0.9, 3000, 256, 1e-3, 0xBEEF).unwrap();
    let independent = gaussian_benchmark(0.0, 3000, 256, 1e-3, 0xFEED).unwrap();
    let corr_err = (correlated - target).abs();
    let pass = corr_err <= 0.1 && independent.abs() < 0.1;
    report(
        "criterion 5 (MINE benchmark)",
        pass,
        &format!(
            "rho=0.9 bound {correlated:.4} vs closed form {target:.4} (err {corr_err:.4}), independent bound {independent:.4}"
        ),
    );
}

#[test]
fn criterion_6_bleu() {
    // Brute-force oracle with direct window comparison, no hash maps:
    // the counting machinery is fully independent of the library path.
    fn oracle_bleu(cand: &[String], refr: &[String], max_n: usize) -> f64 {
        if cand.is_empty() || refr.is_empty() {
            return 0.0;
        }
        let mut log_score = (1.0 - refr.len() as f64 / cand.len() as f64).min(0.0);
        for n in 1..=max_n {
            let total = if cand.len() >= n {
                cand.len() - n + 1
            } else {
                0
            };
            let mut clipped = 0usize;
            for i in 0..total {
                let first = (0..i).all(|j| cand[j..j + n] != cand[i..i + n]);
                if !first {
                    continue;
                }
                let c_cand = (0..total)
                    .filter(|&j| cand[j..j + n] == cand[i..i + n])
                    .count();
                let c_ref = if refr.len() >= n {
                    (0..refr.len() - n + 1)
                        .filter(|&j| refr[j..j + n] == cand[i..i + n])
                        .count()
                } else {
                    0
                };
                clipped += c_cand.min(c_ref);
            }
            let p = if clipped == 0 {
                1.0 / (2.0 * total.max(1) as f64)
            } else {
                clipped as f64 / total as f64
            };
            log_score += p.ln() / max_n as f64;
        }
        log_score.exp()
    }

    // Identity on every corpus sentence.
    let sentences = load_corpus(&corpus_path()).unwrap();
    let weights = BleuWeights::uniform(4);
    let identity_ok = sentences.iter().all(|s| {
        let toks = tokenize(s);
        (bleu(&toks, &toks, &weights) - 1.0).abs() < 1e-12
    });

    // Oracle equivalence on 1000 random pairs (lengths 3-12, vocab 10).
    let mut rng = Rng64::new(0xB1E0);
    let vocab: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
    let mut worst_gap = 0.0f64;
    for _ in 0..1000 {
        let len_c = 3 + rng.next_below(10) as usize;
        let len_r = 3 + rng.next_below(10) as usize;
        let cand: Vec<String> = (0..len_c)
            .map(|_| vocab[rng.next_below(10) as usize].clone())
            .collect();
        let refr: Vec<String> = (0..len_r)
            .map(|_| vocab[rng.next_below(10) as usize].clone())
            .collect();
        let lib = bleu(&cand, &refr, &weights);
        let ora = oracle_bleu(&cand, &refr, 4);
        worst_gap = worst_gap.max((lib - ora).abs());
    }

    // Hand-derived cases.
    let w1 = BleuWeights::uniform(1);
    let to_words = |s: &str| -> Vec<String> { s.split(' ').map(str::to_string).collect() };
    let unigram = bleu(&to_words("a a b"), &to_words("a b c"), &w1);
    let brevity = bleu(&to_words("a b c"), &to_words("a b c d"), &w1);
    let hand_ok =
        (unigram - 2.0 / 3.0).abs() < 1e-9 && (brevity - (-1.0f64 / 3.0).exp()).abs() < 1e-9;

    let pass = identity_ok && worst_gap < 1e-9 && hand_ok;
    report(
        "criterion 6 (BLEU)",
        pass,
        &format!(
            "identity {identity_ok}, oracle worst gap {worst_gap:.2e}, hand cases {hand_ok} (2/3 = {unigram:.6}, e^-1/3 = {brevity:.6})"
        ),
    );
}

#[test]
fn criterion_7_desk_training() {
    let models = trained_models();
    // Vocabulary stays desk-scale.
    let sentences = load_corpus(&corpus_path()).unwrap();
    let vocab = Vocabulary::build(&sentences, 1).unwrap();
    assert!(vocab.size() <= 1000, "vocab {} exceeds 1000", vocab.size());

    // Median training-loss drop across the three seeds.
    let mut drops: Vec<f64> = models
        .first_epoch_total
        .iter()
        .zip(&models.last_epoch_total)
        .map(|(first, last)| first - last)
        .collect();
    let median_drop = median(&mut drops);
    let all_finite = models.last_epoch_total.iter().all(|v| v.is_finite());

    // Freezing: one manual step per phase on a loaded model.
    let model0 = JsccModel::load(
        &models.checkpoints[0],
        load_meta_cfg(&models.checkpoints[0]),
    )
    .unwrap();
    let batch: Vec<_> = sentences
        .iter()
        .take(8)
        .map(|s| encode_sentence(&vocab, s, 14))
        .collect();
    let mut mine = MineEstimator::new(model0.cfg.channel_dim_per_token, 64, 9);
    let adam = AdamConfig::with_lr(1e-3);

    let mut m = model0.clone();
    let (beta0, chi0) = (m.beta.clone(), m.chi.clone());
    jscc::total_loss_with_grads(&mut m, &mut mine, &batch, None, 8.0, 77).unwrap();
    adam_step(&mut m.alpha, &adam);
    adam_step(&mut m.delta, &adam);
    m.beta.zero_grads();
    m.chi.zero_grads();
    let phase_a_frozen = m.beta.bits_equal(&beta0) && m.chi.bits_equal(&chi0);

    let mut m = model0.clone();
    let (alpha0, delta0) = (m.alpha.clone(), m.delta.clone());
    jscc::total_loss_with_grads(&mut m, &mut mine, &batch, None, 8.0, 78).unwrap();
    adam_step(&mut m.beta, &adam);
    adam_step(&mut m.chi, &adam);
    m.alpha.zero_grads();
    m.delta.zero_grads();
    let phase_b_frozen = m.alpha.bits_equal(&alpha0) && m.delta.bits_equal(&delta0);

    let pass = median_drop > 0.0 && all_finite && phase_a_frozen && phase_b_frozen;
    report(
        "criterion 7 (desk-scale training)",
        pass,
        &format!(
            "median loss drop {median_drop:.3} (first {:.3} -> last {:.3} on seed 1), frozen A {phase_a_frozen}, frozen B {phase_b_frozen}",
            models.first_epoch_total[0], models.last_epoch_total[0]
        ),
    );
}

fn load_meta_cfg(ckpt: &Path) -> jscc::JsccConfig {
    // Rebuild the codec config the same way the sweep does, via the
    // checkpoint metadata sidecar.
    let meta = fs::read_to_string(format!("{}.meta", ckpt.display())).unwrap();
    let get = |key: &str| -> String {
        meta.lines()
            .find(|l| l.starts_with(key))
            .unwrap_or_else(|| panic!("meta key {key}"))
            .split('=')
            .nth(1)
            .unwrap()
            .trim()
            .to_string()
    };
    let mut cfg = jscc::JsccConfig::new(
        get("vocab_size").parse().unwrap(),
        get("max_len").parse().unwrap(),
    );
    cfg.model_dim = get("model_dim").parse().unwrap();
    cfg.heads = get("heads").parse().unwrap();
    cfg.ff_dim = get("ff_dim").parse().unwrap();
    cfg.layers = get("layers").parse().unwrap();
    cfg.channel_dim_per_token = get("channel_dim_per_token").parse().unwrap();
    cfg.lambda_mi = get("lambda_mi").parse().unwrap();
    cfg.fading_h = get("fading_h").parse().unwrap();
    cfg
}

#[test]
fn criterion_8_noise_robustness_trend() {
    let models = trained_models();
    let snrs = [0.0, 3.0, 6.0, 9.0, 12.0];
    // Per-SNR BLEU-1 medians across the three trained seeds.
    let mut per_seed: Vec<Vec<f64>> = Vec::new();
    for (ckpt, &seed) in models.checkpoints.iter().zip(&models.seeds) {
        let rows = sweep_model(ckpt, seed, LinkSelection::Neural, &snrs);
        per_seed.push(rows.iter().map(|r| r.bleu[0]).collect());
    }
    let medians: Vec<f64> = (0..snrs.len())
        .map(|i| {
            let mut vals: Vec<f64> = per_seed.iter().map(|s| s[i]).collect();
            median(&mut vals)
        })
        .collect();

    let monotone = medians.windows(2).all(|w| w[1] >= w[0] - 0.02);
    let high_snr = *medians.last().unwrap();
    let pass = monotone && high_snr >= 0.9;
    report(
        "criterion 8 (noise-robustness trend)",
        pass,
        &format!(
            "median BLEU-1 over 0/3/6/9/12 dB = {:?}, monotone(±0.02) {monotone}, at 12 dB {high_snr:.4} (>= 0.9)",
            medians.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn criterion_9_comparison_trend() {
    let models = trained_models();
    // 21 dB is swept alongside for context: it shows where the classic
    // chain does cross 0.99 under this SNR convention.
    let snrs = [0.0, 2.0, 4.0, 16.0, 18.0, 21.0];
    let mut neural: Vec<Vec<f64>> = Vec::new();
    let mut classic: Vec<Vec<f64>> = Vec::new();
    for (ckpt, &seed) in models.checkpoints.iter().zip(&models.seeds) {
        let rows = sweep_model(ckpt, seed, LinkSelection::Both, &snrs);
        neural.push(
            rows.iter()
                .filter(|r| r.method == "neural")
                .map(|r| r.bleu[0])
                .collect(),
        );
        classic.push(
            rows.iter()
                .filter(|r| r.method == "classic")
                .map(|r| r.bleu[0])
                .collect(),
        );
    }
    let med = |table: &[Vec<f64>], i: usize| -> f64 {
        let mut vals: Vec<f64> = table.iter().map(|s| s[i]).collect();
        median(&mut vals)
    };

    let low_snr_ok = (0..3).all(|i| med(&neural, i) > med(&classic, i));
    let classic_16 = med(&classic, 3);
    let classic_18 = med(&classic, 4);
    let classic_21 = med(&classic, 5);
    let high_snr_ok = classic_16 >= 0.99 && classic_18 >= 0.99;

    let pass = low_snr_ok && high_snr_ok;
    report(
        "criterion 9 (comparison trend)",
        pass,
        &format!(
            "neural>classic at 0/2/4 dB {low_snr_ok} (e.g. {:.3} vs {:.3} at 0 dB); classic BLEU-1 at 16 dB {classic_16:.4}, 18 dB {classic_18:.4} (required >= 0.99; it first crosses at ~21 dB: {classic_21:.4} under the Es/N0-per-complex-symbol convention pinned by criteria 2-3)",
            med(&neural, 0),
            med(&classic, 0)
        ),
    );
}

#[test]
fn criterion_10_reproducibility() {
    let models = trained_models();
    let dir = work_dir();
    let mut cfg = desk_config();
    cfg.link = LinkSelection::Both;
    cfg.snr_points_db = vec![0.0, 12.0];
    cfg.seeds = vec![1, 2];
    cfg.checkpoint = Some(models.checkpoints[0].clone());
    cfg.threads = 4;

    let r1 = run_sweep(&cfg).unwrap();
    let r2 = run_sweep(&cfg).unwrap();
    let p1 = dir.join("repro1.csv");
    let p2 = dir.join("repro2.csv");
    emit_csv(&r1, &p1).unwrap();
    emit_csv(&r2, &p2).unwrap();
    let sweep_identical = fs::read(&p1).unwrap() == fs::read(&p2).unwrap();

    // Re-training with identical config and seed gives byte-identical
    // checkpoints and history.
    let mut tiny = desk_config();
    tiny.epochs_per_phase = 1;
    tiny.max_rounds = 1;
    tiny.train_seed = 11;
    let ck_a = dir.join("tiny-a.ckpt");
    let ck_b = dir.join("tiny-b.ckpt");
    run_training(&tiny, &ck_a).unwrap();
    run_training(&tiny, &ck_b).unwrap();
    let train_identical = fs::read(&ck_a).unwrap() == fs::read(&ck_b).unwrap()
        && fs::read(dir.join("tiny-a.ckpt.history.csv")).unwrap()
            == fs::read(dir.join("tiny-b.ckpt.history.csv")).unwrap();

    let pass = sweep_identical && train_identical;
    report(
        "criterion 10 (reproducibility)",
        pass,
        &format!(
            "sweep CSV byte-identical {sweep_identical}, retrain byte-identical {train_identical}"
        ),
    );
}

/// Supplementary check from the decoder contract: a trained model at
/// zero noise reproduces nearly all training tokens.
#[test]
fn trained_model_noiseless_token_accuracy() {
    let models = trained_models();
    let model = JsccModel::load(
        &models.checkpoints[0],
        load_meta_cfg(&models.checkpoints[0]),
    )
    .unwrap();
    let sentences = load_corpus(&corpus_path()).unwrap();
    let vocab = Vocabulary::build(&sentences, 1).unwrap();
    let mut total_acc = 0.0;
    let mut batches = 0;
    for chunk in sentences.chunks(25) {
        let batch: Vec<_> = chunk
            .iter()
            .map(|s| encode_sentence(&vocab, s, model.cfg.max_len))
            .collect();
        let x = jscc::jscc_encode(&model, &batch).unwrap();
        let logits = jscc::jscc_decode(&model, &x, batch.len()).unwrap();
        total_acc += jscc::token_accuracy(&logits, &batch);
        batches += 1;
    }
    let acc = total_acc / batches as f64;
    println!("noiseless token accuracy: {acc:.4}");
    assert!(acc >= 0.99, "noiseless accuracy {acc} below 0.99");
}
