//! Pretraining and joint training.
//!
//! Pretraining teaches the Seq2Seq module to reconstruct random bit
//! strings (token cross-entropy, teacher forcing). Joint training then
//! descends the combined loss: objective-value MSE plus the
//! `lambda / |T|`-scaled reconstruction cross-entropy, over all instances'
//! sample sets, updating the shared weights and every instance embedding.
//!
//! Plain momentum-free gradient descent with a cosine-annealed learning
//! rate and global-norm clipping; batches are uniform-length so no padding
//! is involved. Heavy batches split into fixed-size chunks that fan out
//! across the worker pool and reduce in chunk order, which keeps results
//! bit-identical regardless of thread count.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::backprop::{
    decoder_backward, encoder_backward, hyper_backward, scorer_backward, SharedGrads,
};
use super::model::{
    decode_teacher_forced, encode_batch, encoder_tokens, greedy_decode, hyper_forward,
    scorer_forward, scorer_weights, token_distributions, SharedWeights, EMBED_DIM, TOKEN_EOS,
};
use super::real::{r, Real};
use super::NirError;
use crate::problems::{BitVector, Evaluable, ObjectiveVector};
use crate::seeding::{derive_seed, rng_from};

/// Fixed data-parallel chunk width; fixed so that results do not depend on
/// the number of worker threads.
const CHUNK: usize = 64;

/// A solution paired with its ground-truth objective values.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub x: BitVector,
    pub y: ObjectiveVector,
}

/// Uniform random solutions, repaired and evaluated on the ground truth.
pub fn sample_dataset(
    instance: &dyn Evaluable,
    count: usize,
    seed: u64,
) -> Vec<TrainingSample> {
    let mut rng = rng_from(seed);
    let xs: Vec<BitVector> = (0..count.max(1))
        .map(|_| instance.repair(&BitVector::random(instance.dim(), &mut rng)))
        .collect();
    let ys = instance.evaluate_batch(&xs);
    xs.into_iter()
        .zip(ys)
        .map(|(x, y)| TrainingSample { x, y })
        .collect()
}

/// Which positions the reconstruction term covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CeSpan {
    /// The joint loss sums over the bit positions only.
    BitsOnly,
    /// Pretraining also supervises the end-of-sequence token.
    BitsAndEos,
}

/// Separately reported loss terms. `ce` already carries its weight.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossParts {
    pub mse: f64,
    pub ce: f64,
    pub samples: usize,
}

impl LossParts {
    pub fn total(&self) -> f64 {
        self.mse + self.ce
    }

    fn merge(mut self, other: LossParts) -> LossParts {
        self.mse += other.mse;
        self.ce += other.ce;
        self.samples += other.samples;
        self
    }

    fn per_sample(&self) -> LossParts {
        let n = self.samples.max(1) as f64;
        LossParts {
            mse: self.mse / n,
            ce: self.ce / n,
            samples: self.samples,
        }
    }
}

/// One instance's uniform-length minibatch, tokenized and standardized.
pub struct InstanceBatch<T> {
    pub instance_idx: usize,
    pub sequences: Vec<Vec<usize>>,
    pub dim: usize,
    /// Standardized targets, one row per sample; empty for pretraining.
    pub y_std: Array2<T>,
}

pub(crate) fn batch_from_bits<T: Real>(
    instance_idx: usize,
    xs: &[&BitVector],
    y_std: Array2<T>,
) -> InstanceBatch<T> {
    InstanceBatch {
        instance_idx,
        sequences: xs.iter().map(|x| encoder_tokens(x)).collect(),
        dim: xs[0].dim(),
        y_std,
    }
}

/// Loss sums and gradient sums for one batch (no normalization; the caller
/// scales by its batch size). `ce_weight` is `lambda / |T|` for joint
/// training and 1 for pretraining.
fn batch_sums<T: Real>(
    shared: &SharedWeights<T>,
    embedding: Option<&Array1<T>>,
    batch: &InstanceBatch<T>,
    ce_weight: f64,
    span: CeSpan,
) -> (LossParts, SharedGrads<T>, Option<Array1<T>>) {
    let b = batch.sequences.len();
    let d = batch.dim;
    let (c, enc_cache) = encode_batch(shared, &batch.sequences);
    let dec_cache = decode_teacher_forced(shared, &c, &batch.sequences);

    let mut grads = SharedGrads::zeros(shared.n_obj);
    let mut parts = LossParts {
        samples: b,
        ..Default::default()
    };

    // reconstruction term: per-sample cross-entropy averaged over the
    // covered positions, scaled by the caller's weight
    let ce_positions = match span {
        CeSpan::BitsOnly => d,
        CeSpan::BitsAndEos => d + 1,
    };
    let w_ce = r::<T>(ce_weight / ce_positions as f64);
    let mut d_logits: Vec<Array2<T>> = Vec::with_capacity(dec_cache.logits.len());
    for (t, logits) in dec_cache.logits.iter().enumerate() {
        let p = token_distributions(logits);
        let mut dl = Array2::<T>::zeros(logits.raw_dim());
        if t < ce_positions {
            for i in 0..b {
                let target = if t < d {
                    batch.sequences[i][t]
                } else {
                    TOKEN_EOS
                };
                let pt = p[[i, target]].to_f64().max(1e-12);
                parts.ce += -pt.ln() * ce_weight / ce_positions as f64;
                for k in 0..logits.ncols() {
                    let grad = p[[i, k]] - if k == target { T::one() } else { T::zero() };
                    dl[[i, k]] = grad * w_ce;
                }
            }
        }
        d_logits.push(dl);
    }

    let d_c_decoder = decoder_backward(shared, &c, &dec_cache, &d_logits, &mut grads);
    let mut d_c_total = d_c_decoder;

    // objective term
    let d_e = embedding.map(|e| {
        let hyper_cache = hyper_forward(shared, e);
        let sw = scorer_weights(&hyper_cache.flat, shared.n_obj);
        let sc = scorer_forward(&sw, &c);
        let n = shared.n_obj;
        let mut d_y = Array2::<T>::zeros((b, n));
        for i in 0..b {
            for k in 0..n {
                let diff = sc.y[[i, k]] - batch.y_std[[i, k]];
                parts.mse += (diff.to_f64()) * (diff.to_f64()) / n as f64;
                d_y[[i, k]] = r::<T>(2.0 / n as f64) * diff;
            }
        }
        let (d_c_scorer, d_flat) = scorer_backward(&sw, &sc, &d_y, n);
        d_c_total += &d_c_scorer;
        hyper_backward(shared, &hyper_cache, &d_flat, &mut grads)
    });

    encoder_backward(shared, &enc_cache, &d_c_total, &mut grads);
    (parts, grads, d_e)
}

/// Splits a batch into fixed-size chunks, fans them out, reduces in chunk
/// order.
fn batch_sums_parallel<T: Real>(
    shared: &SharedWeights<T>,
    embedding: Option<&Array1<T>>,
    batch: &InstanceBatch<T>,
    ce_weight: f64,
    span: CeSpan,
) -> (LossParts, SharedGrads<T>, Option<Array1<T>>) {
    let b = batch.sequences.len();
    if b <= CHUNK {
        return batch_sums(shared, embedding, batch, ce_weight, span);
    }
    let n_chunks = b.div_ceil(CHUNK);
    let results: Vec<(LossParts, SharedGrads<T>, Option<Array1<T>>)> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(b);
            let sub = InstanceBatch {
                instance_idx: batch.instance_idx,
                sequences: batch.sequences[lo..hi].to_vec(),
                dim: batch.dim,
                y_std: if batch.y_std.nrows() == 0 {
                    Array2::zeros((0, 0))
                } else {
                    batch.y_std.slice(ndarray::s![lo..hi, ..]).to_owned()
                },
            };
            batch_sums(shared, embedding, &sub, ce_weight, span)
        })
        .collect();
    let mut it = results.into_iter();
    let (mut parts, mut grads, mut d_e) = it.next().unwrap();
    for (p, g, de) in it {
        parts = parts.merge(p);
        grads.add(&g);
        if let (Some(acc), Some(d)) = (d_e.as_mut(), de) {
            *acc += &d;
        }
    }
    (parts, grads, d_e)
}

fn cosine_lr(step: usize, total: usize, lr_max: f64, lr_min: f64) -> f64 {
    if total <= 1 {
        return lr_max;
    }
    let phase = step as f64 / (total - 1) as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * phase).cos())
}

// ---------------------------------------------------------------------------
// pretraining

#[derive(Clone, Debug)]
pub struct PretrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub clip: Option<f64>,
    /// Early exit once held-out token accuracy reaches this level.
    pub target_accuracy: f64,
    pub eval_every: usize,
    pub holdout: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            steps: 6000,
            batch: 64,
            lr_max: 0.5,
            lr_min: 0.05,
            clip: Some(1.0),
            target_accuracy: 0.998,
            eval_every: 200,
            holdout: 128,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PretrainReport {
    pub steps_run: usize,
    pub final_accuracy: f64,
    pub reached_target: bool,
    pub loss_curve: Vec<f64>,
}

/// Token-level greedy-reconstruction accuracy: an early EOS counts every
/// remaining position as wrong.
pub fn reconstruction_accuracy<T: Real>(shared: &SharedWeights<T>, strings: &[BitVector]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    // group by length so batches stay uniform
    let mut by_len: std::collections::BTreeMap<usize, Vec<&BitVector>> = Default::default();
    for s in strings {
        by_len.entry(s.dim()).or_default().push(s);
    }
    for (_, group) in by_len {
        let seqs: Vec<Vec<usize>> = group.iter().map(|x| encoder_tokens(x)).collect();
        let (c, _) = encode_batch(shared, &seqs);
        let decoded = greedy_decode(shared, &c);
        for (x, tokens) in group.iter().zip(decoded) {
            total += x.dim();
            for (i, &b) in x.bits().iter().enumerate() {
                if tokens.get(i).copied() == Some(b as usize) {
                    correct += 1;
                }
            }
        }
    }
    correct as f64 / total.max(1) as f64
}

/// Domain-agnostic Seq2Seq pretraining on uniform random bit strings.
/// Lengths ramp up over the first half of the budget (short strings first).
pub fn pretrain_seq2seq<T: Real>(
    shared: &mut SharedWeights<T>,
    lengths: std::ops::RangeInclusive<usize>,
    config: &PretrainConfig,
    seed: u64,
) -> PretrainReport {
    let (lo, hi) = (*lengths.start(), *lengths.end());
    assert!(lo >= 1 && hi >= lo);
    let mut rng = rng_from(derive_seed(seed, "pretrain", 0));

    let mut holdout_rng = rng_from(derive_seed(seed, "pretrain-holdout", 0));
    let holdout: Vec<BitVector> = (0..config.holdout)
        .map(|_| {
            let len = holdout_rng.random_range(lo..=hi);
            BitVector::random(len, &mut holdout_rng)
        })
        .collect();

    let mut loss_curve = Vec::new();
    let mut final_accuracy = 0.0;
    let mut reached_target = false;
    let mut steps_run = 0;

    for step in 0..config.steps {
        // curriculum: the usable ceiling grows linearly over the first half
        let phase = (2.0 * step as f64 / config.steps.max(1) as f64).min(1.0);
        let ceil = lo + ((hi - lo) as f64 * phase).round() as usize;
        let len = rng.random_range(lo..=ceil.max(lo));
        let bits: Vec<BitVector> = (0..config.batch)
            .map(|_| BitVector::random(len, &mut rng))
            .collect();
        let refs: Vec<&BitVector> = bits.iter().collect();
        let batch = batch_from_bits::<T>(0, &refs, Array2::zeros((0, 0)));

        let (parts, mut grads, _) = batch_sums_parallel(shared, None, &batch, 1.0, CeSpan::BitsAndEos);
        let mean = parts.per_sample();
        loss_curve.push(mean.ce);
        if !mean.ce.is_finite() {
            break;
        }
        let lr = cosine_lr(step, config.steps, config.lr_max, config.lr_min);
        let scale = r::<T>(1.0 / parts.samples as f64);
        grads.scale(scale);
        grads.apply(shared, r::<T>(lr), config.clip.map(r::<T>));
        steps_run = step + 1;

        if (step + 1) % config.eval_every == 0 || step + 1 == config.steps {
            final_accuracy = reconstruction_accuracy(shared, &holdout);
            if final_accuracy >= config.target_accuracy {
                reached_target = true;
                break;
            }
        }
    }
    if !reached_target {
        final_accuracy = reconstruction_accuracy(shared, &holdout);
        reached_target = final_accuracy >= config.target_accuracy;
    }
    PretrainReport {
        steps_run,
        final_accuracy,
        reached_target,
        loss_curve,
    }
}

// ---------------------------------------------------------------------------
// joint training

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub samples_per_instance: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub lambda: f64,
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            samples_per_instance: 10_000,
            epochs: 5000,
            batch: 1024,
            lr_max: 0.002,
            lr_min: 0.0005,
            lambda: 1.0,
            clip: Some(10.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub initial_mse: f64,
    pub final_mse: f64,
    pub epoch_losses: Vec<LossParts>,
}

/// Per-instance standardization parameters with the embedding they belong
/// to.
#[derive(Clone, Debug)]
pub struct TrainedEmbedding<T> {
    pub e: Array1<T>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
    pub dim: usize,
}

pub(crate) fn standardize_targets(samples: &[TrainingSample]) -> (Vec<f64>, Vec<f64>) {
    let n = samples[0].y.n_obj();
    let count = samples.len() as f64;
    let mut mean = vec![0.0; n];
    for s in samples {
        for (m, &v) in mean.iter_mut().zip(s.y.values()) {
            *m += v / count;
        }
    }
    let mut std = vec![0.0; n];
    for s in samples {
        for (k, &v) in s.y.values().iter().enumerate() {
            std[k] += (v - mean[k]).powi(2) / count;
        }
    }
    for v in &mut std {
        *v = v.sqrt().max(1e-6);
    }
    (mean, std)
}

/// Jointly trains the shared weights and one embedding per instance on the
/// combined loss. `shared` should carry pretrained Seq2Seq weights.
pub fn train_nirs<T: Real>(
    shared: &mut SharedWeights<T>,
    instances: &[&dyn Evaluable],
    config: &TrainConfig,
    seed: u64,
) -> Result<(Vec<TrainedEmbedding<T>>, TrainReport), NirError> {
    assert!(!instances.is_empty());
    let n_instances = instances.len();
    let n_obj = shared.n_obj;
    for inst in instances {
        if inst.n_obj() != n_obj {
            return Err(NirError::ObjectiveMismatch {
                expected: n_obj,
                got: inst.n_obj(),
            });
        }
    }

    // ground-truth datasets and standardization
    let datasets: Vec<Vec<TrainingSample>> = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            sample_dataset(
                *inst,
                config.samples_per_instance,
                derive_seed(seed, "dataset", i as u64),
            )
        })
        .collect();
    let stats: Vec<(Vec<f64>, Vec<f64>)> = datasets.iter().map(|d| standardize_targets(d)).collect();
    let y_std: Vec<Array2<T>> = datasets
        .iter()
        .zip(&stats)
        .map(|(set, (mean, std))| {
            Array2::from_shape_fn((set.len(), n_obj), |(i, k)| {
                r::<T>((set[i].y.values()[k] - mean[k]) / std[k])
            })
        })
        .collect();

    let mut rng = rng_from(derive_seed(seed, "train", 0));
    let mut embeddings: Vec<Array1<T>> = (0..n_instances)
        .map(|_| Array1::from_shape_fn(EMBED_DIM, |_| r::<T>(rng.random_range(-0.1..0.1))))
        .collect();

    let eval_mse = |shared: &SharedWeights<T>, embeddings: &[Array1<T>]| -> f64 {
        let mut total = 0.0;
        let mut count = 0usize;
        for (i, set) in datasets.iter().enumerate() {
            for lo in (0..set.len()).step_by(256) {
                let hi = (lo + 256).min(set.len());
                let refs: Vec<&BitVector> = set[lo..hi].iter().map(|s| &s.x).collect();
                let batch = batch_from_bits::<T>(
                    i,
                    &refs,
                    y_std[i].slice(ndarray::s![lo..hi, ..]).to_owned(),
                );
                let (c, _) = encode_batch(shared, &batch.sequences);
                let hyper_cache = hyper_forward(shared, &embeddings[i]);
                let sw = scorer_weights(&hyper_cache.flat, n_obj);
                let sc = scorer_forward(&sw, &c);
                for bi in 0..batch.sequences.len() {
                    for k in 0..n_obj {
                        let diff = (sc.y[[bi, k]] - batch.y_std[[bi, k]]).to_f64();
                        total += diff * diff / n_obj as f64;
                    }
                    count += 1;
                }
            }
        }
        total / count.max(1) as f64
    };

    let initial_mse = eval_mse(shared, &embeddings);
    let batches_per_instance = config.samples_per_instance.div_ceil(config.batch);
    let total_steps = config.epochs * batches_per_instance * n_instances;
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        // fresh sample order per instance per epoch
        let orders: Vec<Vec<usize>> = (0..n_instances)
            .map(|i| {
                let mut order: Vec<usize> = (0..datasets[i].len()).collect();
                let mut ep_rng = rng_from(derive_seed(seed, "epoch-order", (epoch * n_instances + i) as u64));
                order.shuffle(&mut ep_rng);
                order
            })
            .collect();

        let mut epoch_parts = LossParts::default();
        for b in 0..batches_per_instance {
            for i in 0..n_instances {
                let set = &datasets[i];
                let lo = b * config.batch;
                if lo >= set.len() {
                    continue;
                }
                let hi = (lo + config.batch).min(set.len());
                let idx = &orders[i][lo..hi];
                let refs: Vec<&BitVector> = idx.iter().map(|&k| &set[k].x).collect();
                let targets =
                    Array2::from_shape_fn((idx.len(), n_obj), |(row, k)| y_std[i][[idx[row], k]]);
                let batch = batch_from_bits::<T>(i, &refs, targets);

                let ce_weight = config.lambda / n_instances as f64;
                let (parts, mut grads, d_e) =
                    batch_sums_parallel(shared, Some(&embeddings[i]), &batch, ce_weight, CeSpan::BitsOnly);
                if !parts.total().is_finite() {
                    return Err(NirError::Diverged {
                        step,
                        mse: parts.mse,
                        ce: parts.ce,
                    });
                }
                let lr = cosine_lr(step, total_steps, config.lr_max, config.lr_min);
                let inv_b = 1.0 / parts.samples as f64;
                grads.scale(r::<T>(inv_b));
                grads.apply(shared, r::<T>(lr), config.clip.map(r::<T>));
                if let Some(mut de) = d_e {
                    de *= r::<T>(inv_b * lr);
                    embeddings[i] -= &de;
                }
                epoch_parts = epoch_parts.merge(parts);
                step += 1;
            }
        }
        epoch_losses.push(epoch_parts.per_sample());
    }

    let final_mse = eval_mse(shared, &embeddings);
    let trained = embeddings
        .into_iter()
        .enumerate()
        .map(|(i, e)| TrainedEmbedding {
            e,
            target_mean: stats[i].0.clone(),
            target_std: stats[i].1.clone(),
            dim: instances[i].dim(),
        })
        .collect();
    Ok((
        trained,
        TrainReport {
            initial_mse,
            final_mse,
            epoch_losses,
        },
    ))
}

/// Forward-only joint loss over explicit batches, shared with the gradient
/// checker.
pub fn joint_loss_only<T: Real>(
    shared: &SharedWeights<T>,
    embeddings: &[Array1<T>],
    batches: &[InstanceBatch<T>],
    lambda: f64,
    n_instances_total: usize,
) -> LossParts {
    let mut out = LossParts::default();
    for batch in batches {
        let (c, _) = encode_batch(shared, &batch.sequences);
        let dec = decode_teacher_forced(shared, &c, &batch.sequences);
        let d = batch.dim;
        let b = batch.sequences.len();
        let ce_weight = lambda / n_instances_total as f64;
        for (t, logits) in dec.logits.iter().enumerate() {
            if t >= d {
                continue;
            }
            let p = token_distributions(logits);
            for i in 0..b {
                let target = batch.sequences[i][t];
                out.ce += -(p[[i, target]].to_f64().max(1e-12)).ln() * ce_weight / d as f64;
            }
        }
        let hyper_cache = hyper_forward(shared, &embeddings[batch.instance_idx]);
        let sw = scorer_weights(&hyper_cache.flat, shared.n_obj);
        let sc = scorer_forward(&sw, &c);
        for i in 0..b {
            for k in 0..shared.n_obj {
                let diff = (sc.y[[i, k]] - batch.y_std[[i, k]]).to_f64();
                out.mse += diff * diff / shared.n_obj as f64;
            }
        }
        out.samples += b;
    }
    out
}

/// Gradient sums over explicit batches, shared with the gradient checker.
pub fn joint_grads<T: Real>(
    shared: &SharedWeights<T>,
    embeddings: &[Array1<T>],
    batches: &[InstanceBatch<T>],
    lambda: f64,
    n_instances_total: usize,
) -> (LossParts, SharedGrads<T>, Vec<Array1<T>>) {
    let mut parts = LossParts::default();
    let mut grads = SharedGrads::zeros(shared.n_obj);
    let mut d_es: Vec<Array1<T>> = embeddings
        .iter()
        .map(|_| Array1::zeros(EMBED_DIM))
        .collect();
    for batch in batches {
        let ce_weight = lambda / n_instances_total as f64;
        let (p, g, d_e) = batch_sums(
            shared,
            Some(&embeddings[batch.instance_idx]),
            batch,
            ce_weight,
            CeSpan::BitsOnly,
        );
        parts = parts.merge(p);
        grads.add(&g);
        if let Some(d) = d_e {
            d_es[batch.instance_idx] += &d;
        }
    }
    (parts, grads, d_es)
}

pub(crate) use batch_from_bits as make_batch;
