//! Network architecture and forward passes.
//!
//! A token-embedding + two-layer GRU encoder maps a bit string to a
//! 256-value context vector (the concatenated final hidden states of both
//! layers). A mirrored GRU decoder reconstructs the string from the
//! context. A hypernetwork maps the 32-value instance embedding to the
//! flat weight vector of a three-layer scorer, which maps the context to
//! objective values.
//!
//! All forward functions are batched; sequences within a batch share one
//! length, so no padding is involved.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;

use super::real::{r, Real};
use crate::problems::BitVector;
use crate::seeding::rng_from;

pub const VOCAB: usize = 5;
pub const TOKEN_BIT0: usize = 0;
pub const TOKEN_BIT1: usize = 1;
pub const TOKEN_SOS: usize = 2;
pub const TOKEN_EOS: usize = 3;
pub const TOKEN_PAD: usize = 4;

pub const TOKEN_EMBED: usize = 64;
pub const HIDDEN: usize = 128;
pub const N_LAYERS: usize = 2;
pub const CONTEXT: usize = 2 * HIDDEN;
pub const EMBED_DIM: usize = 32;
pub const HYPER_HIDDEN: usize = 64;
/// Longest supported solution length.
pub const MAX_LEN: usize = 128;

pub const LEAKY_SLOPE: f64 = 0.01;

/// Scorer layer widths: context -> 128 -> 128 -> n objectives.
pub fn scorer_flat_len(n_obj: usize) -> usize {
    (CONTEXT * HIDDEN + HIDDEN) + (HIDDEN * HIDDEN + HIDDEN) + (HIDDEN * n_obj + n_obj)
}

#[derive(Clone, Debug)]
pub struct GruLayer<T> {
    /// Input weights, gate-major: rows hold the r, z, n gates stacked.
    pub w_ih: Array2<T>,
    pub w_hh: Array2<T>,
    pub b_ih: Array1<T>,
    pub b_hh: Array1<T>,
}

impl<T: Real> GruLayer<T> {
    fn init(input: usize, rng: &mut impl Rng) -> Self {
        let scale = 1.0 / (HIDDEN as f64).sqrt();
        let mut draw = |n: usize, m: usize| {
            Array2::from_shape_fn((n, m), |_| r::<T>(rng.random_range(-scale..scale)))
        };
        Self {
            w_ih: draw(3 * HIDDEN, input),
            w_hh: draw(3 * HIDDEN, HIDDEN),
            b_ih: Array1::zeros(3 * HIDDEN),
            b_hh: Array1::zeros(3 * HIDDEN),
        }
    }

    pub fn input_width(&self) -> usize {
        self.w_ih.ncols()
    }
}

/// One GRU step over a batch. Returns the new hidden state plus the
/// intermediate activations the backward pass needs.
pub struct GruStep<T> {
    pub h: Array2<T>,
    pub r: Array2<T>,
    pub z: Array2<T>,
    pub n: Array2<T>,
    /// The recurrent candidate pre-activation `W_hn h + b_hn`.
    pub gh_n: Array2<T>,
}

pub fn gru_step<T: Real>(layer: &GruLayer<T>, x: &Array2<T>, h: &Array2<T>) -> GruStep<T> {
    let gi = x.dot(&layer.w_ih.t()) + &layer.b_ih;
    let gh = h.dot(&layer.w_hh.t()) + &layer.b_hh;
    let b = x.nrows();
    let one = r::<T>(1.0);

    let mut rr = Array2::<T>::zeros((b, HIDDEN));
    let mut zz = Array2::<T>::zeros((b, HIDDEN));
    let mut nn = Array2::<T>::zeros((b, HIDDEN));
    let mut gh_n = Array2::<T>::zeros((b, HIDDEN));
    let mut h_next = Array2::<T>::zeros((b, HIDDEN));
    for i in 0..b {
        for j in 0..HIDDEN {
            let r_pre = gi[[i, j]] + gh[[i, j]];
            let z_pre = gi[[i, HIDDEN + j]] + gh[[i, HIDDEN + j]];
            let rv = one / (one + (-r_pre).exp());
            let zv = one / (one + (-z_pre).exp());
            let ghn = gh[[i, 2 * HIDDEN + j]];
            let nv = (gi[[i, 2 * HIDDEN + j]] + rv * ghn).tanh();
            rr[[i, j]] = rv;
            zz[[i, j]] = zv;
            nn[[i, j]] = nv;
            gh_n[[i, j]] = ghn;
            h_next[[i, j]] = (one - zv) * nv + zv * h[[i, j]];
        }
    }
    GruStep {
        h: h_next,
        r: rr,
        z: zz,
        n: nn,
        gh_n,
    }
}

/// Shared parameters of one problem class: Seq2Seq weights, the decoder's
/// token projection and the hypernetwork.
#[derive(Clone, Debug)]
pub struct SharedWeights<T> {
    pub token_embedding: Array2<T>,
    pub encoder: Vec<GruLayer<T>>,
    pub decoder: Vec<GruLayer<T>>,
    pub decoder_out_w: Array2<T>,
    pub decoder_out_b: Array1<T>,
    pub hyper_w1: Array2<T>,
    pub hyper_b1: Array1<T>,
    pub hyper_w2: Array2<T>,
    pub hyper_b2: Array1<T>,
    pub n_obj: usize,
}

impl<T: Real> SharedWeights<T> {
    /// Randomly initialized weights. The hypernetwork's output bias is
    /// seeded with a conventional per-layer fan-in initialization so the
    /// generated scorer starts sane, while the output weights start small.
    pub fn init(n_obj: usize, seed: u64) -> Self {
        assert!((2..=3).contains(&n_obj), "2 or 3 objectives supported");
        let flat = scorer_flat_len(n_obj);
        assert_eq!(flat, 49408 + 129 * n_obj, "scorer parameter-count identity");
        let mut rng = rng_from(seed);
        let emb_scale = 0.5;
        let token_embedding = Array2::from_shape_fn((VOCAB, TOKEN_EMBED), |_| {
            r::<T>(rng.random_range(-emb_scale..emb_scale))
        });
        let encoder = vec![
            GruLayer::init(TOKEN_EMBED, &mut rng),
            GruLayer::init(HIDDEN, &mut rng),
        ];
        let decoder = vec![
            GruLayer::init(TOKEN_EMBED, &mut rng),
            GruLayer::init(HIDDEN, &mut rng),
        ];
        let out_scale = 1.0 / (HIDDEN as f64).sqrt();
        let decoder_out_w = Array2::from_shape_fn((VOCAB, HIDDEN), |_| {
            r::<T>(rng.random_range(-out_scale..out_scale))
        });
        let decoder_out_b = Array1::zeros(VOCAB);

        let h1_scale = 1.0 / (EMBED_DIM as f64).sqrt();
        let hyper_w1 = Array2::from_shape_fn((HYPER_HIDDEN, EMBED_DIM), |_| {
            r::<T>(rng.random_range(-h1_scale..h1_scale))
        });
        let hyper_b1 = Array1::zeros(HYPER_HIDDEN);
        let w2_scale = 0.01;
        let hyper_w2 = Array2::from_shape_fn((flat, HYPER_HIDDEN), |_| {
            r::<T>(rng.random_range(-w2_scale..w2_scale))
        });
        // bias carries the scorer's own fan-in initialization
        let mut hyper_b2 = Array1::<T>::zeros(flat);
        let mut offset = 0;
        for (fan_in, rows) in [
            (CONTEXT, HIDDEN),
            (HIDDEN, HIDDEN),
            (HIDDEN, n_obj),
        ] {
            let scale = 1.0 / (fan_in as f64).sqrt();
            for k in 0..(fan_in * rows) {
                hyper_b2[offset + k] = r::<T>(rng.random_range(-scale..scale));
            }
            offset += fan_in * rows + rows; // weight block then zero bias block
        }

        Self {
            token_embedding,
            encoder,
            decoder,
            decoder_out_w,
            decoder_out_b,
            hyper_w1,
            hyper_b1,
            hyper_w2,
            hyper_b2,
            n_obj,
        }
    }

    pub fn scorer_flat_len(&self) -> usize {
        scorer_flat_len(self.n_obj)
    }

    /// Named parameter blocks, flattened; shared layout with
    /// [`super::backprop::SharedGrads`].
    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [T])> {
        let mut out: Vec<(String, &mut [T])> = vec![(
            "token_embedding".into(),
            self.token_embedding.as_slice_mut().unwrap(),
        )];
        for (tag, layers) in [("encoder", &mut self.encoder), ("decoder", &mut self.decoder)] {
            for (l, layer) in layers.iter_mut().enumerate() {
                out.push((format!("{tag}{l}.w_ih"), layer.w_ih.as_slice_mut().unwrap()));
                out.push((format!("{tag}{l}.w_hh"), layer.w_hh.as_slice_mut().unwrap()));
                out.push((format!("{tag}{l}.b_ih"), layer.b_ih.as_slice_mut().unwrap()));
                out.push((format!("{tag}{l}.b_hh"), layer.b_hh.as_slice_mut().unwrap()));
            }
        }
        out.push(("decoder_out.w".into(), self.decoder_out_w.as_slice_mut().unwrap()));
        out.push(("decoder_out.b".into(), self.decoder_out_b.as_slice_mut().unwrap()));
        out.push(("hyper.w1".into(), self.hyper_w1.as_slice_mut().unwrap()));
        out.push(("hyper.b1".into(), self.hyper_b1.as_slice_mut().unwrap()));
        out.push(("hyper.w2".into(), self.hyper_w2.as_slice_mut().unwrap()));
        out.push(("hyper.b2".into(), self.hyper_b2.as_slice_mut().unwrap()));
        out
    }

    /// Converts precision, for double-precision gradient checking.
    pub fn cast<U: Real>(&self) -> SharedWeights<U> {
        let conv2 = |a: &Array2<T>| a.mapv(|v| <U as Real>::from_f64(v.to_f64()));
        let conv1 = |a: &Array1<T>| a.mapv(|v| <U as Real>::from_f64(v.to_f64()));
        let layer = |l: &GruLayer<T>| GruLayer {
            w_ih: conv2(&l.w_ih),
            w_hh: conv2(&l.w_hh),
            b_ih: conv1(&l.b_ih),
            b_hh: conv1(&l.b_hh),
        };
        SharedWeights {
            token_embedding: conv2(&self.token_embedding),
            encoder: self.encoder.iter().map(layer).collect(),
            decoder: self.decoder.iter().map(layer).collect(),
            decoder_out_w: conv2(&self.decoder_out_w),
            decoder_out_b: conv1(&self.decoder_out_b),
            hyper_w1: conv2(&self.hyper_w1),
            hyper_b1: conv1(&self.hyper_b1),
            hyper_w2: conv2(&self.hyper_w2),
            hyper_b2: conv1(&self.hyper_b2),
            n_obj: self.n_obj,
        }
    }
}

/// Token ids for one solution: the bits followed by end-of-sequence.
pub fn encoder_tokens(x: &BitVector) -> Vec<usize> {
    let mut t: Vec<usize> = x.bits().iter().map(|&b| b as usize).collect();
    t.push(TOKEN_EOS);
    t
}

/// Gathers embedded token vectors for one position across the batch.
fn embed_tokens<T: Real>(shared: &SharedWeights<T>, tokens: &[usize]) -> Array2<T> {
    let mut out = Array2::<T>::zeros((tokens.len(), TOKEN_EMBED));
    for (i, &t) in tokens.iter().enumerate() {
        out.row_mut(i).assign(&shared.token_embedding.row(t));
    }
    out
}

/// Everything the encoder backward pass needs.
pub struct EncodeCache<T> {
    /// Token ids per step: `tokens[t][b]`.
    pub tokens: Vec<Vec<usize>>,
    /// Embedded inputs per step (layer-0 inputs).
    pub inputs: Vec<Array2<T>>,
    /// Per layer, per step activations.
    pub steps: Vec<Vec<GruStep<T>>>,
    /// Per layer initial hidden state (zeros).
    pub batch: usize,
}

/// Runs the encoder over a batch of equal-length token sequences.
/// The context is the concatenation of both layers' final hidden states.
pub fn encode_batch<T: Real>(
    shared: &SharedWeights<T>,
    sequences: &[Vec<usize>],
) -> (Array2<T>, EncodeCache<T>) {
    let b = sequences.len();
    let len = sequences[0].len();
    assert!(sequences.iter().all(|s| s.len() == len), "uniform lengths per batch");
    assert!(len <= MAX_LEN + 1, "sequence exceeds the supported cap");

    let mut tokens: Vec<Vec<usize>> = Vec::with_capacity(len);
    for t in 0..len {
        tokens.push(sequences.iter().map(|s| s[t]).collect());
    }

    let mut h = vec![Array2::<T>::zeros((b, HIDDEN)); N_LAYERS];
    let mut inputs = Vec::with_capacity(len);
    let mut steps: Vec<Vec<GruStep<T>>> = (0..N_LAYERS).map(|_| Vec::with_capacity(len)).collect();
    for tok in &tokens {
        let x0 = embed_tokens(shared, tok);
        let s0 = gru_step(&shared.encoder[0], &x0, &h[0]);
        h[0] = s0.h.clone();
        let s1 = gru_step(&shared.encoder[1], &s0.h, &h[1]);
        h[1] = s1.h.clone();
        inputs.push(x0);
        steps[0].push(s0);
        steps[1].push(s1);
    }

    let mut c = Array2::<T>::zeros((b, CONTEXT));
    c.slice_mut(s![.., 0..HIDDEN]).assign(&h[0]);
    c.slice_mut(s![.., HIDDEN..CONTEXT]).assign(&h[1]);
    (
        c,
        EncodeCache {
            tokens,
            inputs,
            steps,
            batch: b,
        },
    )
}

/// Decoder teacher-forcing pass: inputs are `SOS` followed by the target
/// bits; logits are produced for every target position (bits, then EOS).
pub struct DecodeCache<T> {
    pub tokens: Vec<Vec<usize>>,
    pub inputs: Vec<Array2<T>>,
    pub steps: Vec<Vec<GruStep<T>>>,
    pub logits: Vec<Array2<T>>,
    pub batch: usize,
}

pub fn decode_teacher_forced<T: Real>(
    shared: &SharedWeights<T>,
    c: &Array2<T>,
    targets: &[Vec<usize>],
) -> DecodeCache<T> {
    let b = targets.len();
    let len = targets[0].len(); // bits + EOS
    assert!(targets.iter().all(|t| t.len() == len));

    // initial hidden states come from splitting the context
    let mut h = vec![
        c.slice(s![.., 0..HIDDEN]).to_owned(),
        c.slice(s![.., HIDDEN..CONTEXT]).to_owned(),
    ];

    let mut tokens: Vec<Vec<usize>> = Vec::with_capacity(len);
    for t in 0..len {
        // teacher forcing: SOS then the previous target token
        tokens.push(
            (0..b)
                .map(|i| if t == 0 { TOKEN_SOS } else { targets[i][t - 1] })
                .collect(),
        );
    }

    let mut inputs = Vec::with_capacity(len);
    let mut steps: Vec<Vec<GruStep<T>>> = (0..N_LAYERS).map(|_| Vec::with_capacity(len)).collect();
    let mut logits = Vec::with_capacity(len);
    for tok in &tokens {
        let x0 = embed_tokens(shared, tok);
        let s0 = gru_step(&shared.decoder[0], &x0, &h[0]);
        h[0] = s0.h.clone();
        let s1 = gru_step(&shared.decoder[1], &s0.h, &h[1]);
        h[1] = s1.h.clone();
        logits.push(s1.h.dot(&shared.decoder_out_w.t()) + &shared.decoder_out_b);
        inputs.push(x0);
        steps[0].push(s0);
        steps[1].push(s1);
    }
    DecodeCache {
        tokens,
        inputs,
        steps,
        logits,
        batch: b,
    }
}

/// Greedy readout: feeds back the argmax token until EOS or the length cap.
pub fn greedy_decode<T: Real>(shared: &SharedWeights<T>, c: &Array2<T>) -> Vec<Vec<usize>> {
    let b = c.nrows();
    let mut h = vec![
        c.slice(s![.., 0..HIDDEN]).to_owned(),
        c.slice(s![.., HIDDEN..CONTEXT]).to_owned(),
    ];
    let mut prev: Vec<usize> = vec![TOKEN_SOS; b];
    let mut done = vec![false; b];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); b];
    for _ in 0..MAX_LEN {
        let x0 = embed_tokens(shared, &prev);
        let s0 = gru_step(&shared.decoder[0], &x0, &h[0]);
        h[0] = s0.h.clone();
        let s1 = gru_step(&shared.decoder[1], &s0.h, &h[1]);
        h[1] = s1.h.clone();
        let logits = s1.h.dot(&shared.decoder_out_w.t()) + &shared.decoder_out_b;
        let mut all_done = true;
        for i in 0..b {
            if done[i] {
                continue;
            }
            let row = logits.row(i);
            let tok = (0..VOCAB)
                .max_by(|&a, &c2| row[a].partial_cmp(&row[c2]).unwrap())
                .unwrap();
            if tok == TOKEN_EOS {
                done[i] = true;
            } else {
                out[i].push(tok);
                all_done = false;
            }
            prev[i] = tok;
        }
        if all_done && done.iter().all(|&d| d) {
            break;
        }
    }
    out
}

/// Per-position softmax distributions over the vocabulary.
pub fn token_distributions<T: Real>(logits: &Array2<T>) -> Array2<T> {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}

/// Structured scorer weights cut from the hypernetwork's flat output.
#[derive(Clone, Debug)]
pub struct ScorerWeights<T> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
    pub w3: Array2<T>,
    pub b3: Array1<T>,
}

/// Hypernetwork forward: embedding to flat scorer weights.
pub struct HyperCache<T> {
    pub e: Array1<T>,
    pub pre1: Array1<T>,
    pub h1: Array1<T>,
    pub flat: Array1<T>,
}

pub fn hyper_forward<T: Real>(shared: &SharedWeights<T>, e: &Array1<T>) -> HyperCache<T> {
    assert_eq!(e.len(), EMBED_DIM);
    let pre1 = shared.hyper_w1.dot(e) + &shared.hyper_b1;
    let h1 = pre1.mapv(|v| leaky(v));
    let flat = shared.hyper_w2.dot(&h1) + &shared.hyper_b2;
    HyperCache {
        e: e.clone(),
        pre1,
        h1,
        flat,
    }
}

#[inline]
pub fn leaky<T: Real>(v: T) -> T {
    if v >= T::zero() {
        v
    } else {
        v * r::<T>(LEAKY_SLOPE)
    }
}

#[inline]
pub fn leaky_grad<T: Real>(pre: T) -> T {
    if pre >= T::zero() {
        T::one()
    } else {
        r::<T>(LEAKY_SLOPE)
    }
}

/// Cuts the flat hypernetwork output into scorer layer blocks
/// `[256 -> 128], [128 -> 128], [128 -> n]`.
pub fn scorer_weights<T: Real>(flat: &Array1<T>, n_obj: usize) -> ScorerWeights<T> {
    assert_eq!(flat.len(), scorer_flat_len(n_obj));
    let mut off = 0;
    let mut take2 = |rows: usize, cols: usize, off: &mut usize| {
        let w = Array2::from_shape_fn((rows, cols), |(i, j)| flat[*off + i * cols + j]);
        *off += rows * cols;
        w
    };
    let mut take1 = |n: usize, off: &mut usize| {
        let v = Array1::from_shape_fn(n, |i| flat[*off + i]);
        *off += n;
        v
    };
    let w1 = take2(HIDDEN, CONTEXT, &mut off);
    let b1 = take1(HIDDEN, &mut off);
    let w2 = take2(HIDDEN, HIDDEN, &mut off);
    let b2 = take1(HIDDEN, &mut off);
    let w3 = take2(n_obj, HIDDEN, &mut off);
    let b3 = take1(n_obj, &mut off);
    debug_assert_eq!(off, flat.len());
    ScorerWeights {
        w1,
        b1,
        w2,
        b2,
        w3,
        b3,
    }
}

/// Scorer forward over a batch of contexts; LeakyReLU inside, linear out.
pub struct ScorerCache<T> {
    pub c: Array2<T>,
    pub pre1: Array2<T>,
    pub h1: Array2<T>,
    pub pre2: Array2<T>,
    pub h2: Array2<T>,
    pub y: Array2<T>,
}

pub fn scorer_forward<T: Real>(w: &ScorerWeights<T>, c: &Array2<T>) -> ScorerCache<T> {
    let pre1 = c.dot(&w.w1.t()) + &w.b1;
    let h1 = pre1.mapv(leaky);
    let pre2 = h1.dot(&w.w2.t()) + &w.b2;
    let h2 = pre2.mapv(leaky);
    let y = h2.dot(&w.w3.t()) + &w.b3;
    ScorerCache {
        c: c.clone(),
        pre1,
        h1,
        pre2,
        h2,
        y,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_identity() {
        assert_eq!(scorer_flat_len(2), 49666);
        assert_eq!(scorer_flat_len(3), 49795);
    }

    #[test]
    fn context_width_is_fixed_across_lengths() {
        let shared = SharedWeights::<f32>::init(2, 1);
        for dim in [4usize, 32, 64] {
            let x = BitVector::zeros(dim);
            let (c, _) = encode_batch(&shared, &[encoder_tokens(&x)]);
            assert_eq!(c.ncols(), CONTEXT);
        }
    }

    #[test]
    fn encode_is_deterministic() {
        let shared = SharedWeights::<f32>::init(2, 2);
        let x = BitVector::parse("10110010").unwrap();
        let (c1, _) = encode_batch(&shared, &[encoder_tokens(&x)]);
        let (c2, _) = encode_batch(&shared, &[encoder_tokens(&x)]);
        assert_eq!(c1, c2);
    }

    #[test]
    fn zero_weights_give_zero_context() {
        let mut shared = SharedWeights::<f64>::init(2, 3);
        for (_, block) in shared.blocks_mut() {
            for v in block {
                *v = 0.0;
            }
        }
        let x = BitVector::parse("1010").unwrap();
        let (c, _) = encode_batch(&shared, &[encoder_tokens(&x)]);
        // with all-zero weights every gate input is zero: r = z = 1/2,
        // n = tanh(0) = 0, so h stays exactly 0 through every step
        assert!(c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distributions_sum_to_one() {
        let shared = SharedWeights::<f32>::init(2, 4);
        let x = BitVector::parse("110100").unwrap();
        let (c, _) = encode_batch(&shared, &[encoder_tokens(&x)]);
        let targets = vec![encoder_tokens(&x)];
        let cache = decode_teacher_forced(&shared, &c, &targets);
        for logits in &cache.logits {
            let p = token_distributions(logits);
            for row in p.axis_iter(Axis(0)) {
                let s: f32 = row.sum();
                assert!((s - 1.0).abs() < 1e-5, "softmax sums to {s}");
            }
        }
    }

    #[test]
    fn greedy_decode_respects_cap() {
        let shared = SharedWeights::<f32>::init(2, 5);
        let x = BitVector::zeros(16);
        let (c, _) = encode_batch(&shared, &[encoder_tokens(&x)]);
        let out = greedy_decode(&shared, &c);
        assert!(out[0].len() <= MAX_LEN);
    }

    #[test]
    fn scorer_zero_embedding_zero_hyper_bias() {
        let mut shared = SharedWeights::<f64>::init(2, 6);
        shared.hyper_b1.fill(0.0);
        shared.hyper_b2.fill(0.0);
        let e = Array1::<f64>::zeros(EMBED_DIM);
        let cache = hyper_forward(&shared, &e);
        assert!(cache.flat.iter().all(|&v| v == 0.0), "linear map of zero is zero");
    }
}
