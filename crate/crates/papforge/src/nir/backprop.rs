//! Hand-derived gradients for the joint loss: mean-squared objective error
//! plus the scaled token cross-entropy reconstruction term. Verified
//! against central finite differences by `gradcheck`.

use ndarray::{s, Array1, Array2, Axis};

use super::model::{
    leaky_grad, scorer_flat_len, DecodeCache, EncodeCache, GruLayer, GruStep, HyperCache,
    ScorerCache, ScorerWeights, SharedWeights, CONTEXT, EMBED_DIM, HIDDEN, HYPER_HIDDEN,
    TOKEN_EMBED, VOCAB,
};
use super::real::{r, Real};

#[derive(Clone, Debug)]
pub struct GruGrads<T> {
    pub w_ih: Array2<T>,
    pub w_hh: Array2<T>,
    pub b_ih: Array1<T>,
    pub b_hh: Array1<T>,
}

impl<T: Real> GruGrads<T> {
    fn zeros(input: usize) -> Self {
        Self {
            w_ih: Array2::zeros((3 * HIDDEN, input)),
            w_hh: Array2::zeros((3 * HIDDEN, HIDDEN)),
            b_ih: Array1::zeros(3 * HIDDEN),
            b_hh: Array1::zeros(3 * HIDDEN),
        }
    }

    fn add(&mut self, other: &Self) {
        self.w_ih += &other.w_ih;
        self.w_hh += &other.w_hh;
        self.b_ih += &other.b_ih;
        self.b_hh += &other.b_hh;
    }
}

/// Gradient accumulator mirroring [`SharedWeights`].
#[derive(Clone, Debug)]
pub struct SharedGrads<T> {
    pub token_embedding: Array2<T>,
    pub encoder: Vec<GruGrads<T>>,
    pub decoder: Vec<GruGrads<T>>,
    pub decoder_out_w: Array2<T>,
    pub decoder_out_b: Array1<T>,
    pub hyper_w1: Array2<T>,
    pub hyper_b1: Array1<T>,
    pub hyper_w2: Array2<T>,
    pub hyper_b2: Array1<T>,
}

impl<T: Real> SharedGrads<T> {
    pub fn zeros(n_obj: usize) -> Self {
        Self {
            token_embedding: Array2::zeros((VOCAB, TOKEN_EMBED)),
            encoder: vec![GruGrads::zeros(TOKEN_EMBED), GruGrads::zeros(HIDDEN)],
            decoder: vec![GruGrads::zeros(TOKEN_EMBED), GruGrads::zeros(HIDDEN)],
            decoder_out_w: Array2::zeros((VOCAB, HIDDEN)),
            decoder_out_b: Array1::zeros(VOCAB),
            hyper_w1: Array2::zeros((HYPER_HIDDEN, EMBED_DIM)),
            hyper_b1: Array1::zeros(HYPER_HIDDEN),
            hyper_w2: Array2::zeros((scorer_flat_len(n_obj), HYPER_HIDDEN)),
            hyper_b2: Array1::zeros(scorer_flat_len(n_obj)),
        }
    }

    pub fn add(&mut self, other: &Self) {
        self.token_embedding += &other.token_embedding;
        for (a, b) in self.encoder.iter_mut().zip(&other.encoder) {
            a.add(b);
        }
        for (a, b) in self.decoder.iter_mut().zip(&other.decoder) {
            a.add(b);
        }
        self.decoder_out_w += &other.decoder_out_w;
        self.decoder_out_b += &other.decoder_out_b;
        self.hyper_w1 += &other.hyper_w1;
        self.hyper_b1 += &other.hyper_b1;
        self.hyper_w2 += &other.hyper_w2;
        self.hyper_b2 += &other.hyper_b2;
    }

    /// Blocks in the same order and layout as `SharedWeights::blocks_mut`.
    pub fn blocks(&self) -> Vec<(String, &[T])> {
        let mut out: Vec<(String, &[T])> = vec![(
            "token_embedding".into(),
            self.token_embedding.as_slice().unwrap(),
        )];
        for (tag, layers) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for (l, layer) in layers.iter().enumerate() {
                out.push((format!("{tag}{l}.w_ih"), layer.w_ih.as_slice().unwrap()));
                out.push((format!("{tag}{l}.w_hh"), layer.w_hh.as_slice().unwrap()));
                out.push((format!("{tag}{l}.b_ih"), layer.b_ih.as_slice().unwrap()));
                out.push((format!("{tag}{l}.b_hh"), layer.b_hh.as_slice().unwrap()));
            }
        }
        out.push(("decoder_out.w".into(), self.decoder_out_w.as_slice().unwrap()));
        out.push(("decoder_out.b".into(), self.decoder_out_b.as_slice().unwrap()));
        out.push(("hyper.w1".into(), self.hyper_w1.as_slice().unwrap()));
        out.push(("hyper.b1".into(), self.hyper_b1.as_slice().unwrap()));
        out.push(("hyper.w2".into(), self.hyper_w2.as_slice().unwrap()));
        out.push(("hyper.b2".into(), self.hyper_b2.as_slice().unwrap()));
        out
    }

    pub fn scale(&mut self, s: T) {
        self.token_embedding *= s;
        for layer in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            layer.w_ih *= s;
            layer.w_hh *= s;
            layer.b_ih *= s;
            layer.b_hh *= s;
        }
        self.decoder_out_w *= s;
        self.decoder_out_b *= s;
        self.hyper_w1 *= s;
        self.hyper_b1 *= s;
        self.hyper_w2 *= s;
        self.hyper_b2 *= s;
    }

    /// Applies plain gradient descent: `w -= lr * g`, optionally after
    /// global-norm clipping.
    pub fn apply(&self, weights: &mut SharedWeights<T>, lr: T, clip: Option<T>) {
        let scale = match clip {
            Some(max_norm) => {
                let norm = self.global_norm();
                if norm > max_norm {
                    lr * max_norm / norm
                } else {
                    lr
                }
            }
            None => lr,
        };
        let mut blocks = weights.blocks_mut();
        for ((_, w), (_, g)) in blocks.iter_mut().zip(self.blocks()) {
            for (wv, gv) in w.iter_mut().zip(g) {
                *wv = *wv - scale * *gv;
            }
        }
    }

    pub fn global_norm(&self) -> T {
        let mut total = T::zero();
        for (_, g) in self.blocks() {
            for &v in g {
                total += v * v;
            }
        }
        total.sqrt()
    }
}

/// Runs one GRU layer backward over a whole sequence.
///
/// `d_out[t]` is the gradient arriving at `h_t` from outside the
/// recurrence (upper layer inputs, output projections), `d_h_final` an
/// extra gradient on the last hidden state (context split). Returns the
/// per-step input gradients and the gradient on the initial hidden state.
#[allow(clippy::too_many_arguments)]
pub fn gru_backward_sequence<T: Real>(
    layer: &GruLayer<T>,
    h0: &Array2<T>,
    inputs: &[Array2<T>],
    steps: &[GruStep<T>],
    d_out: &[Array2<T>],
    d_h_final: Option<&Array2<T>>,
    grads: &mut GruGrads<T>,
) -> (Vec<Array2<T>>, Array2<T>) {
    let len = steps.len();
    let b = h0.nrows();
    let one = r::<T>(1.0);
    let mut d_h = match d_h_final {
        Some(d) => d.clone(),
        None => Array2::zeros((b, HIDDEN)),
    };
    let mut d_inputs: Vec<Array2<T>> = vec![Array2::zeros((0, 0)); len];

    for t in (0..len).rev() {
        d_h += &d_out[t];
        let step = &steps[t];
        let h_prev = if t == 0 { h0 } else { &steps[t - 1].h };

        let mut d_gi = Array2::<T>::zeros((b, 3 * HIDDEN));
        let mut d_gh = Array2::<T>::zeros((b, 3 * HIDDEN));
        let mut d_h_prev = Array2::<T>::zeros((b, HIDDEN));
        for i in 0..b {
            for j in 0..HIDDEN {
                let dh = d_h[[i, j]];
                let z = step.z[[i, j]];
                let n = step.n[[i, j]];
                let rr = step.r[[i, j]];
                let hp = h_prev[[i, j]];
                let d_n = dh * (one - z);
                let d_z = dh * (hp - n);
                d_h_prev[[i, j]] = dh * z;
                let d_an = d_n * (one - n * n);
                let d_r = d_an * step.gh_n[[i, j]];
                let d_ar = d_r * rr * (one - rr);
                let d_az = d_z * z * (one - z);
                d_gi[[i, j]] = d_ar;
                d_gi[[i, HIDDEN + j]] = d_az;
                d_gi[[i, 2 * HIDDEN + j]] = d_an;
                d_gh[[i, j]] = d_ar;
                d_gh[[i, HIDDEN + j]] = d_az;
                d_gh[[i, 2 * HIDDEN + j]] = d_an * rr;
            }
        }
        grads.w_ih += &d_gi.t().dot(&inputs[t]);
        grads.w_hh += &d_gh.t().dot(h_prev);
        grads.b_ih += &d_gi.sum_axis(Axis(0));
        grads.b_hh += &d_gh.sum_axis(Axis(0));
        d_inputs[t] = d_gi.dot(&layer.w_ih);
        d_h_prev += &d_gh.dot(&layer.w_hh);
        d_h = d_h_prev;
    }
    (d_inputs, d_h)
}

/// Scatters per-step input gradients back onto embedding rows.
fn accumulate_token_grads<T: Real>(
    token_grads: &mut Array2<T>,
    tokens: &[Vec<usize>],
    d_inputs: &[Array2<T>],
) {
    for (tok, d_x) in tokens.iter().zip(d_inputs) {
        for (i, &t) in tok.iter().enumerate() {
            let mut row = token_grads.row_mut(t);
            row += &d_x.row(i);
        }
    }
}

/// Backward through the encoder given the gradient on the context vector.
pub fn encoder_backward<T: Real>(
    shared: &SharedWeights<T>,
    cache: &EncodeCache<T>,
    d_context: &Array2<T>,
    grads: &mut SharedGrads<T>,
) {
    let b = cache.batch;
    let len = cache.steps[0].len();
    let zeros = Array2::<T>::zeros((b, HIDDEN));
    let d_c1 = d_context.slice(s![.., 0..HIDDEN]).to_owned();
    let d_c2 = d_context.slice(s![.., HIDDEN..CONTEXT]).to_owned();

    // layer 1 consumes layer 0's hidden states as inputs
    let layer1_inputs: Vec<Array2<T>> = cache.steps[0].iter().map(|s| s.h.clone()).collect();
    let no_out: Vec<Array2<T>> = vec![Array2::zeros((b, HIDDEN)); len];
    let (d_x1, _) = gru_backward_sequence(
        &shared.encoder[1],
        &zeros,
        &layer1_inputs,
        &cache.steps[1],
        &no_out,
        Some(&d_c2),
        &mut grads.encoder[1],
    );
    let (d_x0, _) = gru_backward_sequence(
        &shared.encoder[0],
        &zeros,
        &cache.inputs,
        &cache.steps[0],
        &d_x1,
        Some(&d_c1),
        &mut grads.encoder[0],
    );
    accumulate_token_grads(&mut grads.token_embedding, &cache.tokens, &d_x0);
}

/// Backward through the decoder given per-step logit gradients; returns the
/// gradient on the context vector (via the split initial hidden states).
pub fn decoder_backward<T: Real>(
    shared: &SharedWeights<T>,
    c: &Array2<T>,
    cache: &DecodeCache<T>,
    d_logits: &[Array2<T>],
    grads: &mut SharedGrads<T>,
) -> Array2<T> {
    let b = cache.batch;
    let len = cache.steps[0].len();
    let h0_1 = c.slice(s![.., 0..HIDDEN]).to_owned();
    let h0_2 = c.slice(s![.., HIDDEN..CONTEXT]).to_owned();

    // projection backward feeds layer 1's per-step output gradients
    let mut d_out1: Vec<Array2<T>> = Vec::with_capacity(len);
    for t in 0..len {
        grads.decoder_out_w += &d_logits[t].t().dot(&cache.steps[1][t].h);
        grads.decoder_out_b += &d_logits[t].sum_axis(Axis(0));
        d_out1.push(d_logits[t].dot(&shared.decoder_out_w));
    }

    let layer1_inputs: Vec<Array2<T>> = cache.steps[0].iter().map(|s| s.h.clone()).collect();
    let (d_x1, d_h0_2) = gru_backward_sequence(
        &shared.decoder[1],
        &h0_2,
        &layer1_inputs,
        &cache.steps[1],
        &d_out1,
        None,
        &mut grads.decoder[1],
    );
    let (d_x0, d_h0_1) = gru_backward_sequence(
        &shared.decoder[0],
        &h0_1,
        &cache.inputs,
        &cache.steps[0],
        &d_x1,
        None,
        &mut grads.decoder[0],
    );
    accumulate_token_grads(&mut grads.token_embedding, &cache.tokens, &d_x0);

    let mut d_c = Array2::<T>::zeros((b, CONTEXT));
    d_c.slice_mut(s![.., 0..HIDDEN]).assign(&d_h0_1);
    d_c.slice_mut(s![.., HIDDEN..CONTEXT]).assign(&d_h0_2);
    d_c
}

/// Backward through the scorer; returns the context gradient and the
/// gradient on the flat generated-weight vector.
pub fn scorer_backward<T: Real>(
    w: &ScorerWeights<T>,
    cache: &ScorerCache<T>,
    d_y: &Array2<T>,
    n_obj: usize,
) -> (Array2<T>, Array1<T>) {
    let d_w3 = d_y.t().dot(&cache.h2);
    let d_b3 = d_y.sum_axis(Axis(0));
    let d_h2 = d_y.dot(&w.w3);

    let mut d_pre2 = d_h2;
    for (dp, &pre) in d_pre2.iter_mut().zip(cache.pre2.iter()) {
        *dp = *dp * leaky_grad(pre);
    }
    let d_w2 = d_pre2.t().dot(&cache.h1);
    let d_b2 = d_pre2.sum_axis(Axis(0));
    let d_h1 = d_pre2.dot(&w.w2);

    let mut d_pre1 = d_h1;
    for (dp, &pre) in d_pre1.iter_mut().zip(cache.pre1.iter()) {
        *dp = *dp * leaky_grad(pre);
    }
    let d_w1 = d_pre1.t().dot(&cache.c);
    let d_b1 = d_pre1.sum_axis(Axis(0));
    let d_c = d_pre1.dot(&w.w1);

    // reassemble into the hypernetwork's flat layout
    let mut flat = Array1::<T>::zeros(scorer_flat_len(n_obj));
    let mut off = 0;
    for (w2d, b1d) in [(&d_w1, &d_b1), (&d_w2, &d_b2), (&d_w3, &d_b3)] {
        for v in w2d.iter() {
            flat[off] = *v;
            off += 1;
        }
        for v in b1d.iter() {
            flat[off] = *v;
            off += 1;
        }
    }
    debug_assert_eq!(off, flat.len());
    (d_c, flat)
}

/// Backward through the hypernetwork; returns the embedding gradient.
pub fn hyper_backward<T: Real>(
    shared: &SharedWeights<T>,
    cache: &HyperCache<T>,
    d_flat: &Array1<T>,
    grads: &mut SharedGrads<T>,
) -> Array1<T> {
    // outer products via single-column matrices
    let d_flat2 = d_flat.view().insert_axis(Axis(1));
    let h1t = cache.h1.view().insert_axis(Axis(0));
    grads.hyper_w2 += &d_flat2.dot(&h1t);
    grads.hyper_b2 += d_flat;
    let d_h1 = shared.hyper_w2.t().dot(d_flat);

    let mut d_pre1 = d_h1;
    for (dp, &pre) in d_pre1.iter_mut().zip(cache.pre1.iter()) {
        *dp = *dp * leaky_grad(pre);
    }
    let d_pre1_2 = d_pre1.view().insert_axis(Axis(1));
    let et = cache.e.view().insert_axis(Axis(0));
    grads.hyper_w1 += &d_pre1_2.dot(&et);
    grads.hyper_b1 += &d_pre1;
    shared.hyper_w1.t().dot(&d_pre1)
}
