//! Neural instance representation: a learned, evaluable instance
//! surrogate. Shared Seq2Seq + hypernetwork weights capture what a problem
//! class has in common; a 32-value embedding per instance captures what is
//! specific, and conditions the hypernetwork to generate the scorer that
//! maps encoded solutions to objective values.

pub mod backprop;
mod checkpoint;
mod gradcheck;
pub mod model;
mod real;
pub mod train;

use std::sync::Arc;

use ndarray::{Array1, Array2};
use thiserror::Error;

pub use checkpoint::{load_nir_set, save_nir_set};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use model::{
    encode_batch, encoder_tokens, greedy_decode, scorer_flat_len, scorer_weights, SharedWeights,
    CONTEXT, EMBED_DIM, MAX_LEN,
};
pub use real::{r, Real};
pub use train::{
    pretrain_seq2seq, reconstruction_accuracy, sample_dataset, train_nirs, LossParts,
    PretrainConfig, PretrainReport, TrainConfig, TrainReport, TrainedEmbedding, TrainingSample,
};

use crate::problems::{BitVector, Evaluable, ObjectiveVector};
use model::{hyper_forward, scorer_forward, ScorerWeights};

#[derive(Debug, Error)]
pub enum NirError {
    #[error("instance has {got} objectives but the shared weights expect {expected}")]
    ObjectiveMismatch { expected: usize, got: usize },
    #[error("training diverged at step {step} (mse {mse}, ce {ce})")]
    Diverged { step: usize, mse: f64, ce: f64 },
    #[error("checkpoint io: {0}")]
    CheckpointIo(String),
    #[error("checkpoint malformed: {0}")]
    CheckpointFormat(String),
}

/// One instance surrogate: shared weights plus this instance's embedding
/// and target-standardization parameters. Evaluation de-standardizes, so
/// outputs live on the ground-truth objective scale.
#[derive(Clone, Debug)]
pub struct Nir<T: Real> {
    pub shared: Arc<SharedWeights<T>>,
    pub embedding: Array1<T>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
    /// Declared dimension, used by consumers when sampling solutions.
    pub dim: usize,
    pub id: String,
    /// Scorer weights generated once per embedding.
    scorer: ScorerWeights<T>,
}

impl<T: Real> Nir<T> {
    pub fn new(
        shared: Arc<SharedWeights<T>>,
        embedding: Array1<T>,
        target_mean: Vec<f64>,
        target_std: Vec<f64>,
        dim: usize,
        id: String,
    ) -> Self {
        assert_eq!(embedding.len(), EMBED_DIM);
        assert_eq!(target_mean.len(), shared.n_obj);
        assert_eq!(target_std.len(), shared.n_obj);
        let scorer = scorer_weights(&hyper_forward(&shared, &embedding).flat, shared.n_obj);
        Self {
            shared,
            embedding,
            target_mean,
            target_std,
            dim,
            id,
        scorer,
        }
    }

    pub fn from_trained(
        shared: Arc<SharedWeights<T>>,
        trained: TrainedEmbedding<T>,
        id: String,
    ) -> Self {
        Self::new(
            shared,
            trained.e,
            trained.target_mean,
            trained.target_std,
            trained.dim,
            id,
        )
    }

    /// The same surrogate with a different embedding; shared weights stay
    /// untouched (and shared).
    pub fn with_embedding(&self, embedding: Array1<T>, id: String) -> Self {
        Self::new(
            Arc::clone(&self.shared),
            embedding,
            self.target_mean.clone(),
            self.target_std.clone(),
            self.dim,
            id,
        )
    }

    fn destandardize_rows(&self, y: &Array2<T>) -> Vec<ObjectiveVector> {
        (0..y.nrows())
            .map(|i| {
                let values: Vec<f64> = (0..self.shared.n_obj)
                    .map(|k| {
                        let v = y[[i, k]].to_f64() * self.target_std[k] + self.target_mean[k];
                        // surrogate outputs must stay usable downstream
                        if v.is_finite() {
                            v
                        } else {
                            0.0
                        }
                    })
                    .collect();
                ObjectiveVector::new(values).expect("surrogate outputs sanitized")
            })
            .collect()
    }
}

impl<T: Real> Evaluable for Nir<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_obj(&self) -> usize {
        self.shared.n_obj
    }

    fn evaluate(&self, x: &BitVector) -> ObjectiveVector {
        self.evaluate_batch(std::slice::from_ref(x)).pop().unwrap()
    }

    /// Variable-length contract: accepts any solution length up to the
    /// model cap, grouped internally so each forward batch is uniform.
    fn evaluate_batch(&self, xs: &[BitVector]) -> Vec<ObjectiveVector> {
        assert!(xs.iter().all(|x| x.dim() <= MAX_LEN));
        let mut out: Vec<Option<ObjectiveVector>> = vec![None; xs.len()];
        let mut by_len: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, x) in xs.iter().enumerate() {
            by_len.entry(x.dim()).or_default().push(i);
        }
        for (_, idx) in by_len {
            let seqs: Vec<Vec<usize>> = idx.iter().map(|&i| encoder_tokens(&xs[i])).collect();
            let (c, _) = encode_batch(&self.shared, &seqs);
            let sc = scorer_forward(&self.scorer, &c);
            let ys = self.destandardize_rows(&sc.y);
            for (slot, y) in idx.into_iter().zip(ys) {
                out[slot] = Some(y);
            }
        }
        out.into_iter().map(|y| y.unwrap()).collect()
    }
}

/// A training set of NIRs sharing one set of weights.
#[derive(Clone, Debug)]
pub struct NirSet<T: Real> {
    pub shared: Arc<SharedWeights<T>>,
    pub members: Vec<Nir<T>>,
}

impl<T: Real> NirSet<T> {
    pub fn from_training(
        shared: SharedWeights<T>,
        trained: Vec<TrainedEmbedding<T>>,
        ids: Vec<String>,
    ) -> Self {
        let shared = Arc::new(shared);
        let members = trained
            .into_iter()
            .zip(ids)
            .map(|(t, id)| Nir::from_trained(Arc::clone(&shared), t, id))
            .collect();
        Self { shared, members }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{InstanceSpec, ProblemClass, Split};
    use crate::seeding::rng_from;

    fn toy_nir(seed: u64) -> Nir<f32> {
        let shared = Arc::new(SharedWeights::<f32>::init(2, seed));
        let mut rng = rng_from(seed);
        let e = Array1::from_shape_fn(EMBED_DIM, |_| rng.random_range(-0.5..0.5f32));
        Nir::new(shared, e, vec![1.0, -2.0], vec![2.0, 0.5], 12, "toy".into())
    }

    use rand::Rng;

    #[test]
    fn evaluation_is_deterministic_and_batched_consistently() {
        let nir = toy_nir(3);
        let mut rng = rng_from(9);
        let xs: Vec<BitVector> = (0..7).map(|_| BitVector::random(12, &mut rng)).collect();
        let batch = nir.evaluate_batch(&xs);
        for (x, y) in xs.iter().zip(&batch) {
            assert_eq!(&nir.evaluate(x), y);
            assert_eq!(&nir.evaluate(x), &nir.evaluate(x));
        }
    }

    #[test]
    fn variable_length_contract() {
        let nir = toy_nir(4);
        for len in [1usize, 5, 32, 64, 128] {
            let y = nir.evaluate(&BitVector::zeros(len));
            assert_eq!(y.n_obj(), 2);
        }
    }

    #[test]
    fn embeddings_decouple_instances() {
        let nir_a = toy_nir(5);
        let mut e2 = nir_a.embedding.clone();
        e2[0] += 1.0;
        let nir_b = nir_a.with_embedding(e2, "other".into());
        let x = BitVector::parse("101010101010").unwrap();
        let before = nir_a.evaluate(&x);
        // mutating b's embedding must leave a bit-identical
        assert_eq!(nir_a.evaluate(&x), before);
        assert!(Arc::ptr_eq(&nir_a.shared, &nir_b.shared));
        assert_ne!(nir_a.evaluate(&x), nir_b.evaluate(&x));
    }

    #[test]
    fn sample_dataset_is_feasible_and_deterministic() {
        let inst = InstanceSpec::generate(ProblemClass::Mkp, 10, Split::Train, 3).unwrap();
        let a = sample_dataset(&inst, 50, 7);
        let b = sample_dataset(&inst, 50, 7);
        assert_eq!(a.len(), 50);
        for (sa, sb) in a.iter().zip(&b) {
            assert_eq!(sa.x, sb.x);
            assert_eq!(sa.y, sb.y);
            assert!(inst.mkp().unwrap().is_feasible(&sa.x));
        }
    }
}
