//! Finite-difference verification of the hand-derived gradients.
//! Runs in double precision with central differences.

use ndarray::Array1;
use rand::Rng;

use super::model::SharedWeights;
use super::train::{joint_grads, joint_loss_only, InstanceBatch};
use crate::seeding::rng_from;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// (block name, max relative error over the sampled coordinates)
    pub blocks: Vec<(String, f64)>,
    pub embedding_error: f64,
}

impl GradCheckReport {
    pub fn max_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|(_, e)| *e)
            .fold(self.embedding_error, f64::max)
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    // the floor absorbs central-difference cancellation noise on
    // coordinates whose true gradient is numerically negligible
    let denom = analytic.abs().max(numeric.abs()).max(1e-5);
    (analytic - numeric).abs() / denom
}

/// Compares the analytic gradient of the joint loss against central finite
/// differences on a random subset of up to `coords_per_block` coordinates
/// of every weight block, plus the instance embedding.
pub fn gradient_check(
    shared: &SharedWeights<f64>,
    embeddings: &[Array1<f64>],
    batches: &[InstanceBatch<f64>],
    lambda: f64,
    h: f64,
    coords_per_block: usize,
    seed: u64,
) -> GradCheckReport {
    let n_total = embeddings.len();
    let (_, grads, d_es) = joint_grads(shared, embeddings, batches, lambda, n_total);
    let mut rng = rng_from(seed);

    let mut blocks_report = Vec::new();
    let grad_blocks = grads.blocks();
    for (block_idx, (name, g)) in grad_blocks.iter().enumerate() {
        let n = g.len();
        let picks: Vec<usize> = (0..coords_per_block.min(n))
            .map(|_| rng.random_range(0..n))
            .collect();
        let mut worst = 0.0f64;
        for &coord in &picks {
            let mut probe = shared.clone();
            {
                let mut blocks = probe.blocks_mut();
                blocks[block_idx].1[coord] += h;
            }
            let plus = joint_loss_only(&probe, embeddings, batches, lambda, n_total).total();
            {
                let mut blocks = probe.blocks_mut();
                blocks[block_idx].1[coord] -= 2.0 * h;
            }
            let minus = joint_loss_only(&probe, embeddings, batches, lambda, n_total).total();
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_err(g[coord], numeric));
        }
        blocks_report.push((name.clone(), worst));
    }

    // instance embedding coordinates
    let mut emb_worst = 0.0f64;
    for (i, d_e) in d_es.iter().enumerate() {
        for coord in 0..d_e.len() {
            let mut probe = embeddings.to_vec();
            probe[i][coord] += h;
            let plus = joint_loss_only(shared, &probe, batches, lambda, n_total).total();
            probe[i][coord] -= 2.0 * h;
            let minus = joint_loss_only(shared, &probe, batches, lambda, n_total).total();
            let numeric = (plus - minus) / (2.0 * h);
            emb_worst = emb_worst.max(rel_err(d_e[coord], numeric));
        }
    }

    GradCheckReport {
        blocks: blocks_report,
        embedding_error: emb_worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nir::model::EMBED_DIM;
    use crate::nir::train::make_batch;
    use crate::problems::BitVector;

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let shared = SharedWeights::<f64>::init(2, 42);
        let mut rng = rng_from(7);
        let embeddings: Vec<Array1<f64>> = (0..2)
            .map(|_| Array1::from_shape_fn(EMBED_DIM, |_| rng.random_range(-0.5..0.5)))
            .collect();
        let mut batches = Vec::new();
        for (i, dim) in [(0usize, 6usize), (1, 9)] {
            let xs: Vec<BitVector> = (0..4).map(|_| BitVector::random(dim, &mut rng)).collect();
            let refs: Vec<&BitVector> = xs.iter().collect();
            let y = ndarray::Array2::from_shape_fn((4, 2), |_| rng.random_range(-1.0..1.0));
            batches.push(make_batch(i, &refs, y));
        }
        let report = gradient_check(&shared, &embeddings, &batches, 1.0, 1e-5, 24, 3);
        for (name, err) in &report.blocks {
            assert!(err < &1e-4, "block {name} rel err {err}");
        }
        assert!(
            report.embedding_error < 1e-4,
            "embedding rel err {}",
            report.embedding_error
        );
    }
}
