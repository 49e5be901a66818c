//! Multi-objective match max problem.
//!
//! Each objective rewards closeness (in Hamming distance) to one of three
//! binary reference vectors; reference pairs are kept far apart so the
//! objectives genuinely conflict.

use serde::{Deserialize, Serialize};

use super::bits::{BitVector, Evaluable, ObjectiveVector};
use super::ProblemError;

pub const MMMP_N_OBJ: usize = 3;

/// Rejection-sampling cap for the pairwise-distance constraint.
const MAX_REF_RETRIES: usize = 10_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MmmpInstance {
    dim: usize,
    refs: Vec<BitVector>,
}

impl MmmpInstance {
    /// Builds an instance from explicit reference vectors, checking the
    /// pairwise-distance invariant `D(r_i, r_j) > dim / n`.
    pub fn new(dim: usize, refs: Vec<BitVector>) -> Result<Self, ProblemError> {
        if refs.len() != MMMP_N_OBJ {
            return Err(ProblemError::Invalid(format!(
                "mmmp needs {} reference vectors, got {}",
                MMMP_N_OBJ,
                refs.len()
            )));
        }
        for r in &refs {
            if r.dim() != dim {
                return Err(ProblemError::DimMismatch {
                    expected: dim,
                    got: r.dim(),
                });
            }
        }
        if !pairwise_far(&refs, dim) {
            return Err(ProblemError::Invalid(
                "reference vectors too close together".into(),
            ));
        }
        Ok(Self { dim, refs })
    }

    /// Samples reference vectors until every pair satisfies the distance
    /// constraint, or reports infeasibility after a bounded retry budget.
    pub fn generate(dim: usize, rng: &mut impl rand::Rng) -> Result<Self, ProblemError> {
        for _ in 0..MAX_REF_RETRIES {
            let refs: Vec<BitVector> = (0..MMMP_N_OBJ).map(|_| BitVector::random(dim, rng)).collect();
            if pairwise_far(&refs, dim) {
                return Ok(Self { dim, refs });
            }
        }
        Err(ProblemError::GenerationInfeasible {
            class: "MMMP".into(),
            dim,
        })
    }

    pub fn refs(&self) -> &[BitVector] {
        &self.refs
    }
}

fn pairwise_far(refs: &[BitVector], dim: usize) -> bool {
    for i in 0..refs.len() {
        for j in (i + 1)..refs.len() {
            // strict: D(r_i, r_j) > dim / n
            if (refs[i].hamming(&refs[j]) as f64) <= dim as f64 / MMMP_N_OBJ as f64 {
                return false;
            }
        }
    }
    true
}

impl Evaluable for MmmpInstance {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_obj(&self) -> usize {
        MMMP_N_OBJ
    }

    /// f_j(x) = dim − D_Hamming(x, r_j)
    fn evaluate(&self, x: &BitVector) -> ObjectiveVector {
        assert_eq!(x.dim(), self.dim, "dimension mismatch");
        let values = self
            .refs
            .iter()
            .map(|r| (self.dim - x.hamming(r)) as f64)
            .collect();
        ObjectiveVector::new(values).expect("mmmp objectives are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;

    #[test]
    fn reference_vector_scores_dim() {
        let mut rng = rng_from(11);
        let inst = MmmpInstance::generate(12, &mut rng).unwrap();
        for (j, r) in inst.refs().iter().enumerate() {
            let y = inst.evaluate(r);
            assert_eq!(y.values()[j], 12.0, "f_j(r_j) must equal dim");
        }
    }

    #[test]
    fn opposite_vector_scores_zero() {
        let r1 = BitVector::parse("1111").unwrap();
        let r2 = BitVector::parse("0011").unwrap();
        let r3 = BitVector::parse("0100").unwrap();
        let inst = MmmpInstance::new(4, vec![r1, r2, r3]).unwrap();
        let y = inst.evaluate(&BitVector::parse("0000").unwrap());
        assert_eq!(y.values()[0], 0.0);
    }

    #[test]
    fn generated_refs_satisfy_distance_constraint() {
        for seed in 0..20 {
            let mut rng = rng_from(seed);
            let inst = MmmpInstance::generate(6, &mut rng).unwrap();
            let refs = inst.refs();
            for i in 0..refs.len() {
                for j in (i + 1)..refs.len() {
                    assert!(refs[i].hamming(&refs[j]) > 2, "dim/n = 2 for dim 6");
                }
            }
        }
    }

    #[test]
    fn objective_range_is_zero_to_dim() {
        let mut rng = rng_from(3);
        let inst = MmmpInstance::generate(16, &mut rng).unwrap();
        for _ in 0..200 {
            let x = BitVector::random(16, &mut rng);
            for &v in inst.evaluate(&x).values() {
                assert!((0.0..=16.0).contains(&v));
            }
        }
    }
}
