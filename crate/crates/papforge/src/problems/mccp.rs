//! Bi-objective contamination control problem.
//!
//! Stage contamination follows the recurrence
//! `z_i = alpha_i (1 - x_i)(1 - z_{i-1}) + (1 - gamma_i x_i) z_{i-1}`.
//! All Beta draws are materialized at construction so evaluation is a pure
//! deterministic function.

use serde::{Deserialize, Serialize};

use super::bits::{BitVector, Evaluable, ObjectiveVector};
use super::{ProblemError, Split};
use crate::seeding::rng_from;

pub const DEFAULT_N_MC: usize = 1000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MccpInstance {
    dim: usize,
    costs: Vec<f64>,
    beta_z0: f64,
    beta_gamma: f64,
    beta_alpha: f64,
    /// Maximum allowable contamination rate.
    u: f64,
    n_mc: usize,
    mc_seed: u64,
    /// Pre-sampled draws, one row per Monte-Carlo run.
    #[serde(skip)]
    draws: Draws,
}

#[derive(Clone, Debug, Default)]
struct Draws {
    z0: Vec<f64>,
    /// n_mc rows of dim values each, flattened.
    gamma: Vec<f64>,
    alpha: Vec<f64>,
}

/// Inverse-CDF sample of Beta(1, beta): `1 - U^(1/beta)`.
fn beta1(beta: f64, rng: &mut impl rand::Rng) -> f64 {
    1.0 - rng.random::<f64>().powf(1.0 / beta)
}

impl MccpInstance {
    pub fn new(
        costs: Vec<f64>,
        beta_z0: f64,
        beta_gamma: f64,
        beta_alpha: f64,
        u: f64,
        n_mc: usize,
        mc_seed: u64,
    ) -> Result<Self, ProblemError> {
        let dim = costs.len();
        if dim == 0 {
            return Err(ProblemError::Invalid("mccp needs at least one stage".into()));
        }
        if costs.iter().any(|&c| !(0.0..=1.0).contains(&c)) {
            return Err(ProblemError::Invalid("mccp costs must lie in [0,1]".into()));
        }
        if !(0.0 < u && u < 1.0) {
            return Err(ProblemError::Invalid("contamination limit must lie in (0,1)".into()));
        }
        if n_mc == 0 || beta_z0 <= 0.0 || beta_gamma <= 0.0 || beta_alpha <= 0.0 {
            return Err(ProblemError::Invalid("mccp shape parameters must be positive".into()));
        }
        let mut inst = Self {
            dim,
            costs,
            beta_z0,
            beta_gamma,
            beta_alpha,
            u,
            n_mc,
            mc_seed,
            draws: Draws::default(),
        };
        inst.materialize();
        Ok(inst)
    }

    /// Draws shape parameters from the split-dependent ranges: training uses
    /// `beta_z0 in [20,28]`, `beta_gamma, beta_alpha in [4,6]`, `u = 0.1`;
    /// test shifts to `[24,32]`, `[5,7]`, `u = 0.15`.
    pub fn generate(dim: usize, split: Split, rng: &mut impl rand::Rng) -> Self {
        let (bz, bg, ba, u) = match split {
            Split::Train => (
                rng.random_range(20.0..=28.0),
                rng.random_range(4.0..=6.0),
                rng.random_range(4.0..=6.0),
                0.1,
            ),
            Split::Test => (
                rng.random_range(24.0..=32.0),
                rng.random_range(5.0..=7.0),
                rng.random_range(5.0..=7.0),
                0.15,
            ),
        };
        let costs = (0..dim).map(|_| rng.random::<f64>()).collect();
        let mc_seed: u64 = rng.random();
        Self::new(costs, bz, bg, ba, u, DEFAULT_N_MC, mc_seed).expect("generated parameters valid")
    }

    /// Restores the pre-sampled draws after deserialization.
    pub fn rehydrate(&mut self) {
        if self.draws.z0.is_empty() {
            self.materialize();
        }
    }

    #[cfg(test)]
    fn force_draws(&mut self, z0: f64, gamma: f64, alpha: f64) {
        self.draws.z0 = vec![z0; self.n_mc];
        self.draws.gamma = vec![gamma; self.n_mc * self.dim];
        self.draws.alpha = vec![alpha; self.n_mc * self.dim];
    }

    fn materialize(&mut self) {
        let mut rng = rng_from(self.mc_seed);
        let n = self.n_mc * self.dim;
        self.draws.z0 = (0..self.n_mc).map(|_| beta1(self.beta_z0, &mut rng)).collect();
        self.draws.gamma = (0..n).map(|_| beta1(self.beta_gamma, &mut rng)).collect();
        self.draws.alpha = (0..n).map(|_| beta1(self.beta_alpha, &mut rng)).collect();
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn contamination_limit(&self) -> f64 {
        self.u
    }

    pub fn n_mc(&self) -> usize {
        self.n_mc
    }

    /// Runs the stage recurrence for Monte-Carlo sample `k`, returning the
    /// contamination rate at every stage.
    pub fn simulate_contamination(
        &self,
        x: &BitVector,
        k: usize,
    ) -> Result<Vec<f64>, ProblemError> {
        if k >= self.n_mc {
            return Err(ProblemError::McIndexOutOfRange { k, n_mc: self.n_mc });
        }
        assert_eq!(x.dim(), self.dim, "dimension mismatch");
        let mut z = Vec::with_capacity(self.dim);
        let mut prev = self.draws.z0[k];
        let row = k * self.dim;
        for i in 0..self.dim {
            let xi = f64::from(x.get(i));
            let alpha = self.draws.alpha[row + i];
            let gamma = self.draws.gamma[row + i];
            let next = alpha * (1.0 - xi) * (1.0 - prev) + (1.0 - gamma * xi) * prev;
            z.push(next);
            prev = next;
        }
        Ok(z)
    }
}

impl Evaluable for MccpInstance {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_obj(&self) -> usize {
        2
    }

    /// f1 sums, over stages, the fraction of Monte-Carlo runs whose
    /// contamination stays below the limit; f2 is the negated control cost.
    fn evaluate(&self, x: &BitVector) -> ObjectiveVector {
        assert_eq!(x.dim(), self.dim, "dimension mismatch");
        let mut below = vec![0usize; self.dim];
        for k in 0..self.n_mc {
            let mut prev = self.draws.z0[k];
            let row = k * self.dim;
            for (i, count) in below.iter_mut().enumerate() {
                let xi = f64::from(x.get(i));
                let alpha = self.draws.alpha[row + i];
                let gamma = self.draws.gamma[row + i];
                prev = alpha * (1.0 - xi) * (1.0 - prev) + (1.0 - gamma * xi) * prev;
                if prev < self.u {
                    *count += 1;
                }
            }
        }
        let f1 = below.iter().map(|&c| c as f64 / self.n_mc as f64).sum();
        let f2 = -x
            .bits()
            .iter()
            .zip(&self.costs)
            .filter(|(&b, _)| b == 1)
            .map(|(_, &c)| c)
            .sum::<f64>();
        ObjectiveVector::new(vec![f1, f2]).expect("mccp objectives are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dim: usize, seed: u64) -> MccpInstance {
        MccpInstance::new(vec![0.5; dim], 24.0, 5.0, 5.0, 0.1, 16, seed).unwrap()
    }

    #[test]
    fn recurrence_hand_checks() {
        // x_i=0, alpha=0, z_prev=0.3 -> 0.3
        let z = 0.0 * 1.0 * (1.0 - 0.3) + 1.0 * 0.3;
        assert_eq!(z, 0.3);
        // x_i=1, gamma=1 -> 0
        let z = 0.7 * 0.0 * (1.0 - 0.3) + (1.0 - 1.0) * 0.3;
        assert_eq!(z, 0.0);
        // x_i=0, alpha=0.5, z_prev=0.2 -> 0.6
        let z: f64 = 0.5 * 1.0 * (1.0 - 0.2) + 1.0 * 0.2;
        assert!((z - 0.6).abs() < 1e-15);
    }

    #[test]
    fn z_stays_in_unit_interval() {
        let inst = tiny(24, 7);
        let mut rng = rng_from(8);
        for _ in 0..50 {
            let x = BitVector::random(24, &mut rng);
            for k in 0..inst.n_mc() {
                for z in inst.simulate_contamination(&x, k).unwrap() {
                    assert!((0.0..=1.0).contains(&z), "z = {z} out of range");
                }
            }
        }
    }

    #[test]
    fn full_control_scores_dim_when_gamma_one() {
        let mut inst = tiny(6, 3);
        inst.force_draws(0.9, 1.0, 0.7);
        let x = BitVector::new(vec![1; 6]).unwrap();
        let z = inst.simulate_contamination(&x, 0).unwrap();
        assert!(z.iter().all(|&zi| zi == 0.0), "gamma=1, x=1 zeroes every stage");
        let y = inst.evaluate(&x);
        assert_eq!(y.values()[0], 6.0, "f1 = dim");
        assert_eq!(y.values()[1], -3.0);
        assert_eq!(inst.evaluate(&x), inst.evaluate(&x));
    }

    #[test]
    fn mc_index_bounds_checked() {
        let inst = tiny(4, 1);
        let x = BitVector::zeros(4);
        assert!(inst.simulate_contamination(&x, 16).is_err());
        assert!(inst.simulate_contamination(&x, 15).is_ok());
    }

    #[test]
    fn split_controls_limit() {
        let mut rng = rng_from(2);
        assert_eq!(
            MccpInstance::generate(8, Split::Train, &mut rng).contamination_limit(),
            0.1
        );
        assert_eq!(
            MccpInstance::generate(8, Split::Test, &mut rng).contamination_limit(),
            0.15
        );
    }
}
