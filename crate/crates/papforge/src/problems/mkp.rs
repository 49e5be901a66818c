//! Bi-objective knapsack problem.

use serde::{Deserialize, Serialize};

use super::bits::{BitVector, Evaluable, ObjectiveVector};
use super::{ProblemError, Split};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MkpInstance {
    dim: usize,
    weights: Vec<f64>,
    values1: Vec<f64>,
    values2: Vec<f64>,
    w_max: f64,
    split_p: f64,
}

impl MkpInstance {
    pub fn new(
        weights: Vec<f64>,
        values1: Vec<f64>,
        values2: Vec<f64>,
        w_max: f64,
        split_p: f64,
    ) -> Result<Self, ProblemError> {
        let dim = weights.len();
        if dim == 0 || values1.len() != dim || values2.len() != dim {
            return Err(ProblemError::Invalid("mkp arrays must share a length".into()));
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(ProblemError::Invalid("mkp weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(w_max > 0.0 && w_max < total) {
            return Err(ProblemError::Invalid(format!(
                "w_max {w_max} must lie in (0, sum of weights = {total})"
            )));
        }
        // monotone link: heavier items carry strictly larger values
        for a in 0..dim {
            for b in 0..dim {
                if weights[a] > weights[b] && (values1[a] <= values1[b] || values2[a] <= values2[b])
                {
                    return Err(ProblemError::Invalid(
                        "mkp values must increase with weight".into(),
                    ));
                }
            }
        }
        Ok(Self {
            dim,
            weights,
            values1,
            values2,
            w_max,
            split_p,
        })
    }

    /// Generates a random instance.
    ///
    /// Weights are uniform draws in (0, 1] sorted ascending. Each value
    /// attribute is drawn with the p-split rule (half the draws below the
    /// split point, half above), sorted ascending and assigned by weight
    /// rank, which realizes the monotone link exactly. `p` is drawn from
    /// [0.6, 0.75] for training and [0.65, 0.8] for test instances.
    pub fn generate(dim: usize, split: Split, rng: &mut impl rand::Rng) -> Self {
        let p = match split {
            Split::Train => rng.random_range(0.60..=0.75),
            Split::Test => rng.random_range(0.65..=0.80),
        };
        let mut weights: Vec<f64> = (0..dim).map(|_| 1.0 - rng.random::<f64>()).collect();
        weights.sort_by(|a, b| a.partial_cmp(b).unwrap());

        let values1 = split_values(dim, p, rng);
        let values2 = split_values(dim, 1.0 - p, rng);
        let w_max = 0.5 * weights.iter().sum::<f64>();

        Self {
            dim,
            weights,
            values1,
            values2,
            w_max,
            split_p: p,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self, objective: usize) -> &[f64] {
        match objective {
            0 => &self.values1,
            1 => &self.values2,
            _ => panic!("mkp has two objectives"),
        }
    }

    pub fn w_max(&self) -> f64 {
        self.w_max
    }

    pub fn split_p(&self) -> f64 {
        self.split_p
    }

    pub fn selected_weight(&self, x: &BitVector) -> f64 {
        x.bits()
            .iter()
            .zip(&self.weights)
            .filter(|(&b, _)| b == 1)
            .map(|(_, &w)| w)
            .sum()
    }

    pub fn is_feasible(&self, x: &BitVector) -> bool {
        self.selected_weight(x) <= self.w_max
    }
}

/// Half the draws land in [0, p], half in [p, 1]; sorted ascending so that
/// assignment by weight rank preserves the monotone link.
fn split_values(dim: usize, p: f64, rng: &mut impl rand::Rng) -> Vec<f64> {
    let low = dim / 2;
    let mut v: Vec<f64> = (0..dim)
        .map(|i| {
            if i < low {
                rng.random_range(0.0..=p)
            } else {
                rng.random_range(p..=1.0)
            }
        })
        .collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

impl Evaluable for MkpInstance {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_obj(&self) -> usize {
        2
    }

    /// Scans item indices in order; from the first index where the
    /// cumulative selected weight exceeds `w_max`, zeroes that index and
    /// every later one.
    fn repair(&self, x: &BitVector) -> BitVector {
        assert_eq!(x.dim(), self.dim, "dimension mismatch");
        let mut out = x.clone();
        let mut cum = 0.0;
        for i in 0..self.dim {
            if out.get(i) == 1 {
                cum += self.weights[i];
                if cum > self.w_max {
                    for j in i..self.dim {
                        out.set(j, 0);
                    }
                    break;
                }
            }
        }
        out
    }

    fn evaluate(&self, x: &BitVector) -> ObjectiveVector {
        assert_eq!(x.dim(), self.dim, "dimension mismatch");
        let mut f1 = 0.0;
        let mut f2 = 0.0;
        for i in 0..self.dim {
            if x.get(i) == 1 {
                f1 += self.values1[i];
                f2 += self.values2[i];
            }
        }
        ObjectiveVector::new(vec![f1, f2]).expect("mkp objectives are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;

    fn toy(weights: Vec<f64>, v1: Vec<f64>, v2: Vec<f64>, w_max: f64) -> MkpInstance {
        MkpInstance::new(weights, v1, v2, w_max, 0.7).unwrap()
    }

    #[test]
    fn hand_summed_values() {
        // equal weights keep the monotone link vacuous
        let inst = toy(
            vec![1.0, 1.0, 1.0],
            vec![1.0, 2.0, 3.0],
            vec![3.0, 2.0, 1.0],
            2.9,
        );
        let y = inst.evaluate(&BitVector::parse("110").unwrap());
        assert_eq!(y.values(), &[3.0, 5.0]);
    }

    #[test]
    fn repair_zeroes_from_first_violation() {
        let inst = toy(
            vec![3.0, 3.0, 3.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0],
            5.0,
        );
        let repaired = inst.repair(&BitVector::parse("110").unwrap());
        assert_eq!(repaired, BitVector::parse("100").unwrap());
    }

    #[test]
    fn repair_is_idempotent_and_feasible() {
        let mut rng = rng_from(5);
        for dim in [4usize, 9, 16, 33] {
            let inst = MkpInstance::generate(dim, Split::Train, &mut rng);
            for _ in 0..100 {
                let x = BitVector::random(dim, &mut rng);
                let r = inst.repair(&x);
                assert!(inst.is_feasible(&r));
                assert_eq!(inst.repair(&r), r);
            }
        }
    }

    #[test]
    fn generation_respects_split_ranges() {
        let mut rng = rng_from(9);
        for _ in 0..10 {
            let tr = MkpInstance::generate(8, Split::Train, &mut rng);
            assert!((0.60..=0.75).contains(&tr.split_p()));
            let te = MkpInstance::generate(8, Split::Test, &mut rng);
            assert!((0.65..=0.80).contains(&te.split_p()));
        }
    }

    #[test]
    fn generated_instances_have_monotone_values() {
        let mut rng = rng_from(2);
        let inst = MkpInstance::generate(12, Split::Train, &mut rng);
        for a in 0..12 {
            for b in 0..12 {
                if inst.weights()[a] > inst.weights()[b] {
                    assert!(inst.values(0)[a] > inst.values(0)[b]);
                    assert!(inst.values(1)[a] > inst.values(1)[b]);
                }
            }
        }
    }
}
