//! Candidate solutions and objective values.

use serde::{Deserialize, Serialize};

use super::ProblemError;

/// A binary decision vector.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BitVector {
    bits: Vec<u8>,
}

impl BitVector {
    /// Builds a vector from 0/1 digits. Errors on anything else or on an
    /// empty sequence.
    pub fn new(bits: Vec<u8>) -> Result<Self, ProblemError> {
        if bits.is_empty() {
            return Err(ProblemError::EmptyBitVector);
        }
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(ProblemError::NonBinaryDigit(b));
        }
        Ok(Self { bits })
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Result<Self, ProblemError> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(ProblemError::NonBinaryDigit(c as u8)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(bits)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1);
        Self { bits: vec![0; dim] }
    }

    /// Samples each bit uniformly at random.
    pub fn random(dim: usize, rng: &mut impl rand::Rng) -> Self {
        assert!(dim >= 1);
        Self {
            bits: (0..dim).map(|_| rng.random_range(0..=1u8)).collect(),
        }
    }

    /// Samples each bit as Bernoulli(`density`).
    pub fn random_biased(dim: usize, density: f64, rng: &mut impl rand::Rng) -> Self {
        assert!(dim >= 1);
        Self {
            bits: (0..dim)
                .map(|_| u8::from(rng.random::<f64>() < density))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: u8) {
        debug_assert!(v <= 1);
        self.bits[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] ^= 1;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn hamming(&self, other: &Self) -> usize {
        assert_eq!(self.dim(), other.dim());
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Display::fmt(self, f)
    }
}

impl std::fmt::Display for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// Objective values for one solution, maximization convention.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    values: Vec<f64>,
}

impl ObjectiveVector {
    /// Errors when the number of objectives is outside {2, 3} or a value is
    /// not finite.
    pub fn new(values: Vec<f64>) -> Result<Self, ProblemError> {
        if !(2..=3).contains(&values.len()) {
            return Err(ProblemError::BadObjectiveCount(values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::NonFiniteObjective);
        }
        Ok(Self { values })
    }

    pub fn n_obj(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// An evaluable problem instance: the contract shared by ground-truth
/// instances and neural instance representations.
///
/// All objectives follow the maximization convention at this boundary.
/// Implementations must be pure: `evaluate` and `repair` are safe to call
/// concurrently and return identical results for identical inputs.
pub trait Evaluable: Sync {
    fn dim(&self) -> usize;
    fn n_obj(&self) -> usize;

    /// Maps any bit vector of the right dimension to a feasible one.
    /// Identity for unconstrained classes. Must be idempotent.
    fn repair(&self, x: &BitVector) -> BitVector {
        x.clone()
    }

    /// Evaluates a feasible solution. Callers repair first.
    fn evaluate(&self, x: &BitVector) -> ObjectiveVector;

    /// Evaluates many feasible solutions; implementations with cheaper
    /// batched paths override this.
    fn evaluate_batch(&self, xs: &[BitVector]) -> Vec<ObjectiveVector> {
        xs.iter().map(|x| self.evaluate(x)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_digits() {
        assert!(BitVector::new(vec![0, 1, 2]).is_err());
        assert!(BitVector::new(vec![]).is_err());
        assert!(BitVector::parse("0102").is_err());
    }

    #[test]
    fn hamming_distance() {
        let a = BitVector::parse("1100").unwrap();
        let b = BitVector::parse("1010").unwrap();
        assert_eq!(a.hamming(&b), 2);
        assert_eq!(a.hamming(&a), 0);
    }

    #[test]
    fn objective_vector_bounds() {
        assert!(ObjectiveVector::new(vec![1.0]).is_err());
        assert!(ObjectiveVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ObjectiveVector::new(vec![1.0, 2.0, 3.0]).is_ok());
    }
}
