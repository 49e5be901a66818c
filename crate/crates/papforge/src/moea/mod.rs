//! The unified MOEA framework: a structured algorithm-descriptor space,
//! the execution engine, the four classic algorithms, and the two-stage
//! validation used on proposed descriptors.

mod classics;
pub mod descriptor;
mod engine;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classics::classic_config;
pub use descriptor::{
    wellknown, Aggregation, AlgorithmDescriptor, ArchivePolicy, Configuration, CrossoverOp,
    HpKind, HpRange, HpValue, HyperparameterDef, InitScheme, MatingSelection, UpdateScheme,
};
pub use engine::run_moea;

use crate::problems::{BitVector, InstanceSpec, ObjectiveVector, ProblemClass, Split};

#[derive(Debug, Error)]
pub enum MoeaError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("budget {max_eval} smaller than population size {pop_size}")]
    BudgetTooSmall { max_eval: usize, pop_size: usize },
    #[error("unknown classic algorithm {0:?}")]
    UnknownClassic(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicName {
    Nsga2,
    Nsga3,
    Moead,
    Spea2,
}

impl ClassicName {
    pub const ALL: [ClassicName; 4] = [
        ClassicName::Nsga2,
        ClassicName::Nsga3,
        ClassicName::Moead,
        ClassicName::Spea2,
    ];

    pub fn parse(s: &str) -> Result<Self, MoeaError> {
        match s.to_ascii_lowercase().as_str() {
            "nsga2" | "nsga-ii" => Ok(Self::Nsga2),
            "nsga3" | "nsga-iii" => Ok(Self::Nsga3),
            "moead" | "moea/d" => Ok(Self::Moead),
            "spea2" => Ok(Self::Spea2),
            other => Err(MoeaError::UnknownClassic(other.into())),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Nsga2 => "nsga2",
            Self::Nsga3 => "nsga3",
            Self::Moead => "moead",
            Self::Spea2 => "spea2",
        }
    }
}

/// Per-objective `[lo, hi]` bounds in the maximization convention, supplied
/// to indicator-based components and widened dynamically by the engine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveRange {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ObjectiveRange {
    pub fn from_observations<'a>(values: impl IntoIterator<Item = &'a ObjectiveVector>) -> Option<Self> {
        let mut it = values.into_iter();
        let first = it.next()?;
        let mut lo = first.values().to_vec();
        let mut hi = first.values().to_vec();
        for v in it {
            for ((l, h), &x) in lo.iter_mut().zip(&mut hi).zip(v.values()) {
                *l = l.min(x);
                *h = h.max(x);
            }
        }
        Some(Self { lo, hi })
    }
}

/// Solutions and maximization-convention objective values of one run's
/// Pareto set, plus the number of evaluations the run consumed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoResult {
    pub solutions: Vec<(BitVector, ObjectiveVector)>,
    pub evaluations: usize,
}

impl ParetoResult {
    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.solutions.iter().map(|(_, y)| y.clone()).collect()
    }
}

/// Structural schema check: the first validation stage for proposed
/// descriptors. Violations come back as data rather than errors.
pub fn validate_descriptor(descriptor: &AlgorithmDescriptor) -> Vec<String> {
    descriptor.validate()
}

/// Outcome of the simulation stage of proposal validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DryRunOutcome {
    Ok,
    Failed(String),
}

impl DryRunOutcome {
    pub fn is_ok(&self) -> bool {
        matches!(self, DryRunOutcome::Ok)
    }
}

/// Simulation-based execution check: runs the configuration on a fixed
/// 8-dim instance with a 200-evaluation budget and requires a nonempty,
/// mutually nondominated result.
pub fn dry_run(config: &Configuration) -> DryRunOutcome {
    let instance = match InstanceSpec::generate(ProblemClass::Mmmp, 8, Split::Train, 0x5eed) {
        Ok(i) => i,
        Err(e) => return DryRunOutcome::Failed(format!("fixture generation failed: {e}")),
    };
    let mut probe = config.clone();
    // the fixed budget must accommodate the configured population
    if probe.usize_param(wellknown::POP_SIZE).map(|p| p > 200).unwrap_or(true) {
        if let Some(def) = probe.descriptor.def(wellknown::POP_SIZE) {
            if def.default.as_usize() <= 200 {
                probe
                    .assignment
                    .insert(wellknown::POP_SIZE.into(), def.default.clone());
            }
        }
    }
    match run_moea(&probe, &instance, 200, None, 0xd4) {
        Ok(result) => {
            if result.solutions.is_empty() {
                return DryRunOutcome::Failed("empty result set".into());
            }
            let objs = result.objectives();
            for (i, a) in objs.iter().enumerate() {
                for (j, b) in objs.iter().enumerate() {
                    if i != j && crate::metrics::dominates(a, b).unwrap_or(false) {
                        return DryRunOutcome::Failed("result set not mutually nondominated".into());
                    }
                }
            }
            DryRunOutcome::Ok
        }
        Err(e) => DryRunOutcome::Failed(e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dry_run_accepts_classics() {
        for name in ClassicName::ALL {
            let mut cfg = classic_config(name);
            // speed the fixture up
            cfg.assignment
                .insert(wellknown::POP_SIZE.into(), HpValue::Int(20));
            assert!(dry_run(&cfg).is_ok(), "{name:?}");
        }
    }

    #[test]
    fn dry_run_reports_budget_violation() {
        let mut cfg = classic_config(ClassicName::Nsga2);
        // population larger than the fixed 200-eval budget and no usable
        // default to fall back to
        cfg.descriptor.hyperparameters[0] =
            HyperparameterDef::int(wellknown::POP_SIZE, 250, 10, 400, "");
        cfg.assignment
            .insert(wellknown::POP_SIZE.into(), HpValue::Int(250));
        let outcome = dry_run(&cfg);
        assert!(!outcome.is_ok(), "{outcome:?}");
    }

    #[test]
    fn dry_run_tolerates_stagnant_settings() {
        let mut cfg = classic_config(ClassicName::Nsga2);
        cfg.descriptor.crossover = CrossoverOp::None;
        cfg.descriptor.hyperparameters.retain(|d| d.name != wellknown::CROSSOVER_RATE);
        cfg.assignment.remove(wellknown::CROSSOVER_RATE);
        cfg.assignment
            .insert(wellknown::POP_SIZE.into(), HpValue::Int(20));
        cfg.assignment
            .insert(wellknown::MUTATION_RATE.into(), HpValue::Float(0.001));
        assert!(dry_run(&cfg).is_ok(), "stagnant but legal settings still complete");
    }

    #[test]
    fn objective_range_tracks_extremes() {
        let a = ObjectiveVector::new(vec![1.0, 5.0]).unwrap();
        let b = ObjectiveVector::new(vec![3.0, 2.0]).unwrap();
        let r = ObjectiveRange::from_observations([&a, &b]).unwrap();
        assert_eq!(r.lo, vec![1.0, 2.0]);
        assert_eq!(r.hi, vec![3.0, 5.0]);
    }
}
