//! The four multi-objective binary optimization problem classes.
//!
//! Instances are immutable after construction; `evaluate` and `repair` are
//! pure functions safe for concurrent use. Stochastic evaluations (MCCP
//! Monte-Carlo draws, MCIMP cascades) are pre-seeded at construction so
//! repeated evaluation is bit-identical.

mod bits;
pub mod graph;
mod mccp;
mod mcimp;
mod mkp;
mod mmmp;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bits::{BitVector, Evaluable, ObjectiveVector};
pub use graph::DirectedGraph;
pub use mccp::{MccpInstance, DEFAULT_N_MC};
pub use mcimp::{AdoptionProbs, McimpInstance};
pub use mkp::MkpInstance;
pub use mmmp::{MmmpInstance, MMMP_N_OBJ};

use crate::seeding::rng_for;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("bit vector must be nonempty")]
    EmptyBitVector,
    #[error("bit vector digit {0} is not 0 or 1")]
    NonBinaryDigit(u8),
    #[error("objective vector needs 2 or 3 values, got {0}")]
    BadObjectiveCount(usize),
    #[error("objective value is not finite")]
    NonFiniteObjective,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("unknown problem class {0:?}")]
    UnknownClass(String),
    #[error("cannot generate a feasible {class} instance at dim {dim}")]
    GenerationInfeasible { class: String, dim: usize },
    #[error("monte-carlo index {k} out of range (n_mc = {n_mc})")]
    McIndexOutOfRange { k: usize, n_mc: usize },
    #[error("{0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(String),
}

/// The benchmark problem classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProblemClass {
    Mmmp,
    Mkp,
    Mccp,
    Mcimp,
}

impl ProblemClass {
    pub const ALL: [ProblemClass; 4] = [
        ProblemClass::Mmmp,
        ProblemClass::Mkp,
        ProblemClass::Mccp,
        ProblemClass::Mcimp,
    ];

    pub fn parse(s: &str) -> Result<Self, ProblemError> {
        match s.to_ascii_uppercase().as_str() {
            "MMMP" => Ok(Self::Mmmp),
            "MKP" => Ok(Self::Mkp),
            "MCCP" => Ok(Self::Mccp),
            "MCIMP" => Ok(Self::Mcimp),
            other => Err(ProblemError::UnknownClass(other.into())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Mmmp => "MMMP",
            Self::Mkp => "MKP",
            Self::Mccp => "MCCP",
            Self::Mcimp => "MCIMP",
        }
    }
}

impl std::fmt::Display for ProblemClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Train/test split; controls instance-generation parameter ranges.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Result<Self, ProblemError> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Self::Train),
            "test" => Ok(Self::Test),
            other => Err(ProblemError::Invalid(format!("unknown split {other:?}"))),
        }
    }
}

/// Knobs for MCIMP graph sourcing during generation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphPool {
    /// Node counts of the bundled synthetic graphs used for test instances.
    pub test_sizes: Vec<usize>,
    /// Node count of the fixed training graph.
    pub train_size: usize,
    /// Out-edges per node for the synthetic generator.
    pub attachment: usize,
    /// Cascade count per evaluation.
    pub n_sim: usize,
    /// When set, the training graph is loaded from this edge-list file
    /// instead of the synthetic generator.
    pub train_graph_file: Option<std::path::PathBuf>,
    /// When nonempty, test graphs are drawn from these edge-list files.
    pub test_graph_files: Vec<std::path::PathBuf>,
}

impl Default for GraphPool {
    fn default() -> Self {
        Self {
            test_sizes: vec![500, 1000, 2000],
            train_size: 500,
            attachment: 3,
            n_sim: 100,
            train_graph_file: None,
            test_graph_files: Vec::new(),
        }
    }
}

/// All MCIMP training instances share one fixed synthetic network.
const TRAIN_GRAPH_SEED: u64 = 0x7261_696e_5f67;

/// A concrete instance of one of the four problem classes, together with
/// its provenance (class, dim, split, seed).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub class: ProblemClass,
    pub dim: usize,
    pub split: Split,
    pub seed: u64,
    payload: Payload,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Payload {
    Mmmp(MmmpInstance),
    Mkp(MkpInstance),
    Mccp(MccpInstance),
    Mcimp(McimpInstance),
}

impl InstanceSpec {
    /// Generates one instance deterministically from
    /// `(class, dim, split, seed)`.
    pub fn generate(
        class: ProblemClass,
        dim: usize,
        split: Split,
        seed: u64,
    ) -> Result<Self, ProblemError> {
        Self::generate_with(class, dim, split, seed, &GraphPool::default())
    }

    /// As [`Self::generate`], with explicit MCIMP graph sourcing.
    pub fn generate_with(
        class: ProblemClass,
        dim: usize,
        split: Split,
        seed: u64,
        pool: &GraphPool,
    ) -> Result<Self, ProblemError> {
        if dim < 4 {
            return Err(ProblemError::Invalid(format!("dim {dim} below minimum 4")));
        }
        let mut rng = rng_for(seed, "instance-gen", class as u64);
        let payload = match class {
            ProblemClass::Mmmp => Payload::Mmmp(MmmpInstance::generate(dim, &mut rng)?),
            ProblemClass::Mkp => Payload::Mkp(MkpInstance::generate(dim, split, &mut rng)),
            ProblemClass::Mccp => Payload::Mccp(MccpInstance::generate(dim, split, &mut rng)),
            ProblemClass::Mcimp => {
                let graph = match split {
                    Split::Train => match &pool.train_graph_file {
                        Some(path) => DirectedGraph::load_edge_list(path)?,
                        None => {
                            let mut graph_rng = rng_for(TRAIN_GRAPH_SEED, "train-graph", 0);
                            DirectedGraph::preferential_attachment(
                                pool.train_size,
                                pool.attachment,
                                &mut graph_rng,
                            )
                        }
                    },
                    Split::Test => {
                        if pool.test_graph_files.is_empty() {
                            let size =
                                pool.test_sizes[rng.random_range(0..pool.test_sizes.len())];
                            let graph_seed: u64 = rng.random();
                            let mut graph_rng = rng_for(graph_seed, "test-graph", 0);
                            DirectedGraph::preferential_attachment(
                                size,
                                pool.attachment,
                                &mut graph_rng,
                            )
                        } else {
                            let path =
                                &pool.test_graph_files[rng.random_range(0..pool.test_graph_files.len())];
                            DirectedGraph::load_edge_list(path)?
                        }
                    }
                };
                Payload::Mcimp(McimpInstance::generate(graph, dim, pool.n_sim, &mut rng)?)
            }
        };
        Ok(Self {
            class,
            dim,
            split,
            seed,
            payload,
        })
    }

    /// The per-class payload as the common evaluable interface.
    pub fn as_evaluable(&self) -> &dyn Evaluable {
        match &self.payload {
            Payload::Mmmp(i) => i,
            Payload::Mkp(i) => i,
            Payload::Mccp(i) => i,
            Payload::Mcimp(i) => i,
        }
    }

    pub fn mkp(&self) -> Option<&MkpInstance> {
        match &self.payload {
            Payload::Mkp(i) => Some(i),
            _ => None,
        }
    }

    pub fn mccp(&self) -> Option<&MccpInstance> {
        match &self.payload {
            Payload::Mccp(i) => Some(i),
            _ => None,
        }
    }

    pub fn mcimp(&self) -> Option<&McimpInstance> {
        match &self.payload {
            Payload::Mcimp(i) => Some(i),
            _ => None,
        }
    }

    pub fn mmmp(&self) -> Option<&MmmpInstance> {
        match &self.payload {
            Payload::Mmmp(i) => Some(i),
            _ => None,
        }
    }

    /// A stable identifier for matrices and reports.
    pub fn id(&self) -> String {
        format!("{}-d{}-{:?}-s{}", self.class, self.dim, self.split, self.seed)
    }

    /// Writes the instance as self-describing structured text.
    pub fn save(&self, path: &Path) -> Result<(), ProblemError> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| ProblemError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| ProblemError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ProblemError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProblemError::Io(e.to_string()))?;
        let mut spec: Self =
            serde_json::from_str(&text).map_err(|e| ProblemError::Io(e.to_string()))?;
        match &mut spec.payload {
            Payload::Mccp(i) => i.rehydrate(),
            Payload::Mcimp(i) => i.rehydrate(),
            _ => {}
        }
        Ok(spec)
    }
}

impl Evaluable for InstanceSpec {
    fn dim(&self) -> usize {
        self.as_evaluable().dim()
    }

    fn n_obj(&self) -> usize {
        self.as_evaluable().n_obj()
    }

    fn repair(&self, x: &BitVector) -> BitVector {
        self.as_evaluable().repair(x)
    }

    fn evaluate(&self, x: &BitVector) -> ObjectiveVector {
        self.as_evaluable().evaluate(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;

    #[test]
    fn generation_is_deterministic() {
        for class in ProblemClass::ALL {
            let dim = if class == ProblemClass::Mcimp { 8 } else { 12 };
            let a = InstanceSpec::generate(class, dim, Split::Train, 77).unwrap();
            let b = InstanceSpec::generate(class, dim, Split::Train, 77).unwrap();
            let mut rng = rng_from(1);
            for _ in 0..20 {
                let x = a.repair(&BitVector::random(dim, &mut rng));
                assert_eq!(a.evaluate(&x), b.evaluate(&x), "{class} must regenerate identically");
            }
        }
    }

    #[test]
    fn mccp_split_examples() {
        let inst = InstanceSpec::generate(ProblemClass::Mccp, 32, Split::Train, 5).unwrap();
        assert_eq!(inst.mccp().unwrap().contamination_limit(), 0.1);
        let inst = InstanceSpec::generate(ProblemClass::Mccp, 32, Split::Test, 5).unwrap();
        assert_eq!(inst.mccp().unwrap().contamination_limit(), 0.15);
    }

    #[test]
    fn dim_floor_enforced() {
        assert!(InstanceSpec::generate(ProblemClass::Mkp, 3, Split::Train, 1).is_err());
    }

    #[test]
    fn save_load_round_trip_preserves_evaluation() {
        let dir = std::env::temp_dir().join(format!("papforge-inst-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut rng = rng_from(2);
        for class in ProblemClass::ALL {
            let dim = if class == ProblemClass::Mcimp { 6 } else { 10 };
            let inst = InstanceSpec::generate(class, dim, Split::Test, 123).unwrap();
            let path = dir.join(format!("{}.json", inst.id()));
            inst.save(&path).unwrap();
            let loaded = InstanceSpec::load(&path).unwrap();
            for _ in 0..10 {
                let x = inst.repair(&BitVector::random(dim, &mut rng));
                assert_eq!(inst.evaluate(&x), loaded.evaluate(&x));
            }
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn training_mcimp_instances_share_a_graph() {
        let a = InstanceSpec::generate(ProblemClass::Mcimp, 6, Split::Train, 1).unwrap();
        let b = InstanceSpec::generate(ProblemClass::Mcimp, 6, Split::Train, 2).unwrap();
        assert_eq!(
            a.mcimp().unwrap().graph().n_edges(),
            b.mcimp().unwrap().graph().n_edges()
        );
        assert_eq!(a.mcimp().unwrap().graph().edges(), b.mcimp().unwrap().graph().edges());
    }
}
