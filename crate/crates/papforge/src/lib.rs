//! Construction of generalizable parallel algorithm portfolios (PAPs) for
//! multi-objective binary optimization via co-evolution of a configuration
//! population and a neural-instance-representation training set.
//!
//! The crate is organized around the co-evolution pipeline:
//!
//! * [`problems`] — four benchmark problem classes (MMMP, MKP, MCCP, MCIMP)
//!   with instance generators, evaluation functions and repair operators.
//! * [`metrics`] — Pareto dominance, exact 2-D/3-D hypervolume and the
//!   normalized-performance protocol.
//! * [`moea`] — a unified population-based MOEA framework driven by
//!   structured algorithm descriptors, including the four classic algorithms.
//! * [`portfolio`] — parallel portfolio execution, the performance matrix
//!   and optimal K-subset selection.
//! * [`nir`] — the neural instance representation: GRU Seq2Seq encoder,
//!   hypernetwork-generated scorer, per-instance embeddings, and training
//!   with hand-derived gradients.
//! * [`insgen`] — hard-instance generation by PGPE over the instance
//!   embedding.
//! * [`tuner`] — generic hyperparameter search for member configurations.
//! * [`opgen`] — proposal of new algorithm descriptors (offline catalog or
//!   an LLM HTTP provider).
//! * [`coevolve`] — the end-to-end co-evolution driver with checkpointing.
//! * [`workbench`] — CLI entry points, experiment persistence and reports.
//!
//! Start with the runnable programs in `examples/`; each one demonstrates a
//! single capability end to end. The `papforge` binary wraps the same
//! library calls behind subcommands.

pub mod metrics;
pub mod portfolio;
pub mod moea;
pub mod nir;
pub mod problems;
pub mod seeding;

pub use problems::{BitVector, Evaluable, InstanceSpec, ObjectiveVector, ProblemClass, Split};
