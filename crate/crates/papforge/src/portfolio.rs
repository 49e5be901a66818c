//! Parallel algorithm portfolios: member execution, the per-instance
//! performance matrix with its frozen reference bookkeeping, optimal
//! K-subset selection, and the oracle/worst/random selection bounds.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::metrics::{
    clip_to_reference, hypervolume, init_reference, normalized_performance, MetricsError,
    ReferenceCollector, ReferenceParetoSet, ReferencePoint,
};
use crate::moea::{run_moea, Configuration, MoeaError, ObjectiveRange, ParetoResult};
use crate::problems::Evaluable;
use crate::seeding::derive_seed;

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("portfolio needs at least one member")]
    Empty,
    #[error("duplicate member configuration {0:?}")]
    DuplicateMember(String),
    #[error("matrix entry missing for ({config}, {instance})")]
    MissingEntry { config: String, instance: String },
    #[error("no frozen reference for instance {0}")]
    MissingReference(String),
    #[error("subset size {k} exceeds candidate count {n}")]
    SubsetTooLarge { k: usize, n: usize },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Moea(#[from] MoeaError),
    #[error("io error: {0}")]
    Io(String),
}

/// Stable identifier of a configuration: hash of its serialized form.
pub fn config_id(config: &Configuration) -> String {
    let mut h = Sha256::new();
    h.update(config.fingerprint().as_bytes());
    let d = h.finalize();
    hex_prefix(&d, 12)
}

fn hex_prefix(bytes: &[u8], n: usize) -> String {
    bytes.iter().take(n).map(|b| format!("{b:02x}")).collect()
}

/// K distinct member configurations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Portfolio {
    members: Vec<Configuration>,
}

impl Portfolio {
    pub fn new(members: Vec<Configuration>) -> Result<Self, PortfolioError> {
        if members.is_empty() {
            return Err(PortfolioError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &members {
            if !seen.insert(m.fingerprint()) {
                return Err(PortfolioError::DuplicateMember(m.label.clone()));
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Configuration] {
        &self.members
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn replace_member(&self, index: usize, config: Configuration) -> Result<Self, PortfolioError> {
        let mut members = self.members.clone();
        members[index] = config;
        Self::new(members)
    }
}

/// Evaluation-protocol knobs: how many random samples seed the reference
/// point and the reference Pareto set.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReferenceProtocol {
    pub point_samples: usize,
    pub set_samples: usize,
}

impl Default for ReferenceProtocol {
    fn default() -> Self {
        Self {
            point_samples: 100_000,
            set_samples: 5_000,
        }
    }
}

/// Reference data frozen per instance so normalized values stay comparable
/// across rounds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrozenRef {
    pub point: ReferencePoint,
    pub hv_ref: f64,
    /// Maximization-convention objective range observed when freezing.
    pub range: ObjectiveRange,
}

/// One (configuration, instance) record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixEntry {
    pub config_id: String,
    pub label: String,
    pub instance_id: String,
    pub raw_hv: f64,
    pub hv_ref: f64,
    pub normalized: f64,
    pub wall_ms: u64,
    pub failed: bool,
}

/// Rows are configurations, columns instances; entries hold Eq.-style
/// normalized performance plus raw bookkeeping.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PerformanceMatrix {
    entries: BTreeMap<String, MatrixEntry>,
    refs: BTreeMap<String, FrozenRef>,
}

fn entry_key(config: &str, instance: &str) -> String {
    format!("{config}|{instance}")
}

impl PerformanceMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, config_id: &str, instance_id: &str) -> Option<&MatrixEntry> {
        self.entries.get(&entry_key(config_id, instance_id))
    }

    pub fn insert(&mut self, entry: MatrixEntry) {
        self.entries
            .insert(entry_key(&entry.config_id, &entry.instance_id), entry);
    }

    pub fn frozen_ref(&self, instance_id: &str) -> Option<&FrozenRef> {
        self.refs.get(instance_id)
    }

    pub fn freeze_ref(&mut self, instance_id: &str, frozen: FrozenRef) {
        self.refs.entry(instance_id.to_string()).or_insert(frozen);
    }

    pub fn drop_instance(&mut self, instance_id: &str) {
        self.refs.remove(instance_id);
        self.entries.retain(|_, e| e.instance_id != instance_id);
    }

    pub fn entries(&self) -> impl Iterator<Item = &MatrixEntry> {
        self.entries.values()
    }

    /// Canonical snapshot without wall-clock fields, for byte-stable
    /// checkpoints.
    pub fn canonical_snapshot(&self) -> String {
        #[derive(Serialize)]
        struct Row<'a> {
            config_id: &'a str,
            label: &'a str,
            instance_id: &'a str,
            raw_hv: f64,
            hv_ref: f64,
            normalized: f64,
            failed: bool,
        }
        let rows: Vec<Row> = self
            .entries
            .values()
            .map(|e| Row {
                config_id: &e.config_id,
                label: &e.label,
                instance_id: &e.instance_id,
                raw_hv: e.raw_hv,
                hv_ref: e.hv_ref,
                normalized: e.normalized,
                failed: e.failed,
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("matrix serializes")
    }

    /// Appends records to the flat matrix file, one JSON object per line.
    pub fn append_records(path: &Path, records: &[MatrixEntry]) -> Result<(), PortfolioError> {
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| PortfolioError::Io(e.to_string()))?;
        for r in records {
            let line = serde_json::to_string(r).map_err(|e| PortfolioError::Io(e.to_string()))?;
            writeln!(file, "{line}").map_err(|e| PortfolioError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn load_records(path: &Path) -> Result<Vec<MatrixEntry>, PortfolioError> {
        let text = std::fs::read_to_string(path).map_err(|e| PortfolioError::Io(e.to_string()))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| PortfolioError::Io(e.to_string())))
            .collect()
    }
}

/// Outcome of one member run inside a portfolio execution.
#[derive(Clone, Debug)]
pub struct MemberOutcome {
    pub config_id: String,
    pub label: String,
    pub result: Option<ParetoResult>,
    pub raw_hv: f64,
    pub normalized: f64,
    pub wall_ms: u64,
    pub failed: bool,
}

/// Result of running every member on one instance.
#[derive(Clone, Debug)]
pub struct PortfolioOutcome {
    pub members: Vec<MemberOutcome>,
    /// Best member's normalized performance: f(P, s).
    pub performance: f64,
}

/// Runs every member on the instance (members fan out across the worker
/// pool) with a shared dynamic reference-point collector, freezes the
/// instance's reference data on first contact, computes normalized
/// performance per member and records everything in the matrix.
///
/// Failed members score 0 rather than aborting the portfolio run.
pub fn run_portfolio(
    portfolio: &Portfolio,
    instance: &dyn Evaluable,
    instance_id: &str,
    protocol: &ReferenceProtocol,
    budget_per_member: usize,
    seed: u64,
    matrix: &mut PerformanceMatrix,
) -> Result<PortfolioOutcome, PortfolioError> {
    let frozen = matrix.frozen_ref(instance_id).cloned();
    let range_hint = frozen.as_ref().map(|f| f.range.clone());

    // member runs are independent; order restored by collect
    let raw: Vec<(String, String, Result<ParetoResult, MoeaError>, u64)> = portfolio
        .members()
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let start = Instant::now();
            let run_seed = derive_seed(seed, "member", i as u64);
            let res = run_moea(cfg, instance, budget_per_member, range_hint.as_ref(), run_seed);
            (
                config_id(cfg),
                cfg.label.clone(),
                res,
                start.elapsed().as_millis() as u64,
            )
        })
        .collect();

    let frozen = match frozen {
        Some(f) => f,
        None => {
            // first contact: initial point from random samples, ratcheted
            // down by everything the members observed, then frozen
            let point_seed = derive_seed(seed, "ref-point", 0);
            let mut collector =
                ReferenceCollector::new(init_reference(instance, protocol.point_samples, point_seed));
            for (_, _, res, _) in &raw {
                if let Ok(r) = res {
                    for (_, y) in &r.solutions {
                        collector.observe(y);
                    }
                }
            }
            let point = collector.current().clone();
            let set_seed = derive_seed(seed, "ref-set", 0);
            let ref_set =
                ReferenceParetoSet::build(instance, protocol.set_samples, set_seed, &point)?;
            let mut range_pts: Vec<crate::problems::ObjectiveVector> =
                ref_set.points().to_vec();
            for (_, _, res, _) in &raw {
                if let Ok(r) = res {
                    range_pts.extend(r.solutions.iter().map(|(_, y)| y.clone()));
                }
            }
            let range = ObjectiveRange::from_observations(range_pts.iter())
                .expect("reference set is nonempty");
            let frozen = FrozenRef {
                point,
                hv_ref: ref_set.hv_ref(),
                range,
            };
            matrix.freeze_ref(instance_id, frozen.clone());
            frozen
        }
    };

    let mut members = Vec::with_capacity(raw.len());
    for (cid, label, res, wall_ms) in raw {
        let outcome = match res {
            Ok(result) => {
                let clipped = clip_to_reference(&result.objectives(), &frozen.point);
                let raw_hv = if clipped.is_empty() {
                    0.0
                } else {
                    hypervolume(&clipped, &frozen.point)?
                };
                let normalized = normalized_performance(raw_hv, frozen.hv_ref)?;
                MemberOutcome {
                    config_id: cid,
                    label,
                    result: Some(result),
                    raw_hv,
                    normalized,
                    wall_ms,
                    failed: false,
                }
            }
            Err(_) => MemberOutcome {
                config_id: cid,
                label,
                result: None,
                raw_hv: 0.0,
                normalized: 0.0,
                wall_ms,
                failed: true,
            },
        };
        matrix.insert(MatrixEntry {
            config_id: outcome.config_id.clone(),
            label: outcome.label.clone(),
            instance_id: instance_id.to_string(),
            raw_hv: outcome.raw_hv,
            hv_ref: frozen.hv_ref,
            normalized: outcome.normalized,
            wall_ms: outcome.wall_ms,
            failed: outcome.failed,
        });
        members.push(outcome);
    }

    let performance = members.iter().map(|m| m.normalized).fold(0.0f64, f64::max);
    Ok(PortfolioOutcome {
        members,
        performance,
    })
}

/// Runs a single candidate configuration against an instance whose
/// reference data is already frozen; used during configuration mining and
/// tuning where f(P + candidate, m) only needs the candidate's fresh run.
pub fn run_config_on_instance(
    config: &Configuration,
    instance: &dyn Evaluable,
    instance_id: &str,
    budget: usize,
    seed: u64,
    matrix: &mut PerformanceMatrix,
) -> Result<MatrixEntry, PortfolioError> {
    let frozen = matrix
        .frozen_ref(instance_id)
        .cloned()
        .ok_or_else(|| PortfolioError::MissingReference(instance_id.to_string()))?;
    let start = Instant::now();
    let cid = config_id(config);
    let entry = match run_moea(config, instance, budget, Some(&frozen.range), seed) {
        Ok(result) => {
            let clipped = clip_to_reference(&result.objectives(), &frozen.point);
            let raw_hv = if clipped.is_empty() {
                0.0
            } else {
                hypervolume(&clipped, &frozen.point)?
            };
            let normalized = normalized_performance(raw_hv, frozen.hv_ref)?;
            MatrixEntry {
                config_id: cid,
                label: config.label.clone(),
                instance_id: instance_id.to_string(),
                raw_hv,
                hv_ref: frozen.hv_ref,
                normalized,
                wall_ms: start.elapsed().as_millis() as u64,
                failed: false,
            }
        }
        Err(_) => MatrixEntry {
            config_id: cid,
            label: config.label.clone(),
            instance_id: instance_id.to_string(),
            raw_hv: 0.0,
            hv_ref: frozen.hv_ref,
            normalized: 0.0,
            wall_ms: start.elapsed().as_millis() as u64,
            failed: true,
        },
    };
    matrix.insert(entry.clone());
    Ok(entry)
}

/// Exhaustively enumerates all size-`k` subsets of `candidates` and returns
/// the one maximizing the summed best-member performance over `instances`.
/// Ties break toward the lexicographically earliest candidate-index tuple.
pub fn select_subset(
    matrix: &PerformanceMatrix,
    candidates: &[Configuration],
    instances: &[String],
    k: usize,
) -> Result<(Portfolio, f64), PortfolioError> {
    if k == 0 || candidates.len() < k {
        return Err(PortfolioError::SubsetTooLarge {
            k,
            n: candidates.len(),
        });
    }
    // performance lookup table: candidate x instance
    let mut perf = vec![vec![0.0f64; instances.len()]; candidates.len()];
    for (ci, cand) in candidates.iter().enumerate() {
        let cid = config_id(cand);
        for (ii, inst) in instances.iter().enumerate() {
            let entry = matrix
                .get(&cid, inst)
                .ok_or_else(|| PortfolioError::MissingEntry {
                    config: cand.label.clone(),
                    instance: inst.clone(),
                })?;
            perf[ci][ii] = entry.normalized;
        }
    }

    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut combo: Vec<usize> = (0..k).collect();
    loop {
        let value: f64 = (0..instances.len())
            .map(|ii| combo.iter().map(|&ci| perf[ci][ii]).fold(0.0f64, f64::max))
            .sum();
        match &best {
            Some((_, v)) if value <= *v => {}
            _ => best = Some((combo.clone(), value)),
        }
        // next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                let (idx, value) = best.unwrap();
                let members = idx.into_iter().map(|ci| candidates[ci].clone()).collect();
                return Ok((Portfolio::new(members)?, value));
            }
            i -= 1;
            if combo[i] != i + candidates.len() - k {
                combo[i] += 1;
                for j in (i + 1)..k {
                    combo[j] = combo[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Summed best-member performance of a fixed portfolio over `instances`,
/// read from the matrix.
pub fn portfolio_objective(
    matrix: &PerformanceMatrix,
    portfolio: &Portfolio,
    instances: &[String],
) -> Result<f64, PortfolioError> {
    let ids: Vec<String> = portfolio.members().iter().map(config_id).collect();
    let mut total = 0.0;
    for inst in instances {
        let mut best = 0.0f64;
        for (cid, m) in ids.iter().zip(portfolio.members()) {
            let e = matrix.get(cid, inst).ok_or_else(|| PortfolioError::MissingEntry {
                config: m.label.clone(),
                instance: inst.clone(),
            })?;
            best = best.max(e.normalized);
        }
        total += best;
    }
    Ok(total)
}

/// Oracle / worst / random selection bounds per instance and aggregated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AasBounds {
    pub per_instance: Vec<AasRow>,
    pub oracle: f64,
    pub worst: f64,
    pub random: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AasRow {
    pub instance_id: String,
    pub oracle: f64,
    pub worst: f64,
    pub random: f64,
}

/// Per-instance max, min and mean over the portfolio's members; aggregates
/// are means over instances.
pub fn aas_bounds(
    matrix: &PerformanceMatrix,
    portfolio: &Portfolio,
    instances: &[String],
) -> Result<AasBounds, PortfolioError> {
    let ids: Vec<String> = portfolio.members().iter().map(config_id).collect();
    let mut per_instance = Vec::with_capacity(instances.len());
    for inst in instances {
        let mut values = Vec::with_capacity(ids.len());
        for (cid, m) in ids.iter().zip(portfolio.members()) {
            let e = matrix.get(cid, inst).ok_or_else(|| PortfolioError::MissingEntry {
                config: m.label.clone(),
                instance: inst.clone(),
            })?;
            values.push(e.normalized);
        }
        let oracle = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let worst = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let random = values.iter().sum::<f64>() / values.len() as f64;
        per_instance.push(AasRow {
            instance_id: inst.clone(),
            oracle,
            worst,
            random,
        });
    }
    let n = per_instance.len().max(1) as f64;
    Ok(AasBounds {
        oracle: per_instance.iter().map(|r| r.oracle).sum::<f64>() / n,
        worst: per_instance.iter().map(|r| r.worst).sum::<f64>() / n,
        random: per_instance.iter().map(|r| r.random).sum::<f64>() / n,
        per_instance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::{classic_config, ClassicName};
    use crate::problems::{InstanceSpec, ProblemClass, Split};

    fn small_protocol() -> ReferenceProtocol {
        ReferenceProtocol {
            point_samples: 300,
            set_samples: 200,
        }
    }

    fn two_member_portfolio() -> Portfolio {
        Portfolio::new(vec![
            classic_config(ClassicName::Nsga2),
            classic_config(ClassicName::Moead),
        ])
        .unwrap()
    }

    #[test]
    fn duplicate_members_rejected() {
        let err = Portfolio::new(vec![
            classic_config(ClassicName::Nsga2),
            classic_config(ClassicName::Nsga2),
        ]);
        assert!(matches!(err, Err(PortfolioError::DuplicateMember(_))));
    }

    #[test]
    fn performance_is_best_member() {
        let inst = InstanceSpec::generate(ProblemClass::Mkp, 10, Split::Train, 5).unwrap();
        let p = two_member_portfolio();
        let mut matrix = PerformanceMatrix::new();
        let out = run_portfolio(&p, &inst, "mkp-10", &small_protocol(), 300, 42, &mut matrix).unwrap();
        let best = out.members.iter().map(|m| m.normalized).fold(0.0f64, f64::max);
        assert_eq!(out.performance, best);
        assert!(matrix.frozen_ref("mkp-10").is_some());
        assert_eq!(matrix.entries().count(), 2);
    }

    #[test]
    fn single_member_performance_is_its_own() {
        let inst = InstanceSpec::generate(ProblemClass::Mkp, 8, Split::Train, 6).unwrap();
        let p = Portfolio::new(vec![classic_config(ClassicName::Nsga2)]).unwrap();
        let mut matrix = PerformanceMatrix::new();
        let out = run_portfolio(&p, &inst, "i", &small_protocol(), 300, 1, &mut matrix).unwrap();
        assert_eq!(out.performance, out.members[0].normalized);
    }

    #[test]
    fn reruns_reuse_frozen_reference() {
        let inst = InstanceSpec::generate(ProblemClass::Mkp, 8, Split::Train, 7).unwrap();
        let p = two_member_portfolio();
        let mut matrix = PerformanceMatrix::new();
        run_portfolio(&p, &inst, "i", &small_protocol(), 200, 1, &mut matrix).unwrap();
        let frozen = matrix.frozen_ref("i").unwrap().clone();
        run_portfolio(&p, &inst, "i", &small_protocol(), 400, 2, &mut matrix).unwrap();
        let again = matrix.frozen_ref("i").unwrap();
        assert_eq!(frozen.point, again.point);
        assert_eq!(frozen.hv_ref, again.hv_ref);
    }

    /// Brute-force subset selection oracle.
    fn brute_force(perf: &[Vec<f64>], k: usize) -> f64 {
        fn combos(n: usize, k: usize) -> Vec<Vec<usize>> {
            if k == 0 {
                return vec![vec![]];
            }
            if n < k {
                return vec![];
            }
            let mut out = combos(n - 1, k);
            for mut c in combos(n - 1, k - 1) {
                c.push(n - 1);
                out.push(c);
            }
            out
        }
        let n_inst = perf[0].len();
        combos(perf.len(), k)
            .into_iter()
            .map(|c| {
                (0..n_inst)
                    .map(|i| c.iter().map(|&ci| perf[ci][i]).fold(0.0f64, f64::max))
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn synthetic_matrix(perf: &[Vec<f64>]) -> (PerformanceMatrix, Vec<Configuration>, Vec<String>) {
        let mut matrix = PerformanceMatrix::new();
        let instances: Vec<String> = (0..perf[0].len()).map(|i| format!("inst-{i}")).collect();
        let candidates: Vec<Configuration> = (0..perf.len())
            .map(|c| {
                let mut cfg = classic_config(ClassicName::ALL[c % 4]);
                cfg.label = format!("cand-{c}");
                cfg
            })
            .collect();
        for (ci, cand) in candidates.iter().enumerate() {
            for (ii, inst) in instances.iter().enumerate() {
                matrix.insert(MatrixEntry {
                    config_id: config_id(cand),
                    label: cand.label.clone(),
                    instance_id: inst.clone(),
                    raw_hv: perf[ci][ii],
                    hv_ref: 1.0,
                    normalized: perf[ci][ii],
                    wall_ms: 0,
                    failed: false,
                });
            }
        }
        (matrix, candidates, instances)
    }

    #[test]
    fn select_subset_matches_brute_force() {
        use rand::Rng;
        let mut rng = crate::seeding::rng_from(3);
        for _ in 0..25 {
            let n_cand = rng.random_range(2..=8);
            let n_inst = rng.random_range(1..=5);
            let k = rng.random_range(1..=n_cand.min(4));
            let perf: Vec<Vec<f64>> = (0..n_cand)
                .map(|_| (0..n_inst).map(|_| rng.random_range(0.0..2.0)).collect())
                .collect();
            let (matrix, candidates, instances) = synthetic_matrix(&perf);
            let (_, value) = select_subset(&matrix, &candidates, &instances, k).unwrap();
            let oracle = brute_force(&perf, k);
            assert!((value - oracle).abs() < 1e-12, "{value} vs {oracle}");
        }
    }

    #[test]
    fn select_all_candidates_when_k_equals_n() {
        let perf = vec![vec![0.5, 0.2], vec![0.1, 0.9]];
        let (matrix, candidates, instances) = synthetic_matrix(&perf);
        let (p, _) = select_subset(&matrix, &candidates, &instances, 2).unwrap();
        assert_eq!(p.k(), 2);
    }

    #[test]
    fn dominant_candidate_selected_alone() {
        let perf = vec![vec![0.9, 0.8], vec![0.5, 0.6], vec![0.2, 0.1]];
        let (matrix, candidates, instances) = synthetic_matrix(&perf);
        let (p, v) = select_subset(&matrix, &candidates, &instances, 1).unwrap();
        assert_eq!(p.members()[0].label, "cand-0");
        assert!((v - 1.7).abs() < 1e-12);
    }

    #[test]
    fn superset_never_degrades() {
        let perf = vec![vec![0.5, 0.4], vec![0.3, 0.9], vec![0.6, 0.1], vec![0.2, 0.2]];
        let (matrix, candidates, instances) = synthetic_matrix(&perf);
        // old portfolio = first two candidates
        let old = Portfolio::new(candidates[..2].to_vec()).unwrap();
        let old_value = portfolio_objective(&matrix, &old, &instances).unwrap();
        let (_, new_value) = select_subset(&matrix, &candidates, &instances, 2).unwrap();
        assert!(new_value >= old_value);
    }

    #[test]
    fn aas_bounds_ordering() {
        let perf = vec![vec![0.8, 0.3], vec![0.9, 0.7]];
        let (matrix, candidates, instances) = synthetic_matrix(&perf);
        let p = Portfolio::new(candidates).unwrap();
        let b = aas_bounds(&matrix, &p, &instances).unwrap();
        assert_eq!(b.per_instance[0].oracle, 0.9);
        assert_eq!(b.per_instance[0].worst, 0.8);
        assert!((b.per_instance[0].random - 0.85).abs() < 1e-12);
        assert!(b.oracle >= b.random && b.random >= b.worst);
    }

    #[test]
    fn matrix_records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matrix.jsonl");
        let records = vec![MatrixEntry {
            config_id: "c".into(),
            label: "l".into(),
            instance_id: "i".into(),
            raw_hv: 1.5,
            hv_ref: 1.0,
            normalized: 1.5,
            wall_ms: 10,
            failed: false,
        }];
        PerformanceMatrix::append_records(&path, &records).unwrap();
        PerformanceMatrix::append_records(&path, &records).unwrap();
        let loaded = PerformanceMatrix::load_records(&path).unwrap();
        assert_eq!(loaded.len(), 2, "append-only file accumulates");
        assert_eq!(loaded[0].normalized, 1.5);
    }
}
