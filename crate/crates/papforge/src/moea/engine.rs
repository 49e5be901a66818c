//! The unified population-based MOEA loop: initialization, offspring
//! generation and population update, repeated until the evaluation budget
//! is exhausted. Every evaluated solution lands in the all-evaluations
//! archive; the returned Pareto set is filtered from that archive.
//!
//! Objectives are maximized at the problem boundary and negated here, so
//! the whole engine works in minimization space.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::metrics::{hypervolume_raw, pareto_indices};
use crate::problems::{BitVector, Evaluable, ObjectiveVector};
use crate::seeding::rng_from;

use super::descriptor::{
    wellknown, Aggregation, Configuration, CrossoverOp, InitScheme, MatingSelection, UpdateScheme,
};
use super::{MoeaError, ObjectiveRange, ParetoResult};

#[derive(Clone, Debug)]
struct Indiv {
    bits: BitVector,
    /// Minimized objective values.
    f: Vec<f64>,
    /// Insertion index, the deterministic tie-breaker of last resort.
    idx: usize,
}

/// Budget-accounted evaluation adapter: repair, negate, record.
struct Evaluator<'a> {
    instance: &'a dyn Evaluable,
    max_eval: usize,
    count: usize,
    /// First occurrence of every evaluated bit pattern.
    archive: Vec<(BitVector, Vec<f64>)>,
    seen: HashSet<BitVector>,
    /// Dynamic objective range in minimization space.
    range_lo: Vec<f64>,
    range_hi: Vec<f64>,
    next_idx: usize,
}

impl<'a> Evaluator<'a> {
    fn new(instance: &'a dyn Evaluable, max_eval: usize, init_range: Option<&ObjectiveRange>) -> Self {
        let n = instance.n_obj();
        let (range_lo, range_hi) = match init_range {
            // negate the maximization range into minimization space
            Some(r) => (
                r.hi.iter().map(|v| -v).collect(),
                r.lo.iter().map(|v| -v).collect(),
            ),
            None => (vec![f64::INFINITY; n], vec![f64::NEG_INFINITY; n]),
        };
        Self {
            instance,
            max_eval,
            count: 0,
            archive: Vec::new(),
            seen: HashSet::new(),
            range_lo,
            range_hi,
            next_idx: 0,
        }
    }

    fn remaining(&self) -> usize {
        self.max_eval - self.count
    }

    fn evaluate(&mut self, x: &BitVector) -> Indiv {
        assert!(self.count < self.max_eval, "evaluation budget overdraft");
        let repaired = self.instance.repair(x);
        debug_assert_eq!(
            self.instance.repair(&repaired),
            repaired,
            "repair must be idempotent before evaluation"
        );
        let y = self.instance.evaluate(&repaired);
        let f: Vec<f64> = y.values().iter().map(|v| -v).collect();
        self.count += 1;
        for ((lo, hi), &v) in self.range_lo.iter_mut().zip(&mut self.range_hi).zip(&f) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
        if self.seen.insert(repaired.clone()) {
            self.archive.push((repaired.clone(), f.clone()));
        }
        let idx = self.next_idx;
        self.next_idx += 1;
        Indiv {
            bits: repaired,
            f,
            idx,
        }
    }
}

/// Variation knobs shared by every scheme.
struct Variation {
    crossover: CrossoverOp,
    crossover_rate: f64,
    mutation_rate: f64,
    mating: MatingSelection,
    neighborhood_size: usize,
}

fn crossover(
    a: &BitVector,
    b: &BitVector,
    op: CrossoverOp,
    rng: &mut ChaCha12Rng,
) -> (BitVector, BitVector) {
    let d = a.dim();
    match op {
        CrossoverOp::None => (a.clone(), b.clone()),
        CrossoverOp::Uniform => {
            let mut c1 = a.clone();
            let mut c2 = b.clone();
            for i in 0..d {
                if rng.random::<bool>() {
                    c1.set(i, b.get(i));
                    c2.set(i, a.get(i));
                }
            }
            (c1, c2)
        }
        CrossoverOp::OnePoint => {
            let cut = rng.random_range(1..d.max(2));
            let mut c1 = a.clone();
            let mut c2 = b.clone();
            for i in cut..d {
                c1.set(i, b.get(i));
                c2.set(i, a.get(i));
            }
            (c1, c2)
        }
        CrossoverOp::TwoPoint => {
            let mut p1 = rng.random_range(0..d);
            let mut p2 = rng.random_range(0..d);
            if p1 > p2 {
                std::mem::swap(&mut p1, &mut p2);
            }
            let mut c1 = a.clone();
            let mut c2 = b.clone();
            for i in p1..=p2 {
                c1.set(i, b.get(i));
                c2.set(i, a.get(i));
            }
            (c1, c2)
        }
    }
}

fn mutate(x: &mut BitVector, rate: f64, rng: &mut ChaCha12Rng) {
    for i in 0..x.dim() {
        if rng.random::<f64>() < rate {
            x.flip(i);
        }
    }
}

/// Binary tournament: lower score wins; without scores, dominance decides
/// and incomparable pairs fall to a coin flip.
fn tournament(pop: &[Indiv], scores: Option<&[f64]>, rng: &mut ChaCha12Rng) -> usize {
    let i = rng.random_range(0..pop.len());
    let j = rng.random_range(0..pop.len());
    match scores {
        Some(s) => {
            if s[j] < s[i] {
                j
            } else {
                i
            }
        }
        None => {
            if dominates_min(&pop[j].f, &pop[i].f) {
                j
            } else if dominates_min(&pop[i].f, &pop[j].f) {
                i
            } else if rng.random::<bool>() {
                j
            } else {
                i
            }
        }
    }
}

fn dominates_min(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (&x, &y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Selects parents per the mating rule, breeds up to `budgeted` offspring.
fn breed(
    pop: &[Indiv],
    scores: Option<&[f64]>,
    var: &Variation,
    want: usize,
    ev: &mut Evaluator,
    rng: &mut ChaCha12Rng,
) -> Vec<Indiv> {
    // neighborhood mating needs objective-space neighbor lists
    let neighbors: Option<Vec<Vec<usize>>> = (var.mating == MatingSelection::Neighborhood)
        .then(|| objective_neighbors(pop, var.neighborhood_size));
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        let p1 = match var.mating {
            MatingSelection::Random => rng.random_range(0..pop.len()),
            MatingSelection::BinaryTournament => tournament(pop, scores, rng),
            MatingSelection::Neighborhood => rng.random_range(0..pop.len()),
        };
        let p2 = match var.mating {
            MatingSelection::Random => rng.random_range(0..pop.len()),
            MatingSelection::BinaryTournament => tournament(pop, scores, rng),
            MatingSelection::Neighborhood => {
                let nb = &neighbors.as_ref().unwrap()[p1];
                nb[rng.random_range(0..nb.len())]
            }
        };
        let (mut c1, mut c2) = if rng.random::<f64>() < var.crossover_rate {
            crossover(&pop[p1].bits, &pop[p2].bits, var.crossover, rng)
        } else {
            (pop[p1].bits.clone(), pop[p2].bits.clone())
        };
        mutate(&mut c1, var.mutation_rate, rng);
        mutate(&mut c2, var.mutation_rate, rng);
        out.push(ev.evaluate(&c1));
        if out.len() < want {
            out.push(ev.evaluate(&c2));
        }
    }
    out
}

fn objective_neighbors(pop: &[Indiv], t: usize) -> Vec<Vec<usize>> {
    let t = t.clamp(1, pop.len());
    (0..pop.len())
        .map(|i| {
            let mut order: Vec<usize> = (0..pop.len()).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                euclidean(&pop[i].f, &pop[a].f)
                    .partial_cmp(&euclidean(&pop[i].f, &pop[b].f))
                    .unwrap()
                    .then(pop[a].idx.cmp(&pop[b].idx))
            });
            order.truncate(t);
            order
        })
        .collect()
}

// ---------------------------------------------------------------------------
// nondominated sorting and crowding

fn fast_nondominated_sort(pop: &[Indiv]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates_min(&pop[i].f, &pop[j].f) {
                dominated_by[i].push(j);
                domination_count[j] += 1;
            } else if dominates_min(&pop[j].f, &pop[i].f) {
                dominated_by[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

fn crowding_distance(pop: &[Indiv], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0f64; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let n_obj = pop[front[0]].f.len();
    for m in 0..n_obj {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            pop[front[a]].f[m]
                .partial_cmp(&pop[front[b]].f[m])
                .unwrap()
                .then(pop[front[a]].idx.cmp(&pop[front[b]].idx))
        });
        let lo = pop[front[order[0]]].f[m];
        let hi = pop[front[order[n - 1]]].f[m];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span > 0.0 {
            for k in 1..(n - 1) {
                dist[order[k]] +=
                    (pop[front[order[k + 1]]].f[m] - pop[front[order[k - 1]]].f[m]) / span;
            }
        }
    }
    dist
}

/// Deterministic order inside truncations: lexicographic objectives, then
/// insertion index.
fn lex_then_idx(pop: &[Indiv], a: usize, b: usize) -> std::cmp::Ordering {
    for (x, y) in pop[a].f.iter().zip(&pop[b].f) {
        match x.partial_cmp(y).unwrap() {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    pop[a].idx.cmp(&pop[b].idx)
}

// ---------------------------------------------------------------------------
// update schemes

fn select_nsga2(pool: Vec<Indiv>, pop_size: usize) -> Vec<Indiv> {
    let fronts = fast_nondominated_sort(&pool);
    let mut chosen: Vec<usize> = Vec::with_capacity(pop_size);
    for front in fronts {
        if chosen.len() + front.len() <= pop_size {
            let mut f = front;
            f.sort_by(|&a, &b| lex_then_idx(&pool, a, b));
            chosen.extend(f);
        } else {
            let dist = crowding_distance(&pool, &front);
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| {
                dist[b]
                    .partial_cmp(&dist[a])
                    .unwrap()
                    .then(lex_then_idx(&pool, front[a], front[b]))
            });
            for k in order.into_iter().take(pop_size - chosen.len()) {
                chosen.push(front[k]);
            }
            break;
        }
        if chosen.len() == pop_size {
            break;
        }
    }
    keep_indices(pool, chosen)
}

fn keep_indices(pool: Vec<Indiv>, mut idx: Vec<usize>) -> Vec<Indiv> {
    idx.sort_unstable();
    let set: Vec<bool> = {
        let mut s = vec![false; pool.len()];
        for &i in &idx {
            s[i] = true;
        }
        s
    };
    pool.into_iter()
        .enumerate()
        .filter(|(i, _)| set[*i])
        .map(|(_, v)| v)
        .collect()
}

/// Uniform simplex directions (Das-Dennis); `h` partitions per objective.
pub(crate) fn das_dennis(n_obj: usize, h: usize) -> Vec<Vec<f64>> {
    fn rec(n_left: usize, h_left: usize, prefix: &mut Vec<f64>, h: usize, out: &mut Vec<Vec<f64>>) {
        if n_left == 1 {
            let mut v = prefix.clone();
            v.push(h_left as f64 / h as f64);
            out.push(v);
            return;
        }
        for k in 0..=h_left {
            prefix.push(k as f64 / h as f64);
            rec(n_left - 1, h_left - k, prefix, h, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n_obj, h, &mut Vec::new(), h, &mut out);
    out
}

/// At least `count` directions, evenly subsampled down to exactly `count`.
pub(crate) fn directions_for(n_obj: usize, count: usize) -> Vec<Vec<f64>> {
    let mut h = 1;
    while das_dennis_len(n_obj, h) < count {
        h += 1;
    }
    let dirs = das_dennis(n_obj, h);
    let n = dirs.len();
    (0..count).map(|i| dirs[i * n / count].clone()).collect()
}

fn das_dennis_len(n_obj: usize, h: usize) -> usize {
    // C(h + n - 1, n - 1)
    let mut num = 1usize;
    let mut den = 1usize;
    for k in 1..n_obj {
        num *= h + k;
        den *= k;
    }
    num / den
}

fn normalize_pool(pool: &[Indiv]) -> Vec<Vec<f64>> {
    let n_obj = pool[0].f.len();
    let mut ideal = vec![f64::INFINITY; n_obj];
    let mut nadir = vec![f64::NEG_INFINITY; n_obj];
    for ind in pool {
        for m in 0..n_obj {
            ideal[m] = ideal[m].min(ind.f[m]);
            nadir[m] = nadir[m].max(ind.f[m]);
        }
    }
    pool.iter()
        .map(|ind| {
            ind.f
                .iter()
                .enumerate()
                .map(|(m, &v)| (v - ideal[m]) / (nadir[m] - ideal[m]).max(1e-12))
                .collect()
        })
        .collect()
}

fn perpendicular_distance(point: &[f64], dir: &[f64]) -> f64 {
    let norm: f64 = dir.iter().map(|d| d * d).sum::<f64>().sqrt().max(1e-12);
    let proj: f64 = point.iter().zip(dir).map(|(p, d)| p * d).sum::<f64>() / norm;
    point
        .iter()
        .zip(dir)
        .map(|(p, d)| {
            let along = proj * d / norm;
            (p - along) * (p - along)
        })
        .sum::<f64>()
        .sqrt()
}

fn select_reference_niching(pool: Vec<Indiv>, pop_size: usize, dirs: &[Vec<f64>]) -> Vec<Indiv> {
    let fronts = fast_nondominated_sort(&pool);
    let normalized = normalize_pool(&pool);
    // association: nearest direction by perpendicular distance
    let assoc: Vec<(usize, f64)> = normalized
        .iter()
        .map(|p| {
            let mut best = (0usize, f64::INFINITY);
            for (k, d) in dirs.iter().enumerate() {
                let dist = perpendicular_distance(p, d);
                if dist < best.1 {
                    best = (k, dist);
                }
            }
            best
        })
        .collect();

    let mut chosen: Vec<usize> = Vec::with_capacity(pop_size);
    let mut niche_count = vec![0usize; dirs.len()];
    for front in fronts {
        if chosen.len() + front.len() <= pop_size {
            for &i in &front {
                niche_count[assoc[i].0] += 1;
            }
            let mut f = front;
            f.sort_by(|&a, &b| lex_then_idx(&pool, a, b));
            chosen.extend(f);
            if chosen.len() == pop_size {
                break;
            }
        } else {
            // niche the partial front
            let mut remaining: Vec<usize> = front;
            while chosen.len() < pop_size && !remaining.is_empty() {
                let dir = (0..dirs.len())
                    .filter(|&k| remaining.iter().any(|&i| assoc[i].0 == k))
                    .min_by_key(|&k| (niche_count[k], k))
                    .expect("some direction has members");
                let pick_pos = remaining
                    .iter()
                    .enumerate()
                    .filter(|(_, &i)| assoc[i].0 == dir)
                    .min_by(|(_, &a), (_, &b)| {
                        assoc[a]
                            .1
                            .partial_cmp(&assoc[b].1)
                            .unwrap()
                            .then(pool[a].idx.cmp(&pool[b].idx))
                    })
                    .map(|(pos, _)| pos)
                    .unwrap();
                let i = remaining.swap_remove(pick_pos);
                niche_count[dir] += 1;
                chosen.push(i);
            }
            break;
        }
    }
    keep_indices(pool, chosen)
}

/// One-shot hypervolume-contribution truncation against a reference set a
/// tenth of the observed span beyond the worst corner.
fn select_hv_truncation(
    pool: Vec<Indiv>,
    pop_size: usize,
    range_lo: &[f64],
    range_hi: &[f64],
) -> Vec<Indiv> {
    let fronts = fast_nondominated_sort(&pool);
    let mut chosen: Vec<usize> = Vec::with_capacity(pop_size);
    for front in fronts {
        if chosen.len() + front.len() <= pop_size {
            let mut f = front;
            f.sort_by(|&a, &b| lex_then_idx(&pool, a, b));
            chosen.extend(f);
        } else {
            // maximize -f against ref = negated (hi + margin)
            let margin: Vec<f64> = range_lo
                .iter()
                .zip(range_hi)
                .map(|(&lo, &hi)| (hi - lo).max(1e-9) * 0.1)
                .collect();
            let ref_max: Vec<f64> = range_hi
                .iter()
                .zip(&margin)
                .map(|(&hi, &m)| -(hi + m))
                .collect();
            let as_max: Vec<Vec<f64>> = front
                .iter()
                .map(|&i| pool[i].f.iter().map(|v| -v).collect())
                .collect();
            let all: Vec<&[f64]> = as_max.iter().map(|v| v.as_slice()).collect();
            let total = hypervolume_raw(&all, &ref_max).unwrap_or(0.0);
            let mut contribution: Vec<f64> = (0..front.len())
                .map(|k| {
                    let without: Vec<&[f64]> = as_max
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != k)
                        .map(|(_, v)| v.as_slice())
                        .collect();
                    total - hypervolume_raw(&without, &ref_max).unwrap_or(0.0)
                })
                .collect();
            // guard against negative zeros from cancellation
            for c in &mut contribution {
                if !c.is_finite() {
                    *c = 0.0;
                }
            }
            let mut order: Vec<usize> = (0..front.len()).collect();
            order.sort_by(|&a, &b| {
                contribution[b]
                    .partial_cmp(&contribution[a])
                    .unwrap()
                    .then(lex_then_idx(&pool, front[a], front[b]))
            });
            for k in order.into_iter().take(pop_size - chosen.len()) {
                chosen.push(front[k]);
            }
            break;
        }
        if chosen.len() == pop_size {
            break;
        }
    }
    keep_indices(pool, chosen)
}

// ---------------------------------------------------------------------------
// SPEA2 fitness machinery

struct Spea2Fitness {
    fitness: Vec<f64>,
    distances: Vec<Vec<f64>>,
}

fn spea2_fitness(pool: &[Indiv]) -> Spea2Fitness {
    let n = pool.len();
    let mut strength = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates_min(&pool[i].f, &pool[j].f) {
                strength[i] += 1;
            }
        }
    }
    let mut raw = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates_min(&pool[j].f, &pool[i].f) {
                raw[i] += strength[j] as f64;
            }
        }
    }
    let k = (n as f64).sqrt() as usize;
    let mut distances = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = euclidean(&pool[i].f, &pool[j].f);
            distances[i][j] = d;
            distances[j][i] = d;
        }
    }
    let fitness = (0..n)
        .map(|i| {
            let mut ds: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| distances[i][j]).collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let sigma_k = ds.get(k.min(ds.len().saturating_sub(1))).copied().unwrap_or(0.0);
            raw[i] + 1.0 / (sigma_k + 2.0)
        })
        .collect();
    Spea2Fitness { fitness, distances }
}

/// Iteratively removes the member closest to its nearest surviving
/// neighbor until `keep` remain.
fn spea2_truncate(members: &mut Vec<usize>, fit: &Spea2Fitness, pool: &[Indiv], keep: usize) {
    while members.len() > keep {
        let victim_pos = (0..members.len())
            .min_by(|&a, &b| {
                let da = sorted_neighbor_distances(members, a, fit);
                let db = sorted_neighbor_distances(members, b, fit);
                da.partial_cmp(&db)
                    .unwrap()
                    .then(pool[members[a]].idx.cmp(&pool[members[b]].idx))
            })
            .unwrap();
        members.swap_remove(victim_pos);
    }
    members.sort_by(|&a, &b| lex_then_idx(pool, a, b));
}

fn sorted_neighbor_distances(members: &[usize], pos: usize, fit: &Spea2Fitness) -> Vec<f64> {
    let i = members[pos];
    let mut ds: Vec<f64> = members
        .iter()
        .enumerate()
        .filter(|(p, _)| *p != pos)
        .map(|(_, &j)| fit.distances[i][j])
        .collect();
    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ds
}

// ---------------------------------------------------------------------------
// decomposition state

struct Decomposition {
    weights: Vec<Vec<f64>>,
    neighbors: Vec<Vec<usize>>,
    ideal: Vec<f64>,
    aggregation: Aggregation,
}

impl Decomposition {
    fn new(n_obj: usize, pop_size: usize, t: usize, aggregation: Aggregation) -> Self {
        let weights = directions_for(n_obj, pop_size);
        let t = t.clamp(2, pop_size);
        let neighbors = (0..pop_size)
            .map(|i| {
                let mut order: Vec<usize> = (0..pop_size).collect();
                order.sort_by(|&a, &b| {
                    euclidean(&weights[i], &weights[a])
                        .partial_cmp(&euclidean(&weights[i], &weights[b]))
                        .unwrap()
                        .then(a.cmp(&b))
                });
                order.truncate(t);
                order
            })
            .collect();
        Self {
            weights,
            neighbors,
            ideal: vec![f64::INFINITY; n_obj],
            aggregation,
        }
    }

    fn observe(&mut self, f: &[f64]) {
        for (z, &v) in self.ideal.iter_mut().zip(f) {
            *z = z.min(v);
        }
    }

    fn scalarize(&self, f: &[f64], w: &[f64]) -> f64 {
        match self.aggregation {
            Aggregation::Tchebycheff => f
                .iter()
                .zip(w)
                .zip(&self.ideal)
                .map(|((&fv, &wv), &zv)| wv.max(1e-6) * (fv - zv).abs())
                .fold(f64::NEG_INFINITY, f64::max),
            Aggregation::WeightedSum => f.iter().zip(w).map(|(&fv, &wv)| fv * wv).sum(),
        }
    }
}

// ---------------------------------------------------------------------------
// driver

pub(crate) struct EngineOutput {
    pub result: ParetoResult,
}

/// Executes one configured MOEA run. See the module docs for the loop
/// structure; determinism is guaranteed under `(config, instance, seed)`.
pub fn run_moea(
    config: &Configuration,
    instance: &dyn Evaluable,
    max_eval: usize,
    init_range: Option<&ObjectiveRange>,
    seed: u64,
) -> Result<ParetoResult, MoeaError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(MoeaError::InvalidConfiguration(violations.join("; ")));
    }
    let pop_size = config.usize_param(wellknown::POP_SIZE)?;
    if pop_size < 2 {
        return Err(MoeaError::InvalidConfiguration("pop_size below 2".into()));
    }
    if max_eval < pop_size {
        return Err(MoeaError::BudgetTooSmall { max_eval, pop_size });
    }

    let d = config.descriptor.clone();
    let var = Variation {
        crossover: d.crossover,
        crossover_rate: if d.crossover == CrossoverOp::None {
            0.0
        } else {
            config.f64_param(wellknown::CROSSOVER_RATE)?
        },
        mutation_rate: config.f64_param(wellknown::MUTATION_RATE)?,
        mating: d.mating_selection,
        neighborhood_size: config
            .value(wellknown::NEIGHBORHOOD_SIZE)
            .map(|v| v.as_usize())
            .unwrap_or(20),
    };

    let mut rng = rng_from(seed);
    let mut ev = Evaluator::new(instance, max_eval, init_range);

    // initialization
    let dim = instance.dim();
    let mut pop: Vec<Indiv> = (0..pop_size)
        .map(|i| {
            let x = match d.init_scheme {
                InitScheme::UniformRandom => BitVector::random(dim, &mut rng),
                InitScheme::StratifiedBits => {
                    let density = (i as f64 + 0.5) / pop_size as f64;
                    BitVector::random_biased(dim, density, &mut rng)
                }
                InitScheme::HeuristicBiased => {
                    let density = [0.1, 0.5, 0.9][i % 3];
                    BitVector::random_biased(dim, density, &mut rng)
                }
            };
            ev.evaluate(&x)
        })
        .collect();

    // per-scheme persistent state
    let mut decomposition = match d.update_scheme {
        UpdateScheme::Decomposition { aggregation } => {
            let mut dec = Decomposition::new(
                instance.n_obj(),
                pop_size,
                var.neighborhood_size,
                aggregation,
            );
            for ind in &pop {
                dec.observe(&ind.f);
            }
            Some(dec)
        }
        _ => None,
    };
    let reference_dirs = matches!(d.update_scheme, UpdateScheme::ReferenceDirectionNiching)
        .then(|| directions_for(instance.n_obj(), pop_size));
    let archive_capacity = d
        .archive
        .enabled
        .then(|| config.usize_param(wellknown::ARCHIVE_CAPACITY))
        .transpose()?
        .map(|c| c.max(2));
    let mut spea_archive: Vec<Indiv> = Vec::new();

    // generation loop: run only while a full generation fits in the budget
    while ev.remaining() >= pop_size {
        match &d.update_scheme {
            UpdateScheme::Decomposition { .. } => {
                let dec = decomposition.as_mut().unwrap();
                for i in 0..pop_size {
                    let nb = dec.neighbors[i].clone();
                    let pick =
                        |rng: &mut ChaCha12Rng| nb[rng.random_range(0..nb.len())];
                    let (p1, p2) = match var.mating {
                        MatingSelection::Random => (
                            rng.random_range(0..pop_size),
                            rng.random_range(0..pop_size),
                        ),
                        _ => (pick(&mut rng), pick(&mut rng)),
                    };
                    let (mut c1, _) = if rng.random::<f64>() < var.crossover_rate {
                        crossover(&pop[p1].bits, &pop[p2].bits, var.crossover, &mut rng)
                    } else {
                        (pop[p1].bits.clone(), pop[p2].bits.clone())
                    };
                    mutate(&mut c1, var.mutation_rate, &mut rng);
                    let child = ev.evaluate(&c1);
                    dec.observe(&child.f);
                    for &j in &nb {
                        if dec.scalarize(&child.f, &dec.weights[j])
                            < dec.scalarize(&pop[j].f, &dec.weights[j])
                        {
                            pop[j] = child.clone();
                        }
                    }
                }
            }
            UpdateScheme::StrengthDensityArchive => {
                let capacity = archive_capacity.unwrap_or(pop_size);
                // mate from the archive once it exists
                let mating_pool: &[Indiv] = if spea_archive.is_empty() {
                    &pop
                } else {
                    &spea_archive
                };
                let pool_fit = spea2_fitness(mating_pool);
                let offspring = breed(
                    mating_pool,
                    Some(&pool_fit.fitness),
                    &var,
                    pop_size,
                    &mut ev,
                    &mut rng,
                );
                let mut pool: Vec<Indiv> = pop;
                pool.extend(spea_archive);
                pool.extend(offspring);
                let fit = spea2_fitness(&pool);
                let mut nondom: Vec<usize> =
                    (0..pool.len()).filter(|&i| fit.fitness[i] < 1.0).collect();
                if nondom.len() > capacity {
                    spea2_truncate(&mut nondom, &fit, &pool, capacity);
                } else if nondom.len() < capacity {
                    let mut rest: Vec<usize> =
                        (0..pool.len()).filter(|&i| fit.fitness[i] >= 1.0).collect();
                    rest.sort_by(|&a, &b| {
                        fit.fitness[a]
                            .partial_cmp(&fit.fitness[b])
                            .unwrap()
                            .then(lex_then_idx(&pool, a, b))
                    });
                    nondom.extend(rest.into_iter().take(capacity - nondom.len()));
                }
                // population = best pop_size members of the pool
                let mut order: Vec<usize> = (0..pool.len()).collect();
                order.sort_by(|&a, &b| {
                    fit.fitness[a]
                        .partial_cmp(&fit.fitness[b])
                        .unwrap()
                        .then(lex_then_idx(&pool, a, b))
                });
                let keep: Vec<usize> = order.into_iter().take(pop_size).collect();
                spea_archive = nondom.iter().map(|&i| pool[i].clone()).collect();
                pop = keep_indices(pool, keep);
            }
            scheme => {
                let offspring = breed(&pop, None, &var, pop_size, &mut ev, &mut rng);
                let mut pool = pop;
                pool.extend(offspring);
                pop = match scheme {
                    UpdateScheme::NondominatedSortingCrowding => select_nsga2(pool, pop_size),
                    UpdateScheme::ReferenceDirectionNiching => select_reference_niching(
                        pool,
                        pop_size,
                        reference_dirs.as_ref().unwrap(),
                    ),
                    UpdateScheme::HypervolumeContribution => {
                        let (lo, hi) = (ev.range_lo.clone(), ev.range_hi.clone());
                        select_hv_truncation(pool, pop_size, &lo, &hi)
                    }
                    _ => unreachable!(),
                };
            }
        }
    }

    // final Pareto set from the deduplicated all-evaluations archive,
    // filtered in maximization space
    let fs: Vec<Vec<f64>> = ev
        .archive
        .iter()
        .map(|(_, f)| f.iter().map(|v| -v).collect())
        .collect();
    let keep = pareto_indices(&fs);
    let mut solutions: Vec<(BitVector, ObjectiveVector)> = keep
        .into_iter()
        .map(|i| {
            (
                ev.archive[i].0.clone(),
                ObjectiveVector::new(fs[i].clone()).expect("finite objectives"),
            )
        })
        .collect();
    solutions.sort_by(|a, b| {
        a.1.values()
            .partial_cmp(b.1.values())
            .unwrap()
            .then_with(|| a.0.cmp(&b.0))
    });
    Ok(ParetoResult {
        solutions,
        evaluations: ev.count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moea::classics::classic_config;
    use crate::moea::ClassicName;
    use crate::problems::{InstanceSpec, ProblemClass, Split};

    fn mmmp(dim: usize, seed: u64) -> InstanceSpec {
        InstanceSpec::generate(ProblemClass::Mmmp, dim, Split::Train, seed).unwrap()
    }

    #[test]
    fn das_dennis_counts() {
        assert_eq!(das_dennis(2, 4).len(), 5);
        assert_eq!(das_dennis(3, 12).len(), 91);
        assert_eq!(directions_for(3, 100).len(), 100);
        for w in das_dennis(3, 6) {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn budget_exhausts_without_overdraft() {
        let inst = mmmp(8, 1);
        for name in ClassicName::ALL {
            let mut cfg = classic_config(name);
            cfg.assignment
                .insert(wellknown::POP_SIZE.into(), super::super::descriptor::HpValue::Int(10));
            let res = run_moea(&cfg, &inst, 95, None, 7).unwrap();
            assert!(res.evaluations <= 95, "{name:?} overdrew");
            assert!(res.evaluations > 95 - 10, "{name:?} stopped early");
        }
    }

    #[test]
    fn budget_equal_to_pop_runs_no_generation() {
        let inst = mmmp(8, 2);
        let mut cfg = classic_config(ClassicName::Nsga2);
        cfg.assignment
            .insert(wellknown::POP_SIZE.into(), super::super::descriptor::HpValue::Int(16));
        let res = run_moea(&cfg, &inst, 16, None, 3).unwrap();
        assert_eq!(res.evaluations, 16);
        assert!(!res.solutions.is_empty());
    }

    #[test]
    fn budget_below_pop_is_rejected() {
        let inst = mmmp(8, 2);
        let cfg = classic_config(ClassicName::Nsga2);
        assert!(matches!(
            run_moea(&cfg, &inst, 5, None, 3),
            Err(MoeaError::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn deterministic_under_seed() {
        let inst = mmmp(10, 3);
        for name in ClassicName::ALL {
            let cfg = classic_config(name);
            let a = run_moea(&cfg, &inst, 400, None, 11).unwrap();
            let b = run_moea(&cfg, &inst, 400, None, 11).unwrap();
            assert_eq!(a.solutions, b.solutions, "{name:?} not deterministic");
        }
    }

    #[test]
    fn result_is_mutually_nondominated() {
        let inst = mmmp(10, 4);
        for name in ClassicName::ALL {
            let res = run_moea(&classic_config(name), &inst, 500, None, 5).unwrap();
            let vals: Vec<&[f64]> = res.solutions.iter().map(|(_, y)| y.values()).collect();
            for i in 0..vals.len() {
                for j in 0..vals.len() {
                    if i != j {
                        assert!(
                            !crate::metrics::dominates_slice(vals[i], vals[j]),
                            "{name:?} returned dominated point"
                        );
                    }
                }
            }
        }
    }

    /// Brute-force Pareto set of a small instance by enumerating all 2^dim
    /// bit vectors.
    fn exhaustive_front(inst: &InstanceSpec) -> std::collections::BTreeSet<Vec<String>> {
        let dim = inst.as_evaluable().dim();
        let all: Vec<(BitVector, Vec<f64>)> = (0..(1u32 << dim))
            .map(|mask| {
                let bits: Vec<u8> = (0..dim).map(|i| ((mask >> i) & 1) as u8).collect();
                let x = inst.repair(&BitVector::new(bits).unwrap());
                let y = inst.evaluate(&x);
                (x, y.values().to_vec())
            })
            .collect();
        let objs: Vec<Vec<f64>> = all.iter().map(|(_, f)| f.clone()).collect();
        let mut front = std::collections::BTreeSet::new();
        'outer: for (i, f) in objs.iter().enumerate() {
            for g in &objs {
                if crate::metrics::dominates_slice(g, f) {
                    continue 'outer;
                }
            }
            front.insert(f.iter().map(|v| format!("{v:.6}")).collect());
            let _ = i;
        }
        front
    }

    #[test]
    fn recovers_exhaustive_front_on_tiny_instance() {
        let inst = mmmp(4, 9);
        let truth = exhaustive_front(&inst);
        let res = run_moea(&classic_config(ClassicName::Nsga2), &inst, 2000, None, 13).unwrap();
        let found: std::collections::BTreeSet<Vec<String>> = res
            .solutions
            .iter()
            .map(|(_, y)| y.values().iter().map(|v| format!("{v:.6}")).collect())
            .collect();
        assert_eq!(found, truth);
    }

    #[test]
    fn hv_non_decreasing_in_budget() {
        use crate::metrics::{hypervolume, pareto_filter, ReferencePoint};
        let inst = mmmp(10, 6);
        let r = ReferencePoint::new(vec![0.0, 0.0, 0.0]);
        for name in ClassicName::ALL {
            let cfg = classic_config(name);
            let mut last = -1.0;
            for budget in [200usize, 400, 800] {
                let res = run_moea(&cfg, &inst, budget, None, 21).unwrap();
                let objs: Vec<_> = res.solutions.iter().map(|(_, y)| y.clone()).collect();
                let front = pareto_filter(&objs).unwrap();
                let hv = hypervolume(&front, &r).unwrap();
                assert!(
                    hv >= last - 1e-12,
                    "{name:?}: hv {hv} dropped below {last} at budget {budget}"
                );
                last = hv;
            }
        }
    }

    #[test]
    fn sign_adapter_preserves_pareto_set() {
        // the engine minimizes -F internally; the returned set must equal
        // the maximization Pareto set on an exhaustive check
        let inst = mmmp(4, 17);
        let truth = exhaustive_front(&inst);
        let res = run_moea(&classic_config(ClassicName::Moead), &inst, 3000, None, 1).unwrap();
        let found: std::collections::BTreeSet<Vec<String>> = res
            .solutions
            .iter()
            .map(|(_, y)| y.values().iter().map(|v| format!("{v:.6}")).collect())
            .collect();
        assert!(found.is_subset(&truth), "found non-optimal points");
    }
}
