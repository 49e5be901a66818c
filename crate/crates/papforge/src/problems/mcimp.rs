//! Bi-objective complementary influence maximization.
//!
//! Two opinions spread over a directed network: a fixed cooperative seed
//! set holds opinion A, the decision vector selects opinion-B seeds among a
//! candidate set. Spread is a round-based cascade: a live edge from a newly
//! activated node offers its opinion to the target, which adopts with the
//! interaction probability matching its current state. f1 counts B-holders
//! at quiescence, f2 is the negated seeding cost, and at most `k` seeds may
//! be selected.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bits::{BitVector, Evaluable, ObjectiveVector};
use super::graph::DirectedGraph;
use super::ProblemError;
use crate::seeding::{derive_seed, rng_from};

/// Interaction parameters `[q_{A|0}, q_{A|B}, q_{B|0}, q_{B|A}]`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdoptionProbs {
    pub a_free: f64,
    pub a_given_b: f64,
    pub b_free: f64,
    pub b_given_a: f64,
}

impl AdoptionProbs {
    /// The two configurations recommended in the literature.
    pub const RECOMMENDED: [[f64; 4]; 2] = [[0.5, 0.75, 0.5, 0.75], [0.5, 0.25, 0.5, 0.25]];

    pub fn new(q: [f64; 4]) -> Result<Self, ProblemError> {
        if q.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ProblemError::Invalid("adoption probabilities must lie in [0,1]".into()));
        }
        Ok(Self {
            a_free: q[0],
            a_given_b: q[1],
            b_free: q[2],
            b_given_a: q[3],
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McimpInstance {
    graph: DirectedGraph,
    /// Candidate node ids, one per decision variable.
    candidates: Vec<u32>,
    seed_set_a: Vec<u32>,
    q: AdoptionProbs,
    costs: Vec<f64>,
    k: usize,
    n_sim: usize,
    sim_seed: u64,
    /// Per-simulation live-edge index lists into `graph.edges()`.
    #[serde(skip)]
    live_edges: Vec<Vec<u32>>,
}

impl McimpInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        graph: DirectedGraph,
        candidates: Vec<u32>,
        seed_set_a: Vec<u32>,
        q: AdoptionProbs,
        costs: Vec<f64>,
        k: usize,
        n_sim: usize,
        sim_seed: u64,
    ) -> Result<Self, ProblemError> {
        let dim = candidates.len();
        if dim == 0 || costs.len() != dim {
            return Err(ProblemError::Invalid("candidate and cost arrays must match".into()));
        }
        let mut distinct = candidates.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != dim {
            return Err(ProblemError::Invalid("candidate nodes must be distinct".into()));
        }
        if candidates.iter().any(|&c| c as usize >= graph.n_nodes()) {
            return Err(ProblemError::Invalid("candidate node missing from graph".into()));
        }
        if k == 0 || k > dim {
            return Err(ProblemError::Invalid(format!("seed budget k = {k} must lie in 1..=dim")));
        }
        if n_sim == 0 {
            return Err(ProblemError::Invalid("n_sim must be positive".into()));
        }
        let mut inst = Self {
            graph,
            candidates,
            seed_set_a,
            q,
            costs,
            k,
            n_sim,
            sim_seed,
            live_edges: Vec::new(),
        };
        inst.materialize();
        Ok(inst)
    }

    /// Builds an instance on `graph` with the default conventions: the
    /// candidate set holds the `dim` highest-out-degree nodes (ties by id),
    /// the A-seed set is a random 5% of nodes (capped at 50) outside the
    /// candidates, costs are `lambda_i * out_degree` with `lambda_i` in
    /// [0.8, 1.2], and `k = ceil(dim / 4)`.
    pub fn generate(
        graph: DirectedGraph,
        dim: usize,
        n_sim: usize,
        rng: &mut impl rand::Rng,
    ) -> Result<Self, ProblemError> {
        if dim > graph.n_nodes() {
            return Err(ProblemError::Invalid(format!(
                "dim {dim} exceeds graph size {}",
                graph.n_nodes()
            )));
        }
        let mut by_degree: Vec<u32> = (0..graph.n_nodes() as u32).collect();
        by_degree.sort_by_key(|&u| (std::cmp::Reverse(graph.out_degree(u)), u));
        let candidates: Vec<u32> = by_degree[..dim].to_vec();

        let sa_size = 50.min((graph.n_nodes() as f64 * 0.05).ceil() as usize).max(1);
        let mut pool: Vec<u32> = (0..graph.n_nodes() as u32)
            .filter(|u| !candidates.contains(u))
            .collect();
        let mut seed_set_a = Vec::with_capacity(sa_size);
        for _ in 0..sa_size.min(pool.len()) {
            let i = rng.random_range(0..pool.len());
            seed_set_a.push(pool.swap_remove(i));
        }
        seed_set_a.sort_unstable();

        let q = AdoptionProbs::new(
            AdoptionProbs::RECOMMENDED[rng.random_range(0..AdoptionProbs::RECOMMENDED.len())],
        )?;
        let costs = candidates
            .iter()
            .map(|&c| rng.random_range(0.8..=1.2) * f64::from(graph.out_degree(c).max(1)))
            .collect();
        let k = dim.div_ceil(4);
        let sim_seed: u64 = rng.random();
        Self::new(graph, candidates, seed_set_a, q, costs, k, n_sim, sim_seed)
    }

    /// Restores pre-sampled live edges after deserialization.
    pub fn rehydrate(&mut self) {
        self.graph.rehydrate();
        if self.live_edges.is_empty() {
            self.materialize();
        }
    }

    /// Draws, for every simulation, which edges fire. Edge liveness is
    /// independent of opinions, so it can be fixed up front; adoption coins
    /// are drawn on demand from a per-simulation stream.
    fn materialize(&mut self) {
        self.live_edges = (0..self.n_sim)
            .map(|s| {
                let mut rng = rng_from(derive_seed(self.sim_seed, "live-edges", s as u64));
                self.graph
                    .edges()
                    .iter()
                    .enumerate()
                    .filter(|(_, &(_, _, p))| rng.random::<f64>() < p)
                    .map(|(i, _)| i as u32)
                    .collect()
            })
            .collect();
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn candidates(&self) -> &[u32] {
        &self.candidates
    }

    pub fn seed_budget(&self) -> usize {
        self.k
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn n_sim(&self) -> usize {
        self.n_sim
    }

    pub fn is_feasible(&self, x: &BitVector) -> bool {
        x.count_ones() <= self.k
    }

    /// Mean number of B-activated nodes over the pre-seeded cascades.
    pub fn simulate_influence(&self, x: &BitVector) -> f64 {
        assert_eq!(x.dim(), self.candidates.len(), "dimension mismatch");
        let total: f64 = (0..self.n_sim).map(|s| self.cascade(x, s) as f64).sum();
        total / self.n_sim as f64
    }

    /// One cascade on the live-edge subgraph of simulation `s`; returns the
    /// number of B-holders at quiescence.
    fn cascade(&self, x: &BitVector, s: usize) -> usize {
        #[derive(Clone, Copy, PartialEq)]
        enum Holds {
            None,
            A,
            B,
            Both,
        }
        let n = self.graph.n_nodes();
        let mut state = vec![Holds::None; n];
        // adoption coins consumed in deterministic frontier order
        let mut coin = rng_from(derive_seed(self.sim_seed, "adoption", s as u64));

        let mut live = vec![false; self.graph.n_edges()];
        for &e in &self.live_edges[s] {
            live[e as usize] = true;
        }

        // (node, opinion-is-b) frontier entries
        let mut frontier: Vec<(u32, bool)> = Vec::new();
        for &a in &self.seed_set_a {
            state[a as usize] = Holds::A;
            frontier.push((a, false));
        }
        for (i, &c) in self.candidates.iter().enumerate() {
            if x.get(i) == 1 {
                state[c as usize] = match state[c as usize] {
                    Holds::A => Holds::Both,
                    _ => Holds::B,
                };
                frontier.push((c, true));
            }
        }

        while !frontier.is_empty() {
            let mut next: Vec<(u32, bool)> = Vec::new();
            for &(u, is_b) in &frontier {
                for (&(v, _), &ei) in self.graph.out_edges(u).iter().zip(self.graph.out_edge_ids(u)) {
                    if !live[ei as usize] {
                        continue;
                    }
                    let v = v as usize;
                    let adopt_p = match (is_b, state[v]) {
                        (true, Holds::None) => self.q.b_free,
                        (true, Holds::A) => self.q.b_given_a,
                        (false, Holds::None) => self.q.a_free,
                        (false, Holds::B) => self.q.a_given_b,
                        _ => continue, // already holds this opinion
                    };
                    if coin.random::<f64>() < adopt_p {
                        state[v] = match (is_b, state[v]) {
                            (true, Holds::None) => Holds::B,
                            (true, Holds::A) => Holds::Both,
                            (false, Holds::None) => Holds::A,
                            (false, Holds::B) => Holds::Both,
                            (_, other) => other,
                        };
                        next.push((v as u32, is_b));
                    }
                }
            }
            frontier = next;
        }

        state
            .iter()
            .filter(|h| matches!(h, Holds::B | Holds::Both))
            .count()
    }
}

impl Evaluable for McimpInstance {
    fn dim(&self) -> usize {
        self.candidates.len()
    }

    fn n_obj(&self) -> usize {
        2
    }

    /// Keeps only the first `k` selected seeds in index order.
    fn repair(&self, x: &BitVector) -> BitVector {
        assert_eq!(x.dim(), self.dim(), "dimension mismatch");
        let mut out = x.clone();
        let mut kept = 0usize;
        for i in 0..out.dim() {
            if out.get(i) == 1 {
                if kept == self.k {
                    out.set(i, 0);
                } else {
                    kept += 1;
                }
            }
        }
        out
    }

    fn evaluate(&self, x: &BitVector) -> ObjectiveVector {
        assert_eq!(x.dim(), self.dim(), "dimension mismatch");
        let f1 = self.simulate_influence(x);
        let f2 = -x
            .bits()
            .iter()
            .zip(&self.costs)
            .filter(|(&b, _)| b == 1)
            .map(|(_, &c)| c)
            .sum::<f64>();
        ObjectiveVector::new(vec![f1, f2]).expect("mcimp objectives are finite")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;

    fn path_graph() -> DirectedGraph {
        // a -> b -> c with certain propagation
        DirectedGraph::from_edges(vec![(0, 1, Some(1.0)), (1, 2, Some(1.0))]).unwrap()
    }

    #[test]
    fn no_seeds_no_spread_when_b_never_adopts() {
        let q = AdoptionProbs::new([0.5, 0.75, 0.0, 0.0]).unwrap();
        let inst = McimpInstance::new(
            path_graph(),
            vec![0, 1],
            vec![],
            q,
            vec![1.0, 1.0],
            1,
            8,
            3,
        )
        .unwrap();
        assert_eq!(inst.simulate_influence(&BitVector::zeros(2)), 0.0);
    }

    #[test]
    fn certain_cascade_covers_path() {
        let q = AdoptionProbs::new([0.0, 0.0, 1.0, 1.0]).unwrap();
        let inst = McimpInstance::new(
            path_graph(),
            vec![0, 1],
            vec![],
            q,
            vec![1.0, 1.0],
            1,
            4,
            9,
        )
        .unwrap();
        let mut x = BitVector::zeros(2);
        x.set(0, 1);
        assert_eq!(inst.simulate_influence(&x), 3.0, "a seeds b seeds c");
    }

    #[test]
    fn isolated_seed_counts_itself() {
        let g = DirectedGraph::from_edges(vec![(1, 2, Some(1.0))]).unwrap();
        let q = AdoptionProbs::new([0.5, 0.5, 0.5, 0.5]).unwrap();
        // candidate 0 has no outgoing live edges
        let inst = McimpInstance::new(g, vec![0, 1], vec![], q, vec![1.0, 1.0], 1, 4, 1).unwrap();
        let mut x = BitVector::zeros(2);
        x.set(0, 1);
        assert!(inst.simulate_influence(&x) >= 1.0);
    }

    #[test]
    fn repair_keeps_first_k_seeds() {
        let mut rng = rng_from(6);
        let g = DirectedGraph::preferential_attachment(40, 2, &mut rng);
        let inst = McimpInstance::generate(g, 5, 8, &mut rng).unwrap();
        assert_eq!(inst.seed_budget(), 2);
        let repaired = inst.repair(&BitVector::parse("11101").unwrap());
        assert_eq!(repaired, BitVector::parse("11000").unwrap());
        assert_eq!(inst.repair(&repaired), repaired);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let mut rng = rng_from(10);
        let g = DirectedGraph::preferential_attachment(60, 2, &mut rng);
        let inst = McimpInstance::generate(g, 8, 10, &mut rng).unwrap();
        let x = inst.repair(&BitVector::random(8, &mut rng));
        assert_eq!(inst.evaluate(&x), inst.evaluate(&x));
    }
}
