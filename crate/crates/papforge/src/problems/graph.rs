//! Directed graphs for the influence-maximization class: an edge-list
//! loader and a preferential-attachment generator standing in for the
//! social-network datasets.

use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ProblemError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectedGraph {
    n_nodes: usize,
    /// (source, target, propagation probability)
    edges: Vec<(u32, u32, f64)>,
    #[serde(skip)]
    cache: AdjacencyCache,
}

#[derive(Clone, Debug, Default)]
struct AdjacencyCache {
    /// Out-edges as (target, probability), indexed by source.
    out: Vec<Vec<(u32, f64)>>,
    /// Global edge ids, parallel to `out`.
    out_ids: Vec<Vec<u32>>,
    out_degree: Vec<u32>,
    in_degree: Vec<u32>,
}

impl DirectedGraph {
    /// Builds a graph from an edge list. Edges with probability `None`
    /// default to the weighted-cascade convention `1 / in-degree(target)`.
    pub fn from_edges(edges: Vec<(u32, u32, Option<f64>)>) -> Result<Self, ProblemError> {
        if edges.is_empty() {
            return Err(ProblemError::Invalid("graph has no edges".into()));
        }
        let n_nodes = edges
            .iter()
            .map(|&(u, v, _)| u.max(v) as usize + 1)
            .max()
            .unwrap();
        let mut in_degree = vec![0u32; n_nodes];
        for &(_, v, _) in &edges {
            in_degree[v as usize] += 1;
        }
        let resolved = edges
            .into_iter()
            .map(|(u, v, p)| {
                let p = p.unwrap_or_else(|| 1.0 / f64::from(in_degree[v as usize]));
                if !(0.0..=1.0).contains(&p) {
                    return Err(ProblemError::Invalid(format!(
                        "edge probability {p} out of [0,1]"
                    )));
                }
                Ok((u, v, p))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut g = Self {
            n_nodes,
            edges: resolved,
            cache: AdjacencyCache::default(),
        };
        g.build_cache();
        Ok(g)
    }

    /// Parses a whitespace-separated directed edge list with an optional
    /// third column holding the edge probability.
    pub fn parse_edge_list(reader: impl Read) -> Result<Self, ProblemError> {
        let mut edges = Vec::new();
        for (lineno, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| ProblemError::Io(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let missing = |what: &str| {
                ProblemError::Invalid(format!("edge list line {}: missing {what}", lineno + 1))
            };
            let u: u32 = it
                .next()
                .ok_or_else(|| missing("source"))?
                .parse()
                .map_err(|_| ProblemError::Invalid(format!("line {}: bad source", lineno + 1)))?;
            let v: u32 = it
                .next()
                .ok_or_else(|| missing("target"))?
                .parse()
                .map_err(|_| ProblemError::Invalid(format!("line {}: bad target", lineno + 1)))?;
            let p = match it.next() {
                Some(tok) => Some(tok.parse::<f64>().map_err(|_| {
                    ProblemError::Invalid(format!("line {}: bad probability", lineno + 1))
                })?),
                None => None,
            };
            edges.push((u, v, p));
        }
        Self::from_edges(edges)
    }

    pub fn load_edge_list(path: &Path) -> Result<Self, ProblemError> {
        let file = std::fs::File::open(path).map_err(|e| ProblemError::Io(e.to_string()))?;
        Self::parse_edge_list(file)
    }

    /// Generates a directed preferential-attachment graph: each new node
    /// attaches `m` out-edges to targets drawn proportionally to current
    /// total degree (plus one).
    pub fn preferential_attachment(n_nodes: usize, m: usize, rng: &mut impl rand::Rng) -> Self {
        assert!(n_nodes >= m + 1 && m >= 1);
        let mut edges: Vec<(u32, u32, Option<f64>)> = Vec::with_capacity(n_nodes * m);
        let mut degree = vec![1u64; n_nodes];
        // seed clique among the first m+1 nodes
        for u in 0..=m {
            for v in 0..=m {
                if u != v {
                    edges.push((u as u32, v as u32, None));
                    degree[u] += 1;
                    degree[v] += 1;
                }
            }
        }
        for u in (m + 1)..n_nodes {
            let mut chosen: Vec<usize> = Vec::with_capacity(m);
            while chosen.len() < m {
                let total: u64 = (0..u).filter(|v| !chosen.contains(v)).map(|v| degree[v]).sum();
                let mut t = rng.random_range(0..total);
                let v = (0..u)
                    .filter(|v| !chosen.contains(v))
                    .find(|&v| {
                        if t < degree[v] {
                            true
                        } else {
                            t -= degree[v];
                            false
                        }
                    })
                    .expect("cumulative walk stays in range");
                chosen.push(v);
                degree[v] += 1;
                degree[u] += 1;
            }
            for v in chosen {
                edges.push((u as u32, v as u32, None));
                // give some nodes reciprocal reach so influence can spread
                if rng.random::<f64>() < 0.3 {
                    edges.push((v as u32, u as u32, None));
                }
            }
        }
        Self::from_edges(edges).expect("generator yields a valid edge list")
    }

    /// Restores adjacency caches after deserialization.
    pub fn rehydrate(&mut self) {
        if self.cache.out.is_empty() {
            self.build_cache();
        }
    }

    fn build_cache(&mut self) {
        let mut out = vec![Vec::new(); self.n_nodes];
        let mut out_ids = vec![Vec::new(); self.n_nodes];
        let mut out_degree = vec![0u32; self.n_nodes];
        let mut in_degree = vec![0u32; self.n_nodes];
        for (i, &(u, v, p)) in self.edges.iter().enumerate() {
            out[u as usize].push((v, p));
            out_ids[u as usize].push(i as u32);
            out_degree[u as usize] += 1;
            in_degree[v as usize] += 1;
        }
        self.cache = AdjacencyCache {
            out,
            out_ids,
            out_degree,
            in_degree,
        };
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn out_edges(&self, u: u32) -> &[(u32, f64)] {
        &self.cache.out[u as usize]
    }

    /// Global edge ids parallel to [`Self::out_edges`].
    pub fn out_edge_ids(&self, u: u32) -> &[u32] {
        &self.cache.out_ids[u as usize]
    }

    pub fn out_degree(&self, u: u32) -> u32 {
        self.cache.out_degree[u as usize]
    }

    pub fn in_degree(&self, u: u32) -> u32 {
        self.cache.in_degree[u as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from;

    #[test]
    fn parses_optional_probability_column() {
        let text = "0 1 0.5\n1 2\n# comment\n2 0 1.0\n";
        let g = DirectedGraph::parse_edge_list(text.as_bytes()).unwrap();
        assert_eq!(g.n_nodes(), 3);
        assert_eq!(g.n_edges(), 3);
        assert_eq!(g.out_edges(0), &[(1, 0.5)]);
        // node 2 has in-degree 1, so the default probability is 1.0
        assert_eq!(g.out_edges(1), &[(2, 1.0)]);
    }

    #[test]
    fn preferential_attachment_shape() {
        let mut rng = rng_from(4);
        let g = DirectedGraph::preferential_attachment(200, 3, &mut rng);
        assert_eq!(g.n_nodes(), 200);
        assert!(g.n_edges() >= 3 * (200 - 4));
        let max_out = (0..200).map(|u| g.out_degree(u)).max().unwrap();
        assert!(max_out >= 4, "hubs should emerge");
    }

    #[test]
    fn rejects_bad_probability() {
        assert!(DirectedGraph::parse_edge_list("0 1 1.5".as_bytes()).is_err());
        assert!(DirectedGraph::parse_edge_list("".as_bytes()).is_err());
    }
}
