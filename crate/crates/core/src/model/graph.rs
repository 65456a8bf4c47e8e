use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Simple undirected graph with sorted adjacency lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
    max_degree: usize,
}

impl Graph {
    /// Builds a graph on `n` nodes. Duplicate edges are merged; self-loops and
    /// out-of-range endpoints are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(invalid(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(invalid(format!("self-loop at node {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Graph {
            adjacency,
            edge_count,
            max_degree,
        })
    }

    /// `n` isolated nodes.
    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
            edge_count: 0,
            max_degree: 0,
        }
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|v| (v - 1, v))).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(invalid(format!("cycle needs at least 3 nodes, got {n}")));
        }
        Self::from_edges(n, (0..n).map(|v| (v, (v + 1) % n)))
    }

    /// `width x height` grid, node `(x, y)` has id `y * width + x`.
    pub fn grid(width: usize, height: usize) -> Self {
        let id = |x: usize, y: usize| y * width + x;
        let mut edges = Vec::new();
        for y in 0..height {
            for x in 0..width {
                if x + 1 < width {
                    edges.push((id(x, y), id(x + 1, y)));
                }
                if y + 1 < height {
                    edges.push((id(x, y), id(x, y + 1)));
                }
            }
        }
        Self::from_edges(width * height, edges).expect("grid edges are valid")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Self::from_edges(n, edges).expect("complete graph edges are valid")
    }

    /// Star with center 0 and `leaves` leaves.
    pub fn star(leaves: usize) -> Self {
        Self::from_edges(leaves + 1, (1..=leaves).map(|v| (0, v))).expect("star edges are valid")
    }

    /// Uniform-ish random `degree`-regular simple graph from the pairing model,
    /// retrying until the pairing has no loops or multi-edges.
    pub fn random_regular(n: usize, degree: usize, seed: u64) -> Result<Self> {
        if degree >= n.max(1) && !(n == 0 && degree == 0) {
            return Err(invalid(format!("degree {degree} must be below n = {n}")));
        }
        if !(n * degree).is_multiple_of(2) {
            return Err(invalid(format!("n * degree must be even (n = {n}, degree = {degree})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, degree)).collect();
        const MAX_ATTEMPTS: usize = 100_000;
        'attempt: for _ in 0..MAX_ATTEMPTS {
            stubs.shuffle(&mut rng);
            let mut adjacency = vec![Vec::with_capacity(degree); n];
            for pair in stubs.chunks_exact(2) {
                let (u, v) = (pair[0], pair[1]);
                if u == v || adjacency[u].contains(&v) {
                    continue 'attempt;
                }
                adjacency[u].push(v);
                adjacency[v].push(u);
            }
            for list in &mut adjacency {
                list.sort_unstable();
            }
            return Ok(Graph {
                adjacency,
                edge_count: n * degree / 2,
                max_degree: if n == 0 { 0 } else { degree },
            });
        }
        Err(Error::Unsupported(format!(
            "no simple {degree}-regular pairing on {n} nodes after {MAX_ATTEMPTS} attempts"
        )))
    }

    /// Parses an edge list: one `u v` pair per line, 0-indexed. Blank lines and
    /// lines starting with `#` are skipped. The node count is `n` when given,
    /// otherwise one past the largest index seen.
    pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<usize> {
                let tok = parts.next().ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    msg: "expected two node ids".into(),
                })?;
                tok.parse().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    msg: format!("bad node id {tok:?}"),
                })
            };
            let (u, v) = (next()?, next()?);
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "trailing tokens after edge".into(),
                });
            }
            edges.push((u, v));
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        let n = match n {
            Some(n) if n < inferred => {
                return Err(invalid(format!("edge list references node {} but n = {n}", inferred - 1)))
            }
            Some(n) => n,
            None => inferred,
        };
        Self::from_edges(n, edges)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    /// Position of `u` in the sorted neighbor list of `v`.
    pub fn neighbor_slot(&self, v: usize, u: usize) -> Option<usize> {
        self.adjacency[v].binary_search(&u).ok()
    }

    /// Undirected edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Greedy proper coloring in node order, if `q` colors suffice.
    pub fn greedy_coloring(&self, q: usize) -> Option<Vec<u32>> {
        let mut colors: Vec<Option<u32>> = vec![None; self.node_count()];
        let mut used = vec![false; q];
        for v in 0..self.node_count() {
            used.iter_mut().for_each(|b| *b = false);
            for &u in self.neighbors(v) {
                if let Some(c) = colors[u] {
                    used[c as usize] = true;
                }
            }
            let c = used.iter().position(|&b| !b)?;
            colors[v] = Some(c as u32);
        }
        Some(colors.into_iter().map(|c| c.expect("assigned")).collect())
    }
}
