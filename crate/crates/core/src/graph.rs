//! Graph and SK-instance representations.

use std::collections::HashMap;
use std::io::Read;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

/// Undirected simple graph over contiguous node ids `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

/// What [`parse_edge_list`] threw away.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedEdges {
    pub duplicates: usize,
    pub self_loops: usize,
}

impl Graph {
    /// Builds a graph from raw pairs, dropping self-loops and duplicates.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let (graph, _) = Self::build(n, pairs)?;
        Ok(graph)
    }

    fn build(
        n: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<(Self, DroppedEdges)> {
        let mut dropped = DroppedEdges::default();
        let mut edges = Vec::new();
        for (u, v) in pairs {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            if u == v {
                dropped.self_loops += 1;
                continue;
            }
            edges.push((u.min(v), u.max(v)));
        }
        let before = edges.len();
        edges.sort_unstable();
        edges.dedup();
        dropped.duplicates = before - edges.len();

        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let degrees = adjacency.iter().map(Vec::len).collect();
        Ok((
            Graph {
                n,
                edges,
                adjacency,
                degrees,
            },
            dropped,
        ))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degrees[node]
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Erdős–Rényi G(n, p) draw, used for randomized test suites.
    pub fn random(n: usize, p: f64, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Purpose::Instance, n as u64, 0x6e72);
        let mut pairs = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < p {
                    pairs.push((u, v));
                }
            }
        }
        Graph::from_edges(n, pairs).expect("generated ids are in range")
    }
}

/// Parses an edge list, remapping ids to `0..n` by first appearance.
///
/// Lines starting with `#` or `%` and blank lines are skipped. Tokens past
/// the second on a line (weights, timestamps) are ignored. A Matrix Market
/// banner (`%%MatrixMarket`) causes the size line after it to be skipped.
pub fn parse_edge_list(text: &str) -> Result<(Graph, DroppedEdges)> {
    let mut ids: HashMap<i64, usize> = HashMap::new();
    let mut order = 0usize;
    let mut pairs = Vec::new();
    let mut skip_size_line = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with("%%MatrixMarket") {
            skip_size_line = true;
            continue;
        }
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        if skip_size_line {
            skip_size_line = false;
            continue;
        }
        let mut tokens = line.split(|c: char| c.is_whitespace() || c == ',');
        let mut next_id = |what: &str| -> Result<i64> {
            let tok = tokens
                .by_ref()
                .find(|t| !t.is_empty())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("missing {what} node id"),
                })?;
            tok.parse::<i64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("malformed node id {tok:?}"),
            })
        };
        let u = next_id("first")?;
        let v = next_id("second")?;
        let mut remap = |raw: i64| {
            *ids.entry(raw).or_insert_with(|| {
                order += 1;
                order - 1
            })
        };
        let (a, b) = (remap(u), remap(v));
        pairs.push((a, b));
    }

    let (graph, dropped) = Graph::build(order, pairs)?;
    if graph.edge_count() == 0 {
        return Err(Error::EmptyGraph);
    }
    if dropped.duplicates + dropped.self_loops > 0 {
        log::warn!(
            "edge list: dropped {} duplicate edge(s) and {} self-loop(s)",
            dropped.duplicates,
            dropped.self_loops
        );
    }
    Ok((graph, dropped))
}

/// Reads an edge list from any byte stream. Accepts LF and CRLF endings.
pub fn load_edge_list(mut reader: impl Read) -> Result<Graph> {
    let mut buf = Vec::new();
    reader
        .read_to_end(&mut buf)
        .map_err(|e| Error::io("<edge list>", e))?;
    let text = String::from_utf8(buf).map_err(|e| Error::Parse {
        line: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    parse_edge_list(&text).map(|(g, _)| g)
}

pub fn load_edge_list_file(path: &std::path::Path) -> Result<Graph> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_edge_list(std::io::BufReader::new(file))
}

const KARATE: &str = include_str!("../data/karate.edges");

/// Zachary's karate club network (34 nodes, 78 edges).
pub fn karate_club() -> Graph {
    parse_edge_list(KARATE).expect("bundled dataset parses").0
}

/// Looks up a bundled dataset by name.
pub fn dataset(name: &str) -> Option<Graph> {
    match name.to_ascii_lowercase().as_str() {
        "karate" | "karate-club" => Some(karate_club()),
        _ => None,
    }
}

/// Returns `V \ s`, sorted.
pub fn complement_set(graph: &Graph, subset: &[usize]) -> Result<Vec<usize>> {
    let mut member = vec![false; graph.n()];
    for &id in subset {
        if id >= graph.n() {
            return Err(Error::NodeOutOfRange { id, n: graph.n() });
        }
        member[id] = true;
    }
    Ok((0..graph.n()).filter(|&i| !member[i]).collect())
}

/// Fully connected Ising instance with couplings `J_ij`, `i < j`.
///
/// Couplings are stored packed: row `i` holds `J_i,i+1 .. J_i,n-1`. A dense
/// symmetric copy with zero diagonal backs the batched field products.
#[derive(Debug, Clone, PartialEq)]
pub struct SkInstance {
    n: usize,
    couplings: Vec<f64>,
    dense: Array2<f64>,
}

impl SkInstance {
    pub fn from_couplings(n: usize, couplings: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!("SK instance needs n >= 2, got {n}")));
        }
        let expected = n * (n - 1) / 2;
        if couplings.len() != expected {
            return Err(Error::InvalidSize(format!(
                "expected {expected} couplings for n = {n}, got {}",
                couplings.len()
            )));
        }
        if couplings.iter().any(|j| !j.is_finite()) {
            return Err(Error::InvalidSize("non-finite coupling".into()));
        }
        let mut dense = Array2::zeros((n, n));
        let mut t = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                dense[[i, j]] = couplings[t];
                dense[[j, i]] = couplings[t];
                t += 1;
            }
        }
        Ok(SkInstance { n, couplings, dense })
    }

    /// Builds an instance from a callback `J(i, j)` evaluated for `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut couplings = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                couplings.push(f(i, j));
            }
        }
        Self::from_couplings(n, couplings)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    /// Full symmetric `n × n` coupling matrix.
    pub fn dense(&self) -> &Array2<f64> {
        &self.dense
    }

    #[inline]
    fn row_offset(&self, i: usize) -> usize {
        i * self.n - i * (i + 1) / 2
    }

    /// `J_i,j` for `j > i`, contiguous.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let start = self.row_offset(i);
        &self.couplings[start..start + (self.n - i - 1)]
    }

    /// Symmetric accessor; zero on the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.couplings[self.row_offset(i) + (j - i - 1)],
            std::cmp::Ordering::Greater => self.couplings[self.row_offset(j) + (i - j - 1)],
        }
    }
}

/// Draws `J_ij ~ Normal(0, 1/n)` independently for every pair.
pub fn generate_sk(n: usize, seed: u64) -> Result<SkInstance> {
    if n < 2 {
        return Err(Error::InvalidSize(format!("SK instance needs n >= 2, got {n}")));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let mut rng = rng::stream(seed, Purpose::Instance, n as u64, 0x736b);
    let couplings = (0..n * (n - 1) / 2)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    SkInstance::from_couplings(n, couplings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_graph() {
        let (g, dropped) = parse_edge_list("0 1\n1 2").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.degrees(), &[1, 2, 1]);
        assert_eq!(dropped, DroppedEdges::default());
    }

    #[test]
    fn duplicates_and_self_loops_dropped() {
        let (g, dropped) = parse_edge_list("0 1\n0 1\n2 2").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(dropped.duplicates, 1);
        assert_eq!(dropped.self_loops, 1);
    }

    #[test]
    fn reversed_duplicate_is_a_duplicate() {
        let (g, dropped) = parse_edge_list("0 1\n1 0").unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(dropped.duplicates, 1);
    }

    #[test]
    fn relabels_by_first_appearance() {
        let (g, _) = parse_edge_list("# header\n\n10 7\r\n7 3\n% note\n3 10\n").unwrap();
        assert_eq!(g.n(), 3);
        // 10 -> 0, 7 -> 1, 3 -> 2
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn malformed_token_reports_line() {
        match parse_edge_list("0 1\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_edge_list("0 1\n5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn empty_graph_rejected() {
        assert!(matches!(parse_edge_list("# nothing\n"), Err(Error::EmptyGraph)));
        assert!(matches!(parse_edge_list("3 3\n"), Err(Error::EmptyGraph)));
    }

    #[test]
    fn matrix_market_size_line_skipped() {
        let text = "%%MatrixMarket matrix coordinate pattern symmetric\n% c\n3 3 2\n1 2\n2 3\n";
        let (g, _) = parse_edge_list(text).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn karate_shape() {
        let g = karate_club();
        assert_eq!(g.n(), 34);
        assert_eq!(g.edge_count(), 78);
        assert_eq!(g.degrees().iter().sum::<usize>(), 2 * 78);
    }

    #[test]
    fn complement() {
        let tri = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(complement_set(&tri, &[0]).unwrap(), vec![1, 2]);
        assert!(complement_set(&tri, &[0, 1, 2]).unwrap().is_empty());
        assert_eq!(complement_set(&tri, &[]).unwrap(), vec![0, 1, 2]);
        assert!(matches!(
            complement_set(&tri, &[3]),
            Err(Error::NodeOutOfRange { id: 3, n: 3 })
        ));
    }

    #[test]
    fn sk_structure() {
        let sk = generate_sk(2, 99).unwrap();
        assert_eq!(sk.couplings().len(), 1);
        assert_eq!(sk.get(0, 1), sk.get(1, 0));
        assert_eq!(sk.get(1, 1), 0.0);
        assert!(generate_sk(1, 0).is_err());
        assert_eq!(generate_sk(64, 5).unwrap(), generate_sk(64, 5).unwrap());
        assert_ne!(generate_sk(64, 5).unwrap(), generate_sk(64, 6).unwrap());
    }

    #[test]
    fn sk_packed_indexing() {
        let sk = SkInstance::from_fn(5, |i, j| (10 * i + j) as f64).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 0.0 } else { (10 * i.min(j) + i.max(j)) as f64 };
                assert_eq!(sk.get(i, j), expect);
            }
            assert_eq!(sk.row(i).len(), 4 - i);
        }
    }
}
