//! Geodesic distances on a sampled manifold, approximated by shortest paths
//! on a symmetric k-nearest-neighbour graph.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;

use crate::design::{cmm_design, CandidateSet, Design, DistanceMetric};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 10;

/// Static kd-tree over the rows of a point matrix.
pub struct KdTree<'a> {
    points: &'a [f64],
    dim: usize,
    /// Point indices permuted so every subtree is a contiguous slice.
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

struct KdNode {
    start: usize,
    end: usize,
    axis: usize,
    split: f64,
    children: Option<(usize, usize)>,
}

const LEAF_SIZE: usize = 16;

impl<'a> KdTree<'a> {
    /// `points` is row-major with `dim` columns.
    pub fn new(points: &'a [f64], dim: usize) -> Self {
        let n = points.len() / dim;
        let mut tree = KdTree {
            points,
            dim,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    fn coord(&self, i: usize, axis: usize) -> f64 {
        self.points[i * self.dim + axis]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(KdNode {
            start,
            end,
            axis: 0,
            split: 0.0,
            children: None,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        // Split on the axis of largest spread.
        let mut axis = 0;
        let mut spread = -1.0;
        for a in 0..self.dim {
            let (lo, hi) = self.order[start..end]
                .iter()
                .map(|&i| self.coord(i, a))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                    (l.min(v), h.max(v))
                });
            if hi - lo > spread {
                spread = hi - lo;
                axis = a;
            }
        }
        let mid = (start + end) / 2;
        let (points, dim) = (self.points, self.dim);
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a * dim + axis].total_cmp(&points[b * dim + axis])
        });
        let split = self.coord(self.order[mid], axis);
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        let node = &mut self.nodes[id];
        node.axis = axis;
        node.split = split;
        node.children = Some((left, right));
        id
    }

    /// The `k` nearest rows to `query` other than `exclude`, ascending by
    /// `(distance, index)`.
    pub fn nearest(&self, query: &[f64], k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut best: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, query, k, exclude, &mut best);
        }
        let mut out: Vec<(usize, f64)> = best
            .into_iter()
            .map(|c| (c.index, c.dist_sq.sqrt()))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }

    fn search(
        &self,
        node: usize,
        query: &[f64],
        k: usize,
        exclude: Option<usize>,
        best: &mut BinaryHeap<Candidate>,
    ) {
        let n = &self.nodes[node];
        match n.children {
            None => {
                for &i in &self.order[n.start..n.end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let p = &self.points[i * self.dim..(i + 1) * self.dim];
                    let dist_sq: f64 = p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                    let cand = Candidate { dist_sq, index: i };
                    if best.len() < k {
                        best.push(cand);
                    } else if cand < *best.peek().unwrap() {
                        best.pop();
                        best.push(cand);
                    }
                }
            }
            Some((left, right)) => {
                let diff = query[n.axis] - n.split;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, k, exclude, best);
                if best.len() < k || diff * diff <= best.peek().unwrap().dist_sq {
                    self.search(far, query, k, exclude, best);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Undirected weighted graph with adjacency lists sorted by neighbour index.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    k: usize,
}

impl NeighborGraph {
    /// Symmetric k-NN graph with Euclidean edge lengths. Fails if the graph
    /// is disconnected.
    pub fn build(points: &Array2<f64>, k: usize) -> Result<Self> {
        let n = points.nrows();
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if n <= k {
            return Err(Error::TooFewPoints {
                needed: k + 1,
                got: n,
            });
        }
        let dim = points.ncols();
        let flat: Vec<f64> = points.iter().copied().collect();
        let tree = KdTree::new(&flat, dim);
        let knn: Vec<Vec<(usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| tree.nearest(&flat[i * dim..(i + 1) * dim], k, Some(i)))
            .collect();
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, nbrs) in knn.into_iter().enumerate() {
            for (j, len) in nbrs {
                adjacency[i].push((j, len));
                adjacency[j].push((i, len));
            }
        }
        let graph = Self::finish(adjacency, k);
        let components = graph.component_count();
        if components > 1 {
            return Err(Error::DisconnectedGraph { k, components });
        }
        Ok(graph)
    }

    /// Graph from an explicit undirected edge list. Edges must have finite
    /// nonnegative lengths. Connectivity is not required.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, len) in edges {
            for v in [i, j] {
                if v >= n {
                    return Err(Error::IndexOutOfRange { index: v, len: n });
                }
            }
            if !(len >= 0.0 && len.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({i}, {j}) has invalid length {len}"
                )));
            }
            adjacency[i].push((j, len));
            adjacency[j].push((i, len));
        }
        Ok(Self::finish(adjacency, 0))
    }

    /// Sort, dedup parallel edges keeping the shortest, and drop self-loops.
    fn finish(mut adjacency: Vec<Vec<(usize, f64)>>, k: usize) -> Self {
        for (i, list) in adjacency.iter_mut().enumerate() {
            list.retain(|&(j, _)| j != i);
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            list.dedup_by_key(|e| e.0);
        }
        NeighborGraph { adjacency, k }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    /// Neighbours per node used at construction; 0 for explicit edge lists.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Each undirected edge once, as `(i, j, length)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, list)| {
            list.iter()
                .filter(move |&&(j, _)| i < j)
                .map(move |&(j, len)| (i, j, len))
        })
    }

    pub fn component_count(&self) -> usize {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
        }
        count
    }

    /// Single-source shortest path lengths; unreachable nodes get `+inf`.
    pub fn shortest_paths(&self, source: usize) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.len()];
        let mut heap = BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(std::cmp::Reverse(Candidate {
            dist_sq: 0.0,
            index: source,
        }));
        while let Some(std::cmp::Reverse(Candidate {
            dist_sq: d,
            index: u,
        })) = heap.pop()
        {
            if d > dist[u] {
                continue;
            }
            for &(v, len) in &self.adjacency[u] {
                let nd = d + len;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(std::cmp::Reverse(Candidate {
                        dist_sq: nd,
                        index: v,
                    }));
                }
            }
        }
        dist
    }

    /// Writes `i,j,length` rows, one per undirected edge. Node `v` is written
    /// as `labels[v]` when labels are given.
    pub fn write_edge_csv(&self, path: &Path, labels: Option<&[usize]>) -> Result<()> {
        let label = |v: usize| labels.map_or(v, |l| l[v]);
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "i,j,length")?;
            for (i, j, len) in self.edges() {
                writeln!(w, "{},{},{len:.16e}", label(i), label(j))?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Row `s` holds the distances from `sources[s]` to every node.
pub fn geodesic_distances(graph: &NeighborGraph, sources: &[usize]) -> Result<Array2<f64>> {
    let n = graph.len();
    if let Some(&bad) = sources.iter().find(|&&s| s >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let rows: Vec<Vec<f64>> = sources
        .par_iter()
        .map(|&s| graph.shortest_paths(s))
        .collect();
    Ok(
        Array2::from_shape_vec((sources.len(), n), rows.into_iter().flatten().collect())
            .expect("shape"),
    )
}

/// Conditional maximin design under the graph geodesic metric on a `k`-NN
/// graph over `points`. Candidates are deduplicated before the graph is built.
pub fn geodesic_cmm(
    points: Array2<f64>,
    p: usize,
    k: usize,
    seed: u64,
    first: Option<usize>,
) -> Result<(CandidateSet, Design)> {
    let cands = CandidateSet::new(points)?;
    let graph = NeighborGraph::build(cands.points(), k)?;
    let cands = cands.with_metric(DistanceMetric::Geodesic(Arc::new(graph)))?;
    let design = cmm_design(&cands, p, seed, first)?;
    Ok((cands, design))
}
