//! Single-source shortest paths over a [`VectorGraph`] and the row/column
//! move count of a grid route.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{CellCoord, GridMap, VectorGraph, INF};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("vertex {0} is out of range for a graph of {1} vertices")]
    BadVertex(usize, usize),
    #[error("no path from vertex {0} to vertex {1}")]
    NoPath(usize, usize),
    #[error("vertex {0} does not label a grid cell")]
    NotGridPath(usize),
    #[error("reverse arc {0} -> {1} is missing")]
    AsymmetricArc(usize, usize),
}

/// Tentative distances from `source`. Unreachable entries hold [`INF`].
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVector {
    pub source: usize,
    pub dist: Vec<f64>,
}

impl DistanceVector {
    pub fn get(&self, v: usize) -> f64 {
        self.dist[v]
    }

    pub fn is_reachable(&self, v: usize) -> bool {
        self.dist[v].is_finite()
    }
}

/// Output of [`dijkstra`]: distances plus a shortest-path tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortestPaths {
    pub distances: DistanceVector,
    pub predecessor: Vec<Option<usize>>,
}

impl ShortestPaths {
    /// Walks the predecessor tree back from `dest`.
    pub fn path_to(&self, dest: usize) -> Result<Path, PlanError> {
        let source = self.distances.source;
        if !self.distances.is_reachable(dest) {
            return Err(PlanError::NoPath(source, dest));
        }
        let mut vertices = vec![dest];
        let mut v = dest;
        while v != source {
            v = self.predecessor[v].ok_or(PlanError::NoPath(source, dest))?;
            vertices.push(v);
        }
        vertices.reverse();
        Ok(Path {
            vertices,
            cost: self.distances.dist[dest],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub vertices: Vec<usize>,
    pub cost: f64,
}

impl Path {
    pub fn source(&self) -> usize {
        self.vertices[0]
    }

    pub fn dest(&self) -> usize {
        *self.vertices.last().expect("paths are never empty")
    }

    /// Number of arcs traversed.
    pub fn hops(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn cells(&self, graph: &VectorGraph) -> Result<Vec<CellCoord>, PlanError> {
        self.vertices
            .iter()
            .map(|&v| graph.cell(v).ok_or(PlanError::NotGridPath(v)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCount {
    pub row_moves: usize,
    pub col_moves: usize,
    pub total: usize,
}

#[derive(PartialEq)]
struct Frontier {
    dist: f64,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, vertex); distances are never NaN
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from `source`.
///
/// The frontier vertex with the smallest tentative distance is settled next
/// and every arc out of it is relaxed with `D[k] = D[j] + arcs[j][k]`
/// whenever that improves `D[k]`. Among equally short routes into a
/// vertex, the predecessor with the lowest index wins (restricted to
/// predecessors settled earlier, so zero-weight arcs cannot form cycles).
pub fn dijkstra(graph: &VectorGraph, source: usize) -> Result<ShortestPaths, PlanError> {
    let n = graph.vertex_count();
    if source >= n {
        return Err(PlanError::BadVertex(source, n));
    }
    let mut dist = vec![INF; n];
    let mut predecessor: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Frontier {
        dist: 0.0,
        vertex: source,
    });

    while let Some(Frontier { dist: d, vertex: j }) = heap.pop() {
        if settled[j] || d > dist[j] {
            continue;
        }
        settled[j] = true;
        for (k, w) in graph.out_arcs(j) {
            if settled[k] {
                continue;
            }
            let candidate = dist[j] + w;
            if candidate < dist[k] {
                dist[k] = candidate;
                predecessor[k] = Some(j);
                heap.push(Frontier {
                    dist: candidate,
                    vertex: k,
                });
            } else if candidate == dist[k] && predecessor[k].is_some_and(|p| j < p) {
                predecessor[k] = Some(j);
            }
        }
    }

    Ok(ShortestPaths {
        distances: DistanceVector { source, dist },
        predecessor,
    })
}

/// Minimum-cost route from `source` to `dest`.
pub fn shortest_path(graph: &VectorGraph, source: usize, dest: usize) -> Result<Path, PlanError> {
    let n = graph.vertex_count();
    if dest >= n {
        return Err(PlanError::BadVertex(dest, n));
    }
    dijkstra(graph, source)?.path_to(dest)
}

/// Counts unit row and column transitions along a grid path.
pub fn grid_count(path: &Path, graph: &VectorGraph, map: &GridMap) -> Result<GridCount, PlanError> {
    let cells = path.cells(graph)?;
    if let Some((i, _)) = cells.iter().enumerate().find(|(_, c)| !map.contains(**c)) {
        return Err(PlanError::NotGridPath(path.vertices[i]));
    }
    let (row_moves, col_moves) = cells.windows(2).fold((0, 0), |(r, c), w| {
        (r + w[0].row.abs_diff(w[1].row), c + w[0].col.abs_diff(w[1].col))
    });
    Ok(GridCount {
        row_moves,
        col_moves,
        total: row_moves + col_moves,
    })
}

/// The same route walked backwards. Fails if any reverse arc is missing.
pub fn reverse_path(path: &Path, graph: &VectorGraph) -> Result<Path, PlanError> {
    let mut vertices = path.vertices.clone();
    vertices.reverse();
    let mut cost = 0.0;
    for w in vertices.windows(2) {
        let a = graph.arc(w[0], w[1]);
        if !a.is_finite() {
            return Err(PlanError::AsymmetricArc(w[0], w[1]));
        }
        cost += a;
    }
    Ok(Path { vertices, cost })
}
