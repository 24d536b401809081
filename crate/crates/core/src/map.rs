//! Floor representation: an occupancy grid and the weighted adjacency
//! matrix the planner works on.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Marker for a missing arc. Addition with it saturates.
pub const INF: f64 = f64::INFINITY;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapError {
    #[error("grid must have at least two cells, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("cell size must be a positive finite number of meters, got {0}")]
    BadCellSize(f64),
    #[error("cell {0} lies outside the {1}x{2} grid")]
    OutOfBounds(CellCoord, usize, usize),
    #[error("cell {0} is listed as both a static and a dynamic obstacle")]
    Overlap(CellCoord),
    #[error("map has no traversable cell")]
    EmptyMap,
    #[error("no vertex labelled {0}")]
    UnknownLabel(VertexLabel),
    #[error("arc ({0}, {1}) has invalid weight {2}")]
    BadWeight(usize, usize, f64),
    #[error("adjacency matrix is not square or does not match the label count")]
    BadShape,
    #[error("duplicate vertex label {0}")]
    DuplicateLabel(VertexLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellCoord {
    pub row: usize,
    pub col: usize,
}

impl CellCoord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    /// Manhattan distance in cells.
    pub fn manhattan(self, other: CellCoord) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    pub fn is_adjacent(self, other: CellCoord) -> bool {
        self.manhattan(other) == 1
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

impl From<(usize, usize)> for CellCoord {
    fn from((row, col): (usize, usize)) -> Self {
        Self { row, col }
    }
}

/// A rectangular floor plan.
///
/// `obstacles` are known to the planner up front. `dynamic_truth` cells are
/// physically occupied at run time but only become visible through the
/// detector.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMap {
    rows: usize,
    cols: usize,
    cell_size: f64,
    obstacles: BTreeSet<CellCoord>,
    dynamic_truth: BTreeSet<CellCoord>,
}

impl GridMap {
    pub fn new(
        rows: usize,
        cols: usize,
        cell_size: f64,
        obstacles: impl IntoIterator<Item = CellCoord>,
        dynamic_truth: impl IntoIterator<Item = CellCoord>,
    ) -> Result<Self, MapError> {
        if rows == 0 || cols == 0 || rows * cols < 2 {
            return Err(MapError::TooSmall { rows, cols });
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(MapError::BadCellSize(cell_size));
        }
        let obstacles: BTreeSet<_> = obstacles.into_iter().collect();
        let dynamic_truth: BTreeSet<_> = dynamic_truth.into_iter().collect();
        for &c in obstacles.iter().chain(dynamic_truth.iter()) {
            if c.row >= rows || c.col >= cols {
                return Err(MapError::OutOfBounds(c, rows, cols));
            }
        }
        if let Some(&c) = obstacles.intersection(&dynamic_truth).next() {
            return Err(MapError::Overlap(c));
        }
        Ok(Self {
            rows,
            cols,
            cell_size,
            obstacles,
            dynamic_truth,
        })
    }

    /// Obstacle-free map.
    pub fn open(rows: usize, cols: usize, cell_size: f64) -> Result<Self, MapError> {
        Self::new(rows, cols, cell_size, [], [])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn obstacles(&self) -> &BTreeSet<CellCoord> {
        &self.obstacles
    }

    pub fn dynamic_truth(&self) -> &BTreeSet<CellCoord> {
        &self.dynamic_truth
    }

    pub fn contains(&self, c: CellCoord) -> bool {
        c.row < self.rows && c.col < self.cols
    }

    pub fn is_obstacle(&self, c: CellCoord) -> bool {
        self.obstacles.contains(&c)
    }

    /// Whether the cell is physically occupied (static or dynamic).
    pub fn is_occupied(&self, c: CellCoord) -> bool {
        self.obstacles.contains(&c) || self.dynamic_truth.contains(&c)
    }

    /// Traversable cells in row-major order.
    pub fn free_cells(&self) -> impl Iterator<Item = CellCoord> + '_ {
        (0..self.rows)
            .flat_map(move |r| (0..self.cols).map(move |c| CellCoord::new(r, c)))
            .filter(move |c| !self.obstacles.contains(c))
    }

    /// 4-connected in-bounds neighbours, regardless of occupancy.
    pub fn neighbours(&self, c: CellCoord) -> impl Iterator<Item = CellCoord> + '_ {
        let up = c.row.checked_sub(1).map(|r| CellCoord::new(r, c.col));
        let left = c.col.checked_sub(1).map(|k| CellCoord::new(c.row, k));
        let down = Some(CellCoord::new(c.row + 1, c.col));
        let right = Some(CellCoord::new(c.row, c.col + 1));
        [up, left, right, down]
            .into_iter()
            .flatten()
            .filter(move |n| self.contains(*n))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VertexLabel {
    Cell(CellCoord),
    Named(String),
}

impl fmt::Display for VertexLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VertexLabel::Cell(c) => c.fmt(f),
            VertexLabel::Named(n) => f.write_str(n),
        }
    }
}

impl From<CellCoord> for VertexLabel {
    fn from(c: CellCoord) -> Self {
        VertexLabel::Cell(c)
    }
}

impl From<&str> for VertexLabel {
    fn from(s: &str) -> Self {
        VertexLabel::Named(s.to_owned())
    }
}

/// Weighted directed graph stored as a dense adjacency matrix.
///
/// `arcs[i][j]` is the weight of the arc from `i` to `j`, or [`INF`] when the
/// arc does not exist. The diagonal is always zero. A list of finite
/// out-arcs per vertex is kept alongside the matrix so the planner does not
/// scan full rows.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGraph {
    n: usize,
    arcs: Vec<f64>,
    out: Vec<Vec<usize>>,
    labels: Vec<VertexLabel>,
    index: HashMap<VertexLabel, usize>,
}

impl VectorGraph {
    /// Graph with the given vertices and no arcs.
    pub fn with_labels(labels: Vec<VertexLabel>) -> Result<Self, MapError> {
        let n = labels.len();
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(MapError::DuplicateLabel(l.clone()));
            }
        }
        let mut arcs = vec![INF; n * n];
        for i in 0..n {
            arcs[i * n + i] = 0.0;
        }
        Ok(Self {
            n,
            arcs,
            out: vec![Vec::new(); n],
            labels,
            index,
        })
    }

    /// Graph with vertices named `"0"`, `"1"`, ... and no arcs.
    pub fn unlabelled(n: usize) -> Self {
        let labels = (0..n).map(|i| VertexLabel::Named(i.to_string())).collect();
        Self::with_labels(labels).expect("generated labels are unique")
    }

    /// Builds a graph from a full matrix. Off-diagonal entries may be
    /// [`INF`]; diagonal entries must be zero.
    pub fn from_matrix(matrix: &[Vec<f64>], labels: Vec<VertexLabel>) -> Result<Self, MapError> {
        let n = labels.len();
        if matrix.len() != n || matrix.iter().any(|r| r.len() != n) {
            return Err(MapError::BadShape);
        }
        let mut g = Self::with_labels(labels)?;
        for (i, row) in matrix.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                if i == j {
                    if w != 0.0 {
                        return Err(MapError::BadWeight(i, j, w));
                    }
                } else {
                    g.set_arc(i, j, w)?;
                }
            }
        }
        Ok(g)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn arc(&self, i: usize, j: usize) -> f64 {
        self.arcs[i * self.n + j]
    }

    /// Sets (or with [`INF`], removes) the arc `i -> j`. Negative and NaN
    /// weights are rejected, as is any change to the diagonal.
    pub fn set_arc(&mut self, i: usize, j: usize, w: f64) -> Result<(), MapError> {
        if i >= self.n || j >= self.n || i == j || w.is_nan() || w < 0.0 {
            return Err(MapError::BadWeight(i, j, w));
        }
        self.arcs[i * self.n + j] = w;
        let out = &mut self.out[i];
        match (out.binary_search(&j), w.is_finite()) {
            (Ok(_), true) | (Err(_), false) => {}
            (Err(pos), true) => out.insert(pos, j),
            (Ok(pos), false) => {
                out.remove(pos);
            }
        }
        Ok(())
    }

    /// Sets both `i -> j` and `j -> i`.
    pub fn set_edge(&mut self, i: usize, j: usize, w: f64) -> Result<(), MapError> {
        self.set_arc(i, j, w)?;
        self.set_arc(j, i, w)
    }

    /// Finite out-arcs of `i` as `(target, weight)`, in target order.
    pub fn out_arcs(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.out[i].iter().map(move |&j| (j, self.arcs[i * self.n + j]))
    }

    /// Cuts every arc into and out of `v`.
    pub fn isolate_vertex(&mut self, v: usize) {
        let targets = std::mem::take(&mut self.out[v]);
        for j in targets {
            self.arcs[v * self.n + j] = INF;
        }
        for i in 0..self.n {
            if i != v && self.arcs[i * self.n + v].is_finite() {
                self.arcs[i * self.n + v] = INF;
                if let Ok(pos) = self.out[i].binary_search(&v) {
                    self.out[i].remove(pos);
                }
            }
        }
    }

    /// True when no arc touches `v`.
    pub fn is_isolated(&self, v: usize) -> bool {
        self.out[v].is_empty() && (0..self.n).all(|i| i == v || !self.arc(i, v).is_finite())
    }

    pub fn label(&self, i: usize) -> &VertexLabel {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[VertexLabel] {
        &self.labels
    }

    /// Cell behind vertex `i`, if it is a grid vertex.
    pub fn cell(&self, i: usize) -> Option<CellCoord> {
        match self.labels.get(i) {
            Some(VertexLabel::Cell(c)) => Some(*c),
            _ => None,
        }
    }

    /// Index of the vertex carrying `label`.
    pub fn locate_vertex(&self, label: &VertexLabel) -> Result<usize, MapError> {
        self.index
            .get(label)
            .copied()
            .ok_or_else(|| MapError::UnknownLabel(label.clone()))
    }

    pub fn locate_cell(&self, c: CellCoord) -> Result<usize, MapError> {
        self.locate_vertex(&VertexLabel::Cell(c))
    }

    /// Number of finite off-diagonal entries.
    pub fn finite_arc_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.arc(i, j) == self.arc(j, i)))
    }
}

/// One vertex per traversable cell (row-major), 4-connected arcs of weight
/// `cell_size` between traversable neighbours. Dynamic obstacles are
/// connected like free cells since the planner cannot see them.
pub fn grid_to_graph(map: &GridMap) -> Result<VectorGraph, MapError> {
    let labels: Vec<VertexLabel> = map.free_cells().map(VertexLabel::Cell).collect();
    if labels.is_empty() {
        return Err(MapError::EmptyMap);
    }
    let mut g = VectorGraph::with_labels(labels)?;
    let w = map.cell_size();
    for i in 0..g.vertex_count() {
        let c = g.cell(i).expect("grid vertex");
        for nb in map.neighbours(c) {
            if nb > c && !map.is_obstacle(nb) {
                let j = g.locate_cell(nb)?;
                g.set_edge(i, j, w)?;
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(r: usize, k: usize) -> CellCoord {
        CellCoord::new(r, k)
    }

    #[test]
    fn smallest_map_has_one_edge() {
        let m = GridMap::open(1, 2, 1.0).unwrap();
        let g = grid_to_graph(&m).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.arc(0, 1), 1.0);
        assert_eq!(g.arc(1, 0), 1.0);
        assert_eq!(g.arc(0, 0), 0.0);
    }

    #[test]
    fn obstacle_removes_vertex_and_no_diagonals() {
        let m = GridMap::new(2, 2, 1.0, [c(1, 1)], []).unwrap();
        let g = grid_to_graph(&m).unwrap();
        assert_eq!(g.vertex_count(), 3);
        let a = g.locate_cell(c(0, 1)).unwrap();
        let b = g.locate_cell(c(1, 0)).unwrap();
        assert_eq!(g.arc(a, b), INF);
        assert_eq!(g.arc(b, a), INF);
        assert!(g.locate_cell(c(1, 1)).is_err());
    }

    #[test]
    fn three_by_three_arc_count() {
        let g = grid_to_graph(&GridMap::open(3, 3, 1.0).unwrap()).unwrap();
        assert_eq!(g.vertex_count(), 9);
        assert_eq!(g.finite_arc_count(), 24);
    }

    #[test]
    fn dynamic_cells_stay_connected() {
        let m = GridMap::new(1, 3, 2.0, [], [c(0, 1)]).unwrap();
        let g = grid_to_graph(&m).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.arc(0, 1), 2.0);
    }

    #[test]
    fn all_obstacles_is_empty_map() {
        let m = GridMap::new(1, 2, 1.0, [c(0, 0), c(0, 1)], []).unwrap();
        assert_eq!(grid_to_graph(&m), Err(MapError::EmptyMap));
    }

    #[test]
    fn map_invariants_enforced() {
        assert!(matches!(GridMap::open(1, 1, 1.0), Err(MapError::TooSmall { .. })));
        assert!(matches!(GridMap::open(2, 2, 0.0), Err(MapError::BadCellSize(_))));
        assert!(matches!(
            GridMap::new(2, 2, 1.0, [c(2, 0)], []),
            Err(MapError::OutOfBounds(..))
        ));
        assert!(matches!(
            GridMap::new(2, 2, 1.0, [c(0, 0)], [c(0, 0)]),
            Err(MapError::Overlap(_))
        ));
    }

    #[test]
    fn locate_vertex_row_major() {
        let g = grid_to_graph(&GridMap::open(1, 2, 1.0).unwrap()).unwrap();
        assert_eq!(g.locate_vertex(g.label(0)).unwrap(), 0);
        assert_eq!(g.locate_cell(c(0, 1)).unwrap(), 1);
        assert!(matches!(g.locate_cell(c(5, 5)), Err(MapError::UnknownLabel(_))));
        let named = VectorGraph::unlabelled(3);
        assert_eq!(named.locate_vertex(&"2".into()).unwrap(), 2);
    }

    #[test]
    fn negative_weights_rejected() {
        let mut g = VectorGraph::unlabelled(2);
        assert!(g.set_arc(0, 1, -1.0).is_err());
        assert!(g.set_arc(0, 0, 1.0).is_err());
        assert!(g.set_arc(0, 1, f64::NAN).is_err());
        let bad = VectorGraph::from_matrix(&[vec![1.0, 0.0], vec![0.0, 0.0]], vec!["a".into(), "b".into()]);
        assert!(bad.is_err());
    }

    #[test]
    fn isolate_vertex_cuts_both_directions() {
        let mut g = grid_to_graph(&GridMap::open(3, 3, 1.0).unwrap()).unwrap();
        g.isolate_vertex(4);
        assert!(g.is_isolated(4));
        assert_eq!(g.finite_arc_count(), 24 - 8);
        assert!(g.is_symmetric());
        assert_eq!(g.arc(4, 4), 0.0);
    }
}
