//! Python bindings: `import adrnav`.

use adrnav_core::detection::{
    conv_output_size, generate_anchors, loc_loss, pool_output_size, roi_bin_shapes, smooth_l1, AnchorSpec, BoxDelta,
    LayerGeom,
};
use adrnav_core::harness::{sweep_grids, sweep_tags, SweepConfig, SweepVariable};
use adrnav_core::map::{grid_to_graph, CellCoord, GridMap};
use adrnav_core::mission::{run_mission, MissionLog};
use adrnav_core::planner::{grid_count, shortest_path};
use adrnav_core::rfid::{decode, encode, TagCode};
use adrnav_core::scenario::{load_scenario, load_scenario_file, save_scenario, Scenario, ScenarioError};
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Cell = (usize, usize);
type Plan = (Vec<Cell>, f64, (usize, usize, usize));
type SweepRowTuple = (usize, f64, usize, usize, f64);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn scenario_err(e: ScenarioError) -> PyErr {
    match e {
        ScenarioError::Io(e) => PyOSError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn cell((r, c): Cell) -> CellCoord {
    CellCoord::new(r, c)
}

#[pyclass(name = "GridMap", module = "adrnav", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGridMap {
    inner: GridMap,
}

#[pymethods]
impl PyGridMap {
    #[new]
    #[pyo3(signature = (rows, cols, cell_size=1.0, obstacles=Vec::new(), dynamic=Vec::new()))]
    fn new(rows: usize, cols: usize, cell_size: f64, obstacles: Vec<Cell>, dynamic: Vec<Cell>) -> PyResult<Self> {
        let inner = GridMap::new(
            rows,
            cols,
            cell_size,
            obstacles.into_iter().map(cell),
            dynamic.into_iter().map(cell),
        )
        .map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn is_obstacle(&self, c: Cell) -> bool {
        self.inner.is_obstacle(cell(c))
    }

    /// Shortest route as `(cells, cost, (row_moves, col_moves, total))`.
    fn plan(&self, source: Cell, dest: Cell) -> PyResult<Plan> {
        let g = grid_to_graph(&self.inner).map_err(value_err)?;
        let a = g.locate_cell(cell(source)).map_err(value_err)?;
        let b = g.locate_cell(cell(dest)).map_err(value_err)?;
        let p = shortest_path(&g, a, b).map_err(value_err)?;
        let gc = grid_count(&p, &g, &self.inner).map_err(value_err)?;
        let cells = p.cells(&g).map_err(value_err)?;
        Ok((
            cells.iter().map(|c| (c.row, c.col)).collect(),
            p.cost,
            (gc.row_moves, gc.col_moves, gc.total),
        ))
    }

    fn __repr__(&self) -> String {
        format!("GridMap({}x{})", self.inner.rows(), self.inner.cols())
    }
}

#[pyclass(name = "MissionResult", module = "adrnav", frozen, get_all)]
struct PyMissionResult {
    outcome: String,
    total_time: f64,
    total_distance: f64,
    relocalizations: usize,
    replans: usize,
    trajectory: Vec<Cell>,
}

impl From<MissionLog> for PyMissionResult {
    fn from(log: MissionLog) -> Self {
        Self {
            outcome: log.outcome.to_string(),
            total_time: log.total_time,
            total_distance: log.total_distance,
            relocalizations: log.relocalizations,
            replans: log.replans,
            trajectory: log.trajectory().iter().map(|c| (c.row, c.col)).collect(),
        }
    }
}

#[pymethods]
impl PyMissionResult {
    fn __repr__(&self) -> String {
        format!(
            "MissionResult(outcome={:?}, total_time={:.3}, total_distance={})",
            self.outcome, self.total_time, self.total_distance
        )
    }
}

#[pyclass(name = "Scenario", module = "adrnav", frozen)]
struct PyScenario {
    inner: Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_scenario(text).map_err(scenario_err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: load_scenario_file(path).map_err(scenario_err)?,
        })
    }

    fn to_json(&self) -> String {
        save_scenario(&self.inner)
    }

    #[getter]
    fn map(&self) -> PyGridMap {
        PyGridMap {
            inner: self.inner.config.map.clone(),
        }
    }

    #[getter]
    fn source(&self) -> Cell {
        (self.inner.config.source.row, self.inner.config.source.col)
    }

    #[getter]
    fn dest(&self) -> Cell {
        (self.inner.config.dest.row, self.inner.config.dest.col)
    }

    fn run(&self, seed: u64) -> PyResult<PyMissionResult> {
        let log = run_mission(&self.inner.config, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(value_err)?;
        Ok(log.into())
    }

    /// Runs the scenario's sweep block. Returns `(value, distance_m, successes, trials, rate)` rows.
    #[pyo3(signature = (trials=None, seed=None))]
    fn sweep(&self, py: Python<'_>, trials: Option<usize>, seed: Option<u64>) -> PyResult<Vec<SweepRowTuple>> {
        let mut cfg = SweepConfig::from_scenario(&self.inner).map_err(value_err)?;
        if let Some(t) = trials {
            cfg.trials_per_point = t;
        }
        if let Some(s) = seed {
            cfg.master_seed = s;
        }
        let result = py
            .detach(|| match cfg.variable {
                SweepVariable::TagCount => sweep_tags(&cfg),
                SweepVariable::GridNumber => sweep_grids(&cfg),
            })
            .map_err(value_err)?;
        Ok(result
            .rows
            .iter()
            .map(|r| (r.variable, r.distance_m, r.successes, r.trials, r.success_rate))
            .collect())
    }
}

/// `"AtSource"`, `"OnPath"` or `"AtDestination"` for a tag code like `"00-01-11"`.
#[pyfunction]
fn decode_tag(code: &str) -> PyResult<String> {
    let code: TagCode = code.parse().map_err(value_err)?;
    Ok(format!("{:?}", decode(code).map_err(value_err)?))
}

#[pyfunction]
fn encode_tag(index: usize, length: usize) -> PyResult<String> {
    Ok(encode(index, length).map_err(value_err)?.to_string())
}

#[pyfunction]
#[pyo3(signature = (input_size, kernel, stride=1, pad=0, dilation=1))]
fn conv_size(input_size: usize, kernel: usize, stride: usize, pad: usize, dilation: usize) -> PyResult<usize> {
    conv_output_size(&LayerGeom::new(input_size, pad, dilation, kernel, stride)).map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (input_size, kernel, stride=1, pad=0))]
fn pool_size(input_size: usize, kernel: usize, stride: usize, pad: usize) -> PyResult<usize> {
    pool_output_size(&LayerGeom::pool(input_size, pad, kernel, stride)).map_err(value_err)
}

#[pyfunction]
fn roi_bins(roi_h: usize, roi_w: usize, bins_h: usize, bins_w: usize) -> PyResult<Vec<Vec<(usize, usize)>>> {
    roi_bin_shapes(roi_h, roi_w, bins_h, bins_w).map_err(value_err)
}

/// Default 9 anchors as `(width, height)`.
#[pyfunction]
fn anchors() -> Vec<(f64, f64)> {
    generate_anchors(&AnchorSpec::default())
        .iter()
        .map(|a| (a.width, a.height))
        .collect()
}

#[pyfunction(name = "smooth_l1")]
fn py_smooth_l1(x: f64) -> f64 {
    smooth_l1(x)
}

#[pyfunction(name = "loc_loss")]
fn py_loc_loss(t: [f64; 4], v: [f64; 4]) -> f64 {
    loc_loss(&BoxDelta { t, v })
}

#[pymodule]
fn adrnav(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridMap>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyMissionResult>()?;
    m.add_function(wrap_pyfunction!(decode_tag, m)?)?;
    m.add_function(wrap_pyfunction!(encode_tag, m)?)?;
    m.add_function(wrap_pyfunction!(conv_size, m)?)?;
    m.add_function(wrap_pyfunction!(pool_size, m)?)?;
    m.add_function(wrap_pyfunction!(roi_bins, m)?)?;
    m.add_function(wrap_pyfunction!(anchors, m)?)?;
    m.add_function(wrap_pyfunction!(py_smooth_l1, m)?)?;
    m.add_function(wrap_pyfunction!(py_loc_loss, m)?)?;
    Ok(())
}
