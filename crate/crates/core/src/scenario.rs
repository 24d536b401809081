//! JSON scenario files.
//!
//! ```json
//! {
//!   "grid": {"rows": 4, "cols": 4, "cell_size_m": 1.0, "obstacles": [[1, 1]], "dynamic": []},
//!   "tags": [{"pos": [0, 0], "code": "00-01-11"}],
//!   "robot": {"rpm": 200, "wheel_diameter_m": 0.1, "drift_per_m": 0.02},
//!   "detector": {"accuracy": 0.8375, "seed": 7},
//!   "mission": {"source": [0, 0], "dest": [3, 3]}
//! }
//! ```
//!
//! `grid` and `mission` are required. `mission` also takes `dwell_s`,
//! `time_budget_s` and `drift_threshold_m`; an optional `rfid` block sets
//! `min_rpm`, `relocalization_s` and `read_probability`; `detector` takes
//! optional `tpr` / `fpr` overrides; `sweep` describes a parameter sweep.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::DetectorModel;
use crate::map::{CellCoord, GridMap, MapError};
use crate::mission::{SimConfig, DEFAULT_DWELL_S};
use crate::rfid::{ReadModel, TagCode, TagPlacement, MAX_READ_RANGE_M};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("coordinate {0} lies outside the {1}x{2} grid")]
    Bounds(CellCoord, usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for ScenarioError {
    fn from(e: serde_json::Error) -> Self {
        ScenarioError::Schema(e.to_string())
    }
}

type Rc = [usize; 2];

fn cell(rc: Rc) -> CellCoord {
    CellCoord::new(rc[0], rc[1])
}

fn rc(c: CellCoord) -> Rc {
    [c.row, c.col]
}

fn is_unbounded(v: &f64) -> bool {
    !v.is_finite()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    rows: usize,
    cols: usize,
    cell_size_m: f64,
    #[serde(default)]
    obstacles: Vec<Rc>,
    #[serde(default)]
    dynamic: Vec<Rc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TagDoc {
    pos: Rc,
    code: TagCode,
    #[serde(default = "default_range")]
    read_range_m: f64,
}

fn default_range() -> f64 {
    MAX_READ_RANGE_M
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotDoc {
    rpm: f64,
    wheel_diameter_m: f64,
    #[serde(default)]
    drift_per_m: f64,
}

impl Default for RobotDoc {
    fn default() -> Self {
        Self {
            rpm: 200.0,
            wheel_diameter_m: 0.1,
            drift_per_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorDoc {
    accuracy: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tpr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fpr: Option<f64>,
}

impl Default for DetectorDoc {
    fn default() -> Self {
        Self {
            accuracy: DetectorModel::DEFAULT_ACCURACY,
            seed: 0,
            tpr: None,
            fpr: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MissionDoc {
    source: Rc,
    dest: Rc,
    #[serde(default = "default_dwell")]
    dwell_s: f64,
    #[serde(default = "infinite", skip_serializing_if = "is_unbounded")]
    time_budget_s: f64,
    #[serde(default = "infinite", skip_serializing_if = "is_unbounded")]
    drift_threshold_m: f64,
}

fn default_dwell() -> f64 {
    DEFAULT_DWELL_S
}

fn infinite() -> f64 {
    f64::INFINITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RfidDoc {
    min_rpm: f64,
    relocalization_s: f64,
    read_probability: f64,
}

impl From<ReadModel> for RfidDoc {
    fn from(m: ReadModel) -> Self {
        Self {
            min_rpm: m.min_rpm,
            relocalization_s: m.relocalization_duration,
            read_probability: m.base_read_probability,
        }
    }
}

/// Sweep settings stored next to a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    /// `"tags"` or `"grids"`.
    pub kind: String,
    pub values: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Grid sweeps: cells per sector along the route.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_cells: Option<usize>,
    /// Grid sweeps: tags added per sector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags_per_sector: Option<usize>,
}

fn default_trials() -> usize {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    grid: GridDoc,
    #[serde(default)]
    tags: Vec<TagDoc>,
    #[serde(default)]
    robot: RobotDoc,
    #[serde(default)]
    detector: DetectorDoc,
    mission: MissionDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rfid: Option<RfidDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepDoc>,
}

/// A validated scenario: the mission configuration plus optional sweep
/// settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: SimConfig,
    pub sweep: Option<SweepDoc>,
}

impl Scenario {
    pub fn map(&self) -> &GridMap {
        &self.config.map
    }

    pub fn tags(&self) -> &[TagPlacement] {
        &self.config.tags
    }
}

pub fn load_scenario(document: &str) -> Result<Scenario, ScenarioError> {
    let doc: ScenarioDoc = serde_json::from_str(document)?;
    let g = &doc.grid;
    let (rows, cols) = (g.rows, g.cols);
    let in_bounds = |c: CellCoord| -> Result<CellCoord, ScenarioError> {
        if c.row < rows && c.col < cols {
            Ok(c)
        } else {
            Err(ScenarioError::Bounds(c, rows, cols))
        }
    };

    let map = GridMap::new(
        rows,
        cols,
        g.cell_size_m,
        g.obstacles.iter().map(|&p| cell(p)),
        g.dynamic.iter().map(|&p| cell(p)),
    )
    .map_err(|e| match e {
        MapError::OutOfBounds(c, r, k) => ScenarioError::Bounds(c, r, k),
        other => ScenarioError::Schema(other.to_string()),
    })?;

    let tags = doc
        .tags
        .iter()
        .map(|t| {
            let pos = in_bounds(cell(t.pos))?;
            TagPlacement::with_range(pos, t.code, t.read_range_m).map_err(|e| ScenarioError::Schema(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let source = in_bounds(cell(doc.mission.source))?;
    let dest = in_bounds(cell(doc.mission.dest))?;

    let read_model = doc.rfid.as_ref().map_or_else(ReadModel::default, |r| ReadModel {
        min_rpm: r.min_rpm,
        relocalization_duration: r.relocalization_s,
        base_read_probability: r.read_probability,
    });

    let config = SimConfig {
        map,
        tags,
        detector: DetectorModel {
            accuracy: doc.detector.accuracy,
            rng_seed: doc.detector.seed,
            tpr: doc.detector.tpr,
            fpr: doc.detector.fpr,
        },
        read_model,
        wheel_rpm: doc.robot.rpm,
        wheel_diameter: doc.robot.wheel_diameter_m,
        drift_per_meter: doc.robot.drift_per_m,
        dwell_at_destination: doc.mission.dwell_s,
        success_drift_threshold: doc.mission.drift_threshold_m,
        time_budget: doc.mission.time_budget_s,
        source,
        dest,
    };
    config.validate().map_err(|e| ScenarioError::Schema(e.to_string()))?;
    Ok(Scenario {
        config,
        sweep: doc.sweep,
    })
}

pub fn load_scenario_file(path: impl AsRef<std::path::Path>) -> Result<Scenario, ScenarioError> {
    load_scenario(&std::fs::read_to_string(path)?)
}

/// Serializes a scenario back to the file format.
pub fn save_scenario(s: &Scenario) -> String {
    let c = &s.config;
    let doc = ScenarioDoc {
        grid: GridDoc {
            rows: c.map.rows(),
            cols: c.map.cols(),
            cell_size_m: c.map.cell_size(),
            obstacles: c.map.obstacles().iter().map(|&p| rc(p)).collect(),
            dynamic: c.map.dynamic_truth().iter().map(|&p| rc(p)).collect(),
        },
        tags: c
            .tags
            .iter()
            .map(|t| TagDoc {
                pos: rc(t.pos),
                code: t.code,
                read_range_m: t.read_range,
            })
            .collect(),
        robot: RobotDoc {
            rpm: c.wheel_rpm,
            wheel_diameter_m: c.wheel_diameter,
            drift_per_m: c.drift_per_meter,
        },
        detector: DetectorDoc {
            accuracy: c.detector.accuracy,
            seed: c.detector.rng_seed,
            tpr: c.detector.tpr,
            fpr: c.detector.fpr,
        },
        mission: MissionDoc {
            source: rc(c.source),
            dest: rc(c.dest),
            dwell_s: c.dwell_at_destination,
            time_budget_s: c.time_budget,
            drift_threshold_m: c.success_drift_threshold,
        },
        rfid: (c.read_model != ReadModel::default()).then(|| c.read_model.into()),
        sweep: s.sweep.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("scenario documents always serialize")
}
