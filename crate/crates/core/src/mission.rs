//! Delivery mission state machine: plan, drive cell by cell while probing
//! the next cell and reading landmark tags, replan around detections, dwell
//! at the destination and drive back to the source.

use std::collections::BTreeSet;
use std::fmt;
use std::io;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{detect, DetectionEvent, DetectorModel};
use crate::map::{grid_to_graph, CellCoord, GridMap, MapError, VectorGraph};
use crate::planner::{reverse_path, shortest_path, Path};
use crate::rfid::{attempt_read, decode, relocalize, NavDecision, ReadModel, ReadOutcome, TagCode, TagPlacement};
use crate::robot::RobotState;

pub const DEFAULT_DWELL_S: f64 = 120.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("{from} -> {to} is not a single 4-connected move")]
    NotAdjacent { from: CellCoord, to: CellCoord },
    #[error("cell {0} is a known obstacle")]
    KnownObstacle(CellCoord),
    #[error("collided with an undetected obstacle at {0}")]
    BlockedCell(CellCoord),
}

/// Everything a single mission needs.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub map: GridMap,
    pub tags: Vec<TagPlacement>,
    pub detector: DetectorModel,
    pub read_model: ReadModel,
    pub wheel_rpm: f64,
    pub wheel_diameter: f64,
    /// Meters of position error gained per meter driven.
    pub drift_per_meter: f64,
    pub dwell_at_destination: f64,
    /// Drift above this many meters means the robot is lost.
    pub success_drift_threshold: f64,
    /// Seconds; the mission fails once the clock passes it.
    pub time_budget: f64,
    pub source: CellCoord,
    pub dest: CellCoord,
}

impl SimConfig {
    /// Config with default read model, detector and dwell, and no drift or
    /// time limits.
    pub fn new(map: GridMap, source: CellCoord, dest: CellCoord) -> Self {
        Self {
            map,
            tags: Vec::new(),
            detector: DetectorModel::default(),
            read_model: ReadModel::default(),
            wheel_rpm: 200.0,
            wheel_diameter: 0.1,
            drift_per_meter: 0.0,
            dwell_at_destination: DEFAULT_DWELL_S,
            success_drift_threshold: f64::INFINITY,
            time_budget: f64::INFINITY,
            source,
            dest,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.to_owned()));
        for (name, c) in [("source", self.source), ("destination", self.dest)] {
            if !self.map.contains(c) {
                return Err(SimError::Map(MapError::OutOfBounds(
                    c,
                    self.map.rows(),
                    self.map.cols(),
                )));
            }
            if self.map.is_occupied(c) {
                return bad(&format!("{name} {c} is occupied"));
            }
        }
        if self.source == self.dest {
            return bad("source and destination must differ");
        }
        for t in &self.tags {
            if !self.map.contains(t.pos) {
                return Err(SimError::Map(MapError::OutOfBounds(
                    t.pos,
                    self.map.rows(),
                    self.map.cols(),
                )));
            }
        }
        let non_negative = [
            ("wheel rpm", self.wheel_rpm),
            ("drift per meter", self.drift_per_meter),
            ("dwell", self.dwell_at_destination),
            ("drift threshold", self.success_drift_threshold),
            ("time budget", self.time_budget),
        ];
        for (name, v) in non_negative {
            if v.is_nan() || v < 0.0 {
                return bad(&format!("{name} must be non-negative"));
            }
        }
        if !(self.wheel_diameter > 0.0 && self.wheel_diameter.is_finite()) {
            return bad("wheel diameter must be positive");
        }
        self.read_model
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        self.detector.validate().map_err(|e| SimError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn tag_at(&self, cell: CellCoord) -> Option<&TagPlacement> {
        self.tags.iter().find(|t| t.pos == cell)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventKind {
    Move {
        length_m: f64,
        duration_s: f64,
        drift_m: f64,
    },
    TagHit {
        code: TagCode,
        decision: Option<NavDecision>,
        duration_s: f64,
    },
    TagMiss {
        code: TagCode,
    },
    Detection {
        observed: bool,
        truth: bool,
    },
    /// Initial plan of the outbound leg.
    Plan {
        path: Vec<CellCoord>,
        cost: f64,
    },
    Replan {
        path: Vec<CellCoord>,
        cost: f64,
    },
    Arrive,
    Dwell {
        duration_s: f64,
    },
    /// Start of the return leg, with its initial route.
    Backtrack {
        path: Vec<CellCoord>,
        cost: f64,
    },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Move { .. } => "move",
            EventKind::TagHit { .. } => "tag_hit",
            EventKind::TagMiss { .. } => "tag_miss",
            EventKind::Detection { .. } => "detection",
            EventKind::Plan { .. } => "plan",
            EventKind::Replan { .. } => "replan",
            EventKind::Arrive => "arrive",
            EventKind::Dwell { .. } => "dwell",
            EventKind::Backtrack { .. } => "backtrack",
        }
    }

    fn detail(&self) -> String {
        match self {
            EventKind::Move {
                length_m,
                duration_s,
                drift_m,
            } => {
                format!("length_m={length_m};duration_s={duration_s};drift_m={drift_m}")
            }
            EventKind::TagHit {
                code,
                decision,
                duration_s,
            } => {
                let d = decision.map_or_else(|| "unknown".to_owned(), |d| format!("{d:?}"));
                format!("code={code};decision={d};duration_s={duration_s}")
            }
            EventKind::TagMiss { code } => format!("code={code}"),
            EventKind::Detection { observed, truth } => {
                format!("observed={};truth={}", u8::from(*observed), u8::from(*truth))
            }
            EventKind::Plan { path, cost } | EventKind::Replan { path, cost } | EventKind::Backtrack { path, cost } => {
                format!("hops={};cost={cost}", path.len().saturating_sub(1))
            }
            EventKind::Arrive => String::new(),
            EventKind::Dwell { duration_s } => format!("duration_s={duration_s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionEvent {
    pub time: f64,
    pub cell: CellCoord,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    FailureDrift,
    FailureNoPath,
    FailureTimeout,
    FailureCollision,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        self == Outcome::Success
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Outcome::Success => "success",
            Outcome::FailureDrift => "failure_drift",
            Outcome::FailureNoPath => "failure_no_path",
            Outcome::FailureTimeout => "failure_timeout",
            Outcome::FailureCollision => "failure_collision",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    pub events: Vec<MissionEvent>,
    pub outcome: Outcome,
    pub total_distance: f64,
    pub total_time: f64,
    pub relocalizations: usize,
    pub replans: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub outcome: String,
    pub total_time_s: f64,
    pub total_distance_m: f64,
    pub relocalizations: usize,
    pub replans: usize,
}

impl MissionLog {
    pub fn summary(&self) -> MissionSummary {
        MissionSummary {
            outcome: self.outcome.to_string(),
            total_time_s: self.total_time,
            total_distance_m: self.total_distance,
            relocalizations: self.relocalizations,
            replans: self.replans,
        }
    }

    pub fn detections(&self) -> Vec<DetectionEvent> {
        self.events
            .iter()
            .filter_map(|e| match e.kind {
                EventKind::Detection { observed, truth } => Some(DetectionEvent {
                    cell: e.cell,
                    observed_occupied: observed,
                    truth_occupied: truth,
                    time: e.time,
                }),
                _ => None,
            })
            .collect()
    }

    /// Cells the robot occupied, starting at the source.
    pub fn trajectory(&self) -> Vec<CellCoord> {
        Self::trajectory_of(&self.events)
    }

    /// Writes `time_s,event_type,row,col,detail`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "event_type", "row", "col", "detail"])?;
        for e in &self.events {
            w.write_record([
                e.time.to_string(),
                e.kind.name().to_owned(),
                e.cell.row.to_string(),
                e.cell.col.to_string(),
                e.kind.detail(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Moves the robot one cell and, if a tag sits there, tries to read it.
///
/// Returns the new state and the `Move` (plus any tag) events. Entering a
/// physically occupied cell is a collision.
pub fn step<R: Rng + ?Sized>(
    state: &RobotState,
    next: CellCoord,
    config: &SimConfig,
    rng: &mut R,
) -> Result<(RobotState, Vec<MissionEvent>), SimError> {
    let from = state.cell();
    if !from.is_adjacent(next) || !config.map.contains(next) {
        return Err(SimError::NotAdjacent { from, to: next });
    }
    if config.map.is_obstacle(next) {
        return Err(SimError::KnownObstacle(next));
    }
    if config.map.is_occupied(next) {
        return Err(SimError::BlockedCell(next));
    }

    let len = config.map.cell_size();
    let duration = len / state.speed();
    let err = config.drift_per_meter * len;
    let dir = [next.row as f64 - from.row as f64, next.col as f64 - from.col as f64];

    let mut s = state.clone();
    s.true_pos.cell = next;
    s.est_pos.cell = next;
    s.est_pos.offset[0] += dir[0] * err;
    s.est_pos.offset[1] += dir[1] * err;
    s.drift += err;
    s.clock += duration;

    let mut events = vec![MissionEvent {
        time: s.clock,
        cell: next,
        kind: EventKind::Move {
            length_m: len,
            duration_s: duration,
            drift_m: s.drift,
        },
    }];

    if let Some(tag) = config.tag_at(next) {
        match attempt_read(&s, tag, &config.read_model, len, rng) {
            ReadOutcome::Hit(code) => {
                s = relocalize(&s, tag, &config.read_model);
                events.push(MissionEvent {
                    time: s.clock,
                    cell: next,
                    kind: EventKind::TagHit {
                        code,
                        decision: decode(code).ok(),
                        duration_s: config.read_model.relocalization_duration,
                    },
                });
            }
            ReadOutcome::Miss => events.push(MissionEvent {
                time: s.clock,
                cell: next,
                kind: EventKind::TagMiss { code: tag.code },
            }),
        }
    }
    Ok((s, events))
}

/// Copy of `graph` with every arc touching the detected cell removed.
/// Free observations and cells outside the graph leave it unchanged.
pub fn on_detection(event: &DetectionEvent, graph: &VectorGraph) -> VectorGraph {
    let mut g = graph.clone();
    if event.observed_occupied {
        if let Ok(v) = g.locate_cell(event.cell) {
            g.isolate_vertex(v);
        }
    }
    g
}

struct Mission<'a, R: ?Sized> {
    config: &'a SimConfig,
    graph: VectorGraph,
    robot: RobotState,
    events: Vec<MissionEvent>,
    distance: f64,
    known_free: BTreeSet<CellCoord>,
    relocalizations: usize,
    replans: usize,
    rng: &'a mut R,
}

enum PlanKind {
    Outbound,
    Return,
}

impl<'a, R: Rng + ?Sized> Mission<'a, R> {
    fn push(&mut self, cell: CellCoord, kind: EventKind) {
        self.events.push(MissionEvent {
            time: self.robot.clock,
            cell,
            kind,
        });
    }

    fn cells(&self, p: &Path) -> Vec<CellCoord> {
        p.cells(&self.graph).expect("grid graph vertices carry cells")
    }

    fn plan(&self, from: CellCoord, to: CellCoord) -> Result<Path, Outcome> {
        let a = self.graph.locate_cell(from).map_err(|_| Outcome::FailureNoPath)?;
        let b = self.graph.locate_cell(to).map_err(|_| Outcome::FailureNoPath)?;
        shortest_path(&self.graph, a, b).map_err(|_| Outcome::FailureNoPath)
    }

    fn check_clock(&self) -> Result<(), Outcome> {
        if self.robot.clock > self.config.time_budget {
            Err(Outcome::FailureTimeout)
        } else {
            Ok(())
        }
    }

    /// Drives from the current cell to `goal` starting on `route`.
    fn drive(&mut self, mut route: Vec<CellCoord>, goal: CellCoord) -> Result<(), Outcome> {
        let endpoints = [self.config.source, self.config.dest];
        let mut idx = 0;
        while self.robot.cell() != goal {
            let here = self.robot.cell();
            let next = route[idx + 1];

            // Endpoints are surveyed landmarks; cells already driven through
            // or observed free are not probed again.
            if !endpoints.contains(&next) && !self.known_free.contains(&next) {
                let ev = detect(
                    next,
                    self.config.map.is_occupied(next),
                    self.robot.clock,
                    &self.config.detector,
                    self.rng,
                );
                self.push(
                    next,
                    EventKind::Detection {
                        observed: ev.observed_occupied,
                        truth: ev.truth_occupied,
                    },
                );
                if !ev.observed_occupied {
                    self.known_free.insert(next);
                } else {
                    let v = self.graph.locate_cell(next).expect("route cells are vertices");
                    self.graph.isolate_vertex(v);
                    let p = self.plan(here, goal)?;
                    route = self.cells(&p);
                    idx = 0;
                    self.replans += 1;
                    self.push(
                        here,
                        EventKind::Replan {
                            path: route.clone(),
                            cost: p.cost,
                        },
                    );
                    continue;
                }
            }

            let (robot, events) = match step(&self.robot, next, self.config, self.rng) {
                Ok(r) => r,
                Err(SimError::BlockedCell(_)) => return Err(Outcome::FailureCollision),
                Err(e) => unreachable!("planner produced an invalid move: {e}"),
            };
            self.robot = robot;
            self.known_free.insert(next);
            // Lost is judged on arrival, before any read at the new cell.
            let mut lost = false;
            for e in events {
                match &e.kind {
                    EventKind::Move { length_m, drift_m, .. } => {
                        self.distance += length_m;
                        lost = *drift_m > self.config.success_drift_threshold;
                    }
                    EventKind::TagHit { .. } => self.relocalizations += 1,
                    _ => {}
                }
                self.events.push(e);
            }
            if lost {
                return Err(Outcome::FailureDrift);
            }
            self.check_clock()?;
            idx += 1;
        }
        Ok(())
    }

    fn leg(&mut self, from: CellCoord, to: CellCoord, kind: PlanKind, route: Option<Path>) -> Result<(), Outcome> {
        let path = match route {
            Some(p) => p,
            None => self.plan(from, to)?,
        };
        let cells = self.cells(&path);
        let ev = match kind {
            PlanKind::Outbound => EventKind::Plan {
                path: cells.clone(),
                cost: path.cost,
            },
            PlanKind::Return => EventKind::Backtrack {
                path: cells.clone(),
                cost: path.cost,
            },
        };
        self.push(from, ev);
        self.drive(cells, to)?;
        self.push(to, EventKind::Arrive);
        Ok(())
    }

    /// Route back: the outbound trajectory with its loops erased, reversed.
    /// Falls back to a fresh shortest path if that is not valid in the graph.
    fn return_route(&self) -> Option<Path> {
        let traj = loop_erase(&MissionLog::trajectory_of(&self.events));
        let vertices = traj
            .iter()
            .map(|c| self.graph.locate_cell(*c).ok())
            .collect::<Option<Vec<_>>>()?;
        let mut cost = 0.0;
        for w in vertices.windows(2) {
            cost += self.graph.arc(w[0], w[1]);
        }
        let outbound = Path { vertices, cost };
        reverse_path(&outbound, &self.graph).ok()
    }

    fn run(&mut self) -> Result<(), Outcome> {
        let (src, dst) = (self.config.source, self.config.dest);
        self.leg(src, dst, PlanKind::Outbound, None)?;

        let dwell = self.config.dwell_at_destination;
        self.robot.clock += dwell;
        self.push(dst, EventKind::Dwell { duration_s: dwell });
        self.check_clock()?;

        let back = self.return_route();
        self.leg(dst, src, PlanKind::Return, back)
    }
}

/// Removes every revisit loop so each cell appears once, in first-visit order
/// of the surviving walk.
fn loop_erase(walk: &[CellCoord]) -> Vec<CellCoord> {
    let mut out: Vec<CellCoord> = Vec::with_capacity(walk.len());
    for c in walk {
        if let Some(i) = out.iter().position(|x| x == c) {
            out.truncate(i + 1);
        } else {
            out.push(*c);
        }
    }
    out
}

impl MissionLog {
    fn trajectory_of(events: &[MissionEvent]) -> Vec<CellCoord> {
        events
            .first()
            .map(|e| e.cell)
            .into_iter()
            .chain(events.iter().filter_map(|e| match e.kind {
                EventKind::Move { .. } => Some(e.cell),
                _ => None,
            }))
            .collect()
    }
}

/// Runs one full delivery: outbound leg, dwell, return leg.
///
/// Failures are reported through [`MissionLog::outcome`]; only an invalid
/// configuration is an error.
pub fn run_mission<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<MissionLog, SimError> {
    let graph = grid_to_graph(&config.map)?;
    run_mission_on(config, graph, rng)
}

/// [`run_mission`] with a prebuilt planner graph for `config.map`.
pub fn run_mission_on<R: Rng + ?Sized>(
    config: &SimConfig,
    graph: VectorGraph,
    rng: &mut R,
) -> Result<MissionLog, SimError> {
    config.validate()?;
    let mut m = Mission {
        config,
        graph,
        robot: RobotState::new(config.source, config.wheel_rpm, config.wheel_diameter),
        events: Vec::new(),
        distance: 0.0,
        known_free: BTreeSet::from([config.source]),
        relocalizations: 0,
        replans: 0,
        rng,
    };
    let outcome = match m.run() {
        Ok(()) => Outcome::Success,
        Err(o) => o,
    };
    Ok(MissionLog {
        outcome,
        total_distance: m.distance,
        total_time: m.robot.clock,
        relocalizations: m.relocalizations,
        replans: m.replans,
        events: m.events,
    })
}
