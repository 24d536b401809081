//! Grid-world navigation for an automated delivery robot.
//!
//! The floor is a 4-connected occupancy grid ([`map`]) turned into a
//! weighted adjacency matrix for Dijkstra planning ([`planner`]). Along the
//! route, RFID landmark tags ([`rfid`]) let the robot fix its position, and
//! a noisy binary obstacle detector ([`detection`]) triggers replanning.
//! [`mission`] ties these into an outbound/dwell/return delivery run and
//! [`harness`] runs Monte Carlo sweeps over tag density and route length.

pub mod detection;
pub mod harness;
pub mod map;
pub mod mission;
pub mod planner;
pub mod rfid;
pub mod robot;
pub mod scenario;

pub use map::{grid_to_graph, CellCoord, GridMap, VectorGraph, VertexLabel, INF};
pub use mission::{run_mission, MissionLog, Outcome, SimConfig};
pub use planner::{dijkstra, grid_count, reverse_path, shortest_path, GridCount, Path};
pub use scenario::{load_scenario, save_scenario, Scenario};
