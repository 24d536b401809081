//! Robot kinematics and pose bookkeeping.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::map::CellCoord;

/// Ground speed in m/s of a wheel turning at `rpm` revolutions per minute.
pub fn linear_speed(rpm: f64, wheel_diameter: f64) -> f64 {
    rpm / 60.0 * PI * wheel_diameter
}

/// A cell plus a metric offset from its centre, `[d_row, d_col]` in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub cell: CellCoord,
    pub offset: [f64; 2],
}

impl Pose {
    pub fn at(cell: CellCoord) -> Self {
        Self {
            cell,
            offset: [0.0, 0.0],
        }
    }

    /// Metric position of the pose, with cell `(0,0)` centred at the origin.
    pub fn position(&self, cell_size: f64) -> [f64; 2] {
        [
            self.cell.row as f64 * cell_size + self.offset[0],
            self.cell.col as f64 * cell_size + self.offset[1],
        ]
    }

    pub fn distance_to(&self, cell: CellCoord, cell_size: f64) -> f64 {
        let [y, x] = self.position(cell_size);
        let [ty, tx] = Pose::at(cell).position(cell_size);
        (y - ty).hypot(x - tx)
    }
}

/// True and believed pose of the robot.
///
/// `drift` is the odometry error accumulated since the last landmark fix;
/// `est_pos.offset` carries the same error as a vector along the moves made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub true_pos: Pose,
    pub est_pos: Pose,
    pub drift: f64,
    pub wheel_rpm: f64,
    pub wheel_diameter: f64,
    pub clock: f64,
}

impl RobotState {
    pub fn new(start: CellCoord, wheel_rpm: f64, wheel_diameter: f64) -> Self {
        Self {
            true_pos: Pose::at(start),
            est_pos: Pose::at(start),
            drift: 0.0,
            wheel_rpm,
            wheel_diameter,
            clock: 0.0,
        }
    }

    pub fn cell(&self) -> CellCoord {
        self.true_pos.cell
    }

    pub fn speed(&self) -> f64 {
        linear_speed(self.wheel_rpm, self.wheel_diameter)
    }
}
