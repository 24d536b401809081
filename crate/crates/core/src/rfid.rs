//! RFID landmark tags: the `xx-yy-zz` code, its navigation meaning, the
//! read model and position fixes.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::CellCoord;
use crate::robot::{Pose, RobotState};

/// Longest distance at which a tag can be read, in meters.
pub const MAX_READ_RANGE_M: f64 = 15.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RfidError {
    #[error("malformed tag text {0:?}, expected xx-yy-zz with binary digits")]
    Malformed(String),
    #[error("tag {0} does not match a known navigation pattern")]
    InvalidCode(TagCode),
    #[error("route position {index} is invalid for a route of {len} tags")]
    BadIndex { index: usize, len: usize },
    #[error("read range {0} m must be in (0, 15]")]
    BadRange(f64),
    #[error("invalid read model: {0}")]
    BadModel(&'static str),
}

/// Six binary digits grouped in three 2-bit fields, written `xx-yy-zz`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TagCode {
    fields: [u8; 3],
}

impl TagCode {
    pub const SOURCE: TagCode = TagCode {
        fields: [0b00, 0b01, 0b11],
    };
    pub const DESTINATION: TagCode = TagCode {
        fields: [0b00, 0b10, 0b11],
    };
    pub const ON_PATH: TagCode = TagCode {
        fields: [0b01, 0b10, 0b11],
    };

    /// Each field must fit in two bits.
    pub fn new(xx: u8, yy: u8, zz: u8) -> Option<Self> {
        (xx < 4 && yy < 4 && zz < 4).then_some(Self { fields: [xx, yy, zz] })
    }

    pub fn xx(self) -> u8 {
        self.fields[0]
    }

    pub fn yy(self) -> u8 {
        self.fields[1]
    }

    pub fn zz(self) -> u8 {
        self.fields[2]
    }

    /// All 64 codes.
    pub fn all() -> impl Iterator<Item = TagCode> {
        (0..64u8).map(|b| TagCode {
            fields: [b >> 4, (b >> 2) & 3, b & 3],
        })
    }
}

impl fmt::Display for TagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c] = self.fields;
        write!(f, "{a:02b}-{b:02b}-{c:02b}")
    }
}

impl FromStr for TagCode {
    type Err = RfidError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RfidError::Malformed(s.to_owned());
        let b = s.as_bytes();
        if b.len() != 8 || b[2] != b'-' || b[5] != b'-' {
            return Err(bad());
        }
        let field = |i: usize| -> Result<u8, RfidError> {
            match (b[i], b[i + 1]) {
                (hi @ (b'0' | b'1'), lo @ (b'0' | b'1')) => Ok((hi - b'0') << 1 | (lo - b'0')),
                _ => Err(bad()),
            }
        };
        Ok(TagCode {
            fields: [field(0)?, field(3)?, field(6)?],
        })
    }
}

impl Serialize for TagCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TagCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NavDecision {
    AtSource,
    OnPath,
    AtDestination,
}

/// Only `00-01-11`, `00-10-11` and `01-10-11` carry a meaning.
pub fn decode(code: TagCode) -> Result<NavDecision, RfidError> {
    match code {
        TagCode::SOURCE => Ok(NavDecision::AtSource),
        TagCode::DESTINATION => Ok(NavDecision::AtDestination),
        TagCode::ON_PATH => Ok(NavDecision::OnPath),
        other => Err(RfidError::InvalidCode(other)),
    }
}

/// Code for the tag at `index` of a route carrying `len` tags.
pub fn encode(index: usize, len: usize) -> Result<TagCode, RfidError> {
    if len < 2 || index >= len {
        return Err(RfidError::BadIndex { index, len });
    }
    Ok(if index == 0 {
        TagCode::SOURCE
    } else if index == len - 1 {
        TagCode::DESTINATION
    } else {
        TagCode::ON_PATH
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TagPlacement {
    pub pos: CellCoord,
    pub code: TagCode,
    pub read_range: f64,
}

impl TagPlacement {
    pub fn new(pos: CellCoord, code: TagCode) -> Self {
        Self {
            pos,
            code,
            read_range: MAX_READ_RANGE_M,
        }
    }

    pub fn with_range(pos: CellCoord, code: TagCode, read_range: f64) -> Result<Self, RfidError> {
        if !(read_range > 0.0 && read_range <= MAX_READ_RANGE_M) {
            return Err(RfidError::BadRange(read_range));
        }
        Ok(Self { pos, code, read_range })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadModel {
    /// Wheel speed below which the reader cannot lock onto a tag.
    pub min_rpm: f64,
    /// Seconds spent standing still while the position fix completes.
    pub relocalization_duration: f64,
    /// Chance of a read when range and speed allow it.
    pub base_read_probability: f64,
}

impl Default for ReadModel {
    fn default() -> Self {
        Self {
            min_rpm: 200.0,
            relocalization_duration: 75.0,
            base_read_probability: 0.95,
        }
    }
}

impl ReadModel {
    pub fn validate(&self) -> Result<(), RfidError> {
        if !(0.0..=1.0).contains(&self.base_read_probability) {
            return Err(RfidError::BadModel("read probability outside [0, 1]"));
        }
        if !(self.relocalization_duration >= 0.0 && self.relocalization_duration.is_finite()) {
            return Err(RfidError::BadModel("relocalization duration must be >= 0"));
        }
        if self.min_rpm.is_nan() || self.min_rpm < 0.0 {
            return Err(RfidError::BadModel("minimum rpm must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadOutcome {
    Hit(TagCode),
    Miss,
}

/// One read attempt. A hit needs the tag within range of the robot's true
/// position and the wheels at or above `min_rpm`; given both, it succeeds
/// with `base_read_probability`. The RNG is only consumed past the gates.
pub fn attempt_read<R: Rng + ?Sized>(
    robot: &RobotState,
    tag: &TagPlacement,
    model: &ReadModel,
    cell_size: f64,
    rng: &mut R,
) -> ReadOutcome {
    if robot.true_pos.distance_to(tag.pos, cell_size) > tag.read_range {
        return ReadOutcome::Miss;
    }
    if robot.wheel_rpm < model.min_rpm {
        return ReadOutcome::Miss;
    }
    if rng.gen_bool(model.base_read_probability) {
        ReadOutcome::Hit(tag.code)
    } else {
        ReadOutcome::Miss
    }
}

/// Snaps the estimated pose onto the tag, clears drift and charges the
/// relocalization time. The robot does not move meanwhile.
pub fn relocalize(robot: &RobotState, tag: &TagPlacement, model: &ReadModel) -> RobotState {
    RobotState {
        est_pos: Pose::at(tag.pos),
        drift: 0.0,
        clock: robot.clock + model.relocalization_duration,
        ..robot.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn code(s: &str) -> TagCode {
        s.parse().unwrap()
    }

    #[test]
    fn decode_known_patterns() {
        assert_eq!(decode(code("00-01-11")), Ok(NavDecision::AtSource));
        assert_eq!(decode(code("00-10-11")), Ok(NavDecision::AtDestination));
        assert_eq!(decode(code("01-10-11")), Ok(NavDecision::OnPath));
        assert!(matches!(decode(code("11-11-11")), Err(RfidError::InvalidCode(_))));
    }

    #[test]
    fn encode_positions() {
        assert_eq!(encode(0, 5).unwrap().to_string(), "00-01-11");
        assert_eq!(encode(4, 5).unwrap().to_string(), "00-10-11");
        assert_eq!(encode(2, 5).unwrap().to_string(), "01-10-11");
        assert!(matches!(encode(5, 5), Err(RfidError::BadIndex { .. })));
        assert!(matches!(encode(0, 1), Err(RfidError::BadIndex { .. })));
    }

    #[test]
    fn malformed_text_rejected() {
        for bad in ["", "00-01-1", "00-01-111", "00_01_11", "00-02-11", "0a-01-11", "000111"] {
            assert!(bad.parse::<TagCode>().is_err(), "{bad}");
        }
    }

    #[test]
    fn all_codes_round_trip_and_61_rejected() {
        let all: Vec<_> = TagCode::all().collect();
        assert_eq!(all.len(), 64);
        for c in &all {
            let text = c.to_string();
            assert_eq!(text.len(), 8);
            assert_eq!(text.parse::<TagCode>().unwrap(), *c);
        }
        assert_eq!(all.iter().filter(|c| decode(**c).is_err()).count(), 61);
    }

    #[test]
    fn range_ceiling() {
        let p = CellCoord::new(0, 0);
        assert!(TagPlacement::with_range(p, TagCode::SOURCE, 15.0).is_ok());
        assert!(TagPlacement::with_range(p, TagCode::SOURCE, 15.1).is_err());
        assert!(TagPlacement::with_range(p, TagCode::SOURCE, 0.0).is_err());
    }

    fn robot_at(col: usize, rpm: f64) -> RobotState {
        RobotState::new(CellCoord::new(0, col), rpm, 0.1)
    }

    #[test]
    fn read_gates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tag = TagPlacement::new(CellCoord::new(0, 0), TagCode::ON_PATH);
        let certain = ReadModel {
            base_read_probability: 1.0,
            ..ReadModel::default()
        };
        assert_eq!(
            attempt_read(&robot_at(20, 250.0), &tag, &certain, 1.0, &mut rng),
            ReadOutcome::Miss
        );
        assert_eq!(
            attempt_read(&robot_at(1, 100.0), &tag, &certain, 1.0, &mut rng),
            ReadOutcome::Miss
        );
        assert_eq!(
            attempt_read(&robot_at(1, 250.0), &tag, &certain, 1.0, &mut rng),
            ReadOutcome::Hit(TagCode::ON_PATH)
        );
        assert_eq!(
            attempt_read(&robot_at(1, 200.0), &tag, &certain, 1.0, &mut rng),
            ReadOutcome::Hit(TagCode::ON_PATH)
        );
    }

    #[test]
    fn relocalize_resets_drift_and_charges_time() {
        let model = ReadModel::default();
        let tag = TagPlacement::new(CellCoord::new(0, 3), TagCode::ON_PATH);
        let mut r = robot_at(3, 200.0);
        r.drift = 0.8;
        r.est_pos.offset = [0.0, 0.8];
        let a = relocalize(&r, &tag, &model);
        assert_eq!(a.drift, 0.0);
        assert_eq!(a.clock, 75.0);
        assert_eq!(a.est_pos, Pose::at(tag.pos));
        assert_eq!(a.true_pos, r.true_pos);
        let b = relocalize(&a, &tag, &model);
        assert_eq!(b.est_pos, a.est_pos);
        assert_eq!(b.clock, 150.0);
    }

    #[test]
    fn serde_as_text() {
        let json = serde_json::to_string(&TagCode::ON_PATH).unwrap();
        assert_eq!(json, "\"01-10-11\"");
        let back: TagCode = serde_json::from_str(&json).unwrap();
        assert_eq!(back, TagCode::ON_PATH);
    }
}
