//! Obstacle detection: detector layer geometry, anchors and box-regression
//! loss as plain arithmetic, plus the binary occupancy sensor the planner
//! consumes and its confusion-matrix accounting.

use std::io;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::CellCoord;

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("invalid layer geometry: {0}")]
    InvalidGeometry(&'static str),
    #[error("layer output would be empty")]
    Degenerate,
    #[error("cannot split an extent of {extent} into {bins} bins")]
    BadBinCount { extent: usize, bins: usize },
    #[error("detection log is empty")]
    EmptyLog,
    #[error("detector probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

// ---------------------------------------------------------------------------
// Layer geometry
// ---------------------------------------------------------------------------

/// One spatial axis of a convolution or pooling layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerGeom {
    pub input_size: usize,
    pub pad: usize,
    pub dilation: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl LayerGeom {
    pub fn new(input_size: usize, pad: usize, dilation: usize, kernel: usize, stride: usize) -> Self {
        Self {
            input_size,
            pad,
            dilation,
            kernel,
            stride,
        }
    }

    /// Pooling layers have no dilation.
    pub fn pool(input_size: usize, pad: usize, kernel: usize, stride: usize) -> Self {
        Self::new(input_size, pad, 1, kernel, stride)
    }

    fn validate(&self) -> Result<(), DetectionError> {
        if self.input_size == 0 {
            return Err(DetectionError::InvalidGeometry("input size must be positive"));
        }
        if self.kernel == 0 {
            return Err(DetectionError::InvalidGeometry("kernel must be positive"));
        }
        if self.stride == 0 {
            return Err(DetectionError::InvalidGeometry("stride must be positive"));
        }
        if self.dilation == 0 {
            return Err(DetectionError::InvalidGeometry("dilation must be positive"));
        }
        Ok(())
    }

    fn padded(&self) -> usize {
        self.input_size + 2 * self.pad
    }
}

/// Convolution output length, rounding down:
/// `floor((in + 2*pad - (dilation*(kernel-1) + 1)) / stride) + 1`.
pub fn conv_output_size(g: &LayerGeom) -> Result<usize, DetectionError> {
    g.validate()?;
    let extent = g.dilation * (g.kernel - 1) + 1;
    let span = g.padded().checked_sub(extent).ok_or(DetectionError::Degenerate)?;
    Ok(span / g.stride + 1)
}

/// Pooling output length, rounding up:
/// `ceil((in + 2*pad - kernel) / stride) + 1`.
pub fn pool_output_size(g: &LayerGeom) -> Result<usize, DetectionError> {
    g.validate()?;
    let span = g.padded().checked_sub(g.kernel).ok_or(DetectionError::Degenerate)?;
    Ok(span.div_ceil(g.stride) + 1)
}

/// Splits an ROI of `roi_h x roi_w` cells into `bins_h x bins_w` pooling
/// bins. Along each axis the first `extent % bins` bins get the rounded-up
/// size and the rest the rounded-down size, so the bins tile the ROI.
/// Returns `[row][col] -> (bin_h, bin_w)`.
pub fn roi_bin_shapes(
    roi_h: usize,
    roi_w: usize,
    bins_h: usize,
    bins_w: usize,
) -> Result<Vec<Vec<(usize, usize)>>, DetectionError> {
    let heights = split_axis(roi_h, bins_h)?;
    let widths = split_axis(roi_w, bins_w)?;
    Ok(heights
        .iter()
        .map(|&h| widths.iter().map(|&w| (h, w)).collect())
        .collect())
}

fn split_axis(extent: usize, bins: usize) -> Result<Vec<usize>, DetectionError> {
    if extent == 0 || bins == 0 || bins > extent {
        return Err(DetectionError::BadBinCount { extent, bins });
    }
    let base = extent / bins;
    let extra = extent % bins;
    Ok((0..bins).map(|i| base + usize::from(i < extra)).collect())
}

// ---------------------------------------------------------------------------
// Anchors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSpec {
    pub scales: Vec<f64>,
    /// `(a, b)` means width:height = a:b.
    pub ratios: Vec<(u32, u32)>,
}

impl Default for AnchorSpec {
    fn default() -> Self {
        Self {
            scales: vec![128.0, 256.0, 512.0],
            ratios: vec![(1, 1), (1, 2), (2, 1)],
        }
    }
}

impl AnchorSpec {
    /// Anchors per feature-map location.
    pub fn k(&self) -> usize {
        self.scales.len() * self.ratios.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub scale: f64,
    pub ratio: (u32, u32),
    pub width: f64,
    pub height: f64,
}

/// Scale-major list of anchor boxes. Each box keeps the area `scale^2`.
pub fn generate_anchors(spec: &AnchorSpec) -> Vec<Anchor> {
    spec.scales
        .iter()
        .flat_map(|&scale| {
            spec.ratios.iter().map(move |&(a, b)| {
                let r = f64::from(a) / f64::from(b);
                Anchor {
                    scale,
                    ratio: (a, b),
                    width: scale * r.sqrt(),
                    height: scale / r.sqrt(),
                }
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Localization loss
// ---------------------------------------------------------------------------

/// Predicted (`t`) and target (`v`) box offsets, indexed `x, y, w, h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDelta {
    pub t: [f64; 4],
    pub v: [f64; 4],
}

pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

/// Derivative of [`smooth_l1`]; at `|x| == 1` both one-sided slopes agree.
pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

pub fn loc_loss(d: &BoxDelta) -> f64 {
    d.t.iter().zip(&d.v).map(|(t, v)| smooth_l1(t - v)).sum()
}

// ---------------------------------------------------------------------------
// Binary detector
// ---------------------------------------------------------------------------

/// Bernoulli occupancy sensor. By default it is symmetric: a cell's state is
/// reported correctly with probability `accuracy` whatever that state is.
/// `tpr` / `fpr` override the two error rates independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub accuracy: f64,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tpr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fpr: Option<f64>,
}

impl DetectorModel {
    pub const DEFAULT_ACCURACY: f64 = 0.8375;

    pub fn new(accuracy: f64, rng_seed: u64) -> Self {
        Self {
            accuracy,
            rng_seed,
            tpr: None,
            fpr: None,
        }
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        for p in [Some(self.accuracy), self.tpr, self.fpr].into_iter().flatten() {
            if !(0.0..=1.0).contains(&p) {
                return Err(DetectionError::BadProbability(p));
            }
        }
        Ok(())
    }

    pub fn true_positive_rate(&self) -> f64 {
        self.tpr.unwrap_or(self.accuracy)
    }

    pub fn false_positive_rate(&self) -> f64 {
        self.fpr.unwrap_or(1.0 - self.accuracy)
    }
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self::new(Self::DEFAULT_ACCURACY, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub cell: CellCoord,
    pub observed_occupied: bool,
    pub truth_occupied: bool,
    pub time: f64,
}

impl DetectionEvent {
    pub fn is_correct(&self) -> bool {
        self.observed_occupied == self.truth_occupied
    }
}

/// Probes one cell.
pub fn detect<R: Rng + ?Sized>(
    cell: CellCoord,
    truth_occupied: bool,
    time: f64,
    model: &DetectorModel,
    rng: &mut R,
) -> DetectionEvent {
    let p_report_occupied = if truth_occupied {
        model.true_positive_rate()
    } else {
        model.false_positive_rate()
    };
    DetectionEvent {
        cell,
        observed_occupied: rng.gen_bool(p_report_occupied),
        truth_occupied,
        time,
    }
}

/// Confusion counts with "occupied" as the positive class. Ratios whose
/// denominator is zero are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: f64,
}

impl DetectionMetrics {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn compute_metrics(events: &[DetectionEvent]) -> Result<DetectionMetrics, DetectionError> {
    if events.is_empty() {
        return Err(DetectionError::EmptyLog);
    }
    let mut m = DetectionMetrics::default();
    for e in events {
        match (e.observed_occupied, e.truth_occupied) {
            (true, true) => m.tp += 1,
            (true, false) => m.fp += 1,
            (false, true) => m.fn_ += 1,
            (false, false) => m.tn += 1,
        }
    }
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    m.precision = ratio(m.tp, m.tp + m.fp);
    m.recall = ratio(m.tp, m.tp + m.fn_);
    m.accuracy = (m.tp + m.tn) as f64 / m.total() as f64;
    Ok(m)
}

#[derive(Serialize, Deserialize)]
struct EventRow {
    time_s: f64,
    row: usize,
    col: usize,
    observed: u8,
    truth: u8,
}

/// Writes `time_s,row,col,observed,truth` with 0/1 flags.
pub fn write_events_csv<W: io::Write>(events: &[DetectionEvent], out: W) -> Result<(), DetectionError> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(EventRow {
            time_s: e.time,
            row: e.cell.row,
            col: e.cell.col,
            observed: u8::from(e.observed_occupied),
            truth: u8::from(e.truth_occupied),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_csv<R: io::Read>(input: R) -> Result<Vec<DetectionEvent>, DetectionError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .map(|row| {
            let row: EventRow = row?;
            Ok(DetectionEvent {
                cell: CellCoord::new(row.row, row.col),
                observed_occupied: row.observed != 0,
                truth_occupied: row.truth != 0,
                time: row.time_s,
            })
        })
        .collect()
}
