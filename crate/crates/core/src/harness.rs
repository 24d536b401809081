//! Monte Carlo sweeps over tag density and route length, with CSV and SVG
//! output.

use std::fmt::Write as _;
use std::io;
use std::path::Path as FsPath;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::{grid_to_graph, CellCoord, GridMap, MapError};
use crate::mission::{run_mission_on, SimConfig, SimError};
use crate::planner::shortest_path;
use crate::rfid::{encode, TagPlacement};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("sweep configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    TagCount,
    GridNumber,
}

impl SweepVariable {
    pub fn label(self) -> &'static str {
        match self {
            SweepVariable::TagCount => "tag count",
            SweepVariable::GridNumber => "grid number",
        }
    }
}

/// How a grid sweep stretches the route: `sector_cells` columns of the base
/// map form one sector, tiled `grid_number` times along the columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectorRule {
    pub sector_cells: usize,
    pub tags_per_sector: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<usize>,
    pub trials_per_point: usize,
    pub base: SimConfig,
    pub master_seed: u64,
    pub sector: Option<SectorRule>,
}

impl SweepConfig {
    /// Builds a sweep from a scenario's `sweep` block.
    pub fn from_scenario(s: &Scenario) -> Result<Self, HarnessError> {
        let doc = s
            .sweep
            .as_ref()
            .ok_or_else(|| config_err("scenario has no sweep block"))?;
        let variable = match doc.kind.as_str() {
            "tags" => SweepVariable::TagCount,
            "grids" => SweepVariable::GridNumber,
            other => return Err(config_err(format!("unknown sweep kind {other:?}"))),
        };
        let sector = match (doc.sector_cells, doc.tags_per_sector) {
            (Some(sector_cells), Some(tags_per_sector)) => Some(SectorRule {
                sector_cells,
                tags_per_sector,
            }),
            (None, None) => None,
            _ => return Err(config_err("sector_cells and tags_per_sector go together")),
        };
        Ok(Self {
            variable,
            values: doc.values.clone(),
            trials_per_point: doc.trials,
            base: s.config.clone(),
            master_seed: doc.master_seed,
            sector,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: usize,
    pub distance_m: f64,
    pub successes: usize,
    pub trials: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Row with the highest success rate; the first one on ties.
    pub fn peak(&self) -> Option<&SweepRow> {
        self.rows.iter().fold(None, |best: Option<&SweepRow>, r| match best {
            Some(b) if b.success_rate >= r.success_rate => Some(b),
            _ => Some(r),
        })
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one trial. Depends only on its own coordinates, so points can be
/// run in any order or subset.
pub fn trial_seed(master_seed: u64, value: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ value as u64) ^ trial as u64)
}

/// Places `count` tags at evenly spaced cells of `route`, first on the start
/// and last on the goal, coded by their position.
pub fn place_tags_along(route: &[CellCoord], count: usize) -> Result<Vec<TagPlacement>, HarnessError> {
    if count < 2 {
        return Err(config_err("at least two tags are needed"));
    }
    if count > route.len() {
        return Err(config_err(format!(
            "{count} tags do not fit on a route of {} cells",
            route.len()
        )));
    }
    let last = route.len() - 1;
    (0..count)
        .map(|i| {
            // rounded i * last / (count - 1), in integers
            let idx = (2 * i * last + (count - 1)) / (2 * (count - 1));
            let code = encode(i, count).map_err(|e| config_err(e.to_string()))?;
            Ok(TagPlacement::new(route[idx], code))
        })
        .collect()
}

/// Cells of the static shortest route of `config`.
pub fn planned_route(config: &SimConfig) -> Result<(Vec<CellCoord>, f64), HarnessError> {
    let g = grid_to_graph(&config.map)?;
    let a = g.locate_cell(config.source)?;
    let b = g.locate_cell(config.dest)?;
    let p = shortest_path(&g, a, b).map_err(|e| config_err(e.to_string()))?;
    let cells = p.cells(&g).map_err(|e| config_err(e.to_string()))?;
    Ok((cells, p.cost))
}

/// Scenario for one tag-count point: the base map with `count` tags spread
/// over its planned route.
pub fn tag_scenario(base: &SimConfig, count: usize) -> Result<(SimConfig, f64), HarnessError> {
    base.validate()?;
    let (route, cost) = planned_route(base)?;
    let mut cfg = base.clone();
    cfg.tags = place_tags_along(&route, count)?;
    Ok((cfg, cost))
}

/// Scenario for one grid-number point. The `sector_cells` columns starting
/// at the source column are tiled `grid_number` times plus one closing
/// column, with the source column count kept as margin on both ends. The
/// route runs along the source row across all sectors.
pub fn grid_scenario(base: &SimConfig, rule: SectorRule, grid_number: usize) -> Result<(SimConfig, f64), HarnessError> {
    if grid_number == 0 || rule.sector_cells == 0 {
        return Err(config_err("grid number and sector length must be positive"));
    }
    let m = &base.map;
    let width = rule.sector_cells;
    let pad = base.source.col;
    let tile = |set: &std::collections::BTreeSet<CellCoord>| -> Vec<CellCoord> {
        set.iter()
            .filter(|c| c.col >= pad && c.col < pad + width)
            .flat_map(|c| (0..grid_number).map(move |s| CellCoord::new(c.row, c.col + s * width)))
            .collect()
    };
    let cols = grid_number * width + 1 + 2 * pad;
    let map = GridMap::new(
        m.rows(),
        cols,
        m.cell_size(),
        tile(m.obstacles()),
        tile(m.dynamic_truth()),
    )?;
    let row = base.source.row;
    let mut cfg = base.clone();
    cfg.map = map;
    cfg.source = CellCoord::new(row, pad);
    cfg.dest = CellCoord::new(row, pad + grid_number * width);
    cfg.tags.clear();
    cfg.validate()?;
    let (route, cost) = planned_route(&cfg)?;
    cfg.tags = place_tags_along(&route, rule.tags_per_sector * grid_number + 1)?;
    Ok((cfg, cost))
}

/// Runs `trials` missions of one scenario and counts successes.
pub fn run_point(cfg: &SimConfig, master_seed: u64, value: usize, trials: usize) -> Result<usize, HarnessError> {
    let graph = grid_to_graph(&cfg.map)?;
    let mut successes = 0;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(master_seed, value, t));
        let log = run_mission_on(cfg, graph.clone(), &mut rng)?;
        successes += usize::from(log.outcome.is_success());
    }
    Ok(successes)
}

fn sweep_with(
    config: &SweepConfig,
    build: impl Fn(usize) -> Result<(SimConfig, f64), HarnessError>,
) -> Result<SweepResult, HarnessError> {
    if config.trials_per_point == 0 {
        return Err(config_err("trials per point must be at least 1"));
    }
    if config.values.is_empty() {
        return Err(config_err("no sweep values"));
    }
    let rows = config
        .values
        .iter()
        .map(|&v| {
            let (cfg, distance_m) = build(v)?;
            let successes = run_point(&cfg, config.master_seed, v, config.trials_per_point)?;
            Ok(SweepRow {
                variable: v,
                distance_m,
                successes,
                trials: config.trials_per_point,
                success_rate: successes as f64 / config.trials_per_point as f64,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(SweepResult {
        variable: config.variable,
        rows,
    })
}

/// Success rate against the number of tags spread along the route.
pub fn sweep_tags(config: &SweepConfig) -> Result<SweepResult, HarnessError> {
    if config.variable != SweepVariable::TagCount {
        return Err(config_err("sweep_tags needs a tag-count sweep"));
    }
    sweep_with(config, |n| tag_scenario(&config.base, n))
}

/// Success rate against route length measured in grid sectors.
pub fn sweep_grids(config: &SweepConfig) -> Result<SweepResult, HarnessError> {
    if config.variable != SweepVariable::GridNumber {
        return Err(config_err("sweep_grids needs a grid-number sweep"));
    }
    let rule = config
        .sector
        .ok_or_else(|| config_err("grid sweeps need a sector rule"))?;
    if config.base.source == config.base.dest {
        return Err(config_err("zero-length route"));
    }
    sweep_with(config, |g| grid_scenario(&config.base, rule, g))
}

pub const CSV_HEADER: [&str; 5] = ["variable", "distance_m", "successes", "trials", "success_rate"];

pub fn write_csv<W: io::Write>(result: &SweepResult, out: W) -> Result<(), HarnessError> {
    if result.rows.is_empty() {
        return Err(config_err("empty sweep result"));
    }
    let mut w = csv::Writer::from_writer(out);
    for r in &result.rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<SweepRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(config_err(format!("unexpected CSV header {header:?}")));
    }
    Ok(r.deserialize().collect::<Result<Vec<SweepRow>, _>>()?)
}

pub fn emit_csv(result: &SweepResult, path: &FsPath) -> Result<(), HarnessError> {
    let f = std::fs::File::create(path)?;
    write_csv(result, io::BufWriter::new(f))
}

/// Success-rate polyline chart. Self-contained SVG, no scripts or fonts.
pub fn render_svg(result: &SweepResult, title: &str) -> Result<String, HarnessError> {
    if result.rows.is_empty() {
        return Err(config_err("empty sweep result"));
    }
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 20.0;
    const TOP: f64 = 40.0;
    const BOTTOM: f64 = 60.0;
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;

    let xmin = result.rows.iter().map(|r| r.variable).min().unwrap_or(0) as f64;
    let xmax = result.rows.iter().map(|r| r.variable).max().unwrap_or(1) as f64;
    let span = if xmax > xmin { xmax - xmin } else { 1.0 };
    let x = |v: f64| LEFT + (v - xmin) / span * pw;
    let y = |rate: f64| TOP + (1.0 - rate) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        W / 2.0,
        xml_escape(title)
    );
    // axes
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph
    );
    let _ = writeln!(
        s,
        r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}" stroke="black"/>"#,
        TOP + ph
    );
    for i in 0..=5 {
        let rate = f64::from(i) / 5.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="11">{:.1}</text>"#,
            LEFT - 6.0,
            y(rate) + 4.0,
            rate
        );
    }
    for r in &result.rows {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="11">{}</text>"#,
            x(r.variable as f64),
            TOP + ph + 16.0,
            r.variable
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#,
        LEFT + pw / 2.0,
        H - 16.0,
        result.variable.label()
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 18 {})">success rate</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    let points: Vec<String> = result
        .rows
        .iter()
        .map(|r| format!("{:.2},{:.2}", x(r.variable as f64), y(r.success_rate)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#,
        points.join(" ")
    );
    s.push_str("</svg>\n");
    Ok(s)
}

fn xml_escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn emit_svg(result: &SweepResult, path: &FsPath, title: &str) -> Result<(), HarnessError> {
    let svg = render_svg(result, title)?;
    std::fs::write(path, svg)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn route(n: usize) -> Vec<CellCoord> {
        (0..n).map(|c| CellCoord::new(0, c)).collect()
    }

    #[test]
    fn tags_spread_evenly_with_endpoint_codes() {
        let tags = place_tags_along(&route(61), 5).unwrap();
        let cols: Vec<_> = tags.iter().map(|t| t.pos.col).collect();
        assert_eq!(cols, vec![0, 15, 30, 45, 60]);
        assert_eq!(tags[0].code.to_string(), "00-01-11");
        assert_eq!(tags[4].code.to_string(), "00-10-11");
        assert!(tags[1..4].iter().all(|t| t.code.to_string() == "01-10-11"));

        let dense = place_tags_along(&route(10), 10).unwrap();
        assert_eq!(dense.len(), 10);
        assert!(place_tags_along(&route(10), 11).is_err());
        assert!(place_tags_along(&route(10), 1).is_err());
    }

    #[test]
    fn trial_seeds_are_independent_of_order() {
        assert_eq!(trial_seed(1, 20, 3), trial_seed(1, 20, 3));
        assert_ne!(trial_seed(1, 20, 3), trial_seed(1, 21, 3));
        assert_ne!(trial_seed(1, 20, 3), trial_seed(2, 20, 3));
        assert_ne!(trial_seed(1, 20, 3), trial_seed(1, 20, 4));
    }

    #[test]
    fn grid_scenario_tiles_sectors() {
        let map = GridMap::new(3, 10, 1.0, [CellCoord::new(2, 4)], [CellCoord::new(1, 7)]).unwrap();
        let base = SimConfig::new(map, CellCoord::new(0, 0), CellCoord::new(0, 9));
        let rule = SectorRule {
            sector_cells: 10,
            tags_per_sector: 2,
        };
        let (cfg, cost) = grid_scenario(&base, rule, 4).unwrap();
        assert_eq!(cfg.map.cols(), 41);
        assert_eq!(cost, 40.0);
        assert_eq!(cfg.map.obstacles().len(), 4);
        assert!(cfg.map.dynamic_truth().contains(&CellCoord::new(1, 37)));
        assert_eq!(cfg.tags.len(), 9);
        assert_eq!(cfg.dest, CellCoord::new(0, 40));
    }

    #[test]
    fn peak_prefers_first_maximum() {
        let row = |v, rate| SweepRow {
            variable: v,
            distance_m: 0.0,
            successes: 0,
            trials: 1,
            success_rate: rate,
        };
        let r = SweepResult {
            variable: SweepVariable::TagCount,
            rows: vec![row(1, 0.2), row(2, 0.9), row(3, 0.9)],
        };
        assert_eq!(r.peak().unwrap().variable, 2);
    }
}
