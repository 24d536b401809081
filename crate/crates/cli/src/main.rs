//! `adrnav` command-line harness.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adrnav_core::detection::{conv_output_size, pool_output_size, write_events_csv, DetectionError, LayerGeom};
use adrnav_core::harness::{
    emit_csv, emit_svg, place_tags_along, planned_route, sweep_grids, sweep_tags, HarnessError, SectorRule,
    SweepConfig, SweepResult, SweepVariable,
};
use adrnav_core::map::grid_to_graph;
use adrnav_core::mission::{run_mission, SimError};
use adrnav_core::planner::{grid_count, shortest_path};
use adrnav_core::scenario::{load_scenario_file, Scenario, ScenarioError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "adrnav", version, about = "Delivery robot navigation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shortest route and its row/column move count.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One full delivery mission.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Defaults to the scenario's detector seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success rate against the number of tags on the route.
    SweepTags(SweepArgs),
    /// Success rate against route length in grid sectors.
    SweepGrids(SweepArgs),
    /// RFID tag utilities.
    Tags {
        #[command(subcommand)]
        command: TagsCommand,
    },
    /// Detector network utilities.
    Odm {
        #[command(subcommand)]
        command: OdmCommand,
    },
}

#[derive(Subcommand)]
enum TagsCommand {
    /// Evenly spaced, coded tags along the planned route.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OdmCommand {
    /// Output sizes of conv/pool layers. Without `--layers`, a VGG16 stack on
    /// a 224 input.
    Geom {
        /// CSV with header `name,kind,input,pad,dilation,kernel,stride`.
        #[arg(long)]
        layers: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the sweep's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides trials per point.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Io(String),
    /// stdout was closed by the reader, e.g. `| head`.
    Closed,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Io(_) => 2,
            CliError::Closed => 0,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Closed => write!(f, "output closed"),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            CliError::Closed
        } else {
            CliError::Io(e.to_string())
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Io(e) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io(_) | HarnessError::Csv(_) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<DetectionError> for CliError {
    fn from(e: DetectionError) -> Self {
        match e {
            DetectionError::Io(_) | DetectionError::Csv(_) => CliError::Io(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn out_dir(dir: &Path) -> Result<&Path, CliError> {
    fs::create_dir_all(dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(config)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn plan(scenario: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let s = load_scenario_file(scenario)?;
    let cfg = &s.config;
    cfg.validate()?;
    let g = grid_to_graph(&cfg.map).map_err(config)?;
    let a = g.locate_cell(cfg.source).map_err(config)?;
    let b = g.locate_cell(cfg.dest).map_err(config)?;
    let path = shortest_path(&g, a, b).map_err(config)?;
    let cells = path.cells(&g).map_err(config)?;
    let gc = grid_count(&path, &g, &cfg.map).map_err(config)?;

    let mut stdout = io::stdout().lock();
    let route: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
    writeln!(stdout, "path: {}", route.join(" -> "))?;
    writeln!(stdout, "cost: {}", path.cost)?;
    writeln!(
        stdout,
        "grid count: {} row moves + {} column moves = {}",
        gc.row_moves, gc.col_moves, gc.total
    )?;
    writeln!(stdout)?;
    writeln!(stdout, "step,row,col")?;
    for (i, c) in cells.iter().enumerate() {
        writeln!(stdout, "{i},{},{}", c.row, c.col)?;
    }
    stdout.flush()?;

    if let Some(dir) = out {
        let dir = out_dir(dir)?;
        let mut w = csv::Writer::from_path(dir.join("plan.csv"))?;
        w.write_record(["step", "row", "col"])?;
        for (i, c) in cells.iter().enumerate() {
            w.write_record([i.to_string(), c.row.to_string(), c.col.to_string()])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("grid_count.csv"))?;
        w.write_record(["row_moves", "col_moves", "total", "cost"])?;
        w.write_record([
            gc.row_moves.to_string(),
            gc.col_moves.to_string(),
            gc.total.to_string(),
            path.cost.to_string(),
        ])?;
        w.flush()?;
    }
    Ok(())
}

fn run(scenario: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), CliError> {
    let s = load_scenario_file(scenario)?;
    let seed = seed.unwrap_or(s.config.detector.rng_seed);
    let log = run_mission(&s.config, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let summary = log.summary();
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{}", serde_json::to_string_pretty(&summary).map_err(config)?)?;
    stdout.flush()?;
    if let Some(dir) = out {
        let dir = out_dir(dir)?;
        let f = fs::File::create(dir.join("mission_log.csv"))?;
        log.write_csv(io::BufWriter::new(f))?;
        let f = fs::File::create(dir.join("detections.csv"))?;
        write_events_csv(&log.detections(), io::BufWriter::new(f))?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(())
}

fn sweep_config(s: &Scenario, want: SweepVariable, args: &SweepArgs) -> Result<SweepConfig, CliError> {
    let mut cfg = match s.sweep {
        Some(_) => SweepConfig::from_scenario(s)?,
        None => SweepConfig {
            variable: want,
            values: match want {
                SweepVariable::TagCount => (5..=50).step_by(5).collect(),
                SweepVariable::GridNumber => (4..=12).collect(),
            },
            trials_per_point: 500,
            base: s.config.clone(),
            master_seed: 0,
            sector: match want {
                SweepVariable::TagCount => None,
                SweepVariable::GridNumber => Some(SectorRule {
                    sector_cells: 10,
                    tags_per_sector: 2,
                }),
            },
        },
    };
    if cfg.variable != want {
        return Err(config(format!("scenario describes a {} sweep", cfg.variable.label())));
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials_per_point = trials;
    }
    Ok(cfg)
}

fn print_sweep(result: &SweepResult) -> io::Result<()> {
    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "{:>12} {:>10} {:>9} {:>7} {:>7}",
        result.variable.label(),
        "distance_m",
        "successes",
        "trials",
        "rate"
    )?;
    for r in &result.rows {
        writeln!(
            stdout,
            "{:>12} {:>10.1} {:>9} {:>7} {:>7.3}",
            r.variable, r.distance_m, r.successes, r.trials, r.success_rate
        )?;
    }
    if let Some(p) = result.peak() {
        writeln!(stdout, "peak: {} at {:.3}", p.variable, p.success_rate)?;
    }
    stdout.flush()
}

fn sweep(args: &SweepArgs, want: SweepVariable) -> Result<(), CliError> {
    let s = load_scenario_file(&args.scenario)?;
    let cfg = sweep_config(&s, want, args)?;
    let (result, stem, title) = match want {
        SweepVariable::TagCount => (sweep_tags(&cfg)?, "sweep_tags", "Success rate vs tag count"),
        SweepVariable::GridNumber => (sweep_grids(&cfg)?, "sweep_grids", "Success rate vs grid number"),
    };
    print_sweep(&result)?;
    let dir = out_dir(&args.out)?;
    if matches!(args.format, Format::Csv | Format::Both) {
        emit_csv(&result, &dir.join(format!("{stem}.csv")))?;
    }
    if matches!(args.format, Format::Svg | Format::Both) {
        emit_svg(&result, &dir.join(format!("{stem}.svg")), title)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct TagOut {
    pos: [usize; 2],
    code: String,
    read_range_m: f64,
}

fn tags_plan(scenario: &Path, count: usize, out: Option<&Path>) -> Result<(), CliError> {
    let s = load_scenario_file(scenario)?;
    s.config.validate()?;
    let (route, _) = planned_route(&s.config)?;
    let tags = place_tags_along(&route, count)?;
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "index,row,col,code")?;
    for (i, t) in tags.iter().enumerate() {
        writeln!(stdout, "{i},{},{},{}", t.pos.row, t.pos.col, t.code)?;
    }
    stdout.flush()?;
    if let Some(dir) = out {
        let list: Vec<_> = tags
            .iter()
            .map(|t| TagOut {
                pos: [t.pos.row, t.pos.col],
                code: t.code.to_string(),
                read_range_m: t.read_range,
            })
            .collect();
        write_json(&out_dir(dir)?.join("tags.json"), &list)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerRow {
    name: String,
    kind: String,
    input: usize,
    pad: usize,
    dilation: usize,
    kernel: usize,
    stride: usize,
}

fn vgg16() -> Vec<LayerRow> {
    let blocks = [2, 2, 3, 3, 3];
    let mut rows = Vec::new();
    let mut size = 224;
    for (b, &convs) in blocks.iter().enumerate() {
        for i in 0..convs {
            rows.push(LayerRow {
                name: format!("conv{}_{}", b + 1, i + 1),
                kind: "conv".into(),
                input: size,
                pad: 1,
                dilation: 1,
                kernel: 3,
                stride: 1,
            });
        }
        rows.push(LayerRow {
            name: format!("pool{}", b + 1),
            kind: "pool".into(),
            input: size,
            pad: 0,
            dilation: 1,
            kernel: 2,
            stride: 2,
        });
        size /= 2;
    }
    rows
}

fn odm_geom(layers: Option<&Path>, out: Option<&Path>) -> Result<(), CliError> {
    let rows: Vec<LayerRow> = match layers {
        Some(p) => {
            let mut r = csv::Reader::from_path(p)?;
            r.deserialize().collect::<Result<_, _>>()?
        }
        None => vgg16(),
    };
    let mut table = Vec::with_capacity(rows.len());
    for row in rows {
        let out = match row.kind.as_str() {
            "conv" => conv_output_size(&LayerGeom::new(
                row.input,
                row.pad,
                row.dilation,
                row.kernel,
                row.stride,
            ))?,
            "pool" => pool_output_size(&LayerGeom::pool(row.input, row.pad, row.kernel, row.stride))?,
            other => return Err(config(format!("layer {}: unknown kind {other:?}", row.name))),
        };
        table.push((row, out));
    }
    let mut stdout = io::stdout().lock();
    writeln!(
        stdout,
        "{:<10} {:<5} {:>5} {:>4} {:>4} {:>4} {:>4} {:>6}",
        "name", "kind", "in", "pad", "dil", "k", "s", "out"
    )?;
    for (r, o) in &table {
        writeln!(
            stdout,
            "{:<10} {:<5} {:>5} {:>4} {:>4} {:>4} {:>4} {:>6}",
            r.name, r.kind, r.input, r.pad, r.dilation, r.kernel, r.stride, o
        )?;
    }
    stdout.flush()?;
    if let Some(dir) = out {
        let mut w = csv::Writer::from_path(out_dir(dir)?.join("layers.csv"))?;
        w.write_record(["name", "kind", "input", "pad", "dilation", "kernel", "stride", "output"])?;
        for (r, o) in &table {
            w.write_record([
                r.name.clone(),
                r.kind.clone(),
                r.input.to_string(),
                r.pad.to_string(),
                r.dilation.to_string(),
                r.kernel.to_string(),
                r.stride.to_string(),
                o.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Plan { scenario, out } => plan(&scenario, out.as_deref()),
        Command::Run { scenario, seed, out } => run(&scenario, seed, out.as_deref()),
        Command::SweepTags(args) => sweep(&args, SweepVariable::TagCount),
        Command::SweepGrids(args) => sweep(&args, SweepVariable::GridNumber),
        Command::Tags {
            command: TagsCommand::Plan { scenario, count, out },
        } => tags_plan(&scenario, count, out.as_deref()),
        Command::Odm {
            command: OdmCommand::Geom { layers, out },
        } => odm_geom(layers.as_deref(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Closed) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("adrnav: {e}");
            ExitCode::from(e.code())
        }
    }
}
