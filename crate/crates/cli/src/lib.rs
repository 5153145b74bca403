//! Command-line front end: config parsing, subcommands, and report output.

pub mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

use semidim_core::bowen::{dimension_estimate, exhaustion_roots, DimensionConfig, DimensionReport};
use semidim_core::family::Family;
use semidim_core::inducing::{build_induced, inducing_dimension_report, pb_osc_certificate, DEFAULT_INDUCED_WARN};
use semidim_core::pressure::{exhaustion_curve, EstimatorMode, PressureTable};
use semidim_core::render::{
    backward_cloud_chains, escape_grid, rasterize_cloud, write_pgm, write_png, BBox, RasterGrid,
};
use semidim_core::semigroup::{BackwardTree, GeneratorSystem, TreeOptions};
use semidim_core::{RootOptions, SpherePoint};

use config::{parse_config, FamilySpec, RenderMode, RunConfig};

/// Chains used for backward clouds; fixed so output does not depend on
/// the thread count.
const CLOUD_CHAINS: usize = 8;
const BBOX_SAMPLE: usize = 20_000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("invalid input: {0}")]
    Input(semidim_core::Error),
    #[error("numeric failure: {0}")]
    Numeric(semidim_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. } | CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<semidim_core::Error> for CliError {
    fn from(e: semidim_core::Error) -> Self {
        match e {
            semidim_core::Error::Io(io) => CliError::Io(io.to_string()),
            e if e.is_numeric() => CliError::Numeric(e),
            e => CliError::Input(e),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(
    name = "semidim",
    version,
    about = "Dimension estimates and renderings for rational semigroups"
)]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "SEMIDIM_THREADS")]
    pub threads: Option<usize>,
    /// Ordered reductions. All reductions are already ordered, so this only
    /// records the request.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated depth schedule, overriding the config.
    #[arg(long, value_delimiter = ',')]
    pub depths: Option<Vec<usize>>,
    /// Output path; stdout for text reports when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Direct,
    Difference,
}

impl From<ModeArg> for EstimatorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Direct => EstimatorMode::Direct,
            ModeArg::Difference => EstimatorMode::Difference,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// log Z_n(t) table as CSV.
    Pressure(Common),
    /// Bowen-root report as JSON plus a CSV of level roots.
    Dim {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Bowen roots and pressures of successive truncations as CSV.
    Exhaust(Common),
    /// Inducing report for a two-generator polynomial pair as JSON.
    Induce {
        #[command(flatten)]
        common: Common,
        /// Attach a PB-OSC certificate.
        #[arg(long)]
        certify: bool,
    },
    /// PB-OSC certificate as JSON.
    CheckPbosc(Common),
    /// Raster image (PNG if the output ends in .png, PGM otherwise).
    Render {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<RenderMode>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
    },
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("semidim: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Schema {
                pointer: "/threads".into(),
                message: "thread count must be ≥ 1".into(),
            });
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Pressure(c) => {
            let cfg = load(&c)?;
            emit_text(c.out.as_deref().or(cfg.out.as_deref()), &pressure_csv(&cfg)?)
        }
        Command::Dim { common, mode } => {
            let mut cfg = load(&common)?;
            if let Some(m) = mode {
                cfg.mode = m.into();
            }
            let report = dim_report(&cfg)?;
            let out = common.out.as_deref().or(cfg.out.as_deref());
            emit_text(out, &to_json(&report))?;
            if let Some(path) = out {
                write_file(&path.with_extension("csv"), level_root_csv(&report).as_bytes())?;
            }
            Ok(())
        }
        Command::Exhaust(c) => {
            let mut cfg = load(&c)?;
            if let Some(d) = c.depths.as_ref().and_then(|d| d.last()) {
                cfg.exhaust.depth = *d;
            }
            emit_text(c.out.as_deref().or(cfg.out.as_deref()), &exhaust_csv(&cfg)?)
        }
        Command::Induce { common, certify } => {
            let mut cfg = load(&common)?;
            if let Some(d) = &common.depths {
                cfg.inducing.depths = d.clone();
            }
            let (f1, f2) = cfg.pair()?;
            let cert = if certify {
                Some(pb_osc_certificate(&f1, &f2, &cfg.pbosc)?)
            } else {
                None
            };
            let report = inducing_dimension_report(&f1, &f2, &cfg.inducing, cert)?;
            emit_text(common.out.as_deref().or(cfg.out.as_deref()), &to_json(&report))
        }
        Command::CheckPbosc(c) => {
            let cfg = load(&c)?;
            let (f1, f2) = cfg.pair()?;
            let cert = pb_osc_certificate(&f1, &f2, &cfg.pbosc)?;
            emit_text(c.out.as_deref().or(cfg.out.as_deref()), &to_json(&cert))
        }
        Command::Render {
            common,
            mode,
            width,
            height,
        } => {
            let mut cfg = load(&common)?;
            if let Some(m) = mode {
                cfg.render.mode = m;
            }
            cfg.render.width = width.unwrap_or(cfg.render.width);
            cfg.render.height = height.unwrap_or(cfg.render.height);
            let out = common
                .out
                .clone()
                .or_else(|| cfg.out.clone())
                .ok_or_else(|| CliError::Schema {
                    pointer: "/out".into(),
                    message: "render needs an output path".into(),
                })?;
            let grid = render_grid(&cfg)?;
            let png = out.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
            if png {
                write_png(&grid, &out)?;
            } else {
                write_pgm(&grid, &out)?;
            }
            Ok(())
        }
    }
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = parse_config(&c.config)?;
    if let Some(d) = &c.depths {
        cfg.depths = d.clone();
        cfg.validate()?;
    }
    Ok(cfg)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn tree_options(cfg: &RunConfig) -> TreeOptions {
    TreeOptions {
        roots: RootOptions::default(),
        pruning: cfg.pruning,
    }
}

fn base_point(cfg: &RunConfig, system: &GeneratorSystem) -> Result<SpherePoint, CliError> {
    match cfg.base_points.first() {
        Some(&x) => Ok(x),
        None => Ok(system.default_base_point(&RootOptions::default())?),
    }
}

fn family(cfg: &RunConfig) -> Result<Family, CliError> {
    match &cfg.family {
        Some(FamilySpec::AffineTriadic) => Ok(Family::AffineTriadic),
        Some(FamilySpec::Induced { i1, i2 }) => Ok(Family::Induced {
            base: cfg.system()?,
            i1: i1.clone(),
            i2: i2.clone(),
        }),
        None => Err(CliError::Schema {
            pointer: "/family".into(),
            message: "this command needs a generator family".into(),
        }),
    }
}

/// The finite system a config describes: its generators, or a truncation of
/// its family (largest exhaustion size, or the inducing `r_max`).
pub fn config_system(cfg: &RunConfig) -> Result<GeneratorSystem, CliError> {
    match &cfg.family {
        None => cfg.system(),
        Some(FamilySpec::AffineTriadic) => Ok(Family::AffineTriadic.truncate(*cfg.exhaust.sizes.last().unwrap())?),
        Some(FamilySpec::Induced { i1, i2 }) => {
            let ind = build_induced(
                &cfg.system()?,
                i1,
                i2,
                cfg.inducing.r_max,
                DEFAULT_INDUCED_WARN,
                cfg.inducing.hard_cap,
            )?;
            for w in &ind.warnings {
                eprintln!("semidim: warning: {w}");
            }
            Ok(ind.generators)
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn pressure_csv(cfg: &RunConfig) -> Result<String, CliError> {
    let system = config_system(cfg)?;
    let x = base_point(cfg, &system)?;
    let n_max = *cfg.depths.last().unwrap();
    let tree = BackwardTree::build(&system, x, n_max, tree_options(cfg))?;
    let table = PressureTable::compute(&tree, n_max, &cfg.t_grid)?;
    let mut s = String::from("n,t,log_z,direct,difference\n");
    for n in 0..=n_max {
        for (j, t) in cfg.t_grid.iter().enumerate() {
            let _ = writeln!(
                s,
                "{n},{t},{},{},{}",
                table.log_z[n][j],
                fmt_opt(table.estimator_direct(n, j)),
                fmt_opt(table.estimator_diff(n, j))
            );
        }
    }
    Ok(s)
}

pub fn dim_report(cfg: &RunConfig) -> Result<DimensionReport, CliError> {
    let system = config_system(cfg)?;
    let dc = DimensionConfig {
        depths: cfg.depths.clone(),
        mode: cfg.mode,
        bracket: (cfg.bracket[0], cfg.bracket[1]),
        base_points: cfg.base_points.clone(),
        tree: tree_options(cfg),
        osc_asserted: cfg.osc_asserted,
        sensitivity_depth: cfg.sensitivity_depth,
    };
    Ok(dimension_estimate(&system, &dc)?)
}

pub fn level_root_csv(report: &DimensionReport) -> String {
    let mut s = String::from("n,t_root_direct,t_root_difference,distortion_ratio,pruned_mass_bound\n");
    for r in &report.level_roots {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.n,
            fmt_opt(r.direct),
            fmt_opt(r.difference),
            fmt_opt(r.distortion_ratio),
            r.pruned_mass_bound
        );
    }
    s
}

pub fn exhaust_csv(cfg: &RunConfig) -> Result<String, CliError> {
    let fam = family(cfg)?;
    let ex = &cfg.exhaust;
    let depth = ex.depth;
    let opts = TreeOptions {
        roots: RootOptions::default(),
        pruning: ex.pruning,
    };
    let x = cfg.base_points.first().copied();
    let bracket = (cfg.bracket[0], cfg.bracket[1]);
    let roots = exhaustion_roots(&fam, &ex.sizes, depth, ex.mode, x, bracket, &opts)?;
    let pressure = exhaustion_curve(&fam, &ex.sizes, ex.t, x, depth, ex.mode, &opts)?;
    let mut s = String::from("size,root,pressure\n");
    for (r, p) in roots.iter().zip(&pressure) {
        let _ = writeln!(s, "{},{},{}", r.size, r.root, p.estimate);
    }
    Ok(s)
}

fn fitted_bbox(points: &[num_complex::Complex64]) -> Result<BBox, CliError> {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in points {
        x0 = x0.min(z.re);
        x1 = x1.max(z.re);
        y0 = y0.min(z.im);
        y1 = y1.max(z.im);
    }
    let pad = 0.1 * (x1 - x0).max(y1 - y0).max(1e-6);
    // square box around the cloud so pixels are square
    let half = 0.5 * (x1 - x0).max(y1 - y0) + pad;
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    Ok(BBox::new(cx - half, cx + half, cy - half, cy + half)?)
}

pub fn render_grid(cfg: &RunConfig) -> Result<RasterGrid, CliError> {
    let r = &cfg.render;
    let system = config_system(cfg)?;
    let roots = RootOptions::default();
    let x = base_point(cfg, &system)?;
    let bbox = match r.bbox {
        Some([a, b, c, d]) => BBox::new(a, b, c, d).map_err(|e| CliError::Schema {
            pointer: "/render/bbox".into(),
            message: e.to_string(),
        })?,
        None => {
            let n = BBOX_SAMPLE.min(r.points.max(1));
            fitted_bbox(&backward_cloud_chains(&system, x, n, r.burn_in, cfg.seed, CLOUD_CHAINS, &roots)?.points)?
        }
    };
    match r.mode {
        RenderMode::Escape => {
            let radius = match r.escape_radius.or_else(|| system.escape_radius()) {
                Some(v) => v,
                None => {
                    return Err(CliError::Schema {
                        pointer: "/render/mode".into(),
                        message: "escape rendering needs polynomial generators".into(),
                    })
                }
            };
            let grid = escape_grid(&system, bbox, r.width, r.height, r.max_depth, radius, r.node_cap)?;
            Ok(grid.to_raster())
        }
        RenderMode::Cloud => {
            let cloud = backward_cloud_chains(&system, x, r.points, r.burn_in, cfg.seed, CLOUD_CHAINS, &roots)?;
            Ok(rasterize_cloud(&cloud, bbox, r.width, r.height, r.log_intensity)?)
        }
    }
}
