//! `evstereo` command line: `simulate`, `run`, `bench`, `eval`.
//!
//! Settings resolve as flag > `--config` file > built-in default. Exit codes:
//! 0 success, 1 input or config error, 2 write failure, 3 correctness failure.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::aer::{merge_streams, read_stream, write_stream, EventStream, StreamIoError};
use crate::bench::{compare_variants, evaluate_accuracy, event_rate_timeline, measure_throughput, BenchError, DEFAULT_REPEATS};
use crate::config::FlatConfig;
use crate::pipeline::{read_disparities, write_disparities, write_disparities_text, MatchConfig};
use crate::runtime::{run, RuntimeConfig, RuntimeError, Variant};
use crate::sim::{is_scene_key, load_scene, max_event_rate, read_ground_truth, simulate, write_ground_truth};

/// Config keys consumed outside the simulator.
pub const RUNTIME_KEYS: &[&str] = &[
    "variant",
    "batch_size",
    "channel_capacity",
    "window_radius",
    "d_max",
    "deadline_us",
    "repeats",
    "bin_us",
    "tolerance",
    "max_unmatched",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("write failed: {0}")]
    Io(String),
    #[error("correctness check failed: {0}")]
    Correctness(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Io(_) => 2,
            CliError::Correctness(_) => 3,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl From<RuntimeError> for CliError {
    fn from(e: RuntimeError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::EquivalenceViolation(_) => CliError::Correctness(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "evstereo", version, about = "Stereo event-camera simulation, disparity pipeline and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct SharedFlags {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub channel_capacity: Option<usize>,
    #[arg(long)]
    pub window_radius: Option<u16>,
    #[arg(long)]
    pub d_max: Option<u16>,
    #[arg(long)]
    pub deadline_us: Option<u64>,
    /// Output path (prefix for `simulate`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene into left/right event streams and ground truth.
    Simulate {
        #[command(flatten)]
        shared: SharedFlags,
    },
    /// Run the disparity pipeline on a stereo pair of streams.
    Run {
        #[command(flatten)]
        shared: SharedFlags,
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Write `t x y d score` text instead of binary.
        #[arg(long)]
        text: bool,
    },
    /// Compare all variants for equivalence and throughput.
    Bench {
        #[command(flatten)]
        shared: SharedFlags,
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
        /// Throughput CSV path; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        repeats: Option<usize>,
        /// Also write the input event-rate timeline CSV here.
        #[arg(long)]
        timeline: Option<PathBuf>,
        #[arg(long)]
        bin_us: Option<u64>,
    },
    /// Score a disparity file against simulator ground truth.
    Eval {
        #[command(flatten)]
        shared: SharedFlags,
        #[arg(long)]
        dsp: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        tolerance: Option<u16>,
        #[arg(long)]
        max_unmatched: Option<usize>,
        /// Accuracy CSV path; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

/// Merges the config file with flag overrides.
pub fn resolve_config(shared: &SharedFlags, extra: &[(&str, Option<String>)]) -> Result<FlatConfig, CliError> {
    let mut cfg = match &shared.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| input_err(format!("{}: {e}", p.display())))?;
            FlatConfig::parse(&text).map_err(input_err)?
        }
        None => FlatConfig::new(),
    };
    cfg.check_known(|k| is_scene_key(k) || RUNTIME_KEYS.contains(&k)).map_err(input_err)?;
    let flags = [
        ("seed", shared.seed.map(|v| v.to_string())),
        ("variant", shared.variant.map(|v| v.to_string())),
        ("batch_size", shared.batch_size.map(|v| v.to_string())),
        ("channel_capacity", shared.channel_capacity.map(|v| v.to_string())),
        ("window_radius", shared.window_radius.map(|v| v.to_string())),
        ("d_max", shared.d_max.map(|v| v.to_string())),
        ("deadline_us", shared.deadline_us.map(|v| v.to_string())),
    ];
    for (k, v) in flags.iter().chain(extra) {
        if let Some(v) = v {
            cfg.set(k, v.clone());
        }
    }
    if cfg.get_str("seed").is_none() {
        cfg.set("seed", crate::sim::SimulatorConfig::default().seed.to_string());
    }
    Ok(cfg)
}

fn scene_part(cfg: &FlatConfig) -> FlatConfig {
    let mut out = FlatConfig::new();
    for k in cfg.keys().filter(|k| is_scene_key(k)) {
        out.set(k, cfg.get_str(k).unwrap_or_default());
    }
    out
}

/// Runtime settings from a resolved config, with defaults filled in.
pub fn runtime_config(cfg: &FlatConfig) -> Result<RuntimeConfig, CliError> {
    let d = RuntimeConfig::default();
    let variant = match cfg.get_str("variant") {
        Some(s) => s.parse().map_err(CliError::Input)?,
        None => d.variant,
    };
    Ok(RuntimeConfig {
        variant,
        batch_size: cfg.get_or("batch_size", d.batch_size).map_err(input_err)?,
        channel_capacity: cfg.get_or("channel_capacity", d.channel_capacity).map_err(input_err)?,
        matching: MatchConfig {
            window_radius: cfg.get_or("window_radius", d.matching.window_radius).map_err(input_err)?,
            d_max: cfg.get_or("d_max", d.matching.d_max).map_err(input_err)?,
            deadline_us: cfg.get_or("deadline_us", d.matching.deadline_us).map_err(input_err)?,
        },
    })
}

/// Writes the fully resolved runtime settings back into `cfg` so echoes are complete.
fn echo_runtime(cfg: &mut FlatConfig, rc: &RuntimeConfig) {
    cfg.overlay(&crate::bench::runtime_config_echo(rc));
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| write_err(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

fn read_evs(path: &Path) -> Result<EventStream, CliError> {
    read_stream(open(path)?).map_err(|e| match e {
        StreamIoError::Io(io) => input_err(format!("{}: {io}", path.display())),
        other => input_err(format!("{}: {other}", path.display())),
    })
}

fn load_pair(left: &Path, right: &Path) -> Result<EventStream, CliError> {
    let (l, r) = (read_evs(left)?, read_evs(right)?);
    merge_streams(&l, &r).map_err(input_err)
}

fn write_text_report(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| write_err(p, e))
        }
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Io(e.to_string())),
    }
}

fn say(stdout: &mut dyn Write, text: impl AsRef<str>) -> Result<(), CliError> {
    stdout.write_all(text.as_ref().as_bytes()).map_err(|e| CliError::Io(e.to_string()))
}

fn echo_lines(cfg: &FlatConfig) -> String {
    cfg.to_string().lines().map(|l| format!("# {l}\n")).collect()
}

fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_simulate(shared: &SharedFlags, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(shared, &[])?;
    let prefix = shared.out.clone().ok_or_else(|| CliError::Input("simulate needs --out <prefix>".into()))?;
    let (scene, sim_cfg) = load_scene(&scene_part(&cfg)).map_err(input_err)?;
    let out = simulate(&scene, &sim_cfg).map_err(input_err)?;

    let paths = [suffixed(&prefix, ".left.evs"), suffixed(&prefix, ".right.evs"), suffixed(&prefix, ".gt")];
    for (s, p) in [(&out.left, &paths[0]), (&out.right, &paths[1])] {
        let mut w = create(p)?;
        write_stream(s, &mut w).map_err(|e| write_err(p, e))?;
    }
    let mut w = create(&paths[2])?;
    write_ground_truth(&out.ground_truth, &mut w).map_err(|e| write_err(&paths[2], e))?;

    let cam = &sim_cfg.camera;
    // Worst case: every pixel emits a full-range burst in one render step.
    let delta_max = (255 / sim_cfg.contrast_threshold) as f64;
    let bound = max_event_rate(cam.width.into(), cam.height.into(), delta_max, scene.render_step_us as f64 * 1e-6)
        .map_err(input_err)?;
    let step = scene.render_step_us.max(1);
    let peak_l = event_rate_timeline(&out.left, step)?.peak_events_per_s();
    let peak_r = event_rate_timeline(&out.right, step)?.peak_events_per_s();

    let mut echo = scene_part(&cfg);
    echo.set("seed", sim_cfg.seed.to_string());
    let mut s = echo_lines(&echo);
    s += &format!(
        "left events: {}\nright events: {}\nground truth records: {}\n\
         peak rate per camera: left {:.0} ev/s, right {:.0} ev/s (bound {:.3e} ev/s)\nwrote {}, {}, {}\n",
        out.left.len(),
        out.right.len(),
        out.ground_truth.len(),
        peak_l,
        peak_r,
        bound,
        paths[0].display(),
        paths[1].display(),
        paths[2].display()
    );
    say(stdout, s)
}

fn cmd_run(shared: &SharedFlags, left: &Path, right: &Path, text: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = resolve_config(shared, &[])?;
    let rc = runtime_config(&cfg)?;
    let out_path = shared.out.clone().ok_or_else(|| CliError::Input("run needs --out <file.dsp>".into()))?;
    let mixed = load_pair(left, right)?;
    let (disp, metrics) = run(&mixed, &rc)?;

    if cfg!(debug_assertions) && rc.variant != Variant::Sequential {
        let (reference, _) = run(&mixed, &rc.with_variant(Variant::Sequential))?;
        crate::bench::check_equivalence(rc.variant, &reference, &disp).map_err(|v| CliError::Correctness(v.to_string()))?;
    }

    let mut w = create(&out_path)?;
    let res = if text { write_disparities_text(&disp, &mut w) } else { write_disparities(&disp, &mut w) };
    res.map_err(|e| write_err(&out_path, e))?;

    echo_runtime(&mut cfg, &rc);
    let kev = measure_throughput(&metrics).map(|e| e.kev_per_s).unwrap_or(0.0);
    let mut s = echo_lines(&non_scene_part(&cfg));
    s += &format!(
        "input events: {}\ndisparity events: {}\nwall time: {:.6} s\nsink throughput: {:.3} keV/s\nwrote {}\n",
        mixed.len(),
        disp.len(),
        metrics.wall_time.as_secs_f64(),
        kev,
        out_path.display()
    );
    say(stdout, s)
}

/// The non-scene part of a resolved config.
fn non_scene_part(cfg: &FlatConfig) -> FlatConfig {
    let mut out = FlatConfig::new();
    for k in cfg.keys().filter(|k| !is_scene_key(k) || *k == "seed") {
        out.set(k, cfg.get_str(k).unwrap_or_default());
    }
    out
}

struct BenchArgs<'a> {
    left: &'a Path,
    right: &'a Path,
    report: Option<&'a Path>,
    repeats: Option<usize>,
    timeline: Option<&'a Path>,
    bin_us: Option<u64>,
}

fn cmd_bench(shared: &SharedFlags, a: BenchArgs<'_>, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = resolve_config(
        shared,
        &[("repeats", a.repeats.map(|v| v.to_string())), ("bin_us", a.bin_us.map(|v| v.to_string()))],
    )?;
    let rc = runtime_config(&cfg)?;
    let repeats = cfg.get_or("repeats", DEFAULT_REPEATS).map_err(input_err)?;
    let bin_us = cfg.get_or("bin_us", 1000u64).map_err(input_err)?;
    let mixed = load_pair(a.left, a.right)?;

    if let Some(p) = a.timeline {
        let tl = event_rate_timeline(&mixed, bin_us)?;
        write_text_report(Some(p), &tl.to_csv(), stdout)?;
    }
    let cmp = compare_variants(&mixed, &rc, repeats)?;
    let mut report = cmp.report;
    let mut echo = non_scene_part(&cfg);
    echo.overlay(&report.config_echo);
    report.config_echo = echo;
    write_text_report(a.report.or(shared.out.as_deref()), &report.to_csv(), stdout)?;
    if a.report.is_some() || shared.out.is_some() {
        let mut s = String::from("variants equivalent\n");
        for e in &report.entries {
            s += &format!("{:<10} {:>10} events {:>12.3} keV/s\n", e.variant, e.events, e.kev_per_s);
        }
        say(stdout, s)?;
    }
    Ok(())
}

fn cmd_eval(
    shared: &SharedFlags,
    dsp: &Path,
    gt: &Path,
    tolerance: Option<u16>,
    max_unmatched: Option<usize>,
    report: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = resolve_config(
        shared,
        &[("tolerance", tolerance.map(|v| v.to_string())), ("max_unmatched", max_unmatched.map(|v| v.to_string()))],
    )?;
    let tol = cfg.get_or("tolerance", 1u16).map_err(input_err)?;
    let max_unmatched = cfg.get_or("max_unmatched", 0usize).map_err(input_err)?;
    let disp = read_disparities(open(dsp)?).map_err(|e| input_err(format!("{}: {e}", dsp.display())))?;
    let truth = read_ground_truth(open(gt)?).map_err(|e| input_err(format!("{}: {e}", gt.display())))?;
    let rep = evaluate_accuracy(&disp, &truth, tol, max_unmatched)?;

    let mut echo = non_scene_part(&cfg);
    echo.set("tolerance", tol.to_string());
    echo.set("max_unmatched", max_unmatched.to_string());
    write_text_report(report.or(shared.out.as_deref()), &rep.to_csv(&echo), stdout)?;
    let mut s = format!(
        "matched {} (unmatched {}), MAE {:.3} px, within {} px: {:.1}%\n",
        rep.matched,
        rep.unmatched,
        rep.mean_abs_error_px,
        tol,
        rep.within_tolerance_fraction * 100.0
    );
    if rep.matched == 0 {
        s += "warning: no disparity events to evaluate\n";
    }
    say(stdout, s)
}

/// Runs one parsed command, writing human-readable output to `stdout`.
pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { shared } => cmd_simulate(&shared, stdout),
        Command::Run { shared, left, right, text } => cmd_run(&shared, &left, &right, text, stdout),
        Command::Bench { shared, left, right, report, repeats, timeline, bin_us } => cmd_bench(
            &shared,
            BenchArgs { left: &left, right: &right, report: report.as_deref(), repeats, timeline: timeline.as_deref(), bin_us },
            stdout,
        ),
        Command::Eval { shared, dsp, gt, tolerance, max_unmatched, report } => {
            cmd_eval(&shared, &dsp, &gt, tolerance, max_unmatched, report.as_deref(), stdout)
        }
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    match execute(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
