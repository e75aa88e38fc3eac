//! Command-line surface of the discovery pipeline.
//!
//! Exit codes: 0 on success, 1 on a pipeline error, 2 on a usage error.
//! Every failure also writes one line `status=error kind=<usage|pipeline>
//! message="..."` to stderr.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use regionminer_core::discovery::{discover, Discovery, DiscoveryOptions};
use regionminer_core::event_log::{parse_trace_log, parse_xes, serialize_trace_log, EventLog};
use regionminer_core::quality::{evaluate, inject_noise, missing_labels};
use regionminer_core::region::Objective;
use regionminer_core::sequence_filter::SequenceEncodingGraph;
use regionminer_core::workflow_net::{export_dot, export_pnml, import_pnml};

#[derive(Parser, Debug)]
#[command(name = "regionminer", version, about = "Region-based ILP process discovery")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Discover a workflow net from an event log.
    Discover(DiscoverArgs),
    /// Score a PNML net against a log.
    Evaluate(EvaluateArgs),
    /// Write a copy of a log with injected noise.
    Noise(NoiseArgs),
    /// Discover and score over a grid of noise levels and alphas.
    Sweep(SweepArgs),
    /// Convert an XES log to the trace-log text format.
    Convert(ConvertArgs),
}

#[derive(Args, Debug)]
pub struct LogArgs {
    /// Event log, in trace-log text format unless --xes is given.
    #[arg(long)]
    pub log: PathBuf,
    /// Read the log as XES.
    #[arg(long)]
    pub xes: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ObjectiveArg {
    Residency,
    RowSlack,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Residency => Objective::Residency,
            ObjectiveArg::RowSlack => Objective::RowSlack,
        }
    }
}

#[derive(Args, Debug)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub input: LogArgs,
    /// Sequence-encoding filter strength in [0, 1].
    #[arg(long, conflicts_with = "no_filter")]
    pub alpha: Option<f64>,
    /// Solve against the full constraint set (the default).
    #[arg(long)]
    pub no_filter: bool,
    #[arg(long, default_value_t = 0.9)]
    pub dependency_threshold: f64,
    #[arg(long, value_enum, default_value = "residency")]
    pub objective: ObjectiveArg,
    /// Solve causal pairs one after another instead of in parallel.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long)]
    pub out_pnml: PathBuf,
    #[arg(long)]
    pub out_dot: Option<PathBuf>,
    /// Sequence-encoding graph; pruned vertices are drawn dashed.
    #[arg(long)]
    pub emit_seg_dot: Option<PathBuf>,
    #[arg(long)]
    pub emit_causal_dot: Option<PathBuf>,
    /// Directory for one LP file per causal pair.
    #[arg(long)]
    pub emit_lp: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: LogArgs,
    #[arg(long)]
    pub pnml: PathBuf,
}

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[command(flatten)]
    pub input: LogArgs,
    #[arg(long)]
    pub level: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: LogArgs,
    /// Comma-separated alphas; `off` disables filtering.
    #[arg(long, value_delimiter = ',', default_value = "off,0,0.25,0.75,1")]
    pub alphas: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.2,0.3")]
    pub noise_levels: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9)]
    pub dependency_threshold: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    #[arg(long)]
    pub xes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn check_input(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(())
}

fn check_output(path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        if !dir.is_dir() {
            bail!("output directory {} does not exist", dir.display());
        }
    }
    Ok(())
}

pub fn read_log(args: &LogArgs) -> Result<EventLog> {
    let bytes = fs::read(&args.log).with_context(|| format!("reading {}", args.log.display()))?;
    let log = if args.xes {
        parse_xes(&bytes)?
    } else {
        let text = String::from_utf8(bytes).context("log is not valid UTF-8")?;
        parse_trace_log(&text)?
    };
    Ok(log)
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn parse_alpha(s: &str) -> Result<Option<f64>> {
    if s.eq_ignore_ascii_case("off") {
        return Ok(None);
    }
    let a: f64 = s.trim().parse().with_context(|| format!("bad alpha {s:?}"))?;
    Ok(Some(a))
}

fn run_discover(args: &DiscoverArgs, out: &mut dyn Write) -> Result<()> {
    check_input(&args.input.log)?;
    for p in [Some(&args.out_pnml), args.out_dot.as_ref(), args.emit_seg_dot.as_ref(), args.emit_causal_dot.as_ref()]
        .into_iter()
        .flatten()
    {
        check_output(p)?;
    }
    if let Some(dir) = &args.emit_lp {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let log = read_log(&args.input)?;
    let opts = DiscoveryOptions {
        alpha: if args.no_filter { None } else { args.alpha },
        dependency_threshold: args.dependency_threshold,
        parallel: !args.sequential,
        objective: args.objective.into(),
    };
    let started = Instant::now();
    let d = discover(&log, &opts)?;
    let elapsed = started.elapsed();
    write(&args.out_pnml, &export_pnml(&d.net))?;
    if let Some(p) = &args.out_dot {
        write(p, &export_dot(&d.net))?;
    }
    if let Some(p) = &args.emit_causal_dot {
        write(p, &d.causal.to_dot())?;
    }
    if let Some(p) = &args.emit_seg_dot {
        write(p, &seg_dot(&d))?;
    }
    if let Some(dir) = &args.emit_lp {
        for (i, inst) in d.ilp_instances()?.iter().enumerate() {
            let (a, b) = inst.pair();
            write(&dir.join(format!("pair_{i:03}_{a}_{b}.lp")), &inst.to_lp_text())?;
        }
    }
    writeln!(out, "places={}", d.net.net.place_count())?;
    writeln!(out, "transitions={}", d.net.net.transition_count())?;
    writeln!(out, "causal_pairs={}", d.outcomes.len())?;
    writeln!(out, "skipped_pairs={}", d.skipped_pairs().len())?;
    writeln!(out, "wall_ms={}", elapsed.as_millis())?;
    Ok(())
}

fn seg_dot(d: &Discovery) -> String {
    match &d.filter {
        Some(f) => f.graph.to_dot(Some(&f.retained)),
        None => SequenceEncodingGraph::build(&d.use_log.prefix_closure()).to_dot(None),
    }
}

fn run_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    check_input(&args.input.log)?;
    check_input(&args.pnml)?;
    let log = read_log(&args.input)?;
    let text = fs::read_to_string(&args.pnml).with_context(|| format!("reading {}", args.pnml.display()))?;
    let net = import_pnml(&text)?;
    let missing = missing_labels(&net, &log);
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|a| a.name()).collect();
        bail!("log labels missing from the net: {}", names.join(","));
    }
    write!(out, "{}", evaluate(&net, &log)?.to_key_value())?;
    Ok(())
}

fn run_noise(args: &NoiseArgs) -> Result<()> {
    check_input(&args.input.log)?;
    check_output(&args.out)?;
    let log = read_log(&args.input)?;
    let noisy = inject_noise(&log, args.level, args.seed)?;
    write(&args.out, &serialize_trace_log(&noisy))
}

fn run_sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<()> {
    check_input(&args.input.log)?;
    if let Some(p) = &args.out {
        check_output(p)?;
    }
    let alphas: Vec<Option<f64>> = args.alphas.iter().map(|s| parse_alpha(s)).collect::<Result<_>>()?;
    let log = read_log(&args.input)?;
    let mut csv = String::from("noise,alpha,fitness,precision,wall_ms\n");
    for &level in &args.noise_levels {
        let noisy = inject_noise(&log, level, args.seed)?;
        for &alpha in &alphas {
            let opts = DiscoveryOptions {
                alpha,
                dependency_threshold: args.dependency_threshold,
                ..Default::default()
            };
            let started = Instant::now();
            let d = discover(&noisy, &opts)?;
            let wall = started.elapsed().as_millis();
            // scored against the input log, which plays the ground truth
            let report = evaluate(&d.net, &log)?;
            let alpha_text = alpha.map_or("off".to_string(), |a| a.to_string());
            csv.push_str(&format!(
                "{level},{alpha_text},{:.6},{:.6},{wall}\n",
                report.fitness, report.precision
            ));
        }
    }
    match &args.out {
        Some(p) => write(p, &csv),
        None => Ok(write!(out, "{csv}")?),
    }
}

fn run_convert(args: &ConvertArgs) -> Result<()> {
    check_input(&args.xes)?;
    check_output(&args.out)?;
    let bytes = fs::read(&args.xes).with_context(|| format!("reading {}", args.xes.display()))?;
    write(&args.out, &serialize_trace_log(&parse_xes(&bytes)?))
}

fn error_line(kind: &str, message: &str) -> String {
    let flat = message.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    format!("status=error kind={kind} message=\"{flat}\"")
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let _ = write!(err, "{e}");
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("usage error");
            let _ = writeln!(err, "{}", error_line("usage", first.trim_start_matches("error: ")));
            return 2;
        }
    };
    let result = match &cli.command {
        Command::Discover(a) => run_discover(a, out),
        Command::Evaluate(a) => run_evaluate(a, out),
        Command::Noise(a) => run_noise(a),
        Command::Sweep(a) => run_sweep(a, out),
        Command::Convert(a) => run_convert(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{}", error_line("pipeline", &format!("{e:#}")));
            1
        }
    }
}
