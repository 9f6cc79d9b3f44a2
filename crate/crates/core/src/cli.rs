//! Command-line front end: `run`, `tune`, `verify` and `topo`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 failed
//! verification, 3 runtime failure (blowup, transport, I/O).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::autotune::{calibrate, TuneResult, TuneSpace, DEFAULT_CORES};
use crate::error::{Error, Result};
use crate::kernel::{InitialCondition, DEFAULT_STEPS};
use crate::runner::{
    run, run_device, write_report, Fault, OutputFormat, RunConfig, DEFAULT_CADENCE,
};
use crate::topology::{
    assign_devices, classify_links, DeviceAssignment, LinkClassification, MachineFile, Placement,
    RankTopology,
};
use crate::transport::fabric::FabricModel;
use crate::transport::tcp::Rendezvous;
use crate::transport::Backend;
use crate::verify::{verify, Check, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Parser)]
#[command(
    name = "shwx",
    version,
    about = "Distributed shallow water solver and (threads, x-blocks) tuner"
)]
pub struct CliConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Subcommand)]
pub enum Command {
    /// Run one simulation and report timing, traffic and conserved integrals.
    Run(RunArgs),
    /// Benchmark every admissible (threads, x-blocks) pair.
    Tune(TuneArgs),
    /// Run the self-check suite.
    Verify(VerifyArgs),
    /// Show rank grid, device placement and link classes.
    Topo(TopoArgs),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct LayoutArgs {
    /// Rank count [default: 1, or the machine file's ppn total]
    #[arg(long)]
    pub ranks: Option<usize>,
    /// Number of x-blocks; must divide the rank count
    #[arg(long)]
    pub hblocks: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub devices: usize,
    /// contiguous | roundrobin
    #[arg(long, default_value_t = Placement::Contiguous)]
    pub placement: Placement,
    /// `host:ppn` lines (contiguous) or bare host lines (round-robin)
    #[arg(long)]
    pub machine_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct SolveArgs {
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
    /// Kernel workers per rank
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// inproc | tcp
    #[arg(long, default_value_t = Backend::InProcess)]
    pub backend: Backend,
    /// Preset (ideal, infiniband, ethernet, optionally with -delay) or JSON file
    #[arg(long, default_value = "ideal")]
    pub fabric: String,
    /// Sample conserved integrals every k steps (0: final state only)
    #[arg(long, default_value_t = DEFAULT_CADENCE)]
    pub cadence: usize,
    /// vortex | rest[:pressure]
    #[arg(long, default_value = "vortex")]
    pub init: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct OutputArgs {
    /// json | csv | text
    #[arg(long, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Write here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct RunArgs {
    /// Grid cells per side
    pub n: usize,
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Host only this device's ranks (tcp backend; addresses from SHWX_RENDEZVOUS)
    #[arg(long)]
    pub device: Option<usize>,
    /// Add a perturbation to one ghost pressure value: RANK:STEP:DELTA
    #[arg(long, hide = true)]
    pub fault: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct TuneArgs {
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub devices: usize,
    /// Logical cores per device
    #[arg(long, default_value_t = DEFAULT_CORES)]
    pub cores: usize,
    /// Upper bound on x-blocks
    #[arg(long)]
    pub hcap: Option<usize>,
    /// Runs per candidate; the median time is kept
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[command(flatten)]
    pub solve: SolveArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Write the rate matrix (rows t, columns h) as CSV
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct VerifyArgs {
    #[arg(default_value_t = 64)]
    pub n: usize,
    /// Steps of the oracle comparison runs
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Run only these checks (oracle, mass, enstrophy, steady, links, wire)
    #[arg(long = "check")]
    pub checks: Vec<String>,
    /// Perturb one ghost value in every oracle run; the suite must then fail
    #[arg(long)]
    pub inject_fault: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
pub struct TopoArgs {
    #[command(flatten)]
    pub layout: LayoutArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl CliConfig {
    pub fn parse_args<I, T>(argv: I) -> std::result::Result<Self, clap::Error>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        Self::try_parse_from(argv)
    }

    /// Arguments (without the program name) that parse back to `self`.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = Vec::new();
        match &self.command {
            Command::Run(r) => {
                a.push("run".into());
                a.push(r.n.to_string());
                layout_args(&r.layout, &mut a);
                solve_args(&r.solve, &mut a);
                output_args(&r.output, &mut a);
                opt(&mut a, "--device", &r.device);
                opt(&mut a, "--fault", &r.fault);
            }
            Command::Tune(t) => {
                a.push("tune".into());
                a.push(t.n.to_string());
                flag(&mut a, "--devices", t.devices);
                flag(&mut a, "--cores", t.cores);
                opt(&mut a, "--hcap", &t.hcap);
                flag(&mut a, "--repeat", t.repeat);
                solve_args(&t.solve, &mut a);
                output_args(&t.output, &mut a);
                opt(
                    &mut a,
                    "--emit-plot-data",
                    &t.emit_plot_data.as_ref().map(|p| p.display()),
                );
            }
            Command::Verify(v) => {
                a.push("verify".into());
                a.push(v.n.to_string());
                flag(&mut a, "--steps", v.steps);
                for c in &v.checks {
                    flag(&mut a, "--check", c);
                }
                opt(&mut a, "--inject-fault", &v.inject_fault);
                opt(&mut a, "--out", &v.out.as_ref().map(|p| p.display()));
            }
            Command::Topo(t) => {
                a.push("topo".into());
                layout_args(&t.layout, &mut a);
                output_args(&t.output, &mut a);
            }
        }
        a
    }
}

fn flag(a: &mut Vec<String>, name: &str, value: impl std::fmt::Display) {
    a.push(name.into());
    a.push(value.to_string());
}

fn opt<T: std::fmt::Display>(a: &mut Vec<String>, name: &str, value: &Option<T>) {
    if let Some(v) = value {
        flag(a, name, v);
    }
}

fn layout_args(l: &LayoutArgs, a: &mut Vec<String>) {
    opt(a, "--ranks", &l.ranks);
    opt(a, "--hblocks", &l.hblocks);
    flag(a, "--devices", l.devices);
    flag(a, "--placement", l.placement);
    opt(
        a,
        "--machine-file",
        &l.machine_file.as_ref().map(|p| p.display()),
    );
}

fn solve_args(s: &SolveArgs, a: &mut Vec<String>) {
    flag(a, "--steps", s.steps);
    flag(a, "--threads", s.threads);
    flag(a, "--backend", s.backend);
    flag(a, "--fabric", &s.fabric);
    flag(a, "--cadence", s.cadence);
    flag(a, "--init", &s.init);
}

fn output_args(o: &OutputArgs, a: &mut Vec<String>) {
    flag(a, "--format", o.format);
    opt(a, "--out", &o.out.as_ref().map(|p| p.display()));
}

pub fn parse_init(s: &str) -> Result<InitialCondition> {
    match s.split_once(':') {
        None if s == "vortex" => Ok(InitialCondition::Vortex),
        None if s == "rest" => Ok(InitialCondition::Rest { pressure: 50_000.0 }),
        Some(("rest", p)) => match p.parse::<f64>() {
            Ok(pressure) if pressure > 0.0 && pressure.is_finite() => {
                Ok(InitialCondition::Rest { pressure })
            }
            _ => Err(Error::Config(format!("bad rest pressure {p:?}"))),
        },
        _ => Err(Error::Config(format!("unknown initial condition {s:?}"))),
    }
}

fn parse_fault(s: &str) -> Result<Fault> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::Config(format!("fault must be RANK:STEP:DELTA, got {s:?}"));
    let [rank, step, delta] = parts[..] else {
        return Err(bad());
    };
    Ok(Fault {
        rank: rank.parse().map_err(|_| bad())?,
        step: step.parse().map_err(|_| bad())?,
        delta: delta.parse().map_err(|_| bad())?,
    })
}

/// Reads configuration input files; failures there are usage errors.
fn load_machine_file(path: &Path) -> Result<MachineFile> {
    MachineFile::load(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Resolves the rank count and device assignment from the layout flags.
fn resolve_layout(l: &LayoutArgs) -> Result<(usize, DeviceAssignment)> {
    match &l.machine_file {
        Some(path) => {
            let mf = load_machine_file(path)?;
            let a = mf.assignment(l.ranks)?;
            Ok((a.r(), a))
        }
        None => {
            let r = l.ranks.unwrap_or(1);
            Ok((r, assign_devices(r, l.devices, l.placement)?))
        }
    }
}

fn base_config(n: usize, s: &SolveArgs) -> Result<RunConfig> {
    let mut c = RunConfig::new(n)?;
    c.steps = s.steps;
    c.threads = s.threads;
    c.backend = s.backend;
    c.fabric = FabricModel::resolve(&s.fabric).map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(format!("fabric {}: {other}", s.fabric)),
    })?;
    c.cadence = s.cadence;
    c.initial = parse_init(&s.init)?;
    Ok(c)
}

pub fn run_config(args: &RunArgs) -> Result<RunConfig> {
    let mut c = base_config(args.n, &args.solve)?;
    let (r, assignment) = resolve_layout(&args.layout)?;
    c.ranks = r;
    c.h_override = args.layout.hblocks;
    c.devices = assignment.m;
    c.placement = assignment.placement;
    c.assignment = args.layout.machine_file.is_some().then_some(assignment);
    c.fault = args.fault.as_deref().map(parse_fault).transpose()?;
    if args.device.is_some() && c.backend != Backend::Tcp {
        return Err(Error::Config("--device needs --backend tcp".into()));
    }
    c.validate()?;
    Ok(c)
}

fn with_output(path: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = std::io::BufWriter::new(std::fs::File::create(p)?);
            f(&mut w)?;
            w.flush()?;
            Ok(())
        }
        None => f(&mut std::io::stdout().lock()),
    }
}

fn cmd_run(cli: &CliConfig, args: &RunArgs) -> Result<i32> {
    let cfg = run_config(args)?;
    let report = match args.device {
        Some(device) => {
            let rendezvous = Rendezvous::from_env()?.ok_or_else(|| {
                Error::Config(
                    "--device needs SHWX_RENDEZVOUS to name the rendezvous listing".into(),
                )
            })?;
            match run_device(&cfg, device, &rendezvous)? {
                Some(report) => report,
                None => return Ok(EXIT_OK),
            }
        }
        None => run(&cfg)?,
    };
    let mut report = report;
    report.args = cli.to_args();
    write_report(&report, args.output.format, args.output.out.as_deref())?;
    Ok(EXIT_OK)
}

fn write_tune_text(result: &TuneResult, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "{:>6} {:>4} {:>5} {:>5} {:>6} {:>14} {:>12}  status",
        "n", "m", "t", "h", "r", "GFLOP/s", "time"
    )?;
    for (k, row) in result.rows.iter().enumerate() {
        let mark = if Some(k) == result.best { "*" } else { " " };
        writeln!(
            out,
            "{:>6} {:>4} {:>5} {:>5} {:>6} {:>14} {:>12} {mark}{}",
            row.n,
            row.m,
            row.t,
            row.h,
            row.r,
            row.rate.map_or("-".into(), |x| x.to_string()),
            row.time.map_or("-".into(), |x| x.to_string()),
            row.status
        )?;
    }
    Ok(())
}

fn cmd_tune(args: &TuneArgs) -> Result<i32> {
    if args.cores == 0 || args.devices == 0 {
        return Err(Error::Config("cores and devices must be >= 1".into()));
    }
    let base = base_config(args.n, &args.solve)?;
    let space = TuneSpace {
        cores: args.cores,
        devices: args.devices,
        h_cap: args.hcap,
    };
    let result = calibrate(&space, &base, args.repeat)?;
    with_output(args.output.out.as_deref(), |out| match args.output.format {
        OutputFormat::Json => {
            result.write_json(&mut *out)?;
            Ok(writeln!(out)?)
        }
        OutputFormat::Csv => result.write_csv(out),
        OutputFormat::Text => write_tune_text(&result, out),
    })?;
    if let Some(path) = &args.emit_plot_data {
        with_output(Some(path), |out| result.write_plot_data(out))?;
    }
    Ok(if result.best.is_some() {
        EXIT_OK
    } else {
        EXIT_RUNTIME
    })
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let mut cfg = VerifyConfig::new(args.n);
    cfg.steps = args.steps;
    if !args.checks.is_empty() {
        cfg.checks = args
            .checks
            .iter()
            .map(|c| c.parse::<Check>())
            .collect::<Result<_>>()?;
    }
    cfg.fault = args.inject_fault;
    if args.steps == 0 {
        return Err(Error::Config("step count must be >= 1".into()));
    }
    let report = verify(&cfg)?;
    with_output(args.out.as_deref(), |out| {
        serde_json::to_writer_pretty(&mut *out, &report)?;
        Ok(writeln!(out)?)
    })?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!(
            "check {} failed: measured {} vs bound {} ({})",
            c.check.name(),
            c.measured,
            c.bound,
            c.detail
        );
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY })
}

#[derive(Debug, Clone, Serialize)]
pub struct PlacementView {
    pub label: String,
    pub devices: Vec<usize>,
    pub remote_fraction: f64,
    pub classification: LinkClassification,
}

#[derive(Debug, Clone, Serialize)]
pub struct TopoReport {
    pub r: usize,
    pub h: usize,
    pub w: usize,
    pub m: usize,
    pub placements: Vec<PlacementView>,
}

pub fn topo_report(args: &TopoArgs) -> Result<TopoReport> {
    let (r, file_assignment) = resolve_layout(&args.layout)?;
    let topo = RankTopology::from_ranks(r, args.layout.hblocks)?;
    let m = file_assignment.m;
    let mut views = Vec::new();
    let mut push = |label: String, a: DeviceAssignment| -> Result<()> {
        let classification = classify_links(&topo, &a)?;
        views.push(PlacementView {
            label,
            remote_fraction: classification.remote_fraction(),
            devices: a.devices,
            classification,
        });
        Ok(())
    };
    if args.layout.machine_file.is_some() {
        push("machine-file".into(), file_assignment)?;
    }
    for p in [Placement::Contiguous, Placement::RoundRobin] {
        push(p.to_string(), assign_devices(r, m, p)?)?;
    }
    Ok(TopoReport {
        r,
        h: topo.h,
        w: topo.w,
        m,
        placements: views,
    })
}

fn write_topo_text(t: &TopoReport, out: &mut dyn Write) -> Result<()> {
    writeln!(
        out,
        "{} ranks as {} x-blocks by {} y-blocks on {} devices",
        t.r, t.h, t.w, t.m
    )?;
    let label_width = t
        .placements
        .iter()
        .map(|p| p.label.len())
        .max()
        .unwrap_or(0);
    write!(out, "{:>6}", "")?;
    for p in &t.placements {
        write!(out, "   {:<width$}", p.label, width = t.h * 8)?;
    }
    writeln!(out)?;
    // rows printed top (largest y) first
    for y in (0..t.w).rev() {
        write!(out, "{:>6}", format!("y={y}"))?;
        for p in &t.placements {
            write!(out, "   ")?;
            for x in 0..t.h {
                let k = y * t.h + x;
                write!(out, "{:<8}", format!("{k}@d{}", p.devices[k]))?;
            }
        }
        writeln!(out)?;
    }
    for p in &t.placements {
        writeln!(
            out,
            "{:<label_width$}  local {:>5}  remote {:>5}  remote fraction {}",
            p.label, p.classification.local, p.classification.remote, p.remote_fraction
        )?;
    }
    Ok(())
}

fn cmd_topo(args: &TopoArgs) -> Result<i32> {
    let report = topo_report(args)?;
    with_output(args.output.out.as_deref(), |out| match args.output.format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, &report)?;
            Ok(writeln!(out)?)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["placement", "src", "dst", "side", "class"])?;
            for p in &report.placements {
                for l in &p.classification.links {
                    w.write_record([
                        p.label.clone(),
                        l.src.to_string(),
                        l.dst.to_string(),
                        format!("{:?}", l.side).to_lowercase(),
                        format!("{:?}", l.class).to_lowercase(),
                    ])?;
                }
            }
            w.flush()?;
            Ok(())
        }
        OutputFormat::Text => write_topo_text(&report, out),
    })?;
    Ok(EXIT_OK)
}

pub fn execute(cli: &CliConfig) -> Result<i32> {
    match &cli.command {
        Command::Run(a) => cmd_run(cli, a),
        Command::Tune(a) => cmd_tune(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Topo(a) => cmd_topo(a),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match CliConfig::parse_args(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_runtime() {
                EXIT_RUNTIME
            } else {
                EXIT_USAGE
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> CliConfig {
        CliConfig::parse_args(std::iter::once("shwx").chain(args.iter().copied())).unwrap()
    }

    fn round_trip(cli: &CliConfig) {
        let back = CliConfig::parse_args(std::iter::once("shwx".to_string()).chain(cli.to_args()))
            .unwrap();
        assert_eq!(&back, cli);
    }

    #[test]
    fn run_defaults() {
        let cli = parse(&["run", "10000"]);
        let Command::Run(r) = &cli.command else {
            panic!()
        };
        let c = run_config(r).unwrap();
        assert_eq!((c.spec.n, c.steps, c.ranks, c.threads), (10000, 50, 1, 1));
        assert_eq!(c.backend, Backend::InProcess);
        round_trip(&cli);
    }

    #[test]
    fn hblocks_override() {
        let cli = parse(&[
            "run",
            "128",
            "--ranks",
            "4",
            "--hblocks",
            "4",
            "--threads",
            "2",
        ]);
        let Command::Run(r) = &cli.command else {
            panic!()
        };
        let topo = run_config(r).unwrap().topology().unwrap();
        assert_eq!((topo.h, topo.w), (4, 1));
        round_trip(&cli);
    }

    #[test]
    fn tune_space_from_flags() {
        let cli = parse(&["tune", "1000", "--devices", "2", "--cores", "4"]);
        let Command::Tune(t) = &cli.command else {
            panic!()
        };
        let space = TuneSpace {
            cores: t.cores,
            devices: t.devices,
            h_cap: t.hcap,
        };
        let ts: std::collections::BTreeSet<usize> = crate::autotune::enumerate_candidates(&space)
            .iter()
            .map(|c| c.t)
            .collect();
        assert_eq!(ts.into_iter().collect::<Vec<_>>(), [1, 2, 4]);
        round_trip(&cli);
    }

    #[test]
    fn round_trips() {
        for args in [
            &[
                "run",
                "64",
                "--ranks",
                "6",
                "--devices",
                "2",
                "--placement",
                "roundrobin",
                "--backend",
                "tcp",
                "--fabric",
                "ethernet-delay",
                "--format",
                "csv",
                "--out",
                "r.csv",
                "--init",
                "rest:1000.5",
                "--cadence",
                "0",
            ][..],
            &[
                "tune",
                "256",
                "--hcap",
                "2",
                "--repeat",
                "3",
                "--emit-plot-data",
                "m.csv",
                "--format",
                "text",
            ],
            &[
                "verify",
                "--check",
                "mass",
                "--check",
                "wire",
                "--inject-fault",
                "1e-6",
            ],
            &["verify", "32"],
            &[
                "topo",
                "--ranks",
                "6",
                "--devices",
                "2",
                "--hblocks",
                "3",
                "--format",
                "csv",
            ],
        ] {
            round_trip(&parse(args));
        }
    }

    #[test]
    fn bad_input_is_rejected() {
        for args in [
            &["run"][..],
            &["run", "x"],
            &["run", "64", "--bogus"],
            &["run", "64", "--placement", "scatter"],
            &["run", "64", "--backend", "mpi"],
            &["frobnicate"],
        ] {
            assert!(
                CliConfig::parse_args(std::iter::once("shwx").chain(args.iter().copied())).is_err()
            );
        }
        let cli = parse(&["run", "64", "--ranks", "4", "--hblocks", "3"]);
        let Command::Run(r) = &cli.command else {
            panic!()
        };
        assert!(matches!(run_config(r), Err(Error::Decomposition(_))));
        assert!(parse_init("rest:-1").is_err());
        assert!(parse_fault("1:2").is_err());
        assert_eq!(parse_fault("1:2:0.5").unwrap().delta, 0.5);
    }

    #[test]
    fn topo_examples() {
        let cli = parse(&["topo", "--ranks", "6", "--devices", "2", "--hblocks", "3"]);
        let Command::Topo(t) = &cli.command else {
            panic!()
        };
        let rep = topo_report(t).unwrap();
        assert_eq!(rep.placements[0].remote_fraction, 0.5);
        assert!(rep.placements[1].remote_fraction > 0.5);

        let cli = parse(&["topo", "--ranks", "8"]);
        let Command::Topo(t) = &cli.command else {
            panic!()
        };
        assert!(topo_report(t)
            .unwrap()
            .placements
            .iter()
            .all(|p| p.remote_fraction == 0.0));

        let dir = tempfile::tempdir().unwrap();
        let mf = dir.path().join("hosts");
        std::fs::write(&mf, "mic0:3\nmic1:3\n").unwrap();
        let cli = parse(&["topo", "--machine-file", mf.to_str().unwrap()]);
        let Command::Topo(t) = &cli.command else {
            panic!()
        };
        let rep = topo_report(t).unwrap();
        assert_eq!(rep.placements[0].devices, [0, 0, 0, 1, 1, 1]);
        let mut text = Vec::new();
        write_topo_text(&rep, &mut text).unwrap();
        assert!(String::from_utf8(text).unwrap().contains("remote fraction"));
    }
}
