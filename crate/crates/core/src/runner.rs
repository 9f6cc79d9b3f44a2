//! Full simulation driver: wires ranks, runs the time loop, samples the
//! conserved integrals and assembles the performance report on rank 0.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Barrier;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{block_of, BlockExtent, Field, GridSpec};
use crate::kernel::{
    advance, apply_time_filter, compute_diagnostics_into, flop_count, DiagnosticFields,
    InitialCondition, StateFields, TimeCoeffs, Workers, DEFAULT_STEPS,
};
use crate::reference::ConservationSample;
use crate::topology::{assign_devices, DeviceAssignment, LinkClass, Placement, RankTopology};
use crate::transport::fabric::{FabricModel, LinkCounter, LinkStats};
use crate::transport::tcp::{self, Rendezvous};
use crate::transport::wire::{FieldId, Phase};
use crate::transport::{inprocess_endpoints, Backend, Endpoint};

pub const DEFAULT_CADENCE: usize = 10;

const CONTROL_TIMEOUT: Duration = Duration::from_secs(600);

/// Additive perturbation of one ghost pressure value, used as a sensitivity
/// canary by the verification suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub rank: usize,
    pub step: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub spec: GridSpec,
    pub steps: usize,
    pub ranks: usize,
    pub threads: usize,
    pub h_override: Option<usize>,
    pub devices: usize,
    pub placement: Placement,
    /// Explicit rank-to-device map (from a machine file); overrides
    /// `devices` and `placement`.
    pub assignment: Option<DeviceAssignment>,
    pub backend: Backend,
    pub fabric: FabricModel,
    /// Sample the conserved integrals every `cadence` steps; 0 samples only
    /// the final state.
    pub cadence: usize,
    pub initial: InitialCondition,
    /// Keep the assembled final fields in the report.
    pub collect_fields: bool,
    pub fault: Option<Fault>,
}

impl RunConfig {
    pub fn new(n: usize) -> Result<Self> {
        Ok(RunConfig {
            spec: GridSpec::new(n)?,
            steps: DEFAULT_STEPS,
            ranks: 1,
            threads: 1,
            h_override: None,
            devices: 1,
            placement: Placement::Contiguous,
            assignment: None,
            backend: Backend::InProcess,
            fabric: FabricModel::ideal(),
            cadence: DEFAULT_CADENCE,
            initial: InitialCondition::Vortex,
            collect_fields: false,
            fault: None,
        })
    }

    pub fn topology(&self) -> Result<RankTopology> {
        RankTopology::from_ranks(self.ranks, self.h_override)
    }

    pub fn device_assignment(&self) -> Result<DeviceAssignment> {
        match &self.assignment {
            Some(a) if a.r() != self.ranks => Err(Error::Placement(format!(
                "machine file places {} ranks, run has {}",
                a.r(),
                self.ranks
            ))),
            Some(a) => Ok(a.clone()),
            None => assign_devices(self.ranks, self.devices, self.placement),
        }
    }

    /// Checks everything that can be checked before any rank starts.
    pub fn validate(&self) -> Result<(RankTopology, DeviceAssignment)> {
        self.spec.validate()?;
        if self.steps == 0 {
            return Err(Error::Config("step count must be >= 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be >= 1".into()));
        }
        let topo = self.topology()?;
        for rank in 0..topo.r {
            block_of(rank, topo.h, topo.w, self.spec.n)?;
        }
        let assignment = self.device_assignment()?;
        self.fabric.validate()?;
        if let Some(f) = self.fault {
            if f.rank >= topo.r || f.step >= self.steps {
                return Err(Error::Config("fault outside the run".into()));
            }
        }
        Ok((topo, assignment))
    }
}

/// Final `p, u, v` over the whole grid, row-major with x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFields {
    pub n: usize,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Slowest rank's solve-loop time.
    pub wall_seconds: f64,
    pub rank_seconds: Vec<f64>,
    /// Time each rank spent blocked in halo receives.
    pub wait_seconds: Vec<f64>,
    /// Fabric time charged by the model, summed over all links.
    pub modeled_fabric_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub config: RunConfig,
    /// Command line that produced the run, when launched from the CLI.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<String>,
    pub h: usize,
    pub w: usize,
    pub devices: Vec<usize>,
    pub timing: Timing,
    pub flops: u64,
    pub rate_gflops: f64,
    pub traffic: BTreeMap<LinkClass, LinkCounter>,
    pub links: LinkStats,
    pub conservation: Vec<ConservationSample>,
    #[serde(skip)]
    pub fields: Option<GlobalFields>,
}

impl PerfReport {
    /// Halo bytes sent by `rank` per time step, headers included.
    pub fn bytes_per_step(&self, rank: usize) -> f64 {
        self.links.sent_by(rank).bytes as f64 / self.config.steps as f64
    }

    pub fn payload_bytes_per_step(&self, rank: usize) -> f64 {
        self.links.sent_by(rank).payload_bytes as f64 / self.config.steps as f64
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// One row per conservation sample.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for s in &self.conservation {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_text(&self, mut out: impl Write) -> Result<()> {
        let c = &self.config;
        writeln!(out, "n = {}  steps = {}", c.spec.n, c.steps)?;
        writeln!(
            out,
            "ranks = {} ({} x {})  threads = {}  devices = {}  backend = {}  fabric = {}",
            c.ranks,
            self.h,
            self.w,
            c.threads,
            self.devices.iter().max().map_or(1, |d| d + 1),
            c.backend,
            c.fabric.name
        )?;
        writeln!(
            out,
            "WALL CLOCK TIME FOR JOB = {} s",
            self.timing.wall_seconds
        )?;
        writeln!(out, "EXPECTED GFLOPS RATE = {}", self.rate_gflops)?;
        for (class, t) in &self.traffic {
            writeln!(
                out,
                "{class:?} traffic: {} messages, {} bytes, {} s modeled",
                t.messages, t.bytes, t.modeled_seconds
            )?;
        }
        for s in &self.conservation {
            writeln!(
                out,
                "step {:>6}  mass {}  energy {}  enstrophy {}",
                s.step, s.mass, s.energy, s.enstrophy
            )?;
        }
        Ok(())
    }
}

/// Partial sums of one rank, before the area factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Partial {
    step: usize,
    mass: f64,
    energy: f64,
    enstrophy: f64,
}

/// What a rank hands to rank 0. Field values travel as raw bits so they
/// survive the text encoding exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RankOutcome {
    rank: usize,
    extent: BlockExtent,
    seconds: f64,
    wait_seconds: f64,
    partials: Vec<Partial>,
    stats: LinkStats,
    fields: Option<[Vec<u64>; 3]>,
}

fn partial_sums(step: usize, state: &StateFields, diag: &DiagnosticFields) -> Partial {
    let e = state.extent();
    let (p, z, hb) = (&state.p.cur, &diag.z, &diag.hb);
    let (mut mass, mut energy, mut enstrophy) = (0.0, 0.0, 0.0);
    for lj in 1..=e.height() {
        for li in 1..=e.width() {
            let pc = p.at(li, lj);
            mass += pc;
            let ke2 = 2.0 * (hb.at(li, lj) - pc);
            energy += 0.5 * pc * ke2 + 0.5 * pc * pc;
            let pbar = 0.25 * (p.at(li - 1, lj - 1) + p.at(li, lj - 1) + pc + p.at(li - 1, lj));
            enstrophy += 0.5 * z.at(li, lj) * z.at(li, lj) * pbar;
        }
    }
    Partial {
        step,
        mass,
        energy,
        enstrophy,
    }
}

fn exchange_state(ep: &mut Endpoint, step: usize, state: &mut StateFields) -> Result<()> {
    let StateFields { p, u, v } = state;
    ep.exchange(
        step as u32,
        Phase::Diagnostics,
        &mut [
            (FieldId::P, &mut p.cur),
            (FieldId::U, &mut u.cur),
            (FieldId::V, &mut v.cur),
        ],
    )
}

fn exchange_diagnostics(ep: &mut Endpoint, step: usize, diag: &mut DiagnosticFields) -> Result<()> {
    let DiagnosticFields { cu, cv, z, hb } = diag;
    ep.exchange(
        step as u32,
        Phase::Advance,
        &mut [
            (FieldId::Cu, cu),
            (FieldId::Cv, cv),
            (FieldId::Z, z),
            (FieldId::Hb, hb),
        ],
    )
}

fn owned_bits(f: &Field) -> Vec<u64> {
    f.owned().map(|(_, _, x)| x.to_bits()).collect()
}

fn rank_main(cfg: &RunConfig, mut ep: Endpoint, barrier: Option<&Barrier>) -> Result<RankOutcome> {
    let rank = ep.rank();
    let topo = ep.topology();
    let extent = block_of(rank, topo.h, topo.w, cfg.spec.n)?;
    let workers = Workers::new(cfg.threads);
    if let Some(b) = barrier {
        b.wait();
    }
    let workers = workers?;
    let spec = &cfg.spec;
    let mut state = cfg.initial.fields(spec, extent);
    let mut diag = DiagnosticFields::zeros(extent);
    let mut partials = Vec::new();
    let due = |step: usize| cfg.cadence > 0 && step.is_multiple_of(cfg.cadence);

    let mut timed = Duration::ZERO;
    let mut t0 = Instant::now();
    for step in 0..cfg.steps {
        exchange_state(&mut ep, step, &mut state)?;
        if let Some(f) = cfg.fault.filter(|f| f.rank == rank && f.step == step) {
            let x = state.p.cur.at(0, 1);
            state.p.cur.set(0, 1, x + f.delta);
        }
        compute_diagnostics_into(&state, spec, &mut diag, &workers, step)?;
        if due(step) {
            timed += t0.elapsed();
            partials.push(partial_sums(step, &state, &diag));
            t0 = Instant::now();
        }
        exchange_diagnostics(&mut ep, step, &mut diag)?;
        advance(
            &mut state,
            &diag,
            &TimeCoeffs::for_step(spec, step),
            &workers,
            step,
        )?;
        apply_time_filter(&mut state, spec.alpha, step == 0, &workers)?;
    }
    timed += t0.elapsed();
    let stats = ep.take_stats();
    let wait_seconds = ep.wait_seconds();

    exchange_state(&mut ep, cfg.steps, &mut state)?;
    compute_diagnostics_into(&state, spec, &mut diag, &workers, cfg.steps)?;
    partials.push(partial_sums(cfg.steps, &state, &diag));

    let fields = cfg.collect_fields.then(|| {
        [
            owned_bits(&state.p.cur),
            owned_bits(&state.u.cur),
            owned_bits(&state.v.cur),
        ]
    });
    Ok(RankOutcome {
        rank,
        extent,
        seconds: timed.as_secs_f64(),
        wait_seconds,
        partials,
        stats,
        fields,
    })
}

/// Runs hosted endpoints on one thread each. Returns the first root-cause
/// error: a rank that fails drops its links, so its neighbours see
/// disconnects that are only echoes of the original failure.
fn run_endpoints(cfg: &RunConfig, endpoints: Vec<Endpoint>) -> Result<Vec<RankOutcome>> {
    let barrier = Barrier::new(endpoints.len());
    let results: Vec<Result<RankOutcome>> = std::thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|ep| {
                let barrier = &barrier;
                s.spawn(move || rank_main(cfg, ep, Some(barrier)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("rank thread panicked"))
            .collect()
    });
    let mut outcomes = Vec::with_capacity(results.len());
    let mut echo = None;
    let mut cause = None;
    for r in results {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e @ Error::Disconnected { .. }) => {
                echo.get_or_insert(e);
            }
            Err(e) => {
                cause.get_or_insert(e);
            }
        }
    }
    match cause.or(echo) {
        Some(e) => Err(e),
        None => Ok(outcomes),
    }
}

fn assemble(
    cfg: &RunConfig,
    topo: &RankTopology,
    assignment: &DeviceAssignment,
    mut outcomes: Vec<RankOutcome>,
) -> Result<PerfReport> {
    outcomes.sort_by_key(|o| o.rank);
    if outcomes.len() != topo.r || outcomes.iter().enumerate().any(|(k, o)| o.rank != k) {
        return Err(Error::Config("rank summaries incomplete".into()));
    }
    let area = cfg.spec.dx * cfg.spec.dy;
    let mut conservation = Vec::new();
    for (k, first) in outcomes[0].partials.iter().enumerate() {
        let (mut mass, mut energy, mut enstrophy) = (0.0, 0.0, 0.0);
        for o in &outcomes {
            let p = o.partials[k];
            debug_assert_eq!(p.step, first.step);
            mass += p.mass;
            energy += p.energy;
            enstrophy += p.enstrophy;
        }
        conservation.push(ConservationSample {
            step: first.step,
            mass: mass * area,
            energy: energy * area,
            enstrophy: enstrophy * area,
        });
    }

    let mut links = LinkStats::default();
    for o in &outcomes {
        links.merge(&o.stats);
    }
    let wall_seconds = outcomes.iter().map(|o| o.seconds).fold(0.0, f64::max);
    let flops = flop_count(cfg.spec.n, cfg.steps);

    let fields = if cfg.collect_fields {
        let n = cfg.spec.n;
        let mut g = GlobalFields {
            n,
            p: vec![0.0; n * n],
            u: vec![0.0; n * n],
            v: vec![0.0; n * n],
        };
        for o in &outcomes {
            let Some(bits) = &o.fields else {
                return Err(Error::Config(format!("rank {} sent no fields", o.rank)));
            };
            let e = o.extent;
            for (dst, src) in [&mut g.p, &mut g.u, &mut g.v].into_iter().zip(bits) {
                let mut it = src.iter();
                for j in e.sy..=e.ey {
                    for i in e.sx..=e.ex {
                        dst[j * n + i] = f64::from_bits(*it.next().expect("short field"));
                    }
                }
            }
        }
        Some(g)
    } else {
        None
    };

    Ok(PerfReport {
        config: cfg.clone(),
        args: Vec::new(),
        h: topo.h,
        w: topo.w,
        devices: assignment.devices.clone(),
        timing: Timing {
            wall_seconds,
            rank_seconds: outcomes.iter().map(|o| o.seconds).collect(),
            wait_seconds: outcomes.iter().map(|o| o.wait_seconds).collect(),
            modeled_fabric_seconds: links.modeled_seconds(),
        },
        flops,
        rate_gflops: flops as f64 / wall_seconds / 1e9,
        traffic: links.by_class(),
        links,
        conservation,
        fields,
    })
}

/// Runs every rank inside this process. Under the TCP backend, links between
/// devices go over loopback sockets.
pub fn run(cfg: &RunConfig) -> Result<PerfReport> {
    let (topo, assignment) = cfg.validate()?;
    let endpoints = match cfg.backend {
        Backend::InProcess => inprocess_endpoints(&topo, &assignment, &cfg.fabric)?,
        Backend::Tcp => {
            let all: Vec<usize> = (0..topo.r).collect();
            tcp::connect(&topo, &assignment, &cfg.fabric, &all, None)?.endpoints
        }
    };
    log::info!(
        "running n={} steps={} on {} ranks ({} x {}), {} threads each",
        cfg.spec.n,
        cfg.steps,
        topo.r,
        topo.h,
        topo.w,
        cfg.threads
    );
    let outcomes = run_endpoints(cfg, endpoints)?;
    assemble(cfg, &topo, &assignment, outcomes)
}

/// Runs the ranks of one device as one process of a multi-process TCP run.
/// The process hosting rank 0 collects every other process's summary and
/// returns the report; the others return `None`.
pub fn run_device(
    cfg: &RunConfig,
    device: usize,
    rendezvous: &Rendezvous,
) -> Result<Option<PerfReport>> {
    let (topo, assignment) = cfg.validate()?;
    if cfg.backend != Backend::Tcp {
        return Err(Error::Config(
            "per-device processes need the tcp backend".into(),
        ));
    }
    let hosted = assignment.ranks_on(device);
    if hosted.is_empty() {
        return Err(Error::Placement(format!(
            "no ranks placed on device {device}"
        )));
    }
    let session = tcp::connect(&topo, &assignment, &cfg.fabric, &hosted, Some(rendezvous))?;
    log::info!("device {device}: hosting ranks {hosted:?}");
    let outcomes = run_endpoints(cfg, session.endpoints)?;

    if !hosted.contains(&0) {
        let payload = serde_json::to_vec(&outcomes)?;
        tcp::send_control(&session.rendezvous, hosted[0], &payload)?;
        return Ok(None);
    }
    let mut all = outcomes;
    let foreign_devices = (0..assignment.m)
        .filter(|&d| d != device && !assignment.ranks_on(d).is_empty())
        .count();
    if let Some(listener) = &session.control {
        for _ in 0..foreign_devices {
            let (_, payload) = tcp::accept_control(listener, CONTROL_TIMEOUT)?;
            let mut more: Vec<RankOutcome> = serde_json::from_slice(&payload)?;
            all.append(&mut more);
        }
    }
    assemble(cfg, &topo, &assignment, all).map(Some)
}

/// Writes the report to `path`, or stdout when `path` is `None`.
pub fn write_report(report: &PerfReport, format: OutputFormat, path: Option<&Path>) -> Result<()> {
    let write = |out: &mut dyn Write| match format {
        OutputFormat::Json => report
            .write_json(&mut *out)
            .and_then(|_| Ok(writeln!(out)?)),
        OutputFormat::Csv => report.write_csv(&mut *out),
        OutputFormat::Text => report.write_text(&mut *out),
    };
    match path {
        Some(p) => write(&mut std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => write(&mut std::io::stdout().lock()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "text" => Ok(OutputFormat::Text),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

impl std::fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutputFormat::Json => "json",
            OutputFormat::Csv => "csv",
            OutputFormat::Text => "text",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::reference_run_with;

    fn config(n: usize, steps: usize, ranks: usize, h: Option<usize>, t: usize) -> RunConfig {
        let mut c = RunConfig::new(n).unwrap();
        c.steps = steps;
        c.ranks = ranks;
        c.h_override = h;
        c.threads = t;
        c.collect_fields = true;
        c
    }

    fn assert_matches_reference(report: &PerfReport) {
        let c = &report.config;
        let reference = reference_run_with(&c.spec, c.steps, c.initial, c.cadence).unwrap();
        let g = report.fields.as_ref().unwrap();
        for (a, b) in [
            (&g.p, &reference.p),
            (&g.u, &reference.u),
            (&g.v, &reference.v),
        ] {
            assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn single_rank_matches_reference() {
        let report = run(&config(16, 12, 1, None, 1)).unwrap();
        assert_matches_reference(&report);
        assert_eq!(report.conservation.len(), 3);
        assert_eq!(report.conservation.last().unwrap().step, 12);
    }

    #[test]
    fn decomposed_matches_reference() {
        for (r, h, t) in [
            (4, Some(2), 2),
            (6, Some(3), 3),
            (2, Some(1), 1),
            (8, None, 2),
        ] {
            assert_matches_reference(&run(&config(16, 10, r, h, t)).unwrap());
        }
    }

    #[test]
    fn tcp_backend_matches_inprocess() {
        let mut c = config(16, 6, 4, Some(2), 1);
        c.devices = 2;
        let a = run(&c).unwrap();
        c.backend = Backend::Tcp;
        let b = run(&c).unwrap();
        assert_eq!(a.fields, b.fields);
        assert_eq!(a.conservation, b.conservation);
        assert_eq!(a.links.total().bytes, b.links.total().bytes);
        assert!(b.traffic[&LinkClass::Remote].messages > 0);
    }

    #[test]
    fn conservation_matches_reference_sums_closely() {
        let report = run(&config(16, 20, 4, Some(2), 1)).unwrap();
        let c = &report.config;
        let reference = reference_run_with(&c.spec, c.steps, c.initial, c.cadence).unwrap();
        for (a, b) in report.conservation.iter().zip(&reference.conservation) {
            assert_eq!(a.step, b.step);
            assert!(((a.mass - b.mass) / b.mass).abs() < 1e-14);
            assert!(((a.energy - b.energy) / b.energy).abs() < 1e-13);
            assert!(((a.enstrophy - b.enstrophy) / b.enstrophy).abs() < 1e-12);
        }
    }

    #[test]
    fn fault_breaks_bit_equality() {
        let mut c = config(16, 4, 2, Some(2), 1);
        c.fault = Some(Fault {
            rank: 1,
            step: 1,
            delta: 1e-6,
        });
        let report = run(&c).unwrap();
        let reference = reference_run_with(&c.spec, c.steps, c.initial, c.cadence).unwrap();
        let g = report.fields.unwrap();
        assert!(g.p.iter().zip(&reference.p).any(|(x, y)| x != y));
    }

    #[test]
    fn blowup_surfaces_as_root_cause() {
        let mut c = config(16, 20, 4, Some(2), 1);
        c.spec.dt = 1.0e9;
        let err = run(&c).unwrap_err();
        assert!(matches!(err, Error::Blowup { .. }), "{err:?}");
    }

    #[test]
    fn rate_times_wall_is_flop_count() {
        let r = run(&config(16, 5, 1, None, 1)).unwrap();
        let product = r.rate_gflops * 1e9 * r.timing.wall_seconds;
        assert!((product - r.flops as f64).abs() <= 1e-9 * r.flops as f64);
    }

    #[test]
    fn invalid_configs_are_rejected_up_front() {
        let mut c = config(16, 5, 4, Some(3), 1);
        assert!(matches!(run(&c), Err(Error::Decomposition(_))));
        c.h_override = None;
        c.threads = 0;
        assert!(matches!(run(&c), Err(Error::Config(_))));
        c.threads = 1;
        c.steps = 0;
        assert!(run(&c).is_err());
        let c = config(4, 1, 36, None, 1);
        assert!(matches!(run(&c), Err(Error::Decomposition(_))));
    }

    #[test]
    fn report_round_trips_through_json() {
        let r = run(&config(8, 3, 2, None, 1)).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: PerfReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.config, r.config);
        assert_eq!(back.flops, r.flops);
        let mut csv = Vec::new();
        r.write_csv(&mut csv).unwrap();
        let csv = String::from_utf8(csv).unwrap();
        assert!(csv.starts_with("step,mass,energy,enstrophy\n"));
        assert_eq!(csv.lines().count(), 1 + r.conservation.len());
    }
}
