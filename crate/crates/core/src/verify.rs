//! Self-check suite run by `shwx verify`.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::InitialCondition;
use crate::reference::reference_run_with;
use crate::runner::{run, Fault, RunConfig};
use crate::topology::{
    assign_devices, classify_links, whole_rows_per_device, Placement, RankTopology,
};
use crate::transport::wire::{self, FieldId, HaloMessage, Phase, Side};

pub const MASS_DRIFT_PER_STEP: f64 = 1e-13;
pub const ENSTROPHY_DRIFT: f64 = 1e-3;
const CONSERVATION_STEPS: usize = 100;
const STEADY_STEPS: usize = 100;
const WIRE_CASES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Oracle,
    Mass,
    Enstrophy,
    Steady,
    Links,
    Wire,
}

impl Check {
    pub const ALL: [Check; 6] = [
        Check::Oracle,
        Check::Mass,
        Check::Enstrophy,
        Check::Steady,
        Check::Links,
        Check::Wire,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::Oracle => "oracle",
            Check::Mass => "mass",
            Check::Enstrophy => "enstrophy",
            Check::Steady => "steady",
            Check::Links => "links",
            Check::Wire => "wire",
        }
    }
}

impl FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown check {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check: Check,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub n: usize,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub n: usize,
    /// Steps of the oracle comparison runs.
    pub steps: usize,
    pub checks: Vec<Check>,
    /// Ghost perturbation injected into every decomposed oracle run.
    pub fault: Option<f64>,
}

impl VerifyConfig {
    pub fn new(n: usize) -> Self {
        VerifyConfig {
            n,
            steps: 20,
            checks: Check::ALL.to_vec(),
            fault: None,
        }
    }
}

pub fn verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    for &check in &cfg.checks {
        let result = match check {
            Check::Oracle => oracle(cfg)?,
            Check::Mass | Check::Enstrophy => conservation(cfg.n, check)?,
            Check::Steady => steady(cfg.n)?,
            Check::Links => links(),
            Check::Wire => wire_round_trip(),
        };
        log::info!(
            "{}: {} (measured {}, bound {})",
            check.name(),
            if result.passed { "pass" } else { "FAIL" },
            result.measured,
            result.bound
        );
        checks.push(result);
    }
    Ok(VerifyReport {
        n: cfg.n,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

fn max_rel_diff(a: &[f64], b: &[f64]) -> (f64, usize) {
    let mut worst = 0.0f64;
    let mut differing = 0;
    for (x, y) in a.iter().zip(b) {
        if x.to_bits() != y.to_bits() {
            differing += 1;
            let scale = x.abs().max(y.abs());
            let d = if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            };
            worst = worst.max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    (worst, differing)
}

/// Decomposed runs against the straight-loop solver, bit for bit.
fn oracle(cfg: &VerifyConfig) -> Result<CheckResult> {
    let base = {
        let mut c = RunConfig::new(cfg.n)?;
        c.steps = cfg.steps;
        c.collect_fields = true;
        c
    };
    let reference = reference_run_with(&base.spec, base.steps, base.initial, base.cadence)?;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut runs = 0;
    for r in [1, 2, 4, 6] {
        for h in (1..=r).filter(|h| r % h == 0 && *h <= cfg.n && r / h <= cfg.n) {
            for t in [1, 2] {
                let mut c = base.clone();
                c.ranks = r;
                c.h_override = Some(h);
                c.threads = t;
                c.fault = cfg.fault.map(|delta| Fault {
                    rank: r - 1,
                    step: cfg.steps / 2,
                    delta,
                });
                let report = run(&c)?;
                let g = report.fields.expect("fields collected");
                runs += 1;
                let mut differing = 0;
                for (a, b) in [
                    (&g.p, &reference.p),
                    (&g.u, &reference.u),
                    (&g.v, &reference.v),
                ] {
                    let (d, k) = max_rel_diff(a, b);
                    worst = worst.max(d);
                    differing += k;
                }
                if differing > 0 {
                    failures.push(format!("r={r} h={h} t={t}: {differing} values differ"));
                }
            }
        }
    }
    Ok(CheckResult {
        check: Check::Oracle,
        passed: failures.is_empty(),
        measured: worst,
        bound: 0.0,
        detail: if failures.is_empty() {
            format!("{runs} decomposed runs bitwise equal to the reference")
        } else {
            failures.join("; ")
        },
    })
}

fn conservation(n: usize, check: Check) -> Result<CheckResult> {
    let mut c = RunConfig::new(n)?;
    c.steps = CONSERVATION_STEPS;
    c.cadence = 1;
    c.ranks = if n >= 2 { 4 } else { 1 };
    let report = run(&c)?;
    let s = &report.conservation;
    Ok(match check {
        Check::Mass => {
            let m0 = s[0].mass;
            let worst = s
                .windows(2)
                .map(|w| ((w[1].mass - w[0].mass) / m0).abs())
                .fold(0.0, f64::max);
            CheckResult {
                check,
                passed: worst <= MASS_DRIFT_PER_STEP,
                measured: worst,
                bound: MASS_DRIFT_PER_STEP,
                detail: format!(
                    "largest relative mass change per step over {} steps",
                    c.steps
                ),
            }
        }
        _ => {
            let z0 = s[0].enstrophy;
            let worst = s
                .iter()
                .map(|x| ((x.enstrophy - z0) / z0).abs())
                .fold(0.0, f64::max);
            CheckResult {
                check,
                passed: s.iter().all(|x| x.enstrophy.is_finite()) && worst <= ENSTROPHY_DRIFT,
                measured: worst,
                bound: ENSTROPHY_DRIFT,
                detail: format!("largest relative enstrophy change over {} steps", c.steps),
            }
        }
    })
}

fn steady(n: usize) -> Result<CheckResult> {
    let pressure = 50_000.0;
    let mut changed = 0;
    for r in [1, 4] {
        let mut c = RunConfig::new(n)?;
        c.steps = STEADY_STEPS;
        c.ranks = r;
        c.initial = InitialCondition::Rest { pressure };
        c.collect_fields = true;
        let g = run(&c)?.fields.expect("fields collected");
        changed +=
            g.p.iter()
                .filter(|x| x.to_bits() != pressure.to_bits())
                .count();
        changed += g.u.iter().chain(&g.v).filter(|x| x.to_bits() != 0).count();
    }
    Ok(CheckResult {
        check: Check::Steady,
        passed: changed == 0,
        measured: changed as f64,
        bound: 0.0,
        detail: format!(
            "values that left the rest state after {STEADY_STEPS} steps on 1 and 4 ranks"
        ),
    })
}

/// Placement enumeration: link counts add up, and contiguous chunks of whole
/// rows never have more remote links than round-robin.
fn links() -> CheckResult {
    let mut violations = Vec::new();
    let mut shapes = 0;
    for r in 1..=64 {
        for h in (1..=r).filter(|h| r % h == 0) {
            let w = r / h;
            let topo = RankTopology::new(h, w).expect("valid shape");
            for m in (1..=r).filter(|m| r % m == 0) {
                shapes += 1;
                let c =
                    classify_links(&topo, &assign_devices(r, m, Placement::Contiguous).unwrap())
                        .unwrap();
                let rr =
                    classify_links(&topo, &assign_devices(r, m, Placement::RoundRobin).unwrap())
                        .unwrap();
                if c.local + c.remote != 4 * r || rr.local + rr.remote != 4 * r {
                    violations.push(format!("h={h} w={w} m={m}: link count"));
                }
                if m == 1 && (c.remote != 0 || rr.remote != 0) {
                    violations.push(format!("h={h} w={w}: remote links on one device"));
                }
                if whole_rows_per_device(h, w, m) && c.remote > rr.remote {
                    violations.push(format!("h={h} w={w} m={m}: {} > {}", c.remote, rr.remote));
                }
            }
        }
    }
    CheckResult {
        check: Check::Links,
        passed: violations.is_empty(),
        measured: violations.len() as f64,
        bound: 0.0,
        detail: if violations.is_empty() {
            format!("{shapes} (h, w, m) shapes enumerated")
        } else {
            violations.join("; ")
        },
    }
}

pub fn random_message(rng: &mut impl Rng) -> HaloMessage {
    let len = rng.gen_range(0..200);
    HaloMessage {
        src: rng.gen(),
        dst: rng.gen(),
        step: rng.gen(),
        phase: if rng.gen() {
            Phase::Diagnostics
        } else {
            Phase::Advance
        },
        side: Side::ALL[rng.gen_range(0..4)],
        field: FieldId::ALL[rng.gen_range(0..FieldId::ALL.len())],
        payload: (0..len).map(|_| f64::from_bits(rng.gen())).collect(),
    }
}

fn same_message(a: &HaloMessage, b: &HaloMessage) -> bool {
    a.src == b.src
        && a.dst == b.dst
        && a.step == b.step
        && a.phase == b.phase
        && a.side == b.side
        && a.field == b.field
        && a.payload.len() == b.payload.len()
        && a.payload
            .iter()
            .zip(&b.payload)
            .all(|(x, y)| x.to_bits() == y.to_bits())
}

fn wire_round_trip() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5348_5758);
    let mut mismatches = 0;
    for _ in 0..WIRE_CASES {
        let msg = random_message(&mut rng);
        match wire::decode(&wire::encode(&msg)) {
            Ok(back) if same_message(&msg, &back) => {}
            _ => mismatches += 1,
        }
    }
    let good = wire::encode(&random_message(&mut rng));
    let mut bad_magic = good.clone();
    bad_magic[0] ^= 0xff;
    let mut bad_version = good.clone();
    bad_version[4] = 0xee;
    let truncated = &good[..good.len() - 1];
    let rejected = [
        wire::decode(&bad_magic),
        wire::decode(&bad_version),
        wire::decode(truncated),
    ]
    .iter()
    .filter(|r| matches!(r, Err(Error::Malformed(_))))
    .count();
    CheckResult {
        check: Check::Wire,
        passed: mismatches == 0 && rejected == 3,
        measured: mismatches as f64,
        bound: 0.0,
        detail: format!("{WIRE_CASES} random round trips, {rejected}/3 malformed frames rejected"),
    }
}
