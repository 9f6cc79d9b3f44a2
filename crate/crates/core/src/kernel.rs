//! Enstrophy-conserving staggered-grid update: diagnostic half step, leapfrog
//! advance and Robert-Asselin filter, each executed as a row-partitioned sweep
//! over a rank's owned block.
//!
//! Staggering (0-based): `p` at cell centres, `u` on the x−1 face, `v` on the
//! y−1 face, `z` at the (x−1, y−1) corner. The diagnostic sweep reads the −1
//! ghost side of `p, u, v` (and the +1 side for the Bernoulli head); the
//! advance sweep reads both sides of `cu, cv, z, hb`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{wrap, BlockExtent, Field, GridSpec};

/// Floating-point operations charged per cell per time step by the rate metric.
pub const FLOPS_PER_CELL: u64 = 65;

/// Default number of time steps per run.
pub const DEFAULT_STEPS: usize = 50;

const STREAM_AMPLITUDE: f64 = 1.0e6;
const MEAN_PRESSURE: f64 = 5.0e4;

/// Three time levels of one prognostic variable.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLevels {
    pub old: Field,
    pub cur: Field,
    pub new: Field,
}

impl TimeLevels {
    fn uniform(field: Field) -> Self {
        TimeLevels {
            old: field.clone(),
            cur: field.clone(),
            new: field,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateFields {
    pub p: TimeLevels,
    pub u: TimeLevels,
    pub v: TimeLevels,
}

impl StateFields {
    pub fn extent(&self) -> BlockExtent {
        self.p.cur.extent()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticFields {
    /// x mass flux
    pub cu: Field,
    /// y mass flux
    pub cv: Field,
    /// potential vorticity
    pub z: Field,
    /// Bernoulli head
    pub hb: Field,
}

impl DiagnosticFields {
    pub fn zeros(extent: BlockExtent) -> Self {
        DiagnosticFields {
            cu: Field::zeros(extent),
            cv: Field::zeros(extent),
            z: Field::zeros(extent),
            hb: Field::zeros(extent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeCoeffs {
    pub tdt: f64,
    pub tdts8: f64,
    pub tdtsdx: f64,
    pub tdtsdy: f64,
}

impl TimeCoeffs {
    pub fn from_tdt(tdt: f64, spec: &GridSpec) -> Self {
        TimeCoeffs {
            tdt,
            tdts8: tdt / 8.0,
            tdtsdx: tdt / spec.dx,
            tdtsdy: tdt / spec.dy,
        }
    }

    /// Forward step of `dt` to start the leapfrog, `2 dt` afterwards.
    pub fn for_step(spec: &GridSpec, step: usize) -> Self {
        let tdt = if step == 0 { spec.dt } else { 2.0 * spec.dt };
        Self::from_tdt(tdt, spec)
    }
}

/// Prognostic variable selector for initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    P,
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialCondition {
    /// Doubly periodic streamfunction vortex field with a matching pressure bump.
    #[default]
    Vortex,
    /// Uniform pressure, fluid at rest.
    Rest { pressure: f64 },
}

impl InitialCondition {
    /// Value of `var` at global cell `(i, j)`; indices wrap periodically.
    pub fn value(&self, var: Var, spec: &GridSpec, i: usize, j: usize) -> f64 {
        match *self {
            InitialCondition::Rest { pressure } => match var {
                Var::P => pressure,
                Var::U | Var::V => 0.0,
            },
            InitialCondition::Vortex => {
                let n = spec.n;
                let di = 2.0 * PI / n as f64;
                let psi = |i: usize, j: usize| {
                    STREAM_AMPLITUDE * ((i as f64 + 0.5) * di).sin() * ((j as f64 + 0.5) * di).sin()
                };
                match var {
                    Var::U => -(psi(i, j) - psi(i, wrap(j as isize - 1, n))) / spec.dy,
                    Var::V => (psi(i, j) - psi(wrap(i as isize - 1, n), j)) / spec.dx,
                    Var::P => {
                        let el = n as f64 * spec.dx;
                        let pcf = PI * PI * STREAM_AMPLITUDE * STREAM_AMPLITUDE / (el * el);
                        pcf * ((2.0 * i as f64 * di).cos() + (2.0 * j as f64 * di).cos())
                            + MEAN_PRESSURE
                    }
                }
            }
        }
    }

    /// All three time levels set to the initial state, ghost frames filled by
    /// periodic wrap.
    pub fn fields(&self, spec: &GridSpec, extent: BlockExtent) -> StateFields {
        let make = |var| {
            TimeLevels::uniform(Field::from_fn(extent, spec.n, |i, j| {
                self.value(var, spec, i, j)
            }))
        };
        StateFields {
            p: make(Var::P),
            u: make(Var::U),
            v: make(Var::V),
        }
    }
}

pub fn init_fields(spec: &GridSpec, extent: BlockExtent) -> StateFields {
    InitialCondition::Vortex.fields(spec, extent)
}

/// Static contiguous share of rows `[sy, ey]` for worker `k` of `t`, using the
/// same remainder rule as the block decomposition. `None` when the worker has
/// no rows.
pub fn partition_rows(sy: usize, ey: usize, t: usize, k: usize) -> Option<(usize, usize)> {
    assert!(t >= 1 && k < t, "worker {k} of {t}");
    let rows = ey - sy + 1;
    let base = rows / t;
    let rem = rows % t;
    let len = base + usize::from(k < rem);
    if len == 0 {
        return None;
    }
    let start = sy + k * base + k.min(rem);
    Some((start, start + len - 1))
}

pub fn flop_count(n: usize, steps: usize) -> u64 {
    FLOPS_PER_CELL * (n as u64) * (n as u64) * steps as u64
}

/// A rank's kernel workers. Each sweep splits the owned rows statically over
/// `count` workers; a sweep returns only when all workers are done.
pub struct Workers {
    count: usize,
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Workers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Workers")
            .field("count", &self.count)
            .finish()
    }
}

impl Workers {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("worker count must be >= 1".into()));
        }
        let pool = if count > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(count)
                    .build()
                    .map_err(|e| Error::Config(format!("worker pool: {e}")))?,
            )
        } else {
            None
        };
        Ok(Workers { count, pool })
    }

    pub fn serial() -> Self {
        Workers {
            count: 1,
            pool: None,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    fn run<T: Send>(&self, items: Vec<T>, f: impl Fn(T) -> Result<()> + Sync + Send) -> Result<()> {
        match &self.pool {
            Some(pool) if items.len() > 1 => {
                pool.install(|| items.into_par_iter().try_for_each(&f))
            }
            _ => items.into_iter().try_for_each(f),
        }
    }
}

/// Frame rows `first..=last` handed to one worker; slabs start at `first`.
#[derive(Debug, Clone, Copy)]
struct RowBlock {
    first: usize,
    last: usize,
    stride: usize,
}

impl RowBlock {
    #[inline]
    fn offset(&self, li: usize, lj: usize) -> usize {
        (lj - self.first) * self.stride + li
    }
}

fn split_rows<'a>(
    values: &'a mut [f64],
    stride: usize,
    ranges: &[Option<(usize, usize)>],
) -> Vec<Option<&'a mut [f64]>> {
    let mut rest = values;
    let mut consumed = 0;
    let mut out = Vec::with_capacity(ranges.len());
    for range in ranges {
        match *range {
            None => out.push(None),
            Some((first, last)) => {
                let tail = std::mem::take(&mut rest);
                let (_, tail) = tail.split_at_mut((first - consumed) * stride);
                let (slab, tail) = tail.split_at_mut((last - first + 1) * stride);
                out.push(Some(slab));
                rest = tail;
                consumed = last + 1;
            }
        }
    }
    out
}

/// Runs `body` once per non-empty worker row block with mutable row slabs of
/// each output field.
fn sweep<const K: usize>(
    workers: &Workers,
    outputs: [&mut Field; K],
    body: impl Fn(RowBlock, &mut [&mut [f64]; K]) -> Result<()> + Sync + Send,
) -> Result<()> {
    let extent = outputs[0].extent();
    let stride = outputs[0].stride();
    let t = workers.count();
    let ranges: Vec<Option<(usize, usize)>> = (0..t)
        .map(|k| {
            partition_rows(extent.sy, extent.ey, t, k)
                .map(|(a, b)| (a - extent.sy + 1, b - extent.sy + 1))
        })
        .collect();

    let mut per_field: Vec<std::vec::IntoIter<Option<&mut [f64]>>> = outputs
        .into_iter()
        .map(|f| {
            debug_assert_eq!(f.extent(), extent);
            split_rows(f.values_mut(), stride, &ranges).into_iter()
        })
        .collect();

    let mut items = Vec::with_capacity(t);
    for range in &ranges {
        let slabs: Vec<Option<&mut [f64]>> =
            per_field.iter_mut().map(|it| it.next().flatten()).collect();
        if let Some((first, last)) = *range {
            let slabs: Vec<&mut [f64]> = slabs.into_iter().map(Option::unwrap).collect();
            let slabs: [&mut [f64]; K] = slabs.try_into().expect("one slab per output");
            items.push((
                RowBlock {
                    first,
                    last,
                    stride,
                },
                slabs,
            ));
        }
    }
    workers.run(items, |(rows, mut slabs)| body(rows, &mut slabs))
}

/// Mass fluxes, potential vorticity and Bernoulli head from the current level.
pub fn compute_diagnostics(
    state: &StateFields,
    spec: &GridSpec,
    workers: &Workers,
    step: usize,
) -> Result<DiagnosticFields> {
    let mut diag = DiagnosticFields::zeros(state.extent());
    compute_diagnostics_into(state, spec, &mut diag, workers, step)?;
    Ok(diag)
}

pub fn compute_diagnostics_into(
    state: &StateFields,
    spec: &GridSpec,
    diag: &mut DiagnosticFields,
    workers: &Workers,
    step: usize,
) -> Result<()> {
    let extent = state.extent();
    let nx = extent.width();
    let fsdx = 4.0 / spec.dx;
    let fsdy = 4.0 / spec.dy;
    let (p, u, v) = (&state.p.cur, &state.u.cur, &state.v.cur);
    let DiagnosticFields { cu, cv, z, hb } = diag;

    sweep(workers, [cu, cv, z, hb], |rows, [cu, cv, z, hb]| {
        for lj in rows.first..=rows.last {
            for li in 1..=nx {
                let k = rows.offset(li, lj);
                cu[k] = 0.5 * (p.at(li, lj) + p.at(li - 1, lj)) * u.at(li, lj);
                cv[k] = 0.5 * (p.at(li, lj) + p.at(li, lj - 1)) * v.at(li, lj);
                let den = p.at(li - 1, lj - 1) + p.at(li, lj - 1) + p.at(li, lj) + p.at(li - 1, lj);
                // also rejects NaN
                #[allow(clippy::neg_cmp_op_on_partial_ord)]
                if !(den > 0.0) {
                    return Err(Error::Blowup {
                        step,
                        i: extent.sx + li - 1,
                        j: extent.sy + lj - 1,
                        what: "non-positive pressure in vorticity denominator",
                    });
                }
                z[k] = (fsdx * (v.at(li, lj) - v.at(li - 1, lj))
                    - fsdy * (u.at(li, lj) - u.at(li, lj - 1)))
                    / den;
                hb[k] = p.at(li, lj)
                    + 0.25
                        * (u.at(li + 1, lj) * u.at(li + 1, lj)
                            + u.at(li, lj) * u.at(li, lj)
                            + v.at(li, lj + 1) * v.at(li, lj + 1)
                            + v.at(li, lj) * v.at(li, lj));
            }
        }
        Ok(())
    })
}

/// Leapfrog update of the new time level from the old level and diagnostics.
pub fn advance(
    state: &mut StateFields,
    diag: &DiagnosticFields,
    coeffs: &TimeCoeffs,
    workers: &Workers,
    step: usize,
) -> Result<()> {
    let extent = state.extent();
    let nx = extent.width();
    let TimeCoeffs {
        tdts8,
        tdtsdx,
        tdtsdy,
        ..
    } = *coeffs;
    let DiagnosticFields { cu, cv, z, hb } = diag;
    let StateFields { p, u, v } = state;
    let (pold, uold, vold) = (&p.old, &u.old, &v.old);

    sweep(
        workers,
        [&mut u.new, &mut v.new, &mut p.new],
        |rows, [unew, vnew, pnew]| {
            for lj in rows.first..=rows.last {
                for li in 1..=nx {
                    let k = rows.offset(li, lj);
                    let un = uold.at(li, lj)
                        + tdts8
                            * (z.at(li, lj + 1) + z.at(li, lj))
                            * (cv.at(li, lj + 1)
                                + cv.at(li - 1, lj + 1)
                                + cv.at(li - 1, lj)
                                + cv.at(li, lj))
                        - tdtsdx * (hb.at(li, lj) - hb.at(li - 1, lj));
                    let vn = vold.at(li, lj)
                        - tdts8
                            * (z.at(li + 1, lj) + z.at(li, lj))
                            * (cu.at(li + 1, lj)
                                + cu.at(li, lj)
                                + cu.at(li, lj - 1)
                                + cu.at(li + 1, lj - 1))
                        - tdtsdy * (hb.at(li, lj) - hb.at(li, lj - 1));
                    let pn = pold.at(li, lj)
                        - tdtsdx * (cu.at(li + 1, lj) - cu.at(li, lj))
                        - tdtsdy * (cv.at(li, lj + 1) - cv.at(li, lj));
                    if !(un.is_finite() && vn.is_finite() && pn.is_finite()) {
                        return Err(Error::Blowup {
                            step,
                            i: extent.sx + li - 1,
                            j: extent.sy + lj - 1,
                            what: "non-finite value in new time level",
                        });
                    }
                    unew[k] = un;
                    vnew[k] = vn;
                    pnew[k] = pn;
                }
            }
            Ok(())
        },
    )
}

/// Robert-Asselin filter followed by the time-level rotation. On the first
/// step the filter is skipped and the levels only rotate.
pub fn apply_time_filter(
    state: &mut StateFields,
    alpha: f64,
    first_step: bool,
    workers: &Workers,
) -> Result<()> {
    if !first_step {
        let nx = state.extent().width();
        let StateFields { p, u, v } = state;
        let (pc, pn) = (&p.cur, &p.new);
        let (uc, un) = (&u.cur, &u.new);
        let (vc, vn) = (&v.cur, &v.new);
        sweep(
            workers,
            [&mut p.old, &mut u.old, &mut v.old],
            |rows, [po, uo, vo]| {
                for lj in rows.first..=rows.last {
                    for li in 1..=nx {
                        let k = rows.offset(li, lj);
                        po[k] = filtered(po[k], pc.at(li, lj), pn.at(li, lj), alpha);
                        uo[k] = filtered(uo[k], uc.at(li, lj), un.at(li, lj), alpha);
                        vo[k] = filtered(vo[k], vc.at(li, lj), vn.at(li, lj), alpha);
                    }
                }
                Ok(())
            },
        )?;
    }
    for levels in [&mut state.p, &mut state.u, &mut state.v] {
        if first_step {
            std::mem::swap(&mut levels.old, &mut levels.cur);
        }
        std::mem::swap(&mut levels.cur, &mut levels.new);
    }
    Ok(())
}

#[inline]
pub(crate) fn filtered(old: f64, cur: f64, new: f64, alpha: f64) -> f64 {
    cur + alpha * (new - 2.0 * cur + old)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::block_of;

    fn rest(n: usize, p: f64) -> (GridSpec, StateFields) {
        let spec = GridSpec::new(n).unwrap();
        let state = InitialCondition::Rest { pressure: p }.fields(&spec, BlockExtent::whole(n));
        (spec, state)
    }

    #[test]
    fn partition_examples() {
        assert_eq!(partition_rows(0, 9, 1, 0), Some((0, 9)));
        assert_eq!(partition_rows(0, 9, 3, 1), Some((4, 6)));
        assert_eq!(partition_rows(0, 1, 4, 3), None);
        assert_eq!(partition_rows(5, 14, 3, 0), Some((5, 8)));
    }

    #[test]
    fn partition_covers_rows() {
        for rows in 1..20 {
            for t in 1..25 {
                let mut next = 3;
                for k in 0..t {
                    if let Some((a, b)) = partition_rows(3, 3 + rows - 1, t, k) {
                        assert_eq!(a, next);
                        next = b + 1;
                    }
                }
                assert_eq!(next, 3 + rows);
            }
        }
    }

    #[test]
    fn flop_count_examples() {
        assert_eq!(flop_count(1, 1), 65);
        assert_eq!(flop_count(10000, 50), 325_000_000_000);
    }

    #[test]
    fn vortex_streamfunction_is_periodic() {
        let spec = GridSpec::new(8).unwrap();
        let ic = InitialCondition::Vortex;
        // ψ enters u and v only through wrapped differences, so u, v, p must
        // agree at i and i + n when evaluated through the wrap helper.
        for i in 0..8 {
            for j in 0..8 {
                for var in [Var::P, Var::U, Var::V] {
                    let a = ic.value(var, &spec, i, j);
                    let b = ic.value(var, &spec, wrap(i as isize + 8, 8), j);
                    assert_eq!(a, b);
                }
            }
        }
        let di = 2.0 * PI / 8.0;
        let psi = |i: f64, j: f64| 1.0e6 * ((i + 0.5) * di).sin() * ((j + 0.5) * di).sin();
        for i in 0..8 {
            for j in 0..8 {
                let (fi, fj) = (i as f64, j as f64);
                assert!((psi(fi + 8.0, fj) - psi(fi, fj)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn vortex_velocity_sums_vanish() {
        let spec = GridSpec::new(16).unwrap();
        let ic = InitialCondition::Vortex;
        let (mut su, mut sv, mut scale) = (0.0f64, 0.0f64, 0.0f64);
        for j in 0..16 {
            for i in 0..16 {
                let u = ic.value(Var::U, &spec, i, j);
                let v = ic.value(Var::V, &spec, i, j);
                su += u;
                sv += v;
                scale = scale.max(u.abs()).max(v.abs());
            }
        }
        assert!(su.abs() < 1e-12 * scale * 256.0, "sum u = {su}");
        assert!(sv.abs() < 1e-12 * scale * 256.0, "sum v = {sv}");
    }

    #[test]
    fn vortex_pressure_corner_value() {
        // pcf = π² A² / (n dx)² with A = 1e6, n = 4, dx = 1e5; p(0,0) = 2 pcf + 5e4.
        let spec = GridSpec::new(4).unwrap();
        let expected = PI * PI * 1.0e12 / (4.0e5 * 4.0e5) * 2.0 + 5.0e4;
        let got = InitialCondition::Vortex.value(Var::P, &spec, 0, 0);
        assert!((got - expected).abs() <= 1e-9 * expected);
        assert!((got - 50_123.370_055_013_6).abs() < 1e-6);
    }

    #[test]
    fn vortex_pressure_is_positive() {
        for n in [4, 8, 64, 256] {
            let spec = GridSpec::new(n).unwrap();
            let state = init_fields(&spec, BlockExtent::whole(n));
            assert!(state.p.cur.owned().all(|(_, _, p)| p > 0.0));
        }
    }

    #[test]
    fn rest_state_diagnostics() {
        let (spec, state) = rest(8, 50_000.0);
        let d = compute_diagnostics(&state, &spec, &Workers::serial(), 0).unwrap();
        for (_, _, x) in d.cu.owned().chain(d.cv.owned()).chain(d.z.owned()) {
            assert_eq!(x, 0.0);
        }
        assert!(d.hb.owned().all(|(_, _, h)| h == 50_000.0));
    }

    #[test]
    fn uniform_flow_diagnostics() {
        let spec = GridSpec::new(8).unwrap();
        let e = BlockExtent::whole(8);
        let (c, a) = (40_000.0, 3.5);
        let mut state = InitialCondition::Rest { pressure: c }.fields(&spec, e);
        state.u.cur = Field::filled(e, a);
        let d = compute_diagnostics(&state, &spec, &Workers::serial(), 0).unwrap();
        assert!(d.cu.owned().all(|(_, _, x)| x == c * a));
        assert!(d.cv.owned().all(|(_, _, x)| x == 0.0));
        assert!(d.z.owned().all(|(_, _, x)| x == 0.0));
        assert!(d.hb.owned().all(|(_, _, x)| x == c + 0.5 * a * a));
    }

    #[test]
    fn diagnostics_reject_nonpositive_pressure() {
        let (spec, mut state) = rest(8, 50_000.0);
        let e = state.extent();
        state.p.cur = Field::filled(e, -1.0);
        let err = compute_diagnostics(&state, &spec, &Workers::serial(), 7).unwrap_err();
        assert!(matches!(err, Error::Blowup { step: 7, .. }));
    }

    /// Periodic ghost refresh for a single block covering the whole grid.
    fn wrap_ghosts(fields: &mut [&mut Field]) {
        for f in fields.iter_mut() {
            let e = f.extent();
            **f = Field::from_fn(e, e.width(), |i, j| f.get_global(i, j));
        }
    }

    #[test]
    fn rest_state_is_steady() {
        let (spec, mut state) = rest(8, 50_000.0);
        let before = state.clone();
        let w = Workers::serial();
        for step in 0..5 {
            let mut d = compute_diagnostics(&state, &spec, &w, step).unwrap();
            wrap_ghosts(&mut [&mut d.cu, &mut d.cv, &mut d.z, &mut d.hb]);
            advance(&mut state, &d, &TimeCoeffs::for_step(&spec, step), &w, step).unwrap();
            apply_time_filter(&mut state, spec.alpha, step == 0, &w).unwrap();
            for (a, b) in [
                (&state.p.cur, &before.p.cur),
                (&state.u.cur, &before.u.cur),
                (&state.v.cur, &before.v.cur),
            ] {
                for (x, y) in a.owned().zip(b.owned()) {
                    assert_eq!(x.2.to_bits(), y.2.to_bits(), "step {step}: {x:?} vs {y:?}");
                }
            }
        }
    }

    #[test]
    fn zero_step_copies_old_level() {
        let spec = GridSpec::new(8).unwrap();
        let mut state = init_fields(&spec, BlockExtent::whole(8));
        state.u.old = Field::from_fn(state.extent(), 8, |i, j| (i * 8 + j) as f64 + 0.25);
        let d = compute_diagnostics(&state, &spec, &Workers::serial(), 0).unwrap();
        advance(
            &mut state,
            &d,
            &TimeCoeffs::from_tdt(0.0, &spec),
            &Workers::serial(),
            0,
        )
        .unwrap();
        for levels in [&state.p, &state.u, &state.v] {
            for (a, b) in levels.new.owned().zip(levels.old.owned()) {
                assert_eq!(a.2.to_bits(), b.2.to_bits());
            }
        }
    }

    #[test]
    fn time_filter_arithmetic() {
        assert_eq!(filtered(1.0, 2.0, 4.0, 0.5), 2.5);
        assert_eq!(filtered(3.0, 3.0, 3.0, 0.3), 3.0);
        assert_eq!(filtered(1.0, 2.0, 4.0, 0.0), 2.0);
    }

    #[test]
    fn time_filter_rotation() {
        let e = BlockExtent::whole(4);
        let spec = GridSpec::new(4).unwrap();
        let mut state = InitialCondition::Rest { pressure: 1.0 }.fields(&spec, e);
        state.p.old = Field::filled(e, 1.0);
        state.p.cur = Field::filled(e, 2.0);
        state.p.new = Field::filled(e, 4.0);
        let mut first = state.clone();

        apply_time_filter(&mut state, 0.5, false, &Workers::serial()).unwrap();
        assert!(state.p.old.owned().all(|(_, _, x)| x == 2.5));
        assert!(state.p.cur.owned().all(|(_, _, x)| x == 4.0));

        apply_time_filter(&mut first, 0.5, true, &Workers::serial()).unwrap();
        assert!(first.p.old.owned().all(|(_, _, x)| x == 2.0));
        assert!(first.p.cur.owned().all(|(_, _, x)| x == 4.0));
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let n = 12;
        let spec = GridSpec::new(n).unwrap();
        let extent = block_of(0, 1, 1, n).unwrap();
        let run = |t: usize| {
            let w = Workers::new(t).unwrap();
            let mut s = init_fields(&spec, extent);
            let d = compute_diagnostics(&s, &spec, &w, 0).unwrap();
            advance(&mut s, &d, &TimeCoeffs::for_step(&spec, 0), &w, 0).unwrap();
            (d, s)
        };
        let (d1, s1) = run(1);
        for t in 2..=n + 2 {
            let (dt, st) = run(t);
            assert_eq!(d1, dt, "t = {t}");
            assert_eq!(s1, st, "t = {t}");
        }
    }
}
