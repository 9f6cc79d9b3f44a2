//! Calibration scan over (threads per rank, x-blocks).
//!
//! With `c` cores per device and `m` devices, a candidate uses `t` threads per
//! rank where `t | c`, so each device hosts `c / t` ranks and the run has
//! `r = (c / t) · m` ranks. The x-block count `h` must divide `r`.

use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runner::{run, RunConfig};

pub const DEFAULT_CORES: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TuneSpace {
    pub cores: usize,
    pub devices: usize,
    /// Upper bound on `h`. Unset by default: x-block counts above the
    /// device count are still scanned, with a warning.
    pub h_cap: Option<usize>,
}

impl TuneSpace {
    pub fn new(cores: usize, devices: usize) -> Self {
        TuneSpace {
            cores,
            devices,
            h_cap: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Candidate {
    pub t: usize,
    pub h: usize,
    pub r: usize,
}

pub fn divisors(n: usize) -> Vec<usize> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

/// All admissible `(t, h)` pairs, ascending by `t` then `h`.
pub fn enumerate_candidates(space: &TuneSpace) -> Vec<Candidate> {
    let mut out = Vec::new();
    if space.cores == 0 || space.devices == 0 {
        return out;
    }
    for t in divisors(space.cores) {
        let r = space.cores / t * space.devices;
        for h in divisors(r) {
            if space.h_cap.is_none_or(|cap| h <= cap) {
                out.push(Candidate { t, h, r });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub h: usize,
    pub r: usize,
    /// GFLOP/s; empty when the candidate failed.
    pub rate: Option<f64>,
    /// Median wall time in seconds.
    pub time: Option<f64>,
    pub status: String,
}

impl TuneRow {
    pub fn ok(&self) -> bool {
        self.rate.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub space: TuneSpace,
    pub rows: Vec<TuneRow>,
    pub best: Option<usize>,
}

impl TuneResult {
    pub fn best_row(&self) -> Option<&TuneRow> {
        self.best.map(|i| &self.rows[i])
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Rate matrix with one row per `t` and one column per `h`; cells of
    /// inadmissible or failed candidates are empty.
    pub fn write_plot_data(&self, out: impl Write) -> Result<()> {
        let hs: BTreeSet<usize> = self.rows.iter().map(|r| r.h).collect();
        let ts: BTreeSet<usize> = self.rows.iter().map(|r| r.t).collect();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(hs.iter().map(|h| format!("h{h}")));
        w.write_record(&header)?;
        for &t in &ts {
            let mut record = vec![t.to_string()];
            for &h in &hs {
                let cell = self
                    .rows
                    .iter()
                    .find(|r| r.t == t && r.h == h)
                    .and_then(|r| r.rate)
                    .map(|x| x.to_string())
                    .unwrap_or_default();
                record.push(cell);
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Index of the highest rate; ties go to the smaller `t`, then the smaller `h`.
pub fn select_best(rows: &[TuneRow]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        let Some(rate) = row.rate else { continue };
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &rows[b];
                let better = rate > cur.rate.unwrap()
                    || (rate == cur.rate.unwrap() && (row.t, row.h) < (cur.t, cur.h));
                Some(if better { i } else { b })
            }
        };
    }
    best
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

/// Benchmarks every candidate in turn with `base` as the template run.
/// Failing candidates are recorded and skipped by the selection.
pub fn calibrate(space: &TuneSpace, base: &RunConfig, repeats: usize) -> Result<TuneResult> {
    let candidates = enumerate_candidates(space);
    if candidates.is_empty() {
        return Err(Error::Config(format!(
            "no candidates for {} cores on {} devices",
            space.cores, space.devices
        )));
    }
    if repeats == 0 {
        return Err(Error::Config("repeat count must be >= 1".into()));
    }
    if space.h_cap.is_none() && candidates.iter().any(|c| c.h > space.devices) {
        log::warn!(
            "scanning x-block counts above the device count {}; set a cap to skip them",
            space.devices
        );
    }

    let mut rows = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mut cfg = base.clone();
        cfg.ranks = c.r;
        cfg.threads = c.t;
        cfg.h_override = Some(c.h);
        cfg.devices = space.devices;
        cfg.assignment = None;
        cfg.collect_fields = false;

        let mut times = Vec::with_capacity(repeats);
        let mut failure = None;
        for _ in 0..repeats {
            match run(&cfg) {
                Ok(report) => times.push(report.timing.wall_seconds),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        let row = match failure {
            None => {
                let time = median(times);
                let rate = crate::kernel::flop_count(cfg.spec.n, cfg.steps) as f64 / time / 1e9;
                log::info!("t={} h={} r={}: {rate} GFLOP/s", c.t, c.h, c.r);
                TuneRow {
                    n: cfg.spec.n,
                    m: space.devices,
                    t: c.t,
                    h: c.h,
                    r: c.r,
                    rate: Some(rate),
                    time: Some(time),
                    status: "ok".into(),
                }
            }
            Some(e) => {
                log::warn!("t={} h={} r={} failed: {e}", c.t, c.h, c.r);
                TuneRow {
                    n: cfg.spec.n,
                    m: space.devices,
                    t: c.t,
                    h: c.h,
                    r: c.r,
                    rate: None,
                    time: None,
                    status: format!("failed: {e}"),
                }
            }
        };
        rows.push(row);
    }
    let best = select_best(&rows);
    Ok(TuneResult {
        space: *space,
        rows,
        best,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupRow {
    pub m: usize,
    pub rate: f64,
    pub speedup: f64,
}

/// Speedup of each device count relative to `baseline`, scaled by
/// `normalization` (the baseline's own device count when a single device
/// cannot hold the problem, 1 otherwise).
pub fn speedup_table(
    rates: &[(usize, f64)],
    baseline: usize,
    normalization: f64,
) -> Result<Vec<SpeedupRow>> {
    let base_rate = rates
        .iter()
        .find(|(m, _)| *m == baseline)
        .map(|&(_, r)| r)
        .ok_or_else(|| Error::Config(format!("no rate for baseline device count {baseline}")))?;
    Ok(rates
        .iter()
        .map(|&(m, rate)| SpeedupRow {
            m,
            rate,
            speedup: rate / base_rate * normalization,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(t: usize, h: usize, rate: Option<f64>) -> TuneRow {
        TuneRow {
            n: 8,
            m: 1,
            t,
            h,
            r: 1,
            rate,
            time: rate.map(|r| 1.0 / r),
            status: if rate.is_some() {
                "ok".into()
            } else {
                "failed".into()
            },
        }
    }

    #[test]
    fn paper_thread_set() {
        let c = enumerate_candidates(&TuneSpace::new(60, 8));
        let ts: BTreeSet<usize> = c.iter().map(|c| c.t).collect();
        assert_eq!(
            ts.into_iter().collect::<Vec<_>>(),
            [1, 2, 3, 4, 5, 6, 10, 12, 15, 20, 30, 60]
        );
        let hs: Vec<usize> = c.iter().filter(|c| c.t == 6).map(|c| c.h).collect();
        assert!(c.iter().filter(|c| c.t == 6).all(|c| c.r == 80));
        for h in [1, 2, 4, 8] {
            assert!(hs.contains(&h));
        }
    }

    #[test]
    fn small_space() {
        let c = enumerate_candidates(&TuneSpace::new(4, 1));
        let t4: Vec<_> = c.iter().filter(|c| c.t == 4).collect();
        assert_eq!(t4, [&Candidate { t: 4, h: 1, r: 1 }]);
        assert_eq!(c.len(), 3 + 2 + 1);
    }

    #[test]
    fn candidate_set_is_sound_and_complete() {
        for cores in 1..=60 {
            for m in 1..=8 {
                for cap in [None, Some(m)] {
                    let space = TuneSpace {
                        cores,
                        devices: m,
                        h_cap: cap,
                    };
                    let got = enumerate_candidates(&space);
                    let mut want = Vec::new();
                    for t in 1..=cores {
                        for h in 1..=cores * m {
                            let ok_t = cores % t == 0;
                            let r = if ok_t { cores / t * m } else { 0 };
                            if ok_t && r % h == 0 && cap.is_none_or(|c| h <= c) {
                                want.push(Candidate { t, h, r });
                            }
                        }
                    }
                    assert_eq!(got, want, "c={cores} m={m} cap={cap:?}");
                }
            }
        }
    }

    #[test]
    fn selection_prefers_rate_then_small_t_then_small_h() {
        let rows = vec![
            row(1, 1, Some(2.0)),
            row(1, 2, Some(3.0)),
            row(2, 1, Some(3.0)),
            row(4, 1, None),
        ];
        assert_eq!(select_best(&rows), Some(1));
        let rows = vec![row(2, 2, Some(5.0)), row(2, 1, Some(5.0))];
        assert_eq!(select_best(&rows), Some(1));
        assert_eq!(select_best(&[row(1, 1, None)]), None);
    }

    #[test]
    fn speedups() {
        let s = speedup_table(&[(1, 28.1), (8, 202.3)], 1, 1.0).unwrap();
        assert!((s[1].speedup - 7.20).abs() < 0.01);
        let s = speedup_table(&[(2, 55.9), (8, 212.4)], 2, 2.0).unwrap();
        assert!((s[1].speedup - 7.60).abs() < 0.01);
        let s = speedup_table(&[(4, 10.0)], 4, 1.0).unwrap();
        assert_eq!(s[0].speedup, 1.0);
        assert!(speedup_table(&[(4, 10.0)], 1, 1.0).is_err());
    }

    #[test]
    fn calibrate_records_failures() {
        let mut base = RunConfig::new(4).unwrap();
        base.steps = 2;
        // r = 8 ranks cannot be cut into 8 x-blocks of a 4-cell grid
        let result = calibrate(&TuneSpace::new(8, 1), &base, 1).unwrap();
        assert!(result.rows.iter().any(|r| !r.ok()));
        let best = result.best_row().unwrap();
        assert!(result
            .rows
            .iter()
            .filter_map(|r| r.rate)
            .all(|r| r <= best.rate.unwrap()));
        let mut plot = Vec::new();
        result.write_plot_data(&mut plot).unwrap();
        assert!(String::from_utf8(plot)
            .unwrap()
            .starts_with("t,h1,h2,h4,h8\n"));
    }

    proptest! {
        #[test]
        fn selection_is_scale_invariant(
            rates in proptest::collection::vec(proptest::option::of(1u32..1000), 1..20),
            scale in 1u32..64,
        ) {
            let rows: Vec<TuneRow> = rates
                .iter()
                .enumerate()
                .map(|(k, r)| row(1 + k / 4, 1 + k % 4, r.map(f64::from)))
                .collect();
            let scaled: Vec<TuneRow> = rows
                .iter()
                .map(|r| TuneRow { rate: r.rate.map(|x| x * f64::from(scale)), ..r.clone() })
                .collect();
            prop_assert_eq!(select_best(&rows), select_best(&scaled));
        }
    }
}
