//! Single-rank straight-loop solver over the whole periodic grid.
//!
//! No ghost frames, no workers, no decomposition: neighbours are found through
//! precomputed periodic index tables. Every parallel configuration must
//! reproduce its final fields bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernel::{InitialCondition, TimeCoeffs, Var};

/// Conserved integrals sampled at one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservationSample {
    pub step: usize,
    pub mass: f64,
    pub energy: f64,
    pub enstrophy: f64,
}

/// Global `n × n` arrays, row-major with x fastest: `a[j * n + i]`.
#[derive(Debug, Clone)]
pub struct ReferenceSolver {
    pub spec: GridSpec,
    pub pold: Vec<f64>,
    pub uold: Vec<f64>,
    pub vold: Vec<f64>,
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub pnew: Vec<f64>,
    pub unew: Vec<f64>,
    pub vnew: Vec<f64>,
    pub cu: Vec<f64>,
    pub cv: Vec<f64>,
    pub z: Vec<f64>,
    pub h: Vec<f64>,
    ip: Vec<usize>,
    im: Vec<usize>,
}

impl ReferenceSolver {
    pub fn new(spec: GridSpec, ic: InitialCondition) -> Self {
        let n = spec.n;
        let sample = |var| {
            let mut a = vec![0.0; n * n];
            for j in 0..n {
                for i in 0..n {
                    a[j * n + i] = ic.value(var, &spec, i, j);
                }
            }
            a
        };
        let (p, u, v) = (sample(Var::P), sample(Var::U), sample(Var::V));
        Self::from_arrays(spec, p, u, v)
    }

    /// Starts from arbitrary current-level arrays; the old level is a copy.
    pub fn from_arrays(spec: GridSpec, p: Vec<f64>, u: Vec<f64>, v: Vec<f64>) -> Self {
        let n = spec.n;
        assert!(p.len() == n * n && u.len() == n * n && v.len() == n * n);
        let zeros = vec![0.0; n * n];
        ReferenceSolver {
            spec,
            pold: p.clone(),
            uold: u.clone(),
            vold: v.clone(),
            pnew: p.clone(),
            unew: u.clone(),
            vnew: v.clone(),
            p,
            u,
            v,
            cu: zeros.clone(),
            cv: zeros.clone(),
            z: zeros.clone(),
            h: zeros,
            ip: (0..n).map(|i| (i + 1) % n).collect(),
            im: (0..n).map(|i| (i + n - 1) % n).collect(),
        }
    }

    pub fn diagnostics(&mut self, step: usize) -> Result<()> {
        let n = self.spec.n;
        let fsdx = 4.0 / self.spec.dx;
        let fsdy = 4.0 / self.spec.dy;
        let (p, u, v) = (&self.p, &self.u, &self.v);
        for j in 0..n {
            let (jm, jp) = (self.im[j], self.ip[j]);
            for i in 0..n {
                let (im, ip) = (self.im[i], self.ip[i]);
                let c = j * n + i;
                self.cu[c] = 0.5 * (p[c] + p[j * n + im]) * u[c];
                self.cv[c] = 0.5 * (p[c] + p[jm * n + i]) * v[c];
                let den = p[jm * n + im] + p[jm * n + i] + p[c] + p[j * n + im];
                // also rejects NaN
                #[allow(clippy::neg_cmp_op_on_partial_ord)]
                if !(den > 0.0) {
                    return Err(Error::Blowup {
                        step,
                        i,
                        j,
                        what: "non-positive pressure in vorticity denominator",
                    });
                }
                self.z[c] = (fsdx * (v[c] - v[j * n + im]) - fsdy * (u[c] - u[jm * n + i])) / den;
                self.h[c] = p[c]
                    + 0.25
                        * (u[j * n + ip] * u[j * n + ip]
                            + u[c] * u[c]
                            + v[jp * n + i] * v[jp * n + i]
                            + v[c] * v[c]);
            }
        }
        Ok(())
    }

    pub fn advance(&mut self, coeffs: &TimeCoeffs, step: usize) -> Result<()> {
        let n = self.spec.n;
        let (tdts8, tdtsdx, tdtsdy) = (coeffs.tdts8, coeffs.tdtsdx, coeffs.tdtsdy);
        let (cu, cv, z, h) = (&self.cu, &self.cv, &self.z, &self.h);
        for j in 0..n {
            let (jm, jp) = (self.im[j], self.ip[j]);
            for i in 0..n {
                let (im, ip) = (self.im[i], self.ip[i]);
                let c = j * n + i;
                self.unew[c] = self.uold[c]
                    + tdts8
                        * (z[jp * n + i] + z[c])
                        * (cv[jp * n + i] + cv[jp * n + im] + cv[j * n + im] + cv[c])
                    - tdtsdx * (h[c] - h[j * n + im]);
                self.vnew[c] = self.vold[c]
                    - tdts8
                        * (z[j * n + ip] + z[c])
                        * (cu[j * n + ip] + cu[c] + cu[jm * n + i] + cu[jm * n + ip])
                    - tdtsdy * (h[c] - h[jm * n + i]);
                self.pnew[c] = self.pold[c]
                    - tdtsdx * (cu[j * n + ip] - cu[c])
                    - tdtsdy * (cv[jp * n + i] - cv[c]);
                if !(self.unew[c].is_finite()
                    && self.vnew[c].is_finite()
                    && self.pnew[c].is_finite())
                {
                    return Err(Error::Blowup {
                        step,
                        i,
                        j,
                        what: "non-finite value in new time level",
                    });
                }
            }
        }
        Ok(())
    }

    pub fn filter(&mut self, first_step: bool) {
        let alpha = self.spec.alpha;
        if first_step {
            self.pold.copy_from_slice(&self.p);
            self.uold.copy_from_slice(&self.u);
            self.vold.copy_from_slice(&self.v);
        } else {
            for c in 0..self.p.len() {
                self.pold[c] = self.p[c] + alpha * (self.pnew[c] - 2.0 * self.p[c] + self.pold[c]);
                self.uold[c] = self.u[c] + alpha * (self.unew[c] - 2.0 * self.u[c] + self.uold[c]);
                self.vold[c] = self.v[c] + alpha * (self.vnew[c] - 2.0 * self.v[c] + self.vold[c]);
            }
        }
        self.p.copy_from_slice(&self.pnew);
        self.u.copy_from_slice(&self.unew);
        self.v.copy_from_slice(&self.vnew);
    }

    pub fn step(&mut self, step: usize) -> Result<()> {
        self.diagnostics(step)?;
        self.advance(&TimeCoeffs::for_step(&self.spec, step), step)?;
        self.filter(step == 0);
        Ok(())
    }

    /// Integrals of the current level. Requires `diagnostics` to have run on it.
    pub fn conservation(&self, step: usize) -> ConservationSample {
        let n = self.spec.n;
        let area = self.spec.dx * self.spec.dy;
        let (mut mass, mut energy, mut enstrophy) = (0.0, 0.0, 0.0);
        for j in 0..n {
            let jm = self.im[j];
            for i in 0..n {
                let im = self.im[i];
                let c = j * n + i;
                let p = self.p[c];
                mass += p;
                let ke2 = 2.0 * (self.h[c] - p);
                energy += 0.5 * p * ke2 + 0.5 * p * p;
                let pbar =
                    0.25 * (self.p[jm * n + im] + self.p[jm * n + i] + p + self.p[j * n + im]);
                enstrophy += 0.5 * self.z[c] * self.z[c] * pbar;
            }
        }
        ConservationSample {
            step,
            mass: mass * area,
            energy: energy * area,
            enstrophy: enstrophy * area,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceResult {
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub conservation: Vec<ConservationSample>,
}

/// Runs `steps` time steps, sampling the conserved integrals every `cadence`
/// steps and after the final step.
pub fn reference_run_with(
    spec: &GridSpec,
    steps: usize,
    ic: InitialCondition,
    cadence: usize,
) -> Result<ReferenceResult> {
    let mut solver = ReferenceSolver::new(*spec, ic);
    let mut conservation = Vec::new();
    for step in 0..steps {
        solver.diagnostics(step)?;
        if cadence > 0 && step % cadence == 0 {
            conservation.push(solver.conservation(step));
        }
        solver.advance(&TimeCoeffs::for_step(spec, step), step)?;
        solver.filter(step == 0);
    }
    solver.diagnostics(steps)?;
    conservation.push(solver.conservation(steps));
    Ok(ReferenceResult {
        p: solver.p,
        u: solver.u,
        v: solver.v,
        conservation,
    })
}

pub fn reference_run(spec: &GridSpec, steps: usize) -> Result<ReferenceResult> {
    reference_run_with(spec, steps, InitialCondition::Vortex, 10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_state_fixed_point() {
        let spec = GridSpec::new(8).unwrap();
        let ic = InitialCondition::Rest { pressure: 50_000.0 };
        let r = reference_run_with(&spec, 20, ic, 5).unwrap();
        assert!(r.p.iter().all(|&x| x == 50_000.0));
        assert!(r.u.iter().chain(&r.v).all(|&x| x == 0.0));
        let m0 = r.conservation[0].mass;
        assert!(r.conservation.iter().all(|s| s.mass == m0));
    }

    #[test]
    fn mass_drift_n16() {
        let spec = GridSpec::new(16).unwrap();
        let r = reference_run_with(&spec, 100, InitialCondition::Vortex, 1).unwrap();
        let m0 = r.conservation[0].mass;
        for w in r.conservation.windows(2) {
            let per_step = (w[1].mass - w[0].mass).abs() / m0 / (w[1].step - w[0].step) as f64;
            assert!(per_step <= 1e-13, "step {}: {per_step:e}", w[1].step);
        }
    }

    #[test]
    fn samples_at_cadence_and_end() {
        let spec = GridSpec::new(8).unwrap();
        let r = reference_run_with(&spec, 25, InitialCondition::Vortex, 10).unwrap();
        let steps: Vec<_> = r.conservation.iter().map(|s| s.step).collect();
        assert_eq!(steps, vec![0, 10, 20, 25]);
    }
}
