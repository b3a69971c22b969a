//! Brute-force two-particle solver: Crank-Nicolson on a square grid with the
//! contact interaction replaced by a narrow Gaussian, used as an external
//! check on the Bethe-Ansatz evolution.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolvedState, InitialState};

/// Relative residual at which the linear solve stops.
pub const SOLVER_TOL: f64 = 1e-13;
const SOLVER_MAX_ITER: usize = 1000;
/// Largest `|psi|` allowed on the walls at initialization.
pub const BOUNDARY_LEAK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// Half-width of the square `[-L, L]^2`.
    #[serde(rename = "L")]
    pub l: f64,
    pub n_x: usize,
    pub dt: f64,
    /// Width of the Gaussian replacing the delta function.
    pub w: f64,
    #[serde(default)]
    pub c: f64,
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.l.is_finite() && self.l > 0.0) {
            return Err(Error::Lattice(format!("L = {} must be > 0", self.l)));
        }
        if self.n_x < 5 {
            return Err(Error::Lattice(format!("n_x = {} too small", self.n_x)));
        }
        let h = self.h();
        if !(self.w.is_finite() && self.w >= 2.0 * h * (1.0 - 1e-12)) {
            return Err(Error::Lattice(format!(
                "mollifier width {} must be at least two cells (2h = {})",
                self.w,
                2.0 * h
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= h * h * (1.0 + 1e-12)) {
            return Err(Error::Lattice(format!(
                "dt = {} must lie in (0, h^2 = {}]",
                self.dt,
                h * h
            )));
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::Lattice(format!("c = {} must be >= 0", self.c)));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        2.0 * self.l / (self.n_x - 1) as f64
    }

    /// Interior points per axis; the walls carry `psi = 0`.
    pub fn m(&self) -> usize {
        self.n_x - 2
    }

    /// Coordinate of interior index `i`.
    pub fn x(&self, i: usize) -> f64 {
        -self.l + (i + 1) as f64 * self.h()
    }

    /// `2 c delta_w(d)` with a unit-mass Gaussian of standard deviation `w`.
    pub fn potential(&self, d: f64) -> f64 {
        2.0 * self.c * (-d * d / (2.0 * self.w * self.w)).exp() / (self.w * (2.0 * PI).sqrt())
    }
}

/// Interior field, row-major over `(x_1, x_2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub psi: Vec<Complex64>,
    pub t: f64,
}

/// Symmetrized packet product, normalized to one on the whole square.
pub fn init_from_packets(cfg: &LatticeConfig, state: &InitialState) -> Result<GridState> {
    cfg.validate()?;
    if state.n() != 2 {
        return Err(Error::Lattice(format!("the lattice solver is two-particle only, got N = {}", state.n())));
    }
    let [p1, p2] = [state.packets()[0], state.packets()[1]];
    let sym = |x1: f64, x2: f64| p1.value(x1) * p2.value(x2) + p1.value(x2) * p2.value(x1);
    let peak = state
        .packets()
        .iter()
        .map(|p| p.value(p.y0).norm())
        .fold(0.0, f64::max)
        .powi(2);
    let edge = (0..cfg.n_x)
        .flat_map(|i| {
            let x = -cfg.l + i as f64 * cfg.h();
            [sym(x, -cfg.l), sym(x, cfg.l), sym(-cfg.l, x), sym(cfg.l, x)]
        })
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    if edge > BOUNDARY_LEAK * peak {
        return Err(Error::Lattice(format!(
            "initial state reaches the walls: |psi| = {edge:e} against peak {peak:e}"
        )));
    }
    let m = cfg.m();
    let mut psi: Vec<Complex64> = (0..m * m)
        .map(|k| sym(cfg.x(k / m), cfg.x(k % m)))
        .collect();
    let nrm = norm(cfg, &psi).sqrt();
    psi.iter_mut().for_each(|v| *v /= nrm);
    Ok(GridState { psi, t: 0.0 })
}

/// `h^2 sum |psi|^2`.
pub fn norm(cfg: &LatticeConfig, psi: &[Complex64]) -> f64 {
    let h = cfg.h();
    psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * h * h
}

/// `max |psi(i, j) - psi(j, i)|`.
pub fn symmetry_residual(cfg: &LatticeConfig, psi: &[Complex64]) -> f64 {
    let m = cfg.m();
    (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .map(|(i, j)| (psi[i * m + j] - psi[j * m + i]).norm())
        .fold(0.0, f64::max)
}

/// Crank-Nicolson propagator with a fixed step.
pub struct Stepper {
    m: usize,
    inv_h2: f64,
    v: Vec<f64>,
}

impl Stepper {
    pub fn new(cfg: &LatticeConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.m();
        let v = (0..m * m)
            .map(|k| cfg.potential(cfg.x(k / m) - cfg.x(k % m)))
            .collect();
        Ok(Stepper {
            m,
            inv_h2: 1.0 / (cfg.h() * cfg.h()),
            v,
        })
    }

    /// `out = psi + s (H psi)` with `H = -Laplacian_5pt + V`.
    fn apply(&self, s: Complex64, psi: &[Complex64], out: &mut [Complex64]) {
        let m = self.m;
        let ih2 = self.inv_h2;
        let zero = Complex64::new(0.0, 0.0);
        out.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let base = i * m;
            for j in 0..m {
                let c = psi[base + j];
                let up = if i > 0 { psi[base - m + j] } else { zero };
                let dn = if i + 1 < m { psi[base + m + j] } else { zero };
                let lf = if j > 0 { psi[base + j - 1] } else { zero };
                let rt = if j + 1 < m { psi[base + j + 1] } else { zero };
                let h_psi = (4.0 * c - up - dn - lf - rt) * ih2 + self.v[base + j] * c;
                row[j] = c + s * h_psi;
            }
        });
    }

    /// One step of length `dt`; returns the solver iteration count.
    pub fn step(&self, state: &mut GridState, dt: f64) -> Result<usize> {
        let n = self.m * self.m;
        let s = Complex64::new(0.0, 0.5 * dt);
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        self.apply(-s, &state.psi, &mut rhs);
        let diag: Vec<Complex64> = self
            .v
            .iter()
            .map(|&v| (Complex64::new(1.0, 0.0) + s * (4.0 * self.inv_h2 + v)).inv())
            .collect();
        let iters = self.cocg(s, &rhs, &mut state.psi, &diag)?;
        state.t += dt;
        Ok(iters)
    }

    /// Jacobi-preconditioned conjugate orthogonal CG for the complex
    /// symmetric system `(I + s H) x = b`, warm-started from `x`.
    fn cocg(&self, s: Complex64, b: &[Complex64], x: &mut [Complex64], diag: &[Complex64]) -> Result<usize> {
        let n = b.len();
        let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
            a.par_iter().zip(b).map(|(x, y)| x * y).sum()
        };
        let nrm = |a: &[Complex64]| -> f64 { a.par_iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() };
        let b_norm = nrm(b);
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            return Ok(0);
        }
        let mut q = vec![Complex64::new(0.0, 0.0); n];
        self.apply(s, x, &mut q);
        let mut r: Vec<Complex64> = b.iter().zip(&q).map(|(b, q)| b - q).collect();
        let mut z: Vec<Complex64> = r.iter().zip(diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rho = dot(&r, &z);
        for it in 0..SOLVER_MAX_ITER {
            if nrm(&r) <= SOLVER_TOL * b_norm {
                return Ok(it);
            }
            self.apply(s, &p, &mut q);
            let pq = dot(&p, &q);
            if pq.norm() == 0.0 {
                break;
            }
            let alpha = rho / pq;
            x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.par_iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
            z.par_iter_mut()
                .zip(&r)
                .zip(diag)
                .for_each(|((z, r), d)| *z = r * d);
            let rho_new = dot(&r, &z);
            let beta = rho_new / rho;
            rho = rho_new;
            p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        if nrm(&r) <= SOLVER_TOL * b_norm {
            return Ok(SOLVER_MAX_ITER);
        }
        Err(Error::SolverDivergence(format!(
            "did not reach {SOLVER_TOL:e} in {SOLVER_MAX_ITER} iterations"
        )))
    }
}

/// Summary of a run to a target time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub dt: f64,
    pub max_step_norm_drift: f64,
    pub norm_drift: f64,
    pub max_symmetry_residual: f64,
    pub max_iterations: usize,
}

/// Advances to `t_final` in `ceil(t_final / cfg.dt)` equal steps.
pub fn run(cfg: &LatticeConfig, state: &mut GridState, t_final: f64) -> Result<RunStats> {
    let stepper = Stepper::new(cfg)?;
    let span = t_final - state.t;
    if span < 0.0 {
        return Err(Error::Lattice("cannot run backwards".into()));
    }
    let steps = (span / cfg.dt * (1.0 - 1e-12)).ceil() as usize;
    let dt = if steps > 0 { span / steps as f64 } else { 0.0 };
    let n0 = norm(cfg, &state.psi);
    let mut prev = n0;
    let mut stats = RunStats {
        steps,
        dt,
        max_step_norm_drift: 0.0,
        norm_drift: 0.0,
        max_symmetry_residual: symmetry_residual(cfg, &state.psi),
        max_iterations: 0,
    };
    for _ in 0..steps {
        let it = stepper.step(state, dt)?;
        let nn = norm(cfg, &state.psi);
        stats.max_step_norm_drift = stats.max_step_norm_drift.max((nn - prev).abs());
        stats.max_symmetry_residual = stats.max_symmetry_residual.max(symmetry_residual(cfg, &state.psi));
        stats.max_iterations = stats.max_iterations.max(it);
        prev = nn;
    }
    stats.norm_drift = (prev - n0).abs();
    state.t = t_final;
    Ok(stats)
}

/// Exact free evolution of the symmetrized packet product on the interior
/// nodes, with the normalization of [`init_from_packets`].
pub fn free_reference(cfg: &LatticeConfig, state: &InitialState, t: f64) -> Result<Vec<Complex64>> {
    let init = init_from_packets(cfg, state)?;
    let [p1, p2] = [state.packets()[0], state.packets()[1]];
    let m = cfg.m();
    let raw0 = |k: usize| {
        let (x1, x2) = (cfg.x(k / m), cfg.x(k % m));
        p1.value(x1) * p2.value(x2) + p1.value(x2) * p2.value(x1)
    };
    let scale = init.psi[m * m / 2] / raw0(m * m / 2);
    let tau = Complex64::new(t, 0.0);
    Ok((0..m * m)
        .map(|k| {
            let (x1, x2) = (cfg.x(k / m), cfg.x(k % m));
            scale
                * (p1.free_evolved(x1, tau) * p2.free_evolved(x2, tau)
                    + p1.free_evolved(x2, tau) * p2.free_evolved(x1, tau))
        })
        .collect())
}

/// Relative `L^2` distance between two interior fields over the ordered half
/// (`x_1 <= x_2`, diagonal weighted by 1/2).
pub fn relative_l2_ordered(cfg: &LatticeConfig, a: &[Complex64], reference: &[Complex64]) -> f64 {
    let m = cfg.m();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        for j in i..m {
            let w = if i == j { 0.5 } else { 1.0 };
            let k = i * m + j;
            num += w * (a[k] - reference[k]).norm_sqr();
            den += w * reference[k].norm_sqr();
        }
    }
    (num / den).sqrt()
}

/// `|| sqrt(2) psi_lattice - Psi ||_2 / || Psi ||_2` over the ordered half.
///
/// The lattice field has unit norm on the whole square while the Bethe-Ansatz
/// state has unit norm on the ordered sector, hence the `sqrt 2`. The evolved
/// state must live on the lattice nodes (`[-L, L]` with `n_x` points).
pub fn compare_to_bethe(cfg: &LatticeConfig, lattice: &GridState, evolved: &EvolvedState) -> Result<f64> {
    let xg = evolved.xgrid;
    let tol = 1e-9 * cfg.l;
    if evolved.n != 2
        || xg.points != cfg.n_x
        || (xg.min + cfg.l).abs() > tol
        || (xg.max - cfg.l).abs() > tol
    {
        return Err(Error::GridMismatch(format!(
            "evolved state on [{}, {}] x {} (N = {}) does not match lattice [-{L}, {L}] x {}",
            xg.min,
            xg.max,
            xg.points,
            evolved.n,
            cfg.n_x,
            L = cfg.l
        )));
    }
    if (lattice.t - evolved.t).abs() > 1e-12 * evolved.t.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "lattice at t = {} but evolved state at t = {}",
            lattice.t, evolved.t
        )));
    }
    let m = cfg.m();
    let scaled: Vec<Complex64> = lattice.psi.iter().map(|v| v * 2f64.sqrt()).collect();
    let bethe: Vec<Complex64> = (0..m * m)
        .map(|k| evolved.at(&[k / m + 1, k % m + 1]))
        .collect();
    Ok(relative_l2_ordered(cfg, &scaled, &bethe))
}

/// Estimate of `(d_2 - d_1) psi / psi` on the ordered side of the diagonal:
/// the normal derivative is sampled at distances `r = 3w, 4w, 5w` from the
/// diagonal (past the bulk of the mollifier), extrapolated quadratically to `r = 0`,
/// and averaged over the diagonal with weight `|psi|^2`.
pub fn cusp_ratio(cfg: &LatticeConfig, psi: &[Complex64]) -> Result<f64> {
    let m = cfg.m();
    let h = cfg.h();
    // point (i - s, i + s) sits at r = x_2 - x_1 = 2 s h
    let offsets: Vec<usize> = [3.0, 4.0, 5.0]
        .iter()
        .map(|f| ((f * cfg.w) / (2.0 * h)).round().max(1.0) as usize)
        .collect();
    if offsets[0] == offsets[1] || offsets[1] == offsets[2] {
        return Err(Error::Lattice("mollifier too narrow for the cusp stencil".into()));
    }
    let smax = offsets[2] + 1;
    let rs: Vec<f64> = offsets.iter().map(|&s| 2.0 * s as f64 * h).collect();
    let at = |i: usize, j: usize| psi[i * m + j];
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for i in smax..m.saturating_sub(smax) {
        let d: Vec<Complex64> = offsets
            .iter()
            .map(|&s| (at(i - s - 1, i + s + 1) - at(i - s + 1, i + s - 1)) / (2.0 * h))
            .collect();
        // Lagrange extrapolation to r = 0
        let mut d0 = Complex64::new(0.0, 0.0);
        for a in 0..3 {
            let mut l = 1.0;
            for b in 0..3 {
                if a != b {
                    l *= (0.0 - rs[b]) / (rs[a] - rs[b]);
                }
            }
            d0 += l * d[a];
        }
        let p = at(i, i);
        num += p.conj() * d0;
        den += p.norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::Lattice("field vanishes on the diagonal".into()));
    }
    Ok(num.re / den)
}
