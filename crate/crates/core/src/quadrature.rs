//! Truncated uniform momentum grids and tensor-product trapezoid sums.
//!
//! Every weight carries the `1/(2 pi)` of the `dk/(2 pi)` measure, so a sum
//! over a grid approximates `int f(k) dk / (2 pi)` directly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_NODE_CEILING: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub k_max: f64,
    pub n_k: usize,
}

impl QuadratureGrid {
    /// Explicit grid; `n_k` must be odd and at least 3.
    pub fn new(k_max: f64, n_k: usize) -> Result<Self> {
        if !(k_max.is_finite() && k_max > 0.0) {
            return Err(Error::InvalidBudget(format!("k_max = {k_max}")));
        }
        if n_k < 3 || n_k % 2 == 0 {
            return Err(Error::InvalidBudget(format!("n_k = {n_k} must be odd and >= 3")));
        }
        Ok(QuadratureGrid { k_max, n_k })
    }

    pub fn dk(&self) -> f64 {
        2.0 * self.k_max / (self.n_k - 1) as f64
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        // symmetric form keeps k = 0 exact at the middle node
        let mid = (self.n_k / 2) as f64;
        (j as f64 - mid) * self.dk()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_k).map(|j| self.node(j)).collect()
    }

    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        let w = self.dk() / (2.0 * PI);
        if j == 0 || j + 1 == self.n_k {
            0.5 * w
        } else {
            w
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n_k).map(|j| self.weight(j)).collect()
    }
}

/// Damping and extent information that fixes a grid.
///
/// `eta_eff` is the coefficient of the Gaussian damping `exp(-eta_eff k^2)`,
/// `l_max` the largest displacement the integral must resolve, and
/// `t_scale` the modulus of the complex time in `exp(-(eta + it) k^2)`,
/// which sets how far the kernel drifts in position space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingBudget {
    pub eta_eff: f64,
    pub l_max: f64,
    pub eps: f64,
    pub t_scale: f64,
}

impl DampingBudget {
    pub fn new(eta_eff: f64, l_max: f64, eps: f64) -> Self {
        DampingBudget {
            eta_eff,
            l_max,
            eps,
            t_scale: 0.0,
        }
    }

    pub fn with_t_scale(mut self, t_scale: f64) -> Self {
        self.t_scale = t_scale;
        self
    }

    /// Truncation radius at which the Gaussian tail drops to `eps`.
    pub fn k_max(&self) -> f64 {
        ((1.0 / self.eps).ln() / self.eta_eff).sqrt()
    }

    fn validate(&self) -> Result<()> {
        if !(self.eta_eff.is_finite() && self.eta_eff > 0.0) {
            return Err(Error::InvalidBudget(format!(
                "eta_eff = {} must be positive",
                self.eta_eff
            )));
        }
        if !(self.eps > 0.0 && self.eps <= 1e-2) {
            return Err(Error::InvalidBudget(format!(
                "eps = {} must lie in (0, 1e-2]",
                self.eps
            )));
        }
        if !(self.l_max.is_finite() && self.l_max >= 0.0) {
            return Err(Error::InvalidBudget(format!("l_max = {}", self.l_max)));
        }
        if !(self.t_scale.is_finite() && self.t_scale >= 0.0) {
            return Err(Error::InvalidBudget(format!("t_scale = {}", self.t_scale)));
        }
        Ok(())
    }
}

pub fn build_grid(budget: &DampingBudget) -> Result<QuadratureGrid> {
    build_grid_with_ceiling(budget, DEFAULT_NODE_CEILING)
}

/// Grid whose truncation tail is below `eps` and whose period in position
/// space, `2 pi / dk`, covers `l_max` plus the kernel extent
/// `2 k_max t_scale`, so every alias image lies beyond the decayed tail.
pub fn build_grid_with_ceiling(budget: &DampingBudget, ceiling: usize) -> Result<QuadratureGrid> {
    budget.validate()?;
    let k_max = budget.k_max();
    let extent = budget.l_max + 2.0 * k_max * budget.t_scale;
    let intervals = if extent > 0.0 {
        (2.0 * k_max * extent / (2.0 * PI)).ceil() as usize
    } else {
        2
    };
    let mut n_k = intervals.max(2) + 1;
    if n_k % 2 == 0 {
        n_k += 1;
    }
    if n_k > ceiling {
        return Err(Error::InfeasibleGrid {
            needed: n_k,
            ceiling,
        });
    }
    QuadratureGrid::new(k_max, n_k)
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

#[inline]
fn neumaier(sum: &mut f64, comp: &mut f64, x: f64) {
    let t = *sum + x;
    if sum.abs() >= x.abs() {
        *comp += (*sum - t) + x;
    } else {
        *comp += (x - t) + *sum;
    }
    *sum = t;
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        neumaier(&mut self.re, &mut self.re_c, z.re);
        neumaier(&mut self.im, &mut self.im_c, z.im);
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(Complex64::new(other.re, other.im));
        self.add(Complex64::new(other.re_c, other.im_c));
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

impl FromIterator<Complex64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for z in iter {
            s.add(z);
        }
        s
    }
}

/// Tensor trapezoid sum of `f` over `n` copies of `grid`.
pub fn integrate_nd<F>(f: F, grid: &QuadratureGrid, n: usize) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    integrate_nd_shifted(f, grid, &vec![0.0; n])
}

/// As [`integrate_nd`], with dimension `m` using nodes `k_j + offsets[m]`.
///
/// Traversal is row-major (last index fastest). The first index is
/// partitioned across workers and partial sums are merged in index order, so
/// the result does not depend on the thread count.
pub fn integrate_nd_shifted<F>(f: F, grid: &QuadratureGrid, offsets: &[f64]) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let n = offsets.len();
    if n == 0 {
        return Err(Error::InvalidBudget("dimension must be at least 1".into()));
    }
    let nk = grid.n_k;
    let nodes = grid.nodes();
    let weights = grid.weights();

    let partials: Vec<Result<CompensatedSum>> = (0..nk)
        .into_par_iter()
        .map(|j0| {
            let mut idx = vec![0usize; n];
            idx[0] = j0;
            let mut k = vec![0.0; n];
            let mut acc = CompensatedSum::new();
            loop {
                let mut w = 1.0;
                for m in 0..n {
                    k[m] = nodes[idx[m]] + offsets[m];
                    w *= weights[idx[m]];
                }
                let v = f(&k);
                if !(v.re.is_finite() && v.im.is_finite()) {
                    return Err(Error::NonFinite { node: idx.clone() });
                }
                acc.add(v * w);
                // odometer over dims 1..n, last fastest
                let mut m = n;
                loop {
                    if m == 1 {
                        return Ok(acc);
                    }
                    m -= 1;
                    idx[m] += 1;
                    if idx[m] < nk {
                        break;
                    }
                    idx[m] = 0;
                }
            }
        })
        .collect();

    let mut total = CompensatedSum::new();
    for p in partials {
        total.merge(&p?);
    }
    Ok(total.value())
}
