//! Gaussian initial states, their evolution under the Bethe-Ansatz propagator,
//! and simple observables on the ordered sector.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::bethe::ScatteringContext;
use crate::error::{Error, Result};
use crate::propagator::{GreenOptions, HARD_MAX_PARTICLES};
use crate::quadrature::{build_grid, DampingBudget, QuadratureGrid};
use crate::spectral::{
    mode_product, point_terms, pole_extent, tensor_field, tensor_field_dense, PermutationKernel,
};

/// Gap-to-width ratio below which the simplex truncation is no longer negligible.
pub const SEPARATION_RATIO: f64 = 8.0;

/// `phi_a(x; y0, p) = (2 pi)^(-1/4) a^(-1/2) exp(-(x - y0)^2 / (4 a^2)) exp(i p x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPacket {
    pub a: f64,
    pub y0: f64,
    pub p: f64,
}

impl GaussianPacket {
    pub fn new(a: f64, y0: f64, p: f64) -> Result<Self> {
        let g = GaussianPacket { a, y0, p };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::InvalidState(format!("packet width a = {} must be > 0", self.a)));
        }
        if !(self.y0.is_finite() && self.p.is_finite()) {
            return Err(Error::InvalidState("non-finite packet parameter".into()));
        }
        Ok(())
    }

    fn norm_const(&self) -> f64 {
        (2.0 * PI).powf(-0.25) / self.a.sqrt()
    }

    pub fn value(&self, x: f64) -> Complex64 {
        let d = x - self.y0;
        let env = self.norm_const() * (-d * d / (4.0 * self.a * self.a)).exp();
        Complex64::from_polar(env, self.p * x)
    }

    /// `int exp(-i k y) phi(y) dy`.
    pub fn fourier(&self, k: f64) -> Complex64 {
        let q = k - self.p;
        let amp = (2.0 * PI).powf(-0.25) * 2.0 * PI.sqrt() * self.a.sqrt() * (-self.a * self.a * q * q).exp();
        Complex64::from_polar(amp, -q * self.y0)
    }

    /// Exact free evolution `exp(-i tau d^2/dx^2 ...)`, i.e.
    /// `int dk/(2 pi) fourier(k) exp(i k x - i tau k^2)`, for `Im tau <= 0`.
    pub fn free_evolved(&self, x: f64, tau: Complex64) -> Complex64 {
        let alpha = Complex64::new(self.a * self.a, 0.0) + Complex64::i() * tau;
        let beta = x - self.y0 - 2.0 * tau * self.p;
        let pref = (2.0 * PI).powf(-0.25) * 2.0 * PI.sqrt() * self.a.sqrt() / (2.0 * PI);
        let expo = Complex64::new(0.0, self.p * x) - Complex64::i() * tau * (self.p * self.p)
            - beta * beta / (4.0 * alpha);
        pref * (PI / alpha).sqrt() * expo.exp()
    }
}

/// Product of separated packets with strictly increasing centres and a
/// common width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    packets: Vec<GaussianPacket>,
}

impl InitialState {
    pub fn new(packets: Vec<GaussianPacket>) -> Result<Self> {
        if packets.is_empty() {
            return Err(Error::InvalidState("no packets".into()));
        }
        for p in &packets {
            p.validate()?;
        }
        let a = packets[0].a;
        if packets.iter().any(|p| p.a != a) {
            return Err(Error::InvalidState("packets must share one width".into()));
        }
        for w in packets.windows(2) {
            if w[1].y0 <= w[0].y0 {
                return Err(Error::InvalidState(format!(
                    "centres must be strictly increasing, got {} then {}",
                    w[0].y0, w[1].y0
                )));
            }
        }
        Ok(InitialState { packets })
    }

    pub fn n(&self) -> usize {
        self.packets.len()
    }

    pub fn packets(&self) -> &[GaussianPacket] {
        &self.packets
    }

    pub fn width(&self) -> f64 {
        self.packets[0].a
    }

    pub fn min_gap(&self) -> f64 {
        self.packets
            .windows(2)
            .map(|w| w[1].y0 - w[0].y0)
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_j (y0_{j+1} - y0_j) / a`; infinite for one packet.
    pub fn min_gap_ratio(&self) -> f64 {
        self.min_gap() / self.width()
    }

    pub fn is_well_separated(&self) -> bool {
        self.min_gap_ratio() >= SEPARATION_RATIO
    }

    /// Bound on the amplitude lost by replacing the ordered-sector integral
    /// over sources with the full line: `N^2 erfc(gap / (2 sqrt 2 a))`.
    pub fn truncation_bound(&self) -> f64 {
        let n = self.n() as f64;
        if self.n() < 2 {
            return 0.0;
        }
        n * n * erfc(self.min_gap() / (2.0 * 2f64.sqrt() * self.width()))
    }

    /// Neglected packet overlap `exp(-gap^2 / (8 a^2))`.
    pub fn overlap_bound(&self) -> f64 {
        if self.n() < 2 {
            return 0.0;
        }
        let r = self.min_gap_ratio();
        (-r * r / 8.0).exp()
    }

    /// `prod_j phi_j(x_j)`.
    pub fn product_value(&self, x: &[f64]) -> Complex64 {
        self.packets
            .iter()
            .zip(x)
            .map(|(p, &xi)| p.value(xi))
            .product()
    }

    /// `sum_sigma prod_j phi_j(x_{sigma(j)})` with unit normalization constant.
    pub fn psi_free(&self, x: &[f64]) -> Complex64 {
        crate::bethe::permutations(self.n())
            .map(|s| {
                self.packets
                    .iter()
                    .enumerate()
                    .map(|(j, p)| p.value(x[s.at(j + 1) - 1]))
                    .product::<Complex64>()
            })
            .sum()
    }
}

/// Uniform axis used for every coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl XGrid {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        let g = XGrid { min, max, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.max > self.min) {
            return Err(Error::InvalidQuery(format!("x-grid [{}, {}] is empty", self.min, self.max)));
        }
        if self.points < 2 {
            return Err(Error::InvalidQuery("x-grid needs at least 2 points".into()));
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        (self.max - self.min) / (self.points - 1) as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.points).map(|i| self.min + i as f64 * h).collect()
    }
}

/// Wave function on `axis^N` after evolution. Only ordered index tuples
/// (`i_1 <= ... <= i_N`) are physical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolvedState {
    pub n: usize,
    pub t: f64,
    pub eta: f64,
    pub c: f64,
    pub xgrid: XGrid,
    pub grid: QuadratureGrid,
    pub truncation_bound: f64,
    /// Row-major over `(x_1..x_N)`, `points^N` entries.
    pub values: Vec<Complex64>,
}

impl EvolvedState {
    pub fn at(&self, idx: &[usize]) -> Complex64 {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        let flat = sorted.iter().fold(0, |acc, &i| acc * self.xgrid.points + i);
        self.values[flat]
    }

    /// Ordered index tuples with their coordinates and values.
    pub fn ordered_samples(&self) -> Vec<(Vec<usize>, Vec<f64>, Complex64)> {
        let axis = self.xgrid.axis();
        ordered_indices(self.n, self.xgrid.points)
            .into_iter()
            .map(|idx| {
                let x = idx.iter().map(|&i| axis[i]).collect();
                let v = self.at(&idx);
                (idx, x, v)
            })
            .collect()
    }
}

/// All non-decreasing index tuples in lexicographic order.
pub fn ordered_indices(n: usize, points: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        out.push(idx.clone());
        // advance the rightmost position that can grow, reset the tail to it
        let mut m = n;
        loop {
            if m == 0 {
                return out;
            }
            m -= 1;
            if idx[m] + 1 < points {
                idx[m] += 1;
                let v = idx[m];
                for r in idx.iter_mut().skip(m + 1) {
                    *r = v;
                }
                break;
            }
        }
    }
}

/// `1 / prod_g s_g!` over groups of equal indices.
fn tie_weight(idx: &[usize]) -> f64 {
    let mut w = 1.0;
    let mut run = 1;
    for i in 1..=idx.len() {
        if i < idx.len() && idx[i] == idx[i - 1] {
            run += 1;
            w /= run as f64;
        } else {
            run = 1;
        }
    }
    w
}

/// Momentum grid for the packet evolution at time `t` and regulator `eta`,
/// targets in `[x_lo, x_hi]`.
///
/// The packet transform damps with `a^2 + eta` around `p`; the spread of the
/// evolved packet, its distance to the targets and the pole tail of `S` set
/// the spacing.
pub fn spectral_grid(
    state: &InitialState,
    x_lo: f64,
    x_hi: f64,
    t: f64,
    eta: f64,
    c: f64,
    eps: f64,
) -> Result<QuadratureGrid> {
    spectral_grid_with_ceiling(state, x_lo, x_hi, t, eta, c, eps, crate::quadrature::DEFAULT_NODE_CEILING)
}

#[allow(clippy::too_many_arguments)]
pub fn spectral_grid_with_ceiling(
    state: &InitialState,
    x_lo: f64,
    x_hi: f64,
    t: f64,
    eta: f64,
    c: f64,
    eps: f64,
    ceiling: usize,
) -> Result<QuadratureGrid> {
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::InvalidBudget(format!("eps = {eps} outside (0, 1e-2]")));
    }
    if !(t.is_finite() && t >= 0.0 && eta.is_finite() && eta >= 0.0) {
        return Err(Error::InvalidQuery(format!("need t >= 0 and eta >= 0, got t={t}, eta={eta}")));
    }
    let ln = (1.0 / eps).ln();
    let a2 = state.width().powi(2) + eta;
    let p_max = state.packets().iter().map(|p| p.p.abs()).fold(0.0, f64::max);
    let k_max = p_max + (ln / a2).sqrt();
    let alpha = Complex64::new(a2, t);
    let spread = (4.0 * ln * alpha.norm_sqr() / a2).sqrt();
    let reach = state
        .packets()
        .iter()
        .map(|p| {
            let centre = p.y0 + 2.0 * p.p * t;
            (x_lo - centre).abs().max((x_hi - centre).abs())
        })
        .fold(0.0, f64::max);
    let pole = if state.n() > 1 { pole_extent(c, eps) } else { 0.0 };
    let extent = reach + spread + pole;
    let intervals = (2.0 * k_max * extent / (2.0 * PI)).ceil() as usize;
    let mut n_k = intervals.max(2) + 1;
    if n_k % 2 == 0 {
        n_k += 1;
    }
    if n_k > ceiling {
        return Err(Error::InfeasibleGrid { needed: n_k, ceiling });
    }
    QuadratureGrid::new(k_max, n_k)
}

fn check_n(n: usize, opts: &GreenOptions) -> Result<()> {
    let max = opts.max_particles.min(HARD_MAX_PARTICLES);
    if n > max {
        return Err(Error::TooManyParticles { n, max });
    }
    Ok(())
}

fn packet_sources(
    kernel: &PermutationKernel,
    state: &InitialState,
    tau: Complex64,
) -> Vec<Vec<Complex64>> {
    state
        .packets()
        .iter()
        .enumerate()
        .map(|(m, p)| {
            kernel
                .nodes(m)
                .iter()
                .zip(kernel.weights())
                .map(|(&k, &w)| w * p.fourier(k) * (-Complex64::i() * tau * (k * k)).exp())
                .collect()
        })
        .collect()
}

fn finite_or_err(values: &[Complex64]) -> Result<()> {
    match values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        Some(i) => Err(Error::NonFinite { node: vec![i] }),
        None => Ok(()),
    }
}

/// Evolved product state at arbitrary target points (each sorted on input).
pub fn evolve_spectral(
    xs: &[Vec<f64>],
    state: &InitialState,
    t: f64,
    eta: f64,
    c: f64,
    grid: &QuadratureGrid,
) -> Result<Vec<Complex64>> {
    check_n(state.n(), &GreenOptions::default())?;
    let ctx = ScatteringContext::new(c)?;
    let kernel = PermutationKernel::new(*grid, state.n(), &ctx);
    let sources = packet_sources(&kernel, state, Complex64::new(t, -eta));
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        if x.len() != state.n() {
            return Err(Error::DimensionMismatch {
                expected: state.n(),
                got: x.len(),
            });
        }
        let mut x = x.clone();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let v: Complex64 = point_terms(&kernel, &sources, &x).into_iter().map(|(_, v)| v).sum();
        out.push(v);
    }
    finite_or_err(&out)?;
    Ok(out)
}

/// [`evolve_spectral`] on the tensor grid `xgrid^N`.
pub fn evolve_spectral_grid(
    xgrid: &XGrid,
    state: &InitialState,
    t: f64,
    eta: f64,
    c: f64,
    grid: &QuadratureGrid,
    opts: &GreenOptions,
) -> Result<EvolvedState> {
    xgrid.validate()?;
    check_n(state.n(), opts)?;
    let ctx = ScatteringContext::new(c)?;
    let kernel = PermutationKernel::new(*grid, state.n(), &ctx);
    let sources = packet_sources(&kernel, state, Complex64::new(t, -eta));
    let values = tensor_field(&kernel, &sources, &xgrid.axis());
    finite_or_err(&values)?;
    Ok(EvolvedState {
        n: state.n(),
        t,
        eta,
        c,
        xgrid: *xgrid,
        grid: *grid,
        truncation_bound: state.truncation_bound(),
        values,
    })
}

/// Source grid for [`evolve_convolution`]: one uniform axis of spacing `h`
/// over the packet supports, cut where `|phi| < tol * peak`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexGrid {
    pub h: f64,
    pub tol: f64,
}

impl SimplexGrid {
    /// Spacing `pi / k_max`, which keeps the alias image of the discrete
    /// source transform outside the momentum grid.
    pub fn for_grid(grid: &QuadratureGrid, tol: f64) -> Self {
        SimplexGrid {
            h: PI / grid.k_max,
            tol,
        }
    }
}

/// Momentum grid for [`evolve_convolution`]: the Green's function is damped
/// by `eta` alone, and the sources span the packet supports.
#[allow(clippy::too_many_arguments)]
pub fn convolution_grid(
    state: &InitialState,
    x_lo: f64,
    x_hi: f64,
    t: f64,
    eta: f64,
    c: f64,
    eps: f64,
) -> Result<QuadratureGrid> {
    if !(eta > 0.0) {
        return Err(Error::InvalidQuery("direct convolution needs eta > 0".into()));
    }
    let reach = 2.0 * state.width() * (1.0 / eps).ln().sqrt();
    let far = state
        .packets()
        .iter()
        .map(|p| (x_lo - p.y0).abs().max((x_hi - p.y0).abs()))
        .fold(0.0, f64::max);
    let pole = if state.n() > 1 { pole_extent(c, eps) } else { 0.0 };
    let budget = DampingBudget::new(eta, far + reach + pole, eps).with_t_scale(Complex64::new(t, eta).norm());
    build_grid(&budget)
}

/// Upper bound on tensor entries handled by [`evolve_convolution`].
pub const CONVOLUTION_COST_CEILING: usize = 60_000_000;

/// Direct quadrature of `int_{y_1 < ... < y_N} G(x, y; t - i eta) prod_m phi_m(y_m) dy`
/// on the tensor grid `xgrid^N`.
#[allow(clippy::too_many_arguments)]
pub fn evolve_convolution(
    xgrid: &XGrid,
    state: &InitialState,
    t: f64,
    eta: f64,
    c: f64,
    grid: &QuadratureGrid,
    simplex: &SimplexGrid,
) -> Result<EvolvedState> {
    xgrid.validate()?;
    let n = state.n();
    if n > 3 {
        return Err(Error::TooManyParticles { n, max: 3 });
    }
    if !(eta > 0.0) {
        return Err(Error::InvalidQuery("direct convolution needs eta > 0".into()));
    }
    if !(simplex.h > 0.0 && simplex.tol > 0.0 && simplex.tol < 1.0) {
        return Err(Error::InvalidQuery("simplex grid needs h > 0 and tol in (0, 1)".into()));
    }
    let ctx = ScatteringContext::new(c)?;
    let a = state.width();
    let reach = 2.0 * a * (1.0 / simplex.tol).ln().sqrt();
    let lo = state.packets()[0].y0 - reach;
    let hi = state.packets()[n - 1].y0 + reach;
    let ny = ((hi - lo) / simplex.h).ceil() as usize + 1;
    let nk = grid.n_k;
    let ytotal = ny.checked_pow(n as u32).unwrap_or(usize::MAX);
    let ktotal = nk.checked_pow(n as u32).unwrap_or(usize::MAX);
    let xtotal = xgrid.points.checked_pow(n as u32).unwrap_or(usize::MAX);
    if ytotal.max(ktotal).max(xtotal) > CONVOLUTION_COST_CEILING {
        return Err(Error::CostCeiling(format!(
            "{ny}^{n} source nodes, {nk}^{n} momentum nodes, {}^{n} targets exceed {CONVOLUTION_COST_CEILING}",
            xgrid.points
        )));
    }
    let ys: Vec<f64> = (0..ny).map(|i| lo + i as f64 * simplex.h).collect();
    let vals: Vec<Vec<Complex64>> = state
        .packets()
        .iter()
        .map(|p| ys.iter().map(|&y| p.value(y)).collect())
        .collect();
    let peak = (2.0 * PI).powf(-0.25) / a.sqrt();
    let cut = simplex.tol * peak;

    // masked source tensor over ordered y, trapezoid weights h^N / ties
    let mut src = vec![Complex64::new(0.0, 0.0); ytotal];
    let hn = simplex.h.powi(n as i32);
    for idx in ordered_indices(n, ny) {
        if (0..n).any(|m| vals[m][idx[m]].norm() < cut) {
            continue;
        }
        let flat = idx.iter().fold(0, |acc, &i| acc * ny + i);
        let v: Complex64 = (0..n).map(|m| vals[m][idx[m]]).product();
        src[flat] = v * hn * tie_weight(&idx);
    }
    let kernel = PermutationKernel::new(*grid, n, &ctx);
    let mut t_src = src;
    let mut shape = vec![ny; n];
    for m in (0..n).rev() {
        let mat: Vec<Complex64> = kernel
            .nodes(m)
            .iter()
            .flat_map(|&k| ys.iter().map(move |&y| Complex64::new(0.0, -k * y).exp()))
            .collect();
        let (next, s) = mode_product(&t_src, &shape, m, &mat, nk);
        t_src = next;
        shape = s;
    }
    let tau = Complex64::new(t, -eta);
    let factor: Vec<Vec<Complex64>> = (0..n)
        .map(|m| {
            kernel
                .nodes(m)
                .iter()
                .zip(kernel.weights())
                .map(|(&k, &w)| w * (-Complex64::i() * tau * (k * k)).exp())
                .collect()
        })
        .collect();
    let mut idx = vec![0usize; n];
    for z in t_src.iter_mut() {
        for m in 0..n {
            *z *= factor[m][idx[m]];
        }
        for m in (0..n).rev() {
            idx[m] += 1;
            if idx[m] < nk {
                break;
            }
            idx[m] = 0;
        }
    }
    let values = tensor_field_dense(&kernel, &t_src, &xgrid.axis());
    finite_or_err(&values)?;
    Ok(EvolvedState {
        n,
        t,
        eta,
        c,
        xgrid: *xgrid,
        grid: *grid,
        truncation_bound: 0.0,
        values,
    })
}

/// `int_R |Psi|^2` by the trapezoid rule on the ordered grid, with weight
/// `1 / prod s_g!` on ties so that the rule equals half (one `N!`-th) of the
/// full-space rule for the symmetric extension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub norm_squared: f64,
    /// Largest `|Psi|` on the outer faces of the grid, relative to the peak.
    pub boundary_ratio: f64,
}

impl NormReport {
    pub fn coverage_ok(&self) -> bool {
        self.boundary_ratio <= 1e-6
    }
}

pub fn norm_squared(state: &EvolvedState) -> NormReport {
    let n = state.n;
    let np = state.xgrid.points;
    let hn = state.xgrid.h().powi(n as i32);
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut peak: f64 = 0.0;
    let mut edge: f64 = 0.0;
    for idx in ordered_indices(n, np) {
        let v = state.at(&idx).norm();
        peak = peak.max(v);
        if idx[0] == 0 || idx[n - 1] == np - 1 {
            edge = edge.max(v);
        }
        let term = v * v * tie_weight(&idx) * hn;
        let s = sum + term;
        comp += if sum.abs() >= term.abs() { (sum - s) + term } else { (term - s) + sum };
        sum = s;
    }
    NormReport {
        norm_squared: sum + comp,
        boundary_ratio: if peak > 0.0 { edge / peak } else { 0.0 },
    }
}

/// `|Psi(x_1, x_2)|^2` on the full `points x points` plane, mirrored from
/// the ordered sector; row-major over `(x_1, x_2)`.
pub fn pair_density(state: &EvolvedState) -> Result<Vec<f64>> {
    if state.n != 2 {
        return Err(Error::InvalidQuery(format!("pair density needs N = 2, got {}", state.n)));
    }
    let np = state.xgrid.points;
    let mut out = vec![0.0; np * np];
    for i in 0..np {
        for j in 0..np {
            out[i * np + j] = state.at(&[i, j]).norm_sqr();
        }
    }
    Ok(out)
}

/// `int_R G(x, y; -i eta) f(x) dx` for the Gaussian test function
/// `f(x) = prod_j exp(-(x_j - z_j)^2 / (2 s^2))`, whose support must sit in
/// the ordered sector; the `x`-integral is done in closed form.
pub fn weak_initial_value(
    y: &[f64],
    z: &[f64],
    s: f64,
    eta: f64,
    c: f64,
    grid: &QuadratureGrid,
) -> Result<Complex64> {
    let n = y.len();
    if z.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: z.len() });
    }
    let ctx = ScatteringContext::new(c)?;
    let kernel = PermutationKernel::new(*grid, n, &ctx);
    // int exp(i k x) f_j(x) dx
    let ft = |j: usize, k: f64| {
        Complex64::from_polar(s * (2.0 * PI).sqrt() * (-0.5 * s * s * k * k).exp(), k * z[j])
    };
    let mut total = Complex64::new(0.0, 0.0);
    for sigma in crate::bethe::permutations(n) {
        let inv = sigma.inverse();
        let f: Vec<Vec<Complex64>> = (0..n)
            .map(|m| {
                let coord = inv.at(m + 1) - 1;
                kernel
                    .nodes(m)
                    .iter()
                    .zip(kernel.weights())
                    .map(|(&k, &w)| {
                        w * ft(coord, k) * Complex64::from_polar((-eta * k * k).exp(), -k * y[m])
                    })
                    .collect()
            })
            .collect();
        total += kernel.sigma_sum(&sigma, &f);
    }
    if !(total.re.is_finite() && total.im.is_finite()) {
        return Err(Error::NonFinite { node: vec![] });
    }
    Ok(total)
}

/// Test function of [`weak_initial_value`] at `y`.
pub fn weak_test_function(y: &[f64], z: &[f64], s: f64) -> f64 {
    y.iter()
        .zip(z)
        .map(|(a, b)| (-(a - b) * (a - b) / (2.0 * s * s)).exp())
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn packet_value_examples() {
        let g = GaussianPacket::new(1.0, 0.3, 0.0).unwrap();
        assert_relative_eq!(g.value(0.3).re, 0.6316187777460647, epsilon = 1e-15);

        let g = GaussianPacket::new(0.4, 0.3, 0.0).unwrap();
        let h = 1e-3;
        let s: f64 = (0..=8000).map(|i| g.value(-3.7 + i as f64 * h).norm_sqr() * h).sum();
        assert!((s - 1.0).abs() < 1e-10);

        let gp = GaussianPacket::new(0.4, 0.3, 1.7).unwrap();
        for x in [-0.4, 0.0, 0.9] {
            let z = gp.value(x) * g.value(x).conj();
            assert!((z.arg() - 1.7 * x).abs() < 1e-12);
        }
        assert!(GaussianPacket::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn fourier_matches_quadrature() {
        let g = GaussianPacket::new(0.3, 0.7, 1.2).unwrap();
        let h = 2e-4;
        for q in [0.0, 0.5, 2.0] {
            let k = g.p + q / g.a;
            let num: Complex64 = (0..=30000)
                .map(|i| {
                    let y = g.y0 - 3.0 + i as f64 * h;
                    Complex64::new(0.0, -k * y).exp() * g.value(y) * h
                })
                .sum();
            assert!((num - g.fourier(k)).norm() < 1e-10, "q={q}");
        }
        let peak = (2.0 * PI).powf(-0.25) * 2.0 * PI.sqrt() * g.a.sqrt();
        assert_relative_eq!(g.fourier(g.p).norm(), peak, epsilon = 1e-14);
        assert_relative_eq!(g.fourier(g.p + 0.8).norm(), g.fourier(g.p - 0.8).norm(), epsilon = 1e-15);
    }

    #[test]
    fn free_evolved_matches_quadrature() {
        let g = GaussianPacket::new(0.5, -0.4, 0.9).unwrap();
        let tau = Complex64::new(0.6, -0.05);
        let dk = 1e-3;
        for x in [-1.0, 0.3, 1.5] {
            let num: Complex64 = (0..=30000)
                .map(|i| {
                    let k = -15.0 + i as f64 * dk;
                    g.fourier(k) * (Complex64::new(0.0, k * x) - Complex64::i() * tau * k * k).exp() * dk
                })
                .sum::<Complex64>()
                / (2.0 * PI);
            assert!((num - g.free_evolved(x, tau)).norm() < 1e-10);
        }
        assert!((g.free_evolved(0.2, Complex64::new(0.0, 0.0)) - g.value(0.2)).norm() < 1e-15);
    }

    #[test]
    fn state_validation() {
        let p = |y0| GaussianPacket::new(0.25, y0, 0.0).unwrap();
        assert!(InitialState::new(vec![p(1.0), p(0.0)]).is_err());
        assert!(InitialState::new(vec![p(0.0), GaussianPacket::new(0.3, 2.0, 0.0).unwrap()]).is_err());
        let s = InitialState::new(vec![p(0.0), p(4.0)]).unwrap();
        assert_relative_eq!(s.min_gap_ratio(), 16.0);
        assert!(s.is_well_separated());
        assert!(s.truncation_bound() < 1e-12);
    }

    #[test]
    fn ordered_index_enumeration() {
        let v = ordered_indices(2, 3);
        assert_eq!(v.len(), 6);
        assert_eq!(v[1], vec![0, 1]);
        assert_eq!(ordered_indices(3, 4).len(), 20);
        assert_eq!(tie_weight(&[1, 1]), 0.5);
        assert_eq!(tie_weight(&[2, 2, 2]), 1.0 / 6.0);
        assert_eq!(tie_weight(&[1, 1, 3]), 0.5);
        assert_eq!(tie_weight(&[0, 1, 2]), 1.0);
    }

    #[test]
    fn single_packet_evolves_freely() {
        let g = GaussianPacket::new(0.4, 0.2, 0.8).unwrap();
        let s = InitialState::new(vec![g]).unwrap();
        let t = 0.7;
        let grid = spectral_grid(&s, -3.0, 5.0, t, 0.0, 1.0, 1e-12).unwrap();
        let xs: Vec<Vec<f64>> = [-1.0, 0.5, 1.7, 3.2].iter().map(|&x| vec![x]).collect();
        let v = evolve_spectral(&xs, &s, t, 0.0, 1.0, &grid).unwrap();
        for (x, v) in xs.iter().zip(v) {
            let exact = g.free_evolved(x[0], Complex64::new(t, 0.0));
            assert!((v - exact).norm() < 1e-8, "x={:?}", x);
        }
    }
}
