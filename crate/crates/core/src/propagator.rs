//! The regularized Green's function and its closed-form special cases.
//!
//! All momentum integrals use the `dk/(2 pi)` measure and the complex time
//! `tau = t - i eta`. The one-particle kernel is
//!
//! ```text
//! g_tau(x) = int dk/(2 pi) exp(i k x - i tau k^2) = (4 pi i tau)^(-1/2) exp(i x^2 / (4 tau))
//! ```
//!
//! with the principal square root; `4 pi i tau` has real part `4 pi eta >= 0`,
//! so the root never crosses its branch cut.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bethe::{permutations, Permutation, ScatteringContext};
use crate::error::{Error, Result};
use crate::quadrature::{
    build_grid, build_grid_with_ceiling, CompensatedSum, DampingBudget, QuadratureGrid,
};
use crate::spectral::{point_terms, pole_extent, tensor_field, PermutationKernel};

/// Smallest admissible gap between consecutive sources.
pub const MIN_SOURCE_GAP: f64 = 1e-12;
pub const DEFAULT_MAX_PARTICLES: usize = 5;
/// No override may go past this.
pub const HARD_MAX_PARTICLES: usize = 8;
const TERM_OVERFLOW_RATIO: f64 = 1e6;

/// One Green's-function evaluation request. `x` is kept sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagatorQuery {
    x: Vec<f64>,
    y: Vec<f64>,
    t: f64,
    eta: f64,
    c: f64,
}

impl PropagatorQuery {
    pub fn new(x: Vec<f64>, y: Vec<f64>, t: f64, eta: f64, c: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidQuery("no particles".into()));
        }
        if x.len() != y.len() {
            return Err(Error::InvalidQuery(format!(
                "{} targets but {} sources",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidQuery("non-finite coordinate".into()));
        }
        for w in y.windows(2) {
            if w[1] - w[0] < MIN_SOURCE_GAP {
                return Err(Error::InvalidQuery(format!(
                    "sources must be strictly increasing with gap >= {MIN_SOURCE_GAP:e}, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidQuery(format!("t = {t} must be >= 0")));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::InvalidQuery(format!("eta = {eta} must be >= 0")));
        }
        ScatteringContext::new(c)?;
        let mut x = x;
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(PropagatorQuery { x, y, t, eta, c })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn tau(&self) -> Complex64 {
        Complex64::new(self.t, -self.eta)
    }

    pub fn scattering(&self) -> ScatteringContext {
        ScatteringContext::new(self.c).expect("validated on construction")
    }

    /// Same query at new targets (re-sorted).
    pub fn with_x(&self, x: Vec<f64>) -> Result<Self> {
        PropagatorQuery::new(x, self.y.clone(), self.t, self.eta, self.c)
    }

    pub fn with_t(&self, t: f64) -> Result<Self> {
        PropagatorQuery::new(self.x.clone(), self.y.clone(), t, self.eta, self.c)
    }

    pub fn with_c(&self, c: f64) -> Result<Self> {
        PropagatorQuery::new(self.x.clone(), self.y.clone(), self.t, self.eta, c)
    }

    fn max_displacement(&self) -> f64 {
        self.x
            .iter()
            .flat_map(|xi| self.y.iter().map(move |yj| (xi - yj).abs()))
            .fold(0.0, f64::max)
    }

    /// Budget for the full quadrature: Gaussian damping `eta`, extent covering
    /// every `|x_i - y_j|` plus the pole tail of `S`, drift `|tau|`.
    pub fn budget(&self, eps: f64) -> DampingBudget {
        let pole = if self.n() > 1 {
            pole_extent(self.c, eps)
        } else {
            0.0
        };
        DampingBudget::new(self.eta, self.max_displacement() + pole, eps).with_t_scale(self.tau().norm())
    }
}

/// Sorts unordered targets into the ordered sector; the value there defines
/// the symmetric extension.
pub fn symmetric_extend(x_unordered: Vec<f64>, template: &PropagatorQuery) -> Result<PropagatorQuery> {
    template.with_x(x_unordered)
}

/// Result of a full quadrature evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenValue {
    pub value: Complex64,
    /// `|I_sigma|` per permutation, lexicographic order.
    pub term_magnitudes: Vec<f64>,
    pub grid: QuadratureGrid,
}

#[derive(Debug, Clone, Copy)]
pub struct GreenOptions {
    pub max_particles: usize,
}

impl Default for GreenOptions {
    fn default() -> Self {
        GreenOptions {
            max_particles: DEFAULT_MAX_PARTICLES,
        }
    }
}

/// Grid for `q` with the default node ceiling.
pub fn query_grid(q: &PropagatorQuery, eps: f64) -> Result<QuadratureGrid> {
    if q.eta <= 0.0 {
        return Err(Error::InvalidQuery("quadrature needs eta > 0".into()));
    }
    build_grid(&q.budget(eps))
}

/// `A_sigma prod_j exp(i k_{sigma(j)} (x_j - y_{sigma(j)})) exp(-i tau sum k^2)`.
pub fn term_integrand(sigma: &Permutation, k: &[f64], q: &PropagatorQuery) -> Complex64 {
    let ctx = q.scattering();
    let tau = q.tau();
    let mut phase = 0.0;
    let mut k2 = 0.0;
    for j in 1..=q.n() {
        let s = sigma.at(j);
        phase += k[s - 1] * (q.x[j - 1] - q.y[s - 1]);
        k2 += k[j - 1] * k[j - 1];
    }
    let expo = Complex64::new(0.0, phase) - Complex64::i() * tau * k2;
    ctx.amplitude_real(sigma, k) * expo.exp()
}

fn check_particles(n: usize, opts: &GreenOptions) -> Result<()> {
    let max = opts.max_particles.min(HARD_MAX_PARTICLES);
    if n > max {
        return Err(Error::TooManyParticles { n, max });
    }
    Ok(())
}

/// `w_j exp(-i k y_m - i tau k^2)` per momentum dimension.
fn point_sources(kernel: &PermutationKernel, y: &[f64], tau: Complex64) -> Vec<Vec<Complex64>> {
    (0..kernel.n())
        .map(|m| {
            kernel
                .nodes(m)
                .iter()
                .zip(kernel.weights())
                .map(|(&k, &w)| {
                    w * (Complex64::new(0.0, -k * y[m]) - Complex64::i() * tau * (k * k)).exp()
                })
                .collect()
        })
        .collect()
}

pub fn green_function(q: &PropagatorQuery, grid: &QuadratureGrid) -> Result<GreenValue> {
    green_function_with(q, grid, &GreenOptions::default())
}

/// Sum over `S_N` of the tensor trapezoid approximation of each term.
pub fn green_function_with(
    q: &PropagatorQuery,
    grid: &QuadratureGrid,
    opts: &GreenOptions,
) -> Result<GreenValue> {
    if q.eta <= 0.0 {
        return Err(Error::InvalidQuery("quadrature needs eta > 0".into()));
    }
    check_particles(q.n(), opts)?;
    let kernel = PermutationKernel::new(*grid, q.n(), &q.scattering());
    let sources = point_sources(&kernel, &q.y, q.tau());
    let terms = point_terms(&kernel, &sources, &q.x);
    collect_terms(terms, *grid)
}

fn collect_terms(terms: Vec<(Permutation, Complex64)>, grid: QuadratureGrid) -> Result<GreenValue> {
    let identity = terms[0].1.norm();
    let mut sum = CompensatedSum::new();
    let mut mags = Vec::with_capacity(terms.len());
    for (sigma, v) in &terms {
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite {
                node: sigma.entries().to_vec(),
            });
        }
        let m = v.norm();
        if m > TERM_OVERFLOW_RATIO * identity {
            return Err(Error::TermOverflow {
                sigma: sigma.entries().to_vec(),
                magnitude: m,
                identity,
            });
        }
        mags.push(m);
        sum.add(*v);
    }
    Ok(GreenValue {
        value: sum.value(),
        term_magnitudes: mags,
        grid,
    })
}

/// Green's function on the tensor grid `axis^N` for fixed sources, summed
/// over permutations; row-major over `(x_1..x_N)`. Only ordered points are
/// physical.
pub fn green_on_grid(
    template: &PropagatorQuery,
    axis: &[f64],
    grid: &QuadratureGrid,
    opts: &GreenOptions,
) -> Result<Vec<Complex64>> {
    if template.eta <= 0.0 {
        return Err(Error::InvalidQuery("quadrature needs eta > 0".into()));
    }
    check_particles(template.n(), opts)?;
    let kernel = PermutationKernel::new(*grid, template.n(), &template.scattering());
    let sources = point_sources(&kernel, &template.y, template.tau());
    let field = tensor_field(&kernel, &sources, axis);
    if let Some(i) = field.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite { node: vec![i] });
    }
    Ok(field)
}

/// `g_tau(x)`.
pub fn free_kernel(x: f64, tau: Complex64) -> Result<Complex64> {
    if tau.norm() == 0.0 {
        return Err(Error::ZeroTime);
    }
    let pref = (4.0 * PI * Complex64::i() * tau).sqrt().inv();
    Ok(pref * (Complex64::i() * x * x / (4.0 * tau)).exp())
}

/// `M_{ab} = g_tau(x_b - y_a)`, 0-based.
fn kernel_matrix(q: &PropagatorQuery) -> Result<DMatrix<Complex64>> {
    let n = q.n();
    let tau = q.tau();
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            m[(a, b)] = free_kernel(q.x[b] - q.y[a], tau)?;
        }
    }
    Ok(m)
}

/// Identity-permutation term: product of one-particle kernels.
pub fn identity_term_closed_form(q: &PropagatorQuery) -> Result<Complex64> {
    let tau = q.tau();
    q.x.iter()
        .zip(&q.y)
        .try_fold(Complex64::new(1.0, 0.0), |acc, (x, y)| Ok(acc * free_kernel(x - y, tau)?))
}

/// `c -> 0` limit: permanent of the kernel matrix.
pub fn free_boson_green(q: &PropagatorQuery) -> Result<Complex64> {
    let m = kernel_matrix(q)?;
    let n = q.n();
    let sum: CompensatedSum = permutations(n)
        .map(|sigma| {
            (1..=n).fold(Complex64::new(1.0, 0.0), |acc, j| {
                acc * m[(sigma.at(j) - 1, j - 1)]
            })
        })
        .collect();
    Ok(sum.value())
}

/// `c -> infinity` limit: determinant of the kernel matrix.
pub fn tonks_green(q: &PropagatorQuery) -> Result<Complex64> {
    let m = kernel_matrix(q)?;
    Ok(match q.n() {
        1 => m[(0, 0)],
        2 => m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
        _ => m.lu().determinant(),
    })
}

/// One-dimensional grid for the relative-momentum integral of
/// [`n2_semianalytic`]: damping `2 eta`, drift `2 |tau|`, and the pole of
/// `S(2q)` at `q = ic/2`.
pub fn n2_grid(q: &PropagatorQuery, eps: f64) -> Result<QuadratureGrid> {
    if q.n() != 2 {
        return Err(Error::InvalidQuery("two-particle reduction needs N = 2".into()));
    }
    if q.eta <= 0.0 {
        return Err(Error::InvalidQuery("quadrature needs eta > 0".into()));
    }
    let xi = (q.x[0] - q.x[1]) + (q.y[0] - q.y[1]);
    let pole = 2.0 * (1.0 / eps).ln() / q.c;
    let budget = DampingBudget::new(2.0 * q.eta, xi.abs() + pole.min(2000.0), eps)
        .with_t_scale(2.0 * q.tau().norm());
    build_grid_with_ceiling(&budget, 1 << 21)
}

/// Two-particle Green's function by centre-of-mass reduction.
///
/// With `K = (k1 + k2)/2`, `q = (k2 - k1)/2` (Jacobian 2) the exchange term
/// becomes
///
/// ```text
/// (1/pi) g_{2 tau}(X) int dq S(2q) exp(i q xi - 2 i tau q^2),
/// X = x1 + x2 - y1 - y2,  xi = (x1 - x2) + (y1 - y2).
/// ```
///
/// Writing `S(2q) = 1 - 2c/(c + 2iq)`, the `1` integrates to
/// `g_tau(x1 - y2) g_tau(x2 - y1)`; only the pole part is summed, on the
/// midpoints of `grid1d` so `q = 0` is never a node.
pub fn n2_semianalytic(q: &PropagatorQuery, grid1d: &QuadratureGrid) -> Result<Complex64> {
    if q.n() != 2 {
        return Err(Error::InvalidQuery("two-particle reduction needs N = 2".into()));
    }
    if q.eta <= 0.0 {
        return Err(Error::InvalidQuery("quadrature needs eta > 0".into()));
    }
    let tau = q.tau();
    let (x1, x2, y1, y2) = (q.x[0], q.x[1], q.y[0], q.y[1]);
    let direct = free_kernel(x1 - y1, tau)? * free_kernel(x2 - y2, tau)?;
    let free_exchange = free_kernel(x1 - y2, tau)? * free_kernel(x2 - y1, tau)?;
    let big_x = x1 + x2 - y1 - y2;
    let xi = (x1 - x2) + (y1 - y2);
    let c = q.c;
    let half = 0.5 * grid1d.dk();
    let w = grid1d.dk() / (2.0 * PI);
    let mut pole = CompensatedSum::new();
    for j in 0..grid1d.n_k - 1 {
        let k = grid1d.node(j) + half;
        let s_minus_one = -2.0 * c / Complex64::new(c, 2.0 * k);
        let e = (Complex64::new(0.0, k * xi) - 2.0 * Complex64::i() * tau * (k * k)).exp();
        pole.add(s_minus_one * e * w);
    }
    // (1/pi) int dq = (1/pi) 2 pi sum w = 2 sum w
    let exchange = free_exchange + 2.0 * free_kernel(big_x, 2.0 * tau)? * pole.value();
    Ok(direct + exchange)
}

/// Outcome of a residual check; `residual` is `None` when `|Psi|` sits at the
/// noise floor and the ratio is meaningless.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub residual: Option<f64>,
    pub psi: Complex64,
}

/// Below this `|Psi|` a relative residual is not reported.
pub const RESIDUAL_NOISE_FLOOR: f64 = 1e-14;

/// Cusp residual at a point with `x_j = x_{j+1}` (`pair = j`, 1-based), using
/// the second-order one-sided difference along `e_{j+1} - e_j` from inside
/// the ordered sector.
pub fn cusp_residual_with<F>(q: &PropagatorQuery, pair: usize, h: f64, eval: F) -> Result<ResidualReport>
where
    F: Fn(&PropagatorQuery) -> Result<Complex64>,
{
    let n = q.n();
    if pair == 0 || pair >= n {
        return Err(Error::SlotOutOfRange {
            index: pair,
            max: n.saturating_sub(1),
        });
    }
    let (a, b) = (pair - 1, pair);
    if (q.x[a] - q.x[b]).abs() > 1e-12 {
        return Err(Error::InvalidQuery(format!(
            "cusp residual needs x_{pair} = x_{}",
            pair + 1
        )));
    }
    let lo = if a > 0 { q.x[a - 1] } else { f64::NEG_INFINITY };
    let hi = if b + 1 < n { q.x[b + 1] } else { f64::INFINITY };
    if q.x[a] - 2.0 * h < lo || q.x[b] + 2.0 * h > hi {
        return Err(Error::InvalidQuery("stencil leaves the ordered sector".into()));
    }
    let shifted = |s: f64| {
        let mut x = q.x.clone();
        x[a] -= s;
        x[b] += s;
        q.with_x(x)
    };
    let p0 = eval(q)?;
    let p1 = eval(&shifted(h)?)?;
    let p2 = eval(&shifted(2.0 * h)?)?;
    let deriv = (-3.0 * p0 + 4.0 * p1 - p2) / (2.0 * h);
    let residual = if p0.norm() < RESIDUAL_NOISE_FLOOR {
        None
    } else {
        Some((deriv - q.c * p0).norm() / (q.c * p0.norm()))
    };
    Ok(ResidualReport { residual, psi: p0 })
}

/// [`cusp_residual_with`] on the full quadrature, one fixed grid for all
/// stencil points.
pub fn cusp_residual(q: &PropagatorQuery, pair: usize, h: f64, grid: &QuadratureGrid) -> Result<ResidualReport> {
    cusp_residual_with(q, pair, h, |p| Ok(green_function(p, grid)?.value))
}

/// `|-sum_i D^2_i Psi - i D_t Psi| / |Psi|` with central differences in `x`
/// and in `t` (one-sided second order when `t < h_t`).
pub fn pde_residual_with<F>(q: &PropagatorQuery, h_x: f64, h_t: f64, eval: F) -> Result<ResidualReport>
where
    F: Fn(&PropagatorQuery) -> Result<Complex64>,
{
    let n = q.n();
    for w in q.x.windows(2) {
        if w[1] - w[0] <= 2.0 * h_x {
            return Err(Error::InvalidQuery("point is not interior to the ordered sector".into()));
        }
    }
    let p0 = eval(q)?;
    let mut lap = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let mut xp = q.x.clone();
        let mut xm = q.x.clone();
        xp[i] += h_x;
        xm[i] -= h_x;
        let pp = eval(&q.with_x(xp)?)?;
        let pm = eval(&q.with_x(xm)?)?;
        lap += (pp - 2.0 * p0 + pm) / (h_x * h_x);
    }
    let dt = if q.t >= h_t {
        (eval(&q.with_t(q.t + h_t)?)? - eval(&q.with_t(q.t - h_t)?)?) / (2.0 * h_t)
    } else {
        let p1 = eval(&q.with_t(q.t + h_t)?)?;
        let p2 = eval(&q.with_t(q.t + 2.0 * h_t)?)?;
        (-3.0 * p0 + 4.0 * p1 - p2) / (2.0 * h_t)
    };
    let r = -lap - Complex64::i() * dt;
    let residual = if p0.norm() < RESIDUAL_NOISE_FLOOR {
        None
    } else {
        Some(r.norm() / p0.norm())
    };
    Ok(ResidualReport { residual, psi: p0 })
}

pub fn pde_residual(q: &PropagatorQuery, h_x: f64, h_t: f64, grid: &QuadratureGrid) -> Result<ResidualReport> {
    pde_residual_with(q, h_x, h_t, |p| Ok(green_function(p, grid)?.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn query(x: &[f64], y: &[f64], t: f64, eta: f64, c: f64) -> PropagatorQuery {
        PropagatorQuery::new(x.to_vec(), y.to_vec(), t, eta, c).unwrap()
    }

    #[test]
    fn query_validation() {
        assert!(PropagatorQuery::new(vec![0.0, 1.0], vec![1.0, 0.0], 0.1, 0.1, 1.0).is_err());
        assert!(PropagatorQuery::new(vec![0.0, 1.0], vec![0.0, 0.0], 0.1, 0.1, 1.0).is_err());
        assert!(PropagatorQuery::new(vec![0.0], vec![0.0, 1.0], 0.1, 0.1, 1.0).is_err());
        assert!(PropagatorQuery::new(vec![0.0], vec![0.0], -0.1, 0.1, 1.0).is_err());
        assert!(PropagatorQuery::new(vec![0.0], vec![0.0], 0.1, -0.1, 1.0).is_err());
        assert!(PropagatorQuery::new(vec![0.0], vec![0.0], 0.1, 0.1, 0.0).is_err());
        let q = query(&[3.0, 1.0, 2.0], &[0.0, 1.0, 2.0], 0.0, 0.1, 1.0);
        assert_eq!(q.x(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn symmetric_extension_sorts() {
        let t = query(&[0.0, 0.0, 0.0], &[0.0, 1.0, 2.0], 0.2, 0.1, 1.0);
        let q = symmetric_extend(vec![3.0, 1.0, 2.0], &t).unwrap();
        assert_eq!(q.x(), &[1.0, 2.0, 3.0]);
        let q = symmetric_extend(vec![1.0, 2.0, 3.0], &t).unwrap();
        assert_eq!(q.x(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn identity_closed_form_examples() {
        let q = query(&[0.4], &[0.4], 0.0, 1.0, 1.0);
        let v = identity_term_closed_form(&q).unwrap();
        assert_relative_eq!(v.re, 0.28209479177387814, epsilon = 1e-15);
        assert!(v.im.abs() < 1e-16);

        let q = query(&[0.0], &[0.0], 1.0, 0.0, 1.0);
        let v = identity_term_closed_form(&q).unwrap();
        assert_relative_eq!(v.re, 0.19947114020071635, epsilon = 1e-15);
        assert_relative_eq!(v.im, -0.19947114020071635, epsilon = 1e-15);

        let q2 = query(&[0.1, 0.9], &[-0.2, 1.0], 0.3, 0.05, 1.0);
        let a = identity_term_closed_form(&query(&[0.1], &[-0.2], 0.3, 0.05, 1.0)).unwrap();
        let b = identity_term_closed_form(&query(&[0.9], &[1.0], 0.3, 0.05, 1.0)).unwrap();
        let v = identity_term_closed_form(&q2).unwrap();
        assert_relative_eq!((v - a * b).norm(), 0.0, epsilon = 1e-16);

        assert_eq!(
            identity_term_closed_form(&query(&[0.0], &[0.0], 0.0, 0.0, 1.0)),
            Err(Error::ZeroTime)
        );
    }

    #[test]
    fn kernel_matches_quadrature() {
        // independent check of the closed form by brute-force trapezoid
        let tau = Complex64::new(0.7, -0.15);
        let (kmax, n) = (18.0, 40001);
        let dk = 2.0 * kmax / (n - 1) as f64;
        for x in [0.0, 0.8, -2.5] {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let k = -kmax + j as f64 * dk;
                let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                s += w * (Complex64::new(0.0, k * x) - Complex64::i() * tau * k * k).exp();
            }
            s *= dk / (2.0 * PI);
            let g = free_kernel(x, tau).unwrap();
            assert!((s - g).norm() < 1e-10, "x={x}: {s} vs {g}");
        }
    }

    #[test]
    fn free_boson_examples() {
        let q1 = query(&[0.3], &[-0.1], 0.2, 0.1, 1.0);
        assert_eq!(free_boson_green(&q1).unwrap(), identity_term_closed_form(&q1).unwrap());

        let q = query(&[0.0, 5.0], &[0.0, 5.0], 0.0, 1.0, 1.0);
        let v = free_boson_green(&q).unwrap();
        let g0 = 1.0 / (4.0 * PI).sqrt();
        let expect = g0 * g0 * (1.0 + (-25.0f64 / 4.0).exp().powi(2));
        assert_relative_eq!(v.re, expect, epsilon = 1e-15);
        assert_relative_eq!(v.re, 0.0795775 * (1.0 + 3.7e-6), epsilon = 1e-7);

        let a = free_boson_green(&query(&[0.2, 1.1], &[-0.5, 0.7], 0.3, 0.05, 1.0)).unwrap();
        let b = free_boson_green(&query(&[1.1, 0.2], &[-0.5, 0.7], 0.3, 0.05, 1.0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tonks_examples() {
        let q1 = query(&[0.3], &[-0.1], 0.2, 0.1, 1.0);
        assert_eq!(tonks_green(&q1).unwrap(), identity_term_closed_form(&q1).unwrap());

        let q = query(&[0.2, 1.1], &[-0.5, 0.7], 0.3, 0.05, 1.0);
        let tau = q.tau();
        let g = |d: f64| free_kernel(d, tau).unwrap();
        let expect = g(0.2 + 0.5) * g(1.1 - 0.7) - g(0.2 - 0.7) * g(1.1 + 0.5);
        assert!((tonks_green(&q).unwrap() - expect).norm() < 1e-16);

        let q = query(&[0.4, 0.4, 2.0], &[-0.5, 0.7, 1.5], 0.3, 0.05, 1.0);
        let v = tonks_green(&q).unwrap();
        let scale = identity_term_closed_form(&q).unwrap().norm();
        assert!(v.norm() <= 1e-14 * scale.max(1e-3));
    }

    #[test]
    fn term_integrand_examples() {
        let q = query(&[0.3, 1.0], &[-0.2, 0.5], 0.4, 0.1, 1.0);
        let v = term_integrand(&Permutation::identity(2), &[0.0, 0.0], &q);
        assert_eq!(v, Complex64::new(1.0, 0.0));

        let q = query(&[PI / 2.0], &[0.0], 0.0, 0.0, 1.0);
        let v = term_integrand(&Permutation::identity(1), &[1.0], &q);
        assert!((v - Complex64::i()).norm() < 1e-15);
    }

    #[test]
    fn single_particle_quadrature_matches_kernel() {
        let q = query(&[1.3], &[-0.4], 0.6, 0.08, 1.0);
        let eps = 1e-10;
        let grid = query_grid(&q, eps).unwrap();
        let g = green_function(&q, &grid).unwrap();
        let exact = free_kernel(1.7, q.tau()).unwrap();
        assert!((g.value - exact).norm() <= 10.0 * eps * exact.norm().max(1.0));
        assert_eq!(g.term_magnitudes.len(), 1);
    }

    #[test]
    fn heat_kernel_suppression_of_exchange() {
        let q = query(&[0.0, 2.0], &[0.0, 2.0], 0.0, 1.0, 1.0);
        let grid = query_grid(&q, 1e-12).unwrap();
        let g = green_function(&q, &grid).unwrap();
        let id = 1.0 / (4.0 * PI);
        assert_relative_eq!(g.term_magnitudes[0], id, epsilon = 1e-10);
        // brute-force 2-D trapezoid reference
        assert_relative_eq!(g.term_magnitudes[1], 0.004208984134373717, max_relative = 1e-9);
        assert!(g.term_magnitudes[1] < 0.06 * id);
        assert!((g.value - id).norm() <= g.term_magnitudes[1] + 1e-10);
    }

    #[test]
    fn green_on_grid_matches_pointwise() {
        let q = query(&[0.0, 0.0], &[-0.3, 0.8], 0.3, 0.1, 1.5);
        let grid = QuadratureGrid::new(10.0, 101).unwrap();
        let axis = [-0.5, 0.2, 0.9];
        let field = green_on_grid(&q, &axis, &grid, &GreenOptions::default()).unwrap();
        for (i, &a) in axis.iter().enumerate() {
            for (j, &b) in axis.iter().enumerate().skip(i) {
                let p = green_function(&q.with_x(vec![a, b]).unwrap(), &grid).unwrap().value;
                assert!((field[i * 3 + j] - p).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn particle_ceiling() {
        let q = query(&[0.0; 6], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 0.1, 0.1, 1.0);
        let grid = QuadratureGrid::new(1.0, 3).unwrap();
        assert!(matches!(
            green_function(&q, &grid),
            Err(Error::TooManyParticles { n: 6, max: 5 })
        ));
        let opts = GreenOptions { max_particles: 20 };
        let q9 = query(&[0.0; 9], &(0..9).map(|v| v as f64).collect::<Vec<_>>(), 0.1, 0.1, 1.0);
        assert!(matches!(
            green_function_with(&q9, &grid, &opts),
            Err(Error::TooManyParticles { n: 9, max: 8 })
        ));
    }

    #[test]
    fn single_particle_pde_closed_form() {
        let q = query(&[0.7], &[0.0], 0.4, 0.1, 1.0);
        let r = pde_residual_with(&q, 1e-4, 1e-4, identity_term_closed_form).unwrap();
        assert!(r.residual.unwrap() <= 1e-6, "{:?}", r);
    }

    #[test]
    fn tonks_vanishes_on_diagonal_cusp_surrogate() {
        let q = query(&[0.5, 0.5], &[0.0, 1.0], 0.2, 0.05, 1.0);
        assert!(tonks_green(&q).unwrap().norm() < 1e-16);
    }
}
