//! The verification suite: eleven checks with pinned tolerances, each run in
//! isolation so that one failure never hides another.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use deltagas_core::evolution::{
    evolve_spectral_grid, norm_squared, spectral_grid, weak_initial_value, weak_test_function, GaussianPacket,
    InitialState, XGrid,
};
use deltagas_core::lattice::{self, LatticeConfig};
use deltagas_core::propagator::{
    cusp_residual, free_boson_green, green_function, n2_grid, n2_semianalytic, pde_residual, query_grid,
    tonks_green, ResidualReport,
};
use deltagas_core::{permutations, GreenOptions, PropagatorQuery, QuadratureGrid, ScatteringContext};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{CheckRef, Format, GridSpec, PropagatorConfig, VerifyConfig};
use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 20_240_611;

pub const CHECKS: [(u8, &str); 11] = [
    (1, "amplitude_recursion"),
    (2, "s_matrix_algebra"),
    (3, "n2_dual_path"),
    (4, "free_limit"),
    (5, "tonks_limit"),
    (6, "cusp_condition"),
    (7, "pde_residual"),
    (8, "initial_condition"),
    (9, "norm_conservation"),
    (10, "lattice_oracle"),
    (11, "determinism"),
];

const DEFAULT_TOLERANCES: [(&str, f64); 16] = [
    ("recursion", 1e-12),
    ("s_matrix", 1e-14),
    ("n2_dual_path", 1e-6),
    ("free_limit", 1e-4),
    ("tonks_ratio_min", 6.0),
    ("tonks_ratio_max", 14.0),
    ("cusp", 1e-3),
    ("cusp_order_min", 3.0),
    ("cusp_order_max", 5.0),
    ("pde", 1e-3),
    ("initial_recovery", 1e-3),
    ("weak_ratio_min", 1.5),
    ("weak_ratio_max", 2.5),
    ("norm_drift", 1e-3),
    ("lattice_reference", 5e-2),
    ("lattice_free", 1e-3),
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances(BTreeMap<String, f64>);

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances(DEFAULT_TOLERANCES.iter().map(|&(k, v)| (k.to_string(), v)).collect())
    }
}

impl Tolerances {
    pub fn with_overrides(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut t = Tolerances::default();
        for (k, &v) in overrides {
            match t.0.get_mut(k) {
                Some(slot) if v.is_finite() => *slot = v,
                Some(_) => return Err(CliError::Config(format!("tolerance {k} = {v} is not finite"))),
                None => return Err(CliError::Config(format!("unknown tolerance {k}"))),
            }
        }
        Ok(t)
    }

    pub fn get(&self, key: &str) -> f64 {
        self.0[key]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    /// Names of the violated sub-checks, or the error that stopped the check.
    pub violations: Vec<String>,
    pub seconds: f64,
}

impl CheckOutcome {
    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let measured: Vec<String> = self.measured.iter().map(|(k, v)| format!("{k}={v:.3e}")).collect();
        let mut s = format!("[{status}] {:>2} {} ({:.2}s) {}", self.id, self.name, self.seconds, measured.join(" "));
        if !self.violations.is_empty() {
            s.push_str(&format!(" violated: {}", self.violations.join(", ")));
        }
        s
    }
}

#[derive(Default)]
struct Eval<'a> {
    tol: Option<&'a Tolerances>,
    measured: BTreeMap<String, f64>,
    tolerances: BTreeMap<String, f64>,
    violations: Vec<String>,
}

impl<'a> Eval<'a> {
    fn new(tol: &'a Tolerances) -> Self {
        Eval {
            tol: Some(tol),
            ..Default::default()
        }
    }

    fn record(&mut self, key: &str, v: f64) {
        self.measured.insert(key.to_string(), v);
    }

    fn tol(&mut self, key: &str) -> f64 {
        let v = self.tol.map(|t| t.get(key)).unwrap_or(f64::NAN);
        self.tolerances.insert(key.to_string(), v);
        v
    }

    fn at_most(&mut self, key: &str, v: f64, tol_key: &str) {
        self.record(key, v);
        let tol = self.tol(tol_key);
        if !(v <= tol) {
            self.violations.push(key.to_string());
        }
    }

    fn within(&mut self, key: &str, v: f64, lo_key: &str, hi_key: &str) {
        self.record(key, v);
        let (lo, hi) = (self.tol(lo_key), self.tol(hi_key));
        if !(lo..=hi).contains(&v) {
            self.violations.push(key.to_string());
        }
    }

    fn require(&mut self, key: &str, ok: bool) {
        self.record(key, if ok { 1.0 } else { 0.0 });
        if !ok {
            self.violations.push(key.to_string());
        }
    }
}

pub fn check_name(id: u8) -> Option<&'static str> {
    CHECKS.iter().find(|c| c.0 == id).map(|c| c.1)
}

pub fn resolve(refs: &[CheckRef]) -> Result<Vec<u8>> {
    let mut ids: Vec<u8> = refs
        .iter()
        .map(|r| match r {
            CheckRef::Id(i) if check_name(*i).is_some() => Ok(*i),
            CheckRef::Name(n) => CHECKS
                .iter()
                .find(|c| c.1 == n)
                .map(|c| c.0)
                .ok_or_else(|| CliError::Config(format!("unknown check {n}"))),
            CheckRef::Id(i) => Err(CliError::Config(format!("unknown check {i}"))),
        })
        .collect::<Result<_>>()?;
    ids.sort_unstable();
    ids.dedup();
    Ok(ids)
}

/// Independent random stream per check, all from one seed.
fn rng_for(seed: u64, id: u8) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

pub fn run_check(id: u8, seed: u64, tol: &Tolerances) -> CheckOutcome {
    let start = Instant::now();
    let mut ev = Eval::new(tol);
    let mut rng = rng_for(seed, id);
    let res = match id {
        1 => amplitude_recursion(&mut ev, &mut rng),
        2 => s_matrix_algebra(&mut ev, &mut rng),
        3 => n2_dual_path(&mut ev, &mut rng),
        4 => free_limit(&mut ev, &mut rng),
        5 => tonks_limit(&mut ev, &mut rng),
        6 => cusp_condition(&mut ev, &mut rng),
        7 => pde(&mut ev, &mut rng),
        8 => initial_condition(&mut ev, &mut rng),
        9 => norm_conservation(&mut ev),
        10 => lattice_oracle(&mut ev),
        11 => determinism(&mut ev, seed),
        _ => Err(CliError::Config(format!("unknown check {id}"))),
    };
    if let Err(e) = res {
        ev.violations.push(format!("error: {e}"));
    }
    CheckOutcome {
        id,
        name: check_name(id).unwrap_or("unknown").to_string(),
        passed: ev.violations.is_empty(),
        measured: ev.measured,
        tolerances: ev.tolerances,
        violations: ev.violations,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_suite(cfg: &VerifyConfig, seed_override: Option<u64>) -> Result<Vec<CheckOutcome>> {
    let tol = Tolerances::with_overrides(&cfg.tolerances)?;
    let ids = match &cfg.checks {
        Some(refs) => resolve(refs)?,
        None => CHECKS.iter().map(|c| c.0).collect(),
    };
    let seed = seed_override.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    Ok(ids.into_iter().map(|id| run_check(id, seed, &tol)).collect())
}

fn relative(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

fn residual(r: ResidualReport) -> Result<f64> {
    r.residual
        .ok_or_else(|| CliError::Numerical(format!("|Psi| = {:e} at the noise floor", r.psi.norm())))
}

/// `n` sorted coordinates starting in `[lo, lo + 0.5)` with gaps drawn from `gap`.
fn sorted_points(rng: &mut ChaCha8Rng, n: usize, lo: f64, gap: (f64, f64)) -> Vec<f64> {
    let mut v = vec![rng.gen_range(lo..lo + 0.5)];
    for _ in 1..n {
        let last = *v.last().unwrap();
        v.push(last + rng.gen_range(gap.0..gap.1));
    }
    v
}

fn amplitude_recursion(ev: &mut Eval, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let ctx = ScatteringContext::new(rng.gen_range(0.2..5.0))?;
        let k: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
        for sigma in permutations(4) {
            let scale = ctx.amplitude_real(&sigma, &k).norm().max(1.0);
            for i in 1..4 {
                worst = worst.max(ctx.recursion_residual(&sigma, i, &k)? / scale);
            }
        }
    }
    ev.at_most("max_relative_residual", worst, "recursion");
    Ok(())
}

fn s_matrix_algebra(ev: &mut Eval, rng: &mut ChaCha8Rng) -> Result<()> {
    let one = Complex64::new(1.0, 0.0);
    let (mut unit, mut pair, mut conj): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..10_000 {
        let ctx = ScatteringContext::new(rng.gen_range(0.01..50.0))?;
        let k = rng.gen_range(-100.0..100.0);
        let s = ctx.s_real(k);
        unit = unit.max((s.norm() - 1.0).abs());
        pair = pair.max((s * ctx.s_real(-k) - one).norm());
        conj = conj.max((s.conj() - ctx.s_real(-k)).norm());
    }
    ev.at_most("unitarity", unit, "s_matrix");
    ev.at_most("inverse_pair", pair, "s_matrix");
    ev.at_most("conjugation", conj, "s_matrix");
    Ok(())
}

fn random_n2_query(rng: &mut ChaCha8Rng, c: f64, t: (f64, f64), eta: (f64, f64)) -> Result<PropagatorQuery> {
    let y = sorted_points(rng, 2, -1.0, (0.3, 1.5));
    let x = sorted_points(rng, 2, -0.5, (0.0, 1.5));
    Ok(PropagatorQuery::new(x, y, rng.gen_range(t.0..t.1), rng.gen_range(eta.0..eta.1), c)?)
}

fn n2_dual_path(ev: &mut Eval, rng: &mut ChaCha8Rng) -> Result<()> {
    let eps = 1e-10;
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let c = rng.gen_range(0.2..5.0);
        let q = random_n2_query(rng, c, (0.05, 1.0), (0.02, 0.2))?;
        let full = green_function(&q, &query_grid(&q, eps)?)?.value;
        let semi = n2_semianalytic(&q, &n2_grid(&q, eps)?)?;
        worst = worst.max(relative(full, semi));
    }
    ev.at_most("max_relative_difference", worst, "n2_dual_path");
    Ok(())
}

fn free_limit(ev: &mut Eval, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let q = random_n2_query(rng, 1e-6, (0.1, 0.5), (0.05, 0.2))?;
        let full = green_function(&q, &query_grid(&q, 1e-10)?)?.value;
        worst = worst.max(relative(full, free_boson_green(&q)?));
    }
    ev.at_most("max_relative_difference", worst, "free_limit");
    Ok(())
}

fn tonks_limit(ev: &mut Eval, rng: &mut ChaCha8Rng) -> Result<()> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..3 {
        let base = random_n2_query(rng, 1.0, (0.2, 0.5), (0.05, 0.15))?;
        let tonks = tonks_green(&base)?;
        let err: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&c| {
                let q = base.with_c(c)?;
                Ok((green_function(&q, &query_grid(&q, 1e-10)?)?.value - tonks).norm())
            })
            .collect::<Result<_>>()?;
        for w in err.windows(2) {
            let r = w[0] / w[1];
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    ev.within("min_ratio", lo, "tonks_ratio_min", "tonks_ratio_max");
    ev.within("max_ratio", hi, "tonks_ratio_min", "tonks_ratio_max");
    Ok(())
}

/// Diagonal point for pair `pair` (1-based) of an `n`-particle query.
fn diagonal_query(rng: &mut ChaCha8Rng, n: usize) -> Result<(PropagatorQuery, usize)> {
    let (c, t, eta, y) = if n == 2 {
        (
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.1..0.5),
            rng.gen_range(0.03..0.1),
            sorted_points(rng, 2, -0.5, (0.4, 1.5)),
        )
    } else {
        (
            rng.gen_range(0.8..2.5),
            rng.gen_range(0.15..0.35),
            rng.gen_range(0.06..0.12),
            sorted_points(rng, n, -0.5, (0.5, 0.9)),
        )
    };
    let pair = rng.gen_range(1..n);
    let u = rng.gen_range(-0.3..1.3);
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        x.push(if i + 1 == pair || i == pair {
            u
        } else if i + 1 < pair {
            u - 0.4 * (pair - i) as f64
        } else {
            u + 0.4 * (i - pair) as f64
        });
    }
    Ok((PropagatorQuery::new(x, y, t, eta, c)?, pair))
}

fn cusp_condition(ev: &mut Eval, rng: &mut ChaCha8Rng) -> Result<()> {
    for (n, eps, label) in [(2, 1e-10, "n2"), (3, 1e-8, "n3")] {
        let mut worst: f64 = 0.0;
        let mut first = None;
        for _ in 0..10 {
            let (q, pair) = diagonal_query(rng, n)?;
            let grid = query_grid(&q, eps)?;
            worst = worst.max(residual(cusp_residual(&q, pair, 1e-3, &grid)?)?);
            first.get_or_insert((q, pair, grid));
        }
        ev.at_most(&format!("{label}_max_residual"), worst, "cusp");
        let (q, pair, grid) = first.expect("ten draws");
        let r: Vec<f64> = [8e-3, 4e-3, 2e-3]
            .iter()
            .map(|&h| residual(cusp_residual(&q, pair, h, &grid)?))
            .collect::<Result<_>>()?;
        ev.within(&format!("{label}_order_ratio"), r[1] / r[2], "cusp_order_min", "cusp_order_max");
    }
    Ok(())
}

fn pde(ev: &mut Eval, rng: &mut ChaCha8Rng) -> Result<()> {
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let y = sorted_points(rng, 2, -0.5, (0.3, 1.0));
        let x = sorted_points(rng, 2, -0.5, (0.2, 1.0));
        let q = PropagatorQuery::new(x, y, rng.gen_range(0.3..0.8), rng.gen_range(0.03..0.1), rng.gen_range(0.5..3.0))?;
        let grid = query_grid(&q, 1e-10)?;
        worst = worst.max(residual(pde_residual(&q, 1e-3, 1e-3, &grid)?)?);
    }
    ev.at_most("max_residual", worst, "pde");
    Ok(())
}

fn packet_pair(a: f64, y: (f64, f64), p: (f64, f64)) -> Result<InitialState> {
    Ok(InitialState::new(vec![GaussianPacket::new(a, y.0, p.0)?, GaussianPacket::new(a, y.1, p.1)?])?)
}

fn initial_condition(ev: &mut Eval, rng: &mut ChaCha8Rng) -> Result<()> {
    let s = packet_pair(0.25, (0.0, 4.0), (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))?;
    ev.record("min_gap_ratio", s.min_gap_ratio());
    let xg = XGrid::new(-2.0, 6.0, 81)?;
    let c = rng.gen_range(0.5..3.0);
    let grid = spectral_grid(&s, xg.min, xg.max, 0.0, 0.0, c, 1e-10)?;
    let e = evolve_spectral_grid(&xg, &s, 0.0, 0.0, c, &grid, &GreenOptions::default())?;
    let (mut dev, mut peak): (f64, f64) = (0.0, 0.0);
    for (_, x, v) in e.ordered_samples() {
        let f = s.psi_free(&x);
        dev = dev.max((v - f).norm());
        peak = peak.max(f.norm());
    }
    ev.at_most("sup_deviation_over_peak", dev / peak, "initial_recovery");

    let z = [0.0, 3.0];
    let y = [z[0] + rng.gen_range(-0.3..0.3), z[1] + rng.gen_range(-0.3..0.3)];
    let sw = 0.5;
    let grid = QuadratureGrid::new(20.0, 801)?;
    let f = weak_test_function(&y, &z, sw);
    let err: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&eta| Ok((weak_initial_value(&y, &z, sw, eta, c, &grid)? - f).norm()))
        .collect::<Result<_>>()?;
    ev.within("weak_ratio_1", err[0] / err[1], "weak_ratio_min", "weak_ratio_max");
    ev.within("weak_ratio_2", err[1] / err[2], "weak_ratio_min", "weak_ratio_max");
    Ok(())
}

fn norm_conservation(ev: &mut Eval) -> Result<()> {
    let s = packet_pair(0.25, (0.0, 4.0), (1.0, -1.0))?;
    let xg = XGrid::new(-28.0, 32.0, 1201)?;
    let mut norms = Vec::new();
    let mut edge: f64 = 0.0;
    for t in [0.0, 0.25, 0.5, 1.0] {
        let grid = spectral_grid(&s, xg.min, xg.max, t, 0.0, 1.0, 1e-10)?;
        let e = evolve_spectral_grid(&xg, &s, t, 0.0, 1.0, &grid, &GreenOptions::default())?;
        let nr = norm_squared(&e);
        edge = edge.max(nr.boundary_ratio);
        norms.push(nr.norm_squared);
    }
    let drift = norms.iter().map(|n| (n - norms[0]).abs()).fold(0.0, f64::max);
    ev.record("norm_t0", norms[0]);
    ev.record("boundary_ratio", edge);
    ev.at_most("max_drift", drift, "norm_drift");
    Ok(())
}

/// Reference lattice scenario at width `w = w_cells * h`.
fn lattice_run(c: f64, w_cells: f64) -> Result<f64> {
    let s = packet_pair(0.25, (-1.5, 1.5), (1.0, -1.0))?;
    let (l, n_x, t) = (8.0, 513, 0.5);
    let h = 2.0 * l / (n_x - 1) as f64;
    let cfg = LatticeConfig {
        l,
        n_x,
        dt: h * h,
        w: w_cells * h,
        c,
    };
    let mut g = lattice::init_from_packets(&cfg, &s)?;
    lattice::run(&cfg, &mut g, t)?;
    if c == 0.0 {
        let exact = lattice::free_reference(&cfg, &s, t)?;
        return Ok(lattice::relative_l2_ordered(&cfg, &g.psi, &exact));
    }
    let xg = XGrid::new(-l, l, n_x)?;
    let grid = spectral_grid(&s, xg.min, xg.max, t, 0.0, c, 1e-10)?;
    let e = evolve_spectral_grid(&xg, &s, t, 0.0, c, &grid, &GreenOptions::default())?;
    Ok(lattice::compare_to_bethe(&cfg, &g, &e)?)
}

fn lattice_oracle(ev: &mut Eval) -> Result<()> {
    let d8 = lattice_run(1.0, 8.0)?;
    let d4 = lattice_run(1.0, 4.0)?;
    let d2 = lattice_run(1.0, 2.0)?;
    ev.at_most("reference_w4h", d4, "lattice_reference");
    ev.record("reference_w8h", d8);
    ev.record("reference_w2h", d2);
    ev.require("mollifier_trend", d8 > d4 && d4 > d2);
    ev.at_most("c0_control", lattice_run(0.0, 4.0)?, "lattice_free");
    Ok(())
}

fn scratch_dir(seed: u64, run: usize) -> PathBuf {
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    std::env::temp_dir().join(format!("deltagas-verify-{}-{nanos}-{seed}-{run}", std::process::id()))
}

fn determinism(ev: &mut Eval, seed: u64) -> Result<()> {
    let cfg = PropagatorConfig {
        n: Some(2),
        c: 1.0,
        t: 0.2,
        eta: 0.05,
        y: vec![0.0, 1.0],
        xgrid: Some(XGrid::new(-1.0, 2.0, 31)?),
        points: None,
        grid: GridSpec::default(),
        max_particles: None,
        format: Format::Csv,
    };
    let mut outputs = Vec::new();
    for run in 0..2 {
        let dir = scratch_dir(seed, run);
        let res = crate::commands::propagator(&cfg, &dir)
            .and_then(|_| Ok(std::fs::read(dir.join("propagator.csv"))?));
        let _ = std::fs::remove_dir_all(&dir);
        outputs.push(res?);
    }
    ev.record("csv_bytes", outputs[0].len() as f64);
    ev.require("byte_identical", outputs[0] == outputs[1]);
    Ok(())
}
