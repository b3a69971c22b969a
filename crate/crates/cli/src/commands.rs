//! The five subcommands. Each computes everything in memory first and then
//! commits its files in one step.

use std::path::Path;
use std::time::Instant;

use deltagas_core::evolution::{
    convolution_grid, evolve_convolution, evolve_spectral_grid, norm_squared, ordered_indices,
    spectral_grid_with_ceiling, InitialState, SimplexGrid, XGrid,
};
use deltagas_core::lattice::{self, LatticeConfig};
use deltagas_core::propagator::{green_function_with, green_on_grid, tonks_green, DEFAULT_MAX_PARTICLES};
use deltagas_core::quadrature::{build_grid_with_ceiling, DampingBudget};
use deltagas_core::spectral::pole_extent;
use deltagas_core::{GreenOptions, PropagatorQuery, QuadratureGrid};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::{EvolveConfig, Format, GridSpec, Method, OracleConfig, PropagatorConfig, Targets, TonksConfig};
use crate::error::{CliError, Result};
use crate::output::{field_csv, field_json, FileEntry, Staged};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

type Rows = Vec<(Vec<f64>, Complex64)>;

/// Per-point `|I_sigma|` lists, present for explicit points only.
type Ledger = Option<Vec<Vec<f64>>>;

fn sorted(mut x: Vec<f64>) -> Vec<f64> {
    x.sort_by(|a, b| a.total_cmp(b));
    x
}

fn emit_field(staged: &mut Staged, stem: &str, n: usize, rows: &Rows, format: Format) -> Result<String> {
    let (name, bytes) = match format {
        Format::Csv => (format!("{stem}.csv"), field_csv(n, rows)),
        Format::Json => (format!("{stem}.json"), field_json(rows)?),
    };
    staged.add(name.clone(), bytes);
    Ok(name)
}

fn options(max_particles: Option<usize>) -> GreenOptions {
    GreenOptions {
        max_particles: max_particles.unwrap_or(DEFAULT_MAX_PARTICLES),
    }
}

/// Largest `|x_i - y_j|` over the targets.
fn reach(targets: &Targets, y: &[f64]) -> f64 {
    let (lo, hi) = match targets {
        Targets::Grid(g) => (g.min, g.max),
        Targets::Points(ps) => ps.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        }),
    };
    y.iter().map(|&yj| (hi - yj).abs().max((lo - yj).abs())).fold(0.0, f64::max)
}

/// One momentum grid for every target of a propagator run.
pub fn propagator_grid(cfg: &PropagatorConfig, targets: &Targets) -> Result<QuadratureGrid> {
    if let Some((k_max, n_k)) = cfg.grid.explicit() {
        return Ok(QuadratureGrid::new(k_max, n_k)?);
    }
    if cfg.eta <= 0.0 {
        return Err(CliError::Config("the propagator quadrature needs eta > 0".into()));
    }
    let pole = if cfg.y.len() > 1 {
        pole_extent(cfg.c, cfg.grid.eps)
    } else {
        0.0
    };
    let tau = Complex64::new(cfg.t, -cfg.eta).norm();
    let budget = DampingBudget::new(cfg.eta, reach(targets, &cfg.y) + pole, cfg.grid.eps).with_t_scale(tau);
    Ok(build_grid_with_ceiling(&budget, cfg.grid.ceiling())?)
}

fn grid_echo(spec: &GridSpec, grid: &QuadratureGrid) -> serde_json::Value {
    json!({ "requested": spec, "k_max": grid.k_max, "n_k": grid.n_k, "dk": grid.dk() })
}

/// Propagator values on the requested targets, with the per-permutation
/// magnitudes for explicit points.
pub fn propagator_values(cfg: &PropagatorConfig) -> Result<(Rows, QuadratureGrid, Ledger)> {
    let targets = cfg.validate()?;
    let n = cfg.y.len();
    let grid = propagator_grid(cfg, &targets)?;
    let opts = options(cfg.max_particles);
    let template = PropagatorQuery::new(cfg.y.clone(), cfg.y.clone(), cfg.t, cfg.eta, cfg.c)?;
    match targets {
        Targets::Points(ps) => {
            let mut rows = Vec::with_capacity(ps.len());
            let mut ledger = Vec::with_capacity(ps.len());
            for x in ps {
                let q = template.with_x(x)?;
                let g = green_function_with(&q, &grid, &opts)?;
                rows.push((q.x().to_vec(), g.value));
                ledger.push(g.term_magnitudes);
            }
            Ok((rows, grid, Some(ledger)))
        }
        Targets::Grid(xg) => {
            let axis = xg.axis();
            let field = green_on_grid(&template, &axis, &grid, &opts)?;
            let rows = ordered_rows(n, &axis, &field);
            Ok((rows, grid, None))
        }
    }
}

fn ordered_rows(n: usize, axis: &[f64], field: &[Complex64]) -> Rows {
    let np = axis.len();
    ordered_indices(n, np)
        .into_iter()
        .map(|idx| {
            let flat = idx.iter().fold(0, |acc, &i| acc * np + i);
            (idx.iter().map(|&i| axis[i]).collect(), field[flat])
        })
        .collect()
}

pub fn propagator(cfg: &PropagatorConfig, out: &Path) -> Result<Vec<FileEntry>> {
    let start = Instant::now();
    let (rows, grid, ledger) = propagator_values(cfg)?;
    let mut staged = Staged::new();
    let file = emit_field(&mut staged, "propagator", cfg.y.len(), &rows, cfg.format)?;
    let manifest = json!({
        "command": "propagator",
        "version": VERSION,
        "config": cfg,
        "grid": grid_echo(&cfg.grid, &grid),
        "term_magnitudes": ledger,
        "data": file,
        "rows": rows.len(),
        "wall_clock_s": start.elapsed().as_secs_f64(),
    });
    staged.commit(out, manifest)
}

pub fn tonks_values(cfg: &TonksConfig) -> Result<Rows> {
    let targets = cfg.validate()?;
    // the coupling does not enter the determinant
    let template = PropagatorQuery::new(cfg.y.clone(), cfg.y.clone(), cfg.t, cfg.eta, 1.0)?;
    let points: Vec<Vec<f64>> = match targets {
        Targets::Points(ps) => ps.into_iter().map(sorted).collect(),
        Targets::Grid(xg) => {
            let axis = xg.axis();
            ordered_indices(cfg.y.len(), xg.points)
                .into_iter()
                .map(|idx| idx.iter().map(|&i| axis[i]).collect())
                .collect()
        }
    };
    points
        .into_iter()
        .map(|x| {
            let q = template.with_x(x.clone())?;
            Ok((x, tonks_green(&q)?))
        })
        .collect()
}

pub fn tonks(cfg: &TonksConfig, out: &Path) -> Result<Vec<FileEntry>> {
    let start = Instant::now();
    let rows = tonks_values(cfg)?;
    let mut staged = Staged::new();
    let file = emit_field(&mut staged, "tonks", cfg.y.len(), &rows, cfg.format)?;
    let manifest = json!({
        "command": "tonks",
        "version": VERSION,
        "config": cfg,
        "data": file,
        "rows": rows.len(),
        "wall_clock_s": start.elapsed().as_secs_f64(),
    });
    staged.commit(out, manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct SliceReport {
    pub index: usize,
    pub t: f64,
    pub file: String,
    pub k_max: f64,
    pub n_k: usize,
    pub truncation_bound: f64,
    pub overlap_bound: f64,
    pub norm_squared: f64,
    pub boundary_ratio: f64,
    pub coverage_ok: bool,
}

fn evolve_grid(
    spec: &GridSpec,
    state: &InitialState,
    xg: &XGrid,
    t: f64,
    eta: f64,
    c: f64,
    method: Method,
) -> Result<QuadratureGrid> {
    if let Some((k_max, n_k)) = spec.explicit() {
        return Ok(QuadratureGrid::new(k_max, n_k)?);
    }
    Ok(match method {
        Method::Spectral => spectral_grid_with_ceiling(state, xg.min, xg.max, t, eta, c, spec.eps, spec.ceiling())?,
        Method::Convolution => convolution_grid(state, xg.min, xg.max, t, eta, c, spec.eps)?,
    })
}

pub fn evolve(cfg: &EvolveConfig, out: &Path) -> Result<Vec<FileEntry>> {
    let start = Instant::now();
    let state = cfg.validate()?;
    let opts = options(cfg.max_particles);
    let mut staged = Staged::new();
    let mut slices = Vec::with_capacity(cfg.t.len());
    for (index, &t) in cfg.t.iter().enumerate() {
        let grid = evolve_grid(&cfg.grid, &state, &cfg.xgrid, t, cfg.eta, cfg.c, cfg.method)?;
        let evolved = match cfg.method {
            Method::Spectral => evolve_spectral_grid(&cfg.xgrid, &state, t, cfg.eta, cfg.c, &grid, &opts)?,
            Method::Convolution => evolve_convolution(
                &cfg.xgrid,
                &state,
                t,
                cfg.eta,
                cfg.c,
                &grid,
                &SimplexGrid::for_grid(&grid, cfg.grid.eps),
            )?,
        };
        let nr = norm_squared(&evolved);
        let rows: Rows = evolved.ordered_samples().into_iter().map(|(_, x, v)| (x, v)).collect();
        let file = emit_field(&mut staged, &format!("psi_t{index}"), cfg.n, &rows, cfg.format)?;
        slices.push(SliceReport {
            index,
            t,
            file,
            k_max: grid.k_max,
            n_k: grid.n_k,
            truncation_bound: state.truncation_bound(),
            overlap_bound: state.overlap_bound(),
            norm_squared: nr.norm_squared,
            boundary_ratio: nr.boundary_ratio,
            coverage_ok: nr.coverage_ok(),
        });
    }
    let manifest = json!({
        "command": "evolve",
        "version": VERSION,
        "config": cfg,
        "min_gap_ratio": state.min_gap_ratio(),
        "well_separated": state.is_well_separated(),
        "slices": slices,
        "wall_clock_s": start.elapsed().as_secs_f64(),
    });
    staged.commit(out, manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSlice {
    pub t: f64,
    pub relative_l2: f64,
    pub reference: &'static str,
    pub k_max: Option<f64>,
    pub n_k: Option<usize>,
    pub steps: usize,
    pub dt: f64,
    pub norm_drift: f64,
    pub max_step_norm_drift: f64,
    pub max_symmetry_residual: f64,
    pub max_solver_iterations: usize,
    pub cusp_ratio: Option<f64>,
}

/// Runs the lattice to each requested time and compares with the Bethe-Ansatz
/// evolution on the lattice nodes (or the exact free evolution at `c = 0`).
pub fn oracle_slices(cfg: &OracleConfig) -> Result<Vec<OracleSlice>> {
    let (state, lat) = cfg.validate()?;
    let nodes = cfg.nodes();
    let mut grid_state = lattice::init_from_packets(&lat, &state)?;
    let mut out = Vec::with_capacity(cfg.t.len());
    for &t in &cfg.t {
        let stats = lattice::run(&lat, &mut grid_state, t)?;
        let (relative_l2, reference, grid) = compare(cfg, &lat, &state, &nodes, &grid_state, t)?;
        let cusp_ratio = if cfg.c > 0.0 {
            lattice::cusp_ratio(&lat, &grid_state.psi).ok()
        } else {
            None
        };
        out.push(OracleSlice {
            t,
            relative_l2,
            reference,
            k_max: grid.map(|g| g.k_max),
            n_k: grid.map(|g| g.n_k),
            steps: stats.steps,
            dt: stats.dt,
            norm_drift: stats.norm_drift,
            max_step_norm_drift: stats.max_step_norm_drift,
            max_symmetry_residual: stats.max_symmetry_residual,
            max_solver_iterations: stats.max_iterations,
            cusp_ratio,
        });
    }
    Ok(out)
}

fn compare(
    cfg: &OracleConfig,
    lat: &LatticeConfig,
    state: &InitialState,
    nodes: &XGrid,
    grid_state: &lattice::GridState,
    t: f64,
) -> Result<(f64, &'static str, Option<QuadratureGrid>)> {
    if cfg.c == 0.0 {
        let exact = lattice::free_reference(lat, state, t)?;
        return Ok((lattice::relative_l2_ordered(lat, &grid_state.psi, &exact), "free", None));
    }
    let grid = evolve_grid(&cfg.grid, state, nodes, t, cfg.eta, cfg.c, Method::Spectral)?;
    let evolved = evolve_spectral_grid(nodes, state, t, cfg.eta, cfg.c, &grid, &GreenOptions::default())?;
    Ok((lattice::compare_to_bethe(lat, grid_state, &evolved)?, "bethe", Some(grid)))
}

pub fn oracle_n2(cfg: &OracleConfig, out: &Path) -> Result<Vec<FileEntry>> {
    let start = Instant::now();
    let slices = oracle_slices(cfg)?;
    let mut staged = Staged::new();
    let mut report = serde_json::to_vec_pretty(&json!({ "slices": slices }))?;
    report.push(b'\n');
    staged.add("oracle_report.json", report);
    let manifest = json!({
        "command": "oracle-n2",
        "version": VERSION,
        "config": cfg,
        "solver_tolerance": lattice::SOLVER_TOL,
        "data": "oracle_report.json",
        "wall_clock_s": start.elapsed().as_secs_f64(),
    });
    staged.commit(out, manifest)
}
