//! JSON run configurations. Every block rejects unknown keys.

use std::collections::BTreeMap;
use std::path::Path;

use deltagas_core::evolution::{GaussianPacket, InitialState, XGrid};
use deltagas_core::lattice::LatticeConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const DEFAULT_EPS: f64 = 1e-10;

fn default_eps() -> f64 {
    DEFAULT_EPS
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Momentum grid request. Either a tolerance (the budget picks the grid) or
/// an explicit `k_max` / `n_k` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub k_max: Option<f64>,
    #[serde(default)]
    pub n_k: Option<usize>,
    /// Node ceiling per axis for the automatic grid.
    #[serde(default)]
    pub max_nodes: Option<usize>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            eps: DEFAULT_EPS,
            k_max: None,
            n_k: None,
            max_nodes: None,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1e-2) {
            return Err(CliError::Config(format!("grid.eps = {} outside (0, 1e-2]", self.eps)));
        }
        if self.k_max.is_some() != self.n_k.is_some() {
            return Err(CliError::Config("grid.k_max and grid.n_k go together".into()));
        }
        Ok(())
    }

    pub fn explicit(&self) -> Option<(f64, usize)> {
        self.k_max.zip(self.n_k)
    }

    pub fn ceiling(&self) -> usize {
        self.max_nodes.unwrap_or(deltagas_core::quadrature::DEFAULT_NODE_CEILING)
    }
}

/// Where to evaluate: a tensor grid (ordered points only are emitted) or a
/// list of explicit points.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Grid(XGrid),
    Points(Vec<Vec<f64>>),
}

fn targets(n: usize, xgrid: Option<XGrid>, points: &Option<Vec<Vec<f64>>>) -> Result<Targets> {
    match (xgrid, points) {
        (Some(g), None) => {
            g.validate()?;
            Ok(Targets::Grid(g))
        }
        (None, Some(p)) => {
            if p.is_empty() {
                return Err(CliError::Config("points list is empty".into()));
            }
            if let Some(bad) = p.iter().find(|x| x.len() != n || x.iter().any(|v| !v.is_finite())) {
                return Err(CliError::Config(format!("point {bad:?} is not {n} finite coordinates")));
            }
            Ok(Targets::Points(p.clone()))
        }
        _ => Err(CliError::Config("give exactly one of xgrid or points".into())),
    }
}

fn check_n(n: Option<usize>, got: usize, what: &str) -> Result<usize> {
    if got == 0 {
        return Err(CliError::Config(format!("{what} is empty")));
    }
    match n {
        Some(n) if n != got => Err(CliError::Config(format!("n = {n} but {what} has {got} entries"))),
        _ => Ok(got),
    }
}

fn check_time(t: f64, eta: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(CliError::Config(format!("t = {t} must be finite and >= 0")));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(CliError::Config(format!("eta = {eta} must be finite and >= 0")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorConfig {
    #[serde(default)]
    pub n: Option<usize>,
    pub c: f64,
    pub t: f64,
    pub eta: f64,
    pub y: Vec<f64>,
    #[serde(default)]
    pub xgrid: Option<XGrid>,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub max_particles: Option<usize>,
    #[serde(default)]
    pub format: Format,
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<Targets> {
        let n = check_n(self.n, self.y.len(), "y")?;
        check_time(self.t, self.eta)?;
        self.grid.validate()?;
        targets(n, self.xgrid, &self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TonksConfig {
    #[serde(default)]
    pub n: Option<usize>,
    pub t: f64,
    #[serde(default)]
    pub eta: f64,
    pub y: Vec<f64>,
    #[serde(default)]
    pub xgrid: Option<XGrid>,
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub format: Format,
}

impl TonksConfig {
    pub fn validate(&self) -> Result<Targets> {
        let n = check_n(self.n, self.y.len(), "y")?;
        check_time(self.t, self.eta)?;
        targets(n, self.xgrid, &self.points)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Spectral,
    Convolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub n: usize,
    pub c: f64,
    pub t: Vec<f64>,
    #[serde(default)]
    pub eta: f64,
    pub packets: Vec<GaussianPacket>,
    #[serde(default)]
    pub grid: GridSpec,
    pub xgrid: XGrid,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub max_particles: Option<usize>,
    #[serde(default)]
    pub format: Format,
}

fn initial_state(n: usize, packets: &[GaussianPacket]) -> Result<InitialState> {
    check_n(Some(n), packets.len(), "packets")?;
    Ok(InitialState::new(packets.to_vec())?)
}

fn check_times(ts: &[f64], eta: f64) -> Result<()> {
    if ts.is_empty() {
        return Err(CliError::Config("time list is empty".into()));
    }
    ts.iter().try_for_each(|&t| check_time(t, eta))
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<InitialState> {
        check_times(&self.t, self.eta)?;
        self.grid.validate()?;
        self.xgrid.validate()?;
        initial_state(self.n, &self.packets)
    }
}

/// Lattice block of the oracle config; the coupling comes from the top level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    #[serde(rename = "L")]
    pub l: f64,
    pub n_x: usize,
    pub dt: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub n: usize,
    pub c: f64,
    pub t: Vec<f64>,
    #[serde(default)]
    pub eta: f64,
    pub packets: Vec<GaussianPacket>,
    #[serde(default)]
    pub grid: GridSpec,
    /// Must equal the lattice nodes when given.
    #[serde(default)]
    pub xgrid: Option<XGrid>,
    pub lattice: LatticeBlock,
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(InitialState, LatticeConfig)> {
        if self.n != 2 {
            return Err(CliError::Config(format!("the lattice oracle is two-particle only, got n = {}", self.n)));
        }
        check_times(&self.t, self.eta)?;
        if self.t.windows(2).any(|w| w[1] < w[0]) {
            return Err(CliError::Config("oracle times must be non-decreasing".into()));
        }
        self.grid.validate()?;
        let lat = LatticeConfig {
            l: self.lattice.l,
            n_x: self.lattice.n_x,
            dt: self.lattice.dt,
            w: self.lattice.w,
            c: self.c,
        };
        lat.validate()?;
        let nodes = XGrid {
            min: -lat.l,
            max: lat.l,
            points: lat.n_x,
        };
        if let Some(g) = self.xgrid {
            if g != nodes {
                return Err(CliError::Config(format!("xgrid {g:?} differs from the lattice nodes {nodes:?}")));
            }
        }
        Ok((initial_state(self.n, &self.packets)?, lat))
    }

    pub fn nodes(&self) -> XGrid {
        XGrid {
            min: -self.lattice.l,
            max: self.lattice.l,
            points: self.lattice.n_x,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Check ids or names; all when absent.
    #[serde(default)]
    pub checks: Option<Vec<CheckRef>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CheckRef {
    Id(u8),
    Name(String),
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}
