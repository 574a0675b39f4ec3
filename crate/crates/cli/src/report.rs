//! JSON report files.

use std::sync::Arc;

use normsol_core::solver::Monitor;
use normsol_core::{BoundsReport, RadialGrid, SolveReport, SolveStatus, StatePair};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub seed: u64,
    /// SHA-256 of the node positions and quadrature weights.
    pub grid_hash: String,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBlock {
    pub status: SolveStatus,
    pub energy: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub grad_residual: f64,
    pub pohozaev_residual: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub nl_pairing: f64,
    pub fiber_curvature: f64,
    pub iterations: usize,
    pub start_index: usize,
    pub state: Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub meta: Meta,
    /// Canonical configuration text.
    pub config_echo: String,
    pub result: ResultBlock,
    pub trail: Vec<Monitor>,
    pub bounds: Option<BoundsReport>,
}

pub fn grid_hash(grid: &RadialGrid) -> String {
    let mut h = Sha256::new();
    for x in grid.nodes().iter().chain(grid.weights()) {
        h.update(x.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl ReportFile {
    pub fn new(report: &SolveReport, config_echo: String, seed: u64, wall_clock_s: f64) -> Self {
        let grid = report.state.grid();
        let r = &report;
        Self {
            meta: Meta { version: ARTIFACT_VERSION.into(), seed, grid_hash: grid_hash(grid), wall_clock_s },
            config_echo,
            result: ResultBlock {
                status: r.status,
                energy: r.energy,
                lambda1: r.lambda1,
                lambda2: r.lambda2,
                grad_residual: r.grad_residual,
                pohozaev_residual: r.pohozaev_residual,
                kinetic: r.kinetic,
                potential: r.potential,
                nl_pairing: r.nl_pairing,
                fiber_curvature: r.fiber_curvature,
                iterations: r.iterations,
                start_index: r.start_index,
                state: Profile {
                    r: grid.nodes().to_vec(),
                    u: r.state.u.values().to_vec(),
                    v: r.state.v.values().to_vec(),
                },
            },
            trail: r.trail.clone(),
            bounds: r.bounds.clone(),
        }
    }

    /// Rebuilds the solver report on `grid`, which must match the stored nodes.
    pub fn to_solve_report(&self, grid: &Arc<RadialGrid>) -> Result<SolveReport, String> {
        let res = &self.result;
        if grid_hash(grid) != self.meta.grid_hash {
            return Err("grid_hash does not match the grid described by config_echo".into());
        }
        if res.state.r.as_slice() != grid.nodes() {
            return Err("stored nodes differ from the configured grid".into());
        }
        let state = StatePair::from_values(grid, res.state.u.clone(), res.state.v.clone())
            .map_err(|e| format!("stored state: {e}"))?;
        Ok(SolveReport {
            status: res.status,
            state,
            lambda1: res.lambda1,
            lambda2: res.lambda2,
            energy: res.energy,
            pohozaev_residual: res.pohozaev_residual,
            grad_residual: res.grad_residual,
            kinetic: res.kinetic,
            potential: res.potential,
            nl_pairing: res.nl_pairing,
            fiber_curvature: res.fiber_curvature,
            iterations: res.iterations,
            start_index: res.start_index,
            trail: self.trail.clone(),
            bounds: self.bounds.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports contain only finite numbers")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
