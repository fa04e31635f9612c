//! First-order eigenvalue variation under normal perturbations of a surface,
//! checked against finite differences, plus splitting and counting
//! experiments.

mod fd;
mod hadamard;
mod split;

use serde::Serialize;

pub use fd::{fd_slopes, FdLevel, FdSlopes, TrackedBranch, MIN_OVERLAP};
pub use hadamard::{c_of_lambda, hadamard_slopes, FormulaSlopes};
pub use split::{
    count_stability, interval_count, splitting_experiment, ClusterSplit, CountStability, IntervalCounts,
    SplitOptions, SplitReport,
};

use crate::error::Result;
use crate::geometry::{PerturbationField, Shape};
use crate::spectral::Solved;

/// Relative tolerance for formula-vs-FD agreement.
pub const SLOPE_REL_TOL: f64 = 0.05;
/// Absolute floor for formula-vs-FD agreement.
pub const SLOPE_ABS_TOL: f64 = 2e-3;

/// Formula and finite-difference slopes for one cluster, side by side.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport {
    pub field: String,
    pub formula: FormulaSlopes,
    pub fd: FdSlopes,
    /// `|formula − fd| / |fd|` per sorted branch, against the best FD estimate.
    pub rel_err: Vec<f64>,
    /// Every branch within `max(5% relative, 2e−3 absolute)`.
    pub agree: bool,
}

pub fn slopes_agree(formula: f64, fd: f64) -> bool {
    (formula - fd).abs() <= (SLOPE_REL_TOL * fd.abs()).max(SLOPE_ABS_TOL)
}

impl SlopeReport {
    pub fn new(field: &PerturbationField, formula: FormulaSlopes, fd: FdSlopes) -> Self {
        let best = fd.best();
        let rel_err = formula.slopes.iter().zip(best).map(|(f, d)| (f - d).abs() / d.abs()).collect();
        let agree = formula.slopes.len() == best.len()
            && formula.slopes.iter().zip(best).all(|(f, d)| slopes_agree(*f, *d));
        SlopeReport { field: field.describe(), formula, fd, rel_err, agree }
    }

    /// CSV with columns `cluster,branch,formula_slope,fd_slope,rel_err`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cluster,branch,formula_slope,fd_slope,rel_err\n");
        for (b, ((f, d), e)) in self.formula.slopes.iter().zip(self.fd.best()).zip(&self.rel_err).enumerate() {
            out.push_str(&format!("{},{},{:.12e},{:.12e},{:.6e}\n", self.formula.cluster, b, f, d, e));
        }
        out
    }
}

/// Run both slope computations for one cluster.
pub fn slope_report(
    shape: &Shape,
    reference: &Solved,
    cluster: usize,
    field: &PerturbationField,
    h_list: &[f64],
    resolution: usize,
) -> Result<SlopeReport> {
    let formula = hadamard_slopes(shape, reference, cluster, field)?;
    let fd = fd_slopes(shape, reference, cluster, field, h_list, resolution)?;
    Ok(SlopeReport::new(field, formula, fd))
}
