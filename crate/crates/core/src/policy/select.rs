use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use super::{FitReport, Method};

/// One (method, K) cell of the model-selection grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub method: Method,
    pub k: usize,
    pub report: FitReport,
    pub silhouette: f64,
}

fn rank(a: &GridCell, b: &GridCell) -> Ordering {
    a.report
        .lift
        .total_cmp(&b.report.lift)
        .then(a.report.nagelkerke_r2.total_cmp(&b.report.nagelkerke_r2))
        .then(a.silhouette.total_cmp(&b.silhouette))
}

/// Index of the preferred cell: highest lift, then highest pseudo-R², then
/// highest silhouette. Remaining ties keep the earliest cell.
pub fn select_model(grid: &[GridCell]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in grid.iter().enumerate() {
        if best.map_or(true, |b| rank(c, &grid[b]) == Ordering::Greater) {
            best = Some(i);
        }
    }
    best
}
