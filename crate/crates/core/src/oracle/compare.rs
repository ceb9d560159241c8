//! Comparison of the oracle values with the bound `V <= U / p0_bar`.

use serde::{Deserialize, Serialize};

use super::hjb::{GridValueTable, NodeKind};
use crate::lyapunov::CandidateMrf;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub x: Vec<f64>,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub p0_bar: f64,
    pub oracle_tol: f64,
    pub checked: usize,
    /// Largest `V_h(x) - U(x) / p0_bar` over the checked nodes.
    pub worst_margin: f64,
    pub worst_at: Vec<f64>,
    pub violations: Vec<BoundViolation>,
}

impl BoundReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `V_h(x) <= U(x) / p0_bar + oracle_tol` on every free node, i.e.
/// outside the target and outside any prescribed collar.
pub fn compare_bound(table: &GridValueTable, mrf: &CandidateMrf, p0_bar: f64, oracle_tol: f64) -> BoundReport {
    let mut report = BoundReport {
        p0_bar,
        oracle_tol,
        checked: 0,
        worst_margin: f64::NEG_INFINITY,
        worst_at: Vec::new(),
        violations: Vec::new(),
    };
    for (flat, kind) in table.kinds.iter().enumerate() {
        if *kind != NodeKind::Free {
            continue;
        }
        let x = table.grid.point(flat);
        let value = table.values[flat];
        let bound = mrf.value(&x) / p0_bar;
        let margin = value - bound;
        report.checked += 1;
        if margin > report.worst_margin || report.worst_at.is_empty() {
            report.worst_margin = margin;
            report.worst_at = x.clone();
        }
        if !(margin <= oracle_tol) {
            report.violations.push(BoundViolation { x, value, bound });
        }
    }
    report
}

/// Largest oracle value and largest bound over the free nodes selected by `keep`.
pub fn region_maxima(
    table: &GridValueTable,
    mrf: &CandidateMrf,
    p0_bar: f64,
    keep: impl Fn(&[f64]) -> bool,
) -> (usize, f64, f64) {
    let mut out = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (flat, kind) in table.kinds.iter().enumerate() {
        let x = table.grid.point(flat);
        if *kind != NodeKind::Free || !keep(&x) {
            continue;
        }
        out.0 += 1;
        out.1 = out.1.max(table.values[flat]);
        out.2 = out.2.max(mrf.value(&x) / p0_bar);
    }
    out
}
