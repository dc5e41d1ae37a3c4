//! Managerial metrics of a solved instance, recounted from the plans.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lbbd::{RunStatus, SolveReport};
use crate::plan::Plan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSummary {
    pub window: usize,
    pub cost_cents: i64,
    pub shifts: usize,
    pub migration_min: u64,
    pub travel_min: u64,
    pub shift_min: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub instance: String,
    pub status: RunStatus,
    pub cost_cents: i64,
    pub lb_cents: i64,
    pub gap: Option<f64>,
    pub iterations: usize,
    pub cuts_bd_feas: usize,
    pub cuts_bd_opt: usize,
    pub cuts_lbbd_feas: usize,
    pub cuts_lbbd_opt: usize,
    pub columns: usize,
    pub shifts: usize,
    /// Shifts per duration in minutes.
    pub histogram: BTreeMap<u32, usize>,
    /// Migration plus travel minutes over paid shift minutes; 0 without shifts.
    pub working_fraction: f64,
    pub windows: Vec<WindowSummary>,
}

/// Per-window totals. Time between consecutive visits counts as travel.
fn window_summary(window: usize, plan: &Plan) -> WindowSummary {
    let mut migration = 0u64;
    let mut travel = 0u64;
    let mut paid = 0u64;
    for shift in &plan.shifts {
        paid += shift.duration_min as u64;
        for (i, v) in shift.visits.iter().enumerate() {
            migration += (v.end_min - v.start_min) as u64;
            if i > 0 {
                travel += v.start_min.saturating_sub(shift.visits[i - 1].end_min) as u64;
            }
        }
    }
    WindowSummary {
        window,
        cost_cents: plan.cost_cents,
        shifts: plan.shifts.len(),
        migration_min: migration,
        travel_min: travel,
        shift_min: paid,
    }
}

pub fn summarize(solution: &SolveReport) -> Report {
    let windows: Vec<WindowSummary> = solution
        .plans
        .iter()
        .enumerate()
        .map(|(w, p)| window_summary(w, p))
        .collect();
    let mut histogram = BTreeMap::new();
    for shift in solution.plans.iter().flat_map(|p| &p.shifts) {
        *histogram.entry(shift.duration_min).or_insert(0) += 1;
    }
    let worked: u64 = windows.iter().map(|w| w.migration_min + w.travel_min).sum();
    let paid: u64 = windows.iter().map(|w| w.shift_min).sum();
    Report {
        instance: solution.instance.clone(),
        status: solution.status,
        cost_cents: windows.iter().map(|w| w.cost_cents).sum(),
        lb_cents: solution.lower_bound_cents,
        gap: solution.gap,
        iterations: solution.iterations,
        cuts_bd_feas: solution.cuts.benders_feas,
        cuts_bd_opt: solution.cuts.benders_opt,
        cuts_lbbd_feas: solution.cuts.lbbd_feas,
        cuts_lbbd_opt: solution.cuts.lbbd_opt,
        columns: solution.columns,
        shifts: windows.iter().map(|w| w.shifts).sum(),
        histogram,
        working_fraction: if paid == 0 { 0.0 } else { worked as f64 / paid as f64 },
        windows,
    }
}

pub const CSV_HEADER: &str =
    "instance,status,cost_cents,lb_cents,gap,iterations,cuts_bd_feas,cuts_bd_opt,cuts_lbbd_feas,cuts_lbbd_opt,columns,shifts,wf";

impl Report {
    pub fn csv_row(&self) -> String {
        let status = serde_json::to_value(self.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let gap = self.gap.map(|g| format!("{g:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.6}",
            self.instance.replace(',', ";"),
            status,
            self.cost_cents,
            self.lb_cents,
            gap,
            self.iterations,
            self.cuts_bd_feas,
            self.cuts_bd_opt,
            self.cuts_lbbd_feas,
            self.cuts_lbbd_opt,
            self.columns,
            self.shifts,
            self.working_fraction
        )
    }
}
