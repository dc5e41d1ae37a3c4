//! Column generation for the per-window shift-selection LP.
//!
//! Restricted master layout (rows in this order):
//!
//! * one `>=` coverage row per endpoint side, rhs `m̄` of the side's pair;
//! * one `<=` technician row per region, rhs `η_r`;
//! * one `<=` engineer row, rhs `α·η_eng`.
//!
//! Every column is a shift; its coefficients are its endpoint counts, a 1 in
//! its region's technician row and a 1 in the engineer row.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{MigrateError, Result};
use crate::geometry::Geometry;
use crate::instance::{Instance, Network};
use crate::lp::{solve_lp_warm, LpModel, LpSolution, LpStatus, Row, Sense};
use crate::pricing::{price_general, price_ordered, PricingInput, RC_TOL};

/// Reduced-cost threshold used while certifying feasibility, tight enough that
/// the resulting certificates pass a 1e-7 Farkas check.
pub const PHASE_ONE_RC_TOL: f64 = -1e-9;
/// Phase-one optimum at or below this value means the window is coverable.
pub const PHASE_ONE_FEAS_TOL: f64 = 1e-7;

/// A shift column, shared by all windows.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShiftColumn {
    pub region: usize,
    pub duration: u32,
    /// `(side, endpoints)` with positive counts, ascending by side.
    pub counts: Vec<(usize, u32)>,
}

impl ShiftColumn {
    pub fn n_cir(&self) -> u32 {
        self.counts.iter().map(|&(_, n)| n).sum()
    }
}

/// Checks that a column describes a shift some technician can actually work.
///
/// The travel requirement is the shortest simple path through a superset of
/// the sites with positive counts (zero-count sites may be passed through).
pub fn validate_column(inst: &Instance, geom: &Geometry, col: &ShiftColumn) -> bool {
    let net = &inst.network;
    let res = &inst.resources;
    let Some(g) = geom.regions.get(col.region) else {
        return false;
    };
    if !res.durations_min.contains(&col.duration) || col.counts.is_empty() {
        return false;
    }
    let mut mask = 0usize;
    for (k, &(side, n)) in col.counts.iter().enumerate() {
        if side >= net.num_sides() || n == 0 {
            return false;
        }
        if k > 0 && col.counts[k - 1].0 >= side {
            return false;
        }
        let sd = net.side(side);
        let Some(local) = g.local(sd.site) else {
            return false;
        };
        if n > net.pairs[sd.pair].circuits {
            return false;
        }
        if col.counts.iter().any(|&(o, _)| o == Network::opposite_side(side)) {
            return false;
        }
        mask |= 1 << local;
    }
    let work = res.theta_min as u64 * col.n_cir() as u64;
    g.tsup(mask) as u64 + work <= col.duration as u64
}

/// Duals of the restricted master, split by row family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duals {
    /// Coverage duals per side (non-negative).
    pub cover: Vec<f64>,
    /// Technician-row duals per region (non-positive).
    pub tech: Vec<f64>,
    /// Engineer-row dual (non-positive).
    pub eng: f64,
}

impl Duals {
    pub fn zero(inst: &Instance) -> Duals {
        Duals {
            cover: vec![0.0; inst.network.num_sides()],
            tech: vec![0.0; inst.num_regions()],
            eng: 0.0,
        }
    }

    fn from_rows(inst: &Instance, y: &[f64]) -> Duals {
        let s = inst.network.num_sides();
        let r = inst.num_regions();
        Duals {
            cover: y[..s].to_vec(),
            tech: y[s..s + r].to_vec(),
            eng: y[s + r],
        }
    }

    /// Dual objective coefficient per pair: the sum of its two side duals.
    pub fn pair_coeffs(&self) -> Vec<f64> {
        self.cover.chunks(2).map(|c| c[0] + c[1]).collect()
    }

    /// Dual objective contribution of the resource rows.
    pub fn resource_term(&self, inst: &Instance) -> f64 {
        let res = &inst.resources;
        let tech: f64 = self
            .tech
            .iter()
            .zip(&res.eta_tech)
            .map(|(y, &eta)| y * eta as f64)
            .sum();
        tech + self.eng * res.shift_cap() as f64
    }

    /// `yᵀb` at the given pair demand.
    pub fn objective(&self, inst: &Instance, m_bar: &[u32]) -> f64 {
        let cover: f64 = self
            .pair_coeffs()
            .iter()
            .zip(m_bar)
            .map(|(c, &m)| c * m as f64)
            .sum();
        cover + self.resource_term(inst)
    }
}

/// Deduplicating, insertion-ordered column store.
#[derive(Debug, Clone, Default)]
pub struct ColumnPool {
    columns: Vec<ShiftColumn>,
    index: HashMap<ShiftColumn, usize>,
}

impl ColumnPool {
    pub fn new() -> ColumnPool {
        ColumnPool::default()
    }

    /// Adds the column; returns false if it was already present.
    pub fn insert(&mut self, col: ShiftColumn) -> bool {
        if self.index.contains_key(&col) {
            return false;
        }
        self.index.insert(col.clone(), self.columns.len());
        self.columns.push(col);
        true
    }

    pub fn contains(&self, col: &ShiftColumn) -> bool {
        self.index.contains_key(col)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[ShiftColumn] {
        &self.columns
    }

    pub fn clear(&mut self) {
        self.columns.clear();
        self.index.clear();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PricingMode {
    /// Ordered-path pricer only (heuristic once a region has 3+ sites).
    Ordered,
    /// Ordered-path pricer until it stalls, then the exact pricer to certify.
    #[default]
    Hybrid,
    /// Exact pricer only.
    General,
}

/// Row count of the restricted master.
pub fn rmp_rows(inst: &Instance) -> usize {
    inst.network.num_sides() + inst.num_regions() + 1
}

/// Dense coefficient vector of a column in the restricted master.
pub fn column_coeffs(inst: &Instance, col: &ShiftColumn) -> Vec<f64> {
    let s = inst.network.num_sides();
    let mut a = vec![0.0; rmp_rows(inst)];
    for &(side, n) in &col.counts {
        a[side] = n as f64;
    }
    a[s + col.region] = 1.0;
    a[s + inst.num_regions()] = 1.0;
    a
}

fn rmp_skeleton(inst: &Instance, m_bar: &[u32]) -> LpModel {
    assert_eq!(m_bar.len(), inst.network.num_pairs(), "one demand entry per pair");
    let res = &inst.resources;
    let mut lp = LpModel::new();
    for side in 0..inst.network.num_sides() {
        lp.add_row(Row::new(vec![], Sense::Ge, m_bar[side / 2] as f64));
    }
    for &eta in &res.eta_tech {
        lp.add_row(Row::new(vec![], Sense::Le, eta as f64));
    }
    lp.add_row(Row::new(vec![], Sense::Le, res.shift_cap() as f64));
    lp
}

/// Restricted master over `pool` for pair demand `m_bar`; column `j` is `pool[j]`.
pub fn build_rmp(inst: &Instance, m_bar: &[u32], pool: &ColumnPool) -> LpModel {
    let mut lp = rmp_skeleton(inst, m_bar);
    for col in pool.columns() {
        lp.add_column(inst.shift_cost(col.duration) as f64, &column_coeffs(inst, col));
    }
    lp
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitOutcome {
    pub feasible: bool,
    /// Phase-one duals; a Farkas certificate when infeasible.
    pub duals: Duals,
    /// Phase-one optimum (sum of artificials).
    pub value: f64,
    pub columns_added: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CgStatus {
    Feasible { value: f64, duals: Duals },
    Infeasible { certificate: Duals },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgResult {
    pub status: CgStatus,
    pub columns_generated: usize,
    pub iterations: usize,
}

/// Prices all regions once; returns how many new columns entered the pool
/// (and the RMP).
fn price_round(
    inst: &Instance,
    geom: &Geometry,
    duals: &Duals,
    pool: &mut ColumnPool,
    lp: &mut LpModel,
    ordered: bool,
    phase_one: bool,
) -> usize {
    let threshold = if phase_one { PHASE_ONE_RC_TOL } else { RC_TOL };
    let mut added = 0;
    for region in 0..inst.num_regions() {
        let input = PricingInput {
            region,
            duals,
            phase_one,
            threshold,
        };
        let cols = if ordered {
            price_ordered(inst, geom, &input)
        } else {
            price_general(inst, geom, &input)
        };
        for pc in cols {
            if pool.insert(pc.column.clone()) {
                let obj = if phase_one {
                    0.0
                } else {
                    inst.shift_cost(pc.column.duration) as f64
                };
                lp.add_column(obj, &column_coeffs(inst, &pc.column));
                added += 1;
            }
        }
    }
    added
}

/// Runs column generation on `lp` until the finishing pricer finds nothing.
fn generate(
    inst: &Instance,
    geom: &Geometry,
    lp: &mut LpModel,
    pool: &mut ColumnPool,
    mode: PricingMode,
    phase_one: bool,
) -> Result<(LpSolution, usize, usize)> {
    let mut basis = None;
    let mut generated = 0;
    let mut iterations = 0;
    let mut ordered_stage = mode != PricingMode::General;
    loop {
        let sol = solve_lp_warm(lp, basis.as_ref())?;
        if sol.status != LpStatus::Optimal {
            return Err(MigrateError::Numerical(format!(
                "restricted master returned {:?}",
                sol.status
            )));
        }
        iterations += 1;
        let duals = Duals::from_rows(inst, &sol.duals);
        let added = price_round(inst, geom, &duals, pool, lp, ordered_stage, phase_one);
        generated += added;
        if added == 0 {
            if mode == PricingMode::Hybrid && ordered_stage {
                ordered_stage = false;
                basis = Some(sol.basis);
                continue;
            }
            return Ok((sol, generated, iterations));
        }
        if mode == PricingMode::Hybrid {
            ordered_stage = true;
        }
        basis = Some(sol.basis);
    }
}

/// Phase one: cover the demand with artificial slack on every positive
/// coverage row, pricing against the sum of artificials.
///
/// Feasibility is always certified with the exact pricer, so an ordered-only
/// mode is upgraded to hybrid here.
pub fn init_phase(
    inst: &Instance,
    geom: &Geometry,
    m_bar: &[u32],
    pool: &mut ColumnPool,
    mode: PricingMode,
) -> Result<InitOutcome> {
    let mode = if mode == PricingMode::Ordered {
        PricingMode::Hybrid
    } else {
        mode
    };
    let mut lp = rmp_skeleton(inst, m_bar);
    let rows = lp.num_rows();
    for side in 0..inst.network.num_sides() {
        if m_bar[side / 2] > 0 {
            let mut a = vec![0.0; rows];
            a[side] = 1.0;
            lp.add_column(1.0, &a);
        }
    }
    for col in pool.columns() {
        lp.add_column(0.0, &column_coeffs(inst, col));
    }
    let (sol, added, _) = generate(inst, geom, &mut lp, pool, mode, true)?;
    let feasible = sol.objective <= PHASE_ONE_FEAS_TOL;
    Ok(InitOutcome {
        feasible,
        duals: Duals::from_rows(inst, &sol.duals),
        value: sol.objective,
        columns_added: added,
    })
}

/// Phase two: minimum shift cost covering `m_bar`. The pool must already
/// make the restricted master feasible (see [`init_phase`]).
pub fn solve_cg(
    inst: &Instance,
    geom: &Geometry,
    m_bar: &[u32],
    pool: &mut ColumnPool,
    mode: PricingMode,
) -> Result<CgResult> {
    let mut lp = build_rmp(inst, m_bar, pool);
    let (sol, generated, iterations) = generate(inst, geom, &mut lp, pool, mode, false)?;
    Ok(CgResult {
        status: CgStatus::Feasible {
            value: sol.objective,
            duals: Duals::from_rows(inst, &sol.duals),
        },
        columns_generated: generated,
        iterations,
    })
}

/// Phase one followed, when feasible, by phase two.
pub fn solve_window(
    inst: &Instance,
    geom: &Geometry,
    m_bar: &[u32],
    pool: &mut ColumnPool,
    mode: PricingMode,
) -> Result<CgResult> {
    let init = init_phase(inst, geom, m_bar, pool, mode)?;
    if !init.feasible {
        return Ok(CgResult {
            status: CgStatus::Infeasible {
                certificate: init.duals,
            },
            columns_generated: init.columns_added,
            iterations: 0,
        });
    }
    let mut res = solve_cg(inst, geom, m_bar, pool, mode)?;
    res.columns_generated += init.columns_added;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Pair, Resources, Site};
    use crate::lp::solve_lp;

    fn two_region_instance() -> Instance {
        Instance {
            name: "cg".into(),
            network: Network {
                sites: vec![
                    Site { id: 0, region: 0, x_km: 0.0, y_km: 0.0 },
                    Site { id: 1, region: 1, x_km: 200.0, y_km: 0.0 },
                ],
                pairs: vec![Pair { s: 0, t: 1, circuits: 4 }],
                travel_minutes: vec![vec![0, 150], vec![150, 0]],
            },
            resources: Resources {
                eta_tech: vec![2, 2],
                eta_cir: 10,
                eta_eng: 1,
                alpha_eng: 5,
                theta_min: 20,
                cost_tech_cph: 10800,
                cost_eng_cph: 14000,
                durations_min: vec![360, 480],
                windows: 1,
            },
        }
    }

    #[test]
    fn empty_demand_costs_nothing() {
        let inst = two_region_instance();
        let lp = build_rmp(&inst, &[0], &ColumnPool::new());
        assert_eq!(solve_lp(&lp).unwrap().objective, 0.0);
    }

    #[test]
    fn single_column_rmp() {
        let inst = two_region_instance();
        let mut pool = ColumnPool::new();
        pool.insert(ShiftColumn { region: 0, duration: 360, counts: vec![(0, 2)] });
        // a shift only ever serves one side, so the demand is placed on that side alone
        let mut lp = build_rmp(&inst, &[2], &pool);
        lp.set_rhs(1, 0.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.objective, 81600.0);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);

        let mut lp = build_rmp(&inst, &[4], &pool);
        lp.set_rhs(1, 0.0);
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.objective, 163200.0);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn one_circuit_needs_two_short_shifts() {
        let mut inst = two_region_instance();
        inst.network.pairs[0].circuits = 1;
        let geom = Geometry::new(&inst).unwrap();
        let mut pool = ColumnPool::new();
        for mode in [PricingMode::General, PricingMode::Ordered, PricingMode::Hybrid] {
            let res = solve_window(&inst, &geom, &[1], &mut pool, mode).unwrap();
            match res.status {
                CgStatus::Feasible { value, .. } => assert!((value - 163200.0).abs() < 1e-6),
                other => panic!("unexpected {other:?}"),
            }
        }
        for col in pool.columns() {
            assert!(validate_column(&inst, &geom, col));
        }
        // with four circuits a shift may serve four endpoints, so the LP splits it
        let inst = two_region_instance();
        let res = solve_window(&inst, &geom, &[1], &mut ColumnPool::new(), PricingMode::General).unwrap();
        match res.status {
            CgStatus::Feasible { value, .. } => assert!((value - 40800.0).abs() < 1e-6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_demand_is_immediately_feasible() {
        let inst = two_region_instance();
        let geom = Geometry::new(&inst).unwrap();
        let out = init_phase(&inst, &geom, &[0], &mut ColumnPool::new(), PricingMode::Hybrid).unwrap();
        assert!(out.feasible);
        assert_eq!(out.value, 0.0);
    }

    #[test]
    fn region_without_technicians_yields_certificate() {
        let mut inst = two_region_instance();
        inst.resources.eta_tech = vec![0, 2];
        let geom = Geometry::new(&inst).unwrap();
        let out = init_phase(&inst, &geom, &[1], &mut ColumnPool::new(), PricingMode::Hybrid).unwrap();
        assert!(!out.feasible);
        assert!(out.duals.objective(&inst, &[1]) > 1e-7);
        assert!(out.duals.objective(&inst, &[0]) <= 1e-7);
    }

    #[test]
    fn duplicate_columns_are_ignored() {
        let mut pool = ColumnPool::new();
        let col = ShiftColumn { region: 0, duration: 360, counts: vec![(0, 1)] };
        assert!(pool.insert(col.clone()));
        assert!(!pool.insert(col));
        assert_eq!(pool.len(), 1);
    }
}
