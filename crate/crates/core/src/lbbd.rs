//! Logic-based Benders loop over maintenance windows.
//!
//! The master chooses per-window pair counts `m[w][p]` and window cost
//! estimates `η_w`. Integral master points are checked lazily against the
//! column-generation relaxation of every window (Benders cuts); each master
//! solution is then planned exactly per window, and windows that are
//! infeasible or under-estimated receive logic-based cuts. The master is
//! re-solved from scratch with every cut kept.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::colgen::{solve_window, CgStatus, ColumnPool, Duals, PricingMode};
use crate::error::{MigrateError, Result};
use crate::geometry::Geometry;
use crate::instance::Instance;
use crate::lp::{Row, Sense};
use crate::mip::{solve_mip, MipModel, MipOptions, MipStatus};
use crate::plan::{Plan, PlanOutcome, PlanSearch, PairCount};

/// Master gap per iteration; the last entry repeats.
pub const GAP_SCHEDULE: [f64; 3] = [0.10, 0.05, 0.0];
/// A Benders optimality cut is emitted when the relaxation exceeds `η̄` by this.
pub const BENDERS_OPT_TOL: f64 = 1e-6;
/// Tolerance used when checking cut satisfaction.
pub const CUT_CHECK_TOL: f64 = 1e-6;
const DUAL_ZERO: f64 = 1e-12;

/// Right-hand side of the "not all κ = 1" row of a feasibility block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasRhs {
    /// Number of pairs in the block minus one.
    #[default]
    Support,
    /// Number of pairs in the instance minus one.
    AllPairs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbbdConfig {
    pub target_gap: f64,
    pub time_limit_s: f64,
    pub propagate: bool,
    pub pricing_mode: PricingMode,
    pub keep_columns: bool,
    pub seed: u64,
    pub feas_rhs: FeasRhs,
}

impl Default for LbbdConfig {
    fn default() -> Self {
        LbbdConfig {
            target_gap: 0.10,
            time_limit_s: 10800.0,
            propagate: true,
            pricing_mode: PricingMode::Hybrid,
            keep_columns: true,
            seed: 0,
            feas_rhs: FeasRhs::Support,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutKind {
    BendersFeas,
    BendersOpt,
    LbbdFeas,
    LbbdOpt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cut {
    /// `Σ_p coeffs[p]·m[w][p] <= rhs`
    BendersFeas { window: usize, coeffs: Vec<f64>, rhs: f64 },
    /// `η_w >= constant + Σ_p coeffs[p]·m[w][p]`
    BendersOpt { window: usize, coeffs: Vec<f64>, constant: f64 },
    /// Not every pair with `m_bar > 0` may reach `m_bar`; `limit` bounds how
    /// many of them may.
    LbbdFeas { window: usize, m_bar: Vec<u32>, limit: usize },
    /// `η_w >= value` whenever `m[w] >= m_bar` on every pair with `m_bar > 0`.
    LbbdOpt { window: usize, m_bar: Vec<u32>, value: i64 },
}

impl Cut {
    pub fn kind(&self) -> CutKind {
        match self {
            Cut::BendersFeas { .. } => CutKind::BendersFeas,
            Cut::BendersOpt { .. } => CutKind::BendersOpt,
            Cut::LbbdFeas { .. } => CutKind::LbbdFeas,
            Cut::LbbdOpt { .. } => CutKind::LbbdOpt,
        }
    }

    pub fn window(&self) -> usize {
        match self {
            Cut::BendersFeas { window, .. }
            | Cut::BendersOpt { window, .. }
            | Cut::LbbdFeas { window, .. }
            | Cut::LbbdOpt { window, .. } => *window,
        }
    }

    fn with_window(&self, w: usize) -> Cut {
        let mut c = self.clone();
        match &mut c {
            Cut::BendersFeas { window, .. }
            | Cut::BendersOpt { window, .. }
            | Cut::LbbdFeas { window, .. }
            | Cut::LbbdOpt { window, .. } => *window = w,
        }
        c
    }

    /// Whether the point `(m, η)` satisfies the cut, with the auxiliary κ
    /// binaries of logic-based cuts set as favourably as their rows allow.
    pub fn is_satisfied(&self, m: &[Vec<u32>], eta: &[f64]) -> bool {
        let w = self.window();
        let mw = &m[w];
        let tol = |x: f64| CUT_CHECK_TOL * x.abs().max(1.0);
        match self {
            Cut::BendersFeas { coeffs, rhs, .. } => {
                let lhs: f64 = coeffs.iter().zip(mw).map(|(c, &x)| c * x as f64).sum();
                lhs <= rhs + tol(*rhs)
            }
            Cut::BendersOpt { coeffs, constant, .. } => {
                let bound = constant + coeffs.iter().zip(mw).map(|(c, &x)| c * x as f64).sum::<f64>();
                eta[w] >= bound - tol(bound)
            }
            Cut::LbbdFeas { m_bar, limit, .. } => reached(mw, m_bar) <= *limit,
            Cut::LbbdOpt { m_bar, value, .. } => {
                let support = m_bar.iter().filter(|&&x| x > 0).count();
                reached(mw, m_bar) < support || eta[w] >= *value as f64 - tol(*value as f64)
            }
        }
    }
}

/// Pairs with `m_bar > 0` whose count has reached `m_bar`.
fn reached(m: &[u32], m_bar: &[u32]) -> usize {
    m.iter().zip(m_bar).filter(|&(&x, &b)| b > 0 && x >= b).count()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CutCounts {
    pub benders_feas: usize,
    pub benders_opt: usize,
    pub lbbd_feas: usize,
    pub lbbd_opt: usize,
}

impl CutCounts {
    fn add(&mut self, kind: CutKind) {
        match kind {
            CutKind::BendersFeas => self.benders_feas += 1,
            CutKind::BendersOpt => self.benders_opt += 1,
            CutKind::LbbdFeas => self.lbbd_feas += 1,
            CutKind::LbbdOpt => self.lbbd_opt += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.benders_feas + self.benders_opt + self.lbbd_feas + self.lbbd_opt
    }
}

/// Variable layout of the master problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub pairs: usize,
    pub windows: usize,
}

impl Layout {
    pub fn m(&self, w: usize, p: usize) -> usize {
        w * self.pairs + p
    }

    pub fn eta(&self, w: usize) -> usize {
        self.windows * self.pairs + w
    }

    /// Rounded pair counts and window estimates of a master solution.
    pub fn point(&self, x: &[f64]) -> (Vec<Vec<u32>>, Vec<f64>) {
        let m = (0..self.windows)
            .map(|w| (0..self.pairs).map(|p| x[self.m(w, p)].round().max(0.0) as u32).collect())
            .collect();
        let eta = (0..self.windows).map(|w| x[self.eta(w)]).collect();
        (m, eta)
    }
}

/// Master problem: integer counts, window cost estimates, and every cut.
#[derive(Debug, Clone)]
pub struct MasterModel {
    pub mip: MipModel,
    pub layout: Layout,
    feas_rhs: FeasRhs,
}

impl MasterModel {
    pub fn new(inst: &Instance, feas_rhs: FeasRhs) -> MasterModel {
        let net = &inst.network;
        let res = &inst.resources;
        let layout = Layout {
            pairs: net.num_pairs(),
            windows: inst.num_windows(),
        };
        let techs: u64 = res.eta_tech.iter().map(|&e| e as u64).sum();
        let max_shifts = (res.shift_cap() as u64).min(techs);
        let eta_max = inst.shift_cost(res.max_duration()) as f64 * max_shifts as f64;

        let mut mip = MipModel::new();
        for _ in 0..layout.windows {
            for p in &net.pairs {
                mip.add_var(0.0, 0.0, p.circuits as f64, true);
            }
        }
        for _ in 0..layout.windows {
            mip.add_var(1.0, 0.0, eta_max, false);
        }
        for (p, pair) in net.pairs.iter().enumerate() {
            let coeffs = (0..layout.windows).map(|w| (layout.m(w, p), 1.0)).collect();
            mip.add_row(Row::new(coeffs, Sense::Ge, pair.circuits as f64));
        }
        for w in 0..layout.windows {
            let coeffs = (0..layout.pairs).map(|p| (layout.m(w, p), 1.0)).collect();
            mip.add_row(Row::new(coeffs, Sense::Le, res.eta_cir as f64));
        }
        // windows are interchangeable: keep them sorted by endpoint count
        for w in 1..layout.windows {
            let mut coeffs: Vec<(usize, f64)> = (0..layout.pairs).map(|p| (layout.m(w - 1, p), 1.0)).collect();
            coeffs.extend((0..layout.pairs).map(|p| (layout.m(w, p), -1.0)));
            mip.add_row(Row::new(coeffs, Sense::Ge, 0.0));
        }
        MasterModel { mip, layout, feas_rhs }
    }

    /// Row of a Benders cut; logic-based cuts need [`MasterModel::add_cut`].
    pub fn benders_row(layout: &Layout, cut: &Cut) -> Option<Row> {
        match cut {
            Cut::BendersFeas { window, coeffs, rhs } => {
                let lhs = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(p, &c)| (layout.m(*window, p), c))
                    .collect();
                Some(Row::new(lhs, Sense::Le, *rhs))
            }
            Cut::BendersOpt {
                window,
                coeffs,
                constant,
            } => {
                let mut lhs = vec![(layout.eta(*window), 1.0)];
                lhs.extend(
                    coeffs
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| **c != 0.0)
                        .map(|(p, &c)| (layout.m(*window, p), -c)),
                );
                Some(Row::new(lhs, Sense::Ge, *constant))
            }
            _ => None,
        }
    }

    /// Adds a cut, introducing the κ binaries of a logic-based block.
    pub fn add_cut(&mut self, inst: &Instance, cut: &Cut) {
        if let Some(row) = Self::benders_row(&self.layout, cut) {
            self.mip.add_row(row);
            return;
        }
        let (window, m_bar) = match cut {
            Cut::LbbdFeas { window, m_bar, .. } | Cut::LbbdOpt { window, m_bar, .. } => (*window, m_bar),
            _ => unreachable!(),
        };
        let mut kappas = Vec::new();
        for (p, &mb) in m_bar.iter().enumerate() {
            if mb == 0 {
                continue;
            }
            // κ = 0 forces m < m̄; the big-M is the smallest that leaves m ≤ φ free
            let k = self.mip.add_var(0.0, 0.0, 1.0, true);
            let phi = inst.network.pairs[p].circuits as f64;
            self.mip.add_row(Row::new(
                vec![(self.layout.m(window, p), 1.0), (k, -(phi - mb as f64 + 1.0))],
                Sense::Le,
                mb as f64 - 1.0,
            ));
            kappas.push(k);
        }
        match cut {
            Cut::LbbdFeas { limit, .. } => {
                let lhs = kappas.iter().map(|&k| (k, 1.0)).collect();
                self.mip.add_row(Row::new(lhs, Sense::Le, *limit as f64));
            }
            Cut::LbbdOpt { value, .. } => {
                let v = *value as f64;
                let mut lhs = vec![(self.layout.eta(window), 1.0)];
                lhs.extend(kappas.iter().map(|&k| (k, -v)));
                self.mip.add_row(Row::new(lhs, Sense::Ge, v * (1.0 - kappas.len() as f64)));
            }
            _ => unreachable!(),
        }
    }

    fn feas_limit(&self, m_bar: &[u32]) -> usize {
        match self.feas_rhs {
            FeasRhs::Support => m_bar.iter().filter(|&&x| x > 0).count().saturating_sub(1),
            FeasRhs::AllPairs => m_bar.len().saturating_sub(1),
        }
    }
}

/// Logic-based feasibility cut for a window whose demand cannot be planned.
pub fn make_lbbd_feas_cut(master: &MasterModel, window: usize, m_bar: &[u32]) -> Cut {
    Cut::LbbdFeas {
        window,
        m_bar: m_bar.to_vec(),
        limit: master.feas_limit(m_bar),
    }
}

/// Logic-based optimality cut from an exact window cost.
pub fn make_lbbd_opt_cut(window: usize, m_bar: &[u32], value: i64) -> Cut {
    Cut::LbbdOpt {
        window,
        m_bar: m_bar.to_vec(),
        value,
    }
}

#[derive(Debug, Clone, PartialEq)]
enum CgOutcome {
    Feasible { value: f64, coeffs: Vec<f64> },
    Infeasible { coeffs: Vec<f64>, resource: f64 },
}

fn clean(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|c| if c.abs() < DUAL_ZERO { 0.0 } else { c }).collect()
}

/// Benders separation backed by column generation, with a per-demand cache.
pub struct BendersSeparator<'a> {
    inst: &'a Instance,
    geom: &'a Geometry,
    pool: ColumnPool,
    mode: PricingMode,
    keep_columns: bool,
    propagate: bool,
    cache: HashMap<Vec<u32>, CgOutcome>,
    seen: HashSet<(CutKind, usize, Vec<u64>)>,
    pub columns_generated: usize,
    /// Demands solved by column generation, in first-solve order.
    pub probes: Vec<Vec<u32>>,
    /// Phase-one certificates of infeasible demands.
    pub certificates: Vec<(Vec<u32>, Duals)>,
}

impl<'a> BendersSeparator<'a> {
    pub fn new(inst: &'a Instance, geom: &'a Geometry, config: &LbbdConfig) -> BendersSeparator<'a> {
        BendersSeparator {
            inst,
            geom,
            pool: ColumnPool::new(),
            mode: config.pricing_mode,
            keep_columns: config.keep_columns,
            propagate: config.propagate,
            cache: HashMap::new(),
            seen: HashSet::new(),
            columns_generated: 0,
            probes: Vec::new(),
            certificates: Vec::new(),
        }
    }

    pub fn pool(&self) -> &ColumnPool {
        &self.pool
    }

    fn outcome(&mut self, m_bar: &[u32]) -> Result<CgOutcome> {
        if let Some(hit) = self.cache.get(m_bar) {
            return Ok(hit.clone());
        }
        if !self.keep_columns {
            self.pool.clear();
        }
        let res = solve_window(self.inst, self.geom, m_bar, &mut self.pool, self.mode)?;
        self.columns_generated += res.columns_generated;
        self.probes.push(m_bar.to_vec());
        let out = match res.status {
            CgStatus::Feasible { value, duals } => CgOutcome::Feasible {
                value,
                coeffs: clean(duals.pair_coeffs()),
            },
            CgStatus::Infeasible { certificate } => {
                let out = CgOutcome::Infeasible {
                    coeffs: clean(certificate.pair_coeffs()),
                    resource: certificate.resource_term(self.inst),
                };
                self.certificates.push((m_bar.to_vec(), certificate));
                out
            }
        };
        self.cache.insert(m_bar.to_vec(), out.clone());
        Ok(out)
    }

    /// Cuts separating `(m_bar, eta_bar)` in window `w`, already propagated to
    /// every window when propagation is on; cuts emitted before are dropped.
    pub fn separate(&mut self, w: usize, m_bar: &[u32], eta_bar: f64) -> Result<Vec<Cut>> {
        let cut = match self.outcome(m_bar)? {
            CgOutcome::Infeasible { coeffs, resource } => Cut::BendersFeas {
                window: w,
                coeffs,
                rhs: -resource,
            },
            CgOutcome::Feasible { value, coeffs } => {
                if value <= eta_bar + BENDERS_OPT_TOL {
                    return Ok(Vec::new());
                }
                let at: f64 = coeffs.iter().zip(m_bar).map(|(c, &m)| c * m as f64).sum();
                Cut::BendersOpt {
                    window: w,
                    coeffs,
                    constant: value - at,
                }
            }
        };
        let windows: Vec<usize> = if self.propagate {
            (0..self.inst.num_windows()).collect()
        } else {
            vec![w]
        };
        let mut out = Vec::new();
        for v in windows {
            let c = cut.with_window(v);
            if self.seen.insert(cut_key(&c)) {
                out.push(c);
            }
        }
        Ok(out)
    }
}

fn cut_key(cut: &Cut) -> (CutKind, usize, Vec<u64>) {
    let payload = match cut {
        Cut::BendersFeas { coeffs, rhs, .. } => coeffs.iter().chain([rhs]).map(|x| x.to_bits()).collect(),
        Cut::BendersOpt { coeffs, constant, .. } => coeffs.iter().chain([constant]).map(|x| x.to_bits()).collect(),
        Cut::LbbdFeas { m_bar, limit, .. } => m_bar.iter().map(|&x| x as u64).chain([*limit as u64]).collect(),
        Cut::LbbdOpt { m_bar, value, .. } => m_bar.iter().map(|&x| x as u64).chain([*value as u64]).collect(),
    };
    (cut.kind(), cut.window(), payload)
}

/// Adds the extra endpoints of `m_hat` over `m_bar` to technicians of `plan`
/// without changing any shift duration, or `None` when that is not possible
/// one side per technician.
///
/// Every side that needs `δ` more endpoints is matched to a distinct shift
/// that already visits the side's site, does not serve the opposite side of
/// the same pair, and has at least `θ·δ` minutes left before its shift ends.
pub fn extend_plan(inst: &Instance, plan: &Plan, m_bar: &[u32], m_hat: &[u32]) -> Option<Plan> {
    let net = &inst.network;
    let theta = inst.resources.theta_min;
    if m_hat.iter().zip(m_bar).any(|(h, b)| h < b) {
        return None;
    }
    let extra: Vec<(usize, u32)> = (0..net.num_sides())
        .filter(|&s| m_hat[s / 2] > m_bar[s / 2])
        .map(|s| (s, m_hat[s / 2] - m_bar[s / 2]))
        .collect();

    let serves = |shift: &crate::plan::TechShift, side: usize| {
        let sd = net.side(side);
        shift
            .visits
            .iter()
            .any(|v| v.site == sd.site && v.counts.iter().any(|c| c.pair == sd.pair))
    };
    let adj: Vec<Vec<usize>> = extra
        .iter()
        .map(|&(side, delta)| {
            let site = net.side(side).site;
            plan.shifts
                .iter()
                .enumerate()
                .filter(|(_, sh)| {
                    let makespan = sh.visits.last().map_or(0, |v| v.end_min);
                    sh.visits.iter().any(|v| v.site == site)
                        && !serves(sh, side ^ 1)
                        && makespan + theta * delta <= sh.duration_min
                })
                .map(|(j, _)| j)
                .collect()
        })
        .collect();

    let mut owner: Vec<Option<usize>> = vec![None; plan.shifts.len()];
    fn augment(i: usize, adj: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, adj, owner, seen)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in 0..extra.len() {
        let mut seen = vec![false; plan.shifts.len()];
        if !augment(i, &adj, &mut owner, &mut seen) {
            return None;
        }
    }

    let mut out = plan.clone();
    for (j, i) in owner.iter().enumerate() {
        let Some(i) = *i else { continue };
        let (side, delta) = extra[i];
        let sd = net.side(side);
        let shift = &mut out.shifts[j];
        let at = shift.visits.iter().position(|v| v.site == sd.site).expect("matched shift visits the site");
        let grow = theta * delta;
        let visit = &mut shift.visits[at];
        match visit.counts.iter_mut().find(|c| c.pair == sd.pair) {
            Some(c) => c.n += delta,
            None => {
                visit.counts.push(PairCount { pair: sd.pair, n: delta });
                visit.counts.sort();
            }
        }
        visit.end_min += grow;
        for v in &mut shift.visits[at + 1..] {
            v.start_min += grow;
            v.end_min += grow;
        }
    }
    Some(out)
}

/// Sufficient test that the optimal plan cost at `m_hat` equals that at
/// `m_bar`, given `plan` optimal for `m_bar`.
pub fn check_opt_cut_tight(inst: &Instance, m_hat: &[u32], m_bar: &[u32], plan: &Plan) -> bool {
    extend_plan(inst, plan, m_bar, m_hat).is_some()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Optimal,
    WithinGap,
    Infeasible,
    TimedOut,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings {
    /// Master branch-and-bound, including separation.
    pub master: Duration,
    /// Column generation inside Benders separation.
    pub separation: Duration,
    pub plans: Duration,
    pub total: Duration,
}

/// Everything generated during a run, for inspection by tests and tools.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub cuts: Vec<Cut>,
    pub cg_probes: Vec<Vec<u32>>,
    pub certificates: Vec<(Vec<u32>, Duals)>,
    /// Exact window results: demand and cost (`None` when infeasible).
    pub plan_probes: Vec<(Vec<u32>, Option<i64>)>,
    /// Plans obtained by extending a cheaper demand's plan instead of searching.
    pub tight_extensions: usize,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<Option<i64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub instance: String,
    pub status: RunStatus,
    /// Cost of the incumbent plans.
    pub upper_bound_cents: Option<i64>,
    pub lower_bound_cents: i64,
    pub gap: Option<f64>,
    pub iterations: usize,
    pub cuts: CutCounts,
    pub columns: usize,
    /// Incumbent pair counts, `m[w][p]`.
    pub m: Vec<Vec<u32>>,
    /// Incumbent plan per window.
    pub plans: Vec<Plan>,
    #[serde(skip)]
    pub timings: Timings,
    #[serde(skip)]
    pub diagnostics: Diagnostics,
}

/// `(UB − LB) / UB`, zero when both are zero.
pub fn gap(ub: i64, lb: i64) -> f64 {
    if ub <= 0 {
        0.0
    } else {
        ((ub - lb) as f64 / ub as f64).max(0.0)
    }
}

struct Incumbent {
    cost: i64,
    m: Vec<Vec<u32>>,
    plans: Vec<Plan>,
}

pub fn run(inst: &Instance, config: &LbbdConfig) -> Result<SolveReport> {
    inst.validate()?;
    let geom = Geometry::new(inst)?;
    let start = Instant::now();
    let deadline = start + Duration::from_secs_f64(config.time_limit_s.max(0.0));
    let nw = inst.num_windows();

    let mut master = MasterModel::new(inst, config.feas_rhs);
    let layout = master.layout;
    let mut sep = BendersSeparator::new(inst, &geom, config);
    let search = PlanSearch::new(inst, &geom);
    let mut plan_cache: BTreeMap<Vec<u32>, Option<Plan>> = BTreeMap::new();
    let mut lbbd_seen: HashSet<(CutKind, usize, Vec<u64>)> = HashSet::new();

    let mut diag = Diagnostics::default();
    let mut counts = CutCounts::default();
    let mut timings = Timings::default();
    let mut incumbent: Option<Incumbent> = None;
    let mut lb = 0.0f64;
    let mut iterations = 0;
    let mut force_exact = false;

    let status = loop {
        let now = Instant::now();
        if now >= deadline {
            break RunStatus::TimedOut;
        }
        let master_gap = if force_exact {
            0.0
        } else {
            GAP_SCHEDULE[iterations.min(GAP_SCHEDULE.len() - 1)]
        };
        iterations += 1;

        let opts = MipOptions {
            rel_gap: master_gap,
            time_limit: Some(deadline - now),
            ..MipOptions::default()
        };
        let mut new_cuts: Vec<Cut> = Vec::new();
        let mut sep_err = None;
        let sol = {
            let mut separator = |x: &[f64]| -> Result<Vec<Row>> {
                let (m, eta) = layout.point(x);
                let mut rows = Vec::new();
                for w in 0..nw {
                    let t = Instant::now();
                    let res = sep.separate(w, &m[w], eta[w]);
                    timings.separation += t.elapsed();
                    let cuts = match res {
                        Ok(c) => c,
                        Err(e) => {
                            let msg = e.to_string();
                            sep_err = Some(e);
                            return Err(MigrateError::Numerical(msg));
                        }
                    };
                    for c in cuts {
                        rows.push(MasterModel::benders_row(&layout, &c).expect("Benders cut"));
                        new_cuts.push(c);
                    }
                }
                Ok(rows)
            };
            let t = Instant::now();
            let r = solve_mip(&mut master.mip, &opts, Some(&mut separator));
            timings.master += t.elapsed();
            r
        };
        if let Some(e) = sep_err {
            return Err(e);
        }
        let sol = sol?;
        for c in new_cuts {
            counts.add(c.kind());
            diag.cuts.push(c);
        }

        match sol.status {
            MipStatus::Infeasible => {
                if incumbent.is_none() {
                    break RunStatus::Infeasible;
                }
                lb = incumbent.as_ref().map_or(lb, |i| i.cost as f64);
                break RunStatus::Optimal;
            }
            MipStatus::NoSolution => break RunStatus::TimedOut,
            MipStatus::Optimal | MipStatus::Feasible => {}
        }
        lb = lb.max(sol.bound);
        let master_exact = sol.status == MipStatus::Optimal;
        let (m, eta) = layout.point(&sol.x);
        log::info!(
            "iteration {iterations}: master {:.0} (bound {:.0}, gap {master_gap})",
            sol.objective,
            sol.bound
        );

        let t = Instant::now();
        let outcome = plan_windows(inst, &search, &m, &mut plan_cache, &mut diag, deadline);
        timings.plans += t.elapsed();
        let Some(window_plans) = outcome else {
            break RunStatus::TimedOut;
        };

        let mut lbbd_added = 0;
        let mut total = Some(0i64);
        for w in 0..nw {
            let cut = match &window_plans[w] {
                None => {
                    total = None;
                    make_lbbd_feas_cut(&master, w, &m[w])
                }
                Some(plan) => {
                    total = total.map(|t| t + plan.cost_cents);
                    if plan.cost_cents as f64 > eta[w] + 0.5 {
                        make_lbbd_opt_cut(w, &m[w], plan.cost_cents)
                    } else {
                        continue;
                    }
                }
            };
            let windows: Vec<usize> = if config.propagate { (0..nw).collect() } else { vec![w] };
            for v in windows {
                let c = cut.with_window(v);
                if lbbd_seen.insert(cut_key(&c)) {
                    master.add_cut(inst, &c);
                    counts.add(c.kind());
                    diag.cuts.push(c);
                    lbbd_added += 1;
                }
            }
        }

        log::info!(
            "iteration {iterations}: window plans {:?} against estimates {:?}, {lbbd_added} logic cuts",
            window_plans.iter().map(|p| p.as_ref().map(|p| p.cost_cents)).collect::<Vec<_>>(),
            eta.iter().map(|e| e.round() as i64).collect::<Vec<_>>()
        );
        if let Some(cost) = total {
            if incumbent.as_ref().is_none_or(|i| cost < i.cost) {
                incumbent = Some(Incumbent {
                    cost,
                    m: m.clone(),
                    plans: window_plans.iter().map(|p| p.clone().expect("feasible window")).collect(),
                });
            }
        }
        if lbbd_added == 0 && master_exact && master_gap == 0.0 {
            if let Some(inc) = &incumbent {
                lb = lb.max(inc.cost as f64).min(inc.cost as f64);
            }
        }
        diag.lower_bounds.push(lb);
        diag.upper_bounds.push(incumbent.as_ref().map(|i| i.cost));

        if let Some(inc) = &incumbent {
            let lb_cents = lower_cents(lb);
            if lb_cents >= inc.cost {
                break RunStatus::Optimal;
            }
            if gap(inc.cost, lb_cents) <= config.target_gap {
                break RunStatus::WithinGap;
            }
        }
        if lbbd_added == 0 {
            if master_gap == 0.0 && master_exact {
                // every window matches its estimate at an exact master optimum
                break RunStatus::Optimal;
            }
            if master_gap == 0.0 && !master_exact {
                break RunStatus::TimedOut;
            }
            if lbbd_seen.is_empty() && incumbent.is_none() {
                return Err(MigrateError::Stalled(iterations));
            }
            force_exact = true;
        } else if incumbent.is_none() && config.feas_rhs == FeasRhs::AllPairs {
            // a repeated infeasible point means the cut did not remove it
            let repeated = (0..nw).any(|w| {
                plan_cache.get(&m[w]).is_some_and(|p| p.is_none())
                    && diag.plan_probes.iter().filter(|(d, _)| *d == m[w]).count() > 1
            });
            if repeated {
                return Err(MigrateError::Stalled(iterations));
            }
        }
    };
    timings.total = start.elapsed();

    let (upper, m, plans) = match incumbent {
        Some(i) => (Some(i.cost), i.m, i.plans),
        None => (None, Vec::new(), Vec::new()),
    };
    let lower_bound_cents = match (status, upper) {
        (RunStatus::Infeasible, _) => 0,
        (_, Some(u)) => lower_cents(lb).min(u),
        (_, None) => lower_cents(lb),
    };
    diag.cg_probes = sep.probes.clone();
    diag.certificates = sep.certificates.clone();
    Ok(SolveReport {
        instance: inst.name.clone(),
        status,
        upper_bound_cents: upper,
        lower_bound_cents,
        gap: upper.map(|u| gap(u, lower_bound_cents)),
        iterations,
        cuts: counts,
        columns: sep.columns_generated,
        m,
        plans,
        timings,
        diagnostics: diag,
    })
}

/// Largest whole-cent value not above a master bound, tolerant of round-off.
fn lower_cents(bound: f64) -> i64 {
    (bound - 1e-6).ceil().max(0.0) as i64
}

/// Exact plans for every window of `m`, or `None` on time-out.
///
/// Demands already solved are reused; a demand that dominates a solved one is
/// first tried as an extension of that plan; the rest are searched in
/// parallel, one thread per distinct demand.
fn plan_windows(
    inst: &Instance,
    search: &PlanSearch<'_>,
    m: &[Vec<u32>],
    cache: &mut BTreeMap<Vec<u32>, Option<Plan>>,
    diag: &mut Diagnostics,
    deadline: Instant,
) -> Option<Vec<Option<Plan>>> {
    let mut todo: Vec<Vec<u32>> = Vec::new();
    for mw in m {
        if cache.contains_key(mw) || todo.contains(mw) {
            continue;
        }
        let extended = cache.iter().find_map(|(base, plan)| {
            let plan = plan.as_ref()?;
            if base.iter().zip(mw).all(|(b, h)| b <= h) {
                extend_plan(inst, plan, base, mw)
            } else {
                None
            }
        });
        match extended {
            Some(plan) => {
                diag.tight_extensions += 1;
                diag.plan_probes.push((mw.clone(), Some(plan.cost_cents)));
                cache.insert(mw.clone(), Some(plan));
            }
            None => todo.push(mw.clone()),
        }
    }

    let results: Vec<PlanOutcome> = std::thread::scope(|s| {
        let handles: Vec<_> = todo
            .iter()
            .map(|mw| s.spawn(move || search.solve(mw, Some(deadline))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("plan search thread")).collect()
    });
    for (mw, r) in todo.into_iter().zip(results) {
        let entry = match r {
            PlanOutcome::Optimal(plan) => Some(plan),
            PlanOutcome::Infeasible => None,
            PlanOutcome::TimedOut(_) => return None,
        };
        diag.plan_probes.push((mw.clone(), entry.as_ref().map(|p| p.cost_cents)));
        cache.insert(mw, entry);
    }
    Some(m.iter().map(|mw| cache[mw].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Network, Pair, Resources, Site};
    use crate::plan::{solve_plan, verify_plan};

    fn instance(region_of: &[usize], pairs: &[(usize, usize, u32)], windows: u32, eta_cir: u32) -> Instance {
        let n = region_of.len();
        let regions = region_of.iter().max().unwrap() + 1;
        Instance {
            name: "lbbd".into(),
            network: Network {
                sites: region_of
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| Site { id: i, region: r, x_km: 0.0, y_km: 0.0 })
                    .collect(),
                pairs: pairs.iter().map(|&(s, t, c)| Pair { s, t, circuits: c }).collect(),
                travel_minutes: (0..n).map(|a| (0..n).map(|b| if a == b { 0 } else { 45 }).collect()).collect(),
            },
            resources: Resources {
                eta_tech: vec![2; regions],
                eta_cir,
                eta_eng: 1,
                alpha_eng: 5,
                theta_min: 20,
                cost_tech_cph: 10800,
                cost_eng_cph: 14000,
                durations_min: vec![360, 480],
                windows,
            },
        }
    }

    fn exact() -> LbbdConfig {
        LbbdConfig {
            target_gap: 0.0,
            ..LbbdConfig::default()
        }
    }

    #[test]
    fn zero_circuits() {
        let inst = instance(&[0, 1], &[], 1, 1);
        let rep = run(&inst, &exact()).unwrap();
        assert_eq!(rep.status, RunStatus::Optimal);
        assert_eq!(rep.upper_bound_cents, Some(0));
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn single_cross_region_pair() {
        let inst = instance(&[0, 1], &[(0, 1, 1)], 1, 1);
        let rep = run(&inst, &exact()).unwrap();
        assert_eq!(rep.status, RunStatus::Optimal);
        assert_eq!(rep.upper_bound_cents, Some(163200));
        assert_eq!(rep.lower_bound_cents, 163200);
        assert!(verify_plan(&rep.plans[0], &inst, &rep.m[0]));
    }

    #[test]
    fn too_many_endpoints_is_infeasible() {
        let inst = instance(&[0, 1], &[(0, 1, 3)], 1, 2);
        let rep = run(&inst, &exact()).unwrap();
        assert_eq!(rep.status, RunStatus::Infeasible);
        assert!(rep.plans.is_empty());
    }

    #[test]
    fn benders_feasibility_cut_against_unstaffed_region() {
        let mut inst = instance(&[0, 1], &[(0, 1, 1)], 1, 1);
        inst.resources.eta_tech = vec![2, 0];
        let geom = Geometry::new(&inst).unwrap();
        let mut sep = BendersSeparator::new(&inst, &geom, &exact());
        let cuts = sep.separate(0, &[1], 0.0).unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].kind(), CutKind::BendersFeas);
        assert!(!cuts[0].is_satisfied(&[vec![1]], &[0.0]));
        assert!(cuts[0].is_satisfied(&[vec![0]], &[0.0]));
        assert_eq!(sep.certificates.len(), 1);
    }

    #[test]
    fn benders_optimality_cut_only_when_underestimated() {
        let inst = instance(&[0, 1], &[(0, 1, 1)], 1, 1);
        let geom = Geometry::new(&inst).unwrap();
        let mut sep = BendersSeparator::new(&inst, &geom, &exact());
        let cuts = sep.separate(0, &[1], 0.0).unwrap();
        assert_eq!(cuts.len(), 1);
        let Cut::BendersOpt { coeffs, constant, .. } = &cuts[0] else {
            panic!("expected an optimality cut")
        };
        assert!((constant + coeffs[0] - 163200.0).abs() < 1e-6);
        assert!(sep.separate(0, &[1], 163200.0).unwrap().is_empty());
    }

    #[test]
    fn feasibility_block_examples() {
        let single = Cut::LbbdFeas {
            window: 0,
            m_bar: vec![2],
            limit: 0,
        };
        assert!(!single.is_satisfied(&[vec![2]], &[0.0]));
        assert!(!single.is_satisfied(&[vec![3]], &[0.0]));
        assert!(single.is_satisfied(&[vec![1]], &[0.0]));

        let two = Cut::LbbdFeas {
            window: 0,
            m_bar: vec![2, 3],
            limit: 1,
        };
        assert!(!two.is_satisfied(&[vec![2, 3]], &[0.0]));
        assert!(two.is_satisfied(&[vec![1, 3]], &[0.0]));
        assert!(two.is_satisfied(&[vec![2, 2]], &[0.0]));
    }

    /// Solves `min Σκ` subject to a cut block over a fixed `m`, by the master
    /// MIP, to check the rows agree with [`Cut::is_satisfied`].
    fn block_feasible(inst: &Instance, cut: &Cut, m: &[u32], eta: f64) -> bool {
        let mut master = MasterModel::new(inst, FeasRhs::Support);
        master.add_cut(inst, cut);
        let l = master.layout;
        let w = cut.window();
        for (p, &v) in m.iter().enumerate() {
            master.mip.lp.set_bounds(l.m(w, p), v as f64, v as f64);
        }
        master.mip.lp.set_bounds(l.eta(w), eta, eta);
        let sol = solve_mip(&mut master.mip, &MipOptions::default(), None).unwrap();
        sol.status == MipStatus::Optimal
    }

    #[test]
    fn cut_rows_match_satisfaction_check() {
        let inst = instance(&[0, 1, 2], &[(0, 1, 3), (1, 2, 3)], 2, 6);
        // last window, so the first can hold the rest while staying sorted
        let feas = Cut::LbbdFeas {
            window: 1,
            m_bar: vec![2, 1],
            limit: 1,
        };
        let opt = make_lbbd_opt_cut(1, &[2, 1], 1000);
        for a in 0..=3 {
            for b in 0..=3 {
                let m = [a, b];
                assert_eq!(
                    block_feasible(&inst, &feas, &m, 0.0),
                    feas.is_satisfied(&[Vec::new(), m.to_vec()], &[0.0, 0.0]),
                    "{m:?}"
                );
                for eta in [0.0, 999.0, 1000.0] {
                    assert_eq!(
                        block_feasible(&inst, &opt, &m, eta),
                        opt.is_satisfied(&[Vec::new(), m.to_vec()], &[0.0, eta]),
                        "{m:?} {eta}"
                    );
                }
            }
        }
    }

    #[test]
    fn feasibility_block_never_cuts_non_dominating_points() {
        for m_bar in [[1u32, 2], [2, 0], [3, 3]] {
            let cut = Cut::LbbdFeas {
                window: 0,
                m_bar: m_bar.to_vec(),
                limit: m_bar.iter().filter(|&&x| x > 0).count() - 1,
            };
            for a in 0..=4 {
                for b in 0..=4 {
                    let dominates = (m_bar[0] == 0 || a >= m_bar[0]) && (m_bar[1] == 0 || b >= m_bar[1]);
                    assert_eq!(cut.is_satisfied(&[vec![a, b]], &[0.0]), !dominates);
                }
            }
        }
    }

    #[test]
    fn tightness_examples() {
        let inst = instance(&[0, 1], &[(0, 1, 3)], 1, 3);
        let geom = Geometry::new(&inst).unwrap();
        let PlanOutcome::Optimal(plan) = solve_plan(&inst, &geom, &[1], None) else {
            panic!("feasible")
        };
        assert!(check_opt_cut_tight(&inst, &[1], &[1], &plan));
        assert!(check_opt_cut_tight(&inst, &[2], &[1], &plan));
        let ext = extend_plan(&inst, &plan, &[1], &[2]).unwrap();
        assert!(verify_plan(&ext, &inst, &[2]));
        assert_eq!(ext.cost_cents, plan.cost_cents);
        // 18 extra endpoints need 360 more minutes on top of the 20 already used
        assert!(!check_opt_cut_tight(&inst, &[19], &[1], &plan));
    }

    #[test]
    fn propagation_keeps_the_optimum() {
        let inst = instance(&[0, 0, 1], &[(0, 2, 2), (1, 2, 2)], 2, 3);
        let with = run(&inst, &exact()).unwrap();
        let without = run(
            &inst,
            &LbbdConfig {
                propagate: false,
                ..exact()
            },
        )
        .unwrap();
        assert_eq!(with.status, RunStatus::Optimal);
        assert_eq!(with.upper_bound_cents, without.upper_bound_cents);
        for (w, plan) in with.plans.iter().enumerate() {
            assert!(verify_plan(plan, &inst, &with.m[w]));
        }
    }
}
