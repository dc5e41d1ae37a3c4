//! Dense bounded-variable revised simplex.
//!
//! Every row `i` gets a slack `s_i` so that `A x + s = b`; the sense of the row
//! is encoded in the slack's bounds (`<=` → `[0, ∞)`, `>=` → `(-∞, 0]`,
//! `=` → `[0, 0]`). Phase one minimizes the sum of basic bound violations,
//! phase two the objective. Duals follow the minimization convention:
//! `>=` rows have non-negative duals, `<=` rows non-positive ones.

use crate::error::{MigrateError, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FEAS_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
/// Pivots smaller than this are refused; the entering candidate is skipped.
const PIVOT_REJECT: f64 = 1e-7;
const REFACTOR_EVERY: usize = 100;
const DEGENERATE_SWITCH: usize = 50;
/// Times the primal tolerances may grow tenfold when the simplex stops progressing.
const MAX_WIDEN: u32 = 5;
/// Times shifted or perturbed bounds may be put back before the simplex
/// stops shifting them.
const MAX_RESTORES: u32 = 5;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn new(coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> Row {
        Row { coeffs, sense, rhs }
    }

    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimization LP stored column-wise so columns can be appended cheaply.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpModel {
    obj: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cols: Vec<Vec<(usize, f64)>>,
    senses: Vec<Sense>,
    rhs: Vec<f64>,
}

impl LpModel {
    pub fn new() -> LpModel {
        LpModel::default()
    }

    pub fn num_vars(&self) -> usize {
        self.obj.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn add_var(&mut self, obj: f64, lo: f64, hi: f64) -> usize {
        assert!(lo <= hi, "variable bounds must satisfy lo <= hi");
        self.obj.push(obj);
        self.lo.push(lo);
        self.hi.push(hi);
        self.cols.push(Vec::new());
        self.obj.len() - 1
    }

    /// Appends a non-negative column with one coefficient per existing row.
    pub fn add_column(&mut self, obj: f64, coeffs: &[f64]) -> usize {
        assert_eq!(
            coeffs.len(),
            self.num_rows(),
            "column length must match the constraint count"
        );
        let j = self.add_var(obj, 0.0, f64::INFINITY);
        self.cols[j] = coeffs
            .iter()
            .enumerate()
            .filter(|(_, &a)| a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        j
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        let i = self.rhs.len();
        let mut merged: Vec<(usize, f64)> = row.coeffs;
        merged.sort_by_key(|&(j, _)| j);
        let mut k = 0;
        while k < merged.len() {
            let j = merged[k].0;
            assert!(j < self.num_vars(), "row references undeclared variable {j}");
            let mut a = 0.0;
            while k < merged.len() && merged[k].0 == j {
                a += merged[k].1;
                k += 1;
            }
            if a != 0.0 {
                self.cols[j].push((i, a));
            }
        }
        self.senses.push(row.sense);
        self.rhs.push(row.rhs);
        i
    }

    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        assert!(lo <= hi, "variable bounds must satisfy lo <= hi");
        self.lo[j] = lo;
        self.hi[j] = hi;
    }

    pub fn set_rhs(&mut self, i: usize, rhs: f64) {
        self.rhs[i] = rhs;
    }

    pub fn set_obj(&mut self, j: usize, c: f64) {
        self.obj[j] = c;
    }

    pub fn obj(&self) -> &[f64] {
        &self.obj
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn sense(&self, i: usize) -> Sense {
        self.senses[i]
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.rhs[i]
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut act = vec![0.0; self.num_rows()];
        for (j, col) in self.cols.iter().enumerate() {
            if x[j] != 0.0 {
                for &(i, a) in col {
                    act[i] += a * x[j];
                }
            }
        }
        act
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lo[j] - x[j]).max(x[j] - self.hi[j]);
        }
        for (i, a) in self.activities(x).into_iter().enumerate() {
            let v = match self.senses[i] {
                Sense::Le => a - self.rhs[i],
                Sense::Ge => self.rhs[i] - a,
                Sense::Eq => (a - self.rhs[i]).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Identifies a structural column or a row slack in a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarRef {
    Col(usize),
    Slack(usize),
}

/// A simplex basis that survives appending rows and columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Basis {
    pub basic: Vec<VarRef>,
    pub at_upper: Vec<VarRef>,
    /// Row count of the model the basis was taken from.
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub duals: Vec<f64>,
    pub objective: f64,
    pub basis: Basis,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpOptions {
    pub max_iter: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

pub fn solve_lp(model: &LpModel) -> Result<LpSolution> {
    solve_lp_with(model, None, None, &LpOptions::default())
}

pub fn solve_lp_warm(model: &LpModel, warm: Option<&Basis>) -> Result<LpSolution> {
    solve_lp_with(model, None, warm, &LpOptions::default())
}

/// Solves `model`, optionally overriding the structural bounds and starting
/// from a previous basis.
pub fn solve_lp_with(
    model: &LpModel,
    bounds: Option<(&[f64], &[f64])>,
    warm: Option<&Basis>,
    opts: &LpOptions,
) -> Result<LpSolution> {
    let (lo, hi) = bounds.unwrap_or((&model.lo, &model.hi));
    assert_eq!(lo.len(), model.num_vars());
    assert_eq!(hi.len(), model.num_vars());
    if lo.iter().zip(hi).any(|(l, h)| l > h) {
        let n = model.num_vars();
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; n],
            duals: vec![0.0; model.num_rows()],
            objective: f64::NAN,
            basis: Basis::default(),
            iterations: 0,
        });
    }
    let attempt = |start: Option<&Basis>, max_widen: u32| {
        let mut s = Simplex::new(model, lo, hi);
        s.install(start)?;
        // a dual feasible warm start (bounds tightened or rows appended) is
        // repaired by the dual simplex; the primal pass then confirms it
        let mut done = 0;
        if start.is_some() && s.dual_feasible() {
            match s.dual(opts.max_iter)? {
                DualEnd::Infeasible(it) => return Ok(s.finish(LpStatus::Infeasible, it)),
                DualEnd::Feasible(it) | DualEnd::GaveUp(it) => done = it,
            }
        }
        let mut sol = s.run(opts.max_iter.saturating_sub(done), max_widen)?;
        sol.iterations += done;
        Ok(sol)
    };
    match attempt(warm, if warm.is_some() { 0 } else { MAX_WIDEN }) {
        // a warm basis can start the solve in a badly conditioned corner
        Err(MigrateError::Numerical(_)) if warm.is_some() => attempt(None, MAX_WIDEN),
        r => r,
    }
}

enum DualEnd {
    Feasible(usize),
    Infeasible(usize),
    GaveUp(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
    Free,
}

struct Simplex<'a> {
    model: &'a LpModel,
    m: usize,
    n: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    status: Vec<Status>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    x: Vec<f64>,
    /// Primal feasibility tolerance per variable, scaled by its bounds or row.
    ftol: Vec<f64>,
    /// Dual feasibility tolerance per variable, scaled by its cost and column.
    dtol: Vec<f64>,
    pivots_since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(model: &'a LpModel, lo: &[f64], hi: &[f64]) -> Self {
        let m = model.num_rows();
        let n = model.num_vars();
        let mut slo = lo.to_vec();
        let mut shi = hi.to_vec();
        for &sense in &model.senses {
            let (l, h) = match sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            slo.push(l);
            shi.push(h);
        }
        let mut cost = model.obj.clone();
        cost.resize(n + m, 0.0);
        let mut row_scale: Vec<f64> = model.rhs.iter().map(|r| r.abs().max(1.0)).collect();
        let mut col_scale = vec![1.0f64; n + m];
        for (j, col) in model.cols.iter().enumerate() {
            for &(i, a) in col {
                row_scale[i] = row_scale[i].max(a.abs());
                col_scale[j] = col_scale[j].max(a.abs());
            }
        }
        let ftol = (0..n + m)
            .map(|k| {
                let scale = if k < n {
                    [slo[k], shi[k]].iter().filter(|b| b.is_finite()).fold(1.0f64, |a, b| a.max(b.abs()))
                } else {
                    row_scale[k - n]
                };
                FEAS_TOL * scale
            })
            .collect();
        let dtol = (0..n + m).map(|k| DUAL_TOL * cost[k].abs().max(1.0) * col_scale[k]).collect();
        Simplex {
            model,
            m,
            n,
            lo: slo,
            hi: shi,
            cost,
            status: vec![Status::Lower; n + m],
            basis: Vec::new(),
            binv: Vec::new(),
            x: vec![0.0; n + m],
            ftol,
            dtol,
            pivots_since_refactor: 0,
        }
    }

    fn var_index(&self, v: VarRef) -> Option<usize> {
        match v {
            VarRef::Col(j) if j < self.n => Some(j),
            VarRef::Slack(i) if i < self.m => Some(self.n + i),
            _ => None,
        }
    }

    fn var_ref(&self, k: usize) -> VarRef {
        if k < self.n {
            VarRef::Col(k)
        } else {
            VarRef::Slack(k - self.n)
        }
    }

    fn default_status(&self, k: usize) -> Status {
        if self.lo[k].is_finite() {
            Status::Lower
        } else if self.hi[k].is_finite() {
            Status::Upper
        } else {
            Status::Free
        }
    }

    fn install(&mut self, warm: Option<&Basis>) -> Result<()> {
        let ntot = self.n + self.m;
        for k in 0..ntot {
            self.status[k] = self.default_status(k);
        }
        if let Some(b) = warm {
            let mut basic = Vec::with_capacity(self.m);
            let mut seen = vec![false; ntot];
            for &v in &b.basic {
                if let Some(k) = self.var_index(v) {
                    if !seen[k] {
                        seen[k] = true;
                        basic.push(k);
                    }
                }
            }
            // rows appended after the basis was taken start with their slack basic
            for i in b.rows..self.m {
                let k = self.n + i;
                if !seen[k] {
                    seen[k] = true;
                    basic.push(k);
                }
            }
            if basic.len() == self.m {
                for &v in &b.at_upper {
                    if let Some(k) = self.var_index(v) {
                        if !seen[k] && self.hi[k].is_finite() {
                            self.status[k] = Status::Upper;
                        }
                    }
                }
                for &k in &basic {
                    self.status[k] = Status::Basic;
                }
                self.basis = basic;
                if self.refactor().is_ok() {
                    return Ok(());
                }
                for k in 0..ntot {
                    self.status[k] = self.default_status(k);
                }
            }
        }
        self.basis = (self.n..ntot).collect();
        for &k in &self.basis {
            self.status[k] = Status::Basic;
        }
        self.refactor()
    }

    fn for_col(&self, k: usize, mut f: impl FnMut(usize, f64)) {
        if k < self.n {
            for &(i, a) in &self.model.cols[k] {
                f(i, a);
            }
        } else {
            f(k - self.n, 1.0);
        }
    }

    /// Recomputes the explicit inverse by Gauss-Jordan with partial pivoting.
    ///
    /// Basic columns without an acceptable pivot are swapped for the slacks of
    /// the rows left unpivoted and become nonbasic at a bound.
    fn refactor(&mut self) -> Result<()> {
        for _ in 0..2 {
            match self.invert() {
                Ok(inv) => {
                    self.binv = inv;
                    self.pivots_since_refactor = 0;
                    return Ok(());
                }
                Err((bad, free_rows)) => {
                    log::debug!("repairing {} singular basis columns", bad.len());
                    for (pos, row) in bad.into_iter().zip(free_rows) {
                        let k = self.basis[pos];
                        self.status[k] = self.default_status(k);
                        let slack = self.n + row;
                        self.basis[pos] = slack;
                        self.status[slack] = Status::Basic;
                    }
                }
            }
        }
        Err(MigrateError::Numerical("singular basis".into()))
    }

    /// Inverse of the basis, or the singular basis positions and the rows
    /// left without a pivot.
    ///
    /// Basic slacks are unit columns, so only the block of structural columns
    /// on the rows whose slack is nonbasic is inverted densely.
    fn invert(&self) -> std::result::Result<Vec<f64>, (Vec<usize>, Vec<usize>)> {
        let m = self.m;
        let mut slack_pos = vec![usize::MAX; m];
        let mut cols: Vec<usize> = Vec::new();
        for (pos, &k) in self.basis.iter().enumerate() {
            if k >= self.n {
                slack_pos[k - self.n] = pos;
            } else {
                cols.push(pos);
            }
        }
        let rows: Vec<usize> = (0..m).filter(|&i| slack_pos[i] == usize::MAX).collect();
        let k = cols.len();
        debug_assert_eq!(rows.len(), k);
        let mut local = vec![usize::MAX; m];
        for (r, &i) in rows.iter().enumerate() {
            local[i] = r;
        }
        // a = structural block restricted to `rows`, inv = its inverse
        let mut a = vec![0.0; k * k];
        for (c, &pos) in cols.iter().enumerate() {
            for &(i, v) in &self.model.cols[self.basis[pos]] {
                if local[i] != usize::MAX {
                    a[local[i] * k + c] = v;
                }
            }
        }
        let mut inv = vec![0.0; k * k];
        for r in 0..k {
            inv[r * k + r] = 1.0;
        }
        let mut used = vec![false; k];
        let mut pivot_row = vec![usize::MAX; k];
        let mut bad = Vec::new();
        for c in 0..k {
            let mut piv = usize::MAX;
            let mut best = 1e-11;
            for r in 0..k {
                let v = a[r * k + c].abs();
                if !used[r] && v > best {
                    best = v;
                    piv = r;
                }
            }
            if piv == usize::MAX {
                bad.push(cols[c]);
                continue;
            }
            used[piv] = true;
            pivot_row[c] = piv;
            let p = a[piv * k + c];
            for j in 0..k {
                a[piv * k + j] /= p;
                inv[piv * k + j] /= p;
            }
            for r in 0..k {
                if r != piv {
                    let f = a[r * k + c];
                    if f != 0.0 {
                        for j in 0..k {
                            a[r * k + j] -= f * a[piv * k + j];
                            inv[r * k + j] -= f * inv[piv * k + j];
                        }
                    }
                }
            }
        }
        if !bad.is_empty() {
            let free_rows = (0..k).filter(|&r| !used[r]).map(|r| rows[r]).collect();
            return Err((bad, free_rows));
        }
        let mut out = vec![0.0; m * m];
        for (c, &pos) in cols.iter().enumerate() {
            let src = &inv[pivot_row[c] * k..(pivot_row[c] + 1) * k];
            for (r, &i) in rows.iter().enumerate() {
                out[pos * m + i] = src[r];
            }
        }
        for i in 0..m {
            if slack_pos[i] != usize::MAX {
                out[slack_pos[i] * m + i] = 1.0;
            }
        }
        // slack rows: e_i minus the structural activity they carry
        for (c, &pos) in cols.iter().enumerate() {
            let src = &inv[pivot_row[c] * k..(pivot_row[c] + 1) * k];
            for &(i, v) in &self.model.cols[self.basis[pos]] {
                let sp = slack_pos[i];
                if sp == usize::MAX {
                    continue;
                }
                for (r, &j) in rows.iter().enumerate() {
                    out[sp * m + j] -= v * src[r];
                }
            }
        }
        Ok(out)
    }

    fn nonbasic_value(&self, k: usize) -> f64 {
        match self.status[k] {
            Status::Lower => self.lo[k],
            Status::Upper => self.hi[k],
            _ => 0.0,
        }
    }

    fn compute_primal(&mut self) {
        let m = self.m;
        let mut r: Vec<f64> = self.model.rhs.clone();
        for k in 0..self.n + m {
            if self.status[k] != Status::Basic {
                let v = self.nonbasic_value(k);
                self.x[k] = v;
                if v != 0.0 {
                    if k < self.n {
                        for &(i, a) in &self.model.cols[k] {
                            r[i] -= a * v;
                        }
                    } else {
                        r[k - self.n] -= v;
                    }
                }
            }
        }
        for pos in 0..m {
            let row = &self.binv[pos * m..(pos + 1) * m];
            self.x[self.basis[pos]] = row.iter().zip(&r).map(|(a, b)| a * b).sum();
        }
    }

    fn below(&self, k: usize) -> bool {
        self.x[k] < self.lo[k] - self.ftol[k]
    }

    fn above(&self, k: usize) -> bool {
        self.x[k] > self.hi[k] + self.ftol[k]
    }

    fn row_duals(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (pos, &c) in cb.iter().enumerate() {
            if c != 0.0 {
                let row = &self.binv[pos * m..(pos + 1) * m];
                for (yk, a) in y.iter_mut().zip(row) {
                    *yk += c * a;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, k: usize, c: f64, y: &[f64]) -> f64 {
        let mut d = c;
        self.for_col(k, |i, a| d -= y[i] * a);
        d
    }

    fn run(&mut self, max_iter: usize, max_widen: u32) -> Result<LpSolution> {
        let m = self.m;
        let ntot = self.n + m;
        let mut iterations = 0usize;
        let mut degenerate_run = 0usize;
        let mut bland = false;
        // best infeasibility and best objective seen so far
        let mut best = [f64::INFINITY; 2];
        let mut since_best = 0usize;
        let mut widened = 0u32;
        let patience = 200.max(2 * ntot);
        // original bounds while a perturbation is active
        let mut saved: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut perturbed_once = false;
        let mut restores = 0u32;
        // entering candidates whose pivot was too small, cleared after each pivot
        let mut rejected = vec![false; ntot];
        let mut allow_small = false;

        loop {
            self.compute_primal();
            let infeasible = self.basis.iter().any(|&k| self.below(k) || self.above(k));
            let phase_one = infeasible;
            // Stalls from round-off show up as long runs without progress;
            // widening the tolerances lets the solve settle.
            let progress = if phase_one {
                self.basis
                    .iter()
                    .map(|&k| (self.lo[k] - self.x[k]).max(0.0) + (self.x[k] - self.hi[k]).max(0.0))
                    .sum::<f64>()
            } else {
                (0..ntot).map(|k| self.cost[k] * self.x[k]).sum::<f64>()
            };
            let slot = usize::from(!phase_one);
            if progress < best[slot] - 1e-9 * best[slot].abs().max(1.0) {
                best[slot] = progress;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > patience {
                    if widened == max_widen {
                        return Err(MigrateError::Numerical("simplex stalled".into()));
                    }
                    widened += 1;
                    since_best = 0;
                    for v in self.ftol.iter_mut() {
                        *v *= 10.0;
                    }
                    self.refactor()?;
                    continue;
                }
            }
            let cb: Vec<f64> = self
                .basis
                .iter()
                .map(|&k| {
                    if phase_one {
                        if self.below(k) {
                            -1.0
                        } else if self.above(k) {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        self.cost[k]
                    }
                })
                .collect();
            let y = self.row_duals(&cb);

            // entering variable
            let mut enter: Option<(usize, f64)> = None;
            for k in 0..ntot {
                let st = self.status[k];
                if st == Status::Basic || self.lo[k] == self.hi[k] || rejected[k] {
                    continue;
                }
                let c = if phase_one { 0.0 } else { self.cost[k] };
                let d = self.reduced_cost(k, c, &y);
                let eligible = match st {
                    Status::Lower => d < -self.dtol[k],
                    Status::Upper => d > self.dtol[k],
                    Status::Free => d.abs() > self.dtol[k],
                    Status::Basic => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    enter = Some((k, d));
                    break;
                }
                if enter.is_none_or(|(_, bd)| d.abs() > bd.abs()) {
                    enter = Some((k, d));
                }
            }

            if enter.is_none() && rejected.iter().any(|&r| r) {
                // every candidate needs a tiny pivot: split the vertex first,
                // and only then accept small pivots
                rejected.fill(false);
                allow_small = false;
                if perturbed_once || restores >= MAX_RESTORES {
                    allow_small = true;
                } else {
                    perturbed_once = true;
                    saved.get_or_insert_with(|| (self.lo.clone(), self.hi.clone()));
                    self.perturb_bounds();
                }
                continue;
            }
            let Some((q, dq)) = enter else {
                if let Some((lo, hi)) = saved.take() {
                    restores += 1;
                    self.lo = lo;
                    self.hi = hi;
                    degenerate_run = 0;
                    best = [f64::INFINITY; 2];
                    since_best = 0;
                    continue;
                }
                if phase_one {
                    return Ok(self.finish(LpStatus::Infeasible, iterations));
                }
                return Ok(self.finish(LpStatus::Optimal, iterations));
            };

            if iterations >= max_iter {
                return Err(MigrateError::IterationLimit(max_iter));
            }
            iterations += 1;

            let dir = if dq < 0.0 { 1.0 } else { -1.0 };
            let mut col = vec![0.0; m];
            self.for_col(q, |i, a| col[i] = a);
            let alpha: Vec<f64> = (0..m)
                .map(|pos| {
                    let row = &self.binv[pos * m..(pos + 1) * m];
                    row.iter().zip(&col).map(|(a, b)| a * b).sum()
                })
                .collect();

            // ratio test: x_B moves by -dir * t * alpha
            // (pos, step, step with tolerance, leaves at upper)
            let pivot_tol = PIVOT_TOL;
            let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
            for pos in 0..m {
                let a = alpha[pos];
                if a.abs() <= pivot_tol {
                    continue;
                }
                let k = self.basis[pos];
                let rate = -dir * a;
                let xk = self.x[k];
                // unclamped ratio; negative when already past the bound within tolerance
                let cand = if rate < 0.0 {
                    if phase_one && self.above(k) {
                        Some(((xk - self.hi[k]) / -rate, true))
                    } else if self.lo[k].is_finite() && !self.below(k) {
                        Some(((xk - self.lo[k]) / -rate, false))
                    } else {
                        None
                    }
                } else if phase_one && self.below(k) {
                    Some(((self.lo[k] - xk) / rate, false))
                } else if self.hi[k].is_finite() && !self.above(k) {
                    Some(((self.hi[k] - xk) / rate, true))
                } else {
                    None
                };
                if let Some((raw, up)) = cand {
                    let slack_t = (raw + self.ftol[k] / rate.abs()).max(0.0);
                    cands.push((pos, raw.max(0.0), slack_t, up));
                }
            }
            // Harris two-pass choice: among rows blocking within tolerance of
            // the first block, take the largest pivot (Bland: lowest index).
            let best: Option<(usize, f64, bool)> = if bland {
                let tmin = cands.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 <= tmin + 1e-12)
                    .min_by_key(|c| self.basis[c.0])
                    .map(|c| (c.0, c.1, c.3))
            } else {
                let tmax = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                cands
                    .iter()
                    .filter(|c| c.1 <= tmax)
                    .max_by(|x, y| alpha[x.0].abs().total_cmp(&alpha[y.0].abs()).then(y.0.cmp(&x.0)))
                    .map(|c| (c.0, c.1, c.3))
            };

            let range = self.hi[q] - self.lo[q];
            let flip = range.is_finite() && best.is_none_or(|(_, t, _)| range <= t);
            if flip {
                self.status[q] = if self.status[q] == Status::Lower {
                    Status::Upper
                } else {
                    Status::Lower
                };
                degenerate_run = 0;
                continue;
            }
            let Some((r, t, up)) = best else {
                if phase_one {
                    return Err(MigrateError::Numerical("unbounded phase-one ray".into()));
                }
                return Ok(self.finish(LpStatus::Unbounded, iterations));
            };
            if alpha[r].abs() < PIVOT_REJECT && !allow_small {
                rejected[q] = true;
                continue;
            }
            rejected.fill(false);

            let obj_scale = if phase_one { 1.0 } else { self.basis.iter().map(|&k| (self.cost[k] * self.x[k]).abs()).sum::<f64>().max(1.0) };
            if t * dq.abs() <= 1e-9 * obj_scale {
                degenerate_run += 1;
                if degenerate_run > DEGENERATE_SWITCH {
                    if perturbed_once || restores >= MAX_RESTORES {
                        bland = true;
                    } else {
                        perturbed_once = true;
                        degenerate_run = 0;
                        saved.get_or_insert_with(|| (self.lo.clone(), self.hi.clone()));
                        self.perturb_bounds();
                        continue;
                    }
                }
            } else {
                degenerate_run = 0;
            }

            let leaving = self.basis[r];
            // A leaving variable already past its bound (within tolerance)
            // would be snapped back and drag the other basics with it; move
            // the bound to where it is instead.
            let x_new = self.x[leaving] - dir * t * alpha[r];
            let past = if up { x_new > self.hi[leaving] } else { x_new < self.lo[leaving] };
            if past && restores < MAX_RESTORES && self.lo[leaving] != self.hi[leaving] {
                if saved.is_none() {
                    saved = Some((self.lo.clone(), self.hi.clone()));
                }
                if up {
                    self.hi[leaving] = x_new;
                } else {
                    self.lo[leaving] = x_new;
                }
            }
            self.status[leaving] = if up { Status::Upper } else { Status::Lower };
            if self.lo[leaving] == self.hi[leaving] {
                self.status[leaving] = Status::Lower;
            }
            self.status[q] = Status::Basic;
            self.basis[r] = q;

            self.pivot(r, &alpha);
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
        }
    }

    fn reduced_costs(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&k| self.cost[k]).collect();
        let y = self.row_duals(&cb);
        (0..self.n + self.m)
            .map(|k| {
                if self.status[k] == Status::Basic {
                    0.0
                } else {
                    self.reduced_cost(k, self.cost[k], &y)
                }
            })
            .collect()
    }

    fn dual_feasible(&self) -> bool {
        let d = self.reduced_costs();
        (0..self.n + self.m).all(|k| {
            if self.lo[k] == self.hi[k] {
                return true;
            }
            match self.status[k] {
                Status::Basic => true,
                Status::Lower => d[k] >= -self.dtol[k],
                Status::Upper => d[k] <= self.dtol[k],
                Status::Free => d[k].abs() <= self.dtol[k],
            }
        })
    }

    /// Dual simplex from a dual feasible basis until the primal is feasible.
    ///
    /// Leaves the basis where it stopped; `GaveUp` hands a long or
    /// numerically doubtful run back to the primal method.
    fn dual(&mut self, max_iter: usize) -> Result<DualEnd> {
        let m = self.m;
        let ntot = self.n + m;
        let limit = max_iter.min(1000.max(5 * ntot));
        let mut iterations = 0usize;
        loop {
            self.compute_primal();
            // leaving row: largest scaled bound violation
            let mut leave: Option<(usize, f64, bool)> = None;
            for (pos, &k) in self.basis.iter().enumerate() {
                let (viol, up) = if self.below(k) {
                    (self.lo[k] - self.x[k], false)
                } else if self.above(k) {
                    (self.x[k] - self.hi[k], true)
                } else {
                    continue;
                };
                let score = viol / self.ftol[k];
                if leave.is_none_or(|(_, s, _)| score > s) {
                    leave = Some((pos, score, up));
                }
            }
            let Some((r, _, up)) = leave else {
                return Ok(DualEnd::Feasible(iterations));
            };
            if iterations >= limit {
                return Ok(DualEnd::GaveUp(iterations));
            }
            iterations += 1;

            let d = self.reduced_costs();
            let rho = &self.binv[r * m..(r + 1) * m];
            // x_r moves by -alpha_rk per unit increase of x_k; it must rise
            // when below its lower bound and fall when above its upper one
            let sign = if up { 1.0 } else { -1.0 };
            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
            for k in 0..ntot {
                let st = self.status[k];
                if st == Status::Basic || self.lo[k] == self.hi[k] {
                    continue;
                }
                let mut a = 0.0;
                self.for_col(k, |i, v| a += rho[i] * v);
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let s_a = sign * a;
                let eligible = match st {
                    Status::Lower => s_a > 0.0,
                    Status::Upper => s_a < 0.0,
                    Status::Free => true,
                    Status::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let dk = d[k].abs();
                cands.push((k, a, dk / a.abs(), (dk + self.dtol[k]) / a.abs()));
            }
            if cands.is_empty() {
                return Ok(DualEnd::Infeasible(iterations));
            }
            // Harris two-pass choice on the dual ratios
            let tmax = cands.iter().map(|c| c.3).fold(f64::INFINITY, f64::min);
            let &(q, arq, _, _) = cands
                .iter()
                .filter(|c| c.2 <= tmax)
                .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()).then(y.0.cmp(&x.0)))
                .expect("nonempty");

            let mut col = vec![0.0; m];
            self.for_col(q, |i, a| col[i] = a);
            let alpha: Vec<f64> = (0..m)
                .map(|pos| {
                    let row = &self.binv[pos * m..(pos + 1) * m];
                    row.iter().zip(&col).map(|(a, b)| a * b).sum()
                })
                .collect();
            if (alpha[r] - arq).abs() > 1e-7 * arq.abs().max(1.0) || alpha[r].abs() < PIVOT_REJECT {
                return Ok(DualEnd::GaveUp(iterations));
            }

            let leaving = self.basis[r];
            self.status[leaving] = if up { Status::Upper } else { Status::Lower };
            self.status[q] = Status::Basic;
            self.basis[r] = q;
            self.pivot(r, &alpha);
            if self.pivots_since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                if !self.dual_feasible() {
                    return Ok(DualEnd::GaveUp(iterations));
                }
            }
        }
    }

    /// Product-form update of the explicit inverse after row `r` pivots on
    /// the entering column `alpha`.
    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let pr = alpha[r];
        let row_r: Vec<f64> = self.binv[r * m..(r + 1) * m].iter().map(|v| v / pr).collect();
        for pos in 0..m {
            if pos == r {
                continue;
            }
            let f = alpha[pos];
            if f != 0.0 {
                let row = &mut self.binv[pos * m..(pos + 1) * m];
                for (v, rr) in row.iter_mut().zip(&row_r) {
                    *v -= f * rr;
                }
            }
        }
        self.binv[r * m..(r + 1) * m].copy_from_slice(&row_r);
        self.pivots_since_refactor += 1;
    }

    /// Relaxes every non-fixed finite bound by a small deterministic amount
    /// so that degenerate vertices split apart.
    fn perturb_bounds(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for k in 0..self.n + self.m {
            if self.lo[k] == self.hi[k] {
                continue;
            }
            let mut widen = |b: f64| 1e-6 * (1.0 + b.abs()) * rng.random_range(1.0..2.0);
            if self.lo[k].is_finite() {
                self.lo[k] -= widen(self.lo[k]);
            }
            if self.hi[k].is_finite() {
                self.hi[k] += widen(self.hi[k]);
            }
        }
    }

    fn finish(&mut self, status: LpStatus, iterations: usize) -> LpSolution {
        let n = self.n;
        let cb: Vec<f64> = self.basis.iter().map(|&k| self.cost[k]).collect();
        let duals = if status == LpStatus::Optimal {
            self.row_duals(&cb)
        } else {
            vec![0.0; self.m]
        };
        let x: Vec<f64> = self.x[..n].to_vec();
        let objective = match status {
            LpStatus::Optimal => x.iter().zip(&self.model.obj).map(|(a, b)| a * b).sum(),
            LpStatus::Infeasible => f64::NAN,
            LpStatus::Unbounded => f64::NEG_INFINITY,
        };
        let basis = Basis {
            basic: self.basis.iter().map(|&k| self.var_ref(k)).collect(),
            at_upper: (0..n + self.m)
                .filter(|&k| self.status[k] == Status::Upper)
                .map(|k| self.var_ref(k))
                .collect(),
            rows: self.m,
        };
        LpSolution {
            status,
            x,
            duals,
            objective,
            basis,
            iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn single_ge_row() {
        let mut lp = LpModel::new();
        let x = lp.add_var(1.0, 0.0, INF);
        lp.add_row(Row::new(vec![(x, 1.0)], Sense::Ge, 3.0));
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 3.0).abs() < 1e-9);
        assert!((sol.duals[0] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 3.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_direction() {
        let mut lp = LpModel::new();
        lp.add_var(-1.0, 0.0, INF);
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut lp = LpModel::new();
        let x = lp.add_var(0.0, 0.0, INF);
        lp.add_row(Row::new(vec![(x, 1.0)], Sense::Ge, 1.0));
        lp.add_row(Row::new(vec![(x, 1.0)], Sense::Le, 0.0));
        assert_eq!(solve_lp(&lp).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_rows_and_free_variables() {
        // min x + y  s.t. x - y = 1, x + y >= 3, y free
        let mut lp = LpModel::new();
        let x = lp.add_var(1.0, 0.0, INF);
        let y = lp.add_var(1.0, -INF, INF);
        lp.add_row(Row::new(vec![(x, 1.0), (y, -1.0)], Sense::Eq, 1.0));
        lp.add_row(Row::new(vec![(x, 1.0), (y, 1.0)], Sense::Ge, 3.0));
        let sol = solve_lp(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!(lp.max_violation(&sol.x) < 1e-9);
    }

    #[test]
    fn adding_columns_never_hurts_and_duplicates_change_nothing() {
        let mut lp = LpModel::new();
        lp.add_row(Row::new(vec![], Sense::Ge, 4.0));
        lp.add_row(Row::new(vec![], Sense::Ge, 2.0));
        lp.add_column(5.0, &[1.0, 0.0]);
        lp.add_column(5.0, &[0.0, 1.0]);
        let first = solve_lp(&lp).unwrap();
        assert!((first.objective - 30.0).abs() < 1e-9);

        lp.add_column(5.0, &[0.0, 1.0]);
        let dup = solve_lp_warm(&lp, Some(&first.basis)).unwrap();
        assert!((dup.objective - first.objective).abs() < 1e-9);

        // reduced cost 6 - 4*5... = 6 - (5 + 5) < 0, so the optimum must drop
        let d: f64 = 6.0 - first.duals[0] - first.duals[1];
        assert!(d < 0.0);
        lp.add_column(6.0, &[1.0, 1.0]);
        let better = solve_lp_warm(&lp, Some(&dup.basis)).unwrap();
        assert!(better.objective < first.objective - 1e-9);
        assert!((better.objective - 22.0).abs() < 1e-9);
    }

    #[test]
    fn warm_start_after_adding_a_row() {
        let mut lp = LpModel::new();
        let x = lp.add_var(-1.0, 0.0, 10.0);
        let y = lp.add_var(-1.0, 0.0, 10.0);
        lp.add_row(Row::new(vec![(x, 1.0), (y, 2.0)], Sense::Le, 12.0));
        let first = solve_lp(&lp).unwrap();
        assert!((first.objective + 11.0).abs() < 1e-9);
        lp.add_row(Row::new(vec![(x, 1.0)], Sense::Le, 4.0));
        let second = solve_lp_warm(&lp, Some(&first.basis)).unwrap();
        assert!((second.objective + 8.0).abs() < 1e-9);
        assert_eq!(second, solve_lp_warm(&lp, Some(&first.basis)).unwrap());
    }

    #[test]
    #[should_panic(expected = "column length")]
    fn add_column_checks_length() {
        let mut lp = LpModel::new();
        lp.add_row(Row::new(vec![], Sense::Ge, 1.0));
        lp.add_column(1.0, &[1.0, 2.0]);
    }

    #[test]
    fn iteration_limit_is_reported() {
        let mut lp = LpModel::new();
        let x = lp.add_var(1.0, 0.0, INF);
        lp.add_row(Row::new(vec![(x, 1.0)], Sense::Ge, 3.0));
        let err = solve_lp_with(&lp, None, None, &LpOptions { max_iter: 0 }).unwrap_err();
        assert!(matches!(err, MigrateError::IterationLimit(0)));
    }

    /// Objective of the dual: b·y plus the bound terms of the reduced costs.
    fn dual_objective(lp: &LpModel, sol: &LpSolution) -> f64 {
        let mut val: f64 = (0..lp.num_rows()).map(|i| lp.rhs(i) * sol.duals[i]).sum();
        for j in 0..lp.num_vars() {
            let mut d = lp.obj()[j];
            for &(i, a) in lp.column(j) {
                d -= sol.duals[i] * a;
            }
            if d > 0.0 {
                val += d * lp.lower()[j];
            } else if d < 0.0 {
                val += d * lp.upper()[j];
            }
        }
        val
    }

    fn random_lp() -> impl Strategy<Value = LpModel> {
        (2usize..6, 1usize..6).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-5i32..6, n),
                prop::collection::vec((0i32..3, 1i32..6), n),
                prop::collection::vec((prop::collection::vec(-4i32..5, n), 0u8..3, -6i32..10), m),
            )
                .prop_map(move |(c, bnds, rows)| {
                    let mut lp = LpModel::new();
                    for j in 0..n {
                        let (l, w) = bnds[j];
                        lp.add_var(c[j] as f64, l as f64, (l + w) as f64);
                    }
                    for (coef, sense, rhs) in rows {
                        let sense = match sense {
                            0 => Sense::Le,
                            1 => Sense::Ge,
                            _ => Sense::Eq,
                        };
                        let coeffs = coef.iter().enumerate().map(|(j, &a)| (j, a as f64)).collect();
                        lp.add_row(Row::new(coeffs, sense, rhs as f64));
                    }
                    lp
                })
        })
    }

    proptest! {
        #[test]
        fn strong_duality_and_sign_conventions(lp in random_lp()) {
            let sol = solve_lp(&lp).unwrap();
            // bounded variables: never unbounded
            prop_assert_ne!(sol.status, LpStatus::Unbounded);
            if sol.status == LpStatus::Optimal {
                prop_assert!(lp.max_violation(&sol.x) < 1e-7);
                prop_assert!((sol.objective - dual_objective(&lp, &sol)).abs() < 1e-7);
                for i in 0..lp.num_rows() {
                    match lp.sense(i) {
                        Sense::Ge => prop_assert!(sol.duals[i] >= -1e-7),
                        Sense::Le => prop_assert!(sol.duals[i] <= 1e-7),
                        Sense::Eq => {}
                    }
                }
            }
        }

        #[test]
        fn warm_start_matches_cold_start(lp in random_lp(), extra in prop::collection::vec(-3i32..4, 5), rhs in 0i32..6) {
            let cold = solve_lp(&lp).unwrap();
            let mut grown = lp.clone();
            let coeffs = (0..grown.num_vars()).map(|j| (j, extra[j % extra.len()] as f64)).collect();
            grown.add_row(Row::new(coeffs, Sense::Le, rhs as f64));
            let warm = solve_lp_warm(&grown, Some(&cold.basis)).unwrap();
            let fresh = solve_lp(&grown).unwrap();
            prop_assert_eq!(warm.status, fresh.status);
            if warm.status == LpStatus::Optimal {
                prop_assert!((warm.objective - fresh.objective).abs() < 1e-7);
            }
        }
    }
}
