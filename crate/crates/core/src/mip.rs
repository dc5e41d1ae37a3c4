//! Branch-and-bound over [`crate::lp`] relaxations: depth-first until the
//! first incumbent, then best-bound-first with a periodic dive.
//!
//! Integral LP points are handed to an optional lazy separator. Returned rows
//! are appended to the model (they are assumed globally valid) and the node
//! is re-solved; a point becomes the incumbent only when the separator has
//! nothing to add.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use crate::error::{MigrateError, Result};
use crate::lp::{solve_lp_with, Basis, LpModel, LpOptions, LpStatus, Row};

pub const INT_TOL: f64 = 1e-6;
pub const DEFAULT_NODE_LIMIT: usize = 1_000_000;
/// Best-bound nodes between dives for new incumbents.
const DIVE_EVERY: usize = 200;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MipModel {
    pub lp: LpModel,
    pub integer: Vec<bool>,
}

impl MipModel {
    pub fn new() -> MipModel {
        MipModel::default()
    }

    pub fn add_var(&mut self, obj: f64, lo: f64, hi: f64, integer: bool) -> usize {
        self.integer.push(integer);
        self.lp.add_var(obj, lo, hi)
    }

    pub fn add_row(&mut self, row: Row) -> usize {
        self.lp.add_row(row)
    }

    pub fn num_vars(&self) -> usize {
        self.lp.num_vars()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.lp.obj().iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    /// Incumbent proven optimal within the absolute gap.
    Optimal,
    /// Incumbent within the requested relative gap, or stopped by the time limit.
    Feasible,
    Infeasible,
    /// Time limit reached before any incumbent was found.
    NoSolution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipSolution {
    pub status: MipStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub cuts_added: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MipOptions {
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub lp: LpOptions,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            rel_gap: 0.0,
            abs_gap: 1e-6,
            node_limit: DEFAULT_NODE_LIMIT,
            time_limit: None,
            lp: LpOptions::default(),
        }
    }
}

pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1e-9)).max(0.0)
}

/// Most fractional integer variable, ties to the lowest index.
pub fn branch_select(x: &[f64], integer: &[bool]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&v, &int)) in x.iter().zip(integer).enumerate() {
        if !int {
            continue;
        }
        let frac = v - v.floor();
        if frac <= INT_TOL || frac >= 1.0 - INT_TOL {
            continue;
        }
        let score = (frac - 0.5).abs();
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((j, score));
        }
    }
    best.map(|(j, _)| j)
}

pub type Separator<'a> = dyn FnMut(&[f64]) -> Result<Vec<Row>> + 'a;

struct Node {
    bound: f64,
    id: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // reversed so the max-heap pops the smallest bound, then the oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

pub fn solve_mip(
    model: &mut MipModel,
    opts: &MipOptions,
    mut separator: Option<&mut Separator<'_>>,
) -> Result<MipSolution> {
    assert!((0.0..1.0).contains(&opts.rel_gap), "rel_gap must lie in [0, 1)");
    assert_eq!(model.integer.len(), model.num_vars());
    let start = Instant::now();

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        id: 0,
        lo: model.lp.lower().to_vec(),
        hi: model.lp.upper().to_vec(),
        basis: None,
    });
    let mut next_id = 1;
    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let mut nodes = 0usize;
    let mut cuts_added = 0usize;
    let mut last_bound = f64::NEG_INFINITY;
    let mut lp_iters = 0usize;

    let finish = |incumbent: Option<(Vec<f64>, f64)>, bound: f64, status: MipStatus, nodes, cuts_added| {
        let (x, objective) = incumbent.unwrap_or((Vec::new(), f64::INFINITY));
        let bound = bound.min(objective);
        MipSolution {
            status,
            gap: if objective.is_finite() {
                relative_gap(objective, bound)
            } else {
                f64::INFINITY
            },
            x,
            objective,
            bound,
            nodes,
            cuts_added,
        }
    };

    let mut dive: Option<Node> = None;
    let mut diving = false;
    let mut since_dive = 0usize;
    while let Some(node) = dive.take().or_else(|| {
        diving = false;
        heap.pop()
    }) {
        let open_min = heap.peek().map_or(node.bound, |n| n.bound.min(node.bound));
        let bound = open_min.max(last_bound);
        last_bound = bound;
        if let Some((_, inc)) = &incumbent {
            let done_abs = inc - bound <= opts.abs_gap;
            if done_abs || relative_gap(*inc, bound) <= opts.rel_gap {
                let status = if done_abs {
                    MipStatus::Optimal
                } else {
                    MipStatus::Feasible
                };
                return Ok(finish(incumbent, bound, status, nodes, cuts_added));
            }
        }
        if opts.time_limit.is_some_and(|t| start.elapsed() >= t) {
            let status = if incumbent.is_some() {
                MipStatus::Feasible
            } else {
                MipStatus::NoSolution
            };
            return Ok(finish(incumbent, bound, status, nodes, cuts_added));
        }
        if nodes >= opts.node_limit {
            return Err(MigrateError::NodeLimit(opts.node_limit));
        }
        nodes += 1;
        since_dive += 1;
        if nodes % 500 == 0 {
            log::debug!(
                "b&b: {nodes} nodes, {} open, bound {bound:.1}, incumbent {:?}, {cuts_added} cuts, {lp_iters} pivots, {:.1?}",
                heap.len(),
                incumbent.as_ref().map(|(_, v)| *v),
                start.elapsed()
            );
        }

        let mut basis = node.basis;
        loop {
            let sol = solve_lp_with(&model.lp, Some((&node.lo, &node.hi)), basis.as_ref(), &opts.lp)?;
            lp_iters += sol.iterations;
            match sol.status {
                LpStatus::Infeasible => break,
                LpStatus::Unbounded => {
                    return Err(MigrateError::Numerical("unbounded relaxation".into()));
                }
                LpStatus::Optimal => {}
            }
            if let Some((_, inc)) = &incumbent {
                if sol.objective >= inc - opts.abs_gap {
                    break;
                }
            }
            if let Some(j) = branch_select(&sol.x, &model.integer) {
                let v = sol.x[j];
                let mut down_hi = node.hi.clone();
                down_hi[j] = v.floor();
                let mut up_lo = node.lo.clone();
                up_lo[j] = v.ceil();
                let down = Node {
                    bound: sol.objective,
                    id: next_id,
                    lo: node.lo.clone(),
                    hi: down_hi,
                    basis: Some(sol.basis.clone()),
                };
                let up = Node {
                    bound: sol.objective,
                    id: next_id + 1,
                    lo: up_lo,
                    hi: node.hi.clone(),
                    basis: Some(sol.basis),
                };
                next_id += 2;
                if incumbent.is_none() || since_dive >= DIVE_EVERY {
                    diving = true;
                    since_dive = 0;
                }
                if diving {
                    // depth-first towards the nearer integer
                    let (near, far) = if v - v.floor() >= 0.5 { (up, down) } else { (down, up) };
                    heap.push(far);
                    dive = Some(near);
                } else {
                    heap.push(down);
                    heap.push(up);
                }
                break;
            }

            let x: Vec<f64> = sol
                .x
                .iter()
                .zip(&model.integer)
                .map(|(&v, &int)| if int { v.round() } else { v })
                .collect();
            let cuts = match separator.as_mut() {
                Some(sep) => sep(&x)?,
                None => Vec::new(),
            };
            let violated = cuts
                .iter()
                .any(|row| row.violation(&x) > 1e-9 * row.rhs.abs().max(1.0));
            if !cuts.is_empty() && !violated {
                log::warn!("separator returned {} rows that do not cut off the point", cuts.len());
            }
            for row in cuts {
                model.add_row(row);
                cuts_added += 1;
            }
            if violated {
                basis = Some(sol.basis);
                continue;
            }
            let obj = model.objective(&x);
            if incumbent.as_ref().is_none_or(|(_, inc)| obj < *inc) {
                incumbent = Some((x, obj));
            }
            break;
        }
    }

    match incumbent {
        Some((_, obj)) => Ok(finish(incumbent.clone(), obj, MipStatus::Optimal, nodes, cuts_added)),
        None => Ok(finish(None, f64::INFINITY, MipStatus::Infeasible, nodes, cuts_added)),
    }
}
