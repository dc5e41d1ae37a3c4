//! Brute-force ground truth for tiny instances.
//!
//! Nothing here reuses the solver's search code: travel times come from
//! enumerating every visiting order, shifts from enumerating every endpoint
//! allocation, and window costs from an exact-cover search over those shifts.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::colgen::{Duals, ShiftColumn};
use crate::error::{MigrateError, Result};
use crate::instance::Instance;
use crate::lp::{solve_lp, LpModel, LpStatus, Row, Sense};
use crate::plan::{PairCount, Plan, TechShift, Visit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_sites: usize,
    pub max_circuits: u64,
    pub max_windows: usize,
    pub max_tech: u32,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_sites: 6,
            max_circuits: 6,
            max_windows: 2,
            max_tech: 2,
        }
    }
}

impl OracleLimits {
    pub fn check(&self, inst: &Instance) -> Result<()> {
        let fail = |msg: String| Err(MigrateError::OracleLimit(msg));
        if inst.network.num_sites() > self.max_sites {
            return fail(format!("{} sites > {}", inst.network.num_sites(), self.max_sites));
        }
        if inst.network.total_circuits() > self.max_circuits {
            return fail(format!(
                "{} circuits > {}",
                inst.network.total_circuits(),
                self.max_circuits
            ));
        }
        if inst.num_windows() > self.max_windows {
            return fail(format!("{} windows > {}", inst.num_windows(), self.max_windows));
        }
        if let Some(&e) = inst.resources.eta_tech.iter().find(|&&e| e > self.max_tech) {
            return fail(format!("{e} technicians in a region > {}", self.max_tech));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OracleStatus {
    Optimal {
        cost_cents: i64,
        /// `m[w][p]`
        m: Vec<Vec<u32>>,
        plans: Vec<Plan>,
    },
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    #[serde(flatten)]
    pub status: OracleStatus,
    pub nodes: u64,
}

/// Shortest simple route through each site set of a region, by permutation.
struct RegionRoutes {
    sites: Vec<usize>,
    /// Per mask: travel and visiting order of the best route through some superset.
    via_superset: Vec<(u32, Vec<usize>)>,
}

impl RegionRoutes {
    fn new(inst: &Instance, region: usize) -> RegionRoutes {
        let sites = inst.region_sites(region);
        let k = sites.len();
        let mut exact: Vec<(u32, Vec<usize>)> = vec![(0, Vec::new()); 1 << k];
        for (mask, slot) in exact.iter_mut().enumerate().skip(1) {
            let members: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| sites[i]).collect();
            let mut best: Option<(u32, Vec<usize>)> = None;
            permute(&members, &mut Vec::new(), &mut vec![false; members.len()], &mut |order| {
                let t: u32 = order.windows(2).map(|w| inst.network.travel(w[0], w[1])).sum();
                if best.as_ref().is_none_or(|(bt, bo)| t < *bt || (t == *bt && order < &bo[..])) {
                    best = Some((t, order.to_vec()));
                }
            });
            *slot = best.expect("non-empty set has a route");
        }
        let via_superset = (0..1usize << k)
            .map(|mask| {
                (0..1usize << k)
                    .filter(|sup| sup & mask == mask)
                    .map(|sup| exact[sup].clone())
                    .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.len().cmp(&b.1.len())).then_with(|| a.1.cmp(&b.1)))
                    .expect("mask is its own superset")
            })
            .collect();
        RegionRoutes { sites, via_superset }
    }

    fn mask_of(&self, sites: impl IntoIterator<Item = usize>) -> usize {
        sites
            .into_iter()
            .fold(0, |m, s| m | 1 << self.sites.iter().position(|&x| x == s).expect("site in region"))
    }
}

fn permute(items: &[usize], cur: &mut Vec<usize>, used: &mut Vec<bool>, f: &mut impl FnMut(&[usize])) {
    if cur.len() == items.len() {
        f(cur);
        return;
    }
    for i in 0..items.len() {
        if !used[i] {
            used[i] = true;
            cur.push(items[i]);
            permute(items, cur, used, f);
            cur.pop();
            used[i] = false;
        }
    }
}

/// Sides located in `region`: `(side, site, pair, circuits)`.
fn sides_in(inst: &Instance, region: usize) -> Vec<(usize, usize, usize, u32)> {
    let net = &inst.network;
    (0..net.num_sides())
        .filter_map(|side| {
            let pair = side / 2;
            let p = &net.pairs[pair];
            let site = if side % 2 == 0 { p.s } else { p.t };
            (inst.network.sites[site].region == region).then_some((side, site, pair, p.circuits))
        })
        .collect()
}

/// Enumerates allocations `n[side] <= limit[side]` with at most one side per
/// pair and total at most `cap`, calling `f` on every non-empty one.
fn allocations(sides: &[(usize, usize, usize, u32)], limit: &[u32], cap: u32, f: &mut impl FnMut(&[u32])) {
    fn rec(
        sides: &[(usize, usize, usize, u32)],
        limit: &[u32],
        i: usize,
        left: u32,
        cur: &mut Vec<u32>,
        f: &mut impl FnMut(&[u32]),
    ) {
        if i == sides.len() {
            if cur.iter().any(|&n| n > 0) {
                f(cur);
            }
            return;
        }
        let pair = sides[i].2;
        let partner_used = (0..i).any(|j| sides[j].2 == pair && cur[j] > 0);
        let top = if partner_used { 0 } else { limit[i].min(left) };
        for n in 0..=top {
            cur.push(n);
            rec(sides, limit, i + 1, left - n, cur, f);
            cur.pop();
        }
    }
    rec(sides, limit, 0, cap, &mut Vec::new(), f);
}

/// Every valid shift column of `region`, with every allowed duration.
pub fn enumerate_columns(inst: &Instance, region: usize) -> Result<Vec<ShiftColumn>> {
    let res = &inst.resources;
    let k = inst.region_sites(region).len();
    let slots = res.max_duration() / res.theta_min;
    if k > 4 || slots > 24 {
        return Err(MigrateError::EnumerationBound(format!(
            "region {region}: {k} sites, {slots} endpoint slots (limits 4 and 24)"
        )));
    }
    let routes = RegionRoutes::new(inst, region);
    let sides = sides_in(inst, region);
    let limit: Vec<u32> = sides.iter().map(|s| s.3).collect();
    let mut out = Vec::new();
    allocations(&sides, &limit, slots, &mut |n| {
        let support = routes.mask_of(sides.iter().zip(n).filter(|(_, &c)| c > 0).map(|(s, _)| s.1));
        let travel = routes.via_superset[support].0;
        let work = res.theta_min * n.iter().sum::<u32>();
        for &d in &res.durations_min {
            if travel + work <= d {
                out.push(ShiftColumn {
                    region,
                    duration: d,
                    counts: sides
                        .iter()
                        .zip(n)
                        .filter(|(_, &c)| c > 0)
                        .map(|(s, &c)| (s.0, c))
                        .collect(),
                });
            }
        }
    });
    out.sort();
    Ok(out)
}

/// Columns of every region.
pub fn enumerate_all_columns(inst: &Instance) -> Result<Vec<ShiftColumn>> {
    let mut all = Vec::new();
    for r in 0..inst.num_regions() {
        all.extend(enumerate_columns(inst, r)?);
    }
    Ok(all)
}

/// `πᵀA_γ` over the coverage, technician and engineer rows.
fn certificate_activity(duals: &Duals, col: &ShiftColumn) -> f64 {
    col.counts.iter().map(|&(s, n)| duals.cover[s] * n as f64).sum::<f64>() + duals.tech[col.region] + duals.eng
}

/// True iff `duals` proves that demand `m_bar` cannot be covered by `columns`:
/// `πᵀA_γ <= 1e-7` for every column and `πᵀb > 1e-7`.
pub fn verify_farkas(inst: &Instance, duals: &Duals, m_bar: &[u32], columns: &[ShiftColumn]) -> bool {
    if columns.iter().any(|c| certificate_activity(duals, c) > 1e-7) {
        return false;
    }
    let res = &inst.resources;
    let mut rhs = 0.0;
    for (side, &y) in duals.cover.iter().enumerate() {
        rhs += y * m_bar[side / 2] as f64;
    }
    for (y, &eta) in duals.tech.iter().zip(&res.eta_tech) {
        rhs += y * eta as f64;
    }
    rhs += duals.eng * res.alpha_eng as f64 * res.eta_eng as f64;
    rhs > 1e-7
}

/// Optimum of the shift-selection LP with every column available, or `None`
/// when the LP is infeasible.
pub fn full_lp_value(inst: &Instance, m_bar: &[u32], columns: &[ShiftColumn]) -> Result<Option<f64>> {
    let net = &inst.network;
    let res = &inst.resources;
    let mut lp = LpModel::new();
    let vars: Vec<usize> = columns
        .iter()
        .map(|c| lp.add_var(res.shift_cost(c.duration) as f64, 0.0, f64::INFINITY))
        .collect();
    for side in 0..net.num_sides() {
        let coeffs = columns
            .iter()
            .zip(&vars)
            .filter_map(|(c, &v)| c.counts.iter().find(|&&(s, _)| s == side).map(|&(_, n)| (v, n as f64)))
            .collect();
        lp.add_row(Row::new(coeffs, Sense::Ge, m_bar[side / 2] as f64));
    }
    for r in 0..inst.num_regions() {
        let coeffs = columns
            .iter()
            .zip(&vars)
            .filter(|(c, _)| c.region == r)
            .map(|(_, &v)| (v, 1.0))
            .collect();
        lp.add_row(Row::new(coeffs, Sense::Le, res.eta_tech[r] as f64));
    }
    let all = vars.iter().map(|&v| (v, 1.0)).collect();
    lp.add_row(Row::new(all, Sense::Le, res.alpha_eng as f64 * res.eta_eng as f64));
    let sol = solve_lp(&lp)?;
    Ok(match sol.status {
        LpStatus::Optimal => Some(sol.objective),
        _ => None,
    })
}

/// A concrete shift chosen by the exact window search.
#[derive(Debug, Clone)]
struct Chosen {
    region: usize,
    duration: u32,
    route: Vec<usize>,
    /// `(side, site, pair, n)`
    counts: Vec<(usize, usize, usize, u32)>,
}

/// Exact minimum-cost plan for one window by exhaustive search.
pub struct WindowOracle<'a> {
    inst: &'a Instance,
    routes: Vec<RegionRoutes>,
    sides: Vec<Vec<(usize, usize, usize, u32)>>,
    memo: HashMap<(Vec<u32>, Vec<u32>), Option<(i64, Vec<Chosen>)>>,
    pub nodes: u64,
}

impl<'a> WindowOracle<'a> {
    pub fn new(inst: &'a Instance) -> WindowOracle<'a> {
        let routes = (0..inst.num_regions()).map(|r| RegionRoutes::new(inst, r)).collect();
        let sides = (0..inst.num_regions()).map(|r| sides_in(inst, r)).collect();
        WindowOracle {
            inst,
            routes,
            sides,
            memo: HashMap::new(),
            nodes: 0,
        }
    }

    /// Minimum plan cost and a witness plan for pair demand `m_bar`.
    pub fn solve(&mut self, m_bar: &[u32]) -> Option<(i64, Plan)> {
        let remaining: Vec<u32> = (0..self.inst.network.num_sides()).map(|s| m_bar[s / 2]).collect();
        let used = vec![0u32; self.inst.num_regions()];
        let (cost, chosen) = self.search(remaining, used)?;
        Some((cost, self.witness(&chosen)))
    }

    fn search(&mut self, remaining: Vec<u32>, used: Vec<u32>) -> Option<(i64, Vec<Chosen>)> {
        let key = (remaining.clone(), used.clone());
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        self.nodes += 1;
        let inst = self.inst;
        let res = &inst.resources;
        let result = match remaining.iter().position(|&d| d > 0) {
            None => Some((0, Vec::new())),
            Some(pivot) => {
                let net = &inst.network;
                let p = &net.pairs[pivot / 2];
                let site = if pivot % 2 == 0 { p.s } else { p.t };
                let region = net.sites[site].region;
                let total_used: u32 = used.iter().sum();
                if used[region] >= res.eta_tech[region] || total_used as u64 >= res.alpha_eng as u64 * res.eta_eng as u64 {
                    None
                } else {
                    let sides = self.sides[region].clone();
                    let limit: Vec<u32> = sides.iter().map(|s| remaining[s.0]).collect();
                    let pivot_idx = sides.iter().position(|s| s.0 == pivot).expect("pivot in region");
                    let slots = res.max_duration() / res.theta_min;
                    let mut options: Vec<Chosen> = Vec::new();
                    allocations(&sides, &limit, slots, &mut |n| {
                        if n[pivot_idx] == 0 {
                            return;
                        }
                        let support = self.routes[region]
                            .mask_of(sides.iter().zip(n).filter(|(_, &c)| c > 0).map(|(s, _)| s.1));
                        let (travel, route) = &self.routes[region].via_superset[support];
                        let work = res.theta_min * n.iter().sum::<u32>();
                        if let Some(&duration) = res.durations_min.iter().find(|&&d| travel + work <= d) {
                            options.push(Chosen {
                                region,
                                duration,
                                route: route.clone(),
                                counts: sides
                                    .iter()
                                    .zip(n)
                                    .filter(|(_, &c)| c > 0)
                                    .map(|(s, &c)| (s.0, s.1, s.2, c))
                                    .collect(),
                            });
                        }
                    });
                    let mut best: Option<(i64, Vec<Chosen>)> = None;
                    for opt in options {
                        let mut rem = remaining.clone();
                        for &(side, _, _, n) in &opt.counts {
                            rem[side] -= n;
                        }
                        let mut u = used.clone();
                        u[region] += 1;
                        if let Some((c, mut rest)) = self.search(rem, u) {
                            let total = c + res.shift_cost(opt.duration);
                            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                                rest.insert(0, opt);
                                best = Some((total, rest));
                            }
                        }
                    }
                    best
                }
            }
        };
        self.memo.insert(key, result.clone());
        result
    }

    fn witness(&self, chosen: &[Chosen]) -> Plan {
        let inst = self.inst;
        let theta = inst.resources.theta_min;
        let mut next_tech = vec![0usize; inst.num_regions()];
        let mut shifts = Vec::new();
        for c in chosen {
            let mut clock = 0;
            let mut visits = Vec::new();
            for (i, &site) in c.route.iter().enumerate() {
                if i > 0 {
                    clock += inst.network.travel(c.route[i - 1], site);
                }
                let counts: Vec<PairCount> = c
                    .counts
                    .iter()
                    .filter(|x| x.1 == site)
                    .map(|x| PairCount { pair: x.2, n: x.3 })
                    .collect();
                let work = theta * counts.iter().map(|x| x.n).sum::<u32>();
                visits.push(Visit {
                    site,
                    start_min: clock,
                    end_min: clock + work,
                    counts,
                });
                clock += work;
            }
            shifts.push(TechShift {
                region: c.region,
                tech: next_tech[c.region],
                duration_min: c.duration,
                visits,
            });
            next_tech[c.region] += 1;
        }
        let cost_cents = shifts.iter().map(|s| inst.shift_cost(s.duration_min)).sum();
        Plan { shifts, cost_cents }
    }
}

/// Exact optimum of the whole problem by enumerating every split of each
/// pair's circuits over the windows.
pub fn solve_exact(inst: &Instance, limits: &OracleLimits) -> Result<OracleResult> {
    limits.check(inst)?;
    let net = &inst.network;
    let res = &inst.resources;
    let w = inst.num_windows();
    let np = net.num_pairs();

    // per pair: every (m_p1, ..., m_pW) with 0 <= m <= φ and Σ >= φ
    let splits: Vec<Vec<Vec<u32>>> = net
        .pairs
        .iter()
        .map(|p| {
            let mut out = Vec::new();
            let mut cur = vec![0u32; w];
            loop {
                if cur.iter().sum::<u32>() >= p.circuits {
                    out.push(cur.clone());
                }
                let mut k = 0;
                while k < w && cur[k] == p.circuits {
                    cur[k] = 0;
                    k += 1;
                }
                if k == w {
                    break;
                }
                cur[k] += 1;
            }
            out
        })
        .collect();
    if w == 0 && np > 0 {
        return Ok(OracleResult {
            status: OracleStatus::Infeasible,
            nodes: 0,
        });
    }

    let mut window = WindowOracle::new(inst);
    let mut cost_of: HashMap<Vec<u32>, Option<(i64, Plan)>> = HashMap::new();
    let mut best: Option<(i64, Vec<Vec<u32>>)> = None;
    let mut choice = vec![0usize; np];
    loop {
        let m: Vec<Vec<u32>> = (0..w).map(|wi| (0..np).map(|p| splits[p][choice[p]][wi]).collect()).collect();
        if m.iter().all(|mw| mw.iter().sum::<u32>() <= res.eta_cir) {
            let mut total = Some(0i64);
            for mw in &m {
                let c = cost_of
                    .entry(mw.clone())
                    .or_insert_with(|| window.solve(mw))
                    .as_ref()
                    .map(|x| x.0);
                total = match (total, c) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                };
                if total.is_none() {
                    break;
                }
            }
            if let Some(t) = total {
                if best.as_ref().is_none_or(|(b, _)| t < *b) {
                    best = Some((t, m));
                }
            }
        }
        let mut k = 0;
        while k < np && choice[k] + 1 == splits[k].len() {
            choice[k] = 0;
            k += 1;
        }
        if k == np {
            break;
        }
        choice[k] += 1;
    }

    let status = match best {
        None => OracleStatus::Infeasible,
        Some((cost_cents, m)) => {
            let plans = m
                .iter()
                .map(|mw| cost_of[mw].as_ref().expect("chosen windows are feasible").1.clone())
                .collect();
            OracleStatus::Optimal { cost_cents, m, plans }
        }
    };
    Ok(OracleResult {
        status,
        nodes: window.nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Network, Pair, Resources, Site};
    use crate::plan::verify_plan;

    fn instance(region_of: &[usize], pairs: &[(usize, usize, u32)], windows: u32, eta_cir: u32) -> Instance {
        let n = region_of.len();
        let regions = region_of.iter().max().unwrap() + 1;
        Instance {
            name: "oracle".into(),
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

    #[test]
    fn no_circuits_cost_nothing() {
        let inst = instance(&[0, 1], &[], 1, 1);
        let out = solve_exact(&inst, &OracleLimits::default()).unwrap();
        assert!(matches!(out.status, OracleStatus::Optimal { cost_cents: 0, .. }));
    }

    #[test]
    fn one_cross_region_circuit() {
        let inst = instance(&[0, 1], &[(0, 1, 1)], 1, 1);
        let out = solve_exact(&inst, &OracleLimits::default()).unwrap();
        match out.status {
            OracleStatus::Optimal { cost_cents, m, plans } => {
                assert_eq!(cost_cents, 163200);
                assert!(verify_plan(&plans[0], &inst, &m[0]));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn window_cap_makes_it_infeasible() {
        // 3 circuits, 2 windows of at most 1 circuit each
        let inst = instance(&[0, 1], &[(0, 1, 3)], 2, 1);
        let out = solve_exact(&inst, &OracleLimits::default()).unwrap();
        assert_eq!(out.status, OracleStatus::Infeasible);
    }

    #[test]
    fn limits_are_enforced() {
        let inst = instance(&[0, 1], &[(0, 1, 7)], 1, 10);
        assert!(matches!(
            solve_exact(&inst, &OracleLimits::default()),
            Err(MigrateError::OracleLimit(_))
        ));
    }

    #[test]
    fn column_enumeration_counts() {
        let mut inst = instance(&[0, 1], &[(0, 1, 2)], 1, 5);
        inst.resources.durations_min = vec![360];
        let cols = enumerate_columns(&inst, 0).unwrap();
        assert_eq!(cols.len(), 2);
        assert_eq!(cols[0].counts, vec![(0, 1)]);
        assert_eq!(cols[1].counts, vec![(0, 2)]);

        let lonely = instance(&[0, 1, 2], &[(0, 1, 2)], 1, 5);
        assert!(enumerate_columns(&lonely, 2).unwrap().is_empty());
    }

    #[test]
    fn zero_certificate_is_rejected() {
        let inst = instance(&[0, 1], &[(0, 1, 1)], 1, 1);
        let cols = enumerate_all_columns(&inst).unwrap();
        assert!(!verify_farkas(&inst, &Duals::zero(&inst), &[1], &cols));
    }
}
