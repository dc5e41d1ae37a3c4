//! Exact minimum-cost technician plans for one window.
//!
//! Regions only interact through the engineer cap on the total number of
//! shifts, so each region is solved on its own for every shift count and the
//! per-region tables are combined by a small knapsack over shift counts.
//!
//! Within a region, shift duration multisets are tried in increasing cost
//! order. A multiset is feasible when every shift can be given a site set
//! whose travel leaves room for the endpoints routed to it: site sets are
//! enumerated depth-first (non-dominated sets only, equal durations in
//! non-decreasing order), each partial assignment is pruned by a max-flow
//! relaxation, and complete assignments are checked by max-flow with branching
//! on shifts that would serve both ends of the same circuit.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::flow::FlowNetwork;
use crate::geometry::{Geometry, RegionGeometry};
use crate::instance::Instance;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairCount {
    pub pair: usize,
    pub n: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Visit {
    pub site: usize,
    pub start_min: u32,
    pub end_min: u32,
    pub counts: Vec<PairCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TechShift {
    pub region: usize,
    pub tech: usize,
    pub duration_min: u32,
    pub visits: Vec<Visit>,
}

impl TechShift {
    pub fn endpoints(&self) -> u32 {
        self.visits
            .iter()
            .flat_map(|v| v.counts.iter())
            .map(|c| c.n)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct Plan {
    pub shifts: Vec<TechShift>,
    pub cost_cents: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    Optimal(Plan),
    Infeasible,
    TimedOut(Option<Plan>),
}

/// Checks every plan invariant directly from the plan's fields.
pub fn verify_plan(plan: &Plan, inst: &Instance, m_bar: &[u32]) -> bool {
    let net = &inst.network;
    let res = &inst.resources;
    if m_bar.len() != net.num_pairs() {
        return false;
    }
    let mut per_region = vec![0u32; inst.num_regions()];
    let mut techs = std::collections::HashSet::new();
    let mut served = vec![0u64; net.num_sides()];
    let mut cost = 0i64;

    for shift in &plan.shifts {
        if shift.region >= inst.num_regions() || !res.durations_min.contains(&shift.duration_min) {
            return false;
        }
        if !techs.insert((shift.region, shift.tech)) {
            return false;
        }
        per_region[shift.region] += 1;
        cost += res.shift_cost(shift.duration_min);

        let mut sides_used = std::collections::HashSet::new();
        let mut sites_seen = std::collections::HashSet::new();
        let mut prev: Option<&Visit> = None;
        for v in &shift.visits {
            if v.site >= net.num_sites() || inst.region_of(v.site) != shift.region {
                return false;
            }
            if !sites_seen.insert(v.site) {
                return false;
            }
            let work: u64 = v.counts.iter().map(|c| c.n as u64).sum::<u64>() * res.theta_min as u64;
            if v.end_min < v.start_min || (v.end_min - v.start_min) as u64 != work {
                return false;
            }
            if let Some(p) = prev {
                if (v.start_min as u64) < p.end_min as u64 + net.travel(p.site, v.site) as u64 {
                    return false;
                }
            }
            for c in &v.counts {
                if c.pair >= net.num_pairs() || c.n == 0 {
                    return false;
                }
                let Some(side) = net.side_at(c.pair, v.site) else {
                    return false;
                };
                sides_used.insert(side);
                served[side] += c.n as u64;
            }
            prev = Some(v);
        }
        if let Some(last) = shift.visits.last() {
            if last.end_min > shift.duration_min {
                return false;
            }
        }
        if sides_used.iter().any(|&s| sides_used.contains(&(s ^ 1))) {
            return false;
        }
    }

    if per_region.iter().zip(&res.eta_tech).any(|(&n, &cap)| n > cap) {
        return false;
    }
    if plan.shifts.len() as u64 > res.shift_cap() as u64 {
        return false;
    }
    if (0..net.num_sides()).any(|s| served[s] != m_bar[s / 2] as u64) {
        return false;
    }
    cost == plan.cost_cents
}

#[derive(Debug, Clone)]
struct ShiftSolution {
    duration: u32,
    flows: Vec<(usize, u32)>,
}

#[derive(Debug, Clone)]
struct RegionChoice {
    cost: i64,
    shifts: Vec<ShiftSolution>,
}

/// `best[k]`: cheapest region plan using at most `k` shifts.
#[derive(Debug, Clone)]
struct RegionTable {
    best: Vec<Option<Arc<RegionChoice>>>,
}

#[derive(Debug)]
struct TimedOut;

type RegionKey = (usize, Vec<(usize, u32)>);

/// Plan search over one instance; caches per-region results across calls.
pub struct PlanSearch<'a> {
    inst: &'a Instance,
    geom: &'a Geometry,
    cache: Mutex<HashMap<RegionKey, Arc<RegionTable>>>,
}

impl<'a> PlanSearch<'a> {
    pub fn new(inst: &'a Instance, geom: &'a Geometry) -> PlanSearch<'a> {
        PlanSearch {
            inst,
            geom,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn solve(&self, m_bar: &[u32], deadline: Option<Instant>) -> PlanOutcome {
        let inst = self.inst;
        let net = &inst.network;
        assert_eq!(m_bar.len(), net.num_pairs(), "one demand entry per pair");
        let techs: u64 = inst.resources.eta_tech.iter().map(|&e| e as u64).sum();
        let cap_total = (inst.resources.shift_cap() as u64).min(techs) as usize;

        let mut tables = Vec::with_capacity(inst.num_regions());
        for r in 0..inst.num_regions() {
            let demand: Vec<(usize, u32)> = (0..net.num_sides())
                .filter(|&s| m_bar[s / 2] > 0 && inst.region_of(net.side(s).site) == r)
                .map(|s| (s, m_bar[s / 2]))
                .collect();
            let key = (r, demand);
            let cached = self.cache.lock().expect("cache lock").get(&key).cloned();
            let table = match cached {
                Some(t) => t,
                None => match self.region_table(r, &key.1, deadline) {
                    Ok(t) => {
                        let t = Arc::new(t);
                        self.cache.lock().expect("cache lock").insert(key, t.clone());
                        t
                    }
                    Err(TimedOut) => return PlanOutcome::TimedOut(None),
                },
            };
            tables.push(table);
        }

        // knapsack over total shift count
        let mut dp: Vec<Option<i64>> = vec![None; cap_total + 1];
        dp[0] = Some(0);
        let mut picks: Vec<Vec<Option<(usize, usize)>>> = Vec::new();
        let mut options_per_region: Vec<Vec<Arc<RegionChoice>>> = Vec::new();
        for table in &tables {
            let mut options: Vec<Arc<RegionChoice>> = Vec::new();
            for choice in table.best.iter().flatten() {
                if options.last().is_none_or(|o| !Arc::ptr_eq(o, choice)) {
                    options.push(choice.clone());
                }
            }
            let mut next: Vec<Option<i64>> = vec![None; cap_total + 1];
            let mut pick = vec![None; cap_total + 1];
            for t in 0..=cap_total {
                let Some(base) = dp[t] else { continue };
                for (oi, opt) in options.iter().enumerate() {
                    let nt = t + opt.shifts.len();
                    if nt > cap_total {
                        continue;
                    }
                    let c = base + opt.cost;
                    if next[nt].is_none_or(|cur| c < cur) {
                        next[nt] = Some(c);
                        pick[nt] = Some((oi, t));
                    }
                }
            }
            dp = next;
            picks.push(pick);
            options_per_region.push(options);
        }

        let Some((mut t, _)) = dp
            .iter()
            .enumerate()
            .filter_map(|(t, c)| c.map(|c| (t, c)))
            .min_by_key(|&(t, c)| (c, t))
        else {
            return PlanOutcome::Infeasible;
        };
        let mut chosen: Vec<Arc<RegionChoice>> = Vec::with_capacity(tables.len());
        for r in (0..tables.len()).rev() {
            let (oi, prev) = picks[r][t].expect("reachable state has a pick");
            chosen.push(options_per_region[r][oi].clone());
            t = prev;
        }
        chosen.reverse();
        PlanOutcome::Optimal(self.build_plan(&chosen))
    }

    fn region_table(&self, r: usize, demand: &[(usize, u32)], deadline: Option<Instant>) -> Result<RegionTable, TimedOut> {
        let inst = self.inst;
        let res = &inst.resources;
        let k_max = (res.eta_tech[r].min(res.shift_cap())) as usize;
        let total: u32 = demand.iter().map(|&(_, d)| d).sum();
        if total == 0 {
            let empty = Arc::new(RegionChoice {
                cost: 0,
                shifts: Vec::new(),
            });
            return Ok(RegionTable {
                best: vec![Some(empty); k_max + 1],
            });
        }
        let mut best = vec![None; k_max + 1];
        let per_shift = res.max_duration() / res.theta_min;
        if per_shift == 0 {
            return Ok(RegionTable { best });
        }
        let j_lo = total.div_ceil(per_shift) as usize;
        let c_min = res.shift_cost(res.min_duration());
        let problem = RegionProblem::new(inst, &self.geom.regions[r], demand, deadline);

        let mut incumbent: Option<Arc<RegionChoice>> = None;
        for (j, slot) in best.iter_mut().enumerate().skip(1) {
            let improvable = incumbent.as_ref().is_none_or(|inc| (j as i64) * c_min < inc.cost);
            if j >= j_lo && improvable {
                for (cost, durs) in duration_multisets(inst, j) {
                    if incumbent.as_ref().is_some_and(|inc| cost >= inc.cost) {
                        break;
                    }
                    if let Some(flows) = problem.feasible(&durs)? {
                        let shifts = durs
                            .iter()
                            .zip(flows)
                            .map(|(&duration, flows)| ShiftSolution { duration, flows })
                            .collect();
                        incumbent = Some(Arc::new(RegionChoice { cost, shifts }));
                        break;
                    }
                }
            }
            *slot = incumbent.clone();
        }
        Ok(RegionTable { best })
    }

    fn build_plan(&self, chosen: &[Arc<RegionChoice>]) -> Plan {
        let inst = self.inst;
        let net = &inst.network;
        let res = &inst.resources;
        let mut shifts = Vec::new();
        for (r, choice) in chosen.iter().enumerate() {
            let g = &self.geom.regions[r];
            for sol in &choice.shifts {
                if sol.flows.is_empty() {
                    continue;
                }
                let support = g.mask_of(sol.flows.iter().map(|&(s, _)| net.side(s).site));
                let route = g.path(g.tsup_mask(support));
                let mut visits = Vec::with_capacity(route.len());
                let mut clock = 0u32;
                let mut prev: Option<usize> = None;
                for &site in &route {
                    if let Some(p) = prev {
                        clock += net.travel(p, site);
                    }
                    let mut counts: Vec<PairCount> = sol
                        .flows
                        .iter()
                        .filter(|&&(s, _)| net.side(s).site == site)
                        .map(|&(s, n)| PairCount { pair: s / 2, n })
                        .collect();
                    counts.sort();
                    let work: u32 = counts.iter().map(|c| c.n).sum::<u32>() * res.theta_min;
                    visits.push(Visit {
                        site,
                        start_min: clock,
                        end_min: clock + work,
                        counts,
                    });
                    clock += work;
                    prev = Some(site);
                }
                let duration_min = res
                    .fitting_duration(clock)
                    .expect("shift fits its assigned duration");
                debug_assert!(duration_min <= sol.duration);
                shifts.push(TechShift {
                    region: r,
                    tech: 0,
                    duration_min,
                    visits,
                });
            }
        }
        canonicalize(shifts, inst)
    }
}

/// Sorts shifts by (region, duration, visits) and numbers technicians per region.
fn canonicalize(mut shifts: Vec<TechShift>, inst: &Instance) -> Plan {
    shifts.sort_by(|a, b| {
        (a.region, a.duration_min, &a.visits).cmp(&(b.region, b.duration_min, &b.visits))
    });
    let mut next = vec![0usize; inst.num_regions()];
    for s in &mut shifts {
        s.tech = next[s.region];
        next[s.region] += 1;
    }
    let cost_cents = shifts.iter().map(|s| inst.shift_cost(s.duration_min)).sum();
    Plan { shifts, cost_cents }
}

/// All multisets of `j` allowed durations, ascending by (cost, durations).
fn duration_multisets(inst: &Instance, j: usize) -> Vec<(i64, Vec<u32>)> {
    let durs = &inst.resources.durations_min;
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(j);
    fn rec(durs: &[u32], from: usize, j: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == j {
            out.push(cur.clone());
            return;
        }
        for k in from..durs.len() {
            cur.push(durs[k]);
            rec(durs, k, j, cur, out);
            cur.pop();
        }
    }
    let mut seqs = Vec::new();
    rec(durs, 0, j, &mut cur, &mut seqs);
    for s in seqs {
        let cost = s.iter().map(|&d| inst.shift_cost(d)).sum();
        out.push((cost, s));
    }
    out.sort();
    out
}

struct RegionProblem<'b> {
    g: &'b RegionGeometry,
    theta: u32,
    /// `(side, demand, local site)`
    sides: Vec<(usize, u32, usize)>,
    /// Index pairs into `sides` that are the two ends of one circuit pair.
    intra: Vec<(usize, usize)>,
    demand_mask: usize,
    total: u32,
    deadline: Option<Instant>,
}

/// A shift's site set and usable endpoint capacity.
type Slot = (usize, u32);

impl<'b> RegionProblem<'b> {
    fn new(inst: &Instance, g: &'b RegionGeometry, demand: &[(usize, u32)], deadline: Option<Instant>) -> Self {
        let net = &inst.network;
        let sides: Vec<(usize, u32, usize)> = demand
            .iter()
            .map(|&(s, d)| (s, d, g.local(net.side(s).site).expect("side in region")))
            .collect();
        let mut intra = Vec::new();
        for (a, &(sa, _, _)) in sides.iter().enumerate() {
            if sa % 2 == 0 {
                if let Some(b) = sides.iter().position(|&(sb, _, _)| sb == sa + 1) {
                    intra.push((a, b));
                }
            }
        }
        let demand_mask = sides.iter().fold(0, |m, &(_, _, l)| m | 1 << l);
        RegionProblem {
            g,
            theta: inst.resources.theta_min,
            total: sides.iter().map(|&(_, d, _)| d).sum(),
            sides,
            intra,
            demand_mask,
            deadline,
        }
    }

    fn demand_in(&self, mask: usize) -> u32 {
        self.sides
            .iter()
            .filter(|&&(_, _, l)| mask & (1 << l) != 0)
            .map(|&(_, d, _)| d)
            .sum()
    }

    /// Non-dominated site sets for a shift of `duration`, largest first.
    fn candidates(&self, duration: u32) -> Vec<Slot> {
        let mut all: Vec<Slot> = Vec::new();
        let mut sub = self.demand_mask;
        while sub != 0 {
            let t = self.g.tsup(sub);
            if t <= duration {
                let cap = ((duration - t) / self.theta).min(self.demand_in(sub));
                if cap > 0 {
                    all.push((sub, cap));
                }
            }
            sub = (sub - 1) & self.demand_mask;
        }
        let kept: Vec<Slot> = all
            .iter()
            .copied()
            .filter(|&(u, c)| {
                !all
                    .iter()
                    .any(|&(v, cv)| v != u && v & u == u && cv >= c)
            })
            .collect();
        let mut kept = kept;
        kept.sort_by(|a, b| {
            b.0.count_ones()
                .cmp(&a.0.count_ones())
                .then(b.1.cmp(&a.1))
                .then(a.0.cmp(&b.0))
        });
        kept
    }

    fn network(&self, slots: &[Slot], forbidden: &[(usize, usize)]) -> (FlowNetwork, i64) {
        let ns = self.sides.len();
        let sink = ns + slots.len() + 1;
        let mut net = FlowNetwork::new(sink + 1);
        for (a, &(_, d, _)) in self.sides.iter().enumerate() {
            net.add_edge(0, 1 + a, d as i64);
        }
        for (i, &(mask, cap)) in slots.iter().enumerate() {
            net.add_edge(1 + ns + i, sink, cap as i64);
            for (a, &(_, d, l)) in self.sides.iter().enumerate() {
                if mask & (1 << l) != 0 && !forbidden.contains(&(i, a)) {
                    net.add_edge(1 + a, 1 + ns + i, d as i64);
                }
            }
        }
        let f = net.max_flow(0, sink);
        (net, f)
    }

    fn exact(&self, slots: &[Slot], forbidden: &mut Vec<(usize, usize)>) -> Option<Vec<Vec<(usize, u32)>>> {
        let ns = self.sides.len();
        let (net, f) = self.network(slots, forbidden);
        if f < self.total as i64 {
            return None;
        }
        for i in 0..slots.len() {
            for &(a, b) in &self.intra {
                if net.flow(1 + a, 1 + ns + i) > 0 && net.flow(1 + b, 1 + ns + i) > 0 {
                    for banned in [a, b] {
                        forbidden.push((i, banned));
                        let r = self.exact(slots, forbidden);
                        forbidden.pop();
                        if r.is_some() {
                            return r;
                        }
                    }
                    return None;
                }
            }
        }
        Some(
            (0..slots.len())
                .map(|i| {
                    self.sides
                        .iter()
                        .enumerate()
                        .filter_map(|(a, &(s, _, _))| {
                            let n = net.flow(1 + a, 1 + ns + i);
                            (n > 0).then_some((s, n as u32))
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Endpoint flows per shift if `durations` (ascending) can cover the demand.
    fn feasible(&self, durations: &[u32]) -> Result<Option<Vec<Vec<(usize, u32)>>>, TimedOut> {
        let mut per_duration: HashMap<u32, Vec<Slot>> = HashMap::new();
        for &d in durations {
            per_duration.entry(d).or_insert_with(|| self.candidates(d));
        }
        let cands: Vec<&Vec<Slot>> = durations.iter().map(|d| &per_duration[d]).collect();
        let wild: Vec<Slot> = durations
            .iter()
            .map(|&d| (self.demand_mask, (d / self.theta).min(self.total)))
            .collect();
        let mut chosen = Vec::with_capacity(durations.len());
        let mut idx = Vec::with_capacity(durations.len());
        self.dfs(durations, &cands, &wild, &mut chosen, &mut idx)
    }

    fn dfs(
        &self,
        durations: &[u32],
        cands: &[&Vec<Slot>],
        wild: &[Slot],
        chosen: &mut Vec<Slot>,
        idx: &mut Vec<usize>,
    ) -> Result<Option<Vec<Vec<(usize, u32)>>>, TimedOut> {
        if self.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(TimedOut);
        }
        let i = chosen.len();
        let mut relaxed = chosen.clone();
        relaxed.extend_from_slice(&wild[i..]);
        if self.network(&relaxed, &[]).1 < self.total as i64 {
            return Ok(None);
        }
        if i == durations.len() {
            return Ok(self.exact(chosen, &mut Vec::new()));
        }
        let start = if i > 0 && durations[i] == durations[i - 1] {
            idx[i - 1]
        } else {
            0
        };
        for (k, &slot) in cands[i].iter().enumerate().skip(start) {
            chosen.push(slot);
            idx.push(k);
            let r = self.dfs(durations, cands, wild, chosen, idx)?;
            chosen.pop();
            idx.pop();
            if r.is_some() {
                return Ok(r);
            }
        }
        Ok(None)
    }
}

/// One-shot plan search for a single window.
pub fn solve_plan(inst: &Instance, geom: &Geometry, m_bar: &[u32], time_limit: Option<Duration>) -> PlanOutcome {
    let deadline = time_limit.map(|t| Instant::now() + t);
    PlanSearch::new(inst, geom).solve(m_bar, deadline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Network, Pair, Resources, Site};

    fn instance(region_of: &[usize], pairs: &[(usize, usize, u32)], travel: Vec<Vec<u32>>, eta: Vec<u32>) -> Instance {
        Instance {
            name: "plan".into(),
            network: Network {
                sites: region_of
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| Site { id: i, region: r, x_km: 0.0, y_km: 0.0 })
                    .collect(),
                pairs: pairs.iter().map(|&(s, t, c)| Pair { s, t, circuits: c }).collect(),
                travel_minutes: travel,
            },
            resources: Resources {
                eta_tech: eta,
                eta_cir: 50,
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

    fn optimal(outcome: PlanOutcome) -> Plan {
        match outcome {
            PlanOutcome::Optimal(p) => p,
            other => panic!("expected a plan, got {other:?}"),
        }
    }

    #[test]
    fn zero_demand_gives_empty_plan() {
        let inst = instance(&[0, 1], &[(0, 1, 1)], vec![vec![0, 90], vec![90, 0]], vec![1, 1]);
        let geom = Geometry::new(&inst).unwrap();
        let plan = optimal(solve_plan(&inst, &geom, &[0], None));
        assert_eq!(plan, Plan::default());
    }

    #[test]
    fn cross_region_circuit_needs_two_shifts() {
        let inst = instance(&[0, 1], &[(0, 1, 1)], vec![vec![0, 90], vec![90, 0]], vec![1, 1]);
        let geom = Geometry::new(&inst).unwrap();
        let plan = optimal(solve_plan(&inst, &geom, &[1], None));
        assert_eq!(plan.cost_cents, 163200);
        assert_eq!(plan.shifts.len(), 2);
        assert!(plan.shifts.iter().all(|s| s.duration_min == 360));
        assert!(verify_plan(&plan, &inst, &[1]));
    }

    #[test]
    fn overloaded_single_technician_is_infeasible() {
        let inst = instance(&[0, 1], &[(0, 1, 30)], vec![vec![0, 90], vec![90, 0]], vec![1, 5]);
        let geom = Geometry::new(&inst).unwrap();
        assert_eq!(solve_plan(&inst, &geom, &[25], None), PlanOutcome::Infeasible);
        let plan = optimal(solve_plan(&inst, &geom, &[24], None));
        assert!(verify_plan(&plan, &inst, &[24]));
    }

    #[test]
    fn intra_region_circuit_needs_two_technicians() {
        let inst = instance(&[0, 0], &[(0, 1, 1)], vec![vec![0, 10], vec![10, 0]], vec![2]);
        let geom = Geometry::new(&inst).unwrap();
        let plan = optimal(solve_plan(&inst, &geom, &[1], None));
        assert_eq!(plan.shifts.len(), 2);
        assert!(verify_plan(&plan, &inst, &[1]));

        let lone = instance(&[0, 0], &[(0, 1, 1)], vec![vec![0, 10], vec![10, 0]], vec![1]);
        let geom = Geometry::new(&lone).unwrap();
        assert_eq!(solve_plan(&lone, &geom, &[1], None), PlanOutcome::Infeasible);
    }

    #[test]
    fn waypoints_shorten_routes() {
        // 0 and 2 are far apart directly but close through 1
        let travel = vec![
            vec![0, 20, 400, 5],
            vec![20, 0, 20, 5],
            vec![400, 20, 0, 5],
            vec![5, 5, 5, 0],
        ];
        let inst = instance(&[0, 0, 0, 1], &[(0, 3, 1), (2, 3, 1)], travel, vec![1, 2]);
        let geom = Geometry::new(&inst).unwrap();
        let plan = optimal(solve_plan(&inst, &geom, &[1, 1], None));
        assert!(verify_plan(&plan, &inst, &[1, 1]));
        let region0: Vec<&TechShift> = plan.shifts.iter().filter(|s| s.region == 0).collect();
        assert_eq!(region0.len(), 1);
        assert_eq!(region0[0].visits.len(), 3);
        assert_eq!(region0[0].visits[1].counts, vec![]);
    }

    #[test]
    fn verify_rejects_broken_plans() {
        let inst = instance(&[0, 1], &[(0, 1, 2)], vec![vec![0, 90], vec![90, 0]], vec![1, 1]);
        let geom = Geometry::new(&inst).unwrap();
        let plan = optimal(solve_plan(&inst, &geom, &[2], None));
        assert!(verify_plan(&plan, &inst, &[2]));
        assert!(!verify_plan(&plan, &inst, &[1]));

        let mut overlap = plan.clone();
        let v = overlap.shifts[0].visits[0].clone();
        overlap.shifts[0].visits[0].counts[0].n = 1;
        overlap.shifts[0].visits[0].end_min = v.start_min + 20;
        overlap.shifts[0].visits.push(Visit {
            site: v.site,
            start_min: v.start_min + 10,
            end_min: v.start_min + 30,
            counts: vec![PairCount { pair: 0, n: 1 }],
        });
        assert!(!verify_plan(&overlap, &inst, &[2]));

        let mut cheap = plan.clone();
        cheap.cost_cents -= 1;
        assert!(!verify_plan(&cheap, &inst, &[2]));
    }
}
