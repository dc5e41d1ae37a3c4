//! Column pricing for the shift-selection master.
//!
//! Both pricers enumerate every site subset of the region and every allowed
//! duration. Given the subset's travel time, the endpoint allocation is a
//! knapsack with equal item weights θ, so filling greedily by descending dual
//! under the per-pair caps is exact. The general pricer uses the shortest
//! path over the subset; the ordered pricer uses the increasing-site-order
//! path, which is never shorter.

use std::collections::BTreeMap;

use crate::colgen::{Duals, ShiftColumn};
use crate::geometry::{Geometry, RegionGeometry};
use crate::instance::Instance;

/// Maximum number of columns returned per region and round.
pub const MAX_COLUMNS: usize = 10;
/// Reduced cost below which a column counts as improving.
pub const RC_TOL: f64 = -1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathKind {
    General,
    Ordered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricedColumn {
    pub column: ShiftColumn,
    pub reduced_cost: f64,
}

/// Pricing problem of one region.
#[derive(Debug, Clone, Copy)]
pub struct PricingInput<'a> {
    pub region: usize,
    pub duals: &'a Duals,
    /// Price against the zero-cost feasibility objective instead of shift cost.
    pub phase_one: bool,
    /// Columns must price strictly below this value.
    pub threshold: f64,
}

/// `cost − Σ n·π_cover − π_tech[r] − π_eng`; cost is 0 in phase one.
pub fn reduced_cost(inst: &Instance, column: &ShiftColumn, duals: &Duals, phase_one: bool) -> f64 {
    let cost = if phase_one {
        0.0
    } else {
        inst.shift_cost(column.duration) as f64
    };
    let covered: f64 = column
        .counts
        .iter()
        .map(|&(side, n)| n as f64 * duals.cover[side])
        .sum();
    cost - covered - duals.tech[column.region] - duals.eng
}

pub fn price_general(inst: &Instance, geom: &Geometry, input: &PricingInput) -> Vec<PricedColumn> {
    price(inst, &geom.regions[input.region], input, PathKind::General)
}

pub fn price_ordered(inst: &Instance, geom: &Geometry, input: &PricingInput) -> Vec<PricedColumn> {
    price(inst, &geom.regions[input.region], input, PathKind::Ordered)
}

struct RegionSide {
    side: usize,
    local: usize,
    circuits: u32,
    /// Local index of the opposite side's site when the pair stays inside the region.
    partner_local: Option<usize>,
}

fn region_sides(inst: &Instance, g: &RegionGeometry) -> Vec<RegionSide> {
    let net = &inst.network;
    (0..net.num_sides())
        .filter_map(|side| {
            let sd = net.side(side);
            let local = g.local(sd.site)?;
            Some(RegionSide {
                side,
                local,
                circuits: net.pairs[sd.pair].circuits,
                partner_local: g.local(sd.partner),
            })
        })
        .collect()
}

fn price(inst: &Instance, g: &RegionGeometry, input: &PricingInput, kind: PathKind) -> Vec<PricedColumn> {
    let res = &inst.resources;
    let duals = input.duals;
    let sides = region_sides(inst, g);
    let theta = res.theta_min;
    let max_d = res.max_duration();
    let fixed = duals.tech[input.region] + duals.eng;

    let mut found: BTreeMap<(u32, Vec<(usize, u32)>), f64> = BTreeMap::new();
    let mut items: Vec<(f64, usize, u32)> = Vec::new();
    for mask in 1..=g.full_mask() {
        let travel = match kind {
            PathKind::General => g.tmin(mask),
            PathKind::Ordered => g.tord(mask),
        };
        if travel > max_d {
            continue;
        }
        items.clear();
        for s in &sides {
            if mask & (1 << s.local) == 0 {
                continue;
            }
            let pi = duals.cover[s.side];
            if let Some(pl) = s.partner_local {
                if mask & (1 << pl) != 0 {
                    // both ends reachable: keep only the better-priced orientation
                    let other = duals.cover[s.side ^ 1];
                    let keep = pi > other || (pi == other && s.side < (s.side ^ 1));
                    if !keep {
                        continue;
                    }
                }
            }
            if pi > 0.0 {
                items.push((pi, s.side, s.circuits));
            }
        }
        if items.is_empty() {
            continue;
        }
        items.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        for &duration in res.durations_min.iter().filter(|&&d| d >= travel) {
            let mut cap = (duration - travel) / theta;
            if cap == 0 {
                continue;
            }
            let mut counts = Vec::new();
            let mut value = 0.0;
            for &(pi, side, circuits) in &items {
                if cap == 0 {
                    break;
                }
                let n = circuits.min(cap);
                cap -= n;
                value += pi * n as f64;
                counts.push((side, n));
            }
            let cost = if input.phase_one {
                0.0
            } else {
                inst.shift_cost(duration) as f64
            };
            let rc = cost - value - fixed;
            if rc < input.threshold {
                counts.sort_unstable();
                let entry = found.entry((duration, counts)).or_insert(rc);
                *entry = entry.min(rc);
            }
        }
    }

    let mut out: Vec<PricedColumn> = found
        .into_iter()
        .map(|((duration, counts), rc)| PricedColumn {
            column: ShiftColumn {
                region: input.region,
                duration,
                counts,
            },
            reduced_cost: rc,
        })
        .collect();
    out.sort_by(|a, b| {
        a.reduced_cost
            .total_cmp(&b.reduced_cost)
            .then_with(|| a.column.cmp(&b.column))
    });
    out.truncate(MAX_COLUMNS);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colgen::validate_column;
    use crate::instance::{Network, Pair, Resources, Site};
    use proptest::prelude::*;

    fn instance(region_of: &[usize], pairs: &[(usize, usize, u32)], travel: Vec<Vec<u32>>, durations: Vec<u32>) -> Instance {
        let regions = region_of.iter().max().unwrap() + 1;
        Instance {
            name: "pricing".into(),
            network: Network {
                sites: region_of
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| Site {
                        id: i,
                        region: r,
                        x_km: 0.0,
                        y_km: 0.0,
                    })
                    .collect(),
                pairs: pairs.iter().map(|&(s, t, c)| Pair { s, t, circuits: c }).collect(),
                travel_minutes: travel,
            },
            resources: Resources {
                eta_tech: vec![2; regions],
                eta_cir: 50,
                eta_eng: 2,
                alpha_eng: 5,
                theta_min: 20,
                cost_tech_cph: 10800,
                cost_eng_cph: 14000,
                durations_min: durations,
                windows: 1,
            },
        }
    }

    fn zero_duals(inst: &Instance) -> Duals {
        Duals {
            cover: vec![0.0; inst.network.num_sides()],
            tech: vec![0.0; inst.num_regions()],
            eng: 0.0,
        }
    }

    fn input(region: usize, duals: &Duals) -> PricingInput<'_> {
        PricingInput {
            region,
            duals,
            phase_one: false,
            threshold: RC_TOL,
        }
    }

    #[test]
    fn zero_duals_price_nothing() {
        let inst = instance(&[0, 1], &[(0, 1, 1)], vec![vec![0, 50], vec![50, 0]], vec![360, 480]);
        let geom = Geometry::new(&inst).unwrap();
        let duals = zero_duals(&inst);
        assert!(price_general(&inst, &geom, &input(0, &duals)).is_empty());
        let col = ShiftColumn {
            region: 0,
            duration: 360,
            counts: vec![],
        };
        assert_eq!(reduced_cost(&inst, &col, &duals, false), 81600.0);
    }

    #[test]
    fn single_site_fills_to_capacity() {
        let inst = instance(&[0, 1], &[(0, 1, 30)], vec![vec![0, 50], vec![50, 0]], vec![360]);
        let geom = Geometry::new(&inst).unwrap();
        let mut duals = zero_duals(&inst);
        duals.cover[0] = 100000.0;
        let cols = price_general(&inst, &geom, &input(0, &duals));
        assert_eq!(cols[0].column.counts, vec![(0, 18)]);
        assert_eq!(cols[0].reduced_cost, 81600.0 - 1_800_000.0);
        assert_eq!(price_ordered(&inst, &geom, &input(0, &duals)), cols);
    }

    #[test]
    fn long_travel_limits_two_site_columns() {
        // sites 0 and 1 share a region 400 minutes apart, both paired with site 2
        let travel = vec![vec![0, 400, 10], vec![400, 0, 10], vec![10, 10, 0]];
        let inst = instance(&[0, 0, 1], &[(0, 2, 10), (1, 2, 10)], travel, vec![360, 480]);
        let geom = Geometry::new(&inst).unwrap();
        let mut duals = zero_duals(&inst);
        duals.cover[0] = 50000.0;
        duals.cover[2] = 50000.0;
        for pc in price_general(&inst, &geom, &input(0, &duals)) {
            let sites: Vec<usize> = pc.column.counts.iter().map(|&(s, _)| inst.network.side(s).site).collect();
            if sites.contains(&0) && sites.contains(&1) {
                assert!(pc.column.n_cir() <= 4);
            }
        }
    }

    #[test]
    fn intra_region_pair_uses_one_orientation() {
        let travel = vec![vec![0, 10], vec![10, 0]];
        let inst = instance(&[0, 0], &[(0, 1, 4)], travel, vec![360]);
        let geom = Geometry::new(&inst).unwrap();
        let mut duals = zero_duals(&inst);
        duals.cover[0] = 60000.0;
        duals.cover[1] = 70000.0;
        for pc in price_general(&inst, &geom, &input(0, &duals)) {
            assert_eq!(pc.column.counts.len(), 1);
        }
        let best = &price_general(&inst, &geom, &input(0, &duals))[0];
        assert_eq!(best.column.counts, vec![(1, 4)]);
    }

    #[test]
    fn ordered_is_never_better_on_a_four_site_region() {
        // the cheap tour is 0-2-1-3; increasing order 0-1-2-3 is long
        let travel = vec![
            vec![0, 200, 10, 200],
            vec![200, 0, 10, 10],
            vec![10, 10, 0, 200],
            vec![200, 10, 200, 0],
        ];
        let mut t = vec![vec![0u32; 5]; 5];
        for a in 0..4 {
            for b in 0..4 {
                t[a][b] = travel[a][b];
            }
            t[a][4] = 30;
            t[4][a] = 30;
        }
        let pairs: Vec<(usize, usize, u32)> = (0..4).map(|s| (s, 4, 2)).collect();
        let inst = instance(&[0, 0, 0, 0, 1], &pairs, t, vec![360, 480]);
        let geom = Geometry::new(&inst).unwrap();
        let mut duals = zero_duals(&inst);
        for p in 0..4 {
            duals.cover[2 * p] = 15000.0;
        }
        let general = price_general(&inst, &geom, &input(0, &duals));
        let ordered = price_ordered(&inst, &geom, &input(0, &duals));
        assert!(general[0].reduced_cost < ordered[0].reduced_cost);
        assert_eq!(general[0].column.n_cir(), 8);
    }

    fn brute_allocation(values: &[(f64, u32)], cap: u32) -> f64 {
        fn rec(values: &[(f64, u32)], cap: u32) -> f64 {
            match values.split_first() {
                None => 0.0,
                Some((&(v, c), rest)) => (0..=c.min(cap))
                    .map(|n| v * n as f64 + rec(rest, cap - n))
                    .fold(f64::NEG_INFINITY, f64::max),
            }
        }
        rec(values, cap)
    }

    proptest! {
        #[test]
        fn greedy_allocation_matches_brute_force(
            duals in prop::collection::vec(-5i32..20, 4),
            circuits in prop::collection::vec(1u32..4, 4),
            slots in 1u32..10,
        ) {
            // one site in region 0 paired with four remote sites
            let n = 5;
            let mut travel = vec![vec![5u32; n]; n];
            for (i, row) in travel.iter_mut().enumerate() { row[i] = 0; }
            let pairs: Vec<(usize, usize, u32)> = (0..4).map(|p| (0, p + 1, circuits[p])).collect();
            let inst = instance(&[0, 1, 1, 1, 1], &pairs, travel, vec![20 * slots]);
            let geom = Geometry::new(&inst).unwrap();
            let mut d = zero_duals(&inst);
            for p in 0..4 { d.cover[2 * p] = duals[p] as f64 * 10000.0; }
            let values: Vec<(f64, u32)> = (0..4).map(|p| (d.cover[2 * p], circuits[p])).collect();
            let best_value = brute_allocation(&values, slots);
            let cost = inst.shift_cost(20 * slots) as f64;
            let expect = cost - best_value;
            let got = price_general(&inst, &geom, &input(0, &d));
            if expect < RC_TOL {
                prop_assert!((got[0].reduced_cost - expect).abs() < 1e-6);
                prop_assert!(validate_column(&inst, &geom, &got[0].column));
            } else {
                prop_assert!(got.is_empty());
            }
        }
    }
}
