//! Seeded tiny instances inside the oracle's limits.
#![allow(dead_code)]

use migrate_core::instance::{Instance, Network, Pair, Resources, Site};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random instance with at most 6 sites, 6 circuits, 2 windows, 2
/// technicians per region and 4 sites per region.
pub fn tiny_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6usize);
    let regions = rng.random_range(n.div_ceil(4)..=n.min(3));
    let mut region_of: Vec<usize> = (0..n).map(|i| if i < regions { i } else { rng.random_range(0..regions) }).collect();
    region_of.sort();
    while (0..regions).any(|r| region_of.iter().filter(|&&x| x == r).count() > 4) {
        let i = rng.random_range(0..n);
        region_of[i] = rng.random_range(0..regions);
    }

    let mut travel = vec![vec![0u32; n]; n];
    for a in 0..n {
        for b in 0..a {
            let t = if region_of[a] == region_of[b] {
                rng.random_range(10..=150)
            } else {
                rng.random_range(60..=300)
            };
            travel[a][b] = t;
            travel[b][a] = t;
        }
    }

    let mut budget = rng.random_range(1..=6u32);
    let mut pairs: Vec<Pair> = Vec::new();
    let mut tries = 0;
    while budget > 0 && tries < 20 {
        tries += 1;
        let s = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if s == t {
            continue;
        }
        let (s, t) = (s.min(t), s.max(t));
        let c = rng.random_range(1..=budget.min(3));
        match pairs.iter_mut().find(|p| p.s == s && p.t == t) {
            Some(p) => p.circuits += c,
            None => pairs.push(Pair { s, t, circuits: c }),
        }
        budget -= c;
    }
    pairs.sort_by_key(|p| (p.s, p.t));

    let windows = rng.random_range(1..=2u32);
    let total: u32 = pairs.iter().map(|p| p.circuits).sum();
    let eta_cir = rng.random_range(total.div_ceil(windows).max(1)..=total.max(1));
    let theta = [20, 40, 60, 90][rng.random_range(0..4)];
    Instance {
        name: format!("tiny-{seed}"),
        network: Network {
            sites: region_of
                .iter()
                .enumerate()
                .map(|(i, &r)| Site { id: i, region: r, x_km: i as f64, y_km: 0.0 })
                .collect(),
            pairs,
            travel_minutes: travel,
        },
        resources: Resources {
            eta_tech: (0..regions).map(|_| rng.random_range(1..=2)).collect(),
            eta_cir,
            eta_eng: rng.random_range(1..=2),
            alpha_eng: rng.random_range(2..=5),
            theta_min: theta,
            cost_tech_cph: 10800,
            cost_eng_cph: 14000,
            durations_min: vec![360, 480],
            windows,
        },
    }
}

/// A tiny instance made infeasible in one of several ways, picked by seed.
pub fn tiny_infeasible(seed: u64) -> Instance {
    let mut inst = tiny_instance(seed);
    while inst.network.pairs.is_empty() {
        inst = tiny_instance(inst.name.len() as u64 * 7919 + seed + 1000);
    }
    let res = &mut inst.resources;
    match seed % 4 {
        // no technicians where the first pair's endpoint sits
        0 => {
            let r = inst.network.sites[inst.network.pairs[0].s].region;
            res.eta_tech[r] = 0;
        }
        // windows cannot hold every circuit
        1 => {
            let total: u32 = inst.network.pairs.iter().map(|p| p.circuits).sum();
            res.eta_cir = (total - 1) / res.windows;
        }
        // a single shift per region cannot migrate enough endpoints
        2 => {
            let top = inst.network.pairs.iter().map(|p| p.circuits).max().unwrap();
            inst.network.pairs.iter_mut().for_each(|p| p.circuits = top.max(2));
            let total: u32 = inst.network.pairs.iter().map(|p| p.circuits).sum();
            if total > 6 {
                inst.network.pairs.truncate(1);
            }
            let total: u32 = inst.network.pairs.iter().map(|p| p.circuits).sum();
            res.eta_cir = total;
            res.windows = 1;
            res.eta_tech.iter_mut().for_each(|e| *e = 1);
            res.theta_min = 400;
        }
        // too few engineer-supervised shifts for two distinct sites
        _ => {
            res.eta_eng = 1;
            res.alpha_eng = 1;
            res.windows = 1;
            let total: u32 = inst.network.pairs.iter().map(|p| p.circuits).sum();
            res.eta_cir = total;
        }
    }
    inst.name = format!("tiny-infeasible-{seed}");
    inst
}

/// Two sites in different regions joined by one circuit; optimum 163200 cents.
pub fn single_pair_instance() -> Instance {
    Instance {
        name: "single-pair".into(),
        network: Network {
            sites: (0..2).map(|i| Site { id: i, region: i, x_km: 0.0, y_km: 0.0 }).collect(),
            pairs: vec![Pair { s: 0, t: 1, circuits: 1 }],
            travel_minutes: vec![vec![0, 45], vec![45, 0]],
        },
        resources: Resources {
            eta_tech: vec![2, 2],
            eta_cir: 1,
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
