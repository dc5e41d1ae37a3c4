//! Geometry helpers and the synthetic instance generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use super::{Instance, Network, Pair, Resources, Site};

pub const DEFAULT_SPEED_KMH: f64 = 80.0;

pub fn euclidean_km(coords: &[(f64, f64)], a: usize, b: usize) -> f64 {
    let (xa, ya) = coords[a];
    let (xb, yb) = coords[b];
    ((xa - xb).powi(2) + (ya - yb).powi(2)).sqrt()
}

/// Travel minutes between two sites, rounded to the nearest minute.
pub fn travel_time(coords: &[(f64, f64)], a: usize, b: usize, speed_kmh: f64) -> u32 {
    assert!(speed_kmh > 0.0, "speed must be positive");
    if a == b {
        return 0;
    }
    (euclidean_km(coords, a, b) / speed_kmh * 60.0).round() as u32
}

/// Quality-threshold clustering.
///
/// Each round builds one candidate cluster per unassigned seed (greedily adding
/// the point that keeps the diameter smallest, ties to the lowest index, while
/// the diameter stays within `threshold`) and extracts the largest candidate,
/// ties to the lowest seed. Regions are numbered in extraction order.
pub fn cluster_regions(coords: &[(f64, f64)], threshold: f64) -> Vec<usize> {
    assert!(threshold > 0.0, "threshold must be positive");
    let n = coords.len();
    let mut region = vec![usize::MAX; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut next_region = 0;

    while !remaining.is_empty() {
        let mut best: Vec<usize> = Vec::new();
        for &seed in &remaining {
            let cluster = grow_candidate(coords, &remaining, seed, threshold);
            if cluster.len() > best.len() {
                best = cluster;
            }
        }
        for &site in &best {
            region[site] = next_region;
        }
        next_region += 1;
        remaining.retain(|s| region[*s] == usize::MAX);
    }
    region
}

fn grow_candidate(coords: &[(f64, f64)], pool: &[usize], seed: usize, threshold: f64) -> Vec<usize> {
    let mut cluster = vec![seed];
    // diameter contribution of each pool point if added: max distance to members
    let mut reach: Vec<f64> = pool.iter().map(|&p| euclidean_km(coords, seed, p)).collect();
    let mut diameter = 0.0f64;
    let mut used = vec![false; pool.len()];
    if let Some(i) = pool.iter().position(|&p| p == seed) {
        used[i] = true;
    }
    loop {
        let mut pick: Option<(usize, f64)> = None;
        for (i, &r) in reach.iter().enumerate() {
            if used[i] {
                continue;
            }
            let d = diameter.max(r);
            if d <= threshold && pick.is_none_or(|(_, bd)| d < bd) {
                pick = Some((i, d));
            }
        }
        let Some((i, d)) = pick else { break };
        used[i] = true;
        diameter = d;
        let added = pool[i];
        cluster.push(added);
        for (j, &p) in pool.iter().enumerate() {
            reach[j] = reach[j].max(euclidean_km(coords, added, p));
        }
    }
    cluster.sort_unstable();
    cluster
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySite {
    pub id: usize,
    #[serde(default)]
    pub label: String,
    pub x_km: f64,
    pub y_km: f64,
}

/// A network skeleton: site coordinates and the adjacent site pairs that
/// circuits are preferably placed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub name: String,
    pub sites: Vec<TopologySite>,
    pub edges: Vec<(usize, usize)>,
}

impl Topology {
    pub fn coords(&self) -> Vec<(f64, f64)> {
        self.sites.iter().map(|s| (s.x_km, s.y_km)).collect()
    }

    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == site {
                    Some(b)
                } else if b == site {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// The 15-site pan-European backbone used for the benchmark families.
pub fn eunetworks() -> Topology {
    serde_json::from_str(include_str!("../../data/eunetworks.json")).expect("bundled topology parses")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    /// Mean endpoints per site.
    pub mu: f64,
    /// Standard deviation of endpoints per site.
    pub sigma: f64,
    pub seed: u64,
    pub windows: u32,
    pub eta_cir: u32,
    pub cluster_km: f64,
    pub speed_kmh: f64,
    pub eta_tech_per_region: u32,
    pub eta_eng: u32,
    pub alpha_eng: u32,
    pub theta_min: u32,
    pub cost_tech_cph: i64,
    pub cost_eng_cph: i64,
    pub durations_min: Vec<u32>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            mu: 5.0,
            sigma: 2.5,
            seed: 0,
            windows: 3,
            eta_cir: 30,
            cluster_km: 80.0,
            speed_kmh: DEFAULT_SPEED_KMH,
            eta_tech_per_region: 2,
            eta_eng: 4,
            alpha_eng: 5,
            theta_min: 20,
            cost_tech_cph: 10800,
            cost_eng_cph: 14000,
            durations_min: vec![360, 480],
        }
    }
}

/// Draws per-site endpoint targets and places circuits on the skeleton.
///
/// The site with the largest residual target (lowest index on ties) receives a
/// circuit to a uniformly chosen adjacent site that still has residual demand;
/// failing that, to any other site with residual demand; failing that, to any
/// other site. Placement stops once no residual is positive.
pub fn generate_instance(topology: &Topology, cfg: &GeneratorConfig) -> Instance {
    assert!(cfg.mu > 0.0 && cfg.sigma > 0.0, "mu and sigma must be positive");
    let n = topology.sites.len();
    assert!(n >= 2, "topology needs at least two sites");

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dist = LogNormal::from_mean_cv(cfg.mu, cfg.sigma / cfg.mu).expect("valid lognormal parameters");
    let mut residual: Vec<i64> = (0..n)
        .map(|_| dist.sample(&mut rng).round().max(0.0) as i64)
        .collect();

    let mut circuits = std::collections::BTreeMap::<(usize, usize), u32>::new();
    loop {
        let mut site = 0;
        for i in 1..n {
            if residual[i] > residual[site] {
                site = i;
            }
        }
        if residual[site] <= 0 {
            break;
        }
        let adjacent: Vec<usize> = topology
            .neighbors(site)
            .into_iter()
            .filter(|&p| residual[p] > 0)
            .collect();
        let candidates = if !adjacent.is_empty() {
            adjacent
        } else {
            let open: Vec<usize> = (0..n).filter(|&p| p != site && residual[p] > 0).collect();
            if !open.is_empty() {
                open
            } else {
                (0..n).filter(|&p| p != site).collect()
            }
        };
        let partner = candidates[rng.random_range(0..candidates.len())];
        *circuits.entry((site.min(partner), site.max(partner))).or_insert(0) += 1;
        residual[site] -= 1;
        residual[partner] -= 1;
    }

    let coords = topology.coords();
    let regions = cluster_regions(&coords, cfg.cluster_km);
    let num_regions = regions.iter().copied().max().map_or(0, |r| r + 1);

    let sites = (0..n)
        .map(|i| Site {
            id: i,
            region: regions[i],
            x_km: coords[i].0,
            y_km: coords[i].1,
        })
        .collect();
    let pairs = circuits
        .into_iter()
        .map(|((s, t), c)| Pair { s, t, circuits: c })
        .collect();
    let travel_minutes = (0..n)
        .map(|a| (0..n).map(|b| travel_time(&coords, a, b, cfg.speed_kmh)).collect())
        .collect();

    Instance {
        name: format!("{}-mu{}-s{}", topology.name, cfg.mu, cfg.seed),
        network: Network {
            sites,
            pairs,
            travel_minutes,
        },
        resources: Resources {
            eta_tech: vec![cfg.eta_tech_per_region; num_regions],
            eta_cir: cfg.eta_cir,
            eta_eng: cfg.eta_eng,
            alpha_eng: cfg.alpha_eng,
            theta_min: cfg.theta_min,
            cost_tech_cph: cfg.cost_tech_cph,
            cost_eng_cph: cfg.cost_eng_cph,
            durations_min: cfg.durations_min.clone(),
            windows: cfg.windows,
        },
    }
}
