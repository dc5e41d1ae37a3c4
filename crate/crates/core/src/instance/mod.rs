//! Problem data: sites, regions, circuit multiplicities, travel times and
//! the workforce/cost parameters of a migration instance.
//!
//! Money is kept in integer cents and time in integer minutes so that plan
//! costs and schedules are exact.

mod generate;

pub use generate::{
    cluster_regions, euclidean_km, eunetworks, generate_instance, travel_time, GeneratorConfig,
    Topology, TopologySite, DEFAULT_SPEED_KMH,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MigrateError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: usize,
    pub region: usize,
    pub x_km: f64,
    pub y_km: f64,
}

/// An unordered site pair `{s, t}` (stored with `s < t`) carrying `circuits` circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub s: usize,
    pub t: usize,
    pub circuits: u32,
}

impl Pair {
    pub fn other(&self, site: usize) -> usize {
        if site == self.s {
            self.t
        } else {
            self.s
        }
    }

    pub fn touches(&self, site: usize) -> bool {
        self.s == site || self.t == site
    }
}

/// One end of a pair: the endpoints of pair `pair` located at `site`.
///
/// Sides are numbered `2 * pair` (at `pair.s`) and `2 * pair + 1` (at `pair.t`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Side {
    pub pair: usize,
    pub site: usize,
    pub partner: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub sites: Vec<Site>,
    pub pairs: Vec<Pair>,
    /// Symmetric travel times in minutes, zero diagonal.
    pub travel_minutes: Vec<Vec<u32>>,
}

impl Network {
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn num_sides(&self) -> usize {
        2 * self.pairs.len()
    }

    pub fn side(&self, side: usize) -> Side {
        let pair = side / 2;
        let p = &self.pairs[pair];
        if side % 2 == 0 {
            Side {
                pair,
                site: p.s,
                partner: p.t,
            }
        } else {
            Side {
                pair,
                site: p.t,
                partner: p.s,
            }
        }
    }

    /// Side index of `pair` at `site`.
    pub fn side_at(&self, pair: usize, site: usize) -> Option<usize> {
        let p = &self.pairs[pair];
        if p.s == site {
            Some(2 * pair)
        } else if p.t == site {
            Some(2 * pair + 1)
        } else {
            None
        }
    }

    pub fn opposite_side(side: usize) -> usize {
        side ^ 1
    }

    pub fn travel(&self, a: usize, b: usize) -> u32 {
        self.travel_minutes[a][b]
    }

    pub fn total_circuits(&self) -> u64 {
        self.pairs.iter().map(|p| p.circuits as u64).sum()
    }

    pub fn total_endpoints(&self) -> u64 {
        2 * self.total_circuits()
    }

    /// Endpoint count per site: Σ_{s'} φ_{ss'}.
    pub fn site_endpoints(&self) -> Vec<u64> {
        let mut out = vec![0u64; self.sites.len()];
        for p in &self.pairs {
            out[p.s] += p.circuits as u64;
            out[p.t] += p.circuits as u64;
        }
        out
    }

    /// True when both ends of `pair` lie in the same region.
    pub fn is_intra_region(&self, pair: usize) -> bool {
        let p = &self.pairs[pair];
        self.sites[p.s].region == self.sites[p.t].region
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resources {
    /// Technician cap per region.
    pub eta_tech: Vec<u32>,
    /// Circuits allowed per window.
    pub eta_cir: u32,
    pub eta_eng: u32,
    /// Technicians coordinated by one engineer.
    pub alpha_eng: u32,
    /// Minutes to migrate one endpoint.
    pub theta_min: u32,
    /// Technician rate, cents per hour.
    pub cost_tech_cph: i64,
    /// Engineer rate, cents per hour.
    pub cost_eng_cph: i64,
    /// Allowed shift lengths in minutes, strictly ascending.
    pub durations_min: Vec<u32>,
    pub windows: u32,
}

impl Resources {
    pub fn num_regions(&self) -> usize {
        self.eta_tech.len()
    }

    /// Combined hourly rate `cost_tech + cost_eng / alpha_eng` as the exact
    /// fraction `(numerator, denominator)` in cents per hour.
    pub fn combined_rate(&self) -> (i64, i64) {
        let alpha = self.alpha_eng as i64;
        (self.cost_tech_cph * alpha + self.cost_eng_cph, alpha)
    }

    /// Combined rate in cents per hour as a float (display and pricing only).
    pub fn combined_rate_f64(&self) -> f64 {
        let (num, den) = self.combined_rate();
        num as f64 / den as f64
    }

    /// Cost in cents of a shift lasting `minutes`.
    ///
    /// Exact when `rate * minutes / 60` is integral (always the case for
    /// whole-hour durations); otherwise rounded half-up to the cent.
    pub fn shift_cost(&self, minutes: u32) -> i64 {
        let (num, den) = self.combined_rate();
        let numer = num as i128 * minutes as i128;
        let denom = den as i128 * 60;
        ((2 * numer + denom) / (2 * denom)) as i64
    }

    pub fn max_duration(&self) -> u32 {
        *self.durations_min.last().expect("validated non-empty")
    }

    pub fn min_duration(&self) -> u32 {
        self.durations_min[0]
    }

    /// Shifts allowed per window by the engineer pool.
    pub fn shift_cap(&self) -> u32 {
        self.alpha_eng.saturating_mul(self.eta_eng)
    }

    /// Smallest allowed duration that is at least `makespan`.
    pub fn fitting_duration(&self, makespan: u32) -> Option<u32> {
        self.durations_min.iter().copied().find(|&d| d >= makespan)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub name: String,
    pub network: Network,
    pub resources: Resources,
}

impl Instance {
    pub fn num_regions(&self) -> usize {
        self.resources.num_regions()
    }

    pub fn num_windows(&self) -> usize {
        self.resources.windows as usize
    }

    /// Sites of region `r`, ascending.
    pub fn region_sites(&self, region: usize) -> Vec<usize> {
        self.network
            .sites
            .iter()
            .filter(|s| s.region == region)
            .map(|s| s.id)
            .collect()
    }

    pub fn region_of(&self, site: usize) -> usize {
        self.network.sites[site].region
    }

    pub fn shift_cost(&self, minutes: u32) -> i64 {
        self.resources.shift_cost(minutes)
    }

    /// Sides whose site lies in `region`.
    pub fn region_sides(&self, region: usize) -> Vec<usize> {
        (0..self.network.num_sides())
            .filter(|&side| self.region_of(self.network.side(side).site) == region)
            .collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
        load_instance(path)
    }

    pub fn to_json(&self) -> String {
        let doc = InstanceDoc::from(self);
        let mut out = serde_json::to_string_pretty(&doc).expect("instance serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        doc.into_instance()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|source| MigrateError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Checks every structural invariant; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let net = &self.network;
        let res = &self.resources;
        let n = net.sites.len();
        let fail = |msg: String| Err(MigrateError::Validation(msg));

        if n == 0 {
            return fail("network has no sites".into());
        }
        for (i, site) in net.sites.iter().enumerate() {
            if site.id != i {
                return fail(format!("site ids must be 0..{n} in order; found id {} at position {i}", site.id));
            }
            if site.region >= res.num_regions() {
                return fail(format!(
                    "site {i} has region {} but only {} regions have technician caps",
                    site.region,
                    res.num_regions()
                ));
            }
            if !site.x_km.is_finite() || !site.y_km.is_finite() {
                return fail(format!("site {i} has non-finite coordinates"));
            }
        }
        for (k, pair) in net.pairs.iter().enumerate() {
            if pair.s == pair.t {
                return fail(format!("pair {k} is a self-pair at site {}", pair.s));
            }
            if pair.s >= n || pair.t >= n {
                return fail(format!("pair {k} references a missing site"));
            }
            if pair.s > pair.t {
                return fail(format!("pair {k} is not stored as s < t"));
            }
            if pair.circuits == 0 {
                return fail(format!("pair {k} has zero circuits"));
            }
            if k > 0 && net.pairs[k - 1].s == pair.s && net.pairs[k - 1].t == pair.t {
                return fail(format!("pair {{{}, {}}} listed twice", pair.s, pair.t));
            }
            if k > 0 && (net.pairs[k - 1].s, net.pairs[k - 1].t) > (pair.s, pair.t) {
                return fail("pairs are not sorted".into());
            }
        }
        if net.travel_minutes.len() != n || net.travel_minutes.iter().any(|row| row.len() != n) {
            return fail(format!("travel matrix must be {n}x{n}"));
        }
        for a in 0..n {
            if net.travel_minutes[a][a] != 0 {
                return fail(format!("travel matrix diagonal is non-zero at site {a}"));
            }
            for b in 0..a {
                if net.travel_minutes[a][b] != net.travel_minutes[b][a] {
                    return fail("travel matrix not symmetric".into());
                }
            }
        }
        if res.theta_min == 0 {
            return fail("theta must be positive".into());
        }
        if res.alpha_eng == 0 {
            return fail("alpha_eng must be positive".into());
        }
        if res.durations_min.is_empty() {
            return fail("durations must be non-empty".into());
        }
        if res.durations_min[0] == 0 {
            return fail("durations must be positive".into());
        }
        if res.durations_min.windows(2).any(|w| w[0] >= w[1]) {
            return fail("durations must be strictly ascending".into());
        }
        if res.cost_tech_cph < 0 || res.cost_eng_cph < 0 {
            return fail("hourly costs must be non-negative".into());
        }
        Ok(())
    }
}

/// Reads and validates an instance document.
pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MigrateError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Instance::from_json(&text)
}

// On-disk layout.

#[derive(Debug, Serialize, Deserialize)]
struct SiteDoc {
    id: usize,
    region: usize,
    x_km: f64,
    y_km: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairDoc {
    s: usize,
    t: usize,
    circuits: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    name: String,
    sites: Vec<SiteDoc>,
    pairs: Vec<PairDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    travel_minutes: Option<Vec<Vec<u32>>>,
    resources: Resources,
}

impl From<&Instance> for InstanceDoc {
    fn from(inst: &Instance) -> Self {
        InstanceDoc {
            name: inst.name.clone(),
            sites: inst
                .network
                .sites
                .iter()
                .map(|s| SiteDoc {
                    id: s.id,
                    region: s.region,
                    x_km: s.x_km,
                    y_km: s.y_km,
                })
                .collect(),
            pairs: inst
                .network
                .pairs
                .iter()
                .map(|p| PairDoc {
                    s: p.s,
                    t: p.t,
                    circuits: p.circuits,
                })
                .collect(),
            travel_minutes: Some(inst.network.travel_minutes.clone()),
            resources: inst.resources.clone(),
        }
    }
}

impl InstanceDoc {
    fn into_instance(self) -> Result<Instance> {
        let mut sites: Vec<Site> = self
            .sites
            .into_iter()
            .map(|s| Site {
                id: s.id,
                region: s.region,
                x_km: s.x_km,
                y_km: s.y_km,
            })
            .collect();
        sites.sort_by_key(|s| s.id);

        let n = sites.len();
        for p in &self.pairs {
            if p.s >= n || p.t >= n {
                return Err(MigrateError::Validation(format!(
                    "pair {{{}, {}}} references a missing site",
                    p.s, p.t
                )));
            }
        }
        let mut pairs: Vec<Pair> = self
            .pairs
            .into_iter()
            .map(|p| Pair {
                s: p.s.min(p.t),
                t: p.s.max(p.t),
                circuits: p.circuits,
            })
            .collect();
        pairs.sort();

        let travel_minutes = match self.travel_minutes {
            Some(t) => t,
            None => {
                let coords: Vec<(f64, f64)> = sites.iter().map(|s| (s.x_km, s.y_km)).collect();
                (0..n)
                    .map(|a| {
                        (0..n)
                            .map(|b| travel_time(&coords, a, b, DEFAULT_SPEED_KMH))
                            .collect()
                    })
                    .collect()
            }
        };

        let inst = Instance {
            name: self.name,
            network: Network {
                sites,
                pairs,
                travel_minutes,
            },
            resources: self.resources,
        };
        inst.validate()?;
        Ok(inst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal_doc() -> String {
        r#"{
            "name": "tiny",
            "sites": [{"id":0,"region":0,"x_km":0.0,"y_km":0.0},{"id":1,"region":0,"x_km":40.0,"y_km":0.0}],
            "pairs": [{"s":0,"t":1,"circuits":1}],
            "resources": {"eta_tech":[2],"eta_cir":5,"eta_eng":1,"alpha_eng":5,"theta_min":20,
                          "cost_tech_cph":10800,"cost_eng_cph":14000,"durations_min":[360,480],"windows":1}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_instance_loads() {
        let inst = Instance::from_json(&minimal_doc()).unwrap();
        assert_eq!(inst.network.total_endpoints(), 2);
        // 40 km at 80 km/h
        assert_eq!(inst.network.travel(0, 1), 30);
    }

    #[test]
    fn asymmetric_travel_is_rejected() {
        let doc = minimal_doc().replace(
            r#""pairs""#,
            r#""travel_minutes": [[0, 30], [31, 0]], "pairs""#,
        );
        match Instance::from_json(&doc) {
            Err(MigrateError::Validation(msg)) => assert_eq!(msg, "travel matrix not symmetric"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(
            Instance::from_json("{ not json"),
            Err(MigrateError::Parse(_))
        ));
    }

    #[test]
    fn shift_cost_uses_combined_rate() {
        let inst = Instance::from_json(&minimal_doc()).unwrap();
        // 10800 + 14000 / 5 = 13600 cents per hour
        assert_eq!(inst.resources.combined_rate(), (68000, 5));
        assert_eq!(inst.shift_cost(360), 81600);
        assert_eq!(inst.shift_cost(480), 108800);
        // 13600 * 7 / 60 = 1586.67 -> 1587
        assert_eq!(inst.shift_cost(7), 1587);
    }

    #[test]
    fn pair_orientation_is_normalized() {
        let doc = minimal_doc().replace(r#"{"s":0,"t":1,"circuits":1}"#, r#"{"s":1,"t":0,"circuits":3}"#);
        let inst = Instance::from_json(&doc).unwrap();
        assert_eq!(inst.network.pairs[0], Pair { s: 0, t: 1, circuits: 3 });
    }

    #[test]
    fn round_trip_is_identity() {
        let inst = Instance::from_json(&minimal_doc()).unwrap();
        let again = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, again);
        assert_eq!(inst.to_json(), again.to_json());
    }
}
