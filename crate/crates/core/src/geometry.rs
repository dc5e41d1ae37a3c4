//! Per-region travel tables indexed by site subsets.
//!
//! For a region with `k` sites every subset is a bit mask over the region's
//! sites in ascending id order. Three travel measures are tabulated:
//!
//! * `tmin`: shortest simple path visiting exactly the subset (any order);
//! * `tord`: the path that visits the subset in increasing site order;
//! * `tsup`: shortest simple path visiting some superset of the subset, which
//!   is the travel a technician needs when sites outside the subset may be
//!   passed through without migrating anything there.

use crate::error::{MigrateError, Result};
use crate::instance::Instance;

pub const MAX_REGION_SITES: usize = 12;
const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct RegionGeometry {
    pub region: usize,
    /// Global site ids, ascending.
    pub sites: Vec<usize>,
    tmin: Vec<u32>,
    tord: Vec<u32>,
    tsup: Vec<u32>,
    tsup_arg: Vec<usize>,
    dp: Vec<u32>,
    parent: Vec<u8>,
}

impl RegionGeometry {
    pub fn new(inst: &Instance, region: usize) -> Result<RegionGeometry> {
        let sites = inst.region_sites(region);
        let k = sites.len();
        if k > MAX_REGION_SITES {
            return Err(MigrateError::RegionTooLarge {
                region,
                sites: k,
                limit: MAX_REGION_SITES,
            });
        }
        let full = 1usize << k;
        let t = |a: usize, b: usize| inst.network.travel(sites[a], sites[b]);

        let mut dp = vec![UNREACHABLE; full * k.max(1)];
        let mut parent = vec![u8::MAX; full * k.max(1)];
        for i in 0..k {
            dp[(1 << i) * k + i] = 0;
        }
        for mask in 1..full {
            for last in 0..k {
                let cur = dp[mask * k + last];
                if cur == UNREACHABLE || mask & (1 << last) == 0 {
                    continue;
                }
                for next in 0..k {
                    if mask & (1 << next) != 0 {
                        continue;
                    }
                    let nm = mask | (1 << next);
                    let cand = cur + t(last, next);
                    if cand < dp[nm * k + next] {
                        dp[nm * k + next] = cand;
                        parent[nm * k + next] = last as u8;
                    }
                }
            }
        }

        let mut tmin = vec![0u32; full];
        let mut tord = vec![0u32; full];
        for mask in 1..full {
            tmin[mask] = (0..k)
                .filter(|&i| mask & (1 << i) != 0)
                .map(|i| dp[mask * k + i])
                .min()
                .unwrap_or(0);
            let members: Vec<usize> = (0..k).filter(|&i| mask & (1 << i) != 0).collect();
            tord[mask] = members.windows(2).map(|w| t(w[0], w[1])).sum();
        }

        let mut tsup = tmin.clone();
        let mut tsup_arg: Vec<usize> = (0..full).collect();
        for mask in (0..full).rev() {
            for i in 0..k {
                if mask & (1 << i) == 0 {
                    let sup = mask | (1 << i);
                    let better = tsup[sup] < tsup[mask]
                        || (tsup[sup] == tsup[mask]
                            && tsup_arg[mask] != mask
                            && tsup_arg[sup] < tsup_arg[mask]);
                    if better {
                        tsup[mask] = tsup[sup];
                        tsup_arg[mask] = tsup_arg[sup];
                    }
                }
            }
        }

        Ok(RegionGeometry {
            region,
            sites,
            tmin,
            tord,
            tsup,
            tsup_arg,
            dp,
            parent,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn full_mask(&self) -> usize {
        (1 << self.sites.len()) - 1
    }

    pub fn local(&self, site: usize) -> Option<usize> {
        self.sites.binary_search(&site).ok()
    }

    /// Bit mask of the given global sites; panics on a site outside the region.
    pub fn mask_of(&self, sites: impl IntoIterator<Item = usize>) -> usize {
        sites.into_iter().fold(0, |m, s| {
            m | 1 << self.local(s).expect("site belongs to region")
        })
    }

    pub fn tmin(&self, mask: usize) -> u32 {
        self.tmin[mask]
    }

    pub fn tord(&self, mask: usize) -> u32 {
        self.tord[mask]
    }

    pub fn tsup(&self, mask: usize) -> u32 {
        self.tsup[mask]
    }

    /// The superset whose shortest path realizes `tsup(mask)`; `mask` itself on ties.
    pub fn tsup_mask(&self, mask: usize) -> usize {
        self.tsup_arg[mask]
    }

    /// Global sites of a shortest path visiting exactly `mask`, in visit order.
    pub fn path(&self, mask: usize) -> Vec<usize> {
        if mask == 0 {
            return Vec::new();
        }
        let k = self.sites.len();
        let mut last = (0..k)
            .filter(|&i| mask & (1 << i) != 0)
            .min_by_key(|&i| (self.dp[mask * k + i], i))
            .expect("non-empty mask");
        let mut m = mask;
        let mut order = vec![self.sites[last]];
        while m != 1 << last {
            let prev = self.parent[m * k + last] as usize;
            m &= !(1 << last);
            last = prev;
            order.push(self.sites[last]);
        }
        order.reverse();
        order
    }
}

/// Geometry of every region of an instance.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub regions: Vec<RegionGeometry>,
}

impl Geometry {
    pub fn new(inst: &Instance) -> Result<Geometry> {
        let regions = (0..inst.num_regions())
            .map(|r| RegionGeometry::new(inst, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Geometry { regions })
    }
}
