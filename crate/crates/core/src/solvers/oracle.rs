//! Exact routing oracles: dynamic programming over city subsets for single
//! tours, and partition enumeration on top of the same table for min-max
//! vehicle routing.

use itertools::Itertools;

use super::SolverError;
use crate::decode::{tour_length, RouteSet, Tour};
use crate::instance::{RoutingInstance, VrpConfig};

pub const ORACLE_CITY_LIMIT: usize = 12;
pub const BRUTE_CITY_LIMIT: usize = 9;
pub const VRP_ORACLE_CITY_LIMIT: usize = 8;
pub const VRP_ORACLE_FLEET_LIMIT: usize = 3;

/// Optimal tour by enumerating every permutation of the interior cities.
pub fn solve_tsp_brute(instance: &RoutingInstance) -> Result<(Tour, f64), SolverError> {
    if instance.n_cities > BRUTE_CITY_LIMIT {
        return Err(SolverError::TooLarge {
            got: instance.n_cities,
            limit: BRUTE_CITY_LIMIT,
            what: "permutation oracle",
        });
    }
    let t = instance.n_nodes();
    let interior: Vec<usize> = instance.interior_cities().collect();
    let mut best: Option<(Tour, f64)> = None;
    for perm in interior.iter().copied().permutations(interior.len()) {
        let tour = Tour::from_interior(&perm, t);
        let len = tour_length(&tour, instance);
        if best.as_ref().map(|(_, b)| len < *b).unwrap_or(true) {
            best = Some((tour, len));
        }
    }
    best.ok_or(SolverError::NothingFeasible)
}

/// Optimal tour by Held-Karp dynamic programming over interior-city subsets.
pub fn solve_tsp_oracle(instance: &RoutingInstance) -> Result<(Tour, f64), SolverError> {
    if instance.n_cities > ORACLE_CITY_LIMIT {
        return Err(SolverError::TooLarge {
            got: instance.n_cities,
            limit: ORACLE_CITY_LIMIT,
            what: "subset-DP oracle",
        });
    }
    let t = instance.n_nodes();
    let table = SubsetPaths::new(instance);
    let (len, order) = table.best_closed(&((1u32 << table.m) - 1));
    let mut full = vec![0usize];
    full.extend(order);
    full.push(t - 1);
    Ok((Tour::new(full), len))
}

/// Exact min-max vehicle routing by enumerating city-to-vehicle labelings
/// over precomputed optimal open routes per subset. The returned routes are
/// ordered longest first, matching the cap convention.
pub fn solve_vrp_oracle(config: &VrpConfig) -> Result<(RouteSet, f64), SolverError> {
    let instance = &config.instance;
    if instance.n_cities > VRP_ORACLE_CITY_LIMIT {
        return Err(SolverError::TooLarge {
            got: instance.n_cities,
            limit: VRP_ORACLE_CITY_LIMIT,
            what: "partition oracle",
        });
    }
    if config.n_vehicles > VRP_ORACLE_FLEET_LIMIT {
        return Err(SolverError::FleetTooLarge {
            got: config.n_vehicles,
            limit: VRP_ORACLE_FLEET_LIMIT,
        });
    }
    let t = instance.n_nodes();
    let fleet = config.n_vehicles;
    let table = SubsetPaths::new(instance);
    let m = table.m;

    let mut best: Option<(Vec<u32>, f64)> = None;
    let mut labels = vec![0usize; m];
    loop {
        let mut masks = vec![0u32; fleet];
        for (c, &l) in labels.iter().enumerate() {
            masks[l] |= 1 << c;
        }
        let value = masks
            .iter()
            .map(|mask| table.best_closed(mask).0)
            .fold(0.0, f64::max);
        if best.as_ref().map(|(_, b)| value < *b).unwrap_or(true) {
            best = Some((masks, value));
        }
        // next labeling in base-fleet counting order
        let mut i = 0;
        loop {
            if i == m {
                let (masks, value) = best.unwrap();
                let mut routes: Vec<Tour> = masks
                    .iter()
                    .map(|mask| {
                        let (_, order) = table.best_closed(mask);
                        let mut full = vec![0usize];
                        full.extend(order);
                        full.push(t - 1);
                        Tour::new(full)
                    })
                    .collect();
                routes.sort_by(|a, b| {
                    tour_length(b, instance)
                        .partial_cmp(&tour_length(a, instance))
                        .unwrap()
                });
                return Ok((RouteSet { routes }, value));
            }
            labels[i] += 1;
            if labels[i] < fleet {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
    }
}

/// Held-Karp table of optimal open paths start -> subset -> city, shared by
/// the tour and routing oracles.
struct SubsetPaths<'a> {
    instance: &'a RoutingInstance,
    cities: Vec<usize>,
    m: usize,
    /// dp[mask][e] = shortest path from the start through `mask` ending at
    /// city index `e`.
    dp: Vec<Vec<f64>>,
    parent: Vec<Vec<usize>>,
}

impl<'a> SubsetPaths<'a> {
    fn new(instance: &'a RoutingInstance) -> Self {
        let cities: Vec<usize> = instance.interior_cities().collect();
        let m = cities.len();
        let size = 1usize << m;
        let mut dp = vec![vec![f64::INFINITY; m.max(1)]; size];
        let mut parent = vec![vec![usize::MAX; m.max(1)]; size];
        for e in 0..m {
            dp[1 << e][e] = instance.distance(0, cities[e]);
        }
        for mask in 1..size {
            for e in 0..m {
                if mask & (1 << e) == 0 || !dp[mask][e].is_finite() {
                    continue;
                }
                for nxt in 0..m {
                    if mask & (1 << nxt) != 0 {
                        continue;
                    }
                    let nmask = mask | (1 << nxt);
                    let cand = dp[mask][e] + instance.distance(cities[e], cities[nxt]);
                    if cand < dp[nmask][nxt] {
                        dp[nmask][nxt] = cand;
                        parent[nmask][nxt] = e;
                    }
                }
            }
        }
        Self { instance, cities, m, dp, parent }
    }

    /// Best start -> mask -> end cost and the interior order achieving it.
    fn best_closed(&self, mask: &u32) -> (f64, Vec<usize>) {
        let mask = *mask as usize;
        let t = self.instance.n_nodes();
        if mask == 0 {
            return (self.instance.distance(0, t - 1), Vec::new());
        }
        let mut best = f64::INFINITY;
        let mut last = usize::MAX;
        for e in 0..self.m {
            if mask & (1 << e) == 0 {
                continue;
            }
            let cand = self.dp[mask][e] + self.instance.distance(self.cities[e], t - 1);
            if cand < best {
                best = cand;
                last = e;
            }
        }
        let mut order = Vec::new();
        let mut cur = last;
        let mut cur_mask = mask;
        while cur != usize::MAX {
            order.push(self.cities[cur]);
            let p = self.parent[cur_mask][cur];
            cur_mask &= !(1 << cur);
            cur = p;
        }
        order.reverse();
        (best, order)
    }
}
