//! Exact minimization restricted to encodings of valid solutions.
//!
//! Instead of enumerating `2^n` bitstrings, the scan walks every tour (or
//! route set), encodes it, and evaluates the model. Because encodings carry
//! zero penalty, the scan minimum equals the model's best feasible energy.

use itertools::Itertools;

use super::SolverError;
use crate::decode::{encode_tour, encode_vrp, EncodeError, RouteSet, Tour};
use crate::formulations::BuildOutput;
use crate::instance::{RoutingInstance, VrpConfig};
use crate::qubo::Assignment;

pub const SCAN_CITY_LIMIT: usize = 7;

/// Minimum-energy encoded tour of a single-tour formulation.
pub fn feasible_scan(
    build: &BuildOutput,
    instance: &RoutingInstance,
) -> Result<(Assignment, f64), SolverError> {
    if instance.n_cities > SCAN_CITY_LIMIT {
        return Err(SolverError::TooLarge {
            got: instance.n_cities,
            limit: SCAN_CITY_LIMIT,
            what: "feasible scan",
        });
    }
    let t = instance.n_nodes();
    let interior: Vec<usize> = instance.interior_cities().collect();
    let mut best: Option<(Assignment, f64)> = None;
    for perm in interior.iter().copied().permutations(interior.len()) {
        let tour = Tour::from_interior(&perm, t);
        let a = encode_tour(&tour, &build.varmap)?;
        let e = build.model.energy(&a)?;
        if best.as_ref().map(|(_, b)| e < *b).unwrap_or(true) {
            best = Some((a, e));
        }
    }
    best.ok_or(SolverError::NothingFeasible)
}

/// Every way to split the interior cities across `fleet` ordered routes,
/// in a fixed deterministic order. Idle vehicles hold the empty route.
pub fn enumerate_route_sets(t: usize, fleet: usize) -> Vec<RouteSet> {
    let cities: Vec<usize> = (1..t - 1).collect();
    let m = cities.len();
    let mut out = Vec::new();
    let mut labels = vec![0usize; m];
    loop {
        let groups: Vec<Vec<usize>> = (0..fleet)
            .map(|q| {
                cities
                    .iter()
                    .enumerate()
                    .filter(|(c, _)| labels[*c] == q)
                    .map(|(_, &city)| city)
                    .collect()
            })
            .collect();
        // cartesian product of per-vehicle orderings
        let orderings: Vec<Vec<Vec<usize>>> = groups
            .iter()
            .map(|g| {
                if g.is_empty() {
                    vec![Vec::new()]
                } else {
                    g.iter().copied().permutations(g.len()).collect()
                }
            })
            .collect();
        let mut picks = vec![0usize; fleet];
        loop {
            let routes: Vec<Tour> = (0..fleet)
                .map(|q| Tour::from_interior(&orderings[q][picks[q]], t))
                .collect();
            out.push(RouteSet { routes });
            let mut q = 0;
            loop {
                if q == fleet {
                    break;
                }
                picks[q] += 1;
                if picks[q] < orderings[q].len() {
                    break;
                }
                picks[q] = 0;
                q += 1;
            }
            if q == fleet {
                break;
            }
        }
        let mut i = 0;
        loop {
            if i == m {
                return out;
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

/// Minimum-energy encoded route set of a vehicle-routing formulation.
/// Candidates whose longest route is not vehicle 1's are skipped: the cap
/// constraint admits no encoding for them.
pub fn feasible_scan_vrp(
    build: &BuildOutput,
    config: &VrpConfig,
) -> Result<(Assignment, f64), SolverError> {
    let instance = &config.instance;
    if instance.n_cities > SCAN_CITY_LIMIT {
        return Err(SolverError::TooLarge {
            got: instance.n_cities,
            limit: SCAN_CITY_LIMIT,
            what: "feasible scan",
        });
    }
    let mut best: Option<(Assignment, f64)> = None;
    for rs in enumerate_route_sets(instance.n_nodes(), config.n_vehicles) {
        let a = match encode_vrp(&rs, &build.varmap, instance) {
            Ok(a) => a,
            Err(EncodeError::CapViolated { .. }) => continue,
            Err(e) => return Err(e.into()),
        };
        let e = build.model.energy(&a)?;
        if best.as_ref().map(|(_, b)| e < *b).unwrap_or(true) {
            best = Some((a, e));
        }
    }
    best.ok_or(SolverError::NothingFeasible)
}
