//! Routing instances: node coordinates or distance matrices under the
//! closed-tour depot convention.
//!
//! An instance over `N` cities has `T = N + 1` node indices. Indices
//! `0..N-1` are the cities, with city 0 doubling as the start depot; index
//! `N` duplicates city 0's position as the end depot, so `dist[N][j] =
//! dist[0][j]` for all `j`. Tours and routes run from node 0 to node `T-1`.

use std::fs;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("a polygon needs at least 3 vertices, got {0}")]
    PolygonTooSmall(usize),
    #[error("polygon circumradius must be positive")]
    BadRadius,
    #[error("an instance needs at least {min} cities, got {got}")]
    TooFewCities { got: usize, min: usize },
    #[error("instance file needs either \"coords\" or \"dist\"")]
    MissingGeometry,
    #[error("distance matrix is not square ({rows} rows, row {row} has {cols} entries)")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("dist[{i}][{j}] = {value} violates {rule}")]
    BadDistance { i: usize, j: usize, value: f64, rule: &'static str },
    #[error("matrix is asymmetric at ({i}, {j}) but \"symmetric\" is set")]
    Asymmetric { i: usize, j: usize },
    #[error("coords/dist size mismatch: {coords} coords vs {dist} rows")]
    SizeMismatch { coords: usize, dist: usize },
    #[error("vehicle count must satisfy 1 <= Q <= N, got Q = {q} with N = {n}")]
    BadVehicleCount { q: usize, n: usize },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Default integer units per distance unit when scaling for slack penalties.
pub const DEFAULT_SCALE: i64 = 1000;

/// A routing instance: `N` cities plus the duplicated end depot.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingInstance {
    pub name: String,
    /// One point per node (cities then end depot), when built from geometry.
    pub coords: Option<Vec<[f64; 2]>>,
    /// Full `T x T` matrix including the end-depot row/column.
    pub dist: Vec<Vec<f64>>,
    pub n_cities: usize,
    pub scale: i64,
}

impl RoutingInstance {
    /// Node count `T = N + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_cities + 1
    }

    pub fn depot_start(&self) -> usize {
        0
    }

    pub fn depot_end(&self) -> usize {
        self.n_nodes() - 1
    }

    /// City indices that can appear strictly inside a tour.
    pub fn interior_cities(&self) -> std::ops::Range<usize> {
        1..self.n_cities
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    /// Distances rounded to integers at the configured scale.
    pub fn scaled_dist(&self) -> Vec<Vec<i64>> {
        self.dist
            .iter()
            .map(|row| row.iter().map(|d| (d * self.scale as f64).round() as i64).collect())
            .collect()
    }

    /// `sum_i max_j d_ij` over exitable rows: an upper bound on any single
    /// route's length.
    pub fn route_length_bound(&self) -> f64 {
        (0..self.n_nodes() - 1)
            .map(|i| self.dist[i].iter().cloned().fold(0.0, f64::max))
            .sum()
    }

    pub fn route_length_bound_scaled(&self) -> i64 {
        let d = self.scaled_dist();
        (0..self.n_nodes() - 1).map(|i| d[i].iter().copied().max().unwrap_or(0)).sum()
    }

    fn from_city_coords(name: String, cities: Vec<[f64; 2]>) -> Self {
        let n = cities.len();
        let mut coords = cities;
        coords.push(coords[0]);
        let t = n + 1;
        let mut dist = vec![vec![0.0; t]; t];
        for i in 0..t {
            for j in 0..t {
                let (dx, dy) = (coords[i][0] - coords[j][0], coords[i][1] - coords[j][1]);
                dist[i][j] = (dx * dx + dy * dy).sqrt();
            }
        }
        Self { name, coords: Some(coords), dist, n_cities: n, scale: DEFAULT_SCALE }
    }

    fn from_city_matrix(name: String, cities: Vec<Vec<f64>>) -> Result<Self, InstanceError> {
        let n = cities.len();
        let t = n + 1;
        let mut dist = vec![vec![0.0; t]; t];
        for i in 0..n {
            for j in 0..n {
                dist[i][j] = cities[i][j];
            }
        }
        // End depot duplicates city 0.
        for j in 0..n {
            dist[t - 1][j] = cities[0][j];
            dist[j][t - 1] = cities[j][0];
        }
        Ok(Self { name, coords: None, dist, n_cities: n, scale: DEFAULT_SCALE })
    }

    /// `n` cities on a circle of radius `r`, vertex `k` at angle `2*pi*k/n`.
    pub fn regular_polygon(n: usize, r: f64) -> Result<Self, InstanceError> {
        if n < 3 {
            return Err(InstanceError::PolygonTooSmall(n));
        }
        if !(r > 0.0) {
            return Err(InstanceError::BadRadius);
        }
        let cities = (0..n)
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [r * theta.cos(), r * theta.sin()]
            })
            .collect();
        Ok(Self::from_city_coords(format!("polygon{n}"), cities))
    }

    /// Optimal closed-tour length on a regular polygon: `2 n r sin(pi/n)`.
    pub fn polygon_optimal_length(n: usize, r: f64) -> f64 {
        2.0 * n as f64 * r * (std::f64::consts::PI / n as f64).sin()
    }

    /// `n` cities uniform in `[0, box_size]^2`, deterministic in `seed`.
    pub fn random_euclidean(n: usize, seed: u64, box_size: f64) -> Result<Self, InstanceError> {
        if n < 2 {
            return Err(InstanceError::TooFewCities { got: n, min: 2 });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cities = (0..n)
            .map(|_| [rng.gen_range(0.0..box_size), rng.gen_range(0.0..box_size)])
            .collect();
        Ok(Self::from_city_coords(format!("random{n}-{seed}"), cities))
    }

    pub fn with_scale(mut self, scale: i64) -> Self {
        self.scale = scale;
        self
    }

    pub fn save(&self, path: &Path) -> Result<(), InstanceError> {
        fs::write(path, serde_json::to_string_pretty(&self.to_file())?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, InstanceError> {
        let file: InstanceFile = serde_json::from_str(&fs::read_to_string(path)?)?;
        Self::from_file(file)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_file()).expect("instance serialization")
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self, InstanceError> {
        Self::from_file(serde_json::from_value(v.clone())?)
    }

    fn to_file(&self) -> InstanceFile {
        InstanceFile {
            name: self.name.clone(),
            // City-level data only; the end-depot duplication is rebuilt on load.
            coords: self.coords.as_ref().map(|c| c[..self.n_cities].to_vec()),
            dist: if self.coords.is_some() {
                None
            } else {
                Some(
                    (0..self.n_cities)
                        .map(|i| self.dist[i][..self.n_cities].to_vec())
                        .collect(),
                )
            },
            scale: Some(self.scale),
            symmetric: None,
        }
    }

    fn from_file(file: InstanceFile) -> Result<Self, InstanceError> {
        let scale = file.scale.unwrap_or(DEFAULT_SCALE);
        let inst = match (file.coords, file.dist) {
            (Some(coords), _) => {
                if coords.len() < 2 {
                    return Err(InstanceError::TooFewCities { got: coords.len(), min: 2 });
                }
                Self::from_city_coords(file.name, coords)
            }
            (None, Some(dist)) => {
                let n = dist.len();
                if n < 2 {
                    return Err(InstanceError::TooFewCities { got: n, min: 2 });
                }
                for (i, row) in dist.iter().enumerate() {
                    if row.len() != n {
                        return Err(InstanceError::NotSquare { rows: n, row: i, cols: row.len() });
                    }
                    for (j, &v) in row.iter().enumerate() {
                        if !v.is_finite() || v < 0.0 {
                            return Err(InstanceError::BadDistance {
                                i,
                                j,
                                value: v,
                                rule: "finite and nonnegative",
                            });
                        }
                        if i == j && v != 0.0 {
                            return Err(InstanceError::BadDistance {
                                i,
                                j,
                                value: v,
                                rule: "zero diagonal",
                            });
                        }
                    }
                }
                if file.symmetric.unwrap_or(false) {
                    for i in 0..n {
                        for j in (i + 1)..n {
                            if (dist[i][j] - dist[j][i]).abs() > 1e-12 {
                                return Err(InstanceError::Asymmetric { i, j });
                            }
                        }
                    }
                }
                Self::from_city_matrix(file.name, dist)?
            }
            (None, None) => return Err(InstanceError::MissingGeometry),
        };
        Ok(inst.with_scale(scale))
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    coords: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dist: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    symmetric: Option<bool>,
}

/// A routing instance plus a vehicle fleet.
#[derive(Debug, Clone)]
pub struct VrpConfig {
    pub instance: RoutingInstance,
    pub n_vehicles: usize,
}

impl VrpConfig {
    /// `1 <= Q <= N`; the empty-route rule still allows idle vehicles.
    pub fn new(instance: RoutingInstance, n_vehicles: usize) -> Result<Self, InstanceError> {
        if n_vehicles < 1 || n_vehicles > instance.n_cities {
            return Err(InstanceError::BadVehicleCount {
                q: n_vehicles,
                n: instance.n_cities,
            });
        }
        Ok(Self { instance, n_vehicles })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_polygon_layout() {
        let inst = RoutingInstance::regular_polygon(4, 1.0).unwrap();
        let coords = inst.coords.as_ref().unwrap();
        let want = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (got, want) in coords.iter().zip(want.iter()) {
            assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
        }
        // end depot duplicates city 0
        assert_eq!(coords[4], coords[0]);
        assert_eq!(inst.n_nodes(), 5);
        let opt = RoutingInstance::polygon_optimal_length(4, 1.0);
        assert!((opt - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn polygon_optimal_lengths_match_published_values() {
        assert!((RoutingInstance::polygon_optimal_length(4, 1.0) - 5.65685).abs() < 1e-4);
        assert!((RoutingInstance::polygon_optimal_length(6, 1.0) - 6.0).abs() < 1e-12);
        assert!((RoutingInstance::polygon_optimal_length(8, 1.0) - 6.12293).abs() < 1e-4);
    }

    #[test]
    fn polygon_rejects_degenerate() {
        assert!(RoutingInstance::regular_polygon(2, 1.0).is_err());
        assert!(RoutingInstance::regular_polygon(4, 0.0).is_err());
    }

    #[test]
    fn end_depot_row_duplicates_city_zero() {
        let inst = RoutingInstance::regular_polygon(6, 2.0).unwrap();
        let t = inst.n_nodes();
        for j in 0..t {
            assert_eq!(inst.dist[t - 1][j], inst.dist[0][j]);
            assert_eq!(inst.dist[j][t - 1], inst.dist[j][0]);
        }
    }

    #[test]
    fn random_instance_is_deterministic_and_symmetric() {
        let a = RoutingInstance::random_euclidean(5, 1, 10.0).unwrap();
        let b = RoutingInstance::random_euclidean(5, 1, 10.0).unwrap();
        assert_eq!(a.dist, b.dist);
        let two = RoutingInstance::random_euclidean(2, 9, 10.0).unwrap();
        assert_eq!(two.dist[0][1], two.dist[1][0]);
    }

    #[test]
    fn euclidean_triangle_inequality_up_to_epsilon() {
        let inst = RoutingInstance::random_euclidean(7, 42, 10.0).unwrap();
        let t = inst.n_nodes();
        for i in 0..t {
            for j in 0..t {
                for k in 0..t {
                    assert!(inst.dist[i][j] <= inst.dist[i][k] + inst.dist[k][j] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("poly4.json");
        let inst = RoutingInstance::regular_polygon(4, 1.0).unwrap();
        inst.save(&path).unwrap();
        let back = RoutingInstance::load(&path).unwrap();
        assert_eq!(inst.n_cities, back.n_cities);
        for i in 0..inst.n_nodes() {
            for j in 0..inst.n_nodes() {
                assert!((inst.dist[i][j] - back.dist[i][j]).abs() < 1e-12);
            }
        }
        let (a, b) = (inst.coords.unwrap(), back.coords.unwrap());
        for (pa, pb) in a.iter().zip(b.iter()) {
            assert!((pa[0] - pb[0]).abs() < 1e-12 && (pa[1] - pb[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonzero_diagonal() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"name":"bad","dist":[[0,1,1],[1,0,1],[1,1,0.5]]}"#,
        )
        .unwrap();
        assert!(matches!(
            RoutingInstance::load(&path),
            Err(InstanceError::BadDistance { i: 2, j: 2, .. })
        ));
    }

    #[test]
    fn matrix_only_instance_accepted_without_coords() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, r#"{"name":"m","dist":[[0,2],[2,0]]}"#).unwrap();
        let inst = RoutingInstance::load(&path).unwrap();
        assert!(inst.coords.is_none());
        assert_eq!(inst.n_cities, 2);
        assert_eq!(inst.dist[2][1], 2.0); // end depot duplicates city 0
    }

    #[test]
    fn asymmetric_matrix_rejected_when_flag_set() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        std::fs::write(
            &path,
            r#"{"name":"a","dist":[[0,1],[2,0]],"symmetric":true}"#,
        )
        .unwrap();
        assert!(matches!(RoutingInstance::load(&path), Err(InstanceError::Asymmetric { .. })));
        let path2 = dir.path().join("b.json");
        std::fs::write(&path2, r#"{"name":"b","dist":[[0,1],[2,0]]}"#).unwrap();
        assert!(RoutingInstance::load(&path2).is_ok());
    }

    #[test]
    fn vrp_config_caps_fleet_size() {
        let inst = RoutingInstance::regular_polygon(4, 1.0).unwrap();
        assert!(VrpConfig::new(inst.clone(), 0).is_err());
        assert!(VrpConfig::new(inst.clone(), 4).is_ok());
        assert!(VrpConfig::new(inst, 5).is_err());
    }

    #[test]
    fn route_length_bound_on_square() {
        let inst = RoutingInstance::regular_polygon(4, 1.0).unwrap();
        // every exitable row's max distance is the diameter 2
        assert!((inst.route_length_bound() - 8.0).abs() < 1e-12);
        assert_eq!(inst.route_length_bound_scaled(), 8000);
    }
}
