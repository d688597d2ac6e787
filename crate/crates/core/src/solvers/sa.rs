//! Single-bit-flip Metropolis annealing over a geometric beta schedule.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Sample, SampleSet, SolverError};
use crate::qubo::{Assignment, QuboModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
}

impl SaParams {
    pub fn new(
        num_reads: usize,
        sweeps: usize,
        beta_start: f64,
        beta_end: f64,
        seed: u64,
    ) -> Result<Self, SolverError> {
        let p = Self { num_reads, sweeps, beta_start, beta_end, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.num_reads >= 1
            && self.sweeps >= 1
            && self.beta_start > 0.0
            && self.beta_end > self.beta_start
        {
            Ok(())
        } else {
            Err(SolverError::BadParams)
        }
    }

    /// Beta range calibrated to the model's coefficients. The hot end accepts
    /// the worst possible uphill flip half the time; the cold end freezes
    /// moves at the smallest nonzero coefficient scale, so constraint
    /// penalties and distance differences both settle.
    pub fn auto(model: &QuboModel, num_reads: usize, sweeps: usize, seed: u64) -> Self {
        let mut row_sum = vec![0.0f64; model.n_vars()];
        let mut coeff_min = f64::INFINITY;
        for (&i, &c) in model.linear() {
            if c != 0.0 {
                row_sum[i] += c.abs();
                coeff_min = coeff_min.min(c.abs());
            }
        }
        for (&(i, j), &c) in model.quadratic() {
            if c != 0.0 {
                row_sum[i] += c.abs();
                row_sum[j] += c.abs();
                coeff_min = coeff_min.min(c.abs());
            }
        }
        let delta_max = row_sum.iter().cloned().fold(0.0, f64::max);
        if delta_max <= 0.0 || !coeff_min.is_finite() {
            return Self { num_reads, sweeps, beta_start: 0.1, beta_end: 10.0, seed };
        }
        let beta_start = std::f64::consts::LN_2 / delta_max;
        let beta_end =
            (1000f64.ln() / coeff_min).clamp(100.0 * beta_start, 1e7 * beta_start);
        Self { num_reads, sweeps, beta_start, beta_end, seed }
    }
}

struct Compiled {
    linear: Vec<f64>,
    adj: Vec<Vec<(usize, f64)>>,
    /// Variables that appear in at least one term; the rest never move.
    active: Vec<usize>,
}

impl Compiled {
    fn new(model: &QuboModel) -> Self {
        let n = model.n_vars();
        let mut linear = vec![0.0; n];
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (&i, &c) in model.linear() {
            linear[i] += c;
        }
        for (&(i, j), &c) in model.quadratic() {
            if c != 0.0 {
                adj[i].push((j, c));
                adj[j].push((i, c));
            }
        }
        let active = (0..n)
            .filter(|&i| linear[i] != 0.0 || !adj[i].is_empty())
            .collect();
        Self { linear, adj, active }
    }

    /// Energy change of flipping bit `i` given the local field.
    fn delta(&self, bits: &[u8], field: &[f64], i: usize) -> f64 {
        (1.0 - 2.0 * f64::from(bits[i])) * field[i]
    }

    fn fields(&self, bits: &[u8]) -> Vec<f64> {
        let mut f = self.linear.clone();
        for (i, fi) in f.iter_mut().enumerate() {
            for &(j, c) in &self.adj[i] {
                *fi += c * f64::from(bits[j]);
            }
        }
        f
    }
}

/// Runs `num_reads` independent anneals; deterministic in the seed, with
/// read `k` drawing from a stream seeded `seed + k` regardless of execution
/// order. Samples come back sorted best-first.
pub fn solve_sa(model: &QuboModel, params: &SaParams) -> Result<SampleSet, SolverError> {
    params.validate()?;
    let start = std::time::Instant::now();
    let compiled = Compiled::new(model);
    if compiled.active.is_empty() {
        let a = Assignment::zeros(model.n_vars());
        let energy = model.energy(&a)?;
        return Ok(SampleSet {
            samples: vec![Sample { assignment: a, energy }],
            elapsed_s: start.elapsed().as_secs_f64(),
            params: *params,
        });
    }

    let betas: Vec<f64> = if params.sweeps == 1 {
        vec![params.beta_start]
    } else {
        let ratio = params.beta_end / params.beta_start;
        (0..params.sweeps)
            .map(|s| params.beta_start * ratio.powf(s as f64 / (params.sweeps - 1) as f64))
            .collect()
    };

    let mut samples: Vec<Sample> = (0..params.num_reads)
        .into_par_iter()
        .map(|read| anneal_read(model, &compiled, &betas, params.seed.wrapping_add(read as u64)))
        .collect();
    samples.sort_by(|a, b| {
        a.energy
            .partial_cmp(&b.energy)
            .unwrap()
            .then_with(|| a.assignment.bits.cmp(&b.assignment.bits))
    });
    Ok(SampleSet { samples, elapsed_s: start.elapsed().as_secs_f64(), params: *params })
}

fn anneal_read(model: &QuboModel, compiled: &Compiled, betas: &[f64], seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.n_vars();
    let mut bits = vec![0u8; n];
    for &i in &compiled.active {
        bits[i] = rng.gen_range(0..=1);
    }
    let mut field = compiled.fields(&bits);
    let mut energy = model.energy(&Assignment::from_bits(bits.clone())).unwrap();
    let mut best_energy = energy;
    let mut best_bits = bits.clone();

    let moves_per_sweep = compiled.active.len();
    for &beta in betas {
        for _ in 0..moves_per_sweep {
            let i = compiled.active[rng.gen_range(0..moves_per_sweep)];
            let delta = compiled.delta(&bits, &field, i);
            if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                let sign = if bits[i] == 0 { 1.0 } else { -1.0 };
                bits[i] ^= 1;
                energy += delta;
                for &(j, c) in &compiled.adj[i] {
                    field[j] += sign * c;
                }
                if energy < best_energy {
                    best_energy = energy;
                    best_bits.copy_from_slice(&bits);
                }
            }
        }
    }

    // Zero-temperature quench: descend to a single-flip local minimum.
    for _ in 0..100 {
        let mut improved = false;
        for &i in &compiled.active {
            let delta = compiled.delta(&bits, &field, i);
            if delta < 0.0 {
                let sign = if bits[i] == 0 { 1.0 } else { -1.0 };
                bits[i] ^= 1;
                energy += delta;
                for &(j, c) in &compiled.adj[i] {
                    field[j] += sign * c;
                }
                improved = true;
            }
        }
        if energy < best_energy {
            best_energy = energy;
            best_bits.copy_from_slice(&bits);
        }
        if !improved {
            break;
        }
    }

    let assignment = Assignment::from_bits(best_bits);
    // exact re-evaluation removes incremental drift
    let energy = model.energy(&assignment).unwrap();
    Sample { assignment, energy }
}
