//! Exact QUBO minimization by Gray-code enumeration.

use super::SolverError;
use crate::qubo::{Assignment, ModelError, QuboModel};

pub const EXHAUSTIVE_LIMIT: usize = 24;

/// Global minimum over all `2^n` assignments; ties resolve to the
/// numerically smallest bitstring (variable `i` weighing `2^i`).
pub fn solve_exhaustive(model: &QuboModel) -> Result<(Assignment, f64), SolverError> {
    solve_exhaustive_with_limit(model, EXHAUSTIVE_LIMIT)
}

pub fn solve_exhaustive_with_limit(
    model: &QuboModel,
    var_limit: usize,
) -> Result<(Assignment, f64), SolverError> {
    let n = model.n_vars();
    if n > var_limit {
        return Err(SolverError::Model(ModelError::TooLargeForExhaustive {
            n_vars: n,
            limit: var_limit,
        }));
    }
    if n == 0 {
        return Ok((Assignment::zeros(0), model.offset()));
    }

    let mut linear = vec![0.0; n];
    for (&i, &c) in model.linear() {
        linear[i] += c;
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (&(i, j), &c) in model.quadratic() {
        adj[i].push((j, c));
        adj[j].push((i, c));
    }

    let mut bits = vec![0u8; n];
    let mut field = linear.clone();
    let mut energy = model.offset();
    let mut value: u64 = 0;
    let (mut best_energy, mut best_value) = (energy, value);

    // Gray-code walk: step m flips bit trailing_zeros(m).
    for m in 1u64..(1u64 << n) {
        let i = m.trailing_zeros() as usize;
        let delta = (1.0 - 2.0 * f64::from(bits[i])) * field[i];
        let sign = if bits[i] == 0 { 1.0 } else { -1.0 };
        bits[i] ^= 1;
        value ^= 1 << i;
        energy += delta;
        for &(j, c) in &adj[i] {
            field[j] += sign * c;
        }
        if energy < best_energy || (energy == best_energy && value < best_value) {
            best_energy = energy;
            best_value = value;
        }
    }

    let assignment =
        Assignment::from_bits((0..n).map(|i| ((best_value >> i) & 1) as u8).collect());
    let energy = model.energy(&assignment)?;
    Ok((assignment, energy))
}
