//! Quadratic unconstrained binary model container and penalty construction.
//!
//! A [`QuboModel`] stores an energy function
//! `offset + sum_i b_i x_i + sum_{i<j} q_ij x_i x_j` over bits `x`.
//! Constraints enter as squared penalties; inequalities get binary-expanded
//! slack bits. Models convert losslessly to the spin (`IsingModel`) form.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used throughout for energy equality checks.
pub const ENERGY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("variable index {index} out of range (n_vars = {n_vars})")]
    IndexOutOfRange { index: usize, n_vars: usize },
    #[error("assignment has {got} bits, model has {want} variables")]
    LengthMismatch { got: usize, want: usize },
    #[error("non-finite coefficient or weight")]
    NonFinite,
    #[error("penalty weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("inequality bound must be nonnegative, got {0}")]
    NegativeBound(i64),
    #[error("expression coefficients must be integral for slack conversion")]
    NonIntegralExpr,
    #[error("expression minimum {min} exceeds bound {bound}; constraint is infeasible")]
    InfeasibleInequality { min: i64, bound: i64 },
    #[error("model has {n_vars} variables, exhaustive limit is {limit}")]
    TooLargeForExhaustive { n_vars: usize, limit: usize },
}

/// Linear form `sum_i c_i x_i + constant`, the left-hand side of a constraint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearExpr {
    terms: BTreeMap<usize, f64>,
    constant: f64,
}

impl LinearExpr {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds `sum c_i x_i + constant` from `(index, coefficient)` pairs.
    pub fn from_terms(terms: impl IntoIterator<Item = (usize, f64)>, constant: f64) -> Self {
        let mut e = Self::new();
        for (i, c) in terms {
            e.add_term(i, c);
        }
        e.constant = constant;
        e
    }

    /// Accumulates `c * x_i`.
    pub fn add_term(&mut self, index: usize, coeff: f64) {
        *self.terms.entry(index).or_insert(0.0) += coeff;
    }

    pub fn add_constant(&mut self, c: f64) {
        self.constant += c;
    }

    pub fn terms(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.terms.iter().map(|(&i, &c)| (i, c))
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.terms.values().all(|c| c.is_finite())
    }

    /// Value of the expression at a 0/1 assignment.
    pub fn value(&self, bits: &[u8]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(&i, &c)| c * f64::from(bits[i]))
                .sum::<f64>()
    }

    /// Minimum over all binary assignments, assuming integral coefficients.
    fn integral_min(&self) -> Result<i64, ModelError> {
        let mut min = as_integral(self.constant)?;
        for (_, c) in self.terms() {
            let c = as_integral(c)?;
            if c < 0 {
                min += c;
            }
        }
        Ok(min)
    }
}

fn as_integral(x: f64) -> Result<i64, ModelError> {
    let r = x.round();
    if !x.is_finite() || (x - r).abs() > 1e-9 {
        return Err(ModelError::NonIntegralExpr);
    }
    Ok(r as i64)
}

/// Bit vector evaluated against a model; `bits[i]` is variable `i`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub bits: Vec<u8>,
}

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Self { bits: vec![0; n] }
    }

    pub fn from_bits(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: u8) {
        self.bits[i] = v;
    }

    /// Compact `0`/`1` string, variable 0 first.
    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    pub fn from_bitstring(s: &str) -> Option<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for ch in s.chars() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                _ => return None,
            }
        }
        Some(Self { bits })
    }
}

/// A bag of linear/quadratic/offset terms. Penalty expansions produce one of
/// these so the same terms can be added to a model and mirrored into a
/// per-constraint-family ledger.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermSet {
    pub linear: BTreeMap<usize, f64>,
    pub quadratic: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl TermSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accumulates `c * x_i`; drops exact zeros on read, not on write.
    pub fn add_linear(&mut self, i: usize, c: f64) {
        *self.linear.entry(i).or_insert(0.0) += c;
    }

    /// Accumulates `c * x_i x_j`, canonicalizing to `i < j` and folding the
    /// diagonal (`x^2 = x`) into the linear part.
    pub fn add_quadratic(&mut self, i: usize, j: usize, c: f64) {
        if i == j {
            self.add_linear(i, c);
        } else {
            let key = (i.min(j), i.max(j));
            *self.quadratic.entry(key).or_insert(0.0) += c;
        }
    }

    pub fn add_offset(&mut self, c: f64) {
        self.offset += c;
    }

    pub fn absorb(&mut self, other: &TermSet) {
        for (&i, &c) in &other.linear {
            self.add_linear(i, c);
        }
        for (&(i, j), &c) in &other.quadratic {
            self.add_quadratic(i, j, c);
        }
        self.offset += other.offset;
    }

    pub fn energy(&self, bits: &[u8]) -> f64 {
        let mut e = self.offset;
        for (&i, &c) in &self.linear {
            e += c * f64::from(bits[i]);
        }
        for (&(i, j), &c) in &self.quadratic {
            e += c * f64::from(bits[i] * bits[j]);
        }
        e
    }

    /// Expansion of `weight * expr^2` with `x^2 = x` folded.
    pub fn equality_penalty(expr: &LinearExpr, weight: f64) -> TermSet {
        let mut ts = TermSet::new();
        let k = expr.constant();
        let terms: Vec<(usize, f64)> = expr.terms().collect();
        for (idx, &(i, ci)) in terms.iter().enumerate() {
            ts.add_linear(i, weight * (ci * ci + 2.0 * k * ci));
            for &(j, cj) in &terms[idx + 1..] {
                ts.add_quadratic(i, j, weight * 2.0 * ci * cj);
            }
        }
        ts.add_offset(weight * k * k);
        ts
    }
}

/// How many slack bits an inequality penalty allocates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlackAlloc {
    /// Cover `bound - min(expr)`, the gap achievable with unconstrained bits.
    Auto,
    /// Cover a caller-supplied maximum gap (e.g. a route-length bound that
    /// tighter constraints already guarantee).
    MaxGap(i64),
}

/// Number of bits needed to represent every integer slack in `0..=gap`.
pub fn slack_width(gap: i64) -> u32 {
    if gap <= 0 {
        0
    } else {
        64 - (gap as u64).leading_zeros()
    }
}

/// Report of model size: bit count and nonzero term counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeReport {
    pub n_vars: usize,
    pub n_linear: usize,
    pub n_quadratic: usize,
}

/// Immutable-after-build QUBO container.
///
/// Quadratic keys are stored once in canonical `(i, j)` order with `i < j`;
/// diagonal input folds into the linear part.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuboModel {
    n_vars: usize,
    terms: TermSet,
}

impl QuboModel {
    pub fn new(n_vars: usize) -> Self {
        Self { n_vars, terms: TermSet::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn offset(&self) -> f64 {
        self.terms.offset
    }

    pub fn linear(&self) -> &BTreeMap<usize, f64> {
        &self.terms.linear
    }

    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.terms.quadratic
    }

    pub fn linear_coeff(&self, i: usize) -> f64 {
        self.terms.linear.get(&i).copied().unwrap_or(0.0)
    }

    pub fn quadratic_coeff(&self, i: usize, j: usize) -> f64 {
        let key = (i.min(j), i.max(j));
        self.terms.quadratic.get(&key).copied().unwrap_or(0.0)
    }

    /// Appends `count` fresh variables and returns their index range.
    pub fn allocate_vars(&mut self, count: usize) -> Range<usize> {
        let start = self.n_vars;
        self.n_vars += count;
        start..self.n_vars
    }

    pub fn add_offset(&mut self, c: f64) {
        self.terms.add_offset(c);
    }

    pub fn add_linear(&mut self, i: usize, c: f64) {
        assert!(i < self.n_vars, "index {i} out of range");
        self.terms.add_linear(i, c);
    }

    pub fn add_quadratic(&mut self, i: usize, j: usize, c: f64) {
        assert!(i < self.n_vars && j < self.n_vars, "index out of range");
        self.terms.add_quadratic(i, j, c);
    }

    pub fn absorb(&mut self, ts: &TermSet) {
        if let Some((&(_, j), _)) = ts.quadratic.last_key_value() {
            assert!(j < self.n_vars, "term set exceeds model size");
        }
        if let Some((&i, _)) = ts.linear.last_key_value() {
            assert!(i < self.n_vars, "term set exceeds model size");
        }
        self.terms.absorb(ts);
    }

    /// Adds `weight * expr^2`, which is zero exactly when `expr = 0`.
    pub fn add_equality_penalty(
        &mut self,
        expr: &LinearExpr,
        weight: f64,
    ) -> Result<TermSet, ModelError> {
        self.check_penalty_args(expr, weight)?;
        let ts = TermSet::equality_penalty(expr, weight);
        self.absorb(&ts);
        Ok(ts)
    }

    /// Converts `expr <= bound` into `weight * (expr + sum 2^h b_h - bound)^2`
    /// over freshly allocated slack bits `b_h`. Returns the expanded terms and
    /// the slack index range.
    pub fn add_inequality_penalty(
        &mut self,
        expr: &LinearExpr,
        bound: i64,
        weight: f64,
        alloc: SlackAlloc,
    ) -> Result<(TermSet, Range<usize>), ModelError> {
        self.check_penalty_args(expr, weight)?;
        if bound < 0 {
            return Err(ModelError::NegativeBound(bound));
        }
        let min = expr.integral_min()?;
        if min > bound {
            return Err(ModelError::InfeasibleInequality { min, bound });
        }
        let gap = match alloc {
            SlackAlloc::Auto => bound - min,
            SlackAlloc::MaxGap(g) => g,
        };
        let slack = self.allocate_vars(slack_width(gap) as usize);
        let mut shifted = expr.clone();
        shifted.add_constant(-(bound as f64));
        for (h, b) in slack.clone().enumerate() {
            shifted.add_term(b, (1u64 << h) as f64);
        }
        let ts = TermSet::equality_penalty(&shifted, weight);
        self.absorb(&ts);
        Ok((ts, slack))
    }

    fn check_penalty_args(&self, expr: &LinearExpr, weight: f64) -> Result<(), ModelError> {
        if !weight.is_finite() || !expr.is_finite() {
            return Err(ModelError::NonFinite);
        }
        if weight <= 0.0 {
            return Err(ModelError::NonPositiveWeight(weight));
        }
        for (i, _) in expr.terms() {
            if i >= self.n_vars {
                return Err(ModelError::IndexOutOfRange { index: i, n_vars: self.n_vars });
            }
        }
        Ok(())
    }

    pub fn energy(&self, a: &Assignment) -> Result<f64, ModelError> {
        if a.len() != self.n_vars {
            return Err(ModelError::LengthMismatch { got: a.len(), want: self.n_vars });
        }
        Ok(self.terms.energy(&a.bits))
    }

    pub fn stats(&self) -> SizeReport {
        SizeReport {
            n_vars: self.n_vars,
            n_linear: self.terms.linear.values().filter(|c| **c != 0.0).count(),
            n_quadratic: self.terms.quadratic.values().filter(|c| **c != 0.0).count(),
        }
    }

    /// Spin form under `z = 1 - 2x`: energies agree on every assignment.
    pub fn to_ising(&self) -> IsingModel {
        let mut h: BTreeMap<usize, f64> = BTreeMap::new();
        let mut j_map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut offset = self.terms.offset;
        for (&i, &b) in &self.terms.linear {
            // b x = b (1 - z) / 2
            offset += b / 2.0;
            *h.entry(i).or_insert(0.0) -= b / 2.0;
        }
        for (&(i, j), &q) in &self.terms.quadratic {
            // q x_i x_j = q (1 - z_i)(1 - z_j) / 4
            offset += q / 4.0;
            *h.entry(i).or_insert(0.0) -= q / 4.0;
            *h.entry(j).or_insert(0.0) -= q / 4.0;
            *j_map.entry((i, j)).or_insert(0.0) += q / 4.0;
        }
        IsingModel { n_vars: self.n_vars, h, j: j_map, offset }
    }
}

/// Spin model `offset + sum h_i z_i + sum J_ij z_i z_j` with `z in {-1, +1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IsingModel {
    pub n_vars: usize,
    pub h: BTreeMap<usize, f64>,
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn energy(&self, spins: &[i8]) -> Result<f64, ModelError> {
        if spins.len() != self.n_vars {
            return Err(ModelError::LengthMismatch { got: spins.len(), want: self.n_vars });
        }
        let mut e = self.offset;
        for (&i, &hi) in &self.h {
            e += hi * f64::from(spins[i]);
        }
        for (&(i, j), &jij) in &self.j {
            e += jij * f64::from(spins[i]) * f64::from(spins[j]);
        }
        Ok(e)
    }

    /// Image of a bit assignment under `z = 1 - 2x`.
    pub fn spins_from_bits(a: &Assignment) -> Vec<i8> {
        a.bits.iter().map(|&b| 1 - 2 * (b as i8)).collect()
    }
}

// --- JSON formats -----------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct QuboJson {
    n_vars: usize,
    offset: f64,
    linear: Vec<(usize, f64)>,
    quadratic: Vec<(usize, usize, f64)>,
}

impl QuboModel {
    /// `{"n_vars", "offset", "linear": [[i, c]...], "quadratic": [[i, j, c]...]}`
    /// with `i < j` enforced on write and exact zeros dropped.
    pub fn to_json_value(&self) -> serde_json::Value {
        let j = QuboJson {
            n_vars: self.n_vars,
            offset: self.terms.offset,
            linear: self
                .terms
                .linear
                .iter()
                .filter(|(_, c)| **c != 0.0)
                .map(|(&i, &c)| (i, c))
                .collect(),
            quadratic: self
                .terms
                .quadratic
                .iter()
                .filter(|(_, c)| **c != 0.0)
                .map(|(&(i, j), &c)| (i, j, c))
                .collect(),
        };
        serde_json::to_value(j).expect("qubo serialization")
    }

    pub fn from_json_value(v: &serde_json::Value) -> Result<Self, serde_json::Error> {
        let j: QuboJson = serde_json::from_value(v.clone())?;
        let mut m = QuboModel::new(j.n_vars);
        m.add_offset(j.offset);
        for (i, c) in j.linear {
            m.add_linear(i, c);
        }
        for (i, jx, c) in j.quadratic {
            m.add_quadratic(i, jx, c);
        }
        Ok(m)
    }
}

#[derive(Serialize, Deserialize)]
struct IsingJson {
    n_vars: usize,
    offset: f64,
    h: Vec<(usize, f64)>,
    #[serde(rename = "J")]
    j: Vec<(usize, usize, f64)>,
}

impl IsingModel {
    pub fn to_json_value(&self) -> serde_json::Value {
        let j = IsingJson {
            n_vars: self.n_vars,
            offset: self.offset,
            h: self.h.iter().filter(|(_, c)| **c != 0.0).map(|(&i, &c)| (i, c)).collect(),
            j: self
                .j
                .iter()
                .filter(|(_, c)| **c != 0.0)
                .map(|(&(a, b), &c)| (a, b, c))
                .collect(),
        };
        serde_json::to_value(j).expect("ising serialization")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn all_assignments(n: usize) -> impl Iterator<Item = Assignment> {
        (0u64..(1 << n)).map(move |m| {
            Assignment::from_bits((0..n).map(|i| ((m >> i) & 1) as u8).collect())
        })
    }

    #[test]
    fn empty_model_has_zero_energy() {
        let m = QuboModel::new(0);
        assert_eq!(m.energy(&Assignment::zeros(0)).unwrap(), 0.0);
        assert_eq!(m.stats(), SizeReport { n_vars: 0, n_linear: 0, n_quadratic: 0 });
    }

    #[test]
    fn model_accepts_indices_up_to_n_vars() {
        let mut m = QuboModel::new(3);
        m.add_linear(0, 1.0);
        m.add_linear(2, -2.0);
        m.add_quadratic(0, 2, 0.5);
        assert_eq!(m.n_vars(), 3);
    }

    #[test]
    fn capacity_matches_published_gps_size() {
        let m = QuboModel::new(75);
        assert_eq!(m.n_vars(), 75);
    }

    #[test]
    fn energy_arithmetic() {
        // E = 2 x0 - 3 x0 x1 at (1,1) = -1
        let mut m = QuboModel::new(2);
        m.add_linear(0, 2.0);
        m.add_quadratic(0, 1, -3.0);
        let a = Assignment::from_bits(vec![1, 1]);
        assert_eq!(m.energy(&a).unwrap(), -1.0);
    }

    #[test]
    fn energy_rejects_length_mismatch() {
        let m = QuboModel::new(3);
        assert!(matches!(
            m.energy(&Assignment::zeros(2)),
            Err(ModelError::LengthMismatch { got: 2, want: 3 })
        ));
    }

    #[test]
    fn diagonal_quadratic_folds_into_linear() {
        let mut m = QuboModel::new(2);
        m.add_quadratic(1, 1, 4.0);
        assert_eq!(m.linear_coeff(1), 4.0);
        assert!(m.quadratic().is_empty());
    }

    #[test]
    fn quadratic_accumulates_across_orders() {
        let mut m = QuboModel::new(3);
        m.add_quadratic(2, 0, 1.5);
        m.add_quadratic(0, 2, 1.0);
        assert_eq!(m.quadratic().get(&(0, 2)), Some(&2.5));
        assert_eq!(m.quadratic().len(), 1);
    }

    #[test]
    fn equality_penalty_two_bit_expansion() {
        // (x0 + x1 - 1)^2 = -x0 - x1 + 2 x0 x1 + 1
        let mut m = QuboModel::new(2);
        let expr = LinearExpr::from_terms([(0, 1.0), (1, 1.0)], -1.0);
        m.add_equality_penalty(&expr, 1.0).unwrap();
        assert_eq!(m.linear_coeff(0), -1.0);
        assert_eq!(m.linear_coeff(1), -1.0);
        assert_eq!(m.quadratic_coeff(0, 1), 2.0);
        assert_eq!(m.offset(), 1.0);
    }

    #[test]
    fn equality_penalty_single_bit() {
        // 5 (x0 - 1)^2 = -5 x0 + 5
        let mut m = QuboModel::new(1);
        let expr = LinearExpr::from_terms([(0, 1.0)], -1.0);
        m.add_equality_penalty(&expr, 5.0).unwrap();
        assert_eq!(m.linear_coeff(0), -5.0);
        assert_eq!(m.offset(), 5.0);
    }

    #[test]
    fn satisfied_one_hot_contributes_zero() {
        let mut m = QuboModel::new(3);
        let expr = LinearExpr::from_terms([(0, 1.0), (1, 1.0), (2, 1.0)], -1.0);
        m.add_equality_penalty(&expr, 1.0).unwrap();
        let a = Assignment::from_bits(vec![1, 0, 0]);
        assert!(m.energy(&a).unwrap().abs() < ENERGY_TOL);
    }

    #[test]
    fn equality_penalty_rejects_bad_weight() {
        let mut m = QuboModel::new(1);
        let expr = LinearExpr::from_terms([(0, 1.0)], 0.0);
        assert!(m.add_equality_penalty(&expr, 0.0).is_err());
        assert!(m.add_equality_penalty(&expr, f64::NAN).is_err());
    }

    #[test]
    fn inequality_tight_case_two_slack_bits() {
        // 3 x0 <= 3: gap 3 -> 2 slack bits, zero penalty at x0 = 1, slack 0.
        let mut m = QuboModel::new(1);
        let expr = LinearExpr::from_terms([(0, 3.0)], 0.0);
        let (_, slack) = m
            .add_inequality_penalty(&expr, 3, 1.0, SlackAlloc::Auto)
            .unwrap();
        assert_eq!(slack, 1..3);
        // x0 = 1, slack bits encode 3 - 3 = 0.
        let a = Assignment::from_bits(vec![1, 0, 0]);
        assert!(m.energy(&a).unwrap().abs() < ENERGY_TOL);
    }

    #[test]
    fn inequality_mid_case() {
        // x0 + x1 <= 3: zero penalty at (1,1) with slack = 1.
        let mut m = QuboModel::new(2);
        let expr = LinearExpr::from_terms([(0, 1.0), (1, 1.0)], 0.0);
        let (_, slack) = m
            .add_inequality_penalty(&expr, 3, 1.0, SlackAlloc::Auto)
            .unwrap();
        assert_eq!(slack.len(), 2);
        let a = Assignment::from_bits(vec![1, 1, 1, 0]);
        assert!(m.energy(&a).unwrap().abs() < ENERGY_TOL);
    }

    #[test]
    fn inequality_slack_width_matches_gap_formula() {
        for (gap, bits) in [(0i64, 0u32), (1, 1), (3, 2), (4, 3), (7, 3), (8, 4), (16000, 14)] {
            assert_eq!(slack_width(gap), bits, "gap {gap}");
        }
    }

    #[test]
    fn inequality_rejects_negative_bound_and_infeasible() {
        let mut m = QuboModel::new(1);
        let expr = LinearExpr::from_terms([(0, 1.0)], 0.0);
        assert!(matches!(
            m.add_inequality_penalty(&expr, -1, 1.0, SlackAlloc::Auto),
            Err(ModelError::NegativeBound(-1))
        ));
        let high = LinearExpr::from_terms([(0, 1.0)], 5.0);
        assert!(matches!(
            m.add_inequality_penalty(&high, 3, 1.0, SlackAlloc::Auto),
            Err(ModelError::InfeasibleInequality { min: 5, bound: 3 })
        ));
    }

    #[test]
    fn inequality_penalty_zero_iff_within_bound() {
        // 2 x0 + x1 - x2 <= 1 over all 8 assignments plus slack bits.
        let mut m = QuboModel::new(3);
        let expr = LinearExpr::from_terms([(0, 2.0), (1, 1.0), (2, -1.0)], 0.0);
        m.add_inequality_penalty(&expr, 1, 1.0, SlackAlloc::Auto).unwrap();
        let n = m.n_vars();
        for a in all_assignments(n) {
            let satisfied = expr.value(&a.bits) <= 1.0 + 1e-12;
            let zero_possible = all_assignments(n)
                .filter(|b| b.bits[..3] == a.bits[..3])
                .any(|b| m.energy(&b).unwrap().abs() < ENERGY_TOL);
            assert_eq!(satisfied, zero_possible, "bits {:?}", &a.bits[..3]);
        }
    }

    #[test]
    fn ising_linear_example() {
        let mut m = QuboModel::new(1);
        m.add_linear(0, 1.0);
        let ising = m.to_ising();
        assert_eq!(ising.h.get(&0), Some(&-0.5));
        assert_eq!(ising.offset, 0.5);
    }

    #[test]
    fn ising_quadratic_example() {
        let mut m = QuboModel::new(2);
        m.add_quadratic(0, 1, 4.0);
        let ising = m.to_ising();
        assert_eq!(ising.j.get(&(0, 1)), Some(&1.0));
        assert_eq!(ising.h.get(&0), Some(&-1.0));
        assert_eq!(ising.h.get(&1), Some(&-1.0));
        assert_eq!(ising.offset, 1.0);
    }

    fn random_model(n: usize, rng: &mut ChaCha8Rng) -> QuboModel {
        let mut m = QuboModel::new(n);
        for i in 0..n {
            if rng.gen_bool(0.7) {
                m.add_linear(i, rng.gen_range(-5.0..5.0));
            }
            for j in (i + 1)..n {
                if rng.gen_bool(0.4) {
                    m.add_quadratic(i, j, rng.gen_range(-5.0..5.0));
                }
            }
        }
        m.add_offset(rng.gen_range(-2.0..2.0));
        m
    }

    #[test]
    fn ising_equivalence_exhaustive_on_random_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = random_model(10, &mut rng);
            let ising = m.to_ising();
            for a in all_assignments(10) {
                let eq = m.energy(&a).unwrap();
                let ei = ising.energy(&IsingModel::spins_from_bits(&a)).unwrap();
                assert!((eq - ei).abs() < ENERGY_TOL, "qubo {eq} vs ising {ei}");
            }
        }
    }

    #[test]
    fn qubo_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_model(8, &mut rng);
        let v = m.to_json_value();
        // i < j enforced on write
        for pair in v["quadratic"].as_array().unwrap() {
            let (i, j) = (pair[0].as_u64().unwrap(), pair[1].as_u64().unwrap());
            assert!(i < j);
        }
        let back = QuboModel::from_json_value(&v).unwrap();
        assert_eq!(m, back);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            // Equality penalties are nonnegative everywhere and zero exactly
            // on the constraint manifold.
            #[test]
            fn equality_penalty_nonneg_and_tight(
                coeffs in proptest::collection::vec(-3i64..=3, 1..6),
                konst in -4i64..=4,
                bits in proptest::collection::vec(0u8..=1, 6),
            ) {
                let n = coeffs.len();
                let mut m = QuboModel::new(n);
                let expr = LinearExpr::from_terms(
                    coeffs.iter().enumerate().map(|(i, &c)| (i, c as f64)),
                    konst as f64,
                );
                m.add_equality_penalty(&expr, 2.0).unwrap();
                let a = Assignment::from_bits(bits[..n].to_vec());
                let e = m.energy(&a).unwrap();
                prop_assert!(e >= -ENERGY_TOL);
                let satisfied = expr.value(&a.bits).abs() < 1e-12;
                prop_assert_eq!(satisfied, e.abs() < ENERGY_TOL);
            }

            // Quadratic accumulation is canonical regardless of insertion order.
            #[test]
            fn canonical_pair_accumulation(i in 0usize..10, j in 0usize..10, c1 in -5.0..5.0, c2 in -5.0..5.0) {
                prop_assume!(i != j);
                let mut m = QuboModel::new(10);
                m.add_quadratic(i, j, c1);
                m.add_quadratic(j, i, c2);
                let key = (i.min(j), i.max(j));
                prop_assert_eq!(m.quadratic().len(), 1);
                prop_assert!((m.quadratic()[&key] - (c1 + c2)).abs() < 1e-12);
            }

            // Ising equivalence on arbitrary small models.
            #[test]
            fn ising_equivalence_prop(seed in 0u64..5000) {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let m = random_model(6, &mut rng);
                let ising = m.to_ising();
                for a in all_assignments(6) {
                    let eq = m.energy(&a).unwrap();
                    let ei = ising.energy(&IsingModel::spins_from_bits(&a)).unwrap();
                    prop_assert!((eq - ei).abs() < ENERGY_TOL);
                }
            }
        }
    }
}
