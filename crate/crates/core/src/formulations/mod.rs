//! Builders mapping routing instances to tagged QUBO models.
//!
//! Each builder produces a [`BuildOutput`]: the model, the variable map, and
//! a per-constraint-family ledger of the exact terms each penalty family
//! contributed. The ledger is what makes per-family violation reporting and
//! the energy-decomposition identity possible.

mod gps;
mod mtz;
mod native;
mod position;
mod vrp;

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{RoutingInstance, VrpConfig};
use crate::qubo::{Assignment, LinearExpr, ModelError, QuboModel, SizeReport, SlackAlloc, TermSet};
use crate::varmap::{FormulationKind, VarKey, VariableMap};

pub use native::SubtourVariant;

/// Family tag for the distance objective; everything else is a penalty.
pub const OBJECTIVE: &str = "objective";

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("penalty weights must all be positive")]
    BadWeights,
    #[error("transitivity penalty needs three distinct variables")]
    DuplicateIndices,
    #[error("formulation {kind:?} is a {expected} builder")]
    WrongProblemClass { kind: FormulationKind, expected: &'static str },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One positive weight per constraint family plus the objective scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    /// Relation-slot and position one-hots.
    pub onehot: f64,
    /// Enter/leave degree constraints (per node or per city across vehicles).
    pub degree: f64,
    /// Order antisymmetry between mirrored pairs.
    pub antisymmetry: f64,
    /// Lambda on the order-transitivity penalty.
    pub transitivity: f64,
    /// Coupling of shared precedence bits to per-vehicle slots.
    pub coupling: f64,
    /// Arrive-implies-leave product penalties.
    pub chain: f64,
    /// Binary-order inequality penalties.
    pub order: f64,
    /// Route-length cap inequalities.
    pub route_cap: f64,
    pub objective_scale: f64,
}

impl PenaltyWeights {
    /// Uniform weights at `(1 + margin) * sum_i max_j d_ij`, which dominates
    /// any route objective.
    pub fn from_bound(length_bound: f64, margin: f64) -> Self {
        let w = (1.0 + margin) * length_bound;
        Self {
            onehot: w,
            degree: w,
            antisymmetry: w,
            transitivity: w,
            coupling: w,
            chain: w,
            order: w,
            route_cap: w,
            objective_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), FormulationError> {
        let all = [
            self.onehot,
            self.degree,
            self.antisymmetry,
            self.transitivity,
            self.coupling,
            self.chain,
            self.order,
            self.route_cap,
            self.objective_scale,
        ];
        if all.iter().all(|w| w.is_finite() && *w > 0.0) {
            Ok(())
        } else {
            Err(FormulationError::BadWeights)
        }
    }
}

/// Default weights for an instance: every hard constraint costs more to break
/// than the longest possible route could ever save.
pub fn default_weights(instance: &RoutingInstance, _kind: FormulationKind) -> PenaltyWeights {
    PenaltyWeights::from_bound(instance.route_length_bound(), 0.25)
}

/// Lighter weights for annealing runs. Encodings stay at zero penalty, but
/// the smaller barriers between feasible solutions mix far better under
/// single-bit flips; samples must be decode-validated, which sampler
/// pipelines do anyway.
pub fn annealing_weights(instance: &RoutingInstance, kind: FormulationKind) -> PenaltyWeights {
    let w = default_weights(instance, kind);
    PenaltyWeights {
        onehot: 0.25 * w.onehot,
        degree: 0.25 * w.degree,
        antisymmetry: 0.25 * w.antisymmetry,
        transitivity: 0.25 * w.transitivity,
        coupling: 0.25 * w.coupling,
        chain: 0.25 * w.chain,
        order: 0.25 * w.order,
        route_cap: w.route_cap,
        objective_scale: w.objective_scale,
    }
}

/// A built formulation: model, variable map, and tagged penalty families.
#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub model: QuboModel,
    pub varmap: VariableMap,
    pub families: BTreeMap<String, TermSet>,
}

impl BuildOutput {
    pub fn kind(&self) -> FormulationKind {
        self.varmap.kind
    }

    pub fn stats(&self) -> SizeReport {
        self.model.stats()
    }

    /// Energy of each tagged family at `a`, objective included.
    pub fn residuals(&self, a: &Assignment) -> BTreeMap<String, f64> {
        self.families
            .iter()
            .map(|(name, ts)| (name.clone(), ts.energy(&a.bits)))
            .collect()
    }

    pub fn objective_value(&self, a: &Assignment) -> f64 {
        self.families.get(OBJECTIVE).map(|ts| ts.energy(&a.bits)).unwrap_or(0.0)
    }
}

/// Node-grid conventions shared by every formulation: which arcs exist.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Grid {
    pub t: usize,
}

impl Grid {
    pub fn new(instance: &RoutingInstance) -> Self {
        Self { t: instance.n_nodes() }
    }

    pub fn start(&self) -> usize {
        0
    }

    pub fn end(&self) -> usize {
        self.t - 1
    }

    /// Arcs into the start and out of the end never exist.
    pub fn arc_active(&self, i: usize, j: usize) -> bool {
        i != j && j != self.start() && i != self.end()
    }

    pub fn nodes(&self) -> Range<usize> {
        0..self.t
    }

    /// Nodes with an outgoing arc: start plus cities.
    pub fn exitable(&self) -> Range<usize> {
        0..self.t - 1
    }

    /// Nodes with an incoming arc: cities plus end.
    pub fn enterable(&self) -> Range<usize> {
        1..self.t
    }

    /// Non-depot cities, the only nodes a subtour could cycle through.
    pub fn mid_cities(&self) -> Range<usize> {
        1..self.t - 1
    }
}

/// Accumulates a model and its per-family term ledger in lockstep.
pub(crate) struct ModelBuilder {
    model: QuboModel,
    varmap: VariableMap,
    families: BTreeMap<String, TermSet>,
}

impl ModelBuilder {
    pub fn new(varmap: VariableMap) -> Self {
        Self { model: QuboModel::new(varmap.len()), varmap, families: BTreeMap::new() }
    }

    pub fn idx(&self, key: VarKey) -> usize {
        self.varmap.index(key)
    }

    fn family(&mut self, name: &str) -> &mut TermSet {
        self.families.entry(name.to_string()).or_default()
    }

    pub fn add_linear(&mut self, family: &str, key: VarKey, c: f64) {
        let i = self.idx(key);
        self.model.add_linear(i, c);
        self.family(family).add_linear(i, c);
    }

    pub fn add_quadratic(&mut self, family: &str, k1: VarKey, k2: VarKey, c: f64) {
        let (i, j) = (self.idx(k1), self.idx(k2));
        self.model.add_quadratic(i, j, c);
        self.family(family).add_quadratic(i, j, c);
    }

    /// Linear expression over mapped keys. Clamped slots fold their fixed
    /// value into the constant instead of appearing as variables.
    pub fn expr(&self, keys: impl IntoIterator<Item = (VarKey, f64)>, constant: f64) -> LinearExpr {
        let mut e = LinearExpr::new();
        for (key, c) in keys {
            let flat = self.varmap.index(key);
            match self.varmap.clamped().get(&flat) {
                Some(&v) => e.add_constant(c * f64::from(v)),
                None => e.add_term(flat, c),
            }
        }
        e.add_constant(constant);
        e
    }

    pub fn add_equality(
        &mut self,
        family: &str,
        expr: &LinearExpr,
        weight: f64,
    ) -> Result<(), FormulationError> {
        let ts = self.model.add_equality_penalty(expr, weight)?;
        self.family(family).absorb(&ts);
        Ok(())
    }

    /// Inequality penalty whose slack bits are registered in the variable map
    /// through `slack_key`.
    pub fn add_inequality(
        &mut self,
        family: &str,
        expr: &LinearExpr,
        bound: i64,
        weight: f64,
        alloc: SlackAlloc,
        slack_key: impl Fn(u8) -> VarKey,
    ) -> Result<Range<usize>, FormulationError> {
        let (ts, slack) = self.model.add_inequality_penalty(expr, bound, weight, alloc)?;
        for (h, _) in slack.clone().enumerate() {
            self.varmap.push(slack_key(h as u8));
        }
        debug_assert_eq!(self.varmap.len(), self.model.n_vars());
        self.family(family).absorb(&ts);
        Ok(slack)
    }

    pub fn finish(self) -> BuildOutput {
        BuildOutput { model: self.model, varmap: self.varmap, families: self.families }
    }
}

/// Quadratic penalty `P(a, b, c) = ab - ac - bc + c` over three bits.
///
/// `P` is 1 on the two order-contradicting triples `(0,0,1)` and `(1,1,0)`
/// and 0 on the other six.
pub fn transitivity_penalty(
    a: usize,
    b: usize,
    c: usize,
) -> Result<(Vec<((usize, usize), f64)>, (usize, f64)), FormulationError> {
    if a == b || a == c || b == c {
        return Err(FormulationError::DuplicateIndices);
    }
    Ok((vec![((a, b), 1.0), ((a, c), -1.0), ((b, c), -1.0)], (c, 1.0)))
}

/// Adds the transitivity penalty over mapped keys, scaled by `lambda`.
pub(crate) fn add_transitivity(
    builder: &mut ModelBuilder,
    family: &str,
    ka: VarKey,
    kb: VarKey,
    kc: VarKey,
    lambda: f64,
) -> Result<(), FormulationError> {
    let (a, b, c) = (builder.idx(ka), builder.idx(kb), builder.idx(kc));
    let (pairs, (lin, lc)) = transitivity_penalty(a, b, c)?;
    for ((i, j), coeff) in pairs {
        builder.model.add_quadratic(i, j, lambda * coeff);
        builder.family(family).add_quadratic(i, j, lambda * coeff);
    }
    builder.model.add_linear(lin, lambda * lc);
    builder.family(family).add_linear(lin, lambda * lc);
    Ok(())
}

pub use gps::build_gps_tsp;
pub use mtz::build_mtz_tsp;
pub use native::build_native_tsp;
pub use position::build_position_tsp;
pub use vrp::{build_vrp3, build_vrp5};

/// Builds any single-tour formulation by tag.
pub fn build_tsp(
    kind: FormulationKind,
    instance: &RoutingInstance,
    weights: &PenaltyWeights,
) -> Result<BuildOutput, FormulationError> {
    match kind {
        FormulationKind::Native => build_native_tsp(instance, weights, SubtourVariant::B),
        FormulationKind::Mtz => build_mtz_tsp(instance, weights),
        FormulationKind::Gps => build_gps_tsp(instance, weights),
        FormulationKind::Position => build_position_tsp(instance, weights),
        _ => Err(FormulationError::WrongProblemClass { kind, expected: "single tour" }),
    }
}

/// Builds either vehicle-routing formulation by tag.
pub fn build_vrp(
    kind: FormulationKind,
    config: &VrpConfig,
    weights: &PenaltyWeights,
) -> Result<BuildOutput, FormulationError> {
    match kind {
        FormulationKind::Vrp5 => build_vrp5(config, weights),
        FormulationKind::Vrp3 => build_vrp3(config, weights),
        _ => Err(FormulationError::WrongProblemClass { kind, expected: "vehicle routing" }),
    }
}
