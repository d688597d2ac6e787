//! Bidirectional mapping between assignments and routing solutions.
//!
//! Encoders turn tours or route sets into zero-penalty assignments; decoders
//! validate every constraint family semantically and reconstruct the
//! solution only when all of them hold, so samplers' infeasible bitstrings
//! come back as data, not errors.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::formulations::{BuildOutput, OBJECTIVE};
use crate::instance::RoutingInstance;
use crate::qubo::{Assignment, ENERGY_TOL};
use crate::varmap::{FormulationKind, VarKey, VariableMap};

#[derive(Debug, Error, PartialEq)]
pub enum EncodeError {
    #[error("tour is not a depot-to-depot permutation of the nodes")]
    InvalidTour,
    #[error("route set does not partition the cities across {0} vehicles")]
    InvalidRoutes(usize),
    #[error("vehicle {q} travels farther than vehicle 1; the cap has no encoding")]
    CapViolated { q: usize },
    #[error("formulation {0:?} cannot encode this solution shape")]
    WrongKind(FormulationKind),
}

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("model carries no tagged penalty families")]
    Untagged,
}

/// A closed tour written as the node sequence start-depot .. end-depot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tour {
    pub order: Vec<usize>,
}

impl Tour {
    pub fn new(order: Vec<usize>) -> Self {
        Self { order }
    }

    /// Tour visiting `interior` between the two depots of a `t`-node grid.
    pub fn from_interior(interior: &[usize], t: usize) -> Self {
        let mut order = Vec::with_capacity(t);
        order.push(0);
        order.extend_from_slice(interior);
        order.push(t - 1);
        Self { order }
    }

    pub fn interior(&self) -> &[usize] {
        &self.order[1..self.order.len() - 1]
    }

    /// Start depot, every city exactly once, end depot.
    pub fn validate(&self, t: usize) -> bool {
        if self.order.len() != t || self.order[0] != 0 || *self.order.last().unwrap() != t - 1 {
            return false;
        }
        let mut seen = vec![false; t];
        for &n in &self.order {
            if n >= t || seen[n] {
                return false;
            }
            seen[n] = true;
        }
        true
    }
}

/// One tour per vehicle; idle vehicles hold the direct depot-to-depot route.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteSet {
    pub routes: Vec<Tour>,
}

impl RouteSet {
    pub fn n_vehicles(&self) -> usize {
        self.routes.len()
    }

    pub fn empty_route(t: usize) -> Tour {
        Tour::new(vec![0, t - 1])
    }

    /// Every route runs depot to depot and the cities are partitioned.
    pub fn validate(&self, t: usize) -> bool {
        let mut seen = vec![false; t];
        for route in &self.routes {
            let o = &route.order;
            if o.len() < 2 || o[0] != 0 || *o.last().unwrap() != t - 1 {
                return false;
            }
            for &n in &o[1..o.len() - 1] {
                if n == 0 || n >= t - 1 || seen[n] {
                    return false;
                }
                seen[n] = true;
            }
        }
        (1..t - 1).all(|n| seen[n])
    }
}

pub fn tour_length(tour: &Tour, instance: &RoutingInstance) -> f64 {
    tour.order.windows(2).map(|w| instance.distance(w[0], w[1])).sum()
}

pub fn max_route_length(rs: &RouteSet, instance: &RoutingInstance) -> f64 {
    rs.routes
        .iter()
        .map(|r| tour_length(r, instance))
        .fold(0.0, f64::max)
}

/// Decoder output: a reconstructed solution or per-family violation counts.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoded<T> {
    Feasible(T),
    Infeasible(BTreeMap<String, u64>),
}

impl<T> Decoded<T> {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Decoded::Feasible(_))
    }

    pub fn feasible(self) -> Option<T> {
        match self {
            Decoded::Feasible(t) => Some(t),
            Decoded::Infeasible(_) => None,
        }
    }

    pub fn violations(&self) -> Option<&BTreeMap<String, u64>> {
        match self {
            Decoded::Feasible(_) => None,
            Decoded::Infeasible(v) => Some(v),
        }
    }
}

/// Per-family penalty energies of an assignment, with the overall verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationReport {
    pub residuals: BTreeMap<String, f64>,
    pub feasible: bool,
}

/// Energy residual of every tagged penalty family at `a`.
///
/// The assignment is feasible exactly when every family's contribution
/// vanishes; together with the objective the residuals reproduce the total
/// model energy.
pub fn check_constraints(a: &Assignment, build: &BuildOutput) -> Result<ViolationReport, ReportError> {
    if build.families.is_empty() {
        return Err(ReportError::Untagged);
    }
    let mut residuals = build.residuals(a);
    residuals.remove(OBJECTIVE);
    let feasible = residuals.values().all(|r| r.abs() <= ENERGY_TOL);
    Ok(ViolationReport { residuals, feasible })
}

// --- shared helpers ---------------------------------------------------------

struct GridView {
    t: usize,
}

impl GridView {
    fn of(vm: &VariableMap) -> Self {
        Self { t: vm.dims.n_nodes }
    }

    fn end(&self) -> usize {
        self.t - 1
    }

    fn arc_active(&self, i: usize, j: usize) -> bool {
        i != j && j != 0 && i != self.end()
    }

    fn mid(&self) -> std::ops::Range<usize> {
        1..self.t - 1
    }
}

fn bump(map: &mut BTreeMap<String, u64>, family: &str) {
    *map.entry(family.to_string()).or_insert(0) += 1;
}

/// Walks unique successor pointers from the start depot. Returns the tour if
/// the walk visits every node exactly once and ends at the end depot.
fn walk_chain(t: usize, succ: impl Fn(usize) -> Vec<usize>) -> Option<Tour> {
    let mut order = vec![0usize];
    let mut seen = vec![false; t];
    seen[0] = true;
    let mut cur = 0usize;
    while cur != t - 1 {
        let next = succ(cur);
        if next.len() != 1 {
            return None;
        }
        let n = next[0];
        if seen[n] {
            return None;
        }
        seen[n] = true;
        order.push(n);
        cur = n;
    }
    if order.len() == t {
        Some(Tour::new(order))
    } else {
        None
    }
}

// --- relation-slot (single tour) --------------------------------------------

/// Encodes a tour into the relation-slot variables: `r = 1` on consecutive
/// pairs, `r = 0` / `r = 2` by visit order everywhere else.
pub fn encode_gps(tour: &Tour, vm: &VariableMap) -> Result<Assignment, EncodeError> {
    if vm.kind != FormulationKind::Gps {
        return Err(EncodeError::WrongKind(vm.kind));
    }
    let g = GridView::of(vm);
    if !tour.validate(g.t) {
        return Err(EncodeError::InvalidTour);
    }
    let mut pos = vec![0usize; g.t];
    let mut succ = vec![usize::MAX; g.t];
    for (p, &node) in tour.order.iter().enumerate() {
        pos[node] = p;
        if p + 1 < tour.order.len() {
            succ[node] = tour.order[p + 1];
        }
    }
    let mut bits = vm.blank_bits();
    for i in 0..g.t {
        for j in 0..g.t {
            if i == j {
                continue;
            }
            let r = if succ[i] == j {
                1
            } else if pos[i] < pos[j] {
                0
            } else {
                2
            };
            vm.write(&mut bits, VarKey::Rel { i, j, r }, 1);
        }
    }
    Ok(Assignment::from_bits(bits))
}

fn gps_violations(a: &Assignment, vm: &VariableMap) -> BTreeMap<String, u64> {
    let g = GridView::of(vm);
    let mut v = BTreeMap::new();
    let val = |i: usize, j: usize, r: u8| vm.value(a, VarKey::Rel { i, j, r });
    for i in 0..g.t {
        for j in 0..g.t {
            if i == j {
                continue;
            }
            let total: u8 = (0..3).map(|r| val(i, j, r)).sum();
            if total != 1 {
                bump(&mut v, "slot_onehot");
            }
        }
    }
    for i in 0..g.end() {
        let out: u32 = (0..g.t)
            .filter(|&j| g.arc_active(i, j))
            .map(|j| u32::from(val(i, j, 1)))
            .sum();
        if out != 1 {
            bump(&mut v, "out_degree");
        }
    }
    for j in 1..g.t {
        let inn: u32 = (0..g.end())
            .filter(|&i| g.arc_active(i, j))
            .map(|i| u32::from(val(i, j, 1)))
            .sum();
        if inn != 1 {
            bump(&mut v, "in_degree");
        }
    }
    for i in 0..g.t {
        for j in (i + 1)..g.t {
            if val(i, j, 2) + val(j, i, 2) != 1 {
                bump(&mut v, "antisymmetry");
            }
        }
    }
    for i in g.mid() {
        for j in g.mid() {
            for k in g.mid() {
                if i == j || i == k || j == k {
                    continue;
                }
                let (aij, ajk, aik) = (
                    i32::from(val(j, i, 2)),
                    i32::from(val(k, j, 2)),
                    i32::from(val(k, i, 2)),
                );
                if aij * ajk - aij * aik - ajk * aik + aik != 0 {
                    bump(&mut v, "transitivity");
                }
            }
        }
    }
    v
}

/// Follows the `r = 1` successor chain from the start depot; the order slots
/// are validated but not needed for path reconstruction.
pub fn decode_gps(a: &Assignment, vm: &VariableMap) -> Decoded<Tour> {
    let g = GridView::of(vm);
    let mut v = gps_violations(a, vm);
    let tour = walk_chain(g.t, |i| {
        (0..g.t)
            .filter(|&j| g.arc_active(i, j) && vm.value(a, VarKey::Rel { i, j, r: 1 }) == 1)
            .collect()
    });
    match tour {
        Some(t) if v.is_empty() => Decoded::Feasible(t),
        _ => {
            if v.is_empty() {
                bump(&mut v, "structure");
            }
            Decoded::Infeasible(v)
        }
    }
}

// --- time-indexed -----------------------------------------------------------

pub fn encode_native(tour: &Tour, vm: &VariableMap) -> Result<Assignment, EncodeError> {
    if vm.kind != FormulationKind::Native {
        return Err(EncodeError::WrongKind(vm.kind));
    }
    let g = GridView::of(vm);
    if !tour.validate(g.t) {
        return Err(EncodeError::InvalidTour);
    }
    let mut bits = vm.blank_bits();
    for (t, w) in tour.order.windows(2).enumerate() {
        vm.write(&mut bits, VarKey::Arc { u: w[0], v: w[1], t }, 1);
    }
    Ok(Assignment::from_bits(bits))
}

/// Structural decode: one arc per time step, chained from start to end.
pub fn decode_native(a: &Assignment, vm: &VariableMap) -> Decoded<Tour> {
    let g = GridView::of(vm);
    let steps = vm.dims.time_steps.unwrap_or(g.t - 1);
    let mut v = BTreeMap::new();
    let mut by_step: Vec<Vec<(usize, usize)>> = vec![Vec::new(); steps];
    for u in 0..g.t {
        for j in 0..g.t {
            if !g.arc_active(u, j) {
                continue;
            }
            for t in 0..steps {
                if vm.value(a, VarKey::Arc { u, v: j, t }) == 1 {
                    by_step[t].push((u, j));
                }
            }
        }
    }
    let mut order = vec![0usize];
    let mut seen = vec![false; g.t];
    seen[0] = true;
    let mut ok = true;
    for arcs in &by_step {
        if arcs.len() != 1 {
            ok = false;
            break;
        }
        let (u, w) = arcs[0];
        if u != *order.last().unwrap() || seen[w] {
            ok = false;
            break;
        }
        seen[w] = true;
        order.push(w);
    }
    if ok && order.len() == g.t && *order.last().unwrap() == g.end() {
        Decoded::Feasible(Tour::new(order))
    } else {
        bump(&mut v, "structure");
        Decoded::Infeasible(v)
    }
}

// --- position ----------------------------------------------------------------

pub fn encode_position(tour: &Tour, vm: &VariableMap) -> Result<Assignment, EncodeError> {
    if vm.kind != FormulationKind::Position {
        return Err(EncodeError::WrongKind(vm.kind));
    }
    let g = GridView::of(vm);
    if !tour.validate(g.t) {
        return Err(EncodeError::InvalidTour);
    }
    let mut bits = vm.blank_bits();
    for (slot, &node) in tour.order.iter().enumerate() {
        vm.write(&mut bits, VarKey::Pos { node, slot }, 1);
    }
    Ok(Assignment::from_bits(bits))
}

/// One-hot rows give the visiting order directly.
pub fn decode_position(a: &Assignment, vm: &VariableMap) -> Decoded<Tour> {
    let g = GridView::of(vm);
    let mut v = BTreeMap::new();
    let mut order = vec![0usize];
    for slot in g.mid() {
        let nodes: Vec<usize> = g
            .mid()
            .filter(|&node| vm.value(a, VarKey::Pos { node, slot }) == 1)
            .collect();
        if nodes.len() != 1 {
            bump(&mut v, "slot_onehot");
        } else {
            order.push(nodes[0]);
        }
    }
    for node in g.mid() {
        let count = g
            .mid()
            .filter(|&slot| vm.value(a, VarKey::Pos { node, slot }) == 1)
            .count();
        if count != 1 {
            bump(&mut v, "node_onehot");
        }
    }
    if !v.is_empty() {
        return Decoded::Infeasible(v);
    }
    order.push(g.end());
    let tour = Tour::new(order);
    if tour.validate(g.t) {
        Decoded::Feasible(tour)
    } else {
        bump(&mut v, "structure");
        Decoded::Infeasible(v)
    }
}

// --- edge + binary order ------------------------------------------------------

fn mtz_order_value(a: &Assignment, vm: &VariableMap, node: usize) -> u64 {
    let g = GridView::of(vm);
    if node == 0 {
        return 0;
    }
    if node == g.end() {
        return (g.t - 1) as u64;
    }
    let bits = vm.dims.order_bits.unwrap_or(0);
    (0..bits)
        .map(|bit| u64::from(vm.value(a, VarKey::OrderBit { node, bit })) << bit)
        .sum()
}

pub fn encode_mtz(tour: &Tour, vm: &VariableMap) -> Result<Assignment, EncodeError> {
    if vm.kind != FormulationKind::Mtz {
        return Err(EncodeError::WrongKind(vm.kind));
    }
    let g = GridView::of(vm);
    if !tour.validate(g.t) {
        return Err(EncodeError::InvalidTour);
    }
    let mut bits = vm.blank_bits();
    let mut pos = vec![0u64; g.t];
    for (p, &node) in tour.order.iter().enumerate() {
        pos[node] = p as u64;
    }
    for w in tour.order.windows(2) {
        vm.write(&mut bits, VarKey::Edge { i: w[0], j: w[1] }, 1);
    }
    let width = vm.dims.order_bits.unwrap_or(0);
    for node in g.mid() {
        for bit in 0..width {
            vm.write(&mut bits, VarKey::OrderBit { node, bit }, ((pos[node] >> bit) & 1) as u8);
        }
    }
    // Per-pair slack closes the order inequality exactly.
    let a = Assignment::from_bits(bits);
    let mut bits = a.bits;
    for i in 0..g.end() {
        for j in 1..g.t {
            if !g.arc_active(i, j) {
                continue;
            }
            let x = bits[vm.index(VarKey::Edge { i, j })] as i64;
            let slack =
                (g.t as i64 - 1) - (pos[i] as i64 - pos[j] as i64 + g.t as i64 * x);
            debug_assert!(slack >= 0, "tour violates its own order inequality");
            for bit in 0..64 {
                if let Some(flat) = vm.get(VarKey::OrderSlack { i, j, bit }) {
                    bits[flat] = ((slack >> bit) & 1) as u8;
                } else if slack >> bit != 0 {
                    debug_assert!(false, "slack {slack} overflows its width");
                }
            }
        }
    }
    Ok(Assignment::from_bits(bits))
}

fn mtz_violations(a: &Assignment, vm: &VariableMap) -> BTreeMap<String, u64> {
    let g = GridView::of(vm);
    let mut v = BTreeMap::new();
    let edge = |i: usize, j: usize| vm.value(a, VarKey::Edge { i, j });
    for i in 0..g.end() {
        let out: u32 = (0..g.t)
            .filter(|&j| g.arc_active(i, j))
            .map(|j| u32::from(edge(i, j)))
            .sum();
        if out != 1 {
            bump(&mut v, "out_degree");
        }
    }
    for j in 1..g.t {
        let inn: u32 = (0..g.end())
            .filter(|&i| g.arc_active(i, j))
            .map(|i| u32::from(edge(i, j)))
            .sum();
        if inn != 1 {
            bump(&mut v, "in_degree");
        }
    }
    for i in 0..g.end() {
        for j in 1..g.t {
            if !g.arc_active(i, j) {
                continue;
            }
            let mut lhs = mtz_order_value(a, vm, i) as i64 - mtz_order_value(a, vm, j) as i64
                + g.t as i64 * i64::from(edge(i, j));
            for bit in 0..64 {
                if let Some(flat) = vm.get(VarKey::OrderSlack { i, j, bit }) {
                    lhs += i64::from(a.get(flat)) << bit;
                } else {
                    break;
                }
            }
            if lhs != g.t as i64 - 1 {
                bump(&mut v, "order");
            }
        }
    }
    v
}

pub fn decode_mtz(a: &Assignment, vm: &VariableMap) -> Decoded<Tour> {
    let g = GridView::of(vm);
    let mut v = mtz_violations(a, vm);
    let tour = walk_chain(g.t, |i| {
        (0..g.t)
            .filter(|&j| g.arc_active(i, j) && vm.value(a, VarKey::Edge { i, j }) == 1)
            .collect()
    });
    match tour {
        Some(t) if v.is_empty() => Decoded::Feasible(t),
        _ => {
            if v.is_empty() {
                bump(&mut v, "structure");
            }
            Decoded::Infeasible(v)
        }
    }
}

// --- vehicle routing -----------------------------------------------------------

fn vrp_i_first(kind: FormulationKind) -> &'static [u8] {
    match kind {
        FormulationKind::Vrp5 => &[0, 1, 3],
        _ => &[0, 1],
    }
}

fn vrp_slots(kind: FormulationKind) -> u8 {
    if kind == FormulationKind::Vrp5 {
        5
    } else {
        3
    }
}

/// Encodes a route set. Global precedence orders cities by (vehicle,
/// position); vehicle 1 must carry the longest route or the cap slack has no
/// nonnegative value.
pub fn encode_vrp(
    routes: &RouteSet,
    vm: &VariableMap,
    instance: &RoutingInstance,
) -> Result<Assignment, EncodeError> {
    if !vm.kind.is_vrp() {
        return Err(EncodeError::WrongKind(vm.kind));
    }
    let g = GridView::of(vm);
    let fleet = vm.dims.n_vehicles.unwrap_or(0);
    if routes.n_vehicles() != fleet || !routes.validate(g.t) {
        return Err(EncodeError::InvalidRoutes(fleet));
    }

    // rank = (vehicle, position); depots sit at the global extremes.
    let mut rank = vec![(usize::MAX, usize::MAX); g.t];
    rank[0] = (0, 0);
    let mut on_route = vec![vec![false; g.t]; fleet + 1];
    let mut succ = vec![vec![usize::MAX; g.t]; fleet + 1];
    for (qi, route) in routes.routes.iter().enumerate() {
        let q = qi + 1;
        on_route[q][0] = true;
        on_route[q][g.end()] = true;
        for (p, &node) in route.order.iter().enumerate() {
            if node != 0 && node != g.end() {
                rank[node] = (q, p);
                on_route[q][node] = true;
            }
            if p + 1 < route.order.len() {
                succ[q][node] = route.order[p + 1];
            }
        }
    }

    let before = |i: usize, j: usize| -> bool {
        if i == 0 || j == g.end() {
            return true;
        }
        if j == 0 || i == g.end() {
            return false;
        }
        rank[i] < rank[j]
    };

    let mut bits = vm.blank_bits();
    for q in 1..=fleet {
        for i in 0..g.t {
            for j in 0..g.t {
                if i == j {
                    continue;
                }
                let r = match vm.kind {
                    FormulationKind::Vrp5 => {
                        if on_route[q][i] && on_route[q][j] {
                            if succ[q][i] == j {
                                1
                            } else if before(i, j) {
                                0
                            } else {
                                2
                            }
                        } else if before(i, j) {
                            3
                        } else {
                            4
                        }
                    }
                    _ => {
                        if succ[q][i] == j {
                            1
                        } else if before(i, j) {
                            0
                        } else {
                            2
                        }
                    }
                };
                vm.write(&mut bits, VarKey::VrpRel { i, j, r, q }, 1);
            }
        }
    }
    for i in g.mid() {
        for j in g.mid() {
            if i != j {
                vm.write(&mut bits, VarKey::VrpAux { i, j }, u8::from(before(i, j)));
            }
        }
    }

    // Cap slack: vehicle q's scaled length plus slack equals vehicle 1's.
    let scaled = instance.scaled_dist();
    let route_len = |route: &Tour| -> i64 {
        route.order.windows(2).map(|w| scaled[w[0]][w[1]]).sum()
    };
    let len1 = route_len(&routes.routes[0]);
    for q in 2..=fleet {
        let gap = len1 - route_len(&routes.routes[q - 1]);
        if gap < 0 {
            return Err(EncodeError::CapViolated { q });
        }
        for bit in 0..64 {
            if let Some(flat) = vm.get(VarKey::VrpSlack { q, bit }) {
                bits[flat] = ((gap >> bit) & 1) as u8;
            } else if gap >> bit != 0 {
                return Err(EncodeError::CapViolated { q });
            }
        }
    }
    Ok(Assignment::from_bits(bits))
}

fn vrp_violations(
    a: &Assignment,
    vm: &VariableMap,
    instance: &RoutingInstance,
) -> BTreeMap<String, u64> {
    let g = GridView::of(vm);
    let fleet = vm.dims.n_vehicles.unwrap_or(0);
    let kind = vm.kind;
    let slots = vrp_slots(kind);
    let i_first = vrp_i_first(kind);
    let mut v = BTreeMap::new();
    let val = |i: usize, j: usize, r: u8, q: usize| vm.value(a, VarKey::VrpRel { i, j, r, q });
    let first_sum = |i: usize, j: usize, q: usize| -> u32 {
        i_first.iter().map(|&r| u32::from(val(i, j, r, q))).sum()
    };

    for q in 1..=fleet {
        for i in 0..g.t {
            for j in 0..g.t {
                if i == j {
                    continue;
                }
                let total: u32 = (0..slots).map(|r| u32::from(val(i, j, r, q))).sum();
                if total != 1 {
                    bump(&mut v, "slot_onehot");
                }
            }
        }
        let start: u32 = (1..g.t).map(|j| u32::from(val(0, j, 1, q))).sum();
        if start != 1 {
            bump(&mut v, "start_degree");
        }
        let end: u32 = (0..g.end()).map(|i| u32::from(val(i, g.end(), 1, q))).sum();
        if end != 1 {
            bump(&mut v, "end_degree");
        }
        // arrive-implies-leave
        for j in g.mid() {
            let out: u32 = (0..g.t)
                .filter(|&k| g.arc_active(j, k))
                .map(|k| u32::from(val(j, k, 1, q)))
                .sum();
            for i in 0..g.end() {
                if g.arc_active(i, j) && val(i, j, 1, q) == 1 && out != 1 {
                    bump(&mut v, "chain");
                }
            }
        }
        for i in 0..g.end() {
            for j in (i + 1)..g.end() {
                if first_sum(i, j, q) + first_sum(j, i, q) != 1 {
                    bump(&mut v, "antisymmetry");
                }
            }
        }
    }
    for city in g.mid() {
        let out: u32 = (1..=fleet)
            .flat_map(|q| {
                (0..g.t)
                    .filter(|&j| g.arc_active(city, j))
                    .map(move |j| u32::from(val(city, j, 1, q)))
            })
            .sum();
        if out != 1 {
            bump(&mut v, "city_out");
        }
        let inn: u32 = (1..=fleet)
            .flat_map(|q| {
                (0..g.end())
                    .filter(|&i| g.arc_active(i, city))
                    .map(move |i| u32::from(val(i, city, 1, q)))
            })
            .sum();
        if inn != 1 {
            bump(&mut v, "city_in");
        }
    }
    let auxv = |i: usize, j: usize| vm.value(a, VarKey::VrpAux { i, j });
    for i in g.mid() {
        for j in g.mid() {
            if i == j {
                continue;
            }
            let total: u32 = (1..=fleet).map(|q| first_sum(i, j, q)).sum();
            if total != fleet as u32 * u32::from(auxv(i, j)) {
                bump(&mut v, "coupling");
            }
        }
    }
    for i in g.mid() {
        for j in g.mid() {
            for k in g.mid() {
                if i == j || i == k || j == k {
                    continue;
                }
                let (aij, ajk, aik) = (
                    i32::from(auxv(i, j)),
                    i32::from(auxv(j, k)),
                    i32::from(auxv(i, k)),
                );
                if aij * ajk - aij * aik - ajk * aik + aik != 0 {
                    bump(&mut v, "transitivity");
                }
            }
        }
    }
    // route caps, in scaled units
    let scaled = instance.scaled_dist();
    let route_sum = |q: usize| -> i64 {
        let mut s = 0i64;
        for i in 0..g.end() {
            for j in 1..g.t {
                if g.arc_active(i, j) && val(i, j, 1, q) == 1 {
                    s += scaled[i][j];
                }
            }
        }
        s
    };
    let len1 = route_sum(1);
    for q in 2..=fleet {
        let mut lhs = route_sum(q) - len1;
        for bit in 0..64 {
            if let Some(flat) = vm.get(VarKey::VrpSlack { q, bit }) {
                lhs += i64::from(a.get(flat)) << bit;
            } else {
                break;
            }
        }
        if lhs != 0 {
            bump(&mut v, "route_cap");
        }
    }
    v
}

/// Per-vehicle successor walks; requires the instance for the scaled
/// route-cap check.
pub fn decode_vrp(
    a: &Assignment,
    vm: &VariableMap,
    instance: &RoutingInstance,
) -> Decoded<RouteSet> {
    let g = GridView::of(vm);
    let fleet = vm.dims.n_vehicles.unwrap_or(0);
    let mut v = vrp_violations(a, vm, instance);
    let mut routes = Vec::with_capacity(fleet);
    for q in 1..=fleet {
        let tour = walk_vehicle(a, vm, q, &g);
        match tour {
            Some(t) => routes.push(t),
            None => {
                bump(&mut v, "structure");
                return Decoded::Infeasible(v);
            }
        }
    }
    let rs = RouteSet { routes };
    if v.is_empty() && rs.validate(g.t) {
        Decoded::Feasible(rs)
    } else {
        if v.is_empty() {
            bump(&mut v, "structure");
        }
        Decoded::Infeasible(v)
    }
}

fn walk_vehicle(a: &Assignment, vm: &VariableMap, q: usize, g: &GridView) -> Option<Tour> {
    let mut order = vec![0usize];
    let mut seen = vec![false; g.t];
    seen[0] = true;
    let mut cur = 0usize;
    while cur != g.end() {
        let next: Vec<usize> = (0..g.t)
            .filter(|&j| {
                g.arc_active(cur, j) && vm.value(a, VarKey::VrpRel { i: cur, j, r: 1, q }) == 1
            })
            .collect();
        if next.len() != 1 || seen[next[0]] {
            return None;
        }
        seen[next[0]] = true;
        order.push(next[0]);
        cur = next[0];
    }
    Some(Tour::new(order))
}

// --- dispatch + solution JSON ---------------------------------------------------

/// Encodes a tour under any single-tour formulation.
pub fn encode_tour(tour: &Tour, vm: &VariableMap) -> Result<Assignment, EncodeError> {
    match vm.kind {
        FormulationKind::Gps => encode_gps(tour, vm),
        FormulationKind::Native => encode_native(tour, vm),
        FormulationKind::Position => encode_position(tour, vm),
        FormulationKind::Mtz => encode_mtz(tour, vm),
        k => Err(EncodeError::WrongKind(k)),
    }
}

/// Decodes a single-tour assignment under any single-tour formulation.
pub fn decode_tour(a: &Assignment, vm: &VariableMap) -> Decoded<Tour> {
    match vm.kind {
        FormulationKind::Gps => decode_gps(a, vm),
        FormulationKind::Native => decode_native(a, vm),
        FormulationKind::Position => decode_position(a, vm),
        FormulationKind::Mtz => decode_mtz(a, vm),
        _ => Decoded::Infeasible(BTreeMap::from([(String::from("kind"), 1)])),
    }
}

/// Decoded solution with lengths and residuals, in the solution JSON shape.
pub fn solution_to_json(
    kind: FormulationKind,
    tour: Option<&Tour>,
    routes: Option<&RouteSet>,
    instance: &RoutingInstance,
    report: &ViolationReport,
) -> Value {
    let mut out = json!({
        "formulation": kind.tag(),
        "feasible": report.feasible,
        "residuals": report.residuals,
    });
    if let Some(t) = tour {
        out["tour"] = json!(t.order);
        out["length"] = json!(tour_length(t, instance));
    }
    if let Some(rs) = routes {
        out["routes"] = json!(rs.routes.iter().map(|r| r.order.clone()).collect::<Vec<_>>());
        out["max_route"] = json!(max_route_length(rs, instance));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::{
        build_gps_tsp, build_mtz_tsp, build_native_tsp, build_position_tsp, build_vrp3,
        default_weights, SubtourVariant,
    };
    use crate::instance::VrpConfig;
    use itertools::Itertools;

    fn square() -> RoutingInstance {
        RoutingInstance::regular_polygon(4, 1.0).unwrap()
    }

    #[test]
    fn gps_three_city_encoding_matches_variable_semantics() {
        // 3 cities on a triangle: tour 0 -> 1 -> 2 -> end(3).
        let inst = RoutingInstance::regular_polygon(3, 1.0).unwrap();
        let w = default_weights(&inst, FormulationKind::Gps);
        let out = build_gps_tsp(&inst, &w).unwrap();
        let tour = Tour::new(vec![0, 1, 2, 3]);
        let a = encode_gps(&tour, &out.varmap).unwrap();
        let vm = &out.varmap;
        assert_eq!(vm.value(&a, VarKey::Rel { i: 0, j: 1, r: 1 }), 1);
        assert_eq!(vm.value(&a, VarKey::Rel { i: 1, j: 2, r: 1 }), 1);
        assert_eq!(vm.value(&a, VarKey::Rel { i: 2, j: 3, r: 1 }), 1);
        // 0 precedes 2 with no edge; the mirrored pair carries r = 2.
        assert_eq!(vm.value(&a, VarKey::Rel { i: 0, j: 2, r: 0 }), 1);
        assert_eq!(vm.value(&a, VarKey::Rel { i: 2, j: 0, r: 2 }), 1);
    }

    #[test]
    fn gps_encoding_is_zero_penalty_and_energy_is_length() {
        let inst = square();
        let w = default_weights(&inst, FormulationKind::Gps);
        let out = build_gps_tsp(&inst, &w).unwrap();
        let tour = Tour::new(vec![0, 1, 2, 3, 4]);
        let a = encode_gps(&tour, &out.varmap).unwrap();
        let report = check_constraints(&a, &out).unwrap();
        assert!(report.feasible, "residuals {:?}", report.residuals);
        let e = out.model.energy(&a).unwrap();
        assert!((e - 4.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn gps_decode_rejects_all_zeros() {
        let inst = square();
        let w = default_weights(&inst, FormulationKind::Gps);
        let out = build_gps_tsp(&inst, &w).unwrap();
        let a = Assignment::zeros(out.model.n_vars());
        let d = decode_gps(&a, &out.varmap);
        assert!(!d.is_feasible());
    }

    #[test]
    fn gps_two_successors_is_infeasible_with_degree_residual() {
        let inst = square();
        let w = default_weights(&inst, FormulationKind::Gps);
        let out = build_gps_tsp(&inst, &w).unwrap();
        let tour = Tour::new(vec![0, 1, 2, 3, 4]);
        let mut a = encode_gps(&tour, &out.varmap).unwrap();
        // add a second successor out of node 1
        let extra = out.varmap.index(VarKey::Rel { i: 1, j: 3, r: 1 });
        a.set(extra, 1);
        let d = decode_gps(&a, &out.varmap);
        assert!(!d.is_feasible());
        let report = check_constraints(&a, &out).unwrap();
        assert!(!report.feasible);
        assert!(report.residuals["out_degree"] > 0.0);
    }

    #[test]
    fn round_trip_all_formulations_all_tours() {
        let inst = RoutingInstance::regular_polygon(5, 1.0).unwrap();
        let t = inst.n_nodes();
        for kind in [
            FormulationKind::Gps,
            FormulationKind::Native,
            FormulationKind::Position,
            FormulationKind::Mtz,
        ] {
            let w = default_weights(&inst, kind);
            let out = crate::formulations::build_tsp(kind, &inst, &w).unwrap();
            for perm in (1..t - 1).permutations(t - 2) {
                let tour = Tour::from_interior(&perm, t);
                let a = encode_tour(&tour, &out.varmap).unwrap();
                let back = decode_tour(&a, &out.varmap);
                assert_eq!(back, Decoded::Feasible(tour.clone()), "{kind:?} {perm:?}");
                let report = check_constraints(&a, &out).unwrap();
                assert!(report.feasible, "{kind:?}: {:?}", report.residuals);
                let obj = out.objective_value(&a);
                assert!((obj - tour_length(&tour, &inst)).abs() < 1e-9, "{kind:?}");
            }
        }
    }

    #[test]
    fn native_chain_encoding_decodes() {
        let inst = square();
        let w = default_weights(&inst, FormulationKind::Native);
        let out = build_native_tsp(&inst, &w, SubtourVariant::B).unwrap();
        let tour = Tour::new(vec![0, 2, 1, 3, 4]);
        let a = encode_native(&tour, &out.varmap).unwrap();
        assert_eq!(decode_native(&a, &out.varmap), Decoded::Feasible(tour));
    }

    #[test]
    fn native_variant_a_zero_on_encodings() {
        let inst = square();
        let w = default_weights(&inst, FormulationKind::Native);
        let out = build_native_tsp(&inst, &w, SubtourVariant::A).unwrap();
        let tour = Tour::new(vec![0, 3, 1, 2, 4]);
        let a = encode_native(&tour, &out.varmap).unwrap();
        let report = check_constraints(&a, &out).unwrap();
        assert!(report.feasible, "{:?}", report.residuals);
    }

    #[test]
    fn position_duplicate_city_breaks_onehot() {
        let inst = square();
        let w = default_weights(&inst, FormulationKind::Position);
        let out = build_position_tsp(&inst, &w).unwrap();
        let tour = Tour::new(vec![0, 1, 2, 3, 4]);
        let mut a = encode_position(&tour, &out.varmap).unwrap();
        a.set(out.varmap.index(VarKey::Pos { node: 1, slot: 2 }), 1);
        let report = check_constraints(&a, &out).unwrap();
        assert!(report.residuals["node_onehot"] >= w.onehot - 1e-9);
        assert!(!decode_position(&a, &out.varmap).is_feasible());
    }

    #[test]
    fn mtz_order_bits_follow_positions() {
        let inst = square();
        let w = default_weights(&inst, FormulationKind::Mtz);
        let out = build_mtz_tsp(&inst, &w).unwrap();
        let tour = Tour::new(vec![0, 3, 1, 2, 4]);
        let a = encode_mtz(&tour, &out.varmap).unwrap();
        assert_eq!(mtz_order_value(&a, &out.varmap, 3), 1);
        assert_eq!(mtz_order_value(&a, &out.varmap, 1), 2);
        assert_eq!(mtz_order_value(&a, &out.varmap, 2), 3);
        let report = check_constraints(&a, &out).unwrap();
        assert!(report.feasible, "{:?}", report.residuals);
        assert_eq!(decode_mtz(&a, &out.varmap), Decoded::Feasible(tour));
    }

    #[test]
    fn vrp_idle_vehicle_is_zero_cost_and_feasible() {
        let inst = square();
        let cfg = VrpConfig::new(inst.clone(), 2).unwrap();
        let w = default_weights(&inst, FormulationKind::Vrp3);
        let out = build_vrp3(&cfg, &w).unwrap();
        let t = inst.n_nodes();
        let rs = RouteSet {
            routes: vec![Tour::new(vec![0, 1, 2, 3, 4]), RouteSet::empty_route(t)],
        };
        let a = encode_vrp(&rs, &out.varmap, &inst).unwrap();
        let report = check_constraints(&a, &out).unwrap();
        assert!(report.feasible, "{:?}", report.residuals);
        let d = decode_vrp(&a, &out.varmap, &inst);
        assert_eq!(d, Decoded::Feasible(rs.clone()));
        assert!((tour_length(&rs.routes[1], &inst)).abs() < 1e-12);
    }

    #[test]
    fn vrp_cap_violating_routes_cannot_encode() {
        let inst = square();
        let cfg = VrpConfig::new(inst.clone(), 2).unwrap();
        let w = default_weights(&inst, FormulationKind::Vrp3);
        let out = build_vrp3(&cfg, &w).unwrap();
        // vehicle 2 carries everything: longer than vehicle 1's empty route
        let rs = RouteSet {
            routes: vec![RouteSet::empty_route(5), Tour::new(vec![0, 1, 2, 3, 4])],
        };
        assert_eq!(
            encode_vrp(&rs, &out.varmap, &inst),
            Err(EncodeError::CapViolated { q: 2 })
        );
    }

    #[test]
    fn vrp_shared_city_is_infeasible() {
        let inst = square();
        let cfg = VrpConfig::new(inst.clone(), 2).unwrap();
        let w = default_weights(&inst, FormulationKind::Vrp5);
        let out = crate::formulations::build_vrp5(&cfg, &w).unwrap();
        let rs = RouteSet {
            routes: vec![Tour::new(vec![0, 1, 2, 3, 4]), RouteSet::empty_route(5)],
        };
        let mut a = encode_vrp(&rs, &out.varmap, &inst).unwrap();
        // vehicle 2 also claims city 3 (replacing its idle arc keeps it a walk)
        let vm = &out.varmap;
        a.set(vm.index(VarKey::VrpRel { i: 0, j: 4, r: 1, q: 2 }), 0);
        a.set(vm.index(VarKey::VrpRel { i: 0, j: 3, r: 1, q: 2 }), 1);
        a.set(vm.index(VarKey::VrpRel { i: 3, j: 4, r: 1, q: 2 }), 1);
        let d = decode_vrp(&a, &out.varmap, &inst);
        let v = d.violations().expect("must be infeasible");
        assert!(v.contains_key("city_in") || v.contains_key("city_out"));
    }

    #[test]
    fn energy_decomposes_into_residuals_plus_objective() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let inst = square();
        let w = default_weights(&inst, FormulationKind::Gps);
        let out = build_gps_tsp(&inst, &w).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = Assignment::from_bits(
                (0..out.model.n_vars()).map(|_| rng.gen_range(0..=1u8)).collect(),
            );
            let total = out.model.energy(&a).unwrap();
            let parts: f64 = out.residuals(&a).values().sum();
            assert!((total - parts).abs() < 1e-9);
        }
    }
}
