//! Edge-plus-order TSP encoding with binary visit-order variables.
//!
//! Edge bits `x[i][j]` carry the tour and the degree constraints; each
//! non-depot city gets a visit order `u_i` in `ceil(log2 T)` bits. The order
//! inequality `u_i - u_j + T x[i][j] <= T - 1`, applied to every existing
//! arc pair through slack bits, makes subtours order-contradictory. Depot
//! orders are the constants `0` and `T - 1`.

use super::{BuildOutput, FormulationError, Grid, ModelBuilder, PenaltyWeights, OBJECTIVE};
use crate::instance::RoutingInstance;
use crate::qubo::SlackAlloc;
use crate::varmap::{Dims, FormulationKind, VarKey, VariableMap};

fn edge(i: usize, j: usize) -> VarKey {
    VarKey::Edge { i, j }
}

/// Bits needed for order values `0..T-1`.
pub(crate) fn order_bits(t: usize) -> u8 {
    usize::BITS.saturating_sub((t - 1).leading_zeros()) as u8
}

pub fn build_mtz_tsp(
    instance: &RoutingInstance,
    weights: &PenaltyWeights,
) -> Result<BuildOutput, FormulationError> {
    weights.validate()?;
    let g = Grid::new(instance);
    let t = g.t;
    let bits = order_bits(t);
    let mut vm = VariableMap::new(
        FormulationKind::Mtz,
        Dims {
            n_cities: instance.n_cities,
            n_nodes: t,
            order_bits: Some(bits),
            ..Dims::default()
        },
    );
    for i in g.nodes() {
        for j in g.nodes() {
            if g.arc_active(i, j) {
                vm.push(edge(i, j));
            } else {
                vm.push_clamped(edge(i, j), 0);
            }
        }
    }
    for node in g.mid_cities() {
        for bit in 0..bits {
            vm.push(VarKey::OrderBit { node, bit });
        }
    }

    let mut b = ModelBuilder::new(vm);

    for i in g.exitable() {
        for j in g.enterable() {
            if g.arc_active(i, j) {
                b.add_linear(OBJECTIVE, edge(i, j), weights.objective_scale * instance.distance(i, j));
            }
        }
    }

    for i in g.exitable() {
        let expr = b.expr(
            g.enterable().filter(|&j| g.arc_active(i, j)).map(|j| (edge(i, j), 1.0)),
            -1.0,
        );
        b.add_equality("out_degree", &expr, weights.degree)?;
    }
    for j in g.enterable() {
        let expr = b.expr(
            g.exitable().filter(|&i| g.arc_active(i, j)).map(|i| (edge(i, j), 1.0)),
            -1.0,
        );
        b.add_equality("in_degree", &expr, weights.degree)?;
    }

    // u_i - u_j + T x[i][j] <= T - 1 for every arc pair, with depot orders
    // fixed at 0 and T - 1.
    let u_terms = |node: usize| -> (Vec<(VarKey, f64)>, f64) {
        if node == g.start() {
            (vec![], 0.0)
        } else if node == g.end() {
            (vec![], (t - 1) as f64)
        } else {
            (
                (0..bits)
                    .map(|bit| (VarKey::OrderBit { node, bit }, (1u64 << bit) as f64))
                    .collect(),
                0.0,
            )
        }
    };
    for i in g.exitable() {
        for j in g.enterable() {
            if !g.arc_active(i, j) {
                continue;
            }
            let (ui, ci) = u_terms(i);
            let (uj, cj) = u_terms(j);
            let mut terms: Vec<(VarKey, f64)> = vec![(edge(i, j), t as f64)];
            terms.extend(ui);
            terms.extend(uj.into_iter().map(|(k, c)| (k, -c)));
            let expr = b.expr(terms, ci - cj);
            b.add_inequality(
                "order",
                &expr,
                (t - 1) as i64,
                weights.order,
                SlackAlloc::Auto,
                |bit| VarKey::OrderSlack { i, j, bit },
            )?;
        }
    }

    Ok(b.finish())
}
