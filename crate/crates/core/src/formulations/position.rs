//! Position-based TSP encoding over `(N+1)^2` variables.
//!
//! `x[i][t] = 1` places node `i` at tour position `t`; the distance objective
//! is the quadratic form `sum d_ij x[i][t] x[j][t+1]`. The depots are pinned
//! to the first and last positions, otherwise a cheaper open path (rather
//! than the closed tour through the depot) would minimize the objective.
//! Assignment one-hots keep each interior node at exactly one interior slot
//! and vice versa.

use super::{BuildOutput, FormulationError, Grid, ModelBuilder, PenaltyWeights, OBJECTIVE};
use crate::instance::RoutingInstance;
use crate::varmap::{Dims, FormulationKind, VarKey, VariableMap};

fn pos(node: usize, slot: usize) -> VarKey {
    VarKey::Pos { node, slot }
}

pub fn build_position_tsp(
    instance: &RoutingInstance,
    weights: &PenaltyWeights,
) -> Result<BuildOutput, FormulationError> {
    weights.validate()?;
    let g = Grid::new(instance);
    let t = g.t;
    let interior = g.mid_cities();
    let mut vm = VariableMap::new(
        FormulationKind::Position,
        Dims {
            n_cities: instance.n_cities,
            n_nodes: t,
            time_steps: Some(t),
            ..Dims::default()
        },
    );
    for node in 0..t {
        for slot in 0..t {
            if interior.contains(&node) && interior.contains(&slot) {
                vm.push(pos(node, slot));
            } else {
                let fixed = (node == 0 && slot == 0) || (node == t - 1 && slot == t - 1);
                vm.push_clamped(pos(node, slot), u8::from(fixed));
            }
        }
    }

    let mut b = ModelBuilder::new(vm);
    let scale = weights.objective_scale;

    // Boundary legs absorb the pinned depot bits as linear terms.
    for j in interior.clone() {
        b.add_linear(OBJECTIVE, pos(j, 1), scale * instance.distance(0, j));
        b.add_linear(OBJECTIVE, pos(j, t - 2), scale * instance.distance(j, t - 1));
    }
    for slot in interior.clone() {
        if slot + 1 >= t - 1 {
            break;
        }
        for i in interior.clone() {
            for j in interior.clone() {
                if i != j {
                    b.add_quadratic(
                        OBJECTIVE,
                        pos(i, slot),
                        pos(j, slot + 1),
                        scale * instance.distance(i, j),
                    );
                }
            }
        }
    }

    for node in interior.clone() {
        let expr = b.expr(interior.clone().map(|slot| (pos(node, slot), 1.0)), -1.0);
        b.add_equality("node_onehot", &expr, weights.onehot)?;
    }
    for slot in interior.clone() {
        let expr = b.expr(interior.clone().map(|node| (pos(node, slot), 1.0)), -1.0);
        b.add_equality("slot_onehot", &expr, weights.onehot)?;
    }

    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::default_weights;

    #[test]
    fn variable_count_is_node_grid() {
        let inst = RoutingInstance::regular_polygon(4, 1.0).unwrap();
        let w = default_weights(&inst, FormulationKind::Position);
        let out = build_position_tsp(&inst, &w).unwrap();
        assert_eq!(out.stats().n_vars, 25);
        // 9 interior bits are free, the rest are pinned by convention
        assert_eq!(out.varmap.n_clamped(), 16);
    }

    #[test]
    fn depot_bits_are_pinned_to_one() {
        let inst = RoutingInstance::regular_polygon(4, 1.0).unwrap();
        let w = default_weights(&inst, FormulationKind::Position);
        let out = build_position_tsp(&inst, &w).unwrap();
        let vm = &out.varmap;
        let bits = vm.blank_bits();
        assert_eq!(bits[vm.index(pos(0, 0))], 1);
        assert_eq!(bits[vm.index(pos(4, 4))], 1);
        assert_eq!(bits[vm.index(pos(0, 1))], 0);
    }
}
