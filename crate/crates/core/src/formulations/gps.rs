//! Relation-slot TSP encoding over `3 (N+1)^2` variables.
//!
//! Every ordered node pair `(i, j)` carries three slots: `r = 0` (edge
//! absent, `i` visited first), `r = 1` (edge `(i, j)` on the tour), and
//! `r = 2` (edge absent, `j` visited first). The distance objective is
//! linear in the `r = 1` slots; subtours are excluded by an order
//! transitivity penalty over the `r = 2` slots of non-depot cities.

use super::{
    add_transitivity, BuildOutput, FormulationError, Grid, ModelBuilder, PenaltyWeights, OBJECTIVE,
};
use crate::instance::RoutingInstance;
use crate::varmap::{Dims, FormulationKind, VarKey, VariableMap};

fn rel(i: usize, j: usize, r: u8) -> VarKey {
    VarKey::Rel { i, j, r }
}

pub fn build_gps_tsp(
    instance: &RoutingInstance,
    weights: &PenaltyWeights,
) -> Result<BuildOutput, FormulationError> {
    weights.validate()?;
    let g = Grid::new(instance);
    let mut vm = VariableMap::new(
        FormulationKind::Gps,
        Dims {
            n_cities: instance.n_cities,
            n_nodes: g.t,
            slots: Some(3),
            ..Dims::default()
        },
    );
    for i in g.nodes() {
        for j in g.nodes() {
            for r in 0..3u8 {
                if i == j || (r == 1 && !g.arc_active(i, j)) {
                    vm.push_clamped(rel(i, j, r), 0);
                } else {
                    vm.push(rel(i, j, r));
                }
            }
        }
    }

    let mut b = ModelBuilder::new(vm);

    for i in g.exitable() {
        for j in g.enterable() {
            if g.arc_active(i, j) {
                b.add_linear(
                    OBJECTIVE,
                    rel(i, j, 1),
                    weights.objective_scale * instance.distance(i, j),
                );
            }
        }
    }

    // Exactly one relation per ordered pair.
    for i in g.nodes() {
        for j in g.nodes() {
            if i == j {
                continue;
            }
            let expr = b.expr((0..3u8).map(|r| (rel(i, j, r), 1.0)), -1.0);
            b.add_equality("slot_onehot", &expr, weights.onehot)?;
        }
    }

    // Each exitable node is left once, each enterable node reached once.
    for i in g.exitable() {
        let expr = b.expr(
            g.enterable().filter(|&j| g.arc_active(i, j)).map(|j| (rel(i, j, 1), 1.0)),
            -1.0,
        );
        b.add_equality("out_degree", &expr, weights.degree)?;
    }
    for j in g.enterable() {
        let expr = b.expr(
            g.exitable().filter(|&i| g.arc_active(i, j)).map(|i| (rel(i, j, 1), 1.0)),
            -1.0,
        );
        b.add_equality("in_degree", &expr, weights.degree)?;
    }

    // Mirrored pairs carry opposite orders.
    for i in g.nodes() {
        for j in (i + 1)..g.t {
            let expr = b.expr([(rel(i, j, 2), 1.0), (rel(j, i, 2), 1.0)], -1.0);
            b.add_equality("antisymmetry", &expr, weights.antisymmetry)?;
        }
    }

    // Order transitivity over non-depot cities; x[j][i][2] reads "i before j".
    for i in g.mid_cities() {
        for j in g.mid_cities() {
            for k in g.mid_cities() {
                if i == j || i == k || j == k {
                    continue;
                }
                add_transitivity(
                    &mut b,
                    "transitivity",
                    rel(j, i, 2),
                    rel(k, j, 2),
                    rel(k, i, 2),
                    weights.transitivity,
                )?;
            }
        }
    }

    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulations::default_weights;

    fn build(n: usize) -> BuildOutput {
        let inst = RoutingInstance::regular_polygon(n, 1.0).unwrap();
        let w = default_weights(&inst, FormulationKind::Gps);
        build_gps_tsp(&inst, &w).unwrap()
    }

    #[test]
    fn variable_counts_match_published_tables() {
        for (n, want) in [(4, 75), (6, 147), (8, 243), (10, 363), (12, 507)] {
            let out = build(n);
            assert_eq!(out.stats().n_vars, want, "N = {n}");
            assert_eq!(out.stats().n_vars, 3 * (n + 1) * (n + 1));
        }
    }

    #[test]
    fn diagonal_and_depot_arcs_are_clamped() {
        let out = build(4);
        let vm = &out.varmap;
        for r in 0..3u8 {
            assert!(vm.is_clamped(vm.index(rel(2, 2, r))));
        }
        assert!(vm.is_clamped(vm.index(rel(3, 0, 1)))); // into start
        assert!(vm.is_clamped(vm.index(rel(4, 2, 1)))); // out of end
        assert!(!vm.is_clamped(vm.index(rel(3, 0, 2))));
        assert!(!vm.is_clamped(vm.index(rel(0, 3, 1))));
    }

    #[test]
    fn clamped_slots_carry_no_terms() {
        let out = build(4);
        let vm = &out.varmap;
        for (&flat, _) in vm.clamped() {
            assert_eq!(out.model.linear_coeff(flat), 0.0);
            for (&(i, j), &c) in out.model.quadratic() {
                if c != 0.0 {
                    assert!(i != flat && j != flat, "clamped {flat} in pair ({i},{j})");
                }
            }
        }
    }
}
