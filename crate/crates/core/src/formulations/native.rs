//! Time-indexed TSP encoding over `N (N+1)^2` variables.
//!
//! `x[u][v][t] = 1` means the tour traverses arc `(u, v)` at step `t`.
//! Two interchangeable subtour rules exist: variant A forbids returning to a
//! node after leaving it (quadratic across all later steps), variant B forces
//! a departure one step after every arrival (far fewer couplers).

use super::{BuildOutput, FormulationError, Grid, ModelBuilder, PenaltyWeights, OBJECTIVE};
use crate::instance::RoutingInstance;
use crate::varmap::{Dims, FormulationKind, VarKey, VariableMap};

/// Which subtour-elimination rule becomes a penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubtourVariant {
    /// Once a node is left it may never be reached again.
    A,
    /// Every arrival is followed by a departure at the next step.
    #[default]
    B,
}

fn arc(u: usize, v: usize, t: usize) -> VarKey {
    VarKey::Arc { u, v, t }
}

pub fn build_native_tsp(
    instance: &RoutingInstance,
    weights: &PenaltyWeights,
    variant: SubtourVariant,
) -> Result<BuildOutput, FormulationError> {
    weights.validate()?;
    let g = Grid::new(instance);
    let steps = instance.n_cities;
    let mut vm = VariableMap::new(
        FormulationKind::Native,
        Dims {
            n_cities: instance.n_cities,
            n_nodes: g.t,
            time_steps: Some(steps),
            ..Dims::default()
        },
    );
    for u in g.nodes() {
        for v in g.nodes() {
            for t in 0..steps {
                if g.arc_active(u, v) {
                    vm.push(arc(u, v, t));
                } else {
                    vm.push_clamped(arc(u, v, t), 0);
                }
            }
        }
    }

    let mut b = ModelBuilder::new(vm);

    for u in g.exitable() {
        for v in g.enterable() {
            if !g.arc_active(u, v) {
                continue;
            }
            for t in 0..steps {
                b.add_linear(
                    OBJECTIVE,
                    arc(u, v, t),
                    weights.objective_scale * instance.distance(u, v),
                );
            }
        }
    }

    // Leave each exitable node once, over all steps.
    for u in g.exitable() {
        let expr = b.expr(
            g.enterable()
                .filter(|&v| g.arc_active(u, v))
                .flat_map(|v| (0..steps).map(move |t| (arc(u, v, t), 1.0))),
            -1.0,
        );
        b.add_equality("out_degree", &expr, weights.degree)?;
    }
    // Reach each enterable node once.
    for v in g.enterable() {
        let expr = b.expr(
            g.exitable()
                .filter(|&u| g.arc_active(u, v))
                .flat_map(|u| (0..steps).map(move |t| (arc(u, v, t), 1.0))),
            -1.0,
        );
        b.add_equality("in_degree", &expr, weights.degree)?;
    }

    match variant {
        SubtourVariant::A => {
            // Arc out of u at t1 and arc into u at t2 > t1 cannot coexist.
            for u in g.mid_cities() {
                for v in g.enterable() {
                    if !g.arc_active(u, v) {
                        continue;
                    }
                    for w in g.exitable() {
                        if !g.arc_active(w, u) {
                            continue;
                        }
                        for t1 in 0..steps {
                            for t2 in (t1 + 1)..steps {
                                b.add_quadratic(
                                    "no_return",
                                    arc(u, v, t1),
                                    arc(w, u, t2),
                                    weights.chain,
                                );
                            }
                        }
                    }
                }
            }
        }
        SubtourVariant::B => {
            // x[u][v][t] * (1 - sum_w x[v][w][t+1]) for every arc into a city.
            for t in 0..steps.saturating_sub(1) {
                for v in g.mid_cities() {
                    for u in g.exitable() {
                        if !g.arc_active(u, v) {
                            continue;
                        }
                        b.add_linear("chain", arc(u, v, t), weights.chain);
                        for w in g.enterable() {
                            if g.arc_active(v, w) {
                                b.add_quadratic(
                                    "chain",
                                    arc(u, v, t),
                                    arc(v, w, t + 1),
                                    -weights.chain,
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(b.finish())
}
