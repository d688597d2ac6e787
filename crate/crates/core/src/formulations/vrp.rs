//! Min-max vehicle routing encodings derived from the relation-slot TSP.
//!
//! Both variants give every vehicle `q` a relation slot per ordered node
//! pair, couple the "i before j" information into shared precedence bits
//! `a[i][j]`, and cap every other vehicle's route length by vehicle 1's via
//! binary slack, so minimizing vehicle 1's distance minimizes the longest
//! route. The 5-slot form distinguishes whether `q` visits both cities; the
//! reduced form merges those cases into three slots per pair.

use super::{
    add_transitivity, BuildOutput, FormulationError, Grid, ModelBuilder, PenaltyWeights, OBJECTIVE,
};
use crate::instance::VrpConfig;
use crate::qubo::SlackAlloc;
use crate::varmap::{Dims, FormulationKind, VarKey, VariableMap};

fn vrel(i: usize, j: usize, r: u8, q: usize) -> VarKey {
    VarKey::VrpRel { i, j, r, q }
}

fn aux(i: usize, j: usize) -> VarKey {
    VarKey::VrpAux { i, j }
}

/// Slots meaning "i is reached before j" for the given variant.
pub(crate) fn i_first_slots(kind: FormulationKind) -> &'static [u8] {
    match kind {
        FormulationKind::Vrp5 => &[0, 1, 3],
        FormulationKind::Vrp3 => &[0, 1],
        _ => unreachable!("not a vehicle-routing kind"),
    }
}

pub(crate) fn slot_count(kind: FormulationKind) -> u8 {
    match kind {
        FormulationKind::Vrp5 => 5,
        FormulationKind::Vrp3 => 3,
        _ => unreachable!("not a vehicle-routing kind"),
    }
}

pub fn build_vrp5(
    config: &VrpConfig,
    weights: &PenaltyWeights,
) -> Result<BuildOutput, FormulationError> {
    build(FormulationKind::Vrp5, config, weights)
}

pub fn build_vrp3(
    config: &VrpConfig,
    weights: &PenaltyWeights,
) -> Result<BuildOutput, FormulationError> {
    build(FormulationKind::Vrp3, config, weights)
}

fn build(
    kind: FormulationKind,
    config: &VrpConfig,
    weights: &PenaltyWeights,
) -> Result<BuildOutput, FormulationError> {
    weights.validate()?;
    let instance = &config.instance;
    let fleet = config.n_vehicles;
    let g = Grid::new(instance);
    let slots = slot_count(kind);
    let i_first = i_first_slots(kind);

    let mut vm = VariableMap::new(
        kind,
        Dims {
            n_cities: instance.n_cities,
            n_nodes: g.t,
            n_vehicles: Some(fleet),
            slots: Some(slots),
            ..Dims::default()
        },
    );
    for q in 1..=fleet {
        for i in g.nodes() {
            for j in g.nodes() {
                for r in 0..slots {
                    if i == j || (r == 1 && !g.arc_active(i, j)) {
                        vm.push_clamped(vrel(i, j, r, q), 0);
                    } else {
                        vm.push(vrel(i, j, r, q));
                    }
                }
            }
        }
    }
    for i in g.mid_cities() {
        for j in g.mid_cities() {
            if i != j {
                vm.push(aux(i, j));
            }
        }
    }

    let mut b = ModelBuilder::new(vm);

    // Objective: vehicle 1's route length.
    for i in g.exitable() {
        for j in g.enterable() {
            if g.arc_active(i, j) {
                b.add_linear(
                    OBJECTIVE,
                    vrel(i, j, 1, 1),
                    weights.objective_scale * instance.distance(i, j),
                );
            }
        }
    }

    // One relation slot per ordered pair and vehicle.
    for q in 1..=fleet {
        for i in g.nodes() {
            for j in g.nodes() {
                if i == j {
                    continue;
                }
                let expr = b.expr((0..slots).map(|r| (vrel(i, j, r, q), 1.0)), -1.0);
                b.add_equality("slot_onehot", &expr, weights.onehot)?;
            }
        }
    }

    // Every vehicle leaves the start once and reaches the end once; the
    // direct start-to-end arc is the idle route.
    for q in 1..=fleet {
        let expr = b.expr(
            g.enterable().filter(|&j| g.arc_active(0, j)).map(|j| (vrel(0, j, 1, q), 1.0)),
            -1.0,
        );
        b.add_equality("start_degree", &expr, weights.degree)?;
        let expr = b.expr(
            g.exitable()
                .filter(|&i| g.arc_active(i, g.end()))
                .map(|i| (vrel(i, g.end(), 1, q), 1.0)),
            -1.0,
        );
        b.add_equality("end_degree", &expr, weights.degree)?;
    }

    // Each city is left once and reached once, across the whole fleet.
    for city in g.mid_cities() {
        let expr = b.expr(
            (1..=fleet).flat_map(|q| {
                g.enterable()
                    .filter(move |&j| g.arc_active(city, j))
                    .map(move |j| (vrel(city, j, 1, q), 1.0))
            }),
            -1.0,
        );
        b.add_equality("city_out", &expr, weights.degree)?;
        let expr = b.expr(
            (1..=fleet).flat_map(|q| {
                g.exitable()
                    .filter(move |&i| g.arc_active(i, city))
                    .map(move |i| (vrel(i, city, 1, q), 1.0))
            }),
            -1.0,
        );
        b.add_equality("city_in", &expr, weights.degree)?;
    }

    // Precedence is fleet-wide: the i-first slots of every vehicle agree
    // with the shared bit, sum_q [i first for q] = Q a[i][j].
    for i in g.mid_cities() {
        for j in g.mid_cities() {
            if i == j {
                continue;
            }
            let mut terms: Vec<(VarKey, f64)> = Vec::new();
            for q in 1..=fleet {
                for &r in i_first {
                    terms.push((vrel(i, j, r, q), 1.0));
                }
            }
            terms.push((aux(i, j), -(fleet as f64)));
            let expr = b.expr(terms, 0.0);
            b.add_equality("coupling", &expr, weights.coupling)?;
        }
    }

    // A vehicle that reaches a city must leave it.
    for q in 1..=fleet {
        for j in g.mid_cities() {
            for i in g.exitable() {
                if !g.arc_active(i, j) {
                    continue;
                }
                b.add_linear("chain", vrel(i, j, 1, q), weights.chain);
                for k in g.enterable() {
                    if g.arc_active(j, k) {
                        b.add_quadratic(
                            "chain",
                            vrel(i, j, 1, q),
                            vrel(j, k, 1, q),
                            -weights.chain,
                        );
                    }
                }
            }
        }
    }

    // Mirrored pairs carry opposite precedence, per vehicle.
    for q in 1..=fleet {
        for i in g.exitable() {
            for j in (i + 1)..g.t - 1 {
                let mut terms: Vec<(VarKey, f64)> = Vec::new();
                for &r in i_first {
                    terms.push((vrel(i, j, r, q), 1.0));
                    terms.push((vrel(j, i, r, q), 1.0));
                }
                let expr = b.expr(terms, -1.0);
                b.add_equality("antisymmetry", &expr, weights.antisymmetry)?;
            }
        }
    }

    // Precedence transitivity over the shared bits.
    for i in g.mid_cities() {
        for j in g.mid_cities() {
            for k in g.mid_cities() {
                if i == j || i == k || j == k {
                    continue;
                }
                add_transitivity(
                    &mut b,
                    "transitivity",
                    aux(i, j),
                    aux(j, k),
                    aux(i, k),
                    weights.transitivity,
                )?;
            }
        }
    }

    // Route caps: every other vehicle travels at most vehicle 1's distance,
    // in scaled integer units so the slack expansion is exact.
    let scaled = instance.scaled_dist();
    let gap = instance.route_length_bound_scaled();
    for q in 2..=fleet {
        let mut terms: Vec<(VarKey, f64)> = Vec::new();
        for i in g.exitable() {
            for j in g.enterable() {
                if g.arc_active(i, j) && scaled[i][j] != 0 {
                    terms.push((vrel(i, j, 1, q), scaled[i][j] as f64));
                    terms.push((vrel(i, j, 1, 1), -(scaled[i][j] as f64)));
                }
            }
        }
        let expr = b.expr(terms, 0.0);
        b.add_inequality(
            "route_cap",
            &expr,
            0,
            weights.route_cap,
            SlackAlloc::MaxGap(gap),
            |bit| VarKey::VrpSlack { q, bit },
        )?;
    }

    Ok(b.finish())
}
