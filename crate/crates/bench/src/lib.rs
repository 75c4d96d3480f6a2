//! Shared fixtures for the benchmark targets.

use gridcert_core::{BusModel, Controller, Line, NetworkModel};

/// The tuned lead-lag bus used throughout the examples: comfortable
/// stability margins behind a 0.5 s measurement delay.
#[must_use]
pub fn tuned_bus() -> BusModel {
    BusModel::new(
        1.0,
        0.1,
        0.5,
        Controller::IDroop {
            k: 0.65,
            k_nu: 1.3,
            k_delta: 8.0,
        },
    )
    .expect("valid parameters")
}

/// Two tuned buses joined by a unit-susceptance line.
#[must_use]
pub fn tuned_pair() -> NetworkModel {
    NetworkModel::new(
        vec![tuned_bus(), tuned_bus()],
        vec![Line::new(0, 1, 1.0).expect("valid line")],
    )
    .expect("valid network")
}

/// A delay-free ring of `n` droop buses, the workload for the spectral
/// oracle's eigenvalue solve.
#[must_use]
pub fn droop_ring(n: usize) -> NetworkModel {
    let bus = BusModel::new(1.0, 0.1, 0.0, Controller::Droop { k: 1.0 }).expect("valid bus");
    let buses = vec![bus; n];
    let mut lines: Vec<Line> = (1..n)
        .map(|j| Line::new(j - 1, j, 1.0).expect("valid line"))
        .collect();
    lines.push(Line::new(n - 1, 0, 1.0).expect("valid line"));
    NetworkModel::new(buses, lines).expect("valid network")
}

/// The delay-free two-bus droop benchmark with its closed-form decay rate.
#[must_use]
pub fn droop_pair() -> NetworkModel {
    let bus = BusModel::new(1.0, 0.1, 0.0, Controller::Droop { k: 1.0 }).expect("valid bus");
    NetworkModel::new(
        vec![bus, bus],
        vec![Line::new(0, 1, 1.0).expect("valid line")],
    )
    .expect("valid network")
}
