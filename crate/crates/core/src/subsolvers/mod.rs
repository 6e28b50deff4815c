//! Block solvers of the alternating scheme: offloading decisions, UAV CPU
//! shares, charging powers and device-to-position connections. Each solves
//! its block with the other three held fixed.

mod charging;
mod connection;
mod cpu;
mod offload;

pub use charging::{allocate_charging, power_multiplier};
pub use connection::{connection_cost, manage_connections, ColumnSums, ConnectionOutcome, DualState};
pub use cpu::{allocate_uav_cpu, cpu_multiplier};
pub use offload::{decide_offloading, mode_costs, repair_offloading, ModeCosts};

use crate::energy::{total_latency, Allocation, Problem};
use crate::error::Result;

/// Splits `cap` in proportion to `weights`, the budget-tight minimizer of
/// `Σ wᵢ² / xᵢ` subject to `Σ xᵢ ≤ cap`. Zero weights receive zero.
pub fn proportional_shares(cap: f64, weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    if total > 0.0 {
        weights.iter().map(|w| cap * (w / total)).collect()
    } else {
        vec![0.0; weights.len()]
    }
}

/// Allocation for fixed binaries with both continuous blocks at their
/// closed-form optimum.
pub fn closed_form_allocation(p: &Problem<'_>, assign: &[usize], offload: &[bool]) -> Allocation {
    let mut alloc = Allocation::from_assignment(assign, p.m(), offload.to_vec());
    alloc.cpu_share_hz = allocate_uav_cpu(p, &alloc);
    alloc.charge_w = allocate_charging(p, &alloc);
    alloc
}

/// Total latency of the closed-form allocation for fixed binaries.
pub fn binary_objective(p: &Problem<'_>, assign: &[usize], offload: &[bool]) -> Result<f64> {
    Ok(total_latency(p, &closed_form_allocation(p, assign, offload))?.total_s)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::model::{Device, HoverPosition, PhysicsConfig, Point, Scenario, UavBudget};

    pub fn device(id: usize, x: f64, y: f64, bits: f64, cycles: f64) -> Device {
        Device {
            id,
            position: Point::new(x, y),
            task_bits: bits,
            task_cycles: cycles,
            local_freq_hz: 1e6,
            uplink_power_w: 2.83e-3,
            capacitance_k: 1e-28,
        }
    }

    pub fn scenario(devices: Vec<Device>, positions: &[(f64, f64)]) -> Scenario {
        Scenario {
            devices,
            positions: positions
                .iter()
                .enumerate()
                .map(|(id, &(x, y))| HoverPosition {
                    id,
                    position: Point::new(x, y),
                })
                .collect(),
            physics: PhysicsConfig::default(),
            budget: UavBudget::default(),
        }
    }
}
