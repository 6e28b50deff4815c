//! Energy, time and latency of the two working patterns.
//!
//! A device first harvests energy from the UAV's RF beam, then either runs
//! its task locally or uploads it and lets the UAV compute it. Harvesting
//! time is always taken at its minimum, where harvested and consumed energy
//! balance exactly: `T_eh = A / p` with the energy-demand coefficient
//! `A = consumed energy / (η₀ · g)`.

use serde::{Deserialize, Serialize};

use crate::channel::{build_channel_table, ChannelTable};
use crate::error::{Constraint, Error, Result};
use crate::model::Scenario;

/// Relative slack allowed on the per-position UAV budgets.
pub const BUDGET_REL_SLACK: f64 = 1e-9;

pub fn local_exec_time(cycles: f64, local_freq_hz: f64) -> f64 {
    cycles / local_freq_hz
}

/// `k · F · f^(v-1)`, i.e. `k F f²` for the cubic CPU power model.
pub fn local_exec_energy(k: f64, cycles: f64, local_freq_hz: f64, exponent: f64) -> f64 {
    k * cycles * local_freq_hz.powf(exponent - 1.0)
}

pub fn tx_time(bits: f64, rate_bps: f64) -> f64 {
    bits / rate_bps
}

pub fn tx_energy(uplink_power_w: f64, tx_time_s: f64) -> f64 {
    uplink_power_w * tx_time_s
}

pub fn offload_compute_time(cycles: f64, share_hz: f64) -> Result<f64> {
    if !(share_hz > 0.0) {
        return Err(Error::NonPositive {
            quantity: "UAV CPU share",
            value: share_hz,
        });
    }
    Ok(cycles / share_hz)
}

/// Energy-demand coefficient `A`: the energy the device must harvest,
/// divided by `η₀ g`. `rho` selects between the local-compute energy
/// (`rho = 0`) and the uplink energy (`rho = 1`).
pub fn energy_demand_coeff(rho: f64, local_energy_j: f64, tx_energy_j: f64, eta0: f64, gain: f64) -> f64 {
    ((1.0 - rho) * local_energy_j + rho * tx_energy_j) / (eta0 * gain)
}

/// Minimum harvesting time meeting the energy demand with equality.
pub fn harvest_time(demand: f64, charge_w: f64) -> Result<f64> {
    if demand == 0.0 {
        return Ok(0.0);
    }
    if !(charge_w > 0.0) {
        return Err(Error::NonPositive {
            quantity: "charging power",
            value: charge_w,
        });
    }
    Ok(demand / charge_w)
}

/// A scenario together with its channel table and the per-pair quantities
/// every solver needs: transmit time and the energy-demand coefficient of
/// both working patterns.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub scenario: &'a Scenario,
    pub table: ChannelTable,
    pub local_time: Vec<f64>,
    pub tx_time: Vec<Vec<f64>>,
    pub demand_local: Vec<Vec<f64>>,
    pub demand_offload: Vec<Vec<f64>>,
}

impl<'a> Problem<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        scenario.validate()?;
        let table = build_channel_table(scenario)?;
        Ok(Self::with_table(scenario, table))
    }

    pub fn with_table(scenario: &'a Scenario, table: ChannelTable) -> Self {
        let phys = &scenario.physics;
        let (n, m) = (scenario.n(), scenario.m());
        let mut tx = vec![vec![0.0; m]; n];
        let mut dl = vec![vec![0.0; m]; n];
        let mut doff = vec![vec![0.0; m]; n];
        let mut local_time = Vec::with_capacity(n);
        for (i, d) in scenario.devices.iter().enumerate() {
            local_time.push(local_exec_time(d.task_cycles, d.local_freq_hz));
            let e_local = local_exec_energy(d.capacitance_k, d.task_cycles, d.local_freq_hz, phys.cpu_exponent);
            for j in 0..m {
                let t = tx_time(d.task_bits, table.rate_bps[i][j]);
                let e_tx = tx_energy(d.uplink_power_w, t);
                let g = table.gain[i][j];
                tx[i][j] = t;
                dl[i][j] = energy_demand_coeff(0.0, e_local, e_tx, phys.eh_efficiency, g);
                doff[i][j] = energy_demand_coeff(1.0, e_local, e_tx, phys.eh_efficiency, g);
            }
        }
        Problem {
            scenario,
            table,
            local_time,
            tx_time: tx,
            demand_local: dl,
            demand_offload: doff,
        }
    }

    pub fn n(&self) -> usize {
        self.scenario.n()
    }

    pub fn m(&self) -> usize {
        self.scenario.m()
    }

    pub fn cycles(&self, i: usize) -> f64 {
        self.scenario.devices[i].task_cycles
    }

    pub fn demand(&self, i: usize, j: usize, offload: bool) -> f64 {
        if offload {
            self.demand_offload[i][j]
        } else {
            self.demand_local[i][j]
        }
    }

    /// Energy the device consumes in its chosen mode, joules.
    pub fn consumed_energy(&self, i: usize, j: usize, offload: bool) -> f64 {
        let d = &self.scenario.devices[i];
        if offload {
            tx_energy(d.uplink_power_w, self.tx_time[i][j])
        } else {
            local_exec_energy(d.capacitance_k, d.task_cycles, d.local_freq_hz, self.scenario.physics.cpu_exponent)
        }
    }
}

/// One candidate solution. Matrices are indexed `[device][position]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub connect: Vec<Vec<bool>>,
    pub offload: Vec<bool>,
    pub cpu_share_hz: Vec<Vec<f64>>,
    pub charge_w: Vec<Vec<f64>>,
}

impl Allocation {
    /// Connection matrix from a device → position map; all shares zero.
    pub fn from_assignment(assign: &[usize], m: usize, offload: Vec<bool>) -> Self {
        let n = assign.len();
        let mut connect = vec![vec![false; m]; n];
        for (i, &j) in assign.iter().enumerate() {
            connect[i][j] = true;
        }
        Allocation {
            connect,
            offload,
            cpu_share_hz: vec![vec![0.0; m]; n],
            charge_w: vec![vec![0.0; m]; n],
        }
    }

    pub fn n(&self) -> usize {
        self.connect.len()
    }

    pub fn m(&self) -> usize {
        self.connect.first().map_or(0, Vec::len)
    }

    /// The single connected position of device `i`, if it has exactly one.
    pub fn position_of(&self, i: usize) -> Option<usize> {
        let mut it = self.connect[i].iter().enumerate().filter(|(_, &c)| c).map(|(j, _)| j);
        match (it.next(), it.next()) {
            (Some(j), None) => Some(j),
            _ => None,
        }
    }

    pub fn assignment(&self) -> Result<Vec<usize>> {
        (0..self.n())
            .map(|i| {
                self.position_of(i).ok_or(Error::Infeasible {
                    device: Some(i),
                    position: self.connect[i].iter().position(|&c| c).unwrap_or(0),
                    constraint: Constraint::SingleConnection,
                })
            })
            .collect()
    }

    pub fn cpu_used(&self, j: usize) -> f64 {
        (0..self.n())
            .filter(|&i| self.connect[i][j] && self.offload[i])
            .map(|i| self.cpu_share_hz[i][j])
            .sum()
    }

    pub fn power_used(&self, j: usize) -> f64 {
        (0..self.n()).filter(|&i| self.connect[i][j]).map(|i| self.charge_w[i][j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceLatency {
    pub position: usize,
    pub offload: bool,
    pub eh_s: f64,
    pub local_s: f64,
    pub tx_s: f64,
    pub offload_compute_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub devices: Vec<DeviceLatency>,
    pub total_s: f64,
}

/// Service latency of one device at its connected position.
pub(crate) fn device_latency(p: &Problem<'_>, alloc: &Allocation, i: usize, j: usize) -> Result<DeviceLatency> {
    let offload = alloc.offload[i];
    let demand = p.demand(i, j, offload);
    let eh_s = harvest_time(demand, alloc.charge_w[i][j]).map_err(|_| Error::Infeasible {
        device: Some(i),
        position: j,
        constraint: Constraint::ChargingPower,
    })?;
    let (local_s, tx_s, offload_compute_s) = if offload {
        let t_o = offload_compute_time(p.cycles(i), alloc.cpu_share_hz[i][j]).map_err(|_| Error::Infeasible {
            device: Some(i),
            position: j,
            constraint: Constraint::CpuShare,
        })?;
        (0.0, p.tx_time[i][j], t_o)
    } else {
        (p.local_time[i], 0.0, 0.0)
    };
    Ok(DeviceLatency {
        position: j,
        offload,
        eh_s,
        local_s,
        tx_s,
        offload_compute_s,
        total_s: eh_s + local_s + tx_s + offload_compute_s,
    })
}

/// Checks the per-position CPU and charging budgets.
pub(crate) fn check_budgets(p: &Problem<'_>, alloc: &Allocation) -> Result<()> {
    let b = &p.scenario.budget;
    for j in 0..alloc.m() {
        if alloc.cpu_used(j) > b.cpu_max_hz * (1.0 + BUDGET_REL_SLACK) {
            return Err(Error::Infeasible {
                device: None,
                position: j,
                constraint: Constraint::CpuBudget,
            });
        }
        if alloc.power_used(j) > b.power_max_w * (1.0 + BUDGET_REL_SLACK) {
            return Err(Error::Infeasible {
                device: None,
                position: j,
                constraint: Constraint::PowerBudget,
            });
        }
    }
    Ok(())
}

/// Total service latency of an allocation with harvesting at its minimum.
pub fn total_latency(p: &Problem<'_>, alloc: &Allocation) -> Result<LatencyBreakdown> {
    let assign = alloc.assignment()?;
    check_budgets(p, alloc)?;
    let devices = assign
        .iter()
        .enumerate()
        .map(|(i, &j)| device_latency(p, alloc, i, j))
        .collect::<Result<Vec<_>>>()?;
    let total_s = devices.iter().map(|d| d.total_s).sum();
    Ok(LatencyBreakdown { devices, total_s })
}
