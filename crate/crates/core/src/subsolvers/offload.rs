//! Offloading decisions for fixed connections, CPU shares and charging powers.
//!
//! Each device compares its service latency in the two working patterns and
//! offloads when local execution is no faster. A device's current pattern is
//! priced with the resources it actually holds. The other pattern is priced
//! with the closed-form share it would receive at its position if it
//! switched, the others' holdings unchanged. The CPU budget is then
//! repaired greedily: while a position is over budget, the offloader there
//! that gains least from offloading falls back to local execution.

use crate::energy::{harvest_time, Allocation, Problem, BUDGET_REL_SLACK};
use crate::error::{Constraint, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModeCosts {
    /// Local-execution latency per device.
    pub h1: Vec<f64>,
    /// Offloading latency per device.
    pub h2: Vec<f64>,
    /// UAV CPU share each device would hold when offloading.
    pub offload_share_hz: Vec<f64>,
}

pub(crate) fn offload_rule(h1: f64, h2: f64) -> bool {
    h1 >= h2
}

pub fn mode_costs(p: &Problem<'_>, alloc: &Allocation) -> Result<ModeCosts> {
    let assign = alloc.assignment()?;
    let (n, m) = (p.n(), p.m());
    let budget = &p.scenario.budget;

    let mut sqrt_cycles = vec![0.0; m];
    let mut sqrt_demand = vec![0.0; m];
    for (i, &j) in assign.iter().enumerate() {
        if alloc.offload[i] && alloc.cpu_share_hz[i][j] > 0.0 {
            sqrt_cycles[j] += p.cycles(i).sqrt();
        }
        sqrt_demand[j] += p.demand(i, j, alloc.offload[i]).sqrt();
    }

    let mut h1 = Vec::with_capacity(n);
    let mut h2 = Vec::with_capacity(n);
    let mut shares = Vec::with_capacity(n);
    for (i, &j) in assign.iter().enumerate() {
        let offloading = alloc.offload[i];
        let held_share = alloc.cpu_share_hz[i][j];
        let f_off = if offloading && held_share > 0.0 {
            held_share
        } else {
            let w = p.cycles(i).sqrt();
            budget.cpu_max_hz * (w / (sqrt_cycles[j] + w))
        };

        let a_cur = p.demand(i, j, offloading);
        let a_alt = p.demand(i, j, !offloading);
        let p_cur = alloc.charge_w[i][j];
        let others = (sqrt_demand[j] - a_cur.sqrt()).max(0.0);
        let p_alt = budget.power_max_w * (a_alt.sqrt() / (others + a_alt.sqrt()));
        let (p_local, p_off) = if offloading { (p_alt, p_cur) } else { (p_cur, p_alt) };
        let infeasible = |_| Error::Infeasible {
            device: Some(i),
            position: j,
            constraint: Constraint::ChargingPower,
        };
        let eh_local = harvest_time(p.demand_local[i][j], p_local).map_err(infeasible)?;
        let eh_off = harvest_time(p.demand_offload[i][j], p_off).map_err(infeasible)?;

        h1.push(eh_local + p.local_time[i]);
        h2.push(eh_off + p.cycles(i) / f_off + p.tx_time[i][j]);
        shares.push(f_off);
    }
    Ok(ModeCosts {
        h1,
        h2,
        offload_share_hz: shares,
    })
}

/// Flips offloaders to local until every position's CPU use fits the budget.
fn repair(assign: &[usize], costs: &ModeCosts, cap: f64, rho: &mut [bool]) {
    let m = assign.iter().copied().max().map_or(0, |j| j + 1);
    for j in 0..m {
        loop {
            let members = || (0..rho.len()).filter(|&i| assign[i] == j && rho[i]);
            let used: f64 = members().map(|i| costs.offload_share_hz[i]).sum();
            if used <= cap * (1.0 + BUDGET_REL_SLACK) {
                break;
            }
            let gain = |i: usize| costs.h1[i] - costs.h2[i];
            // Strict `<` keeps the lowest index among equal gains.
            let victim = members().fold(None, |best: Option<usize>, i| match best {
                Some(b) if gain(b) <= gain(i) => Some(b),
                _ => Some(i),
            });
            match victim {
                Some(k) => {
                    log::trace!("position {j}: CPU over budget, device {k} falls back to local");
                    rho[k] = false;
                }
                None => break,
            }
        }
    }
}

/// Binary offloading vector: the per-device rule followed by the greedy
/// CPU-budget repair.
pub fn decide_offloading(p: &Problem<'_>, alloc: &Allocation) -> Result<Vec<bool>> {
    let costs = mode_costs(p, alloc)?;
    let mut rho: Vec<bool> = costs.h1.iter().zip(&costs.h2).map(|(&a, &b)| offload_rule(a, b)).collect();
    let assign = alloc.assignment()?;
    repair(&assign, &costs, p.scenario.budget.cpu_max_hz, &mut rho);
    Ok(rho)
}

/// Applies only the budget repair to the allocation's current decisions.
pub fn repair_offloading(p: &Problem<'_>, alloc: &Allocation) -> Result<Vec<bool>> {
    let costs = mode_costs(p, alloc)?;
    let mut rho = alloc.offload.clone();
    let assign = alloc.assignment()?;
    repair(&assign, &costs, p.scenario.budget.cpu_max_hz, &mut rho);
    Ok(rho)
}
