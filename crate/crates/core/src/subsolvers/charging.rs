use crate::energy::{Allocation, Problem};

use super::proportional_shares;

/// Optimal multiplier of a position's charging budget, `(Σ √Aᵢ / p_max)²`.
pub fn power_multiplier(cap_w: f64, sqrt_demand_sum: f64) -> f64 {
    (sqrt_demand_sum / cap_w).powi(2)
}

/// Charging powers for fixed connections, offloading decisions and CPU shares.
///
/// With harvesting at its minimum the charging block is `min Σ Aᵢ / pᵢ`
/// per position, solved by splitting `p_max` in proportion to `√Aᵢ`.
pub fn allocate_charging(p: &Problem<'_>, alloc: &Allocation) -> Vec<Vec<f64>> {
    let (n, m) = (alloc.n(), alloc.m());
    let cap = p.scenario.budget.power_max_w;
    let mut power = vec![vec![0.0; m]; n];
    for j in 0..m {
        let members: Vec<usize> = (0..n).filter(|&i| alloc.connect[i][j]).collect();
        let weights: Vec<f64> = members.iter().map(|&i| p.demand(i, j, alloc.offload[i]).sqrt()).collect();
        for (&i, w) in members.iter().zip(proportional_shares(cap, &weights)) {
            power[i][j] = w;
        }
    }
    power
}
