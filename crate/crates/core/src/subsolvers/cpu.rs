use crate::energy::{Allocation, Problem};

use super::proportional_shares;

/// Optimal multiplier of a position's CPU budget: `(Σ √Fᵢ / f_max)²` over
/// its offloaders. Each share then equals `√(Fᵢ / μ)`.
pub fn cpu_multiplier(cap_hz: f64, sqrt_cycles_sum: f64) -> f64 {
    (sqrt_cycles_sum / cap_hz).powi(2)
}

/// UAV CPU shares for fixed connections and offloading decisions.
///
/// Offloaders at a position split the full budget in proportion to `√Fᵢ`,
/// which minimizes `Σ Fᵢ / fᵢ` with the budget tight. Everybody else gets 0.
pub fn allocate_uav_cpu(p: &Problem<'_>, alloc: &Allocation) -> Vec<Vec<f64>> {
    let (n, m) = (alloc.n(), alloc.m());
    let cap = p.scenario.budget.cpu_max_hz;
    let mut shares = vec![vec![0.0; m]; n];
    for j in 0..m {
        let members: Vec<usize> = (0..n).filter(|&i| alloc.connect[i][j] && alloc.offload[i]).collect();
        let weights: Vec<f64> = members.iter().map(|&i| p.cycles(i).sqrt()).collect();
        for (&i, f) in members.iter().zip(proportional_shares(cap, &weights)) {
            shares[i][j] = f;
        }
    }
    shares
}
