//! Device-to-position connections by Lagrangian relaxation of the
//! per-position CPU and charging budgets.
//!
//! With the budgets priced, the relaxed problem separates per device: each
//! device picks the position of smallest priced latency. A device keeps its
//! own closed-form share where it already is and is quoted the share it
//! would get by joining anywhere else. Each budget is priced at the
//! multiplier of its closed-form allocation, which turns a device's own
//! latency into its marginal effect on the objective, plus a correction
//! that follows the budget residuals of the relaxed choices. Devices choose
//! in index order against running column sums so that a pass does not send
//! everybody to the same empty position. Every iterate is scored with the
//! true closed-form objective and the best one seen, starting point
//! included, is returned.

use serde::{Deserialize, Serialize};

use crate::energy::{harvest_time, Problem};
use crate::error::Result;
use crate::model::SolverConfig;

use super::{binary_objective, cpu_multiplier, power_multiplier};

/// Residuals within this of zero count as zero.
const RESIDUAL_SNAP: f64 = 1e-12;

/// Multipliers after connection management. `mu` and `lambda` are those of
/// the final allocation's CPU and charging budgets; `beta` and `gamma` are
/// the residual-driven price corrections, in seconds per full budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub step0: f64,
}

/// Per-position sums of `√F` over offloaders and of `√A` over members.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSums {
    pub sqrt_cycles: Vec<f64>,
    pub sqrt_demand: Vec<f64>,
}

impl ColumnSums {
    pub fn new(p: &Problem<'_>, assign: &[usize], offload: &[bool]) -> Self {
        let mut sums = ColumnSums {
            sqrt_cycles: vec![0.0; p.m()],
            sqrt_demand: vec![0.0; p.m()],
        };
        for (i, &j) in assign.iter().enumerate() {
            if offload[i] {
                sums.sqrt_cycles[j] += p.cycles(i).sqrt();
            }
            sums.sqrt_demand[j] += p.demand(i, j, offload[i]).sqrt();
        }
        sums
    }

    /// Budget multipliers of the closed-form allocation for these sums,
    /// scaled to seconds per full budget.
    fn prices(&self, p: &Problem<'_>) -> (Vec<f64>, Vec<f64>) {
        let b = &p.scenario.budget;
        (
            self.sqrt_cycles.iter().map(|&s| cpu_multiplier(b.cpu_max_hz, s) * b.cpu_max_hz).collect(),
            self.sqrt_demand.iter().map(|&s| power_multiplier(b.power_max_w, s) * b.power_max_w).collect(),
        )
    }

    fn shift(&mut self, p: &Problem<'_>, i: usize, from: usize, to: usize, offload: bool) {
        if offload {
            let w = p.cycles(i).sqrt();
            self.sqrt_cycles[from] = (self.sqrt_cycles[from] - w).max(0.0);
            self.sqrt_cycles[to] += w;
        }
        self.sqrt_demand[from] = (self.sqrt_demand[from] - p.demand(i, from, offload).sqrt()).max(0.0);
        self.sqrt_demand[to] += p.demand(i, to, offload).sqrt();
    }

    /// Predicted (CPU share, charging power) of device `i` at position `j`.
    fn shares(&self, p: &Problem<'_>, i: usize, j: usize, member: bool, offload: bool) -> (f64, f64) {
        let b = &p.scenario.budget;
        let wf = if offload { p.cycles(i).sqrt() } else { 0.0 };
        let wa = p.demand(i, j, offload).sqrt();
        let (sf, sa) = if member {
            (self.sqrt_cycles[j], self.sqrt_demand[j])
        } else {
            (self.sqrt_cycles[j] + wf, self.sqrt_demand[j] + wa)
        };
        let f = if wf > 0.0 { b.cpu_max_hz * (wf / sf) } else { 0.0 };
        let pw = if wa > 0.0 { b.power_max_w * (wa / sa) } else { 0.0 };
        (f, pw)
    }
}

/// Priced latency of device `i` at position `j` given the current
/// assignment's column sums.
pub fn connection_cost(
    p: &Problem<'_>,
    sums: &ColumnSums,
    assign: &[usize],
    offload: &[bool],
    beta: &[f64],
    gamma: &[f64],
    i: usize,
    j: usize,
) -> Result<f64> {
    let b = &p.scenario.budget;
    let rho = offload[i];
    let (f, pw) = sums.shares(p, i, j, assign[i] == j, rho);
    let eh = harvest_time(p.demand(i, j, rho), pw)?;
    let service = if rho {
        p.cycles(i) / f + p.tx_time[i][j]
    } else {
        p.local_time[i]
    };
    Ok(eh + service + beta[j] * f / b.cpu_max_hz + gamma[j] * pw / b.power_max_w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionOutcome {
    /// Best assignment found, device → position.
    pub assignment: Vec<usize>,
    /// Closed-form objective of `assignment`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The last relaxed iterate over-subscribed some budget.
    pub dual_infeasible: bool,
    pub dual: DualState,
    /// Objective of every iterate, starting assignment first.
    pub trace: Vec<f64>,
}

fn snap(r: f64) -> f64 {
    if r.abs() <= RESIDUAL_SNAP {
        0.0
    } else {
        r
    }
}

pub fn manage_connections(
    p: &Problem<'_>,
    assign: &[usize],
    offload: &[bool],
    cfg: &SolverConfig,
) -> Result<ConnectionOutcome> {
    let (n, m) = (p.n(), p.m());
    let b = &p.scenario.budget;
    let start_obj = binary_objective(p, assign, offload)?;
    let start = ColumnSums::new(p, assign, offload);
    let (cpu_price, pow_price) = start.prices(p);
    // Corrections are stepped relative to the largest starting price of each kind.
    let beta_scale = cpu_price.iter().copied().fold(0.0, f64::max);
    let gamma_scale = pow_price.iter().copied().fold(0.0, f64::max);
    let mut beta = vec![0.0; m];
    let mut gamma = vec![0.0; m];
    let mut best = (assign.to_vec(), start_obj);
    let mut trace = vec![start_obj];
    let mut iterations = 0;
    let mut converged = m == 1;
    let mut dual_infeasible = false;
    let mut current = assign.to_vec();

    while !converged && iterations < cfg.k_max {
        iterations += 1;
        let mut sums = ColumnSums::new(p, &current, offload);
        let mut next = current.clone();
        let mut cpu_use = vec![0.0; m];
        let mut pow_use = vec![0.0; m];
        for i in 0..n {
            let (cpu_price, pow_price) = sums.prices(p);
            let bt: Vec<f64> = cpu_price.iter().zip(&beta).map(|(a, c)| a + c).collect();
            let gm: Vec<f64> = pow_price.iter().zip(&gamma).map(|(a, c)| a + c).collect();
            let mut pick = (0, f64::INFINITY);
            for j in 0..m {
                let h = connection_cost(p, &sums, &next, offload, &bt, &gm, i, j)?;
                if h < pick.1 {
                    pick = (j, h);
                }
            }
            let (from, to) = (next[i], pick.0);
            let (f, pw) = sums.shares(p, i, to, from == to, offload[i]);
            cpu_use[to] += f / b.cpu_max_hz;
            pow_use[to] += pw / b.power_max_w;
            if from != to {
                sums.shift(p, i, from, to, offload[i]);
                next[i] = to;
            }
        }

        let step = cfg.step0 / (iterations as f64).sqrt();
        dual_infeasible = false;
        for j in 0..m {
            let r_cpu = snap(cpu_use[j] - 1.0);
            let r_pow = snap(pow_use[j] - 1.0);
            dual_infeasible |= r_cpu > 0.0 || r_pow > 0.0;
            beta[j] = (beta[j] + step * beta_scale * r_cpu).max(0.0);
            gamma[j] = (gamma[j] + step * gamma_scale * r_pow).max(0.0);
        }

        let obj = binary_objective(p, &next, offload)?;
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(obj);
        log::trace!("connection iterate {iterations}: objective {obj:.9e}");
        if obj < best.1 {
            best = (next.clone(), obj);
        }
        converged = (obj - prev).abs() < cfg.eps_inner;
        current = next;
    }

    let (assignment, objective) = best;
    let sums = ColumnSums::new(p, &assignment, offload);
    let dual = DualState {
        mu: sums.sqrt_cycles.iter().map(|&s| cpu_multiplier(b.cpu_max_hz, s)).collect(),
        lambda: sums.sqrt_demand.iter().map(|&s| power_multiplier(b.power_max_w, s)).collect(),
        beta,
        gamma,
        step0: cfg.step0,
    };
    Ok(ConnectionOutcome {
        assignment,
        objective,
        iterations,
        converged,
        dual_infeasible,
        dual,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subsolvers::closed_form_allocation;
    use crate::subsolvers::fixtures::{device, scenario};
    use proptest::prelude::*;

    #[test]
    fn single_position_returns_immediately() {
        let devs = (0..3).map(|i| device(i, i as f64, 1.0, 1e4, 5e5)).collect();
        let s = scenario(devs, &[(0.0, 0.0)]);
        let p = Problem::new(&s).unwrap();
        let out = manage_connections(&p, &[0, 0, 0], &[true, false, true], &SolverConfig::default()).unwrap();
        assert_eq!(out.assignment, vec![0, 0, 0]);
        assert_eq!(out.iterations, 0);
        assert!(out.converged);
        assert_eq!(out.trace.len(), 1);
    }

    #[test]
    fn slack_budgets_keep_prices_at_zero() {
        // All-local devices, each already at its nearest position: nothing
        // moves, no budget is over-subscribed, so the prices stay at zero.
        let devs = vec![device(0, 0.0, 0.0, 1e5, 5e5), device(1, 1.0, 0.0, 1e5, 6e5), device(2, 40.0, 0.0, 1e5, 7e5)];
        let s = scenario(devs, &[(0.0, 0.0), (40.0, 0.0)]);
        let p = Problem::new(&s).unwrap();
        let offload = [false; 3];
        let out = manage_connections(&p, &[0, 0, 1], &offload, &SolverConfig::default()).unwrap();
        assert_eq!(out.assignment, vec![0, 0, 1]);
        assert!(out.converged && !out.dual_infeasible);
        assert!(out.dual.beta.iter().chain(&out.dual.gamma).all(|&x| x == 0.0));
        // Complementary slackness: zero price wherever the CPU budget is slack.
        for j in 0..2 {
            let alloc = closed_form_allocation(&p, &out.assignment, &offload);
            let slack = 3e6 - alloc.cpu_used(j);
            assert!(out.dual.beta[j] * slack == 0.0);
        }
    }

    #[test]
    fn identical_positions_break_ties_to_lowest_index() {
        let s = scenario(vec![device(0, 3.0, 4.0, 1e4, 5e5)], &[(0.0, 0.0), (0.0, 0.0)]);
        let p = Problem::new(&s).unwrap();
        for start in [0, 1] {
            let assign = [start];
            let sums = ColumnSums::new(&p, &assign, &[true]);
            let z = [0.0; 2];
            let h0 = connection_cost(&p, &sums, &assign, &[true], &z, &z, 0, 0).unwrap();
            let h1 = connection_cost(&p, &sums, &assign, &[true], &z, &z, 0, 1).unwrap();
            assert_eq!(h0, h1);
        }
        let out = manage_connections(&p, &[0], &[true], &SolverConfig::default()).unwrap();
        assert_eq!(out.assignment, vec![0]);
        assert!(out.converged);
    }

    #[test]
    fn zero_prices_give_raw_latency_and_cpu_price_hits_offloaders_only() {
        let devs = vec![device(0, 3.0, 4.0, 1e4, 6e5), device(1, 5.0, 1.0, 2e4, 3e5)];
        let s = scenario(devs, &[(0.0, 0.0), (20.0, 0.0)]);
        let p = Problem::new(&s).unwrap();
        let assign = [0, 0];
        let offload = [true, false];
        let sums = ColumnSums::new(&p, &assign, &offload);
        let alloc = closed_form_allocation(&p, &assign, &offload);
        let lat = crate::energy::total_latency(&p, &alloc).unwrap();
        let z = [0.0; 2];
        for i in 0..2 {
            let h = connection_cost(&p, &sums, &assign, &offload, &z, &z, i, 0).unwrap();
            assert!((h - lat.devices[i].total_s).abs() < 1e-12 * h);
        }
        let raised = [1.0, 0.0];
        for j in 0..2 {
            let h0 = connection_cost(&p, &sums, &assign, &offload, &z, &z, 0, j).unwrap();
            let h1 = connection_cost(&p, &sums, &assign, &offload, &raised, &z, 0, j).unwrap();
            assert_eq!(h1 > h0, j == 0);
            let l0 = connection_cost(&p, &sums, &assign, &offload, &z, &z, 1, j).unwrap();
            let l1 = connection_cost(&p, &sums, &assign, &offload, &raised, &z, 1, j).unwrap();
            assert_eq!(l0, l1);
        }
    }

    #[test]
    fn crowded_position_sheds_load() {
        // Six devices at the same spot between two equidistant positions,
        // all started on the first: splitting them halves the charging cost.
        let devs = (0..6).map(|i| device(i, 10.0, 0.0, 1e5, 5e5)).collect();
        let s = scenario(devs, &[(0.0, 0.0), (20.0, 0.0)]);
        let p = Problem::new(&s).unwrap();
        let out = manage_connections(&p, &[0; 6], &[false; 6], &SolverConfig::default()).unwrap();
        let on_first = out.assignment.iter().filter(|&&j| j == 0).count();
        assert_eq!(on_first, 3);
        assert!(out.objective < out.trace[0]);
    }

    #[test]
    fn distant_devices_move_closer() {
        let devs = vec![device(0, 0.0, 0.0, 1e5, 5e5), device(1, 60.0, 0.0, 1e5, 5e5)];
        let s = scenario(devs, &[(0.0, 0.0), (60.0, 0.0)]);
        let p = Problem::new(&s).unwrap();
        let out = manage_connections(&p, &[1, 0], &[false, false], &SolverConfig::default()).unwrap();
        assert_eq!(out.assignment, vec![0, 1]);
        assert!(out.objective < out.trace[0]);
        assert!(out.converged);
    }

    #[test]
    fn multipliers_match_final_allocation() {
        let devs = (0..4).map(|i| device(i, 10.0 * i as f64, 2.0, 1e4, 4e5 + 1e5 * i as f64)).collect();
        let s = scenario(devs, &[(0.0, 0.0), (30.0, 0.0)]);
        let p = Problem::new(&s).unwrap();
        let offload = [true, false, true, true];
        let out = manage_connections(&p, &[0, 0, 1, 1], &offload, &SolverConfig::default()).unwrap();
        let alloc = closed_form_allocation(&p, &out.assignment, &offload);
        for (i, &j) in out.assignment.iter().enumerate() {
            if offload[i] {
                let f = (p.cycles(i) / out.dual.mu[j]).sqrt();
                assert!((f - alloc.cpu_share_hz[i][j]).abs() < 1e-6 * f);
            }
            let pw = (p.demand(i, j, offload[i]) / out.dual.lambda[j]).sqrt();
            assert!((pw - alloc.charge_w[i][j]).abs() < 1e-9 * pw);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn outcome_is_feasible_and_no_worse(seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..10);
            let m = rng.gen_range(1..4);
            let devs = (0..n)
                .map(|i| device(i, rng.gen_range(0.0..40.0), rng.gen_range(0.0..40.0), rng.gen_range(1e2..1e6), rng.gen_range(2e5..1e6)))
                .collect();
            let pos: Vec<(f64, f64)> = (0..m).map(|_| (rng.gen_range(0.0..40.0), rng.gen_range(0.0..40.0))).collect();
            let s = scenario(devs, &pos);
            let p = Problem::new(&s).unwrap();
            let assign: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
            let offload: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            let out = manage_connections(&p, &assign, &offload, &SolverConfig::default()).unwrap();
            prop_assert!(out.objective <= out.trace[0]);
            prop_assert!(out.iterations <= SolverConfig::default().k_max);
            prop_assert!(out.dual.beta.iter().chain(&out.dual.gamma).all(|&x| x >= 0.0));
            let alloc = closed_form_allocation(&p, &out.assignment, &offload);
            for row in &alloc.connect {
                prop_assert_eq!(row.iter().filter(|&&c| c).count(), 1);
            }
            let check = binary_objective(&p, &out.assignment, &offload).unwrap();
            prop_assert_eq!(check, out.objective);
        }
    }
}
