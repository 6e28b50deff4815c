//! Independent checks of the closed-form allocations and of whole solutions.
//!
//! Both continuous blocks have the shape `min Σ cᵢ / xᵢ` subject to
//! `x ≥ 0, Σ xᵢ ≤ cap`. Two numeric solvers attack that problem without
//! using its closed form: projected gradient descent on the simplex and a
//! zooming grid search on the budget face. [`check_allocation`] audits a
//! full allocation against every constraint and the energy balance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{device_latency, Allocation, Problem, BUDGET_REL_SLACK};
use crate::error::{Constraint, Result};
use crate::model::{Device, HoverPosition, PhysicsConfig, Point, Scenario, UavBudget};
use crate::subsolvers::{allocate_charging, allocate_uav_cpu};

/// Relative tolerance on the energy balance.
pub const ENERGY_BALANCE_TOL: f64 = 1e-9;

/// `Σ cᵢ / xᵢ`, infinite if some `xᵢ ≤ 0` carries a positive coefficient.
pub fn inverse_sum(coeffs: &[f64], x: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(x)
        .map(|(&c, &xi)| if c == 0.0 { 0.0 } else if xi > 0.0 { c / xi } else { f64::INFINITY })
        .sum()
}

/// Euclidean projection onto `{y ≥ 0, Σ y ≤ 1}`.
fn project_capped_simplex(y: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = y.iter().map(|&v| v.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= 1.0 {
        return clamped;
    }
    // Projection onto the face Σ y = 1 by the sort-and-threshold rule.
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k as f64 + 1.0);
        if uk - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

/// Projected gradient descent for `min Σ cᵢ/xᵢ, x ≥ 0, Σx ≤ cap`, started
/// from the uniform split, with backtracking until the objective moves by
/// less than `1e-12` relative.
pub fn projected_gradient_oracle(coeffs: &[f64], cap: f64) -> Vec<f64> {
    let n = coeffs.len();
    if n == 0 {
        return Vec::new();
    }
    let scale = coeffs.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return vec![cap / n as f64; n];
    }
    let c: Vec<f64> = coeffs.iter().map(|&v| v / scale).collect();
    let mut y = vec![1.0 / n as f64; n];
    let mut g = inverse_sum(&c, &y);
    let mut step = 1e-3;
    for _ in 0..200_000 {
        let grad: Vec<f64> = c.iter().zip(&y).map(|(&ci, &yi)| -ci / (yi * yi)).collect();
        let mut accepted = None;
        while step > 1e-30 {
            let trial: Vec<f64> = y.iter().zip(&grad).map(|(&yi, &gi)| yi - step * gi).collect();
            let cand = project_capped_simplex(&trial);
            let gc = inverse_sum(&c, &cand);
            let decrease: f64 = grad.iter().zip(y.iter().zip(&cand)).map(|(&gi, (&a, &b))| gi * (a - b)).sum();
            if gc.is_finite() && gc <= g - 1e-4 * decrease {
                accepted = Some((cand, gc));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, gc)) = accepted else { break };
        let change = g - gc;
        y = cand;
        g = gc;
        step *= 2.0;
        if change < 1e-12 * g {
            break;
        }
    }
    y.into_iter().map(|v| v * cap).collect()
}

/// Zooming grid search over the budget face `Σ x = cap`. The objective
/// decreases in every coordinate, so the optimum lies on that face. Up to
/// four coordinates the whole face is gridded, with the coordinate of the
/// largest coefficient left implicit so the steepest directions lie on the
/// grid axes. Larger splits fall back to [`pairwise_grid`].
pub fn grid_oracle(coeffs: &[f64], cap: f64) -> Vec<f64> {
    const POINTS: usize = 21;
    const LEVELS: usize = 50;
    let n = coeffs.len();
    if n <= 1 {
        return vec![cap; n];
    }
    if n > 4 {
        return pairwise_grid(coeffs, cap);
    }
    let implicit = (0..n).fold(0, |b, i| if coeffs[i] > coeffs[b] { i } else { b });
    let order: Vec<usize> = (0..n).filter(|&i| i != implicit).collect();
    let dims = n - 1;
    let full = |free: &[f64]| {
        let mut y = vec![0.0; n];
        for (d, &i) in order.iter().enumerate() {
            y[i] = free[d];
        }
        y[implicit] = 1.0 - free.iter().sum::<f64>();
        y
    };
    let eval = |free: &[f64]| {
        let y = full(free);
        if y.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        inverse_sum(coeffs, &y)
    };
    let mut center = vec![1.0 / n as f64; dims];
    let mut half = 0.5;
    let mut best = (center.clone(), eval(&center));
    for _ in 0..LEVELS {
        let spacing = 2.0 * half / (POINTS - 1) as f64;
        let mut idx = vec![0usize; dims];
        loop {
            let pt: Vec<f64> = (0..dims).map(|d| center[d] - half + spacing * idx[d] as f64).collect();
            let v = eval(&pt);
            if v < best.1 {
                best = (pt, v);
            }
            let mut d = 0;
            while d < dims {
                idx[d] += 1;
                if idx[d] < POINTS {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
            if d == dims {
                break;
            }
        }
        center = best.0.clone();
        half = 3.0 * spacing;
    }
    full(&best.0).into_iter().map(|v| v * cap).collect()
}

/// Repeated one-dimensional zooming grids over transfers between pairs of
/// coordinates, from the uniform split, until a full pass over all pairs
/// stops improving.
fn pairwise_grid(coeffs: &[f64], cap: f64) -> Vec<f64> {
    const POINTS: usize = 21;
    const LEVELS: usize = 40;
    let n = coeffs.len();
    let mut y = vec![1.0 / n as f64; n];
    let mut best = inverse_sum(coeffs, &y);
    for _ in 0..10_000 {
        let before = best;
        for a in 0..n {
            for b in a + 1..n {
                let total = y[a] + y[b];
                let pair = |t: f64| coeffs[a] / t + coeffs[b] / (total - t);
                let (mut lo, mut hi) = (0.0, total);
                let mut t_best = y[a];
                let mut v_best = pair(t_best);
                for _ in 0..LEVELS {
                    let spacing = (hi - lo) / (POINTS - 1) as f64;
                    for k in 1..POINTS - 1 {
                        let t = lo + spacing * k as f64;
                        let v = pair(t);
                        if v < v_best {
                            t_best = t;
                            v_best = v;
                        }
                    }
                    lo = (t_best - 2.0 * spacing).max(0.0);
                    hi = (t_best + 2.0 * spacing).min(total);
                }
                y[a] = t_best;
                y[b] = total - t_best;
            }
        }
        best = inverse_sum(coeffs, &y);
        if before - best <= 1e-15 * best {
            break;
        }
    }
    y.into_iter().map(|v| v * cap).collect()
}

/// Numeric UAV CPU shares for the given offloaders' cycle counts.
pub fn kkt_oracle_cpu(cycles: &[f64], cap_hz: f64) -> Vec<f64> {
    projected_gradient_oracle(cycles, cap_hz)
}

/// Numeric charging powers for the given energy-demand coefficients.
pub fn kkt_oracle_power(demands: &[f64], cap_w: f64) -> Vec<f64> {
    projected_gradient_oracle(demands, cap_w)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub label: String,
    pub closed_form_objective: f64,
    /// Objective reached by projected gradient descent.
    pub numeric_objective: f64,
    /// Objective reached by the grid search.
    pub grid_objective: f64,
    /// `(numeric − closed) / closed`; negative means the closed form lost.
    pub relative_gap: f64,
    pub grid_relative_gap: f64,
    /// Relative budget slack `(cap − Σx) / cap` of the closed form, per position.
    pub constraint_residuals: Vec<f64>,
    pub passed: bool,
}

/// Compares a closed-form split against both numeric oracles.
pub fn compare_split(label: impl Into<String>, coeffs: &[f64], cap: f64, closed: &[f64], tol: f64) -> OracleReport {
    let closed_obj = inverse_sum(coeffs, closed);
    let pg = inverse_sum(coeffs, &projected_gradient_oracle(coeffs, cap));
    let grid = inverse_sum(coeffs, &grid_oracle(coeffs, cap));
    let gap = (pg - closed_obj) / closed_obj;
    let grid_gap = (grid - closed_obj) / closed_obj;
    let residual = (cap - closed.iter().sum::<f64>()) / cap;
    let passed = gap.abs() <= tol && grid_gap.abs() <= tol && residual.abs() <= BUDGET_REL_SLACK;
    OracleReport {
        label: label.into(),
        closed_form_objective: closed_obj,
        numeric_objective: pg,
        grid_objective: grid,
        relative_gap: gap,
        grid_relative_gap: grid_gap,
        constraint_residuals: vec![residual],
        passed,
    }
}

/// Oracle reports for both continuous blocks at every position that has
/// something to allocate.
pub fn verify_columns(p: &Problem<'_>, alloc: &Allocation, tol: f64) -> Vec<OracleReport> {
    let b = &p.scenario.budget;
    let cpu = allocate_uav_cpu(p, alloc);
    let power = allocate_charging(p, alloc);
    let mut reports = Vec::new();
    for j in 0..alloc.m() {
        let offloaders: Vec<usize> = (0..alloc.n()).filter(|&i| alloc.connect[i][j] && alloc.offload[i]).collect();
        if !offloaders.is_empty() {
            let coeffs: Vec<f64> = offloaders.iter().map(|&i| p.cycles(i)).collect();
            let shares: Vec<f64> = offloaders.iter().map(|&i| cpu[i][j]).collect();
            reports.push(compare_split(format!("cpu@{j}"), &coeffs, b.cpu_max_hz, &shares, tol));
        }
        let members: Vec<usize> = (0..alloc.n())
            .filter(|&i| alloc.connect[i][j] && p.demand(i, j, alloc.offload[i]) > 0.0)
            .collect();
        if !members.is_empty() {
            let coeffs: Vec<f64> = members.iter().map(|&i| p.demand(i, j, alloc.offload[i])).collect();
            let powers: Vec<f64> = members.iter().map(|&i| power[i][j]).collect();
            reports.push(compare_split(format!("power@{j}"), &coeffs, b.power_max_w, &powers, tol));
        }
    }
    reports
}

/// Random single-position instances with one to four devices, at least one
/// of them offloading, each checked by [`verify_columns`].
pub fn random_column_suite(count: usize, seed: u64, tol: f64) -> Result<Vec<OracleReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    for case in 0..count {
        let n = rng.gen_range(1..=4);
        let devices = (0..n)
            .map(|id| Device {
                id,
                position: Point::new(rng.gen_range(0.0..30.0), rng.gen_range(0.0..30.0)),
                task_bits: 10f64.powf(rng.gen_range(2.0..6.0)).round(),
                task_cycles: rng.gen_range(2e5..1e6f64).round(),
                local_freq_hz: 1e6,
                uplink_power_w: 2.83e-3,
                capacitance_k: 1e-28,
            })
            .collect();
        let s = Scenario {
            devices,
            positions: vec![HoverPosition {
                id: 0,
                position: Point::new(rng.gen_range(0.0..30.0), rng.gen_range(0.0..30.0)),
            }],
            physics: PhysicsConfig::default(),
            budget: UavBudget::default(),
        };
        let mut offload: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        offload[rng.gen_range(0..n)] = true;
        let p = Problem::new(&s)?;
        let alloc = Allocation::from_assignment(&vec![0; n], 1, offload);
        for mut r in verify_columns(&p, &alloc, tol) {
            r.label = format!("case {case} {}", r.label);
            reports.push(r);
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub device: Option<usize>,
    pub position: Option<usize>,
    pub message: String,
}

impl Violation {
    fn new(constraint: Constraint, device: Option<usize>, position: Option<usize>, message: String) -> Self {
        Violation {
            constraint,
            device,
            position,
            message,
        }
    }
}

/// Every broken constraint of `alloc`; empty when the allocation is
/// feasible and harvesting exactly covers each device's consumption.
pub fn check_allocation(p: &Problem<'_>, alloc: &Allocation) -> Vec<Violation> {
    let b = &p.scenario.budget;
    let phys = &p.scenario.physics;
    let mut out = Vec::new();
    for i in 0..alloc.n() {
        let count = alloc.connect[i].iter().filter(|&&c| c).count();
        if count != 1 {
            out.push(Violation::new(
                Constraint::SingleConnection,
                Some(i),
                None,
                format!("device {i} is connected to {count} positions"),
            ));
            continue;
        }
        let j = alloc.position_of(i).expect("exactly one connection");
        for k in 0..alloc.m() {
            if k != j && (alloc.cpu_share_hz[i][k] != 0.0 || alloc.charge_w[i][k] != 0.0) {
                out.push(Violation::new(
                    Constraint::SingleConnection,
                    Some(i),
                    Some(k),
                    format!("device {i} holds resources at unconnected position {k}"),
                ));
            }
        }
        let share = alloc.cpu_share_hz[i][j];
        if alloc.offload[i] && !(share > 0.0) {
            out.push(Violation::new(
                Constraint::CpuShare,
                Some(i),
                Some(j),
                format!("offloading device {i} has no UAV CPU share at position {j}"),
            ));
        }
        if !alloc.offload[i] && share != 0.0 {
            out.push(Violation::new(
                Constraint::CpuShare,
                Some(i),
                Some(j),
                format!("local device {i} holds {share} Hz of UAV CPU at position {j}"),
            ));
        }
        let charge = alloc.charge_w[i][j];
        if charge < 0.0 || (p.demand(i, j, alloc.offload[i]) > 0.0 && charge == 0.0) {
            out.push(Violation::new(
                Constraint::ChargingPower,
                Some(i),
                Some(j),
                format!("device {i} has charging power {charge} W at position {j}"),
            ));
            continue;
        }
        if let Ok(lat) = device_latency(p, alloc, i, j) {
            let harvested = phys.eh_efficiency * p.table.gain[i][j] * charge * lat.eh_s;
            let consumed = p.consumed_energy(i, j, alloc.offload[i]);
            if (harvested - consumed).abs() > ENERGY_BALANCE_TOL * consumed.max(f64::MIN_POSITIVE) {
                out.push(Violation::new(
                    Constraint::EnergyBalance,
                    Some(i),
                    Some(j),
                    format!("device {i} harvests {harvested:e} J but consumes {consumed:e} J"),
                ));
            }
        }
    }
    for j in 0..alloc.m() {
        let cpu = (0..alloc.n()).filter(|&i| alloc.connect[i][j]).map(|i| alloc.cpu_share_hz[i][j]).sum::<f64>();
        if cpu > b.cpu_max_hz * (1.0 + BUDGET_REL_SLACK) {
            out.push(Violation::new(
                Constraint::CpuBudget,
                None,
                Some(j),
                format!("position {j} hands out {cpu} Hz of a {} Hz CPU budget", b.cpu_max_hz),
            ));
        }
        let power = alloc.power_used(j);
        if power > b.power_max_w * (1.0 + BUDGET_REL_SLACK) {
            out.push(Violation::new(
                Constraint::PowerBudget,
                None,
                Some(j),
                format!("position {j} radiates {power} W of a {} W charging budget", b.power_max_w),
            ));
        }
    }
    out
}
