//! The outer block-coordinate loop and the comparison schemes.
//!
//! A round decides offloading, re-solves the CPU shares and charging powers
//! in closed form, then re-associates devices with hover positions. The
//! loop starts from the nearest-position association with everybody
//! offloading and never accepts a round that makes things worse, so its
//! result is never worse than the nearest-position scheme.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{total_latency, Allocation, LatencyBreakdown, Problem};
use crate::error::{Error, Result};
use crate::model::{Scenario, SolverConfig};
use crate::subsolvers::{binary_objective, closed_form_allocation, decide_offloading, manage_connections, repair_offloading};

/// Largest `(2M)^N` the exhaustive scheme accepts.
pub const EXHAUSTIVE_LIMIT: f64 = 1e7;

/// Added to the solver seed before drawing random associations.
const RANDOM_STREAM_OFFSET: u64 = 0x5253;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    /// Alternating optimization of all four blocks.
    Gjra,
    /// Random association, other blocks optimized once.
    Rs,
    /// Nearest-position association, other blocks optimized once.
    Np,
    /// Exhaustive search over all binary decisions.
    Ea,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Gjra, Scheme::Rs, Scheme::Np, Scheme::Ea];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Gjra => "GJRA",
            Scheme::Rs => "RS",
            Scheme::Np => "NP",
            Scheme::Ea => "EA",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::validation("scheme", format!("unknown scheme {s:?}; expected GJRA, RS, NP or EA")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub scheme: Scheme,
    pub final_alloc: Allocation,
    /// Device → position of the final allocation.
    pub assignment: Vec<usize>,
    /// Objective of the starting point followed by one entry per accepted round.
    pub objective_trace: Vec<f64>,
    pub rounds: usize,
    pub converged: bool,
    /// A round increased the objective and was rolled back.
    pub guard_tripped: bool,
    /// Connection-management iterations per round.
    pub connection_iterations: Vec<usize>,
    pub breakdown: LatencyBreakdown,
    pub total_latency_s: f64,
    pub wall_time_s: f64,
}

/// Nearest hover position of every device, lowest index on ties.
pub fn nearest_positions(p: &Problem<'_>) -> Vec<usize> {
    p.table
        .dist_m
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (j, &d)| if d < best.1 { (j, d) } else { best })
                .0
        })
        .collect()
}

/// Closed-form allocation for `assign` with everybody offloading, trimmed to
/// the CPU budget.
fn initial_allocation(p: &Problem<'_>, assign: &[usize]) -> Result<Allocation> {
    let alloc = closed_form_allocation(p, assign, &vec![true; p.n()]);
    let rho = repair_offloading(p, &alloc)?;
    Ok(closed_form_allocation(p, assign, &rho))
}

/// One pass over the offloading, CPU and charging blocks.
fn optimize_once(p: &Problem<'_>, alloc: &Allocation) -> Result<Allocation> {
    let assign = alloc.assignment()?;
    let rho = decide_offloading(p, alloc)?;
    Ok(closed_form_allocation(p, &assign, &rho))
}

fn finish(
    p: &Problem<'_>,
    scheme: Scheme,
    alloc: Allocation,
    trace: Vec<f64>,
    rounds: usize,
    converged: bool,
    guard_tripped: bool,
    connection_iterations: Vec<usize>,
    started: Instant,
) -> Result<SolveReport> {
    let breakdown = total_latency(p, &alloc)?;
    Ok(SolveReport {
        scheme,
        assignment: alloc.assignment()?,
        final_alloc: alloc,
        objective_trace: trace,
        rounds,
        converged,
        guard_tripped,
        connection_iterations,
        total_latency_s: breakdown.total_s,
        breakdown,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

fn prepare<'a>(s: &'a Scenario, cfg: &SolverConfig) -> Result<Problem<'a>> {
    cfg.validate()?;
    Problem::new(s)
}

pub fn solve_gjra(s: &Scenario, cfg: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let p = prepare(s, cfg)?;
    let mut alloc = initial_allocation(&p, &nearest_positions(&p))?;
    let mut trace = vec![total_latency(&p, &alloc)?.total_s];
    let mut conn_iters = Vec::new();
    let mut converged = false;
    let mut guard_tripped = false;
    let mut rounds = 0;

    while rounds < cfg.r_max {
        rounds += 1;
        let mid = optimize_once(&p, &alloc)?;
        let outcome = manage_connections(&p, &mid.assignment()?, &mid.offload, cfg)?;
        conn_iters.push(outcome.iterations);
        let next = closed_form_allocation(&p, &outcome.assignment, &mid.offload);
        let obj = outcome.objective;
        let prev = *trace.last().expect("trace starts non-empty");
        log::debug!("round {rounds}: objective {obj:.12e} ({} connection iterations)", outcome.iterations);
        if obj > prev {
            log::info!("round {rounds} raised the objective from {prev:.12e} to {obj:.12e}; keeping the previous round");
            guard_tripped = true;
            converged = true;
            break;
        }
        trace.push(obj);
        alloc = next;
        if (prev - obj).abs() < cfg.eps_outer {
            converged = true;
            break;
        }
    }
    finish(&p, Scheme::Gjra, alloc, trace, rounds, converged, guard_tripped, conn_iters, started)
}

fn solve_fixed_association(p: &Problem<'_>, scheme: Scheme, assign: &[usize], started: Instant) -> Result<SolveReport> {
    let init = initial_allocation(p, assign)?;
    let start_obj = total_latency(p, &init)?.total_s;
    let alloc = optimize_once(p, &init)?;
    let obj = total_latency(p, &alloc)?.total_s;
    finish(p, scheme, alloc, vec![start_obj, obj], 1, true, false, Vec::new(), started)
}

pub fn solve_np(s: &Scenario, cfg: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let p = prepare(s, cfg)?;
    let assign = nearest_positions(&p);
    solve_fixed_association(&p, Scheme::Np, &assign, started)
}

pub fn solve_rs(s: &Scenario, cfg: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let p = prepare(s, cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed.wrapping_add(RANDOM_STREAM_OFFSET));
    let assign: Vec<usize> = (0..p.n()).map(|_| rng.gen_range(0..p.m())).collect();
    solve_fixed_association(&p, Scheme::Rs, &assign, started)
}

/// Number of binary candidates the exhaustive scheme would visit, `(2M)^N`.
pub fn exhaustive_candidates(n: usize, m: usize) -> f64 {
    (2.0 * m as f64).powf(n as f64)
}

pub fn solve_ea(s: &Scenario, cfg: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    let candidates = exhaustive_candidates(s.n(), s.m());
    if candidates > EXHAUSTIVE_LIMIT {
        return Err(Error::SizeGuard {
            candidates,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let p = prepare(s, cfg)?;
    let (n, m) = (p.n(), p.m());
    let mut assign = vec![0; n];
    let mut best: Option<(f64, Vec<usize>, Vec<bool>)> = None;
    loop {
        for mask in 0u64..(1u64 << n) {
            let rho: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
            let obj = binary_objective(&p, &assign, &rho)?;
            if best.as_ref().is_none_or(|b| obj < b.0) {
                best = Some((obj, assign.clone(), rho));
            }
        }
        // Odometer over associations, device 0 fastest.
        let mut i = 0;
        while i < n {
            assign[i] += 1;
            if assign[i] < m {
                break;
            }
            assign[i] = 0;
            i += 1;
        }
        if i == n {
            break;
        }
    }
    let (obj, assign, rho) = best.expect("at least one candidate");
    let alloc = closed_form_allocation(&p, &assign, &rho);
    finish(&p, Scheme::Ea, alloc, vec![obj], 1, true, false, Vec::new(), started)
}

pub fn solve(scheme: Scheme, s: &Scenario, cfg: &SolverConfig) -> Result<SolveReport> {
    match scheme {
        Scheme::Gjra => solve_gjra(s, cfg),
        Scheme::Rs => solve_rs(s, cfg),
        Scheme::Np => solve_np(s, cfg),
        Scheme::Ea => solve_ea(s, cfg),
    }
}
