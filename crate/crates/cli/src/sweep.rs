//! Parameter sweeps: one solve per (value, seed, scheme) cell, written as CSV
//! in spec order regardless of which worker finishes first.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context};
use gjra_core::gjra::{exhaustive_candidates, solve, Scheme, SolveReport, EXHAUSTIVE_LIMIT};
use gjra_core::model::{generate_scenario, PhysicsConfig, Scenario, SolverConfig, TaskRanges, UavBudget};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::format_sig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    NDevices,
    MPositions,
    TaskCycles,
    TaskBits,
    PMaxUav,
    Bandwidth,
    FUeMax,
    FUavMax,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::NDevices => "n_devices",
            SweepParam::MPositions => "m_positions",
            SweepParam::TaskCycles => "task_cycles",
            SweepParam::TaskBits => "task_bits",
            SweepParam::PMaxUav => "p_max_uav",
            SweepParam::Bandwidth => "bandwidth",
            SweepParam::FUeMax => "f_ue_max",
            SweepParam::FUavMax => "f_uav_max",
        }
    }
}

/// Settings shared by every cell of a sweep. Task overrides apply to all
/// devices after generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepBase {
    pub n_devices: usize,
    pub m_positions: usize,
    pub area_side_m: f64,
    pub task_bits: Option<f64>,
    pub task_cycles: Option<f64>,
    pub physics: PhysicsConfig,
    pub budget: UavBudget,
    pub solver: SolverConfig,
}

impl Default for SweepBase {
    fn default() -> Self {
        SweepBase {
            n_devices: 50,
            m_positions: 4,
            area_side_m: 1000f64.sqrt(),
            task_bits: None,
            task_cycles: None,
            physics: PhysicsConfig::default(),
            budget: UavBudget::default(),
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
    #[serde(default)]
    pub base: SweepBase,
}

impl SweepSpec {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        if !path.exists() {
            return Err(gjra_core::Error::MissingFile(path.to_path_buf()).into());
        }
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec: SweepSpec = serde_json::from_str(&text).map_err(gjra_core::Error::from)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), gjra_core::Error> {
        let invalid = |field, reason: &str| gjra_core::Error::Validation {
            field,
            reason: reason.to_string(),
        };
        if self.values.is_empty() {
            return Err(invalid("values", "need at least one value"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "need at least one seed"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("schemes", "need at least one scheme"));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(invalid("values", "must be positive and finite"));
        }
        if matches!(self.parameter, SweepParam::NDevices | SweepParam::MPositions)
            && self.values.iter().any(|v| v.fract() != 0.0)
        {
            return Err(invalid("values", "device and position counts must be whole numbers"));
        }
        if self.schemes.contains(&Scheme::Ea) {
            for &v in &self.values {
                let (n, m) = self.size_at(v);
                let candidates = exhaustive_candidates(n, m);
                if candidates > EXHAUSTIVE_LIMIT {
                    return Err(gjra_core::Error::SizeGuard {
                        candidates,
                        limit: EXHAUSTIVE_LIMIT,
                    });
                }
            }
        }
        self.base.solver.validate()
    }

    fn size_at(&self, value: f64) -> (usize, usize) {
        match self.parameter {
            SweepParam::NDevices => (value as usize, self.base.m_positions),
            SweepParam::MPositions => (self.base.n_devices, value as usize),
            _ => (self.base.n_devices, self.base.m_positions),
        }
    }

    /// Scenario of one sweep cell.
    pub fn scenario(&self, value: f64, seed: u64) -> gjra_core::Result<Scenario> {
        let base = &self.base;
        let (n, m) = self.size_at(value);
        let mut physics = base.physics.clone();
        let mut budget = base.budget.clone();
        match self.parameter {
            SweepParam::Bandwidth => physics.bandwidth_hz = value,
            SweepParam::FUeMax => physics.device_freq_max_hz = value,
            SweepParam::PMaxUav => budget.power_max_w = value,
            SweepParam::FUavMax => budget.cpu_max_hz = value,
            _ => {}
        }
        let mut s = generate_scenario(n, m, base.area_side_m, seed, physics, budget, TaskRanges::default())?;
        for d in &mut s.devices {
            if let Some(bits) = base.task_bits {
                d.task_bits = bits;
            }
            if let Some(cycles) = base.task_cycles {
                d.task_cycles = cycles;
            }
            match self.parameter {
                SweepParam::TaskBits => d.task_bits = value,
                SweepParam::TaskCycles => d.task_cycles = value,
                _ => {}
            }
        }
        s.validate()?;
        Ok(s)
    }

    /// Cells in output order: value, then seed, then scheme.
    pub fn cells(&self) -> Vec<(f64, u64, Scheme)> {
        let mut cells = Vec::new();
        for &v in &self.values {
            for &seed in &self.seeds {
                for &scheme in &self.schemes {
                    cells.push((v, seed, scheme));
                }
            }
        }
        cells
    }
}

/// One CSV row. `wall_time_s` is zero unless timing was requested, which
/// keeps repeated sweeps byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub total_latency_s: f64,
    pub rounds: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

pub const ROW_HEADER: [&str; 8] = ["param", "value", "seed", "scheme", "total_latency_s", "rounds", "converged", "wall_time_s"];

impl SweepRow {
    fn record(&self) -> [String; 8] {
        [
            self.param.clone(),
            self.value.to_string(),
            self.seed.to_string(),
            self.scheme.to_string(),
            format_sig(self.total_latency_s),
            self.rounds.to_string(),
            self.converged.to_string(),
            format_sig(self.wall_time_s),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub row: SweepRow,
    /// `None` when the solve failed; the row then reads `converged=false`.
    pub report: Option<SolveReport>,
}

fn run_cell(spec: &SweepSpec, value: f64, seed: u64, scheme: Scheme, timing: bool) -> SweepOutcome {
    let cfg = SolverConfig {
        rng_seed: seed,
        ..spec.base.solver.clone()
    };
    let result = spec.scenario(value, seed).and_then(|s| solve(scheme, &s, &cfg));
    let (row_fields, report) = match result {
        Ok(rep) => ((rep.total_latency_s, rep.rounds, rep.converged, rep.wall_time_s), Some(rep)),
        Err(e) => {
            log::warn!("{} = {value}, seed {seed}, {scheme}: {e}", spec.parameter.name());
            ((f64::NAN, 0, false, 0.0), None)
        }
    };
    let (total, rounds, converged, wall) = row_fields;
    SweepOutcome {
        row: SweepRow {
            param: spec.parameter.name().to_string(),
            value,
            seed,
            scheme,
            total_latency_s: total,
            rounds,
            converged,
            wall_time_s: if timing { wall } else { 0.0 },
        },
        report,
    }
}

/// Runs every cell on `jobs` worker threads (0 = one per core).
pub fn run_sweep(spec: &SweepSpec, jobs: usize, timing: bool) -> anyhow::Result<Vec<SweepOutcome>> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let cells = spec.cells();
    Ok(pool.install(|| {
        cells
            .par_iter()
            .map(|&(v, seed, scheme)| run_cell(spec, v, seed, scheme, timing))
            .collect()
    }))
}

pub fn write_rows<W: Write>(out: W, outcomes: &[SweepOutcome]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROW_HEADER)?;
    for o in outcomes {
        w.write_record(o.row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(input: R) -> anyhow::Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ROW_HEADER {
        bail!("unexpected CSV header {header:?}");
    }
    Ok(r.deserialize().collect::<Result<Vec<SweepRow>, _>>()?)
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    Some(if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) })
}

/// Median over seeds for one (value, scheme) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub param: String,
    pub value: f64,
    pub scheme: Scheme,
    pub median_total_latency_s: Option<f64>,
    /// Median of `(X − EA) / EA` over seeds where both solved.
    pub median_gap_to_ea: Option<f64>,
    pub runs: usize,
    pub failed: usize,
}

pub fn summarize(spec: &SweepSpec, outcomes: &[SweepOutcome]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &v in &spec.values {
        for &scheme in &spec.schemes {
            let rows: Vec<&SweepRow> = outcomes
                .iter()
                .map(|o| &o.row)
                .filter(|r| r.value == v && r.scheme == scheme)
                .collect();
            let totals: Vec<f64> = rows.iter().map(|r| r.total_latency_s).collect();
            let gaps: Vec<f64> = rows
                .iter()
                .filter_map(|r| {
                    outcomes
                        .iter()
                        .find(|o| o.row.value == v && o.row.seed == r.seed && o.row.scheme == Scheme::Ea)
                        .map(|ea| (r.total_latency_s - ea.row.total_latency_s) / ea.row.total_latency_s)
                })
                .collect();
            out.push(SummaryRow {
                param: spec.parameter.name().to_string(),
                value: v,
                scheme,
                median_total_latency_s: median(&totals),
                median_gap_to_ea: median(&gaps),
                runs: rows.len(),
                failed: rows.iter().filter(|r| !r.total_latency_s.is_finite()).count(),
            });
        }
    }
    out
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> anyhow::Result<()> {
    let opt = |x: Option<f64>| x.map(format_sig).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["param", "value", "scheme", "median_total_latency_s", "median_gap_to_ea", "runs", "failed"])?;
    for r in rows {
        w.write_record([
            r.param.clone(),
            r.value.to_string(),
            r.scheme.to_string(),
            opt(r.median_total_latency_s),
            opt(r.median_gap_to_ea),
            r.runs.to_string(),
            r.failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
