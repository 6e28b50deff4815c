//! Acceptance suite. Runs each criterion, prints one PASS/FAIL line per
//! criterion and exits nonzero if any failed.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use gjra_cli::sweep::{median, run_sweep, SweepOutcome, SweepSpec};
use gjra_core::energy::Problem;
use gjra_core::gjra::Scheme;
use gjra_core::verify::{check_allocation, random_column_suite};
use gjra_core::Constraint;

const TREND_SWEEPS: [(&str, bool); 7] = [
    ("n_devices", true),
    ("task_cycles", true),
    ("task_bits", true),
    ("bandwidth", false),
    ("p_max_uav", false),
    ("f_uav_max", false),
    ("f_ue_max", false),
];

struct Verdict {
    name: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn sweep_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("sweeps")
}

fn load(name: &str) -> SweepSpec {
    SweepSpec::load(&sweep_dir().join(format!("{name}.json"))).unwrap_or_else(|e| panic!("loading {name}: {e:#}"))
}

fn run(name: &str) -> (SweepSpec, Vec<SweepOutcome>) {
    let spec = load(name);
    let outcomes = run_sweep(&spec, 0, false).unwrap_or_else(|e| panic!("running {name}: {e:#}"));
    (spec, outcomes)
}

fn timed(name: &'static str, limit: Duration, f: impl FnOnce() -> (bool, String)) -> Verdict {
    let start = Instant::now();
    let (ok, detail) = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let detail = if in_time {
        detail
    } else {
        format!("{detail}; took {:.1} s, limit {} s", elapsed.as_secs_f64(), limit.as_secs())
    };
    Verdict {
        name,
        passed: ok && in_time,
        detail,
        elapsed,
    }
}

fn closed_form_vs_oracles() -> (bool, String) {
    let reports = random_column_suite(100, 0, 1e-6).expect("column suite");
    let failed = reports.iter().filter(|r| !r.passed).count();
    let worst = reports
        .iter()
        .map(|r| r.relative_gap.abs().max(r.grid_relative_gap.abs()))
        .fold(0.0, f64::max);
    let slack = reports
        .iter()
        .flat_map(|r| r.constraint_residuals.iter())
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    (
        failed == 0,
        format!("{} checks on 100 instances, {failed} failed, worst gap {worst:.2e}, worst budget slack {slack:.2e}", reports.len()),
    )
}

fn energy_balance(outcomes: &[SweepOutcome], spec: &SweepSpec) -> (bool, String) {
    let mut solves = 0;
    let mut bad = 0;
    let mut failures = 0;
    for o in outcomes {
        let Some(rep) = &o.report else {
            failures += 1;
            continue;
        };
        solves += 1;
        let s = spec.scenario(o.row.value, o.row.seed).expect("scenario");
        let p = Problem::new(&s).expect("problem");
        let violations = check_allocation(&p, &rep.final_alloc);
        if !violations.is_empty() {
            bad += 1;
            for v in violations.iter().filter(|v| v.constraint == Constraint::EnergyBalance).take(3) {
                eprintln!("  {} seed {}: {}", o.row.scheme, o.row.seed, v.message);
            }
        }
    }
    (
        bad == 0 && failures == 0,
        format!("{solves} solves, {bad} with violations, {failures} failed to solve"),
    )
}

fn sandwich(outcomes: &[SweepOutcome]) -> (bool, String) {
    let total = |value: f64, seed: u64, scheme: Scheme| {
        outcomes
            .iter()
            .find(|o| o.row.value == value && o.row.seed == seed && o.row.scheme == scheme)
            .map(|o| o.row.total_latency_s)
            .unwrap_or(f64::NAN)
    };
    let mut broken = 0;
    let mut rs_diffs = Vec::new();
    let mut ea_gaps = Vec::new();
    let mut instances = 0;
    let cells: Vec<(f64, u64)> = outcomes
        .iter()
        .filter(|o| o.row.scheme == Scheme::Gjra)
        .map(|o| (o.row.value, o.row.seed))
        .collect();
    for (v, seed) in cells {
        instances += 1;
        let (g, r, n, e) = (
            total(v, seed, Scheme::Gjra),
            total(v, seed, Scheme::Rs),
            total(v, seed, Scheme::Np),
            total(v, seed, Scheme::Ea),
        );
        if !(e <= g && g <= n) {
            broken += 1;
            eprintln!("  value {v}, seed {seed}: EA {e}, GJRA {g}, NP {n}");
        }
        rs_diffs.push(g - r);
        ea_gaps.push((g - e) / e);
    }
    let rs_median = median(&rs_diffs).unwrap_or(f64::NAN);
    let gap_median = median(&ea_gaps).unwrap_or(f64::NAN);
    let gap_max = ea_gaps.iter().copied().fold(0.0, f64::max);
    (
        instances == 20 && broken == 0 && rs_median <= 0.0,
        format!(
            "{instances} instances, {broken} break EA <= GJRA <= NP, median GJRA - RS {rs_median:.3e} s, \
             median GJRA-to-EA gap {gap_median:.3e} (max {gap_max:.3e})"
        ),
    )
}

fn trends(sweeps: &[(&str, bool, SweepSpec, Vec<SweepOutcome>)]) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, increasing, spec, outcomes) in sweeps {
        let medians: Vec<f64> = spec
            .values
            .iter()
            .map(|&v| {
                let totals: Vec<f64> = outcomes
                    .iter()
                    .filter(|o| o.row.value == v && o.row.scheme == Scheme::Gjra)
                    .map(|o| o.row.total_latency_s)
                    .collect();
                median(&totals).unwrap_or(f64::NAN)
            })
            .collect();
        let holds = medians.windows(2).all(|w| if *increasing { w[1] > w[0] } else { w[1] <= w[0] });
        ok &= holds;
        let shown: Vec<String> = medians.iter().map(|m| format!("{m:.4}")).collect();
        parts.push(format!(
            "{name} {} [{}]{}",
            if *increasing { "increasing" } else { "non-increasing" },
            shown.join(", "),
            if holds { "" } else { " REVERSED" }
        ));
    }
    (ok, parts.join("; "))
}

fn convergence(all: &[&[SweepOutcome]]) -> (bool, String) {
    let mut solves = 0;
    let mut trips = 0;
    let mut bad = 0;
    let mut max_rounds = 0;
    for outcomes in all {
        for o in outcomes.iter().filter(|o| o.row.scheme == Scheme::Gjra) {
            solves += 1;
            let Some(rep) = &o.report else {
                bad += 1;
                continue;
            };
            max_rounds = max_rounds.max(rep.rounds);
            let trace = &rep.objective_trace;
            let monotone = trace.windows(2).all(|w| w[1] <= w[0]);
            let settled = rep.guard_tripped || trace.windows(2).last().is_some_and(|w| (w[0] - w[1]).abs() < 1e-10);
            if rep.guard_tripped {
                trips += 1;
            }
            if !(rep.converged && settled && monotone && rep.rounds < 200) {
                bad += 1;
                eprintln!("  {} = {}, seed {}: rounds {}, converged {}", o.row.param, o.row.value, o.row.seed, rep.rounds, rep.converged);
            }
        }
    }
    let rate = trips as f64 / solves.max(1) as f64;
    (
        bad == 0 && rate < 0.1,
        format!(
            "{solves} GJRA solves, {bad} unconverged, max rounds {max_rounds}, guard trips {trips} ({:.1}%)",
            100.0 * rate
        ),
    )
}

fn gjra(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_gjra"))
        .args(args)
        .env_remove("GJRA_LOG")
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn determinism() -> (bool, String) {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let sandwich = sweep_dir().join("sandwich.json").to_string_lossy().into_owned();
    let cycles = sweep_dir().join("task_cycles.json").to_string_lossy().into_owned();
    let mut ok = true;
    for run in ["a", "b"] {
        ok &= gjra(&["generate", "--n", "50", "--m", "4", "--seed", "3", "--out", &d(&format!("scenario_{run}.json"))]);
        ok &= gjra(&["solve", &d("scenario_a.json"), "--out", &d(&format!("report_{run}.json"))]);
        ok &= gjra(&["solve", &d("scenario_a.json"), "--scheme", "RS", "--seed", "4", "--out", &d(&format!("rs_{run}.json"))]);
        ok &= gjra(&["sweep", &sandwich, "--out", &d(&format!("sandwich_{run}.csv")), "--jobs", "4"]);
        ok &= gjra(&["sweep", &cycles, "--out", &d(&format!("cycles_{run}.csv")), "--jobs", if run == "a" { "1" } else { "0" }]);
    }
    if !ok {
        return (false, "a command failed".into());
    }
    let files = [
        "scenario_{}.json",
        "report_{}.json",
        "rs_{}.json",
        "sandwich_{}.csv",
        "sandwich_{}.summary.csv",
        "cycles_{}.csv",
        "cycles_{}.summary.csv",
    ];
    let mut differing = Vec::new();
    for f in files {
        let a = std::fs::read(d(&f.replace("{}", "a"))).unwrap_or_default();
        let b = std::fs::read(d(&f.replace("{}", "b"))).unwrap_or_default();
        if a.is_empty() || a != b {
            differing.push(f.replace("_{}", ""));
        }
    }
    (
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} output files byte-identical across reruns", files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let mut verdicts = Vec::new();
    verdicts.push(timed("closed-form allocations match numeric oracles", Duration::from_secs(10), closed_form_vs_oracles));

    let mut balance_runs = None;
    verdicts.push(timed("energy balance after GJRA, NP and RS", Duration::from_secs(30), || {
        let (spec, outcomes) = run("energy_balance");
        let result = energy_balance(&outcomes, &spec);
        balance_runs = Some(outcomes);
        result
    }));

    let mut sandwich_runs = None;
    verdicts.push(timed("EA <= GJRA <= NP sandwich", Duration::from_secs(120), || {
        let (_, outcomes) = run("sandwich");
        let result = sandwich(&outcomes);
        sandwich_runs = Some(outcomes);
        result
    }));

    let mut trend_runs = Vec::new();
    verdicts.push(timed("latency trends", Duration::from_secs(300), || {
        for (name, increasing) in TREND_SWEEPS {
            let (spec, outcomes) = run(name);
            trend_runs.push((name, increasing, spec, outcomes));
        }
        trends(&trend_runs)
    }));

    verdicts.push(timed("GJRA convergence", Duration::from_secs(60), || {
        let mut all: Vec<&[SweepOutcome]> = vec![
            balance_runs.as_deref().unwrap_or_default(),
            sandwich_runs.as_deref().unwrap_or_default(),
        ];
        all.extend(trend_runs.iter().map(|t| t.3.as_slice()));
        convergence(&all)
    }));

    verdicts.push(timed("byte-identical reruns", Duration::from_secs(300), determinism));

    println!();
    for (k, v) in verdicts.iter().enumerate() {
        println!(
            "criterion {}: {} {} ({:.1} s) {}",
            k + 1,
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.elapsed.as_secs_f64(),
            v.detail
        );
    }
    if verdicts.iter().all(|v| v.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
