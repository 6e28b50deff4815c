//! Library side of the `gjra` command: sweeps, scheme comparison, number
//! formatting and the mapping from errors to exit codes.

pub mod sweep;

use gjra_core::gjra::{exhaustive_candidates, solve, Scheme, SolveReport, EXHAUSTIVE_LIMIT};
use gjra_core::model::{Scenario, SolverConfig};

/// Exit status for a failed verification run.
pub const EXIT_VERIFY_FAILED: i32 = 5;

/// Formats `v` with 12 significant digits, plain for moderate magnitudes
/// and in exponent form otherwise.
pub fn format_sig(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{v:.11e}");
    let exp: i32 = sci[sci.find('e').expect("exponent form") + 1..].parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let fixed = format!("{:.*}", (11 - exp) as usize, v);
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let (mant, e) = sci.split_at(sci.find('e').expect("exponent form"));
        let mant = mant.trim_end_matches('0').trim_end_matches('.');
        format!("{mant}{e}")
    }
}

/// Exit code for an error: 1 for I/O and missing files, 2 for invalid
/// input, 3 for infeasibility, 4 when the exhaustive search refuses.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use gjra_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::Validation { .. } | E::VersionMismatch { .. } | E::Json(_) | E::NonPositive { .. }) => 2,
        Some(E::Infeasible { .. } | E::Domain { .. }) => 3,
        Some(E::SizeGuard { .. }) => 4,
        Some(E::MissingFile(_) | E::Io { .. }) => 1,
        None => 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub scheme: Scheme,
    pub total_latency_s: f64,
    /// `(X − EA) / EA`.
    pub gap_to_ea: f64,
    pub report: SolveReport,
}

/// Solves with all four schemes and measures each against the exhaustive optimum.
pub fn compare(s: &Scenario, cfg: &SolverConfig) -> gjra_core::Result<Vec<Comparison>> {
    let candidates = exhaustive_candidates(s.n(), s.m());
    if candidates > EXHAUSTIVE_LIMIT {
        return Err(gjra_core::Error::SizeGuard {
            candidates,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let ea = solve(Scheme::Ea, s, cfg)?.total_latency_s;
    Scheme::ALL
        .iter()
        .map(|&scheme| {
            let report = solve(scheme, s, cfg)?;
            Ok(Comparison {
                scheme,
                total_latency_s: report.total_latency_s,
                gap_to_ea: (report.total_latency_s - ea) / ea,
                report,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use gjra_core::model::{generate_scenario, PhysicsConfig, TaskRanges, UavBudget};

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_sig(29.2238041234567), "29.2238041235");
        assert_eq!(format_sig(0.1), "0.1");
        assert_eq!(format_sig(1e-7), "1e-7");
        assert_eq!(format_sig(123456789012345.0), "1.23456789012e14");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(9.99999999999951), "10");
        assert_eq!(format_sig(f64::NAN), "NaN");
        for v in [1.23456789e-3, 2.5e-3, 7.0e20] {
            let back: f64 = format_sig(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 1e-11);
        }
    }

    #[test]
    fn exit_codes_by_error_kind() {
        let code = |e: gjra_core::Error| exit_code(&anyhow::Error::from(e));
        assert_eq!(code(gjra_core::Error::MissingFile("x".into())), 1);
        assert_eq!(
            code(gjra_core::Error::Validation {
                field: "n",
                reason: "bad".into()
            }),
            2
        );
        assert_eq!(
            code(gjra_core::Error::SizeGuard {
                candidates: 1e9,
                limit: 1e7
            }),
            4
        );
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 1);
    }

    #[test]
    fn comparison_gaps_are_non_negative() {
        let s = generate_scenario(2, 2, 1000f64.sqrt(), 5, PhysicsConfig::default(), UavBudget::default(), TaskRanges::default())
            .unwrap();
        let rows = compare(&s, &SolverConfig::default()).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.gap_to_ea >= 0.0));
        let single = generate_scenario(1, 1, 10.0, 5, PhysicsConfig::default(), UavBudget::default(), TaskRanges::default()).unwrap();
        let rows = compare(&single, &SolverConfig::default()).unwrap();
        assert!(rows.iter().all(|r| r.total_latency_s == rows[0].total_latency_s));
    }
}
