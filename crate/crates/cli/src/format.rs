use std::fmt::Write as _;

use dplbfgs::solver::{IterationRecord, RunOutcome, StopReason};

pub const HEADER: &str = "iter,obj,rel_err,step_size,sparsa_iters,comm_rounds,comm_scalars_over_d,elapsed_s";

/// C's `%.{prec}e`: mantissa, `e`, sign, at least two exponent digits.
pub fn sci(v: f64, prec: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:.prec$e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub fn row(record: &IterationRecord, comm_dim: usize) -> String {
    let over_d = record.ledger.scalars_transmitted as f64 / comm_dim as f64;
    format!(
        "{},{},{},{},{},{},{},{}",
        record.iter,
        sci(record.objective, 12),
        sci(record.rel_err.unwrap_or(f64::NAN), 12),
        sci(record.step_size, 12),
        record.sparsa_iters,
        record.ledger.rounds,
        sci(over_d, 12),
        sci(record.elapsed_s, 12),
    )
}

pub fn stop_label(stop: &StopReason) -> String {
    match stop {
        StopReason::TargetReached => "target-reached".into(),
        StopReason::Stationary => "stationary".into(),
        StopReason::MaxIterations => "max-iterations".into(),
        StopReason::NoProgress => "no-progress".into(),
        StopReason::Failed(e) => format!("failed: {e}"),
    }
}

/// Header, one row per record and a `#` footer with the totals.
pub fn trace(outcome: &RunOutcome, comm_dim: usize) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for r in &outcome.records {
        out.push_str(&row(r, comm_dim));
        out.push('\n');
    }
    let ledger = outcome.ledger;
    let _ = writeln!(out, "# iterations={}", outcome.records.len().saturating_sub(1));
    let _ = writeln!(out, "# final_obj={}", sci(outcome.final_objective(), 12));
    let _ = writeln!(out, "# comm_rounds={}", ledger.rounds);
    let _ = writeln!(out, "# comm_scalars={}", ledger.scalars_transmitted);
    let _ = writeln!(out, "# comm_scalars_over_d={}", sci(ledger.scalars_transmitted as f64 / comm_dim as f64, 12));
    let _ = writeln!(out, "# stop={}", stop_label(&outcome.stop));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponents() {
        assert_eq!(sci(1.0, 12), "1.000000000000e+00");
        assert_eq!(sci(-0.00123, 3), "-1.230e-03");
        assert_eq!(sci(6.02e23, 2), "6.02e+23");
        assert_eq!(sci(1e-300, 1), "1.0e-300");
        assert_eq!(sci(0.0, 2), "0.00e+00");
        assert_eq!(sci(f64::NAN, 2), "nan");
    }
}
