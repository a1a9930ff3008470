//! The eight acceptance criteria as plain functions, and a runner that times
//! each one against its budget and prints a verdict line.

pub mod criteria;
#[path = "../../core/tests/common/oracle.rs"]
pub mod oracle;

use std::io::Write;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

/// `Ok(summary)` or `Err(what failed)`.
pub type Verdict = Result<String, String>;

pub struct Criterion {
    pub number: usize,
    pub name: &'static str,
    pub budget: Duration,
    pub run: fn() -> Verdict,
}

pub fn all() -> Vec<Criterion> {
    let c = |number, name, secs, run| Criterion { number, name, budget: Duration::from_secs(secs), run };
    vec![
        c(1, "table arithmetic", 1, criteria::table_arithmetic),
        c(2, "CSP suite", 10, criteria::csp_suite),
        c(3, "filter suite", 10, criteria::filter_suite),
        c(4, "end-to-end oracle", 120, criteria::end_to_end),
        c(5, "SVM suite", 10, criteria::svm_suite),
        c(6, "protocol conformance", 30, criteria::protocol_conformance),
        c(7, "determinism", 120, criteria::determinism),
        c(8, "topomap contract", 5, criteria::topomap_contract),
    ]
}

/// Runs one criterion, turning panics and budget overruns into failures.
pub fn evaluate(criterion: &Criterion) -> (Verdict, Duration) {
    let start = Instant::now();
    let verdict = panic::catch_unwind(AssertUnwindSafe(criterion.run)).unwrap_or_else(|e| {
        let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(format!("panicked: {}", msg.unwrap_or_default()))
    });
    let elapsed = start.elapsed();
    let verdict = match verdict {
        Ok(detail) if elapsed > criterion.budget => {
            Err(format!("over time budget ({elapsed:.1?} > {:.0?}): {detail}", criterion.budget))
        }
        v => v,
    };
    (verdict, elapsed)
}

/// Prints one line per criterion and a summary; returns the failure count.
pub fn run_all(out: &mut impl Write) -> usize {
    let criteria = all();
    let mut failed = 0;
    for c in &criteria {
        let (verdict, elapsed) = evaluate(c);
        let (word, detail) = match &verdict {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(out, "criterion {} ({}): {word} in {elapsed:.2?} - {detail}", c.number, c.name).unwrap();
        out.flush().unwrap();
    }
    writeln!(out, "acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len()).unwrap();
    failed
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_criteria_in_order() {
        let numbers: Vec<usize> = all().iter().map(|c| c.number).collect();
        assert_eq!(numbers, (1..=8).collect::<Vec<_>>());
    }

    #[test]
    fn panics_and_overruns_fail() {
        let boom = Criterion { number: 0, name: "boom", budget: Duration::from_secs(1), run: || panic!("kaput") };
        let (v, _) = evaluate(&boom);
        assert!(v.unwrap_err().contains("kaput"));
        let slow = Criterion {
            number: 0,
            name: "slow",
            budget: Duration::ZERO,
            run: || {
                std::thread::sleep(Duration::from_millis(2));
                Ok("done".into())
            },
        };
        assert!(evaluate(&slow).0.unwrap_err().contains("over time budget"));
    }
}
