//! Timing and reporting helpers for the acceptance checks.

use std::io::Write;
use std::time::{Duration, Instant};

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub number: u32,
    pub title: &'static str,
    pub passed: bool,
    pub elapsed: Duration,
    pub limit: Duration,
    pub detail: String,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "{} [{:>2}] {} ({:.1} s, limit {} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.number,
            self.title,
            self.elapsed.as_secs_f64(),
            self.limit.as_secs(),
            self.detail
        )
    }
}

/// Runs `check`, which reports whether its value conditions held, and
/// folds the runtime limit into the verdict.
pub fn evaluate<F>(number: u32, title: &'static str, limit: Duration, check: F) -> Verdict
where
    F: FnOnce() -> (bool, String),
{
    let start = Instant::now();
    let (ok, mut detail) = check();
    let elapsed = start.elapsed();
    if elapsed > limit {
        detail.push_str("; runtime limit exceeded");
    }
    Verdict {
        number,
        title,
        passed: ok && elapsed <= limit,
        elapsed,
        limit,
        detail,
    }
}

/// [`evaluate`], then write the verdict line straight to stderr so it is
/// visible even when the test harness captures output.
pub fn run_criterion<F>(number: u32, title: &'static str, limit: Duration, check: F) -> Verdict
where
    F: FnOnce() -> (bool, String),
{
    let verdict = evaluate(number, title, limit, check);
    let _ = writeln!(std::io::stderr().lock(), "{}", verdict.line());
    verdict
}
