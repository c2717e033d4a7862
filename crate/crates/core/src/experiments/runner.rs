//! Static-partition parallel map over replications.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::thread;

use crate::error::{Error, Result};

/// Resolves a configured worker count; 0 means one per available core.
pub fn effective_workers(workers: usize) -> usize {
    if workers > 0 {
        workers
    } else {
        thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

/// Outcome of `reps` replications, merged by replication index.
#[derive(Debug)]
pub struct RepResults<T> {
    pub outcomes: Vec<Option<T>>,
    /// First failure, kept for diagnostics when every replication fails.
    pub first_error: Option<Error>,
}

impl<T> RepResults<T> {
    pub fn failed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_none()).count()
    }

    /// Successful outcomes in replication order.
    pub fn successes(&self) -> impl Iterator<Item = &T> {
        self.outcomes.iter().flatten()
    }

    /// Errors out when nothing succeeded.
    pub fn require_any(self) -> Result<Self> {
        if self.outcomes.iter().any(Option::is_some) {
            return Ok(self);
        }
        Err(self
            .first_error
            .unwrap_or_else(|| Error::InvalidInput("no replications were run".into())))
    }
}

/// Runs `f(0..reps)` over `workers` threads, each owning one contiguous block
/// of replication indices. A replication that errors or panics is recorded
/// as failed and never retried. Output does not depend on `workers`.
pub fn run_reps<T, F>(reps: usize, workers: usize, f: F) -> RepResults<T>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = effective_workers(workers).clamp(1, reps.max(1));
    let chunk = reps.div_ceil(workers);
    let run_one = |rep: usize| -> std::result::Result<T, Option<Error>> {
        match catch_unwind(AssertUnwindSafe(|| f(rep))) {
            Ok(Ok(v)) => Ok(v),
            Ok(Err(e)) => Err(Some(e)),
            Err(_) => Err(None),
        }
    };

    let blocks: Vec<Vec<std::result::Result<T, Option<Error>>>> = if workers == 1 {
        vec![(0..reps).map(run_one).collect()]
    } else {
        thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run_one = &run_one;
                    let lo = (w * chunk).min(reps);
                    let hi = ((w + 1) * chunk).min(reps);
                    scope.spawn(move || (lo..hi).map(run_one).collect::<Vec<_>>())
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("replication panics are caught inside the worker"))
                .collect()
        })
    };

    let mut outcomes = Vec::with_capacity(reps);
    let mut first_error = None;
    for r in blocks.into_iter().flatten() {
        match r {
            Ok(v) => outcomes.push(Some(v)),
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e.unwrap_or_else(|| Error::InvalidInput("replication panicked".into())));
                }
                outcomes.push(None);
            }
        }
    }
    RepResults { outcomes, first_error }
}

/// Mean and standard error (sample standard deviation over `√count`) of a
/// sequence; the error is infinite for fewer than two values.
pub fn mean_stderr(values: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for x in values {
        count += 1;
        let d = x - mean;
        mean += d / count as f64;
        m2 += d * (x - mean);
    }
    match count {
        0 => (f64::NAN, f64::INFINITY),
        1 => (mean, f64::INFINITY),
        _ => (mean, (m2 / (count - 1) as f64 / count as f64).sqrt()),
    }
}

/// Order statistic at rank `⌈q·len⌉` (1-based, clamped to the sample) of
/// already sorted values; no interpolation.
pub fn order_statistic(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() || !(q > 0.0) {
        return f64::NAN;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_is_independent_of_workers() {
        let f = |i: usize| -> Result<f64> { Ok((i as f64).sin()) };
        let one: Vec<_> = run_reps(37, 1, f).outcomes;
        for w in [2, 3, 8, 64] {
            assert_eq!(run_reps(37, w, f).outcomes, one);
        }
    }

    #[test]
    fn failures_are_counted_not_retried() {
        let prev = std::panic::take_hook();
        std::panic::set_hook(Box::new(|_| {}));
        let r = run_reps(10, 3, |i| {
            if i == 4 {
                panic!("boom");
            }
            if i == 7 {
                return Err(Error::InvalidInput("bad".into()));
            }
            Ok(i)
        });
        std::panic::set_hook(prev);
        assert_eq!(r.failed(), 2);
        assert_eq!(r.successes().copied().collect::<Vec<_>>(), vec![0, 1, 2, 3, 5, 6, 8, 9]);
        assert!(r.outcomes[4].is_none() && r.outcomes[7].is_none());

        let none = run_reps(3, 1, |_| -> Result<()> { Err(Error::Unsupported("x".into())) });
        assert!(matches!(none.require_any(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn stats_helpers() {
        let (m, s) = mean_stderr([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr([3.0]).1, f64::INFINITY);
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(order_statistic(&v, 0.5), 3.0);
        assert_eq!(order_statistic(&v, 0.61), 4.0);
        assert_eq!(order_statistic(&v, 1.0), 5.0);
        assert_eq!(order_statistic(&v, 0.01), 1.0);
        assert!(order_statistic(&v, 0.0).is_nan());
    }
}
