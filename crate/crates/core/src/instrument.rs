//! Exponentiation counting.
//!
//! Every call to [`Group::exp`](crate::group::Group::exp) bumps a thread-local
//! counter. Counters are per thread so that concurrently running measurements
//! (and tests) never see each other's work.

use std::cell::Cell;

thread_local! {
    static EXP_COUNT: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn record_exp() {
    EXP_COUNT.with(|c| c.set(c.get() + 1));
}

/// Number of instrumented exponentiations performed on this thread since the
/// last reset.
pub fn exp_count() -> u64 {
    EXP_COUNT.with(Cell::get)
}

pub fn reset_exp_count() {
    EXP_COUNT.with(|c| c.set(0));
}

/// Runs `f` and returns its result with the number of exponentiations it
/// performed on the current thread.
pub fn count_exps<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = exp_count();
    let out = f();
    (out, exp_count() - before)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_is_exact() {
        reset_exp_count();
        for _ in 0..17 {
            record_exp();
        }
        assert_eq!(exp_count(), 17);
        let ((), n) = count_exps(|| {
            record_exp();
            record_exp();
        });
        assert_eq!(n, 2);
        assert_eq!(exp_count(), 19);
    }

    #[test]
    fn counters_are_per_thread() {
        reset_exp_count();
        record_exp();
        std::thread::spawn(|| {
            assert_eq!(exp_count(), 0);
            record_exp();
        })
        .join()
        .unwrap();
        assert_eq!(exp_count(), 1);
    }
}
