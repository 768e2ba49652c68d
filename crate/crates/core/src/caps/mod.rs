//! Communication-avoiding parallel Strassen.
//!
//! The recursion tree is traversed by an explicit [`Schedule`]. A BFS step
//! hands the seven subproblems to seven disjoint groups of `P/7` processors
//! (three 7-way all-to-alls: left factors, right factors, products). A DFS
//! step solves them one after another on all `P` processors without
//! communicating.
//!
//! Memory model per processor: the input and output shards take `3n²/P`
//! words. A BFS step at `(n, P)` adds seven triples of quadrant buffers,
//! `21·(n/2)²/P` words, which the subproblems reuse as their own inputs and
//! output. A DFS step adds one triple, `3·(n/2)²/P`.

mod engine;
mod schedule;

pub use engine::caps_multiply;
pub use schedule::{Schedule, Step};

use num_bigint::BigUint;

use crate::error::{CapsError, LayoutError};
use crate::layout::{log7_exact, Layout};

/// How the number of DFS steps is chosen when memory is limited.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EllMode {
    /// `max{0, ⌈log2(4n / (P^{1/ω0} M^{1/2}))⌉}` exactly.
    #[default]
    Formula,
    /// The smallest `ell` whose DFS-then-BFS schedule fits in `M`.
    Tight,
}

fn log7(p: usize) -> Result<u32, CapsError> {
    Ok(log7_exact(p).ok_or(LayoutError::NotPowerOfSeven(p))?)
}

/// `9n² ≤ M·P`: the inputs and output take at most a third of memory.
pub fn fits_memory_constraint(n: usize, p: usize, m: u64) -> bool {
    9 * (n as u128).pow(2) <= m as u128 * p as u128
}

/// Number of DFS steps for the limited-memory scheme.
///
/// With `P = 7^k`, `P^{1/ω0} = 2^k`, so the ceiling is evaluated exactly as the
/// smallest `ell ≥ 0` with `16n² ≤ 4^{ell+k}·M`.
pub fn compute_ell(n: usize, p: usize, m: u64) -> Result<u32, CapsError> {
    let k = log7(p)?;
    if !fits_memory_constraint(n, p, m) {
        return Err(CapsError::InsufficientMemory { n, p, m });
    }
    let need = BigUint::from(16u32) * BigUint::from(n).pow(2);
    let mut have = BigUint::from(m) << (2 * k as usize);
    let mut ell = 0;
    while have < need {
        have <<= 2;
        ell += 1;
    }
    Ok(ell)
}

pub fn compute_ell_with(n: usize, p: usize, m: u64, mode: EllMode) -> Result<u32, CapsError> {
    let ell = compute_ell(n, p, m)?;
    if mode == EllMode::Formula {
        return Ok(ell);
    }
    let k = log7(p)?;
    for cand in 0..ell {
        if schedule_fits(&Schedule::dfs_then_bfs(cand, k), n, p, m) {
            return Ok(cand);
        }
    }
    Ok(ell)
}

/// `ell` DFS steps followed by `log7 P` BFS steps, `ell` from [`compute_ell`].
pub fn default_schedule(n: usize, p: usize, m: u64) -> Result<Schedule, CapsError> {
    default_schedule_with(n, p, m, EllMode::Formula)
}

pub fn default_schedule_with(
    n: usize,
    p: usize,
    m: u64,
    mode: EllMode,
) -> Result<Schedule, CapsError> {
    let ell = compute_ell_with(n, p, m, mode)?;
    Ok(Schedule::dfs_then_bfs(ell, log7(p)?))
}

/// All-BFS if it fits in `m` (or memory is unlimited), else the limited-memory schedule.
pub fn auto_schedule(n: usize, p: usize, m: Option<u64>) -> Result<Schedule, CapsError> {
    let k = log7(p)?;
    let um = Schedule::all_bfs(k);
    match m {
        None => Ok(um),
        Some(m) if schedule_fits(&um, n, p, m) => Ok(um),
        Some(m) => default_schedule(n, p, m),
    }
}

/// Peak words per processor as an exact fraction `(num, den)`, without
/// requiring `n` to be admissible.
pub fn schedule_peak_fraction(schedule: &Schedule, n: usize, p: usize) -> (u128, u128) {
    let s = schedule.len() as u32;
    // Unit: n² / (P · 4^s).
    let mut units: u128 = 3 * 4u128.pow(s);
    let mut bfs_done = 0u32;
    for (d, step) in schedule.steps().iter().enumerate() {
        let quad = 7u128.pow(bfs_done) * 4u128.pow(s - d as u32 - 1);
        match step {
            Step::Bfs => {
                units += 21 * quad;
                bfs_done += 1;
            }
            Step::Dfs => units += 3 * quad,
        }
    }
    (
        units * (n as u128).pow(2),
        p as u128 * 4u128.pow(s),
    )
}

fn schedule_fits(schedule: &Schedule, n: usize, p: usize, m: u64) -> bool {
    let (num, den) = schedule_peak_fraction(schedule, n, p);
    num <= m as u128 * den
}

/// Checks the schedule against `(n, P, M)` and returns the peak words per
/// processor the run will reach.
pub fn validate_schedule(
    schedule: &Schedule,
    n: usize,
    p: usize,
    m: Option<u64>,
) -> Result<u64, CapsError> {
    let k = log7(p)?;
    if schedule.k() != k {
        return Err(CapsError::BfsCount {
            expected: k,
            got: schedule.k(),
            p,
        });
    }
    Layout::new(n, p, schedule.len() as u32)?;
    let (num, den) = schedule_peak_fraction(schedule, n, p);
    debug_assert_eq!(num % den, 0);
    let peak = (num / den) as u64;
    if let Some(cap) = m {
        if peak > cap {
            return Err(CapsError::ScheduleExceedsMemory {
                peak,
                capacity: cap,
            });
        }
    }
    Ok(peak)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ell_examples() {
        assert_eq!(compute_ell(1024, 7, 1 << 22).unwrap(), 0);
        assert_eq!(compute_ell(1024, 7, 1 << 21).unwrap(), 1);
        assert_eq!(compute_ell(1024, 7, u64::MAX).unwrap(), 0);
        assert!(matches!(
            compute_ell(1024, 7, 1000),
            Err(CapsError::InsufficientMemory { .. })
        ));
        assert!(compute_ell(1024, 8, 1 << 30).is_err());
    }

    #[test]
    fn default_schedules() {
        assert_eq!(default_schedule(56, 7, 1 << 30).unwrap().to_string(), "B");
        assert_eq!(default_schedule(1024, 7, 1 << 21).unwrap().to_string(), "DB");
        assert!(default_schedule(64, 1, 1 << 20).unwrap().is_empty());
    }

    #[test]
    fn um_peak_56_7() {
        let peak = validate_schedule(&Schedule::all_bfs(1), 56, 7, None).unwrap();
        assert_eq!(peak, 3696);
        assert_eq!(peak, 7 * 56 * 56 / 4 - 4 * 56 * 56 / 7);
    }

    #[test]
    fn um_does_not_fit_in_input_memory() {
        for (n, p) in [(56usize, 7usize), (196, 49)] {
            let m = (n * n / p) as u64;
            assert!(matches!(
                validate_schedule(&Schedule::all_bfs(log7_exact(p).unwrap()), n, p, Some(m)),
                Err(CapsError::ScheduleExceedsMemory { .. })
            ));
        }
    }

    #[test]
    fn bfs_count_is_checked() {
        assert!(matches!(
            validate_schedule(&"DB".parse().unwrap(), 112, 49, None),
            Err(CapsError::BfsCount { expected: 2, got: 1, .. })
        ));
    }

    #[test]
    fn auto_prefers_um() {
        assert_eq!(auto_schedule(56, 7, Some(3696)).unwrap().to_string(), "B");
        assert_eq!(auto_schedule(56, 7, None).unwrap().to_string(), "B");
        // Mem_UM(392, 49) = 54684.
        assert_eq!(auto_schedule(392, 49, Some(54684)).unwrap().to_string(), "BB");
        assert_eq!(auto_schedule(392, 49, Some(54683)).unwrap().to_string(), "DBB");
    }

    #[test]
    fn tight_never_exceeds_formula() {
        for m in [1u64 << 21, 1 << 22, 1 << 23] {
            let formula = compute_ell_with(1024, 7, m, EllMode::Formula).unwrap();
            let tight = compute_ell_with(1024, 7, m, EllMode::Tight).unwrap();
            assert!(tight <= formula);
            assert!(schedule_fits(&Schedule::dfs_then_bfs(tight, 1), 1024, 7, m));
        }
    }
}
