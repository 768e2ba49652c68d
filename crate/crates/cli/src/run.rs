//! Executes sweep points, either on the simulator or from the exact ledgers.

use anyhow::{anyhow, bail, Context};
use capsim::baselines::{cannon_ledger, exact_sqrt, strassen_two_d_ledger, two_d_strassen_ledger};
use capsim::caps::auto_schedule;
use capsim::costmodel::{caps_schedule_ledger, PredictedLedger};
use capsim::layout::log7_exact;
use capsim::simnet::effective_gflops;
use capsim::{
    cannon_multiply, caps_multiply, strassen_two_d, two_d_strassen, BilinearAlgorithm,
    CostReport, MachineParams, Matrix, RunRecord, Schedule, SimMachine,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Algorithm, Config, ScheduleSpec};

/// A run finished but broke one of the simulator's guarantees.
#[derive(Debug, thiserror::Error)]
#[error("invariant violated for {algorithm} n={n} P={p}: {what}")]
pub struct Violation {
    pub algorithm: Algorithm,
    pub n: usize,
    pub p: usize,
    pub what: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Point {
    pub algorithm: Algorithm,
    pub n: usize,
    pub p: usize,
}

/// One output row plus the full report behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub record: RunRecord,
    /// `None` for cost-model-only rows.
    pub report: Option<CostReport>,
    /// `max|C − AB| / (n·max|A|·max|B|)` against the classical product.
    pub relative_error: Option<f64>,
}

/// Whether `p` has the processor-grid shape `alg` needs.
pub fn shape_fits(alg: Algorithm, p: usize) -> bool {
    match alg {
        Algorithm::Caps => log7_exact(p).is_some(),
        _ => exact_sqrt(p).is_some(),
    }
}

/// All (algorithm, n, P) points in output order. Points whose processor
/// count has the wrong shape for the algorithm are dropped.
pub fn points(config: &Config) -> (Vec<Point>, Vec<Point>) {
    let mut keep = Vec::new();
    let mut skipped = Vec::new();
    for &algorithm in &config.algorithm {
        for &n in &config.n {
            for &p in &config.p {
                let pt = Point { algorithm, n, p };
                if shape_fits(algorithm, p) {
                    keep.push(pt);
                } else {
                    skipped.push(pt);
                }
            }
        }
    }
    (keep, skipped)
}

pub fn run_config(config: &Config) -> anyhow::Result<Vec<PointResult>> {
    config.validate()?;
    let (pts, _) = points(config);
    if pts.is_empty() {
        bail!("no (algorithm, P) combination has a valid processor grid");
    }
    let alg = config.flavor.algorithm();
    let results: Vec<anyhow::Result<PointResult>> =
        pts.par_iter().map(|pt| run_point(config, &alg, *pt)).collect();
    results.into_iter().collect()
}

pub fn inputs(n: usize, seed: u64) -> (Matrix, Matrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Matrix::random_uniform(n, n, &mut rng);
    let b = Matrix::random_uniform(n, n, &mut rng);
    (a, b)
}

fn caps_schedule(config: &Config, n: usize, p: usize) -> anyhow::Result<Schedule> {
    Ok(match &config.schedule {
        ScheduleSpec::Auto => auto_schedule(n, p, config.m)?,
        ScheduleSpec::Fixed(s) => s.clone(),
    })
}

fn predicted(
    config: &Config,
    alg: &BilinearAlgorithm,
    pt: Point,
    schedule: Option<&Schedule>,
) -> anyhow::Result<PredictedLedger> {
    let (n, p) = (pt.n as u64, pt.p as u64);
    let from_baseline = |l: Option<capsim::baselines::BaselineLedger>| {
        l.map(|l| PredictedLedger {
            flops: l.flops,
            words: l.words,
            messages: l.messages,
            peak_memory: l.peak_memory,
        })
    };
    let ell = config.ell;
    let ledger = match pt.algorithm {
        Algorithm::Caps => Some(caps_schedule_ledger(
            alg,
            pt.n,
            pt.p,
            schedule.expect("caps has a schedule"),
            config.cutoff,
        )?),
        Algorithm::Cannon => from_baseline(cannon_ledger(n, p)),
        Algorithm::TwoDStrassen => from_baseline(two_d_strassen_ledger(alg, n, p, config.cutoff)),
        Algorithm::StrassenTwoD => from_baseline(strassen_two_d_ledger(alg, n, p, ell)),
    };
    ledger.ok_or_else(|| {
        let g = exact_sqrt(pt.p).unwrap_or(1);
        let required = match pt.algorithm {
            Algorithm::StrassenTwoD => g << ell,
            _ => g,
        };
        anyhow!(
            "{}: n = {} must be a multiple of {required} for P = {} (nearest admissible: {})",
            pt.algorithm,
            pt.n,
            pt.p,
            pt.n.div_ceil(required).max(1) * required
        )
    })
}

fn simulate(
    config: &Config,
    alg: &BilinearAlgorithm,
    pt: Point,
    schedule: Option<&Schedule>,
    params: &MachineParams,
) -> anyhow::Result<(CostReport, f64)> {
    let (a, b) = inputs(pt.n, config.seed);
    let mut machine = SimMachine::new(*params)?;
    machine.set_message_log(false);
    let (c, report) = match pt.algorithm {
        Algorithm::Caps => caps_multiply(
            &mut machine,
            &a,
            &b,
            schedule.expect("caps has a schedule"),
            alg,
            config.cutoff,
        )?,
        Algorithm::Cannon => cannon_multiply(&mut machine, &a, &b)?,
        Algorithm::TwoDStrassen => two_d_strassen(&mut machine, &a, &b, alg, config.cutoff)?,
        Algorithm::StrassenTwoD => strassen_two_d(&mut machine, &a, &b, config.ell, alg)?,
    };
    let oracle = a.classical_mul(&b)?;
    let scale = pt.n as f64 * a.max_abs() * b.max_abs();
    let err = if scale > 0.0 {
        c.max_abs_diff(&oracle) / scale
    } else {
        c.max_abs_diff(&oracle)
    };
    Ok((report, err))
}

pub fn run_point(config: &Config, alg: &BilinearAlgorithm, pt: Point) -> anyhow::Result<PointResult> {
    let params = config.machine(pt.p);
    let schedule = match pt.algorithm {
        Algorithm::Caps => Some(caps_schedule(config, pt.n, pt.p)?),
        _ => None,
    };
    let ctx = || format!("{} n={} P={}", pt.algorithm, pt.n, pt.p);
    let ledger = predicted(config, alg, pt, schedule.as_ref()).with_context(ctx)?;
    let violation = |what: String| Violation {
        algorithm: pt.algorithm,
        n: pt.n,
        p: pt.p,
        what,
    };
    if let Some(m) = config.m {
        if ledger.peak_memory > m {
            bail!(
                "{}: needs {} words per processor, M = {m}",
                ctx(),
                ledger.peak_memory
            );
        }
    }
    let ell = match pt.algorithm {
        Algorithm::Caps => schedule.as_ref().map(|s| s.ell()),
        Algorithm::StrassenTwoD => Some(config.ell),
        _ => None,
    };
    let sched_str = schedule.as_ref().map(|s| s.to_string()).unwrap_or_default();
    if config.costmodel_only {
        let t = params.modeled_time(ledger.messages, ledger.words, ledger.flops);
        let record = RunRecord {
            algorithm: pt.algorithm.to_string(),
            n: pt.n,
            p: pt.p,
            m: config.m,
            ell,
            schedule: sched_str,
            flops_crit: ledger.flops,
            words_crit: ledger.words,
            msgs_crit: ledger.messages,
            peak_mem: ledger.peak_memory,
            modeled_time: t,
            effective_gflops: effective_gflops(pt.n, t),
        };
        return Ok(PointResult {
            record,
            report: None,
            relative_error: None,
        });
    }
    let (report, err) = simulate(config, alg, pt, schedule.as_ref(), &params).with_context(ctx)?;
    if err.is_nan() || err > 1e-10 {
        return Err(violation(format!("relative error {err:e} above 1e-10")).into());
    }
    report
        .check_invariants(&params)
        .map_err(&violation)?;
    let got = (
        report.flops_critical,
        report.words_critical,
        report.messages_critical,
        report.peak_memory_words,
    );
    let want = (ledger.flops, ledger.words, ledger.messages, ledger.peak_memory);
    if got != want {
        return Err(violation(format!(
            "ledger (flops, words, messages, peak) = {got:?}, closed form {want:?}"
        ))
        .into());
    }
    let record = RunRecord::from_report(pt.algorithm.name(), pt.n, &params, ell, sched_str, &report);
    Ok(PointResult {
        record,
        report: Some(report),
        relative_error: Some(err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_filter_points() {
        let c = Config {
            algorithm: vec![Algorithm::Caps, Algorithm::Cannon],
            p: vec![4, 7, 49],
            ..Config::default()
        };
        let (keep, skipped) = points(&c);
        let ps: Vec<_> = keep.iter().map(|p| (p.algorithm, p.p)).collect();
        assert_eq!(
            ps,
            [(Algorithm::Caps, 7), (Algorithm::Caps, 49), (Algorithm::Cannon, 4), (Algorithm::Cannon, 49)]
        );
        assert_eq!(skipped.len(), 2);
    }

    #[test]
    fn simulated_and_predicted_rows_agree() {
        let mut c = Config {
            algorithm: Algorithm::ALL.to_vec(),
            n: vec![56],
            p: vec![4, 7, 49],
            ..Config::default()
        };
        let sim = run_config(&c).unwrap();
        c.costmodel_only = true;
        let model = run_config(&c).unwrap();
        assert_eq!(sim.len(), model.len());
        for (s, m) in sim.iter().zip(&model) {
            assert_eq!(s.record, m.record);
        }
    }

    #[test]
    fn divisibility_errors_name_nearest_n() {
        let c = Config {
            algorithm: vec![Algorithm::Cannon],
            n: vec![50],
            p: vec![16],
            ..Config::default()
        };
        let e = format!("{:#}", run_config(&c).unwrap_err());
        assert!(e.contains("nearest admissible: 52"), "{e}");
        let c = Config {
            n: vec![50],
            ..Config::default()
        };
        let e = format!("{:#}", run_config(&c).unwrap_err());
        assert!(e.contains("nearest admissible: 56"), "{e}");
    }

    #[test]
    fn memory_limit_is_enforced() {
        let c = Config {
            m: Some(3000),
            schedule: "B".parse().unwrap(),
            ..Config::default()
        };
        assert!(run_config(&c).is_err());
    }
}
