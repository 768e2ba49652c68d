//! Closed-form costs: exact CAPS ledgers, asymptotic rows for the competing
//! algorithms, communication lower bounds, the classical/Strassen bandwidth
//! ratio and the hardware-balance conditions.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::bilinear::{admissible_size, flop_count, leading_constant, BilinearAlgorithm};
use crate::caps::{validate_schedule, Schedule, Step};
use crate::error::{CapsError, CostModelError};
use crate::layout::log7_exact;

/// `log2 7`.
pub fn omega0() -> f64 {
    7f64.log2()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exactness {
    /// Carries exact constants.
    Exact,
    /// Leading-order term with unit constant.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTriple {
    pub flops: f64,
    pub bandwidth_words: f64,
    pub latency_messages: f64,
    pub exactness: Exactness,
}

impl CostTriple {
    fn asymptotic(flops: f64, bandwidth_words: f64, latency_messages: f64) -> Self {
        Self {
            flops,
            bandwidth_words,
            latency_messages,
            exactness: Exactness::Asymptotic,
        }
    }
}

fn positive(vals: &[f64]) -> Result<(), CostModelError> {
    if vals.iter().all(|v| v.is_finite() && *v > 0.0) {
        Ok(())
    } else {
        Err(CostModelError::NonPositive)
    }
}

fn as_power_of_seven(p: f64) -> Option<u32> {
    if p.fract() != 0.0 || p < 1.0 || p > usize::MAX as f64 {
        return None;
    }
    log7_exact(p as usize)
}

/// `P^{2/ω0}`, exactly `4^k` when `P = 7^k`.
pub fn p_pow_two_over_omega(p: f64) -> f64 {
    match as_power_of_seven(p) {
        Some(k) => 4f64.powi(k as i32),
        None => p.powf(2.0 / omega0()),
    }
}

/// `log7 P`, exact for powers of 7.
pub fn log7(p: f64) -> f64 {
    match as_power_of_seven(p) {
        Some(k) => k as f64,
        None => p.ln() / 7f64.ln(),
    }
}

/// Flop model of the local scheme: additions per level and base size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopModel {
    pub adds: u64,
    pub base: u64,
}

impl FlopModel {
    pub const WINOGRAD: FlopModel = FlopModel { adds: 15, base: 8 };
    pub const STRASSEN: FlopModel = FlopModel { adds: 18, base: 8 };

    /// `c_s·n^{ω0} − (adds/3)·n²`.
    pub fn sequential(&self, n: f64) -> f64 {
        leading_constant(self.adds, self.base) * n.powf(omega0()) - self.adds as f64 / 3.0 * n * n
    }
}

impl Default for FlopModel {
    fn default() -> Self {
        Self::WINOGRAD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapsVariant {
    Um,
    Lm,
    Auto,
}

/// `12n²/P^{2/ω0} − 12n²/P`.
pub fn bw_um(n: f64, p: f64) -> f64 {
    12.0 * n * n / p_pow_two_over_omega(p) - 12.0 * n * n / p
}

/// `36·log7 P`.
pub fn l_um(p: f64) -> f64 {
    36.0 * log7(p)
}

/// `7n²/P^{2/ω0} − 4n²/P`.
pub fn mem_um(n: f64, p: f64) -> f64 {
    7.0 * n * n / p_pow_two_over_omega(p) - 4.0 * n * n / p
}

/// Number of DFS steps, `max{0, ⌈log2(4n/(P^{1/ω0}·M^{1/2}))⌉}`, evaluated as the
/// smallest `ell` with `16n² ≤ 4^ell·P^{2/ω0}·M`.
pub fn ell_lm(n: f64, p: f64, m: f64) -> u32 {
    let need = 16.0 * n * n;
    let mut have = p_pow_two_over_omega(p) * m;
    let mut ell = 0;
    while have < need {
        have *= 4.0;
        ell += 1;
    }
    ell
}

/// Exact CAPS costs. `m = None` means unlimited memory.
pub fn caps_cost(
    n: f64,
    p: f64,
    m: Option<f64>,
    variant: CapsVariant,
) -> Result<CostTriple, CostModelError> {
    caps_cost_with(n, p, m, variant, FlopModel::default())
}

pub fn caps_cost_with(
    n: f64,
    p: f64,
    m: Option<f64>,
    variant: CapsVariant,
    model: FlopModel,
) -> Result<CostTriple, CostModelError> {
    positive(&[n, p])?;
    if let Some(m) = m {
        positive(&[m])?;
    }
    let flops = model.sequential(n) / p;
    let um = CostTriple {
        flops,
        bandwidth_words: bw_um(n, p),
        latency_messages: l_um(p),
        exactness: Exactness::Exact,
    };
    let lm = |m: f64| -> Result<CostTriple, CostModelError> {
        if 9.0 * n * n > m * p {
            return Err(CostModelError::InsufficientMemory { n, p, m });
        }
        let ell = ell_lm(n, p, m);
        let sevens = 7f64.powi(ell as i32);
        let sub = n / 2f64.powi(ell as i32);
        Ok(CostTriple {
            flops,
            bandwidth_words: sevens * bw_um(sub, p),
            latency_messages: sevens * l_um(p),
            exactness: Exactness::Exact,
        })
    };
    match (variant, m) {
        (CapsVariant::Lm, Some(m)) => lm(m),
        (CapsVariant::Lm, None) | (CapsVariant::Um, None) | (CapsVariant::Auto, None) => Ok(um),
        (CapsVariant::Um, Some(m)) => {
            let needed = mem_um(n, p);
            if needed > m {
                Err(CostModelError::UmDoesNotFit { needed, m })
            } else {
                Ok(um)
            }
        }
        (CapsVariant::Auto, Some(m)) => {
            if mem_um(n, p) <= m {
                Ok(um)
            } else {
                lm(m)
            }
        }
    }
}

/// Exact integer ledger of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictedLedger {
    pub flops: u64,
    pub words: u64,
    pub messages: u64,
    pub peak_memory: u64,
}

/// Ledger of CAPS under an arbitrary schedule, from the step recurrences:
/// a BFS step costs `36·(n/2)²/P` words and 36 messages and runs its children
/// in parallel; a DFS step communicates nothing and runs its 7 children in turn.
pub fn caps_schedule_ledger(
    alg: &BilinearAlgorithm,
    n: usize,
    p: usize,
    schedule: &Schedule,
    cutoff: usize,
) -> Result<PredictedLedger, CapsError> {
    let peak_memory = validate_schedule(schedule, n, p, None)?;
    fn go(
        alg: &BilinearAlgorithm,
        n: u64,
        p: u64,
        steps: &[Step],
        cutoff: usize,
    ) -> Result<(u64, u64, u64), CapsError> {
        let Some((step, rest)) = steps.split_first() else {
            let padded = admissible_size(n as usize, alg.n0(), cutoff);
            return Ok((flop_count(alg, padded, cutoff)?, 0, 0));
        };
        let quad = (n / 2) * (n / 2) / p;
        let adds = alg.add_count() * quad;
        Ok(match step {
            Step::Bfs => {
                let (f, w, l) = go(alg, n / 2, p / 7, rest, cutoff)?;
                (adds + f, 36 * quad + w, 36 + l)
            }
            Step::Dfs => {
                let (f, w, l) = go(alg, n / 2, p, rest, cutoff)?;
                (adds + 7 * f, 7 * w, 7 * l)
            }
        })
    }
    let (flops, words, messages) = go(alg, n as u64, p as u64, schedule.steps(), cutoff)?;
    Ok(PredictedLedger {
        flops,
        words,
        messages,
        peak_memory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Classical,
    Strassen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dominant {
    MemoryDependent,
    MemoryIndependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub family: Family,
    pub cost: CostTriple,
    pub memory_dependent: f64,
    pub memory_independent: f64,
    pub dominant: Dominant,
    /// Memory size at which the two bandwidth terms meet.
    pub crossover_m: f64,
}

/// Communication lower bounds. Bandwidth is the larger of the
/// memory-dependent and memory-independent terms; latency is
/// `max{memory-dependent words / M, 1}`.
pub fn lower_bound(family: Family, n: f64, p: f64, m: f64) -> Result<LowerBound, CostModelError> {
    positive(&[n, p, m])?;
    let w0 = omega0();
    let (flops, dep, indep, crossover) = match family {
        Family::Classical => (
            n.powi(3) / p,
            n.powi(3) / (p * m.sqrt()),
            n * n / p.powf(2.0 / 3.0),
            n * n / p.powf(2.0 / 3.0),
        ),
        Family::Strassen => (
            n.powf(w0) / p,
            n.powf(w0) / (p * m.powf(w0 / 2.0 - 1.0)),
            n * n / p_pow_two_over_omega(p),
            n * n / p_pow_two_over_omega(p),
        ),
    };
    let dominant = if dep >= indep {
        Dominant::MemoryDependent
    } else {
        Dominant::MemoryIndependent
    };
    Ok(LowerBound {
        family,
        cost: CostTriple::asymptotic(flops, dep.max(indep), (dep / m).max(1.0)),
        memory_dependent: dep,
        memory_independent: indep,
        dominant,
        crossover_m: crossover,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelRow {
    #[serde(rename = "lb-classical")]
    ClassicalLowerBound,
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
    #[serde(rename = "2.5d")]
    TwoFiveD,
    #[serde(rename = "lb-strassen")]
    StrassenLowerBound,
    #[serde(rename = "2d-strassen")]
    TwoDStrassen,
    #[serde(rename = "strassen-2d")]
    StrassenTwoD,
    #[serde(rename = "2.5d-strassen")]
    TwoFiveDStrassen,
    #[serde(rename = "strassen-2.5d")]
    StrassenTwoFiveD,
    #[serde(rename = "caps")]
    Caps,
}

impl ModelRow {
    pub const ALL: [ModelRow; 10] = [
        ModelRow::ClassicalLowerBound,
        ModelRow::TwoD,
        ModelRow::ThreeD,
        ModelRow::TwoFiveD,
        ModelRow::StrassenLowerBound,
        ModelRow::TwoDStrassen,
        ModelRow::StrassenTwoD,
        ModelRow::TwoFiveDStrassen,
        ModelRow::StrassenTwoFiveD,
        ModelRow::Caps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelRow::ClassicalLowerBound => "lb-classical",
            ModelRow::TwoD => "2d",
            ModelRow::ThreeD => "3d",
            ModelRow::TwoFiveD => "2.5d",
            ModelRow::StrassenLowerBound => "lb-strassen",
            ModelRow::TwoDStrassen => "2d-strassen",
            ModelRow::StrassenTwoD => "strassen-2d",
            ModelRow::TwoFiveDStrassen => "2.5d-strassen",
            ModelRow::StrassenTwoFiveD => "strassen-2.5d",
            ModelRow::Caps => "caps",
        }
    }

    pub fn needs_ell(self) -> bool {
        matches!(self, ModelRow::StrassenTwoD | ModelRow::StrassenTwoFiveD)
    }
}

impl fmt::Display for ModelRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelRow {
    type Err = CostModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelRow::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CostModelError::UnknownRow(s.to_string()))
    }
}

/// Leading-order costs of each algorithm family (unit constants, `log P = log2 P`).
pub fn model_cost(
    row: ModelRow,
    n: f64,
    p: f64,
    m: f64,
    ell: Option<u32>,
) -> Result<CostTriple, CostModelError> {
    positive(&[n, p, m])?;
    let w0 = omega0();
    let logp = p.log2();
    let n2 = n * n;
    let n3 = n2 * n;
    let sqrt_p = p.sqrt();
    let p23 = p.powf(2.0 / 3.0);
    let need_ell = || ell.ok_or(CostModelError::MissingEll(row.name()));
    Ok(match row {
        ModelRow::ClassicalLowerBound => lower_bound(Family::Classical, n, p, m)?.cost,
        ModelRow::StrassenLowerBound => lower_bound(Family::Strassen, n, p, m)?.cost,
        ModelRow::TwoD => CostTriple::asymptotic(n3 / p, n2 / sqrt_p, sqrt_p),
        ModelRow::ThreeD => CostTriple::asymptotic(n3 / p, n2 / p23, logp),
        ModelRow::TwoFiveD => CostTriple::asymptotic(
            n3 / p,
            (n3 / (p * m.sqrt())).max(n2 / p23),
            n3 / (p * m.powf(1.5)) + logp,
        ),
        ModelRow::TwoDStrassen => {
            CostTriple::asymptotic(n.powf(w0) / p.powf((w0 - 1.0) / 2.0), n2 / sqrt_p, sqrt_p)
        }
        ModelRow::StrassenTwoD => {
            let l = need_ell()? as i32;
            CostTriple::asymptotic(
                (7.0f64 / 8.0).powi(l) * n3 / p,
                (7.0f64 / 4.0).powi(l) * n2 / sqrt_p,
                7f64.powi(l) * sqrt_p,
            )
        }
        ModelRow::TwoFiveDStrassen => CostTriple::asymptotic(
            (n3 / (p * m.powf(1.5 - w0 / 2.0))).max(n.powf(w0) / p.powf(w0 / 3.0)),
            (n3 / (p * m.sqrt())).max(n2 / p23),
            n3 / (p * m.powf(1.5)) + logp,
        ),
        ModelRow::StrassenTwoFiveD => {
            let l = need_ell()? as i32;
            let r78 = (7.0f64 / 8.0).powi(l);
            CostTriple::asymptotic(
                r78 * n3 / p,
                (r78 * n3 / (p * m.sqrt())).max((7.0f64 / 4.0).powi(l) * n2 / p23),
                r78 * n3 / (p * m.powf(1.5)) + 7f64.powi(l) * logp,
            )
        }
        ModelRow::Caps => {
            let dep = n.powf(w0) / (p * m.powf(w0 / 2.0 - 1.0));
            CostTriple::asymptotic(
                n.powf(w0) / p,
                dep.max(n2 / p_pow_two_over_omega(p)),
                (n.powf(w0) / (p * m.powf(w0 / 2.0)) * logp).max(logp),
            )
        }
    })
}

/// Bandwidth-minimizing number of Strassen steps before the 2.5D algorithm:
/// `max{0, ⌈log2(n/(M^{1/2}·P^{1/3}))⌉}`, i.e. the smallest `ell ≥ 0` with
/// `64^ell·M³·P² ≥ n⁶`.
pub fn ell_opt_strassen_25d(n: u64, p: u64, m: u64) -> Result<u32, CostModelError> {
    if n == 0 || p == 0 || m == 0 {
        return Err(CostModelError::NonPositive);
    }
    let need = BigUint::from(n).pow(6);
    let mut have = BigUint::from(m).pow(3) * BigUint::from(p).pow(2);
    let mut ell = 0;
    while have < need {
        have <<= 6;
        ell += 1;
    }
    Ok(ell)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RatioCase {
    /// Both bounds memory-dependent.
    One = 1,
    /// Classical memory-dependent, Strassen memory-independent.
    Two = 2,
    /// Both memory-independent.
    Three = 3,
}

/// Ratio of the classical to the Strassen bandwidth lower bound, with the
/// regime it falls in.
pub fn bandwidth_ratio(n: f64, p: f64, m: f64) -> Result<(f64, RatioCase), CostModelError> {
    positive(&[n, p, m])?;
    let n2 = n * n;
    if m < n2 / p {
        return Err(CostModelError::MemoryBelowInput { m, min: n2 / p });
    }
    let w0 = omega0();
    let p2w = p_pow_two_over_omega(p);
    Ok(if m <= n2 / p2w {
        ((n2 / m).powf((3.0 - w0) / 2.0), RatioCase::One)
    } else if m < n2 / p.powf(2.0 / 3.0) {
        ((n2 / m).sqrt() * p2w / p, RatioCase::Two)
    } else {
        (p2w / p.powf(2.0 / 3.0), RatioCase::Three)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardwareBalance {
    pub classical_compute_bound: bool,
    pub strassen_compute_bound: bool,
}

/// `γ·M^{1/2} ≥ c·β` (classical) and `γ·M^{ω0/2−1} ≥ c′·β` (Strassen).
pub fn hardware_balance(gamma: f64, beta: f64, m: f64, c: f64, c_prime: f64) -> HardwareBalance {
    HardwareBalance {
        classical_compute_bound: gamma * m.sqrt() >= c * beta,
        strassen_compute_bound: gamma * m.powf(omega0() / 2.0 - 1.0) >= c_prime * beta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bilinear::make_strassen_winograd;

    #[test]
    fn caps_um_examples() {
        let c = caps_cost(56.0, 7.0, None, CapsVariant::Auto).unwrap();
        assert_eq!(c.bandwidth_words, 4032.0);
        assert_eq!(c.latency_messages, 36.0);
        assert_eq!(c.exactness, Exactness::Exact);
        let c = caps_cost(196.0, 49.0, None, CapsVariant::Um).unwrap();
        assert_eq!(c.latency_messages, 72.0);
        assert_eq!(mem_um(56.0, 7.0), 3696.0);
    }

    #[test]
    fn caps_variants() {
        let n = 392.0;
        let p = 49.0;
        assert!(matches!(
            caps_cost(n, p, Some(54683.0), CapsVariant::Um),
            Err(CostModelError::UmDoesNotFit { .. })
        ));
        let auto = caps_cost(n, p, Some(54683.0), CapsVariant::Auto).unwrap();
        let lm = caps_cost(n, p, Some(54683.0), CapsVariant::Lm).unwrap();
        assert_eq!(auto, lm);
        assert_eq!(lm.bandwidth_words, 7.0 * bw_um(196.0, 49.0));
        assert!(matches!(
            caps_cost(n, p, Some(100.0), CapsVariant::Lm),
            Err(CostModelError::InsufficientMemory { .. })
        ));
    }

    #[test]
    fn schedule_ledger_spot_values() {
        let sw = make_strassen_winograd();
        let l = caps_schedule_ledger(&sw, 56, 7, &"B".parse().unwrap(), 28).unwrap();
        assert_eq!((l.flops, l.words, l.messages, l.peak_memory), (44800, 4032, 36, 3696));
        let l = caps_schedule_ledger(&sw, 56, 7, &"DB".parse().unwrap(), 8).unwrap();
        assert_eq!(l.words, 7056);
        let l = caps_schedule_ledger(&sw, 56 * 2, 7, &"DDB".parse().unwrap(), 7).unwrap();
        assert_eq!(l.words, 49 * 36 * 14 * 14 / 7);
    }

    #[test]
    fn lower_bound_crossovers() {
        let (n, p) = (1000.0, 49.0);
        let lb = lower_bound(Family::Strassen, n, p, n * n / p_pow_two_over_omega(p)).unwrap();
        assert!((lb.memory_dependent - lb.memory_independent).abs() <= 1e-9 * lb.memory_dependent);
        assert_eq!(lb.crossover_m, n * n / 16.0);
        let lbc = lower_bound(Family::Classical, n, p, n * n / p).unwrap();
        assert_eq!(lbc.dominant, Dominant::MemoryDependent);
        assert!((lbc.cost.bandwidth_words - n * n / p.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn strassen_bound_below_classical() {
        for &n in &[64.0, 1000.0, 1e5] {
            for &p in &[7.0, 49.0, 1000.0, 1e5] {
                for f in [1.0, 3.0, 30.0, 1e4] {
                    let m = f * n * n / p;
                    let s = lower_bound(Family::Strassen, n, p, m).unwrap();
                    let c = lower_bound(Family::Classical, n, p, m).unwrap();
                    assert!(s.cost.bandwidth_words <= c.cost.bandwidth_words * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn model_rows() {
        let (n, p, m) = (1024.0, 64.0, 3.0 * 1024.0 * 1024.0 / 64.0);
        let two_d = model_cost(ModelRow::TwoD, n, p, m, None).unwrap();
        assert_eq!(two_d.bandwidth_words, n * n / 8.0);
        assert_eq!(two_d.latency_messages, 8.0);
        let s0 = model_cost(ModelRow::StrassenTwoD, n, p, m, Some(0)).unwrap();
        assert_eq!(s0, two_d);
        assert!(matches!(
            model_cost(ModelRow::StrassenTwoD, n, p, m, None),
            Err(CostModelError::MissingEll("strassen-2d"))
        ));
        assert!("nope".parse::<ModelRow>().is_err());
        assert_eq!("2.5D-Strassen".parse::<ModelRow>().unwrap(), ModelRow::TwoFiveDStrassen);
        let w0 = omega0();
        let t = model_cost(ModelRow::TwoFiveDStrassen, n, p, m, None).unwrap();
        let want = (n.powi(3) / (p * m.powf(1.5 - w0 / 2.0))).max(n.powf(w0) / p.powf(w0 / 3.0));
        assert_eq!(t.flops, want);
    }

    #[test]
    fn ell_opt_examples() {
        assert_eq!(ell_opt_strassen_25d(1024, 8, 1 << 14).unwrap(), 2);
        assert_eq!(ell_opt_strassen_25d(1024, 8, 1 << 18).unwrap(), 0);
        assert_eq!(ell_opt_strassen_25d(2048, 8, 1 << 14).unwrap(), 3);
    }

    #[test]
    fn ratio_cases() {
        let (n, p) = (1e4, 1e4);
        let (r, c) = bandwidth_ratio(n, p, 1e12).unwrap();
        assert_eq!(c, RatioCase::Three);
        assert!((r - 1.5236).abs() < 1e-3);
        let (r1, c1) = bandwidth_ratio(n, p, n * n / p).unwrap();
        assert_eq!(c1, RatioCase::One);
        assert!((r1 - p.powf((3.0 - omega0()) / 2.0)).abs() < 1e-9 * r1);
        assert!(bandwidth_ratio(n, p, n * n / p / 2.0).is_err());
    }

    #[test]
    fn hardware_balance_cases() {
        let hb = hardware_balance(1.0, 1.0, 1.0, 1.0, 1.0);
        assert!(hb.classical_compute_bound && hb.strassen_compute_bound);
        let hb = hardware_balance(0.0, 1.0, 1e6, 1.0, 1.0);
        assert!(!hb.classical_compute_bound && !hb.strassen_compute_bound);
    }
}
