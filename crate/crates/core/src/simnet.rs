//! A lock-step simulated distributed-memory machine.
//!
//! Work is recorded in phases. A compute phase collects flops per processor,
//! a communicate phase collects messages and words per processor. Closing a
//! phase adds the per-processor maximum to the critical-path ledger and the
//! sum to the totals. A processor's communication load in a phase counts both
//! the messages (and words) it sends and those it receives.

use serde::{Deserialize, Serialize};

use crate::error::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MachineParams {
    #[serde(rename = "P")]
    pub p: usize,
    /// Local memory per processor in words; `None` for unlimited.
    #[serde(rename = "M")]
    pub m: Option<u64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl MachineParams {
    pub fn new(p: usize, m: Option<u64>, alpha: f64, beta: f64, gamma: f64) -> Self {
        Self {
            p,
            m,
            alpha,
            beta,
            gamma,
        }
    }

    /// Unit costs and unlimited memory.
    pub fn unit(p: usize) -> Self {
        Self::new(p, None, 1.0, 1.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.p == 0 {
            return Err(SimError::InvalidParams("P must be at least 1".into()));
        }
        if self.m == Some(0) {
            return Err(SimError::InvalidParams("M must be positive".into()));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::InvalidParams(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn modeled_time(&self, messages: u64, words: u64, flops: u64) -> f64 {
        self.alpha * messages as f64 + self.beta * words as f64 + self.gamma * flops as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseKind {
    Compute,
    Communicate,
}

impl PhaseKind {
    fn name(self) -> &'static str {
        match self {
            PhaseKind::Compute => "compute",
            PhaseKind::Communicate => "communicate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub phase: usize,
    pub from: usize,
    pub to: usize,
    pub words: u64,
}

#[derive(Debug, Clone)]
struct Phase {
    kind: PhaseKind,
    flops: Vec<u64>,
    messages: Vec<u64>,
    words: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub flops_critical: u64,
    pub words_critical: u64,
    pub messages_critical: u64,
    pub flops_total: u64,
    pub words_total: u64,
    pub messages_total: u64,
    pub peak_memory_words: u64,
    /// High-water mark of implementation temporaries, kept apart from the modeled buffers.
    pub peak_scratch_words: u64,
    pub phases: u64,
    pub modeled_time_seconds: f64,
}

impl CostReport {
    /// Checks `critical ≤ total ≤ P·critical` and the time identity.
    pub fn check_invariants(&self, params: &MachineParams) -> Result<(), String> {
        let p = params.p as u64;
        for (name, crit, total) in [
            ("flops", self.flops_critical, self.flops_total),
            ("words", self.words_critical, self.words_total),
            ("messages", self.messages_critical, self.messages_total),
        ] {
            if crit > total || total > p * crit {
                return Err(format!(
                    "{name}: critical {crit}, total {total} violate critical <= total <= P*critical"
                ));
            }
        }
        let t = params.modeled_time(
            self.messages_critical,
            self.words_critical,
            self.flops_critical,
        );
        if t != self.modeled_time_seconds {
            return Err(format!(
                "modeled time {} differs from recomputed {t}",
                self.modeled_time_seconds
            ));
        }
        if let Some(m) = params.m {
            if self.peak_memory_words > m {
                return Err(format!(
                    "peak memory {} exceeds M = {m}",
                    self.peak_memory_words
                ));
            }
        }
        Ok(())
    }

    /// `2n³ / (t · 10⁹)`; zero when the modeled time is zero.
    pub fn effective_gflops(&self, n: usize) -> f64 {
        effective_gflops(n, self.modeled_time_seconds)
    }
}

/// `2n³ / (t · 10⁹)`, the classical-equivalent rate; zero for `t ≤ 0`.
pub fn effective_gflops(n: usize, seconds: f64) -> f64 {
    if seconds <= 0.0 {
        return 0.0;
    }
    let n = n as f64;
    2.0 * n * n * n / (seconds * 1e9)
}

#[derive(Debug, Clone)]
pub struct SimMachine {
    params: MachineParams,
    open: Option<Phase>,
    report: CostReport,
    in_use: Vec<u64>,
    peak: Vec<u64>,
    scratch: Vec<u64>,
    scratch_peak: Vec<u64>,
    log: Vec<MessageRecord>,
    record_log: bool,
}

impl SimMachine {
    pub fn new(params: MachineParams) -> Result<Self, SimError> {
        params.validate()?;
        let p = params.p;
        Ok(Self {
            params,
            open: None,
            report: CostReport::default(),
            in_use: vec![0; p],
            peak: vec![0; p],
            scratch: vec![0; p],
            scratch_peak: vec![0; p],
            log: Vec::new(),
            record_log: true,
        })
    }

    /// Turns the per-message log on or off (on by default).
    pub fn set_message_log(&mut self, on: bool) {
        self.record_log = on;
    }

    pub fn params(&self) -> &MachineParams {
        &self.params
    }

    pub fn p(&self) -> usize {
        self.params.p
    }

    pub fn message_log(&self) -> &[MessageRecord] {
        &self.log
    }

    fn check_proc(&self, processor: usize) -> Result<(), SimError> {
        if processor >= self.params.p {
            return Err(SimError::ProcessorOutOfRange {
                processor,
                p: self.params.p,
            });
        }
        Ok(())
    }

    pub fn begin_phase(&mut self, kind: PhaseKind) -> Result<(), SimError> {
        if self.open.is_some() {
            return Err(SimError::PhaseAlreadyOpen);
        }
        let p = self.params.p;
        self.open = Some(Phase {
            kind,
            flops: vec![0; p],
            messages: vec![0; p],
            words: vec![0; p],
        });
        Ok(())
    }

    pub fn end_phase(&mut self) -> Result<(), SimError> {
        let ph = self.open.take().ok_or(SimError::NoOpenPhase)?;
        let max = |v: &[u64]| v.iter().copied().max().unwrap_or(0);
        let sum = |v: &[u64]| v.iter().sum::<u64>();
        let r = &mut self.report;
        r.flops_critical += max(&ph.flops);
        r.flops_total += sum(&ph.flops);
        r.messages_critical += max(&ph.messages);
        r.messages_total += sum(&ph.messages);
        r.words_critical += max(&ph.words);
        r.words_total += sum(&ph.words);
        r.phases += 1;
        Ok(())
    }

    fn phase_mut(&mut self, kind: PhaseKind) -> Result<&mut Phase, SimError> {
        match self.open.as_mut() {
            None => Err(SimError::NoOpenPhase),
            Some(ph) if ph.kind != kind => Err(SimError::WrongPhaseKind {
                expected: kind.name(),
                actual: ph.kind.name(),
            }),
            Some(ph) => Ok(ph),
        }
    }

    pub fn add_flops(&mut self, processor: usize, flops: u64) -> Result<(), SimError> {
        self.check_proc(processor)?;
        self.phase_mut(PhaseKind::Compute)?.flops[processor] += flops;
        Ok(())
    }

    /// One point-to-point message. Both endpoints are charged.
    pub fn send(&mut self, from: usize, to: usize, words: u64) -> Result<(), SimError> {
        self.check_proc(from)?;
        self.check_proc(to)?;
        let phase = self.report.phases as usize;
        let ph = self.phase_mut(PhaseKind::Communicate)?;
        ph.messages[from] += 1;
        ph.messages[to] += 1;
        ph.words[from] += words;
        ph.words[to] += words;
        if self.record_log {
            self.log.push(MessageRecord {
                phase,
                from,
                to,
                words,
            });
        }
        Ok(())
    }

    /// All-to-all among seven processors. `payload[a][b]` words go from
    /// `group[a]` to `group[b]` (the diagonal is ignored). Buffers are reused
    /// in place: the words a member sends are released before the words it
    /// receives are charged.
    pub fn exchange(&mut self, group: &[usize], payload: &[Vec<u64>]) -> Result<(), SimError> {
        if group.len() != 7 {
            return Err(SimError::GroupSize(group.len()));
        }
        for (i, &g) in group.iter().enumerate() {
            self.check_proc(g)?;
            if group[..i].contains(&g) {
                return Err(SimError::DuplicateMember(g));
            }
        }
        if payload.len() != 7 || payload.iter().any(|row| row.len() != 7) {
            return Err(SimError::PayloadShape { expected: 7 });
        }
        self.phase_mut(PhaseKind::Communicate)?;
        for a in 0..7 {
            let sent: u64 = (0..7).filter(|&b| b != a).map(|b| payload[a][b]).sum();
            let recv: u64 = (0..7).filter(|&b| b != a).map(|b| payload[b][a]).sum();
            let pa = group[a];
            if sent > self.in_use[pa] {
                return Err(SimError::FreeUnderflow {
                    processor: pa,
                    words: sent,
                    in_use: self.in_use[pa],
                });
            }
            self.check_capacity(pa, self.in_use[pa] - sent, recv)?;
        }
        for a in 0..7 {
            for b in 0..7 {
                if a != b {
                    self.send(group[a], group[b], payload[a][b])?;
                }
            }
        }
        for a in 0..7 {
            let sent: u64 = (0..7).filter(|&b| b != a).map(|b| payload[a][b]).sum();
            let recv: u64 = (0..7).filter(|&b| b != a).map(|b| payload[b][a]).sum();
            self.free(group[a], sent)?;
            self.alloc(group[a], recv)?;
        }
        Ok(())
    }

    fn check_capacity(&self, processor: usize, in_use: u64, requested: u64) -> Result<(), SimError> {
        if let Some(cap) = self.params.m {
            if in_use + requested > cap {
                return Err(SimError::OutOfSimulatedMemory {
                    processor,
                    requested,
                    in_use,
                    capacity: cap,
                });
            }
        }
        Ok(())
    }

    pub fn alloc(&mut self, processor: usize, words: u64) -> Result<(), SimError> {
        self.check_proc(processor)?;
        self.check_capacity(processor, self.in_use[processor], words)?;
        self.in_use[processor] += words;
        self.peak[processor] = self.peak[processor].max(self.in_use[processor]);
        Ok(())
    }

    pub fn free(&mut self, processor: usize, words: u64) -> Result<(), SimError> {
        self.check_proc(processor)?;
        let in_use = self.in_use[processor];
        if words > in_use {
            return Err(SimError::FreeUnderflow {
                processor,
                words,
                in_use,
            });
        }
        self.in_use[processor] -= words;
        Ok(())
    }

    /// Charges implementation temporaries to a separate ledger that never fails.
    pub fn scratch_alloc(&mut self, processor: usize, words: u64) -> Result<(), SimError> {
        self.check_proc(processor)?;
        self.scratch[processor] += words;
        self.scratch_peak[processor] = self.scratch_peak[processor].max(self.scratch[processor]);
        Ok(())
    }

    pub fn scratch_free(&mut self, processor: usize, words: u64) -> Result<(), SimError> {
        self.check_proc(processor)?;
        let in_use = self.scratch[processor];
        if words > in_use {
            return Err(SimError::FreeUnderflow {
                processor,
                words,
                in_use,
            });
        }
        self.scratch[processor] -= words;
        Ok(())
    }

    pub fn memory_in_use(&self, processor: usize) -> u64 {
        self.in_use[processor]
    }

    pub fn peak_memory(&self, processor: usize) -> u64 {
        self.peak[processor]
    }

    pub fn report(&self) -> Result<CostReport, SimError> {
        if self.open.is_some() {
            return Err(SimError::PhaseAlreadyOpen);
        }
        let mut r = self.report;
        r.peak_memory_words = self.peak.iter().copied().max().unwrap_or(0);
        r.peak_scratch_words = self.scratch_peak.iter().copied().max().unwrap_or(0);
        r.modeled_time_seconds =
            self.params
                .modeled_time(r.messages_critical, r.words_critical, r.flops_critical);
        Ok(r)
    }
}

/// One output row of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub n: usize,
    #[serde(rename = "P")]
    pub p: usize,
    #[serde(rename = "M")]
    pub m: Option<u64>,
    pub ell: Option<u32>,
    pub schedule: String,
    pub flops_crit: u64,
    pub words_crit: u64,
    pub msgs_crit: u64,
    pub peak_mem: u64,
    pub modeled_time: f64,
    pub effective_gflops: f64,
}

impl RunRecord {
    pub const COLUMNS: [&'static str; 12] = [
        "algorithm",
        "n",
        "P",
        "M",
        "ell",
        "schedule",
        "flops_crit",
        "words_crit",
        "msgs_crit",
        "peak_mem",
        "modeled_time",
        "effective_gflops",
    ];

    pub fn from_report(
        algorithm: impl Into<String>,
        n: usize,
        params: &MachineParams,
        ell: Option<u32>,
        schedule: impl Into<String>,
        report: &CostReport,
    ) -> Self {
        Self {
            algorithm: algorithm.into(),
            n,
            p: params.p,
            m: params.m,
            ell,
            schedule: schedule.into(),
            flops_crit: report.flops_critical,
            words_crit: report.words_critical,
            msgs_crit: report.messages_critical,
            peak_mem: report.peak_memory_words,
            modeled_time: report.modeled_time_seconds,
            effective_gflops: report.effective_gflops(n),
        }
    }
}
