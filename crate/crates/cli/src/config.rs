//! Run configuration. The JSON form mirrors the command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use capsim::{make_strassen, make_strassen_winograd, BilinearAlgorithm, MachineParams, Schedule};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Peak rate of one XT4-like node, 36.8 GFLOPS.
pub const XT4_GAMMA: f64 = 1.0 / 36.8e9;
/// Placeholder per-message latency (seconds); set `alpha` for a real machine.
pub const DEFAULT_ALPHA: f64 = 1.0e-5;
/// Placeholder per-word time (seconds, 8-byte words at 6.4 GB/s).
pub const DEFAULT_BETA: f64 = 1.25e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "caps")]
    Caps,
    #[serde(rename = "cannon")]
    Cannon,
    #[serde(rename = "2d-strassen")]
    TwoDStrassen,
    #[serde(rename = "strassen-2d")]
    StrassenTwoD,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Caps,
        Algorithm::Cannon,
        Algorithm::TwoDStrassen,
        Algorithm::StrassenTwoD,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Caps => "caps",
            Algorithm::Cannon => "cannon",
            Algorithm::TwoDStrassen => "2d-strassen",
            Algorithm::StrassenTwoD => "strassen-2d",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match Algorithm::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s)) {
            Some(a) => Ok(a),
            None => bail!("unknown algorithm {s:?} (expected caps, cannon, 2d-strassen or strassen-2d)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    #[default]
    Winograd,
    Strassen,
}

impl Flavor {
    pub fn algorithm(self) -> BilinearAlgorithm {
        match self {
            Flavor::Winograd => make_strassen_winograd(),
            Flavor::Strassen => make_strassen(),
        }
    }
}

impl FromStr for Flavor {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "winograd" => Ok(Flavor::Winograd),
            "strassen" => Ok(Flavor::Strassen),
            _ => bail!("unknown flavor {s:?} (expected winograd or strassen)"),
        }
    }
}

/// CAPS traversal: chosen from `(n, P, M)` or given explicitly.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum ScheduleSpec {
    #[default]
    Auto,
    Fixed(Schedule),
}

impl FromStr for ScheduleSpec {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(ScheduleSpec::Auto);
        }
        Ok(ScheduleSpec::Fixed(s.parse()?))
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleSpec::Auto => f.write_str("auto"),
            ScheduleSpec::Fixed(s) => write!(f, "{s}"),
        }
    }
}

impl Serialize for ScheduleSpec {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScheduleSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        String::deserialize(de)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub algorithm: Vec<Algorithm>,
    pub n: Vec<usize>,
    #[serde(rename = "P")]
    pub p: Vec<usize>,
    /// Words per processor; `None` is unlimited.
    #[serde(rename = "M")]
    pub m: Option<u64>,
    pub schedule: ScheduleSpec,
    /// DFS steps for strassen-2d.
    pub ell: u32,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub cutoff: usize,
    pub flavor: Flavor,
    pub seed: u64,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub costmodel_only: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            algorithm: vec![Algorithm::Caps],
            n: vec![56],
            p: vec![7],
            m: None,
            schedule: ScheduleSpec::Auto,
            ell: 1,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            gamma: XT4_GAMMA,
            cutoff: 8,
            flavor: Flavor::Winograd,
            seed: 0,
            csv: None,
            svg: None,
            json: None,
            costmodel_only: false,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let c: Config = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn machine(&self, p: usize) -> MachineParams {
        MachineParams::new(p, self.m, self.alpha, self.beta, self.gamma)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.algorithm.is_empty() || self.n.is_empty() || self.p.is_empty() {
            bail!("algorithm, n and P need at least one value each");
        }
        if self.n.contains(&0) || self.p.contains(&0) {
            bail!("n and P must be positive");
        }
        if self.cutoff == 0 {
            bail!("cutoff must be at least 1");
        }
        self.machine(1).validate()?;
        Ok(())
    }
}
