//! Cost-model queries: single rows as JSON, sweeps over P or M as CSV.

use std::io::Write;
use std::str::FromStr;

use anyhow::{bail, Context};
use capsim::costmodel::{caps_cost, model_cost, CapsVariant, CostTriple, Exactness, ModelRow};
use serde::{Deserialize, Serialize};

/// A closed-form model row, or the exact CAPS formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostRow {
    Table(ModelRow),
    CapsExact(CapsVariant),
}

impl FromStr for CostRow {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "caps-um" => CostRow::CapsExact(CapsVariant::Um),
            "caps-lm" => CostRow::CapsExact(CapsVariant::Lm),
            "caps-auto" => CostRow::CapsExact(CapsVariant::Auto),
            other => CostRow::Table(other.parse()?),
        })
    }
}

impl std::fmt::Display for CostRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CostRow::Table(r) => write!(f, "{r}"),
            CostRow::CapsExact(CapsVariant::Um) => f.write_str("caps-um"),
            CostRow::CapsExact(CapsVariant::Lm) => f.write_str("caps-lm"),
            CostRow::CapsExact(CapsVariant::Auto) => f.write_str("caps-auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRecord {
    pub row: String,
    pub n: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub ell: Option<u32>,
    pub flops: f64,
    pub bandwidth_words: f64,
    pub latency_messages: f64,
    pub exactness: Exactness,
}

pub fn evaluate(row: CostRow, n: f64, p: f64, m: Option<f64>, ell: Option<u32>) -> anyhow::Result<CostRecord> {
    let c: CostTriple = match row {
        CostRow::CapsExact(v) => caps_cost(n, p, m, v)?,
        CostRow::Table(t) => {
            let m = m.with_context(|| format!("row {t} needs M"))?;
            model_cost(t, n, p, m, ell)?
        }
    };
    Ok(CostRecord {
        row: row.to_string(),
        n,
        p,
        m,
        ell,
        flops: c.flops,
        bandwidth_words: c.bandwidth_words,
        latency_messages: c.latency_messages,
        exactness: c.exactness,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    None,
    P(Vec<f64>),
    M(Vec<f64>),
}

pub fn sweep(
    rows: &[CostRow],
    n: f64,
    p: f64,
    m: Option<f64>,
    ell: Option<u32>,
    sweep: &Sweep,
) -> anyhow::Result<Vec<CostRecord>> {
    let points: Vec<(f64, Option<f64>)> = match sweep {
        Sweep::None => vec![(p, m)],
        Sweep::P(ps) => ps.iter().map(|&p| (p, m)).collect(),
        Sweep::M(ms) => ms.iter().map(|&m| (p, Some(m))).collect(),
    };
    if points.is_empty() {
        bail!("empty sweep");
    }
    let mut out = Vec::new();
    for &row in rows {
        for &(p, m) in &points {
            out.push(evaluate(row, n, p, m, ell)?);
        }
    }
    Ok(out)
}

pub fn write_cost_csv<W: Write>(out: W, rows: &[CostRecord]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_parse() {
        assert_eq!("caps-um".parse::<CostRow>().unwrap(), CostRow::CapsExact(CapsVariant::Um));
        assert_eq!("2d".parse::<CostRow>().unwrap(), CostRow::Table(ModelRow::TwoD));
        assert!("4d".parse::<CostRow>().is_err());
    }

    #[test]
    fn exact_and_table_rows() {
        let r = evaluate("caps-auto".parse().unwrap(), 56.0, 7.0, None, None).unwrap();
        assert_eq!((r.bandwidth_words, r.latency_messages), (4032.0, 36.0));
        assert!(evaluate("2d".parse().unwrap(), 56.0, 4.0, None, None).is_err());
        let rows = sweep(
            &["2d".parse().unwrap(), "caps".parse().unwrap()],
            1024.0,
            49.0,
            Some(1e5),
            None,
            &Sweep::P(vec![49.0, 343.0]),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].exactness, Exactness::Asymptotic);
    }
}
