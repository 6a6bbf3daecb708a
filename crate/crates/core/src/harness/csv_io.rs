use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::run::{RunRecord, TrajectoryRow};
use crate::error::{Error, Result};

pub const TRAJECTORY_HEADER: [&str; 7] =
    ["t", "demand", "price", "production", "unmet_inc", "cost_inc", "pay_inc"];

pub const SUMMARY_HEADER: [&str; 8] =
    ["policy", "T", "replication", "seed", "U_T", "C_T", "P_T", "proxy_reg"];

/// C's `%.17g`: 17 significant digits, trailing zeros dropped, exponent form
/// outside `1e-4 ≤ |x| < 1e17`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{x:.*}", (16 - exp) as usize)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Per-period CSV with [`TRAJECTORY_HEADER`].
pub fn write_trajectory<W: Write>(rows: &[TrajectoryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            format_g17(r.demand),
            format_g17(r.price),
            format_g17(r.production),
            format_g17(r.inc.unmet),
            format_g17(r.inc.cost),
            format_g17(r.inc.payment),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the summary CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub policy: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub replication: usize,
    pub seed: u64,
    #[serde(rename = "U_T")]
    pub unmet: f64,
    #[serde(rename = "C_T")]
    pub cost_regret: f64,
    #[serde(rename = "P_T")]
    pub payment_regret: f64,
    pub proxy_reg: f64,
}

impl From<&RunRecord> for SummaryRow {
    fn from(r: &RunRecord) -> Self {
        Self {
            policy: r.policy.clone(),
            horizon: r.horizon,
            replication: r.replication,
            seed: r.seed,
            unmet: r.ledger.unmet,
            cost_regret: r.ledger.cost_regret,
            payment_regret: r.ledger.payment_regret,
            proxy_reg: r.proxy_regret,
        }
    }
}

/// Summary CSV with [`SUMMARY_HEADER`], one row per run in the given order.
pub fn write_summary<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in records.iter().map(SummaryRow::from) {
        w.write_record([
            r.policy,
            r.horizon.to_string(),
            r.replication.to_string(),
            r.seed.to_string(),
            format_g17(r.unmet),
            format_g17(r.cost_regret),
            format_g17(r.payment_regret),
            format_g17(r.proxy_reg),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(input: R) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SUMMARY_HEADER {
        return Err(Error::Io(format!("unexpected summary header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
