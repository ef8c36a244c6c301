//! Text exports: profile and table CSV, summary JSON.
//!
//! CSV files may start with `#` comment lines carrying provenance (the
//! resolved configuration and the crate version); numbers are written with
//! 17 significant digits so that they round-trip.

use serde::Serialize;

use crate::energy::{pohozaev_residual, SolutionSummary};
use crate::green::GStarMatrix;
use crate::radial::RadialProfile;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn comment_block(out: &mut String, comments: &[String]) {
    for c in comments {
        for line in c.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
}

/// `r,U_1..U_n,dU_1..dU_n` at every grid node; `dU_i` is `dU_i/dr`.
pub fn profile_csv(profile: &RadialProfile, comments: &[String]) -> String {
    let n = profile.n();
    let mut out = String::new();
    comment_block(&mut out, comments);
    let mut header = vec!["r".to_string()];
    header.extend((1..=n).map(|i| format!("U_{i}")));
    header.extend((1..=n).map(|i| format!("dU_{i}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for (k, s) in profile.grid.iter().enumerate() {
        let r = s.exp();
        let mut row = vec![fmt_f64(r)];
        row.extend(profile.values[k].iter().map(|v| fmt_f64(*v)));
        row.extend(profile.derivs[k].iter().map(|d| fmt_f64(d / r)));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Summary as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub sigma: Vec<f64>,
    pub m: Vec<f64>,
    #[serde(rename = "D")]
    pub d: Vec<f64>,
    pub alpha: Vec<f64>,
    pub mu: f64,
    pub pohozaev_residual: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl From<&SolutionSummary> for SummaryRecord {
    fn from(s: &SolutionSummary) -> Self {
        SummaryRecord {
            sigma: s.sigma.clone(),
            m: s.m.clone(),
            d: s.d.clone(),
            alpha: s.alpha.clone(),
            mu: s.mu,
            pohozaev_residual: pohozaev_residual(s),
            iterations: s.iterations,
            warnings: s.warnings.clone(),
        }
    }
}

pub fn summary_json(summary: &SolutionSummary) -> serde_json::Value {
    serde_json::to_value(SummaryRecord::from(summary)).expect("summary is serializable")
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        comment_block(&mut out, comments);
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn gstar_table(m: &GStarMatrix) -> Table {
    let mut t = Table::new((1..=m.n()).map(|s| format!("G_{s}")));
    for row in &m.values {
        t.push(row.clone());
    }
    t
}
