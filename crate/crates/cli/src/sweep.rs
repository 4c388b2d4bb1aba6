use std::io::Write;

use anyhow::{bail, Context, Result};
use bipcover::bounds::{BoundReport, BoundSpec};
use rayon::prelude::*;

pub const SCHEMA_LINE: &str = "# schema=1";

pub struct Grid {
    pub ks: Vec<usize>,
    pub ts: Vec<f64>,
    pub qs: Vec<f64>,
}

pub struct Row {
    pub k: usize,
    pub t_min: f64,
    pub q: f64,
    pub report: Option<BoundReport>,
    pub error: Option<String>,
}

/// `4..8,12` → 4,5,6,7,8,12.
fn parse_counts(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.parse()?, b.parse()?);
                if a > b {
                    bail!("empty range {part}");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().with_context(|| format!("bad count {part:?}"))?),
        }
    }
    Ok(out)
}

fn parse_reals(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(|p| p.trim().parse().with_context(|| format!("bad number {p:?}"))).collect()
}

impl Grid {
    pub fn parse(ks: &str, ts: &str, qs: &str) -> Result<Self> {
        let grid = Grid { ks: parse_counts(ks)?, ts: parse_reals(ts)?, qs: parse_reals(qs)? };
        if grid.ks.is_empty() || grid.ts.is_empty() || grid.qs.is_empty() {
            bail!("grid axes must be nonempty");
        }
        Ok(grid)
    }

    /// Cells in k-major, then t_min, then q order.
    pub fn evaluate(&self) -> Vec<Row> {
        let cells: Vec<(usize, f64, f64)> = self
            .ks
            .iter()
            .flat_map(|&k| self.ts.iter().flat_map(move |&t| self.qs.iter().map(move |&q| (k, t, q))))
            .collect();
        cells
            .into_par_iter()
            .map(|(k, t_min, q)| {
                let result = BoundSpec::new(k, t_min, q).and_then(|s| BoundReport::compute(&s));
                let (report, error) = match result {
                    Ok(r) => (Some(r), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                Row { k, t_min, q, report, error }
            })
            .collect()
    }
}

pub fn write_csv(rows: &[Row], mut out: impl Write) -> Result<()> {
    writeln!(out, "{SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "t_min", "q", "m_o", "m_c", "m_s", "m_b", "ratio_c", "ratio_s", "ratio_b", "error"])?;
    for row in rows {
        let mut record = vec![row.k.to_string(), row.t_min.to_string(), row.q.to_string()];
        match &row.report {
            Some(r) => {
                record.extend([r.m_o, r.m_c, r.m_s, r.m_b].map(|m| m.to_string()));
                record.extend(r.improvement_ratios().map(|x| x.to_string()));
            }
            None => record.extend(std::iter::repeat_n(String::new(), 7)),
        }
        record.push(row.error.clone().unwrap_or_default());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
