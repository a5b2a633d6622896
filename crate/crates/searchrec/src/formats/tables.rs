//! Report tables: one CSV per table plus an aligned plain-text rendering.
//! Cluster labels are one-based.

use std::path::Path;

use searchrec_core::clustering::ClusterModel;
use searchrec_core::counterfactual::ScenarioResult;
use searchrec_core::policy::GridCell;

use super::{read_text, write_bytes};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, title: &str, header: &[&str]) -> Self {
        Table { name: name.into(), title: title.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
    }

    /// First column left-aligned, the rest right-aligned.
    pub fn to_text(&self) -> String {
        let n = self.header.len();
        let mut width = vec![0; n];
        for r in std::iter::once(&self.header).chain(&self.rows) {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |r: &[String]| {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = width[i]) } else { format!("{c:>w$}", w = width[i]) })
                .collect();
            cells.join("  ").trim_end().to_string()
        };
        let mut out = format!("{}\n", self.title);
        out.push_str(&line(&self.header));
        out.push('\n');
        out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * n.saturating_sub(1)));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        write_bytes(&dir.join(format!("{}.csv", self.name)), self.to_csv().as_bytes())
    }
}

fn f(v: f64, digits: usize) -> String {
    format!("{v:.digits$}")
}

/// Rounds a probability row to `digits` decimals so that the rounded entries
/// still sum to exactly one (largest remainder).
pub fn round_row(row: &[f64], digits: u32) -> Vec<String> {
    let scale = 10f64.powi(digits as i32);
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return row.iter().map(|v| f(*v, digits as usize)).collect();
    }
    let target = scale.round() as i64;
    let exact: Vec<f64> = row.iter().map(|v| v / total * scale).collect();
    let mut units: Vec<i64> = exact.iter().map(|v| v.floor() as i64).collect();
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let missing = target - units.iter().sum::<i64>();
    for &i in order.iter().cycle().take(missing.max(0) as usize) {
        units[i] += 1;
    }
    units.iter().map(|&u| f(u as f64 / scale, digits as usize)).collect()
}

pub fn silhouette_table(models: &[ClusterModel], chosen: usize) -> Table {
    let mut t = Table::new("silhouette", "Silhouette by number of clusters", &["k", "silhouette", "within_ss", "iterations", "chosen"]);
    for m in models {
        t.push(vec![
            m.k.to_string(),
            f(m.silhouette, 4),
            f(m.within_ss, 3),
            m.iterations.to_string(),
            if m.k == chosen { "*".into() } else { String::new() },
        ]);
    }
    t
}

pub fn cluster_sizes_table(model: &ClusterModel, margins: &[f64]) -> Table {
    let mut t = Table::new("clusters", &format!("Clusters at K = {}", model.k), &["cluster", "vehicles", "margin"]);
    for (c, n) in model.sizes().iter().enumerate() {
        t.push(vec![(c + 1).to_string(), n.to_string(), f(margins[c], 2)]);
    }
    t
}

pub fn fit_grid_table(grid: &[GridCell], selected: Option<usize>) -> Table {
    let mut t = Table::new(
        "fit_grid",
        "Out-of-sample fit",
        &["method", "k", "n", "accuracy", "lift", "log_loss", "hellinger", "nagelkerke_r2", "silhouette", "selected"],
    );
    for (i, c) in grid.iter().enumerate() {
        let r = &c.report;
        t.push(vec![
            c.method.label().into(),
            c.k.to_string(),
            r.n.to_string(),
            f(r.accuracy, 4),
            f(r.lift, 4),
            f(r.log_loss, 4),
            f(r.hellinger, 4),
            f(r.nagelkerke_r2, 4),
            f(c.silhouette, 4),
            if selected == Some(i) { "*".into() } else { String::new() },
        ]);
    }
    t
}

/// Row-stochastic matrix, rows labelled by the viewed cluster.
pub fn matrix_table(name: &str, title: &str, rows: &[Vec<f64>]) -> Table {
    let k = rows.len();
    let header: Vec<String> = std::iter::once("viewed".to_string()).chain((1..=k).map(|c| format!("rec_{c}"))).collect();
    let mut t = Table { name: name.into(), title: title.into(), header, rows: Vec::new() };
    for (a, row) in rows.iter().enumerate() {
        let mut r = vec![(a + 1).to_string()];
        r.extend(round_row(row, 3));
        t.push(r);
    }
    t
}

/// `per_period[t - 1][c]`, one row per period.
pub fn per_period_table(per_period: &[Vec<f64>]) -> Table {
    let k = per_period.first().map_or(0, Vec::len);
    let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=k).map(|c| format!("cluster_{c}"))).collect();
    let mut t = Table { name: "rec_distribution".into(), title: "First-best recommendation shares by period".into(), header, rows: Vec::new() };
    for (i, row) in per_period.iter().enumerate() {
        let mut r = vec![(i + 1).to_string()];
        r.extend(round_row(row, 3));
        t.push(r);
    }
    t
}

pub fn concentration_table(concentration: &[[f64; 3]]) -> Table {
    let mut t = Table::new(
        "concentration",
        "First-best recommendation concentration by period",
        &["t", "one_cluster", "two_clusters", "three_clusters"],
    );
    for (i, c) in concentration.iter().enumerate() {
        let mut r = vec![(i + 1).to_string()];
        r.extend(round_row(c, 3));
        t.push(r);
    }
    t
}

pub fn scenario_table(results: &[ScenarioResult]) -> Table {
    let mut t = Table::new(
        "scenarios",
        "Expected profit by recommendation regime (status quo = 100)",
        &["scenario", "expected_profit", "std_dev", "bootstrap_mean", "raw_profit", "replications"],
    );
    for r in results {
        t.push(vec![
            r.scenario.name().into(),
            f(r.expected_profit, 2),
            f(r.std_dev, 2),
            f(r.bootstrap_mean, 2),
            f(r.raw_profit, 4),
            r.replications.to_string(),
        ]);
    }
    t
}

pub fn margins_table(margins: &[f64]) -> Table {
    let mut t = Table::new("margins", "Margin by cluster", &["cluster", "margin"]);
    for (c, m) in margins.iter().enumerate() {
        t.push(vec![(c + 1).to_string(), format!("{m:?}")]);
    }
    t
}

/// Reads a `cluster,margin` CSV written by [`margins_table`]. Clusters must
/// be listed as `1..=K` in order.
pub fn read_margins(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::input(path, e))?;
        let bad = |m: &str| Error::input(path, format!("row {}: {m}", i + 1));
        let c: usize = rec.get(0).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("bad cluster"))?;
        if c != i + 1 {
            return Err(bad("clusters must be listed 1..K in order"));
        }
        let m: f64 = rec.get(1).and_then(|s| s.trim().parse().ok()).ok_or_else(|| bad("bad margin"))?;
        if !m.is_finite() {
            return Err(bad("margin must be finite"));
        }
        out.push(m);
    }
    if out.is_empty() {
        return Err(Error::input(path, "no margins"));
    }
    Ok(out)
}

/// Reads a matrix CSV written by [`matrix_table`] (values re-normalised per row).
pub fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = read_text(path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::input(path, e))?;
        let vals: Vec<f64> = rec
            .iter()
            .skip(1)
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::input(path, format!("row {}: {e}", i + 1)))?;
        let s: f64 = vals.iter().sum();
        if !(s > 0.0) || vals.iter().any(|v| *v < 0.0) {
            return Err(Error::input(path, format!("row {}: not a probability row", i + 1)));
        }
        rows.push(vals.iter().map(|v| v / s).collect());
    }
    Ok(rows)
}
