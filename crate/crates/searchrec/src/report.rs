//! Human-readable summary of a run: every table whose stage is complete, as
//! aligned text and CSV, plus what to run for the rest.

use std::path::Path;

use crate::error::{Error, Result};
use crate::formats::tables::Table;
use crate::formats::{read_json, read_text, write_bytes};
use crate::manifest::Manifest;
use crate::pipeline::{completed, paths, Selection, Stage};

pub const REPORT_DIR: &str = "report";

#[derive(Clone, Debug)]
pub struct Report {
    pub tables: Vec<Table>,
    pub missing: Vec<Stage>,
    pub text: String,
}

fn load_table(root: &Path, rel: &str, name: &str, title: &str) -> Result<Table> {
    let path = root.join(rel);
    let text = read_text(&path)?;
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::input(&path, e))?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|x| x.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()
        .map_err(|e| Error::input(&path, e))?;
    Ok(Table { name: name.into(), title: title.into(), header, rows })
}

/// Share of single-cluster recommendations at `t = 2` and `t = T - 1`.
pub fn concentration_endpoints(table: &Table) -> Option<(f64, f64)> {
    let share = |row: &Vec<String>| row.get(1).and_then(|s| s.parse::<f64>().ok());
    let second = table.rows.iter().find(|r| r[0] == "2").and_then(share)?;
    let last = table.rows.last().and_then(share)?;
    Some((second, last))
}

pub fn build(root: &Path) -> Result<Report> {
    let manifest = Manifest::load_if_present(root)?
        .ok_or_else(|| Error::Validation(format!("no manifest in {}; run `searchrec pipeline --seed <n>` first", root.display())))?;
    let done = completed(root, &manifest);
    let has = |s: Stage| done.contains(&s);
    let mut tables = Vec::new();
    if has(Stage::Cluster) {
        tables.push(load_table(root, paths::SILHOUETTE, "silhouette", "Silhouette by number of clusters")?);
    }
    if has(Stage::Select) {
        tables.push(load_table(root, paths::FIT_GRID, "fit_grid", "Out-of-sample fit (* = selected)")?);
        let sel: Selection = read_json(&root.join(paths::SELECTION))?;
        if has(Stage::Recode) && root.join(paths::clusters(sel.k)).exists() {
            tables.push(load_table(root, &paths::clusters(sel.k), "clusters", &format!("Clusters at K = {}", sel.k))?);
        }
    }
    if has(Stage::Solve) {
        tables.push(load_table(root, paths::STATUS_QUO, "status_quo", "Status-quo recommendation matrix")?);
        tables.push(load_table(root, paths::FIRST_BEST_MATRIX, "first_best_matrix", "First-best recommendation shares by viewed cluster")?);
        tables.push(load_table(root, paths::REC_DISTRIBUTION, "rec_distribution", "First-best recommendation shares by period")?);
        tables.push(load_table(root, paths::CONCENTRATION, "concentration", "First-best recommendation concentration by period")?);
    }
    if has(Stage::Counterfactual) {
        tables.push(load_table(root, paths::SCENARIOS, "scenarios", "Expected profit by recommendation regime (status quo = 100)")?);
    }
    let missing: Vec<Stage> = Stage::ALL.into_iter().filter(|s| !has(*s)).collect();

    let mut text = String::new();
    for t in &tables {
        text.push_str(&t.to_text());
        if t.name == "concentration" {
            if let Some((a, b)) = concentration_endpoints(t) {
                let verdict = if b >= a { "more concentrated late in the session" } else { "not more concentrated late in the session" };
                text.push_str(&format!("single-cluster share: t = 2: {a:.3}, t = T-1: {b:.3} ({verdict})\n"));
            }
        }
        text.push('\n');
    }
    if !missing.is_empty() {
        let names: Vec<&str> = missing.iter().map(|s| s.name()).collect();
        let mut cmds: Vec<&str> = missing.iter().map(|s| s.command()).collect();
        cmds.dedup();
        text.push_str(&format!("Missing stages: {}.\n", names.join(", ")));
        text.push_str(&format!(
            "To complete the report run: {} (or `searchrec pipeline --seed <n>`).\n",
            cmds.iter().map(|c| format!("`searchrec {c}`")).collect::<Vec<_>>().join(", then ")
        ));
    }
    Ok(Report { tables, missing, text })
}

/// Builds the report and writes `report/report.txt` plus one CSV per table.
pub fn write(root: &Path) -> Result<Report> {
    let r = build(root)?;
    let dir = root.join(REPORT_DIR);
    for t in &r.tables {
        t.write_csv(&dir)?;
    }
    write_bytes(&dir.join("report.txt"), r.text.as_bytes())?;
    Ok(r)
}
