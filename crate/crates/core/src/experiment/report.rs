use super::synthetic::{CellRecord, ModelSummary, SyntheticResults};
use super::{write_text, ExperimentConfig, RoarResults};
use crate::error::{Error, Result};
use crate::metrics::append_ledger;
use crate::roar::{RankingSource, RoarCurve};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Output files whose bytes depend only on the config.
pub const DETERMINISTIC_SYNTHETIC_FILES: [&str; 4] = ["table1.csv", "table1.json", "cells.csv", "models.csv"];
pub const DETERMINISTIC_ROAR_FILES: [&str; 4] = ["roar_curves.json", "roar_curves.csv", "roar_auc.csv", "roar_auc.md"];

/// One `(dataset, method)` row of the benchmark table, aggregated over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub method: String,
    pub label: String,
    pub seeds: usize,
    pub spearman_mean: Option<f64>,
    pub spearman_std: Option<f64>,
    pub topk_mean: Option<f64>,
    pub topk_std: Option<f64>,
    pub noise_mass_mean: Option<f64>,
    pub noise_mass_std: Option<f64>,
    pub n_evaluated_mean: Option<f64>,
    pub best_spearman: bool,
    pub best_topk: bool,
    pub best_noise_mass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub setup_seconds: f64,
    pub attribution_seconds: f64,
}

impl TimingRow {
    pub fn total(&self) -> f64 {
        self.setup_seconds + self.attribution_seconds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoarAucRow {
    pub dataset: String,
    pub method: String,
    pub label: String,
    pub seeds: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub best: bool,
}

fn mean_std(v: &[f64]) -> Option<(f64, f64)> {
    if v.is_empty() {
        return None;
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    Some((m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()))
}

fn label_for(id: &str) -> String {
    id.parse::<RankingSource>().map(|s| s.label().to_string()).unwrap_or_else(|_| id.to_string())
}

/// Mean and population std over seeds of each cell metric; failed cells are
/// left out.
pub(crate) fn aggregate_table(config: &ExperimentConfig, cells: &[CellRecord]) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for dataset in &config.datasets {
        for method in &config.methods {
            let ok: Vec<&CellRecord> = cells
                .iter()
                .filter(|c| c.dataset == dataset.name() && c.method == method.id() && c.succeeded())
                .collect();
            let collect = |f: &dyn Fn(&CellRecord) -> Option<f64>| -> Vec<f64> { ok.iter().filter_map(|c| f(c)).collect() };
            let rho = mean_std(&collect(&|c| c.spearman_mean));
            let topk = mean_std(&collect(&|c| c.topk_precision));
            let noise = mean_std(&collect(&|c| c.noise_mass));
            let evaluated = mean_std(&collect(&|c| Some(c.n_evaluated as f64)));
            rows.push(TableRow {
                dataset: dataset.name().into(),
                method: method.id().into(),
                label: method.label().into(),
                seeds: ok.len(),
                spearman_mean: rho.map(|p| p.0),
                spearman_std: rho.map(|p| p.1),
                topk_mean: topk.map(|p| p.0),
                topk_std: topk.map(|p| p.1),
                noise_mass_mean: noise.map(|p| p.0),
                noise_mass_std: noise.map(|p| p.1),
                n_evaluated_mean: evaluated.map(|p| p.0),
                best_spearman: false,
                best_topk: false,
                best_noise_mass: false,
            });
        }
    }
    mark_best(&mut rows);
    rows
}

/// Index of the best value in `values`, first one on ties.
fn best_index(values: &[Option<f64>], higher_is_better: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            let better = match best {
                None => true,
                Some((_, b)) => (higher_is_better && v > b) || (!higher_is_better && v < b),
            };
            if better {
                best = Some((i, v));
            }
        }
    }
    best.map(|b| b.0)
}

fn group_ranges<T>(rows: &[T], key: impl Fn(&T) -> &str) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=rows.len() {
        if i == rows.len() || key(&rows[i]) != key(&rows[start]) {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Sets exactly one best marker per dataset and metric (when any value exists).
pub fn mark_best(rows: &mut [TableRow]) {
    for range in group_ranges(rows, |r| &r.dataset) {
        let group = &mut rows[range];
        for r in group.iter_mut() {
            r.best_spearman = false;
            r.best_topk = false;
            r.best_noise_mass = false;
        }
        let pick = |g: &[TableRow], f: fn(&TableRow) -> Option<f64>, hi| best_index(&g.iter().map(f).collect::<Vec<_>>(), hi);
        if let Some(i) = pick(group, |r| r.spearman_mean, true) {
            group[i].best_spearman = true;
        }
        if let Some(i) = pick(group, |r| r.topk_mean, true) {
            group[i].best_topk = true;
        }
        if let Some(i) = pick(group, |r| r.noise_mass_mean, false) {
            group[i].best_noise_mass = true;
        }
    }
}

/// AUC summary, datasets in curve order and methods by ascending AUC.
pub(crate) fn auc_table(curves: &[RoarCurve]) -> Vec<RoarAucRow> {
    let mut rows: Vec<RoarAucRow> = curves
        .iter()
        .map(|c| RoarAucRow {
            dataset: c.dataset.clone(),
            method: c.method.clone(),
            label: label_for(&c.method),
            seeds: c.seeds.len(),
            auc_mean: c.auc_mean,
            auc_std: c.auc_std,
            best: false,
        })
        .collect();
    let mut order: Vec<String> = Vec::new();
    for r in &rows {
        if !order.contains(&r.dataset) {
            order.push(r.dataset.clone());
        }
    }
    rows.sort_by(|a, b| {
        let da = order.iter().position(|d| *d == a.dataset);
        let db = order.iter().position(|d| *d == b.dataset);
        da.cmp(&db).then(a.auc_mean.total_cmp(&b.auc_mean))
    });
    for range in group_ranges(&rows, |r| &r.dataset) {
        rows[range.start].best = true;
    }
    rows
}

/// `x` with four significant digits.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return "n/a".into();
    }
    if x == 0.0 {
        return "0.000".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (3 - magnitude).max(0) as usize;
    let rounded = format!("{x:.decimals$}");
    // rounding can carry into a new digit, e.g. 9.9996 -> 10.000
    let reparsed: f64 = rounded.parse().unwrap_or(x);
    if reparsed != 0.0 && reparsed.abs().log10().floor() as i32 > magnitude && decimals > 0 {
        return format!("{x:.prec$}", prec = decimals - 1);
    }
    rounded
}

fn pm(mean: Option<f64>, std: Option<f64>, bold: bool) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => {
            let text = format!("{} ± {}", format_sig(m), format_sig(s));
            if bold {
                format!("**{text}**")
            } else {
                text
            }
        }
        _ => "n/a".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Synthetic { rows: Vec<TableRow>, models: Vec<ModelSummary>, timings: Vec<TimingRow> },
    Roar { curves: Vec<RoarCurve> },
}

impl Report {
    fn is_empty(&self) -> bool {
        match self {
            Report::Synthetic { rows, .. } => rows.is_empty(),
            Report::Roar { curves } => curves.is_empty(),
        }
    }
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

fn synthetic_markdown(rows: &[TableRow], models: &[ModelSummary], timings: &[TimingRow]) -> String {
    let mut out = String::from("| Dataset | Method | Spearman ↑ | Top-k precision ↑ | Noise mass ↓ | Time (s) | Evaluated |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    for range in group_ranges(rows, |r| &r.dataset) {
        let group = &rows[range];
        let time = |r: &TableRow| -> Option<f64> {
            let v: Vec<f64> = timings.iter().filter(|t| t.dataset == r.dataset && t.method == r.method).map(TimingRow::total).collect();
            mean_std(&v).map(|p| p.0)
        };
        let times: Vec<Option<f64>> = group.iter().map(time).collect();
        let fastest = best_index(&times, false);
        for (i, r) in group.iter().enumerate() {
            let t = match times[i] {
                Some(t) if Some(i) == fastest => format!("**{}**", format_sig(t)),
                Some(t) => format_sig(t),
                None => "n/a".into(),
            };
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} |",
                r.dataset,
                r.label,
                pm(r.spearman_mean, r.spearman_std, r.best_spearman),
                pm(r.topk_mean, r.topk_std, r.best_topk),
                pm(r.noise_mass_mean, r.noise_mass_std, r.best_noise_mass),
                t,
                r.n_evaluated_mean.map(format_sig).unwrap_or_else(|| "n/a".into()),
            );
        }
    }
    if !models.is_empty() {
        out.push_str("\n| Dataset | Seed | Train acc | Test acc | Mean conf | Conf (correct) | Conf (wrong) | AGOP rank |\n");
        out.push_str("|---|---|---|---|---|---|---|---|\n");
        for m in models {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {} | {} |",
                m.dataset,
                m.seed,
                format_sig(m.train_accuracy),
                format_sig(m.test_accuracy),
                format_sig(m.mean_confidence),
                format_sig(m.confidence_correct),
                format_sig(m.confidence_wrong),
                m.agop_rank.map(|k| k.to_string()).unwrap_or_else(|| "n/a".into()),
            );
        }
    }
    out
}

fn roar_markdown(curves: &[RoarCurve]) -> String {
    let table = auc_table(curves);
    let mut datasets: Vec<String> = Vec::new();
    for r in &table {
        if !datasets.contains(&r.dataset) {
            datasets.push(r.dataset.clone());
        }
    }
    let mut methods: Vec<String> = table.iter().filter(|r| r.dataset == datasets[0]).map(|r| r.method.clone()).collect();
    for r in &table {
        if !methods.contains(&r.method) {
            methods.push(r.method.clone());
        }
    }
    let mut out = String::from("| Method |");
    for d in &datasets {
        let _ = write!(out, " {d} AUC ↓ |");
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(datasets.len()));
    out.push('\n');
    for m in &methods {
        let _ = write!(out, "| {} |", label_for(m));
        for d in &datasets {
            match table.iter().find(|r| &r.dataset == d && &r.method == m) {
                Some(r) => {
                    let _ = write!(out, " {} |", pm(Some(r.auc_mean), Some(r.auc_std), r.best));
                }
                None => out.push_str(" n/a |"),
            }
        }
        out.push('\n');
    }
    for d in &datasets {
        let group: Vec<&RoarCurve> = curves.iter().filter(|c| &c.dataset == d).collect();
        let Some(first) = group.first() else { continue };
        let _ = write!(out, "\n{d}: mean test accuracy by removed fraction\n\n| Method |");
        for (f, m) in first.fractions.iter().zip(&first.masked_features) {
            let _ = write!(out, " {} ({m}) |", format_sig(*f));
        }
        out.push_str("\n|---|");
        out.push_str(&"---|".repeat(first.fractions.len()));
        out.push('\n');
        for c in group {
            let _ = write!(out, "| {} |", label_for(&c.method));
            for accs in &c.accuracies {
                let _ = write!(out, " {} |", format_sig(accs.iter().sum::<f64>() / accs.len() as f64));
            }
            out.push('\n');
        }
    }
    out
}

#[derive(Serialize)]
struct CurveRow<'a> {
    method: &'a str,
    dataset: &'a str,
    fraction: f64,
    masked_features: usize,
    seed: u64,
    accuracy: f64,
}

/// Writes `report` in `format` under `dir` and returns the paths written.
pub fn emit_report(report: &Report, format: ReportFormat, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    if report.is_empty() {
        return Err(Error::EmptyEvaluation("nothing to report".into()));
    }
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    match (report, format) {
        (Report::Synthetic { rows, .. }, ReportFormat::Csv) => {
            let p = dir.join("table1.csv");
            write_csv_rows(&p, rows)?;
            written.push(p);
        }
        (Report::Synthetic { rows, .. }, ReportFormat::Json) => {
            let p = dir.join("table1.json");
            write_json(&p, rows)?;
            written.push(p);
        }
        (Report::Synthetic { rows, models, timings }, ReportFormat::Markdown) => {
            let p = dir.join("table1.md");
            write_text(&p, &synthetic_markdown(rows, models, timings))?;
            written.push(p);
        }
        (Report::Roar { curves }, ReportFormat::Csv) => {
            let p = dir.join("roar_curves.csv");
            let mut long = Vec::new();
            for c in curves {
                for (f, &fraction) in c.fractions.iter().enumerate() {
                    for (s, &seed) in c.seeds.iter().enumerate() {
                        long.push(CurveRow {
                            method: &c.method,
                            dataset: &c.dataset,
                            fraction,
                            masked_features: c.masked_features[f],
                            seed,
                            accuracy: c.accuracies[f][s],
                        });
                    }
                }
            }
            write_csv_rows(&p, &long)?;
            written.push(p);
            let p = dir.join("roar_auc.csv");
            write_csv_rows(&p, &auc_table(curves))?;
            written.push(p);
        }
        (Report::Roar { curves }, ReportFormat::Json) => {
            let p = dir.join("roar_curves.json");
            write_json(&p, curves)?;
            written.push(p);
        }
        (Report::Roar { curves }, ReportFormat::Markdown) => {
            let p = dir.join("roar_auc.md");
            write_text(&p, &roar_markdown(curves))?;
            written.push(p);
        }
    }
    Ok(written)
}

/// Reads back whichever report a previous run left in `dir`.
pub fn load_report(dir: impl AsRef<Path>) -> Result<Report> {
    let dir = dir.as_ref();
    let table = dir.join("table1.json");
    if table.exists() {
        let text = std::fs::read_to_string(&table).map_err(|e| Error::io(&table, e))?;
        let rows: Vec<TableRow> = serde_json::from_str(&text)?;
        let models_path = dir.join("models.csv");
        let models = if models_path.exists() { read_csv_rows(&models_path)? } else { Vec::new() };
        let timings_path = dir.join("timings.csv");
        let timings = if timings_path.exists() { read_csv_rows(&timings_path)? } else { Vec::new() };
        return Ok(Report::Synthetic { rows, models, timings });
    }
    let curves = dir.join("roar_curves.json");
    if curves.exists() {
        let text = std::fs::read_to_string(&curves).map_err(|e| Error::io(&curves, e))?;
        return Ok(Report::Roar { curves: serde_json::from_str(&text)? });
    }
    Err(Error::Config(format!("no table1.json or roar_curves.json in {}", dir.display())))
}

impl SyntheticResults {
    pub fn report(&self) -> Report {
        Report::Synthetic { rows: self.table.clone(), models: self.models.clone(), timings: self.timings.clone() }
    }

    /// Writes every report and the run's side files into `dir`.
    pub fn write(&self, config: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        let report = self.report();
        let mut written = Vec::new();
        for f in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown] {
            written.extend(emit_report(&report, f, dir)?);
        }
        for (name, rows) in [("cells.csv", 0), ("models.csv", 1), ("timings.csv", 2)] {
            let p = dir.join(name);
            match rows {
                0 => write_csv_rows(&p, &self.cells)?,
                1 => write_csv_rows(&p, &self.models)?,
                _ => write_csv_rows(&p, &self.timings)?,
            }
            written.push(p);
        }
        let ledger = dir.join("metrics_ledger.csv");
        append_ledger(&ledger, &self.reports)?;
        written.push(ledger);
        let p = dir.join("config.toml");
        write_text(&p, &config.to_toml()?)?;
        written.push(p);
        Ok(written)
    }
}

impl RoarResults {
    pub fn report(&self) -> Report {
        Report::Roar { curves: self.curves.clone() }
    }

    pub fn write(&self, config: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        let report = self.report();
        let mut written = Vec::new();
        for f in [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown] {
            written.extend(emit_report(&report, f, dir)?);
        }
        let p = dir.join("roar_timings.json");
        write_json(&p, &self.timings)?;
        written.push(p);
        if !self.failures.is_empty() {
            let p = dir.join("failures.json");
            write_json(&p, &self.failures)?;
            written.push(p);
        }
        let p = dir.join("config.toml");
        write_text(&p, &config.to_toml()?)?;
        written.push(p);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attribution::MethodKind;

    fn row(dataset: &str, method: MethodKind, rho: f64, topk: f64, noise: f64) -> TableRow {
        TableRow {
            dataset: dataset.into(),
            method: method.id().into(),
            label: method.label().into(),
            seeds: 1,
            spearman_mean: Some(rho),
            spearman_std: Some(0.0),
            topk_mean: Some(topk),
            topk_std: Some(0.0),
            noise_mass_mean: Some(noise),
            noise_mass_std: Some(0.0),
            n_evaluated_mean: Some(900.0),
            best_spearman: false,
            best_topk: false,
            best_noise_mass: false,
        }
    }

    fn sample_rows() -> Vec<TableRow> {
        let mut rows = vec![
            row("linear", MethodKind::AgopIxg, 0.7, 0.9, 0.06),
            row("linear", MethodKind::Lime, 0.7, 0.95, 0.17),
            row("sparse", MethodKind::AgopIxg, 0.5, 0.5, 0.24),
            row("sparse", MethodKind::Lime, 0.3, 0.5, 0.61),
        ];
        mark_best(&mut rows);
        rows
    }

    #[test]
    fn one_best_per_dataset_and_metric() {
        let rows = sample_rows();
        for d in ["linear", "sparse"] {
            let g: Vec<&TableRow> = rows.iter().filter(|r| r.dataset == d).collect();
            assert_eq!(g.iter().filter(|r| r.best_spearman).count(), 1);
            assert_eq!(g.iter().filter(|r| r.best_topk).count(), 1);
            assert_eq!(g.iter().filter(|r| r.best_noise_mass).count(), 1);
        }
        assert!(rows[0].best_spearman && !rows[1].best_spearman);
        assert!(rows[1].best_topk && rows[0].best_noise_mass);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.70712), "0.7071");
        assert_eq!(format_sig(0.027), "0.02700");
        assert_eq!(format_sig(32.98), "32.98");
        assert_eq!(format_sig(1650.4), "1650");
        assert_eq!(format_sig(9.99996), "10.00");
        assert_eq!(format_sig(-0.5), "-0.5000");
        assert_eq!(format_sig(f64::NAN), "n/a");
    }

    #[test]
    fn csv_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let report = Report::Synthetic { rows: sample_rows(), models: vec![], timings: vec![] };
        emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
        emit_report(&report, ReportFormat::Json, dir.path()).unwrap();
        let back: Vec<TableRow> = read_csv_rows(&dir.path().join("table1.csv")).unwrap();
        assert_eq!(back, sample_rows());
        assert_eq!(load_report(dir.path()).unwrap(), report);
    }

    #[test]
    fn markdown_bolds_exactly_one_best_per_metric() {
        let md = synthetic_markdown(&sample_rows(), &[], &[]);
        let linear: Vec<&str> = md.lines().filter(|l| l.starts_with("| linear")).collect();
        assert_eq!(linear.len(), 2);
        let bold = |col: usize| linear.iter().filter(|l| l.split('|').nth(col).unwrap().contains("**")).count();
        assert_eq!((bold(3), bold(4), bold(5)), (1, 1, 1));
    }

    #[test]
    fn empty_report_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let empty = Report::Roar { curves: vec![] };
        assert!(emit_report(&empty, ReportFormat::Csv, &out).is_err());
        assert!(!out.exists());
    }

    #[test]
    fn auc_rows_sort_ascending_with_one_best() {
        let curve = |m: &str, auc: f64| RoarCurve {
            method: m.into(),
            dataset: "adult".into(),
            fractions: vec![0.0, 0.5],
            masked_features: vec![0, 52],
            seeds: vec![0],
            accuracies: vec![vec![0.8], vec![0.8]],
            rankings: vec![vec![]],
            auc_per_seed: vec![auc],
            auc_mean: auc,
            auc_std: 0.0,
        };
        let t = auc_table(&[curve("lime", 0.39), curve("agop_ixg", 0.40), curve("integrated_gradients", 0.38)]);
        assert_eq!(t.iter().map(|r| r.method.as_str()).collect::<Vec<_>>(), ["integrated_gradients", "lime", "agop_ixg"]);
        assert_eq!(t.iter().filter(|r| r.best).count(), 1);
        assert!(t[0].best);
    }
}
