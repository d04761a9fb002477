//! Accuracy report tables: the long per-run CSV, merging several runs with
//! an edge-enhanced-minus-baseline delta column, and a wide models-by-datasets
//! layout.
//!
//! Accuracies are stored in percent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 6] = ["model", "dataset", "layers", "mean_acc", "std_acc", "seeds"];

/// Prefix that marks an edge-enhanced model name.
pub const EE_PREFIX: &str = "EE-";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub dataset: String,
    pub layers: usize,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub seeds: usize,
}

impl ReportRow {
    /// Summarizes per-seed accuracies given as fractions.
    pub fn from_accuracies(model: &str, dataset: &str, layers: usize, acc: &[f64]) -> Self {
        let pct: Vec<f64> = acc.iter().map(|a| 100.0 * a).collect();
        let (mean_acc, std_acc) = if pct.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (crate::stats::mean(&pct), crate::stats::std_dev(&pct))
        };
        Self {
            model: model.to_string(),
            dataset: dataset.to_string(),
            layers,
            mean_acc,
            std_acc,
            seeds: acc.len(),
        }
    }

    /// The baseline this row is compared against, if it is edge-enhanced.
    pub fn baseline_model(&self) -> Option<&str> {
        self.model
            .strip_prefix(EE_PREFIX)
            .map(|m| m.split('(').next().unwrap_or(m))
    }
}

pub fn write_report(rows: &[ReportRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_HEADER).unwrap();
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.dataset.clone(),
            r.layers.to_string(),
            format!("{:.4}", r.mean_acc),
            format!("{:.4}", r.std_acc),
            r.seeds.to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

pub fn parse_report(text: &str) -> Result<Vec<ReportRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .clone();
    if header.iter().ne(REPORT_HEADER.iter().copied()) {
        return Err(Error::Schema(format!(
            "expected columns {}, found {}",
            REPORT_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
        let num = |c: usize| -> Result<f64> {
            rec[c]
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, format!("bad {} `{}`", REPORT_HEADER[c], &rec[c])))
        };
        let count = |c: usize| -> Result<usize> {
            rec[c]
                .trim()
                .parse()
                .map_err(|_| Error::parse(line, format!("bad {} `{}`", REPORT_HEADER[c], &rec[c])))
        };
        rows.push(ReportRow {
            model: rec[0].trim().to_string(),
            dataset: rec[1].trim().to_string(),
            layers: count(2)?,
            mean_acc: num(3)?,
            std_acc: num(4)?,
            seeds: count(5)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergedRow {
    pub row: ReportRow,
    /// `mean_acc` minus the matching baseline's, for edge-enhanced rows
    /// whose baseline is present.
    pub delta: Option<f64>,
}

/// Concatenates named reports and attaches deltas.
///
/// Fails when the same (model, dataset, layers) appears twice, or when an
/// edge-enhanced model and its baseline were run at different depths on a
/// dataset, since no delta could then be formed.
pub fn merge_reports(inputs: &[(String, Vec<ReportRow>)]) -> Result<Vec<MergedRow>> {
    let mut seen: BTreeMap<(String, String, usize), &str> = BTreeMap::new();
    for (file, rows) in inputs {
        for r in rows {
            let key = (r.model.clone(), r.dataset.clone(), r.layers);
            if let Some(prev) = seen.insert(key, file) {
                return Err(Error::Schema(format!(
                    "{} / {} / L={} appears in both {prev} and {file}",
                    r.model, r.dataset, r.layers
                )));
            }
        }
    }

    // (dataset, baseline model) -> layer sets and contributing files
    type Side = (BTreeSet<usize>, BTreeSet<String>);
    let mut sides: BTreeMap<(String, String), (Side, Side)> = BTreeMap::new();
    for (file, rows) in inputs {
        for r in rows {
            let (base, is_ee) = match r.baseline_model() {
                Some(b) => (b.to_string(), true),
                None => (r.model.clone(), false),
            };
            let entry = sides.entry((r.dataset.clone(), base)).or_default();
            let side = if is_ee { &mut entry.1 } else { &mut entry.0 };
            side.0.insert(r.layers);
            side.1.insert(file.clone());
        }
    }
    for ((dataset, model), (base, ee)) in &sides {
        if !base.0.is_empty() && !ee.0.is_empty() && base.0 != ee.0 {
            let files: BTreeSet<&String> = base.1.iter().chain(&ee.1).collect();
            return Err(Error::Schema(format!(
                "{model} on {dataset}: baseline layers {:?} vs edge-enhanced layers {:?} in files {}",
                base.0,
                ee.0,
                files.into_iter().cloned().collect::<Vec<_>>().join(", ")
            )));
        }
    }

    let baselines: BTreeMap<(&str, &str, usize), f64> = inputs
        .iter()
        .flat_map(|(_, rows)| rows)
        .filter(|r| r.baseline_model().is_none())
        .map(|r| ((r.model.as_str(), r.dataset.as_str(), r.layers), r.mean_acc))
        .collect();
    Ok(inputs
        .iter()
        .flat_map(|(_, rows)| rows)
        .map(|r| MergedRow {
            delta: r
                .baseline_model()
                .and_then(|b| baselines.get(&(b, r.dataset.as_str(), r.layers)))
                .map(|base| r.mean_acc - base),
            row: r.clone(),
        })
        .collect())
}

pub fn write_merged(rows: &[MergedRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = REPORT_HEADER.to_vec();
    header.push("delta");
    w.write_record(&header).unwrap();
    for m in rows {
        let r = &m.row;
        w.write_record([
            r.model.clone(),
            r.dataset.clone(),
            r.layers.to_string(),
            format!("{:.4}", r.mean_acc),
            format!("{:.4}", r.std_acc),
            r.seeds.to_string(),
            m.delta.map(|d| format!("{d:+.4}")).unwrap_or_default(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

/// Rows are `model/L<layers>`, columns are datasets, cells are
/// `mean ± std` in percent; missing cells are empty.
pub fn wide_table(rows: &[ReportRow]) -> String {
    let datasets: BTreeSet<&str> = rows.iter().map(|r| r.dataset.as_str()).collect();
    let mut models: Vec<(String, usize)> = Vec::new();
    for r in rows {
        if !models.iter().any(|(m, l)| *m == r.model && *l == r.layers) {
            models.push((r.model.clone(), r.layers));
        }
    }
    let mut out = String::from("model,layers");
    for d in &datasets {
        write!(out, ",{d}").unwrap();
    }
    out.push('\n');
    for (m, l) in &models {
        write!(out, "{m},{l}").unwrap();
        for d in &datasets {
            out.push(',');
            if let Some(r) = rows
                .iter()
                .find(|r| r.model == *m && r.layers == *l && r.dataset == *d)
            {
                write!(out, "{:.2} ± {:.2}", r.mean_acc, r.std_acc).unwrap();
            }
        }
        out.push('\n');
    }
    out
}
