//! CSV export: one header row, comma-separated, `.` decimals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use super::log::{MetricLog, MetricValue};

fn cell(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Matrix with a leading `reference` column naming each row index.
pub fn matrix_csv(rows: &[Vec<f64>]) -> String {
    let width = rows.first().map_or(0, Vec::len);
    let mut out = String::from("reference");
    for j in 0..width {
        write!(out, ",{j}").unwrap();
    }
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        out.push_str(&i.to_string());
        for v in row {
            write!(out, ",{}", cell(*v)).unwrap();
        }
        out.push('\n');
    }
    out
}

/// `epoch,iteration,split,metric,value` rows for every scalar record.
pub fn curves_csv(log: &MetricLog) -> String {
    let mut out = String::from("epoch,iteration,split,metric,value\n");
    for r in log.records() {
        if let MetricValue::Scalar(v) = r.value {
            let it = r.iteration.map_or(String::new(), |i| i.to_string());
            writeln!(out, "{},{it},{},{},{}", r.epoch, r.split, r.metric, cell(v)).unwrap();
        }
    }
    out
}

/// Rows are methods, columns are splits; missing cells stay empty.
pub fn table_csv(rows: &BTreeMap<String, BTreeMap<String, f64>>) -> String {
    let columns: BTreeSet<&String> = rows.values().flat_map(|r| r.keys()).collect();
    let mut out = String::from("method");
    for c in &columns {
        write!(out, ",{c}").unwrap();
    }
    out.push('\n');
    for (method, values) in rows {
        out.push_str(method);
        for c in &columns {
            write!(out, ",{}", values.get(*c).map_or(String::new(), |v| cell(*v))).unwrap();
        }
        out.push('\n');
    }
    out
}
