//! Line-delimited JSON metric records and run summaries.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GgdError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Scalar(f64),
    /// NaN entries (e.g. classes without samples) are written as `null`.
    Vector(#[serde(with = "nan_as_null")] Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| (!x.is_nan()).then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opt.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

impl MetricValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            MetricValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRecord {
    pub seed: u64,
    pub epoch: usize,
    pub split: String,
    pub metric: String,
    pub value: MetricValue,
    /// Global iteration for records emitted within an epoch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
}

/// Ordered metric records of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricLog {
    seed: u64,
    records: Vec<MetricRecord>,
}

impl MetricLog {
    pub fn new(seed: u64) -> Self {
        MetricLog {
            seed,
            records: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn records(&self) -> &[MetricRecord] {
        &self.records
    }

    fn push(&mut self, epoch: usize, split: &str, metric: &str, value: MetricValue, iteration: Option<usize>) {
        debug_assert!(self.records.last().is_none_or(|r| r.epoch <= epoch));
        self.records.push(MetricRecord {
            seed: self.seed,
            epoch,
            split: split.into(),
            metric: metric.into(),
            value,
            iteration,
        });
    }

    pub fn scalar(&mut self, epoch: usize, split: &str, metric: &str, value: f64) {
        self.push(epoch, split, metric, MetricValue::Scalar(value), None);
    }

    pub fn scalar_at(&mut self, epoch: usize, iteration: usize, split: &str, metric: &str, value: f64) {
        self.push(epoch, split, metric, MetricValue::Scalar(value), Some(iteration));
    }

    pub fn vector(&mut self, epoch: usize, split: &str, metric: &str, value: Vec<f64>) {
        self.push(epoch, split, metric, MetricValue::Vector(value), None);
    }

    pub fn matrix(&mut self, epoch: usize, split: &str, metric: &str, value: Vec<Vec<f64>>) {
        self.push(epoch, split, metric, MetricValue::Matrix(value), None);
    }

    /// Every record of one split and metric, in order.
    pub fn series<'a>(&'a self, split: &'a str, metric: &'a str) -> impl Iterator<Item = &'a MetricRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.split == split && r.metric == metric)
    }

    /// Latest epoch-level value of one split and metric.
    pub fn last(&self, split: &str, metric: &str) -> Option<&MetricValue> {
        self.records
            .iter()
            .rev()
            .find(|r| r.split == split && r.metric == metric && r.iteration.is_none())
            .map(|r| &r.value)
    }

    pub fn last_scalar(&self, split: &str, metric: &str) -> Option<f64> {
        self.last(split, metric).and_then(MetricValue::as_scalar)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r: MetricRecord =
                serde_json::from_str(line).map_err(|e| GgdError::Format(format!("metric log line {}: {e}", i + 1)))?;
            records.push(r);
        }
        let seed = records.first().map_or(0, |r| r.seed);
        if records.iter().any(|r| r.seed != seed) {
            return Err(GgdError::Format("metric log mixes several seeds".into()));
        }
        if records.windows(2).any(|w| w[1].epoch < w[0].epoch) {
            return Err(GgdError::Format("metric log epochs go backwards".into()));
        }
        Ok(MetricLog { seed, records })
    }

    /// Final epoch-level value of every split and metric.
    pub fn summary(&self, method: &str) -> RunSummary {
        let mut last: BTreeMap<String, BTreeMap<String, MetricValue>> = BTreeMap::new();
        for r in self.records.iter().filter(|r| r.iteration.is_none()) {
            last.entry(r.split.clone())
                .or_default()
                .insert(r.metric.clone(), r.value.clone());
        }
        RunSummary {
            method: method.into(),
            seed: self.seed,
            epochs: self.records.iter().map(|r| r.epoch).max().map_or(0, |e| e + 1),
            last,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomically(path, self.to_jsonl().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        MetricLog::from_jsonl(&fs::read_to_string(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub method: String,
    pub seed: u64,
    pub epochs: usize,
    /// split -> metric -> final value.
    pub last: BTreeMap<String, BTreeMap<String, MetricValue>>,
}

impl RunSummary {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        write_atomically(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&fs::read_to_string(path)?)
            .map_err(|e| GgdError::Format(format!("{}: {e}", path.display())))
    }
}

/// Writes `path.partial` and renames it into place once complete. On failure
/// the `.partial` file is left behind.
pub fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut partial = path.as_os_str().to_owned();
    partial.push(".partial");
    let partial = Path::new(&partial);
    let mut file = fs::File::create(partial)?;
    file.write_all(bytes)?;
    file.sync_all()?;
    fs::rename(partial, path)?;
    Ok(())
}
