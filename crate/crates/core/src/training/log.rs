use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::losses::LossValue;

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub phase: String,
    pub iteration: usize,
    pub epoch: usize,
    pub lr: f64,
    pub loss: LossValue,
}

/// Dataset-wide objective before and after one training phase.
#[derive(Clone, Debug, Serialize)]
pub struct PhaseSummary {
    pub phase: String,
    pub iteration: usize,
    pub steps: usize,
    pub start_loss: f64,
    pub end_loss: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
    pub phases: Vec<PhaseSummary>,
    pub warnings: Vec<String>,
}

impl TrainLog {
    pub(crate) fn next_step(&self) -> usize {
        self.records.len()
    }

    pub fn phases_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a PhaseSummary> + 'a {
        self.phases.iter().filter(move |p| p.phase == name)
    }

    /// One JSON object per step record, then one per phase summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("serializable"));
            out.push('\n');
        }
        for p in &self.phases {
            let line = serde_json::json!({ "summary": p });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| Error::io(path, e))
    }
}
