//! Append-only metrics rows and run metadata.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{HarnessError, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const META_FILE: &str = "run.meta";
pub const CONFIG_FILE: &str = "config.cfg";

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub step: u64,
    pub task: String,
    pub metric: String,
    pub value: f64,
}

/// Rows are buffered until `flush`, which ends an evaluation block, so a
/// crash leaves a valid prefix. Steps never decrease.
pub struct MetricsWriter {
    out: csv::Writer<File>,
    last_step: Option<u64>,
    rows: Vec<Row>,
}

impl MetricsWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
        let mut out = csv::Writer::from_writer(file);
        out.write_record(["step", "task", "metric", "value"])?;
        out.flush().map_err(|e| HarnessError::io(path, e))?;
        Ok(Self {
            out,
            last_step: None,
            rows: Vec::new(),
        })
    }

    pub fn row(&mut self, step: u64, task: impl Into<String>, metric: &str, value: f64) -> Result<()> {
        if self.last_step.is_some_and(|s| step < s) {
            return Err(HarnessError::Metrics(format!(
                "step {step} precedes previous step {}",
                self.last_step.unwrap_or_default()
            )));
        }
        self.last_step = Some(step);
        self.rows.push(Row {
            step,
            task: task.into(),
            metric: metric.to_string(),
            value,
        });
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        for r in self.rows.drain(..) {
            self.out
                .write_record([r.step.to_string(), r.task, r.metric, r.value.to_string()])?;
        }
        self.out.flush().map_err(|e| HarnessError::io("metrics", e))
    }
}

impl Drop for MetricsWriter {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

pub fn read_rows(path: impl AsRef<Path>) -> Result<Vec<Row>> {
    let mut rd = csv::Reader::from_path(path)?;
    rd.records()
        .map(|rec| {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or_default();
            let parse_err = |what: &str| HarnessError::Metrics(format!("bad {what} in row {rec:?}"));
            Ok(Row {
                step: field(0).parse().map_err(|_| parse_err("step"))?,
                task: field(1).to_string(),
                metric: field(2).to_string(),
                value: field(3).parse().map_err(|_| parse_err("value"))?,
            })
        })
        .collect()
}

/// Output directory of one run.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| HarnessError::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn metrics(&self) -> Result<MetricsWriter> {
        MetricsWriter::create(self.root.join(METRICS_FILE))
    }

    pub fn write_config(&self, text: &str) -> Result<()> {
        let p = self.root.join(CONFIG_FILE);
        std::fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))
    }

    /// Wall time lives here, never in the metrics file, so metrics stay
    /// byte-identical across reruns.
    pub fn write_meta(&self, seed: u64, config_hash: &str, wall_seconds: f64) -> Result<()> {
        let p = self.root.join(META_FILE);
        let mut f = File::create(&p).map_err(|e| HarnessError::io(&p, e))?;
        writeln!(f, "seed = {seed}\nconfig_hash = {config_hash}\nwall_time_s = {wall_seconds:.3}")
            .map_err(|e| HarnessError::io(&p, e))
    }
}
