use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::optimizer::OptimizerConfig;
use crate::ridge::SampleSet;
use crate::scenario::{generate, GroundTruth, ScenarioSpec};

use super::suites::SUITES;

/// Where the sample comes from: a synthetic scenario or a CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DataSource {
    Csv {
        csv: PathBuf,
        #[serde(default)]
        center_y: bool,
    },
    Scenario(ScenarioSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "KernelSpec::laplace")]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub scenario: Option<DataSource>,
    #[serde(default = "default_lambdas")]
    pub lambda_list: Vec<f64>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub suites: Vec<String>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Weights used by `fit`; all ones when absent.
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    /// Starting points for `optimize`; `{0, 1, random}` when absent.
    #[serde(default)]
    pub starts: Option<Vec<Vec<f64>>>,
}

fn default_lambdas() -> Vec<f64> {
    vec![1e-2]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("featkrr-out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::laplace(),
            scenario: None,
            lambda_list: default_lambdas(),
            optimizer: OptimizerConfig::default(),
            suites: Vec::new(),
            output_dir: default_output_dir(),
            seed: 0,
            beta: None,
            starts: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda_list.is_empty() {
            return Err(Error::Config("lambda_list must not be empty".into()));
        }
        if let Some(l) = self
            .lambda_list
            .iter()
            .find(|l| !(**l > 0.0 && l.is_finite()))
        {
            return Err(Error::Config(format!(
                "lambda values must be positive, got {l}"
            )));
        }
        if let Some(s) = self.suites.iter().find(|s| !SUITES.contains(&s.as_str())) {
            return Err(Error::Config(format!(
                "unknown suite '{s}' (known: {})",
                SUITES.join(", ")
            )));
        }
        self.optimizer.validate()?;
        if let Some(DataSource::Scenario(s)) = &self.scenario {
            s.validate()?;
        }
        Ok(())
    }

    /// Loads or generates the sample. Ground truth is only known for scenarios.
    pub fn sample(&self) -> Result<(SampleSet, Option<GroundTruth>)> {
        match &self.scenario {
            None => Err(Error::Config(
                "this command needs a `scenario` (spec or csv)".into(),
            )),
            Some(DataSource::Csv { csv, center_y }) => Ok((load_csv(csv, *center_y)?, None)),
            Some(DataSource::Scenario(spec)) => {
                let sc = generate(spec)?;
                Ok((sc.data, Some(sc.truth)))
            }
        }
    }
}

fn parse_error(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Reads a `x1,...,xd,y` table. Line numbers in errors are 1-based file lines.
pub fn load_csv(path: &Path, center_y: bool) -> Result<SampleSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_error(path, 0, e.to_string()))?;
    let header = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    if header.is_empty() || header.iter().all(|h| h.trim().is_empty()) {
        return Err(parse_error(
            path,
            1,
            "empty file: expected header x1,...,xd,y",
        ));
    }
    let width = header.len();
    let expected: Vec<String> = (1..width)
        .map(|k| format!("x{k}"))
        .chain(std::iter::once("y".to_string()))
        .collect();
    if width < 2
        || header
            .iter()
            .map(str::trim)
            .ne(expected.iter().map(String::as_str))
    {
        return Err(parse_error(
            path,
            1,
            format!("header must be {}", expected.join(",")),
        ));
    }
    let d = width - 1;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(parse_error(
                path,
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        for (k, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| parse_error(path, line, format!("non-numeric value '{field}'")))?;
            if !v.is_finite() {
                return Err(parse_error(
                    path,
                    line,
                    format!("non-finite value '{field}'"),
                ));
            }
            if k < d {
                x.push(v);
            } else {
                y.push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(parse_error(path, 1, "no data rows after the header"));
    }
    let data = SampleSet::from_flat(y.len(), d, x, y)?;
    Ok(if center_y { data.centered() } else { data })
}
