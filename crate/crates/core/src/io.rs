//! Configuration files, trajectory CSV and JSON output.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::error::Error;
use crate::network::{validate_network, InfluenceNetwork, StubbornnessProfile};

/// Failures when reading or writing files. `Io` and `Parse` are usage
/// problems; `Domain` means the content was well formed but invalid.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Domain(#[from] Error),
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// On-disk network description `{"n": .., "C": [[..]], "theta": [..]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub n: usize,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
}

impl NetworkConfig {
    pub fn from_json(text: &str) -> Result<Self, IoError> {
        serde_json::from_str(text).map_err(|e| IoError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IoError> {
        let path = path.as_ref();
        let mut text = String::new();
        File::open(path)
            .and_then(|f| BufReader::new(f).read_to_string(&mut text))
            .map_err(|e| IoError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Validates `C` and `theta` against each other and against `n`.
    ///
    /// The standing assumption on `theta` is not enforced here so that
    /// callers can report it separately.
    pub fn build(&self) -> Result<(InfluenceNetwork, StubbornnessProfile), Error> {
        if self.c.len() != self.n {
            return Err(Error::SizeMismatch {
                declared: self.n,
                actual: self.c.len(),
            });
        }
        if self.theta.len() != self.n {
            return Err(Error::SizeMismatch {
                declared: self.n,
                actual: self.theta.len(),
            });
        }
        let net = validate_network(&self.c)?;
        let prof = StubbornnessProfile::new(self.theta.clone())?;
        Ok((net, prof))
    }
}

/// Formats a float with 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `step,x_1,...,x_n` followed by one row per iterate.
pub fn write_trajectory_csv<W: Write>(out: W, trajectory: &Trajectory) -> Result<(), IoError> {
    let n = trajectory.last().n();
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = std::iter::once("step".to_string())
        .chain((1..=n).map(|i| format!("x_{i}")))
        .collect();
    let csv_err = |e: csv::Error| IoError::Parse(e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for (s, x) in trajectory.points.iter().enumerate() {
        let row = std::iter::once(s.to_string()).chain(x.as_slice().iter().map(|&v| format_float(v)));
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| IoError::Parse(e.to_string()))
}

pub fn save_trajectory_csv(path: impl AsRef<Path>, trajectory: &Trajectory) -> Result<(), IoError> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| IoError::io(path, e))?;
    write_trajectory_csv(f, trajectory)
}

/// Reads a trajectory CSV back into its rows of power values.
pub fn read_trajectory_csv<R: Read>(input: R) -> Result<Vec<Vec<f64>>, IoError> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers().map_err(|e| IoError::Parse(e.to_string()))?.clone();
    let header_ok = headers.get(0) == Some("step")
        && headers.iter().skip(1).zip(1..).all(|(h, i)| h == format!("x_{i}"));
    if !header_ok {
        return Err(IoError::Parse(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| IoError::Parse(e.to_string()))?;
        let step: usize = rec[0]
            .parse()
            .map_err(|_| IoError::Parse(format!("row {k}: bad step {:?}", &rec[0])))?;
        if step != k {
            return Err(IoError::Parse(format!("row {k}: step {step} out of sequence")));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>().map_err(|_| IoError::Parse(format!("row {k}: bad value {v:?}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn load_trajectory_csv(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>, IoError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| IoError::io(path, e))?;
    read_trajectory_csv(f)
}

/// Pretty JSON. Floats use the shortest representation that parses back to
/// the same value.
pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize")
}

pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut text = to_json(value);
    text.push('\n');
    std::fs::write(path, text).map_err(|e| IoError::io(path, e))
}
