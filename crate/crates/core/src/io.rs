//! File formats: JSON model files and trajectory CSVs.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::CoeffVector;

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, value)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Metadata written as `# key=value` lines in front of a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryHeader {
    pub n_elem: usize,
    pub steps: usize,
    pub dt: f64,
    pub mu: f64,
    pub config_hash: String,
    pub seed: u64,
}

/// Scientific notation with 17 significant digits, enough to reproduce any `f64` exactly.
pub fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `# key=value` metadata lines, a header row and the data rows.
pub fn write_csv(path: &Path, meta: &[(&str, String)], columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    for (k, v) in meta {
        writeln!(w, "# {k}={v}").map_err(io)?;
    }
    writeln!(w, "{}", columns.join(",")).map_err(io)?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::DimensionMismatch {
                expected: columns.len(),
                found: row.len(),
            });
        }
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// One row per time level: `t, u_1, ..., u_n`. Values use round-trip scientific format.
pub fn write_trajectory_csv(path: &Path, header: &TrajectoryHeader, times: &[f64], states: &[CoeffVector]) -> Result<()> {
    if times.len() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: states.len(),
        });
    }
    let meta = [
        ("n_elem", header.n_elem.to_string()),
        ("K", header.steps.to_string()),
        ("dt", sci(header.dt)),
        ("mu", sci(header.mu)),
        ("config_hash", header.config_hash.clone()),
        ("seed", header.seed.to_string()),
    ];
    let n = states.first().map_or(0, |s| s.len());
    let names: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("u{i}")))
        .collect();
    let columns: Vec<&str> = names.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = times
        .iter()
        .zip(states)
        .map(|(t, u)| std::iter::once(*t).chain(u.iter().copied()).map(sci).collect())
        .collect();
    write_csv(path, &meta, &columns, &rows)
}

/// Reads a trajectory CSV back into `(header, times, states)`.
pub fn read_trajectory_csv(path: &Path) -> Result<(TrajectoryHeader, Vec<f64>, Vec<CoeffVector>)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::InvalidInput(format!("{}: {msg}", path.display()));
    let mut meta = std::collections::HashMap::new();
    let mut times = Vec::new();
    let mut states = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(rest) = line.strip_prefix("# ") {
            if let Some((k, v)) = rest.split_once('=') {
                meta.insert(k.to_string(), v.to_string());
            }
            continue;
        }
        if line.starts_with('t') || line.is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|e| bad(format!("{e}: {s}"))))
            .collect::<Result<Vec<_>>>()?;
        times.push(vals[0]);
        states.push(vals[1..].to_vec());
    }
    let get = |k: &str| meta.get(k).cloned().ok_or_else(|| bad(format!("missing header {k}")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(format!("bad header {k}"))) };
    let int = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| bad(format!("bad header {k}"))) };
    let header = TrajectoryHeader {
        n_elem: int("n_elem")? as usize,
        steps: int("K")? as usize,
        dt: num("dt")?,
        mu: num("mu")?,
        config_hash: get("config_hash")?,
        seed: int("seed")?,
    };
    Ok((header, times, states))
}

/// Serde adapter for `f64` values that may be infinite or NaN, which plain JSON cannot hold.
pub(crate) mod any_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            Repr::Num(*v).serialize(s)
        } else {
            Repr::Text(v.to_string()).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}
