use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a record's `pass` flag follows from its quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "key")]
pub enum Check {
    /// `quantities[key] <= tolerance`
    AtMost(String),
    /// `quantities[key] >= tolerance`
    AtLeast(String),
    /// Informational record; always passes.
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub suite: String,
    pub case: String,
    pub seed: u64,
    pub quantities: BTreeMap<String, f64>,
    pub check: Check,
    pub tolerance: f64,
    pub pass: bool,
    /// Wall time; kept out of JSONL so reruns are byte-identical.
    #[serde(skip)]
    pub runtime_ms: u64,
}

impl ResultRecord {
    pub fn new(suite: &str, case: impl Into<String>, seed: u64) -> Self {
        Self {
            suite: suite.to_string(),
            case: case.into(),
            seed,
            quantities: BTreeMap::new(),
            check: Check::Report,
            tolerance: 0.0,
            pass: true,
            runtime_ms: 0,
        }
    }

    /// Adds a quantity. Non-finite values are stored as ±f64::MAX so records stay valid JSON.
    pub fn with(mut self, key: &str, value: f64) -> Self {
        let v = if value.is_nan() {
            f64::MAX
        } else {
            value.clamp(-f64::MAX, f64::MAX)
        };
        self.quantities.insert(key.to_string(), v);
        self
    }

    pub fn at_most(mut self, key: &str, tolerance: f64) -> Self {
        self.check = Check::AtMost(key.to_string());
        self.tolerance = tolerance;
        self.pass = self.recheck();
        self
    }

    pub fn at_least(mut self, key: &str, tolerance: f64) -> Self {
        self.check = Check::AtLeast(key.to_string());
        self.tolerance = tolerance;
        self.pass = self.recheck();
        self
    }

    /// Recomputes the verdict from the stored quantities alone.
    pub fn recheck(&self) -> bool {
        let get = |k: &String| self.quantities.get(k).copied();
        match &self.check {
            Check::AtMost(k) => get(k).is_some_and(|v| v <= self.tolerance),
            Check::AtLeast(k) => get(k).is_some_and(|v| v >= self.tolerance),
            Check::Report => true,
        }
    }
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn jsonl<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// An in-memory CSV table with string cells.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    pub fn row<I, S>(&mut self, cells: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(cells)?;
        Ok(())
    }

    pub fn into_bytes(self) -> Result<Vec<u8>> {
        self.writer
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-case seed derived from the top-level seed, the suite name and the case index.
pub fn case_seed(seed: u64, suite: &str, case: u64) -> u64 {
    let name = suite.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    });
    splitmix64(splitmix64(seed ^ name) ^ case)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_verdicts_are_recomputable() {
        let r = ResultRecord::new("s", "c", 1)
            .with("err", 1e-9)
            .at_most("err", 1e-8);
        assert!(r.pass);
        let line = String::from_utf8(jsonl(std::slice::from_ref(&r)).unwrap()).unwrap();
        assert!(!line.contains("runtime"));
        let back: ResultRecord = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(back, r);
        assert!(back.recheck());

        let r = ResultRecord::new("s", "c", 1)
            .with("n", 8.0)
            .at_least("n", 9.0);
        assert!(!r.pass);
        let r = ResultRecord::new("s", "c", 1).at_most("missing", 1.0);
        assert!(!r.pass);
        let r = ResultRecord::new("s", "c", 1)
            .with("x", f64::NAN)
            .at_most("x", 1.0);
        assert!(!r.pass);
        assert!(ResultRecord::new("s", "c", 1).recheck());
    }

    #[test]
    fn seeds_are_spread_per_case_and_suite() {
        let a = case_seed(0, "identities", 0);
        assert_eq!(a, case_seed(0, "identities", 0));
        assert_ne!(a, case_seed(0, "identities", 1));
        assert_ne!(a, case_seed(0, "escape", 0));
        assert_ne!(a, case_seed(1, "identities", 0));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.csv");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn tables_are_rfc4180() {
        let mut t = Table::new(&["a", "b"]).unwrap();
        t.row([num(0.1), "x,y".to_string()]).unwrap();
        assert_eq!(t.into_bytes().unwrap(), b"a,b\r\n0.1,\"x,y\"\r\n");
    }
}
