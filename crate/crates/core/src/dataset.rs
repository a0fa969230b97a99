//! Trajectory datasets and their binary and CSV on-disk forms.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic      7 bytes  "QKTRAJ\0"
//! version    u32      1
//! kind       u8       0 = raw state, 1 = latent (r and phi planes)
//! rank       u8
//! dims       u64 * rank
//! steps      u64      T (the file holds T + 1 snapshots)
//! dt         f64
//! meta_count u32
//!   key      u32 length + UTF-8 bytes
//!   value    u32 length + UTF-8 bytes
//! payload    f64 * (T + 1) * prod(dims), time-major, row-major
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 7] = b"QKTRAJ\0";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    State,
    Latent,
}

impl PayloadKind {
    fn code(self) -> u8 {
        match self {
            PayloadKind::State => 0,
            PayloadKind::Latent => 1,
        }
    }
}

/// `T + 1` snapshots of a fixed shape at uniform spacing `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    kind: PayloadKind,
    shape: Vec<usize>,
    dt: f64,
    data: Vec<f64>,
    metadata: BTreeMap<String, String>,
}

impl TrajectoryDataset {
    pub fn new(kind: PayloadKind, shape: Vec<usize>, dt: f64, snapshots: Vec<Vec<f64>>) -> Result<Self> {
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len * snapshots.len());
        for (k, s) in snapshots.iter().enumerate() {
            if s.len() != len {
                return Err(Error::Shape(format!(
                    "snapshot {k} has {} values, shape {shape:?} needs {len}",
                    s.len()
                )));
            }
            data.extend_from_slice(s);
        }
        Self::from_flat(kind, shape, dt, data)
    }

    pub fn from_flat(kind: PayloadKind, shape: Vec<usize>, dt: f64, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > u8::MAX as usize || shape.contains(&0) {
            return Err(Error::Shape(format!("invalid snapshot shape {shape:?}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Domain(format!("time step must be positive and finite, got {dt}")));
        }
        let len: usize = shape.iter().product();
        if data.is_empty() || data.len() % len != 0 {
            return Err(Error::Shape(format!(
                "{} values do not form whole snapshots of {len}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite value in snapshot {} at position {}",
                i / len,
                i % len
            )));
        }
        Ok(Self {
            kind,
            shape,
            dt,
            data,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_metadata(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn kind(&self) -> PayloadKind {
        self.kind
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Step count `T`.
    pub fn steps(&self) -> usize {
        self.data.len() / self.snapshot_len() - 1
    }

    pub fn snapshot_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn snapshot(&self, k: usize) -> &[f64] {
        let len = self.snapshot_len();
        &self.data[k * len..(k + 1) * len]
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.snapshot_len())
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn insert_metadata(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.data.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.kind.code());
        out.push(self.shape.len() as u8);
        for &d in &self.shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        out.extend_from_slice(&(self.steps() as u64).to_le_bytes());
        out.extend_from_slice(&self.dt.to_le_bytes());
        out.extend_from_slice(&(self.metadata.len() as u32).to_le_bytes());
        for (k, v) in &self.metadata {
            for s in [k, v] {
                out.extend_from_slice(&(s.len() as u32).to_le_bytes());
                out.extend_from_slice(s.as_bytes());
            }
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(MAGIC.len(), "magic")?;
        if magic != MAGIC {
            return Err(Error::format(0, "bad magic, not a QKTRAJ file"));
        }
        let at = r.pos as u64;
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::format(at, format!("unsupported version {version}")));
        }
        let at = r.pos as u64;
        let kind = match r.u8("payload kind")? {
            0 => PayloadKind::State,
            1 => PayloadKind::Latent,
            other => return Err(Error::format(at, format!("unknown payload kind {other}"))),
        };
        let at = r.pos as u64;
        let rank = r.u8("rank")? as usize;
        if rank == 0 {
            return Err(Error::format(at, "rank must be at least 1"));
        }
        let mut shape = Vec::with_capacity(rank);
        for i in 0..rank {
            let at = r.pos as u64;
            let d = r.u64("dimension")?;
            let d = usize::try_from(d)
                .ok()
                .filter(|&d| d > 0)
                .ok_or_else(|| Error::format(at, format!("invalid dimension {i}: {d}")))?;
            shape.push(d);
        }
        let at = r.pos as u64;
        let steps = r.u64("step count")?;
        let at_dt = r.pos as u64;
        let dt = f64::from_le_bytes(r.take(8, "time step")?.try_into().unwrap());
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::format(at_dt, format!("invalid time step {dt}")));
        }
        let count = r.u32("metadata count")?;
        let mut metadata = BTreeMap::new();
        for _ in 0..count {
            let key = r.string("metadata key")?;
            let value = r.string("metadata value")?;
            metadata.insert(key, value);
        }
        let values = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|len| len.checked_mul(usize::try_from(steps).ok()?.checked_add(1)?))
            .ok_or_else(|| Error::format(at, "header dimensions overflow"))?;
        let expected = values as u64 * 8;
        let available = (bytes.len() - r.pos) as u64;
        if available != expected {
            return Err(Error::format(
                r.pos as u64,
                format!("payload length mismatch: header implies {expected} bytes, found {available}"),
            ));
        }
        let start = r.pos;
        let data: Vec<f64> = bytes[start..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format((start + 8 * i) as u64, "non-finite payload value"));
        }
        let mut ds = Self::from_flat(kind, shape, dt, data)?;
        ds.metadata = metadata;
        Ok(ds)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.pos as u64,
                format!(
                    "truncated while reading {what}: need {n} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u32(what)? as usize;
        let at = self.pos as u64;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::format(at, format!("{what} is not UTF-8")))
    }
}

pub fn write_trajectory(path: impl AsRef<Path>, ds: &TrajectoryDataset) -> Result<()> {
    fs::write(path, ds.to_bytes())?;
    Ok(())
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    TrajectoryDataset::from_bytes(&fs::read(path)?)
}

/// Imports a trajectory from per-snapshot CSV files.
///
/// The manifest is a CSV file with header `file,t`, one row per snapshot in
/// time order; paths are relative to the manifest's directory and the times
/// must be uniformly spaced. Each snapshot file holds a numeric grid without
/// header; a single row or column is read as a 1D field.
pub fn import_csv(manifest: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    let manifest = manifest.as_ref();
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(manifest)
        .map_err(csv_error)?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    let file_col = headers.iter().position(|h| h == "file");
    let time_col = headers.iter().position(|h| h == "t");
    let (Some(file_col), Some(time_col)) = (file_col, time_col) else {
        return Err(Error::Parse("manifest header must contain `file` and `t`".into()));
    };
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let t: f64 = record[time_col]
            .parse()
            .map_err(|_| Error::Parse(format!("bad time {:?} in manifest", &record[time_col])))?;
        entries.push((record[file_col].to_string(), t));
    }
    if entries.is_empty() {
        return Err(Error::Parse("manifest lists no snapshots".into()));
    }
    let dt = if entries.len() > 1 {
        let dt = entries[1].1 - entries[0].1;
        for w in entries.windows(2) {
            let step = w[1].1 - w[0].1;
            if (step - dt).abs() > 1e-9 * dt.abs().max(1.0) {
                return Err(Error::Parse(format!(
                    "manifest times are not uniformly spaced ({step} vs {dt})"
                )));
            }
        }
        dt
    } else {
        1.0
    };
    let mut shape: Option<Vec<usize>> = None;
    let mut snapshots = Vec::with_capacity(entries.len());
    for (file, _) in &entries {
        let (s, values) = read_grid(&base.join(file))?;
        match &shape {
            None => shape = Some(s),
            Some(prev) if *prev != s => {
                return Err(Error::Shape(format!("{file} has shape {s:?}, expected {prev:?}")))
            }
            Some(_) => {}
        }
        snapshots.push(values);
    }
    let ds = TrajectoryDataset::new(PayloadKind::State, shape.unwrap(), dt, snapshots)?;
    Ok(ds.with_metadata("source", manifest.display()))
}

fn read_grid(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_error)?;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        if cols.is_some_and(|c| c != record.len()) {
            return Err(Error::Shape(format!("ragged rows in {}", path.display())));
        }
        cols = Some(record.len());
        for field in record.iter() {
            values.push(field.parse::<f64>().map_err(|_| {
                Error::Parse(format!("non-numeric value {field:?} in {}", path.display()))
            })?);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse(format!("{} is empty", path.display())))?;
    let shape = if rows == 1 || cols == 1 {
        vec![values.len()]
    } else {
        vec![rows, cols]
    };
    Ok((shape, values))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
