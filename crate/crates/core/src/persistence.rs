//! Binary snapshots, CSV time series and JSON manifests.
//!
//! Snapshot layout (little-endian, no padding):
//! `"NLSF"`, `u16` version, `u8` d, `u64` n per axis, `f64` dx per axis,
//! `f64` t, `f64` a, then `n^d` pairs of `f64` (re, im) in row-major order.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SeriesRow, TimeSeries};
use crate::error::{Error, Result};
use crate::field::{Field, Grid};

pub const MAGIC: &[u8; 4] = b"NLSF";
pub const VERSION: u16 = 1;

/// Header length in bytes for dimension `d`.
pub fn header_len(d: usize) -> usize {
    4 + 2 + 1 + 16 * d + 16
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub d: u8,
    pub n: Vec<u64>,
    pub dx: Vec<f64>,
    pub t: f64,
    pub a: f64,
}

fn encode(u: &Field, a: f64) -> Vec<u8> {
    let g = &u.grid;
    let mut buf = Vec::with_capacity(header_len(g.d) + 16 * u.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.push(g.d as u8);
    for _ in 0..g.d {
        buf.extend_from_slice(&(g.n as u64).to_le_bytes());
    }
    for _ in 0..g.d {
        buf.extend_from_slice(&g.dx.to_le_bytes());
    }
    buf.extend_from_slice(&u.time.to_le_bytes());
    buf.extend_from_slice(&a.to_le_bytes());
    for z in &u.values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    buf
}

/// Write `u` and the damping coefficient; the file is synced before return.
pub fn write_snapshot(u: &Field, a: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(u, a);
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize, what: &str) -> Result<&'a [u8]> {
        let left = self.bytes.len() - self.pos;
        if left < k {
            return Err(Error::format(
                self.path,
                format!("truncated while reading {what}: missing {} bytes", k - left),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn parse_header(c: &mut Cursor) -> Result<SnapshotHeader> {
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::format(c.path, "bad magic, expected NLSF"));
    }
    let version = u16::from_le_bytes(c.take(2, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::UnsupportedVersion {
            path: c.path.to_path_buf(),
            version,
        });
    }
    let d = c.take(1, "dimension")?[0];
    if !(1..=4).contains(&d) {
        return Err(Error::format(c.path, format!("invalid dimension {d}")));
    }
    let n = (0..d)
        .map(|_| c.u64("axis length"))
        .collect::<Result<Vec<_>>>()?;
    let dx = (0..d)
        .map(|_| c.f64("axis spacing"))
        .collect::<Result<Vec<_>>>()?;
    let t = c.f64("time")?;
    let a = c.f64("damping")?;
    Ok(SnapshotHeader { d, n, dx, t, a })
}

/// Read only the header of a snapshot.
pub fn read_snapshot_header(path: impl AsRef<Path>) -> Result<SnapshotHeader> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|f| f.take(header_len(4) as u64).read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    parse_header(&mut Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    })
}

/// Inverse of [`write_snapshot`] with strict validation.
pub fn read_snapshot(path: impl AsRef<Path>) -> Result<(Field, f64)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let h = parse_header(&mut c)?;
    let d = h.d as usize;
    if h.n.iter().any(|&k| k != h.n[0]) || h.dx.iter().any(|&x| x.to_bits() != h.dx[0].to_bits()) {
        return Err(Error::format(
            path,
            "axes differ; only cubic grids are supported",
        ));
    }
    let n = usize::try_from(h.n[0]).map_err(|_| Error::format(path, "axis length overflows"))?;
    let grid = Grid::new(d, n, n as f64 * h.dx[0] / 2.0)
        .map_err(|e| Error::format(path, format!("invalid grid: {e}")))?;
    if grid.dx.to_bits() != h.dx[0].to_bits() {
        return Err(Error::format(path, "grid spacing is not representable"));
    }
    let count = grid.len();
    let payload = c.take(16 * count, "samples")?;
    if c.pos != bytes.len() {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after samples", bytes.len() - c.pos),
        ));
    }
    let values = payload
        .chunks_exact(16)
        .map(|ch| {
            Complex64::new(
                f64::from_le_bytes(ch[..8].try_into().unwrap()),
                f64::from_le_bytes(ch[8..].try_into().unwrap()),
            )
        })
        .collect();
    let field = Field::from_values(grid, values, h.t)?;
    Ok((field, h.a))
}

const AXES: [&str; 4] = ["px", "py", "pz", "pw"];

pub fn series_columns(d: usize) -> Vec<String> {
    let mut cols: Vec<String> = ["t", "s", "dt", "mass", "l2norm", "energy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    cols.extend(AXES[..d].iter().map(|s| s.to_string()));
    cols.extend(
        ["grad_sq", "K", "lambda_est", "b_est"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols
}

fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // `NaN`, `inf`, `-inf` all parse back with `str::parse::<f64>`.
        format!("{x}")
    }
}

/// Write the series as CSV with 17 significant digits per value.
pub fn write_series_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", series_columns(series.d).join(",")).map_err(io)?;
    for r in &series.rows {
        let mut vals = vec![r.t, r.s, r.dt, r.mass, r.l2norm, r.energy];
        vals.extend(r.momentum.iter().copied());
        vals.extend([r.grad_sq, r.kinetic_defect, r.lambda_est, r.b_est]);
        let line: Vec<String> = vals.into_iter().map(fmt17).collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    let f = w
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    f.sync_all().map_err(io)?;
    Ok(())
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(f).lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::format(path, "empty series file")),
    };
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    let d = (1..=4)
        .find(|&d| series_columns(d) == cols)
        .ok_or_else(|| Error::format(path, format!("unrecognised header `{header}`")))?;
    let mut series = TimeSeries::new(d);
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let v = line
            .split(',')
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::format(path, format!("line {}: {e}", k + 2)))?;
        if v.len() != cols.len() {
            return Err(Error::format(
                path,
                format!(
                    "line {}: expected {} values, got {}",
                    k + 2,
                    cols.len(),
                    v.len()
                ),
            ));
        }
        series.rows.push(SeriesRow {
            t: v[0],
            s: v[1],
            dt: v[2],
            mass: v[3],
            l2norm: v[4],
            energy: v[5],
            momentum: v[6..6 + d].to_vec(),
            grad_sq: v[6 + d],
            kinetic_defect: v[7 + d],
            lambda_est: v[8 + d],
            b_est: v[9 + d],
        });
    }
    Ok(series)
}

/// Index of one run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub package_version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub status: String,
    pub stop_reason: String,
    pub steps: u64,
    pub t_final: f64,
    pub series: String,
    pub snapshots: Vec<String>,
    pub report: Option<String>,
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value)?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_manifest(m: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    write_json(m, path)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    read_json(path)
}

/// Resolve a path stored in a manifest relative to the manifest's directory.
pub fn resolve(manifest_path: &Path, rel: &str) -> PathBuf {
    manifest_path.parent().unwrap_or(Path::new(".")).join(rel)
}
