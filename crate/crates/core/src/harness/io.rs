//! Snapshot files and CSV writers.
//!
//! A snapshot is a short text header of `key=value` lines closed by `end`,
//! followed by little-endian `f64` values in row-major order. The header
//! records the SHA-256 of the payload, so a truncated or altered file is
//! detected on read.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::analysis::MetricsRow;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::microsim::Population;

pub const FORMAT: &str = "spatial-econ-snapshot/1";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Field,
    Positions,
}

impl SnapshotKind {
    fn as_str(&self) -> &'static str {
        match self {
            SnapshotKind::Field => "field",
            SnapshotKind::Positions => "positions",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMeta {
    pub kind: SnapshotKind,
    /// What the payload holds, e.g. `l` or `w`.
    pub quantity: String,
    pub name: String,
    pub version: String,
    pub t: f64,
    pub seed: u64,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    /// Number of `f64` values in the payload.
    pub count: usize,
}

impl SnapshotMeta {
    pub fn for_field(field: &ScalarField, quantity: &str, name: &str, t: f64, seed: u64) -> Self {
        let g = field.grid();
        Self {
            kind: SnapshotKind::Field,
            quantity: quantity.into(),
            name: name.into(),
            version: VERSION.into(),
            t,
            seed,
            lx: g.lx(),
            ly: g.ly(),
            nx: g.nx(),
            ny: g.ny(),
            count: g.len(),
        }
    }

    pub fn grid(&self) -> Result<Grid2D> {
        Grid2D::new(self.lx, self.ly, self.nx, self.ny)
    }
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn encode(meta: &SnapshotMeta, values: &[f64]) -> Vec<u8> {
    let mut payload = Vec::with_capacity(values.len() * 8);
    for v in values {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    let digest = hex(&Sha256::digest(&payload));
    let header = format!(
        "format={FORMAT}\nkind={}\nquantity={}\nname={}\nversion={}\nt={}\nseed={}\nlx={}\nly={}\nnx={}\nny={}\ncount={}\nsha256={digest}\nend\n",
        meta.kind.as_str(),
        one_line(&meta.quantity),
        one_line(&meta.name),
        one_line(&meta.version),
        meta.t,
        meta.seed,
        meta.lx,
        meta.ly,
        meta.nx,
        meta.ny,
        values.len(),
    );
    let mut out = header.into_bytes();
    out.extend_from_slice(&payload);
    out
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_field_snapshot(path: &Path, field: &ScalarField, meta: &SnapshotMeta) -> Result<()> {
    let mut meta = meta.clone();
    meta.kind = SnapshotKind::Field;
    write_bytes(path, &encode(&meta, field.values()))
}

/// Interleaved `x, y` pairs; `nx, ny` record the grid the agents live on.
pub fn write_positions_snapshot(
    path: &Path,
    pop: &Population,
    grid: &Grid2D,
    name: &str,
) -> Result<()> {
    let values: Vec<f64> = pop
        .xs()
        .iter()
        .zip(pop.ys())
        .flat_map(|(x, y)| [*x, *y])
        .collect();
    let meta = SnapshotMeta {
        kind: SnapshotKind::Positions,
        quantity: "positions".into(),
        name: name.into(),
        version: VERSION.into(),
        t: pop.time(),
        seed: pop.seed(),
        lx: grid.lx(),
        ly: grid.ly(),
        nx: grid.nx(),
        ny: grid.ny(),
        count: values.len(),
    };
    write_bytes(path, &encode(&meta, &values))
}

/// Reads any snapshot, verifying its checksum.
pub fn read_snapshot(path: &Path) -> Result<(SnapshotMeta, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |message: String| Error::Snapshot {
        path: path.to_path_buf(),
        message,
    };
    let marker = b"\nend\n";
    let end = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| bad("missing header terminator".into()))?;
    let header =
        std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
    let payload = &bytes[end + marker.len()..];
    let mut kv = std::collections::HashMap::new();
    for line in header.lines() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header line `{line}`")))?;
        kv.insert(k, v);
    }
    let get = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| bad(format!("header lacks `{k}`")))
    };
    fn num<T: std::str::FromStr>(v: &str, k: &str, bad: &dyn Fn(String) -> Error) -> Result<T> {
        v.parse()
            .map_err(|_| bad(format!("cannot parse `{k}` from `{v}`")))
    }
    if get("format")? != FORMAT {
        return Err(bad(format!("unsupported format `{}`", get("format")?)));
    }
    let kind = match get("kind")? {
        "field" => SnapshotKind::Field,
        "positions" => SnapshotKind::Positions,
        other => return Err(bad(format!("unknown kind `{other}`"))),
    };
    let meta = SnapshotMeta {
        kind,
        quantity: get("quantity")?.into(),
        name: get("name")?.into(),
        version: get("version")?.into(),
        t: num(get("t")?, "t", &bad)?,
        seed: num(get("seed")?, "seed", &bad)?,
        lx: num(get("lx")?, "lx", &bad)?,
        ly: num(get("ly")?, "ly", &bad)?,
        nx: num(get("nx")?, "nx", &bad)?,
        ny: num(get("ny")?, "ny", &bad)?,
        count: num(get("count")?, "count", &bad)?,
    };
    if payload.len() != meta.count * 8 {
        return Err(bad(format!(
            "expected {} values, found {} bytes",
            meta.count,
            payload.len()
        )));
    }
    if hex(&Sha256::digest(payload)) != get("sha256")? {
        return Err(bad("checksum mismatch".into()));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of eight bytes")))
        .collect();
    Ok((meta, values))
}

/// Reads a field snapshot and builds it on its recorded grid.
pub fn read_field_snapshot(path: &Path) -> Result<(ScalarField, SnapshotMeta)> {
    let (meta, values) = read_snapshot(path)?;
    if meta.kind != SnapshotKind::Field {
        return Err(Error::Snapshot {
            path: path.to_path_buf(),
            message: "expected a field snapshot".into(),
        });
    }
    let grid = meta.grid()?;
    if values.len() != grid.len() {
        return Err(Error::Snapshot {
            path: path.to_path_buf(),
            message: format!(
                "{} values do not fill a {}x{} grid",
                values.len(),
                meta.nx,
                meta.ny
            ),
        });
    }
    Ok((ScalarField::from_values(grid, values)?, meta))
}

/// Like [`read_field_snapshot`] but insists on a given grid.
pub fn read_field_snapshot_on(path: &Path, grid: &Grid2D) -> Result<(ScalarField, SnapshotMeta)> {
    let (field, meta) = read_field_snapshot(path)?;
    let g = field.grid();
    if g.nx() != grid.nx() || g.ny() != grid.ny() || g.lx() != grid.lx() || g.ly() != grid.ly() {
        return Err(Error::GridMismatch(format!(
            "{} holds a {}x{} field on [0,{}]x[0,{}], expected {}x{} on [0,{}]x[0,{}]",
            path.display(),
            g.nx(),
            g.ny(),
            g.lx(),
            g.ly(),
            grid.nx(),
            grid.ny(),
            grid.lx(),
            grid.ly()
        )));
    }
    Ok((field, meta))
}

/// Serializes rows with a header line; column order follows field order.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Snapshot {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const METRICS_COLUMNS: [&str; 11] = [
    "t",
    "mass",
    "SU",
    "aggregate_v",
    "entropy_term",
    "theil",
    "total_output",
    "max_density",
    "cluster_count",
    "rep_drift_norm",
    "equilibrium_residual",
];

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    if rows.is_empty() {
        return write_bytes(path, format!("{}\n", METRICS_COLUMNS.join(",")).as_bytes());
    }
    write_csv(path, rows)
}

#[derive(Serialize)]
struct WelfareRow {
    t: f64,
    l_log_l: f64,
    su_alt: f64,
}

/// Raw `int l log l` and the alternative social-utility weighting.
pub fn write_welfare_csv(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let rows: Vec<WelfareRow> = rows
        .iter()
        .map(|r| WelfareRow {
            t: r.t,
            l_log_l: r.l_log_l,
            su_alt: r.su_alt,
        })
        .collect();
    if rows.is_empty() {
        return write_bytes(path, b"t,l_log_l,su_alt\n");
    }
    write_csv(path, &rows)
}

pub fn write_positions_csv(path: &Path, pop: &Population) -> Result<()> {
    let mut out = String::with_capacity(pop.len() * 40);
    out.push_str("x,y\n");
    for (x, y) in pop.xs().iter().zip(pop.ys()) {
        out.push_str(&format!("{x},{y}\n"));
    }
    write_bytes(path, out.as_bytes())
}

/// Plain `key=value` metadata file.
pub fn write_meta(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut out = Vec::new();
    for (k, v) in entries {
        writeln!(out, "{k}={}", one_line(v)).expect("writing to a Vec cannot fail");
    }
    write_bytes(path, &out)
}
