//! Binary snapshots.
//!
//! Layout, little-endian: magic `OLDB2D01`, `u32` version, `u32 n`, `f64 L`,
//! `f64 time`, `u32` field count, then per field a `u8` name length, the
//! name, and `n * n` `f64` values in row-major order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{SimState, StressField};
use crate::spectral::{Grid, ScalarField, VectorField};

pub const MAGIC: &[u8; 8] = b"OLDB2D01";
pub const VERSION: u32 = 1;
pub const REQUIRED: [&str; 6] = ["u1", "u2", "a", "b", "c", "rho"];

pub fn encode_snapshot(state: &SimState) -> Vec<u8> {
    let grid = state.grid();
    let fields: [(&str, &ScalarField); 6] = [
        ("u1", &state.u.x),
        ("u2", &state.u.y),
        ("a", &state.stress.a),
        ("b", &state.stress.b),
        ("c", &state.stress.c),
        ("rho", &state.rho),
    ];
    let mut out = Vec::with_capacity(36 + fields.len() * (4 + 8 * grid.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&grid.length().to_le_bytes());
    out.extend_from_slice(&state.time.to_le_bytes());
    out.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    for (name, f) in fields {
        out.push(name.len() as u8);
        out.extend_from_slice(name.as_bytes());
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_snapshot(state: &SimState, path: &Path) -> Result<()> {
    fs::write(path, encode_snapshot(state)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            format!(
                "truncated: need {len} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            )
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Header and named fields of a snapshot.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub n: usize,
    pub length: f64,
    pub time: f64,
    pub fields: Vec<(String, Vec<f64>)>,
}

pub fn decode_snapshot(bytes: &[u8]) -> std::result::Result<Snapshot, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic bytes".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!("unsupported version {version}"));
    }
    let n = r.u32()? as usize;
    let length = r.f64()?;
    let time = r.f64()?;
    let count = r.u32()?;
    let mut fields = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.take(1)?[0] as usize;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| "field name is not UTF-8")?;
        let data = r.take(8 * n * n)?;
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        fields.push((name, values));
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes after the last field", bytes.len() - r.pos));
    }
    Ok(Snapshot {
        n,
        length,
        time,
        fields,
    })
}

/// Reads a snapshot onto `grid`, which must match the stored `n` and `L`.
pub fn read_snapshot(path: &Path, grid: &Grid) -> Result<SimState> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fmt = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut snap = decode_snapshot(&bytes).map_err(fmt)?;
    if snap.n != grid.n() || snap.length != grid.length() {
        return Err(fmt(format!(
            "grid mismatch: file has n = {}, L = {}; expected n = {}, L = {}",
            snap.n,
            snap.length,
            grid.n(),
            grid.length()
        )));
    }
    let mut get = |name: &str| -> Result<ScalarField> {
        let pos = snap
            .fields
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| fmt(format!("missing field `{name}`")))?;
        ScalarField::new(grid.clone(), std::mem::take(&mut snap.fields[pos].1))
    };
    let u = VectorField::new(get("u1")?, get("u2")?)?;
    let stress = StressField::new(get("a")?, get("b")?, get("c")?)?;
    let rho = get("rho")?;
    SimState::new(snap.time, u, stress, rho)
}
