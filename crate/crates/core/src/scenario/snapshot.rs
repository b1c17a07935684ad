//! Binary phase-space snapshots.
//!
//! Layout (little-endian throughout):
//!
//! | offset | size | field                                   |
//! |-------:|-----:|-----------------------------------------|
//! | 0      | 4    | magic `WPS1`                            |
//! | 4      | 2    | version (u16, currently 1)              |
//! | 6      | 2    | flags (u16, see below)                  |
//! | 8      | 4    | nx (u32)                                |
//! | 12     | 4    | np (u32)                                |
//! | 16     | 64   | x_min, x_max, p_min, p_max, hbar, kappa, mass, t (f64) |
//! | 80     | ...  | payload, row-major over x, f64 (re, im pairs when complex) |
//!
//! Flags: bit 0 set for a complex payload; bits 1-2 the reported
//! representation and bits 3-4 the representation whose scaling the payload
//! carries (0 wigner, 1 unified, 2 density). Values are written exactly as
//! stored, so a read restores the state bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use num_complex::Complex64;

use crate::domain::{PhaseSpaceGrid, PhysicalParams};
use crate::error::{Error, Result};
use crate::states::{PhaseSpaceState, Representation};

pub const MAGIC: &[u8; 4] = b"WPS1";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 80;

const FLAG_COMPLEX: u16 = 1;

/// A state together with the time it was taken at.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: PhaseSpaceState,
    pub t: f64,
}

/// Decoded header fields, for inspection without the payload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotHeader {
    pub version: u16,
    pub complex: bool,
    pub representation: Representation,
    pub stored: Representation,
    pub nx: u32,
    pub np: u32,
    pub x_min: f64,
    pub x_max: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub hbar: f64,
    pub kappa: f64,
    pub mass: f64,
    pub t: f64,
}

impl SnapshotHeader {
    pub fn payload_len(&self) -> usize {
        self.nx as usize * self.np as usize * if self.complex { 16 } else { 8 }
    }
}

fn repr_code(r: Representation) -> u16 {
    match r {
        Representation::Wigner => 0,
        Representation::Unified => 1,
        Representation::Density => 2,
    }
}

fn repr_from(code: u16) -> Option<Representation> {
    match code {
        0 => Some(Representation::Wigner),
        1 => Some(Representation::Unified),
        2 => Some(Representation::Density),
        _ => None,
    }
}

/// Serializes a state taken at time `t`.
pub fn encode(state: &PhaseSpaceState, t: f64) -> Vec<u8> {
    let grid = state.grid();
    let params = state.params();
    let values = state.raw();
    // Real only if every imaginary part is +0.0, so the round trip stays exact.
    let complex = values.iter().any(|v| v.im.to_bits() != 0);
    let flags = (u16::from(complex) * FLAG_COMPLEX)
        | (repr_code(state.representation()) << 1)
        | (repr_code(state.stored_representation()) << 3);

    let per_site = if complex { 16 } else { 8 };
    let mut out = Vec::with_capacity(HEADER_LEN + values.len() * per_site);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(grid.nx as u32).to_le_bytes());
    out.extend_from_slice(&(grid.np as u32).to_le_bytes());
    for v in [
        grid.x_min,
        grid.x_max,
        grid.p_min,
        grid.p_max,
        params.hbar,
        params.kappa,
        params.mass,
        t,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    debug_assert_eq!(out.len(), HEADER_LEN);
    // Standard layout iterates row-major: x rows, p columns.
    for v in values.iter() {
        out.extend_from_slice(&v.re.to_le_bytes());
        if complex {
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn fail(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Snapshot {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message: message.into(),
        }
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut buf = [0u8; N];
        buf.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        buf
    }

    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }
}

/// Decodes and validates the fixed-size header.
pub fn decode_header(bytes: &[u8], path: &Path) -> Result<SnapshotHeader> {
    let mut r = Reader {
        bytes,
        pos: 0,
        path,
    };
    if bytes.len() < HEADER_LEN {
        return Err(r.fail(
            bytes.len(),
            format!(
                "truncated header: expected {HEADER_LEN} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    let magic: [u8; 4] = r.take();
    if &magic != MAGIC {
        return Err(r.fail(0, format!("bad magic {magic:?}, expected \"WPS1\"")));
    }
    let version = r.u16();
    if version != VERSION {
        return Err(r.fail(
            4,
            format!("unsupported version {version}, expected {VERSION}"),
        ));
    }
    let flags = r.u16();
    if flags >> 5 != 0 {
        return Err(r.fail(6, format!("unknown flag bits in {flags:#06x}")));
    }
    let representation =
        repr_from((flags >> 1) & 0b11).ok_or_else(|| r.fail(6, "invalid representation code"))?;
    let stored = repr_from((flags >> 3) & 0b11).ok_or_else(|| r.fail(6, "invalid storage code"))?;
    let nx = r.u32();
    let np = r.u32();
    Ok(SnapshotHeader {
        version,
        complex: flags & FLAG_COMPLEX != 0,
        representation,
        stored,
        nx,
        np,
        x_min: r.f64(),
        x_max: r.f64(),
        p_min: r.f64(),
        p_max: r.f64(),
        hbar: r.f64(),
        kappa: r.f64(),
        mass: r.f64(),
        t: r.f64(),
    })
}

/// Decodes a snapshot; `path` is only used in error messages.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Snapshot> {
    let h = decode_header(bytes, path)?;
    let fail = |offset: usize, message: String| Error::Snapshot {
        path: path.to_path_buf(),
        offset: offset as u64,
        message,
    };
    let expected = h.payload_len();
    let actual = bytes.len() - HEADER_LEN;
    if actual != expected {
        let what = if actual < expected {
            "truncated payload"
        } else {
            "trailing bytes after payload"
        };
        return Err(fail(
            HEADER_LEN + actual.min(expected),
            format!(
                "{what}: expected {} bytes in total ({expected} payload), found {}",
                HEADER_LEN + expected,
                bytes.len()
            ),
        ));
    }
    let grid = PhaseSpaceGrid::new(
        h.nx as usize,
        h.np as usize,
        h.x_min,
        h.x_max,
        h.p_min,
        h.p_max,
    )
    .map_err(|e| fail(8, e.to_string()))?;
    let params =
        PhysicalParams::new(h.hbar, h.mass, h.kappa).map_err(|e| fail(48, e.to_string()))?;

    let payload = &bytes[HEADER_LEN..];
    let word =
        |i: usize| f64::from_le_bytes(payload[8 * i..8 * i + 8].try_into().expect("8-byte word"));
    let values: Vec<Complex64> = if h.complex {
        (0..grid.sites())
            .map(|i| Complex64::new(word(2 * i), word(2 * i + 1)))
            .collect()
    } else {
        (0..grid.sites())
            .map(|i| Complex64::new(word(i), 0.0))
            .collect()
    };
    let field = Array2::from_shape_vec(grid.shape(), values).expect("length checked above");
    let state = PhaseSpaceState::from_stored(grid, params, h.stored, h.representation, field)
        .map_err(|e| fail(6, e.to_string()))?;
    Ok(Snapshot { state, t: h.t })
}

pub fn write_snapshot(path: &Path, state: &PhaseSpaceState, t: f64) -> Result<()> {
    fs::write(path, encode(state, t)).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Conventional file name for the snapshot taken at `step`.
pub fn snapshot_name(step: usize) -> PathBuf {
    PathBuf::from(format!("snap_{step:06}.wps"))
}
