//! Binary snapshot files.
//!
//! Layout, all little-endian with no padding:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `TCM1` |
//! | 4 | format version (u32, currently 1) |
//! | 4 | n (u32) |
//! | 8 | side length (f64) |
//! | 8 | time (f64) |
//! | 1 | variant tag (0 `p_eps_eta`, 1 `p_eps`, 2 `limit`) |
//! | 8 | eps (f64, NaN for `limit`) |
//! | 8 | eta (f64, 0 unless `p_eps_eta`) |
//! | 8 | alpha (f64, NaN unless `limit`) |
//!
//! followed by `u1, u2, v1, v2, T, q`, each `n * n` f64 values in row-major
//! order (`x` fastest).

use std::path::Path;

use tcm_core::{Grid, RealField, State, SystemVariant};

pub const MAGIC: [u8; 4] = *b"TCM1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 53;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("not a snapshot: magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported snapshot version {0} (this build reads version {VERSION})")]
    UnsupportedVersion(u32),
    #[error("truncated snapshot: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("snapshot has {0} trailing bytes after the payload")]
    TrailingBytes(usize),
    #[error("invalid snapshot: {0}")]
    Invalid(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotMeta {
    pub grid: Grid,
    pub time: f64,
    pub variant: SystemVariant,
}

impl SnapshotMeta {
    /// Bitwise comparison, so NaN placeholders compare equal.
    pub fn same_bits(&self, other: &SnapshotMeta) -> bool {
        encode_header(self) == encode_header(other)
    }
}

fn variant_params(v: &SystemVariant) -> (f64, f64, f64) {
    match *v {
        SystemVariant::PEpsEta { eps, eta } => (eps, eta, f64::NAN),
        SystemVariant::PEps { eps } => (eps, 0.0, f64::NAN),
        SystemVariant::Limit { alpha } => (f64::NAN, 0.0, alpha),
    }
}

fn encode_header(meta: &SnapshotMeta) -> Vec<u8> {
    let (eps, eta, alpha) = variant_params(&meta.variant);
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.grid.n() as u32).to_le_bytes());
    out.extend_from_slice(&meta.grid.length().to_le_bytes());
    out.extend_from_slice(&meta.time.to_le_bytes());
    out.push(meta.variant.tag());
    for x in [eps, eta, alpha] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn encode(state: &State, time: f64, variant: SystemVariant) -> Vec<u8> {
    let meta = SnapshotMeta {
        grid: *state.grid(),
        time,
        variant,
    };
    let mut out = encode_header(&meta);
    out.reserve(6 * state.grid().len() * 8);
    for field in state.components() {
        for v in field.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"))
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses the header only; `bytes` may be just the first [`HEADER_LEN`] bytes.
pub fn decode_header(bytes: &[u8]) -> Result<SnapshotMeta, SnapshotError> {
    if bytes.len() < 8 {
        return Err(SnapshotError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(SnapshotError::BadMagic(magic));
    }
    let version = u32_at(bytes, 4);
    if version != VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::Truncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let n = u32_at(bytes, 8) as usize;
    let length = f64_at(bytes, 12);
    let grid = Grid::new(n, length).map_err(|e| SnapshotError::Invalid(e.to_string()))?;
    let time = f64_at(bytes, 20);
    let tag = bytes[28];
    let (eps, eta, alpha) = (f64_at(bytes, 29), f64_at(bytes, 37), f64_at(bytes, 45));
    let variant = match tag {
        0 => SystemVariant::PEpsEta { eps, eta },
        1 => SystemVariant::PEps { eps },
        2 => SystemVariant::Limit { alpha },
        other => return Err(SnapshotError::Invalid(format!("unknown variant tag {other}"))),
    };
    variant
        .validate()
        .map_err(|e| SnapshotError::Invalid(e.to_string()))?;
    Ok(SnapshotMeta {
        grid,
        time,
        variant,
    })
}

pub fn decode(bytes: &[u8]) -> Result<(State, SnapshotMeta), SnapshotError> {
    let meta = decode_header(bytes)?;
    let len = meta.grid.len();
    let expected = HEADER_LEN + 6 * len * 8;
    if bytes.len() < expected {
        return Err(SnapshotError::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(SnapshotError::TrailingBytes(bytes.len() - expected));
    }
    let payload = &bytes[HEADER_LEN..];
    let fields: Vec<RealField> = (0..6)
        .map(|f| {
            let values = (0..len).map(|k| f64_at(payload, (f * len + k) * 8)).collect();
            RealField::new(meta.grid, values).map_err(|e| SnapshotError::Invalid(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let fields: [RealField; 6] = fields.try_into().expect("six fields");
    let state = State::from_components(fields).map_err(|e| SnapshotError::Invalid(e.to_string()))?;
    Ok((state, meta))
}

pub fn write(path: &Path, state: &State, time: f64, variant: SystemVariant) -> Result<(), SnapshotError> {
    std::fs::write(path, encode(state, time, variant))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(State, SnapshotMeta), SnapshotError> {
    decode(&std::fs::read(path)?)
}
