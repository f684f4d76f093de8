//! Plain-text network checkpoints.
//!
//! ```text
//! friday-mlp-checkpoint 1
//! float f64 decimal-shortest-roundtrip
//! layer_sizes 3 50 50 50 50 1
//! zeta 1
//! sn_mode scale_down
//! layer 0 50 3
//! <50 lines of 3 space-separated entries, row-major>
//! layer 1 50 50
//! ...
//! ```
//!
//! Numbers are written with Rust's shortest round-trip decimal form for
//! IEEE-754 binary64, so a save/load cycle is bit-exact and the file does not
//! depend on host endianness. Momentum buffers are not stored; a loaded
//! network starts with zero buffers.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{MlpError, MlpNetwork, SnMode};
use crate::linalg::Matrix;

pub const CHECKPOINT_MAGIC: &str = "friday-mlp-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;
const FLOAT_DECL: &str = "float f64 decimal-shortest-roundtrip";

pub fn write_checkpoint(net: &MlpNetwork, path: &Path) -> Result<(), MlpError> {
    let mut out = String::new();
    out.push_str(&format!(
        "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n{FLOAT_DECL}\n"
    ));
    let sizes: Vec<String> = net.layer_sizes().iter().map(usize::to_string).collect();
    out.push_str(&format!("layer_sizes {}\n", sizes.join(" ")));
    out.push_str(&format!("zeta {}\n", net.zeta()));
    let mode = match net.sn_mode() {
        SnMode::ScaleDown => "scale_down",
        SnMode::Strict => "strict",
    };
    out.push_str(&format!("sn_mode {mode}\n"));
    for (l, w) in net.weights().iter().enumerate() {
        out.push_str(&format!("layer {l} {} {}\n", w.rows(), w.cols()));
        for i in 0..w.rows() {
            let row: Vec<String> = w.row_slice(i).iter().map(f64::to_string).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn bad(msg: impl Into<String>) -> MlpError {
    MlpError::Checkpoint(msg.into())
}

pub fn read_checkpoint(path: &Path) -> Result<MlpNetwork, MlpError> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let mut next = move || -> Result<String, MlpError> {
        lines
            .next()
            .ok_or_else(|| bad("unexpected end of file"))?
            .map_err(MlpError::from)
    };

    let header = next()?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(CHECKPOINT_MAGIC) {
        return Err(bad("missing magic header"));
    }
    let version: u32 = parts
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing version"))?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    if next()?.trim() != FLOAT_DECL {
        return Err(bad("unsupported float declaration"));
    }

    let sizes_line = next()?;
    let sizes: Vec<usize> = sizes_line
        .strip_prefix("layer_sizes ")
        .ok_or_else(|| bad("expected layer_sizes"))?
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| bad(format!("bad layer size {s:?}"))))
        .collect::<Result<_, _>>()?;
    if sizes.len() < 2 {
        return Err(MlpError::TooFewLayers(sizes.len()));
    }
    let zeta: f64 = next()?
        .strip_prefix("zeta ")
        .ok_or_else(|| bad("expected zeta"))?
        .trim()
        .parse()
        .map_err(|_| bad("bad zeta"))?;
    let mode = match next()?.strip_prefix("sn_mode ").map(str::trim) {
        Some("scale_down") => SnMode::ScaleDown,
        Some("strict") => SnMode::Strict,
        _ => return Err(bad("expected sn_mode")),
    };

    let mut weights = Vec::with_capacity(sizes.len() - 1);
    for l in 0..sizes.len() - 1 {
        let (rows, cols) = (sizes[l + 1], sizes[l]);
        let expected = format!("layer {l} {rows} {cols}");
        if next()?.trim() != expected {
            return Err(bad(format!("expected `{expected}`")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = next()?;
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad(format!("bad entry {s:?}"))))
                .collect::<Result<_, _>>()?;
            if row.len() != cols {
                return Err(bad(format!("layer {l}: expected {cols} entries per row")));
            }
            data.extend(row);
        }
        weights.push(Matrix::new(rows, cols, data)?);
    }
    Ok(MlpNetwork::from_weights(weights, zeta)?.with_sn_mode(mode))
}
