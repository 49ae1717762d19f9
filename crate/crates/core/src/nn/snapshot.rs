//! Flat binary parameter snapshots.
//!
//! Layout: the 8-byte magic `BICLNET1`, the number of layer sizes as a
//! little-endian `u64`, each layer size as a little-endian `u64`, then every
//! parameter as a little-endian `f64`, layer by layer, weights row-major
//! followed by the bias.

use std::fs;
use std::path::Path;

use super::mlp::{Dense, Mlp, OutputActivation};
use crate::error::{BiclError, Result};

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"BICLNET1";

pub fn encode(net: &Mlp) -> Vec<u8> {
    let sizes = net.layer_sizes();
    let mut out = Vec::with_capacity(16 + 8 * (sizes.len() + net.parameter_count()));
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&(sizes.len() as u64).to_le_bytes());
    for s in sizes {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for p in net.parameters() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], output: OutputActivation) -> Result<Mlp> {
    let bad = |m: &str| BiclError::Config(format!("malformed network snapshot: {m}"));
    let mut words = bytes
        .get(8..)
        .ok_or_else(|| bad("truncated header"))?
        .chunks_exact(8)
        .map(|c| <[u8; 8]>::try_from(c).expect("chunk of 8"));
    if &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let count = u64::from_le_bytes(words.next().ok_or_else(|| bad("missing size count"))?) as usize;
    if count < 2 || count > 1024 {
        return Err(bad("implausible layer count"));
    }
    let sizes = (0..count)
        .map(|_| words.next().map(|w| u64::from_le_bytes(w) as usize))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| bad("missing layer sizes"))?;
    let mut layers = Vec::with_capacity(count - 1);
    for pair in sizes.windows(2) {
        let (inputs, outputs) = (pair[0], pair[1]);
        let mut take = |n: usize| -> Result<Vec<f64>> {
            (0..n)
                .map(|_| words.next().map(f64::from_le_bytes))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| bad("truncated parameters"))
        };
        let weights = take(inputs * outputs)?;
        let bias = take(outputs)?;
        layers.push(Dense {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    if words.next().is_some() || bytes.len() % 8 != 0 {
        return Err(bad("trailing bytes"));
    }
    Mlp::from_layers(layers, output)
}

pub fn write_snapshot(net: &Mlp, path: &Path) -> Result<()> {
    fs::write(path, encode(net)).map_err(|e| BiclError::io(path, e))
}

pub fn read_snapshot(path: &Path, output: OutputActivation) -> Result<Mlp> {
    let bytes = fs::read(path).map_err(|e| BiclError::io(path, e))?;
    decode(&bytes, output)
}
