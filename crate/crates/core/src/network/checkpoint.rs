//! Binary checkpoint container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"QTNNCKPT"
//! 8       4     format version (u32 LE)
//! 12      4     header length H (u32 LE)
//! 16      H     JSON-encoded NetworkConfig (includes the seed)
//! 16+H    8·N·L W1, row-major f64 LE
//! …       8·M·N W2, row-major f64 LE
//! ```
//!
//! Weights are stored as raw IEEE-754 bits, so a write/read round trip is
//! lossless.

use std::io::{Read, Write};

use ndarray::Array2;

use super::{Network, NetworkConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"QTNNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(net: &Network, mut out: W) -> Result<()> {
    let header = serde_json::to_vec(net.config()).map_err(|e| Error::Checkpoint(e.to_string()))?;
    let mut buf = Vec::with_capacity(16 + header.len() + 8 * (net.w1().len() + net.w2().len()));
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for w in net.w1().iter().chain(net.w2().iter()) {
        buf.extend_from_slice(&w.to_le_bytes());
    }
    out.write_all(&buf)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<checkpoint>", e))
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Network> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<checkpoint>", e))?;
    let truncated = || Error::Checkpoint("truncated checkpoint".into());
    if bytes.len() < 16 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a qtnn checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let header = bytes.get(16..16 + header_len).ok_or_else(truncated)?;
    let config: NetworkConfig =
        serde_json::from_slice(header).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    config.validate()?;

    let n1 = config.hidden_size * config.input_size;
    let n2 = config.output_size * config.hidden_size;
    let payload = &bytes[16 + header_len..];
    if payload.len() != 8 * (n1 + n2) {
        return Err(if payload.len() < 8 * (n1 + n2) {
            truncated()
        } else {
            Error::Checkpoint("trailing bytes after weights".into())
        });
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let w1 = Array2::from_shape_vec((config.hidden_size, config.input_size), values[..n1].to_vec())
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let w2 = Array2::from_shape_vec((config.output_size, config.hidden_size), values[n1..].to_vec())
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Network::from_weights(config, w1, w2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::ActivationSpec;

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = NetworkConfig {
            input_size: 6,
            hidden_size: 5,
            output_size: 3,
            learning_rate: 0.0123,
            seed: u64::MAX - 3,
            activation: ActivationSpec::qt(1.7, 0.3, 2.5),
        };
        let mut net = Network::init(cfg).unwrap();
        net.w1_mut()[[0, 0]] = 1.0 / 3.0;
        net.w2_mut()[[2, 4]] = -0.0;
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.config(), net.config());
        let bits = |n: &Network| {
            n.w1()
                .iter()
                .chain(n.w2().iter())
                .map(|w| w.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&back), bits(&net));
    }

    #[test]
    fn rejects_damaged_containers() {
        let net = Network::init(NetworkConfig {
            input_size: 3,
            hidden_size: 2,
            output_size: 2,
            ..NetworkConfig::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&net, &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut extra = buf.clone();
        extra.push(0);
        assert!(read_checkpoint(extra.as_slice()).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut ver = buf;
        ver[8] = 9;
        assert!(read_checkpoint(ver.as_slice()).is_err());
    }
}
