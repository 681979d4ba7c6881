//! Binary model file. All integers and floats little endian:
//!
//! ```text
//! magic        4 bytes  "QDFM"
//! version      u32
//! mask         u8       bit k set = feature pair k kept
//! dim          u16
//! lambda       f64
//! epochs       u32
//! eta0         f64
//! seed         u64
//! holdout      f64
//! calibration  f64
//! bias         f64
//! updates      u64
//! scaler       dim x (mean f64, std f64)
//! weights      dim x f64
//! checksum     32 bytes, SHA-256 of everything above
//! ```

use std::io::{Read, Write};

use sha2::{Digest, Sha256};

use super::{PairClassifier, TrainConfig};
use crate::error::{Error, Result};
use crate::features::FeatureMask;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"QDFM";

pub fn write_model<W: Write>(m: &PairClassifier, mut w: W) -> Result<()> {
    let dim = m.weights.len();
    if m.scaler.len() != dim || dim != m.mask.dimension() {
        return Err(Error::InvalidParameter("model dimensions disagree".into()));
    }
    let mut buf = Vec::with_capacity(96 + 24 * dim);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    buf.push(m.mask.bits());
    buf.extend_from_slice(&(dim as u16).to_le_bytes());
    buf.extend_from_slice(&m.config.lambda.to_le_bytes());
    buf.extend_from_slice(&m.config.epochs.to_le_bytes());
    buf.extend_from_slice(&m.config.eta0.to_le_bytes());
    buf.extend_from_slice(&m.config.seed.to_le_bytes());
    buf.extend_from_slice(&m.config.holdout_fraction.to_le_bytes());
    buf.extend_from_slice(&m.calibration.to_le_bytes());
    buf.extend_from_slice(&m.bias.to_le_bytes());
    buf.extend_from_slice(&m.updates.to_le_bytes());
    for (mean, std) in &m.scaler {
        buf.extend_from_slice(&mean.to_le_bytes());
        buf.extend_from_slice(&std.to_le_bytes());
    }
    for x in &m.weights {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    w.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.at + N;
        let slice = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| Error::Corrupt("model file is truncated".into()))?;
        self.at = end;
        Ok(slice.try_into().expect("slice length"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_model<R: Read>(mut r: R) -> Result<PairClassifier> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Corrupt("not a model file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    if bytes.len() < 40 {
        return Err(Error::Corrupt("model file is truncated".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::Corrupt("model checksum mismatch".into()));
    }
    let mut c = Cursor { bytes: body, at: 8 };
    let mask = FeatureMask::from_bits(c.take::<1>()?[0])?;
    let dim = u16::from_le_bytes(c.take()?) as usize;
    if dim != mask.dimension() {
        return Err(Error::Corrupt(format!("dimension {dim} does not fit the feature mask")));
    }
    let config = TrainConfig {
        lambda: c.f64()?,
        epochs: u32::from_le_bytes(c.take()?),
        eta0: c.f64()?,
        seed: u64::from_le_bytes(c.take()?),
        holdout_fraction: c.f64()?,
    };
    let calibration = c.f64()?;
    let bias = c.f64()?;
    let updates = u64::from_le_bytes(c.take()?);
    let mut scaler = Vec::with_capacity(dim);
    for _ in 0..dim {
        scaler.push((c.f64()?, c.f64()?));
    }
    let mut weights = Vec::with_capacity(dim);
    for _ in 0..dim {
        weights.push(c.f64()?);
    }
    if c.at != body.len() {
        return Err(Error::Corrupt("trailing bytes in model file".into()));
    }
    if scaler.iter().any(|&(_, s)| !(s > 0.0)) {
        return Err(Error::Corrupt("non-positive scaler deviation".into()));
    }
    Ok(PairClassifier {
        weights,
        bias,
        scaler,
        mask,
        calibration,
        config,
        updates,
    })
}
