//! Binary encoding of parameter updates and checkpoints.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! "FAVG"            4 bytes   magic
//! version           u16       = 1
//! round             u32
//! client id         u32       0xFFFF_FFFF for checkpoints
//! n_k               u64       sample count behind the weights
//! layer count       u16       number of tensors that follow
//! per tensor:       u8 dim count, then u32 per dim
//! header crc        u32       CRC-32 (IEEE) of every preceding byte
//! payload           f32 × Σ(product of dims), tensors in order, row-major
//! ```

use alloc::vec::Vec;

use thiserror::Error;

use crate::error::{Error as CrateError, Result};
use crate::nn::{ModelSpec, ParameterSet};
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"FAVG";
pub const VERSION: u16 = 1;
/// Client id marking a checkpoint of global weights.
pub const CHECKPOINT_CLIENT: u32 = 0xFFFF_FFFF;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0} (expected {VERSION})")]
    UnsupportedVersion(u16),
    #[error("truncated message: needed {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("header checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    HeaderChecksum { stored: u32, computed: u32 },
    #[error("tensor {index} has an invalid shape")]
    InvalidShape { index: usize },
    #[error("payload holds {actual} bytes but the header declares {declared} scalars")]
    CountMismatch { declared: usize, actual: usize },
}

/// One client's (or the server's) weights tagged with round and sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterMessage {
    round: u32,
    client: u32,
    n_k: u64,
    tensors: Vec<Tensor>,
}

impl ParameterMessage {
    /// Fails if the tensors cannot be described by the header (more than
    /// `u16::MAX` tensors, more than 255 dims, or a dim above `u32::MAX`).
    pub fn new(round: u32, client: u32, n_k: u64, tensors: Vec<Tensor>) -> Result<Self> {
        if tensors.len() > usize::from(u16::MAX) {
            return Err(CrateError::shape("too many tensors for one message"));
        }
        for t in &tensors {
            if t.shape().len() > usize::from(u8::MAX) || t.shape().is_empty() {
                return Err(CrateError::shape("tensor rank must be between 1 and 255"));
            }
            if t.shape().iter().any(|&d| u32::try_from(d).is_err()) {
                return Err(CrateError::shape("tensor dimension exceeds u32"));
            }
        }
        Ok(ParameterMessage { round, client, n_k, tensors })
    }

    pub fn from_params(round: u32, client: u32, n_k: u64, params: &ParameterSet) -> Result<Self> {
        Self::new(round, client, n_k, params.tensors().cloned().collect())
    }

    pub fn checkpoint(round: u32, n: u64, params: &ParameterSet) -> Result<Self> {
        Self::from_params(round, CHECKPOINT_CLIENT, n, params)
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn client(&self) -> u32 {
        self.client
    }

    pub fn n_k(&self) -> u64 {
        self.n_k
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn is_checkpoint(&self) -> bool {
        self.client == CHECKPOINT_CLIENT
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Rebuilds a parameter set, checking every tensor shape against `spec`.
    pub fn to_params(&self, spec: &ModelSpec) -> Result<ParameterSet> {
        let mut params = ParameterSet::zeros(spec)?;
        let expected = params.tensors().count();
        if expected != self.tensors.len() {
            return Err(CrateError::shape(alloc::format!(
                "message has {} tensors, model needs {expected}",
                self.tensors.len()
            )));
        }
        for (slot, t) in params.tensors_mut().zip(&self.tensors) {
            if !slot.same_shape(t) {
                return Err(CrateError::shape(alloc::format!(
                    "tensor shape {:?} does not match model shape {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            slot.clone_from(t);
        }
        Ok(params)
    }

    /// Byte length of everything before the payload.
    pub fn header_len(&self) -> usize {
        4 + 2 + 4 + 4 + 8 + 2 + self.tensors.iter().map(|t| 1 + 4 * t.shape().len()).sum::<usize>() + 4
    }
}

pub fn encode_parameter_message(msg: &ParameterMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(msg.header_len() + 4 * msg.scalar_count());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&msg.round.to_le_bytes());
    out.extend_from_slice(&msg.client.to_le_bytes());
    out.extend_from_slice(&msg.n_k.to_le_bytes());
    out.extend_from_slice(&(msg.tensors.len() as u16).to_le_bytes());
    for t in &msg.tensors {
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    for t in &msg.tensors {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> core::result::Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(DecodeError::Truncated {
            needed: self.pos.saturating_add(n),
            available: self.bytes.len(),
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> core::result::Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode_parameter_message(bytes: &[u8]) -> core::result::Result<ParameterMessage, DecodeError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.array::<4>()?;
    if magic != MAGIC {
        return Err(DecodeError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(r.array()?);
    if version != VERSION {
        return Err(DecodeError::UnsupportedVersion(version));
    }
    let round = u32::from_le_bytes(r.array()?);
    let client = u32::from_le_bytes(r.array()?);
    let n_k = u64::from_le_bytes(r.array()?);
    let count = usize::from(u16::from_le_bytes(r.array()?));
    let mut shapes = Vec::with_capacity(count);
    for _ in 0..count {
        let rank = usize::from(r.array::<1>()?[0]);
        let dims = (0..rank)
            .map(|_| r.array().map(|b| u32::from_le_bytes(b) as usize))
            .collect::<core::result::Result<Vec<_>, _>>()?;
        shapes.push(dims);
    }
    let header_end = r.pos;
    let stored = u32::from_le_bytes(r.array()?);
    let computed = crc32fast::hash(&bytes[..header_end]);
    if stored != computed {
        return Err(DecodeError::HeaderChecksum { stored, computed });
    }
    let mut declared = 0usize;
    for (index, dims) in shapes.iter().enumerate() {
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| if d == 0 { None } else { acc.checked_mul(d) })
            .filter(|_| !dims.is_empty())
            .ok_or(DecodeError::InvalidShape { index })?;
        declared = declared.checked_add(len).ok_or(DecodeError::InvalidShape { index })?;
    }
    let payload = &bytes[r.pos..];
    let needed = declared.checked_mul(4).ok_or(DecodeError::CountMismatch { declared, actual: payload.len() })?;
    if payload.len() < needed {
        return Err(DecodeError::Truncated { needed: r.pos + needed, available: bytes.len() });
    }
    if payload.len() > needed {
        return Err(DecodeError::CountMismatch { declared, actual: payload.len() });
    }
    let mut scalars = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    let tensors = shapes
        .iter()
        .map(|dims| {
            let len = dims.iter().product();
            Tensor::from_vec(dims, scalars.by_ref().take(len).collect()).expect("shape validated above")
        })
        .collect();
    Ok(ParameterMessage { round, client, n_k, tensors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn message(values: usize) -> ParameterMessage {
        let data = (0..values).map(|i| i as f32 * 0.25 - 1.0).collect();
        ParameterMessage::new(3, 7, 120, vec![Tensor::from_vec(&[values], data).unwrap()]).unwrap()
    }

    #[test]
    fn payload_length_follows_layout() {
        let msg = message(15);
        let bytes = encode_parameter_message(&msg);
        // 24 fixed + (1 + 4) dims + 4 crc
        assert_eq!(msg.header_len(), 33);
        assert_eq!(bytes.len(), 33 + 4 * 15);
        assert_eq!(&bytes[..4], b"FAVG");
        assert_eq!(decode_parameter_message(&bytes).unwrap(), msg);
    }

    #[test]
    fn bad_magic_detected() {
        let mut bytes = encode_parameter_message(&message(4));
        bytes[0] ^= 0x01;
        assert!(matches!(decode_parameter_message(&bytes), Err(DecodeError::BadMagic(_))));
    }

    #[test]
    fn version_and_truncation_detected() {
        let mut bytes = encode_parameter_message(&message(4));
        bytes[4] = 2;
        assert_eq!(decode_parameter_message(&bytes), Err(DecodeError::UnsupportedVersion(2)));
        let bytes = encode_parameter_message(&message(4));
        assert!(matches!(
            decode_parameter_message(&bytes[..bytes.len() - 1]),
            Err(DecodeError::Truncated { .. })
        ));
        assert!(matches!(decode_parameter_message(&bytes[..10]), Err(DecodeError::Truncated { .. })));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(decode_parameter_message(&long), Err(DecodeError::CountMismatch { .. })));
    }

    #[test]
    fn header_field_corruption_detected() {
        let bytes = encode_parameter_message(&message(4));
        let mut round_flip = bytes.clone();
        round_flip[6] ^= 0x80;
        assert!(matches!(decode_parameter_message(&round_flip), Err(DecodeError::HeaderChecksum { .. })));
    }

    #[test]
    fn constructor_limits() {
        assert!(ParameterMessage::new(0, 0, 0, vec![Tensor::zeros(&[])]).is_err());
        let ok = ParameterMessage::new(0, CHECKPOINT_CLIENT, 0, vec![]).unwrap();
        assert!(ok.is_checkpoint());
        assert_eq!(decode_parameter_message(&encode_parameter_message(&ok)).unwrap(), ok);
    }
}
