//! Binary sketch files.
//!
//! ```text
//! offset size field
//!      0    4 magic "MHS1"
//!      4    1 version (1)
//!      5    1 kind: 0 = full 64-bit minimums, 1 = b-bit
//!      6    1 b (0 for kind 0)
//!      7    1 reserved (0)
//!      8    4 k          u32 LE
//!     12    8 seed       u64 LE
//!     20    8 f          u64 LE
//!     28    . payload: kind 0 -> k x u64 LE; kind 1 -> ceil(k*b/8) packed bytes
//! ```

use std::fs;
use std::path::Path;

use super::{pack, BBitSketch, MinwiseSketch};
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MHS1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 28;

const KIND_FULL: u8 = 0;
const KIND_BBIT: u8 = 1;

/// Either kind of sketch, as stored on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sketch {
    Full(MinwiseSketch),
    BBit(BBitSketch),
}

impl Sketch {
    pub fn f(&self) -> u64 {
        match self {
            Sketch::Full(s) => s.f(),
            Sketch::BBit(s) => s.f(),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Sketch::Full(s) => s.seed(),
            Sketch::BBit(s) => s.seed(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Sketch::Full(s) => s.k(),
            Sketch::BBit(s) => s.k(),
        }
    }

    /// Bits per value; `None` for full 64-bit sketches.
    pub fn b(&self) -> Option<u32> {
        match self {
            Sketch::Full(_) => None,
            Sketch::BBit(s) => Some(s.b()),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (kind, b, payload) = match self {
            Sketch::Full(s) => (
                KIND_FULL,
                0u8,
                s.mins().iter().flat_map(|z| z.to_le_bytes()).collect::<Vec<u8>>(),
            ),
            Sketch::BBit(s) => (KIND_BBIT, s.b() as u8, s.packed().to_vec()),
        };
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&[VERSION, kind, b, 0]);
        out.extend_from_slice(&(self.k() as u32).to_le_bytes());
        out.extend_from_slice(&self.seed().to_le_bytes());
        out.extend_from_slice(&self.f().to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Sketch> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!("{} bytes is shorter than the header", bytes.len())));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::Format(format!("unsupported version {}", bytes[4])));
        }
        let (kind, b) = (bytes[5], bytes[6]);
        if bytes[7] != 0 {
            return Err(Error::Format("reserved byte must be zero".into()));
        }
        let k = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let f = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let payload = &bytes[HEADER_LEN..];
        if k == 0 || f == 0 {
            return Err(Error::Format("k and f must be positive".into()));
        }
        match kind {
            KIND_FULL => {
                if b != 0 {
                    return Err(Error::Format(format!("full sketch with b = {b}")));
                }
                if payload.len() != 8 * k {
                    return Err(Error::Format(format!(
                        "payload has {} bytes, expected {}",
                        payload.len(),
                        8 * k
                    )));
                }
                let mins = payload
                    .chunks_exact(8)
                    .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Ok(Sketch::Full(MinwiseSketch::from_parts(f, seed, mins)?))
            }
            KIND_BBIT => {
                let b = u32::from(b);
                if !(1..=32).contains(&b) {
                    return Err(Error::Format(format!("b-bit sketch with b = {b}")));
                }
                if payload.len() != pack::packed_len(k, b) {
                    return Err(Error::Format(format!(
                        "payload has {} bytes, expected {}",
                        payload.len(),
                        pack::packed_len(k, b)
                    )));
                }
                Ok(Sketch::BBit(BBitSketch::from_packed(f, seed, k, b, payload.to_vec())?))
            }
            other => Err(Error::Format(format!("unknown kind {other}"))),
        }
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Sketch> {
        Sketch::decode(&fs::read(path)?)
    }
}

impl From<MinwiseSketch> for Sketch {
    fn from(s: MinwiseSketch) -> Self {
        Sketch::Full(s)
    }
}

impl From<BBitSketch> for Sketch {
    fn from(s: BBitSketch) -> Self {
        Sketch::BBit(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let s = Sketch::Full(MinwiseSketch::from_parts(3, 0x0102_0304_0506_0708, vec![1, 2]).unwrap());
        let bytes = s.encode();
        assert_eq!(bytes.len(), HEADER_LEN + 16);
        assert_eq!(&bytes[0..8], b"MHS1\x01\x00\x00\x00");
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..20], &[8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(&bytes[20..28], &[3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[28..36], &[1, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(Sketch::decode(&bytes).unwrap(), s);
    }

    #[test]
    fn bbit_payload_length() {
        let s = Sketch::BBit(BBitSketch::from_values(9, 5, 1, &[1; 17]).unwrap());
        let bytes = s.encode();
        assert_eq!(bytes.len(), HEADER_LEN + 3);
        assert_eq!(bytes[5], 1);
        assert_eq!(bytes[6], 1);
        assert_eq!(Sketch::decode(&bytes).unwrap(), s);
    }

    #[test]
    fn rejects_corruption() {
        let good = Sketch::BBit(BBitSketch::from_values(9, 5, 3, &[1, 2, 3]).unwrap()).encode();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(Sketch::decode(&bad).is_err());
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(Sketch::decode(&bad).is_err());
        let mut bad = good.clone();
        bad[7] = 1;
        assert!(Sketch::decode(&bad).is_err());
        let mut bad = good.clone();
        bad[6] = 40;
        assert!(Sketch::decode(&bad).is_err());
        assert!(Sketch::decode(&good[..good.len() - 1]).is_err());
        let mut long = good.clone();
        long.push(0);
        assert!(Sketch::decode(&long).is_err());
        assert!(Sketch::decode(&good[..10]).is_err());
    }
}
