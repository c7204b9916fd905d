//! On-disk bitstream container.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DMBS"
//! 4       1     version (1)
//! 5       1     adaptive flag (0 or 1)
//! 6       4     N, u32 little-endian
//! 10      8     delta, f64 little-endian (initial step for ADM)
//! 18      ..    ceil(N/8) bytes of symbols, LSB first, 1 = +1, 0 = -1
//! ```
//!
//! ADM adaptation constants are not stored; decoders must be given the same
//! parameters the encoder used.

use std::path::Path;

use super::Bitstream;
use crate::error::{Error, Result};

pub const BITSTREAM_MAGIC: [u8; 4] = *b"DMBS";
pub const BITSTREAM_VERSION: u8 = 1;
const HEADER_LEN: usize = 18;

impl Bitstream {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.validate()?;
        let n = u32::try_from(self.len())
            .map_err(|_| Error::Bitstream(format!("{} symbols exceed u32", self.len())))?;
        let mut out = Vec::with_capacity(HEADER_LEN + self.len().div_ceil(8));
        out.extend_from_slice(&BITSTREAM_MAGIC);
        out.push(BITSTREAM_VERSION);
        out.push(u8::from(self.is_adaptive()));
        out.extend_from_slice(&n.to_le_bytes());
        out.extend_from_slice(&self.delta().to_le_bytes());
        for chunk in self.symbols().chunks(8) {
            let byte = chunk
                .iter()
                .enumerate()
                .fold(0u8, |acc, (i, &s)| if s > 0 { acc | (1 << i) } else { acc });
            out.push(byte);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated(format!(
                "bitstream header needs {HEADER_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        if bytes[0..4] != BITSTREAM_MAGIC {
            return Err(Error::Bitstream("bad magic".into()));
        }
        if bytes[4] != BITSTREAM_VERSION {
            return Err(Error::Bitstream(format!(
                "unsupported version {}",
                bytes[4]
            )));
        }
        let adaptive = match bytes[5] {
            0 => false,
            1 => true,
            other => return Err(Error::Bitstream(format!("bad adaptive flag {other}"))),
        };
        let n = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let delta = f64::from_le_bytes(bytes[10..18].try_into().unwrap());
        let payload = &bytes[HEADER_LEN..];
        let needed = n.div_ceil(8);
        if payload.len() < needed {
            return Err(Error::Truncated(format!(
                "bitstream payload needs {needed} bytes, got {}",
                payload.len()
            )));
        }
        if payload.len() > needed {
            return Err(Error::Bitstream(format!(
                "{} trailing bytes after payload",
                payload.len() - needed
            )));
        }
        let symbols = (0..n)
            .map(|i| {
                if payload[i / 8] >> (i % 8) & 1 == 1 {
                    1
                } else {
                    -1
                }
            })
            .collect();
        Bitstream::new(symbols, delta, adaptive)
            .map_err(|e| Error::Bitstream(format!("header: {e}")))
    }
}

pub fn write_bitstream(bits: &Bitstream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bits.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_bitstream(path: impl AsRef<Path>) -> Result<Bitstream> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Bitstream::from_bytes(&bytes)
}
