//! Byte-level encoding shared by every serialized structure.
//!
//! Big integers are written as a 4-byte big-endian length followed by the
//! minimal big-endian magnitude. Zero is the empty string.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MAKE";
pub const VERSION: u8 = 0x01;

pub fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

pub fn put_biguint(buf: &mut Vec<u8>, v: &BigUint) {
    if v.is_zero() {
        put_u32(buf, 0);
        return;
    }
    let bytes = v.to_bytes_be();
    put_u32(buf, bytes.len() as u32);
    buf.extend_from_slice(&bytes);
}

/// Cursor over an input buffer. Every read is bounds-checked.
#[derive(Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Decode(format!(
                "truncated input: wanted {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub fn biguint(&mut self) -> Result<BigUint> {
        let len = self.u32()? as usize;
        let bytes = self.bytes(len)?;
        if bytes.first() == Some(&0) {
            return Err(Error::Decode("non-minimal integer encoding".into()));
        }
        Ok(BigUint::from_bytes_be(bytes))
    }

    /// Consumes the `MAKE` magic and version byte.
    pub fn header(&mut self) -> Result<()> {
        let magic = self.bytes(4)?;
        if magic != MAGIC {
            return Err(Error::Decode(format!("bad magic {magic:02x?}")));
        }
        let version = self.u8()?;
        if version != VERSION {
            return Err(Error::Decode(format!("unsupported version 0x{version:02x}")));
        }
        Ok(())
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Decode(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_is_empty() {
        let mut buf = Vec::new();
        put_biguint(&mut buf, &BigUint::zero());
        assert_eq!(buf, [0, 0, 0, 0]);
        assert_eq!(Reader::new(&buf).biguint().unwrap(), BigUint::zero());
    }

    #[test]
    fn rejects_leading_zero_and_truncation() {
        assert!(Reader::new(&[0, 0, 0, 2, 0, 5]).biguint().is_err());
        assert!(Reader::new(&[0, 0, 0, 3, 1, 5]).biguint().is_err());
    }

    #[test]
    fn header_checks() {
        assert!(Reader::new(b"MAKE\x01").header().is_ok());
        assert!(Reader::new(b"MAKE\x02").header().is_err());
        assert!(Reader::new(b"MAKF\x01").header().is_err());
    }

    proptest! {
        #[test]
        fn biguint_round_trip(bytes in proptest::collection::vec(any::<u8>(), 0..300)) {
            let v = BigUint::from_bytes_be(&bytes);
            let mut buf = Vec::new();
            put_biguint(&mut buf, &v);
            let mut r = Reader::new(&buf);
            prop_assert_eq!(r.biguint().unwrap(), v);
            prop_assert!(r.finish().is_ok());
        }
    }
}
