//! MSB-first bit packing and Elias-delta integer codes.
//!
//! Wire payloads are bit strings packed most-significant-bit first and
//! zero-padded to a byte boundary. The index of the remote-generation codec
//! travels as an Elias-delta code, which is self-delimiting, so no length
//! field is needed inside the payload.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BitsError {
    #[error("bit stream exhausted")]
    Exhausted,
    #[error("malformed Elias-delta prefix")]
    MalformedPrefix,
    #[error("Elias codes cannot represent 0")]
    Zero,
}

/// Append-only bit buffer, MSB-first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BitWriter {
    bytes: Vec<u8>,
    /// Bits used in the final byte (0..=7; 0 means byte-aligned).
    tail: u8,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_bit(&mut self, bit: bool) {
        if self.tail == 0 {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.last_mut().expect("just pushed");
            *last |= 1 << (7 - self.tail);
        }
        self.tail = (self.tail + 1) % 8;
    }

    /// Push the low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        for i in (0..width).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    /// Number of bits written so far.
    pub fn len(&self) -> usize {
        if self.tail == 0 {
            self.bytes.len() * 8
        } else {
            (self.bytes.len() - 1) * 8 + self.tail as usize
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Zero-padded bytes plus the exact bit length.
    pub fn finish(self) -> (Vec<u8>, usize) {
        let len = self.len();
        (self.bytes, len)
    }
}

/// Cursor over a packed bit buffer, MSB-first.
#[derive(Debug, Clone)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    len: usize,
}

impl<'a> BitReader<'a> {
    /// Read from `bytes`, trusting the first `len` bits.
    pub fn new(bytes: &'a [u8], len: usize) -> Self {
        debug_assert!(len <= bytes.len() * 8);
        BitReader { bytes, pos: 0, len }
    }

    pub fn read_bit(&mut self) -> Result<bool, BitsError> {
        if self.pos >= self.len {
            return Err(BitsError::Exhausted);
        }
        let byte = self.bytes[self.pos / 8];
        let bit = (byte >> (7 - self.pos % 8)) & 1 == 1;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64, BitsError> {
        debug_assert!(width <= 64);
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    /// Bits not yet consumed.
    pub fn remaining(&self) -> usize {
        self.len - self.pos
    }
}

/// Elias-gamma code for `n >= 1`: unary length prefix, then the value
/// without its leading one.
fn gamma_encode(w: &mut BitWriter, n: u64) {
    debug_assert!(n >= 1);
    let l = 63 - n.leading_zeros(); // floor(log2 n)
    for _ in 0..l {
        w.push_bit(false);
    }
    w.push_bits(n, l + 1);
}

fn gamma_decode(r: &mut BitReader) -> Result<u64, BitsError> {
    let mut l = 0u32;
    loop {
        if r.read_bit()? {
            break;
        }
        l += 1;
        if l > 64 {
            return Err(BitsError::MalformedPrefix);
        }
    }
    let rest = r.read_bits(l)?;
    Ok((1u64 << l) | rest)
}

/// Elias-delta encode `n >= 1`: gamma-coded bit length, then the value
/// without its leading one. Code length is
/// `floor(log2 n) + 2 floor(log2(floor(log2 n) + 1)) + 1` bits.
pub fn delta_encode(w: &mut BitWriter, n: u64) -> Result<(), BitsError> {
    if n == 0 {
        return Err(BitsError::Zero);
    }
    let l = 63 - n.leading_zeros();
    gamma_encode(w, (l + 1) as u64);
    if l > 0 {
        w.push_bits(n & ((1u64 << l) - 1), l);
    }
    Ok(())
}

pub fn delta_decode(r: &mut BitReader) -> Result<u64, BitsError> {
    let lp1 = gamma_decode(r)?;
    if lp1 == 0 || lp1 > 64 {
        return Err(BitsError::MalformedPrefix);
    }
    let l = (lp1 - 1) as u32;
    if l == 64 {
        return Err(BitsError::MalformedPrefix);
    }
    let rest = r.read_bits(l)?;
    Ok((1u64 << l) | rest)
}

/// Length in bits of the Elias-delta code for `n >= 1`.
pub fn delta_len(n: u64) -> usize {
    debug_assert!(n >= 1);
    let l = (63 - n.leading_zeros()) as usize;
    let ll = (64 - ((l + 1) as u64).leading_zeros() - 1) as usize; // floor(log2(l+1))
    l + 2 * ll + 1
}
