//! Canonical Huffman tables for baseline JPEG, built from the BITS /
//! HUFFVAL form used in stream DHT segments.

use super::CodecError;

/// Encode-side table: symbol -> (code, length).
#[derive(Debug, Clone)]
pub struct EncTable {
    codes: [u16; 256],
    lengths: [u8; 256],
}

impl EncTable {
    pub fn build(bits: &[u8; 16], vals: &[u8]) -> Self {
        let mut codes = [0u16; 256];
        let mut lengths = [0u8; 256];
        let mut code: u16 = 0;
        let mut k = 0usize;
        for (len_idx, &count) in bits.iter().enumerate() {
            for _ in 0..count {
                let sym = vals[k] as usize;
                codes[sym] = code;
                lengths[sym] = len_idx as u8 + 1;
                code += 1;
                k += 1;
            }
            code <<= 1;
        }
        EncTable { codes, lengths }
    }

    pub fn code(&self, sym: u8) -> (u16, u8) {
        let len = self.lengths[sym as usize];
        debug_assert!(len > 0, "symbol {sym:#x} has no code");
        (self.codes[sym as usize], len)
    }
}

/// Decode-side table (mincode/maxcode/valptr construction).
#[derive(Debug, Clone)]
pub struct DecTable {
    mincode: [i32; 17],
    maxcode: [i32; 17],
    valptr: [usize; 17],
    vals: Vec<u8>,
}

impl DecTable {
    pub fn build(bits: &[u8; 16], vals: &[u8]) -> Result<Self, CodecError> {
        let total: usize = bits.iter().map(|&b| b as usize).sum();
        if total != vals.len() || total > 256 {
            return Err(CodecError::Malformed(
                "huffman: BITS counts do not match value list".into(),
            ));
        }
        let mut mincode = [0i32; 17];
        let mut maxcode = [-1i32; 17];
        let mut valptr = [0usize; 17];
        let mut code: i32 = 0;
        let mut k = 0usize;
        for l in 1..=16usize {
            let count = bits[l - 1] as usize;
            if count > 0 {
                valptr[l] = k;
                mincode[l] = code;
                code += count as i32;
                maxcode[l] = code - 1;
                k += count;
            }
            code <<= 1;
        }
        Ok(DecTable {
            mincode,
            maxcode,
            valptr,
            vals: vals.to_vec(),
        })
    }

    /// Decode one symbol by walking code lengths; `next_bit` yields bits
    /// MSB-first from the entropy-coded segment.
    pub fn decode(
        &self,
        mut next_bit: impl FnMut() -> Result<u8, CodecError>,
    ) -> Result<u8, CodecError> {
        let mut code: i32 = next_bit()? as i32;
        for l in 1..=16usize {
            if self.maxcode[l] >= 0 && code <= self.maxcode[l] {
                let idx = self.valptr[l] + (code - self.mincode[l]) as usize;
                return Ok(self.vals[idx]);
            }
            code = (code << 1) | next_bit()? as i32;
        }
        Err(CodecError::Malformed(
            "huffman: code longer than 16 bits".into(),
        ))
    }
}

/// Magnitude category of a coefficient value (number of bits).
pub fn magnitude_category(v: i32) -> u8 {
    let mut a = v.unsigned_abs();
    let mut s = 0u8;
    while a != 0 {
        a >>= 1;
        s += 1;
    }
    s
}

/// Low-order bits encoding a value within its category.
pub fn magnitude_bits(v: i32, category: u8) -> u16 {
    if v >= 0 {
        v as u16
    } else {
        (v + (1 << category) - 1) as u16
    }
}

/// Inverse of the category/bits encoding (the EXTEND procedure).
pub fn extend(bits: u16, category: u8) -> i32 {
    if category == 0 {
        return 0;
    }
    let v = bits as i32;
    if v < (1 << (category - 1)) {
        v - (1 << category) + 1
    } else {
        v
    }
}
