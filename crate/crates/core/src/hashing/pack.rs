//! LSB-first bit packing: value `j` occupies bits `[j*b, (j+1)*b)` of a
//! little-endian bit stream, so bit `i` of the stream is bit `i % 8` of byte
//! `i / 8`.

/// Bytes needed for `k` values of `b` bits.
pub fn packed_len(k: usize, b: u32) -> usize {
    (k * b as usize).div_ceil(8)
}

fn mask(b: u32) -> u64 {
    (1u64 << b) - 1
}

/// Packs the low `b` bits of each value. Bits above `b` are ignored.
pub fn pack(values: &[u32], b: u32) -> Vec<u8> {
    assert!((1..=32).contains(&b), "bit width {b} out of range");
    let mut out = Vec::with_capacity(packed_len(values.len(), b));
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    for &v in values {
        acc |= (u64::from(v) & mask(b)) << filled;
        filled += b;
        while filled >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out.push(acc as u8);
    }
    out
}

/// Reads value `j`. `bytes` must hold at least `packed_len(j + 1, b)` bytes.
pub fn get(bytes: &[u8], b: u32, j: usize) -> u32 {
    let bit = j * b as usize;
    let first = bit / 8;
    let shift = (bit % 8) as u32;
    let last = (bit + b as usize - 1) / 8;
    let mut word = 0u64;
    for (i, &byte) in bytes[first..=last].iter().enumerate() {
        word |= u64::from(byte) << (8 * i);
    }
    ((word >> shift) & mask(b)) as u32
}

pub fn unpack(bytes: &[u8], b: u32, k: usize) -> Vec<u32> {
    (0..k).map(|j| get(bytes, b, j)).collect()
}
