//! Fixed-rate packing of walks and the delayless decoder.
//!
//! Each step of a walk is the child offset `j_t − d·j_{t−1}` in `0..d`. For a
//! power-of-two `d` every offset is written as `log₂ d` raw bits, so symbol `t`
//! is decodable as soon as its field arrives. Otherwise the offsets are the
//! digits (most significant first) of one base-`d` integer written in
//! `⌈n log₂ d⌉` bits, and the decoder reads the whole integer before emitting.
//! In both cases the stream is exactly `⌈n log₂ d⌉` bits, most significant bit
//! first within each byte, with the final byte zero-padded.

use num_bigint::BigUint;
use serde::Serialize;

use super::TreeCode;
use crate::dprm::Walk;
use crate::error::{Error, Result};

pub const FILE_MAGIC: [u8; 4] = *b"DPTC";
pub const FILE_HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Bitstream {
    bytes: Vec<u8>,
    bit_len: u64,
    n: usize,
    d: u64,
}

/// `⌈n log₂ d⌉`, i.e. the bit length of `d^n − 1`.
pub fn packed_bit_len(d: u64, n: usize) -> u64 {
    if d.is_power_of_two() {
        return n as u64 * d.trailing_zeros() as u64;
    }
    let total = BigUint::from(d).pow(n as u32);
    (total - 1u32).bits()
}

impl Bitstream {
    /// Wraps raw payload bytes, checking the length and the zero padding.
    pub fn from_parts(bytes: Vec<u8>, n: usize, d: u64) -> Result<Self> {
        if d < 1 {
            return Err(Error::MalformedBitstream(format!("branching ratio {d}")));
        }
        let bit_len = packed_bit_len(d, n);
        let expected = bit_len.div_ceil(8) as usize;
        if bytes.len() != expected {
            return Err(Error::MalformedBitstream(format!(
                "{} payload bytes, expected {expected} for d={d}, n={n}",
                bytes.len()
            )));
        }
        let used = (bit_len % 8) as u32;
        if used != 0 {
            let mask = 0xffu8 >> used;
            if bytes[expected - 1] & mask != 0 {
                return Err(Error::MalformedBitstream("nonzero padding bits".into()));
            }
        }
        Ok(Self {
            bytes,
            bit_len,
            n,
            d,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn bit_len(&self) -> u64 {
        self.bit_len
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> u64 {
        self.d
    }
}

struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    fn new() -> Self {
        Self {
            bytes: Vec::new(),
            len: 0,
        }
    }

    fn push_bit(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().unwrap() |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    fn push_bits(&mut self, value: u64, width: u32) {
        for i in (0..width).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
    len: u64,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8], len: u64) -> Self {
        Self { bytes, pos: 0, len }
    }

    fn read_bits(&mut self, width: u32) -> Result<u64> {
        if self.pos + width as u64 > self.len {
            return Err(Error::MalformedBitstream("truncated stream".into()));
        }
        let mut v = 0u64;
        for _ in 0..width {
            let byte = self.bytes[(self.pos / 8) as usize];
            let bit = (byte >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(v)
    }
}

/// Packs a walk on a `d`-ary tree.
pub fn pack(walk: &Walk, d: u64) -> Result<Bitstream> {
    if d < 1 {
        return Err(Error::InvalidArgument(format!("branching ratio {d}")));
    }
    let relative = walk.relative_indices(d);
    // from_relative re-checks that every offset is below d
    Walk::from_relative(&relative, d)?;
    let n = relative.len();
    let mut w = BitWriter::new();
    if d.is_power_of_two() {
        let width = d.trailing_zeros();
        for &r in &relative {
            w.push_bits(r, width);
        }
    } else {
        let mut value = BigUint::from(0u32);
        for &r in &relative {
            value = value * d + r;
        }
        let width = packed_bit_len(d, n);
        for i in (0..width).rev() {
            w.push_bit(value.bit(i));
        }
    }
    debug_assert_eq!(w.len, packed_bit_len(d, n));
    Bitstream::from_parts(w.bytes, n, d)
}

/// Inverse of [`pack`].
pub fn unpack(stream: &Bitstream) -> Result<Walk> {
    let relative = read_big_radix_or_fields(stream)?;
    Walk::from_relative(&relative, stream.d)
}

fn read_big_radix_or_fields(stream: &Bitstream) -> Result<Vec<u64>> {
    let mut reader = BitReader::new(&stream.bytes, stream.bit_len);
    if stream.d.is_power_of_two() {
        let width = stream.d.trailing_zeros();
        (0..stream.n).map(|_| reader.read_bits(width)).collect()
    } else {
        read_digits(&mut reader, stream.d, stream.n, stream.bit_len)
    }
}

fn read_digits(reader: &mut BitReader<'_>, d: u64, n: usize, width: u64) -> Result<Vec<u64>> {
    let mut value = BigUint::from(0u32);
    for _ in 0..width {
        value = (value << 1u32) + reader.read_bits(1)?;
    }
    if value >= BigUint::from(d).pow(n as u32) {
        return Err(Error::MalformedBitstream(format!(
            "packed value exceeds d^n for d={d}, n={n}"
        )));
    }
    let mut digits = vec![0u64; n];
    for slot in digits.iter_mut().rev() {
        let r = &value % d;
        *slot = r.iter_u64_digits().next().unwrap_or(0);
        value /= d;
    }
    Ok(digits)
}

enum Feed<'a> {
    Fields {
        reader: BitReader<'a>,
        width: u32,
    },
    Digits {
        digits: std::vec::IntoIter<u64>,
        bit_len: u64,
    },
}

/// Emits the reproduction sequence one symbol per step.
///
/// With a power-of-two `d`, symbol `t` is produced after reading exactly
/// `t·log₂ d` bits ([`SequentialDecoder::bits_consumed`]).
pub struct SequentialDecoder<'a> {
    code: &'a TreeCode,
    feed: Feed<'a>,
    t: usize,
    n: usize,
    parent: u64,
}

impl<'a> SequentialDecoder<'a> {
    pub fn new(code: &'a TreeCode, stream: &'a Bitstream) -> Result<Self> {
        let shape = code.shape();
        if stream.d != shape.d() || stream.n != shape.n() {
            return Err(Error::MalformedBitstream(format!(
                "stream is for d={}, n={} but the code has d={}, n={}",
                stream.d,
                stream.n,
                shape.d(),
                shape.n()
            )));
        }
        let mut reader = BitReader::new(&stream.bytes, stream.bit_len);
        let feed = if stream.d.is_power_of_two() {
            Feed::Fields {
                reader,
                width: stream.d.trailing_zeros(),
            }
        } else {
            let digits = read_digits(&mut reader, stream.d, stream.n, stream.bit_len)?;
            Feed::Digits {
                digits: digits.into_iter(),
                bit_len: stream.bit_len,
            }
        };
        Ok(Self {
            code,
            feed,
            t: 0,
            n: stream.n,
            parent: 0,
        })
    }

    pub fn bits_consumed(&self) -> u64 {
        match &self.feed {
            Feed::Fields { reader, .. } => reader.pos,
            Feed::Digits { bit_len, .. } => *bit_len,
        }
    }
}

impl Iterator for SequentialDecoder<'_> {
    type Item = Result<usize>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.t == self.n {
            return None;
        }
        let r = match &mut self.feed {
            Feed::Fields { reader, width } => match reader.read_bits(*width) {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            },
            Feed::Digits { digits, .. } => digits.next()?,
        };
        self.t += 1;
        self.parent = self.parent * self.code.shape().d() + r;
        Some(Ok(self.code.symbol(self.t, self.parent)))
    }
}

/// Serializes a stream with its 24-byte header:
/// magic `DPTC`, `d` (u32), `n` (u64), `master_seed` (u64), all big-endian.
pub fn encode_file(stream: &Bitstream, master_seed: u64) -> Result<Vec<u8>> {
    let d = u32::try_from(stream.d)
        .map_err(|_| Error::InvalidArgument(format!("d={} does not fit the header", stream.d)))?;
    let mut out = Vec::with_capacity(FILE_HEADER_LEN + stream.bytes.len());
    out.extend_from_slice(&FILE_MAGIC);
    out.extend_from_slice(&d.to_be_bytes());
    out.extend_from_slice(&(stream.n as u64).to_be_bytes());
    out.extend_from_slice(&master_seed.to_be_bytes());
    out.extend_from_slice(&stream.bytes);
    Ok(out)
}

/// Parses [`encode_file`] output into the stream and its master seed.
pub fn decode_file(bytes: &[u8]) -> Result<(Bitstream, u64)> {
    if bytes.len() < FILE_HEADER_LEN {
        return Err(Error::MalformedBitstream("file shorter than header".into()));
    }
    if bytes[..4] != FILE_MAGIC {
        return Err(Error::MalformedBitstream("bad magic".into()));
    }
    let d = u32::from_be_bytes(bytes[4..8].try_into().unwrap()) as u64;
    let n = u64::from_be_bytes(bytes[8..16].try_into().unwrap());
    let seed = u64::from_be_bytes(bytes[16..24].try_into().unwrap());
    if d < 1 || n < 1 || n > u32::MAX as u64 {
        return Err(Error::MalformedBitstream(format!(
            "bad header d={d}, n={n}"
        )));
    }
    let stream = Bitstream::from_parts(bytes[FILE_HEADER_LEN..].to_vec(), n as usize, d)?;
    Ok((stream, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dprm::TreeShape;
    use crate::model::CodingDistribution;
    use proptest::prelude::*;

    #[test]
    fn binary_fields() {
        let w = Walk::from_relative(&[0, 1, 1], 2).unwrap();
        let s = pack(&w, 2).unwrap();
        assert_eq!(s.bit_len(), 3);
        assert_eq!(s.bytes(), &[0b0110_0000]);
        assert_eq!(unpack(&s).unwrap(), w);
    }

    #[test]
    fn ternary_length() {
        // ⌈4 log₂ 3⌉ = ⌈6.34⌉ = 7
        assert_eq!(packed_bit_len(3, 4), 7);
        let w = Walk::from_relative(&[2, 2, 2, 2], 3).unwrap();
        let s = pack(&w, 3).unwrap();
        assert_eq!(s.bit_len(), 7);
        // 80 = 0b1010000
        assert_eq!(s.bytes(), &[0b1010_0000]);
        assert_eq!(unpack(&s).unwrap(), w);
    }

    #[test]
    fn bit_len_matches_float_formula() {
        for d in 1..=12u64 {
            for n in 1..=40usize {
                let exact = packed_bit_len(d, n);
                let float = (n as f64 * (d as f64).log2()).ceil() as u64;
                assert_eq!(exact, float, "d={d} n={n}");
            }
        }
    }

    #[test]
    fn unary_tree_packs_to_nothing() {
        let w = Walk::from_relative(&[0, 0, 0], 1).unwrap();
        let s = pack(&w, 1).unwrap();
        assert_eq!(s.bit_len(), 0);
        assert!(s.bytes().is_empty());
        assert_eq!(unpack(&s).unwrap(), w);
    }

    #[test]
    fn malformed_streams() {
        assert!(Bitstream::from_parts(vec![0, 0], 3, 2).is_err());
        assert!(Bitstream::from_parts(vec![0b0001_0000], 3, 2).is_err());
        // 7 bits of ones = 127 > 3^4 − 1 = 80
        let s = Bitstream::from_parts(vec![0b1111_1110], 4, 3).unwrap();
        assert!(unpack(&s).is_err());
        assert!(decode_file(b"DPTC").is_err());
        assert!(decode_file(&[0u8; 24]).is_err());
    }

    #[test]
    fn file_roundtrip() {
        let w = Walk::from_relative(&[1, 0, 2, 2, 1], 3).unwrap();
        let s = pack(&w, 3).unwrap();
        let bytes = encode_file(&s, 0xdead_beef).unwrap();
        assert_eq!(bytes.len(), FILE_HEADER_LEN + 1);
        assert_eq!(&bytes[..4], b"DPTC");
        let (back, seed) = decode_file(&bytes).unwrap();
        assert_eq!(back, s);
        assert_eq!(seed, 0xdead_beef);
        // truncation
        assert!(decode_file(&bytes[..FILE_HEADER_LEN]).is_err());
    }

    #[test]
    fn decoder_is_incremental_for_power_of_two() {
        let shape = TreeShape::new(4, 6).unwrap();
        let code = TreeCode::new(5, CodingDistribution::uniform(3).unwrap(), shape);
        let w = Walk::from_relative(&[3, 1, 0, 2, 2, 1], 4).unwrap();
        let s = pack(&w, 4).unwrap();
        let mut dec = SequentialDecoder::new(&code, &s).unwrap();
        for t in 1..=6 {
            let y = dec.next().unwrap().unwrap();
            assert_eq!(dec.bits_consumed(), 2 * t as u64);
            assert_eq!(y, code.symbol(t, w.steps()[t - 1]));
        }
        assert!(dec.next().is_none());
    }

    #[test]
    fn decoder_rejects_mismatched_code() {
        let code = TreeCode::new(
            5,
            CodingDistribution::uniform(2).unwrap(),
            TreeShape::new(2, 4).unwrap(),
        );
        let s = pack(&Walk::from_relative(&[1, 1, 0], 2).unwrap(), 2).unwrap();
        assert!(SequentialDecoder::new(&code, &s).is_err());
    }

    fn walk_strategy() -> impl Strategy<Value = (u64, Vec<u64>)> {
        // the absolute leaf index d^n − 1 must fit in a u64
        prop::sample::select(vec![2u64, 3, 4, 5, 7, 8]).prop_flat_map(|d| {
            let max_n = (64.0 / (d as f64).log2()).floor() as usize;
            (Just(d), prop::collection::vec(0..d, 1..=max_n.min(64)))
        })
    }

    proptest! {
        #[test]
        fn pack_unpack_is_identity((d, rel) in walk_strategy()) {
            let w = Walk::from_relative(&rel, d).unwrap();
            let s = pack(&w, d).unwrap();
            prop_assert_eq!(s.bit_len(), packed_bit_len(d, rel.len()));
            prop_assert_eq!(unpack(&s).unwrap(), w);
        }
    }
}
