//! Binary range coder with 16-bit probabilities.
//!
//! 32-bit range, 64-bit `low` accumulator, byte-wise renormalization
//! whenever the range drops below `2^24`. Carries out of `low` are resolved
//! through a pending byte plus a run of pending `0xFF` bytes. Coding uses
//! integer arithmetic only, so payloads are identical on every platform.
//!
//! A symbol with probability `p` of being 1 splits the range as
//! `r1 = floor(range * p / 65536)` clamped to `[1, range - 1]`; a 1 takes
//! the lower `r1` part of the interval, a 0 the rest.
//!
//! The very first byte the carry logic produces is always zero and is not
//! written. The decoder therefore primes itself with four bytes, and reads
//! exactly as many bytes as the encoder wrote.

use crate::model::Probability;
use crate::{Error, Result};

const TOP: u32 = 1 << 24;

#[inline]
fn split(range: u32, p: Probability) -> u32 {
    let r1 = ((range as u64 * p.quantized() as u64) >> 16) as u32;
    r1.clamp(1, range - 1)
}

#[derive(Debug, Clone)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    skip_first: bool,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            cache: 0,
            pending: 1,
            skip_first: true,
            out: Vec::new(),
        }
    }

    pub fn encode(&mut self, bit: bool, p: Probability) {
        let r1 = split(self.range, p);
        if bit {
            self.range = r1;
        } else {
            self.low += r1 as u64;
            self.range -= r1;
        }
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    fn emit(&mut self, byte: u8) {
        if self.skip_first {
            debug_assert_eq!(byte, 0);
            self.skip_first = false;
        } else {
            self.out.push(byte);
        }
    }

    fn shift_low(&mut self) {
        if self.low < 0xFF00_0000 || self.low >= 1 << 32 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            while self.pending > 0 {
                self.emit(byte.wrapping_add(carry));
                byte = 0xFF;
                self.pending -= 1;
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.pending += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    /// Bytes written so far (excluding pending bytes).
    pub fn bytes_written(&self) -> usize {
        self.out.len()
    }

    /// Flushes the final state; the result is the complete payload.
    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

#[derive(Debug, Clone)]
pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u32,
    range: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        let mut d = RangeDecoder {
            data,
            pos: 0,
            code: 0,
            range: u32::MAX,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next_byte()? as u32;
        }
        Ok(d)
    }

    fn next_byte(&mut self) -> Result<u8> {
        let b = *self.data.get(self.pos).ok_or_else(|| {
            Error::Corrupt(format!(
                "range coder payload exhausted after {} bytes",
                self.pos
            ))
        })?;
        self.pos += 1;
        Ok(b)
    }

    pub fn decode(&mut self, p: Probability) -> Result<bool> {
        let r1 = split(self.range, p);
        let bit = self.code < r1;
        if bit {
            self.range = r1;
        } else {
            self.code -= r1;
            self.range -= r1;
        }
        while self.range < TOP {
            self.range <<= 8;
            self.code = (self.code << 8) | self.next_byte()? as u32;
        }
        Ok(bit)
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }
}

/// Encodes a whole sequence.
pub fn encode_all(bits: &[bool], probs: &[Probability]) -> Vec<u8> {
    assert_eq!(bits.len(), probs.len());
    let mut enc = RangeEncoder::new();
    for (&b, &p) in bits.iter().zip(probs) {
        enc.encode(b, p);
    }
    enc.finish()
}

/// Decodes `probs.len()` symbols.
pub fn decode_all(payload: &[u8], probs: &[Probability]) -> Result<Vec<bool>> {
    let mut dec = RangeDecoder::new(payload)?;
    probs.iter().map(|&p| dec.decode(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eight_symbols_at_half() {
        let bits = [true, false, false, true, true, true, false, true];
        let probs = [Probability::HALF; 8];
        let payload = encode_all(&bits, &probs);
        assert!(payload.len() <= 6, "{} bytes", payload.len());
        assert_eq!(decode_all(&payload, &probs).unwrap(), bits);
    }

    #[test]
    fn empty_message() {
        let payload = encode_all(&[], &[]);
        assert!(payload.len() <= 8);
        assert_eq!(decode_all(&payload, &[]).unwrap(), Vec::<bool>::new());
    }

    #[test]
    fn near_certain_symbol() {
        let payload = encode_all(&[true], &[Probability::MAX]);
        assert_eq!(
            decode_all(&payload, &[Probability::MAX]).unwrap(),
            vec![true]
        );
        let payload = encode_all(&[false], &[Probability::MAX]);
        assert_eq!(
            decode_all(&payload, &[Probability::MAX]).unwrap(),
            vec![false]
        );
    }

    #[test]
    fn exhausted_payload_is_corrupt() {
        let probs = [Probability::from_p1(0.01); 64];
        let bits = [true; 64];
        let payload = encode_all(&bits, &probs);
        let err = decode_all(&payload[..payload.len() - 2], &probs).unwrap_err();
        assert!(matches!(err, Error::Corrupt(_)));
    }

    #[test]
    fn decoder_consumes_every_byte() {
        let probs: Vec<_> = (0..500)
            .map(|i| Probability::from_quantized(i * 131 % 65536))
            .collect();
        let bits: Vec<bool> = (0..500).map(|i| i % 7 < 3).collect();
        let payload = encode_all(&bits, &probs);
        let mut dec = RangeDecoder::new(&payload).unwrap();
        for (&b, &p) in bits.iter().zip(&probs) {
            assert_eq!(dec.decode(p).unwrap(), b);
        }
        assert_eq!(dec.remaining(), 0);
    }

    #[test]
    fn carry_propagation_through_ff_runs() {
        // Long runs of 0-symbols at extreme probabilities push `low` toward
        // the top of the interval and exercise the pending-0xFF path.
        let mut bits = Vec::new();
        let mut probs = Vec::new();
        for i in 0..20_000u32 {
            bits.push(i % 97 == 0);
            probs.push(Probability::from_quantized(if i % 5 == 0 {
                65535
            } else {
                3
            }));
        }
        let payload = encode_all(&bits, &probs);
        assert_eq!(decode_all(&payload, &probs).unwrap(), bits);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn round_trip(seq in prop::collection::vec((any::<bool>(), 1u32..65536), 0..400)) {
            let bits: Vec<bool> = seq.iter().map(|s| s.0).collect();
            let probs: Vec<Probability> = seq.iter().map(|s| Probability::from_quantized(s.1)).collect();
            let payload = encode_all(&bits, &probs);
            prop_assert_eq!(decode_all(&payload, &probs).unwrap(), bits);
        }
    }
}
