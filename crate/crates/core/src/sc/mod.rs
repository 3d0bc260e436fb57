//! Stochastic-computing primitives: Bernoulli encoding driven by LFSR draws,
//! AND-gate multiplication, and count-to-Bernoulli re-encoding.

mod lfsr;
mod seed;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsaError};

pub use lfsr::{lfsr_next, LfsrRng, LFSR_PERIOD};
pub use seed::{derive_seed, mix64, EncoderModule, FALLBACK_SEED};

/// Resolution of every comparator threshold: draws are 16-bit words.
pub const DRAW_SCALE: u32 = 1 << 16;

/// Largest denominator accepted by [`bernoulli_from_count`].
pub const MAX_COUNT_DENOM: u32 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(SsaError::InvalidProbability(value));
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Comparator threshold `round(p * 2^16)`, in `0..=2^16`.
    #[inline]
    pub fn threshold(self) -> u32 {
        (self.0 * DRAW_SCALE as f64).round() as u32
    }
}

/// Linear map from `[lo, hi]` onto `[0, 1]`, saturating outside the range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncoderRange {
    lo: f64,
    hi: f64,
}

impl EncoderRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SsaError::InvalidRange { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub const fn unit() -> Self {
        Self { lo: 0.0, hi: 1.0 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn norm(&self, x: f64) -> Probability {
        let p = ((x - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        Probability(if p.is_nan() { 0.0 } else { p })
    }
}

impl Default for EncoderRange {
    fn default() -> Self {
        Self::unit()
    }
}

/// Emits 1 with probability `p`: one draw compared against `round(p * 2^16)`.
#[inline]
pub fn bernoulli_from_probability(p: Probability, rng: &mut LfsrRng) -> bool {
    (rng.next_word() as u32) < p.threshold()
}

/// Emits 1 with probability `norm(x)`. Consumes exactly one draw.
#[inline]
pub fn bernoulli_encode(x: f64, range: &EncoderRange, rng: &mut LfsrRng) -> bool {
    bernoulli_from_probability(range.norm(x), rng)
}

#[inline]
pub fn sc_and(a: bool, b: bool) -> bool {
    a & b
}

/// Checks that `denom` is a power of two no larger than 2^16.
pub fn check_count_denom(denom: u32) -> Result<()> {
    if denom == 0 || !denom.is_power_of_two() || denom > MAX_COUNT_DENOM {
        return Err(SsaError::NotPowerOfTwo {
            what: "count denominator",
            value: denom as usize,
            min: 1,
            max: MAX_COUNT_DENOM as usize,
        });
    }
    Ok(())
}

/// Emits 1 with probability exactly `count / denom` using one draw:
/// `(draw mod denom) < count`. `denom` must be a power of two.
#[inline]
pub fn bernoulli_from_count(count: u32, denom: u32, rng: &mut LfsrRng) -> Result<bool> {
    check_count_denom(denom)?;
    if count > denom {
        return Err(SsaError::CounterOverflow { count, denom });
    }
    let draw = rng.next_word() as u32;
    Ok((draw & (denom - 1)) < count)
}

/// General-denominator variant: compares one draw against
/// `round(count * 2^16 / denom)`. Not exact for non-power-of-two `denom`.
#[inline]
pub fn bernoulli_from_ratio(count: u32, denom: u32, rng: &mut LfsrRng) -> Result<bool> {
    if denom == 0 {
        return Err(SsaError::Config("denominator must be positive".into()));
    }
    if count > denom {
        return Err(SsaError::CounterOverflow { count, denom });
    }
    let threshold = ((count as u64 * DRAW_SCALE as u64 + denom as u64 / 2) / denom as u64) as u32;
    Ok((rng.next_word() as u32) < threshold)
}

/// A time-ordered spike train of fixed length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitStream {
    bits: Vec<u8>,
}

impl BitStream {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(idx) = bits.iter().position(|&b| b > 1) {
            return Err(SsaError::NonBinary { row: 0, col: idx });
        }
        Ok(Self { bits })
    }

    /// Encodes `x` for `len` steps.
    pub fn encode(x: f64, range: &EncoderRange, rng: &mut LfsrRng, len: usize) -> Self {
        let bits = (0..len)
            .map(|_| bernoulli_encode(x, range, rng) as u8)
            .collect();
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Empirical firing rate; 0 for an empty stream.
    pub fn rate(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.ones() as f64 / self.bits.len() as f64
        }
    }

    /// Bitwise AND of two equal-length streams.
    pub fn and(&self, other: &BitStream) -> Result<BitStream> {
        if self.len() != other.len() {
            return Err(SsaError::DimensionMismatch {
                context: "BitStream::and",
                expected: (1, self.len()),
                actual: (1, other.len()),
            });
        }
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| sc_and(a != 0, b != 0) as u8)
            .collect();
        Ok(BitStream { bits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u16) -> LfsrRng {
        LfsrRng::new(seed).unwrap()
    }

    #[test]
    fn probability_and_range_validation() {
        assert!(Probability::new(1.0).is_ok());
        assert!(Probability::new(-0.01).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert!(EncoderRange::new(1.0, 1.0).is_err());
        assert!(EncoderRange::new(2.0, 1.0).is_err());
        let r = EncoderRange::new(-2.0, 2.0).unwrap();
        assert_eq!(r.norm(0.0).value(), 0.5);
        assert_eq!(r.norm(10.0).value(), 1.0);
        assert_eq!(r.norm(-10.0).value(), 0.0);
    }

    #[test]
    fn encode_extremes_are_deterministic() {
        let range = EncoderRange::new(-1.0, 3.0).unwrap();
        let mut r = rng(0xBEEF);
        for _ in 0..70_000 {
            assert!(bernoulli_encode(3.0, &range, &mut r));
            assert!(!bernoulli_encode(-1.0, &range, &mut r));
            // clamped
            assert!(bernoulli_encode(9.0, &range, &mut r));
        }
    }

    #[test]
    fn encode_midpoint_rate() {
        let range = EncoderRange::new(0.0, 2.0).unwrap();
        let t = 1usize << 16;
        let s = BitStream::encode(1.0, &range, &mut rng(0x1234), t);
        let bound = 3.0 * (0.25 / t as f64).sqrt();
        assert!((s.rate() - 0.5).abs() <= bound, "rate {}", s.rate());
    }

    #[test]
    fn encode_consumes_one_draw() {
        let mut a = rng(0x0F0F);
        let mut b = a;
        bernoulli_encode(0.3, &EncoderRange::unit(), &mut a);
        b.next_word();
        assert_eq!(a, b);
    }

    #[test]
    fn and_truth_table() {
        assert!(sc_and(true, true));
        assert!(!sc_and(true, false));
        assert!(!sc_and(false, true));
        assert!(!sc_and(false, false));
    }

    #[test]
    fn and_with_certain_stream_is_identity() {
        let unit = EncoderRange::unit();
        let a = BitStream::encode(1.0, &unit, &mut rng(11), 4096);
        let b = BitStream::encode(0.37, &unit, &mut rng(12), 4096);
        assert_eq!(a.and(&b).unwrap(), b);
    }

    #[test]
    fn and_of_halves_is_quarter() {
        let unit = EncoderRange::unit();
        let t = 1usize << 16;
        let a = BitStream::encode(0.5, &unit, &mut rng(derive_seed(1, EncoderModule::Auxiliary, 0, 0)), t);
        let b = BitStream::encode(0.5, &unit, &mut rng(derive_seed(1, EncoderModule::Auxiliary, 0, 1)), t);
        let rate = a.and(&b).unwrap().rate();
        let bound = 3.0 * (0.25 * 0.75 / t as f64).sqrt();
        assert!((rate - 0.25).abs() <= bound, "rate {rate}");
    }

    #[test]
    fn from_count_edges_and_errors() {
        let mut r = rng(0x5555);
        for _ in 0..1000 {
            assert!(bernoulli_from_count(16, 16, &mut r).unwrap());
            assert!(!bernoulli_from_count(0, 16, &mut r).unwrap());
        }
        assert_eq!(
            bernoulli_from_count(17, 16, &mut r),
            Err(SsaError::CounterOverflow { count: 17, denom: 16 })
        );
        assert!(matches!(
            bernoulli_from_count(1, 12, &mut r),
            Err(SsaError::NotPowerOfTwo { .. })
        ));
        assert!(bernoulli_from_count(1, 1 << 17, &mut r).is_err());
        assert!(bernoulli_from_count(1, 0, &mut r).is_err());
    }

    #[test]
    fn from_count_half_rate() {
        let mut r = rng(0x2468);
        let t = 1u32 << 16;
        let ones = (0..t)
            .filter(|_| bernoulli_from_count(64, 128, &mut r).unwrap())
            .count();
        let rate = ones as f64 / t as f64;
        assert!((rate - 0.5).abs() <= 3.0 * (0.25 / t as f64).sqrt());
    }

    #[test]
    fn from_count_exact_over_full_period() {
        for denom in [1u32, 2, 4, 8, 16, 32, 64, 128, 256] {
            for count in 0..=denom {
                let mut r = rng(0x3C3C);
                let ones = (0..LFSR_PERIOD)
                    .filter(|_| bernoulli_from_count(count, denom, &mut r).unwrap())
                    .count() as f64;
                let ideal = count as f64 * LFSR_PERIOD as f64 / denom as f64;
                assert!(
                    (ones - ideal).abs() <= 1.0,
                    "count={count} denom={denom}: {ones} vs {ideal}"
                );
            }
        }
    }

    #[test]
    fn ratio_variant_matches_count_for_powers_of_two_extremes() {
        let mut r = rng(0x1111);
        for _ in 0..1000 {
            assert!(bernoulli_from_ratio(3, 3, &mut r).unwrap());
            assert!(!bernoulli_from_ratio(0, 3, &mut r).unwrap());
        }
        assert!(bernoulli_from_ratio(4, 3, &mut r).is_err());
    }
}
