//! 16-bit maximal-length Fibonacci LFSR.
//!
//! Feedback polynomial x^16 + x^15 + x^13 + x^4 + 1 (taps 16, 15, 13, 4).
//! The register shifts right; the feedback bit is the XOR of register bits
//! 0, 1, 3 and 12 and enters at bit 15. Each step yields the register value
//! *before* the shift as the 16-bit draw, so a draw is never zero.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsaError};

/// Number of distinct states visited before the sequence repeats.
pub const LFSR_PERIOD: u32 = (1 << 16) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LfsrRng {
    state: u16,
}

impl LfsrRng {
    pub fn new(seed: u16) -> Result<Self> {
        if seed == 0 {
            return Err(SsaError::ZeroSeed);
        }
        Ok(Self { state: seed })
    }

    #[inline]
    pub fn state(&self) -> u16 {
        self.state
    }

    /// Returns the current word and advances the register.
    #[inline]
    pub fn next_word(&mut self) -> u16 {
        let word = self.state;
        let s = self.state;
        let feedback = (s ^ (s >> 1) ^ (s >> 3) ^ (s >> 12)) & 1;
        self.state = (s >> 1) | (feedback << 15);
        word
    }
}

/// Value-semantics form of [`LfsrRng::next_word`].
pub fn lfsr_next(rng: LfsrRng) -> (LfsrRng, u16) {
    let mut next = rng;
    let word = next.next_word();
    (next, word)
}
