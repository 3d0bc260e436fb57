//! Deterministic per-encoder seed derivation.
//!
//! Every Bernoulli encoder owns one [`LfsrRng`](super::LfsrRng). Its 16-bit
//! seed is derived from `(global_seed, module, row, col)`:
//!
//! ```text
//! key  = (module as u64) << 56 | (row as u64 & 0x0FFF_FFFF) << 28 | (col as u64 & 0x0FFF_FFFF)
//! z    = mix64(global_seed.wrapping_add(mix64(key)))
//! seed = (z ^ z >> 16 ^ z >> 32 ^ z >> 48) as u16, replaced by 0xACE1 if zero
//!
//! mix64(z):                       // SplitMix64 output function
//!   z = z + 0x9E3779B97F4A7C15    (wrapping)
//!   z = (z ^ z >> 30) * 0xBF58476D1CE4E5B9   (wrapping)
//!   z = (z ^ z >> 27) * 0x94D049BB133111EB   (wrapping)
//!   z ^ z >> 31
//! ```

/// Encoder families. The discriminant is the `module` field of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum EncoderModule {
    /// Input encoders turning X into X^t, indexed by (token, feature).
    Input = 0,
    /// Attention-score encoders, indexed by (i, j).
    Score = 1,
    /// Attention-output encoders, one per row: (i, 0).
    Output = 2,
    /// Independent-input Q encoders.
    IndependentQ = 3,
    /// Independent-input K encoders.
    IndependentK = 4,
    /// Independent-input V encoders.
    IndependentV = 5,
    /// Free-standing streams used by tests and verification.
    Auxiliary = 15,
}

pub const FALLBACK_SEED: u16 = 0xACE1;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(global_seed: u64, module: EncoderModule, row: usize, col: usize) -> u16 {
    let key = ((module as u64) << 56)
        | ((row as u64 & 0x0FFF_FFFF) << 28)
        | (col as u64 & 0x0FFF_FFFF);
    let z = mix64(global_seed.wrapping_add(mix64(key)));
    let folded = (z ^ (z >> 16) ^ (z >> 32) ^ (z >> 48)) as u16;
    if folded == 0 {
        FALLBACK_SEED
    } else {
        folded
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix64_reference_values() {
        // SplitMix64 stream seeded with 0 begins with these outputs.
        assert_eq!(mix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(
            mix64(0x9E37_79B9_7F4A_7C15),
            0x6E78_9E6A_A1B9_65F4
        );
    }

    #[test]
    fn derive_seed_reference_values() {
        // Computed by a standalone script following the documented formula.
        assert_eq!(derive_seed(42, EncoderModule::Score, 0, 1), 0x8CA6);
        assert_eq!(derive_seed(0, EncoderModule::Input, 0, 0), 0x495F);
        assert_eq!(derive_seed(7, EncoderModule::Output, 3, 0), 0xC9AB);
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = derive_seed(42, EncoderModule::Score, 0, 1);
        assert_eq!(a, derive_seed(42, EncoderModule::Score, 0, 1));
        assert_ne!(a, derive_seed(42, EncoderModule::Score, 1, 0));
        assert_ne!(a, derive_seed(43, EncoderModule::Score, 0, 1));
        assert_ne!(a, derive_seed(42, EncoderModule::Output, 0, 1));
    }
}
