//! SplitMix64, the single source of randomness for every seeded operation.

use rand::RngCore;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng64 {
    state: u64,
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Rng64 { state: seed }
    }

    /// Independent stream `index` derived from a base seed.
    pub fn stream(seed: u64, index: u64) -> Self {
        Rng64::new(seed ^ index)
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)`: `next_u64 · 2⁻⁶⁴`.
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        // Scaling the full 64 bits can round up to exactly 1.0; clamp to the
        // largest double below one so the half-open interval holds.
        let x = self.next_u64() as f64 * (1.0 / 18_446_744_073_709_551_616.0);
        if x < 1.0 {
            x
        } else {
            1.0 - f64::EPSILON / 2.0
        }
    }
}

impl RngCore for Rng64 {
    fn next_u32(&mut self) -> u32 {
        (Rng64::next_u64(self) >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        Rng64::next_u64(self)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = Rng64::next_u64(self).to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
