//! Portable deterministic randomness and hashing.
//!
//! Bit-for-bit definitions, reproducible in any language:
//!
//! * [`SplitMix64`]: state += 0x9E3779B97F4A7C15, then the usual
//!   xor-shift/multiply finalizer (0xBF58476D1CE4E5B9, 0x94D049BB133111EB).
//! * [`SplitMix64::next_f64`]: top 53 bits scaled by 2^-53, in `[0, 1)`.
//! * [`SplitMix64::next_gaussian`]: Box–Muller, cosine branch only. Draws
//!   `u1` then `u2`, returns `sqrt(-2 ln(1 - u1)) * cos(2π u2)`.
//! * [`fnv1a64`]: FNV-1a, offset 0xcbf29ce484222325, prime 0x100000001b3.

use std::f64::consts::TAU;

pub const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
pub const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Unit separator used between hashed key components.
pub const KEY_SEPARATOR: u8 = 0x1f;

/// Incremental FNV-1a 64-bit hasher.
#[derive(Debug, Clone, Copy)]
pub struct Fnv1a64(u64);

impl Default for Fnv1a64 {
    fn default() -> Self {
        Self(FNV_OFFSET)
    }
}

impl Fnv1a64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv1a64::new();
    h.update(bytes);
    h.finish()
}

/// Hashes string parts joined by `\x1f`.
pub fn hash_key(parts: &[&str]) -> u64 {
    let mut h = Fnv1a64::new();
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            h.update(&[KEY_SEPARATOR]);
        }
        h.update(part.as_bytes());
    }
    h.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in `[0, bound)` by plain modulo reduction.
    pub fn next_index(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        (self.next_u64() % bound as u64) as usize
    }

    pub fn next_gaussian(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
    }

    /// Fisher–Yates, walking `i` from the back; `j = next_u64 % (i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_index(i + 1);
            items.swap(i, j);
        }
    }
}
