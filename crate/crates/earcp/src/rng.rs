//! Deterministic random number generation.
//!
//! Every random draw in this crate comes from SplitMix64 streams keyed by
//! `(seed, step, lane)`. The derivation is fixed so that independent
//! implementations in other languages can reproduce the exact bit sequence:
//!
//! 1. `mix(x)` is the SplitMix64 output finalizer
//!    (`x ^= x >> 30; x *= 0xBF58476D1CE4E5B9; x ^= x >> 27;
//!      x *= 0x94D049BB133111EB; x ^= x >> 31`).
//! 2. The stream state starts at
//!    `mix(mix(seed + GOLDEN + step) + GOLDEN + lane)` where
//!    `GOLDEN = 0x9E3779B97F4A7C15` and all arithmetic wraps mod 2^64.
//! 3. Successive outputs follow the standard SplitMix64 step:
//!    `state += GOLDEN; return mix(state)`.
//!
//! Uniform floats take the top 53 bits: `(next() >> 11) * 2^-53`, giving a
//! value in `[0, 1)`. Subset sampling uses a Fisher-Yates prefix shuffle with
//! `r = j + next() % (n - j)`; the swap table is kept sparse so drawing `k`
//! of `n` items costs O(k) rather than O(n), while selecting exactly the same
//! items as the array form.

use std::collections::HashMap;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the stream state for a `(seed, step, lane)` triple.
#[inline]
pub fn stream_seed(seed: u64, step: u64, lane: u64) -> u64 {
    let a = mix(seed.wrapping_add(GOLDEN).wrapping_add(step));
    mix(a.wrapping_add(GOLDEN).wrapping_add(lane))
}

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    /// Starts a stream at the given state.
    pub fn new(state: u64) -> Self {
        SplitMix64 { state }
    }

    /// Starts the stream for a `(seed, step, lane)` triple.
    pub fn keyed(seed: u64, step: u64, lane: u64) -> Self {
        SplitMix64::new(stream_seed(seed, step, lane))
    }

    /// Next raw 64-bit output.
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform draw in `[0, 1)` from the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `{0, 1, ..., n-1}`. `n` must be positive.
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// Standard normal draw (Box-Muller, using two uniform draws).
    pub fn next_normal(&mut self) -> f64 {
        // Shift the first uniform into (0, 1] so the log is finite.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Draws `k` distinct values from `{0, 1, ..., n-1}` via a Fisher-Yates
    /// prefix shuffle evaluated lazily, in O(k) time and space.
    pub fn sample_prefix(&mut self, n: usize, k: usize) -> Vec<usize> {
        debug_assert!(k <= n);
        let mut swapped: HashMap<usize, usize> = HashMap::with_capacity(2 * k);
        let mut picked = Vec::with_capacity(k);
        for j in 0..k {
            let r = j + self.next_below((n - j) as u64) as usize;
            let vr = *swapped.get(&r).unwrap_or(&r);
            let vj = *swapped.get(&j).unwrap_or(&j);
            picked.push(vr);
            swapped.insert(r, vj);
        }
        picked
    }
}
