//! Seedable random source used everywhere randomness is needed.
//!
//! The generator is xoshiro256++ (Blackman & Vigna), seeded through
//! SplitMix64 so that any 64-bit seed, including 0, produces a
//! well-mixed state. Both algorithms are fixed here by construction:
//! the integer stream for a given seed never changes, which is what
//! makes channel noise and training runs replayable.
//!
//! Gaussian variates come from the Box-Muller transform. The integer
//! stream is bit-exact on every platform; the float outputs are
//! bit-exact per platform (they go through `ln`/`cos` from the system
//! libm).

/// xoshiro256++ generator with SplitMix64 seeding.
#[derive(Debug, Clone)]
pub struct Rng64 {
    state: [u64; 4],
    /// Cached second output of the last Box-Muller pair.
    spare_gaussian: Option<f64>,
}

/// One step of SplitMix64; used for seeding and for seed derivation.
#[inline]
pub fn splitmix64(seed: &mut u64) -> u64 {
    *seed = seed.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *seed;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        let mut s = seed;
        let state = [
            splitmix64(&mut s),
            splitmix64(&mut s),
            splitmix64(&mut s),
            splitmix64(&mut s),
        ];
        Rng64 {
            state,
            spare_gaussian: None,
        }
    }

    /// Next 64 uniformly random bits.
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1): 53 random mantissa bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). `n` must be nonzero.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Rejection sampling on the top bits keeps the draw unbiased.
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Standard normal via Box-Muller; pairs are cached.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare_gaussian.take() {
            return z;
        }
        // u1 in (0, 1] so the log is finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_gaussian = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Fisher-Yates shuffle of `perm` in place.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Derives a worker seed from a master seed and a role tag.
///
/// The mix is a fixed SplitMix64 chain over the inputs, so the mapping
/// is identical on every platform and every run.
pub fn derive_seed(master: u64, tag: &str, value_bits: u64, index: u64) -> u64 {
    let mut acc = master;
    let _ = splitmix64(&mut acc);
    for &b in tag.as_bytes() {
        acc ^= b as u64;
        let _ = splitmix64(&mut acc);
    }
    acc ^= value_bits;
    let _ = splitmix64(&mut acc);
    acc ^= index;
    splitmix64(&mut acc)
}
