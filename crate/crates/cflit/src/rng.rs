//! Deterministic random number generation.
//!
//! Monte Carlo trials must be independent, replayable and safe to run in
//! parallel, so everything here is counter-based: a draw is a pure function
//! of a 64-bit key, and keys are derived by mixing a base seed with integer
//! lane identifiers (trial index, device index, subcarrier, coherence block,
//! ...). No global state, no locks.
//!
//! The mixer is SplitMix64, which is well studied and passes the usual
//! statistical batteries; it is more than adequate for the sample sizes used
//! here.

/// SplitMix64 finalizer: maps a 64-bit input to a well-mixed 64-bit output.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a list of lane identifiers.
///
/// The derivation is a chained mix, so `derive_seed(s, &[a, b])` and
/// `derive_seed(s, &[b, a])` differ, and distinct lanes get independent
/// streams.
pub fn derive_seed(base: u64, lanes: &[u64]) -> u64 {
    let mut state = mix64(base ^ 0x6a09_e667_f3bc_c908);
    for &lane in lanes {
        state = mix64(state ^ mix64(lane.wrapping_add(0x1f83_d9ab_fb41_bd6b)));
    }
    state
}

/// A small sequential PRNG over the SplitMix64 stream.
///
/// Used wherever draws are consumed in order (dataset generation, local SGD
/// shuffles, noise vectors). Construct one per logical stream with a seed
/// from [`derive_seed`].
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream { state: mix64(seed) }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in the open interval (0, 1].
    #[inline]
    pub fn next_unit(&mut self) -> f64 {
        // 53 random bits; +1 keeps the value strictly positive so logarithms
        // are always finite.
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform draw in [0, 1).
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard normal draw (Box-Muller, one of the pair discarded).
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_unit();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Exponential(1) draw.
    #[inline]
    pub fn next_exp(&mut self) -> f64 {
        -self.next_unit().ln()
    }

    /// Uniform integer in [0, n).
    #[inline]
    pub fn next_below(&mut self, n: usize) -> usize {
        // Modulo bias is negligible for n << 2^64.
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}

/// A standard circularly-symmetric complex Gaussian CN(0, 1) sample for a
/// given key, as (re, im). The squared modulus is Exponential(1).
#[inline]
pub fn complex_gaussian(key: u64) -> (f64, f64) {
    let a = mix64(key ^ 0xd1b5_4a32_d192_ed03);
    let b = mix64(key ^ 0xaef1_7502_b3de_f2a1);
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0);
    let u2 = (b >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0);
    let r = (-u1.ln()).sqrt();
    let phase = std::f64::consts::TAU * u2;
    (r * phase.cos(), r * phase.sin())
}
