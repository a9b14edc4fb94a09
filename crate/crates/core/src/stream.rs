//! Counter-based deterministic random streams.
//!
//! Every Poisson clock in the graphical construction draws from its own
//! substream, keyed by (master seed, stream kind, entity coordinates). Two
//! timelines that share a key produce identical marks regardless of what
//! else lives in the box, which is what lets couplings and restrictions
//! share randomness exactly. The generator is splitmix64; output is stable
//! across platforms and releases.

/// One independent pseudo-random sequence.
#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
}

const GOLDEN: u64 = 0x9E3779B97F4A7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Fold a word into a running key.
fn absorb(h: u64, w: u64) -> u64 {
    mix64(h ^ w.wrapping_mul(0xA0761D6478BD642F))
}

impl Stream {
    /// Stream keyed by a master seed, a small tag, and entity coordinates.
    pub fn keyed(seed: u64, tag: u64, words: &[i64]) -> Self {
        let mut h = mix64(seed ^ GOLDEN);
        h = absorb(h, tag.wrapping_add(0xE7037ED1A0B428DB));
        for &w in words {
            h = absorb(h, w as u64);
        }
        Stream { state: h }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform sample in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Exponential sample with the given rate (inverse CDF).
    pub fn next_exp(&mut self, rate: f64) -> f64 {
        -(-self.next_f64()).ln_1p() / rate
    }
}

/// Single deterministic uniform for a keyed entity, without stream state.
pub fn keyed_uniform(seed: u64, tag: u64, words: &[i64]) -> f64 {
    Stream::keyed(seed, tag, words).next_f64()
}

/// Derive a child seed from a parent seed and labels; used to hand disjoint
/// master seeds to nested Monte Carlo layers.
pub fn derive_seed(seed: u64, words: &[i64]) -> u64 {
    let mut h = mix64(seed ^ 0xD1342543DE82EF95);
    for &w in words {
        h = absorb(h, w as u64);
    }
    h
}
