use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{arg, Result};

/// Purpose label for an independent random substream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    Data,
    Split,
    Noise,
    Init,
    Shuffle,
    Mixup,
    Subset,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Data => 0x01,
            Stream::Split => 0x02,
            Stream::Noise => 0x03,
            Stream::Init => 0x04,
            Stream::Shuffle => 0x05,
            Stream::Mixup => 0x06,
            Stream::Subset => 0x07,
        }
    }
}

/// Reproducible random source.
///
/// Two generators built from the same seed produce the same draws. Derived
/// generators ([`SeededRng::substream`], [`SeededRng::child`]) depend only on
/// the parent's seed, never on how many values the parent already produced.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for one purpose.
    pub fn substream(&self, stream: Stream) -> SeededRng {
        SeededRng::new(mix(self.seed, stream.tag()))
    }

    /// Independent generator for the `index`-th repeat, grid cell or shard.
    pub fn child(&self, index: u64) -> SeededRng {
        SeededRng::new(mix(self.seed, 0x100 + index))
    }
}

/// splitmix64 finaliser over the pair.
fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// Draws from Gamma(shape, 1).
///
/// Marsaglia and Tsang's squeeze method for `shape >= 1`; smaller shapes use
/// `Gamma(shape + 1) · U^(1/shape)`.
pub fn gamma_sample<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> Result<f64> {
    if !(shape > 0.0) || !shape.is_finite() {
        return arg(format!("gamma shape must be positive, got {shape}"));
    }
    if shape < 1.0 {
        let boosted = marsaglia_tsang(rng, shape + 1.0);
        // open interval so the power never sees 0
        let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        return Ok(boosted * u.powf(1.0 / shape));
    }
    Ok(marsaglia_tsang(rng, shape))
}

fn marsaglia_tsang<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.gen();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u > 0.0 && u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Draws λ ~ Beta(α, α) as `g1 / (g1 + g2)` with two Gamma(α, 1) draws.
///
/// `α = 0` returns exactly 1 without consuming randomness: mixing with that
/// weight leaves a sample unchanged.
pub fn beta_sample<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> Result<f64> {
    if alpha < 0.0 || !alpha.is_finite() {
        return arg(format!("beta parameter must be >= 0, got {alpha}"));
    }
    if alpha == 0.0 {
        return Ok(1.0);
    }
    let g1 = gamma_sample(rng, alpha)?;
    let g2 = gamma_sample(rng, alpha)?;
    let total = g1 + g2;
    if total == 0.0 {
        // both underflowed; only reachable for tiny α
        return Ok(if rng.gen::<bool>() { 1.0 } else { 0.0 });
    }
    Ok((g1 / total).clamp(0.0, 1.0))
}
