//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by SHA-256 of a master seed and a
//! label path such as `[trial, purpose, replicate]`. Distinct label paths give
//! unrelated streams, so trials and replicates can be generated in any order
//! or on any worker without changing results.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator type handed to every randomized routine in the crate.
pub type StreamRng = ChaCha8Rng;

const DOMAIN_TAG: &[u8] = b"cheapboot/stream/v1";

/// Label for the replicate resampling streams inside COfB.
pub const LABEL_RESAMPLE: u64 = 0x5245_5341;
/// Label for the per-thread exponential weight streams (COnB, online bootstrap).
pub const LABEL_WEIGHTS: u64 = 0x5745_4947;

fn digest(master: u64, labels: &[u64]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN_TAG);
    h.update(master.to_le_bytes());
    // Length prefix keeps [a, b] and [a, b, 0] apart.
    h.update((labels.len() as u64).to_le_bytes());
    for l in labels {
        h.update(l.to_le_bytes());
    }
    let out = h.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&out);
    seed
}

/// Independent stream for the label path `labels` under `master`.
pub fn derive_stream(master: u64, labels: &[u64]) -> StreamRng {
    StreamRng::from_seed(digest(master, labels))
}

/// A 64-bit child seed, for APIs that take a seed rather than a stream.
pub fn derive_seed(master: u64, labels: &[u64]) -> u64 {
    let d = digest(master, labels);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Exp(1) variate by inversion, `-ln U` with `U` uniform on the open unit
/// interval, so the result is finite and strictly positive.
pub fn exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln()
}

/// Standard normal variates by Marsaglia's polar method.
///
/// The method produces pairs; the second value is cached, so a single sampler
/// must be driven by a single stream.
#[derive(Debug, Clone, Default)]
pub struct GaussianSampler {
    spare: Option<f64>,
}

impl GaussianSampler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * rng.random::<f64>() - 1.0;
            let v = 2.0 * rng.random::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}
