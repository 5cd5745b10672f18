//! Seeded samplers for the noise models.
//!
//! Every generator is a ChaCha8 stream keyed by a 64-bit seed, so a given
//! `(seed, stream)` pair always yields the same sequence on every platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal};

use crate::error::{Error, Result};

/// Deterministic generator for `seed`, positioned on substream `stream`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a parent seed with an index into a well-spread child seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Scaled Student's t variates drawn from an existing generator.
pub struct StudentT {
    normal: Normal<f64>,
    chi2: ChiSquared<f64>,
    nu: f64,
    scale: f64,
}

impl StudentT {
    pub fn new(nu: f64, scale: f64) -> Result<Self> {
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::param("nu", "degrees of freedom must be > 0"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param("scale", "must be > 0"));
        }
        let chi2 = ChiSquared::new(nu).map_err(|e| Error::param("nu", e.to_string()))?;
        Ok(Self {
            normal: Normal::new(0.0, 1.0).expect("unit normal"),
            chi2,
            nu,
            scale,
        })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = self.normal.sample(rng);
        let v = self.chi2.sample(rng);
        self.scale * z / (v / self.nu).sqrt()
    }
}

pub fn sample_student_t(nu: f64, scale: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let dist = StudentT::new(nu, scale)?;
    let mut rng = rng_for(seed, 0);
    Ok((0..n).map(|_| dist.draw(&mut rng)).collect())
}

pub fn sample_lognormal(mu_ln: f64, sigma_ln: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(sigma_ln > 0.0) || !sigma_ln.is_finite() {
        return Err(Error::param("sigma_ln", "must be > 0"));
    }
    if !mu_ln.is_finite() {
        return Err(Error::param("mu_ln", "must be finite"));
    }
    let normal =
        Normal::new(mu_ln, sigma_ln).map_err(|e| Error::param("sigma_ln", e.to_string()))?;
    let mut rng = rng_for(seed, 0);
    Ok((0..n).map(|_| normal.sample(&mut rng).exp()).collect())
}
