//! Biometric measurement model: a uniform ground-truth vector observed
//! through independent binary symmetric channels at enrollment and probe.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gf2::BitVec;

/// Checks a channel crossover probability lies in `[0, 0.5)`.
pub fn check_noise(p: f64) -> Result<()> {
    if (0.0..0.5).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability {
            value: p,
            range: "[0, 0.5)",
        })
    }
}

/// Length-`n` vector of i.i.d. Bernoulli(0.5) bits.
pub fn sample_ground_truth<R: Rng + ?Sized>(n: usize, rng: &mut R) -> BitVec {
    BitVec::random(n, rng)
}

/// Flips each bit of `x` independently with probability `p`.
pub fn bsc_apply<R: Rng + ?Sized>(x: &BitVec, p: f64, rng: &mut R) -> Result<BitVec> {
    check_noise(p)?;
    let mut out = x.clone();
    if p > 0.0 {
        for i in 0..x.len() {
            if rng.gen_bool(p) {
                out.flip(i);
            }
        }
    }
    Ok(out)
}

/// Crossover of two cascaded BSCs: `p1 (1 - alpha) + (1 - p1) alpha`.
pub fn composite_crossover(p1: f64, alpha: f64) -> f64 {
    p1 * (1.0 - alpha) + (1.0 - p1) * alpha
}

/// One realisation of the ground truth together with the channel
/// parameters of every enrolled system. Systems are indexed from 0.
#[derive(Clone, Debug)]
pub struct BiometricWorld {
    a0: BitVec,
    enroll_noise: Vec<f64>,
    probe_noise: Vec<f64>,
}

impl BiometricWorld {
    pub fn new(a0: BitVec, enroll_noise: Vec<f64>, probe_noise: Vec<f64>) -> Result<Self> {
        if enroll_noise.is_empty() || enroll_noise.len() != probe_noise.len() {
            return Err(Error::InvalidParameter(format!(
                "need one enrollment and one probe noise level per system ({} vs {})",
                enroll_noise.len(),
                probe_noise.len()
            )));
        }
        for &p in enroll_noise.iter().chain(&probe_noise) {
            check_noise(p)?;
        }
        Ok(Self {
            a0,
            enroll_noise,
            probe_noise,
        })
    }

    /// Draws a fresh ground truth and wraps it with the given channels.
    pub fn sample<R: Rng + ?Sized>(
        n: usize,
        enroll_noise: Vec<f64>,
        probe_noise: Vec<f64>,
        rng: &mut R,
    ) -> Result<Self> {
        Self::new(sample_ground_truth(n, rng), enroll_noise, probe_noise)
    }

    pub fn n(&self) -> usize {
        self.a0.len()
    }

    pub fn systems(&self) -> usize {
        self.enroll_noise.len()
    }

    pub fn ground_truth(&self) -> &BitVec {
        &self.a0
    }

    pub fn enroll_noise(&self, i: usize) -> Result<f64> {
        self.enroll_noise
            .get(i)
            .copied()
            .ok_or(Error::InvalidIndex {
                index: i,
                count: self.systems(),
            })
    }

    pub fn probe_noise(&self, j: usize) -> Result<f64> {
        self.probe_noise.get(j).copied().ok_or(Error::InvalidIndex {
            index: j,
            count: self.systems(),
        })
    }

    /// Crossover between enrollment `j` and a legitimate probe for `j`.
    pub fn legitimate_crossover(&self, j: usize) -> Result<f64> {
        Ok(composite_crossover(
            self.enroll_noise(j)?,
            self.probe_noise(j)?,
        ))
    }

    /// One enrollment measurement per system, with independent noise.
    pub fn sample_enrollments<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<BitVec>> {
        self.enroll_noise
            .iter()
            .map(|&p| bsc_apply(&self.a0, p, rng))
            .collect()
    }

    /// A probe measurement for system `j`.
    pub fn sample_probe<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Result<BitVec> {
        bsc_apply(&self.a0, self.probe_noise(j)?, rng)
    }
}

/// Roles that get independent random streams inside one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    World = 1,
    Enrollment = 2,
    Attack = 3,
    Design = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for `(master seed, trial, role)`. Streams for distinct triples
/// are independent, so trials can run in any order or in parallel.
pub fn substream(master: u64, trial: u64, role: StreamRole) -> ChaCha8Rng {
    let key = splitmix64(master ^ splitmix64(role as u64));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(trial);
    rng
}
