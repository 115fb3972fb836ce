//! Attack constructors for single- and multi-system compromise scenarios.
//!
//! An attacker never touches an [`EnrollmentRecord`] directly. Records are
//! filtered through a [`CompromiseSet`] into an [`AdversaryView`] holding
//! only the exposed parts, and every constructor works from that view.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{residual_rank, BitMatrix, BitVec, Echelon};
use crate::schemes::{recover_syndrome, EnrollmentRecord, Scheme, SystemParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiometricId {
    /// The noiseless ground truth `A_0`.
    GroundTruth,
    /// The enrolled biometric of system `i` (0-based).
    Enrollment(usize),
}

/// What leaked from one device.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exposure {
    #[serde(default)]
    pub stored: bool,
    #[serde(default)]
    pub key: bool,
}

impl Exposure {
    pub fn fully_compromised(self) -> bool {
        self.stored && self.key
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompromiseSet {
    #[serde(default)]
    pub systems: Vec<Exposure>,
    #[serde(default)]
    pub biometrics: Vec<BiometricId>,
}

impl CompromiseSet {
    /// Nothing exposed on `u` systems.
    pub fn none(u: usize) -> Self {
        Self {
            systems: vec![Exposure::default(); u],
            biometrics: Vec::new(),
        }
    }

    pub fn expose(mut self, system: usize, stored: bool, key: bool) -> Self {
        if self.systems.len() <= system {
            self.systems.resize(system + 1, Exposure::default());
        }
        let e = &mut self.systems[system];
        e.stored |= stored;
        e.key |= key;
        self
    }

    pub fn expose_fully(self, system: usize) -> Self {
        self.expose(system, true, true)
    }

    pub fn expose_biometric(mut self, id: BiometricId) -> Self {
        if !self.biometrics.contains(&id) {
            self.biometrics.push(id);
            self.biometrics.sort();
        }
        self
    }

    pub fn exposure(&self, system: usize) -> Exposure {
        self.systems.get(system).copied().unwrap_or_default()
    }

    pub fn biometric_exposed(&self, id: BiometricId) -> bool {
        self.biometrics.contains(&id)
    }

    /// True when everything exposed here is also exposed in `other`.
    pub fn is_subset_of(&self, other: &CompromiseSet) -> bool {
        let systems_ok = self.systems.iter().enumerate().all(|(i, e)| {
            let o = other.exposure(i);
            (!e.stored || o.stored) && (!e.key || o.key)
        });
        systems_ok && self.biometrics.iter().all(|b| other.biometric_exposed(*b))
    }
}

/// A forged authentication input `(C, J)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Attack {
    pub probe: BitVec,
    pub key: BitVec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttackTag {
    #[serde(rename = "uninformed")]
    Uninformed,
    #[serde(rename = "stored")]
    Stored,
    #[serde(rename = "biometric+key")]
    BiometricAndKey,
    #[serde(rename = "substitute")]
    Substitute,
    #[serde(rename = "rank-linked")]
    RankLinked,
    #[serde(rename = "coset-sampling")]
    CosetSampling,
}

impl AttackTag {
    pub const ALL: [AttackTag; 6] = [
        AttackTag::Uninformed,
        AttackTag::Stored,
        AttackTag::BiometricAndKey,
        AttackTag::Substitute,
        AttackTag::RankLinked,
        AttackTag::CosetSampling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackTag::Uninformed => "uninformed",
            AttackTag::Stored => "stored",
            AttackTag::BiometricAndKey => "biometric+key",
            AttackTag::Substitute => "substitute",
            AttackTag::RankLinked => "rank-linked",
            AttackTag::CosetSampling => "coset-sampling",
        }
    }
}

impl fmt::Display for AttackTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown attack {s:?}")))
    }
}

/// Exposed parts of one device. Keyless devices have a publicly known
/// all-zero key, so `key` is always present for them.
#[derive(Clone, Debug)]
pub struct SystemView {
    pub params: SystemParams,
    pub stored: Option<BitVec>,
    pub key: Option<BitVec>,
}

impl SystemView {
    pub fn fully_compromised(&self) -> bool {
        self.stored.is_some() && self.key.is_some()
    }

    /// `H A_i`, available once both `S_i` and `K_i` are known.
    pub fn enrolled_syndrome(&self) -> Option<Result<BitVec>> {
        match (&self.stored, &self.key) {
            (Some(s), Some(k)) => Some(recover_syndrome(&self.params, s, k)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExposedBiometric {
    pub id: BiometricId,
    /// Enrollment crossover of this biometric relative to `A_0`.
    pub noise: f64,
    pub value: BitVec,
}

/// Everything an attacker holds for one multi-system deployment.
#[derive(Clone, Debug)]
pub struct AdversaryView {
    pub systems: Vec<SystemView>,
    pub biometrics: Vec<ExposedBiometric>,
}

impl AdversaryView {
    /// Filters a deployment through `set`. `enrollments[i]` and
    /// `enroll_noise[i]` belong to system `i`.
    pub fn observe(
        records: &[EnrollmentRecord],
        a0: &BitVec,
        enrollments: &[BitVec],
        enroll_noise: &[f64],
        set: &CompromiseSet,
    ) -> Result<Self> {
        let u = records.len();
        if enrollments.len() != u || enroll_noise.len() != u {
            return Err(Error::DimensionMismatch {
                expected: u,
                found: enrollments.len().min(enroll_noise.len()),
            });
        }
        if set.systems.len() > u {
            return Err(Error::InvalidIndex {
                index: set.systems.len() - 1,
                count: u,
            });
        }
        let systems = records
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let e = set.exposure(i);
                let keyless = !rec.params().keyed;
                SystemView {
                    params: rec.params().clone(),
                    stored: e.stored.then(|| rec.stored().clone()),
                    key: (e.key || keyless).then(|| rec.key().clone()),
                }
            })
            .collect();
        let mut biometrics = Vec::new();
        for &id in &set.biometrics {
            let (noise, value) = match id {
                BiometricId::GroundTruth => (0.0, a0.clone()),
                BiometricId::Enrollment(i) => {
                    if i >= u {
                        return Err(Error::InvalidIndex { index: i, count: u });
                    }
                    (enroll_noise[i], enrollments[i].clone())
                }
            };
            biometrics.push(ExposedBiometric { id, noise, value });
        }
        Ok(Self {
            systems,
            biometrics,
        })
    }

    pub fn system(&self, j: usize) -> Result<&SystemView> {
        self.systems.get(j).ok_or(Error::InvalidIndex {
            index: j,
            count: self.systems.len(),
        })
    }

    pub fn biometric(&self, id: BiometricId) -> Option<&BitVec> {
        self.biometrics
            .iter()
            .find(|b| b.id == id)
            .map(|b| &b.value)
    }

    /// Indices of fully compromised systems other than `target`.
    pub fn fully_compromised(&self, target: usize) -> Vec<usize> {
        (0..self.systems.len())
            .filter(|&i| i != target && self.systems[i].fully_compromised())
            .collect()
    }
}

fn check_len(v: &BitVec, expected: usize) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            found: v.len(),
        })
    }
}

fn key_or_uniform<R: Rng + ?Sized>(
    params: &SystemParams,
    key: Option<&BitVec>,
    rng: &mut R,
) -> Result<BitVec> {
    match key {
        Some(k) => {
            check_len(k, params.key_len())?;
            Ok(k.clone())
        }
        None => Ok(BitVec::random(params.key_len(), rng)),
    }
}

/// `(C, J)` drawn uniformly, independent of every device.
pub fn attack_uninformed<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Attack {
    Attack {
        probe: BitVec::random(params.n(), rng),
        key: BitVec::random(params.key_len(), rng),
    }
}

/// Forces a zero decoding syndrome from the stored data alone.
///
/// Keyed devices: `(0, S)`. Keyless fuzzy commitment: `C = S`. Keyless
/// secure sketch: any `C` with `H C = S`.
pub fn attack_with_stored(params: &SystemParams, stored: &BitVec) -> Result<Attack> {
    check_len(stored, params.stored_len())?;
    let n = params.n();
    let probe = match (params.keyed, params.scheme) {
        (true, _) => BitVec::zeros(n),
        (false, Scheme::FuzzyCommitment) => stored.clone(),
        (false, Scheme::SecureSketch) => params.code().parity_check().solve_any(stored)?,
    };
    let key = if params.keyed {
        stored.clone()
    } else {
        BitVec::zeros(params.key_len())
    };
    Ok(Attack { probe, key })
}

/// Replays whatever of `(A, K)` is known and draws the rest uniformly.
pub fn attack_with_biometric_and_key<R: Rng + ?Sized>(
    params: &SystemParams,
    a: Option<&BitVec>,
    key: Option<&BitVec>,
    rng: &mut R,
) -> Result<Attack> {
    let probe = match a {
        Some(a) => {
            check_len(a, params.n())?;
            a.clone()
        }
        None => BitVec::random(params.n(), rng),
    };
    let key = if params.keyed {
        key_or_uniform(params, key, rng)?
    } else {
        BitVec::zeros(params.key_len())
    };
    Ok(Attack { probe, key })
}

/// Presents another enrollment (or the ground truth) of the same person
/// together with the target's key, uniform if the key is unknown.
pub fn attack_substitute_enrollment<R: Rng + ?Sized>(
    params: &SystemParams,
    a_i: &BitVec,
    k_j: Option<&BitVec>,
    rng: &mut R,
) -> Result<Attack> {
    attack_with_biometric_and_key(params, Some(a_i), k_j, rng)
}

fn target_key(view: &AdversaryView, j: usize) -> Result<BitVec> {
    view.system(j)?.key.clone().ok_or_else(|| {
        Error::InconsistentScenario(format!("key of target system {j} is not exposed"))
    })
}

/// Stacked parity checks of the compromised systems and the matching
/// stacked syndromes `H_i A_i`.
fn compromised_stack(view: &AdversaryView, comp: &[usize]) -> Result<Option<(BitMatrix, BitVec)>> {
    if comp.is_empty() {
        return Ok(None);
    }
    let stack = BitMatrix::vstack(
        comp.iter()
            .map(|&i| view.systems[i].params.code().parity_check()),
    )?;
    let parts = comp
        .iter()
        .map(|&i| {
            view.systems[i]
                .enrolled_syndrome()
                .expect("fully compromised")
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Some((stack, BitVec::concat(&parts))))
}

/// Linkage attack when the target's parity checks lie in the span of the
/// fully compromised systems' checks.
///
/// Writes `H_j = M_j [H_1; ...; H_l]`, predicts `H_j A_j` as
/// `M_j [H_1 A_1; ...; H_l A_l]` and presents any `C` with that syndrome.
pub fn attack_linked_rank_dependent(view: &AdversaryView, j: usize) -> Result<Attack> {
    let target = view.system(j)?;
    let key = target_key(view, j)?;
    let hj = target.params.code().parity_check();
    let comp = view.fully_compromised(j);
    let mats: Vec<&BitMatrix> = comp
        .iter()
        .map(|&i| view.systems[i].params.code().parity_check())
        .collect();
    let residual = residual_rank(&mats, hj)?;
    if residual > 0 {
        return Err(Error::NotRankDependent { residual });
    }
    let (stack, y) = compromised_stack(view, &comp)?.expect("residual 0 needs a nonempty stack");
    // Row r of M_j solves stack^T c = (row r of H_j).
    let coeffs = Echelon::new(&stack.transpose());
    let predicted = hj
        .row_iter()
        .map(|h| coeffs.solve(h).map(|c| c.dot(&y)))
        .collect::<Result<Vec<bool>>>()?;
    let probe = hj.solve_any(&BitVec::from_bits(predicted))?;
    Ok(Attack { probe, key })
}

/// Draws `C` uniformly from the coset of the compromised stack that holds
/// the enrolled biometric, so that the residual part of the target's
/// syndrome is a uniform guess.
///
/// With noisy enrollments the compromised syndromes can be jointly
/// inconsistent; only an independent subset of rows (lowest index first)
/// is then matched.
pub fn attack_coset_sampling<R: Rng + ?Sized>(
    view: &AdversaryView,
    j: usize,
    rng: &mut R,
) -> Result<Attack> {
    let target = view.system(j)?;
    let key = target_key(view, j)?;
    let n = target.params.n();
    let comp = view.fully_compromised(j);
    let x = match compromised_stack(view, &comp)? {
        None => BitVec::random(n, rng),
        Some((stack, y)) => {
            let rows = Echelon::new(&stack.transpose()).pivots().to_vec();
            let sub = BitMatrix::from_rows(rows.iter().map(|&r| stack.row(r).clone()).collect())?;
            let y_sub = BitVec::from_bits(rows.iter().map(|&r| y.get(r)));
            Echelon::new(&sub).solve_with_free(&y_sub, |_| rng.gen())?
        }
    };
    let hj = target.params.code().parity_check();
    let sampled = hj.mul_vec(&x)?;
    let probe = hj.solve_any(&sampled)?;
    Ok(Attack { probe, key })
}

/// Runs the attack named by `tag` against system `j`, checking that the
/// view contains what the attack needs.
pub fn mount<R: Rng + ?Sized>(
    tag: AttackTag,
    view: &AdversaryView,
    j: usize,
    rng: &mut R,
) -> Result<Attack> {
    let target = view.system(j)?;
    let params = &target.params;
    let exposed_key = if params.keyed {
        target.key.as_ref()
    } else {
        None
    };
    match tag {
        AttackTag::Uninformed => Ok(attack_uninformed(params, rng)),
        AttackTag::Stored => {
            let s = target.stored.as_ref().ok_or_else(|| {
                Error::InconsistentScenario(format!(
                    "\"stored\" attack but S of system {j} is not exposed"
                ))
            })?;
            attack_with_stored(params, s)
        }
        AttackTag::BiometricAndKey => {
            let a = view.biometric(BiometricId::Enrollment(j));
            if a.is_none() && exposed_key.is_none() {
                return Err(Error::InconsistentScenario(format!(
                    "\"biometric+key\" attack but neither A nor K of system {j} is exposed"
                )));
            }
            attack_with_biometric_and_key(params, a, exposed_key, rng)
        }
        AttackTag::Substitute => {
            let best = view
                .biometrics
                .iter()
                .filter(|b| b.id != BiometricId::Enrollment(j))
                .min_by(|a, b| a.noise.total_cmp(&b.noise))
                .ok_or_else(|| {
                    Error::InconsistentScenario(
                        "\"substitute\" attack needs another exposed biometric".into(),
                    )
                })?;
            attack_substitute_enrollment(params, &best.value, exposed_key, rng)
        }
        AttackTag::RankLinked => attack_linked_rank_dependent(view, j),
        AttackTag::CosetSampling => attack_coset_sampling(view, j, rng),
    }
}
