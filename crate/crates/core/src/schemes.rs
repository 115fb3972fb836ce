//! Fuzzy commitment and secure sketch systems, keyless or two-factor.
//!
//! Both schemes reduce authentication to the same step: compute a decoding
//! syndrome from the stored data and the presented `(D, L)` pair, look up the
//! minimum-weight word in that coset, and accept when its weight is at most
//! `floor(tau * n)`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codes::{binary_entropy, CosetLeaderTable, LinearCode};
use crate::error::{Error, Result};
use crate::gf2::BitVec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "fc")]
    FuzzyCommitment,
    #[serde(rename = "ss")]
    SecureSketch,
}

impl Scheme {
    fn tag(self) -> u8 {
        match self {
            Scheme::FuzzyCommitment => 0,
            Scheme::SecureSketch => 1,
        }
    }

    fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(Scheme::FuzzyCommitment),
            1 => Ok(Scheme::SecureSketch),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme tag {other}"
            ))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::FuzzyCommitment => "fc",
            Scheme::SecureSketch => "ss",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fc" | "fuzzy-commitment" => Ok(Scheme::FuzzyCommitment),
            "ss" | "secure-sketch" => Ok(Scheme::SecureSketch),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Configuration of one access-control device.
#[derive(Clone, Debug)]
pub struct SystemParams {
    pub scheme: Scheme,
    pub keyed: bool,
    pub tau: f64,
    code: Arc<LinearCode>,
    table: Arc<CosetLeaderTable>,
}

impl SystemParams {
    /// Builds the device and its coset-leader table.
    pub fn new(scheme: Scheme, keyed: bool, tau: f64, code: Arc<LinearCode>) -> Result<Self> {
        let table = Arc::new(CosetLeaderTable::build(&code)?);
        Self::with_table(scheme, keyed, tau, code, table)
    }

    /// Reuses a table already built for `code`.
    pub fn with_table(
        scheme: Scheme,
        keyed: bool,
        tau: f64,
        code: Arc<LinearCode>,
        table: Arc<CosetLeaderTable>,
    ) -> Result<Self> {
        if !(tau > 0.0 && tau < 0.5) {
            return Err(Error::InvalidProbability {
                value: tau,
                range: "(0, 0.5)",
            });
        }
        if table.syndrome_bits() != code.m() {
            return Err(Error::DimensionMismatch {
                expected: code.m(),
                found: table.syndrome_bits(),
            });
        }
        Ok(Self {
            scheme,
            keyed,
            tau,
            code,
            table,
        })
    }

    pub fn code(&self) -> &Arc<LinearCode> {
        &self.code
    }

    pub fn table(&self) -> &Arc<CosetLeaderTable> {
        &self.table
    }

    pub fn n(&self) -> usize {
        self.code.n()
    }

    pub fn m(&self) -> usize {
        self.code.m()
    }

    /// Largest accepted leader weight, `floor(tau * n)`.
    pub fn threshold(&self) -> usize {
        // The epsilon absorbs products such as 0.3 * 10 = 2.9999999999999996.
        (self.tau * self.n() as f64 + 1e-9).floor() as usize
    }

    /// Length of `S` and of `K` when keyed: `n` for FC, `m` for SS.
    pub fn stored_len(&self) -> usize {
        match self.scheme {
            Scheme::FuzzyCommitment => self.n(),
            Scheme::SecureSketch => self.m(),
        }
    }

    pub fn key_len(&self) -> usize {
        self.stored_len()
    }

    /// Violations of `0.5 > tau > p` and `m/n > h_b(tau)` for a legitimate
    /// crossover `p`.
    pub fn assumption_warnings(&self, p: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.tau <= p {
            out.push(format!(
                "tau = {} does not exceed crossover p = {p}",
                self.tau
            ));
        }
        let h = binary_entropy(self.tau).expect("tau validated");
        let ratio = self.m() as f64 / self.n() as f64;
        if ratio <= h {
            out.push(format!(
                "m/n = {ratio:.4} does not exceed h_b(tau) = {h:.4}"
            ));
        }
        out
    }
}

/// State of one device after enrollment.
#[derive(Clone, Debug)]
pub struct EnrollmentRecord {
    params: SystemParams,
    stored: BitVec,
    key: BitVec,
    // Only for white-box tests; never serialized.
    aux: Option<BitVec>,
}

/// Outcome of a threshold test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthDecision {
    pub accepted: bool,
    pub weight: usize,
    pub syndrome_used: BitVec,
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

/// Enrolls `a`, drawing the key (if keyed) and, for fuzzy commitment, the
/// codeword selector uniformly.
pub fn enroll<R: Rng + ?Sized>(
    params: &SystemParams,
    a: &BitVec,
    rng: &mut R,
) -> Result<EnrollmentRecord> {
    let key = if params.keyed {
        BitVec::random(params.key_len(), rng)
    } else {
        BitVec::zeros(params.key_len())
    };
    let aux = match params.scheme {
        Scheme::FuzzyCommitment => Some(BitVec::random(params.code.k(), rng)),
        Scheme::SecureSketch => None,
    };
    enroll_with(params, a, key, aux)
}

/// Deterministic enrollment with caller-supplied randomness.
///
/// FC: `S = A + G^T Z + K`; SS: `S = H A + K`. For keyless devices `key`
/// must be the zero vector.
pub fn enroll_with(
    params: &SystemParams,
    a: &BitVec,
    key: BitVec,
    aux: Option<BitVec>,
) -> Result<EnrollmentRecord> {
    check_len(a, params.n())?;
    check_len(&key, params.key_len())?;
    if !params.keyed && !key.is_zero() {
        return Err(Error::InvalidParameter(
            "keyless device with a nonzero key".into(),
        ));
    }
    let stored = match params.scheme {
        Scheme::FuzzyCommitment => {
            let z = aux.as_ref().ok_or_else(|| {
                Error::InvalidParameter("fuzzy commitment needs a codeword selector".into())
            })?;
            a ^ &params.code.encode(z)? ^ &key
        }
        Scheme::SecureSketch => {
            if aux.is_some() {
                return Err(Error::InvalidParameter(
                    "secure sketch takes no codeword selector".into(),
                ));
            }
            params.code.syndrome(a)? ^ &key
        }
    };
    Ok(EnrollmentRecord {
        params: params.clone(),
        stored,
        key,
        aux,
    })
}

impl EnrollmentRecord {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Stored data `S`.
    pub fn stored(&self) -> &BitVec {
        &self.stored
    }

    /// Key `K`; all-zero for keyless devices.
    pub fn key(&self) -> &BitVec {
        &self.key
    }

    /// The codeword selector `Z` (fuzzy commitment only).
    pub fn aux(&self) -> Option<&BitVec> {
        self.aux.as_ref()
    }

    /// `H A` as recoverable from `(S, K)`; what a full compromise reveals.
    pub fn enrolled_syndrome(&self) -> Result<BitVec> {
        recover_syndrome(&self.params, &self.stored, &self.key)
    }

    pub fn storage_bits(&self) -> usize {
        self.params.stored_len()
    }

    pub fn key_bits(&self) -> usize {
        if self.params.keyed {
            self.params.key_len()
        } else {
            0
        }
    }

    /// Serialized stored data as visible to anyone reading the device:
    /// `[scheme u8][keyed u8][n u32 LE][m u32 LE]` followed by `S` packed
    /// LSB-first. The key is never included.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + self.stored.len().div_ceil(8));
        out.push(self.params.scheme.tag());
        out.push(self.params.keyed as u8);
        out.extend_from_slice(&(self.params.n() as u32).to_le_bytes());
        out.extend_from_slice(&(self.params.m() as u32).to_le_bytes());
        out.extend_from_slice(&self.stored.to_bytes_lsb());
        out
    }
}

/// `H A` from a compromised `(S, K)` pair: `S + K` for secure sketch,
/// `H (S + K)` for fuzzy commitment.
pub fn recover_syndrome(params: &SystemParams, stored: &BitVec, key: &BitVec) -> Result<BitVec> {
    check_len(stored, params.stored_len())?;
    check_len(key, params.key_len())?;
    let masked = stored ^ key;
    match params.scheme {
        Scheme::FuzzyCommitment => params.code.syndrome(&masked),
        Scheme::SecureSketch => Ok(masked),
    }
}

/// Attacker-visible contents of a serialized record.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredData {
    pub scheme: Scheme,
    pub keyed: bool,
    pub n: usize,
    pub m: usize,
    pub stored: BitVec,
}

impl StoredData {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 {
            return Err(Error::InvalidParameter(format!(
                "record header needs 10 bytes, got {}",
                bytes.len()
            )));
        }
        let scheme = Scheme::from_tag(bytes[0])?;
        let keyed = match bytes[1] {
            0 => false,
            1 => true,
            other => return Err(Error::InvalidParameter(format!("bad keyed flag {other}"))),
        };
        let n = u32::from_le_bytes(bytes[2..6].try_into().expect("4 bytes")) as usize;
        let m = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        if m == 0 || m >= n {
            return Err(Error::InvalidParameter(format!(
                "bad code dimensions n = {n}, m = {m}"
            )));
        }
        let len = match scheme {
            Scheme::FuzzyCommitment => n,
            Scheme::SecureSketch => m,
        };
        let stored = BitVec::from_bytes_lsb(len, &bytes[10..])?;
        Ok(Self {
            scheme,
            keyed,
            n,
            m,
            stored,
        })
    }
}

/// Syndrome handed to the decoder for input `(D, L)`.
///
/// SS: `H D + L + S`; FC: `H (D + L + S)`. Keyless devices have no key
/// input, so `L` is ignored there (only its length is checked).
pub fn decoding_syndrome(record: &EnrollmentRecord, d: &BitVec, l: &BitVec) -> Result<BitVec> {
    let params = &record.params;
    check_len(d, params.n())?;
    check_len(l, params.key_len())?;
    let zero;
    let l = if params.keyed {
        l
    } else {
        zero = BitVec::zeros(params.key_len());
        &zero
    };
    match params.scheme {
        Scheme::SecureSketch => Ok(params.code.syndrome(d)? ^ l ^ &record.stored),
        Scheme::FuzzyCommitment => params.code.syndrome(&(d ^ l ^ &record.stored)),
    }
}

/// Threshold test on the minimum-weight word of the decoding coset.
pub fn authenticate(record: &EnrollmentRecord, d: &BitVec, l: &BitVec) -> Result<AuthDecision> {
    let syndrome = decoding_syndrome(record, d, l)?;
    let weight = record.params.table.weight(&syndrome)?;
    Ok(AuthDecision {
        accepted: weight <= record.params.threshold(),
        weight,
        syndrome_used: syndrome,
    })
}
