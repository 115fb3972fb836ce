//! Privacy leakage about the biometric, in bits.
//!
//! Closed forms come from ranks; the exact paths enumerate small instances.
//! All logarithms are base 2 and zero-probability cells are skipped.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::biomodel::check_noise;
use crate::error::{Error, Result};
use crate::gf2::{stacked_rank, BitMatrix, BitVec};
use crate::schemes::{enroll_with, Scheme, SystemParams};

/// Largest `n` accepted by the enumeration paths.
pub const MAX_EXACT_N: usize = 10;
/// Largest number of compromised systems accepted by [`exact_mutual_info`].
pub const MAX_EXACT_SYSTEMS: usize = 3;
/// Work budget (summed terms) for [`exact_mutual_info`].
pub const EXACT_WORK_BUDGET: u64 = 1 << 30;
/// Largest `n` accepted by [`check_syndrome_uniformity`].
pub const MAX_UNIFORMITY_N: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeakageMethod {
    ExactEnumeration,
    RankFormula,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub method: LeakageMethod,
    pub bits_leaked: f64,
    pub bound: Option<f64>,
    pub params: serde_json::Value,
}

/// Which device contents the attacker sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeakageQuery {
    Stored,
    Key,
    StoredAndKey,
}

impl LeakageQuery {
    pub const ALL: [LeakageQuery; 3] = [
        LeakageQuery::Stored,
        LeakageQuery::Key,
        LeakageQuery::StoredAndKey,
    ];

    fn name(self) -> &'static str {
        match self {
            LeakageQuery::Stored => "S",
            LeakageQuery::Key => "K",
            LeakageQuery::StoredAndKey => "S,K",
        }
    }
}

fn single_params_json(params: &SystemParams, query: LeakageQuery) -> serde_json::Value {
    json!({
        "scheme": params.scheme,
        "keyed": params.keyed,
        "n": params.n(),
        "m": params.m(),
        "query": query.name(),
    })
}

/// Leakage of a uniform biometric through one device, in closed form.
///
/// Two-factor: nothing from `S` or `K` alone, `m` bits from both.
/// Keyless: `m` bits from `S`; the key is a constant.
pub fn single_system_leakage(params: &SystemParams, query: LeakageQuery) -> LeakageReport {
    let m = params.m() as f64;
    let bits = match (params.keyed, query) {
        (true, LeakageQuery::StoredAndKey) => m,
        (true, _) => 0.0,
        (false, LeakageQuery::Key) => 0.0,
        (false, _) => m,
    };
    LeakageReport {
        method: LeakageMethod::RankFormula,
        bits_leaked: bits,
        bound: Some(m),
        params: single_params_json(params, query),
    }
}

fn entropy_of_counts<'a, I: IntoIterator<Item = &'a u64>>(counts: I, total: f64) -> f64 {
    counts
        .into_iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

fn bits_to_u64(parts: &[&BitVec]) -> u64 {
    let mut out = 0u64;
    let mut shift = 0;
    for p in parts {
        out |= p.to_u64() << shift;
        shift += p.len();
    }
    out
}

/// `I(A; O)` for uniform `A` by enumerating every `A`, key and codeword
/// selector, where `O` is the part of the record named by `query`.
pub fn exact_single_system_leakage(
    params: &SystemParams,
    query: LeakageQuery,
) -> Result<LeakageReport> {
    let n = params.n();
    let klen = if params.keyed { params.key_len() } else { 0 };
    let zlen = match params.scheme {
        Scheme::FuzzyCommitment => params.code().k(),
        Scheme::SecureSketch => 0,
    };
    if n > MAX_EXACT_N || n + klen + zlen > 26 {
        return Err(Error::InstanceTooLarge(format!(
            "single-system enumeration over 2^{} outcomes",
            n + klen + zlen
        )));
    }
    let inner = 1u64 << (klen + zlen);
    let mut marginal: BTreeMap<u64, u64> = BTreeMap::new();
    let mut cond_entropy = 0.0;
    for a in 0..1u64 << n {
        let a = BitVec::from_u64(n, a);
        let mut cond: BTreeMap<u64, u64> = BTreeMap::new();
        for r in 0..inner {
            let key = if params.keyed {
                BitVec::from_u64(params.key_len(), r & ((1 << klen) - 1))
            } else {
                BitVec::zeros(params.key_len())
            };
            let aux = (zlen > 0).then(|| BitVec::from_u64(zlen, r >> klen));
            let rec = enroll_with(params, &a, key, aux)?;
            let obs = match query {
                LeakageQuery::Stored => bits_to_u64(&[rec.stored()]),
                LeakageQuery::Key => bits_to_u64(&[rec.key()]),
                LeakageQuery::StoredAndKey => bits_to_u64(&[rec.stored(), rec.key()]),
            };
            *cond.entry(obs).or_default() += 1;
        }
        cond_entropy += entropy_of_counts(cond.values(), inner as f64);
        for (o, c) in cond {
            *marginal.entry(o).or_default() += c;
        }
    }
    let total = (inner << n) as f64;
    let bits = entropy_of_counts(marginal.values(), total) - cond_entropy / (1u64 << n) as f64;
    Ok(LeakageReport {
        method: LeakageMethod::ExactEnumeration,
        bits_leaked: bits.max(0.0),
        bound: Some(single_system_leakage(params, query).bits_leaked),
        params: single_params_json(params, query),
    })
}

/// Distribution of `H e` for `e` drawn from an i.i.d. Bernoulli(`p`) source.
fn noise_syndrome_distribution(h: &BitMatrix, p: f64) -> Vec<f64> {
    let (m, n) = (h.rows(), h.cols());
    let mut dist = vec![0.0; 1 << m];
    if p == 0.0 {
        dist[0] = 1.0;
        return dist;
    }
    let cols: Vec<u64> = (0..n).map(|c| h.column(c).to_u64()).collect();
    // Gray-code walk keeps the syndrome update to one XOR per step.
    let mut s = 0u64;
    let mut w = 0usize;
    let pw: Vec<f64> = (0..=n)
        .map(|w| p.powi(w as i32) * (1.0 - p).powi((n - w) as i32))
        .collect();
    dist[0] += pw[0];
    let mut e = 0u64;
    for i in 1u64..1 << n {
        let bit = i.trailing_zeros() as usize;
        e ^= 1 << bit;
        if e >> bit & 1 == 1 {
            w += 1;
        } else {
            w -= 1;
        }
        s ^= cols[bit];
        dist[s as usize] += pw[w];
    }
    dist
}

/// Exact `I(A_0; H_1 A_1, ..., H_l A_l)` for a uniform `A_0` and
/// `A_i = BSC_{p_i}(A_0)`.
///
/// The conditional entropy splits into per-system noise-syndrome
/// entropies; the output entropy sums over stacked syndromes of `A_0`
/// grouped by multiplicity.
pub fn exact_mutual_info(h_list: &[&BitMatrix], p_list: &[f64], n: usize) -> Result<LeakageReport> {
    if h_list.len() != p_list.len() {
        return Err(Error::DimensionMismatch {
            expected: h_list.len(),
            found: p_list.len(),
        });
    }
    for h in h_list {
        if h.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h.cols(),
            });
        }
    }
    for &p in p_list {
        check_noise(p)?;
    }
    let params = json!({ "n": n, "systems": h_list.len(), "noise": p_list });
    let l = h_list.len();
    if l == 0 {
        return Ok(LeakageReport {
            method: LeakageMethod::ExactEnumeration,
            bits_leaked: 0.0,
            bound: Some(0.0),
            params,
        });
    }
    let total_m: usize = h_list.iter().map(|h| h.rows()).sum();
    if n > MAX_EXACT_N || l > MAX_EXACT_SYSTEMS || total_m > 24 {
        return Err(Error::InstanceTooLarge(format!(
            "n = {n}, l = {l}, stacked rows = {total_m}"
        )));
    }
    let rank = stacked_rank(h_list)?;
    let work = (1u64 << rank) << total_m;
    if work > EXACT_WORK_BUDGET {
        return Err(Error::InstanceTooLarge(format!(
            "2^{} summed terms",
            rank + total_m
        )));
    }

    let dists: Vec<Vec<f64>> = h_list
        .iter()
        .zip(p_list)
        .map(|(h, &p)| noise_syndrome_distribution(h, p))
        .collect();
    let cond_entropy: f64 = dists
        .iter()
        .map(|d| {
            d.iter()
                .filter(|&&x| x > 0.0)
                .map(|&x| -x * x.log2())
                .sum::<f64>()
        })
        .sum();

    // Multiplicity of each stacked syndrome of A_0.
    let stack = BitMatrix::vstack(h_list.iter().copied())?;
    let cols: Vec<u64> = (0..n).map(|c| stack.column(c).to_u64()).collect();
    let mut mult: BTreeMap<u64, u64> = BTreeMap::new();
    let mut s = 0u64;
    *mult.entry(0).or_default() += 1;
    for i in 1u64..1 << n {
        s ^= cols[i.trailing_zeros() as usize];
        *mult.entry(s).or_default() += 1;
    }

    let widths: Vec<usize> = h_list.iter().map(|h| h.rows()).collect();
    let split = |y: u64| -> Vec<usize> {
        let mut out = Vec::with_capacity(l);
        let mut shift = 0;
        for &w in &widths {
            out.push(((y >> shift) & ((1 << w) - 1)) as usize);
            shift += w;
        }
        out
    };
    let scale = 1.0 / (1u64 << n) as f64;
    let mut out_entropy = 0.0;
    for y in 0..1u64 << total_m {
        let yp = split(y);
        let mut py = 0.0;
        for (&sa, &count) in &mult {
            let sp = split(sa);
            let mut term = count as f64;
            for i in 0..l {
                term *= dists[i][yp[i] ^ sp[i]];
                if term == 0.0 {
                    break;
                }
            }
            py += term;
        }
        py *= scale;
        if py > 0.0 {
            out_entropy -= py * py.log2();
        }
    }
    Ok(LeakageReport {
        method: LeakageMethod::ExactEnumeration,
        bits_leaked: (out_entropy - cond_entropy).max(0.0),
        bound: Some(rank as f64),
        params,
    })
}

/// Upper bound on the leakage from fully compromised systems: the rank of
/// their stacked parity checks (attained with noiseless enrollments).
pub fn leakage_rank_bound(h_list: &[&BitMatrix]) -> Result<usize> {
    stacked_rank(h_list)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub n: usize,
    pub m: usize,
    pub m_tilde: usize,
    /// Smallest and largest `Pr[H x = s | H~ x = t]` over all cells.
    pub min_conditional: f64,
    pub max_conditional: f64,
    pub uniform: bool,
}

/// Enumerates every `x` in `{0,1}^n` and checks that `H x` is uniform given
/// `H~ x`, which holds whenever the rows of `H` and `H~` are jointly
/// independent.
pub fn check_syndrome_uniformity(h: &BitMatrix, h_tilde: &BitMatrix) -> Result<UniformityReport> {
    let n = h.cols();
    if h_tilde.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: h_tilde.cols(),
        });
    }
    if n > MAX_UNIFORMITY_N {
        return Err(Error::InstanceTooLarge(format!(
            "uniformity check over 2^{n} vectors"
        )));
    }
    let stack = BitMatrix::vstack([h, h_tilde])?;
    let ech = stack.echelon();
    if ech.rank() < stack.rows() {
        return Err(Error::HypothesisViolated {
            combination: ech.row_dependency().expect("dependent rows"),
        });
    }
    let (m, mt) = (h.rows(), h_tilde.rows());
    let mut joint = vec![0u64; 1 << (m + mt)];
    let mut given = vec![0u64; 1 << mt];
    for x in 0..1u64 << n {
        let x = BitVec::from_u64(n, x);
        let s = h.mul_vec(&x)?.to_u64();
        let t = h_tilde.mul_vec(&x)?.to_u64();
        joint[(t << m | s) as usize] += 1;
        given[t as usize] += 1;
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut uniform = true;
    for t in 0..1usize << mt {
        for s in 0..1usize << m {
            let c = joint[t << m | s];
            // Exact check in integers: c / given[t] == 2^-m.
            uniform &= c << m == given[t];
            let q = c as f64 / given[t] as f64;
            lo = lo.min(q);
            hi = hi.max(q);
        }
    }
    Ok(UniformityReport {
        n,
        m,
        m_tilde: mt,
        min_conditional: lo,
        max_conditional: hi,
        uniform,
    })
}
