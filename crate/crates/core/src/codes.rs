//! Binary linear codes, exact minimum-weight syndrome decoding, and the
//! closed-form accuracy bounds used to check simulation results.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, BitVec};

/// Largest syndrome length for which a full coset-leader table is built.
pub const MAX_TABLE_SYNDROME_BITS: usize = 24;

/// An `[n, k]` binary linear code with paired generator and parity-check
/// matrices (`H G^T = 0`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearCode {
    n: usize,
    k: usize,
    generator: BitMatrix,
    parity_check: BitMatrix,
    // Syndrome of each unit vector as an integer, when m <= 64.
    column_syndromes: Option<Vec<u64>>,
}

impl LinearCode {
    /// Builds the code whose parity-check matrix is `h`; `G` is derived as a
    /// null-space basis of `h`.
    pub fn from_parity_check(h: BitMatrix) -> Result<Self> {
        let generator = h.nullspace_basis()?;
        let m = h.rows();
        let column_syndromes = (m <= 64).then(|| {
            (0..h.cols())
                .map(|c| (0..m).fold(0u64, |acc, r| acc | (h.get(r, c) as u64) << r))
                .collect()
        });
        Ok(Self {
            n: h.cols(),
            k: generator.rows(),
            generator,
            parity_check: h,
            column_syndromes,
        })
    }

    /// Hamming code with `r` parity bits: `n = 2^r - 1`, column `j` of `H` is
    /// the binary expansion of `j + 1` with the most significant bit in row 0.
    pub fn hamming(r: usize) -> Result<Self> {
        if !(2..=16).contains(&r) {
            return Err(Error::InvalidParameter(format!(
                "Hamming code needs 2 <= r <= 16, got {r}"
            )));
        }
        let n = (1usize << r) - 1;
        let rows = (0..r)
            .map(|i| BitVec::from_bits((1..=n).map(|v| (v >> (r - 1 - i)) & 1 == 1)))
            .collect();
        Self::from_parity_check(BitMatrix::from_rows(rows)?)
    }

    /// Code with a uniformly random full-rank `m x n` parity-check matrix.
    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Self> {
        if m >= n {
            return Err(Error::DegenerateCode { n });
        }
        Self::from_parity_check(BitMatrix::sample_full_rank(m, n, rng)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Syndrome length `n - k`.
    pub fn m(&self) -> usize {
        self.n - self.k
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    pub fn generator(&self) -> &BitMatrix {
        &self.generator
    }

    pub fn parity_check(&self) -> &BitMatrix {
        &self.parity_check
    }

    /// `H x`.
    pub fn syndrome(&self, x: &BitVec) -> Result<BitVec> {
        self.parity_check.mul_vec(x)
    }

    /// `G^T z`, the codeword selected by `z`.
    pub fn encode(&self, z: &BitVec) -> Result<BitVec> {
        if z.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                found: z.len(),
            });
        }
        let mut c = BitVec::zeros(self.n);
        for i in z.ones() {
            c ^= self.generator.row(i);
        }
        Ok(c)
    }

    /// Syndrome of `x` packed into an integer (bit `i` = syndrome entry `i`).
    fn syndrome_index(&self, x: &BitVec) -> u64 {
        match &self.column_syndromes {
            Some(cols) => x.ones().fold(0, |acc, j| acc ^ cols[j]),
            None => unreachable!("syndrome_index requires m <= 64"),
        }
    }
}

/// Minimum-weight representative of every coset of a code.
///
/// Leaders are stored packed, one stride of `u64` words per syndrome, and
/// indexed by the syndrome read as an integer.
#[derive(Clone, Debug)]
pub struct CosetLeaderTable {
    m: usize,
    n: usize,
    stride: usize,
    leaders: Vec<u64>,
    weights: Vec<u16>,
}

impl CosetLeaderTable {
    /// Fills all `2^m` cosets by enumerating error patterns in order of
    /// increasing weight, and lexicographically by support within a weight.
    /// The first pattern to reach a syndrome becomes its leader.
    pub fn build(code: &LinearCode) -> Result<Self> {
        let (m, n) = (code.m(), code.n());
        if m > MAX_TABLE_SYNDROME_BITS {
            return Err(Error::TableTooLarge { m });
        }
        if n > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "block length {n} too large"
            )));
        }
        let cols = code
            .column_syndromes
            .as_ref()
            .expect("m <= 24 implies column syndromes are cached");
        let size = 1usize << m;
        let stride = n.div_ceil(64);
        let mut table = Self {
            m,
            n,
            stride,
            leaders: vec![0; size * stride],
            weights: vec![u16::MAX; size],
        };
        table.weights[0] = 0;
        let mut filled = 1usize;
        let mut support = Vec::with_capacity(m);
        for w in 1..=n {
            if filled == size {
                break;
            }
            table.fill_weight(cols, w, 0, 0, &mut support, &mut filled);
        }
        debug_assert_eq!(filled, size, "full-rank H reaches every syndrome");
        Ok(table)
    }

    fn fill_weight(
        &mut self,
        cols: &[u64],
        remaining: usize,
        start: usize,
        syndrome: u64,
        support: &mut Vec<usize>,
        filled: &mut usize,
    ) {
        if remaining == 0 {
            let idx = syndrome as usize;
            if self.weights[idx] == u16::MAX {
                self.weights[idx] = support.len() as u16;
                let base = idx * self.stride;
                for &p in support.iter() {
                    self.leaders[base + p / 64] |= 1u64 << (p % 64);
                }
                *filled += 1;
            }
            return;
        }
        for p in start..=(self.n - remaining) {
            if *filled == self.weights.len() {
                return;
            }
            support.push(p);
            self.fill_weight(
                cols,
                remaining - 1,
                p + 1,
                syndrome ^ cols[p],
                support,
                filled,
            );
            support.pop();
        }
    }

    pub fn syndrome_bits(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn index_of(&self, s: &BitVec) -> Result<usize> {
        if s.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                found: s.len(),
            });
        }
        Ok(s.to_u64() as usize)
    }

    /// Weight of the leader of coset `s`.
    pub fn weight(&self, s: &BitVec) -> Result<usize> {
        Ok(self.weights[self.index_of(s)?] as usize)
    }

    /// Weight of the leader for a syndrome given as an integer index.
    pub fn weight_at(&self, index: usize) -> usize {
        self.weights[index] as usize
    }

    /// Leader of coset `s`.
    pub fn leader(&self, s: &BitVec) -> Result<BitVec> {
        Ok(self.leader_at(self.index_of(s)?))
    }

    pub fn leader_at(&self, index: usize) -> BitVec {
        let mut v = BitVec::zeros(self.n);
        let words = &self.leaders[index * self.stride..(index + 1) * self.stride];
        for (wi, &w) in words.iter().enumerate() {
            let mut w = w;
            while w != 0 {
                v.set(wi * 64 + w.trailing_zeros() as usize, true);
                w &= w - 1;
            }
        }
        v
    }

    /// Number of cosets whose leader has weight at most `max_weight`.
    pub fn cosets_within(&self, max_weight: usize) -> usize {
        self.weights
            .iter()
            .filter(|&&w| (w as usize) <= max_weight)
            .count()
    }
}

/// Minimum-weight vector in the coset with syndrome `s`.
pub fn decode_min_weight(
    code: &LinearCode,
    table: &CosetLeaderTable,
    s: &BitVec,
) -> Result<BitVec> {
    if table.n != code.n() || table.m != code.m() {
        return Err(Error::InvalidParameter(
            "coset table was built for a different code".into(),
        ));
    }
    table.leader(s)
}

/// Syndrome of `x` as a packed integer; exposed for fast Monte Carlo loops.
pub fn syndrome_index(code: &LinearCode, x: &BitVec) -> Result<usize> {
    if x.len() != code.n() {
        return Err(Error::DimensionMismatch {
            expected: code.n(),
            found: x.len(),
        });
    }
    if code.m() > 64 {
        return Err(Error::InvalidParameter(
            "syndrome index needs m <= 64".into(),
        ));
    }
    Ok(code.syndrome_index(x) as usize)
}

fn check_unit_interval(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability {
            value: p,
            range: "[0, 1]",
        })
    }
}

fn xlog2x_over(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / y).log2()
    }
}

/// Binary entropy `h_b(p)` in bits, with `h_b(0) = h_b(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_unit_interval(p)?;
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    Ok(-p * p.log2() - (1.0 - p) * (1.0 - p).log2())
}

/// Bernoulli KL divergence `D(q || p)` in bits.
///
/// Returns [`Error::InfiniteDivergence`] when `p` is 0 or 1 and `q` puts mass
/// where `p` has none.
pub fn kl_bern(q: f64, p: f64) -> Result<f64> {
    check_unit_interval(q)?;
    check_unit_interval(p)?;
    if (p == 0.0 && q > 0.0) || (p == 1.0 && q < 1.0) {
        return Err(Error::InfiniteDivergence { q, p });
    }
    let d = xlog2x_over(q, p) + xlog2x_over(1.0 - q, 1.0 - p);
    Ok(d.max(0.0))
}

/// Value of the error exponent and where it was attained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorExponent {
    pub value: f64,
    pub minimizer: f64,
    /// False when the rate is at or above `1 - h_b(p)`; `value` is then 0.
    pub positive: bool,
}

/// Step of the q-grid before golden-section refinement.
pub const EXPONENT_GRID_STEP: f64 = 1e-4;

/// `E(R) = min_q D(q || p) + max(1 - h_b(q) - R, 0)`.
///
/// The objective is convex in `q` and its minimum lies in `[p, 0.5]`; the
/// minimizer is located on a grid of step [`EXPONENT_GRID_STEP`] and then
/// polished by golden-section search on the neighbouring grid cells.
pub fn error_exponent(rate: f64, p: f64) -> Result<ErrorExponent> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::InvalidProbability {
            value: p,
            range: "[0, 0.5)",
        });
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "rate {rate} outside (0, 1)"
        )));
    }
    let capacity = 1.0 - binary_entropy(p)?;
    if rate >= capacity {
        return Ok(ErrorExponent {
            value: 0.0,
            minimizer: p,
            positive: false,
        });
    }
    if p == 0.0 {
        // D(q || 0) is infinite for q > 0.
        return Ok(ErrorExponent {
            value: 1.0 - rate,
            minimizer: 0.0,
            positive: true,
        });
    }
    let objective = |q: f64| {
        let h = binary_entropy(q).expect("q in [p, 0.5]");
        kl_bern(q, p).expect("p in (0, 0.5)") + (1.0 - h - rate).max(0.0)
    };
    let steps = ((0.5 - p) / EXPONENT_GRID_STEP).ceil() as usize;
    let grid = |i: usize| (p + i as f64 * EXPONENT_GRID_STEP).min(0.5);
    let (best_i, _) =
        (0..=steps)
            .map(|i| (i, objective(grid(i))))
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );
    let (mut lo, mut hi) = (
        grid(best_i.saturating_sub(1)),
        grid((best_i + 1).min(steps)),
    );
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let (mut fa, mut fb) = (objective(a), objective(b));
    for _ in 0..60 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = objective(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = objective(b);
        }
    }
    let q = 0.5 * (lo + hi);
    let (value, minimizer) = [(objective(q), q), (objective(grid(best_i)), grid(best_i))]
        .into_iter()
        .fold(
            (f64::INFINITY, q),
            |acc, c| if c.0 < acc.0 { c } else { acc },
        );
    Ok(ErrorExponent {
        value,
        minimizer,
        positive: value > 0.0,
    })
}

/// A bound value together with any violated operating assumptions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundValue {
    pub value: f64,
    pub warnings: Vec<String>,
}

impl BoundValue {
    pub fn assumptions_hold(&self) -> bool {
        self.warnings.is_empty()
    }
}

/// FRR upper bound `2^{-n D(tau || p)} + 2^{-n E(R)}`, clamped to 1.
///
/// The sub-linear correction on the decoding-error exponent is dropped, so
/// the second term is indicative only for finite `n`.
pub fn frr_bound(n: usize, p: f64, tau: f64, rate: f64) -> Result<BoundValue> {
    check_unit_interval(p)?;
    check_unit_interval(tau)?;
    let mut warnings = Vec::new();
    if !(tau > p && tau < 0.5) {
        warnings.push(format!(
            "threshold assumption 0.5 > tau > p violated (tau = {tau}, p = {p})"
        ));
    }
    if tau < 0.5 && rate >= 1.0 - binary_entropy(tau)? {
        warnings.push(format!(
            "rate assumption R < 1 - h_b(tau) violated (R = {rate}, 1 - h_b(tau) = {})",
            1.0 - binary_entropy(tau)?
        ));
    }
    let nf = n as f64;
    let threshold_term = if tau <= p {
        1.0
    } else {
        match kl_bern(tau, p) {
            Ok(d) => (-nf * d).exp2(),
            Err(Error::InfiniteDivergence { .. }) => 0.0,
            Err(e) => return Err(e),
        }
    };
    let decoding_term = if p < 0.5 {
        let e = error_exponent(rate, p)?;
        if !e.positive {
            warnings.push("no positive error exponent at this rate".into());
        }
        (-nf * e.value).exp2()
    } else {
        1.0
    };
    Ok(BoundValue {
        value: (threshold_term + decoding_term).min(1.0),
        warnings,
    })
}

/// FAR upper bound `2^{-(m - n h_b(tau))}`, clamped to 1.
pub fn far_bound(n: usize, m: usize, tau: f64) -> Result<BoundValue> {
    check_unit_interval(tau)?;
    let h = binary_entropy(tau)?;
    let mut warnings = Vec::new();
    if tau >= 0.5 {
        warnings.push(format!(
            "threshold assumption tau < 0.5 violated (tau = {tau})"
        ));
    }
    if (m as f64) / (n as f64) <= h {
        warnings.push(format!(
            "storage assumption m/n > h_b(tau) violated (m/n = {}, h_b(tau) = {h})",
            m as f64 / n as f64
        ));
    }
    let exponent = m as f64 - n as f64 * h;
    Ok(BoundValue {
        value: (-exponent).exp2().min(1.0),
        warnings,
    })
}
