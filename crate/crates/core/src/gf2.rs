//! Bit-packed linear algebra over GF(2).
//!
//! Vectors pack bits LSB-first into `u64` words; bits past `len` are kept
//! zero so that word-level equality, hashing and popcounts are exact.
//! Elimination always picks the lowest available column as the next pivot
//! and the lowest eligible row within that column, so every result here is
//! a deterministic function of the input.

use std::fmt;
use std::ops::{BitXor, BitXorAssign};
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

/// A binary vector of fixed length.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    /// The all-zero vector of length `len`.
    ///
    /// # Panics
    ///
    /// Panics if `len` is zero.
    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "BitVec length must be at least 1");
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// Unit vector with a single one at `pos`.
    pub fn unit(len: usize, pos: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(pos, true);
        v
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut v = Self::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            if b {
                v.set(i, true);
            }
        }
        v
    }

    /// Builds a vector from the low `len` bits of `value` (bit `i` of `value`
    /// becomes entry `i`). Used to walk `{0,1}^len` by integer index.
    pub fn from_u64(len: usize, value: u64) -> Self {
        assert!(len <= WORD_BITS, "from_u64 supports at most 64 bits");
        let mut v = Self::zeros(len);
        v.words[0] = if len == WORD_BITS {
            value
        } else {
            value & ((1u64 << len) - 1)
        };
        v
    }

    /// Inverse of [`BitVec::from_u64`].
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= WORD_BITS, "to_u64 supports at most 64 bits");
        self.words[0]
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(len);
        for w in v.words.iter_mut() {
            *w = rng.gen();
        }
        v.mask_tail();
        v
    }

    /// Packs LSB-first into bytes: byte `i` bit `j` is entry `8i + j`.
    pub fn to_bytes_lsb(&self) -> Vec<u8> {
        let nbytes = self.len.div_ceil(8);
        (0..nbytes)
            .map(|i| (self.words[i / 8] >> ((i % 8) * 8)) as u8)
            .collect()
    }

    pub fn from_bytes_lsb(len: usize, bytes: &[u8]) -> Result<Self> {
        let nbytes = len.div_ceil(8);
        if bytes.len() != nbytes {
            return Err(Error::DimensionMismatch {
                expected: nbytes,
                found: bytes.len(),
            });
        }
        let mut v = Self::zeros(len);
        for (i, &b) in bytes.iter().enumerate() {
            v.words[i / 8] |= (b as u64) << ((i % 8) * 8);
        }
        let before = v.words.clone();
        v.mask_tail();
        if before != v.words {
            return Err(Error::InvalidParameter(
                "padding bits past the vector length are set".into(),
            ));
        }
        Ok(v)
    }

    fn mask_tail(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            let last = self.words.len() - 1;
            self.words[last] &= (1u64 << rem) - 1;
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; vectors have at least one bit.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn distance(&self, other: &BitVec) -> usize {
        assert_eq!(self.len, other.len, "length mismatch");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Inner product over GF(2): parity of the bitwise AND.
    pub fn dot(&self, other: &BitVec) -> bool {
        assert_eq!(self.len, other.len, "length mismatch");
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Positions of the one bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let tz = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * WORD_BITS + tz)
                }
            })
        })
    }

    /// Concatenation `[a; b; ...]`.
    pub fn concat<'a, I: IntoIterator<Item = &'a BitVec>>(parts: I) -> Self {
        let bits: Vec<bool> = parts.into_iter().flat_map(|p| p.iter()).collect();
        Self::from_bits(bits)
    }

    /// Copy of entries `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        assert!(start + len <= self.len, "slice out of range");
        Self::from_bits((start..start + len).map(|i| self.get(i)))
    }
}

impl BitXorAssign<&BitVec> for BitVec {
    fn bitxor_assign(&mut self, rhs: &BitVec) {
        assert_eq!(self.len, rhs.len, "length mismatch");
        for (a, b) in self.words.iter_mut().zip(&rhs.words) {
            *a ^= b;
        }
    }
}

impl BitXor<&BitVec> for &BitVec {
    type Output = BitVec;
    fn bitxor(self, rhs: &BitVec) -> BitVec {
        let mut out = self.clone();
        out ^= rhs;
        out
    }
}

impl BitXor<&BitVec> for BitVec {
    type Output = BitVec;
    fn bitxor(mut self, rhs: &BitVec) -> BitVec {
        self ^= rhs;
        self
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec({self})")
    }
}

impl FromStr for BitVec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Parse {
                line: 1,
                msg: "empty bit string".into(),
            });
        }
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected character {other:?}"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_bits(bits))
    }
}

/// A dense binary matrix stored as packed rows.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BitVec>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![BitVec::zeros(cols); rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows((0..n).map(|i| BitVec::unit(n, i)).collect())
            .expect("identity rows are well formed")
    }

    pub fn from_rows(rows: Vec<BitVec>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidParameter("matrix needs at least one row".into()))?;
        let cols = first.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows,
        })
    }

    /// Convenience constructor from `"0110"`-style row strings.
    pub fn from_strs(rows: &[&str]) -> Result<Self> {
        Self::from_rows(rows.iter().map(|r| r.parse()).collect::<Result<_>>()?)
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        Self::from_rows((0..rows).map(|_| BitVec::random(cols, rng)).collect())
            .expect("random rows share a length")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &BitVec {
        &self.data[i]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &BitVec> {
        self.data.iter()
    }

    pub fn into_rows(self) -> Vec<BitVec> {
        self.data
    }

    pub fn set_row(&mut self, i: usize, row: BitVec) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data[i] = row;
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        self.data[r].set(c, value)
    }

    pub fn column(&self, c: usize) -> BitVec {
        BitVec::from_bits(self.data.iter().map(|r| r.get(c)))
    }

    pub fn transpose(&self) -> BitMatrix {
        Self::from_rows((0..self.cols).map(|c| self.column(c)).collect())
            .expect("transpose rows share a length")
    }

    /// `M x`: entry `i` is the parity of `row_i AND x`.
    pub fn mul_vec(&self, x: &BitVec) -> Result<BitVec> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok(BitVec::from_bits(self.data.iter().map(|r| r.dot(x))))
    }

    /// `self * other^T`, a `self.rows x other.rows` matrix.
    pub fn mul_transpose(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if other.cols != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.cols,
            });
        }
        Self::from_rows(
            self.data
                .iter()
                .map(|r| BitVec::from_bits(other.data.iter().map(|o| r.dot(o))))
                .collect(),
        )
    }

    /// `self * other` in the usual sense.
    pub fn mul(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if other.rows != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        self.mul_transpose(&other.transpose())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(BitVec::is_zero)
    }

    /// Vertical concatenation.
    pub fn vstack<'a, I: IntoIterator<Item = &'a BitMatrix>>(mats: I) -> Result<BitMatrix> {
        let mut rows = Vec::new();
        let mut cols = None;
        for m in mats {
            match cols {
                None => cols = Some(m.cols),
                Some(c) if c != m.cols => {
                    return Err(Error::DimensionMismatch {
                        expected: c,
                        found: m.cols,
                    })
                }
                _ => {}
            }
            rows.extend(m.data.iter().cloned());
        }
        Self::from_rows(rows)
    }

    pub fn rank(&self) -> usize {
        rank_of_rows(
            self.data.iter().map(|r| r.words.clone()).collect(),
            self.cols,
        )
    }

    pub fn is_full_row_rank(&self) -> bool {
        self.rank() == self.rows
    }

    /// Reduced row echelon form with the recorded row transform.
    pub fn echelon(&self) -> Echelon {
        Echelon::new(self)
    }

    /// Any `x` with `M x = s`; free variables are set to zero.
    pub fn solve_any(&self, s: &BitVec) -> Result<BitVec> {
        self.echelon().solve(s)
    }

    /// A `k x n` basis of the right null space (`k = n - m`), requiring
    /// full row rank.
    pub fn nullspace_basis(&self) -> Result<BitMatrix> {
        let ech = self.echelon();
        if ech.rank() != self.rows {
            return Err(Error::RankDeficient {
                rank: ech.rank(),
                rows: self.rows,
            });
        }
        ech.kernel_basis()
            .ok_or(Error::DegenerateCode { n: self.cols })
    }

    /// Uniform full-row-rank `m x n` matrix by rejection sampling.
    pub fn sample_full_rank<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<BitMatrix> {
        if m > n || m == 0 {
            return Err(Error::TooManyRows { rows: m, cols: n });
        }
        loop {
            let candidate = Self::random(m, n, rng);
            if candidate.is_full_row_rank() {
                return Ok(candidate);
            }
        }
    }

    /// Rows `start..start + count`.
    pub fn row_block(&self, start: usize, count: usize) -> Result<BitMatrix> {
        if start + count > self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: start + count,
            });
        }
        Self::from_rows(self.data[start..start + count].to_vec())
    }

    /// Parses the matrix text format: a header line `"m n"` followed by `m`
    /// lines of `n` characters from `{0, 1}`. Blank lines are skipped.
    pub fn parse_text(text: &str) -> Result<BitMatrix> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| Error::Parse {
                    line: hline,
                    msg: format!("bad dimension {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        let [m, n] = dims[..] else {
            return Err(Error::Parse {
                line: hline,
                msg: "header must be \"m n\"".into(),
            });
        };
        if m == 0 || n == 0 {
            return Err(Error::Parse {
                line: hline,
                msg: "dimensions must be positive".into(),
            });
        }
        let mut rows = Vec::with_capacity(m);
        for (lineno, line) in lines {
            if rows.len() == m {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("more than {m} rows"),
                });
            }
            if line.len() != n {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {n} columns, found {}", line.len()),
                });
            }
            let row: BitVec = line.parse().map_err(|e| match e {
                Error::Parse { msg, .. } => Error::Parse { line: lineno, msg },
                other => other,
            })?;
            rows.push(row);
        }
        if rows.len() != m {
            return Err(Error::Parse {
                line: text.lines().count(),
                msg: format!("expected {m} rows, found {}", rows.len()),
            });
        }
        Self::from_rows(rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for r in &self.data {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }
}

impl BitXor<&BitMatrix> for &BitMatrix {
    type Output = BitMatrix;
    fn bitxor(self, rhs: &BitMatrix) -> BitMatrix {
        assert_eq!(
            (self.rows, self.cols),
            (rhs.rows, rhs.cols),
            "shape mismatch"
        );
        BitMatrix::from_rows(
            self.data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a ^ b)
                .collect(),
        )
        .expect("shapes checked")
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{} [", self.rows, self.cols)?;
        for r in &self.data {
            writeln!(f, "  {r}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn rank_of_rows(mut rows: Vec<Vec<u64>>, cols: usize) -> usize {
    let mut rank = 0;
    for col in 0..cols {
        let (w, bit) = (col / WORD_BITS, 1u64 << (col % WORD_BITS));
        let Some(p) = (rank..rows.len()).find(|&r| rows[r][w] & bit != 0) else {
            continue;
        };
        rows.swap(rank, p);
        let pivot = rows[rank].clone();
        for r in rows.iter_mut().skip(rank + 1) {
            if r[w] & bit != 0 {
                for (a, b) in r.iter_mut().zip(&pivot).skip(w) {
                    *a ^= b;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Rank of the vertical concatenation of `mats`. An empty list has rank 0.
pub fn stacked_rank(mats: &[&BitMatrix]) -> Result<usize> {
    if mats.is_empty() {
        return Ok(0);
    }
    Ok(BitMatrix::vstack(mats.iter().copied())?.rank())
}

/// Rank that `hj` adds on top of `stack`.
pub fn residual_rank(stack: &[&BitMatrix], hj: &BitMatrix) -> Result<usize> {
    if let Some(m) = stack.iter().find(|m| m.cols() != hj.cols()) {
        return Err(Error::DimensionMismatch {
            expected: hj.cols(),
            found: m.cols(),
        });
    }
    let base = stacked_rank(stack)?;
    let mut all: Vec<&BitMatrix> = stack.to_vec();
    all.push(hj);
    Ok(stacked_rank(&all)? - base)
}

/// Reduced row echelon form `R = T M` of a matrix `M`.
///
/// `T` is invertible; the first `rank` rows of `R` are the nonzero pivot
/// rows with pivots at `pivots[i]`, the rest are zero.
#[derive(Clone, Debug)]
pub struct Echelon {
    reduced: Vec<BitVec>,
    transform: Vec<BitVec>,
    pivots: Vec<usize>,
    cols: usize,
}

impl Echelon {
    pub fn new(m: &BitMatrix) -> Self {
        let mut reduced = m.data.clone();
        let mut transform: Vec<BitVec> = (0..m.rows).map(|i| BitVec::unit(m.rows, i)).collect();
        let mut pivots = Vec::new();
        let mut rank = 0;
        for col in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let Some(p) = (rank..m.rows).find(|&r| reduced[r].get(col)) else {
                continue;
            };
            reduced.swap(rank, p);
            transform.swap(rank, p);
            let (prow, ptrans) = (reduced[rank].clone(), transform[rank].clone());
            for r in 0..m.rows {
                if r != rank && reduced[r].get(col) {
                    reduced[r] ^= &prow;
                    transform[r] ^= &ptrans;
                }
            }
            pivots.push(col);
            rank += 1;
        }
        Self {
            reduced,
            transform,
            pivots,
            cols: m.cols,
        }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn free_columns(&self) -> Vec<usize> {
        let mut is_pivot = vec![false; self.cols];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        (0..self.cols).filter(|&c| !is_pivot[c]).collect()
    }

    /// Solution of `M x = s` with the free variables set to zero.
    pub fn solve(&self, s: &BitVec) -> Result<BitVec> {
        self.solve_with_free(s, |_| false)
    }

    /// Solution of `M x = s` with each free variable taken from `free`.
    /// Sweeping `free` over all assignments enumerates the solution coset.
    pub fn solve_with_free<F: FnMut(usize) -> bool>(
        &self,
        s: &BitVec,
        mut free: F,
    ) -> Result<BitVec> {
        if s.len() != self.transform.len() {
            return Err(Error::DimensionMismatch {
                expected: self.transform.len(),
                found: s.len(),
            });
        }
        let target: Vec<bool> = self.transform.iter().map(|t| t.dot(s)).collect();
        if target[self.rank()..].iter().any(|&b| b) {
            return Err(Error::InconsistentSystem);
        }
        let mut x = BitVec::zeros(self.cols);
        for c in self.free_columns() {
            if free(c) {
                x.set(c, true);
            }
        }
        for (i, &p) in self.pivots.iter().enumerate() {
            // Pivot row i reads x_p + sum_{free f} R[i][f] x_f = target_i.
            let mut v = target[i];
            for f in self.reduced[i].ones() {
                if f != p && x.get(f) {
                    v = !v;
                }
            }
            x.set(p, v);
        }
        Ok(x)
    }

    /// Basis of `{x : M x = 0}`, one vector per free column; `None` when
    /// the kernel is trivial.
    pub fn kernel_basis(&self) -> Option<BitMatrix> {
        let free = self.free_columns();
        let rows = free
            .iter()
            .map(|&f| {
                let mut x = BitVec::unit(self.cols, f);
                for (i, &p) in self.pivots.iter().enumerate() {
                    if self.reduced[i].get(f) {
                        x.set(p, true);
                    }
                }
                x
            })
            .collect::<Vec<_>>();
        if rows.is_empty() {
            None
        } else {
            Some(BitMatrix::from_rows(rows).expect("kernel rows share a length"))
        }
    }

    /// A nonzero `c` with `c^T M = 0`, when the rows are dependent.
    pub fn row_dependency(&self) -> Option<BitVec> {
        self.transform.get(self.rank()).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hamming3() -> BitMatrix {
        BitMatrix::from_strs(&["0001111", "0110011", "1010101"]).unwrap()
    }

    /// Brute-force rank: size of the row span, enumerated.
    fn span_rank(m: &BitMatrix) -> usize {
        let mut span = std::collections::HashSet::new();
        for mask in 0u64..(1 << m.rows()) {
            let mut acc = BitVec::zeros(m.cols());
            for i in 0..m.rows() {
                if mask >> i & 1 == 1 {
                    acc ^= m.row(i);
                }
            }
            span.insert(acc);
        }
        span.len().trailing_zeros() as usize
    }

    #[test]
    fn mat_vec_examples() {
        let id = BitMatrix::identity(2);
        assert_eq!(
            id.mul_vec(&"10".parse().unwrap()).unwrap().to_string(),
            "10"
        );
        let ones = BitMatrix::from_strs(&["11"]).unwrap();
        assert_eq!(
            ones.mul_vec(&"11".parse().unwrap()).unwrap().to_string(),
            "0"
        );
        let h = hamming3();
        for j in 0..7 {
            assert_eq!(h.mul_vec(&BitVec::unit(7, j)).unwrap(), h.column(j));
        }
        assert!(matches!(
            h.mul_vec(&BitVec::zeros(6)),
            Err(Error::DimensionMismatch {
                expected: 7,
                found: 6
            })
        ));
    }

    #[test]
    fn rank_examples() {
        assert_eq!(BitMatrix::identity(3).rank(), 3);
        let dup = BitMatrix::from_strs(&["1100", "1100", "0011"]).unwrap();
        assert_eq!(dup.rank(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = BitMatrix::sample_full_rank(4, 8, &mut rng).unwrap();
        assert_eq!(span_rank(&m), 4);
        assert_eq!(m.rank(), 4);
        let z = BitMatrix::zeros(3, 5);
        assert_eq!(z.rank(), 0);
    }

    #[test]
    fn stacked_and_residual_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = BitMatrix::sample_full_rank(3, 10, &mut rng).unwrap();
        assert_eq!(stacked_rank(&[&h, &h]).unwrap(), 3);
        assert_eq!(residual_rank(&[&h], &h).unwrap(), 0);

        let joint = BitMatrix::sample_full_rank(6, 10, &mut rng).unwrap();
        let a = joint.row_block(0, 3).unwrap();
        let b = joint.row_block(3, 3).unwrap();
        assert_eq!(stacked_rank(&[&a, &b]).unwrap(), 6);
        assert_eq!(residual_rank(&[&a], &b).unwrap(), 3);
        let c = &a ^ &b;
        assert_eq!(
            stacked_rank(&[&a, &b, &c]).unwrap(),
            stacked_rank(&[&a, &b]).unwrap()
        );
        let abc = BitMatrix::vstack([&a, &b, &c]).unwrap();
        assert_eq!(span_rank(&abc), 6);

        let other = BitMatrix::zeros(2, 9);
        assert!(stacked_rank(&[&a, &other]).is_err());
        assert!(residual_rank(&[&a], &other).is_err());
        assert_eq!(stacked_rank(&[]).unwrap(), 0);
    }

    #[test]
    fn residual_rank_partial_dependence() {
        // Four mutually independent m/2-row blocks shared as [a;b], [a;c], [a;d].
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let m = 8;
        let blocks = BitMatrix::sample_full_rank(2 * m, 3 * m, &mut rng).unwrap();
        let part = |i| blocks.row_block(i * m / 2, m / 2).unwrap();
        let (a, b, c, d) = (part(0), part(1), part(2), part(3));
        let h1 = BitMatrix::vstack([&a, &b]).unwrap();
        let h2 = BitMatrix::vstack([&a, &c]).unwrap();
        let h3 = BitMatrix::vstack([&a, &d]).unwrap();
        assert_eq!(residual_rank(&[&h1, &h2], &h3).unwrap(), m / 2);
        let stacked = BitMatrix::vstack([&h1, &h2, &h3]).unwrap();
        assert_eq!(Echelon::new(&stacked).rank(), 2 * m);
    }

    #[test]
    fn solve_examples() {
        let id = BitMatrix::identity(4);
        let s: BitVec = "1011".parse().unwrap();
        assert_eq!(id.solve_any(&s).unwrap(), s);

        let m = BitMatrix::from_strs(&["110", "011"]).unwrap();
        let x = m.solve_any(&"10".parse().unwrap()).unwrap();
        assert_eq!(m.mul_vec(&x).unwrap().to_string(), "10");
        assert_eq!(x.to_string(), "100");
        assert!(m.solve_any(&"00".parse().unwrap()).unwrap().is_zero());

        let dep = BitMatrix::from_strs(&["110", "110"]).unwrap();
        assert!(matches!(
            dep.solve_any(&"10".parse().unwrap()),
            Err(Error::InconsistentSystem)
        ));
    }

    #[test]
    fn sample_full_rank_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            BitMatrix::sample_full_rank(5, 5, &mut rng).unwrap().rank(),
            5
        );
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(
                BitMatrix::sample_full_rank(3, 7, &mut rng).unwrap().rank(),
                3
            );
        }
        let a = BitMatrix::sample_full_rank(4, 9, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        let b = BitMatrix::sample_full_rank(4, 9, &mut ChaCha8Rng::seed_from_u64(77)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            BitMatrix::sample_full_rank(8, 7, &mut rng),
            Err(Error::TooManyRows { .. })
        ));
    }

    #[test]
    fn nullspace_examples() {
        // H = [I | P] gives G = [P^T | I].
        let h = BitMatrix::from_strs(&["10011", "01010"]).unwrap();
        let g = h.nullspace_basis().unwrap();
        assert_eq!(
            g,
            BitMatrix::from_strs(&["00100", "11010", "10001"]).unwrap()
        );
        assert!(h.mul_transpose(&g).unwrap().is_zero());

        let g = hamming3().nullspace_basis().unwrap();
        assert_eq!((g.rows(), g.rank()), (4, 4));
        for z in 0u64..16 {
            let zv = BitVec::from_u64(4, z);
            let codeword = g.transpose().mul_vec(&zv).unwrap();
            assert!(hamming3().mul_vec(&codeword).unwrap().is_zero());
        }

        let rep = BitMatrix::from_strs(&["11"]).unwrap();
        assert_eq!(rep.nullspace_basis().unwrap(), rep);

        let deficient = BitMatrix::from_strs(&["11", "11"]).unwrap();
        assert!(matches!(
            deficient.nullspace_basis(),
            Err(Error::RankDeficient { rank: 1, rows: 2 })
        ));
    }

    #[test]
    fn lemma_uniformity_by_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 10;
        let joint = BitMatrix::sample_full_rank(5, n, &mut rng).unwrap();
        let h = joint.row_block(0, 2).unwrap();
        let ht = joint.row_block(2, 3).unwrap();
        let mut counts = vec![0usize; 1 << 5];
        for a in 0u64..(1 << n) {
            let a = BitVec::from_u64(n, a);
            let s = h.mul_vec(&a).unwrap().to_u64();
            let st = ht.mul_vec(&a).unwrap().to_u64();
            counts[(s | st << 2) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| c == 1 << (n - 5)));
    }

    #[test]
    fn text_format() {
        let h = hamming3();
        let text = h.to_text();
        assert!(text.starts_with("3 7\n0001111\n"));
        assert_eq!(BitMatrix::parse_text(&text).unwrap(), h);
        assert!(matches!(
            BitMatrix::parse_text("2 3\n101\n10\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            BitMatrix::parse_text("2 3\n101\n1x1\n"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            BitMatrix::parse_text("2 3\n101\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn bytes_lsb_first() {
        let v: BitVec = "1000000001".parse().unwrap();
        assert_eq!(v.to_bytes_lsb(), vec![0x01, 0x02]);
        assert_eq!(BitVec::from_bytes_lsb(10, &[0x01, 0x02]).unwrap(), v);
        assert!(BitVec::from_bytes_lsb(10, &[0x01, 0x04]).is_err());
    }

    fn arb_matrix(max_rows: usize, cols: usize) -> impl Strategy<Value = BitMatrix> {
        (1..=max_rows, any::<u64>()).prop_map(move |(rows, seed)| {
            BitMatrix::random(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
        })
    }

    proptest! {
        #[test]
        fn mat_vec_is_linear(m in arb_matrix(6, 70), xs in any::<u64>(), ys in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(xs ^ ys.rotate_left(7));
            let x = BitVec::random(70, &mut rng);
            let y = BitVec::random(70, &mut rng);
            let lhs = m.mul_vec(&(&x ^ &y)).unwrap();
            let rhs = &m.mul_vec(&x).unwrap() ^ &m.mul_vec(&y).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn rank_matches_span_enumeration(m in arb_matrix(8, 12)) {
            prop_assert_eq!(m.rank(), span_rank(&m));
            prop_assert!(m.rank() <= m.rows().min(m.cols()));
        }

        #[test]
        fn stacked_rank_bounds(a in arb_matrix(4, 9), b in arb_matrix(4, 9)) {
            let s = stacked_rank(&[&a, &b]).unwrap();
            prop_assert!(s <= (a.rank() + b.rank()).min(9));
            prop_assert_eq!(residual_rank(&[&a], &b).unwrap() + a.rank(), s);
            prop_assert!(residual_rank(&[&a], &b).unwrap() <= b.rank());
        }

        #[test]
        fn solve_any_satisfies_system(m in arb_matrix(6, 9), seed in any::<u64>()) {
            let x0 = BitVec::random(9, &mut ChaCha8Rng::seed_from_u64(seed));
            let s = m.mul_vec(&x0).unwrap();
            let x = m.solve_any(&s).unwrap();
            prop_assert_eq!(m.mul_vec(&x).unwrap(), s);
        }

        #[test]
        fn kernel_vectors_are_annihilated(m in arb_matrix(6, 10)) {
            let ech = m.echelon();
            if let Some(k) = ech.kernel_basis() {
                prop_assert_eq!(k.rank(), 10 - ech.rank());
                prop_assert!(m.mul_transpose(&k).unwrap().is_zero());
            } else {
                prop_assert_eq!(ech.rank(), 10);
            }
            if let Some(c) = ech.row_dependency() {
                prop_assert!(m.transpose().mul_vec(&c).unwrap().is_zero());
                prop_assert!(!c.is_zero());
            }
        }
    }
}
