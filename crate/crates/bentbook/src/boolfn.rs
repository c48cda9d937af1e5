//! Boolean functions on `n` variables: packed truth tables, Walsh-Hadamard
//! spectra, quadratic forms in algebraic normal form, and GF(2) rank.
//!
//! Index convention: a point `x = (x_1, ..., x_n)` is encoded as the integer
//! `j = x_1 + x_2*2 + ... + x_n*2^(n-1)`, so `x_1` is the least-significant
//! bit. The Walsh-Hadamard transform is
//! `W_f(c) = sum_x (-1)^(f(x) + c.x)` with `c` encoded the same way; a
//! function is bent (even `n`) when every `|W_f(c)| = 2^(n/2)` and near-bent
//! (odd `n`) when the spectrum value set is exactly `{0, +-2^((n+1)/2)}`.
//!
//! For a quadratic form the spectrum is fully determined by the rank `r` of
//! its symplectic matrix: nonzero values share the magnitude `2^(n - r/2)`
//! and occupy a support of exactly `2^r` points. That rank route and the
//! transform route are implemented independently so each can check the other.

use std::collections::BTreeSet;
use std::fmt;

use crate::{Error, Result, MAX_VARS};

// ---------------------------------------------------------------------------
// Truth tables
// ---------------------------------------------------------------------------

/// A Boolean function on `n` variables stored as `2^n` packed bits.
#[derive(Clone, PartialEq, Eq)]
pub struct TruthTable {
    n: usize,
    words: Vec<u64>,
}

impl TruthTable {
    fn check_vars(n: usize) -> Result<()> {
        if n == 0 || n > MAX_VARS {
            return Err(Error::VarCount(n));
        }
        Ok(())
    }

    /// All-zero function on `n` variables.
    pub fn zero(n: usize) -> Result<Self> {
        Self::check_vars(n)?;
        let words = vec![0u64; Self::word_count(n)];
        Ok(TruthTable { n, words })
    }

    /// Builds a table by evaluating `f` at every point `0..2^n`.
    pub fn from_fn<F: FnMut(u64) -> bool>(n: usize, mut f: F) -> Result<Self> {
        let mut tt = Self::zero(n)?;
        for j in 0..tt.len() as u64 {
            if f(j) {
                tt.set(j, true);
            }
        }
        Ok(tt)
    }

    fn word_count(n: usize) -> usize {
        (1usize << n).div_ceil(64)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of table entries, `2^n`.
    pub fn len(&self) -> usize {
        1usize << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Value `f(x)` for the point encoded by `j`.
    pub fn get(&self, j: u64) -> bool {
        debug_assert!((j as usize) < self.len());
        self.words[(j >> 6) as usize] >> (j & 63) & 1 == 1
    }

    pub fn set(&mut self, j: u64, v: bool) {
        debug_assert!((j as usize) < self.len());
        let mask = 1u64 << (j & 63);
        if v {
            self.words[(j >> 6) as usize] |= mask;
        } else {
            self.words[(j >> 6) as usize] &= !mask;
        }
    }

    /// Pointwise sum over GF(2), i.e. `f + g`.
    pub fn add(&self, other: &TruthTable) -> Result<TruthTable> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(TruthTable { n: self.n, words })
    }

    /// Restriction `f|_(x_i = u, x_j = v)` as a function of the remaining
    /// `n - 2` variables, renumbered in ascending original order.
    pub fn restrict(&self, i: usize, j: usize, u: bool, v: bool) -> Result<TruthTable> {
        check_pair(i, j, self.n)?;
        let lo = i - 1;
        let hi = j - 1;
        let mut out = TruthTable::zero(self.n - 2)?;
        for t in 0..out.len() as u64 {
            // Insert the fixed bits back into the compact index.
            let low_part = t & ((1 << lo) - 1);
            let mid_part = (t >> lo) & ((1 << (hi - 1 - lo)) - 1);
            let high_part = t >> (hi - 1);
            let mut x = low_part | (mid_part << (lo + 1)) | (high_part << (hi + 1));
            if u {
                x |= 1 << lo;
            }
            if v {
                x |= 1 << hi;
            }
            out.set(t, self.get(x));
        }
        Ok(out)
    }
}

impl fmt::Debug for TruthTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TruthTable(n={}, ", self.n)?;
        if self.n <= 6 {
            for j in 0..self.len() as u64 {
                write!(f, "{}", self.get(j) as u8)?;
            }
        } else {
            write!(f, "2^{} entries", self.n)?;
        }
        write!(f, ")")
    }
}

fn check_pair(i: usize, j: usize, n: usize) -> Result<()> {
    if i >= 1 && i < j && j <= n {
        Ok(())
    } else {
        Err(Error::BadIndexPair { i, j, n })
    }
}

// ---------------------------------------------------------------------------
// Walsh-Hadamard transform
// ---------------------------------------------------------------------------

/// The full spectrum `W_f(c)` for `c = 0..2^n`, in exact integers.
#[derive(Clone, PartialEq, Eq)]
pub struct WalshSpectrum {
    n: usize,
    values: Vec<i32>,
}

/// Spectrum shape of a Boolean function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumClass {
    /// Even `n`, all values of magnitude `2^(n/2)`.
    Bent,
    /// Odd `n`, value set exactly `{0, +2^((n+1)/2), -2^((n+1)/2)}`.
    NearBent,
    Other,
}

/// Fast Walsh-Hadamard transform, `O(n 2^n)` integer butterflies.
pub fn wht(tt: &TruthTable) -> WalshSpectrum {
    let size = tt.len();
    let mut buf: Vec<i32> = (0..size as u64)
        .map(|j| if tt.get(j) { -1 } else { 1 })
        .collect();
    let mut h = 1;
    while h < size {
        let mut block = 0;
        while block < size {
            for k in block..block + h {
                let a = buf[k];
                let b = buf[k + h];
                buf[k] = a + b;
                buf[k + h] = a - b;
            }
            block += 2 * h;
        }
        h *= 2;
    }
    WalshSpectrum {
        n: tt.n(),
        values: buf,
    }
}

impl WalshSpectrum {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn value(&self, c: u64) -> i64 {
        self.values[c as usize] as i64
    }

    /// Number of points with `W_f(c) != 0`.
    pub fn support(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    /// `sum_c W_f(c)^2`, which must equal `2^(2n)` for every function.
    pub fn energy(&self) -> i64 {
        self.values.iter().map(|&v| (v as i64) * (v as i64)).sum()
    }

    /// Classifies the spectrum as bent / near-bent / other.
    ///
    /// Near-bent demands value-set equality: all three of
    /// `0, +2^((n+1)/2), -2^((n+1)/2)` must occur.
    pub fn classify(&self) -> SpectrumClass {
        if self.n.is_multiple_of(2) {
            let m = 1i32 << (self.n / 2);
            if self.values.iter().all(|&v| v == m || v == -m) {
                return SpectrumClass::Bent;
            }
        } else {
            let m = 1i32 << self.n.div_ceil(2);
            let mut seen_zero = false;
            let mut seen_pos = false;
            let mut seen_neg = false;
            let mut ok = true;
            for &v in &self.values {
                if v == 0 {
                    seen_zero = true;
                } else if v == m {
                    seen_pos = true;
                } else if v == -m {
                    seen_neg = true;
                } else {
                    ok = false;
                    break;
                }
            }
            if ok && seen_zero && seen_pos && seen_neg {
                return SpectrumClass::NearBent;
            }
        }
        SpectrumClass::Other
    }

    /// One value per line, for diffing against external computations.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for v in &self.values {
            out.push_str(&v.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Debug for WalshSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WalshSpectrum(n={}, {:?})", self.n, self.values)
    }
}

/// Convenience wrapper: classification straight from a truth table.
pub fn classify_spectrum(tt: &TruthTable) -> SpectrumClass {
    wht(tt).classify()
}

// ---------------------------------------------------------------------------
// Bit matrices over GF(2)
// ---------------------------------------------------------------------------

/// A dense matrix over GF(2) with at most 64 columns, one word per row.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(cols <= 64, "BitMatrix supports at most 64 columns");
        BitMatrix {
            rows,
            cols,
            data: vec![0; rows],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry at 0-based `(r, c)`.
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.data[r] >> c & 1 == 1
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        if v {
            self.data[r] |= 1 << c;
        } else {
            self.data[r] &= !(1 << c);
        }
    }

    /// Rank over GF(2) by Gaussian elimination on row words.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<u64> = self.data.clone();
        let mut rank = 0;
        for col in 0..self.cols {
            let mask = 1u64 << col;
            let Some(pivot) = (rank..rows.len()).find(|&r| rows[r] & mask != 0) else {
                continue;
            };
            rows.swap(rank, pivot);
            let pivot_row = rows[rank];
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && *row & mask != 0 {
                    *row ^= pivot_row;
                }
            }
            rank += 1;
        }
        rank
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix({}x{})", self.rows, self.cols)?;
        for r in 0..self.rows {
            for c in 0..self.cols {
                write!(f, "{}", self.get(r, c) as u8)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Rank over GF(2) of an arbitrary bit matrix.
pub fn rank_f2(m: &BitMatrix) -> usize {
    m.rank()
}

// ---------------------------------------------------------------------------
// Quadratic forms
// ---------------------------------------------------------------------------

/// A Boolean function of algebraic degree at most 2 in normal form:
/// a set of quadratic monomials `x_i x_j`, a linear mask, and a constant.
///
/// Variables are 1-indexed; the linear mask stores `x_k` at bit `k - 1`.
/// Addition of two forms is the symmetric difference of their monomials.
#[derive(Clone, PartialEq, Eq)]
pub struct QuadForm {
    n: usize,
    pairs: BTreeSet<(usize, usize)>,
    linear: u64,
    constant: bool,
}

impl QuadForm {
    /// The zero form on `n` variables.
    pub fn zero(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::VarCount(n));
        }
        Ok(QuadForm {
            n,
            pairs: BTreeSet::new(),
            linear: 0,
            constant: false,
        })
    }

    /// Builds a purely quadratic form from unordered variable pairs.
    pub fn from_pairs<I: IntoIterator<Item = (usize, usize)>>(n: usize, pairs: I) -> Result<Self> {
        let mut q = Self::zero(n)?;
        for (a, b) in pairs {
            q.toggle_pair(a, b)?;
        }
        Ok(q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn linear_mask(&self) -> u64 {
        self.linear
    }

    pub fn constant(&self) -> bool {
        self.constant
    }

    /// Flips the monomial `x_a x_b` (unordered, `a != b`).
    pub fn toggle_pair(&mut self, a: usize, b: usize) -> Result<()> {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        check_pair(i, j, self.n)?;
        if !self.pairs.remove(&(i, j)) {
            self.pairs.insert((i, j));
        }
        Ok(())
    }

    /// Flips the linear monomial `x_k`.
    pub fn toggle_linear(&mut self, k: usize) -> Result<()> {
        if k < 1 || k > self.n {
            return Err(Error::Invalid(format!(
                "linear index {k} out of range 1..={}",
                self.n
            )));
        }
        self.linear ^= 1 << (k - 1);
        Ok(())
    }

    /// Sets the whole linear part from a mask (bit `k-1` toggles `x_k`).
    pub fn with_linear(mut self, mask: u64) -> Self {
        debug_assert!(self.n == 64 || mask < (1u64 << self.n));
        self.linear = mask;
        self
    }

    pub fn with_constant(mut self, c: bool) -> Self {
        self.constant = c;
        self
    }

    /// Sum of two forms over GF(2): symmetric difference of monomials.
    pub fn add(&self, other: &QuadForm) -> Result<QuadForm> {
        if self.n != other.n {
            return Err(Error::SizeMismatch(self.n, other.n));
        }
        let pairs: BTreeSet<(usize, usize)> = self
            .pairs
            .symmetric_difference(&other.pairs)
            .copied()
            .collect();
        Ok(QuadForm {
            n: self.n,
            pairs,
            linear: self.linear ^ other.linear,
            constant: self.constant ^ other.constant,
        })
    }

    /// Evaluates the form at the point encoded by `x`.
    pub fn evaluate(&self, x: u64) -> bool {
        let mut acc = self.constant;
        acc ^= ((self.linear & x).count_ones() & 1) == 1;
        for &(i, j) in &self.pairs {
            acc ^= (x >> (i - 1) & 1) & (x >> (j - 1) & 1) == 1;
        }
        acc
    }

    /// Expands the form to a packed truth table (needs `n <= MAX_VARS`).
    pub fn truth_table(&self) -> Result<TruthTable> {
        TruthTable::from_fn(self.n, |x| self.evaluate(x))
    }

    /// The symmetric matrix `B` with `B[i][j] = 1` iff `x_(i+1) x_(j+1)` is a
    /// monomial of the form; zero diagonal.
    pub fn symplectic_matrix(&self) -> BitMatrix {
        let mut m = BitMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.pairs {
            m.set(i - 1, j - 1, true);
            m.set(j - 1, i - 1, true);
        }
        m
    }

    /// Rank of the symplectic matrix; always even.
    pub fn rank(&self) -> usize {
        self.symplectic_matrix().rank()
    }

    /// Restriction `Q|_(x_i = u, x_j = v)` as a quadratic form on the
    /// remaining `n - 2` variables, renumbered in ascending original order.
    pub fn restrict(&self, i: usize, j: usize, u: bool, v: bool) -> Result<QuadForm> {
        check_pair(i, j, self.n)?;
        let reindex = |k: usize| k - (k > i) as usize - (k > j) as usize;
        let mut out = QuadForm::zero(self.n - 2)?;
        for &(a, b) in &self.pairs {
            match (a == i || a == j, b == i || b == j) {
                (true, true) => {
                    // x_i x_j becomes the constant u*v.
                    out.constant ^= u & v;
                }
                (true, false) => {
                    let fixed = if a == i { u } else { v };
                    if fixed {
                        out.toggle_linear(reindex(b))?;
                    }
                }
                (false, true) => {
                    let fixed = if b == i { u } else { v };
                    if fixed {
                        out.toggle_linear(reindex(a))?;
                    }
                }
                (false, false) => {
                    out.toggle_pair(reindex(a), reindex(b))?;
                }
            }
        }
        for k in 1..=self.n {
            if self.linear >> (k - 1) & 1 == 1 {
                if k == i {
                    out.constant ^= u;
                } else if k == j {
                    out.constant ^= v;
                } else {
                    out.toggle_linear(reindex(k))?;
                }
            }
        }
        out.constant ^= self.constant;
        Ok(out)
    }
}

impl fmt::Debug for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for QuadForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms: Vec<String> = Vec::new();
        for &(i, j) in &self.pairs {
            terms.push(format!("x{i}x{j}"));
        }
        for k in 1..=self.n {
            if self.linear >> (k - 1) & 1 == 1 {
                terms.push(format!("x{k}"));
            }
        }
        if self.constant {
            terms.push("1".to_string());
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

/// Spectrum facts implied by the rank of a quadratic form's symplectic
/// matrix: nonzero magnitude and support size.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankSpectrum {
    /// `2^(n - r/2)`, the shared magnitude of all nonzero spectrum values.
    pub magnitude: u64,
    /// `2^r`, the number of points where the spectrum is nonzero.
    pub support: u64,
}

/// The rank route to the spectrum shape of a quadratic function.
pub fn spectrum_from_rank(n: usize, rank: usize) -> Result<RankSpectrum> {
    if n == 0 || n > 64 {
        return Err(Error::VarCount(n));
    }
    if rank > n || !rank.is_multiple_of(2) {
        return Err(Error::Invalid(format!(
            "symplectic rank must be even and at most n = {n}, got {rank}"
        )));
    }
    Ok(RankSpectrum {
        magnitude: 1u64 << (n - rank / 2),
        support: 1u64 << rank,
    })
}

/// Classification of a quadratic form via rank alone (no spectrum expansion):
/// bent iff full rank on even `n`; near-bent on odd `n` iff rank `n - 1`,
/// the maximum even value. Rank 0 on `n = 1` is excluded: an affine function
/// has a single-signed spectrum spike, and near-bent demands both signs,
/// which a nondegenerate part of rank at least 2 guarantees.
pub fn classify_from_rank(n: usize, rank: usize) -> SpectrumClass {
    if n.is_multiple_of(2) && rank == n {
        SpectrumClass::Bent
    } else if n % 2 == 1 && rank + 1 == n && rank >= 2 {
        SpectrumClass::NearBent
    } else {
        SpectrumClass::Other
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
