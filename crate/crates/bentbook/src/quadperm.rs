//! Permutation-indexed quadratic forms and the compatibility relation.
//!
//! For a permutation `pi` of `{1, ..., n}` the path form is
//! `Q_pi(x) = x_pi(1) x_pi(2) + x_pi(2) x_pi(3) + ... + x_pi(n-1) x_pi(n)`,
//! the adjacency form of the Hamiltonian path `pi(1) - pi(2) - ... - pi(n)`.
//! Two permutations are *compatible* when `Q_pi + Q_rho` is bent (even `n`)
//! or near-bent (odd `n`). Compatibility is what makes the corresponding
//! Golay sequence blocks of a spreading codebook meet the coherence bound
//! with equality.
//!
//! Compatibility is decided two ways: by the rank of the symplectic matrix
//! of the difference form (exact, cheap, any `n`) and, for `n <= 16`, by
//! expanding the Walsh spectrum and classifying it. [`compatible`] runs both
//! and insists they agree; [`compatible_rank`] is the rank-only variant used
//! inside large searches.
//!
//! The Walsh-Hadamard condition (WHC) for a bent `q` and a pair `(i, j)`
//! asks that `prod_(a,b) W_q(c + a e_i + b e_j) = 2^(2n)` for every `c`.
//! For bent quadratics the four restrictions `q|_(x_i=u, x_j=v)` decide it:
//! either every restricted spectrum point splits 3-zeros/1-spike (condition
//! holds) or all four restrictions are bent (condition fails with product
//! `-2^(2n)`). [`whc`] takes the restriction route; [`whc_direct`] multiplies
//! out the definition as an independent oracle.

use std::fmt;
use std::str::FromStr;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::boolfn::{classify_from_rank, wht, QuadForm, SpectrumClass, WalshSpectrum};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Permutations
// ---------------------------------------------------------------------------

/// A permutation of `{1, ..., n}`, stored as the image list `[pi(1), ..., pi(n)]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Perm {
    map: Vec<usize>,
}

impl Perm {
    /// Validates that `map` is a bijection on `1..=map.len()`.
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n + 1];
        let mut ok = n >= 1;
        for &v in &map {
            if v < 1 || v > n || seen[v] {
                ok = false;
                break;
            }
            seen[v] = true;
        }
        if !ok {
            return Err(Error::NotPermutation {
                expected: n,
                got: format!("{map:?}"),
            });
        }
        Ok(Perm { map })
    }

    pub fn identity(n: usize) -> Self {
        Perm {
            map: (1..=n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.map.len()
    }

    /// Image `pi(k)` for 1-indexed `k`.
    pub fn get(&self, k: usize) -> usize {
        self.map[k - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(idx, &v)| v == idx + 1)
    }

    /// The reversed traversal `[pi(n), ..., pi(1)]`; same path, same form.
    pub fn reverse(&self) -> Perm {
        let mut map = self.map.clone();
        map.reverse();
        Perm { map }
    }

    pub fn inverse(&self) -> Perm {
        let mut map = vec![0; self.map.len()];
        for (idx, &v) in self.map.iter().enumerate() {
            map[v - 1] = idx + 1;
        }
        Perm { map }
    }
}

/// Composition `(p o q)(k) = p(q(k))`: apply `q` first.
pub fn compose(p: &Perm, q: &Perm) -> Result<Perm> {
    if p.n() != q.n() {
        return Err(Error::SizeMismatch(p.n(), q.n()));
    }
    let map = (1..=q.n()).map(|k| p.get(q.get(k))).collect();
    Ok(Perm { map })
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (idx, v) in self.map.iter().enumerate() {
            if idx > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Perm {
    type Err = Error;

    /// Parses the bracket form `[3,2,4,1]`; interior whitespace is allowed.
    fn from_str(s: &str) -> Result<Perm> {
        let t = s.trim();
        let inner = t
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| Error::Parse(format!("expected [..] permutation, got {s:?}")))?;
        let mut map = Vec::new();
        for tok in inner.split(',') {
            let tok = tok.trim();
            if tok.is_empty() {
                return Err(Error::Parse(format!("empty entry in permutation {s:?}")));
            }
            let v: usize = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad entry {tok:?} in permutation {s:?}")))?;
            map.push(v);
        }
        Perm::new(map)
    }
}

impl Serialize for Perm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.map.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Perm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let map = Vec::<usize>::deserialize(d)?;
        Perm::new(map).map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Path forms and compatibility
// ---------------------------------------------------------------------------

/// The path form `Q_pi` of a permutation.
pub fn q_pi(p: &Perm) -> QuadForm {
    let n = p.n();
    let mut q = QuadForm::zero(n).expect("permutation size already validated");
    for k in 1..n {
        q.toggle_pair(p.get(k), p.get(k + 1))
            .expect("path edges are valid pairs");
    }
    q
}

/// Outcome of a compatibility test, with the evidence that produced it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompatVerdict {
    pub compatible: bool,
    /// Classification of the difference form `Q_p + Q_q`.
    pub class: SpectrumClass,
    /// Symplectic rank of the difference form.
    pub rank: usize,
}

fn verdict_from_rank(n: usize, rank: usize) -> CompatVerdict {
    let class = classify_from_rank(n, rank);
    CompatVerdict {
        compatible: matches!(class, SpectrumClass::Bent | SpectrumClass::NearBent),
        class,
        rank,
    }
}

/// Rank-route compatibility test; works at any size.
pub fn compatible_rank(p: &Perm, q: &Perm) -> Result<CompatVerdict> {
    if p.n() != q.n() {
        return Err(Error::SizeMismatch(p.n(), q.n()));
    }
    let diff = q_pi(p).add(&q_pi(q))?;
    Ok(verdict_from_rank(p.n(), diff.rank()))
}

/// Compatibility test. For `n <= 16` the spectrum of the difference form is
/// also expanded and classified; the two routes must agree.
pub fn compatible(p: &Perm, q: &Perm) -> Result<CompatVerdict> {
    if p.n() != q.n() {
        return Err(Error::SizeMismatch(p.n(), q.n()));
    }
    let n = p.n();
    let diff = q_pi(p).add(&q_pi(q))?;
    let verdict = verdict_from_rank(n, diff.rank());
    if n <= 16 {
        let via_wht = wht(&diff.truth_table()?).classify();
        assert_eq!(
            via_wht, verdict.class,
            "rank and spectrum routes disagree for {p} vs {q}"
        );
    }
    Ok(verdict)
}

// ---------------------------------------------------------------------------
// Walsh-Hadamard condition
// ---------------------------------------------------------------------------

/// The two shapes a bent quadratic's restrictions can take on a pair `(i, j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dichotomy {
    /// At every reduced point, three restricted spectra vanish and one has
    /// magnitude `2^(n/2)`; the WHC product is `+2^(2n)` everywhere.
    CaseI,
    /// All four restrictions are bent on `n - 2` variables; the product is
    /// `-2^(2n)` everywhere.
    CaseII,
}

fn require_bent(q: &QuadForm) -> Result<()> {
    let n = q.n();
    if !n.is_multiple_of(2) || n < 4 {
        return Err(Error::Invalid(format!(
            "WHC analysis needs even n >= 4, got n = {n}"
        )));
    }
    let rank = q.rank();
    if rank != n {
        return Err(Error::NotBent { n, rank });
    }
    Ok(())
}

fn restricted_spectra(q: &QuadForm, i: usize, j: usize) -> Result<[WalshSpectrum; 4]> {
    Ok([
        wht(&q.restrict(i, j, false, false)?.truth_table()?),
        wht(&q.restrict(i, j, true, false)?.truth_table()?),
        wht(&q.restrict(i, j, false, true)?.truth_table()?),
        wht(&q.restrict(i, j, true, true)?.truth_table()?),
    ])
}

/// Classifies a bent quadratic's restriction behaviour on `(i, j)` by
/// examining the four restricted spectra pointwise. A point matching
/// neither shape, or a mix of shapes across points, is reported as a
/// dichotomy violation (impossible for genuinely bent input).
pub fn prop1_classify(q: &QuadForm, i: usize, j: usize) -> Result<Dichotomy> {
    require_bent(q)?;
    let n = q.n();
    let spectra = restricted_spectra(q, i, j)?;
    let spike = 1i64 << (n / 2);
    let flat = 1i64 << ((n - 2) / 2);
    let mut verdict: Option<Dichotomy> = None;
    for c in 0..1u64 << (n - 2) {
        let vals = [
            spectra[0].value(c),
            spectra[1].value(c),
            spectra[2].value(c),
            spectra[3].value(c),
        ];
        let zeros = vals.iter().filter(|&&v| v == 0).count();
        let point = if zeros == 3 && vals.iter().any(|&v| v.abs() == spike) {
            Dichotomy::CaseI
        } else if zeros == 0 && vals.iter().all(|&v| v.abs() == flat) {
            Dichotomy::CaseII
        } else {
            return Err(Error::DichotomyViolation {
                i,
                j,
                detail: format!("unexpected restricted values {vals:?} at c = {c}"),
            });
        };
        match verdict {
            None => verdict = Some(point),
            Some(prev) if prev != point => {
                return Err(Error::DichotomyViolation {
                    i,
                    j,
                    detail: format!("mixed cases across points (first flip at c = {c})"),
                });
            }
            Some(_) => {}
        }
    }
    Ok(verdict.expect("n >= 4 guarantees at least one reduced point"))
}

/// Whether the bent quadratic `q` satisfies the Walsh-Hadamard condition on
/// `(i, j)`, decided through the restriction dichotomy.
pub fn whc(q: &QuadForm, i: usize, j: usize) -> Result<bool> {
    Ok(prop1_classify(q, i, j)? == Dichotomy::CaseI)
}

/// Direct evaluation of the WHC definition: multiplies the four spectrum
/// values over every coset of `<e_i, e_j>` and compares with `+2^(2n)`.
/// Quadratic in `2^n`; an oracle for [`whc`], not a work path.
pub fn whc_direct(q: &QuadForm, i: usize, j: usize) -> Result<bool> {
    require_bent(q)?;
    let n = q.n();
    if i < 1 || i >= j || j > n {
        return Err(Error::BadIndexPair { i, j, n });
    }
    let sp = wht(&q.truth_table()?);
    let ei = 1u64 << (i - 1);
    let ej = 1u64 << (j - 1);
    let want = 1i128 << (2 * n);
    for c in 0..1u64 << n {
        let prod = sp.value(c) as i128
            * sp.value(c ^ ei) as i128
            * sp.value(c ^ ej) as i128
            * sp.value(c ^ ei ^ ej) as i128;
        if prod != want {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
