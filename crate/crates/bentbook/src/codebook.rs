//! Spreading codebooks built from permutation sets: GDJ sign sequences,
//! Golay complementarity, peak-to-average power estimates, and coherence.
//!
//! A permutation `pi` of `{1..n}` with a linear offset `c` defines the
//! quadratic function `f(x) = Q_pi(x) + c . x`; reading `(-1)^f` along the
//! fixed index convention gives a binary sequence of length `N = 2^n` whose
//! Golay mate is obtained by adding `x_pi(1)`. Stacking the `N` sequences of
//! each permutation (one per offset) side by side yields a codebook whose
//! within-block columns are orthogonal and whose cross-block coherence is
//! `2^(-r_min/2)`, with `r_min` the minimum pairwise rank of the difference
//! forms.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::boolfn::QuadForm;
use crate::quadperm::{q_pi, Perm};
use crate::{Error, Result};

/// A `+-1` sequence whose length is a power of two.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignSequence {
    n: usize,
    values: Vec<i8>,
}

impl SignSequence {
    /// Wraps explicit values; the length must be `2^n` for some `n` within
    /// the supported range and every entry must be `+1` or `-1`.
    pub fn from_values(values: Vec<i8>) -> Result<Self> {
        let len = values.len();
        if !len.is_power_of_two() {
            return Err(Error::Invalid(format!(
                "sequence length {len} is not a power of two"
            )));
        }
        let n = len.trailing_zeros() as usize;
        if n == 0 || n > crate::MAX_VARS {
            return Err(Error::VarCount(n));
        }
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(Error::Invalid("sequence entries must be +-1".into()));
        }
        Ok(SignSequence { n, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Packs the signs into words, bit set where the entry is `-1`.
    fn packed(&self) -> Vec<u64> {
        let mut words = vec![0u64; self.values.len().div_ceil(64)];
        for (j, &v) in self.values.iter().enumerate() {
            if v == -1 {
                words[j / 64] |= 1 << (j % 64);
            }
        }
        words
    }
}

/// Exact integer inner product of two packed sign columns of length `len`.
fn packed_dot(a: &[u64], b: &[u64], len: usize) -> i64 {
    let disagree: u32 = a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum();
    len as i64 - 2 * disagree as i64
}

/// The sign sequence of `Q_p + c . x` read along the index convention.
pub fn gdj_sequence(p: &Perm, c: u64) -> Result<SignSequence> {
    let n = p.n();
    if c >> n != 0 {
        return Err(Error::Invalid(format!(
            "linear offset {c} does not fit {n} variables"
        )));
    }
    sequence_of(&q_pi(p).with_linear(c))
}

/// The Golay mate: the head sequence with `x_p(1)` and an optional constant
/// added. Always forms a Golay pair with `gdj_sequence(p, c)`.
pub fn golay_mate(p: &Perm, c: u64, eps_prime: bool) -> Result<SignSequence> {
    let n = p.n();
    if c >> n != 0 {
        return Err(Error::Invalid(format!(
            "linear offset {c} does not fit {n} variables"
        )));
    }
    let mask = c ^ (1u64 << (p.get(1) - 1));
    sequence_of(&q_pi(p).with_linear(mask).with_constant(eps_prime))
}

fn sequence_of(form: &QuadForm) -> Result<SignSequence> {
    let tt = form.truth_table()?;
    let len = 1usize << tt.n();
    let values = (0..len as u64)
        .map(|j| if tt.get(j) { -1i8 } else { 1 })
        .collect();
    Ok(SignSequence { n: tt.n(), values })
}

/// Aperiodic autocorrelation `C_a(tau)`, an exact integer; symmetric in the
/// sign of `tau`.
pub fn aperiodic_autocorr(a: &SignSequence, tau: i64) -> Result<i64> {
    let len = a.len() as i64;
    if tau.abs() >= len {
        return Err(Error::Invalid(format!(
            "shift {tau} out of range for length {len}"
        )));
    }
    let t = tau.unsigned_abs() as usize;
    let v = a.values();
    Ok(v[..v.len() - t]
        .iter()
        .zip(&v[t..])
        .map(|(&x, &y)| (x as i64) * (y as i64))
        .sum())
}

/// Whether the autocorrelations of the two sequences cancel at every
/// nonzero shift.
pub fn is_golay_pair(a: &SignSequence, b: &SignSequence) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    for tau in 1..a.len() as i64 {
        if aperiodic_autocorr(a, tau)? + aperiodic_autocorr(b, tau)? != 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A peak-to-average power estimate: the exact maximum over a dense grid of
/// carrier phases (a lower bound on the continuous peak) together with the
/// autocorrelation upper bound `(N + sum over nonzero shifts of |C|) / N`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PaprEstimate {
    pub grid: f64,
    pub upper_bound: f64,
}

/// Squared magnitude of the sequence's continuous spectrum sampled on the
/// grid `t = k / (oversample * N)`.
fn grid_power(a: &SignSequence, oversample: usize) -> Vec<f64> {
    let len = oversample * a.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (slot, &v) in buf.iter_mut().zip(a.values()) {
        slot.re = v as f64;
    }
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    buf.into_iter().map(|z| z.norm_sqr()).collect()
}

/// Peak-to-average power of the sequence over a grid of `oversample * N`
/// equally spaced phases, with the analytic upper bound alongside.
pub fn papr(a: &SignSequence, oversample: usize) -> Result<PaprEstimate> {
    if oversample < 4 {
        return Err(Error::Invalid(format!(
            "oversampling factor must be at least 4, got {oversample}"
        )));
    }
    let n = a.len() as f64;
    let peak = grid_power(a, oversample).into_iter().fold(0.0f64, f64::max);
    let mut corr_mass = a.len() as i64;
    for tau in 1..a.len() as i64 {
        corr_mass += 2 * aperiodic_autocorr(a, tau)?.abs();
    }
    Ok(PaprEstimate {
        grid: peak / n,
        upper_bound: corr_mass as f64 / n,
    })
}

/// Summary metrics of a codebook. Coherence is kept as an exact fraction
/// string; the peak-power fields stay unset until the columns have been
/// materialized and measured.
#[derive(Clone, Debug, Serialize)]
pub struct CodebookMetrics {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "N")]
    pub seq_len: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub r_min: Option<usize>,
    pub coherence: String,
    pub papr_max_grid: Option<f64>,
    pub papr_upper_bound: Option<f64>,
}

/// Coherence and rank metrics straight from the permutations, without
/// materializing any columns. A single-permutation book has no cross-block
/// pairs; its coherence is reported as zero.
pub fn metrics_for(perms: &[Perm]) -> Result<CodebookMetrics> {
    let (n, l) = check_perms(perms)?;
    let seq_len = 1usize << n;
    let (r_min, coherence) = if l < 2 {
        (None, "0".to_string())
    } else {
        let rc = coherence_via_rank(perms)?;
        (Some(rc.r_min), format!("1/{}", 1u64 << (rc.r_min / 2)))
    };
    Ok(CodebookMetrics {
        n,
        l,
        seq_len,
        k: l * seq_len,
        r_min,
        coherence,
        papr_max_grid: None,
        papr_upper_bound: None,
    })
}

fn check_perms(perms: &[Perm]) -> Result<(usize, usize)> {
    if perms.is_empty() {
        return Err(Error::Invalid("no permutations given".into()));
    }
    let n = perms[0].n();
    for p in perms {
        if p.n() != n {
            return Err(Error::SizeMismatch(n, p.n()));
        }
    }
    for (i, p) in perms.iter().enumerate() {
        if perms[i + 1..].contains(p) {
            return Err(Error::Invalid(format!("duplicate permutation {p}")));
        }
    }
    Ok((n, perms.len()))
}

/// A materialized spreading codebook: `L` blocks of `N` sign columns. The
/// unit-norm scaling is metadata; entries stay integral.
#[derive(Clone, Debug)]
pub struct Codebook {
    n: usize,
    perms: Vec<Perm>,
    columns: Vec<SignSequence>,
    metrics: CodebookMetrics,
}

/// Builds the codebook of a distinct permutation list: block `l` holds the
/// sequences of `perms[l]` for offsets `c = 0..N-1` in integer order.
/// Within-block orthogonality is checked during assembly.
pub fn spreading_matrix(perms: &[Perm]) -> Result<Codebook> {
    let (n, _) = check_perms(perms)?;
    if n > 12 {
        return Err(Error::Guard(format!(
            "codebook materialization is capped at 12 variables, got {n}"
        )));
    }
    let metrics = metrics_for(perms)?;
    let seq_len = 1u64 << n;
    let columns: Vec<SignSequence> = perms
        .par_iter()
        .flat_map_iter(|p| (0..seq_len).map(move |c| gdj_sequence(p, c)))
        .collect::<Result<_>>()?;
    // Within a block the product of columns c1 and c2 depends only on
    // c1 ^ c2, so checking every offset against the first column covers
    // every pair.
    for block in columns.chunks(seq_len as usize) {
        let base = block[0].packed();
        for col in &block[1..] {
            if packed_dot(&base, &col.packed(), block[0].len()) != 0 {
                return Err(Error::Verification(
                    "within-block columns failed orthogonality".into(),
                ));
            }
        }
    }
    Ok(Codebook {
        n,
        perms: perms.to_vec(),
        columns,
        metrics,
    })
}

impl Codebook {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.perms.len()
    }

    /// Sequence length `N = 2^n`, the row count.
    pub fn seq_len(&self) -> usize {
        1 << self.n
    }

    /// Total number of columns `K = L * N`.
    pub fn k(&self) -> usize {
        self.columns.len()
    }

    pub fn perms(&self) -> &[Perm] {
        &self.perms
    }

    pub fn columns(&self) -> &[SignSequence] {
        &self.columns
    }

    pub fn column(&self, idx: usize) -> &SignSequence {
        &self.columns[idx]
    }

    pub fn metrics(&self) -> &CodebookMetrics {
        &self.metrics
    }

    /// Measures every column's peak power and records the worst grid value
    /// and worst upper bound in the metrics.
    pub fn with_papr_metrics(mut self, oversample: usize) -> Result<Codebook> {
        let estimates: Vec<PaprEstimate> = self
            .columns
            .par_iter()
            .map(|col| papr(col, oversample))
            .collect::<Result<_>>()?;
        let worst = |f: fn(&PaprEstimate) -> f64| estimates.iter().map(f).fold(0.0f64, f64::max);
        self.metrics.papr_max_grid = Some(worst(|e| e.grid));
        self.metrics.papr_upper_bound = Some(worst(|e| e.upper_bound));
        Ok(self)
    }

    /// CSV rendering: a header row naming each column `b<block>_c<offset>`,
    /// then one row per sequence position with `1` / `-1` entries.
    pub fn to_csv(&self) -> String {
        let seq_len = self.seq_len();
        let header = (0..self.k())
            .map(|idx| format!("b{}_c{}", idx / seq_len, idx % seq_len))
            .collect::<Vec<_>>()
            .join(",");
        let mut out = header;
        out.push('\n');
        for row in 0..seq_len {
            let line = self
                .columns
                .iter()
                .map(|col| col.values()[row].to_string())
                .collect::<Vec<_>>()
                .join(",");
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// Packed binary rendering: a little-endian 64-bit count of signs, then
    /// the signs row-major, eight per byte starting at the low bit, with a
    /// set bit encoding `-1`.
    pub fn to_packed_bits(&self) -> Vec<u8> {
        let total = self.seq_len() * self.k();
        let mut out = Vec::with_capacity(8 + total.div_ceil(8));
        out.extend_from_slice(&(total as u64).to_le_bytes());
        let mut acc = 0u8;
        let mut filled = 0;
        for row in 0..self.seq_len() {
            for col in &self.columns {
                if col.values()[row] == -1 {
                    acc |= 1 << filled;
                }
                filled += 1;
                if filled == 8 {
                    out.push(acc);
                    acc = 0;
                    filled = 0;
                }
            }
        }
        if filled > 0 {
            out.push(acc);
        }
        out
    }
}

/// Exact maximum absolute inner product over cross-block column pairs.
pub fn max_cross_inner(cb: &Codebook) -> Result<i64> {
    if cb.l() < 2 {
        return Err(Error::Invalid("coherence needs at least two blocks".into()));
    }
    if cb.n() > 8 {
        return Err(Error::Guard(format!(
            "direct coherence scan is capped at 8 variables, got {}",
            cb.n()
        )));
    }
    let seq_len = cb.seq_len();
    let packed: Vec<Vec<u64>> = cb.columns.iter().map(SignSequence::packed).collect();
    let k = cb.k();
    let best = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut local = 0i64;
            for j in (i + 1)..k {
                if i / seq_len == j / seq_len {
                    continue;
                }
                local = local.max(packed_dot(&packed[i], &packed[j], seq_len).abs());
            }
            local
        })
        .max()
        .unwrap_or(0);
    Ok(best)
}

/// Coherence by brute-force inner products: `max |<a, b>| / N` over
/// cross-block pairs.
pub fn coherence_direct(cb: &Codebook) -> Result<f64> {
    Ok(max_cross_inner(cb)? as f64 / cb.seq_len() as f64)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RankCoherence {
    pub mu: f64,
    pub r_min: usize,
}

/// Coherence through the difference-form ranks: `mu = 2^(-r_min/2)` with
/// `r_min` minimized over permutation pairs.
pub fn coherence_via_rank(perms: &[Perm]) -> Result<RankCoherence> {
    let (_, l) = check_perms(perms)?;
    if l < 2 {
        return Err(Error::Invalid(
            "coherence needs at least two permutations".into(),
        ));
    }
    let mut r_min = usize::MAX;
    for i in 0..l {
        for j in (i + 1)..l {
            let rank = q_pi(&perms[i]).add(&q_pi(&perms[j]))?.rank();
            r_min = r_min.min(rank);
        }
    }
    Ok(RankCoherence {
        mu: 2f64.powf(-(r_min as f64) / 2.0),
        r_min,
    })
}

/// The largest Walsh magnitude across pairwise difference forms,
/// `2^(n - r_min/2)`; equals `2^n` times the coherence.
pub fn w_phi(perms: &[Perm]) -> Result<u64> {
    let rc = coherence_via_rank(perms)?;
    let n = perms[0].n();
    Ok(1u64 << (n - rc.r_min / 2))
}

/// The Welch lower bound on the coherence of `K` unit columns in `N`
/// dimensions.
pub fn welch_bound(seq_len: usize, k: usize) -> Result<f64> {
    if seq_len < 1 || k <= seq_len {
        return Err(Error::Invalid(format!(
            "Welch bound needs K > N >= 1, got N={seq_len}, K={k}"
        )));
    }
    let (n, k) = (seq_len as f64, k as f64);
    Ok(((k - n) / ((k - 1.0) * n)).sqrt())
}

/// The coherence floor attainable by quadratic-form codebooks:
/// `1/sqrt(2^n)` for even `n`, `1/sqrt(2^(n-1))` for odd `n`.
pub fn coherence_floor(n: usize) -> f64 {
    let r = if n.is_multiple_of(2) { n } else { n - 1 };
    2f64.powf(-(r as f64) / 2.0)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extend::self_extend;

    use itertools::Itertools;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pi1() -> Vec<Perm> {
        [
            "[1,2,3,4]",
            "[3,2,4,1]",
            "[3,4,1,2]",
            "[1,3,4,2]",
            "[4,2,1,3]",
            "[4,1,3,2]",
        ]
        .map(|s| s.parse::<Perm>().unwrap())
        .to_vec()
    }

    fn all_perms(n: usize) -> Vec<Perm> {
        (1..=n)
            .permutations(n)
            .map(|m| Perm::new(m).unwrap())
            .collect()
    }

    #[test]
    fn test_gdj_sequence_examples() {
        let a = gdj_sequence(&Perm::identity(2), 0).unwrap();
        assert_eq!(a.values(), &[1, 1, 1, -1]);
        for n in [3, 4, 5] {
            let a = gdj_sequence(&Perm::identity(n), 0).unwrap();
            assert_eq!(a.values()[0], 1);
            assert_eq!(a.len(), 1 << n);
        }
        assert!(gdj_sequence(&Perm::identity(3), 8).is_err());
    }

    #[test]
    fn test_golay_mate_basics() {
        let p = Perm::identity(4);
        let a = gdj_sequence(&p, 0).unwrap();
        let b = golay_mate(&p, 0, false).unwrap();
        for tau in 1..16 {
            assert_eq!(
                aperiodic_autocorr(&a, tau).unwrap() + aperiodic_autocorr(&b, tau).unwrap(),
                0,
                "shift {tau}"
            );
        }
        // Flipping the constant negates every entry and leaves the
        // autocorrelations alone.
        let flipped = golay_mate(&p, 0, true).unwrap();
        assert!(b
            .values()
            .iter()
            .zip(flipped.values())
            .all(|(&x, &y)| x == -y));
        for tau in 0..16 {
            assert_eq!(
                aperiodic_autocorr(&b, tau).unwrap(),
                aperiodic_autocorr(&flipped, tau).unwrap()
            );
        }
        let rho1: Perm = "[3,2,4,1]".parse().unwrap();
        for c in 0..16 {
            let a = gdj_sequence(&rho1, c).unwrap();
            let b = golay_mate(&rho1, c, false).unwrap();
            assert!(is_golay_pair(&a, &b).unwrap());
        }
    }

    #[test]
    fn test_aperiodic_autocorr() {
        let a = gdj_sequence(&Perm::identity(3), 5).unwrap();
        assert_eq!(aperiodic_autocorr(&a, 0).unwrap(), 8);
        for tau in 1..8 {
            assert_eq!(
                aperiodic_autocorr(&a, tau).unwrap(),
                aperiodic_autocorr(&a, -tau).unwrap()
            );
        }
        assert!(aperiodic_autocorr(&a, 8).is_err());
        assert!(aperiodic_autocorr(&a, -9).is_err());
    }

    #[test]
    fn test_is_golay_pair_edges() {
        let ones = SignSequence::from_values(vec![1; 4]).unwrap();
        assert!(!is_golay_pair(&ones, &ones).unwrap());
        let a = SignSequence::from_values(vec![1, 1]).unwrap();
        let b = SignSequence::from_values(vec![1, -1]).unwrap();
        assert!(is_golay_pair(&a, &b).unwrap());
        let long = SignSequence::from_values(vec![1; 8]).unwrap();
        assert!(is_golay_pair(&a, &long).is_err());
        assert!(SignSequence::from_values(vec![1, 1, 1]).is_err());
        assert!(SignSequence::from_values(vec![1, 2]).is_err());
    }

    #[test]
    fn test_golay_exhaustive_small_orders() {
        for n in [4usize, 5] {
            for p in all_perms(n) {
                for c in 0..1u64 << n {
                    for eps in [false, true] {
                        let a = gdj_sequence(&p, c).unwrap();
                        let b = golay_mate(&p, c, eps).unwrap();
                        assert!(is_golay_pair(&a, &b).unwrap(), "{p}, c={c}, eps={eps}");
                    }
                }
            }
        }
    }

    #[test]
    fn test_papr_examples() {
        let ones = SignSequence::from_values(vec![1; 4]).unwrap();
        let est = papr(&ones, 8).unwrap();
        assert!((est.grid - 4.0).abs() < 1e-9);
        assert!(est.upper_bound >= est.grid - 1e-9);

        let pair = SignSequence::from_values(vec![1, 1]).unwrap();
        let est = papr(&pair, 16).unwrap();
        assert!((est.grid - 2.0).abs() < 1e-9);

        assert!(papr(&ones, 3).is_err());
    }

    #[test]
    fn test_golay_pair_power_complement() {
        // For a Golay pair the two spectral power curves sum to 2N at every
        // phase, which pins the grid evaluation end to end.
        let p: Perm = "[3,2,4,1]".parse().unwrap();
        for c in [0u64, 7, 11] {
            let a = gdj_sequence(&p, c).unwrap();
            let b = golay_mate(&p, c, false).unwrap();
            let ga = grid_power(&a, 8);
            let gb = grid_power(&b, 8);
            for (x, y) in ga.iter().zip(&gb) {
                assert!((x + y - 32.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn test_spreading_matrix_shapes_and_orthogonality() {
        let cb = spreading_matrix(&pi1()).unwrap();
        assert_eq!(cb.seq_len(), 16);
        assert_eq!(cb.k(), 96);
        assert_eq!(cb.l(), 6);
        // Exhaustive within-block scan at this size.
        for block in 0..cb.l() {
            for c1 in 0..16 {
                for c2 in (c1 + 1)..16 {
                    let a = cb.column(block * 16 + c1);
                    let b = cb.column(block * 16 + c2);
                    let dot: i64 = a
                        .values()
                        .iter()
                        .zip(b.values())
                        .map(|(&x, &y)| (x * y) as i64)
                        .sum();
                    assert_eq!(dot, 0);
                }
            }
        }

        let single = spreading_matrix(&[Perm::identity(4)]).unwrap();
        assert_eq!(single.k(), 16);
        assert_eq!(single.metrics().coherence, "0");
        assert_eq!(single.metrics().r_min, None);

        assert!(spreading_matrix(&[Perm::identity(4), Perm::identity(4)]).is_err());
        assert!(spreading_matrix(&[Perm::identity(16)]).is_err());

        let wide = self_extend(&pi1(), 2, false).unwrap();
        let cb = spreading_matrix(&wide).unwrap();
        assert_eq!(cb.seq_len(), 256);
        assert_eq!(cb.k(), 1536);
    }

    #[test]
    fn test_within_block_random_pairs_n8() {
        let perms = self_extend(&pi1(), 2, false).unwrap();
        let cb = spreading_matrix(&perms).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10_000 {
            let block = rng.gen_range(0..cb.l());
            let c1 = rng.gen_range(0..256);
            let mut c2 = rng.gen_range(0..256);
            if c1 == c2 {
                c2 = (c2 + 1) % 256;
            }
            let a = cb.column(block * 256 + c1).packed();
            let b = cb.column(block * 256 + c2).packed();
            assert_eq!(packed_dot(&a, &b, 256), 0);
        }
    }

    #[test]
    fn test_coherence_direct_and_rank_agree() {
        let cb = spreading_matrix(&pi1()).unwrap();
        let direct = coherence_direct(&cb).unwrap();
        assert!((direct - 0.25).abs() < 1e-12);
        let rc = coherence_via_rank(&pi1()).unwrap();
        assert_eq!(rc.r_min, 4);
        assert!((rc.mu - 0.25).abs() < 1e-12);
        // Exact agreement: max|inner|^2 * 2^r_min = N^2.
        let peak = max_cross_inner(&cb).unwrap();
        assert_eq!(peak * peak * (1 << rc.r_min), 16 * 16);

        let wide = self_extend(&pi1(), 2, false).unwrap();
        let cb = spreading_matrix(&wide).unwrap();
        let rc = coherence_via_rank(&wide).unwrap();
        assert_eq!(rc.r_min, 8);
        let peak = max_cross_inner(&cb).unwrap();
        assert_eq!(peak * peak * (1 << rc.r_min), 256 * 256);
        assert!((coherence_direct(&cb).unwrap() - 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn test_identical_forms_repeat_columns() {
        // rho_2 and rho_5 trace the same path edges, so their blocks
        // coincide and the coherence collapses to 1.
        let pair: Vec<Perm> = vec!["[2,4,1,3]".parse().unwrap(), "[3,1,4,2]".parse().unwrap()];
        let cb = spreading_matrix(&pair).unwrap();
        assert!((coherence_direct(&cb).unwrap() - 1.0).abs() < 1e-12);
        let rc = coherence_via_rank(&pair).unwrap();
        assert_eq!(rc.r_min, 0);
        assert_eq!(w_phi(&pair).unwrap(), 16);
    }

    #[test]
    fn test_coherence_guards() {
        let single = spreading_matrix(&[Perm::identity(4)]).unwrap();
        assert!(coherence_direct(&single).is_err());
        assert!(coherence_via_rank(&[Perm::identity(4)]).is_err());
        let wide = self_extend(&pi1(), 3, false).unwrap();
        let rc = coherence_via_rank(&wide).unwrap();
        assert_eq!(rc.r_min, 12);
        assert!((rc.mu - 1.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn test_w_phi_values() {
        assert_eq!(w_phi(&pi1()).unwrap(), 4);
        let wide = self_extend(&pi1(), 2, false).unwrap();
        assert_eq!(w_phi(&wide).unwrap(), 16);
        let rc = coherence_via_rank(&wide).unwrap();
        assert!((w_phi(&wide).unwrap() as f64 - 256.0 * rc.mu).abs() < 1e-9);
    }

    #[test]
    fn test_welch_bound_values() {
        let w = welch_bound(16, 96).unwrap();
        assert!((w - (80.0f64 / (95.0 * 16.0)).sqrt()).abs() < 1e-15);
        assert!(w < 0.25);
        let w = welch_bound(10, 11).unwrap();
        assert!((w - 0.1).abs() < 1e-15);
        assert!(welch_bound(16, 16).is_err());
        assert!(welch_bound(0, 5).is_err());

        assert!((coherence_floor(8) - 1.0 / 16.0).abs() < 1e-15);
        assert!((coherence_floor(5) - 0.25).abs() < 1e-15);
        // The floor at n=8 is achieved by the self-extended set.
        let wide = self_extend(&pi1(), 2, false).unwrap();
        let rc = coherence_via_rank(&wide).unwrap();
        assert!((rc.mu - coherence_floor(8)).abs() < 1e-15);
    }

    #[test]
    fn test_paterson_consistency() {
        use crate::search::paterson_bound;
        for (perms, n) in [(pi1(), 4), (self_extend(&pi1(), 2, false).unwrap(), 8)] {
            let rc = coherence_via_rank(&perms).unwrap();
            if (rc.mu - coherence_floor(n)).abs() < 1e-15 && n % 2 == 0 {
                assert!(perms.len() <= paterson_bound(n));
            }
        }
    }

    #[test]
    fn test_papr_all_columns_of_materialized_books() {
        let cb = spreading_matrix(&pi1())
            .unwrap()
            .with_papr_metrics(16)
            .unwrap();
        let grid = cb.metrics().papr_max_grid.unwrap();
        let bound = cb.metrics().papr_upper_bound.unwrap();
        assert!(grid <= 2.0 + 1e-9, "grid peak {grid}");
        assert!(bound >= grid - 1e-9);
        for col in cb.columns() {
            let est = papr(col, 16).unwrap();
            assert!(est.grid <= 2.0 + 1e-9);
            assert!(est.upper_bound >= est.grid - 1e-9);
        }
    }

    #[test]
    fn test_papr_extended_book_within_bound() {
        let wide = self_extend(&pi1(), 2, false).unwrap();
        let cb = spreading_matrix(&wide)
            .unwrap()
            .with_papr_metrics(4)
            .unwrap();
        assert!(cb.metrics().papr_max_grid.unwrap() <= 2.0 + 1e-9);
    }

    #[test]
    fn test_metrics_and_exports() {
        let cb = spreading_matrix(&pi1())
            .unwrap()
            .with_papr_metrics(16)
            .unwrap();
        let json = serde_json::to_string(cb.metrics()).unwrap();
        assert!(json.starts_with(
            "{\"n\":4,\"L\":6,\"N\":16,\"K\":96,\"r_min\":4,\"coherence\":\"1/4\",\"papr_max_grid\":"
        ));

        let csv = cb.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("b0_c0,b0_c1,"));
        assert!(header.ends_with("b5_c15"));
        assert_eq!(csv.lines().count(), 17);
        let first = lines.next().unwrap();
        // Row 0 evaluates every form at x = 0: all signs positive.
        assert!(first.split(',').all(|cell| cell == "1"));

        let packed = cb.to_packed_bits();
        let total = u64::from_le_bytes(packed[..8].try_into().unwrap()) as usize;
        assert_eq!(total, 16 * 96);
        assert_eq!(packed.len(), 8 + total / 8);
        let mut idx = 0;
        for row in 0..16 {
            for col in 0..96 {
                let bit = (packed[8 + idx / 8] >> (idx % 8)) & 1;
                let expect = if cb.column(col).values()[row] == -1 {
                    1
                } else {
                    0
                };
                assert_eq!(bit, expect);
                idx += 1;
            }
        }

        // Metrics without materialization, for sizes past the guard.
        let huge = self_extend(&pi1(), 4, false).unwrap();
        assert!(spreading_matrix(&huge).is_err());
        let m = metrics_for(&huge).unwrap();
        assert_eq!(m.n, 16);
        assert_eq!(m.k, 6 * 65536);
        assert_eq!(m.r_min, Some(16));
        assert_eq!(m.coherence, "1/256");
        assert!(m.papr_max_grid.is_none());
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.ends_with("\"papr_max_grid\":null,\"papr_upper_bound\":null}"));
    }
}
