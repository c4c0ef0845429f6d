//! Nested lattice chains `Λ_1 ⊆ Λ_2 ⊆ … ⊆ Λ_K`.
//!
//! All lattices of a chain share `p`, `n`, `gamma` and one full-rank generator
//! over the field; lattice `i` keeps the first `k_i` rows. Nesting is then
//! automatic for nondecreasing ranks, volumes are `gamma^n p^(n - k_i)`, and
//! every pairwise rate is a multiple of `log2(p) / n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field;
use crate::lattice::Lattice;

/// Deterministic full-rank `n x n` generator over the field of `p` elements.
///
/// The draw depends only on `(p, n)` so a chain is fully described by
/// `{p, n, ranks, gamma}`.
pub fn default_generator(p: u64, n: usize) -> Vec<Vec<u64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(p.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ n as u64);
    loop {
        let rows: Vec<Vec<u64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0..p)).collect()).collect();
        if field::rank(&rows, p) == n {
            return rows;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeChain {
    p: u64,
    n: usize,
    gamma: f64,
    rows: Vec<Vec<u64>>,
    ranks: Vec<usize>,
    lattices: Vec<Lattice>,
}

/// Builds a chain with the default generator for `(p, n)`.
pub fn build_chain(p: u64, n: usize, ranks: &[usize], gamma: f64) -> Result<LatticeChain> {
    if !field::is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    LatticeChain::with_rows(p, n, default_generator(p, n), ranks, gamma)
}

impl LatticeChain {
    pub fn with_rows(p: u64, n: usize, rows: Vec<Vec<u64>>, ranks: &[usize], gamma: f64) -> Result<Self> {
        if !field::is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if ranks.is_empty() {
            return Err(Error::InvalidRanks("empty rank list".into()));
        }
        if ranks.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidRanks(format!("{ranks:?} is not nondecreasing")));
        }
        if let Some(&k) = ranks.iter().find(|&&k| k > n) {
            return Err(Error::InvalidRanks(format!("rank {k} exceeds dimension {n}")));
        }
        if rows.len() != n {
            return Err(Error::InvalidRanks(format!("generator needs {n} rows, got {}", rows.len())));
        }
        let top = Lattice::construction_a(p, n, rows.clone(), gamma)?;
        let lattices = ranks.iter().map(|&k| top.with_rank(k)).collect::<Result<Vec<_>>>()?;
        Ok(Self { p, n, gamma, rows: top.rows().to_vec(), ranks: ranks.to_vec(), lattices })
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn len(&self) -> usize {
        self.lattices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattices.is_empty()
    }

    pub fn lattice(&self, i: usize) -> &Lattice {
        &self.lattices[i]
    }

    pub fn lattices(&self) -> &[Lattice] {
        &self.lattices
    }

    pub fn volume(&self, i: usize) -> f64 {
        self.lattices[i].volume()
    }

    /// `R_ij = (1/n) log2(V_i / V_j)`, exact from the ranks.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        (self.ranks[j] as f64 - self.ranks[i] as f64) / self.n as f64 * (self.p as f64).log2()
    }

    /// A lattice of arbitrary rank on this chain's generator.
    pub fn at_rank(&self, k: usize) -> Result<Lattice> {
        Lattice::construction_a(self.p, self.n, self.rows.clone(), self.gamma)?.with_rank(k)
    }

    /// The same chain with every scale multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::with_rows(self.p, self.n, self.rows.clone(), &self.ranks, self.gamma * factor)
    }

    pub fn spec(&self) -> ChainSpec {
        ChainSpec {
            p: self.p,
            n: self.n,
            ranks: self.ranks.clone(),
            gamma: self.gamma,
            rows: Some(self.rows.clone()),
        }
    }
}

/// Serializable chain description `{p, n, ranks, gamma}`; `rows` defaults to
/// [`default_generator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub p: u64,
    pub n: usize,
    pub ranks: Vec<usize>,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<Vec<u64>>>,
}

impl ChainSpec {
    pub fn build(&self) -> Result<LatticeChain> {
        match &self.rows {
            Some(rows) => LatticeChain::with_rows(self.p, self.n, rows.clone(), &self.ranks, self.gamma),
            None => build_chain(self.p, self.n, &self.ranks, self.gamma),
        }
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("chain spec serializes")
    }

    pub fn from_text(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Outcome of [`size_list_lattice`].
#[derive(Debug, Clone)]
pub struct ListSizing {
    pub lattice: Lattice,
    pub rank: usize,
    /// `(1 + margin) (N / (P + N))^(n/2) V`.
    pub target_volume: f64,
    /// `V_s / V_c`, exact.
    pub list_size: u64,
    /// `2^(n (R - C(P/N)))`, the asymptotic list size.
    pub nominal_list_size: f64,
}

/// Picks the smallest-volume intermediate lattice `Λ ⊆ Λ_s ⊆ Λ_c` with
/// `V_s >= (1 + margin) (N / (P + N))^(n/2) V`.
///
/// `coarse` and `fine` must share `p`, `gamma` and have the coarse rows as a
/// prefix of the fine rows (true for any pair taken from one chain).
pub fn size_list_lattice(coarse: &Lattice, fine: &Lattice, signal: f64, noise: f64, margin: f64) -> Result<ListSizing> {
    if !(signal > 0.0 && noise > 0.0) {
        return Err(Error::InvalidParameter(format!("P = {signal}, N = {noise} must be positive")));
    }
    if margin.is_nan() || margin < 0.0 {
        return Err(Error::InvalidParameter(format!("margin {margin} must be nonnegative")));
    }
    if coarse.prime() != fine.prime()
        || coarse.gamma() != fine.gamma()
        || coarse.dim() != fine.dim()
        || coarse.rank() > fine.rank()
        || coarse.rows() != &fine.rows()[..coarse.rank()]
    {
        return Err(Error::NotNested);
    }
    let n = coarse.dim() as f64;
    let ratio = (noise / (signal + noise)).powf(n / 2.0);
    let target = (1.0 + margin) * ratio * coarse.volume();
    let rank = (coarse.rank()..=fine.rank())
        .rev()
        .find(|&k| fine.with_rank(k).map(|l| l.volume() >= target * (1.0 - 1e-12)).unwrap_or(false))
        .ok_or_else(|| {
            Error::Infeasible(format!(
                "no rank in [{}, {}] gives V_s >= {target:.6e} (V = {:.6e})",
                coarse.rank(),
                fine.rank(),
                coarse.volume()
            ))
        })?;
    let lattice = fine.with_rank(rank)?;
    let rate = (coarse.volume() / fine.volume()).log2() / n;
    let capacity = 0.5 * (1.0 + signal / noise).log2();
    Ok(ListSizing {
        list_size: fine.prime().pow((fine.rank() - rank) as u32),
        nominal_list_size: (n * (rate - capacity)).exp2(),
        lattice,
        rank,
        target_volume: target,
    })
}

/// A lattice to be placed in a chain, identified by `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeTarget {
    pub label: String,
    /// Natural log of the desired fundamental volume.
    pub log_volume: f64,
    /// Shaping (coarse) lattices go first among equal volumes.
    pub shaping: bool,
}

/// Chain order: volume descending, shaping lattices first on ties, then input order.
pub fn order_by_volume(targets: &[VolumeTarget]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..targets.len()).collect();
    idx.sort_by(|&a, &b| {
        let (ta, tb) = (&targets[a], &targets[b]);
        tb.log_volume
            .total_cmp(&ta.log_volume)
            .then(tb.shaping.cmp(&ta.shaping))
            .then(a.cmp(&b))
    });
    idx
}

/// Ranks hitting requested rates as closely as possible from below, with the
/// quantization error `requested - achieved` for each.
#[derive(Debug, Clone, PartialEq)]
pub struct RateQuantization {
    pub ranks: Vec<usize>,
    pub achieved: Vec<f64>,
    pub error: Vec<f64>,
}

/// Maps cumulative rates above a base rank to chain ranks: rank `i` is
/// `base + floor(n * rates[i] / log2 p)`, clamped to `n`.
pub fn ranks_for_rates(p: u64, n: usize, base: usize, rates: &[f64]) -> RateQuantization {
    let step = (p as f64).log2() / n as f64;
    let mut ranks = Vec::with_capacity(rates.len());
    let mut achieved = Vec::with_capacity(rates.len());
    let mut error = Vec::with_capacity(rates.len());
    for &r in rates {
        let extra = ((r / step) + 1e-9).floor().max(0.0) as usize;
        let k = (base + extra).min(n);
        let a = (k - base) as f64 * step;
        ranks.push(k);
        achieved.push(a);
        error.push(r - a);
    }
    RateQuantization { ranks, achieved, error }
}

/// Samples used when a second moment has no closed form.
pub const MOMENT_SAMPLES: usize = 20_000;

/// Scale `gamma` giving the rank-`rank` lattice of the default `(p, n)`
/// generator a per-dimension second moment of `target`.
///
/// Exact for cubic Voronoi regions; otherwise from a fixed-seed Monte Carlo
/// estimate with [`MOMENT_SAMPLES`] samples.
pub fn gamma_for_second_moment(p: u64, n: usize, rank: usize, target: f64) -> Result<f64> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidParameter(format!("second moment target {target} must be positive")));
    }
    let unit = build_chain(p, n, &[rank], 1.0)?;
    let lattice = unit.lattice(0);
    let moment = match lattice.exact_second_moment() {
        Some(m) => m,
        None => lattice.second_moment(MOMENT_SAMPLES, 0)?.value,
    };
    Ok((target / moment).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{enumerate_codebook, is_sublattice};

    #[test]
    fn full_pair_rate_is_log_p() {
        let c = build_chain(5, 3, &[0, 3], 1.0).unwrap();
        assert!((c.rate(0, 1) - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn three_level_chain_p3_n2() {
        let c = build_chain(3, 2, &[0, 1, 2], 1.0).unwrap();
        let half_log3 = 0.5 * 3f64.log2();
        assert!((c.rate(0, 1) - half_log3).abs() < 1e-12);
        assert!((c.rate(1, 2) - half_log3).abs() < 1e-12);
        assert_eq!(enumerate_codebook(c.lattice(0), c.lattice(1)).unwrap().len(), 3);
        assert_eq!(enumerate_codebook(c.lattice(1), c.lattice(2)).unwrap().len(), 3);
        for i in 0..3 {
            for j in i..3 {
                assert!(is_sublattice(c.lattice(i), c.lattice(j)).unwrap());
            }
        }
    }

    #[test]
    fn equal_ranks_are_identical() {
        let c = build_chain(3, 4, &[2, 2], 1.5).unwrap();
        assert_eq!(c.rate(0, 1), 0.0);
        assert_eq!(c.lattice(0), c.lattice(1));
    }

    #[test]
    fn invalid_ranks_rejected() {
        assert!(matches!(build_chain(3, 2, &[1, 0], 1.0), Err(Error::InvalidRanks(_))));
        assert!(matches!(build_chain(3, 2, &[0, 3], 1.0), Err(Error::InvalidRanks(_))));
        assert!(matches!(build_chain(3, 2, &[], 1.0), Err(Error::InvalidRanks(_))));
        assert_eq!(build_chain(6, 2, &[0, 1], 1.0).unwrap_err(), Error::NotPrime(6));
    }

    #[test]
    fn rate_additivity() {
        let c = build_chain(5, 4, &[0, 1, 1, 3, 4], 0.3).unwrap();
        for i in 0..c.len() {
            for l in i..c.len() {
                for j in l..c.len() {
                    assert!((c.rate(i, j) - c.rate(i, l) - c.rate(l, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn list_sizing_examples() {
        // P = N, n = 2, p = 3: target 9/2 -> V_s = 9, list of 9
        let c = build_chain(3, 2, &[0, 2], 1.0).unwrap();
        let s = size_list_lattice(c.lattice(0), c.lattice(1), 1.0, 1.0, 0.0).unwrap();
        assert_eq!(s.rank, 0);
        assert_eq!(s.list_size, 9);
        assert!((s.target_volume - 4.5).abs() < 1e-12);

        let c7 = build_chain(7, 2, &[0, 2], 1.0).unwrap();
        let s = size_list_lattice(c7.lattice(0), c7.lattice(1), 1.0, 1.0, 0.0).unwrap();
        assert!((s.target_volume - 24.5).abs() < 1e-12);
        assert_eq!(s.lattice.volume(), 49.0);
        assert_eq!(s.list_size, 49);

        // huge noise: the whole codebook
        let s = size_list_lattice(c.lattice(0), c.lattice(1), 1.0, 1e12, 0.0).unwrap();
        assert_eq!(s.rank, 0);
        // capacity above the rate: unique decoding
        let s = size_list_lattice(c.lattice(0), c.lattice(1), 100.0, 1.0, 0.0).unwrap();
        assert_eq!(s.list_size, 1);
    }

    #[test]
    fn list_sizing_infeasible_and_monotone() {
        let c = build_chain(3, 4, &[0, 4], 1.0).unwrap();
        assert!(matches!(
            size_list_lattice(c.lattice(0), c.lattice(1), 1.0, 1e9, 10.0),
            Err(Error::Infeasible(_))
        ));
        let mut last = 0.0;
        for i in 0..40 {
            let noise = 0.01 * 1.3f64.powi(i);
            let s = size_list_lattice(c.lattice(0), c.lattice(1), 1.0, noise, 0.0).unwrap();
            assert!(s.lattice.volume() >= last);
            last = s.lattice.volume();
        }
    }

    #[test]
    fn ordering_rule() {
        let t = |l: &str, v: f64, s: bool| VolumeTarget { label: l.into(), log_volume: v, shaping: s };
        let order = order_by_volume(&[t("c1", 1.0, false), t("L1", 3.0, true), t("c2", 1.0, true), t("L2", 2.0, true)]);
        assert_eq!(order, vec![1, 3, 2, 0]);
    }

    #[test]
    fn rate_quantization() {
        let q = ranks_for_rates(3, 4, 0, &[0.5 * 3f64.log2(), 0.9, 10.0]);
        assert_eq!(q.ranks, vec![2, 2, 4]);
        assert!(q.error[0].abs() < 1e-12);
        assert!(q.error[1] > 0.0);
    }

    #[test]
    fn spec_round_trip() {
        let c = build_chain(3, 4, &[0, 2, 3], 0.75).unwrap();
        let text = c.spec().to_text();
        let back = ChainSpec::from_text(&text).unwrap().build().unwrap();
        assert_eq!(back, c);
        let bare = ChainSpec { rows: None, ..c.spec() };
        assert_eq!(bare.build().unwrap(), c);
    }

    #[test]
    fn gamma_calibration_hits_target() {
        let g = gamma_for_second_moment(3, 2, 0, 1.0).unwrap();
        let l = build_chain(3, 2, &[0], g).unwrap();
        assert!((l.lattice(0).exact_second_moment().unwrap() - 1.0).abs() < 1e-12);
        let g = gamma_for_second_moment(3, 2, 1, 2.0).unwrap();
        let l = build_chain(3, 2, &[1], g).unwrap();
        let m = l.lattice(0).second_moment(20_000, 7).unwrap();
        assert!((m.value - 2.0).abs() < 0.05 * 2.0);
    }
}
