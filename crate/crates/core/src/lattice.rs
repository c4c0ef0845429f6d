//! Construction-A lattices and the exact arithmetic built on them.
//!
//! A lattice here is `gamma * { z in Z^n : z mod p in C }` for a linear code
//! `C` over the field of `p` elements, spanned by `k` independent rows. Its
//! volume is `gamma^n * p^(n - k)` exactly. `k = 0` gives `gamma * p Z^n`,
//! `k = n` gives `gamma * Z^n`.
//!
//! Nearest-point search enumerates the `p^k` cosets of `p Z^n` that make up
//! the lattice and rounds coordinate-wise inside each coset. Ties between
//! equally distant lattice points go to the lexicographically smallest one,
//! which keeps the quantizer translation-equivariant.

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field;

/// Absolute tolerance for exact lattice identities in double precision.
pub const TOL: f64 = 1e-9;

/// Default cap on `p^k * 3^n`, the nearest-point search budget.
pub const DEFAULT_ENUMERATION_LIMIT: u128 = 1 << 30;

#[derive(Debug)]
pub struct Lattice {
    p: u64,
    n: usize,
    rows: Vec<Vec<u64>>,
    gamma: f64,
    limit: u128,
    echelon: Vec<Vec<u64>>,
    pivots: Vec<usize>,
    codewords: OnceLock<Vec<i64>>,
}

impl Clone for Lattice {
    fn clone(&self) -> Self {
        Self {
            p: self.p,
            n: self.n,
            rows: self.rows.clone(),
            gamma: self.gamma,
            limit: self.limit,
            echelon: self.echelon.clone(),
            pivots: self.pivots.clone(),
            codewords: self.codewords.clone(),
        }
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p
            && self.n == other.n
            && self.gamma == other.gamma
            && self.echelon == other.echelon
    }
}

/// Round to nearest integer, halves go down.
#[inline]
pub(crate) fn round_half_down(t: f64) -> f64 {
    (t - 0.5).ceil()
}

impl Lattice {
    /// Builds `gamma * (C + p Z^n)` where `C` is spanned by `rows`.
    pub fn construction_a(p: u64, n: usize, rows: Vec<Vec<u64>>, gamma: f64) -> Result<Self> {
        if !field::is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {gamma}")));
        }
        if rows.len() > n {
            return Err(Error::InvalidRanks(format!("{} rows in dimension {n}", rows.len())));
        }
        for r in &rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
        }
        let rows: Vec<Vec<u64>> = rows.into_iter().map(|r| r.into_iter().map(|v| v % p).collect()).collect();
        let (echelon, pivots) = field::rref(&rows, p);
        if pivots.len() != rows.len() {
            return Err(Error::RankDeficient(p));
        }
        Ok(Self {
            p,
            n,
            rows,
            gamma,
            limit: DEFAULT_ENUMERATION_LIMIT,
            echelon,
            pivots,
            codewords: OnceLock::new(),
        })
    }

    /// `gamma * Z^n`, recorded as the full-rank code over `p`.
    pub fn cubic(p: u64, n: usize, gamma: f64) -> Result<Self> {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| u64::from(i == j)).collect())
            .collect();
        Self::construction_a(p, n, rows, gamma)
    }

    pub fn with_enumeration_limit(mut self, limit: u128) -> Self {
        self.limit = limit;
        self
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    /// Code dimension `k`.
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn enumeration_limit(&self) -> u128 {
        self.limit
    }

    pub fn volume(&self) -> f64 {
        self.gamma.powi(self.n as i32) * (self.p as f64).powi((self.n - self.rank()) as i32)
    }

    /// Same code, scale multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut out = Self::construction_a(self.p, self.n, self.rows.clone(), self.gamma * factor)?;
        out.limit = self.limit;
        Ok(out)
    }

    /// Same generator rows truncated to the first `k`.
    pub fn with_rank(&self, k: usize) -> Result<Self> {
        if k > self.rank() {
            return Err(Error::InvalidRanks(format!("rank {k} exceeds {}", self.rank())));
        }
        let mut out = Self::construction_a(self.p, self.n, self.rows[..k].to_vec(), self.gamma)?;
        out.limit = self.limit;
        Ok(out)
    }

    /// Generator matrix `G` (column basis vectors, row-major `n x n`), including the scale.
    ///
    /// The basis is the lifted echelon rows plus `p e_j` for each non-pivot column.
    pub fn generator_matrix(&self) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = self
            .echelon
            .iter()
            .map(|r| r.iter().map(|&v| v as f64 * self.gamma).collect())
            .collect();
        for j in (0..self.n).filter(|j| !self.pivots.contains(j)) {
            let mut e = vec![0.0; self.n];
            e[j] = self.p as f64 * self.gamma;
            cols.push(e);
        }
        (0..self.n).map(|i| cols.iter().map(|c| c[i]).collect()).collect()
    }

    /// Generator columns as vectors.
    pub fn basis(&self) -> Vec<Vec<f64>> {
        let g = self.generator_matrix();
        (0..self.n).map(|j| g.iter().map(|row| row[j]).collect()).collect()
    }

    pub fn enumeration_cost(&self) -> u128 {
        (self.p as u128)
            .saturating_pow(self.rank() as u32)
            .saturating_mul(3u128.saturating_pow(self.n as u32))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got });
        }
        Ok(())
    }

    fn codewords(&self) -> Result<&[i64]> {
        let cost = self.enumeration_cost();
        if cost > self.limit {
            return Err(Error::EnumerationBudgetExceeded { cost, limit: self.limit });
        }
        Ok(self.codewords.get_or_init(|| {
            let mut out = Vec::with_capacity(self.p.pow(self.rank() as u32) as usize * self.n);
            field::for_each_coeffs(self.rank(), self.p, |a| {
                let c = field::combine(&self.rows, a, self.n, self.p);
                out.extend(c.into_iter().map(|v| v as i64));
            });
            out
        }))
    }

    /// Nearest lattice point to `y` expressed in units of `gamma`; returns integer coordinates.
    pub(crate) fn quantize_units(&self, y: &[f64]) -> Result<Vec<i64>> {
        self.check_dim(y.len())?;
        let k = self.rank();
        if k == self.n {
            return Ok(y.iter().map(|&t| round_half_down(t) as i64).collect());
        }
        let p = self.p as f64;
        if k == 0 {
            return Ok(y.iter().map(|&t| (p * round_half_down(t / p)) as i64).collect());
        }
        let words = self.codewords()?;
        let n = self.n;
        let mut best_d = f64::INFINITY;
        let mut best = vec![0i64; n];
        let mut cand = vec![0i64; n];
        for c in words.chunks_exact(n) {
            let mut d = 0.0;
            let bound = best_d + 1e-12 * (1.0 + best_d);
            let mut pruned = false;
            for j in 0..n {
                let cj = c[j] as f64;
                let z = cj + p * round_half_down((y[j] - cj) / p);
                let r = y[j] - z;
                d += r * r;
                cand[j] = z as i64;
                if d > bound {
                    pruned = true;
                    break;
                }
            }
            if pruned {
                continue;
            }
            let tie = best_d.is_finite() && (d - best_d).abs() <= 1e-12 * (1.0 + best_d);
            if (d < best_d && !tie) || (tie && cand < best) {
                best_d = d;
                best.copy_from_slice(&cand);
            }
        }
        Ok(best)
    }

    /// `Q(x)` as integer coordinates in units of `gamma`.
    pub fn nearest_coords(&self, x: &[f64]) -> Result<Vec<i64>> {
        let y: Vec<f64> = x.iter().map(|v| v / self.gamma).collect();
        self.quantize_units(&y)
    }

    /// Nearest-neighbour quantizer `Q(x)`.
    pub fn nearest_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .nearest_coords(x)?
            .into_iter()
            .map(|z| z as f64 * self.gamma)
            .collect())
    }

    /// `x mod Λ = x - Q(x)`.
    pub fn mod_lattice(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.nearest_coords(x)?;
        Ok(x.iter().zip(&z).map(|(v, &zi)| v - zi as f64 * self.gamma).collect())
    }

    /// Integer-coordinate reduction `z mod Λ` for points already on the `gamma Z^n` grid.
    pub fn reduce_coords(&self, z: &[i64]) -> Result<Vec<i64>> {
        let y: Vec<f64> = z.iter().map(|&v| v as f64).collect();
        let q = self.quantize_units(&y)?;
        Ok(z.iter().zip(&q).map(|(a, b)| a - b).collect())
    }

    /// True iff `Q(x) = 0`, i.e. `x` lies in the fundamental Voronoi region.
    pub fn in_voronoi(&self, x: &[f64]) -> Result<bool> {
        Ok(self.nearest_coords(x)?.iter().all(|&z| z == 0))
    }

    /// Membership test for integer coordinates (units of `gamma`).
    pub fn contains_coords(&self, z: &[i64]) -> bool {
        if z.len() != self.n {
            return false;
        }
        let mut v: Vec<u64> = z.iter().map(|&c| field::reduce(c, self.p)).collect();
        for (row, &piv) in self.echelon.iter().zip(&self.pivots) {
            let f = v[piv];
            if f != 0 {
                for (x, &r) in v.iter_mut().zip(row) {
                    *x = (*x + self.p * self.p - f * r) % self.p;
                }
            }
        }
        v.iter().all(|&x| x == 0)
    }

    /// Membership test for a real vector, up to [`TOL`] relative to the scale.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.n {
            return false;
        }
        let mut z = Vec::with_capacity(self.n);
        for &v in x {
            let y = v / self.gamma;
            let r = y.round();
            if (y - r).abs() > TOL * (1.0 + y.abs()) {
                return false;
            }
            z.push(r as i64);
        }
        self.contains_coords(&z)
    }

    /// Half-width of an axis-aligned box containing the Voronoi region.
    ///
    /// Every lattice contains `gamma p Z^n` (or `gamma Z^n` at full rank), whose
    /// Voronoi cube therefore contains ours.
    pub fn covering_box_half_width(&self) -> f64 {
        if self.rank() == self.n {
            self.gamma / 2.0
        } else {
            self.gamma * self.p as f64 / 2.0
        }
    }

    /// Uniform sample from the fundamental Voronoi region.
    ///
    /// Draws uniformly over a fundamental cube of the sublattice `gamma p Z^n`
    /// and reduces mod the lattice, which is exactly uniform on the region.
    pub fn sample_uniform_voronoi<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let side = 2.0 * self.covering_box_half_width();
        let x: Vec<f64> = (0..self.n).map(|_| rng.random::<f64>() * side).collect();
        self.mod_lattice(&x).expect("dimension matches and budget checked on construction of codewords")
    }

    /// Rejection sampler: uniform on the covering box, accept when `Q(u) = 0`.
    pub fn sample_uniform_voronoi_rejection<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_tries: usize,
    ) -> Result<Vec<f64>> {
        let h = self.covering_box_half_width();
        for _ in 0..max_tries {
            let u: Vec<f64> = (0..self.n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * h).collect();
            if self.in_voronoi(&u)? {
                return Ok(u);
            }
        }
        Err(Error::RejectionBudgetExceeded { tries: max_tries })
    }

    /// Closed-form second moment when the Voronoi region is a cube (`k = 0` or `k = n`).
    pub fn exact_second_moment(&self) -> Option<f64> {
        let side = 2.0 * self.covering_box_half_width();
        (self.rank() == 0 || self.rank() == self.n).then(|| side * side / 12.0)
    }

    /// Monte Carlo estimate of the per-dimension second moment of the Voronoi region.
    pub fn second_moment(&self, samples: usize, seed: u64) -> Result<SecondMoment> {
        if samples == 0 {
            return Err(Error::InvalidParameter("samples must be at least 1".into()));
        }
        self.codewords_if_needed()?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..samples {
            let u = self.sample_uniform_voronoi(&mut rng);
            let e = u.iter().map(|v| v * v).sum::<f64>() / self.n as f64;
            sum += e;
            sum_sq += e * e;
        }
        let m = samples as f64;
        let value = sum / m;
        let var = if samples > 1 { (sum_sq / m - value * value).max(0.0) * m / (m - 1.0) } else { 0.0 };
        Ok(SecondMoment { value, std_error: (var / m).sqrt() })
    }

    pub(crate) fn codewords_if_needed(&self) -> Result<()> {
        if self.rank() != 0 && self.rank() != self.n {
            self.codewords()?;
        }
        Ok(())
    }

    pub fn record(&self) -> LatticeRecord {
        LatticeRecord {
            p: self.p,
            n: self.n,
            k: self.rank(),
            rows: self.rows.clone(),
            gamma: self.gamma,
        }
    }
}

/// Monte Carlo second-moment estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoment {
    pub value: f64,
    pub std_error: f64,
}

/// Serializable description `{p, n, k, rows, gamma}` of a Construction-A lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeRecord {
    pub p: u64,
    pub n: usize,
    pub k: usize,
    pub rows: Vec<Vec<u64>>,
    pub gamma: f64,
}

impl LatticeRecord {
    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("record serializes")
    }

    pub fn from_text(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<Lattice> {
        if self.rows.len() != self.k {
            return Err(Error::Parse(format!("k = {} but {} rows given", self.k, self.rows.len())));
        }
        Lattice::construction_a(self.p, self.n, self.rows.clone(), self.gamma)
    }
}

/// True iff `coarse ⊆ fine`, checked on the generators of `coarse`.
pub fn is_sublattice(coarse: &Lattice, fine: &Lattice) -> Result<bool> {
    if coarse.dim() != fine.dim() {
        return Err(Error::DimensionMismatch { expected: coarse.dim(), got: fine.dim() });
    }
    if coarse.prime() == fine.prime() && coarse.gamma() == fine.gamma() {
        // exact: coarse = C_c + pZ^n lies in C_f + pZ^n iff every coarse row lies in C_f
        return Ok(coarse.rows().iter().all(|r| {
            let z: Vec<i64> = r.iter().map(|&v| v as i64).collect();
            fine.contains_coords(&z)
        }));
    }
    Ok(coarse.basis().iter().all(|g| fine.contains(g)))
}

/// One codeword of a nested lattice code: a fine-lattice point in the coarse Voronoi region.
#[derive(Debug, Clone, PartialEq)]
pub struct CodebookEntry {
    /// Message label, `1..=len`.
    pub message: usize,
    pub point: Vec<f64>,
    /// Coordinates in units of the fine lattice scale.
    pub coords: Vec<i64>,
}

/// The codebook `Λ_c ∩ V(Λ)` with its message bijection.
#[derive(Debug, Clone)]
pub struct Codebook {
    entries: Vec<CodebookEntry>,
    index: HashMap<Vec<i64>, usize>,
    unit: f64,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    /// Scale in which [`CodebookEntry::coords`] are expressed.
    pub fn unit(&self) -> f64 {
        self.unit
    }

    /// Entry for a 1-based message label.
    pub fn entry(&self, message: usize) -> &CodebookEntry {
        &self.entries[message - 1]
    }

    pub fn point(&self, message: usize) -> &[f64] {
        &self.entry(message).point
    }

    pub fn message_of_coords(&self, coords: &[i64]) -> Option<usize> {
        self.index.get(coords).copied()
    }

    /// Message whose point equals `x` (within [`TOL`]), if any.
    pub fn message_of(&self, x: &[f64]) -> Option<usize> {
        let mut z = Vec::with_capacity(x.len());
        for &v in x {
            let y = v / self.unit;
            let r = y.round();
            if (y - r).abs() > TOL * (1.0 + y.abs()) {
                return None;
            }
            z.push(r as i64);
        }
        self.message_of_coords(&z)
    }
}

/// Enumerates `fine ∩ V(coarse)`, sorted lexicographically and labelled `1..`.
pub fn enumerate_codebook(coarse: &Lattice, fine: &Lattice) -> Result<Codebook> {
    if !is_sublattice(coarse, fine)? {
        return Err(Error::NotNested);
    }
    let ratio = coarse.volume() / fine.volume();
    let count = ratio.round();
    if count as u128 > fine.enumeration_limit() {
        return Err(Error::EnumerationBudgetExceeded { cost: count as u128, limit: fine.enumeration_limit() });
    }
    let n = fine.dim();
    let mut coords_list: Vec<Vec<i64>> = Vec::new();
    if coarse.prime() == fine.prime() && coarse.gamma() == fine.gamma() {
        let p = fine.prime();
        let extra = field::complement(coarse.rows(), fine.rows(), p);
        coarse.codewords_if_needed()?;
        let mut err = None;
        field::for_each_coeffs(extra.len(), p, |a| {
            if err.is_some() {
                return;
            }
            let c: Vec<i64> = field::combine(&extra, a, n, p).into_iter().map(|v| v as i64).collect();
            match coarse.reduce_coords(&c) {
                Ok(z) => coords_list.push(z),
                Err(e) => err = Some(e),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    } else {
        // scan the fine grid over the coarse covering box
        let h = coarse.covering_box_half_width();
        let lo = (-h / fine.gamma()).floor() as i64 - 1;
        let hi = (h / fine.gamma()).ceil() as i64 + 1;
        let width = (hi - lo + 1) as u128;
        let cost = width.saturating_pow(n as u32);
        if cost > fine.enumeration_limit() {
            return Err(Error::EnumerationBudgetExceeded { cost, limit: fine.enumeration_limit() });
        }
        for idx in 0..cost {
            let mut rem = idx;
            let z: Vec<i64> = (0..n)
                .map(|_| {
                    let d = (rem % width) as i64;
                    rem /= width;
                    lo + d
                })
                .collect();
            if fine.contains_coords(&z) {
                let x: Vec<f64> = z.iter().map(|&v| v as f64 * fine.gamma()).collect();
                if coarse.in_voronoi(&x)? {
                    coords_list.push(z);
                }
            }
        }
    }
    coords_list.sort();
    coords_list.dedup();
    let unit = fine.gamma();
    let entries: Vec<CodebookEntry> = coords_list
        .into_iter()
        .enumerate()
        .map(|(i, c)| CodebookEntry {
            message: i + 1,
            point: c.iter().map(|&v| v as f64 * unit).collect(),
            coords: c,
        })
        .collect();
    let index = entries.iter().map(|e| (e.coords.clone(), e.message)).collect();
    Ok(Codebook { entries, index, unit })
}
