//! Dithered nested-lattice transmission over the AWGN channel and the
//! lattice list decoder.
//!
//! The transmitter sends `X = (t - U) mod Λ`. The receiver forms
//! `Y' = (α Y + U) mod Λ = (t + Z') mod Λ` with the MMSE coefficient
//! `α = P / (P + N)` and `Z' = (-(1 - α) X + α Z) mod Λ`, then lists every
//! fine-lattice point `λ_c` whose shifted list region `λ_c + V_s` contains `Y'`
//! (equivalently `Y' + V_s` contains `λ_c`), reduced mod `Λ`.
//!
//! Both list forms are computed coset by coset: `Λ_c` splits into
//! `V_s / V_c` cosets of `Λ_s`, and each coset contributes exactly one point
//! to the list.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::chain::LatticeChain;
use crate::error::{Error, Result};
use crate::field;
use crate::lattice::{enumerate_codebook, Codebook, Lattice};
use crate::stats::{trial_rng, ErrorCount};

/// Transmit power `P` and noise variance `N`, per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AwgnParams {
    pub signal: f64,
    pub noise: f64,
}

impl AwgnParams {
    pub fn new(signal: f64, noise: f64) -> Result<Self> {
        if !(signal > 0.0 && signal.is_finite() && noise > 0.0 && noise.is_finite()) {
            return Err(Error::InvalidParameter(format!("AWGN needs P > 0, N > 0 (got P = {signal}, N = {noise})")));
        }
        Ok(Self { signal, noise })
    }

    /// MMSE coefficient `P / (P + N)`.
    pub fn mmse(&self) -> f64 {
        self.signal / (self.signal + self.noise)
    }

    /// `P N / (P + N)`.
    pub fn effective_noise(&self) -> f64 {
        self.signal * self.noise / (self.signal + self.noise)
    }

    pub fn capacity(&self) -> f64 {
        0.5 * (1.0 + self.signal / self.noise).log2()
    }
}

/// `X = (t - U) mod Λ`.
pub fn encode_dithered(t: &[f64], dither: &[f64], coarse: &Lattice) -> Result<Vec<f64>> {
    if t.len() != dither.len() {
        return Err(Error::DimensionMismatch { expected: t.len(), got: dither.len() });
    }
    if !coarse.in_voronoi(t)? {
        return Err(Error::NotACodeword);
    }
    let d: Vec<f64> = t.iter().zip(dither).map(|(a, u)| a - u).collect();
    coarse.mod_lattice(&d)
}

/// `(scale * Y + U) mod Λ` for an arbitrary scaling coefficient.
pub fn scaled_front_end(y: &[f64], dither: &[f64], scale: f64, coarse: &Lattice) -> Result<Vec<f64>> {
    if y.len() != dither.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: dither.len() });
    }
    let v: Vec<f64> = y.iter().zip(dither).map(|(a, u)| scale * a + u).collect();
    coarse.mod_lattice(&v)
}

/// `Y' = (α Y + U) mod Λ` with `α = P / (P + N)`.
pub fn receiver_front_end(y: &[f64], dither: &[f64], awgn: &AwgnParams, coarse: &Lattice) -> Result<Vec<f64>> {
    scaled_front_end(y, dither, awgn.mmse(), coarse)
}

/// Effective noise before reduction, `-(1 - α) X + α Z`.
pub fn effective_noise(x: &[f64], z: &[f64], alpha: f64) -> Vec<f64> {
    x.iter().zip(z).map(|(xi, zi)| -(1.0 - alpha) * xi + alpha * zi).collect()
}

/// Decoded list: distinct codewords of `Λ_c ∩ V(Λ)`, as integer coordinates
/// in units of the chain scale, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct ListDecodeResult {
    pub members: Vec<Vec<i64>>,
    pub contains_truth: Option<bool>,
}

impl ListDecodeResult {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, coords: &[i64]) -> bool {
        self.members.binary_search_by(|m| m.as_slice().cmp(coords)).is_ok()
    }

    /// Marks whether the transmitted codeword is in the list.
    pub fn with_truth(mut self, truth: &[i64]) -> Self {
        self.contains_truth = Some(self.contains(truth));
        self
    }
}

/// A list decoder for the nested triple `Λ ⊆ Λ_s ⊆ Λ_c`.
///
/// With `Λ_s = Λ_c` it is the ordinary unique lattice decoder; with
/// `Λ_s = Λ` it returns the whole codebook.
#[derive(Debug, Clone)]
pub struct ListDecoder {
    coarse: Lattice,
    list: Lattice,
    fine: Lattice,
    leaders: Vec<Vec<i64>>,
}

impl ListDecoder {
    pub fn new(coarse: Lattice, list: Lattice, fine: Lattice) -> Result<Self> {
        let same_family = |a: &Lattice, b: &Lattice| {
            a.prime() == b.prime() && a.gamma() == b.gamma() && a.dim() == b.dim()
        };
        if !same_family(&coarse, &list) || !same_family(&list, &fine) {
            return Err(Error::NotNested);
        }
        if !(crate::lattice::is_sublattice(&coarse, &list)? && crate::lattice::is_sublattice(&list, &fine)?) {
            return Err(Error::NotNested);
        }
        coarse.codewords_if_needed()?;
        list.codewords_if_needed()?;
        fine.codewords_if_needed()?;
        let p = fine.prime();
        let n = fine.dim();
        let extra = field::complement(list.rows(), fine.rows(), p);
        let count = (p as u128).saturating_pow(extra.len() as u32);
        if count > fine.enumeration_limit() {
            return Err(Error::EnumerationBudgetExceeded { cost: count, limit: fine.enumeration_limit() });
        }
        let mut leaders = Vec::with_capacity(count as usize);
        field::for_each_coeffs(extra.len(), p, |a| {
            leaders.push(field::combine(&extra, a, n, p).into_iter().map(|v| v as i64).collect());
        });
        Ok(Self { coarse, list, fine, leaders })
    }

    /// Decoder for the chain triple `(chain[coarse], chain[list], chain[fine])`.
    pub fn from_chain(chain: &LatticeChain, coarse: usize, list: usize, fine: usize) -> Result<Self> {
        Self::new(chain.lattice(coarse).clone(), chain.lattice(list).clone(), chain.lattice(fine).clone())
    }

    /// Unique decoder for `(Λ, Λ_c)`.
    pub fn unique(coarse: Lattice, fine: Lattice) -> Result<Self> {
        Self::new(coarse, fine.clone(), fine)
    }

    pub fn coarse(&self) -> &Lattice {
        &self.coarse
    }

    pub fn list_lattice(&self) -> &Lattice {
        &self.list
    }

    pub fn fine(&self) -> &Lattice {
        &self.fine
    }

    /// `V_s / V_c`.
    pub fn list_size(&self) -> usize {
        self.leaders.len()
    }

    pub fn codebook(&self) -> Result<Codebook> {
        enumerate_codebook(&self.coarse, &self.fine)
    }

    fn units(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.fine.dim() {
            return Err(Error::DimensionMismatch { expected: self.fine.dim(), got: y.len() });
        }
        let g = self.fine.gamma();
        Ok(y.iter().map(|v| v / g).collect())
    }

    fn finish(&self, mut members: Vec<Vec<i64>>) -> ListDecodeResult {
        members.sort();
        members.dedup();
        ListDecodeResult { members, contains_truth: None }
    }

    /// `{ λ_c mod Λ : λ_c ∈ Λ_c, λ_c - Y' ∈ V_s }`.
    pub fn decode(&self, y: &[f64]) -> Result<ListDecodeResult> {
        let y = self.units(y)?;
        let mut members = Vec::with_capacity(self.leaders.len());
        let mut diff = vec![0.0; y.len()];
        for c in &self.leaders {
            for ((d, &ci), &yi) in diff.iter_mut().zip(c).zip(&y) {
                *d = ci as f64 - yi;
            }
            let q = self.list.quantize_units(&diff)?;
            let lambda: Vec<i64> = c.iter().zip(&q).map(|(a, b)| a - b).collect();
            members.push(self.coarse.reduce_coords(&lambda)?);
        }
        Ok(self.finish(members))
    }

    /// `{ λ_c mod Λ : λ_c ∈ Λ_c, Y' ∈ λ_c + V_s }`.
    pub fn decode_q_form(&self, y: &[f64]) -> Result<ListDecodeResult> {
        let y = self.units(y)?;
        let mut members = Vec::with_capacity(self.leaders.len());
        let mut diff = vec![0.0; y.len()];
        for c in &self.leaders {
            for ((d, &ci), &yi) in diff.iter_mut().zip(c).zip(&y) {
                *d = yi - ci as f64;
            }
            let q = self.list.quantize_units(&diff)?;
            let lambda: Vec<i64> = c.iter().zip(&q).map(|(a, b)| a + b).collect();
            members.push(self.coarse.reduce_coords(&lambda)?);
        }
        Ok(self.finish(members))
    }
}

pub fn list_decode(y: &[f64], decoder: &ListDecoder) -> Result<ListDecodeResult> {
    decoder.decode(y)
}

pub fn list_decode_q_form(y: &[f64], decoder: &ListDecoder) -> Result<ListDecodeResult> {
    decoder.decode_q_form(y)
}

/// I.i.d. `N(0, variance)` vector.
pub fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> Vec<f64> {
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite nonnegative variance");
    (0..n).map(|_| normal.sample(rng)).collect()
}

/// One point-to-point trial.
#[derive(Debug, Clone, PartialEq)]
pub struct P2pTrial {
    pub trial: u64,
    pub message: usize,
    pub list_size: usize,
    pub in_list: bool,
    /// `Z' mod Λ ∉ V_s`, computed from the trial's own `X` and `Z`.
    pub noise_outside: bool,
}

/// Aggregate statistics of [`simulate_p2p`].
#[derive(Debug, Clone, PartialEq)]
pub struct P2pStats {
    pub trials: u64,
    pub errors: ErrorCount,
    pub list_size: usize,
    /// Trials whose list size differed from `list_size`.
    pub list_size_deviations: u64,
    /// Trials where `t ∉ L` and `Z' ∉ V_s` disagreed.
    pub event_mismatches: u64,
    pub n: usize,
    pub p: u64,
    pub ranks: Vec<usize>,
    pub signal: f64,
    pub noise: f64,
    pub seed: u64,
    pub log: Vec<P2pTrial>,
}

impl P2pStats {
    pub fn pe_hat(&self) -> f64 {
        self.errors.rate()
    }

    pub fn pe_ci95(&self) -> f64 {
        self.errors.ci95_half_width()
    }

    pub const CSV_HEADER: &'static str = "trials,pe_hat,pe_ci95,list_size,n,p,ranks,P,N,seed";

    pub fn csv_row(&self) -> String {
        let ranks: Vec<String> = self.ranks.iter().map(ToString::to_string).collect();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.trials,
            self.pe_hat(),
            self.pe_ci95(),
            self.list_size,
            self.n,
            self.p,
            ranks.join(";"),
            self.signal,
            self.noise,
            self.seed
        )
    }
}

/// Monte Carlo run of the dithered list-decoding scheme over `trials`
/// independent channel uses.
pub fn simulate_p2p(decoder: &ListDecoder, awgn: &AwgnParams, trials: u64, seed: u64) -> Result<P2pStats> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let codebook = decoder.codebook()?;
    let coarse = decoder.coarse();
    let n = coarse.dim();
    let alpha = awgn.mmse();
    let log = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<P2pTrial> {
            let mut rng = trial_rng(seed, i);
            let message = rng.random_range(1..=codebook.len());
            let entry = codebook.entry(message);
            let u = coarse.sample_uniform_voronoi(&mut rng);
            let x = encode_dithered(&entry.point, &u, coarse)?;
            let z = gaussian_vector(&mut rng, n, awgn.noise);
            let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + b).collect();
            let yp = receiver_front_end(&y, &u, awgn, coarse)?;
            let list = decoder.decode(&yp)?.with_truth(&entry.coords);
            let zp = coarse.mod_lattice(&effective_noise(&x, &z, alpha))?;
            let noise_outside = !decoder.list_lattice().in_voronoi(&zp)?;
            Ok(P2pTrial {
                trial: i,
                message,
                list_size: list.len(),
                in_list: list.contains_truth == Some(true),
                noise_outside,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors = log.iter().filter(|t| !t.in_list).count() as u64;
    let list_size = decoder.list_size();
    Ok(P2pStats {
        trials,
        errors: ErrorCount::new(errors, trials),
        list_size,
        list_size_deviations: log.iter().filter(|t| t.list_size != list_size).count() as u64,
        event_mismatches: log.iter().filter(|t| t.in_list == t.noise_outside).count() as u64,
        n,
        p: coarse.prime(),
        ranks: vec![coarse.rank(), decoder.list_lattice().rank(), decoder.fine().rank()],
        signal: awgn.signal,
        noise: awgn.noise,
        seed,
        log,
    })
}
