//! Block-Markov decode-and-forward over the physically degraded AWGN relay
//! channel `Y_R = X_1 + Z_R`, `Y = X_1 + X_R + Z_R + Z'`.
//!
//! The source superimposes a fresh-message codeword `X_1(w_b)` (power `αP`)
//! and a cooperative codeword `X_2(s_b)` (power `ᾱP`) carrying the bin of the
//! previous message; the relay sends the scaled copy
//! `X_R = sqrt(P_R / (ᾱP)) X_2`. The destination decodes the bin from the
//! coherent sum `κ X_2` with `κ = 1 + sqrt(P_R / (ᾱP))`, strips it, and
//! list-decodes the fresh message. The previous message is the unique list
//! member that falls in the decoded bin.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{build_chain, gamma_for_second_moment, ranks_for_rates, size_list_lattice, LatticeChain, ListSizing};
use crate::channel::{encode_dithered, gaussian_vector, receiver_front_end, scaled_front_end, AwgnParams, ListDecoder};
use crate::error::{Error, Result};
use crate::lattice::Codebook;
use crate::optimize::Maximum;
use crate::region::degraded_cut;
use crate::stats::{trial_rng, ErrorCount};

/// Parameters of one decode-and-forward experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradedRelayParams {
    /// Source power `P`.
    pub signal: f64,
    /// Relay power `P_R`.
    pub relay_power: f64,
    /// Relay noise variance `N_R`.
    pub relay_noise: f64,
    /// Extra destination noise variance `N`; the destination sees `N + N_R`.
    pub extra_noise: f64,
    /// Power split `α`: the fresh message gets `αP`.
    pub alpha: f64,
    /// Number of messages `B`; the run lasts `B + 1` blocks.
    pub blocks: usize,
    pub p: u64,
    pub n: usize,
    /// Message rate `R`, rounded down to a multiple of `log2(p) / n`.
    pub rate: f64,
    /// Bin rate `R_R`, rounded down the same way.
    pub bin_rate: f64,
    /// Relative slack on the list-lattice volume target.
    #[serde(default)]
    pub list_margin: f64,
    /// Forces the rank of the list lattice instead of sizing it from the channel.
    #[serde(default)]
    pub list_rank: Option<usize>,
}

impl DegradedRelayParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("signal", self.signal),
            ("relay_power", self.relay_power),
            ("relay_noise", self.relay_noise),
            ("extra_noise", self.extra_noise),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive and finite")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} must lie strictly inside (0, 1)", self.alpha)));
        }
        if self.blocks < 2 {
            return Err(Error::InvalidParameter(format!("blocks = {} must be at least 2", self.blocks)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        for (name, v) in [("rate", self.rate), ("bin_rate", self.bin_rate), ("list_margin", self.list_margin)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be nonnegative and finite")));
            }
        }
        Ok(())
    }

    /// `ᾱ = 1 - α`.
    pub fn alpha_bar(&self) -> f64 {
        1.0 - self.alpha
    }

    /// Relay amplitude `sqrt(P_R / (ᾱP))`.
    pub fn relay_gain(&self) -> f64 {
        (self.relay_power / (self.alpha_bar() * self.signal)).sqrt()
    }

    /// Coherent gain `κ = 1 + sqrt(P_R / (ᾱP))`.
    pub fn kappa(&self) -> f64 {
        1.0 + self.relay_gain()
    }

    /// Destination noise variance `N + N_R`.
    pub fn destination_noise(&self) -> f64 {
        self.extra_noise + self.relay_noise
    }

    /// MMSE coefficient of the bin decoder, `P' / (P' + αP + N + N_R)` with `P' = κ² ᾱP`.
    pub fn bin_mmse(&self) -> f64 {
        let pp = self.kappa().powi(2) * self.alpha_bar() * self.signal;
        pp / (pp + self.alpha * self.signal + self.destination_noise())
    }
}

/// Random assignment of messages `1..=domain` to bins `1..=bins`.
///
/// Entries are i.i.d. uniform, except that with at least as many bins as
/// messages the assignment is a random injection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinningMap {
    bins: usize,
    table: Vec<usize>,
}

impl BinningMap {
    pub fn new(domain: usize, bins: usize, seed: u64) -> Result<Self> {
        if domain == 0 || bins == 0 {
            return Err(Error::InvalidParameter("binning needs a nonempty domain and at least one bin".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let table = if bins >= domain {
            index::sample(&mut rng, bins, domain).into_iter().map(|b| b + 1).collect()
        } else {
            (0..domain).map(|_| rng.random_range(1..=bins)).collect()
        };
        Ok(Self { bins, table })
    }

    pub fn domain(&self) -> usize {
        self.table.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Bin of `message` (both 1-based).
    pub fn bin(&self, message: usize) -> usize {
        self.table[message - 1]
    }

    pub fn is_injective(&self) -> bool {
        let mut seen = vec![false; self.bins + 1];
        self.table.iter().all(|&b| !std::mem::replace(&mut seen[b], true))
    }

    /// Messages per bin, index `b - 1` for bin `b`.
    pub fn occupancy(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.bins];
        for &b in &self.table {
            counts[b - 1] += 1;
        }
        counts
    }
}

/// Codebooks shared by source, relay and destination.
#[derive(Debug, Clone)]
pub struct DfCodebooks {
    pub params: DegradedRelayParams,
    /// `Λ_1 ⊆ Λ_s1 ⊆ Λ_c1` with `σ²(Λ_1) = αP`.
    pub fresh: LatticeChain,
    /// `Λ_2 ⊆ Λ_c2` with `σ²(Λ_2) = ᾱP`.
    pub cooperative: LatticeChain,
    pub sizing: ListSizing,
    pub messages: Codebook,
    pub bin_words: Codebook,
    pub binning: BinningMap,
    relay_decoder: ListDecoder,
    list_decoder: ListDecoder,
    bin_decoder: ListDecoder,
}

impl DfCodebooks {
    pub fn list_decoder(&self) -> &ListDecoder {
        &self.list_decoder
    }

    pub fn relay_decoder(&self) -> &ListDecoder {
        &self.relay_decoder
    }

    /// Unique decoder for `(κΛ_2, κΛ_c2)`.
    pub fn bin_decoder(&self) -> &ListDecoder {
        &self.bin_decoder
    }

    /// Message rate after rank quantization.
    pub fn rate(&self) -> f64 {
        self.fresh.rate(0, 2)
    }

    pub fn bin_rate(&self) -> f64 {
        self.cooperative.rate(0, 1)
    }

    pub fn list_size(&self) -> usize {
        self.list_decoder.list_size()
    }
}

/// Builds both chains, the list lattice and the binning map; the bin
/// assignment is drawn from `seed`.
pub fn build_df_codebooks(params: &DegradedRelayParams, seed: u64) -> Result<DfCodebooks> {
    params.validate()?;
    let (p, n) = (params.p, params.n);
    let kc1 = ranks_for_rates(p, n, 0, &[params.rate]).ranks[0];
    let kc2 = ranks_for_rates(p, n, 0, &[params.bin_rate]).ranks[0];
    let g1 = gamma_for_second_moment(p, n, 0, params.alpha * params.signal)?;
    let g2 = gamma_for_second_moment(p, n, 0, params.alpha_bar() * params.signal)?;
    let outer = build_chain(p, n, &[0, kc1], g1)?;
    let sizing = size_list_lattice(
        outer.lattice(0),
        outer.lattice(1),
        params.alpha * params.signal,
        params.destination_noise(),
        params.list_margin,
    )?;
    let ks1 = match params.list_rank {
        Some(k) if k > kc1 => return Err(Error::InvalidRanks(format!("list rank {k} exceeds message rank {kc1}"))),
        Some(k) => k,
        None => sizing.rank,
    };
    let fresh = build_chain(p, n, &[0, ks1, kc1], g1)?;
    let cooperative = build_chain(p, n, &[0, kc2], g2)?;
    let kappa = params.kappa();
    let relay_decoder = ListDecoder::unique(fresh.lattice(0).clone(), fresh.lattice(2).clone())?;
    let list_decoder = ListDecoder::from_chain(&fresh, 0, 1, 2)?;
    let scaled = cooperative.scaled(kappa)?;
    let bin_decoder = ListDecoder::unique(scaled.lattice(0).clone(), scaled.lattice(1).clone())?;
    let messages = relay_decoder.codebook()?;
    let bin_words = crate::lattice::enumerate_codebook(cooperative.lattice(0), cooperative.lattice(1))?;
    let binning = BinningMap::new(messages.len(), bin_words.len(), seed)?;
    Ok(DfCodebooks {
        params: params.clone(),
        fresh,
        cooperative,
        sizing,
        messages,
        bin_words,
        binning,
        relay_decoder,
        list_decoder,
        bin_decoder,
    })
}

/// One block of the destination and relay transcript.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfBlock {
    pub b: usize,
    pub w: usize,
    /// Bin carried by the cooperative codeword in this block.
    pub s: usize,
    pub relay_ok: bool,
    pub bin_ok: bool,
    pub list_size: usize,
    pub in_list: bool,
    /// Effective noise of the list decoder lies in `V(Λ_s1)`.
    pub noise_inside: bool,
    /// Size of `L_(b-1) ∩ bin(ŝ_b)`; absent in block 1.
    pub intersect_size: Option<usize>,
    /// `w_(b-1)` resolved uniquely and correctly; absent in block 1.
    pub resolved_ok: Option<bool>,
}

impl DfBlock {
    pub const CSV_HEADER: &'static str = "b,w_b,s_b,relay_ok,bin_ok,list_size,intersect_size,resolved_ok";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.b,
            self.w,
            self.s,
            self.relay_ok,
            self.bin_ok,
            self.list_size,
            opt(self.intersect_size.map(|v| v.to_string())),
            opt(self.resolved_ok.map(|v| v.to_string()))
        )
    }
}

/// Outcome of [`df_round_trip`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DfRun {
    pub blocks: Vec<DfBlock>,
    /// One entry per message `w_1..w_B`.
    pub message_errors: ErrorCount,
    pub relay_errors: ErrorCount,
    pub bin_errors: ErrorCount,
    pub list_misses: ErrorCount,
    pub empty_intersections: u64,
    pub ambiguous_intersections: u64,
    /// Blocks where `in_list` and `noise_inside` disagree.
    pub event_mismatches: u64,
    /// Blocks whose list size differs from `V_s1 / V_c1`.
    pub list_size_deviations: u64,
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

/// Simulates `B + 1` blocks with `w_(B+1) = 1` and `s_1 = 1`.
///
/// Block `b` draws its messages, dithers and noise from stream `b` of `seed`.
pub fn df_round_trip(cb: &DfCodebooks, seed: u64) -> Result<DfRun> {
    let prm = &cb.params;
    let lam1 = cb.fresh.lattice(0);
    let lam2 = cb.cooperative.lattice(0);
    let n = prm.n;
    let gain = prm.relay_gain();
    let kappa = prm.kappa();
    let relay_awgn = AwgnParams::new(prm.alpha * prm.signal, prm.relay_noise)?;
    let dest_awgn = AwgnParams::new(prm.alpha * prm.signal, prm.destination_noise())?;
    let alpha_dest = dest_awgn.mmse();
    let beta = prm.bin_mmse();
    let list_size = cb.list_size();

    let mut blocks = Vec::with_capacity(prm.blocks + 1);
    let mut prev_w = 0usize;
    let mut prev_list: Vec<usize> = Vec::new();
    let mut relay_s = 1usize;
    for b in 1..=prm.blocks + 1 {
        let mut rng = trial_rng(seed, b as u64);
        let w = if b <= prm.blocks { rng.random_range(1..=cb.messages.len()) } else { 1 };
        let s = if b == 1 { 1 } else { cb.binning.bin(prev_w) };
        let u1 = lam1.sample_uniform_voronoi(&mut rng);
        let u2 = lam2.sample_uniform_voronoi(&mut rng);
        let zr = gaussian_vector(&mut rng, n, prm.relay_noise);
        let zd = gaussian_vector(&mut rng, n, prm.extra_noise);

        let x1 = encode_dithered(cb.messages.point(w), &u1, lam1)?;
        let x2 = encode_dithered(cb.bin_words.point(s), &u2, lam2)?;
        let x2_relay = encode_dithered(cb.bin_words.point(relay_s), &u2, lam2)?;
        let xr: Vec<f64> = x2_relay.iter().map(|v| gain * v).collect();

        // relay: strip its own cooperative codeword, then decode uniquely
        let yr = add(&add(&x1, &x2), &zr);
        let relay_in: Vec<f64> = yr.iter().zip(&x2_relay).map(|(y, x)| y - x).collect();
        let yp = receiver_front_end(&relay_in, &u1, &relay_awgn, lam1)?;
        let decoded = cb.relay_decoder.decode(&yp)?;
        let w_relay = cb.messages.message_of_coords(&decoded.members[0]).expect("decoder output is a codeword");
        let relay_ok = w_relay == w;

        // destination: bin from the coherent sum, then the fresh-message list
        let y = add(&add(&add(&x1, &x2), &xr), &add(&zr, &zd));
        let ku2: Vec<f64> = u2.iter().map(|v| kappa * v).collect();
        let yb = scaled_front_end(&y, &ku2, beta, cb.bin_decoder.coarse())?;
        let bin_list = cb.bin_decoder.decode(&yb)?;
        let s_hat = cb.bin_words.message_of_coords(&bin_list.members[0]).expect("decoder output is a codeword");
        let bin_ok = s_hat == s;
        let x2_hat = encode_dithered(cb.bin_words.point(s_hat), &u2, lam2)?;
        let stripped = axpy(-kappa, &x2_hat, &y);
        let yl = receiver_front_end(&stripped, &u1, &dest_awgn, lam1)?;
        let truth = &cb.messages.entry(w).coords;
        let list = cb.list_decoder.decode(&yl)?.with_truth(truth);
        let in_list = list.contains_truth == Some(true);
        let residual: Vec<f64> = stripped.iter().zip(&x1).map(|(a, x)| a - x).collect();
        let zp = lam1.mod_lattice(&crate::channel::effective_noise(&x1, &residual, alpha_dest))?;
        let noise_inside = cb.list_decoder.list_lattice().in_voronoi(&zp)?;
        let members: Vec<usize> = list
            .members
            .iter()
            .map(|m| cb.messages.message_of_coords(m).expect("list member is a codeword"))
            .collect();

        let (intersect_size, resolved_ok) = if b == 1 {
            (None, None)
        } else {
            let hits: Vec<usize> = prev_list.iter().copied().filter(|&m| cb.binning.bin(m) == s_hat).collect();
            (Some(hits.len()), Some(hits.len() == 1 && hits[0] == prev_w))
        };
        blocks.push(DfBlock {
            b,
            w,
            s,
            relay_ok,
            bin_ok,
            list_size: list.len(),
            in_list,
            noise_inside,
            intersect_size,
            resolved_ok,
        });
        relay_s = cb.binning.bin(w_relay);
        prev_w = w;
        prev_list = members;
    }

    let count = |f: &dyn Fn(&DfBlock) -> bool, range: &[DfBlock]| range.iter().filter(|blk| f(blk)).count() as u64;
    let sent = &blocks[..prm.blocks];
    let resolving = &blocks[1..];
    let total = prm.blocks as u64;
    Ok(DfRun {
        message_errors: ErrorCount::new(count(&|blk| blk.resolved_ok != Some(true), resolving), total),
        relay_errors: ErrorCount::new(count(&|blk| !blk.relay_ok, sent), total),
        bin_errors: ErrorCount::new(count(&|blk| !blk.bin_ok, resolving), total),
        list_misses: ErrorCount::new(count(&|blk| !blk.in_list, sent), total),
        empty_intersections: count(&|blk| blk.intersect_size == Some(0), resolving),
        ambiguous_intersections: count(&|blk| blk.intersect_size.is_some_and(|k| k > 1), resolving),
        event_mismatches: count(&|blk| blk.in_list != blk.noise_inside, &blocks),
        list_size_deviations: count(&|blk| blk.list_size != list_size, &blocks),
        blocks,
    })
}

/// Decode-and-forward rate with its optimal power split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DfCapacity {
    pub rate: f64,
    pub alpha: f64,
}

/// `max over α` of `min(C(αP/N_R), ½log(1 + (P + P_R + 2 sqrt(ᾱ P P_R)) / (N + N_R)))`.
pub fn df_capacity(signal: f64, relay_power: f64, relay_noise: f64, extra_noise: f64) -> Result<DfCapacity> {
    for (name, v) in [("signal", signal), ("relay_noise", relay_noise)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
        }
    }
    for (name, v) in [("relay_power", relay_power), ("extra_noise", extra_noise)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {v} must be nonnegative")));
        }
    }
    let Maximum { arg, value } = degraded_cut(signal, relay_power, relay_noise, extra_noise);
    Ok(DfCapacity { rate: value, alpha: arg })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::maximize_dense;
    use crate::region::{c, degraded_cut_objective};

    fn noiseless(n: usize, list_rank: Option<usize>) -> DegradedRelayParams {
        DegradedRelayParams {
            signal: 1.0,
            relay_power: 1.0,
            relay_noise: 1e-12,
            extra_noise: 1e-12,
            alpha: 0.1,
            blocks: 10,
            p: 3,
            n,
            rate: 3f64.log2(),
            bin_rate: 3f64.log2(),
            list_margin: 0.0,
            list_rank,
        }
    }

    #[test]
    fn parameter_checks() {
        let mut p = noiseless(2, None);
        p.alpha = 1.0;
        assert!(build_df_codebooks(&p, 0).is_err());
        p.alpha = 0.5;
        p.blocks = 1;
        assert!(build_df_codebooks(&p, 0).is_err());
    }

    #[test]
    fn second_moments_hit_power_split() {
        let mut p = noiseless(2, None);
        p.alpha = 0.5;
        p.signal = 2.0;
        let cb = build_df_codebooks(&p, 0).unwrap();
        assert!((cb.fresh.lattice(0).exact_second_moment().unwrap() - 1.0).abs() < 1e-12);
        assert!((cb.cooperative.lattice(0).exact_second_moment().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn list_volume_target() {
        let mut p = noiseless(4, None);
        p.relay_noise = 0.5;
        p.extra_noise = 0.5;
        p.alpha = 0.5;
        p.signal = 2.0;
        p.rate = 2.0 * 3f64.log2() / 4.0 * 2.0;
        let cb = build_df_codebooks(&p, 0).unwrap();
        let v1 = cb.fresh.volume(0);
        let expect = (1.0f64 / 2.0).powf(2.0) * v1;
        assert!((cb.sizing.target_volume - expect).abs() < 1e-9 * expect);
        assert!(cb.fresh.volume(1) >= expect * (1.0 - 1e-12));
    }

    #[test]
    fn binning_is_reproducible_and_injective_when_possible() {
        let a = BinningMap::new(9, 81, 4).unwrap();
        assert_eq!(a, BinningMap::new(9, 81, 4).unwrap());
        assert!(a.is_injective());
        let b = BinningMap::new(81, 9, 4).unwrap();
        assert_eq!(b.occupancy().iter().sum::<u64>(), 81);
        assert_ne!(BinningMap::new(81, 9, 5).unwrap(), b);
    }

    #[test]
    fn noiseless_unique_lists_deliver_everything() {
        let cb = build_df_codebooks(&noiseless(4, None), 1).unwrap();
        assert_eq!(cb.list_size(), 1);
        let run = df_round_trip(&cb, 7).unwrap();
        assert_eq!(run.message_errors.errors, 0);
        assert_eq!(run.relay_errors.errors, 0);
        assert_eq!(run.bin_errors.errors, 0);
        assert_eq!(run.blocks.len(), 11);
        assert_eq!(run.blocks[0].resolved_ok, None);
    }

    #[test]
    fn noiseless_full_lists_resolve_through_bins() {
        let mut p = noiseless(4, Some(0));
        p.rate = 2.0 * 3f64.log2() / 4.0;
        p.bin_rate = 3f64.log2();
        let cb = build_df_codebooks(&p, 1).unwrap();
        assert_eq!(cb.list_size(), 9);
        assert!(cb.binning.is_injective());
        let run = df_round_trip(&cb, 3).unwrap();
        assert_eq!(run.message_errors.errors, 0);
        assert_eq!(run.event_mismatches, 0);
        assert_eq!(run.list_size_deviations, 0);
    }

    #[test]
    fn noisy_run_keeps_event_identity() {
        let mut p = noiseless(4, None);
        p.relay_noise = 0.05;
        p.extra_noise = 0.3;
        p.alpha = 0.3;
        p.rate = 3f64.log2() / 2.0;
        p.bin_rate = 3f64.log2() / 2.0;
        p.blocks = 200;
        let cb = build_df_codebooks(&p, 2).unwrap();
        let run = df_round_trip(&cb, 11).unwrap();
        assert_eq!(run.event_mismatches, 0);
        assert_eq!(run.list_size_deviations, 0);
        assert_eq!(run, df_round_trip(&cb, 11).unwrap());
    }

    #[test]
    fn capacity_without_relay_power() {
        let d = df_capacity(2.0, 0.0, 0.5, 1.0).unwrap();
        assert!((d.rate - c(2.0 / 1.5)).abs() < 1e-9);
        assert!((d.alpha - 1.0).abs() < 1e-6);
    }

    #[test]
    fn capacity_vanishes_with_destination_noise() {
        assert!(df_capacity(1.0, 1.0, 1.0, 1e12).unwrap().rate < 1e-9);
    }

    #[test]
    fn capacity_matches_dense_grid() {
        let d = df_capacity(1.0, 1.0, 1.0, 1.0).unwrap();
        let oracle = maximize_dense(|a| degraded_cut_objective(a, 1.0, 1.0, 1.0, 1.0), 0.0, 1.0, 1e-6);
        assert!((d.rate - oracle.value).abs() < 1e-6);
        assert!((d.alpha - oracle.arg).abs() < 1e-4);
    }
}
