//! Two-way relay channel with direct links: the relay decodes the lattice
//! sum of both codewords, bins it, and broadcasts a Gaussian bin codeword;
//! each terminal list-decodes the other's codeword over the direct link and
//! resolves the list with the bin index one block later.
//!
//! Terminal 1 sends `X_1 = (t_1 - U_1) mod Λ_1` and terminal 2 sends
//! `X_2 = (t_2 + U_2) mod Λ_2`, so that
//! `(X_1 + X_2 + U_1 - U_2) mod Λ_1 = T = (t_1 + t_2 - Q_2(t_2 + U_2)) mod Λ_1`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{build_chain, gamma_for_second_moment, ranks_for_rates, size_list_lattice, LatticeChain};
use crate::channel::{effective_noise, encode_dithered, gaussian_vector, scaled_front_end, ListDecodeResult, ListDecoder};
use crate::error::{Error, Result};
use crate::lattice::{enumerate_codebook, is_sublattice, Codebook, Lattice};
use crate::region::{c, Degradation, TwoWayChannel};
use crate::relay::BinningMap;
use crate::stats::{trial_rng, ErrorCount};

pub use crate::region::twrc_region;

/// Samples used to estimate the second moment of a non-cubic `Λ_2`.
const SHAPING_MOMENT_SAMPLES: usize = 4_000;

/// Parameters of one two-way relay experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwrcParams {
    /// Powers and noises; requires `P_1 >= P_2`.
    pub channel: TwoWayChannel,
    /// Rate of terminal 1, rounded down to a multiple of `log2(p) / n`.
    pub r1: f64,
    pub r2: f64,
    /// Rate `R` of the relay's Gaussian bin codebook; there are `ceil(2^(nR))` bins.
    pub relay_rate: f64,
    pub p: u64,
    pub n: usize,
    /// Relative slack on both list-lattice volume targets.
    #[serde(default)]
    pub list_margin: f64,
}

impl TwrcParams {
    pub fn validate(&self) -> Result<()> {
        self.channel.validate()?;
        if self.channel.p1 < self.channel.p2 {
            return Err(Error::InvalidParameter(format!(
                "terminal powers must satisfy P1 >= P2 (P1 = {}, P2 = {})",
                self.channel.p1, self.channel.p2
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        for (name, v) in [("r1", self.r1), ("r2", self.r2), ("relay_rate", self.relay_rate), ("list_margin", self.list_margin)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be nonnegative and finite")));
            }
        }
        if self.n as f64 * self.relay_rate > 40.0 {
            return Err(Error::InvalidParameter(format!(
                "n * relay_rate = {} exceeds 40 bits of bin index",
                self.n as f64 * self.relay_rate
            )));
        }
        Ok(())
    }

    /// `max(I(X_R; Y_2 | X_2), I(X_R; Y_1 | X_1))` with Gaussian inputs.
    pub fn broadcast_requirement(&self) -> f64 {
        let ch = &self.channel;
        c(ch.pr / (ch.p1 + ch.n2)).max(c(ch.pr / (ch.p2 + ch.n1)))
    }

    pub fn bins(&self) -> usize {
        (self.n as f64 * self.relay_rate).exp2().ceil() as usize
    }
}

/// The relay's i.i.d. `N(0, P_R)` codebook, generated on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayCodebook {
    seed: u64,
    n: usize,
    power: f64,
    bins: usize,
}

impl RelayCodebook {
    pub fn new(seed: u64, n: usize, power: f64, bins: usize) -> Self {
        Self { seed, n, power, bins }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Codeword of bin `s` (1-based).
    pub fn codeword(&self, s: usize) -> Vec<f64> {
        assert!((1..=self.bins).contains(&s), "bin {s} out of range");
        let mut rng = trial_rng(self.seed, s as u64);
        gaussian_vector(&mut rng, self.n, self.power)
    }
}

/// Lattice sum `T = (t_1 + t_2 - Q_2(t_2 + U_2)) mod Λ_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumCodeword {
    /// Integer coordinates in units of the chain scale.
    pub coords: Vec<i64>,
    pub point: Vec<f64>,
}

fn check_nested(lam1: &Lattice, lam2: &Lattice) -> Result<()> {
    if is_sublattice(lam1, lam2)? {
        Ok(())
    } else {
        Err(Error::NotNested)
    }
}

/// `T` from integer codeword coordinates and the point `U_2`; requires a
/// shared scale.
pub fn sum_codeword(t1: &[i64], t2: &[i64], u2: &[f64], lam1: &Lattice, lam2: &Lattice) -> Result<SumCodeword> {
    let g = lam1.gamma();
    let shifted: Vec<f64> = t2.iter().zip(u2).map(|(&a, u)| a as f64 * g + u).collect();
    let q2 = lam2.nearest_coords(&shifted)?;
    let raw: Vec<i64> = t1.iter().zip(t2).zip(&q2).map(|((a, b), q)| a + b - q).collect();
    let coords = lam1.reduce_coords(&raw)?;
    let point = coords.iter().map(|&v| v as f64 * g).collect();
    Ok(SumCodeword { coords, point })
}

/// `T` from codeword points.
pub fn sum_of_points(t1: &[f64], t2: &[f64], u2: &[f64], lam1: &Lattice, lam2: &Lattice) -> Result<Vec<f64>> {
    check_nested(lam1, lam2)?;
    let shifted: Vec<f64> = t2.iter().zip(u2).map(|(a, u)| a + u).collect();
    let q2 = lam2.nearest_point(&shifted)?;
    let raw: Vec<f64> = t1.iter().zip(t2).zip(&q2).map(|((a, b), q)| a + b - q).collect();
    lam1.mod_lattice(&raw)
}

/// `t_1 = (T - t_2 + Q_2(t_2 + U_2)) mod Λ_1`.
pub fn recover_t1_from_sum(t: &[f64], t2: &[f64], u2: &[f64], lam1: &Lattice, lam2: &Lattice) -> Result<Vec<f64>> {
    check_nested(lam1, lam2)?;
    let shifted: Vec<f64> = t2.iter().zip(u2).map(|(a, u)| a + u).collect();
    let q2 = lam2.nearest_point(&shifted)?;
    let raw: Vec<f64> = t.iter().zip(t2).zip(&q2).map(|((s, b), q)| s - b + q).collect();
    lam1.mod_lattice(&raw)
}

/// `t_2 = (T mod Λ_2 - t_1) mod Λ_2`.
pub fn recover_t2_from_sum(t: &[f64], t1: &[f64], lam1: &Lattice, lam2: &Lattice) -> Result<Vec<f64>> {
    check_nested(lam1, lam2)?;
    let reduced = lam2.mod_lattice(t)?;
    let raw: Vec<f64> = reduced.iter().zip(t1).map(|(s, a)| s - a).collect();
    lam2.mod_lattice(&raw)
}

/// Ranks of every lattice of the two-way chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TwrcRanks {
    pub shaping1: usize,
    pub shaping2: usize,
    pub fine1: usize,
    pub fine2: usize,
    pub list1: usize,
    pub list2: usize,
}

/// Everything shared by the terminals and the relay.
#[derive(Debug, Clone)]
pub struct TwrcCodebooks {
    pub params: TwrcParams,
    /// All distinct lattices ordered by decreasing volume.
    pub chain: LatticeChain,
    pub ranks: TwrcRanks,
    /// Second moment of `Λ_2`, the power actually used by terminal 2.
    pub p2_effective: f64,
    pub messages1: Codebook,
    pub messages2: Codebook,
    /// `Λ_cmax ∩ V(Λ_1)`, the alphabet of `T`.
    pub sums: Codebook,
    pub binning: BinningMap,
    pub relay_codebook: RelayCodebook,
    sum_decoder: ListDecoder,
    /// Terminal 2's decoder for `t_1`.
    list1: ListDecoder,
    /// Terminal 1's decoder for `t_2`.
    list2: ListDecoder,
}

impl TwrcCodebooks {
    pub fn shaping1(&self) -> &Lattice {
        self.list1.coarse()
    }

    pub fn shaping2(&self) -> &Lattice {
        self.list2.coarse()
    }

    pub fn list_decoder1(&self) -> &ListDecoder {
        &self.list1
    }

    pub fn list_decoder2(&self) -> &ListDecoder {
        &self.list2
    }

    pub fn sum_decoder(&self) -> &ListDecoder {
        &self.sum_decoder
    }

    /// Rates after rank quantization.
    pub fn rates(&self) -> (f64, f64) {
        let step = (self.params.p as f64).log2() / self.params.n as f64;
        let r = &self.ranks;
        ((r.fine1 - r.shaping1) as f64 * step, (r.fine2 - r.shaping2) as f64 * step)
    }

    /// Index of `T` in [`Self::sums`].
    pub fn sum_index(&self, t: &SumCodeword) -> usize {
        self.sums.message_of_coords(&t.coords).expect("sum lies in the fine lattice")
    }
}

/// Rank `k` of the default generator whose second moment at scale `gamma`
/// is closest to `target` on a log scale, using the cube moment
/// `gamma² p^(2(n-k)/n) / 12` as the estimate.
fn shaping_rank(p: u64, n: usize, gamma: f64, target: f64) -> usize {
    (0..=n)
        .min_by(|&a, &b| {
            let err = |k: usize| {
                let m = gamma * gamma * (p as f64).powf(2.0 * (n - k) as f64 / n as f64) / 12.0;
                (m / target).ln().abs()
            };
            err(a).total_cmp(&err(b))
        })
        .expect("nonempty range")
}

/// Builds the chain `Λ_1 ⊆ Λ_2`, the fine and list lattices of both
/// terminals, the sum alphabet, the bin map and the relay codebook.
pub fn build_twrc_codebooks(params: &TwrcParams, seed: u64) -> Result<TwrcCodebooks> {
    params.validate()?;
    let need = params.broadcast_requirement();
    if params.relay_rate + 1e-12 < need {
        return Err(Error::Infeasible(format!(
            "relay rate {} is below the broadcast requirement {need}",
            params.relay_rate
        )));
    }
    let (p, n) = (params.p, params.n);
    let ch = &params.channel;
    let gamma = gamma_for_second_moment(p, n, 0, ch.p1)?;
    let k2 = shaping_rank(p, n, gamma, ch.p2);
    let fine1 = ranks_for_rates(p, n, 0, &[params.r1]).ranks[0];
    let fine2 = ranks_for_rates(p, n, k2, &[params.r2]).ranks[0];
    let full = build_chain(p, n, &[n], gamma)?.lattice(0).clone();
    let lam1 = full.with_rank(0)?;
    let lam2 = full.with_rank(k2)?;
    let p2_effective = match lam2.exact_second_moment() {
        Some(m) => m,
        None => lam2.second_moment(SHAPING_MOMENT_SAMPLES, seed)?.value,
    };
    let sizing1 = size_list_lattice(&lam1, &full.with_rank(fine1)?, ch.p1, ch.n2, params.list_margin)?;
    let sizing2 = size_list_lattice(&lam2, &full.with_rank(fine2)?, p2_effective, ch.n1, params.list_margin)?;
    let ranks = TwrcRanks { shaping1: 0, shaping2: k2, fine1, fine2, list1: sizing1.rank, list2: sizing2.rank };
    let mut all = vec![ranks.shaping1, ranks.shaping2, ranks.fine1, ranks.fine2, ranks.list1, ranks.list2];
    all.sort_unstable();
    all.dedup();
    let chain = build_chain(p, n, &all, gamma)?;
    let at = |k: usize| chain.at_rank(k);
    let list1 = ListDecoder::new(at(0)?, at(ranks.list1)?, at(fine1)?)?;
    let list2 = ListDecoder::new(at(k2)?, at(ranks.list2)?, at(fine2)?)?;
    let finest = fine1.max(fine2);
    let sum_decoder = ListDecoder::unique(at(0)?, at(finest)?)?;
    let messages1 = list1.codebook()?;
    let messages2 = list2.codebook()?;
    let sums = enumerate_codebook(sum_decoder.coarse(), sum_decoder.fine())?;
    let bins = params.bins().max(1);
    let binning = BinningMap::new(sums.len(), bins, seed)?;
    let relay_codebook = RelayCodebook::new(seed, n, ch.pr, bins);
    Ok(TwrcCodebooks {
        params: params.clone(),
        chain,
        ranks,
        p2_effective,
        messages1,
        messages2,
        sums,
        binning,
        relay_codebook,
        sum_decoder,
        list1,
        list2,
    })
}

/// Relay estimate of `T` from `Y_R`: `T̂ = Q_cmax((α_R Y_R + U_1 - U_2) mod Λ_1) mod Λ_1`
/// with `α_R = (P_1 + P_2) / (P_1 + P_2 + N_R)`.
pub fn relay_decode_sum(yr: &[f64], u1: &[f64], u2: &[f64], cb: &TwrcCodebooks) -> Result<SumCodeword> {
    let ch = &cb.params.channel;
    let signal = ch.p1 + cb.p2_effective;
    let alpha = signal / (signal + ch.nr);
    let dither: Vec<f64> = u1.iter().zip(u2).map(|(a, b)| a - b).collect();
    let lam1 = cb.sum_decoder.coarse();
    let y = scaled_front_end(yr, &dither, alpha, lam1)?;
    let decoded = cb.sum_decoder.decode(&y)?;
    let coords = decoded.members.into_iter().next().expect("unique decoder returns one point");
    let g = lam1.gamma();
    let point = coords.iter().map(|&v| v as f64 * g).collect();
    Ok(SumCodeword { coords, point })
}

/// One block of a two-way run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwrcBlock {
    pub b: usize,
    pub w1: usize,
    pub w2: usize,
    pub sum_ok: bool,
    /// Terminal 2 decoded the relay's bin correctly.
    pub bin2_ok: bool,
    pub bin1_ok: bool,
    /// Size of terminal 2's list for `t_1`.
    pub list1_size: usize,
    pub list2_size: usize,
    pub in_list1: bool,
    pub in_list2: bool,
    pub noise1_inside: bool,
    pub noise2_inside: bool,
    /// List members of terminal 2 in the decoded bin; absent in block 1.
    pub intersect1_size: Option<usize>,
    pub intersect2_size: Option<usize>,
    /// `w_1` of the previous block resolved at terminal 2; absent in block 1.
    pub resolve1_ok: Option<bool>,
    pub resolve2_ok: Option<bool>,
}

impl TwrcBlock {
    pub const CSV_HEADER: &'static str = "b,w1,w2,sum_ok,bin_ok,list1_size,list2_size,resolve1_ok,resolve2_ok";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.b,
            self.w1,
            self.w2,
            self.sum_ok,
            self.bin1_ok && self.bin2_ok,
            self.list1_size,
            self.list2_size,
            opt(self.resolve1_ok),
            opt(self.resolve2_ok)
        )
    }
}

/// Outcome of [`twrc_round_trip`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwrcRun {
    pub blocks: Vec<TwrcBlock>,
    /// Messages of terminal 1 lost at terminal 2.
    pub errors1: ErrorCount,
    pub errors2: ErrorCount,
    pub sum_errors: ErrorCount,
    /// Blocks with an empty intersection in either direction.
    pub empty_intersections: u64,
    pub ambiguous_intersections: u64,
    /// Blocks where list membership and the effective-noise event disagree.
    pub event_mismatches: u64,
    pub list_size_deviations: u64,
}

/// State a terminal carries from one block to the next.
struct Memory {
    /// Decoded list of the other terminal's messages.
    list: Vec<usize>,
    own: usize,
    /// Terminal 2's dither, known to all nodes.
    u2: Vec<f64>,
    /// Ground truth, used only for scoring.
    other: usize,
}

/// Terminal-side decoding for one direction.
struct Direction<'a> {
    decoder: &'a ListDecoder,
    /// Codebook of the message being decoded.
    theirs: &'a Codebook,
    /// MMSE coefficient `P / (P + N)`.
    alpha: f64,
    /// Sign of the dither in the sender's encoder: `X = (t - sign * U) mod Λ`.
    sign: f64,
}

struct Heard {
    bin_ok: bool,
    resolved: Option<(usize, bool)>,
    list: ListDecodeResult,
    members: Vec<usize>,
    noise_inside: bool,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

impl Direction<'_> {
    /// Bin decoding with the list from the previous block as side
    /// information, resolution, then the current list.
    #[allow(clippy::too_many_arguments)]
    fn hear(
        &self,
        cb: &TwrcCodebooks,
        y: &[f64],
        x_sent: &[f64],
        dither: &[f64],
        truth: usize,
        true_bin: usize,
        memory: Option<&Memory>,
        implied_sum: &dyn Fn(usize, &Memory) -> Result<SumCodeword>,
    ) -> Result<Heard> {
        let (s_hat, resolved) = match memory {
            None => (1, None),
            Some(mem) => {
                let mut bins = Vec::with_capacity(mem.list.len());
                for &m in &mem.list {
                    bins.push(cb.binning.bin(cb.sum_index(&implied_sum(m, mem)?)));
                }
                let mut candidates = bins.clone();
                candidates.sort_unstable();
                candidates.dedup();
                let s_hat = *candidates
                    .iter()
                    .min_by(|&&a, &&b| {
                        dist2(y, &cb.relay_codebook.codeword(a)).total_cmp(&dist2(y, &cb.relay_codebook.codeword(b)))
                    })
                    .expect("lists are never empty");
                let hits: Vec<usize> = mem.list.iter().zip(&bins).filter(|(_, &b)| b == s_hat).map(|(&m, _)| m).collect();
                let ok = hits.len() == 1 && hits[0] == mem.other;
                (s_hat, Some((hits.len(), ok)))
            }
        };
        let xr = cb.relay_codebook.codeword(s_hat);
        let stripped: Vec<f64> = y.iter().zip(&xr).map(|(a, b)| a - b).collect();
        let coarse = self.decoder.coarse();
        let d: Vec<f64> = dither.iter().map(|u| self.sign * u).collect();
        let yp = scaled_front_end(&stripped, &d, self.alpha, coarse)?;
        let list = self.decoder.decode(&yp)?.with_truth(&self.theirs.entry(truth).coords);
        let residual: Vec<f64> = stripped.iter().zip(x_sent).map(|(a, x)| a - x).collect();
        let zp = coarse.mod_lattice(&effective_noise(x_sent, &residual, self.alpha))?;
        let noise_inside = self.decoder.list_lattice().in_voronoi(&zp)?;
        let members = list
            .members
            .iter()
            .map(|m| self.theirs.message_of_coords(m).expect("list member is a codeword"))
            .collect();
        Ok(Heard { bin_ok: s_hat == true_bin, resolved, list, members, noise_inside })
    }
}

/// Simulates `blocks + 1` blocks with both last messages fixed to 1; block
/// `b` draws messages, dithers and noise from stream `b` of `seed`.
pub fn twrc_round_trip(cb: &TwrcCodebooks, blocks: usize, seed: u64) -> Result<TwrcRun> {
    if blocks < 2 {
        return Err(Error::InvalidParameter(format!("blocks = {blocks} must be at least 2")));
    }
    let ch = cb.params.channel;
    let n = cb.params.n;
    let lam1 = cb.shaping1().clone();
    let lam2 = cb.shaping2().clone();
    let dir1 = Direction { decoder: &cb.list1, theirs: &cb.messages1, alpha: ch.p1 / (ch.p1 + ch.n2), sign: 1.0 };
    let dir2 = Direction {
        decoder: &cb.list2,
        theirs: &cb.messages2,
        alpha: cb.p2_effective / (cb.p2_effective + ch.n1),
        sign: -1.0,
    };
    let size1 = cb.list1.list_size();
    let size2 = cb.list2.list_size();
    let physical = ch.degradation == Degradation::Physical;

    let mut out = Vec::with_capacity(blocks + 1);
    let mut relay_bin = 1usize;
    let mut mem2: Option<Memory> = None;
    let mut mem1: Option<Memory> = None;
    for b in 1..=blocks + 1 {
        let mut rng = trial_rng(seed, b as u64);
        let (w1, w2) = if b <= blocks {
            (rng.random_range(1..=cb.messages1.len()), rng.random_range(1..=cb.messages2.len()))
        } else {
            (1, 1)
        };
        let u1 = lam1.sample_uniform_voronoi(&mut rng);
        let u2 = lam2.sample_uniform_voronoi(&mut rng);
        let zr = gaussian_vector(&mut rng, n, ch.nr);
        let (z1, z2) = if physical {
            let e1 = gaussian_vector(&mut rng, n, ch.n1 - ch.nr);
            let e2 = gaussian_vector(&mut rng, n, ch.n2 - ch.nr);
            (
                zr.iter().zip(&e1).map(|(a, b)| a + b).collect::<Vec<_>>(),
                zr.iter().zip(&e2).map(|(a, b)| a + b).collect::<Vec<_>>(),
            )
        } else {
            (gaussian_vector(&mut rng, n, ch.n1), gaussian_vector(&mut rng, n, ch.n2))
        };
        let e1 = cb.messages1.entry(w1);
        let e2 = cb.messages2.entry(w2);
        let x1 = encode_dithered(&e1.point, &u1, &lam1)?;
        let neg_u2: Vec<f64> = u2.iter().map(|v| -v).collect();
        let x2 = encode_dithered(&e2.point, &neg_u2, &lam2)?;
        let xr = cb.relay_codebook.codeword(relay_bin);
        let sum3 = |a: &[f64], b: &[f64], z: &[f64]| -> Vec<f64> { a.iter().zip(b).zip(z).map(|((x, y), w)| x + y + w).collect() };
        let yr = sum3(&x1, &x2, &zr);
        let y1 = sum3(&xr, &x2, &z1);
        let y2 = sum3(&xr, &x1, &z2);

        let t = sum_codeword(&e1.coords, &e2.coords, &u2, &lam1, &lam2)?;
        let t_hat = relay_decode_sum(&yr, &u1, &u2, cb)?;
        let sum_ok = t_hat.coords == t.coords;

        // each member of the previous list, with the terminal's own codeword, implies one sum
        let implied_at_2 = |m: usize, mem: &Memory| -> Result<SumCodeword> {
            sum_codeword(&cb.messages1.entry(m).coords, &cb.messages2.entry(mem.own).coords, &mem.u2, &lam1, &lam2)
        };
        let implied_at_1 = |m: usize, mem: &Memory| -> Result<SumCodeword> {
            sum_codeword(&cb.messages1.entry(mem.own).coords, &cb.messages2.entry(m).coords, &mem.u2, &lam1, &lam2)
        };
        let heard2 = dir1.hear(cb, &y2, &x1, &u1, w1, relay_bin, mem2.as_ref(), &implied_at_2)?;
        let heard1 = dir2.hear(cb, &y1, &x2, &u2, w2, relay_bin, mem1.as_ref(), &implied_at_1)?;

        out.push(TwrcBlock {
            b,
            w1,
            w2,
            sum_ok,
            bin2_ok: heard2.bin_ok,
            bin1_ok: heard1.bin_ok,
            list1_size: heard2.list.len(),
            list2_size: heard1.list.len(),
            in_list1: heard2.list.contains_truth == Some(true),
            in_list2: heard1.list.contains_truth == Some(true),
            noise1_inside: heard2.noise_inside,
            noise2_inside: heard1.noise_inside,
            intersect1_size: heard2.resolved.map(|(k, _)| k),
            intersect2_size: heard1.resolved.map(|(k, _)| k),
            resolve1_ok: heard2.resolved.map(|(_, ok)| ok),
            resolve2_ok: heard1.resolved.map(|(_, ok)| ok),
        });
        relay_bin = cb.binning.bin(cb.sum_index(&t_hat));
        mem2 = Some(Memory { list: heard2.members, own: w2, u2: u2.clone(), other: w1 });
        mem1 = Some(Memory { list: heard1.members, own: w1, u2, other: w2 });
    }

    let resolving = &out[1..];
    let total = blocks as u64;
    let count = |f: &dyn Fn(&TwrcBlock) -> bool, range: &[TwrcBlock]| range.iter().filter(|blk| f(blk)).count() as u64;
    Ok(TwrcRun {
        errors1: ErrorCount::new(count(&|blk| blk.resolve1_ok != Some(true), resolving), total),
        errors2: ErrorCount::new(count(&|blk| blk.resolve2_ok != Some(true), resolving), total),
        sum_errors: ErrorCount::new(count(&|blk| !blk.sum_ok, &out[..blocks]), total),
        empty_intersections: count(&|blk| blk.intersect1_size == Some(0) || blk.intersect2_size == Some(0), resolving),
        ambiguous_intersections: count(
            &|blk| blk.intersect1_size.is_some_and(|k| k > 1) || blk.intersect2_size.is_some_and(|k| k > 1),
            resolving,
        ),
        event_mismatches: count(&|blk| blk.in_list1 != blk.noise1_inside || blk.in_list2 != blk.noise2_inside, &out),
        list_size_deviations: count(&|blk| blk.list1_size != size1 || blk.list2_size != size2, &out),
        blocks: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::is_sublattice;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn params(p1: f64, p2: f64, noise: f64, r: f64, n: usize) -> TwrcParams {
        let channel = TwoWayChannel::new(p1, p2, 1.0, noise, noise, noise).unwrap();
        let mut prm = TwrcParams { channel, r1: r, r2: r, relay_rate: 0.0, p: 3, n, list_margin: 0.0 };
        prm.relay_rate = prm.broadcast_requirement().max(r);
        prm
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn sum_identities_exhaustive_small_chain() {
        let chain = build_chain(3, 2, &[0, 1, 2], 1.0).unwrap();
        let (lam1, lam2, fine) = (chain.lattice(0), chain.lattice(1), chain.lattice(2));
        let c1 = enumerate_codebook(lam1, fine).unwrap();
        let c2 = enumerate_codebook(lam2, fine).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        for _ in 0..100 {
            let u2 = lam2.sample_uniform_voronoi(&mut rng);
            for a in c1.entries() {
                for b in c2.entries() {
                    let t = sum_codeword(&a.coords, &b.coords, &u2, lam1, lam2).unwrap();
                    assert!(lam1.in_voronoi(&t.point).unwrap());
                    assert!(close(&t.point, &sum_of_points(&a.point, &b.point, &u2, lam1, lam2).unwrap()));
                    assert!(close(&recover_t1_from_sum(&t.point, &b.point, &u2, lam1, lam2).unwrap(), &a.point));
                    assert!(close(&recover_t2_from_sum(&t.point, &a.point, lam1, lam2).unwrap(), &b.point));
                }
            }
        }
    }

    #[test]
    fn zero_second_codeword_gives_first() {
        let chain = build_chain(3, 2, &[0, 1, 2], 1.0).unwrap();
        let (lam1, lam2) = (chain.lattice(0), chain.lattice(1));
        let t1 = [1.0, 2.0];
        let t = sum_of_points(&t1, &[0.0, 0.0], &[0.0, 0.0], lam1, lam2).unwrap();
        assert!(close(&t, &lam1.mod_lattice(&t1).unwrap()));
        assert_eq!(recover_t2_from_sum(&t, &t1, lam2, lam1), Err(Error::NotNested));
    }

    #[test]
    fn chain_order_for_unequal_powers() {
        let r = 3f64.log2() / 2.0;
        let cb = build_twrc_codebooks(&params(4.0, 1.0, 0.1, r, 2), 0).unwrap();
        assert_eq!(cb.ranks.shaping2, 1);
        let lats = cb.chain.lattices();
        for w in lats.windows(2) {
            assert!(w[0].volume() > w[1].volume());
            assert!(is_sublattice(&w[0], &w[1]).unwrap());
        }
        assert!(is_sublattice(cb.shaping1(), cb.shaping2()).unwrap());
    }

    #[test]
    fn symmetric_and_one_way_cases() {
        let cb = build_twrc_codebooks(&params(2.0, 2.0, 0.1, 3f64.log2() / 2.0, 2), 0).unwrap();
        assert_eq!(cb.shaping1(), cb.shaping2());
        assert_eq!(cb.messages1.len(), cb.messages2.len());
        let mut prm = params(2.0, 2.0, 0.1, 3f64.log2() / 2.0, 2);
        prm.r2 = 0.0;
        let cb = build_twrc_codebooks(&prm, 0).unwrap();
        assert_eq!(cb.messages2.len(), 1);
    }

    #[test]
    fn relay_rate_below_requirement_is_infeasible() {
        let mut prm = params(2.0, 1.0, 0.1, 0.5, 2);
        prm.relay_rate = 0.0;
        assert!(matches!(build_twrc_codebooks(&prm, 0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn noiseless_round_trip_delivers_everything() {
        let cb = build_twrc_codebooks(&params(4.0, 1.0, 1e-12, 3f64.log2() / 2.0, 4), 9).unwrap();
        let run = twrc_round_trip(&cb, 10, 5).unwrap();
        assert_eq!(run.errors1.errors, 0);
        assert_eq!(run.errors2.errors, 0);
        assert_eq!(run.sum_errors.errors, 0);
        assert_eq!(run.blocks.len(), 11);
        assert!(run.blocks[0].csv_row().ends_with(",,"));
    }

    #[test]
    fn noiseless_relay_decodes_sum() {
        let cb = build_twrc_codebooks(&params(2.0, 1.0, 1e-12, 3f64.log2() / 2.0, 2), 1).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let (lam1, lam2) = (cb.shaping1().clone(), cb.shaping2().clone());
        for _ in 0..200 {
            let a = cb.messages1.entry(rng.random_range(1..=cb.messages1.len()));
            let b = cb.messages2.entry(rng.random_range(1..=cb.messages2.len()));
            let u1 = lam1.sample_uniform_voronoi(&mut rng);
            let u2 = lam2.sample_uniform_voronoi(&mut rng);
            let x1 = encode_dithered(&a.point, &u1, &lam1).unwrap();
            let neg: Vec<f64> = u2.iter().map(|v| -v).collect();
            let x2 = encode_dithered(&b.point, &neg, &lam2).unwrap();
            let yr: Vec<f64> = x1.iter().zip(&x2).map(|(p, q)| p + q).collect();
            let t = sum_codeword(&a.coords, &b.coords, &u2, &lam1, &lam2).unwrap();
            assert_eq!(relay_decode_sum(&yr, &u1, &u2, &cb).unwrap(), t);
        }
    }

    #[test]
    fn noisy_round_trip_keeps_invariants() {
        let mut prm = params(4.0, 1.0, 0.3, 3f64.log2() / 4.0, 4);
        prm.channel = TwoWayChannel::physical(4.0, 1.0, 2.0, 0.05, 0.4, 0.4).unwrap();
        prm.relay_rate = prm.broadcast_requirement().max(prm.r1 + prm.r2);
        let cb = build_twrc_codebooks(&prm, 3).unwrap();
        let run = twrc_round_trip(&cb, 200, 4).unwrap();
        assert_eq!(run.event_mismatches, 0);
        assert_eq!(run.list_size_deviations, 0);
        assert_eq!(run, twrc_round_trip(&cb, 200, 4).unwrap());
    }

    #[test]
    fn binning_is_reproducible() {
        let prm = params(4.0, 1.0, 0.1, 3f64.log2() / 2.0, 4);
        let a = build_twrc_codebooks(&prm, 8).unwrap();
        let b = build_twrc_codebooks(&prm, 8).unwrap();
        assert_eq!(a.binning, b.binning);
        assert_eq!(a.relay_codebook.codeword(1), b.relay_codebook.codeword(1));
    }
}
