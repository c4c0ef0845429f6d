//! Closed-form rates, cut-set outer bounds and constant-gap reports for the
//! two-way relay channel with direct links.
//!
//! Channel: `Y_1 = X_R + X_2 + Z_1`, `Y_2 = X_R + X_1 + Z_2`,
//! `Y_R = X_1 + X_2 + Z_R`, noise variances `N_1, N_2, N_R`, powers
//! `P_1, P_2, P_R`. Rates are in bits per channel use.
//!
//! # General cut-set bound
//!
//! For user `i` (and `ī` the other terminal) with jointly Gaussian inputs,
//! `X_i` and `X_R` correlated with coefficient `ρ`, the two cuts separating
//! terminal `i` from terminal `ī` give
//!
//! - broadcast cut `{i} | {R, ī}`: `I(X_i; Y_R, Y_ī | X_R, X_ī) = C((1 - ρ²) P_i 1ᵀK⁻¹1)`,
//!   where `K` is the covariance of `(Z_R, Z_ī)`;
//! - multiple-access cut `{i, R} | {ī}`: `I(X_i, X_R; Y_ī | X_ī) = C((P_i + P_R + 2ρ sqrt(P_i P_R)) / N_ī)`.
//!
//! The bound is `max_ρ min(broadcast, MAC)`. With independent noises
//! `1ᵀK⁻¹1 = 1/N_R + 1/N_ī`. Under physical degradation `Z_ī = Z_R + Z_ī'`
//! the terminal observation is a degraded copy of the relay's, `1ᵀK⁻¹1 = 1/N_R`,
//! and with `α = 1 - ρ²` the bound coincides with [`cutset_degraded`].
//!
//! # Gap bounds
//!
//! Write `A_1, A_2` for the two terms of the achievable minimum and `B_1, B_2`
//! for the cut-set terms. Then `min(A) + g >= min(B)` follows from
//! `A_1 + g >= B_1` and `A_2 + g >= B_2`. With `x = P_i / N_R`:
//!
//! - physical degradation, `g = 1/2`: `A_1 + 1/2 >= ½log max(2x, 2) >= C(x) >= B_1`
//!   and `A_2 + 1/2 = ½log(2 + 2(P_i + P_R)/N_ī) >= ½log(1 + (√P_i + √P_R)²/N_ī) >= B_2`;
//! - independent noise with `N_ī >= N_R`, `g = ½log 3`: `B_1 <= C(2x)` and
//!   `max(3x, 3) >= 1 + 2x`; `B_2 <= ½log(1 + 2(P_i + P_R)/N_ī) <= A_2 + ½log 3`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{maximize, Maximum, GRID_POINTS};

/// Refinement tolerance for the one-dimensional optimizations.
pub const ARG_TOLERANCE: f64 = 1e-9;

/// `½ log2(1 + x)`.
pub fn capacity_c(x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::NegativeArgument(x));
    }
    Ok(c(x))
}

pub(crate) fn c(x: f64) -> f64 {
    0.5 * x.ln_1p() / std::f64::consts::LN_2
}

/// `[x]⁺ = max(x, 0)`.
pub fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub r1: f64,
    pub r2: f64,
}

impl RatePoint {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }

    pub fn get(&self, user: usize) -> f64 {
        match user {
            1 => self.r1,
            2 => self.r2,
            _ => panic!("user index must be 1 or 2"),
        }
    }

    /// Componentwise `self <= other + tol`.
    pub fn inside(&self, other: &RatePoint, tol: f64) -> bool {
        self.r1 <= other.r1 + tol && self.r2 <= other.r2 + tol
    }
}

/// Noise structure of the terminals relative to the relay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Degradation {
    /// `Z_i = Z_R + Z_i'` with `Var Z_i' = N_i - N_R`.
    Physical,
    /// Independent noises with `N_1, N_2 >= N_R`.
    Stochastic,
    /// Independent noises, no ordering.
    None,
}

/// Powers and noise variances of the two-way relay channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoWayChannel {
    pub p1: f64,
    pub p2: f64,
    pub pr: f64,
    pub n1: f64,
    pub n2: f64,
    pub nr: f64,
    pub degradation: Degradation,
}

impl TwoWayChannel {
    /// Independent-noise channel; the degradation tag is `Stochastic` when
    /// both terminals are noisier than the relay.
    pub fn new(p1: f64, p2: f64, pr: f64, n1: f64, n2: f64, nr: f64) -> Result<Self> {
        let degradation = if n1 >= nr && n2 >= nr { Degradation::Stochastic } else { Degradation::None };
        let ch = Self { p1, p2, pr, n1, n2, nr, degradation };
        ch.validate()?;
        Ok(ch)
    }

    /// Physically degraded channel from the excess noises `N_1'`, `N_2'`.
    pub fn physical(p1: f64, p2: f64, pr: f64, nr: f64, n1_excess: f64, n2_excess: f64) -> Result<Self> {
        if !(n1_excess >= 0.0 && n2_excess >= 0.0) {
            return Err(Error::InvalidParameter("excess noise variances must be nonnegative".into()));
        }
        let ch = Self { p1, p2, pr, n1: nr + n1_excess, n2: nr + n2_excess, nr, degradation: Degradation::Physical };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("P1", self.p1), ("P2", self.p2), ("N1", self.n1), ("N2", self.n2), ("NR", self.nr)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive and finite")));
            }
        }
        if !(self.pr >= 0.0 && self.pr.is_finite()) {
            return Err(Error::InvalidParameter(format!("PR = {} must be nonnegative and finite", self.pr)));
        }
        match self.degradation {
            Degradation::Physical | Degradation::Stochastic if self.n1 < self.nr || self.n2 < self.nr => {
                Err(Error::ScenarioViolation(format!(
                    "degraded channel needs N1, N2 >= NR (N1 = {}, N2 = {}, NR = {})",
                    self.n1, self.n2, self.nr
                )))
            }
            _ => Ok(()),
        }
    }

    fn power(&self, user: usize) -> f64 {
        if user == 1 {
            self.p1
        } else {
            self.p2
        }
    }

    /// Noise at the terminal receiving user `user`'s message.
    fn other_noise(&self, user: usize) -> f64 {
        if user == 1 {
            self.n2
        } else {
            self.n1
        }
    }

    /// Relabels users so that `P_1 >= P_2`.
    pub fn sorted(self) -> Self {
        if self.p1 >= self.p2 {
            self
        } else {
            Self { p1: self.p2, p2: self.p1, n1: self.n2, n2: self.n1, ..self }
        }
    }
}

/// Two-way channel without the relay: `R_i = C(P_i / N_ī)`.
pub fn two_way_no_relay(ch: &TwoWayChannel) -> RatePoint {
    RatePoint::new(c(ch.p1 / ch.n2), c(ch.p2 / ch.n1))
}

/// Rates achieved by sum decoding at the relay plus list decoding and
/// binning at the terminals:
/// `R_i = min([½log(P_i/(P_1+P_2) + P_i/N_R)]⁺, C((P_i + P_R)/N_ī))`.
pub fn twrc_region(ch: &TwoWayChannel) -> RatePoint {
    let user = |i: usize| {
        let p = ch.power(i);
        let relay = positive_part(0.5 * (p / (ch.p1 + ch.p2) + p / ch.nr).log2());
        relay.min(c((p + ch.pr) / ch.other_noise(i)))
    };
    RatePoint::new(user(1), user(2))
}

/// Relay-side sum decoding limit `½log(P_i/(P_1+P_2) + P_i/N_R)` without the positive part.
pub fn sum_decoding_limit(ch: &TwoWayChannel, user: usize) -> f64 {
    let p = ch.power(user);
    0.5 * (p / (ch.p1 + ch.p2) + p / ch.nr).log2()
}

/// `min(C(αP/N_R), ½log(1 + (P + P_R + 2 sqrt((1-α) P P_R)) / (N' + N_R)))`.
pub fn degraded_cut_objective(alpha: f64, p: f64, pr: f64, nr: f64, excess: f64) -> f64 {
    let coherent = p + pr + 2.0 * ((1.0 - alpha).max(0.0) * p * pr).sqrt();
    c(alpha * p / nr).min(c(coherent / (excess + nr)))
}

/// `max over α ∈ [0, 1]` of [`degraded_cut_objective`].
pub fn degraded_cut(p: f64, pr: f64, nr: f64, excess: f64) -> Maximum {
    maximize(|a| degraded_cut_objective(a, p, pr, nr, excess), 0.0, 1.0, GRID_POINTS, ARG_TOLERANCE)
}

/// Cut-set bound of the physically degraded channel, per user.
pub fn cutset_degraded(ch: &TwoWayChannel) -> Result<RatePoint> {
    if ch.degradation != Degradation::Physical {
        return Err(Error::ScenarioViolation("cutset_degraded needs a physically degraded channel".into()));
    }
    let user = |i: usize| degraded_cut(ch.power(i), ch.pr, ch.nr, ch.other_noise(i) - ch.nr).value;
    Ok(RatePoint::new(user(1), user(2)))
}

/// `(broadcast, MAC)` cut values for user `user` at input correlation `rho`.
pub fn general_cut_terms(ch: &TwoWayChannel, user: usize, rho: f64) -> (f64, f64) {
    let p = ch.power(user);
    let n = ch.other_noise(user);
    let combining = match ch.degradation {
        Degradation::Physical => 1.0 / ch.nr,
        Degradation::Stochastic | Degradation::None => 1.0 / ch.nr + 1.0 / n,
    };
    let broadcast = c((1.0 - rho * rho).max(0.0) * p * combining);
    let mac = c((p + ch.pr + 2.0 * rho * (p * ch.pr).sqrt()) / n);
    (broadcast, mac)
}

/// Full-duplex Gaussian cut-set bound, maximized over the input correlation.
pub fn cutset_general(ch: &TwoWayChannel) -> RatePoint {
    let user = |i: usize| {
        maximize(
            |rho| {
                let (b, m) = general_cut_terms(ch, i, rho);
                b.min(m)
            },
            0.0,
            1.0,
            GRID_POINTS,
            ARG_TOLERANCE,
        )
        .value
    };
    RatePoint::new(user(1), user(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Physically degraded; half-bit gap.
    One,
    /// Stochastically degraded; `½ log2 3` gap.
    Two,
}

impl Scenario {
    pub fn from_index(i: u8) -> Result<Self> {
        match i {
            1 => Ok(Self::One),
            2 => Ok(Self::Two),
            _ => Err(Error::InvalidParameter(format!("scenario must be 1 or 2, got {i}"))),
        }
    }

    pub fn index(&self) -> u8 {
        match self {
            Self::One => 1,
            Self::Two => 2,
        }
    }

    /// Claimed per-user gap in bits.
    pub fn claimed_gap(&self) -> f64 {
        match self {
            Self::One => 0.5,
            Self::Two => 0.5 * 3f64.log2(),
        }
    }

    /// Checks that `ch` satisfies this scenario's degradation condition.
    pub fn check(&self, ch: &TwoWayChannel) -> Result<()> {
        ch.validate()?;
        match self {
            Self::One if ch.degradation != Degradation::Physical => {
                Err(Error::ScenarioViolation("scenario 1 needs a physically degraded channel".into()))
            }
            Self::Two if ch.n1 < ch.nr || ch.n2 < ch.nr => Err(Error::ScenarioViolation(format!(
                "scenario 2 needs N1, N2 >= NR (N1 = {}, N2 = {}, NR = {})",
                ch.n1, ch.n2, ch.nr
            ))),
            _ => Ok(()),
        }
    }

    /// Log-uniform draw over `[1e-2, 1e2]` satisfying the scenario, with `P_1 >= P_2`.
    pub fn random_channel<R: Rng + ?Sized>(&self, rng: &mut R) -> TwoWayChannel {
        let mut draw = || 10f64.powf(rng.random_range(-2.0..=2.0));
        let (p1, p2, pr) = (draw(), draw(), draw());
        let ch = match self {
            Self::One => {
                let (nr, e1, e2) = (draw(), draw(), draw());
                TwoWayChannel { p1, p2, pr, n1: nr + e1, n2: nr + e2, nr, degradation: Degradation::Physical }
            }
            Self::Two => loop {
                let (n1, n2, nr) = (draw(), draw(), draw());
                if n1 >= nr && n2 >= nr {
                    break TwoWayChannel { p1, p2, pr, n1, n2, nr, degradation: Degradation::Stochastic };
                }
            },
        };
        ch.sorted()
    }
}

/// Achievable rates, outer bound and their difference for one channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub scenario: Scenario,
    pub channel: TwoWayChannel,
    pub achievable: RatePoint,
    pub outer: RatePoint,
    /// `outer - achievable`, negative values kept.
    pub gap: RatePoint,
}

impl GapReport {
    pub const CSV_HEADER: &'static str = "P1,P2,PR,N1,N2,NR,R1_ach,R2_ach,R1_out,R2_out,gap1,gap2,scenario";

    pub fn csv_row(&self) -> String {
        let ch = &self.channel;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            ch.p1,
            ch.p2,
            ch.pr,
            ch.n1,
            ch.n2,
            ch.nr,
            self.achievable.r1,
            self.achievable.r2,
            self.outer.r1,
            self.outer.r2,
            self.gap.r1,
            self.gap.r2,
            self.scenario.index()
        )
    }

    pub fn max_gap(&self) -> f64 {
        self.gap.r1.max(self.gap.r2)
    }

    pub fn within_claim(&self, tol: f64) -> bool {
        self.max_gap() <= self.scenario.claimed_gap() + tol
    }
}

/// Gap between [`twrc_region`] and the scenario's outer bound
/// ([`cutset_degraded`] for scenario one, [`cutset_general`] for two).
pub fn gap_report(ch: &TwoWayChannel, scenario: Scenario) -> Result<GapReport> {
    scenario.check(ch)?;
    let achievable = twrc_region(ch);
    let outer = match scenario {
        Scenario::One => cutset_degraded(ch)?,
        Scenario::Two => cutset_general(ch),
    };
    Ok(GapReport {
        scenario,
        channel: *ch,
        achievable,
        outer,
        gap: RatePoint::new(outer.r1 - achievable.r1, outer.r2 - achievable.r2),
    })
}

/// Intermediate terms of the half-bit argument for one user of a physically
/// degraded channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfBitChain {
    /// `max(½log(2P_i/(P_1+P_2) + 2P_i/N_R), ½)`.
    pub shifted_relay: f64,
    /// `C(P_i / N_R)`.
    pub relay_capacity: f64,
    /// `½log(2 + 2(P_i + P_R)/N_ī)`.
    pub shifted_direct: f64,
    /// `C((P_i + P_R + 2 sqrt(P_i P_R)) / N_ī)`.
    pub coherent: f64,
    /// The degraded cut-set value.
    pub outer: f64,
}

impl HalfBitChain {
    pub fn new(ch: &TwoWayChannel, user: usize) -> Self {
        let p = ch.power(user);
        let n = ch.other_noise(user);
        Self {
            shifted_relay: (0.5 * (2.0 * p / (ch.p1 + ch.p2) + 2.0 * p / ch.nr).log2()).max(0.5),
            relay_capacity: c(p / ch.nr),
            shifted_direct: 0.5 * (2.0 + 2.0 * (p + ch.pr) / n).log2(),
            coherent: c((p + ch.pr + 2.0 * (p * ch.pr).sqrt()) / n),
            outer: degraded_cut(p, ch.pr, ch.nr, n - ch.nr).value,
        }
    }

    /// Every displayed inequality, with slack `tol`.
    pub fn holds(&self, tol: f64) -> bool {
        self.shifted_relay + tol >= self.relay_capacity
            && self.relay_capacity + tol >= self.outer
            && self.shifted_direct + tol >= self.coherent
            && self.coherent + tol >= self.outer
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::maximize_dense;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn capacity_values() {
        assert_eq!(capacity_c(0.0).unwrap(), 0.0);
        assert!((capacity_c(1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((capacity_c(3.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(capacity_c(-0.1), Err(Error::NegativeArgument(-0.1)));
    }

    #[test]
    fn no_relay_rates() {
        let ch = TwoWayChannel::new(2.0, 6.0, 1.0, 2.0, 2.0, 1.0).unwrap();
        let r = two_way_no_relay(&ch);
        assert!((r.r1 - 0.5).abs() < 1e-12);
        assert!((r.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn region_unit_parameters() {
        let ch = TwoWayChannel::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = twrc_region(&ch);
        assert!((r.r1 - 0.5 * 1.5f64.log2()).abs() < 1e-12);
        assert_eq!(r.r1, r.r2);
    }

    #[test]
    fn region_degenerate_limits() {
        let far = TwoWayChannel::new(1.0, 1.0, 1.0, 1.0, 1.0, 1e12).unwrap();
        assert_eq!(twrc_region(&far).r1, 0.0);
        let weak = TwoWayChannel::new(1.0, 1e-12, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(twrc_region(&weak).r2 < 1e-9);
    }

    #[test]
    fn degraded_cut_without_relay_power() {
        let ch = TwoWayChannel::physical(2.0, 1.0, 0.0, 0.5, 1.5, 0.7).unwrap();
        let r = cutset_degraded(&ch).unwrap();
        assert!((r.r1 - c(2.0 / 1.2)).abs() < 1e-9);
        assert!((r.r2 - c(1.0 / 2.0)).abs() < 1e-9);
    }

    #[test]
    fn degraded_cut_matches_dense_grid() {
        let ch = TwoWayChannel::physical(1.0, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let r = cutset_degraded(&ch).unwrap();
        let oracle = maximize_dense(|a| degraded_cut_objective(a, 1.0, 1.0, 1.0, 1.0), 0.0, 1.0, 1e-6);
        assert!((r.r1 - oracle.value).abs() < 1e-6);
        assert_eq!(r.r1, r.r2);
    }

    #[test]
    fn general_cut_reduces_to_degraded() {
        let ch = TwoWayChannel::physical(3.0, 0.4, 2.0, 0.8, 0.3, 1.7).unwrap();
        let g = cutset_general(&ch);
        let d = cutset_degraded(&ch).unwrap();
        assert!((g.r1 - d.r1).abs() < 1e-6 && (g.r2 - d.r2).abs() < 1e-6);
    }

    #[test]
    fn general_cut_without_relay_power_is_direct_capacity() {
        let ch = TwoWayChannel::new(3.0, 0.4, 0.0, 1.2, 2.5, 1.0).unwrap();
        let g = cutset_general(&ch);
        let d = two_way_no_relay(&ch);
        assert!((g.r1 - d.r1).abs() < 1e-9 && (g.r2 - d.r2).abs() < 1e-9);
    }

    #[test]
    fn scenario_checks() {
        let ch = TwoWayChannel::new(1.0, 1.0, 1.0, 0.5, 2.0, 1.0).unwrap();
        assert!(matches!(gap_report(&ch, Scenario::Two), Err(Error::ScenarioViolation(_))));
        assert!(matches!(gap_report(&ch, Scenario::One), Err(Error::ScenarioViolation(_))));
    }

    #[test]
    fn gaps_within_claims_on_random_draws() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for s in [Scenario::One, Scenario::Two] {
            for _ in 0..300 {
                let ch = s.random_channel(&mut rng);
                assert!(ch.p1 >= ch.p2);
                let g = gap_report(&ch, s).unwrap();
                assert!(g.within_claim(1e-9), "{g:?}");
                assert!(g.gap.r1 >= -1e-9 && g.gap.r2 >= -1e-9, "{g:?}");
                if s == Scenario::One {
                    assert!(HalfBitChain::new(&ch, 1).holds(1e-9));
                    assert!(HalfBitChain::new(&ch, 2).holds(1e-9));
                }
            }
        }
    }

    #[test]
    fn symmetric_gaps_are_equal() {
        let ch = TwoWayChannel::physical(2.0, 2.0, 3.0, 0.5, 1.0, 1.0).unwrap();
        let g = gap_report(&ch, Scenario::One).unwrap();
        assert!((g.gap.r1 - g.gap.r2).abs() < 1e-12);
        assert!(g.csv_row().ends_with(",1"));
    }
}
