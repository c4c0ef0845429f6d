//! Experiment configuration: one TOML document with a section per subcommand.
//!
//! ```toml
//! seed = 7
//! trials = 10000
//! out = "results"
//!
//! [p2p]
//! p = 3
//! n = 2
//! ranks = [0, 1, 2]
//! signal = 1.0
//! noise = 0.5
//! ```
//!
//! Command-line flags override the top-level keys.

use std::path::PathBuf;

use latlist::region::{Degradation, Scenario, TwoWayChannel};
use latlist::relay::DegradedRelayParams;
use latlist::twrc::TwrcParams;
use latlist::ChainSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
    pub chain: Option<ChainSpec>,
    pub p2p: Option<P2pSection>,
    pub relay: Option<DegradedRelayParams>,
    pub channel: Option<ChannelSection>,
    pub twrc: Option<TwrcSection>,
    pub regions: Option<RegionsSection>,
    pub gaps: Option<GapsSection>,
}

/// Point-to-point list decoding over the chain `(ranks[0], ranks[1], ranks[2])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct P2pSection {
    pub p: u64,
    pub n: usize,
    /// Coarse, list and fine ranks; with two entries the list rank is sized
    /// from the channel.
    pub ranks: Vec<usize>,
    pub signal: f64,
    pub noise: f64,
    /// Defaults to the scale giving the coarse lattice second moment `signal`.
    pub gamma: Option<f64>,
    #[serde(default)]
    pub margin: f64,
    /// Also write the per-trial log.
    #[serde(default)]
    pub log: bool,
}

/// Powers and noises shared by `twrc-sim` and `regions`.
///
/// Give either `n1`, `n2` (independent noises) or `n1_excess`, `n2_excess`
/// (physically degraded, `N_i = N_R + N_i'`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub p1: f64,
    pub p2: f64,
    pub pr: f64,
    pub nr: f64,
    pub n1: Option<f64>,
    pub n2: Option<f64>,
    pub n1_excess: Option<f64>,
    pub n2_excess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwrcSection {
    pub r1: f64,
    pub r2: f64,
    /// Defaults to the broadcast requirement.
    pub relay_rate: Option<f64>,
    pub p: u64,
    pub n: usize,
    pub blocks: usize,
    #[serde(default)]
    pub list_margin: f64,
}

/// Which channel parameter the `regions` sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    P1,
    P2,
    Pr,
    Nr,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::P1 => "P1",
            SweepParameter::P2 => "P2",
            SweepParameter::Pr => "PR",
            SweepParameter::Nr => "NR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsSection {
    pub sweep: Option<SweepParameter>,
    #[serde(default)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapsSection {
    pub scenario: u8,
    /// Overridden by `--trials`.
    pub draws: Option<u64>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section.as_ref().ok_or_else(|| invalid(format!("missing [{name}] section")))
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} must be positive and finite")))
    }
}

impl ExperimentConfig {
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn trials_or(&self, default: u64) -> Result<u64, CliError> {
        match self.trials.unwrap_or(default) {
            0 => Err(invalid("trials must be at least 1")),
            t => Ok(t),
        }
    }

    pub fn chain_spec(&self) -> Result<&ChainSpec, CliError> {
        require(&self.chain, "chain")
    }

    pub fn p2p_section(&self) -> Result<&P2pSection, CliError> {
        let s = require(&self.p2p, "p2p")?;
        positive("p2p.signal", s.signal)?;
        positive("p2p.noise", s.noise)?;
        if let Some(g) = s.gamma {
            positive("p2p.gamma", g)?;
        }
        if s.margin.is_nan() || s.margin < 0.0 {
            return Err(invalid(format!("p2p.margin = {} must be nonnegative", s.margin)));
        }
        if !(2..=3).contains(&s.ranks.len()) {
            return Err(invalid(format!("p2p.ranks needs 2 or 3 entries, got {}", s.ranks.len())));
        }
        if s.ranks.windows(2).any(|w| w[0] > w[1]) || s.ranks.iter().any(|&k| k > s.n) {
            return Err(invalid(format!("p2p.ranks {:?} must be nondecreasing and at most n = {}", s.ranks, s.n)));
        }
        Ok(s)
    }

    pub fn relay_params(&self) -> Result<DegradedRelayParams, CliError> {
        let params = require(&self.relay, "relay")?.clone();
        params.validate().map_err(|e| invalid(format!("[relay] {e}")))?;
        Ok(params)
    }

    pub fn channel(&self) -> Result<TwoWayChannel, CliError> {
        let s = require(&self.channel, "channel")?;
        let ch = match (s.n1, s.n2, s.n1_excess, s.n2_excess) {
            (Some(n1), Some(n2), None, None) => TwoWayChannel::new(s.p1, s.p2, s.pr, n1, n2, s.nr),
            (None, None, Some(e1), Some(e2)) => TwoWayChannel::physical(s.p1, s.p2, s.pr, s.nr, e1, e2),
            _ => return Err(invalid("[channel] needs either n1 and n2, or n1_excess and n2_excess")),
        };
        ch.map_err(|e| invalid(format!("[channel] {e}")))
    }

    pub fn twrc_params(&self) -> Result<(TwrcParams, usize), CliError> {
        let s = require(&self.twrc, "twrc")?;
        let channel = self.channel()?;
        let mut params = TwrcParams {
            channel,
            r1: s.r1,
            r2: s.r2,
            relay_rate: 0.0,
            p: s.p,
            n: s.n,
            list_margin: s.list_margin,
        };
        params.relay_rate = s.relay_rate.unwrap_or_else(|| params.broadcast_requirement());
        params.validate().map_err(|e| invalid(format!("[twrc] {e}")))?;
        if s.blocks < 2 {
            return Err(invalid(format!("twrc.blocks = {} must be at least 2", s.blocks)));
        }
        Ok((params, s.blocks))
    }

    /// Channels of the `regions` sweep, the base channel first when no sweep is set.
    pub fn region_channels(&self) -> Result<Vec<TwoWayChannel>, CliError> {
        let base = self.channel()?;
        let Some(s) = &self.regions else {
            return Ok(vec![base]);
        };
        let Some(param) = s.sweep else {
            if !s.values.is_empty() {
                return Err(invalid("regions.values given without regions.sweep"));
            }
            return Ok(vec![base]);
        };
        if s.values.is_empty() {
            return Err(invalid("regions.sweep needs a nonempty regions.values"));
        }
        s.values
            .iter()
            .map(|&v| {
                let mut ch = base;
                match param {
                    SweepParameter::P1 => ch.p1 = v,
                    SweepParameter::P2 => ch.p2 = v,
                    SweepParameter::Pr => ch.pr = v,
                    SweepParameter::Nr => {
                        if ch.degradation == Degradation::Physical {
                            ch.n1 += v - ch.nr;
                            ch.n2 += v - ch.nr;
                        }
                        ch.nr = v;
                    }
                }
                ch.validate().map_err(|e| invalid(format!("regions.values entry {v}: {e}")))?;
                Ok(ch)
            })
            .collect()
    }

    pub fn gaps(&self) -> Result<(Scenario, u64), CliError> {
        let s = require(&self.gaps, "gaps")?;
        let scenario = Scenario::from_index(s.scenario).map_err(|e| invalid(format!("gaps.scenario: {e}")))?;
        let draws = match self.trials.or(s.draws).unwrap_or(10_000) {
            0 => return Err(invalid("gaps.draws must be at least 1")),
            d => d,
        };
        Ok((scenario, draws))
    }
}
