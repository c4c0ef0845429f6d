//! One function per subcommand. Each validates the config, computes, and
//! returns the file contents; nothing touches the filesystem here.

use std::fmt::Write;

use latlist::channel::P2pStats;
use latlist::region::{
    cutset_degraded, cutset_general, gap_report, twrc_region, two_way_no_relay, Degradation, GapReport, RatePoint,
    TwoWayChannel,
};
use latlist::relay::{build_df_codebooks, df_capacity, df_round_trip, DfBlock, DfRun};
use latlist::stats::{trial_rng, ErrorCount};
use latlist::twrc::{build_twrc_codebooks, twrc_round_trip, TwrcBlock, TwrcRun};
use latlist::{build_chain, is_sublattice, size_list_lattice, AwgnParams, ListDecoder};
use rand::RngCore;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::plot::{emit_plot, Region};
use crate::{CliError, Outputs};

const DEFAULT_P2P_TRIALS: u64 = 10_000;
const DEFAULT_RUNS: u64 = 100;
/// Slack on the containment and claimed-gap checks.
const RATE_TOL: f64 = 1e-9;

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for row in rows {
        s.push_str(&row);
        s.push('\n');
    }
    s
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn rate_record(e: &ErrorCount) -> Value {
    json!({ "errors": e.errors, "trials": e.trials, "rate": e.rate(), "ci95": e.ci95_half_width() })
}

/// Per-run seeds `trial_rng(seed, r).next_u64()`, independent of thread count.
fn run_seeds(seed: u64, runs: u64) -> Vec<u64> {
    (0..runs).map(|r| trial_rng(seed, r).next_u64()).collect()
}

pub fn chain_info(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let spec = cfg.chain_spec()?;
    let chain = spec.build()?;
    let n = chain.dim();
    let lattices: Vec<Value> = (0..chain.len())
        .map(|i| json!({ "index": i, "rank": chain.ranks()[i], "volume": chain.volume(i) }))
        .collect();
    let mut pairs = Vec::new();
    let mut rows = Vec::new();
    for i in 0..chain.len().saturating_sub(1) {
        let nested = is_sublattice(chain.lattice(i), chain.lattice(i + 1))?;
        let rate = chain.rate(i, i + 1);
        let log2_size = (chain.ranks()[i + 1] - chain.ranks()[i]) as f64 * (chain.prime() as f64).log2();
        rows.push(format!("{i},{},{},{},{log2_size},{rate},{nested}", i + 1, chain.ranks()[i], chain.ranks()[i + 1]));
        pairs.push(json!({ "coarse": i, "fine": i + 1, "log2_codebook_size": log2_size, "rate": rate, "nested": nested }));
    }
    let mut out = Outputs::default();
    out.add(
        "lattices.csv",
        csv("index,rank,volume", (0..chain.len()).map(|i| format!("{i},{},{}", chain.ranks()[i], chain.volume(i)))),
    );
    out.add("rates.csv", csv("coarse,fine,coarse_rank,fine_rank,log2_codebook_size,rate,nested", rows));
    out.add("summary.json", pretty(&json!({ "chain": spec, "n": n, "lattices": lattices, "pairs": pairs })));
    let mut s = String::new();
    writeln!(s, "chain p = {}, n = {n}, ranks {:?}, gamma = {}", chain.prime(), chain.ranks(), chain.gamma()).unwrap();
    for p in &pairs {
        writeln!(s, "  R({} -> {}) = {:.6} bits/dim, nested = {}", p["coarse"], p["fine"], p["rate"], p["nested"]).unwrap();
    }
    out.summary = s;
    Ok(out)
}

pub fn p2p_sim(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let s = cfg.p2p_section()?;
    let trials = cfg.trials_or(DEFAULT_P2P_TRIALS)?;
    let seed = cfg.seed();
    let awgn = AwgnParams::new(s.signal, s.noise)?;
    let (coarse, fine) = (s.ranks[0], *s.ranks.last().expect("ranks validated"));
    let gamma = match s.gamma {
        Some(g) => g,
        None => latlist::chain::gamma_for_second_moment(s.p, s.n, coarse, s.signal)?,
    };
    let list = match s.ranks.len() {
        3 => s.ranks[1],
        _ => {
            let pair = build_chain(s.p, s.n, &[coarse, fine], gamma)?;
            size_list_lattice(pair.lattice(0), pair.lattice(1), s.signal, s.noise, s.margin)?.rank
        }
    };
    let chain = build_chain(s.p, s.n, &[coarse, list, fine], gamma)?;
    let decoder = ListDecoder::from_chain(&chain, 0, 1, 2)?;
    let stats = latlist::simulate_p2p(&decoder, &awgn, trials, seed)?;

    let mut out = Outputs::default();
    out.add("p2p.csv", csv(P2pStats::CSV_HEADER, [stats.csv_row()]));
    if s.log {
        let rows = stats
            .log
            .iter()
            .map(|t| format!("{},{},{},{},{}", t.trial, t.message, t.list_size, t.in_list, t.noise_outside));
        out.add("p2p_log.csv", csv("trial,message,list_size,in_list,noise_outside", rows));
    }
    out.add(
        "summary.json",
        pretty(&json!({
            "trials": stats.trials,
            "pe_hat": stats.pe_hat(),
            "pe_ci95": stats.pe_ci95(),
            "errors": stats.errors,
            "list_size": stats.list_size,
            "list_size_deviations": stats.list_size_deviations,
            "event_mismatches": stats.event_mismatches,
            "n": stats.n,
            "p": stats.p,
            "ranks": [coarse, list, fine],
            "gamma": gamma,
            "rate": chain.rate(0, 2),
            "capacity": awgn.capacity(),
            "P": stats.signal,
            "N": stats.noise,
            "seed": seed,
        })),
    );
    out.summary = format!(
        "p2p: rate {:.6}, capacity {:.6}, |L| = {}, pe_hat = {} +- {:.3e} over {} trials\n",
        chain.rate(0, 2),
        awgn.capacity(),
        stats.list_size,
        stats.pe_hat(),
        stats.pe_ci95(),
        stats.trials
    );
    Ok(out)
}

fn merge_counts<T>(runs: &[T], f: impl Fn(&T) -> ErrorCount) -> ErrorCount {
    runs.iter().map(f).fold(ErrorCount::default(), ErrorCount::merge)
}

pub fn relay_sim(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let params = cfg.relay_params()?;
    let runs = cfg.trials_or(DEFAULT_RUNS)?;
    let seed = cfg.seed();
    let capacity = df_capacity(params.signal, params.relay_power, params.relay_noise, params.extra_noise)?;
    let cb = build_df_codebooks(&params, seed)?;
    let seeds = run_seeds(seed, runs);
    let results: Vec<DfRun> =
        seeds.par_iter().map(|&s| df_round_trip(&cb, s)).collect::<Result<_, latlist::Error>>()?;

    let message = merge_counts(&results, |r| r.message_errors);
    let relay = merge_counts(&results, |r| r.relay_errors);
    let bin = merge_counts(&results, |r| r.bin_errors);
    let misses = merge_counts(&results, |r| r.list_misses);
    let sum = |f: fn(&DfRun) -> u64| results.iter().map(f).sum::<u64>();

    let mut out = Outputs::default();
    let rows = results.iter().zip(&seeds).enumerate().map(|(i, (r, s))| {
        format!(
            "{i},{s},{},{},{},{},{},{}",
            r.message_errors.errors,
            r.relay_errors.errors,
            r.bin_errors.errors,
            r.list_misses.errors,
            r.empty_intersections,
            r.ambiguous_intersections
        )
    });
    out.add(
        "relay_runs.csv",
        csv("run,seed,message_errors,relay_errors,bin_errors,list_misses,empty_intersections,ambiguous_intersections", rows),
    );
    out.add("relay_transcript.csv", csv(DfBlock::CSV_HEADER, results[0].blocks.iter().map(DfBlock::csv_row)));
    out.add(
        "summary.json",
        pretty(&json!({
            "params": params,
            "runs": runs,
            "seed": seed,
            "rate": cb.rate(),
            "bin_rate": cb.bin_rate(),
            "list_size": cb.list_size(),
            "df_capacity": capacity,
            "message_errors": rate_record(&message),
            "relay_errors": rate_record(&relay),
            "bin_errors": rate_record(&bin),
            "list_misses": rate_record(&misses),
            "empty_intersections": sum(|r| r.empty_intersections),
            "ambiguous_intersections": sum(|r| r.ambiguous_intersections),
            "event_mismatches": sum(|r| r.event_mismatches),
            "list_size_deviations": sum(|r| r.list_size_deviations),
        })),
    );
    out.summary = format!(
        "relay: rate {:.6} (DF capacity {:.6}), message error rate {} +- {:.3e} over {} messages\n",
        cb.rate(),
        capacity.rate,
        message.rate(),
        message.ci95_half_width(),
        message.trials
    );
    Ok(out)
}

pub fn twrc_sim(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let (params, blocks) = cfg.twrc_params()?;
    let runs = cfg.trials_or(DEFAULT_RUNS)?;
    let seed = cfg.seed();
    let cb = build_twrc_codebooks(&params, seed)?;
    let seeds = run_seeds(seed, runs);
    let results: Vec<TwrcRun> =
        seeds.par_iter().map(|&s| twrc_round_trip(&cb, blocks, s)).collect::<Result<_, latlist::Error>>()?;

    let e1 = merge_counts(&results, |r| r.errors1);
    let e2 = merge_counts(&results, |r| r.errors2);
    let sums = merge_counts(&results, |r| r.sum_errors);
    let sum = |f: fn(&TwrcRun) -> u64| results.iter().map(f).sum::<u64>();
    let (r1, r2) = cb.rates();
    let achievable = twrc_region(&params.channel);

    let mut out = Outputs::default();
    let rows = results.iter().zip(&seeds).enumerate().map(|(i, (r, s))| {
        format!("{i},{s},{},{},{}", r.errors1.errors, r.errors2.errors, r.sum_errors.errors)
    });
    out.add("twrc_runs.csv", csv("run,seed,errors1,errors2,sum_errors", rows));
    out.add("twrc_transcript.csv", csv(TwrcBlock::CSV_HEADER, results[0].blocks.iter().map(TwrcBlock::csv_row)));
    out.add(
        "summary.json",
        pretty(&json!({
            "params": params,
            "blocks": blocks,
            "runs": runs,
            "seed": seed,
            "rates": RatePoint::new(r1, r2),
            "achievable": achievable,
            "ranks": cb.ranks,
            "list1_size": cb.list_decoder1().list_size(),
            "list2_size": cb.list_decoder2().list_size(),
            "errors1": rate_record(&e1),
            "errors2": rate_record(&e2),
            "sum_errors": rate_record(&sums),
            "empty_intersections": sum(|r| r.empty_intersections),
            "ambiguous_intersections": sum(|r| r.ambiguous_intersections),
            "event_mismatches": sum(|r| r.event_mismatches),
            "list_size_deviations": sum(|r| r.list_size_deviations),
        })),
    );
    out.summary = format!(
        "twrc: rates ({r1:.6}, {r2:.6}), error rates {} +- {:.3e} (1 -> 2), {} +- {:.3e} (2 -> 1)\n",
        e2.rate(),
        e2.ci95_half_width(),
        e1.rate(),
        e1.ci95_half_width()
    );
    Ok(out)
}

/// The outer bound used for a channel: the degraded cut-set when the noise is
/// physically degraded, the general one otherwise.
fn outer_bound(ch: &TwoWayChannel) -> Result<RatePoint, CliError> {
    Ok(match ch.degradation {
        Degradation::Physical => cutset_degraded(ch)?,
        _ => cutset_general(ch),
    })
}

fn channel_label(ch: &TwoWayChannel) -> String {
    format!("P1={},P2={},PR={},N1={},N2={},NR={}", ch.p1, ch.p2, ch.pr, ch.n1, ch.n2, ch.nr)
}

pub fn regions(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let channels = cfg.region_channels()?;
    let sweep = cfg.regions.as_ref().and_then(|r| r.sweep);
    let evaluated: Vec<(TwoWayChannel, RatePoint, RatePoint, RatePoint)> = channels
        .iter()
        .map(|ch| Ok((*ch, two_way_no_relay(ch), twrc_region(ch), outer_bound(ch)?)))
        .collect::<Result<_, CliError>>()?;

    let rows = evaluated.iter().map(|(ch, direct, ach, outer)| {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            ch.p1,
            ch.p2,
            ch.pr,
            ch.n1,
            ch.n2,
            ch.nr,
            direct.r1,
            direct.r2,
            ach.r1,
            ach.r2,
            outer.r1,
            outer.r2,
            ach.inside(outer, RATE_TOL)
        )
    });
    let mut plot = Vec::new();
    for (ch, direct, ach, outer) in &evaluated {
        let tag = match sweep {
            Some(param) => {
                let v = match param {
                    crate::config::SweepParameter::P1 => ch.p1,
                    crate::config::SweepParameter::P2 => ch.p2,
                    crate::config::SweepParameter::Pr => ch.pr,
                    crate::config::SweepParameter::Nr => ch.nr,
                };
                format!(", {}={v}", param.name())
            }
            None => {
                plot.push(Region::rectangle("no relay", direct.r1, direct.r2));
                String::new()
            }
        };
        plot.push(Region::rectangle(format!("achievable{tag}"), ach.r1, ach.r2));
        plot.push(Region::rectangle(format!("cut-set{tag}"), outer.r1, outer.r2));
    }
    let title = match sweep {
        Some(param) => format!("Rate regions, sweep over {}", param.name()),
        None => format!("Rate regions, {}", channel_label(&channels[0])),
    };

    let mut out = Outputs::default();
    out.add("regions.csv", csv("P1,P2,PR,N1,N2,NR,R1_direct,R2_direct,R1_ach,R2_ach,R1_out,R2_out,inside", rows));
    out.add("regions.svg", emit_plot(&title, &plot)?);
    let records: Vec<Value> = evaluated
        .iter()
        .map(|(ch, direct, ach, outer)| json!({ "channel": ch, "no_relay": direct, "achievable": ach, "outer": outer }))
        .collect();
    out.add("summary.json", pretty(&json!({ "sweep": sweep, "points": records })));
    let mut s = String::new();
    for (ch, _, ach, outer) in &evaluated {
        writeln!(
            s,
            "{}: achievable ({:.6}, {:.6}), outer ({:.6}, {:.6})",
            channel_label(ch),
            ach.r1,
            ach.r2,
            outer.r1,
            outer.r2
        )
        .unwrap();
    }
    out.summary = s;
    Ok(out)
}

pub fn gaps(cfg: &ExperimentConfig) -> Result<Outputs, CliError> {
    let (scenario, draws) = cfg.gaps()?;
    let seed = cfg.seed();
    let reports: Vec<GapReport> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i);
            let ch = scenario.random_channel(&mut rng);
            gap_report(&ch, scenario)
        })
        .collect::<Result<_, latlist::Error>>()?;

    let (worst_index, worst) = reports
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.max_gap().total_cmp(&b.1.max_gap()).then(b.0.cmp(&a.0)))
        .expect("draws >= 1");
    let violations = reports.iter().filter(|r| !r.within_claim(RATE_TOL)).count();
    let plot = [
        Region::rectangle("achievable", worst.achievable.r1, worst.achievable.r2),
        Region::rectangle("cut-set", worst.outer.r1, worst.outer.r2),
    ];
    let title = format!("Scenario {}, largest gap {:.4} at draw {worst_index}", scenario.index(), worst.max_gap());

    let mut out = Outputs::default();
    out.add("gaps.csv", csv(GapReport::CSV_HEADER, reports.iter().map(GapReport::csv_row)));
    out.add("gaps.svg", emit_plot(&title, &plot)?);
    out.add(
        "summary.json",
        pretty(&json!({
            "scenario": scenario.index(),
            "draws": draws,
            "seed": seed,
            "claimed_gap": scenario.claimed_gap(),
            "max_gap": worst.max_gap(),
            "max_gap_draw": worst_index,
            "max_gap_report": worst,
            "violations": violations,
        })),
    );
    out.summary = format!(
        "gaps: scenario {}, {draws} draws, max gap {:.6} (claimed {:.6}), {violations} violations\n",
        scenario.index(),
        worst.max_gap(),
        scenario.claimed_gap()
    );
    Ok(out)
}
