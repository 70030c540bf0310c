//! Single-relay failure analyses: reachability impact distribution,
//! post-recovery hop-count CDF, and sampled throughput degradation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{NetworkState, ReachScratch};
use crate::error::{Error, Result};
use crate::flowsim::{max_min_fair_rates, CapacityModel, FlowSpec};
use crate::topology::{Params, Topology};

/// How many source ToRs lose how many destinations when one relay fails
/// and no recovery runs. The distribution is the same for every choice of
/// failed relay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactHistogram {
    pub p: usize,
    pub k: usize,
    pub failed: usize,
    /// lost-ToR count -> number of sources with that loss.
    pub counts: BTreeMap<usize, usize>,
}

impl ImpactHistogram {
    pub fn total_sources(&self) -> usize {
        self.counts.values().sum()
    }

    /// Fraction of sources with no reachability impact at all.
    pub fn zero_loss_fraction(&self) -> f64 {
        *self.counts.get(&0).unwrap_or(&0) as f64 / self.total_sources() as f64
    }

    /// CSV rows `loss,count`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "loss,count")?;
        for (loss, count) in &self.counts {
            writeln!(w, "{loss},{count}")?;
        }
        Ok(())
    }
}

/// Measures the reachability impact of an unrecovered relay failure by
/// walking the active rules from every source.
pub fn failure_impact_distribution(topo: &Topology, failed: usize) -> Result<ImpactHistogram> {
    let mut state = NetworkState::new(topo.clone())?;
    state.fail_without_recovery(failed)?;
    let n = topo.n();

    let losses: Vec<usize> = (0..n)
        .into_par_iter()
        .map_init(ReachScratch::default, |scratch, src| {
            let stats = state
                .reachable_stats(src, scratch)
                .expect("source in range");
            n - stats.reached
        })
        .collect();

    let mut counts = BTreeMap::new();
    for loss in losses {
        *counts.entry(loss).or_insert(0) += 1;
    }
    Ok(ImpactHistogram {
        p: topo.p(),
        k: topo.k(),
        failed,
        counts,
    })
}

/// Closed-form impact distribution, derived from where the failed relay
/// can sit on a one-to-all tree. Per source tree the failed ToR is either
/// an in-island node whose subtree has height `h` (`k*(p-1)*p^(k-1-h)`
/// sources, losing `p + p^2 + ... + p^h` ToRs, with `h = 0` the no-impact
/// leaf case), a spine node at distance `t` from the root (one source
/// each, losing `(k-t)*p^k - 1`), or the source itself (losing everything
/// else).
pub fn closed_form_impact_distribution(params: &Params, failed: usize) -> Result<ImpactHistogram> {
    if failed >= params.n() {
        return Err(Error::IndexOutOfRange {
            index: failed,
            n: params.n(),
        });
    }
    let (p, k) = (params.p(), params.k());
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();

    let mut island_loss = 0usize;
    for h in 0..k {
        // k*(p-1)*p^(k-1-h) sources, loss p + ... + p^h
        let sources = k * (p - 1) * p.pow((k - 1 - h) as u32);
        *counts.entry(island_loss).or_insert(0) += sources;
        island_loss += p.pow((h + 1) as u32);
    }
    for t in 1..k {
        *counts.entry((k - t) * p.pow(k as u32) - 1).or_insert(0) += 1;
    }
    *counts.entry(k * p.pow(k as u32) - 1).or_insert(0) += 1;

    debug_assert_eq!(counts.values().sum::<usize>(), params.n());
    Ok(ImpactHistogram {
        p,
        k,
        failed,
        counts,
    })
}

/// Distribution of per-source maximum hop count after failure recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopCdf {
    pub p: usize,
    pub k: usize,
    pub failed: usize,
    /// max hop -> number of sources (failed ToR excluded as a source).
    pub counts: BTreeMap<usize, usize>,
    /// Fraction of sources whose max hop stays at the healthy `2k - 1`.
    pub unchanged_fraction: f64,
}

impl HopCdf {
    pub fn max_hop(&self) -> usize {
        self.counts.keys().copied().max().unwrap_or(0)
    }

    /// CSV rows `max_hop,fraction` with cumulative fractions.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "max_hop,fraction")?;
        let total: usize = self.counts.values().sum();
        let mut acc = 0usize;
        for (hop, count) in &self.counts {
            acc += count;
            writeln!(w, "{},{}", hop, acc as f64 / total as f64)?;
        }
        Ok(())
    }
}

/// Max hop count of every surviving source once recovery has rerouted
/// around `failed`. Sources whose rules were untouched keep the healthy
/// depth; the rest are re-walked.
pub fn post_recovery_hop_cdf(topo: &Topology, failed: usize) -> Result<HopCdf> {
    let n = topo.n();
    let healthy_hop = topo.params().max_healthy_hops();
    let mut state = NetworkState::new(topo.clone())?;

    // Healthy baseline: every source spans the fabric at depth 2k - 1.
    let baseline: Vec<usize> = (0..n)
        .into_par_iter()
        .map_init(ReachScratch::default, |scratch, src| {
            let stats = state
                .reachable_stats(src, scratch)
                .expect("source in range");
            assert_eq!(stats.reached, n, "healthy fabric must span from {src}");
            stats.max_hop
        })
        .collect();
    assert!(baseline.iter().all(|&h| h == healthy_hop));

    let delta = state.recover_single_failure(failed)?;
    let touched = delta.sources();

    let hops: Vec<Option<usize>> = (0..n)
        .into_par_iter()
        .map_init(ReachScratch::default, |scratch, src| {
            if src == failed {
                return None;
            }
            if !touched.contains(&src) {
                // Rules for this source are bit-identical to the healthy
                // tables, so its walk is unchanged.
                return Some(healthy_hop);
            }
            let stats = state
                .reachable_stats(src, scratch)
                .expect("source in range");
            assert_eq!(
                stats.reached, n,
                "recovery must restore reachability from {src}"
            );
            Some(stats.max_hop)
        })
        .collect();

    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for hop in hops.into_iter().flatten() {
        assert!(hop <= topo.params().max_recovered_hops());
        *counts.entry(hop).or_insert(0) += 1;
    }
    let unchanged = *counts.get(&healthy_hop).unwrap_or(&0);
    let total: usize = counts.values().sum();
    Ok(HopCdf {
        p: topo.p(),
        k: topo.k(),
        failed,
        counts,
        unchanged_fraction: unchanged as f64 / total as f64,
    })
}

/// Mean relative throughput loss between the healthy fabric and the
/// recovered one, over seeded random source sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationReport {
    pub p: usize,
    pub k: usize,
    pub failed: usize,
    pub fraction_active: f64,
    pub samples: usize,
    pub seed: u64,
    pub sources_per_sample: usize,
    pub mean_degradation: f64,
}

/// CSV rows `fraction_active,mean_degradation`.
pub fn write_degradation_csv<W: std::io::Write>(
    w: &mut W,
    reports: &[DegradationReport],
) -> Result<()> {
    writeln!(w, "fraction_active,mean_degradation")?;
    for r in reports {
        writeln!(w, "{},{}", r.fraction_active, r.mean_degradation)?;
    }
    Ok(())
}

/// Splitmix64: a counter-based generator that is bit-stable across
/// platforms, so seeded reports reproduce exactly everywhere.
#[derive(Debug, Clone)]
pub(crate) struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub(crate) fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, bound)` by 128-bit multiply-shift.
    pub(crate) fn below(&mut self, bound: usize) -> usize {
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }
}

/// Draws a uniform `size`-subset of `candidates` by partial shuffle.
fn sample_sources(candidates: &[usize], size: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut pool = candidates.to_vec();
    for i in 0..size {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
    }
    pool.truncate(size);
    pool
}

/// Samples random sets of active sources and compares each source's
/// max-min fair rate on the healthy fabric against the fabric recovered
/// from a single relay failure (canonically ToR 0; the impact distribution
/// is relay-invariant). Degradation of a source is
/// `(healthy - recovered) / healthy`; the report averages over sources and
/// samples.
pub fn throughput_degradation(
    topo: &Topology,
    fraction_active: f64,
    samples: usize,
    seed: u64,
) -> Result<DegradationReport> {
    if !(fraction_active > 0.0 && fraction_active <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "fraction_active must lie in (0, 1], got {fraction_active}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParams("samples must be at least 1".into()));
    }
    let failed = 0usize;
    let n = topo.n();
    // The failed relay can no longer source multicasts, so sampling draws
    // from the n - 1 surviving ToRs in both fabrics.
    let candidates: Vec<usize> = (0..n).filter(|&v| v != failed).collect();
    let size = (fraction_active * candidates.len() as f64).round() as usize;
    if size == 0 {
        return Err(Error::NoActiveSources(fraction_active));
    }

    let healthy = NetworkState::new(topo.clone())?;
    let mut recovered = NetworkState::new(topo.clone())?;
    recovered.recover_single_failure(failed)?;
    let cap = CapacityModel::new(1.0)?;

    let sample_means: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|sample_idx| {
            let mut rng = SplitMix64::new(seed ^ (sample_idx as u64).wrapping_mul(0x9e37_79b9));
            let sources = sample_sources(&candidates, size, &mut rng);
            let flows: Vec<FlowSpec> = sources
                .iter()
                .map(|&s| FlowSpec::one_to_all(format!("s{s}"), s, 0))
                .collect();
            let h = max_min_fair_rates(&flows, &cap, &healthy).expect("healthy rates");
            let r = max_min_fair_rates(&flows, &cap, &recovered).expect("recovered rates");
            let mut acc = 0.0;
            for (hr, rr) in h.rates_bps.iter().zip(&r.rates_bps) {
                acc += (hr - rr) / hr;
            }
            acc / flows.len() as f64
        })
        .collect();

    Ok(DegradationReport {
        p: topo.p(),
        k: topo.k(),
        failed,
        fraction_active,
        samples,
        seed,
        sources_per_sample: size,
        mean_degradation: sample_means.iter().sum::<f64>() / samples as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Params, Topology};

    fn topo(p: usize, k: usize) -> Topology {
        Topology::new(Params::new(p, k).unwrap())
    }

    #[test]
    fn impact_histogram_matches_worked_example() {
        let hist = failure_impact_distribution(&topo(2, 3), 8).unwrap();
        let expected: BTreeMap<usize, usize> = [(0, 12), (2, 6), (6, 3), (7, 1), (15, 1), (23, 1)]
            .into_iter()
            .collect();
        assert_eq!(hist.counts, expected);
        assert_eq!(hist.total_sources(), 24);
    }

    #[test]
    fn impact_histogram_2_2() {
        let hist = failure_impact_distribution(&topo(2, 2), 4).unwrap();
        let expected: BTreeMap<usize, usize> =
            [(0, 4), (2, 2), (3, 1), (7, 1)].into_iter().collect();
        assert_eq!(hist.counts, expected);
    }

    #[test]
    fn closed_form_matches_brute_force_on_small_instances() {
        for (p, k) in [(2, 2), (2, 3), (3, 2), (3, 3), (4, 2)] {
            let topo = topo(p, k);
            let brute = failure_impact_distribution(&topo, 1).unwrap();
            let closed = closed_form_impact_distribution(topo.params(), 1).unwrap();
            assert_eq!(brute.counts, closed.counts, "p={p} k={k}");
        }
    }

    #[test]
    fn histogram_is_failed_relay_invariant() {
        for (p, k) in [(3, 2), (2, 3)] {
            let topo = topo(p, k);
            let reference = failure_impact_distribution(&topo, 0).unwrap();
            for failed in 1..topo.n() {
                let hist = failure_impact_distribution(&topo, failed).unwrap();
                assert_eq!(hist.counts, reference.counts, "p={p} k={k} failed={failed}");
            }
        }
    }

    #[test]
    fn zero_loss_fraction_is_one_minus_one_over_p() {
        for (p, k) in [(2, 2), (3, 2), (4, 2), (5, 2)] {
            let hist = closed_form_impact_distribution(&Params::new(p, k).unwrap(), 0).unwrap();
            let want = (p as f64 - 1.0) / p as f64;
            assert!((hist.zero_loss_fraction() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hop_cdf_respects_bounds() {
        let topo = topo(2, 3);
        let cdf = post_recovery_hop_cdf(&topo, 8).unwrap();
        assert_eq!(cdf.counts.values().sum::<usize>(), 23);
        assert!(cdf.max_hop() <= 8); // 3k - 1
        assert!(cdf.unchanged_fraction > 0.0 && cdf.unchanged_fraction <= 1.0);
        // Sources that do not relay through the failed ToR keep 2k - 1,
        // and they are a (p-1)/p majority.
        assert!(cdf.unchanged_fraction >= 0.5);
    }

    #[test]
    fn degradation_zero_when_nothing_shares() {
        // A single active source never shares a link, so recovery costs it
        // nothing.
        let report = throughput_degradation(&topo(3, 2), 0.056, 16, 7).unwrap();
        assert_eq!(report.sources_per_sample, 1);
        assert!(report.mean_degradation.abs() < 1e-12);
    }

    #[test]
    fn degradation_is_bounded_and_reproducible() {
        let topo = topo(3, 2);
        let a = throughput_degradation(&topo, 1.0, 8, 42).unwrap();
        let b = throughput_degradation(&topo, 1.0, 8, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_degradation >= 0.0);
        assert!(a.mean_degradation <= 1.0 / topo.p() as f64 + 1e-12);
    }

    #[test]
    fn degradation_rejects_bad_arguments() {
        let topo = topo(2, 2);
        assert!(throughput_degradation(&topo, 0.0, 10, 1).is_err());
        assert!(throughput_degradation(&topo, 1.5, 10, 1).is_err());
        assert!(throughput_degradation(&topo, 0.5, 0, 1).is_err());
        assert!(matches!(
            throughput_degradation(&topo, 0.01, 10, 1),
            Err(Error::NoActiveSources(_))
        ));
    }

    #[test]
    fn impact_csv_shape() {
        let hist = failure_impact_distribution(&topo(2, 2), 0).unwrap();
        let mut buf = Vec::new();
        hist.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("loss,count\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
