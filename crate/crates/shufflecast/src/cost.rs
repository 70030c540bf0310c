//! Power and capital cost models: splitter insertion loss, active port
//! counting per one-to-all multicast tree, the minimal-layer
//! packet-switched core used as the IP-multicast baseline, and the
//! catalog-driven dollar figures.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::Params;

/// Splitter insertion loss in dB, `0.8 + 3.4 * log2(fanout)`.
pub fn insertion_loss_db(fanout: usize) -> Result<f64> {
    if fanout < 1 {
        return Err(Error::InvalidFanout(fanout));
    }
    Ok(0.8 + 3.4 * (fanout as f64).log2())
}

/// A minimal-layer packet-switched core over `n` ToR uplinks built from
/// switches of radix `r`: the extra electronics an IP-multicast baseline
/// needs on top of the ToRs themselves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreBuild {
    pub n: usize,
    pub radix: usize,
    /// Aggregation-switch counts per layer, bottom up (the root is the
    /// last entry).
    pub switches_per_layer: Vec<usize>,
    /// Used switch ports on the aggregation layers; excludes the ToR
    /// uplink ports themselves.
    pub extra_used_ports: usize,
    /// extra_used_ports / n.
    pub excess_ratio: f64,
    /// Distinct links inside the core, ToR uplinks included.
    pub core_links: usize,
}

/// Greedy layered construction: each non-root aggregation switch spends up
/// to `radix - 1` ports on down-links plus one up-link; layers recurse
/// until at most `radix` up-links remain and a root switch absorbs them.
/// Only used ports are counted.
pub fn build_minimal_layer_core(n: usize, radix: usize) -> Result<CoreBuild> {
    if n < 2 {
        return Err(Error::InvalidParams(format!(
            "core needs at least 2 ToRs, got {n}"
        )));
    }
    if radix < 2 {
        return Err(Error::InvalidParams(format!(
            "switch radix must be at least 2, got {radix}"
        )));
    }
    let mut switches_per_layer = Vec::new();
    let mut extra_used_ports = 0usize;
    let mut uplinks = n;
    while uplinks > radix {
        let switches = uplinks.div_ceil(radix - 1);
        extra_used_ports += uplinks + switches;
        switches_per_layer.push(switches);
        uplinks = switches;
    }
    extra_used_ports += uplinks; // root switch, no up-link
    switches_per_layer.push(1);

    // Every link consumes one port on each endpoint; the ToR-side uplink
    // ports are not part of the extra count, hence the +n.
    let core_links = (extra_used_ports + n) / 2;
    debug_assert_eq!((extra_used_ports + n) % 2, 0);

    Ok(CoreBuild {
        n,
        radix,
        switches_per_layer,
        extra_used_ports,
        excess_ratio: extra_used_ports as f64 / n as f64,
        core_links,
    })
}

/// The three architectures compared for one cluster-wide multicast tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchTag {
    Shufflecast,
    P2pChain,
    IpMulticast,
}

impl ArchTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ArchTag::Shufflecast => "shufflecast",
            ArchTag::P2pChain => "p2p_chain",
            ArchTag::IpMulticast => "ip_multicast",
        }
    }
}

/// What to count ports for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchSpec {
    /// A p,k fabric: relays burn a receive and a transmit port, every
    /// other ToR just receives.
    Shufflecast(Params),
    /// Peer-to-peer overlay at its cheapest: a chain through all ToRs,
    /// two ports each.
    P2pChain { n: usize },
    /// IP-multicast over a minimal-layer core: one uplink port per ToR
    /// plus the core's extra ports.
    IpMulticast { n: usize, radix: usize },
}

/// Active switch ports (and transceivers, which track ports one-to-one)
/// involved in one one-to-all multicast tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortCount {
    pub architecture: ArchTag,
    pub switch_ports: usize,
    pub transceivers: usize,
}

pub fn count_ports(spec: &ArchSpec) -> Result<PortCount> {
    let (architecture, switch_ports) = match *spec {
        ArchSpec::Shufflecast(params) => {
            let relays = params.relays_per_source();
            (ArchTag::Shufflecast, relays * 2 + (params.n() - relays))
        }
        ArchSpec::P2pChain { n } => {
            if n < 2 {
                return Err(Error::InvalidParams(format!(
                    "chain needs at least 2 ToRs, got {n}"
                )));
            }
            (ArchTag::P2pChain, 2 * n)
        }
        ArchSpec::IpMulticast { n, radix } => {
            let core = build_minimal_layer_core(n, radix)?;
            (ArchTag::IpMulticast, n + core.extra_used_ports)
        }
    };
    Ok(PortCount {
        architecture,
        switch_ports,
        transceivers: switch_ports,
    })
}

/// Per-rate power and cost of one switch port and one transceiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateCosts {
    pub port_w: f64,
    pub xcvr_w: f64,
    pub port_usd: f64,
    pub xcvr_usd: f64,
}

/// User-supplied component catalog. Splitter prices are keyed by fanout;
/// fiber cost is rate-independent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentCatalog {
    pub rates: BTreeMap<String, RateCosts>,
    pub splitter_usd: BTreeMap<String, f64>,
    pub fiber_usd_per_100m: f64,
}

impl ComponentCatalog {
    pub fn from_json(json: &str) -> Result<Self> {
        let catalog: ComponentCatalog = serde_json::from_str(json)?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::InvalidCatalog(format!(
                "{what} must be non-negative"
            )))
        };
        for (rate, c) in &self.rates {
            if c.port_w < 0.0 || c.xcvr_w < 0.0 || c.port_usd < 0.0 || c.xcvr_usd < 0.0 {
                return bad(&format!("rate {rate:?} entries"));
            }
        }
        for (fanout, usd) in &self.splitter_usd {
            if *usd < 0.0 {
                return bad(&format!("splitter {fanout:?} price"));
            }
        }
        if self.fiber_usd_per_100m < 0.0 {
            return bad("fiber price");
        }
        Ok(())
    }

    pub fn rate(&self, label: &str) -> Result<&RateCosts> {
        self.rates
            .get(label)
            .ok_or_else(|| Error::UnknownRate(label.to_string()))
    }

    pub fn splitter(&self, fanout: usize) -> Result<f64> {
        self.splitter_usd
            .get(&fanout.to_string())
            .copied()
            .ok_or(Error::UnknownSplitterFanout(fanout))
    }

    pub fn fiber_run_usd(&self, length_m: f64) -> f64 {
        self.fiber_usd_per_100m * length_m / 100.0
    }
}

/// Watts drawn by one multicast tree: every active port plus its
/// transceiver.
pub fn power_per_tree(catalog: &ComponentCatalog, rate: &str, ports: &PortCount) -> Result<f64> {
    let costs = catalog.rate(rate)?;
    Ok(ports.switch_ports as f64 * costs.port_w + ports.transceivers as f64 * costs.xcvr_w)
}

/// Power-efficiency factor of `subject` over `baseline`. Port and
/// transceiver wattage cancel, so this is the plain port-count ratio.
pub fn power_improvement(subject: &PortCount, baseline: &PortCount) -> f64 {
    baseline.switch_ports as f64 / subject.switch_ports as f64
}

/// Capital comparison of one one-to-all tree on a p,k fabric against
/// IP-multicast over a minimal-layer core of the same ToR count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapitalCost {
    pub rate: String,
    pub fiber_length_m: f64,
    /// Components active in one tree: ports, transceivers, the relays'
    /// splitters and their outgoing fiber runs.
    pub shufflecast_tree_usd: f64,
    /// Full per-ToR deployment: one splitter, p transceivers, p ports and
    /// p outgoing fiber runs charged to the owning ToR.
    pub shufflecast_per_tor_usd: f64,
    /// Core ports and transceivers plus one fiber run per core link.
    pub ip_multicast_tree_usd: f64,
    /// ip_multicast_tree_usd / shufflecast_tree_usd.
    pub improvement: f64,
    pub shufflecast_ports: usize,
    pub ip_multicast_ports: usize,
}

pub fn capital_cost(
    catalog: &ComponentCatalog,
    rate: &str,
    params: &Params,
    radix: usize,
    fiber_length_m: f64,
) -> Result<CapitalCost> {
    if fiber_length_m.is_nan() || fiber_length_m < 0.0 {
        return Err(Error::InvalidParams(format!(
            "fiber length must be non-negative, got {fiber_length_m}"
        )));
    }
    let costs = catalog.rate(rate)?;
    let splitter = catalog.splitter(params.p())?;
    let fiber_run = catalog.fiber_run_usd(fiber_length_m);
    let port_and_xcvr = costs.port_usd + costs.xcvr_usd;

    let sc_ports = count_ports(&ArchSpec::Shufflecast(*params))?;
    let relays = params.relays_per_source();
    // Each transmitting relay charges its splitter and its p outgoing
    // fiber runs; that covers every receive lane of the tree exactly once.
    let shufflecast_tree_usd = sc_ports.switch_ports as f64 * port_and_xcvr
        + relays as f64 * splitter
        + (relays * params.p()) as f64 * fiber_run;

    let shufflecast_per_tor_usd = splitter
        + params.p() as f64 * (costs.port_usd + costs.xcvr_usd)
        + params.p() as f64 * fiber_run;

    let core = build_minimal_layer_core(params.n(), radix)?;
    let ip_ports = count_ports(&ArchSpec::IpMulticast {
        n: params.n(),
        radix,
    })?;
    let ip_multicast_tree_usd =
        ip_ports.switch_ports as f64 * port_and_xcvr + core.core_links as f64 * fiber_run;

    Ok(CapitalCost {
        rate: rate.to_string(),
        fiber_length_m,
        shufflecast_tree_usd,
        shufflecast_per_tor_usd,
        ip_multicast_tree_usd,
        improvement: ip_multicast_tree_usd / shufflecast_tree_usd,
        shufflecast_ports: sc_ports.switch_ports,
        ip_multicast_ports: ip_ports.switch_ports,
    })
}

/// One row of the cost report CSV, `architecture,N,rate,ports,watts,usd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub architecture: String,
    pub n: usize,
    pub rate: String,
    pub ports: usize,
    pub watts: Option<f64>,
    pub usd: Option<f64>,
}

pub fn write_cost_csv<W: std::io::Write>(w: &mut W, rows: &[CostRow]) -> Result<()> {
    writeln!(w, "architecture,N,rate,ports,watts,usd")?;
    for row in rows {
        let watts = row.watts.map(|v| v.to_string()).unwrap_or_default();
        let usd = row.usd.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{}",
            row.architecture, row.n, row.rate, row.ports, watts, usd
        )?;
    }
    Ok(())
}
