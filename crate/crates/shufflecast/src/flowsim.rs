//! Flow-level simulator for concurrent multicast groups: max-min fair
//! rates by progressive filling, plus an event-driven run loop for
//! staggered flows with volumes.
//!
//! The fluid model charges a multicast flow once per directed link of its
//! ToR-level tree. The only shared transmit resource is each relay's
//! single fiber into its own splitter, so transmit links (and, when a
//! group names server ports, the per-server downlinks) are the binding
//! resources. Every receive lane carries exactly the flows of the
//! transmit link feeding it at the same capacity, so lanes can never bind
//! first and are not enumerated separately.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::NetworkState;
use crate::error::{Error, Result};

/// Relative saturation tolerance of the progressive-filling loop. Rates
/// at desk scale are exact rationals; the tolerance only guards float
/// accumulation.
pub const FAIR_SHARE_EPS: f64 = 1e-9;

/// Link capacities. Every transmit link, receive lane and subscribed
/// server downlink runs at the same line rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityModel {
    pub line_rate_bps: f64,
}

impl CapacityModel {
    pub fn new(line_rate_bps: f64) -> Result<Self> {
        if !line_rate_bps.is_finite() || line_rate_bps <= 0.0 {
            return Err(Error::InvalidCapacity(format!(
                "line rate must be positive and finite, got {line_rate_bps}"
            )));
        }
        Ok(CapacityModel { line_rate_bps })
    }
}

/// Destination set of a flow: the whole fabric or a named group applied
/// to the network state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum FlowGroup {
    All,
    Named(String),
}

impl From<String> for FlowGroup {
    fn from(s: String) -> Self {
        if s == "all" {
            FlowGroup::All
        } else {
            FlowGroup::Named(s)
        }
    }
}

impl From<FlowGroup> for String {
    fn from(g: FlowGroup) -> String {
        match g {
            FlowGroup::All => "all".to_string(),
            FlowGroup::Named(name) => name,
        }
    }
}

/// One multicast flow of a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSpec {
    pub id: String,
    /// Source ToR (linear id).
    pub tor: usize,
    /// Source server port under the ToR, when relevant to the caller.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server: Option<usize>,
    #[serde(default = "FlowSpec::default_group")]
    pub group: FlowGroup,
    pub volume_bytes: u64,
    #[serde(default)]
    pub start_time_s: f64,
}

impl FlowSpec {
    fn default_group() -> FlowGroup {
        FlowGroup::All
    }

    /// One-to-all flow starting at time zero.
    pub fn one_to_all(id: impl Into<String>, tor: usize, volume_bytes: u64) -> Self {
        FlowSpec {
            id: id.into(),
            tor,
            server: None,
            group: FlowGroup::All,
            volume_bytes,
            start_time_s: 0.0,
        }
    }

    pub fn volume_bits(&self) -> f64 {
        self.volume_bytes as f64 * 8.0
    }
}

/// How concurrent flows share the fabric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheduling {
    /// Progressive filling to the max-min fair allocation.
    #[default]
    MaxMin,
    /// Arrival-order coordination: a flow takes whatever line rate its
    /// links have left, so overlapping flows take turns instead of
    /// sharing.
    Fcfs,
}

/// The resource that froze a flow's rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BindingResource {
    TransmitLink { tor: usize },
    ServerDownlink { tor: usize, port: usize },
}

/// Fair-share allocation for one set of concurrently active flows.
#[derive(Debug, Clone, PartialEq)]
pub struct FairShareResult {
    /// Per-flow rate, aligned with the input slice.
    pub rates_bps: Vec<f64>,
    /// Per-flow binding resource, aligned with the input slice.
    pub binding: Vec<BindingResource>,
    /// Sum of all flow rates.
    pub aggregate_bps: f64,
    /// Aggregate divided by the line rate.
    pub utilization: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum ResKey {
    Tx(u32),
    Server(u32, u32),
}

impl ResKey {
    fn binding(self) -> BindingResource {
        match self {
            ResKey::Tx(t) => BindingResource::TransmitLink { tor: t as usize },
            ResKey::Server(t, pt) => BindingResource::ServerDownlink {
                tor: t as usize,
                port: pt as usize,
            },
        }
    }
}

struct Resource {
    key: ResKey,
    remaining: f64,
    active: usize,
    members: Vec<u32>,
}

struct LoadedFlows {
    resources: Vec<Resource>,
    /// Per flow, indices into `resources`.
    flow_resources: Vec<Vec<u32>>,
}

/// Resolves every flow to the transmit links of its tree under the
/// current rule state plus the server downlinks of its group.
fn load_flows(
    flows: &[FlowSpec],
    cap: &CapacityModel,
    state: &NetworkState,
) -> Result<LoadedFlows> {
    let n = state.topology().n();
    // Transmit links are dense in the ToR id space; a slot table keeps the
    // per-flow registration loop allocation-light.
    let mut tx_slot: Vec<u32> = vec![u32::MAX; n];
    let mut server_slots: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    let mut resources: Vec<Resource> = Vec::new();
    let mut flow_resources = Vec::with_capacity(flows.len());

    let unrecovered = state.failed_relay().is_some() && state.failure_recovered() == Some(false);

    for (fi, flow) in flows.iter().enumerate() {
        if flow.tor >= n {
            return Err(Error::InvalidFlow {
                id: flow.id.clone(),
                reason: format!("source ToR {} out of range", flow.tor),
            });
        }
        if state.failed_relay() == Some(flow.tor) {
            return Err(Error::SourceIsFailedRelay(flow.id.clone()));
        }

        let relays = if unrecovered {
            // Without recovery parts of the tree may be unreachable; only
            // charge relays that actually receive and forward.
            state.transmitting_relays_for(flow.tor)?
        } else {
            state.active_relays_for(flow.tor)
        };

        let mut mine = Vec::with_capacity(relays.len() + 4);
        for tor in relays {
            let slot = tx_slot[tor];
            let idx = if slot == u32::MAX {
                resources.push(Resource {
                    key: ResKey::Tx(tor as u32),
                    remaining: cap.line_rate_bps,
                    active: 0,
                    members: Vec::new(),
                });
                let idx = (resources.len() - 1) as u32;
                tx_slot[tor] = idx;
                idx
            } else {
                slot
            };
            resources[idx as usize].members.push(fi as u32);
            resources[idx as usize].active += 1;
            mine.push(idx);
        }
        match &flow.group {
            FlowGroup::All => {}
            FlowGroup::Named(name) => {
                let membership = state.group(name)?;
                for (&tor, ports) in &membership.members {
                    for &port in ports {
                        let key = (tor as u32, port as u32);
                        let idx = *server_slots.entry(key).or_insert_with(|| {
                            resources.push(Resource {
                                key: ResKey::Server(key.0, key.1),
                                remaining: cap.line_rate_bps,
                                active: 0,
                                members: Vec::new(),
                            });
                            (resources.len() - 1) as u32
                        });
                        resources[idx as usize].members.push(fi as u32);
                        resources[idx as usize].active += 1;
                        mine.push(idx);
                    }
                }
            }
        }
        debug_assert!(
            !mine.is_empty(),
            "a flow always crosses its own transmit link"
        );
        flow_resources.push(mine);
    }
    Ok(LoadedFlows {
        resources,
        flow_resources,
    })
}

/// Max-min fair rates for a set of concurrently active flows by
/// progressive filling: raise all unfrozen flows uniformly until some
/// resource saturates, freeze the flows bound there, repeat.
pub fn max_min_fair_rates(
    flows: &[FlowSpec],
    cap: &CapacityModel,
    state: &NetworkState,
) -> Result<FairShareResult> {
    let mut loaded = load_flows(flows, cap, state)?;
    let nf = flows.len();
    let mut rates = vec![0.0f64; nf];
    let mut binding: Vec<Option<BindingResource>> = vec![None; nf];
    let mut frozen = vec![false; nf];
    let mut unfrozen = nf;
    let mut fill = 0.0f64;
    let eps_abs = FAIR_SHARE_EPS * cap.line_rate_bps;

    let max_rounds = nf + loaded.resources.len() + 2;
    let mut rounds = 0usize;
    while unfrozen > 0 {
        rounds += 1;
        assert!(
            rounds <= max_rounds,
            "progressive filling failed to converge"
        );

        let mut delta = f64::INFINITY;
        for r in &loaded.resources {
            if r.active > 0 {
                delta = delta.min(r.remaining.max(0.0) / r.active as f64);
            }
        }
        assert!(
            delta.is_finite(),
            "active flows without any constraining resource"
        );

        fill += delta;
        let mut saturated: Vec<usize> = Vec::new();
        for (ri, r) in loaded.resources.iter_mut().enumerate() {
            if r.active == 0 {
                continue;
            }
            r.remaining -= delta * r.active as f64;
            if r.remaining <= eps_abs {
                saturated.push(ri);
            }
        }
        assert!(!saturated.is_empty(), "filling round saturated nothing");

        for ri in saturated {
            let members = std::mem::take(&mut loaded.resources[ri].members);
            let key = loaded.resources[ri].key;
            for &fi in &members {
                let fi = fi as usize;
                if frozen[fi] {
                    continue;
                }
                frozen[fi] = true;
                unfrozen -= 1;
                rates[fi] = fill;
                binding[fi] = Some(key.binding());
                for &other in &loaded.flow_resources[fi] {
                    let res = &mut loaded.resources[other as usize];
                    if res.active > 0 {
                        res.active -= 1;
                    }
                }
            }
            loaded.resources[ri].members = members;
        }
    }

    let aggregate_bps: f64 = rates.iter().sum();
    Ok(FairShareResult {
        rates_bps: rates,
        binding: binding
            .into_iter()
            .map(|b| b.expect("every flow freezes"))
            .collect(),
        aggregate_bps,
        utilization: aggregate_bps / cap.line_rate_bps,
    })
}

/// Arrival-order allocation: flows sorted by start time (then id) each
/// take the largest rate their links still have, so a flow overlapping an
/// earlier line-rate flow waits at rate zero.
pub fn fcfs_rates(
    flows: &[FlowSpec],
    cap: &CapacityModel,
    state: &NetworkState,
) -> Result<FairShareResult> {
    let mut loaded = load_flows(flows, cap, state)?;
    let mut order: Vec<usize> = (0..flows.len()).collect();
    order.sort_by(|&a, &b| {
        flows[a]
            .start_time_s
            .total_cmp(&flows[b].start_time_s)
            .then_with(|| flows[a].id.cmp(&flows[b].id))
    });

    let mut rates = vec![0.0f64; flows.len()];
    let mut binding = Vec::with_capacity(flows.len());
    let mut bindings: Vec<Option<BindingResource>> = vec![None; flows.len()];
    for fi in order {
        let mut rate = f64::INFINITY;
        let mut key = None;
        for &ri in &loaded.flow_resources[fi] {
            let r = &loaded.resources[ri as usize];
            if r.remaining < rate {
                rate = r.remaining;
                key = Some(r.key);
            }
        }
        let rate = rate.max(0.0);
        for &ri in &loaded.flow_resources[fi] {
            loaded.resources[ri as usize].remaining -= rate;
        }
        rates[fi] = rate;
        bindings[fi] = Some(key.expect("every flow crosses a resource").binding());
    }
    binding.extend(bindings.into_iter().map(|b| b.expect("assigned above")));

    let aggregate_bps: f64 = rates.iter().sum();
    Ok(FairShareResult {
        rates_bps: rates,
        binding,
        aggregate_bps,
        utilization: aggregate_bps / cap.line_rate_bps,
    })
}

/// Rates of the currently active flows between two events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEpoch {
    pub start_s: f64,
    pub end_s: f64,
    /// `(flow index into the schedule, rate)` for every active flow.
    pub rates_bps: Vec<(usize, f64)>,
    pub aggregate_bps: f64,
}

/// Completion record of one flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub id: String,
    pub start_s: f64,
    pub completion_s: f64,
    pub mean_rate_bps: f64,
}

/// Full trace of an event-driven run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub flows: Vec<FlowSpec>,
    pub epochs: Vec<SimEpoch>,
    pub summaries: Vec<FlowSummary>,
}

impl SimTrace {
    /// CSV rows `time_s,flow_id,rate_bps`, one per active flow per epoch.
    pub fn write_trace_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "time_s,flow_id,rate_bps")?;
        for epoch in &self.epochs {
            for &(fi, rate) in &epoch.rates_bps {
                writeln!(w, "{},{},{}", epoch.start_s, self.flows[fi].id, rate)?;
            }
        }
        Ok(())
    }

    /// CSV rows `flow_id,start,completion,mean_rate`.
    pub fn write_summary_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "flow_id,start,completion,mean_rate")?;
        for s in &self.summaries {
            writeln!(
                w,
                "{},{},{},{}",
                s.id, s.start_s, s.completion_s, s.mean_rate_bps
            )?;
        }
        Ok(())
    }
}

/// Event-driven execution of a schedule: rates are recomputed at every
/// arrival and completion and stay constant in between; a flow completes
/// once its transferred volume reaches its spec.
pub fn run_flow_simulation(
    schedule: &[FlowSpec],
    cap: &CapacityModel,
    state: &NetworkState,
    mode: Scheduling,
) -> Result<SimTrace> {
    if schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    {
        let mut ids: Vec<&str> = schedule.iter().map(|f| f.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidFlow {
                id: ids.windows(2).find(|w| w[0] == w[1]).unwrap()[0].to_string(),
                reason: "duplicate flow id".to_string(),
            });
        }
    }
    for flow in schedule {
        if flow.start_time_s.is_nan() || flow.start_time_s < 0.0 {
            return Err(Error::InvalidFlow {
                id: flow.id.clone(),
                reason: format!("start time {} must be non-negative", flow.start_time_s),
            });
        }
    }
    // Validate sources and groups up front via a rate computation for each
    // flow alone.
    for flow in schedule {
        let _ = load_flows(std::slice::from_ref(flow), cap, state)?;
    }

    let mut arrivals: Vec<usize> = (0..schedule.len()).collect();
    arrivals.sort_by(|&a, &b| {
        schedule[a]
            .start_time_s
            .total_cmp(&schedule[b].start_time_s)
            .then_with(|| schedule[a].id.cmp(&schedule[b].id))
    });
    let mut next_arrival = 0usize;

    let mut remaining_bits: Vec<f64> = schedule.iter().map(|f| f.volume_bits()).collect();
    let mut active: Vec<usize> = Vec::new();
    let mut epochs: Vec<SimEpoch> = Vec::new();
    let mut summaries: Vec<FlowSummary> = Vec::new();

    let mut t = schedule[arrivals[0]].start_time_s;
    loop {
        // Admit everything that has arrived by now; zero-volume flows
        // complete on the spot.
        while next_arrival < arrivals.len() && schedule[arrivals[next_arrival]].start_time_s <= t {
            let fi = arrivals[next_arrival];
            next_arrival += 1;
            if remaining_bits[fi] <= 0.0 {
                summaries.push(FlowSummary {
                    id: schedule[fi].id.clone(),
                    start_s: schedule[fi].start_time_s,
                    completion_s: schedule[fi].start_time_s,
                    mean_rate_bps: 0.0,
                });
            } else {
                active.push(fi);
            }
        }
        if active.is_empty() {
            if next_arrival >= arrivals.len() {
                break;
            }
            t = schedule[arrivals[next_arrival]].start_time_s;
            continue;
        }
        active.sort_unstable();

        let specs: Vec<FlowSpec> = active.iter().map(|&fi| schedule[fi].clone()).collect();
        let share = match mode {
            Scheduling::MaxMin => max_min_fair_rates(&specs, cap, state)?,
            Scheduling::Fcfs => fcfs_rates(&specs, cap, state)?,
        };

        // Next event: either an arrival or the earliest completion.
        let mut dt_completion = f64::INFINITY;
        for (ai, &fi) in active.iter().enumerate() {
            let rate = share.rates_bps[ai];
            if rate > 0.0 {
                dt_completion = dt_completion.min(remaining_bits[fi] / rate);
            }
        }
        let t_arrival =
            (next_arrival < arrivals.len()).then(|| schedule[arrivals[next_arrival]].start_time_s);
        let t_next = match t_arrival {
            Some(ta) => ta.min(t + dt_completion),
            None => t + dt_completion,
        };
        assert!(
            t_next.is_finite(),
            "simulation stalled: active flows all at rate zero"
        );
        let dt = t_next - t;

        epochs.push(SimEpoch {
            start_s: t,
            end_s: t_next,
            rates_bps: active
                .iter()
                .zip(&share.rates_bps)
                .map(|(&fi, &r)| (fi, r))
                .collect(),
            aggregate_bps: share.aggregate_bps,
        });

        // Advance transfers and collect completions.
        let mut still_active = Vec::with_capacity(active.len());
        for (ai, &fi) in active.iter().enumerate() {
            let rate = share.rates_bps[ai];
            let moved = rate * dt;
            let done = rate > 0.0 && remaining_bits[fi] <= moved * (1.0 + 1e-12);
            if done {
                remaining_bits[fi] = 0.0;
                let duration = t_next - schedule[fi].start_time_s;
                summaries.push(FlowSummary {
                    id: schedule[fi].id.clone(),
                    start_s: schedule[fi].start_time_s,
                    completion_s: t_next,
                    mean_rate_bps: schedule[fi].volume_bits() / duration,
                });
            } else {
                remaining_bits[fi] -= moved;
                still_active.push(fi);
            }
        }
        active = still_active;
        t = t_next;
    }

    summaries.sort_by(|a, b| {
        a.completion_s
            .total_cmp(&b.completion_s)
            .then_with(|| a.id.cmp(&b.id))
    });
    Ok(SimTrace {
        flows: schedule.to_vec(),
        epochs,
        summaries,
    })
}
