//! Shared helpers for the integration suites: independent oracles (raw
//! adjacency BFS, bottleneck-ordering fair share), instance enumeration
//! and the digit-shift/column-rotation symmetry of the fabric.

#![allow(dead_code)]

use shufflecast::control::NetworkState;
use shufflecast::flowsim::{FlowGroup, FlowSpec};
use shufflecast::topology::{Params, Topology};

/// All (p, k) with `k * p^k <= bound`, smallest first.
pub fn instances_up_to(bound: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut k = 2usize;
    while (k as u128) * (1u128 << k) <= bound as u128 {
        let mut p = 2usize;
        while Params::with_node_cap(p, k, bound).is_ok() {
            out.push((p, k));
            p += 1;
        }
        k += 1;
    }
    out.sort_by_key(|&(p, k)| Params::new(p, k).unwrap().n());
    out
}

/// Breadth-first search over the raw splitter adjacency, ignoring all
/// relaying rules: reachable node count and eccentricity from `src`.
pub fn raw_bfs(topo: &Topology, src: usize) -> (usize, usize) {
    let n = topo.n();
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    dist[src] = 0;
    queue.push_back(src);
    let mut reached = 1;
    let mut ecc = 0;
    while let Some(v) = queue.pop_front() {
        for w in topo.neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                ecc = ecc.max(dist[w]);
                reached += 1;
                queue.push_back(w);
            }
        }
    }
    (reached, ecc)
}

/// Max-min allocation by bottleneck ordering, an independent route to the
/// same answer as progressive filling: repeatedly find the resource with
/// the smallest fair share among its unassigned flows, pin those flows to
/// that share, and subtract.
pub fn bottleneck_ordering_rates(
    flows: &[FlowSpec],
    line_rate: f64,
    state: &NetworkState,
) -> Vec<f64> {
    #[derive(PartialEq, Eq, PartialOrd, Ord, Clone, Copy, Debug)]
    enum Key {
        Tx(usize),
        Server(usize, usize),
    }

    let mut members: std::collections::BTreeMap<Key, Vec<usize>> =
        std::collections::BTreeMap::new();
    for (fi, flow) in flows.iter().enumerate() {
        for tor in state.active_relays_for(flow.tor) {
            members.entry(Key::Tx(tor)).or_default().push(fi);
        }
        if let FlowGroup::Named(name) = &flow.group {
            let g = state.group(name).expect("group exists");
            for (&tor, ports) in &g.members {
                for &port in ports {
                    members.entry(Key::Server(tor, port)).or_default().push(fi);
                }
            }
        }
    }

    let mut rates: Vec<Option<f64>> = vec![None; flows.len()];
    loop {
        // Fair share offered by each resource to its unassigned flows.
        let mut best: Option<(f64, Key)> = None;
        for (&key, flow_ids) in &members {
            let assigned: f64 = flow_ids.iter().filter_map(|&fi| rates[fi]).sum();
            let unassigned = flow_ids.iter().filter(|&&fi| rates[fi].is_none()).count();
            if unassigned == 0 {
                continue;
            }
            let share = (line_rate - assigned) / unassigned as f64;
            if best.is_none_or(|(s, _)| share < s) {
                best = Some((share, key));
            }
        }
        let Some((share, key)) = best else { break };
        for &fi in &members[&key] {
            if rates[fi].is_none() {
                rates[fi] = Some(share);
            }
        }
    }
    rates
        .into_iter()
        .map(|r| r.expect("every flow is constrained"))
        .collect()
}

/// Recomputes per-resource loads from assigned rates and checks no
/// capacity is exceeded beyond tolerance; returns the largest load.
pub fn max_resource_load(flows: &[FlowSpec], rates: &[f64], state: &NetworkState) -> f64 {
    let mut load: std::collections::BTreeMap<(u8, usize, usize), f64> =
        std::collections::BTreeMap::new();
    for (fi, flow) in flows.iter().enumerate() {
        for tor in state.active_relays_for(flow.tor) {
            *load.entry((0, tor, 0)).or_default() += rates[fi];
        }
        if let FlowGroup::Named(name) = &flow.group {
            let g = state.group(name).expect("group exists");
            for (&tor, ports) in &g.members {
                for &port in ports {
                    *load.entry((1, tor, port)).or_default() += rates[fi];
                }
            }
        }
    }
    load.values().fold(0.0f64, |acc, &v| acc.max(v))
}

/// Tiny deterministic generator for test-side sampling.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, bound: usize) -> usize {
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }
}

/// The fabric automorphism that adds `j` to every row digit (mod p) and
/// rotates columns by `t`. Maps edges to edges and commutes with routing
/// and recovery, which the suites spot-check before relying on it.
pub fn automorphism(topo: &Topology, i: usize, j: usize, t: usize) -> usize {
    let p = topo.p();
    let k = topo.k();
    let rows = topo.rows();
    let col = (i / rows + t) % k;
    let mut row = i % rows;
    let mut shifted = 0usize;
    let mut weight = 1usize;
    for _ in 0..k {
        shifted += ((row % p + j) % p) * weight;
        row /= p;
        weight *= p;
    }
    col * rows + shifted
}

pub fn one_to_all_flows(sources: &[usize]) -> Vec<FlowSpec> {
    sources
        .iter()
        .map(|&s| FlowSpec::one_to_all(format!("s{s}"), s, 0))
        .collect()
}
