//! Control plane: static ToR-to-ToR relaying tables, application-directed
//! ToR-to-server group membership, and single-relay failure recovery.
//!
//! Relaying state is kept as one bit per `(source, owner)` pair, stored
//! source-major so that a reachability walk for one source touches a
//! single contiguous bit row. A ToR relays a source's packets iff the
//! corresponding bit is active; receipt on in-edges is unconditional.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::routing::multicast_tree;
use crate::topology::Topology;

/// Rule tables above this many ToRs would need more than ~100 MB of bits.
pub const RULE_TABLE_CAP: usize = 20_000;

#[derive(Debug, Clone, PartialEq, Eq)]
struct BitGrid {
    n: usize,
    words_per_row: usize,
    bits: Vec<u64>,
}

impl BitGrid {
    fn new(n: usize) -> Self {
        let words_per_row = n.div_ceil(64);
        BitGrid {
            n,
            words_per_row,
            bits: vec![0; words_per_row * n],
        }
    }

    #[inline]
    fn get(&self, row: usize, col: usize) -> bool {
        let w = self.bits[row * self.words_per_row + col / 64];
        (w >> (col % 64)) & 1 == 1
    }

    #[inline]
    fn set(&mut self, row: usize, col: usize) {
        self.bits[row * self.words_per_row + col / 64] |= 1 << (col % 64);
    }

    #[inline]
    fn clear(&mut self, row: usize, col: usize) {
        self.bits[row * self.words_per_row + col / 64] &= !(1 << (col % 64));
    }

    #[inline]
    fn row(&self, row: usize) -> &[u64] {
        &self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    fn row_mut(&mut self, row: usize) -> &mut [u64] {
        &mut self.bits[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    fn ones_in_row(&self, row: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(row).iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    None
                } else {
                    let b = w.trailing_zeros() as usize;
                    w &= w - 1;
                    Some(wi * 64 + b)
                }
            })
        })
    }
}

/// Static relaying state: `installed` never shrinks, `active` flips under
/// failure recovery. Rows are sources, columns are owning ToRs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTables {
    n: usize,
    installed: BitGrid,
    active: BitGrid,
}

impl RuleTables {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether `owner` currently relays packets sourced by `source`.
    #[inline]
    pub fn is_active(&self, owner: usize, source: usize) -> bool {
        self.active.get(source, owner)
    }

    pub fn is_installed(&self, owner: usize, source: usize) -> bool {
        self.installed.get(source, owner)
    }

    /// Owners holding an active rule for `source`, ascending.
    pub fn active_owners_for(&self, source: usize) -> Vec<usize> {
        self.active.ones_in_row(source).collect()
    }

    pub(crate) fn active_row(&self, source: usize) -> &[u64] {
        self.active.row(source)
    }

    /// Active rules held by one owner.
    pub fn active_rule_count(&self, owner: usize) -> usize {
        (0..self.n).filter(|&s| self.active.get(s, owner)).count()
    }

    pub fn total_active_rules(&self) -> usize {
        self.active
            .bits
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    /// CSV rows `owner,source,active` for every installed rule.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "owner,source,active")?;
        for owner in 0..self.n {
            for source in 0..self.n {
                if self.installed.get(source, owner) {
                    let active = if self.active.get(source, owner) { 1 } else { 0 };
                    writeln!(w, "{owner},{source},{active}")?;
                }
            }
        }
        Ok(())
    }
}

/// Compiles the static rule tables: for every source, each relay of its
/// one-to-all tree receives one active rule. Every ToR ends up owning
/// exactly `k * p^(k-1)` rules.
pub fn generate_static_rules(topo: &Topology) -> Result<RuleTables> {
    let n = topo.n();
    if n > RULE_TABLE_CAP {
        return Err(Error::RuleTableTooLarge {
            n,
            cap: RULE_TABLE_CAP,
        });
    }
    let mut tables = RuleTables {
        n,
        installed: BitGrid::new(n),
        active: BitGrid::new(n),
    };

    let words = tables.installed.words_per_row;
    let rows: Vec<Vec<u64>> = (0..n)
        .into_par_iter()
        .map(|source| {
            let tree = multicast_tree(topo, source).expect("source in range");
            let mut row = vec![0u64; words];
            for &relay in tree.relays() {
                let relay = relay as usize;
                row[relay / 64] |= 1 << (relay % 64);
            }
            row
        })
        .collect();
    for (source, row) in rows.into_iter().enumerate() {
        tables.installed.row_mut(source).copy_from_slice(&row);
        tables.active.row_mut(source).copy_from_slice(&row);
    }
    Ok(tables)
}

/// Server-port membership of one multicast group, keyed by ToR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupMembership {
    pub group: String,
    pub members: BTreeMap<usize, BTreeSet<usize>>,
}

impl GroupMembership {
    /// Total subscribed server ports.
    pub fn port_count(&self) -> usize {
        self.members.values().map(|ports| ports.len()).sum()
    }
}

/// One relaying rule, identified by the switch that holds it and the
/// multicast source it matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleRef {
    pub owner: usize,
    pub source: usize,
}

/// The rule moves performed by single-relay failure recovery. Deactivation
/// and activation never name the same `(owner, source)` pair, and at most
/// four owners are touched regardless of network size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleDelta {
    pub deactivate: Vec<RuleRef>,
    pub activate: Vec<RuleRef>,
}

impl RuleDelta {
    pub fn owners(&self) -> BTreeSet<usize> {
        self.deactivate
            .iter()
            .chain(&self.activate)
            .map(|r| r.owner)
            .collect()
    }

    pub fn sources(&self) -> BTreeSet<usize> {
        self.deactivate
            .iter()
            .chain(&self.activate)
            .map(|r| r.source)
            .collect()
    }
}

/// The four ToRs named by the recovery computation for a failed relay,
/// plus the sources whose relaying moves off the precedent relay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryCast {
    pub failed: usize,
    pub mirror_failed: usize,
    pub precedent_relay: usize,
    pub mirror_precedent: usize,
    /// n_1 .. n_(k-1): column (c - i) mod k, row circularly right-shifted
    /// by i digits.
    pub moved_sources: Vec<usize>,
}

/// Runs the digit computation of the recovery procedure without touching
/// any state.
pub fn recovery_cast(topo: &Topology, failed: usize) -> Result<RecoveryCast> {
    if failed >= topo.n() {
        return Err(Error::IndexOutOfRange {
            index: failed,
            n: topo.n(),
        });
    }
    let k = topo.k();
    let p = topo.p();
    let c = topo.column_of(failed);
    let row = topo.row_of(failed);
    let msd = row / topo.pow(k - 1);
    let lsd = row % p;

    // Mirror: identical row except the most significant digit.
    let y = (msd + 1) % p;
    let mirror_failed = topo.index_of(c, y * topo.pow(k - 1) + row % topo.pow(k - 1));

    // Precedent: the in-neighbor of the mirror whose appended digit is the
    // failed row's least significant digit.
    let rot1 = |r: usize| (r % p) * topo.pow(k - 1) + r / p;
    let prev_col = (c + k - 1) % k;
    let precedent_row = rot1(topo.row_of(mirror_failed));
    let precedent_relay = topo.index_of(prev_col, precedent_row);

    let y_prime = (lsd + 1) % p;
    let mirror_precedent = topo.index_of(
        prev_col,
        y_prime * topo.pow(k - 1) + precedent_row % topo.pow(k - 1),
    );

    let mut moved_sources = Vec::with_capacity(k - 1);
    for i in 1..k {
        let col = (c + k - i) % k;
        // circular right shift by i digits
        let shifted = (row % topo.pow(i)) * topo.pow(k - i) + row / topo.pow(i);
        moved_sources.push(topo.index_of(col, shifted));
    }

    Ok(RecoveryCast {
        failed,
        mirror_failed,
        precedent_relay,
        mirror_precedent,
        moved_sources,
    })
}

#[derive(Debug, Clone)]
struct FailureRecord {
    relay: usize,
    delta: Option<RuleDelta>,
}

/// Reusable buffers for reachability walks.
#[derive(Debug, Default)]
pub struct ReachScratch {
    stamp: u32,
    visited: Vec<u32>,
    queue: Vec<u32>,
    depth: Vec<u8>,
}

impl ReachScratch {
    fn begin(&mut self, n: usize) {
        if self.visited.len() != n {
            self.visited = vec![0; n];
            self.stamp = 0;
        }
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.visited.fill(0);
            self.stamp = 1;
        }
        self.queue.clear();
        self.depth.clear();
    }
}

/// Result of one reachability walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReachStats {
    pub reached: usize,
    pub max_hop: usize,
}

/// The mutable network: a topology, its rule tables, group memberships and
/// at most one failed relay. Mutation goes through `&mut self`, reads
/// through `&self`, so the single-writer/multi-reader contract is enforced
/// by the borrow checker.
#[derive(Debug, Clone)]
pub struct NetworkState {
    topology: Topology,
    tables: RuleTables,
    groups: BTreeMap<String, GroupMembership>,
    failure: Option<FailureRecord>,
}

impl NetworkState {
    pub fn new(topology: Topology) -> Result<Self> {
        let tables = generate_static_rules(&topology)?;
        Ok(NetworkState {
            topology,
            tables,
            groups: BTreeMap::new(),
            failure: None,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn rule_tables(&self) -> &RuleTables {
        &self.tables
    }

    pub fn failed_relay(&self) -> Option<usize> {
        self.failure.as_ref().map(|f| f.relay)
    }

    /// `Some(true)` when the recorded failure was recovered, `Some(false)`
    /// when it was injected without recovery, `None` when healthy.
    pub fn failure_recovered(&self) -> Option<bool> {
        self.failure.as_ref().map(|f| f.delta.is_some())
    }

    pub fn groups(&self) -> &BTreeMap<String, GroupMembership> {
        &self.groups
    }

    pub fn group(&self, name: &str) -> Result<&GroupMembership> {
        self.groups
            .get(name)
            .ok_or_else(|| Error::UnknownGroup(name.to_string()))
    }

    /// Records per-ToR server fanout for a group. Re-applying the same
    /// membership is a no-op; ToR-to-ToR rules are never touched.
    pub fn apply_group_membership(&mut self, membership: GroupMembership) -> Result<()> {
        if membership.members.is_empty() {
            return Err(Error::EmptyGroup(membership.group));
        }
        for (&tor, ports) in &membership.members {
            if tor >= self.topology.n() {
                return Err(Error::IndexOutOfRange {
                    index: tor,
                    n: self.topology.n(),
                });
            }
            if ports.is_empty() {
                return Err(Error::EmptyGroup(membership.group));
            }
        }
        self.groups.insert(membership.group.clone(), membership);
        Ok(())
    }

    /// Marks a relay failed without rerouting, for impact analysis.
    pub fn fail_without_recovery(&mut self, failed: usize) -> Result<()> {
        if self.failure.is_some() {
            return Err(Error::FailureAlreadyRecorded);
        }
        if failed >= self.topology.n() {
            return Err(Error::IndexOutOfRange {
                index: failed,
                n: self.topology.n(),
            });
        }
        self.failure = Some(FailureRecord {
            relay: failed,
            delta: None,
        });
        Ok(())
    }

    /// Single-relay failure recovery: deactivates every rule on the failed
    /// relay and rehomes it to the mirrored relay, then moves the relaying
    /// of the circularly shifted sources from the precedent relay to its
    /// mirror. Returns the applied delta.
    pub fn recover_single_failure(&mut self, failed: usize) -> Result<RuleDelta> {
        if self.failure.is_some() {
            return Err(Error::FailureAlreadyRecorded);
        }
        let cast = recovery_cast(&self.topology, failed)?;

        // Every source the failed relay serves; the moved sources are a
        // subset of these.
        let failed_sources: Vec<usize> = (0..self.topology.n())
            .filter(|&s| self.tables.is_active(failed, s))
            .collect();

        let mut deactivate = Vec::with_capacity(failed_sources.len() + cast.moved_sources.len());
        let mut activate = Vec::with_capacity(deactivate.capacity());
        for &s in &failed_sources {
            deactivate.push(RuleRef {
                owner: failed,
                source: s,
            });
            activate.push(RuleRef {
                owner: cast.mirror_failed,
                source: s,
            });
        }
        for &s in &cast.moved_sources {
            deactivate.push(RuleRef {
                owner: cast.precedent_relay,
                source: s,
            });
            activate.push(RuleRef {
                owner: cast.mirror_precedent,
                source: s,
            });
        }
        let delta = RuleDelta {
            deactivate,
            activate,
        };

        self.apply_delta(&delta)?;
        self.failure = Some(FailureRecord {
            relay: failed,
            delta: Some(delta.clone()),
        });
        Ok(delta)
    }

    /// Applies a delta, insisting that every deactivated rule is currently
    /// active and every activated rule is not. Re-applying a delta
    /// therefore fails without modifying anything.
    pub fn apply_delta(&mut self, delta: &RuleDelta) -> Result<()> {
        for r in delta.deactivate.iter().chain(&delta.activate) {
            if r.owner >= self.tables.n || r.source >= self.tables.n {
                return Err(Error::IndexOutOfRange {
                    index: r.owner.max(r.source),
                    n: self.tables.n,
                });
            }
        }
        let ok = delta
            .deactivate
            .iter()
            .all(|r| self.tables.active.get(r.source, r.owner))
            && delta
                .activate
                .iter()
                .all(|r| !self.tables.active.get(r.source, r.owner));
        if !ok {
            return Err(Error::StaleRuleDelta);
        }
        for r in &delta.deactivate {
            self.tables.active.clear(r.source, r.owner);
        }
        for r in &delta.activate {
            self.tables.active.set(r.source, r.owner);
            self.tables.installed.set(r.source, r.owner);
        }
        Ok(())
    }

    /// Reverts the recorded failure (and its delta, if recovery ran),
    /// restoring the healthy tables.
    pub fn clear_failure(&mut self) -> Result<()> {
        let record = self.failure.take().ok_or(Error::NoFailureRecorded)?;
        if let Some(delta) = record.delta {
            for r in &delta.activate {
                debug_assert!(self.tables.active.get(r.source, r.owner));
                self.tables.active.clear(r.source, r.owner);
                self.tables.installed.clear(r.source, r.owner);
            }
            for r in &delta.deactivate {
                debug_assert!(!self.tables.active.get(r.source, r.owner));
                self.tables.active.set(r.source, r.owner);
            }
        }
        Ok(())
    }

    /// ToRs currently relaying `source`'s packets, ascending.
    pub fn active_relays_for(&self, source: usize) -> Vec<usize> {
        self.tables.active_owners_for(source)
    }

    /// ToRs that actually forward `source`'s packets: holders of an active
    /// rule that also receive the packets. In a healthy or recovered
    /// fabric this equals [`NetworkState::active_relays_for`]; under an
    /// unrecovered failure relays cut off from the source drop out.
    pub fn transmitting_relays_for(&self, source: usize) -> Result<Vec<usize>> {
        let reached = self.reachable_set(source)?;
        let failed = self.failed_relay();
        Ok(reached
            .into_iter()
            .filter(|&v| Some(v) != failed && self.tables.is_active(v, source))
            .collect())
    }

    /// Reachable-set walk from `source` over active rules and splitter
    /// adjacency: a ToR receives on its in-edges unconditionally and
    /// forwards onward iff it is not failed and holds an active rule for
    /// the source.
    pub fn reachable_set(&self, source: usize) -> Result<Vec<usize>> {
        let mut scratch = ReachScratch::default();
        let mut out = Vec::new();
        self.walk(source, &mut scratch, Some(&mut out))?;
        out.sort_unstable();
        Ok(out)
    }

    /// Reached count and maximum hop depth of the walk from `source`.
    pub fn reachable_stats(&self, source: usize, scratch: &mut ReachScratch) -> Result<ReachStats> {
        self.walk(source, scratch, None)
    }

    fn walk(
        &self,
        source: usize,
        scratch: &mut ReachScratch,
        mut collect: Option<&mut Vec<usize>>,
    ) -> Result<ReachStats> {
        let topo = &self.topology;
        let n = topo.n();
        if source >= n {
            return Err(Error::IndexOutOfRange { index: source, n });
        }
        let failed = self.failure.as_ref().map(|f| f.relay);
        if let Some(ref mut out) = collect {
            out.push(source);
        }
        if failed == Some(source) {
            // The failed ToR's hosts cannot inject into its splitter.
            return Ok(ReachStats {
                reached: 1,
                max_hop: 0,
            });
        }

        scratch.begin(n);
        let stamp = scratch.stamp;
        scratch.visited[source] = stamp;
        scratch.queue.push(source as u32);
        scratch.depth.push(0);

        let row = self.tables.active_row(source);
        let p = topo.p();
        let mut reached = 1usize;
        let mut max_hop = 0usize;
        let mut head = 0usize;
        while head < scratch.queue.len() {
            let v = scratch.queue[head] as usize;
            let d = scratch.depth[head];
            head += 1;
            if failed == Some(v) || (row[v / 64] >> (v % 64)) & 1 == 0 {
                continue;
            }
            let base = topo.neighbor_base(v);
            for w in base..base + p {
                if scratch.visited[w] != stamp {
                    scratch.visited[w] = stamp;
                    scratch.queue.push(w as u32);
                    scratch.depth.push(d + 1);
                    reached += 1;
                    max_hop = max_hop.max(d as usize + 1);
                    if let Some(ref mut out) = collect {
                        out.push(w);
                    }
                }
            }
        }
        Ok(ReachStats { reached, max_hop })
    }
}
