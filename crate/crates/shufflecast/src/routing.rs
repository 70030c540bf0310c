//! Multicast-aware static routing: next-hop relay computation, per-source
//! one-to-all trees, relay sets and the partition criteria.
//!
//! The next-hop rule decides whether the destination is reached during the
//! first or the second traversal cycle and appends either a destination or
//! a source row digit to the left-shifted current row. Because prefixes
//! and suffixes of a base-`p` row are plain quotients and remainders, the
//! whole computation is integer arithmetic on linear indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Topology, TorId};

/// One source-to-destination relay path, endpoints included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub src: usize,
    pub dst: usize,
    /// Linear ToR ids from `src` to `dst` inclusive.
    pub hops: Vec<usize>,
}

impl Route {
    pub fn hop_count(&self) -> usize {
        self.hops.len() - 1
    }
}

/// A one-to-all multicast tree rooted at `src`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MulticastTree {
    pub src: usize,
    /// parent[v] for every ToR; `None` exactly for the source.
    parent: Vec<Option<u32>>,
    /// Hop distance from the source.
    depth: Vec<u8>,
    /// ToRs with at least one child, sorted ascending. The source relays
    /// and is always a member.
    relays: Vec<u32>,
    max_depth: usize,
}

impl MulticastTree {
    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v].map(|p| p as usize)
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v] as usize
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn relays(&self) -> &[u32] {
        &self.relays
    }

    pub fn is_relay(&self, v: usize) -> bool {
        self.relays.binary_search(&(v as u32)).is_ok()
    }

    pub fn n(&self) -> usize {
        self.parent.len()
    }

    /// Serializable form: parent entries for every non-source ToR.
    pub fn export(&self) -> TreeExport {
        TreeExport {
            src: self.src,
            parents: (0..self.n())
                .filter(|&v| v != self.src)
                .map(|v| ParentEntry {
                    tor: v,
                    parent: self.parent(v).expect("spanning tree"),
                })
                .collect(),
            relays: self.relays.iter().map(|&r| r as usize).collect(),
            max_depth: self.max_depth,
        }
    }
}

/// JSON form of a multicast tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeExport {
    pub src: usize,
    pub parents: Vec<ParentEntry>,
    pub relays: Vec<usize>,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentEntry {
    pub tor: usize,
    pub parent: usize,
}

/// The partition criteria of a source: the relay partition it uses in each
/// column. Column `(src.column + t) mod k` uses partition `src.digits[t]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionSignature {
    pub src: usize,
    /// Indexed by column.
    by_column: Vec<u32>,
}

impl PartitionSignature {
    pub fn partition_for_column(&self, column: usize) -> u32 {
        self.by_column[column]
    }

    pub fn by_column(&self) -> &[u32] {
        &self.by_column
    }

    /// Whether `v` belongs to the relay partition of its column.
    pub fn matches(&self, topo: &Topology, v: usize) -> bool {
        topo.partition_index(v) as u32 == self.by_column[topo.column_of(v)]
    }
}

/// The column-difference parameters steering the next-hop rule: `to_dest`
/// (X) counts columns from the current ToR forward to the destination and
/// is `k` when the two share a column; `from_src` (X') counts columns
/// from the source forward to the current ToR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnDiff {
    /// In `[1, k]`.
    pub to_dest: usize,
    /// In `[0, k)`.
    pub from_src: usize,
}

/// Column differences for one next-hop decision.
pub fn column_diff(topo: &Topology, src: usize, dst: usize, cur: usize) -> Result<ColumnDiff> {
    for &i in &[src, dst, cur] {
        if i >= topo.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: topo.n(),
            });
        }
    }
    let k = topo.k();
    let (c_src, c_dst, c_cur) = (
        topo.column_of(src),
        topo.column_of(dst),
        topo.column_of(cur),
    );
    let to_dest = if c_dst == c_cur {
        k
    } else {
        (k + c_dst - c_cur) % k
    };
    let from_src = (k + c_cur - c_src) % k;
    Ok(ColumnDiff { to_dest, from_src })
}

/// Next-hop computation on (column, row) pairs, the allocation-free core
/// shared by routes and tree construction.
#[inline]
fn advance(
    topo: &Topology,
    (c_src, r_src): (usize, usize),
    (c_dst, r_dst): (usize, usize),
    (c_cur, r_cur): (usize, usize),
) -> (usize, usize) {
    let k = topo.k();
    let p = topo.p();

    // Column difference to the destination; a full cycle when equal.
    let x = if c_dst == c_cur {
        k
    } else {
        (k + c_dst - c_cur) % k
    };

    // First cycle: the k-X most significant destination digits must equal
    // the k-X least significant current digits.
    let digit = if x == k || r_dst / topo.pow(x) == r_cur % topo.pow(k - x) {
        (r_dst / topo.pow(x - 1)) % p
    } else {
        let x_prime = (k + c_cur - c_src) % k;
        (r_src / topo.pow(k - x_prime - 1)) % p
    };

    let next_col = if c_cur + 1 == k { 0 } else { c_cur + 1 };
    (next_col, (r_cur % topo.pow(k - 1)) * p + digit)
}

/// Next-hop relay computation on linear indices. `cur` must differ from
/// `dst`; the result is always a splitter output of `cur`.
pub(crate) fn next_hop_idx(topo: &Topology, src: usize, dst: usize, cur: usize) -> usize {
    debug_assert_ne!(cur, dst);
    let parts = |i: usize| (topo.column_of(i), topo.row_of(i));
    let (col, row) = advance(topo, parts(src), parts(dst), parts(cur));
    topo.index_of(col, row)
}

/// Next-hop relay computation on logical ids.
///
/// All three ids must be valid for the topology and `cur` must not already
/// be the destination.
pub fn next_hop(topo: &Topology, src: &TorId, dst: &TorId, cur: &TorId) -> Result<TorId> {
    let s = topo.encode(src)?;
    let d = topo.encode(dst)?;
    let c = topo.encode(cur)?;
    if c == d {
        return Err(Error::AlreadyAtDestination);
    }
    topo.decode(next_hop_idx(topo, s, d, c))
}

/// Iterates the next-hop rule from `src` until `dst` is reached.
///
/// `src == dst` yields the singleton route. Exceeding `2k - 1` hops is an
/// implementation bug, not a user error, and panics.
pub fn route(topo: &Topology, src: usize, dst: usize) -> Result<Route> {
    for &i in &[src, dst] {
        if i >= topo.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: topo.n(),
            });
        }
    }
    let mut hops = vec![src];
    let mut cur = src;
    while cur != dst {
        cur = next_hop_idx(topo, src, dst, cur);
        hops.push(cur);
        assert!(
            hops.len() <= 2 * topo.k(),
            "route {src}->{dst} exceeded {} hops",
            topo.params().max_healthy_hops()
        );
    }
    Ok(Route { src, dst, hops })
}

/// Builds the one-to-all tree of `src` as the union of the routes to every
/// destination, asserting that they are prefix-consistent (each ToR keeps
/// exactly one parent across all routes).
pub fn multicast_tree(topo: &Topology, src: usize) -> Result<MulticastTree> {
    if src >= topo.n() {
        return Err(Error::IndexOutOfRange {
            index: src,
            n: topo.n(),
        });
    }
    let n = topo.n();
    let rows = topo.rows();
    let mut parent: Vec<Option<u32>> = vec![None; n];
    let mut depth = vec![0u8; n];
    let mut has_child = vec![false; n];
    let mut seen = vec![false; n];
    seen[src] = true;

    let src_parts = (src / rows, src % rows);
    let hop_limit = topo.params().max_healthy_hops();
    let mut max_depth = 0usize;
    for dst in 0..n {
        if dst == src {
            continue;
        }
        let dst_parts = (dst / rows, dst % rows);
        let mut cur = src_parts;
        let mut cur_idx = src;
        let mut step = 0usize;
        while cur_idx != dst {
            cur = advance(topo, src_parts, dst_parts, cur);
            let next_idx = cur.0 * rows + cur.1;
            step += 1;
            assert!(
                step <= hop_limit,
                "route {src}->{dst} exceeded {hop_limit} hops"
            );
            if seen[next_idx] {
                assert_eq!(
                    parent[next_idx],
                    Some(cur_idx as u32),
                    "routes from {src} disagree on the parent of {next_idx}"
                );
                assert_eq!(
                    depth[next_idx] as usize, step,
                    "routes from {src} disagree on depth"
                );
            } else {
                seen[next_idx] = true;
                parent[next_idx] = Some(cur_idx as u32);
                depth[next_idx] = step as u8;
                has_child[cur_idx] = true;
                max_depth = max_depth.max(step);
            }
            cur_idx = next_idx;
        }
    }

    assert!(
        seen.iter().all(|&s| s),
        "tree of {src} fails to span the fabric"
    );
    let relays: Vec<u32> = (0..n).filter(|&v| has_child[v]).map(|v| v as u32).collect();
    assert_eq!(
        relays.len(),
        topo.params().relays_per_source(),
        "tree of {src} uses an unexpected relay count"
    );
    Ok(MulticastTree {
        src,
        parent,
        depth,
        relays,
        max_depth,
    })
}

/// The partition criteria of `src`: a map from column to relay partition.
///
/// Every relay of `multicast_tree(src)` lies in the partition this map
/// names for its column; the test suite checks that exhaustively against
/// trees built from routes.
pub fn partition_signature(topo: &Topology, src: usize) -> Result<PartitionSignature> {
    if src >= topo.n() {
        return Err(Error::IndexOutOfRange {
            index: src,
            n: topo.n(),
        });
    }
    let k = topo.k();
    let c_src = topo.column_of(src);
    let row = topo.row_of(src);
    let mut by_column = vec![0u32; k];
    for t in 0..k {
        // digit t (most significant first) = r_{k-1-t}
        let digit = (row / topo.pow(k - 1 - t)) % topo.p();
        by_column[(c_src + t) % k] = digit as u32;
    }
    Ok(PartitionSignature { src, by_column })
}

/// The `j`-th member of the line-rate group of `base`: same column, every
/// row digit shifted by `j` modulo `p`. The `p` members over all `j` have
/// pairwise-disjoint relay sets.
pub fn linerate_group(topo: &Topology, base: usize, j: usize) -> Result<usize> {
    if base >= topo.n() {
        return Err(Error::IndexOutOfRange {
            index: base,
            n: topo.n(),
        });
    }
    if j >= topo.p() {
        return Err(Error::InvalidParams(format!(
            "digit shift {j} out of range for p={}",
            topo.p()
        )));
    }
    let p = topo.p();
    let mut row = topo.row_of(base);
    let mut shifted = 0usize;
    let mut weight = 1usize;
    for _ in 0..topo.k() {
        shifted += ((row % p + j) % p) * weight;
        row /= p;
        weight *= p;
    }
    Ok(topo.index_of(topo.column_of(base), shifted))
}

/// Maximum hop count of the one-to-all tree of `src`. In a healthy fabric
/// this is exactly `2k - 1` for every source, which is asserted.
pub fn max_hop(topo: &Topology, src: usize) -> Result<usize> {
    let tree = multicast_tree(topo, src)?;
    assert_eq!(
        tree.max_depth(),
        topo.params().max_healthy_hops(),
        "healthy one-to-all depth from {src} must be 2k-1"
    );
    Ok(tree.max_depth())
}

/// Writes a route as CSV rows `src,dst,hop_index,tor`.
pub fn write_route_csv<W: std::io::Write>(w: &mut W, route: &Route) -> Result<()> {
    writeln!(w, "src,dst,hop_index,tor")?;
    for (i, hop) in route.hops.iter().enumerate() {
        writeln!(w, "{},{},{},{}", route.src, route.dst, i, hop)?;
    }
    Ok(())
}
