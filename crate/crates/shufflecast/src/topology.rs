//! The p,k-Shufflecast graph: logical ToR ids, splitter adjacency and
//! column partitions.
//!
//! A `p,k` instance has `N = k * p^k` ToRs arranged in `k` logical columns
//! of `p^k` rows each. Every ToR feeds a `1:p` splitter whose outputs land
//! on the next column: the neighbors of `(c, r_{k-1}..r_0)` are
//! `((c+1) mod k, r_{k-2}..r_0 m)` for each appended digit `m`, ordered by
//! `m` ascending so that every derived artifact is deterministic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ceiling on the ToR count of a single instance. Exhaustive
/// analyses stay tractable well below this; raise it explicitly with
/// [`Params::with_node_cap`] if a larger graph is really wanted.
pub const DEFAULT_NODE_CAP: usize = 10_000_000;

/// Fabric parameters: splitter fanout `p` and column count `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Params {
    p: usize,
    k: usize,
    n: usize,
}

impl Params {
    /// Validates `p >= 2`, `k >= 2` and that `N = k * p^k` fits both the
    /// native word size and [`DEFAULT_NODE_CAP`].
    ///
    /// `k = 1` is rejected: the digit-shift connectivity rule degenerates
    /// to self-loops there.
    pub fn new(p: usize, k: usize) -> Result<Self> {
        Self::with_node_cap(p, k, DEFAULT_NODE_CAP)
    }

    /// Same as [`Params::new`] with an explicit node-count ceiling.
    pub fn with_node_cap(p: usize, k: usize, cap: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidParams(format!(
                "splitter fanout p must be at least 2, got {p}"
            )));
        }
        if k < 2 {
            return Err(Error::InvalidParams(format!(
                "column count k must be at least 2, got {k}"
            )));
        }
        let rows = checked_pow(p, k).ok_or_else(|| {
            Error::InvalidParams(format!("p^k overflows the native integer for p={p}, k={k}"))
        })?;
        let n = k.checked_mul(rows).ok_or_else(|| {
            Error::InvalidParams(format!(
                "k*p^k overflows the native integer for p={p}, k={k}"
            ))
        })?;
        if n > cap {
            return Err(Error::InvalidParams(format!(
                "k*p^k = {n} exceeds the node cap of {cap}"
            )));
        }
        Ok(Params { p, k, n })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Total ToR count `N = k * p^k`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// ToRs per column, `p^k`.
    pub fn rows(&self) -> usize {
        self.n / self.k
    }

    /// ToRs per partition, `p^(k-1)`; also the relay count per column of
    /// any one-to-all tree.
    pub fn partition_size(&self) -> usize {
        self.rows() / self.p
    }

    /// Relays per one-to-all tree (and static rules per ToR), `k * p^(k-1)`.
    pub fn relays_per_source(&self) -> usize {
        self.k * self.partition_size()
    }

    /// Upper bound on healthy one-to-all hop count, `2k - 1`.
    pub fn max_healthy_hops(&self) -> usize {
        2 * self.k - 1
    }

    /// Upper bound on post-recovery one-to-all hop count, `3k - 1`.
    pub fn max_recovered_hops(&self) -> usize {
        3 * self.k - 1
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let exp = u32::try_from(exp).ok()?;
    base.checked_pow(exp)
}

/// Logical ToR identifier: column index plus the `k` base-`p` row digits,
/// most significant first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorId {
    pub column: usize,
    pub digits: Vec<u32>,
}

impl TorId {
    /// Partition index: the most significant row digit.
    pub fn partition(&self) -> u32 {
        self.digits[0]
    }
}

impl std::fmt::Display for TorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},", self.column)?;
        for d in &self.digits {
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// Splits a linear index `i` in `[0, N)` into its `(column, row digits)` id.
pub fn decode_tor_id(i: usize, params: &Params) -> Result<TorId> {
    if i >= params.n() {
        return Err(Error::IndexOutOfRange {
            index: i,
            n: params.n(),
        });
    }
    let rows = params.rows();
    let column = i / rows;
    let mut row = i % rows;
    let mut digits = vec![0u32; params.k()];
    for slot in digits.iter_mut().rev() {
        *slot = (row % params.p()) as u32;
        row /= params.p();
    }
    Ok(TorId { column, digits })
}

/// Inverse of [`decode_tor_id`].
pub fn encode_tor_id(id: &TorId, params: &Params) -> Result<usize> {
    if id.column >= params.k() {
        return Err(Error::InvalidTorId(format!(
            "column {} out of range for k={}",
            id.column,
            params.k()
        )));
    }
    if id.digits.len() != params.k() {
        return Err(Error::InvalidTorId(format!(
            "expected {} row digits, got {}",
            params.k(),
            id.digits.len()
        )));
    }
    let mut row = 0usize;
    for &d in &id.digits {
        if d as usize >= params.p() {
            return Err(Error::InvalidTorId(format!(
                "row digit {d} out of range for p={}",
                params.p()
            )));
        }
        row = row * params.p() + d as usize;
    }
    Ok(id.column * params.rows() + row)
}

/// Partition index of a ToR: its most significant row digit.
pub fn partition_of(id: &TorId) -> u32 {
    id.partition()
}

/// An immutable `p,k` instance. All adjacency is arithmetic on linear
/// indices, so the structure itself is a handful of words and is safe to
/// share across any number of reader threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    params: Params,
    /// pows[i] = p^i for i in 0..=k.
    pows: Vec<usize>,
}

impl Topology {
    pub fn new(params: Params) -> Self {
        let mut pows = Vec::with_capacity(params.k() + 1);
        let mut v = 1usize;
        for _ in 0..=params.k() {
            pows.push(v);
            v = v.saturating_mul(params.p());
        }
        Topology { params, pows }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn p(&self) -> usize {
        self.params.p()
    }

    pub fn k(&self) -> usize {
        self.params.k()
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn rows(&self) -> usize {
        self.pows[self.params.k()]
    }

    /// p^i lookup.
    pub(crate) fn pow(&self, i: usize) -> usize {
        self.pows[i]
    }

    pub fn column_of(&self, i: usize) -> usize {
        i / self.rows()
    }

    pub fn row_of(&self, i: usize) -> usize {
        i % self.rows()
    }

    pub(crate) fn index_of(&self, column: usize, row: usize) -> usize {
        column * self.rows() + row
    }

    /// Most significant row digit, i.e. the partition index.
    pub fn partition_index(&self, i: usize) -> usize {
        self.row_of(i) / self.pows[self.params.k() - 1]
    }

    pub fn decode(&self, i: usize) -> Result<TorId> {
        decode_tor_id(i, &self.params)
    }

    pub fn encode(&self, id: &TorId) -> Result<usize> {
        encode_tor_id(id, &self.params)
    }

    /// The `m`-th splitter output of ToR `i`: next column, row digits
    /// shifted left by one with `m` appended.
    pub fn neighbor(&self, i: usize, m: usize) -> usize {
        debug_assert!(m < self.p());
        let k = self.params.k();
        let next_col = (self.column_of(i) + 1) % k;
        let shifted = (self.row_of(i) % self.pows[k - 1]) * self.p() + m;
        self.index_of(next_col, shifted)
    }

    /// First splitter output of ToR `i`; outputs are the `p` consecutive
    /// indices starting here, ordered by appended digit.
    pub(crate) fn neighbor_base(&self, i: usize) -> usize {
        self.neighbor(i, 0)
    }

    /// Downstream neighbors of `i`, ordered by appended digit `m`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let base = self.neighbor_base(i);
        (0..self.p()).map(move |m| base + m)
    }

    /// The upstream neighbor of `i` that lives in partition `m` of the
    /// previous column. Every ToR has exactly one in-edge per partition.
    pub fn in_neighbor(&self, i: usize, m: usize) -> usize {
        debug_assert!(m < self.p());
        let k = self.params.k();
        let prev_col = (self.column_of(i) + k - 1) % k;
        let row = m * self.pows[k - 1] + self.row_of(i) / self.p();
        self.index_of(prev_col, row)
    }

    /// Linear ids of one partition: column `column`, most significant
    /// digit `d`. Partition rows are contiguous.
    pub fn partition_members(&self, column: usize, d: usize) -> std::ops::Range<usize> {
        let size = self.pows[self.params.k() - 1];
        let start = self.index_of(column, d * size);
        start..start + size
    }

    /// Serializable form of the whole graph.
    pub fn export(&self) -> TopologyExport {
        let tors = (0..self.n())
            .map(|i| {
                let id = self.decode(i).expect("index in range");
                TorExport {
                    id: i,
                    column: id.column,
                    row_digits: id.digits,
                    neighbors: self.neighbors(i).collect(),
                }
            })
            .collect();
        TopologyExport {
            p: self.p(),
            k: self.k(),
            n: self.n(),
            tors,
        }
    }

    /// Rebuilds a topology from its export, verifying that the listed
    /// adjacency matches the digit-shift rule exactly.
    pub fn from_export(export: &TopologyExport) -> Result<Self> {
        let params = Params::new(export.p, export.k)?;
        if export.n != params.n() {
            return Err(Error::InvalidParams(format!(
                "export claims {} ToRs but k*p^k = {}",
                export.n,
                params.n()
            )));
        }
        let topo = Topology::new(params);
        if export.tors.len() != topo.n() {
            return Err(Error::InvalidParams(format!(
                "export lists {} ToRs, expected {}",
                export.tors.len(),
                topo.n()
            )));
        }
        for (i, tor) in export.tors.iter().enumerate() {
            if tor.id != i {
                return Err(Error::InvalidParams(format!(
                    "ToR entry {i} carries id {}",
                    tor.id
                )));
            }
            let expect = topo.decode(i).expect("index in range");
            if tor.column != expect.column || tor.row_digits != expect.digits {
                return Err(Error::InvalidParams(format!("ToR {i} id fields disagree")));
            }
            let neighbors: Vec<usize> = topo.neighbors(i).collect();
            if tor.neighbors != neighbors {
                return Err(Error::InvalidParams(format!(
                    "ToR {i} adjacency disagrees with the digit-shift rule"
                )));
            }
        }
        Ok(topo)
    }
}

/// Builds the splitter graph for the given parameters.
pub fn build_topology(params: Params) -> Topology {
    Topology::new(params)
}

/// JSON form of a topology: digits serialized most significant first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyExport {
    pub p: usize,
    pub k: usize,
    pub n: usize,
    pub tors: Vec<TorExport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorExport {
    pub id: usize,
    pub column: usize,
    pub row_digits: Vec<u32>,
    pub neighbors: Vec<usize>,
}
