//! C ABI for the shufflecast library.
//!
//! Handles are opaque pointers created and destroyed by this crate; every
//! fallible call returns an [`ScStatus`] and writes results through out
//! pointers. The companion header `include/shufflecast.h` is generated by
//! cbindgen at build time.

use std::panic::{catch_unwind, AssertUnwindSafe};

use shufflecast::control::NetworkState;
use shufflecast::cost::{build_minimal_layer_core, insertion_loss_db};
use shufflecast::routing::{multicast_tree, MulticastTree};
use shufflecast::topology::{Params, Topology};
use shufflecast::Error;

/// Result codes of every fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    /// A parameter failed validation (bad p/k, bad fanout, ...).
    InvalidArgument = 1,
    /// An index was outside the fabric.
    OutOfRange = 2,
    /// A required pointer was null.
    NullPointer = 3,
    /// A failure is already recorded on this network handle.
    FailureExists = 4,
    /// The caller's buffer cannot hold the result.
    BufferTooSmall = 5,
    /// An internal invariant failed.
    Internal = 6,
}

fn status_of(err: &Error) -> ScStatus {
    match err {
        Error::IndexOutOfRange { .. } => ScStatus::OutOfRange,
        Error::FailureAlreadyRecorded => ScStatus::FailureExists,
        _ => ScStatus::InvalidArgument,
    }
}

fn guarded(f: impl FnOnce() -> ScStatus) -> ScStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(ScStatus::Internal)
}

/// Opaque handle to an immutable p,k fabric.
pub struct ScTopology {
    inner: Topology,
}

/// Opaque handle to a one-to-all multicast tree.
pub struct ScTree {
    inner: MulticastTree,
}

/// Opaque handle to a mutable network: rule tables plus at most one
/// failed relay.
pub struct ScNetwork {
    inner: NetworkState,
}

/// Builds a p,k fabric. On success writes a handle that must be released
/// with `sc_topology_free`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_topology_new(
    p: usize,
    k: usize,
    out: *mut *mut ScTopology,
) -> ScStatus {
    guarded(|| {
        if out.is_null() {
            return ScStatus::NullPointer;
        }
        match Params::new(p, k) {
            Ok(params) => {
                let handle = Box::new(ScTopology {
                    inner: Topology::new(params),
                });
                unsafe { *out = Box::into_raw(handle) };
                ScStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a topology handle. Null is ignored.
///
/// # Safety
/// `topo` must be a pointer returned by `sc_topology_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_topology_free(topo: *mut ScTopology) {
    if !topo.is_null() {
        drop(unsafe { Box::from_raw(topo) });
    }
}

/// Total ToR count `k * p^k`.
///
/// # Safety
/// `topo` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_topology_tor_count(
    topo: *const ScTopology,
    out: *mut usize,
) -> ScStatus {
    guarded(|| {
        if topo.is_null() || out.is_null() {
            return ScStatus::NullPointer;
        }
        unsafe { *out = (*topo).inner.n() };
        ScStatus::Ok
    })
}

/// Writes the `p` downstream neighbors of `tor` (ordered by appended
/// digit) into `buf` and the count into `written`.
///
/// # Safety
/// `buf` must point to at least `buf_len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn sc_topology_neighbors(
    topo: *const ScTopology,
    tor: usize,
    buf: *mut usize,
    buf_len: usize,
    written: *mut usize,
) -> ScStatus {
    guarded(|| {
        if topo.is_null() || buf.is_null() || written.is_null() {
            return ScStatus::NullPointer;
        }
        let t = unsafe { &(*topo).inner };
        if tor >= t.n() {
            return ScStatus::OutOfRange;
        }
        if buf_len < t.p() {
            return ScStatus::BufferTooSmall;
        }
        for (i, w) in t.neighbors(tor).enumerate() {
            unsafe { *buf.add(i) = w };
        }
        unsafe { *written = t.p() };
        ScStatus::Ok
    })
}

/// Builds the one-to-all multicast tree rooted at `src`.
///
/// # Safety
/// `topo` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_tree_new(
    topo: *const ScTopology,
    src: usize,
    out: *mut *mut ScTree,
) -> ScStatus {
    guarded(|| {
        if topo.is_null() || out.is_null() {
            return ScStatus::NullPointer;
        }
        match multicast_tree(unsafe { &(*topo).inner }, src) {
            Ok(tree) => {
                unsafe { *out = Box::into_raw(Box::new(ScTree { inner: tree })) };
                ScStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a tree handle. Null is ignored.
///
/// # Safety
/// `tree` must be a pointer returned by `sc_tree_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_tree_free(tree: *mut ScTree) {
    if !tree.is_null() {
        drop(unsafe { Box::from_raw(tree) });
    }
}

/// Maximum hop depth of the tree (`2k - 1` on a healthy fabric).
///
/// # Safety
/// `tree` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_tree_max_depth(tree: *const ScTree, out: *mut usize) -> ScStatus {
    guarded(|| {
        if tree.is_null() || out.is_null() {
            return ScStatus::NullPointer;
        }
        unsafe { *out = (*tree).inner.max_depth() };
        ScStatus::Ok
    })
}

/// Number of relay ToRs of the tree (`k * p^(k-1)`).
///
/// # Safety
/// `tree` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_tree_relay_count(tree: *const ScTree, out: *mut usize) -> ScStatus {
    guarded(|| {
        if tree.is_null() || out.is_null() {
            return ScStatus::NullPointer;
        }
        unsafe { *out = (*tree).inner.relays().len() };
        ScStatus::Ok
    })
}

/// Writes the sorted relay ids into `buf` and the count into `written`.
///
/// # Safety
/// `buf` must point to at least `buf_len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn sc_tree_relays(
    tree: *const ScTree,
    buf: *mut usize,
    buf_len: usize,
    written: *mut usize,
) -> ScStatus {
    guarded(|| {
        if tree.is_null() || buf.is_null() || written.is_null() {
            return ScStatus::NullPointer;
        }
        let relays = unsafe { (*tree).inner.relays() };
        if buf_len < relays.len() {
            return ScStatus::BufferTooSmall;
        }
        for (i, &r) in relays.iter().enumerate() {
            unsafe { *buf.add(i) = r as usize };
        }
        unsafe { *written = relays.len() };
        ScStatus::Ok
    })
}

/// Parent of `tor` in the tree, or -1 for the source.
///
/// # Safety
/// `tree` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_tree_parent(
    tree: *const ScTree,
    tor: usize,
    out: *mut i64,
) -> ScStatus {
    guarded(|| {
        if tree.is_null() || out.is_null() {
            return ScStatus::NullPointer;
        }
        let t = unsafe { &(*tree).inner };
        if tor >= t.n() {
            return ScStatus::OutOfRange;
        }
        unsafe { *out = t.parent(tor).map_or(-1, |p| p as i64) };
        ScStatus::Ok
    })
}

/// Compiles the static relaying rules for a fabric and wraps them in a
/// mutable network handle.
///
/// # Safety
/// `topo` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_network_new(
    topo: *const ScTopology,
    out: *mut *mut ScNetwork,
) -> ScStatus {
    guarded(|| {
        if topo.is_null() || out.is_null() {
            return ScStatus::NullPointer;
        }
        match NetworkState::new(unsafe { (*topo).inner.clone() }) {
            Ok(state) => {
                unsafe { *out = Box::into_raw(Box::new(ScNetwork { inner: state })) };
                ScStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases a network handle. Null is ignored.
///
/// # Safety
/// `net` must be a pointer returned by `sc_network_new`, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_network_free(net: *mut ScNetwork) {
    if !net.is_null() {
        drop(unsafe { Box::from_raw(net) });
    }
}

/// Active rules held by one ToR (`k * p^(k-1)` on a healthy fabric).
///
/// # Safety
/// `net` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_network_active_rule_count(
    net: *const ScNetwork,
    owner: usize,
    out: *mut usize,
) -> ScStatus {
    guarded(|| {
        if net.is_null() || out.is_null() {
            return ScStatus::NullPointer;
        }
        let state = unsafe { &(*net).inner };
        if owner >= state.topology().n() {
            return ScStatus::OutOfRange;
        }
        unsafe { *out = state.rule_tables().active_rule_count(owner) };
        ScStatus::Ok
    })
}

/// Fails a relay. With `recover` set the single-relay recovery rule moves
/// are applied; otherwise the failure is left unrecovered for impact
/// studies. At most one failure may be recorded per handle.
///
/// # Safety
/// `net` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_network_fail_relay(
    net: *mut ScNetwork,
    relay: usize,
    recover: bool,
) -> ScStatus {
    guarded(|| {
        if net.is_null() {
            return ScStatus::NullPointer;
        }
        let state = unsafe { &mut (*net).inner };
        let result = if recover {
            state.recover_single_failure(relay).map(|_| ())
        } else {
            state.fail_without_recovery(relay)
        };
        match result {
            Ok(()) => ScStatus::Ok,
            Err(e) => status_of(&e),
        }
    })
}

/// Reverts the recorded failure, restoring the healthy rule tables.
///
/// # Safety
/// `net` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_network_clear_failure(net: *mut ScNetwork) -> ScStatus {
    guarded(|| {
        if net.is_null() {
            return ScStatus::NullPointer;
        }
        match unsafe { &mut (*net).inner }.clear_failure() {
            Ok(()) => ScStatus::Ok,
            Err(e) => status_of(&e),
        }
    })
}

/// Number of ToRs reached by a multicast from `src` under the current
/// rules, and the maximum hop depth of the walk.
///
/// # Safety
/// `net`, `reached` and `max_hop` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sc_network_reachability(
    net: *const ScNetwork,
    src: usize,
    reached: *mut usize,
    max_hop: *mut usize,
) -> ScStatus {
    guarded(|| {
        if net.is_null() || reached.is_null() || max_hop.is_null() {
            return ScStatus::NullPointer;
        }
        let state = unsafe { &(*net).inner };
        let mut scratch = shufflecast::control::ReachScratch::default();
        match state.reachable_stats(src, &mut scratch) {
            Ok(stats) => {
                unsafe {
                    *reached = stats.reached;
                    *max_hop = stats.max_hop;
                }
                ScStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Splitter insertion loss in dB, `0.8 + 3.4 * log2(fanout)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_insertion_loss_db(fanout: usize, out: *mut f64) -> ScStatus {
    guarded(|| {
        if out.is_null() {
            return ScStatus::NullPointer;
        }
        match insertion_loss_db(fanout) {
            Ok(db) => {
                unsafe { *out = db };
                ScStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Extra aggregation-switch ports a minimal-layer packet-switched core
/// needs to span `n` ToR uplinks with switches of radix `radix`.
///
/// # Safety
/// `extra_ports` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_core_extra_ports(
    n: usize,
    radix: usize,
    extra_ports: *mut usize,
) -> ScStatus {
    guarded(|| {
        if extra_ports.is_null() {
            return ScStatus::NullPointer;
        }
        match build_minimal_layer_core(n, radix) {
            Ok(core) => {
                unsafe { *extra_ports = core.extra_used_ports };
                ScStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}
