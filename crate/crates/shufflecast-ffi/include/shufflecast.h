/* C ABI for the shufflecast library. Generated by cbindgen; do not edit. */

#ifndef SHUFFLECAST_FFI_H
#define SHUFFLECAST_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of every fallible FFI call.
 */
typedef enum ScStatus {
  SC_STATUS_OK = 0,
  /**
   * A parameter failed validation (bad p/k, bad fanout, ...).
   */
  SC_STATUS_INVALID_ARGUMENT = 1,
  /**
   * An index was outside the fabric.
   */
  SC_STATUS_OUT_OF_RANGE = 2,
  /**
   * A required pointer was null.
   */
  SC_STATUS_NULL_POINTER = 3,
  /**
   * A failure is already recorded on this network handle.
   */
  SC_STATUS_FAILURE_EXISTS = 4,
  /**
   * The caller's buffer cannot hold the result.
   */
  SC_STATUS_BUFFER_TOO_SMALL = 5,
  /**
   * An internal invariant failed.
   */
  SC_STATUS_INTERNAL = 6,
} ScStatus;

/**
 * Opaque handle to a mutable network: rule tables plus at most one
 * failed relay.
 */
typedef struct ScNetwork ScNetwork;

/**
 * Opaque handle to an immutable p,k fabric.
 */
typedef struct ScTopology ScTopology;

/**
 * Opaque handle to a one-to-all multicast tree.
 */
typedef struct ScTree ScTree;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a p,k fabric. On success writes a handle that must be released
 * with `sc_topology_free`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ScStatus sc_topology_new(uintptr_t p, uintptr_t k, struct ScTopology **out);

/**
 * Releases a topology handle. Null is ignored.
 *
 * # Safety
 * `topo` must be a pointer returned by `sc_topology_new`, not yet freed.
 */
void sc_topology_free(struct ScTopology *topo);

/**
 * Total ToR count `k * p^k`.
 *
 * # Safety
 * `topo` and `out` must be valid pointers.
 */
enum ScStatus sc_topology_tor_count(const struct ScTopology *topo, uintptr_t *out);

/**
 * Writes the `p` downstream neighbors of `tor` (ordered by appended
 * digit) into `buf` and the count into `written`.
 *
 * # Safety
 * `buf` must point to at least `buf_len` writable entries.
 */
enum ScStatus sc_topology_neighbors(const struct ScTopology *topo,
                                    uintptr_t tor,
                                    uintptr_t *buf,
                                    uintptr_t buf_len,
                                    uintptr_t *written);

/**
 * Builds the one-to-all multicast tree rooted at `src`.
 *
 * # Safety
 * `topo` and `out` must be valid pointers.
 */
enum ScStatus sc_tree_new(const struct ScTopology *topo, uintptr_t src, struct ScTree **out);

/**
 * Releases a tree handle. Null is ignored.
 *
 * # Safety
 * `tree` must be a pointer returned by `sc_tree_new`, not yet freed.
 */
void sc_tree_free(struct ScTree *tree);

/**
 * Maximum hop depth of the tree (`2k - 1` on a healthy fabric).
 *
 * # Safety
 * `tree` and `out` must be valid pointers.
 */
enum ScStatus sc_tree_max_depth(const struct ScTree *tree, uintptr_t *out);

/**
 * Number of relay ToRs of the tree (`k * p^(k-1)`).
 *
 * # Safety
 * `tree` and `out` must be valid pointers.
 */
enum ScStatus sc_tree_relay_count(const struct ScTree *tree, uintptr_t *out);

/**
 * Writes the sorted relay ids into `buf` and the count into `written`.
 *
 * # Safety
 * `buf` must point to at least `buf_len` writable entries.
 */
enum ScStatus sc_tree_relays(const struct ScTree *tree,
                             uintptr_t *buf,
                             uintptr_t buf_len,
                             uintptr_t *written);

/**
 * Parent of `tor` in the tree, or -1 for the source.
 *
 * # Safety
 * `tree` and `out` must be valid pointers.
 */
enum ScStatus sc_tree_parent(const struct ScTree *tree, uintptr_t tor, int64_t *out);

/**
 * Compiles the static relaying rules for a fabric and wraps them in a
 * mutable network handle.
 *
 * # Safety
 * `topo` and `out` must be valid pointers.
 */
enum ScStatus sc_network_new(const struct ScTopology *topo, struct ScNetwork **out);

/**
 * Releases a network handle. Null is ignored.
 *
 * # Safety
 * `net` must be a pointer returned by `sc_network_new`, not yet freed.
 */
void sc_network_free(struct ScNetwork *net);

/**
 * Active rules held by one ToR (`k * p^(k-1)` on a healthy fabric).
 *
 * # Safety
 * `net` and `out` must be valid pointers.
 */
enum ScStatus sc_network_active_rule_count(const struct ScNetwork *net,
                                           uintptr_t owner,
                                           uintptr_t *out);

/**
 * Fails a relay. With `recover` set the single-relay recovery rule moves
 * are applied; otherwise the failure is left unrecovered for impact
 * studies. At most one failure may be recorded per handle.
 *
 * # Safety
 * `net` must be a valid pointer.
 */
enum ScStatus sc_network_fail_relay(struct ScNetwork *net, uintptr_t relay, bool recover);

/**
 * Reverts the recorded failure, restoring the healthy rule tables.
 *
 * # Safety
 * `net` must be a valid pointer.
 */
enum ScStatus sc_network_clear_failure(struct ScNetwork *net);

/**
 * Number of ToRs reached by a multicast from `src` under the current
 * rules, and the maximum hop depth of the walk.
 *
 * # Safety
 * `net`, `reached` and `max_hop` must be valid pointers.
 */
enum ScStatus sc_network_reachability(const struct ScNetwork *net,
                                      uintptr_t src,
                                      uintptr_t *reached,
                                      uintptr_t *max_hop);

/**
 * Splitter insertion loss in dB, `0.8 + 3.4 * log2(fanout)`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ScStatus sc_insertion_loss_db(uintptr_t fanout, double *out);

/**
 * Extra aggregation-switch ports a minimal-layer packet-switched core
 * needs to span `n` ToR uplinks with switches of radix `radix`.
 *
 * # Safety
 * `extra_ports` must be a valid pointer.
 */
enum ScStatus sc_core_extra_ports(uintptr_t n, uintptr_t radix, uintptr_t *extra_ports);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHUFFLECAST_FFI_H */
