/*
 * Incremental race-tracking state: validity of pointer expressions, strong
 * invalidity, per-thread address ownership, the freed set, and a freed-origin
 * taint on data slots. Each core command has a transfer function computed
 * against the PRE-command heap; race predicates classify a command against
 * the current tracking state before it executes.
 */
#pragma once

#include "heaplab/cfg.hpp"
#include "heaplab/heap.hpp"

#include <cstdint>
#include <map>
#include <set>

namespace heaplab {

struct TrackCtx {
    int n_selectors = 1; // pointer selectors per cell
    int n_dsels = 3;     // data slots per cell (data, age, tag)
};

struct Tracking {
    // Complement representation: a pointer expression is valid iff absent.
    // Everything is valid initially, so the empty set is the initial value.
    std::set<PExp> invalid;
    std::set<PExp> sinvalid_p; // strongly invalid pointer expressions
    std::set<DExp> sinvalid_d; // strongly invalid data expressions
    std::map<Addr, std::uint32_t> owned; // address -> bitset of owning threads
    std::set<Addr> freed;      // freed and not yet re-allocated
    std::set<DExp> taint;      // value stems from a freed cell (clean on overwrite)

    bool is_valid(const PExp& e) const { return invalid.find(e) == invalid.end(); }
    bool var_valid(std::uint32_t v) const { return is_valid(PExp::variable(v)); }
    auto operator<=>(const Tracking&) const = default;
};

// Validity transfer: p:=q.sel validates p iff q and sel(heap(q)) are both
// valid; pe:=q tracks q's validity; null stores validate; free(p) invalidates
// every expression valuing heap(p) plus all selectors of heap(p) (nothing if
// heap(p)=SEG); malloc validates only the assigned variable; all other
// commands leave the set unchanged.
void update_valid(std::set<PExp>& invalid, const CoreCmd& cmd, const Heap& pre,
                  const TrackCtx& ctx);

// Strong-invalidity transfer. `invalid_pre` is validity before the command,
// `invalid_post` after (the default case removes members that became valid;
// data expressions are never valid, so data strong-invalidity is sticky).
void update_sinvalid(std::set<PExp>& sp, std::set<DExp>& sd,
                     const std::set<PExp>& invalid_pre,
                     const std::set<PExp>& invalid_post, const CoreCmd& cmd,
                     const Heap& pre);

// Ownership transfer (per-address owner bitsets). malloc_ret is the address a
// Malloc command returned. Conditions evaluate against pre-command validity.
void update_owned(std::map<Addr, std::uint32_t>& owned,
                  const std::set<PExp>& invalid_pre, const VarTable& vars,
                  std::uint32_t thread, const CoreCmd& cmd, const Heap& pre,
                  Addr malloc_ret);

// Applies all transfer functions for one command: validity, strong
// invalidity, ownership, the freed set, and the data taint. For Malloc,
// malloc_ret is the returned address and malloc_fresh distinguishes a fresh
// allocation (purges stale entries for recycled names) from re-allocation.
void track_step(Tracking& tr, const VarTable& vars, const TrackCtx& ctx,
                std::uint32_t thread, const CoreCmd& cmd, const Heap& pre,
                Addr malloc_ret = kSeg, bool malloc_fresh = true);

// Pointer race: a command dereferencing or freeing an invalid pointer
// variable, or an assertion containing an invalid pointer variable.
bool raises_pr(const Tracking& tr, const CoreCmd& cmd);

// Strong pointer race: (i) a selector write or free through an invalid
// pointer, (ii) an assertion containing a strongly invalid pointer or data
// variable, (iii) a dereference through a strongly invalid pointer.
bool raises_spr(const Tracking& tr, const CoreCmd& cmd);

// Ownership violation: a selector write or free whose target cell is owned by
// another thread, or owned by the actor but addressed via a shared variable.
bool violates_ownership(const Tracking& tr, const VarTable& vars,
                        std::uint32_t thread, const CoreCmd& cmd, const Heap& pre);

// Owning pointers: valid expressions targeting an owned address, plus valid
// next-selector expressions rooted at an owned address.
std::set<PExp> owning_pointers(const Tracking& tr, const Heap& h);

// Smallest superset of O (within owning_pointers) closed under sharing a
// target address and, for selector expressions, sharing the source address.
// Throws std::invalid_argument if O is not a subset of owning_pointers.
std::set<PExp> coherent_closure(const std::set<PExp>& O, const Tracking& tr,
                                const Heap& h);

// Removes every entry that mentions address a from all tracking sets. Used
// when a fresh allocation recycles a dropped name and when the explorer drops
// a freed cell's rows.
void purge_address(Tracking& tr, const TrackCtx& ctx, Addr a);

} // namespace heaplab
