/*
 * Heap data model: partial valuations over pointer/data expressions, updates,
 * restriction, address mappings, isomorphism, canonicalization.
 *
 * A heap is a pair (pval, dval). pval maps pointer expressions -- pointer
 * variables and selector expressions next_i(a) for a != SEG -- to addresses.
 * dval maps data expressions -- data variables and data_j(a) for a != SEG --
 * to data values. Both maps are partial. SEG is the distinguished "no cell
 * assigned" address: it has no selector rows, and dereferencing a pointer
 * valued SEG is disabled in the operational rules.
 */
#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace heaplab {

using Addr = std::uint32_t;

// SEG participates in the address universe (addresses_of may contain it) but
// is never allocated and carries no selectors.
constexpr Addr kSeg = 0;

// Explorer-only sentinel for tombstoned dangling pointers in the
// garbage-collected race-check configuration. Never occurs in formal heaps.
constexpr Addr kDangling = 0xFFFFFFFFu;

// Data values. Payload variables hold residues mod k; version-counter ("age")
// variables hold opaque tokens compared only for equality. The distinction is
// static (declaration kind); the heap model itself treats both uniformly.
using DVal = std::uint32_t;

// Pointer expression: a pointer variable (program-wide id) or next_sel(adr).
struct PExp {
    std::int32_t sel = -1;   // -1: variable; >= 0: next-selector index
    std::uint32_t var = 0;   // variable id when sel < 0
    Addr adr = kSeg;         // owning address when sel >= 0

    static PExp variable(std::uint32_t v) { return PExp{-1, v, kSeg}; }
    static PExp selector(std::int32_t sel, Addr a) { return PExp{sel, 0, a}; }
    bool is_var() const { return sel < 0; }
    auto operator<=>(const PExp&) const = default;
};

// Data expression: a data variable (program-wide id) or data_sel(adr).
struct DExp {
    std::int32_t sel = -1;
    std::uint32_t var = 0;
    Addr adr = kSeg;

    static DExp variable(std::uint32_t v) { return DExp{-1, v, kSeg}; }
    static DExp selector(std::int32_t sel, Addr a) { return DExp{sel, 0, a}; }
    bool is_var() const { return sel < 0; }
    auto operator<=>(const DExp&) const = default;
};

// Finite list of bindings; at most one binding per expression.
struct Update {
    std::vector<std::pair<PExp, Addr>> ptr;
    std::vector<std::pair<DExp, DVal>> dat;

    bool empty() const { return ptr.empty() && dat.empty(); }
};

struct Heap {
    std::map<PExp, Addr> pval;
    std::map<DExp, DVal> dval;

    std::optional<Addr> eval(const PExp& e) const;
    std::optional<DVal> eval(const DExp& e) const;

    auto operator<=>(const Heap&) const = default;
};

// h[up]. Throws std::invalid_argument on a binding to a selector of SEG.
Heap apply_update(const Heap& h, const Update& up);

// adr(h) = (dom pval ∪ ran pval ∪ dom dval) ∩ Adr, where a selector
// expression of address a contributes {a}. May contain kSeg.
std::set<Addr> addresses_of(const Heap& h);

// h|P: pval restricted to keys in P; dval restricted to all data variables
// plus every data_j(a) such that some retained pointer expression values a.
Heap restrict_heap(const Heap& h, const std::set<PExp>& P);

// Total map on a finite address set with fa(SEG) = SEG.
using AddressMapping = std::map<Addr, Addr>;

// Induced expression mapping: variables fixed, selector exprs renamed by fa.
PExp apply_fe(const AddressMapping& fa, const PExp& e);
DExp apply_fe(const AddressMapping& fa, const DExp& e);

// Rename a heap through fa (keys and pointer values; data values unchanged).
// fa must cover addresses_of(h).
Heap apply_mapping(const Heap& h, const AddressMapping& fa);

// Which data slots hold opaque version tokens ("age" values). Age slots are
// compared up to a bijective renaming of token values, shared across every
// age slot of the heap; all other data slots compare by exact value.
struct CanonOptions {
    std::set<std::uint32_t> age_dvars; // age-kind data variable ids
    std::set<std::int32_t> age_dsels;  // age-kind data selector indices

    bool is_age(const DExp& e) const {
        return e.is_var() ? age_dvars.count(e.var) > 0 : age_dsels.count(e.sel) > 0;
    }
    bool trivial() const { return age_dvars.empty() && age_dsels.empty(); }
};

// Exact isomorphism search: a bijective fa: addresses_of(h1)->addresses_of(h2)
// with fa(SEG)=SEG whose induced fe is a domain bijection satisfying
// fa(pval1(pe)) = pval2(fe(pe)) and, for non-age slots, dval1(de) =
// dval2(fe(de)); age slots must be related by one token bijection.
std::optional<AddressMapping> find_isomorphism(const Heap& h1, const Heap& h2,
                                               const CanonOptions& opts = {});

// Extra state rendered under a candidate address relabeling and appended to
// the compared serialization, so the chosen relabeling canonicalizes composite
// states (heap plus validity sets, ownership, freed set, ...) as one unit.
using ExtraSignature = std::function<std::string(const AddressMapping&)>;

// Deterministic relabeling: canonical_form(h1, o) == canonical_form(h2, o) iff
// the heaps are isomorphic up to age-token renaming. Traversal from variables
// in id order, selector edges in index order; unreached addresses placed by
// signature with exhaustive tie-breaking on the least serialization; age
// tokens renumbered by first occurrence.
Heap canonical_form(const Heap& h, const CanonOptions& opts = {});

// The least combined text (serialization plus extra) over the same candidate
// relabelings canonical_form searches. Equal digests iff states equivalent,
// provided `extra` faithfully renders everything outside the heap.
std::string canonical_digest(const Heap& h, const CanonOptions& opts = {},
                             const ExtraSignature& extra = nullptr);

// Deterministic text dump (sorted rows), used in golden tests and reports.
// Age-slot values render as first-occurrence ranks "@r" so equivalent states
// print identically; with trivial options this is a plain raw dump.
std::string serialize(const Heap& h, const CanonOptions& opts = {});

} // namespace heaplab
