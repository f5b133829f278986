#include "heaplab/heap.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace heaplab {

std::optional<Addr> Heap::eval(const PExp& e) const {
    auto it = pval.find(e);
    if (it == pval.end()) return std::nullopt;
    return it->second;
}

std::optional<DVal> Heap::eval(const DExp& e) const {
    auto it = dval.find(e);
    if (it == dval.end()) return std::nullopt;
    return it->second;
}

Heap apply_update(const Heap& h, const Update& up) {
    Heap out = h;
    for (const auto& [pe, a] : up.ptr) {
        if (!pe.is_var() && pe.adr == kSeg)
            throw std::invalid_argument("update binds a selector of SEG");
        out.pval[pe] = a;
    }
    for (const auto& [de, d] : up.dat) {
        if (!de.is_var() && de.adr == kSeg)
            throw std::invalid_argument("update binds a selector of SEG");
        out.dval[de] = d;
    }
    return out;
}

std::set<Addr> addresses_of(const Heap& h) {
    std::set<Addr> out;
    for (const auto& [pe, a] : h.pval) {
        if (!pe.is_var()) out.insert(pe.adr);
        out.insert(a);
    }
    for (const auto& [de, d] : h.dval) {
        (void)d;
        if (!de.is_var()) out.insert(de.adr);
    }
    return out;
}

Heap restrict_heap(const Heap& h, const std::set<PExp>& P) {
    Heap out;
    std::set<Addr> kept_targets;
    for (const auto& [pe, a] : h.pval) {
        if (P.count(pe)) {
            out.pval.emplace(pe, a);
            kept_targets.insert(a);
        }
    }
    for (const auto& [de, d] : h.dval) {
        if (de.is_var() || kept_targets.count(de.adr)) out.dval.emplace(de, d);
    }
    return out;
}

PExp apply_fe(const AddressMapping& fa, const PExp& e) {
    if (e.is_var()) return e;
    auto it = fa.find(e.adr);
    if (it == fa.end()) throw std::invalid_argument("fe: address not in mapping");
    return PExp::selector(e.sel, it->second);
}

DExp apply_fe(const AddressMapping& fa, const DExp& e) {
    if (e.is_var()) return e;
    auto it = fa.find(e.adr);
    if (it == fa.end()) throw std::invalid_argument("fe: address not in mapping");
    return DExp::selector(e.sel, it->second);
}

Heap apply_mapping(const Heap& h, const AddressMapping& fa) {
    auto map_addr = [&fa](Addr a) {
        auto it = fa.find(a);
        if (it == fa.end()) throw std::invalid_argument("fa: address not in mapping");
        return it->second;
    };
    Heap out;
    for (const auto& [pe, a] : h.pval) out.pval.emplace(apply_fe(fa, pe), map_addr(a));
    for (const auto& [de, d] : h.dval) out.dval.emplace(apply_fe(fa, de), d);
    return out;
}

namespace {

// Checks whether the bijection candidate fa is an isomorphism from h1 to h2,
// matching age slots up to one shared token bijection.
bool is_isomorphism(const Heap& h1, const Heap& h2, const AddressMapping& fa,
                    const CanonOptions& opts) {
    if (h1.pval.size() != h2.pval.size() || h1.dval.size() != h2.dval.size())
        return false;
    for (const auto& [pe, a] : h1.pval) {
        auto it = h2.pval.find(apply_fe(fa, pe));
        if (it == h2.pval.end()) return false;
        auto im = fa.find(a);
        if (im == fa.end() || it->second != im->second) return false;
    }
    std::map<DVal, DVal> fwd, rev;
    for (const auto& [de, d] : h1.dval) {
        auto it = h2.dval.find(apply_fe(fa, de));
        if (it == h2.dval.end()) return false;
        if (!opts.is_age(de)) {
            if (it->second != d) return false;
        } else {
            auto [fi, fnew] = fwd.emplace(d, it->second);
            if (!fnew && fi->second != it->second) return false;
            auto [ri, rnew] = rev.emplace(it->second, d);
            if (!rnew && ri->second != d) return false;
        }
    }
    return true;
}

} // namespace

std::optional<AddressMapping> find_isomorphism(const Heap& h1, const Heap& h2,
                                               const CanonOptions& opts) {
    std::set<Addr> a1 = addresses_of(h1);
    std::set<Addr> a2 = addresses_of(h2);
    bool seg1 = a1.erase(kSeg) > 0;
    bool seg2 = a2.erase(kSeg) > 0;
    if (seg1 != seg2 || a1.size() != a2.size()) return std::nullopt;

    std::vector<Addr> v1(a1.begin(), a1.end());
    std::vector<Addr> v2(a2.begin(), a2.end());
    std::sort(v2.begin(), v2.end());
    do {
        AddressMapping fa;
        fa[kSeg] = kSeg;
        for (std::size_t i = 0; i < v1.size(); ++i) fa[v1[i]] = v2[i];
        if (is_isomorphism(h1, h2, fa, opts)) {
            if (!seg1) fa.erase(kSeg); // keep the mapping total on addresses_of(h1)
            return fa;
        }
    } while (std::next_permutation(v2.begin(), v2.end()));
    return std::nullopt;
}

namespace {

// Appends the rows of h owned by address a (its selector expressions), with
// all addresses renamed through `label` (unlabeled addresses render as '?').
// Used for signature refinement of unreached addresses. Age-slot values are
// omitted so the sort order is invariant under token renaming; coarser groups
// only cost extra permutations in the exhaustive phase.
std::string row_signature(const Heap& h, Addr a, const std::map<Addr, Addr>& label,
                          const CanonOptions& opts) {
    std::ostringstream os;
    auto name = [&label](Addr x) -> std::string {
        if (x == kSeg) return "seg";
        auto it = label.find(x);
        return it == label.end() ? "?" : ("c" + std::to_string(it->second));
    };
    for (const auto& [pe, t] : h.pval)
        if (!pe.is_var() && pe.adr == a) os << "n" << pe.sel << "->" << name(t) << ";";
    for (const auto& [de, d] : h.dval) {
        if (de.is_var() || de.adr != a) continue;
        os << "d" << de.sel << "=";
        if (opts.is_age(de)) os << "@";
        else os << d;
        os << ";";
    }
    // Incoming edges from labeled rows refine the signature further.
    for (const auto& [pe, t] : h.pval) {
        if (t != a) continue;
        if (pe.is_var()) os << "v" << pe.var << "->.;";
        else if (label.count(pe.adr)) os << name(pe.adr) << ".n" << pe.sel << "->.;";
    }
    return os.str();
}

// Renumbers age-slot tokens to their first-occurrence rank in dval map order,
// matching the "@rank" form serialize prints for them.
Heap renumber_tokens(Heap h, const CanonOptions& opts) {
    std::map<DVal, DVal> rank;
    for (auto& [de, d] : h.dval) {
        if (!opts.is_age(de)) continue;
        auto [it, fresh] = rank.emplace(d, static_cast<DVal>(rank.size()));
        (void)fresh;
        d = it->second;
    }
    return h;
}

struct CanonResult {
    Heap heap;        // address-relabeled heap (tokens NOT yet renumbered)
    std::string text; // winning compared text: serialize(heap, opts) + extra
};

CanonResult canonicalize_impl(const Heap& h, const CanonOptions& opts,
                              const ExtraSignature& extra) {
    // Phase 1: deterministic traversal from pointer variables (in id order),
    // following selector edges in index order. Any isomorphism fixes the
    // variables, so discovery order is an isomorphism invariant.
    std::map<Addr, Addr> label; // address -> canonical id (1-based)
    std::vector<Addr> order;    // placed addresses in id order
    auto place = [&](Addr a) {
        if (a == kSeg || a == kDangling || label.count(a)) return;
        label[a] = static_cast<Addr>(label.size() + 1);
        order.push_back(a);
    };
    for (const auto& [pe, a] : h.pval)
        if (pe.is_var()) place(a);
    for (std::size_t i = 0; i < order.size(); ++i) {
        Addr a = order[i];
        for (const auto& [pe, t] : h.pval)
            if (!pe.is_var() && pe.adr == a) place(t);
    }

    // Phase 2: unreached addresses (rows not reachable from any variable),
    // signature-sorted, then exhaustively permuted within equal-signature
    // groups, taking the least combined text. Group sizes are tiny.
    std::vector<Addr> rest;
    for (Addr a : addresses_of(h))
        if (a != kSeg && a != kDangling && !label.count(a)) rest.push_back(a);
    std::stable_sort(rest.begin(), rest.end(), [&](Addr x, Addr y) {
        return row_signature(h, x, label, opts) < row_signature(h, y, label, opts);
    });
    std::vector<std::vector<Addr>> group_vals;
    for (std::size_t i = 0; i < rest.size();) {
        std::size_t j = i + 1;
        while (j < rest.size() && row_signature(h, rest[j], label, opts) ==
                                      row_signature(h, rest[i], label, opts))
            ++j;
        group_vals.emplace_back(rest.begin() + i, rest.begin() + j);
        i = j;
    }
    for (auto& g : group_vals) std::sort(g.begin(), g.end());

    std::optional<std::string> best_txt;
    Heap best;
    bool done = false; // the odometer runs at least once, also with no groups
    while (!done) {
        AddressMapping fa(label.begin(), label.end());
        fa[kSeg] = kSeg;
        fa[kDangling] = kDangling;
        Addr next_id = static_cast<Addr>(label.size() + 1);
        for (const auto& g : group_vals)
            for (Addr a : g) fa[a] = next_id++;
        Heap cand = apply_mapping(h, fa);
        std::string txt = serialize(cand, opts);
        if (extra) txt += extra(fa);
        if (!best_txt || txt < *best_txt) {
            best_txt = std::move(txt);
            best = std::move(cand);
        }
        // Advance odometer: next_permutation on the last group that has one.
        done = true;
        for (std::size_t gi = group_vals.size(); gi-- > 0;) {
            if (std::next_permutation(group_vals[gi].begin(), group_vals[gi].end())) {
                done = false;
                break;
            }
            // wrapped to sorted order; carry to previous group
        }
    }
    return CanonResult{std::move(best), std::move(*best_txt)};
}

} // namespace

Heap canonical_form(const Heap& h, const CanonOptions& opts) {
    Heap best = canonicalize_impl(h, opts, nullptr).heap;
    return opts.trivial() ? best : renumber_tokens(std::move(best), opts);
}

std::string canonical_digest(const Heap& h, const CanonOptions& opts,
                             const ExtraSignature& extra) {
    return canonicalize_impl(h, opts, extra).text;
}

std::string serialize(const Heap& h, const CanonOptions& opts) {
    std::ostringstream os;
    auto name = [](Addr a) -> std::string {
        if (a == kSeg) return "seg";
        if (a == kDangling) return "dangling";
        return "c" + std::to_string(a);
    };
    for (const auto& [pe, a] : h.pval) {
        if (pe.is_var()) os << "p" << pe.var;
        else os << name(pe.adr) << ".n" << pe.sel;
        os << "->" << name(a) << "\n";
    }
    std::map<DVal, DVal> rank; // age tokens by first occurrence, map order
    for (const auto& [de, d] : h.dval) {
        if (de.is_var()) os << "d" << de.var;
        else os << name(de.adr) << ".d" << de.sel;
        os << "=";
        if (opts.is_age(de)) {
            auto [it, fresh] = rank.emplace(d, static_cast<DVal>(rank.size()));
            (void)fresh;
            os << "@" << it->second;
        } else {
            os << d;
        }
        os << "\n";
    }
    return os.str();
}

} // namespace heaplab
