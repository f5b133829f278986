#include "heaplab/tracking.hpp"

#include <stdexcept>

namespace heaplab {

namespace {

using K = CoreCmd::Kind;

// Heap value of a pointer variable; kSeg when the row is absent.
Addr pv_of(const Heap& pre, std::uint32_t var) {
    auto v = pre.eval(PExp::variable(var));
    return v ? *v : kSeg;
}

bool real_cell(Addr a) { return a != kSeg && a != kDangling; }

} // namespace

void update_valid(std::set<PExp>& invalid, const CoreCmd& cmd, const Heap& pre,
                  const TrackCtx& ctx) {
    auto validate = [&invalid](const PExp& e) { invalid.erase(e); };
    auto invalidate = [&invalid](const PExp& e) { invalid.insert(e); };
    switch (cmd.kind) {
    case K::AssignPtr: // p := q tracks q's validity
        if (invalid.count(PExp::variable(cmd.b))) invalidate(PExp::variable(cmd.a));
        else validate(PExp::variable(cmd.a));
        break;
    case K::AssignPtrNull: // null is a definite value: validates
        validate(PExp::variable(cmd.a));
        break;
    case K::ReadSel: { // p := q.sel valid iff q and sel(heap(q)) both valid
        Addr a = pv_of(pre, cmd.b);
        bool ok = !invalid.count(PExp::variable(cmd.b)) && real_cell(a) &&
                  !invalid.count(PExp::selector(cmd.sel, a));
        if (ok) validate(PExp::variable(cmd.a));
        else invalidate(PExp::variable(cmd.a));
        break;
    }
    case K::WriteSel: { // the slot sel(heap(p)) tracks the source's validity
        Addr a = pv_of(pre, cmd.a);
        if (!real_cell(a)) break; // action disabled on SEG; defensive
        PExp slot = PExp::selector(cmd.sel, a);
        if (cmd.null_arg || !invalid.count(PExp::variable(cmd.b))) validate(slot);
        else invalidate(slot);
        break;
    }
    case K::Malloc: // validates the variable, never the cell's selectors
        validate(PExp::variable(cmd.a));
        break;
    case K::FreeCmd: { // invalid_of(a): everything valuing a + all selectors of a
        Addr a = pv_of(pre, cmd.a);
        if (!real_cell(a)) break; // invalid_of(SEG) is empty
        for (const auto& [pe, t] : pre.pval)
            if (t == a) invalidate(pe);
        for (int s = 0; s < ctx.n_selectors; ++s)
            invalidate(PExp::selector(s, a));
        break;
    }
    default:
        break;
    }
}

void update_sinvalid(std::set<PExp>& sp, std::set<DExp>& sd,
                     const std::set<PExp>& invalid_pre,
                     const std::set<PExp>& invalid_post, const CoreCmd& cmd,
                     const Heap& pre) {
    auto valid_pre = [&](std::uint32_t v) {
        return invalid_pre.find(PExp::variable(v)) == invalid_pre.end();
    };
    // Union cases come first; when one fires, no cleanup happens.
    switch (cmd.kind) {
    case K::ReadSel: // p := q.sel with q invalid
        if (!valid_pre(cmd.b)) {
            sp.insert(PExp::variable(cmd.a));
            return;
        }
        break;
    case K::AssignPtr: // p := q with q strongly invalid
        if (sp.count(PExp::variable(cmd.b))) {
            sp.insert(PExp::variable(cmd.a));
            return;
        }
        break;
    case K::WriteSel: // sel(heap(p)) := q with q strongly invalid
        if (!cmd.null_arg && sp.count(PExp::variable(cmd.b))) {
            Addr a = pv_of(pre, cmd.a);
            if (real_cell(a)) {
                sp.insert(PExp::selector(cmd.sel, a));
                return;
            }
        }
        break;
    case K::ReadData: // d := q.dsel with q invalid
        if (!valid_pre(cmd.b)) {
            sd.insert(DExp::variable(cmd.a));
            return;
        }
        break;
    case K::DataCopy:
    case K::DataInc: // d := e (+1) with e strongly invalid
        if (sd.count(DExp::variable(cmd.b))) {
            sd.insert(DExp::variable(cmd.a));
            return;
        }
        break;
    case K::WriteData: // dsel(heap(p)) := d with d strongly invalid
        if (sd.count(DExp::variable(cmd.b))) {
            Addr a = pv_of(pre, cmd.a);
            if (real_cell(a)) {
                sd.insert(DExp::selector(cmd.sel, a));
                return;
            }
        }
        break;
    default:
        break;
    }
    // All other cases: drop members that became valid. Data expressions are
    // never valid, so data strong-invalidity is sticky by construction.
    for (auto it = sp.begin(); it != sp.end();) {
        if (invalid_post.find(*it) == invalid_post.end()) it = sp.erase(it);
        else ++it;
    }
}

void update_owned(std::map<Addr, std::uint32_t>& owned,
                  const std::set<PExp>& invalid_pre, const VarTable& vars,
                  std::uint32_t thread, const CoreCmd& cmd, const Heap& pre,
                  Addr malloc_ret) {
    auto valid = [&](std::uint32_t v) {
        return invalid_pre.find(PExp::variable(v)) == invalid_pre.end();
    };
    const std::uint32_t bit = 1u << thread;
    auto remove = [&owned](Addr a, std::uint32_t mask) {
        auto it = owned.find(a);
        if (it == owned.end()) return;
        it->second &= ~mask;
        if (it->second == 0) owned.erase(it);
    };
    switch (cmd.kind) {
    case K::Malloc: // allocation through a local variable grants ownership
        if (!vars.pvar_is_shared(cmd.a) && real_cell(malloc_ret))
            owned[malloc_ret] |= bit;
        break;
    case K::FreeCmd: // free via a valid pointer revokes the actor's ownership
        if (valid(cmd.a)) remove(pv_of(pre, cmd.a), bit);
        break;
    case K::AssignPtr: // publication: valid pointer copied into a shared variable
        if (vars.pvar_is_shared(cmd.a) && valid(cmd.b)) remove(pv_of(pre, cmd.b), bit);
        break;
    case K::ReadSel: { // publication through the heap
        Addr src = pv_of(pre, cmd.b);
        if (!real_cell(src)) break;
        PExp slot = PExp::selector(cmd.sel, src);
        if (!valid(cmd.b) || invalid_pre.count(slot)) break;
        auto target = pre.eval(slot);
        if (!target) break;
        // the actor stores the read value in a shared variable
        if (vars.pvar_is_shared(cmd.a)) remove(*target, bit);
        // every thread that does not own the source cell loses the target
        auto sit = owned.find(src);
        std::uint32_t src_bits = sit == owned.end() ? 0u : sit->second;
        remove(*target, ~src_bits);
        break;
    }
    case K::AssertPtrEq: // equality compare against an invalid side compromises
        if (!cmd.neg && (!valid(cmd.a) || !valid(cmd.b)))
            remove(pv_of(pre, cmd.a), bit);
        break;
    default:
        break;
    }
}

void track_step(Tracking& tr, const VarTable& vars, const TrackCtx& ctx,
                std::uint32_t thread, const CoreCmd& cmd, const Heap& pre,
                Addr malloc_ret, bool malloc_fresh) {
    // A fresh allocation may recycle a dropped name: purge stale entries
    // first. Re-allocation (malloc_fresh = false) keeps them, as required.
    if (cmd.kind == K::Malloc && malloc_fresh) purge_address(tr, ctx, malloc_ret);

    const std::set<PExp> invalid_pre = tr.invalid;
    update_owned(tr.owned, invalid_pre, vars, thread, cmd, pre, malloc_ret);
    update_valid(tr.invalid, cmd, pre, ctx);
    update_sinvalid(tr.sinvalid_p, tr.sinvalid_d, invalid_pre, tr.invalid, cmd, pre);

    switch (cmd.kind) {
    case K::FreeCmd: {
        Addr a = pv_of(pre, cmd.a);
        if (real_cell(a)) {
            tr.freed.insert(a);
            for (int s = 0; s < ctx.n_dsels; ++s)
                tr.taint.insert(DExp::selector(s, a));
        }
        break;
    }
    case K::Malloc:
        tr.freed.erase(malloc_ret);
        break;
    case K::ReadData: {
        Addr a = pv_of(pre, cmd.b);
        DExp dst = DExp::variable(cmd.a);
        if (real_cell(a) && tr.taint.count(DExp::selector(cmd.sel, a)))
            tr.taint.insert(dst);
        else
            tr.taint.erase(dst);
        break;
    }
    case K::WriteData: {
        Addr a = pv_of(pre, cmd.a);
        if (!real_cell(a)) break;
        DExp slot = DExp::selector(cmd.sel, a);
        if (tr.taint.count(DExp::variable(cmd.b))) tr.taint.insert(slot);
        else tr.taint.erase(slot);
        break;
    }
    case K::DataCopy:
    case K::DataInc: {
        DExp dst = DExp::variable(cmd.a);
        if (tr.taint.count(DExp::variable(cmd.b))) tr.taint.insert(dst);
        else tr.taint.erase(dst);
        break;
    }
    case K::DataConst:
    case K::DataHavoc:
        tr.taint.erase(DExp::variable(cmd.a));
        break;
    default:
        break;
    }
}

bool raises_pr(const Tracking& tr, const CoreCmd& cmd) {
    auto inv = [&](std::uint32_t v) { return !tr.var_valid(v); };
    switch (cmd.kind) {
    case K::ReadSel:
    case K::ReadData:
        return inv(cmd.b); // dereference of an invalid pointer
    case K::WriteSel:
    case K::WriteData:
    case K::FreeCmd:
        return inv(cmd.a);
    case K::AssertPtrEq:
        return inv(cmd.a) || inv(cmd.b); // assertion containing an invalid pointer
    case K::AssertPtrNull:
        return inv(cmd.a);
    default:
        return false;
    }
}

bool raises_spr(const Tracking& tr, const CoreCmd& cmd) {
    auto inv = [&](std::uint32_t v) { return !tr.var_valid(v); };
    auto sip = [&](std::uint32_t v) { return tr.sinvalid_p.count(PExp::variable(v)) > 0; };
    auto sid = [&](std::uint32_t v) { return tr.sinvalid_d.count(DExp::variable(v)) > 0; };
    switch (cmd.kind) {
    case K::WriteSel:
    case K::WriteData:
        return inv(cmd.a) || sip(cmd.a); // (i) write via invalid, (iii) via sinvalid
    case K::FreeCmd:
        return inv(cmd.a); // (i)
    case K::ReadSel:
    case K::ReadData:
        return sip(cmd.b); // (iii) dereference via strongly invalid pointer
    case K::AssertPtrEq:
        return sip(cmd.a) || sip(cmd.b); // (ii)
    case K::AssertPtrNull:
        return sip(cmd.a);
    case K::AssertDataEq:
        return sid(cmd.a) || sid(cmd.b); // (ii) on data variables
    default:
        return false;
    }
}

bool violates_ownership(const Tracking& tr, const VarTable& vars,
                        std::uint32_t thread, const CoreCmd& cmd, const Heap& pre) {
    std::uint32_t pvar;
    switch (cmd.kind) {
    case K::WriteSel:
    case K::WriteData:
    case K::FreeCmd:
        pvar = cmd.a;
        break;
    default:
        return false;
    }
    Addr a = pv_of(pre, pvar);
    if (!real_cell(a)) return false;
    auto it = tr.owned.find(a);
    if (it == tr.owned.end()) return false;
    if (it->second & ~(1u << thread)) return true; // another thread owns the cell
    return vars.pvar_is_shared(pvar);              // own cell, but via a shared variable
}

std::set<PExp> owning_pointers(const Tracking& tr, const Heap& h) {
    std::set<PExp> out;
    auto owned = [&tr](Addr a) { return tr.owned.find(a) != tr.owned.end(); };
    for (const auto& [pe, a] : h.pval) {
        if (tr.invalid.count(pe)) continue;
        if (owned(a) || (!pe.is_var() && owned(pe.adr))) out.insert(pe);
    }
    return out;
}

std::set<PExp> coherent_closure(const std::set<PExp>& O, const Tracking& tr,
                                const Heap& h) {
    std::set<PExp> ownp = owning_pointers(tr, h);
    for (const PExp& e : O)
        if (!ownp.count(e))
            throw std::invalid_argument("coherent_closure: O not within owning pointers");
    std::set<PExp> out = O;
    bool changed = true;
    while (changed) {
        changed = false;
        for (const PExp& e : ownp) {
            if (out.count(e)) continue;
            auto te = h.eval(e);
            bool add = false;
            for (const PExp& m : out) {
                auto tm = h.eval(m);
                if (te && tm && *te == *tm) { add = true; break; } // same target
                if (!e.is_var() && !m.is_var() && e.adr == m.adr) { // same source
                    add = true;
                    break;
                }
            }
            if (add) {
                out.insert(e);
                changed = true;
            }
        }
    }
    return out;
}

void purge_address(Tracking& tr, const TrackCtx& ctx, Addr a) {
    if (!real_cell(a)) return;
    for (int s = 0; s < ctx.n_selectors; ++s) {
        tr.invalid.erase(PExp::selector(s, a));
        tr.sinvalid_p.erase(PExp::selector(s, a));
    }
    for (int s = 0; s < ctx.n_dsels; ++s) {
        tr.sinvalid_d.erase(DExp::selector(s, a));
        tr.taint.erase(DExp::selector(s, a));
    }
    tr.owned.erase(a);
    tr.freed.erase(a);
}

} // namespace heaplab
