#include "heaplab/cfg.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace heaplab {

std::uint32_t VarTable::owner_thread(std::uint32_t pvar) const {
    for (std::uint32_t t = 0; t < local_pvars.size(); ++t)
        if (pvar >= local_pvars[t].first && pvar < local_pvars[t].second) return t;
    throw std::logic_error("owner_thread on shared pointer variable");
}

std::int32_t Cfg::event_id(const std::string& name) const {
    for (std::size_t i = 0; i < events.size(); ++i)
        if (events[i] == name) return static_cast<std::int32_t>(i);
    return -1;
}

std::int32_t Cfg::pvar_id(const std::string& name) const {
    for (std::size_t i = 0; i < vars.pvars.size(); ++i)
        if (vars.pvars[i] == name) return static_cast<std::int32_t>(i);
    return -1;
}

std::int32_t Cfg::dvar_id(const std::string& name) const {
    for (std::size_t i = 0; i < vars.dvars.size(); ++i)
        if (vars.dvars[i] == name) return static_cast<std::int32_t>(i);
    return -1;
}

namespace {

constexpr std::size_t kMaxAtomicPaths = 64;

class Lowering {
  public:
    explicit Lowering(const Program& prog) : prog_(prog) {}

    Cfg run() {
        build_vars();
        lower_init();
        for (std::uint32_t t = 0; t < prog_.threads.size(); ++t) lower_thread(t);
        for (ThreadCfg& tc : cfg_.threads) {
            tc.out.assign(tc.n_locs, {});
            for (std::uint32_t e = 0; e < tc.edges.size(); ++e)
                tc.out[tc.edges[e].src].push_back(e);
        }
        return std::move(cfg_);
    }

  private:
    // ------------------------------------------------------ name tables ----

    void build_vars() {
        cfg_.k = prog_.k;
        cfg_.selectors = prog_.selectors;
        VarTable& v = cfg_.vars;
        for (const VarDecl& d : prog_.shared) {
            if (d.kind == VarKind::Ptr) v.pvars.push_back(d.name);
            else {
                v.dvars.push_back(d.name);
                v.dkinds.push_back(d.kind);
            }
        }
        v.shared_pvars = static_cast<std::uint32_t>(v.pvars.size());
        v.shared_dvars = static_cast<std::uint32_t>(v.dvars.size());
        for (const Thread& t : prog_.threads) {
            std::uint32_t pb = static_cast<std::uint32_t>(v.pvars.size());
            std::uint32_t db = static_cast<std::uint32_t>(v.dvars.size());
            for (const VarDecl& d : t.locals) {
                if (d.kind == VarKind::Ptr) v.pvars.push_back(t.name + "." + d.name);
                else {
                    v.dvars.push_back(t.name + "." + d.name);
                    v.dkinds.push_back(d.kind);
                }
            }
            // hidden temps for selector-operand cas/dwcas and emit lowering
            v.pvars.push_back(t.name + ".$tp");
            v.dvars.push_back(t.name + ".$td");
            v.dkinds.push_back(VarKind::Age);
            v.dvars.push_back(t.name + ".$te");
            v.dkinds.push_back(VarKind::Data);
            v.local_pvars.emplace_back(pb, static_cast<std::uint32_t>(v.pvars.size()));
            v.local_dvars.emplace_back(db, static_cast<std::uint32_t>(v.dvars.size()));
        }
    }

    std::uint32_t pvar(std::uint32_t thread, const std::string& name) const {
        const VarTable& v = cfg_.vars;
        for (std::uint32_t i = 0; i < v.shared_pvars; ++i)
            if (v.pvars[i] == name) return i;
        auto [b, e] = v.local_pvars[thread];
        std::string qualified = prog_.threads[thread].name + "." + name;
        for (std::uint32_t i = b; i < e; ++i)
            if (v.pvars[i] == qualified) return i;
        throw std::logic_error("unresolved pointer variable " + name);
    }

    std::uint32_t dvar(std::uint32_t thread, const std::string& name) const {
        const VarTable& v = cfg_.vars;
        for (std::uint32_t i = 0; i < v.shared_dvars; ++i)
            if (v.dvars[i] == name) return i;
        auto [b, e] = v.local_dvars[thread];
        std::string qualified = prog_.threads[thread].name + "." + name;
        for (std::uint32_t i = b; i < e; ++i)
            if (v.dvars[i] == qualified) return i;
        throw std::logic_error("unresolved data variable " + name);
    }

    bool is_pvar(std::uint32_t thread, const std::string& name) const {
        const VarTable& v = cfg_.vars;
        for (std::uint32_t i = 0; i < v.shared_pvars; ++i)
            if (v.pvars[i] == name) return true;
        auto [b, e] = v.local_pvars[thread];
        std::string qualified = prog_.threads[thread].name + "." + name;
        for (std::uint32_t i = b; i < e; ++i)
            if (v.pvars[i] == qualified) return true;
        return false;
    }

    std::uint32_t temp_ptr(std::uint32_t thread) const {
        return cfg_.vars.local_pvars[thread].second - 1;
    }
    std::uint32_t temp_age(std::uint32_t thread) const {
        return cfg_.vars.local_dvars[thread].second - 2;
    }
    std::uint32_t temp_emit(std::uint32_t thread) const {
        return cfg_.vars.local_dvars[thread].second - 1;
    }

    std::int32_t sel_id(const std::string& name) const {
        for (std::size_t i = 0; i < cfg_.selectors.size(); ++i)
            if (cfg_.selectors[i] == name) return static_cast<std::int32_t>(i);
        throw std::logic_error("unresolved selector " + name);
    }

    std::int32_t dsel_id(const std::string& name) const {
        if (name == kDataSel) return kDselData;
        if (name == kAgeSel) return kDselAge;
        throw std::logic_error("unresolved data selector " + name);
    }

    std::int32_t event_id(const std::string& name) {
        for (std::size_t i = 0; i < cfg_.events.size(); ++i)
            if (cfg_.events[i] == name) return static_cast<std::int32_t>(i);
        cfg_.events.push_back(name);
        return static_cast<std::int32_t>(cfg_.events.size() - 1);
    }

    // --------------------------------------------------- command helpers ---

    static CoreCmd cmd(CoreCmd::Kind k) {
        CoreCmd c;
        c.kind = k;
        return c;
    }

    // Core commands for one surface assignment. Returns one or two groups;
    // each group becomes its own edge (selector-to-selector copies take two
    // steps, like the two machine instructions they stand for).
    std::vector<std::vector<CoreCmd>> assign_cmds(std::uint32_t t, const Stmt& s) {
        const bool lsel = s.lhs.is_sel();
        std::vector<CoreCmd> g;
        if (s.rhs_malloc) {
            CoreCmd c = cmd(CoreCmd::Kind::Malloc);
            c.a = pvar(t, s.lhs.base);
            return {{c}};
        }
        if (s.rhs_null) {
            if (!lsel) {
                CoreCmd c = cmd(CoreCmd::Kind::AssignPtrNull);
                c.a = pvar(t, s.lhs.base);
                return {{c}};
            }
            CoreCmd c = cmd(CoreCmd::Kind::WriteSel);
            c.a = pvar(t, s.lhs.base);
            c.sel = sel_id(s.lhs.sel);
            c.null_arg = true;
            return {{c}};
        }
        if (s.rhs_nondet || s.rhs_const >= 0) {
            std::uint32_t target;
            bool via_temp = lsel;
            if (via_temp) target = s.lhs.sel == kAgeSel ? temp_age(t) : temp_emit(t);
            else target = dvar(t, s.lhs.base);
            CoreCmd c = cmd(s.rhs_nondet ? CoreCmd::Kind::DataHavoc : CoreCmd::Kind::DataConst);
            c.a = target;
            c.cval = s.rhs_const >= 0 ? static_cast<std::uint32_t>(s.rhs_const) : 0;
            g.push_back(c);
            if (via_temp) {
                CoreCmd w = cmd(CoreCmd::Kind::WriteData);
                w.a = pvar(t, s.lhs.base);
                w.sel = dsel_id(s.lhs.sel);
                w.b = target;
                g.push_back(w);
            }
            return {g};
        }
        // variable or selector rhs
        if (slot_is_ptr(t, s.lhs) && slot_is_ptr(t, s.rhs)) {
            const bool rsel = s.rhs.is_sel();
            if (!lsel && !rsel) {
                CoreCmd c = cmd(CoreCmd::Kind::AssignPtr);
                c.a = pvar(t, s.lhs.base);
                c.b = pvar(t, s.rhs.base);
                return {{c}};
            }
            if (!lsel && rsel) {
                CoreCmd c = cmd(CoreCmd::Kind::ReadSel);
                c.a = pvar(t, s.lhs.base);
                c.b = pvar(t, s.rhs.base);
                c.sel = sel_id(s.rhs.sel);
                return {{c}};
            }
            if (lsel && !rsel) {
                CoreCmd c = cmd(CoreCmd::Kind::WriteSel);
                c.a = pvar(t, s.lhs.base);
                c.sel = sel_id(s.lhs.sel);
                c.b = pvar(t, s.rhs.base);
                return {{c}};
            }
            CoreCmd r = cmd(CoreCmd::Kind::ReadSel);
            r.a = temp_ptr(t);
            r.b = pvar(t, s.rhs.base);
            r.sel = sel_id(s.rhs.sel);
            CoreCmd w = cmd(CoreCmd::Kind::WriteSel);
            w.a = pvar(t, s.lhs.base);
            w.sel = sel_id(s.lhs.sel);
            w.b = temp_ptr(t);
            return {{r}, {w}};
        }
        // data/age statement
        const bool rsel = s.rhs.is_sel();
        if (!lsel && !rsel) {
            CoreCmd c = cmd(s.rhs_inc ? CoreCmd::Kind::DataInc : CoreCmd::Kind::DataCopy);
            c.a = dvar(t, s.lhs.base);
            c.b = dvar(t, s.rhs.base);
            return {{c}};
        }
        if (!lsel && rsel) {
            CoreCmd c = cmd(CoreCmd::Kind::ReadData);
            c.a = dvar(t, s.lhs.base);
            c.b = pvar(t, s.rhs.base);
            c.sel = dsel_id(s.rhs.sel);
            return {{c}};
        }
        if (lsel && !rsel) {
            CoreCmd c = cmd(CoreCmd::Kind::WriteData);
            c.a = pvar(t, s.lhs.base);
            c.sel = dsel_id(s.lhs.sel);
            c.b = dvar(t, s.rhs.base);
            return {{c}};
        }
        std::uint32_t tmp = s.rhs.sel == kAgeSel ? temp_age(t) : temp_emit(t);
        CoreCmd r = cmd(CoreCmd::Kind::ReadData);
        r.a = tmp;
        r.b = pvar(t, s.rhs.base);
        r.sel = dsel_id(s.rhs.sel);
        CoreCmd w = cmd(CoreCmd::Kind::WriteData);
        w.a = pvar(t, s.lhs.base);
        w.sel = dsel_id(s.lhs.sel);
        w.b = tmp;
        return {{r}, {w}};
    }

    std::int32_t sel_id_opt(const std::string& name) const {
        for (std::size_t i = 0; i < cfg_.selectors.size(); ++i)
            if (cfg_.selectors[i] == name) return static_cast<std::int32_t>(i);
        return -1;
    }

    bool slot_is_ptr(std::uint32_t t, const VarRef& r) const {
        if (!r.is_sel()) return is_pvar(t, r.base);
        return sel_id_opt(r.sel) >= 0;
    }

    // Success command sequence of cas/dwcas, plus the failure sequences.
    struct CasLowering {
        std::vector<CoreCmd> success;
        std::vector<std::vector<CoreCmd>> failures;
    };

    CasLowering lower_cas(std::uint32_t t, const CondExpr& c) {
        CasLowering out;
        std::vector<CoreCmd> prefix; // shared reads for selector destinations
        std::uint32_t dst;
        bool dst_is_sel = c.dst.is_sel();
        std::uint32_t dst_base = pvar(t, c.dst.base);
        std::int32_t dsel = dst_is_sel ? sel_id(c.dst.sel) : 0;
        if (dst_is_sel) {
            CoreCmd r = cmd(CoreCmd::Kind::ReadSel);
            r.a = temp_ptr(t);
            r.b = dst_base;
            r.sel = dsel;
            prefix.push_back(r);
            dst = temp_ptr(t);
        } else {
            dst = dst_base;
        }
        CoreCmd eq = cmd(CoreCmd::Kind::AssertPtrEq);
        eq.a = dst;
        eq.b = pvar(t, c.cmp);
        CoreCmd ne = eq;
        ne.neg = true;

        out.success = prefix;
        out.success.push_back(eq);
        out.failures.push_back(prefix);
        out.failures.back().push_back(ne);

        if (c.kind == CondExpr::Kind::Dwcas) {
            bool age_is_sel = c.dst_age.is_sel();
            std::uint32_t agev;
            std::vector<CoreCmd> age_prefix;
            if (age_is_sel) {
                CoreCmd r = cmd(CoreCmd::Kind::ReadData);
                r.a = temp_age(t);
                r.b = pvar(t, c.dst_age.base);
                r.sel = dsel_id(c.dst_age.sel);
                age_prefix.push_back(r);
                agev = temp_age(t);
            } else {
                agev = dvar(t, c.dst_age.base);
            }
            CoreCmd aeq = cmd(CoreCmd::Kind::AssertDataEq);
            aeq.a = agev;
            aeq.b = dvar(t, c.cmp_age);
            CoreCmd ane = aeq;
            ane.neg = true;

            for (const CoreCmd& x : age_prefix) out.success.push_back(x);
            out.success.push_back(aeq);
            // second failure branch: pointer equal, age differs
            std::vector<CoreCmd> f2 = prefix;
            f2.push_back(eq);
            for (const CoreCmd& x : age_prefix) f2.push_back(x);
            f2.push_back(ane);
            out.failures.push_back(std::move(f2));
        }

        // success effects: dst := src, then the age bump
        if (dst_is_sel) {
            CoreCmd w = cmd(CoreCmd::Kind::WriteSel);
            w.a = dst_base;
            w.sel = dsel;
            w.b = pvar(t, c.src);
            out.success.push_back(w);
        } else {
            CoreCmd w = cmd(CoreCmd::Kind::AssignPtr);
            w.a = dst;
            w.b = pvar(t, c.src);
            out.success.push_back(w);
        }
        if (c.kind == CondExpr::Kind::Dwcas) {
            bool age_is_sel = c.dst_age.is_sel();
            std::uint32_t agev = age_is_sel ? temp_age(t) : dvar(t, c.dst_age.base);
            CoreCmd inc = cmd(CoreCmd::Kind::DataInc);
            inc.a = agev;
            inc.b = agev;
            out.success.push_back(inc);
            if (age_is_sel) {
                CoreCmd w = cmd(CoreCmd::Kind::WriteData);
                w.a = pvar(t, c.dst_age.base);
                w.sel = dsel_id(c.dst_age.sel);
                w.b = agev;
                out.success.push_back(w);
            }
        }
        return out;
    }

    // ------------------------------------------------------ init block -----

    void lower_init() {
        for (const Stmt& s : prog_.init) {
            if (s.kind == Stmt::Kind::Skip) continue;
            // init statements resolve against shared variables only (t = 0 is
            // irrelevant: locals never match shared names)
            for (auto& group : assign_cmds(0, s))
                for (CoreCmd& c : group) cfg_.init.push_back(c);
        }
    }

    // --------------------------------------------------------- threads -----

    struct Ctx {
        std::uint32_t break_to = kNone;
        std::uint32_t return_to = kNone; // forever head (restart) or thread sink
        bool in_atomic = false;
    };
    static constexpr std::uint32_t kNone = 0xFFFFFFFFu;

    void lower_thread(std::uint32_t t) {
        ThreadCfg tc;
        tc.name = prog_.threads[t].name;
        cur_ = &tc;
        thread_ = t;
        n_locs_ = 0;
        tc.entry = new_loc();
        std::uint32_t sink = new_loc();
        Ctx ctx;
        ctx.return_to = sink;
        lower_seq(prog_.threads[t].body, tc.entry, sink, ctx);
        tc.n_locs = n_locs_;
        cfg_.threads.push_back(std::move(tc));
        cur_ = nullptr;
    }

    std::uint32_t new_loc() { return n_locs_++; }

    void add_edge(std::uint32_t src, std::uint32_t dst, std::vector<CoreCmd> cmds,
                  bool restart = false, int label = -1) {
        Edge e;
        e.src = src;
        e.dst = dst;
        e.cmds = std::move(cmds);
        e.restart = restart;
        e.label = label;
        cur_->edges.push_back(std::move(e));
    }

    void lower_seq(const std::vector<Stmt>& seq, std::uint32_t entry, std::uint32_t exit,
                   Ctx ctx) {
        std::uint32_t at = entry;
        for (std::size_t i = 0; i < seq.size(); ++i) {
            std::uint32_t next = (i + 1 == seq.size()) ? exit : new_loc();
            lower_stmt(seq[i], at, next, ctx);
            at = next;
        }
        if (seq.empty()) add_edge(entry, exit, {});
    }

    void lower_stmt(const Stmt& s, std::uint32_t entry, std::uint32_t exit, Ctx ctx) {
        switch (s.kind) {
        case Stmt::Kind::Assign: {
            auto groups = assign_cmds(thread_, s);
            std::uint32_t at = entry;
            for (std::size_t i = 0; i < groups.size(); ++i) {
                std::uint32_t next = (i + 1 == groups.size()) ? exit : new_loc();
                add_edge(at, next, std::move(groups[i]), false, i == 0 ? s.label : -1);
                at = next;
            }
            break;
        }
        case Stmt::Kind::Free: {
            CoreCmd c = cmd(CoreCmd::Kind::FreeCmd);
            c.a = pvar(thread_, s.arg);
            add_edge(entry, exit, {c}, false, s.label);
            break;
        }
        case Stmt::Kind::EmitStmt:
            add_edge(entry, exit, emit_cmds(s), false, s.label);
            break;
        case Stmt::Kind::CasStmt: {
            CasLowering low = lower_cas(thread_, s.cond);
            add_edge(entry, exit, std::move(low.success), false, s.label);
            for (auto& f : low.failures) add_edge(entry, exit, std::move(f));
            break;
        }
        case Stmt::Kind::Return:
            add_edge(entry, ctx.return_to, {}, false, s.label);
            break;
        case Stmt::Kind::Break:
            add_edge(entry, ctx.break_to, {}, false, s.label);
            break;
        case Stmt::Kind::Skip:
            add_edge(entry, exit, {}, false, s.label);
            break;
        case Stmt::Kind::If: {
            lower_branch(s.cond, s.body, s.els, entry, exit, ctx, s.label);
            break;
        }
        case Stmt::Kind::While: {
            // entry is the loop head: cond edges out, body returns to it
            Ctx c2 = ctx;
            c2.break_to = exit;
            if (s.cond.kind == CondExpr::Kind::True) {
                std::uint32_t body = new_loc();
                add_edge(entry, body, {}, false, s.label);
                lower_seq(s.body, body, entry, c2);
            } else if (s.cond.kind == CondExpr::Kind::Nondet) {
                std::uint32_t body = new_loc();
                add_edge(entry, body, {}, false, s.label);
                add_edge(entry, exit, {});
                lower_seq(s.body, body, entry, c2);
            } else if (s.cond.kind == CondExpr::Kind::Cas ||
                       s.cond.kind == CondExpr::Kind::Dwcas) {
                CasLowering low = lower_cas(thread_, s.cond);
                std::uint32_t body = new_loc();
                add_edge(entry, body, std::move(low.success), false, s.label);
                for (auto& f : low.failures) add_edge(entry, exit, std::move(f));
                lower_seq(s.body, body, entry, c2);
            } else {
                auto [yes, no] = assert_pair(s.cond);
                std::uint32_t body = new_loc();
                add_edge(entry, body, {yes}, false, s.label);
                add_edge(entry, exit, {no});
                lower_seq(s.body, body, entry, c2);
            }
            break;
        }
        case Stmt::Kind::Atomic: {
            lower_atomic(s, entry, exit, ctx);
            break;
        }
        case Stmt::Kind::Choose:
            for (const auto& br : s.branches) lower_seq(br, entry, exit, ctx);
            break;
        case Stmt::Kind::Forever: {
            // entry -> (locals reset) -> head; body loops back to entry
            std::uint32_t head = new_loc();
            add_edge(entry, head, reset_cmds(), true, s.label);
            Ctx c2 = ctx;
            c2.return_to = entry;
            c2.break_to = kNone;
            lower_seq(s.body, head, entry, c2);
            break;
        }
        case Stmt::Kind::BlockStmt:
            lower_seq(s.body, entry, exit, ctx);
            break;
        }
    }

    void lower_branch(const CondExpr& cond, const std::vector<Stmt>& then_body,
                      const std::vector<Stmt>& else_body, std::uint32_t entry,
                      std::uint32_t exit, Ctx ctx, int label) {
        auto lower_arm = [&](const std::vector<Stmt>& arm, std::uint32_t from) {
            if (arm.empty()) add_edge(from, exit, {});
            else lower_seq(arm, from, exit, ctx);
        };
        switch (cond.kind) {
        case CondExpr::Kind::True: {
            std::uint32_t then_entry = new_loc();
            add_edge(entry, then_entry, {}, false, label);
            lower_arm(then_body, then_entry);
            break;
        }
        case CondExpr::Kind::Nondet: {
            std::uint32_t a = new_loc(), b = new_loc();
            add_edge(entry, a, {}, false, label);
            add_edge(entry, b, {});
            lower_arm(then_body, a);
            lower_arm(else_body, b);
            break;
        }
        case CondExpr::Kind::Cas:
        case CondExpr::Kind::Dwcas: {
            CasLowering low = lower_cas(thread_, cond);
            std::uint32_t a = new_loc(), b = new_loc();
            add_edge(entry, a, std::move(low.success), false, label);
            for (auto& f : low.failures) add_edge(entry, b, std::move(f));
            lower_arm(then_body, a);
            lower_arm(else_body, b);
            break;
        }
        default: {
            auto [yes, no] = assert_pair(cond);
            std::uint32_t a = new_loc(), b = new_loc();
            add_edge(entry, a, {yes}, false, label);
            add_edge(entry, b, {no});
            lower_arm(then_body, a);
            lower_arm(else_body, b);
            break;
        }
        }
    }

    std::pair<CoreCmd, CoreCmd> assert_pair(const CondExpr& c) {
        CoreCmd yes;
        if (c.kind == CondExpr::Kind::PtrNull) {
            yes = cmd(CoreCmd::Kind::AssertPtrNull);
            yes.a = pvar(thread_, c.lhs);
        } else {
            // PtrEq is the parser's placeholder for both pointer and data
            // comparisons; resolve by operand kind.
            if (is_pvar(thread_, c.lhs)) {
                yes = cmd(CoreCmd::Kind::AssertPtrEq);
                yes.a = pvar(thread_, c.lhs);
                yes.b = pvar(thread_, c.rhs);
            } else {
                yes = cmd(CoreCmd::Kind::AssertDataEq);
                yes.a = dvar(thread_, c.lhs);
                yes.b = dvar(thread_, c.rhs);
            }
        }
        yes.neg = c.neg;
        CoreCmd no = yes;
        no.neg = !no.neg;
        return {yes, no};
    }

    std::vector<CoreCmd> emit_cmds(const Stmt& s) {
        std::vector<CoreCmd> out;
        CoreCmd e = cmd(CoreCmd::Kind::Emit);
        e.event = event_id(s.event);
        if (!s.eargs.empty()) {
            const VarRef& a = s.eargs[0];
            if (a.is_sel()) {
                CoreCmd r = cmd(CoreCmd::Kind::ReadData);
                r.a = temp_emit(thread_);
                r.b = pvar(thread_, a.base);
                r.sel = dsel_id(a.sel);
                out.push_back(r);
                e.a = temp_emit(thread_);
            } else {
                e.a = dvar(thread_, a.base);
            }
            e.has_arg = true;
        }
        out.push_back(e);
        return out;
    }

    std::vector<CoreCmd> reset_cmds() {
        std::vector<CoreCmd> out;
        const VarTable& v = cfg_.vars;
        auto [pb, pe] = v.local_pvars[thread_];
        for (std::uint32_t i = pb; i < pe; ++i) {
            CoreCmd c = cmd(CoreCmd::Kind::AssignPtrNull);
            c.a = i;
            out.push_back(c);
        }
        auto [db, de] = v.local_dvars[thread_];
        for (std::uint32_t i = db; i < de; ++i) {
            CoreCmd c = cmd(CoreCmd::Kind::DataConst);
            c.a = i;
            c.cval = 0;
            out.push_back(c);
        }
        return out;
    }

    // Atomic blocks: one compound edge per path through the block. Paths may
    // exit normally (to `exit`) or via return (to ctx.return_to).
    void lower_atomic(const Stmt& s, std::uint32_t entry, std::uint32_t exit, Ctx ctx) {
        struct Path {
            std::vector<CoreCmd> cmds;
            bool returned = false;
        };
        using Done = std::function<void(Path)>;
        // Type-erased continuation-passing walk: a generic-lambda version
        // would instantiate a fresh closure type per nesting level.
        std::function<void(const std::vector<Stmt>&, std::size_t, Path, const Done&)> explode =
            [&](const std::vector<Stmt>& seq, std::size_t idx, Path cur, const Done& done) {
                if (cur.returned || idx == seq.size()) {
                    done(std::move(cur));
                    return;
                }
                const Stmt& st = seq[idx];
                auto continue_with = [&](Path p) { explode(seq, idx + 1, std::move(p), done); };
                Done resume = [&](Path q) { explode(seq, idx + 1, std::move(q), done); };
                switch (st.kind) {
                case Stmt::Kind::Assign: {
                    for (auto& g : assign_cmds(thread_, st))
                        for (CoreCmd& c : g) cur.cmds.push_back(c);
                    continue_with(std::move(cur));
                    break;
                }
                case Stmt::Kind::Free: {
                    CoreCmd c = cmd(CoreCmd::Kind::FreeCmd);
                    c.a = pvar(thread_, st.arg);
                    cur.cmds.push_back(c);
                    continue_with(std::move(cur));
                    break;
                }
                case Stmt::Kind::EmitStmt: {
                    for (CoreCmd& c : emit_cmds(st)) cur.cmds.push_back(c);
                    continue_with(std::move(cur));
                    break;
                }
                case Stmt::Kind::CasStmt: {
                    CasLowering low = lower_cas(thread_, st.cond);
                    Path a = cur;
                    for (CoreCmd& c : low.success) a.cmds.push_back(c);
                    continue_with(std::move(a));
                    for (auto& f : low.failures) {
                        Path b = cur;
                        for (CoreCmd& c : f) b.cmds.push_back(c);
                        continue_with(std::move(b));
                    }
                    break;
                }
                case Stmt::Kind::Return: {
                    cur.returned = true;
                    done(std::move(cur));
                    break;
                }
                case Stmt::Kind::Skip:
                    continue_with(std::move(cur));
                    break;
                case Stmt::Kind::If: {
                    auto arm = [&](const std::vector<CoreCmd>& guard,
                                   const std::vector<Stmt>& body) {
                        Path p = cur;
                        for (const CoreCmd& c : guard) p.cmds.push_back(c);
                        explode(body, 0, std::move(p), resume);
                    };
                    switch (st.cond.kind) {
                    case CondExpr::Kind::True: arm({}, st.body); break;
                    case CondExpr::Kind::Nondet:
                        arm({}, st.body);
                        arm({}, st.els);
                        break;
                    case CondExpr::Kind::Cas:
                    case CondExpr::Kind::Dwcas: {
                        CasLowering low = lower_cas(thread_, st.cond);
                        arm(low.success, st.body);
                        for (auto& f : low.failures) arm(f, st.els);
                        break;
                    }
                    default: {
                        auto [yes, no] = assert_pair(st.cond);
                        arm({yes}, st.body);
                        arm({no}, st.els);
                        break;
                    }
                    }
                    break;
                }
                case Stmt::Kind::Choose: {
                    for (const auto& br : st.branches) explode(br, 0, cur, resume);
                    break;
                }
                case Stmt::Kind::BlockStmt: {
                    explode(st.body, 0, std::move(cur), resume);
                    break;
                }
                default:
                    throw std::runtime_error("unsupported statement inside atomic block");
                }
            };
        std::vector<Path> finished;
        explode(s.body, 0, Path{}, [&](Path p) {
            finished.push_back(std::move(p));
            if (finished.size() > kMaxAtomicPaths)
                throw std::runtime_error("atomic block has too many paths");
        });
        for (Path& p : finished)
            add_edge(entry, p.returned ? ctx.return_to : exit, std::move(p.cmds), false, s.label);
    }

    const Program& prog_;
    Cfg cfg_;
    ThreadCfg* cur_ = nullptr;
    std::uint32_t thread_ = 0;
    std::uint32_t n_locs_ = 0;
};

} // namespace

Cfg desugar(const Program& prog) { return Lowering(prog).run(); }

namespace {

std::string cmd_str(const Cfg& cfg, const CoreCmd& c) {
    const auto& P = cfg.vars.pvars;
    const auto& D = cfg.vars.dvars;
    std::ostringstream os;
    using K = CoreCmd::Kind;
    switch (c.kind) {
    case K::AssertPtrEq: os << "assert " << P[c.a] << (c.neg ? " != " : " == ") << P[c.b]; break;
    case K::AssertPtrNull: os << "assert " << P[c.a] << (c.neg ? " != " : " == ") << "null"; break;
    case K::AssertDataEq: os << "assert " << D[c.a] << (c.neg ? " != " : " == ") << D[c.b]; break;
    case K::AssignPtr: os << P[c.a] << " := " << P[c.b]; break;
    case K::AssignPtrNull: os << P[c.a] << " := null"; break;
    case K::ReadSel: os << P[c.a] << " := " << P[c.b] << "." << cfg.selectors[c.sel]; break;
    case K::WriteSel:
        os << P[c.a] << "." << cfg.selectors[c.sel] << " := " << (c.null_arg ? "null" : P[c.b]);
        break;
    case K::ReadData:
        os << D[c.a] << " := " << P[c.b] << "."
           << (c.sel == kDselData ? "data" : c.sel == kDselAge ? "age" : "tag");
        break;
    case K::WriteData:
        os << P[c.a] << "." << (c.sel == kDselData ? "data" : c.sel == kDselAge ? "age" : "tag")
           << " := " << D[c.b];
        break;
    case K::DataConst: os << D[c.a] << " := " << c.cval; break;
    case K::DataCopy: os << D[c.a] << " := " << D[c.b]; break;
    case K::DataInc: os << D[c.a] << " := " << D[c.b] << " + 1"; break;
    case K::DataHavoc: os << D[c.a] << " := *"; break;
    case K::Malloc: os << P[c.a] << " := malloc"; break;
    case K::FreeCmd: os << "free(" << P[c.a] << ")"; break;
    case K::Emit:
        os << "emit " << cfg.events[c.event];
        if (c.has_arg) os << "(" << D[c.a] << ")";
        break;
    }
    return os.str();
}

} // namespace

std::string dump_cfg(const Cfg& cfg) {
    std::ostringstream os;
    if (!cfg.init.empty()) {
        os << "init:";
        for (const CoreCmd& c : cfg.init) os << " [" << cmd_str(cfg, c) << "]";
        os << "\n";
    }
    for (const ThreadCfg& t : cfg.threads) {
        os << "thread " << t.name << " entry=" << t.entry << " locs=" << t.n_locs << "\n";
        for (const Edge& e : t.edges) {
            os << "  " << e.src << " -> " << e.dst << ":";
            for (const CoreCmd& c : e.cmds) os << " [" << cmd_str(cfg, c) << "]";
            if (e.cmds.empty()) os << " [skip]";
            if (e.restart) os << " (restart)";
            if (e.label >= 0) os << " @" << e.label;
            os << "\n";
        }
    }
    return os.str();
}

std::vector<std::string> verify_complement_closure(const Cfg& cfg) {
    std::vector<std::string> diags;
    // Key of a command with the negation flag split out.
    auto key = [](const CoreCmd& c) {
        std::ostringstream os;
        os << static_cast<int>(c.kind) << ":" << c.a << ":" << c.b << ":" << c.sel << ":"
           << c.cval << ":" << c.event << ":" << c.has_arg << ":" << c.null_arg;
        return os.str();
    };
    auto is_assert = [](const CoreCmd& c) {
        return c.kind == CoreCmd::Kind::AssertPtrEq || c.kind == CoreCmd::Kind::AssertPtrNull ||
               c.kind == CoreCmd::Kind::AssertDataEq;
    };
    // Walk the prefix tree of the outgoing command sequences: at every node,
    // an assert child requires its complement among the siblings.
    auto check_node = [&](auto&& self, const std::vector<const std::vector<CoreCmd>*>& seqs,
                          std::size_t depth, const std::string& tname,
                          std::uint32_t loc) -> void {
        std::map<std::string, std::vector<const std::vector<CoreCmd>*>> groups;
        std::map<std::string, std::pair<bool, bool>> assert_polarity; // key -> (pos, neg)
        for (const auto* s : seqs) {
            if (depth >= s->size()) continue;
            const CoreCmd& c = (*s)[depth];
            groups[key(c) + ":" + (c.neg ? "1" : "0")].push_back(s);
            if (is_assert(c)) {
                auto& p = assert_polarity[key(c)];
                (c.neg ? p.second : p.first) = true;
            }
        }
        for (const auto& [k, pol] : assert_polarity) {
            if (pol.first != pol.second)
                diags.push_back("thread " + tname + " location " + std::to_string(loc) +
                                ": assert lacks its complement (step " + std::to_string(depth) +
                                ")");
        }
        for (const auto& [k, members] : groups)
            if (members.size() >= 1) self(self, members, depth + 1, tname, loc);
    };
    for (const ThreadCfg& t : cfg.threads) {
        for (std::uint32_t loc = 0; loc < t.n_locs; ++loc) {
            std::vector<const std::vector<CoreCmd>*> seqs;
            for (std::uint32_t ei : t.out[loc]) seqs.push_back(&t.edges[ei].cmds);
            check_node(check_node, seqs, 0, t.name, loc);
        }
    }
    return diags;
}

} // namespace heaplab
