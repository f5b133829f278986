#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "heaplab/tracking.hpp"

using namespace heaplab;

namespace {

// Variable layout used throughout: Top shared; top,node local to thread 0;
// x,y local to thread 1. V shared data; d,e thread 0; f thread 1.
enum : std::uint32_t { TOP = 0, T0_TOP = 1, T0_NODE = 2, T1_X = 3, T1_Y = 4 };
enum : std::uint32_t { DV = 0, T0_D = 1, T0_E = 2, T1_F = 3 };

VarTable make_vars() {
    VarTable vt;
    vt.pvars = {"Top", "t0.top", "t0.node", "t1.x", "t1.y"};
    vt.shared_pvars = 1;
    vt.local_pvars = {{1, 3}, {3, 5}};
    vt.dvars = {"V", "t0.d", "t0.e", "t1.f"};
    vt.dkinds = {VarKind::Data, VarKind::Data, VarKind::Data, VarKind::Data};
    vt.shared_dvars = 1;
    vt.local_dvars = {{1, 3}, {3, 4}};
    return vt;
}

CoreCmd cc(CoreCmd::Kind k) {
    CoreCmd c;
    c.kind = k;
    return c;
}
CoreCmd assign(std::uint32_t p, std::uint32_t q) {
    CoreCmd c = cc(CoreCmd::Kind::AssignPtr);
    c.a = p;
    c.b = q;
    return c;
}
CoreCmd assign_null(std::uint32_t p) {
    CoreCmd c = cc(CoreCmd::Kind::AssignPtrNull);
    c.a = p;
    return c;
}
CoreCmd readsel(std::uint32_t p, std::uint32_t q) {
    CoreCmd c = cc(CoreCmd::Kind::ReadSel);
    c.a = p;
    c.b = q;
    c.sel = 0;
    return c;
}
CoreCmd writesel(std::uint32_t p, std::uint32_t q) {
    CoreCmd c = cc(CoreCmd::Kind::WriteSel);
    c.a = p;
    c.b = q;
    c.sel = 0;
    return c;
}
CoreCmd writesel_null(std::uint32_t p) {
    CoreCmd c = cc(CoreCmd::Kind::WriteSel);
    c.a = p;
    c.sel = 0;
    c.null_arg = true;
    return c;
}
CoreCmd freecmd(std::uint32_t p) {
    CoreCmd c = cc(CoreCmd::Kind::FreeCmd);
    c.a = p;
    return c;
}
CoreCmd mallo(std::uint32_t p) {
    CoreCmd c = cc(CoreCmd::Kind::Malloc);
    c.a = p;
    return c;
}
CoreCmd aeq(std::uint32_t p, std::uint32_t q, bool neg = false) {
    CoreCmd c = cc(CoreCmd::Kind::AssertPtrEq);
    c.a = p;
    c.b = q;
    c.neg = neg;
    return c;
}
CoreCmd readdata(std::uint32_t d, std::uint32_t q) {
    CoreCmd c = cc(CoreCmd::Kind::ReadData);
    c.a = d;
    c.b = q;
    c.sel = kDselData;
    return c;
}
CoreCmd writedata(std::uint32_t q, std::uint32_t d) {
    CoreCmd c = cc(CoreCmd::Kind::WriteData);
    c.a = q;
    c.b = d;
    c.sel = kDselData;
    return c;
}
CoreCmd dcopy(std::uint32_t d, std::uint32_t e) {
    CoreCmd c = cc(CoreCmd::Kind::DataCopy);
    c.a = d;
    c.b = e;
    return c;
}
CoreCmd dconst(std::uint32_t d, std::uint32_t v) {
    CoreCmd c = cc(CoreCmd::Kind::DataConst);
    c.a = d;
    c.cval = v;
    return c;
}

// Minimal executor: applies the tracking transfer, then the heap effect of
// the command. Only covers what these tests need; the full interpreter lives
// in the semantics layer.
struct World {
    VarTable vt = make_vars();
    TrackCtx ctx{1, 3};
    Heap h;
    Tracking tr;

    World() {
        for (std::uint32_t v = 0; v < vt.pvars.size(); ++v)
            h.pval[PExp::variable(v)] = kSeg;
        for (std::uint32_t v = 0; v < vt.dvars.size(); ++v)
            h.dval[DExp::variable(v)] = 0;
    }

    Addr pv(std::uint32_t v) const { return h.pval.at(PExp::variable(v)); }

    void exec(std::uint32_t t, const CoreCmd& c, Addr ret = kSeg, bool fresh = true) {
        track_step(tr, vt, ctx, t, c, h, ret, fresh);
        switch (c.kind) {
        case CoreCmd::Kind::AssignPtr:
            h.pval[PExp::variable(c.a)] = pv(c.b);
            break;
        case CoreCmd::Kind::AssignPtrNull:
            h.pval[PExp::variable(c.a)] = kSeg;
            break;
        case CoreCmd::Kind::ReadSel:
            h.pval[PExp::variable(c.a)] = h.pval.at(PExp::selector(c.sel, pv(c.b)));
            break;
        case CoreCmd::Kind::WriteSel:
            h.pval[PExp::selector(c.sel, pv(c.a))] = c.null_arg ? kSeg : pv(c.b);
            break;
        case CoreCmd::Kind::Malloc:
            h.pval[PExp::variable(c.a)] = ret;
            if (fresh) {
                h.pval[PExp::selector(0, ret)] = kSeg;
                for (int s = 0; s < ctx.n_dsels; ++s)
                    h.dval[DExp::selector(s, ret)] = 0;
            }
            break;
        case CoreCmd::Kind::FreeCmd:
            break; // rows persist
        case CoreCmd::Kind::ReadData:
            h.dval[DExp::variable(c.a)] = h.dval.at(DExp::selector(c.sel, pv(c.b)));
            break;
        case CoreCmd::Kind::WriteData:
            h.dval[DExp::selector(c.sel, pv(c.a))] = h.dval.at(DExp::variable(c.b));
            break;
        case CoreCmd::Kind::DataCopy:
            h.dval[DExp::variable(c.a)] = h.dval.at(DExp::variable(c.b));
            break;
        case CoreCmd::Kind::DataConst:
            h.dval[DExp::variable(c.a)] = c.cval;
            break;
        default:
            break;
        }
    }

    bool valid(std::uint32_t v) const { return tr.var_valid(v); }
    bool sinv_p(std::uint32_t v) const {
        return tr.sinvalid_p.count(PExp::variable(v)) > 0;
    }
    bool sinv_d(std::uint32_t v) const {
        return tr.sinvalid_d.count(DExp::variable(v)) > 0;
    }
    std::uint32_t owner_bits(Addr a) const {
        auto it = tr.owned.find(a);
        return it == tr.owned.end() ? 0u : it->second;
    }
};

} // namespace

TEST_CASE("free invalidates every pointer to the cell and its selectors") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);      // top -> a=1
    w.exec(0, mallo(T0_NODE), 2);     // node -> b=2
    w.exec(0, writesel(T0_NODE, T0_TOP)); // b.next := a
    w.exec(0, assign(TOP, T0_TOP));   // Top := top (another pointer to a)
    w.exec(0, freecmd(T0_TOP));
    CHECK(!w.valid(T0_TOP));
    CHECK(!w.valid(TOP));
    CHECK(w.tr.invalid.count(PExp::selector(0, 1)));  // next(a)
    CHECK(w.tr.invalid.count(PExp::selector(0, 2)));  // next(b): also values a
    CHECK(w.valid(T0_NODE)); // b itself is untouched
    CHECK(w.tr.freed.count(1));
}

TEST_CASE("selector reads propagate validity of path and slot") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);
    w.exec(0, mallo(T0_NODE), 2);
    w.exec(0, writesel(T0_TOP, T0_NODE)); // a.next := b
    // valid path: x gets valid
    w.exec(0, readsel(T1_X, T0_TOP));
    CHECK(w.valid(T1_X));
    // invalid source pointer: x invalid AND strongly invalid
    w.exec(1, freecmd(T0_NODE)); // invalidates node, b-pointers, next(b); a.next values b
    CHECK(!w.valid(T1_X));       // x pointed to b
    w.exec(0, readsel(T1_Y, T0_TOP)); // top valid, but next(a) values freed b -> invalid slot?
    // next(a) itself became invalid (it values b)
    CHECK(!w.valid(T1_Y));
    CHECK(!w.sinv_p(T1_Y)); // weakly invalid only: the source pointer was valid
}

TEST_CASE("malloc validates the variable but not stale selectors on reuse") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);
    w.exec(0, freecmd(T0_TOP));
    CHECK(!w.valid(T0_TOP));
    CHECK(w.tr.invalid.count(PExp::selector(0, 1)));
    // re-allocation of the same address: variable valid, selector still invalid
    w.exec(1, mallo(T1_X), 1, /*fresh=*/false);
    CHECK(w.valid(T1_X));
    CHECK(w.tr.invalid.count(PExp::selector(0, 1)));
    CHECK(!w.tr.freed.count(1));
    // fresh allocation of a recycled name purges the stale entry
    World w2;
    w2.exec(0, mallo(T0_TOP), 1);
    w2.exec(0, freecmd(T0_TOP));
    w2.exec(1, mallo(T1_X), 1, /*fresh=*/true);
    CHECK(!w2.tr.invalid.count(PExp::selector(0, 1)));
}

TEST_CASE("selector writes set slot validity from the source") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);
    w.exec(0, mallo(T0_NODE), 2);
    w.exec(0, freecmd(T0_NODE)); // node invalid now
    w.exec(0, writesel(T0_TOP, T0_NODE)); // a.next := node (invalid source)
    CHECK(w.tr.invalid.count(PExp::selector(0, 1)));
    w.exec(0, writesel_null(T0_TOP)); // a.next := null validates the slot
    CHECK(!w.tr.invalid.count(PExp::selector(0, 1)));
}

TEST_CASE("strong invalidity: dereference via invalid, variable passing, revalidation") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);
    w.exec(0, assign(TOP, T0_TOP));
    w.exec(1, freecmd(TOP)); // free via shared pointer: top invalid afterwards
    CHECK(!w.valid(T0_TOP));
    // node := top.next dereferences an invalid pointer
    w.exec(0, readsel(T0_NODE, T0_TOP));
    CHECK(w.sinv_p(T0_NODE));
    CHECK(!w.valid(T0_NODE));
    // passing a strongly invalid variable spreads strong invalidity
    w.exec(0, assign(T1_X, T0_NODE));
    CHECK(w.sinv_p(T1_X));
    // re-assignment from a valid pointer removes strong invalidity
    w.exec(0, mallo(T1_Y), 2);
    w.exec(0, assign(T0_NODE, T1_Y));
    CHECK(!w.sinv_p(T0_NODE));
    CHECK(w.valid(T0_NODE));
}

TEST_CASE("strong invalidity on data is sticky") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);
    w.exec(1, assign(T1_X, T0_TOP));
    w.exec(0, freecmd(T0_TOP));
    w.exec(1, readdata(T1_F, T1_X)); // d := x.data via invalid x
    CHECK(w.sinv_d(T1_F));
    w.exec(1, dcopy(T0_E, T1_F)); // e := f spreads
    CHECK(w.sinv_d(T0_E));
    w.exec(1, dconst(T1_F, 0)); // constants do not clean strong invalidity
    CHECK(w.sinv_d(T1_F));
}

TEST_CASE("strongly invalid pointers are always invalid") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);
    w.exec(0, freecmd(T0_TOP));
    w.exec(0, readsel(T0_NODE, T0_TOP));
    w.exec(0, assign(T1_X, T0_NODE));
    for (const PExp& e : w.tr.sinvalid_p) CHECK(w.tr.invalid.count(e));
}

TEST_CASE("ownership: allocation grants, publication and compromise revoke") {
    World w;
    w.exec(0, mallo(T0_NODE), 1); // local allocation: thread 0 owns cell 1
    CHECK(w.owner_bits(1) == 0b01);
    // shared store publishes
    w.exec(0, assign(TOP, T0_NODE));
    CHECK(w.owner_bits(1) == 0);

    // compromise: equality assert against an invalid pointer
    w.exec(0, mallo(T0_TOP), 2);
    w.exec(1, assign(T1_X, T0_TOP));
    w.exec(1, freecmd(T1_X));
    CHECK(w.owner_bits(2) == 0); // free via valid pointer revoked... from thread 1?
    // thread 1 never owned cell 2; check thread 0 still owns it
    // (free revokes only the actor's ownership)
    World v;
    v.exec(0, mallo(T0_TOP), 2);
    CHECK(v.owner_bits(2) == 0b01);
    v.exec(1, assign(T1_X, T0_TOP)); // x local: no publication
    CHECK(v.owner_bits(2) == 0b01);
    v.exec(1, freecmd(T1_X)); // valid free by thread 1 revokes only thread 1's bit
    CHECK(v.owner_bits(2) == 0b01);

    // equality assert with an invalid side revokes heap(first operand)
    World u;
    u.exec(0, mallo(T0_TOP), 3);
    u.exec(0, assign(T0_NODE, T0_TOP));
    u.exec(0, freecmd(T0_NODE));
    CHECK(u.owner_bits(3) == 0); // free via valid node already revoked
    World u2;
    u2.exec(0, mallo(T0_TOP), 3);
    u2.exec(1, mallo(T1_X), 4);
    u2.exec(1, freecmd(T1_X)); // x invalid now
    u2.exec(0, assign(T0_NODE, T0_TOP));
    // assert top == x with x invalid: thread 0 loses heap(top) = 3
    u2.exec(0, aeq(T0_TOP, T1_X));
    CHECK(u2.owner_bits(3) == 0);
    // a disequality assert does not compromise
    World u3;
    u3.exec(0, mallo(T0_TOP), 3);
    u3.exec(1, mallo(T1_X), 4);
    u3.exec(1, freecmd(T1_X));
    u3.exec(0, aeq(T0_TOP, T1_X, /*neg=*/true));
    CHECK(u3.owner_bits(3) == 0b01);
}

TEST_CASE("ownership: heap reads publish to threads that do not own the source") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);  // t0 owns 1
    w.exec(0, mallo(T0_NODE), 2); // t0 owns 2
    w.exec(0, writesel(T0_NODE, T0_TOP)); // 2.next := 1 (both owned, no change)
    CHECK(w.owner_bits(1) == 0b01);
    // t0 reads back through its own cell: source owned by t0, so t0 keeps 1
    w.exec(0, readsel(T1_Y, T0_NODE));
    CHECK(w.owner_bits(1) == 0b01);
    // publish cell 2, then a read via the unowned source cell revokes 1
    w.exec(0, assign(TOP, T0_NODE)); // t0 loses 2
    CHECK(w.owner_bits(2) == 0);
    w.exec(1, readsel(T1_X, TOP)); // x := Top.next reads 1 via unowned cell 2
    CHECK(w.owner_bits(1) == 0);
}

TEST_CASE("race classification distinguishes PR from SPR") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);
    w.exec(0, assign(TOP, T0_TOP));
    w.exec(1, assign(T1_X, TOP));
    w.exec(1, freecmd(T1_X));
    // top invalid but not strongly invalid: comparison is a PR, not an SPR
    CHECK(raises_pr(w.tr, aeq(TOP, T0_TOP)));
    CHECK(raises_pr(w.tr, aeq(T0_TOP, TOP)));
    CHECK(!raises_spr(w.tr, aeq(TOP, T0_TOP)));
    // free via invalid pointer: PR and SPR
    CHECK(raises_pr(w.tr, freecmd(T0_TOP)));
    CHECK(raises_spr(w.tr, freecmd(T0_TOP)));
    // dereference via invalid pointer: PR but not SPR (reads are tolerated)
    CHECK(raises_pr(w.tr, readsel(T0_NODE, T0_TOP)));
    CHECK(!raises_spr(w.tr, readsel(T0_NODE, T0_TOP)));
    // writes via invalid pointer: PR and SPR
    CHECK(raises_spr(w.tr, writesel(T0_TOP, TOP)));
    CHECK(raises_spr(w.tr, writedata(T0_TOP, T0_D)));
    // dereference via strongly invalid pointer: SPR case (iii)
    w.exec(0, readsel(T0_NODE, T0_TOP)); // node strongly invalid now
    CHECK(raises_spr(w.tr, readsel(T1_Y, T0_NODE)));
    CHECK(raises_spr(w.tr, readdata(T0_D, T0_NODE)));
    // assertion over strongly invalid data
    w.exec(0, readdata(T0_D, T0_TOP));
    CHECK(w.sinv_d(T0_D));
    CoreCmd deq = cc(CoreCmd::Kind::AssertDataEq);
    deq.a = T0_D;
    deq.b = DV;
    CHECK(raises_spr(w.tr, deq));
    CHECK(!raises_pr(w.tr, deq)); // data asserts contain no pointer variables
}

TEST_CASE("ownership violations: foreign or shared access to an owned cell") {
    World w;
    w.exec(0, mallo(T0_TOP), 1); // t0 owns 1
    w.exec(1, mallo(T1_X), 1, /*fresh=*/false); // pretend reuse: x -> 1 too
    // thread 1 writing through its pointer to t0's cell is a violation
    CHECK(violates_ownership(w.tr, w.vt, 1, writesel(T1_X, T1_X), w.h));
    CHECK(violates_ownership(w.tr, w.vt, 1, freecmd(T1_X), w.h));
    CHECK(violates_ownership(w.tr, w.vt, 1, writedata(T1_X, T1_F), w.h));
    // the owner itself via a local pointer is fine
    CHECK(!violates_ownership(w.tr, w.vt, 0, writesel(T0_TOP, T0_TOP), w.h));
    // the owner via a shared variable is a violation
    w.h.pval[PExp::variable(TOP)] = 1;
    CHECK(violates_ownership(w.tr, w.vt, 0, writesel(TOP, T0_TOP), w.h));
    // reads never violate ownership
    CHECK(!violates_ownership(w.tr, w.vt, 1, readsel(T1_Y, T1_X), w.h));
}

TEST_CASE("taint tracks freed-cell origin and cleans on overwrite") {
    World w;
    w.exec(0, mallo(T0_TOP), 1);
    w.exec(0, dconst(T0_D, 2));
    w.exec(0, writedata(T0_TOP, T0_D)); // cell data := 2 (clean)
    w.exec(0, assign(T1_X, T0_TOP));
    w.exec(0, freecmd(T0_TOP)); // taints the cell's data slots
    CHECK(w.tr.taint.count(DExp::selector(kDselData, 1)));
    w.exec(1, readdata(T1_F, T1_X)); // read from freed cell
    CHECK(w.tr.taint.count(DExp::variable(T1_F)));
    w.exec(1, dcopy(DV, T1_F)); // copies spread taint
    CHECK(w.tr.taint.count(DExp::variable(DV)));
    w.exec(1, dconst(T1_F, 0)); // constants clean
    CHECK(!w.tr.taint.count(DExp::variable(T1_F)));
    // overwriting the slot cleans it
    w.exec(1, mallo(T1_Y), 1, /*fresh=*/false); // reuse the address
    w.exec(1, writedata(T1_Y, T1_F));
    CHECK(!w.tr.taint.count(DExp::selector(kDselData, 1)));
    // reading the cleaned slot yields a clean value
    w.exec(1, readdata(DV, T1_Y));
    CHECK(!w.tr.taint.count(DExp::variable(DV)));
}

TEST_CASE("owning pointers require validity; closure groups by target and source") {
    World w;
    w.exec(0, mallo(T0_TOP), 1); // t0 owns 1
    w.exec(0, mallo(T0_NODE), 2);
    w.exec(0, writesel(T0_TOP, T0_NODE)); // 1.next := 2
    w.exec(0, assign(T1_X, T0_TOP));      // x -> 1, valid
    std::set<PExp> ownp = owning_pointers(w.tr, w.h);
    CHECK(ownp.count(PExp::variable(T0_TOP)));
    CHECK(ownp.count(PExp::variable(T1_X)));
    CHECK(ownp.count(PExp::selector(0, 1))); // next field of owned cell 1 (targets owned 2)
    CHECK(ownp.count(PExp::variable(T0_NODE)));
    CHECK(!ownp.count(PExp::variable(TOP))); // Top -> seg

    // invalid pointers to owned cells are not owning pointers
    World v;
    v.exec(0, mallo(T0_TOP), 1);
    v.exec(1, mallo(T1_X), 2);
    v.exec(1, freecmd(T1_X));
    v.exec(1, readsel(T1_Y, T1_X)); // y invalid
    v.h.pval[PExp::variable(T1_Y)] = 1; // force y to point at the owned cell
    CHECK(!owning_pointers(v.tr, v.h).count(PExp::variable(T1_Y)));

    // closure: same-target grouping pulls in every pointer to the cell
    std::set<PExp> o = coherent_closure({PExp::variable(T0_TOP)}, w.tr, w.h);
    CHECK(o.count(PExp::variable(T1_X)));
    CHECK(!o.count(PExp::variable(T0_NODE)) ==
          !o.count(PExp::selector(0, 1))); // node and 1.next share target 2
    // a coherent set stays fixed
    CHECK(coherent_closure(o, w.tr, w.h) == o);
    CHECK(coherent_closure({}, w.tr, w.h).empty());
    CHECK_THROWS_AS(coherent_closure({PExp::variable(TOP)}, w.tr, w.h),
                    std::invalid_argument);
}

TEST_CASE("raw reuse can leave two owners; valid pointers then alias an owned cell") {
    // Regression for the ownership model: after a free through an invalid
    // pointer (itself a strong race), re-allocation can hand a second thread
    // an address the first thread still owns. The bitset representation must
    // carry both owners, and checks that assume a single owner are gated on
    // race-free prefixes.
    World w;
    w.exec(0, mallo(T0_TOP), 1);  // t0 owns 1 (cell a)
    w.exec(0, mallo(T0_NODE), 2); // t0 owns 2 (cell b)
    w.exec(0, writesel(T0_NODE, T0_TOP)); // b.next := a
    w.exec(0, freecmd(T0_NODE));  // b freed; next(b) invalid; t0 keeps a
    CHECK(w.owner_bits(1) == 0b01);
    w.exec(1, mallo(T1_X), 2, /*fresh=*/false); // t1 re-allocates b
    CHECK(w.owner_bits(2) == 0b10);
    w.exec(1, readsel(T1_Y, T1_X)); // y := b.next via invalid slot: y -> a, invalid
    CHECK(!w.valid(T1_Y));
    CHECK(w.owner_bits(1) == 0b01); // slot invalid: no publication of a
    CHECK(raises_spr(w.tr, freecmd(T1_Y))); // the next step is a strong race
    w.exec(1, freecmd(T1_Y)); // free via invalid pointer: t0's ownership survives
    CHECK(w.owner_bits(1) == 0b01);
    CHECK(w.tr.freed.count(1));
    w.exec(1, mallo(T1_X), 1, /*fresh=*/false); // re-allocation of a
    CHECK(w.owner_bits(1) == 0b11); // both threads own the cell now
    CHECK(w.valid(T1_X)); // and thread 1 holds a valid pointer to it
}
