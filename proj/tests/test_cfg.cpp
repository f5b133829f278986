#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "heaplab/cfg.hpp"

using namespace heaplab;

namespace {

Cfg lower(const std::string& src) {
    Program p = parse_program(src);
    auto diags = typecheck(p);
    REQUIRE(diags.empty());
    Cfg cfg = desugar(p);
    auto closure = verify_complement_closure(cfg);
    for (const auto& d : closure) {
        CAPTURE(d);
        CHECK(false);
    }
    return cfg;
}

int count_kind(const std::vector<CoreCmd>& cmds, CoreCmd::Kind k) {
    int n = 0;
    for (const CoreCmd& c : cmds)
        if (c.kind == k) ++n;
    return n;
}

} // namespace

TEST_CASE("straight-line body lowers to a path") {
    Cfg cfg = lower("ptr p, q; thread t { p = malloc; q = p; free(q); }");
    REQUIRE(cfg.threads.size() == 1);
    const ThreadCfg& t = cfg.threads[0];
    REQUIRE(t.edges.size() == 3);
    CHECK(t.edges[0].cmds[0].kind == CoreCmd::Kind::Malloc);
    CHECK(t.edges[1].cmds[0].kind == CoreCmd::Kind::AssignPtr);
    CHECK(t.edges[2].cmds[0].kind == CoreCmd::Kind::FreeCmd);
    // a path: each edge's destination is the next edge's source
    CHECK(t.edges[0].dst == t.edges[1].src);
    CHECK(t.edges[1].dst == t.edges[2].src);
}

TEST_CASE("null test lowers to complementary assert edges") {
    Cfg cfg = lower("ptr top; thread t { if (top == null) { return; } free(top); }");
    const ThreadCfg& t = cfg.threads[0];
    std::vector<const Edge*> guards;
    for (const Edge& e : t.edges)
        if (!e.cmds.empty() && e.cmds[0].kind == CoreCmd::Kind::AssertPtrNull)
            guards.push_back(&e);
    REQUIRE(guards.size() == 2);
    CHECK(guards[0]->src == guards[1]->src);
    CHECK(guards[0]->cmds[0].neg != guards[1]->cmds[0].neg);
}

TEST_CASE("cas lowers to an atomic success edge and a failure edge") {
    Cfg cfg = lower("ptr Top; thread t { ptr top, node; if (cas(Top, top, node)) { skip; } }");
    const ThreadCfg& t = cfg.threads[0];
    const Edge* success = nullptr;
    const Edge* failure = nullptr;
    for (const Edge& e : t.edges) {
        if (count_kind(e.cmds, CoreCmd::Kind::AssignPtr) == 1) success = &e;
        else if (!e.cmds.empty() && e.cmds[0].neg) failure = &e;
    }
    REQUIRE(success);
    REQUIRE(failure);
    REQUIRE(success->cmds.size() == 2);
    CHECK(success->cmds[0].kind == CoreCmd::Kind::AssertPtrEq);
    CHECK(!success->cmds[0].neg);
    CHECK(success->cmds[1].kind == CoreCmd::Kind::AssignPtr);
    REQUIRE(failure->cmds.size() == 1);
    CHECK(failure->cmds[0].kind == CoreCmd::Kind::AssertPtrEq);
    CHECK(failure->src == success->src);
}

TEST_CASE("dwcas lowers to success plus two complement failure edges") {
    Cfg cfg = lower("ptr T; age A; thread t { ptr c, s; age a; dwcas(T:A, c:a, s); }");
    const ThreadCfg& t = cfg.threads[0];
    REQUIRE(t.edges.size() == 3);
    const Edge& success = t.edges[0];
    REQUIRE(success.cmds.size() == 4);
    CHECK(success.cmds[0].kind == CoreCmd::Kind::AssertPtrEq);
    CHECK(success.cmds[1].kind == CoreCmd::Kind::AssertDataEq);
    CHECK(success.cmds[2].kind == CoreCmd::Kind::AssignPtr);
    CHECK(success.cmds[3].kind == CoreCmd::Kind::DataInc);
    // failure 1: pointer differs; failure 2: pointer equal, age differs
    CHECK(t.edges[1].cmds.size() == 1);
    CHECK(t.edges[1].cmds[0].neg);
    REQUIRE(t.edges[2].cmds.size() == 2);
    CHECK(!t.edges[2].cmds[0].neg);
    CHECK(t.edges[2].cmds[0].kind == CoreCmd::Kind::AssertPtrEq);
    CHECK(t.edges[2].cmds[1].neg);
    CHECK(t.edges[2].cmds[1].kind == CoreCmd::Kind::AssertDataEq);
    // all three edges agree on source and the bump is the age bump
    CHECK(t.edges[1].src == success.src);
    CHECK(t.edges[2].src == success.src);
}

TEST_CASE("dwcas on a selector destination reads through temps") {
    Cfg cfg =
        lower("ptr T; thread t { ptr c, s; age a; dwcas(T->next:T->age, c:a, s); }");
    const Edge& success = cfg.threads[0].edges[0];
    // read next, assert, read age, assert, write next, bump, write age
    REQUIRE(success.cmds.size() == 7);
    CHECK(success.cmds[0].kind == CoreCmd::Kind::ReadSel);
    CHECK(success.cmds[1].kind == CoreCmd::Kind::AssertPtrEq);
    CHECK(success.cmds[2].kind == CoreCmd::Kind::ReadData);
    CHECK(success.cmds[3].kind == CoreCmd::Kind::AssertDataEq);
    CHECK(success.cmds[4].kind == CoreCmd::Kind::WriteSel);
    CHECK(success.cmds[5].kind == CoreCmd::Kind::DataInc);
    CHECK(success.cmds[6].kind == CoreCmd::Kind::WriteData);
    // failure edges share the leading read so the complement check sees one tree
    CHECK(cfg.threads[0].edges[1].cmds[0].kind == CoreCmd::Kind::ReadSel);
}

TEST_CASE("forever produces an atomic locals-reset restart edge") {
    Cfg cfg = lower("ptr G; thread t { ptr a; data d; forever { a = G; } }");
    const ThreadCfg& t = cfg.threads[0];
    const Edge* restart = nullptr;
    for (const Edge& e : t.edges)
        if (e.restart) restart = &e;
    REQUIRE(restart);
    CHECK(restart->src == t.entry);
    // pointer locals (a + hidden temp) reset to null, data locals to 0
    CHECK(count_kind(restart->cmds, CoreCmd::Kind::AssignPtrNull) == 2);
    CHECK(count_kind(restart->cmds, CoreCmd::Kind::DataConst) == 3);
    // the body loops back to the reset edge's source
    bool loops_back = false;
    for (const Edge& e : t.edges)
        if (!e.restart && e.dst == t.entry) loops_back = true;
    CHECK(loops_back);
}

TEST_CASE("return inside forever restarts the harness loop") {
    Cfg cfg = lower("ptr G; thread t { ptr a; forever { if (a == null) { return; } a = G; } }");
    const ThreadCfg& t = cfg.threads[0];
    // some edge with the positive null assert leads (via the return) to entry
    bool return_edge = false;
    for (const Edge& e : t.edges)
        if (e.cmds.empty() && e.dst == t.entry && e.src != t.entry) return_edge = true;
    CHECK(return_edge);
}

TEST_CASE("atomic block explodes into one compound edge per path") {
    Cfg cfg = lower(R"(
        ptr Head;
        thread t {
          ptr node, nxt; data v;
          forever {
            atomic {
              node = Head;
              nxt = Head->next;
              if (nxt == null) { emit deq_empty; return; }
              v = nxt->data;
              Head = nxt;
              emit deq(v);
            }
            free(node);
          }
        }
    )");
    const ThreadCfg& t = cfg.threads[0];
    std::vector<const Edge*> compound;
    for (const Edge& e : t.edges)
        if (e.cmds.size() > 2 && !e.restart) compound.push_back(&e);
    REQUIRE(compound.size() == 2);
    // both paths share src; the returning path goes back to the forever entry
    CHECK(compound[0]->src == compound[1]->src);
    const Edge* empty_path = nullptr;
    const Edge* deq_path = nullptr;
    for (const Edge* e : compound) {
        bool has_empty = false;
        for (const CoreCmd& c : e->cmds)
            if (c.kind == CoreCmd::Kind::Emit && cfg.events[c.event] == "deq_empty")
                has_empty = true;
        (has_empty ? empty_path : deq_path) = e;
    }
    REQUIRE(empty_path);
    REQUIRE(deq_path);
    CHECK(empty_path->dst == t.entry);
    CHECK(count_kind(empty_path->cmds, CoreCmd::Kind::AssertPtrNull) == 1);
    CHECK(count_kind(deq_path->cmds, CoreCmd::Kind::WriteData) +
          count_kind(deq_path->cmds, CoreCmd::Kind::ReadData) >= 1);
    CHECK(count_kind(deq_path->cmds, CoreCmd::Kind::Emit) == 1);
}

TEST_CASE("selector-to-selector copies take two steps") {
    Cfg cfg = lower("ptr p, q; thread t { p->next = q->next; }");
    const ThreadCfg& t = cfg.threads[0];
    REQUIRE(t.edges.size() == 2);
    CHECK(t.edges[0].cmds[0].kind == CoreCmd::Kind::ReadSel);
    CHECK(t.edges[1].cmds[0].kind == CoreCmd::Kind::WriteSel);
}

TEST_CASE("init block lowers to straight-line commands") {
    Cfg cfg = lower(R"(
        ptr Head, Tail;
        init { Head = malloc; Head->next = null; Tail = Head; }
        thread t { skip; }
    )");
    REQUIRE(cfg.init.size() == 3);
    CHECK(cfg.init[0].kind == CoreCmd::Kind::Malloc);
    CHECK(cfg.init[1].kind == CoreCmd::Kind::WriteSel);
    CHECK(cfg.init[1].null_arg);
    CHECK(cfg.init[2].kind == CoreCmd::Kind::AssignPtr);
}

TEST_CASE("labels land on the first generated edge") {
    Cfg cfg = lower("ptr T; thread t { ptr c, s; @7: if (cas(T, c, s)) { skip; } }");
    bool found = false;
    for (const Edge& e : cfg.threads[0].edges)
        if (e.label == 7) {
            found = true;
            CHECK(!e.cmds.empty());
        }
    CHECK(found);
}

TEST_CASE("emit with selector argument reads at emission time") {
    Cfg cfg = lower("ptr p; thread t { emit pop(p->data); }");
    const Edge& e = cfg.threads[0].edges[0];
    REQUIRE(e.cmds.size() == 2);
    CHECK(e.cmds[0].kind == CoreCmd::Kind::ReadData);
    CHECK(e.cmds[1].kind == CoreCmd::Kind::Emit);
    CHECK(e.cmds[1].has_arg);
    CHECK(e.cmds[1].a == e.cmds[0].a);
}

TEST_CASE("dump_cfg names commands") {
    Cfg cfg = lower("ptr Top; thread t { ptr n; n = malloc; n->next = Top; }");
    std::string d = dump_cfg(cfg);
    CHECK(d.find("t.n := malloc") != std::string::npos);
    CHECK(d.find("t.n.next := Top") != std::string::npos);
}

TEST_CASE("complement closure detector flags a hand-built violation") {
    Cfg cfg = lower("ptr p, q; thread t { if (p == q) { skip; } }");
    // drop the negated guard
    ThreadCfg& t = cfg.threads[0];
    std::vector<Edge> kept;
    for (const Edge& e : t.edges)
        if (e.cmds.empty() || !e.cmds[0].neg) kept.push_back(e);
    t.edges = kept;
    t.out.assign(t.n_locs, {});
    for (std::uint32_t i = 0; i < t.edges.size(); ++i) t.out[t.edges[i].src].push_back(i);
    CHECK(!verify_complement_closure(cfg).empty());
}
