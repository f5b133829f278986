#pragma once

// Control-flow graphs over core commands. Desugaring lowers the surface
// language: conditionals become complementary assert edges, cas/dwcas become
// one atomic success edge plus complement failure edges, atomic blocks become
// one compound edge per path, and `forever` harness loops get an atomic
// locals-reset edge on every restart.

#include "heaplab/lang.hpp"

#include <cstdint>
#include <vector>

namespace heaplab {

// Fixed data selector ids (every cell carries all three).
inline constexpr std::int32_t kDselData = 0;
inline constexpr std::int32_t kDselAge = 1;
inline constexpr std::int32_t kDselTag = 2;

struct CoreCmd {
    enum class Kind {
        AssertPtrEq,   // p ==/!= q; a value of SEG on either side satisfies both
        AssertPtrNull, // p ==/!= null; strict test of heap(p) = SEG
        AssertDataEq,  // d ==/!= e (data or age kind)
        AssignPtr,     // p := q
        AssignPtrNull, // p := null
        ReadSel,       // p := q.sel
        WriteSel,      // p.sel := q   (null_arg: p.sel := null)
        ReadData,      // d := p.dsel
        WriteData,     // p.dsel := d
        DataConst,     // d := cval
        DataCopy,      // d := e
        DataInc,       // d := e + 1  (mod k on data; fresh token on age)
        DataHavoc,     // d := *
        Malloc,        // p := malloc
        FreeCmd,       // free(p)
        Emit,          // emit event(optional d in a)
    };
    Kind kind;
    bool neg = false;       // assert forms: != instead of ==
    bool null_arg = false;  // WriteSel: store null
    std::uint32_t a = 0;    // primary operand (pvar or dvar id; Emit: arg dvar)
    std::uint32_t b = 0;    // secondary operand
    std::int32_t sel = 0;   // ReadSel/WriteSel: selector id; ReadData/WriteData: dsel id
    std::uint32_t cval = 0; // DataConst value
    std::int32_t event = -1; // Emit: event id
    bool has_arg = false;    // Emit: argument present

    bool operator==(const CoreCmd&) const = default;
};

struct VarTable {
    std::vector<std::string> pvars; // id -> name ("t0.node" for locals)
    std::vector<std::string> dvars;
    std::vector<VarKind> dkinds;    // kind per dvar (Data or Age)
    std::uint32_t shared_pvars = 0; // ids [0, shared_pvars) are shared
    std::uint32_t shared_dvars = 0;
    // per-thread local id ranges [begin, end)
    std::vector<std::pair<std::uint32_t, std::uint32_t>> local_pvars;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> local_dvars;

    bool pvar_is_shared(std::uint32_t id) const { return id < shared_pvars; }
    std::uint32_t owner_thread(std::uint32_t pvar) const; // thread of a local pvar
};

struct Edge {
    std::uint32_t src = 0, dst = 0;
    std::vector<CoreCmd> cmds; // executed atomically, one action per command
    bool restart = false;      // harness restart edge: resets the invocation
    int label = -1;            // source @N label, if the edge came from one
};

struct ThreadCfg {
    std::string name;
    std::uint32_t entry = 0;
    std::uint32_t n_locs = 0;
    std::vector<Edge> edges;
    std::vector<std::vector<std::uint32_t>> out; // out[loc] -> edge indices
};

struct Cfg {
    VarTable vars;
    int k = 2;
    std::vector<std::string> selectors;
    std::vector<std::string> events;  // event id -> name
    std::vector<CoreCmd> init;        // straight-line setup (runs once, atomically)
    std::vector<ThreadCfg> threads;

    std::int32_t event_id(const std::string& name) const;
    std::int32_t pvar_id(const std::string& name) const;  // -1 if absent
    std::int32_t dvar_id(const std::string& name) const;
};

// Lowers a parsed, well-typed program. Throws std::runtime_error on
// structures the lowering rejects (e.g. an atomic block with too many paths).
Cfg desugar(const Program& prog);

// Checks that at every location the outgoing compound edges are closed under
// assert complements (grouped by common command prefix). Empty = closed.
std::vector<std::string> verify_complement_closure(const Cfg& cfg);

// Human-readable dump (one line per edge) for tests and --dump-graph.
std::string dump_cfg(const Cfg& cfg);

} // namespace heaplab
