#pragma once

// Surface language: a small concurrent while-language over pointer cells with
// next-selectors, one data field per cell, and an "age" field used by
// double-width CAS. Programs are a set of shared variable declarations plus
// thread blocks; methods are written inline inside a `forever { choose {..}
// or {..} }` harness loop. See docs/grammar.ebnf for the exact grammar.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace heaplab {

enum class VarKind { Ptr, Data, Age };

struct VarDecl {
    std::string name;
    VarKind kind = VarKind::Ptr;
};

struct SrcLoc {
    int line = 0;
    int col = 0;
};

// A variable, or `base->sel` where sel is a pointer selector ("next", ...) or
// a data selector ("data", "age").
struct VarRef {
    std::string base;
    std::string sel; // empty: plain variable
    bool is_sel() const { return !sel.empty(); }
};

struct CondExpr {
    enum class Kind { True, Nondet, PtrEq, PtrNull, DataEq, Cas, Dwcas };
    Kind kind = Kind::True;
    bool neg = false;       // `!=` forms
    std::string lhs, rhs;   // PtrEq/DataEq operands; PtrNull uses lhs
    // cas(dst, cmp, src) / dwcas(dst:dst_age, cmp:cmp_age, src)
    VarRef dst;
    VarRef dst_age;
    std::string cmp, cmp_age, src;
};

struct Stmt {
    enum class Kind {
        Assign,     // lhs = rhs | null | malloc | const | rhs+1 | *
        Free,       // free(arg)
        EmitStmt,   // emit event(args...)
        CasStmt,    // bare cas/dwcas, result ignored
        Return,
        Break,
        Skip,
        If,
        While,
        Atomic,
        Choose,
        Forever,
        BlockStmt,
    };
    Kind kind = Kind::Skip;
    int label = -1; // @N source label, -1 if none
    SrcLoc loc;

    VarRef lhs, rhs;
    bool rhs_null = false;
    bool rhs_malloc = false;
    bool rhs_nondet = false;
    bool rhs_inc = false; // lhs = rhs + 1
    int rhs_const = -1;   // >= 0: literal

    std::string arg;   // free target
    std::string event; // emit event name
    std::vector<VarRef> eargs;

    CondExpr cond;                    // If/While/CasStmt
    std::vector<Stmt> body, els;      // If (body/els), While/Atomic/Forever/BlockStmt (body)
    std::vector<std::vector<Stmt>> branches; // Choose
};

struct Thread {
    std::string name;
    std::vector<VarDecl> locals;
    std::vector<Stmt> body;
};

struct Annotation {
    std::string thread;
    std::string event; // linearization event name found at the label ("" if none)
};

struct Program {
    std::vector<VarDecl> shared;
    int k = 2;                          // data domain {0..k-1}
    std::vector<std::string> selectors; // pointer selector names, >= 1
    std::vector<Stmt> init;             // straight-line setup, runs once before threads
    std::vector<Thread> threads;
    std::map<int, Annotation> annotations; // @N -> linearization event
};

struct ParseError : std::runtime_error {
    SrcLoc loc;
    ParseError(const std::string& msg, SrcLoc l)
        : std::runtime_error(msg + " at line " + std::to_string(l.line) + ", column " +
                             std::to_string(l.col)),
          loc(l) {}
};

// Parses source text. Throws ParseError on malformed input.
Program parse_program(const std::string& text);

// Typing and scoping diagnostics; empty result means well-typed.
std::vector<std::string> typecheck(const Program& prog);

// Canonical pretty-printer; parse(print_program(p)) reproduces p.
std::string print_program(const Program& prog);

// Reserved data selector names (every cell has them implicitly).
inline constexpr const char* kDataSel = "data";
inline constexpr const char* kAgeSel = "age";
inline constexpr const char* kTagSel = "tag"; // instrumentation only

} // namespace heaplab
