#include "heaplab/lang.hpp"

#include <cctype>
#include <optional>
#include <set>
#include <sstream>

namespace heaplab {

namespace {

// ---------------------------------------------------------------- lexer ----

enum class Tok {
    Ident,
    Int,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Comma,
    Colon,
    At,
    Arrow,
    Assign, // =
    EqEq,
    NotEq,
    Plus,
    Star,
    Eof,
};

struct Token {
    Tok kind = Tok::Eof;
    std::string text;
    long value = 0;
    SrcLoc loc;
};

class Lexer {
  public:
    explicit Lexer(const std::string& text) : src_(text) {}

    Token next() {
        skip_ws();
        Token t;
        t.loc = {line_, col_};
        if (pos_ >= src_.size()) return t;
        char c = src_[pos_];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t b = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                advance();
            t.kind = Tok::Ident;
            t.text = src_.substr(b, pos_ - b);
            return t;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t b = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                advance();
            t.kind = Tok::Int;
            t.text = src_.substr(b, pos_ - b);
            t.value = std::stol(t.text);
            return t;
        }
        auto two = [&](char a, char b) {
            return c == a && pos_ + 1 < src_.size() && src_[pos_ + 1] == b;
        };
        if (two('-', '>')) {
            advance();
            advance();
            t.kind = Tok::Arrow;
            return t;
        }
        if (two('=', '=')) {
            advance();
            advance();
            t.kind = Tok::EqEq;
            return t;
        }
        if (two('!', '=')) {
            advance();
            advance();
            t.kind = Tok::NotEq;
            return t;
        }
        advance();
        switch (c) {
        case '{': t.kind = Tok::LBrace; return t;
        case '}': t.kind = Tok::RBrace; return t;
        case '(': t.kind = Tok::LParen; return t;
        case ')': t.kind = Tok::RParen; return t;
        case ';': t.kind = Tok::Semi; return t;
        case ',': t.kind = Tok::Comma; return t;
        case ':': t.kind = Tok::Colon; return t;
        case '@': t.kind = Tok::At; return t;
        case '=': t.kind = Tok::Assign; return t;
        case '+': t.kind = Tok::Plus; return t;
        case '*': t.kind = Tok::Star; return t;
        default: throw ParseError(std::string("unexpected character '") + c + "'", t.loc);
        }
    }

  private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }
    void skip_ws() {
        for (;;) {
            while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_])))
                advance();
            if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
                continue;
            }
            break;
        }
    }

    const std::string& src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

const std::set<std::string> kKeywords = {
    "thread", "ptr",   "data",   "age",  "domain", "selectors", "init", "atomic",
    "choose", "or",    "forever", "if",  "else",   "while",     "break", "return",
    "skip",   "free",  "malloc", "null", "emit",   "cas",       "dwcas", "true",
    "false",
};

// --------------------------------------------------------------- parser ----

class Parser {
  public:
    explicit Parser(const std::string& text) : lex_(text) { bump(); }

    Program parse() {
        Program prog;
        prog.selectors = {"next"};
        bool selectors_set = false;
        while (cur_.kind != Tok::Eof) {
            if (is_kw("domain")) {
                bump();
                Token v = expect(Tok::Int, "domain size");
                prog.k = static_cast<int>(v.value);
                expect(Tok::Semi, "';'");
            } else if (is_kw("selectors")) {
                bump();
                std::vector<std::string> sels;
                sels.push_back(expect_ident("selector name"));
                while (cur_.kind == Tok::Comma) {
                    bump();
                    sels.push_back(expect_ident("selector name"));
                }
                expect(Tok::Semi, "';'");
                if (selectors_set) throw ParseError("duplicate selectors declaration", cur_.loc);
                prog.selectors = sels;
                selectors_set = true;
            } else if (is_kw("ptr") || is_kw("data") || is_kw("age")) {
                parse_decls(prog.shared);
            } else if (is_kw("init")) {
                bump();
                if (!prog.init.empty()) throw ParseError("duplicate init block", cur_.loc);
                prog.init = parse_block();
                if (prog.init.empty()) prog.init.push_back(Stmt{}); // keep non-empty marker
            } else if (is_kw("thread")) {
                bump();
                Thread t;
                t.name = expect_ident("thread name");
                expect(Tok::LBrace, "'{'");
                while (is_kw("ptr") || is_kw("data") || is_kw("age")) parse_decls(t.locals);
                while (cur_.kind != Tok::RBrace) t.body.push_back(parse_stmt());
                expect(Tok::RBrace, "'}'");
                prog.threads.push_back(std::move(t));
            } else {
                throw ParseError("expected declaration or thread block", cur_.loc);
            }
        }
        if (prog.threads.empty()) throw ParseError("no threads", cur_.loc);
        collect_annotations(prog);
        return prog;
    }

  private:
    void bump() { cur_ = lex_.next(); }
    bool is_kw(const char* k) const { return cur_.kind == Tok::Ident && cur_.text == k; }
    Token expect(Tok k, const char* what) {
        if (cur_.kind != k) throw ParseError(std::string("expected ") + what, cur_.loc);
        Token t = cur_;
        bump();
        return t;
    }
    std::string expect_ident(const char* what) {
        if (cur_.kind != Tok::Ident || kKeywords.count(cur_.text))
            throw ParseError(std::string("expected ") + what, cur_.loc);
        std::string s = cur_.text;
        bump();
        return s;
    }

    void parse_decls(std::vector<VarDecl>& out) {
        VarKind kind = is_kw("ptr") ? VarKind::Ptr : is_kw("data") ? VarKind::Data : VarKind::Age;
        bump();
        out.push_back({expect_ident("variable name"), kind});
        while (cur_.kind == Tok::Comma) {
            bump();
            out.push_back({expect_ident("variable name"), kind});
        }
        expect(Tok::Semi, "';'");
    }

    std::vector<Stmt> parse_block() {
        expect(Tok::LBrace, "'{'");
        std::vector<Stmt> out;
        while (cur_.kind != Tok::RBrace) out.push_back(parse_stmt());
        expect(Tok::RBrace, "'}'");
        return out;
    }

    // Body of if/while: either a braced block (spliced) or a single statement.
    std::vector<Stmt> parse_body() {
        if (cur_.kind == Tok::LBrace) return parse_block();
        std::vector<Stmt> out;
        out.push_back(parse_stmt());
        return out;
    }

    VarRef parse_varref() {
        VarRef r;
        r.base = expect_ident("variable");
        if (cur_.kind == Tok::Arrow) {
            bump();
            // "data" and "age" are keywords but legal selector names.
            if (cur_.kind != Tok::Ident) throw ParseError("expected selector", cur_.loc);
            r.sel = cur_.text;
            bump();
        }
        return r;
    }

    CondExpr parse_cas(bool dw) {
        CondExpr c;
        c.kind = dw ? CondExpr::Kind::Dwcas : CondExpr::Kind::Cas;
        expect(Tok::LParen, "'('");
        c.dst = parse_varref();
        if (dw) {
            expect(Tok::Colon, "':' (destination age)");
            c.dst_age = parse_varref();
        }
        expect(Tok::Comma, "','");
        c.cmp = expect_ident("compare variable");
        if (dw) {
            expect(Tok::Colon, "':' (compare age)");
            c.cmp_age = expect_ident("compare age variable");
        }
        expect(Tok::Comma, "','");
        c.src = expect_ident("source variable");
        expect(Tok::RParen, "')'");
        return c;
    }

    CondExpr parse_cond() {
        CondExpr c;
        if (cur_.kind == Tok::Star) {
            bump();
            c.kind = CondExpr::Kind::Nondet;
            return c;
        }
        if (is_kw("true")) {
            bump();
            c.kind = CondExpr::Kind::True;
            return c;
        }
        if (is_kw("cas") || is_kw("dwcas")) {
            bool dw = is_kw("dwcas");
            bump();
            return parse_cas(dw);
        }
        SrcLoc loc = cur_.loc;
        std::string lhs = expect_ident("variable");
        bool neg;
        if (cur_.kind == Tok::EqEq) neg = false;
        else if (cur_.kind == Tok::NotEq) neg = true;
        else throw ParseError("expected '==' or '!='", cur_.loc);
        bump();
        c.neg = neg;
        c.lhs = lhs;
        if (is_kw("null")) {
            bump();
            c.kind = CondExpr::Kind::PtrNull;
            return c;
        }
        if (cur_.kind == Tok::Int)
            throw ParseError("literal comparison is not supported; compare variables", loc);
        c.rhs = expect_ident("variable");
        // Pointer vs data equality is resolved during typechecking; PtrEq is
        // the parse-time placeholder for both.
        c.kind = CondExpr::Kind::PtrEq;
        return c;
    }

    Stmt parse_stmt() {
        Stmt s;
        s.loc = cur_.loc;
        if (cur_.kind == Tok::At) {
            bump();
            Token n = expect(Tok::Int, "label number");
            expect(Tok::Colon, "':'");
            s.label = static_cast<int>(n.value);
            s.loc = cur_.loc;
        }
        if (cur_.kind == Tok::LBrace) {
            s.kind = Stmt::Kind::BlockStmt;
            s.body = parse_block();
            return s;
        }
        if (is_kw("atomic")) {
            bump();
            s.kind = Stmt::Kind::Atomic;
            s.body = parse_block();
            return s;
        }
        if (is_kw("forever")) {
            bump();
            s.kind = Stmt::Kind::Forever;
            s.body = parse_block();
            return s;
        }
        if (is_kw("choose")) {
            bump();
            s.kind = Stmt::Kind::Choose;
            s.branches.push_back(parse_block());
            while (is_kw("or")) {
                bump();
                s.branches.push_back(parse_block());
            }
            if (s.branches.size() < 2)
                throw ParseError("choose needs at least two 'or' branches", s.loc);
            return s;
        }
        if (is_kw("if")) {
            bump();
            s.kind = Stmt::Kind::If;
            expect(Tok::LParen, "'('");
            s.cond = parse_cond();
            expect(Tok::RParen, "')'");
            s.body = parse_body();
            if (is_kw("else")) {
                bump();
                s.els = parse_body();
            }
            return s;
        }
        if (is_kw("while")) {
            bump();
            s.kind = Stmt::Kind::While;
            expect(Tok::LParen, "'('");
            s.cond = parse_cond();
            expect(Tok::RParen, "')'");
            s.body = parse_body();
            return s;
        }
        if (is_kw("break")) {
            bump();
            expect(Tok::Semi, "';'");
            s.kind = Stmt::Kind::Break;
            return s;
        }
        if (is_kw("return")) {
            bump();
            if (is_kw("true") || is_kw("false")) bump(); // result value is ignored
            expect(Tok::Semi, "';'");
            s.kind = Stmt::Kind::Return;
            return s;
        }
        if (is_kw("skip")) {
            bump();
            expect(Tok::Semi, "';'");
            s.kind = Stmt::Kind::Skip;
            return s;
        }
        if (is_kw("free")) {
            bump();
            expect(Tok::LParen, "'('");
            s.kind = Stmt::Kind::Free;
            s.arg = expect_ident("variable");
            expect(Tok::RParen, "')'");
            expect(Tok::Semi, "';'");
            return s;
        }
        if (is_kw("emit")) {
            bump();
            s.kind = Stmt::Kind::EmitStmt;
            s.event = expect_ident("event name");
            if (cur_.kind == Tok::LParen) {
                bump();
                if (cur_.kind != Tok::RParen) {
                    s.eargs.push_back(parse_varref());
                    while (cur_.kind == Tok::Comma) {
                        bump();
                        s.eargs.push_back(parse_varref());
                    }
                }
                expect(Tok::RParen, "')'");
            }
            expect(Tok::Semi, "';'");
            return s;
        }
        if (is_kw("cas") || is_kw("dwcas")) {
            bool dw = is_kw("dwcas");
            bump();
            s.kind = Stmt::Kind::CasStmt;
            s.cond = parse_cas(dw);
            expect(Tok::Semi, "';'");
            return s;
        }
        // assignment
        s.kind = Stmt::Kind::Assign;
        s.lhs = parse_varref();
        expect(Tok::Assign, "'='");
        if (is_kw("null")) {
            bump();
            s.rhs_null = true;
        } else if (is_kw("malloc")) {
            bump();
            s.rhs_malloc = true;
        } else if (cur_.kind == Tok::Star) {
            bump();
            s.rhs_nondet = true;
        } else if (cur_.kind == Tok::Int) {
            s.rhs_const = static_cast<int>(cur_.value);
            bump();
        } else {
            s.rhs = parse_varref();
            if (cur_.kind == Tok::Plus) {
                bump();
                Token one = expect(Tok::Int, "'1'");
                if (one.value != 1) throw ParseError("only '+ 1' increments are supported", one.loc);
                s.rhs_inc = true;
            }
        }
        expect(Tok::Semi, "';'");
        return s;
    }

    static void scan_emit(const Stmt& s, std::string& ev) {
        if (!ev.empty()) return;
        if (s.kind == Stmt::Kind::EmitStmt) {
            ev = s.event;
            return;
        }
        for (const auto* blk : {&s.body, &s.els})
            for (const Stmt& c : *blk) scan_emit(c, ev);
        for (const auto& br : s.branches)
            for (const Stmt& c : br) scan_emit(c, ev);
    }

    static void collect_labels(const Stmt& s, const std::string& thread, Program& prog) {
        if (s.label >= 0) {
            if (prog.annotations.count(s.label))
                throw ParseError("duplicate label @" + std::to_string(s.label), s.loc);
            std::string ev;
            scan_emit(s, ev);
            prog.annotations[s.label] = {thread, ev};
        }
        for (const auto* blk : {&s.body, &s.els})
            for (const Stmt& c : *blk) collect_labels(c, thread, prog);
        for (const auto& br : s.branches)
            for (const Stmt& c : br) collect_labels(c, thread, prog);
    }

    void collect_annotations(Program& prog) {
        for (const Thread& t : prog.threads)
            for (const Stmt& s : t.body) collect_labels(s, t.name, prog);
    }

    Lexer lex_;
    Token cur_;
};

// ---------------------------------------------------------- typechecker ----

class Checker {
  public:
    explicit Checker(const Program& p) : prog_(p) {}

    std::vector<std::string> run() {
        check_header();
        for (const VarDecl& v : prog_.shared) declare(v, "shared");
        if (!prog_.init.empty()) {
            scope_ = nullptr;
            for (const Stmt& s : prog_.init) check_init_stmt(s);
        }
        std::set<std::string> tnames;
        for (const Thread& t : prog_.threads)
            if (!tnames.insert(t.name).second) err("duplicate thread name '" + t.name + "'");
        for (const Thread& t : prog_.threads) {
            locals_.clear();
            scope_ = &t;
            for (const VarDecl& v : t.locals) declare(v, "local to thread '" + t.name + "'");
            bool seen_forever = false;
            for (std::size_t i = 0; i < t.body.size(); ++i) {
                const Stmt& s = t.body[i];
                if (s.kind == Stmt::Kind::Forever) {
                    if (seen_forever) err("thread '" + t.name + "' has more than one forever loop");
                    if (i + 1 != t.body.size())
                        err("forever must be the last statement of thread '" + t.name + "'");
                    seen_forever = true;
                }
                check_stmt(s, Ctx{});
            }
        }
        return std::move(diags_);
    }

  private:
    struct Ctx {
        bool in_loop = false;
        bool in_atomic = false;
        bool in_forever = false;
        bool nested = false; // not a top-level thread statement
    };

    void err(std::string m) { diags_.push_back(std::move(m)); }
    void err_at(const SrcLoc& l, const std::string& m) {
        err(m + " (line " + std::to_string(l.line) + ")");
    }

    void check_header() {
        if (prog_.k < 2 || prog_.k > 16) err("domain size must be between 2 and 16");
        std::set<std::string> sels;
        for (const std::string& s : prog_.selectors) {
            if (!sels.insert(s).second) err("duplicate selector '" + s + "'");
            if (s == kDataSel || s == kAgeSel || s == kTagSel)
                err("selector '" + s + "' collides with a built-in field");
        }
        if (prog_.selectors.empty()) err("at least one pointer selector is required");
    }

    void declare(const VarDecl& v, const std::string& where) {
        if (shared_.count(v.name) || locals_.count(v.name))
            err("duplicate variable '" + v.name + "' (" + where + ")");
        (scope_ ? locals_ : shared_)[v.name] = v.kind;
    }

    // Kind of a slot denoted by a VarRef; reports and returns nullopt on error.
    std::optional<VarKind> slot_kind(const VarRef& r, const SrcLoc& loc) {
        auto base = lookup(r.base, loc);
        if (!base) return std::nullopt;
        if (!r.is_sel()) return base;
        if (*base != VarKind::Ptr) {
            err_at(loc, "selector applied to non-pointer '" + r.base + "'");
            return std::nullopt;
        }
        for (const std::string& s : prog_.selectors)
            if (s == r.sel) return VarKind::Ptr;
        if (r.sel == kDataSel) return VarKind::Data;
        if (r.sel == kAgeSel) return VarKind::Age;
        if (r.sel == kTagSel) {
            err_at(loc, "'tag' is reserved for instrumentation");
            return std::nullopt;
        }
        err_at(loc, "unknown selector '" + r.sel + "'");
        return std::nullopt;
    }

    std::optional<VarKind> lookup(const std::string& name, const SrcLoc& loc) {
        if (auto it = locals_.find(name); it != locals_.end()) return it->second;
        if (auto it = shared_.find(name); it != shared_.end()) return it->second;
        for (const Thread& t : prog_.threads) {
            if (scope_ && t.name == scope_->name) continue;
            for (const VarDecl& v : t.locals)
                if (v.name == name) {
                    err_at(loc, "variable '" + name + "' is local to thread '" + t.name + "'");
                    return std::nullopt;
                }
        }
        err_at(loc, "unknown variable '" + name + "'");
        return std::nullopt;
    }

    void check_plain(const std::string& name, VarKind want, const SrcLoc& loc, const char* what) {
        auto k = lookup(name, loc);
        if (k && *k != want) err_at(loc, std::string(what) + " '" + name + "' has the wrong type");
    }

    void check_cas(const CondExpr& c, const SrcLoc& loc) {
        auto dk = slot_kind(c.dst, loc);
        if (dk && *dk != VarKind::Ptr) err_at(loc, "cas destination must be a pointer");
        check_plain(c.cmp, VarKind::Ptr, loc, "cas compare operand");
        check_plain(c.src, VarKind::Ptr, loc, "cas source operand");
        if (c.kind == CondExpr::Kind::Dwcas) {
            auto ak = slot_kind(c.dst_age, loc);
            if (ak && *ak == VarKind::Ptr) err_at(loc, "dwcas age slot must be data or age");
            auto ck = lookup(c.cmp_age, loc);
            if (ak && ck && *ak != *ck) err_at(loc, "dwcas age operands have different kinds");
        }
    }

    void check_cond(const CondExpr& c, const SrcLoc& loc) {
        switch (c.kind) {
        case CondExpr::Kind::True:
        case CondExpr::Kind::Nondet: return;
        case CondExpr::Kind::PtrNull: check_plain(c.lhs, VarKind::Ptr, loc, "operand"); return;
        case CondExpr::Kind::Cas:
        case CondExpr::Kind::Dwcas: check_cas(c, loc); return;
        case CondExpr::Kind::PtrEq: {
            auto lk = lookup(c.lhs, loc);
            auto rk = lookup(c.rhs, loc);
            if (lk && rk && *lk != *rk) err_at(loc, "comparison operands have different kinds");
            return;
        }
        case CondExpr::Kind::DataEq: return; // produced only by resolution
        }
    }

    void check_assign(const Stmt& s) {
        auto lk = slot_kind(s.lhs, s.loc);
        if (!lk) return;
        if (s.rhs_null) {
            if (*lk != VarKind::Ptr) err_at(s.loc, "null assigned to non-pointer");
            return;
        }
        if (s.rhs_malloc) {
            if (*lk != VarKind::Ptr || s.lhs.is_sel())
                err_at(s.loc, "malloc target must be a plain pointer variable");
            return;
        }
        if (s.rhs_nondet) {
            if (*lk != VarKind::Data) err_at(s.loc, "'*' assigned to non-data variable");
            return;
        }
        if (s.rhs_const >= 0) {
            if (*lk == VarKind::Ptr) err_at(s.loc, "literal assigned to pointer");
            else if (*lk == VarKind::Data && s.rhs_const >= prog_.k)
                err_at(s.loc, "literal outside data domain");
            else if (*lk == VarKind::Age && s.rhs_const != 0)
                err_at(s.loc, "age variables can only be reset to 0");
            return;
        }
        auto rk = slot_kind(s.rhs, s.loc);
        if (!rk) return;
        if (s.rhs_inc) {
            if (*lk != VarKind::Data || *rk != VarKind::Data)
                err_at(s.loc, "'+ 1' is only defined on data variables");
            return;
        }
        if (*lk != *rk) err_at(s.loc, "assignment mixes kinds");
    }

    void check_stmt(const Stmt& s, Ctx ctx) {
        switch (s.kind) {
        case Stmt::Kind::Assign: check_assign(s); break;
        case Stmt::Kind::Free: check_plain(s.arg, VarKind::Ptr, s.loc, "free argument"); break;
        case Stmt::Kind::EmitStmt:
            if (s.eargs.size() > 1) err_at(s.loc, "emit takes at most one argument");
            for (const VarRef& a : s.eargs) {
                auto k = slot_kind(a, s.loc);
                if (k && *k != VarKind::Data) err_at(s.loc, "emit argument must carry data");
            }
            break;
        case Stmt::Kind::CasStmt: check_cas(s.cond, s.loc); break;
        case Stmt::Kind::Return: break;
        case Stmt::Kind::Break:
            if (!ctx.in_loop) err_at(s.loc, "break outside of a loop");
            if (ctx.in_atomic) err_at(s.loc, "break may not leave an atomic block");
            break;
        case Stmt::Kind::Skip: break;
        case Stmt::Kind::If:
            check_cond(s.cond, s.loc);
            for (const Stmt& c : s.body) check_stmt(c, nested(ctx));
            for (const Stmt& c : s.els) check_stmt(c, nested(ctx));
            break;
        case Stmt::Kind::While: {
            if (ctx.in_atomic) err_at(s.loc, "loop inside atomic block");
            check_cond(s.cond, s.loc);
            Ctx c2 = nested(ctx);
            c2.in_loop = true;
            for (const Stmt& c : s.body) check_stmt(c, c2);
            break;
        }
        case Stmt::Kind::Atomic: {
            if (ctx.in_atomic) err_at(s.loc, "nested atomic block");
            Ctx c2 = nested(ctx);
            c2.in_atomic = true;
            c2.in_loop = false;
            for (const Stmt& c : s.body) check_stmt(c, c2);
            break;
        }
        case Stmt::Kind::Choose:
            for (const auto& br : s.branches)
                for (const Stmt& c : br) check_stmt(c, nested(ctx));
            break;
        case Stmt::Kind::Forever: {
            if (ctx.nested) err_at(s.loc, "forever must be a top-level thread statement");
            Ctx c2 = nested(ctx);
            c2.in_forever = true;
            for (const Stmt& c : s.body) check_stmt(c, c2);
            break;
        }
        case Stmt::Kind::BlockStmt:
            for (const Stmt& c : s.body) check_stmt(c, nested(ctx));
            break;
        }
    }

    void check_init_stmt(const Stmt& s) {
        if (s.kind == Stmt::Kind::Skip) return;
        if (s.kind != Stmt::Kind::Assign) {
            err_at(s.loc, "init block allows only assignments");
            return;
        }
        if (s.rhs_nondet) {
            err_at(s.loc, "init block must be deterministic");
            return;
        }
        check_assign(s);
    }

    static Ctx nested(Ctx c) {
        c.nested = true;
        return c;
    }

    const Program& prog_;
    const Thread* scope_ = nullptr;
    std::map<std::string, VarKind> shared_, locals_;
    std::vector<std::string> diags_;
};

// -------------------------------------------------------------- printer ----

class Printer {
  public:
    explicit Printer(const Program& p) : prog_(p) {}

    std::string run() {
        os_ << "domain " << prog_.k << ";\n";
        os_ << "selectors";
        for (std::size_t i = 0; i < prog_.selectors.size(); ++i)
            os_ << (i ? ", " : " ") << prog_.selectors[i];
        os_ << ";\n";
        decls(prog_.shared, 0);
        if (!prog_.init.empty()) {
            os_ << "init {\n";
            for (const Stmt& s : prog_.init) stmt(s, 1);
            os_ << "}\n";
        }
        for (const Thread& t : prog_.threads) {
            os_ << "thread " << t.name << " {\n";
            decls(t.locals, 1);
            for (const Stmt& s : t.body) stmt(s, 1);
            os_ << "}\n";
        }
        return os_.str();
    }

  private:
    void indent(int n) {
        for (int i = 0; i < n; ++i) os_ << "  ";
    }
    void decls(const std::vector<VarDecl>& vs, int ind) {
        for (const VarDecl& v : vs) {
            indent(ind);
            os_ << (v.kind == VarKind::Ptr ? "ptr " : v.kind == VarKind::Data ? "data " : "age ")
                << v.name << ";\n";
        }
    }
    static std::string ref(const VarRef& r) {
        return r.is_sel() ? r.base + "->" + r.sel : r.base;
    }
    std::string cond(const CondExpr& c) {
        switch (c.kind) {
        case CondExpr::Kind::True: return "true";
        case CondExpr::Kind::Nondet: return "*";
        case CondExpr::Kind::PtrNull: return c.lhs + (c.neg ? " != " : " == ") + "null";
        case CondExpr::Kind::PtrEq:
        case CondExpr::Kind::DataEq: return c.lhs + (c.neg ? " != " : " == ") + c.rhs;
        case CondExpr::Kind::Cas: return "cas(" + ref(c.dst) + ", " + c.cmp + ", " + c.src + ")";
        case CondExpr::Kind::Dwcas:
            return "dwcas(" + ref(c.dst) + ":" + ref(c.dst_age) + ", " + c.cmp + ":" + c.cmp_age +
                   ", " + c.src + ")";
        }
        return "true";
    }
    void block(const std::vector<Stmt>& b, int ind) {
        os_ << "{\n";
        for (const Stmt& s : b) stmt(s, ind + 1);
        indent(ind);
        os_ << "}";
    }
    void stmt(const Stmt& s, int ind) {
        indent(ind);
        if (s.label >= 0) os_ << "@" << s.label << ": ";
        switch (s.kind) {
        case Stmt::Kind::Assign:
            os_ << ref(s.lhs) << " = ";
            if (s.rhs_null) os_ << "null";
            else if (s.rhs_malloc) os_ << "malloc";
            else if (s.rhs_nondet) os_ << "*";
            else if (s.rhs_const >= 0) os_ << s.rhs_const;
            else {
                os_ << ref(s.rhs);
                if (s.rhs_inc) os_ << " + 1";
            }
            os_ << ";\n";
            break;
        case Stmt::Kind::Free: os_ << "free(" << s.arg << ");\n"; break;
        case Stmt::Kind::EmitStmt:
            os_ << "emit " << s.event;
            if (!s.eargs.empty()) {
                os_ << "(";
                for (std::size_t i = 0; i < s.eargs.size(); ++i)
                    os_ << (i ? ", " : "") << ref(s.eargs[i]);
                os_ << ")";
            }
            os_ << ";\n";
            break;
        case Stmt::Kind::CasStmt: os_ << cond(s.cond) << ";\n"; break;
        case Stmt::Kind::Return: os_ << "return;\n"; break;
        case Stmt::Kind::Break: os_ << "break;\n"; break;
        case Stmt::Kind::Skip: os_ << "skip;\n"; break;
        case Stmt::Kind::If:
            os_ << "if (" << cond(s.cond) << ") ";
            block(s.body, ind);
            if (!s.els.empty()) {
                os_ << " else ";
                block(s.els, ind);
            }
            os_ << "\n";
            break;
        case Stmt::Kind::While:
            os_ << "while (" << cond(s.cond) << ") ";
            block(s.body, ind);
            os_ << "\n";
            break;
        case Stmt::Kind::Atomic:
            os_ << "atomic ";
            block(s.body, ind);
            os_ << "\n";
            break;
        case Stmt::Kind::Choose:
            os_ << "choose ";
            for (std::size_t i = 0; i < s.branches.size(); ++i) {
                if (i) os_ << " or ";
                block(s.branches[i], ind);
            }
            os_ << "\n";
            break;
        case Stmt::Kind::Forever:
            os_ << "forever ";
            block(s.body, ind);
            os_ << "\n";
            break;
        case Stmt::Kind::BlockStmt:
            block(s.body, ind);
            os_ << "\n";
            break;
        }
    }

    const Program& prog_;
    std::ostringstream os_;
};

} // namespace

Program parse_program(const std::string& text) { return Parser(text).parse(); }

std::vector<std::string> typecheck(const Program& prog) { return Checker(prog).run(); }

std::string print_program(const Program& prog) { return Printer(prog).run(); }

} // namespace heaplab
