#include <cctype>
#include <map>
#include <set>

#include "ast.hpp"

namespace poet::vsim {

namespace {

struct Tok {
    enum Kind { Ident, SysIdent, Number, String, Punct, End } kind;
    std::string text;
    int line = 0;
};

class Lexer {
public:
    Lexer(const std::string& src, std::string file) : src_(src), file_(std::move(file)) {}

    std::vector<Tok> run()
    {
        std::vector<Tok> out;
        while (true) {
            skip_space();
            if (pos_ >= src_.size())
                break;
            char c = src_[pos_];
            if (c == '`') {
                directive(out);
                continue;
            }
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string id = ident();
                auto it = defines_.find(id);
                out.push_back({Tok::Ident, id, line_});
                (void)it;
                continue;
            }
            if (c == '$') {
                ++pos_;
                out.push_back({Tok::SysIdent, "$" + ident(), line_});
                continue;
            }
            if (c == '\\')
                fail("escaped identifiers are not supported");
            if (std::isdigit(static_cast<unsigned char>(c)) || (c == '\'' && pos_ + 1 < src_.size())) {
                out.push_back({Tok::Number, number(), line_});
                continue;
            }
            if (c == '"') {
                out.push_back({Tok::String, string_lit(), line_});
                continue;
            }
            static const char* three[] = {"===", "!==", "<<<", ">>>"};
            static const char* two[] = {"==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "**", "~&", "~|", "~^", "^~", "+:", "-:", "(*"};
            bool matched = false;
            for (const char* t : three) {
                if (src_.compare(pos_, 3, t) == 0) {
                    out.push_back({Tok::Punct, t, line_});
                    pos_ += 3;
                    matched = true;
                    break;
                }
            }
            if (!matched) {
                for (const char* t : two) {
                    if (src_.compare(pos_, 2, t) == 0) {
                        if (std::string(t) == "(*") {
                            // "@(*)" is an event control, not an attribute.
                            if (src_.compare(pos_, 3, "(*)") == 0)
                                continue;
                            fail("attributes (* *) are not supported");
                        }
                        out.push_back({Tok::Punct, t, line_});
                        pos_ += 2;
                        matched = true;
                        break;
                    }
                }
            }
            if (!matched) {
                out.push_back({Tok::Punct, std::string(1, c), line_});
                ++pos_;
            }
        }
        out.push_back({Tok::End, "<end of file>", line_});
        return out;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const
    {
        throw CompileError(file_ + ":" + std::to_string(line_) + ": " + msg);
    }

    void skip_space()
    {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\n') {
                ++line_;
                ++pos_;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos_;
            } else if (src_.compare(pos_, 2, "//") == 0) {
                while (pos_ < src_.size() && src_[pos_] != '\n')
                    ++pos_;
            } else if (src_.compare(pos_, 2, "/*") == 0) {
                auto end = src_.find("*/", pos_ + 2);
                if (end == std::string::npos)
                    fail("unterminated block comment");
                for (std::size_t i = pos_; i < end; ++i)
                    if (src_[i] == '\n')
                        ++line_;
                pos_ = end + 2;
            } else {
                break;
            }
        }
    }

    std::string ident()
    {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' || src_[pos_] == '$'))
            ++pos_;
        return src_.substr(start, pos_ - start);
    }

    std::string rest_of_line()
    {
        std::size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n')
            ++pos_;
        return src_.substr(start, pos_ - start);
    }

    void directive(std::vector<Tok>& out)
    {
        ++pos_;
        std::string name = ident();
        if (name == "timescale" || name == "default_nettype" || name == "resetall" || name == "celldefine" ||
            name == "endcelldefine") {
            rest_of_line();
        } else if (name == "define") {
            skip_inline_space();
            std::string macro = ident();
            if (pos_ < src_.size() && src_[pos_] == '(')
                fail("function-like macros are not supported");
            std::string body = rest_of_line();
            defines_[macro] = body;
        } else if (name == "undef") {
            skip_inline_space();
            defines_.erase(ident());
        } else if (name == "include") {
            fail("`include is not supported");
        } else if (name == "ifdef" || name == "ifndef" || name == "else" || name == "endif" || name == "elsif") {
            fail("conditional compilation is not supported");
        } else {
            auto it = defines_.find(name);
            if (it == defines_.end())
                fail("unknown macro `" + name);
            Lexer sub(it->second, file_);
            sub.line_ = line_;
            sub.defines_ = defines_;
            auto toks = sub.run();
            toks.pop_back();
            for (auto& t : toks)
                t.line = line_;
            out.insert(out.end(), toks.begin(), toks.end());
        }
    }

    void skip_inline_space()
    {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t'))
            ++pos_;
    }

    std::string number()
    {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        // Allow "8 'hFF".
        std::size_t save = pos_;
        skip_inline_space();
        if (pos_ < src_.size() && src_[pos_] == '\'') {
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == 's' || src_[pos_] == 'S'))
                fail("signed literals are not supported");
            if (pos_ >= src_.size() || std::string("bBoOdDhH").find(src_[pos_]) == std::string::npos)
                fail("malformed based literal");
            ++pos_;
            skip_inline_space();
            while (pos_ < src_.size() &&
                   (std::isxdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' || src_[pos_] == 'x' ||
                    src_[pos_] == 'X' || src_[pos_] == 'z' || src_[pos_] == 'Z' || src_[pos_] == '?'))
                ++pos_;
        } else {
            pos_ = save;
            if (pos_ < src_.size() && src_[pos_] == '.')
                fail("real numbers are not supported");
        }
        std::string text;
        for (std::size_t i = start; i < pos_; ++i)
            if (src_[i] != ' ' && src_[i] != '\t')
                text.push_back(src_[i]);
        return text;
    }

    std::string string_lit()
    {
        ++pos_;
        std::string out;
        while (pos_ < src_.size() && src_[pos_] != '"') {
            char c = src_[pos_++];
            if (c == '\n')
                fail("newline in string literal");
            if (c == '\\' && pos_ < src_.size()) {
                char e = src_[pos_++];
                switch (e) {
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                case '\\': out.push_back('\\'); break;
                case '"': out.push_back('"'); break;
                default: out.push_back(e); break;
                }
            } else {
                out.push_back(c);
            }
        }
        if (pos_ >= src_.size())
            fail("unterminated string literal");
        ++pos_;
        return out;
    }

    const std::string& src_;
    std::string file_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::map<std::string, std::string> defines_;
};

Value parse_literal(const std::string& text, bool& sized, const std::string& where)
{
    auto tick = text.find('\'');
    if (tick == std::string::npos) {
        sized = false;
        std::string digits;
        for (char c : text)
            if (c != '_')
                digits.push_back(c);
        unsigned long long v = 0;
        try {
            v = std::stoull(digits);
        } catch (const std::exception&) {
            throw CompileError(where + ": decimal literal out of range");
        }
        return Value::known(32, v);
    }
    unsigned width = 32;
    sized = tick > 0;
    if (sized) {
        std::string w;
        for (std::size_t i = 0; i < tick; ++i)
            if (text[i] != '_')
                w.push_back(text[i]);
        width = static_cast<unsigned>(std::stoul(w));
        if (width == 0 || width > kMaxWidth)
            throw CompileError(where + ": literal width " + w + " is not supported (max 64)");
    }
    char base = static_cast<char>(std::tolower(static_cast<unsigned char>(text[tick + 1])));
    std::string digits;
    for (std::size_t i = tick + 2; i < text.size(); ++i)
        if (text[i] != '_')
            digits.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
    if (digits.empty())
        throw CompileError(where + ": literal has no digits");

    Value v{width, 0, 0};
    if (base == 'd') {
        if (digits == "x" || digits == "z" || digits == "?")
            return digits == "x" ? Value::all_x(width) : Value::all_z(width);
        unsigned long long n = 0;
        try {
            n = std::stoull(digits);
        } catch (const std::exception&) {
            throw CompileError(where + ": decimal literal out of range");
        }
        return Value::known(width, n);
    }
    const unsigned bits = base == 'h' ? 4 : base == 'o' ? 3 : 1;
    unsigned pos = 0;
    char top = digits.front();
    for (std::size_t i = digits.size(); i-- > 0;) {
        char c = digits[i];
        std::uint64_t dv = 0, du = 0;
        if (c == 'x') {
            du = (1ULL << bits) - 1;
        } else if (c == 'z' || c == '?') {
            du = (1ULL << bits) - 1;
            dv = du;
        } else {
            dv = static_cast<std::uint64_t>(std::stoul(std::string(1, c), nullptr, 16));
            if (dv >= (1ULL << bits))
                throw CompileError(where + ": digit '" + std::string(1, c) + "' invalid for base");
        }
        if (pos < 64) {
            v.val |= dv << pos;
            v.unk |= du << pos;
        }
        pos += bits;
    }
    // An x/z leading digit extends to fill the width.
    if ((top == 'x' || top == 'z' || top == '?') && pos < width) {
        std::uint64_t fill = Value::mask(width) & ~Value::mask(pos);
        v.unk |= fill;
        if (top != 'x')
            v.val |= fill;
    }
    v.val &= Value::mask(width);
    v.unk &= Value::mask(width);
    return v;
}

class Parser {
public:
    Parser(std::vector<Tok> toks, std::string file) : toks_(std::move(toks)), file_(std::move(file)) {}

    std::vector<Module> run()
    {
        std::vector<Module> mods;
        while (!at_end()) {
            if (is("module") || is("macromodule"))
                mods.push_back(module());
            else
                fail("expected 'module', found '" + peek().text + "'");
        }
        return mods;
    }

private:
    const Tok& peek(std::size_t ahead = 0) const
    {
        std::size_t i = std::min(pos_ + ahead, toks_.size() - 1);
        return toks_[i];
    }
    bool at_end() const { return peek().kind == Tok::End; }
    bool is(std::string_view t) const { return peek().kind != Tok::String && peek().text == t; }
    bool accept(std::string_view t)
    {
        if (is(t)) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(std::string_view t)
    {
        if (!accept(t))
            fail("expected '" + std::string(t) + "', found '" + peek().text + "'");
    }
    Loc loc() const { return Loc{file_, peek().line}; }
    [[noreturn]] void fail(const std::string& msg) const { throw CompileError(loc().str() + ": " + msg); }

    std::string ident()
    {
        if (peek().kind != Tok::Ident)
            fail("expected identifier, found '" + peek().text + "'");
        return toks_[pos_++].text;
    }

    static bool keyword(const std::string& s)
    {
        static const std::set<std::string> kw{
            "module", "endmodule", "input", "output", "inout", "wire", "reg", "integer", "assign", "always",
            "initial", "begin", "end", "if", "else", "case", "casez", "casex", "endcase", "default", "for",
            "while", "repeat", "forever", "parameter", "localparam", "posedge", "negedge", "or", "function",
            "endfunction", "task", "endtask", "generate", "endgenerate", "genvar", "signed", "logic", "always_ff",
            "always_comb", "always_latch", "real", "time", "tri", "supply0", "supply1"};
        return kw.count(s) > 0;
    }

    // -- module level -----------------------------------------------------------------------------

    Module module()
    {
        Module m;
        m.loc = loc();
        ++pos_;
        m.name = ident();
        module_ = &m;
        if (accept("#")) {
            expect("(");
            while (!is(")")) {
                if (accept("parameter"))
                    param_list(m, false, true);
                else if (peek().kind == Tok::Ident)
                    param_list(m, false, true);
                if (!accept(","))
                    break;
            }
            expect(")");
        }
        if (accept("(")) {
            if (!is(")"))
                port_list(m);
            expect(")");
        }
        expect(";");
        while (!accept("endmodule")) {
            if (at_end())
                fail("missing endmodule for '" + m.name + "'");
            item(m);
        }
        module_ = nullptr;
        return m;
    }

    void reject_unsupported_type()
    {
        if (is("signed"))
            fail("signed declarations are not supported");
        if (is("logic") || is("real") || is("time") || is("tri"))
            fail("'" + peek().text + "' declarations are not supported");
    }

    std::optional<Range> opt_range()
    {
        if (!accept("["))
            return std::nullopt;
        Range r;
        r.msb = expr();
        expect(":");
        r.lsb = expr();
        expect("]");
        return r;
    }

    NetDecl* find_net(Module& m, const std::string& name)
    {
        for (auto& n : m.nets)
            if (n.name == name)
                return &n;
        return nullptr;
    }

    PortInfo* find_port(Module& m, const std::string& name)
    {
        for (auto& p : m.ports)
            if (p.name == name)
                return &p;
        return nullptr;
    }

    void declare(Module& m, const std::string& name, const std::string& kind, std::optional<Range> range, Loc l)
    {
        if (NetDecl* existing = find_net(m, name)) {
            if (kind == "reg" || kind == "integer")
                existing->kind = kind;
            if (range && !existing->range)
                existing->range = std::move(range);
            return;
        }
        NetDecl d;
        d.kind = kind;
        d.range = std::move(range);
        d.name = name;
        d.loc = std::move(l);
        m.nets.push_back(std::move(d));
    }

    void port_list(Module& m)
    {
        bool ansi = is("input") || is("output") || is("inout");
        if (!ansi) {
            do {
                m.ports.push_back({ident(), ""});
            } while (accept(","));
            return;
        }
        std::string dir;
        std::string kind = "wire";
        std::optional<Range> range;
        do {
            if (is("input") || is("output") || is("inout")) {
                dir = toks_[pos_++].text;
                kind = "wire";
                if (accept("reg"))
                    kind = "reg";
                else
                    accept("wire");
                reject_unsupported_type();
                range = opt_range();
            }
            Loc l = loc();
            std::string name = ident();
            if (is("["))
                fail("array ports are not supported");
            m.ports.push_back({name, dir});
            std::optional<Range> copy;
            if (range)
                copy = clone_range(*range);
            declare(m, name, kind, std::move(copy), l);
        } while (accept(","));
    }

    Range clone_range(const Range& r) { return Range{clone(*r.msb), clone(*r.lsb)}; }

    ExprPtr clone(const Expr& e)
    {
        auto c = std::make_unique<Expr>(e.kind, e.loc);
        c->number = e.number;
        c->sized = e.sized;
        c->text = e.text;
        c->ascending = e.ascending;
        for (const auto& a : e.args)
            c->args.push_back(a ? clone(*a) : nullptr);
        return c;
    }

    void param_list(Module& m, bool local, bool in_header)
    {
        if (accept("integer")) {
        }
        reject_unsupported_type();
        if (is("["))
            opt_range();  // parameter ranges are ignored; values are 32-bit or their literal width
        do {
            if (in_header && (is("parameter") || is("localparam")))
                accept(peek().text);
            ParamDecl p;
            p.name = ident();
            expect("=");
            p.value = expr();
            p.local = local;
            m.params.push_back(std::move(p));
        } while (!in_header && accept(","));
    }

    void item(Module& m)
    {
        Loc l = loc();
        if (is("input") || is("output") || is("inout")) {
            std::string dir = toks_[pos_++].text;
            std::string kind = "wire";
            if (accept("reg"))
                kind = "reg";
            else
                accept("wire");
            reject_unsupported_type();
            auto range = opt_range();
            do {
                std::string name = ident();
                PortInfo* p = find_port(m, name);
                if (!p)
                    fail("'" + name + "' is not in the port list");
                p->direction = dir;
                std::optional<Range> copy;
                if (range)
                    copy = clone_range(*range);
                declare(m, name, kind, std::move(copy), l);
            } while (accept(","));
            expect(";");
        } else if (is("wire") || is("reg") || is("integer")) {
            std::string kind = toks_[pos_++].text;
            if (kind == "integer")
                kind = "integer";
            reject_unsupported_type();
            std::optional<Range> range;
            if (kind != "integer")
                range = opt_range();
            do {
                Loc nl = loc();
                std::string name = ident();
                if (is("["))
                    fail("memories (arrays) are not supported");
                std::optional<Range> copy;
                if (range)
                    copy = clone_range(*range);
                declare(m, name, kind, std::move(copy), nl);
                if (accept("=")) {
                    ExprPtr init = expr();
                    if (kind == "wire") {
                        auto lhs = std::make_unique<Expr>(Expr::Kind::Ident, nl);
                        lhs->text = name;
                        m.assigns.push_back({std::move(lhs), std::move(init), nl});
                    } else {
                        find_net(m, name)->init = std::move(init);
                    }
                }
            } while (accept(","));
            expect(";");
        } else if (accept("parameter")) {
            param_list(m, false, false);
            expect(";");
        } else if (accept("localparam")) {
            param_list(m, true, false);
            expect(";");
        } else if (accept("assign")) {
            do {
                ContAssign a;
                a.loc = loc();
                a.lhs = lvalue();
                expect("=");
                a.rhs = expr();
                m.assigns.push_back(std::move(a));
            } while (accept(","));
            expect(";");
        } else if (accept("always")) {
            m.always.push_back(stmt());
        } else if (accept("initial")) {
            m.initial.push_back(stmt());
        } else if (is("function") || is("task") || is("generate") || is("genvar") || is("always_ff") ||
                   is("always_comb") || is("always_latch") || is("specify")) {
            fail("'" + peek().text + "' is not supported by this simulator");
        } else if (peek().kind == Tok::Ident && !keyword(peek().text)) {
            instance(m);
        } else {
            fail("unexpected '" + peek().text + "' in module body");
        }
    }

    void instance(Module& m)
    {
        Loc l = loc();
        std::string mod = ident();
        std::vector<Connection> params;
        if (accept("#")) {
            expect("(");
            connections(params);
            expect(")");
        }
        do {
            Instance inst;
            inst.loc = l;
            inst.module = mod;
            for (const auto& p : params)
                inst.params.push_back({p.port, p.expr ? clone(*p.expr) : nullptr});
            inst.name = ident();
            if (is("["))
                fail("instance arrays are not supported");
            expect("(");
            if (!is(")"))
                connections(inst.ports);
            expect(")");
            m.instances.push_back(std::move(inst));
        } while (accept(","));
        expect(";");
    }

    void connections(std::vector<Connection>& out)
    {
        do {
            Connection c;
            if (accept(".")) {
                c.port = ident();
                expect("(");
                if (!is(")"))
                    c.expr = expr();
                expect(")");
            } else {
                c.expr = expr();
            }
            out.push_back(std::move(c));
        } while (accept(","));
    }

    // -- statements -------------------------------------------------------------------------------

    StmtPtr stmt()
    {
        Loc l = loc();
        if (accept(";"))
            return std::make_unique<Stmt>(Stmt::Kind::Null, l);
        if (accept("begin")) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::Block, l);
            if (accept(":"))
                ident();
            while (!accept("end")) {
                if (at_end())
                    fail("missing 'end'");
                s->body.push_back(stmt());
            }
            return s;
        }
        if (accept("if")) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::If, l);
            expect("(");
            s->rhs = expr();
            expect(")");
            s->body.push_back(stmt());
            if (accept("else"))
                s->body.push_back(stmt());
            return s;
        }
        if (is("case") || is("casez") || is("casex")) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::Case, l);
            s->case_kind = toks_[pos_++].text;
            expect("(");
            s->rhs = expr();
            expect(")");
            while (!accept("endcase")) {
                if (at_end())
                    fail("missing 'endcase'");
                CaseItem item;
                if (accept("default")) {
                    accept(":");
                } else {
                    do {
                        item.labels.push_back(expr());
                    } while (accept(","));
                    expect(":");
                }
                item.body = stmt();
                s->items.push_back(std::move(item));
            }
            return s;
        }
        if (accept("for")) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::For, l);
            expect("(");
            s->init = assignment(false);
            expect(";");
            s->rhs = expr();
            expect(";");
            s->step = assignment(false);
            expect(")");
            s->body.push_back(stmt());
            return s;
        }
        if (accept("while")) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::While, l);
            expect("(");
            s->rhs = expr();
            expect(")");
            s->body.push_back(stmt());
            return s;
        }
        if (accept("repeat")) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::Repeat, l);
            expect("(");
            s->rhs = expr();
            expect(")");
            s->body.push_back(stmt());
            return s;
        }
        if (accept("forever")) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::Forever, l);
            s->body.push_back(stmt());
            return s;
        }
        if (accept("#")) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::Delay, l);
            s->rhs = delay_value();
            if (!accept(";"))
                s->body.push_back(stmt());
            return s;
        }
        if (accept("@")) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::Event, l);
            event_control(*s);
            if (!accept(";"))
                s->body.push_back(stmt());
            return s;
        }
        if (peek().kind == Tok::SysIdent) {
            auto s = std::make_unique<Stmt>(Stmt::Kind::SysTask, l);
            s->task = toks_[pos_++].text;
            if (accept("(")) {
                if (!is(")")) {
                    do {
                        if (is(",")) {
                            s->task_args.push_back(nullptr);
                            continue;
                        }
                        s->task_args.push_back(expr());
                    } while (accept(","));
                }
                expect(")");
            }
            expect(";");
            return s;
        }
        if (is("disable") || is("wait") || is("fork") || is("force") || is("release") || is("deassign"))
            fail("'" + peek().text + "' statements are not supported");
        auto s = assignment(true);
        expect(";");
        return s;
    }

    StmtPtr assignment(bool allow_nonblocking)
    {
        Loc l = loc();
        ExprPtr lhs = lvalue();
        Stmt::Kind kind = Stmt::Kind::Assign;
        if (accept("<=")) {
            if (!allow_nonblocking)
                fail("nonblocking assignment not allowed here");
            kind = Stmt::Kind::NonBlocking;
        } else {
            expect("=");
        }
        if (is("#") || is("@"))
            fail("intra-assignment timing controls are not supported");
        auto s = std::make_unique<Stmt>(kind, l);
        s->lhs = std::move(lhs);
        s->rhs = expr();
        return s;
    }

    ExprPtr delay_value()
    {
        if (accept("(")) {
            ExprPtr e = expr();
            expect(")");
            return e;
        }
        return primary();
    }

    void event_control(Stmt& s)
    {
        if (accept("*")) {
            s.star = true;
            return;
        }
        if (!accept("(")) {
            EventExpr ev;
            ev.expr = primary();
            s.events.push_back(std::move(ev));
            return;
        }
        if (accept("*")) {
            expect(")");
            s.star = true;
            return;
        }
        do {
            EventExpr ev;
            if (accept("posedge"))
                ev.edge = EventExpr::Edge::Pos;
            else if (accept("negedge"))
                ev.edge = EventExpr::Edge::Neg;
            ev.expr = expr();
            s.events.push_back(std::move(ev));
        } while (accept("or") || accept(","));
        expect(")");
    }

    // -- expressions ------------------------------------------------------------------------------

    ExprPtr lvalue()
    {
        Loc l = loc();
        if (accept("{")) {
            auto e = std::make_unique<Expr>(Expr::Kind::Concat, l);
            do {
                e->args.push_back(lvalue());
            } while (accept(","));
            expect("}");
            return e;
        }
        auto id = std::make_unique<Expr>(Expr::Kind::Ident, l);
        id->text = ident();
        return selects(std::move(id));
    }

    ExprPtr selects(ExprPtr base)
    {
        if (!is("["))
            return base;
        Loc l = loc();
        expect("[");
        ExprPtr first = expr();
        if (accept(":")) {
            auto e = std::make_unique<Expr>(Expr::Kind::PartSelect, l);
            e->text = base->text;
            e->args.push_back(std::move(first));
            e->args.push_back(expr());
            expect("]");
            return e;
        }
        if (is("+:") || is("-:")) {
            auto e = std::make_unique<Expr>(Expr::Kind::IndexedPart, l);
            e->ascending = toks_[pos_++].text == "-:";
            e->text = base->text;
            e->args.push_back(std::move(first));
            e->args.push_back(expr());
            expect("]");
            return e;
        }
        expect("]");
        auto e = std::make_unique<Expr>(Expr::Kind::BitSelect, l);
        e->text = base->text;
        e->args.push_back(std::move(first));
        if (is("["))
            fail("multi-dimensional selects are not supported");
        return e;
    }

    ExprPtr expr() { return ternary(); }

    ExprPtr ternary()
    {
        ExprPtr c = binary(0);
        if (is("?")) {
            Loc l = loc();
            ++pos_;
            auto e = std::make_unique<Expr>(Expr::Kind::Ternary, l);
            e->args.push_back(std::move(c));
            e->args.push_back(ternary());
            expect(":");
            e->args.push_back(ternary());
            return e;
        }
        return c;
    }

    static int precedence(const std::string& op)
    {
        static const std::map<std::string, int> prec{
            {"||", 1}, {"&&", 2}, {"|", 3}, {"^", 4}, {"^~", 4}, {"~^", 4}, {"&", 5},
            {"==", 6}, {"!=", 6}, {"===", 6}, {"!==", 6},
            {"<", 7}, {"<=", 7}, {">", 7}, {">=", 7},
            {"<<", 8}, {">>", 8}, {"<<<", 8}, {">>>", 8},
            {"+", 9}, {"-", 9}, {"*", 10}, {"/", 10}, {"%", 10}, {"**", 11}};
        auto it = prec.find(op);
        return it == prec.end() ? -1 : it->second;
    }

    ExprPtr binary(int min_prec)
    {
        ExprPtr lhs = unary();
        while (peek().kind == Tok::Punct) {
            const std::string op = peek().text;
            int p = precedence(op);
            if (p < 0 || p <= min_prec - 1 || p < min_prec)
                break;
            Loc l = loc();
            ++pos_;
            ExprPtr rhs = binary(op == "**" ? p : p + 1);
            auto e = std::make_unique<Expr>(Expr::Kind::Binary, l);
            e->text = op;
            e->args.push_back(std::move(lhs));
            e->args.push_back(std::move(rhs));
            lhs = std::move(e);
        }
        return lhs;
    }

    ExprPtr unary()
    {
        static const std::set<std::string> ops{"+", "-", "!", "~", "&", "~&", "|", "~|", "^", "~^", "^~"};
        if (peek().kind == Tok::Punct && ops.count(peek().text)) {
            Loc l = loc();
            auto e = std::make_unique<Expr>(Expr::Kind::Unary, l);
            e->text = toks_[pos_++].text;
            e->args.push_back(unary());
            return e;
        }
        return primary();
    }

    ExprPtr primary()
    {
        Loc l = loc();
        const Tok& t = peek();
        if (t.kind == Tok::Number) {
            ++pos_;
            auto e = std::make_unique<Expr>(Expr::Kind::Number, l);
            e->number = parse_literal(t.text, e->sized, l.str());
            e->text = t.text;
            return e;
        }
        if (t.kind == Tok::String) {
            ++pos_;
            auto e = std::make_unique<Expr>(Expr::Kind::String, l);
            e->text = t.text;
            return e;
        }
        if (t.kind == Tok::SysIdent) {
            ++pos_;
            auto e = std::make_unique<Expr>(Expr::Kind::SysCall, l);
            e->text = t.text;
            if (accept("(")) {
                if (!is(")")) {
                    do {
                        e->args.push_back(expr());
                    } while (accept(","));
                }
                expect(")");
            }
            return e;
        }
        if (accept("(")) {
            ExprPtr e = expr();
            expect(")");
            return e;
        }
        if (accept("{")) {
            ExprPtr first = expr();
            if (accept("{")) {
                auto e = std::make_unique<Expr>(Expr::Kind::Replicate, l);
                e->args.push_back(std::move(first));
                do {
                    e->args.push_back(expr());
                } while (accept(","));
                expect("}");
                expect("}");
                return e;
            }
            auto e = std::make_unique<Expr>(Expr::Kind::Concat, l);
            e->args.push_back(std::move(first));
            while (accept(","))
                e->args.push_back(expr());
            expect("}");
            return e;
        }
        if (t.kind == Tok::Ident && !keyword(t.text)) {
            auto e = std::make_unique<Expr>(Expr::Kind::Ident, l);
            e->text = ident();
            if (is("("))
                fail("function calls are not supported");
            if (is("."))
                fail("hierarchical references are not supported");
            return selects(std::move(e));
        }
        fail("unexpected '" + t.text + "' in expression");
    }

    std::vector<Tok> toks_;
    std::string file_;
    std::size_t pos_ = 0;
    Module* module_ = nullptr;
};

}  // namespace

std::vector<Module> parse_source(const std::string& text, const std::string& file)
{
    Lexer lex(text, file);
    Parser p(lex.run(), file);
    return p.run();
}

}  // namespace poet::vsim
