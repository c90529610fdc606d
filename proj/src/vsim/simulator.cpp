#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "ast.hpp"

namespace poet::vsim {

namespace {

// ---------------------------------------------------------------------------
// Compiled representation

struct Signal {
    std::string name;
    unsigned width = 1;
    long lsb = 0;          // declared index of bit 0
    bool descending = true;
    Value value;
    std::vector<int> waiting;      // processes blocked on an event involving this signal
    std::vector<int> continuous;   // continuous assignments reading this signal

    std::optional<unsigned> offset(long index) const
    {
        long off = descending ? index - lsb : lsb - index;
        if (off < 0 || off >= static_cast<long>(width))
            return std::nullopt;
        return static_cast<unsigned>(off);
    }
};

enum class Op {
    Const, Sig, BitSel, PartSel, IndexedPart, Time,
    Neg, Not, Plus, LogNot, RedAnd, RedNand, RedOr, RedNor, RedXor, RedXnor,
    Add, Sub, Mul, Div, Mod, Pow, And, Or, Xor, Xnor,
    Eq, Ne, CaseEq, CaseNe, Lt, Le, Gt, Ge, LogAnd, LogOr, Shl, Shr,
    Ternary, Concat, Replicate, String,
};

struct CExpr {
    Op op = Op::Const;
    unsigned width = 1;  // self-determined width
    Value constant;
    int sig = -1;
    unsigned offset = 0;      // constant part select
    unsigned part_width = 1;  // part / indexed part width
    bool ascending = false;   // "-:" indexed part
    long count = 1;           // replication
    std::string text;         // string literal
    std::vector<CExpr> args;
};

struct LPart {
    int sig = -1;
    enum class Kind { Whole, Bit, Part, Indexed } kind = Kind::Whole;
    unsigned offset = 0;
    unsigned width = 1;
    bool ascending = false;
    std::vector<CExpr> index;  // dynamic index (0 or 1 element)
};

struct CLval {
    std::vector<LPart> parts;  // MSB first
    unsigned width = 0;
};

struct WaitEvent {
    EventExpr::Edge edge = EventExpr::Edge::Any;
    CExpr expr;
    std::vector<int> sigs;
    Value last;
};

struct Instr {
    enum class Kind { Assign, NBAssign, JumpIfFalse, Jump, Delay, Wait, SysTask, Case, SetCounter, LoopCounter, Halt };
    Kind kind = Kind::Halt;
    CLval lhs;
    CExpr expr;
    std::size_t target = 0;
    std::vector<WaitEvent> events;
    std::string task;
    std::vector<std::optional<CExpr>> task_args;
    std::string scope;
    // Case
    std::string case_kind;
    std::vector<std::pair<std::vector<CExpr>, std::size_t>> arms;
    std::size_t default_target = 0;
    int counter = 0;
    Loc loc;
};

struct Process {
    std::vector<Instr> code;
    std::size_t pc = 0;
    enum class State { Ready, Waiting, Delayed, Done } state = State::Ready;
    std::vector<long long> counters;
    std::vector<WaitEvent> events;  // active wait
    std::string where;
};

struct Continuous {
    CLval lhs;
    CExpr rhs;
    bool queued = false;
};

struct Pending {
    CLval lhs;  // with resolved dynamic offsets folded into `offsets`
    std::vector<std::optional<unsigned>> offsets;
    Value value;
};

// ---------------------------------------------------------------------------
// Value operations

Value truth(const Value& v)
{
    if (v.has_known_one())
        return Value::known(1, 1);
    if (v.is_zero())
        return Value::known(1, 0);
    return Value::all_x(1);
}

Value bool_value(bool b) { return Value::known(1, b ? 1 : 0); }

Value bit_and(const Value& a, const Value& b, unsigned w)
{
    const std::uint64_t m = Value::mask(w);
    const std::uint64_t zero_a = ~a.val & ~a.unk & m;
    const std::uint64_t zero_b = ~b.val & ~b.unk & m;
    const std::uint64_t one = a.val & ~a.unk & b.val & ~b.unk & m;
    const std::uint64_t zero = zero_a | zero_b;
    return Value{w, one, m & ~(one | zero)};
}

Value bit_or(const Value& a, const Value& b, unsigned w)
{
    const std::uint64_t m = Value::mask(w);
    const std::uint64_t one = ((a.val & ~a.unk) | (b.val & ~b.unk)) & m;
    const std::uint64_t zero = (~a.val & ~a.unk & ~b.val & ~b.unk) & m;
    return Value{w, one, m & ~(one | zero)};
}

Value bit_xor(const Value& a, const Value& b, unsigned w)
{
    const std::uint64_t m = Value::mask(w);
    const std::uint64_t unk = (a.unk | b.unk) & m;
    return Value{w, (a.val ^ b.val) & ~unk & m, unk};
}

Value bit_not(const Value& a, unsigned w)
{
    const std::uint64_t m = Value::mask(w);
    return Value{w, ~a.val & ~a.unk & m, a.unk & m};
}

bool case_match(const Value& a, const Value& b, const std::string& kind)
{
    const std::uint64_t m = Value::mask(a.width);
    std::uint64_t care = m;
    if (kind == "casez") {
        const std::uint64_t za = a.unk & a.val;
        const std::uint64_t zb = b.unk & b.val;
        care &= ~(za | zb);
    } else if (kind == "casex") {
        care &= ~(a.unk | b.unk);
    }
    return ((a.val ^ b.val) & care) == 0 && ((a.unk ^ b.unk) & care) == 0;
}

bool posedge(char from, char to)
{
    return (from == '0' && to != '0') || (from != '1' && to == '1');
}

bool negedge(char from, char to)
{
    return (from == '1' && to != '1') || (from != '0' && to == '0');
}

// ---------------------------------------------------------------------------

class Simulator {
public:
    Simulator(const std::vector<SourceFile>& files, const SimOptions& options, std::ostream& out)
        : options_(options), out_(out)
    {
        for (const auto& f : files) {
            for (auto& m : parse_source(f.text, f.name)) {
                std::string name = m.name;
                if (modules_.count(name))
                    throw CompileError(m.loc.str() + ": module '" + name + "' redefined");
                modules_.emplace(name, std::move(m));
            }
        }
        if (modules_.empty())
            throw CompileError("no modules found");
        const Module& top = modules_.at(find_top());
        std::map<std::string, Value> no_overrides;
        std::vector<Value> no_positional;
        instantiate(top, top.name, no_overrides, no_positional, 0);
    }

    SimReport run()
    {
        for (std::size_t i = 0; i < continuous_.size(); ++i) {
            continuous_[i].queued = true;
            active_.push_back({true, static_cast<int>(i)});
        }
        for (std::size_t i = 0; i < processes_.size(); ++i)
            active_.push_back({false, static_cast<int>(i)});

        SimReport report;
        while (!finished_) {
            std::size_t activations = 0;
            while (!finished_ && (!active_.empty() || !nba_.empty())) {
                while (!finished_ && !active_.empty()) {
                    if (++activations > kMaxActivationsPerStep)
                        throw RuntimeError("zero-delay oscillation at time " + std::to_string(time_));
                    Entry e = active_.front();
                    active_.pop_front();
                    if (e.cont)
                        run_continuous(e.id);
                    else
                        run_process(e.id);
                }
                if (finished_)
                    break;
                if (!nba_.empty()) {
                    auto batch = std::move(nba_);
                    nba_.clear();
                    for (auto& p : batch)
                        write_resolved(p.lhs, p.offsets, p.value);
                }
            }
            if (finished_ || future_.empty())
                break;
            auto it = future_.begin();
            if (it->first > options_.max_time) {
                report.time_limit_hit = true;
                break;
            }
            time_ = it->first;
            for (int id : it->second) {
                processes_[id].state = Process::State::Ready;
                active_.push_back({false, id});
            }
            future_.erase(it);
        }
        report.finish_called = finished_;
        report.end_time = time_;
        return report;
    }

private:
    static constexpr std::size_t kMaxActivationsPerStep = 2'000'000;
    static constexpr std::size_t kMaxInstrPerActivation = 20'000'000;

    struct Entry {
        bool cont;
        int id;
    };

    struct Scope {
        std::string prefix;
        std::map<std::string, int> sigs;
        std::map<std::string, Value> params;
    };

    // -- elaboration ------------------------------------------------------------------------------

    std::string find_top() const
    {
        if (options_.top) {
            if (!modules_.count(*options_.top))
                throw CompileError("top module '" + *options_.top + "' not found");
            return *options_.top;
        }
        std::set<std::string> used;
        for (const auto& [name, m] : modules_)
            for (const auto& inst : m.instances)
                used.insert(inst.module);
        std::vector<std::string> roots;
        for (const auto& [name, m] : modules_)
            if (!used.count(name))
                roots.push_back(name);
        if (roots.size() != 1) {
            std::string list;
            for (const auto& r : roots)
                list += " " + r;
            throw CompileError("cannot determine the top module; candidates:" + list);
        }
        return roots.front();
    }

    [[noreturn]] static void fail(const Loc& l, const std::string& msg) { throw CompileError(l.str() + ": " + msg); }

    Value const_eval(const Expr& e, const Scope& s)
    {
        CExpr c = compile(e, s, /*allow_signals=*/false);
        return eval(c, c.width);
    }

    long const_long(const Expr& e, const Scope& s)
    {
        Value v = const_eval(e, s);
        if (!v.fully_known())
            fail(e.loc, "constant expression has unknown bits");
        return static_cast<long>(static_cast<std::int64_t>(v.val));
    }

    void instantiate(const Module& m, const std::string& path, const std::map<std::string, Value>& named,
                     const std::vector<Value>& positional, int depth)
    {
        if (depth > 32)
            fail(m.loc, "instantiation depth exceeds 32 (recursive instance?)");
        Scope s;
        s.prefix = path;

        std::size_t pos_index = 0;
        for (const auto& p : m.params) {
            Value v = const_eval(*p.value, s);
            if (!p.local) {
                if (auto it = named.find(p.name); it != named.end())
                    v = it->second;
                else if (pos_index < positional.size())
                    v = positional[pos_index];
                ++pos_index;
            }
            s.params[p.name] = v;
        }
        for (const auto& [name, v] : named) {
            (void)v;
            bool known = std::any_of(m.params.begin(), m.params.end(),
                                     [&](const ParamDecl& p) { return p.name == name && !p.local; });
            if (!known)
                fail(m.loc, "module '" + m.name + "' has no parameter '" + name + "'");
        }

        for (const auto& port : m.ports) {
            if (port.direction.empty())
                fail(m.loc, "port '" + port.name + "' of '" + m.name + "' has no direction");
            if (port.direction == "inout")
                fail(m.loc, "inout ports are not supported");
        }

        for (const auto& n : m.nets) {
            Signal sig;
            sig.name = path + "." + n.name;
            if (n.kind == "integer") {
                sig.width = 32;
            } else if (n.range) {
                long msb = const_long(*n.range->msb, s);
                long lsb = const_long(*n.range->lsb, s);
                sig.descending = msb >= lsb;
                sig.lsb = lsb;
                long w = (msb >= lsb ? msb - lsb : lsb - msb) + 1;
                if (w > static_cast<long>(kMaxWidth))
                    fail(n.loc, "'" + n.name + "' is " + std::to_string(w) + " bits wide; at most 64 are supported");
                sig.width = static_cast<unsigned>(w);
            }
            sig.value = n.kind == "wire" ? Value::all_z(sig.width) : Value::all_x(sig.width);
            if (s.sigs.count(n.name))
                fail(n.loc, "'" + n.name + "' declared twice");
            if (s.params.count(n.name))
                fail(n.loc, "'" + n.name + "' is already a parameter");
            s.sigs[n.name] = static_cast<int>(signals_.size());
            signals_.push_back(std::move(sig));
        }
        for (const auto& n : m.nets) {
            if (n.init) {
                Value v = const_eval(*n.init, s);
                Signal& sig = signals_[s.sigs.at(n.name)];
                sig.value = v.resized(sig.width);
            }
        }

        // Implicit 1-bit nets for undeclared identifiers in port connections.
        for (const auto& inst : m.instances)
            for (const auto& c : inst.ports)
                if (c.expr && c.expr->kind == Expr::Kind::Ident && !s.sigs.count(c.expr->text) &&
                    !s.params.count(c.expr->text)) {
                    Signal sig;
                    sig.name = path + "." + c.expr->text;
                    sig.value = Value::all_z(1);
                    s.sigs[c.expr->text] = static_cast<int>(signals_.size());
                    signals_.push_back(std::move(sig));
                }

        for (const auto& a : m.assigns)
            add_continuous(compile_lval(*a.lhs, s), compile(*a.rhs, s, true));

        for (const auto& st : m.initial)
            add_process(*st, s, false, path);
        for (const auto& st : m.always)
            add_process(*st, s, true, path);

        for (const auto& inst : m.instances) {
            auto it = modules_.find(inst.module);
            if (it == modules_.end())
                fail(inst.loc, "unknown module '" + inst.module + "'");
            const Module& child = it->second;
            std::map<std::string, Value> child_named;
            std::vector<Value> child_positional;
            for (const auto& p : inst.params) {
                if (!p.expr)
                    continue;
                Value v = const_eval(*p.expr, s);
                if (p.port.empty())
                    child_positional.push_back(v);
                else
                    child_named[p.port] = v;
            }
            const std::string child_path = path + "." + inst.name;
            instantiate(child, child_path, child_named, child_positional, depth + 1);
            connect(inst, child, child_path, s);
        }
    }

    void connect(const Instance& inst, const Module& child, const std::string& child_path, const Scope& parent)
    {
        auto child_sig = [&](const std::string& port) {
            return sig_index(child_path + "." + port);
        };
        for (std::size_t i = 0; i < inst.ports.size(); ++i) {
            const Connection& c = inst.ports[i];
            const PortInfo* port = nullptr;
            if (c.port.empty()) {
                if (i >= child.ports.size())
                    fail(inst.loc, "too many positional connections for '" + inst.module + "'");
                port = &child.ports[i];
            } else {
                for (const auto& p : child.ports)
                    if (p.name == c.port)
                        port = &p;
                if (!port)
                    fail(inst.loc, "module '" + inst.module + "' has no port '" + c.port + "'");
            }
            if (!c.expr)
                continue;
            const int cs = child_sig(port->name);
            CExpr child_expr;
            child_expr.op = Op::Sig;
            child_expr.sig = cs;
            child_expr.width = signals_[cs].width;
            CLval child_lv;
            child_lv.parts.push_back(LPart{cs, LPart::Kind::Whole, 0, signals_[cs].width, false, {}});
            child_lv.width = signals_[cs].width;
            if (port->direction == "input")
                add_continuous(std::move(child_lv), compile(*c.expr, parent, true));
            else
                add_continuous(compile_lval(*c.expr, parent), std::move(child_expr));
        }
    }

    int sig_index(const std::string& full) const
    {
        for (std::size_t i = 0; i < signals_.size(); ++i)
            if (signals_[i].name == full)
                return static_cast<int>(i);
        throw CompileError("internal: signal '" + full + "' missing");
    }

    void add_continuous(CLval lhs, CExpr rhs)
    {
        const int id = static_cast<int>(continuous_.size());
        std::set<int> reads;
        collect(rhs, reads);
        for (const auto& p : lhs.parts)
            for (const auto& ix : p.index)
                collect(ix, reads);
        for (int sig : reads)
            signals_[sig].continuous.push_back(id);
        continuous_.push_back(Continuous{std::move(lhs), std::move(rhs), false});
    }

    static void collect(const CExpr& e, std::set<int>& out)
    {
        if (e.sig >= 0)
            out.insert(e.sig);
        for (const auto& a : e.args)
            collect(a, out);
    }

    CExpr compile(const Expr& e, const Scope& s, bool allow_signals)
    {
        CExpr c;
        auto lookup_sig = [&](const std::string& name) -> int {
            auto it = s.sigs.find(name);
            if (it == s.sigs.end())
                fail(e.loc, "undeclared identifier '" + name + "'");
            if (!allow_signals)
                fail(e.loc, "'" + name + "' is not a constant");
            return it->second;
        };
        switch (e.kind) {
        case Expr::Kind::Number:
            c.op = Op::Const;
            c.constant = e.number;
            c.width = e.number.width;
            return c;
        case Expr::Kind::String:
            c.op = Op::String;
            c.text = e.text;
            c.width = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(8 * e.text.size(), 64)));
            return c;
        case Expr::Kind::Ident: {
            if (auto p = s.params.find(e.text); p != s.params.end()) {
                c.op = Op::Const;
                c.constant = p->second;
                c.width = p->second.width;
                return c;
            }
            c.op = Op::Sig;
            c.sig = lookup_sig(e.text);
            c.width = signals_[c.sig].width;
            return c;
        }
        case Expr::Kind::BitSelect: {
            if (s.params.count(e.text))
                fail(e.loc, "bit select of a parameter is not supported");
            c.op = Op::BitSel;
            c.sig = lookup_sig(e.text);
            c.width = 1;
            c.args.push_back(compile(*e.args[0], s, allow_signals));
            return c;
        }
        case Expr::Kind::PartSelect: {
            c.op = Op::PartSel;
            c.sig = lookup_sig(e.text);
            const Signal& sig = signals_[c.sig];
            long hi = const_long(*e.args[0], s);
            long lo = const_long(*e.args[1], s);
            auto oh = sig.offset(hi);
            auto ol = sig.offset(lo);
            if (!oh || !ol)
                fail(e.loc, "part select out of range for '" + e.text + "'");
            c.offset = std::min(*oh, *ol);
            c.part_width = std::max(*oh, *ol) - c.offset + 1;
            c.width = c.part_width;
            return c;
        }
        case Expr::Kind::IndexedPart: {
            c.op = Op::IndexedPart;
            c.sig = lookup_sig(e.text);
            if (!signals_[c.sig].descending)
                fail(e.loc, "indexed part select on ascending range is not supported");
            long w = const_long(*e.args[1], s);
            if (w < 1 || w > 64)
                fail(e.loc, "bad indexed part width");
            c.part_width = static_cast<unsigned>(w);
            c.ascending = e.ascending;
            c.width = c.part_width;
            c.args.push_back(compile(*e.args[0], s, allow_signals));
            return c;
        }
        case Expr::Kind::SysCall: {
            if (e.text == "$time" || e.text == "$stime" || e.text == "$realtime") {
                if (!allow_signals)
                    fail(e.loc, "$time is not constant");
                c.op = Op::Time;
                c.width = 64;
                return c;
            }
            if (e.text == "$clog2") {
                if (e.args.size() != 1)
                    fail(e.loc, "$clog2 takes one argument");
                long x = const_long(*e.args[0], s);
                long r = 0;
                while ((1L << r) < x)
                    ++r;
                c.op = Op::Const;
                c.constant = Value::known(32, static_cast<std::uint64_t>(r));
                c.width = 32;
                return c;
            }
            fail(e.loc, "system function " + e.text + " is not supported");
        }
        case Expr::Kind::Unary: {
            c.args.push_back(compile(*e.args[0], s, allow_signals));
            const std::string& op = e.text;
            const unsigned w = c.args[0].width;
            if (op == "-") { c.op = Op::Neg; c.width = w; }
            else if (op == "~") { c.op = Op::Not; c.width = w; }
            else if (op == "+") { c.op = Op::Plus; c.width = w; }
            else if (op == "!") { c.op = Op::LogNot; c.width = 1; }
            else if (op == "&") { c.op = Op::RedAnd; c.width = 1; }
            else if (op == "~&") { c.op = Op::RedNand; c.width = 1; }
            else if (op == "|") { c.op = Op::RedOr; c.width = 1; }
            else if (op == "~|") { c.op = Op::RedNor; c.width = 1; }
            else if (op == "^") { c.op = Op::RedXor; c.width = 1; }
            else { c.op = Op::RedXnor; c.width = 1; }
            return c;
        }
        case Expr::Kind::Binary: {
            c.args.push_back(compile(*e.args[0], s, allow_signals));
            c.args.push_back(compile(*e.args[1], s, allow_signals));
            const unsigned lw = c.args[0].width;
            const unsigned rw = c.args[1].width;
            static const std::map<std::string, Op> ops{
                {"+", Op::Add}, {"-", Op::Sub}, {"*", Op::Mul}, {"/", Op::Div}, {"%", Op::Mod},
                {"**", Op::Pow}, {"&", Op::And}, {"|", Op::Or}, {"^", Op::Xor}, {"~^", Op::Xnor},
                {"^~", Op::Xnor}, {"==", Op::Eq}, {"!=", Op::Ne}, {"===", Op::CaseEq}, {"!==", Op::CaseNe},
                {"<", Op::Lt}, {"<=", Op::Le}, {">", Op::Gt}, {">=", Op::Ge}, {"&&", Op::LogAnd},
                {"||", Op::LogOr}, {"<<", Op::Shl}, {">>", Op::Shr}, {"<<<", Op::Shl}, {">>>", Op::Shr}};
            c.op = ops.at(e.text);
            switch (c.op) {
            case Op::Eq: case Op::Ne: case Op::CaseEq: case Op::CaseNe: case Op::Lt: case Op::Le:
            case Op::Gt: case Op::Ge: case Op::LogAnd: case Op::LogOr:
                c.width = 1;
                break;
            case Op::Shl: case Op::Shr: case Op::Pow:
                c.width = lw;
                break;
            default:
                c.width = std::max(lw, rw);
            }
            return c;
        }
        case Expr::Kind::Ternary: {
            for (const auto& a : e.args)
                c.args.push_back(compile(*a, s, allow_signals));
            c.op = Op::Ternary;
            c.width = std::max(c.args[1].width, c.args[2].width);
            return c;
        }
        case Expr::Kind::Concat: {
            c.op = Op::Concat;
            unsigned total = 0;
            for (const auto& a : e.args) {
                c.args.push_back(compile(*a, s, allow_signals));
                total += c.args.back().width;
            }
            if (total > kMaxWidth)
                fail(e.loc, "concatenation wider than 64 bits");
            c.width = total;
            return c;
        }
        case Expr::Kind::Replicate: {
            c.op = Op::Replicate;
            c.count = const_long(*e.args[0], s);
            if (c.count < 1)
                fail(e.loc, "replication count must be positive");
            unsigned inner = 0;
            for (std::size_t i = 1; i < e.args.size(); ++i) {
                c.args.push_back(compile(*e.args[i], s, allow_signals));
                inner += c.args.back().width;
            }
            if (static_cast<unsigned long>(inner) * static_cast<unsigned long>(c.count) > kMaxWidth)
                fail(e.loc, "replication wider than 64 bits");
            c.width = inner * static_cast<unsigned>(c.count);
            return c;
        }
        }
        fail(e.loc, "unsupported expression");
    }

    CLval compile_lval(const Expr& e, const Scope& s)
    {
        CLval lv;
        auto add = [&](const Expr& part, auto& self) -> void {
            if (part.kind == Expr::Kind::Concat) {
                for (const auto& a : part.args)
                    self(*a, self);
                return;
            }
            auto it = s.sigs.find(part.text);
            if (it == s.sigs.end())
                fail(part.loc, "cannot assign to '" + part.text + "'");
            LPart p;
            p.sig = it->second;
            const Signal& sig = signals_[p.sig];
            switch (part.kind) {
            case Expr::Kind::Ident:
                p.kind = LPart::Kind::Whole;
                p.width = sig.width;
                break;
            case Expr::Kind::BitSelect:
                p.kind = LPart::Kind::Bit;
                p.width = 1;
                p.index.push_back(compile(*part.args[0], s, true));
                break;
            case Expr::Kind::PartSelect: {
                p.kind = LPart::Kind::Part;
                auto oh = sig.offset(const_long(*part.args[0], s));
                auto ol = sig.offset(const_long(*part.args[1], s));
                if (!oh || !ol)
                    fail(part.loc, "part select out of range for '" + part.text + "'");
                p.offset = std::min(*oh, *ol);
                p.width = std::max(*oh, *ol) - p.offset + 1;
                break;
            }
            case Expr::Kind::IndexedPart: {
                p.kind = LPart::Kind::Indexed;
                long w = const_long(*part.args[1], s);
                if (w < 1 || w > 64)
                    fail(part.loc, "bad indexed part width");
                p.width = static_cast<unsigned>(w);
                p.ascending = part.ascending;
                p.index.push_back(compile(*part.args[0], s, true));
                break;
            }
            default:
                fail(part.loc, "invalid assignment target");
            }
            lv.width += p.width;
            lv.parts.push_back(std::move(p));
        };
        add(e, add);
        if (lv.width > kMaxWidth)
            fail(e.loc, "assignment target wider than 64 bits");
        return lv;
    }

    // -- process compilation ----------------------------------------------------------------------

    struct Emitter {
        Process& proc;
        std::size_t emit(Instr i)
        {
            proc.code.push_back(std::move(i));
            return proc.code.size() - 1;
        }
        std::size_t here() const { return proc.code.size(); }
    };

    void add_process(const Stmt& st, const Scope& s, bool forever, const std::string& path)
    {
        Process p;
        p.where = st.loc.str();
        Emitter em{p};
        compile_stmt(st, s, em, path);
        if (forever) {
            Instr j;
            j.kind = Instr::Kind::Jump;
            j.target = 0;
            em.emit(std::move(j));
        } else {
            em.emit(Instr{});
        }
        processes_.push_back(std::move(p));
    }

    void reads_of_stmt(const Stmt& st, const Scope& s, std::set<int>& out)
    {
        auto expr_reads = [&](const Expr* e) {
            if (!e)
                return;
            collect(compile(*e, s, true), out);
        };
        auto lval_reads = [&](const Expr* e) {
            if (!e)
                return;
            CLval lv = compile_lval(*e, s);
            for (const auto& p : lv.parts)
                for (const auto& ix : p.index)
                    collect(ix, out);
        };
        switch (st.kind) {
        case Stmt::Kind::Assign:
        case Stmt::Kind::NonBlocking:
            lval_reads(st.lhs.get());
            expr_reads(st.rhs.get());
            break;
        case Stmt::Kind::SysTask:
            for (const auto& a : st.task_args)
                if (a && a->kind != Expr::Kind::String)
                    expr_reads(a.get());
            break;
        case Stmt::Kind::Case:
            expr_reads(st.rhs.get());
            for (const auto& item : st.items) {
                for (const auto& l : item.labels)
                    expr_reads(l.get());
                reads_of_stmt(*item.body, s, out);
            }
            break;
        case Stmt::Kind::For:
            reads_of_stmt(*st.init, s, out);
            reads_of_stmt(*st.step, s, out);
            expr_reads(st.rhs.get());
            break;
        case Stmt::Kind::Delay:
        case Stmt::Kind::Event:
            break;
        default:
            if (st.rhs)
                expr_reads(st.rhs.get());
        }
        for (const auto& b : st.body)
            reads_of_stmt(*b, s, out);
    }

    void compile_stmt(const Stmt& st, const Scope& s, Emitter& em, const std::string& path)
    {
        switch (st.kind) {
        case Stmt::Kind::Null:
            return;
        case Stmt::Kind::Block:
            for (const auto& b : st.body)
                compile_stmt(*b, s, em, path);
            return;
        case Stmt::Kind::Assign:
        case Stmt::Kind::NonBlocking: {
            Instr i;
            i.kind = st.kind == Stmt::Kind::Assign ? Instr::Kind::Assign : Instr::Kind::NBAssign;
            i.lhs = compile_lval(*st.lhs, s);
            i.expr = compile(*st.rhs, s, true);
            i.loc = st.loc;
            em.emit(std::move(i));
            return;
        }
        case Stmt::Kind::If: {
            Instr test;
            test.kind = Instr::Kind::JumpIfFalse;
            test.expr = compile(*st.rhs, s, true);
            std::size_t test_at = em.emit(std::move(test));
            compile_stmt(*st.body[0], s, em, path);
            if (st.body.size() > 1) {
                Instr j;
                j.kind = Instr::Kind::Jump;
                std::size_t jump_at = em.emit(std::move(j));
                em.proc.code[test_at].target = em.here();
                compile_stmt(*st.body[1], s, em, path);
                em.proc.code[jump_at].target = em.here();
            } else {
                em.proc.code[test_at].target = em.here();
            }
            return;
        }
        case Stmt::Kind::Case: {
            Instr c;
            c.kind = Instr::Kind::Case;
            c.case_kind = st.case_kind;
            c.expr = compile(*st.rhs, s, true);
            c.loc = st.loc;
            std::size_t case_at = em.emit(std::move(c));
            std::vector<std::size_t> exits;
            bool has_default = false;
            for (const auto& item : st.items) {
                std::size_t start = em.here();
                if (item.labels.empty()) {
                    has_default = true;
                    em.proc.code[case_at].default_target = start;
                } else {
                    std::vector<CExpr> labels;
                    for (const auto& l : item.labels)
                        labels.push_back(compile(*l, s, true));
                    em.proc.code[case_at].arms.emplace_back(std::move(labels), start);
                }
                compile_stmt(*item.body, s, em, path);
                Instr j;
                j.kind = Instr::Kind::Jump;
                exits.push_back(em.emit(std::move(j)));
            }
            for (std::size_t e : exits)
                em.proc.code[e].target = em.here();
            if (!has_default)
                em.proc.code[case_at].default_target = em.here();
            return;
        }
        case Stmt::Kind::For: {
            compile_stmt(*st.init, s, em, path);
            std::size_t top = em.here();
            Instr test;
            test.kind = Instr::Kind::JumpIfFalse;
            test.expr = compile(*st.rhs, s, true);
            std::size_t test_at = em.emit(std::move(test));
            compile_stmt(*st.body[0], s, em, path);
            compile_stmt(*st.step, s, em, path);
            Instr j;
            j.kind = Instr::Kind::Jump;
            j.target = top;
            em.emit(std::move(j));
            em.proc.code[test_at].target = em.here();
            return;
        }
        case Stmt::Kind::While: {
            std::size_t top = em.here();
            Instr test;
            test.kind = Instr::Kind::JumpIfFalse;
            test.expr = compile(*st.rhs, s, true);
            std::size_t test_at = em.emit(std::move(test));
            compile_stmt(*st.body[0], s, em, path);
            Instr j;
            j.kind = Instr::Kind::Jump;
            j.target = top;
            em.emit(std::move(j));
            em.proc.code[test_at].target = em.here();
            return;
        }
        case Stmt::Kind::Repeat: {
            const int slot = static_cast<int>(em.proc.counters.size());
            em.proc.counters.push_back(0);
            Instr set;
            set.kind = Instr::Kind::SetCounter;
            set.counter = slot;
            set.expr = compile(*st.rhs, s, true);
            em.emit(std::move(set));
            std::size_t top = em.here();
            Instr loop;
            loop.kind = Instr::Kind::LoopCounter;
            loop.counter = slot;
            std::size_t loop_at = em.emit(std::move(loop));
            compile_stmt(*st.body[0], s, em, path);
            Instr j;
            j.kind = Instr::Kind::Jump;
            j.target = top;
            em.emit(std::move(j));
            em.proc.code[loop_at].target = em.here();
            return;
        }
        case Stmt::Kind::Forever: {
            std::size_t top = em.here();
            compile_stmt(*st.body[0], s, em, path);
            Instr j;
            j.kind = Instr::Kind::Jump;
            j.target = top;
            em.emit(std::move(j));
            return;
        }
        case Stmt::Kind::Delay: {
            Instr d;
            d.kind = Instr::Kind::Delay;
            d.expr = compile(*st.rhs, s, true);
            d.loc = st.loc;
            em.emit(std::move(d));
            if (!st.body.empty())
                compile_stmt(*st.body[0], s, em, path);
            return;
        }
        case Stmt::Kind::Event: {
            Instr w;
            w.kind = Instr::Kind::Wait;
            w.loc = st.loc;
            if (st.star) {
                std::set<int> reads;
                if (!st.body.empty())
                    reads_of_stmt(*st.body[0], s, reads);
                for (int sig : reads) {
                    WaitEvent ev;
                    ev.expr.op = Op::Sig;
                    ev.expr.sig = sig;
                    ev.expr.width = signals_[sig].width;
                    ev.sigs = {sig};
                    w.events.push_back(std::move(ev));
                }
            } else {
                for (const auto& e : st.events) {
                    WaitEvent ev;
                    ev.edge = e.edge;
                    ev.expr = compile(*e.expr, s, true);
                    std::set<int> reads;
                    collect(ev.expr, reads);
                    ev.sigs.assign(reads.begin(), reads.end());
                    w.events.push_back(std::move(ev));
                }
            }
            em.emit(std::move(w));
            if (!st.body.empty())
                compile_stmt(*st.body[0], s, em, path);
            return;
        }
        case Stmt::Kind::SysTask: {
            Instr t;
            t.kind = Instr::Kind::SysTask;
            t.task = st.task;
            t.scope = path;
            t.loc = st.loc;
            static const std::set<std::string> known{"$display", "$write", "$finish", "$stop", "$dumpfile",
                                                     "$dumpvars", "$timeformat", "$error", "$fatal",
                                                     "$info", "$warning", "$strobe"};
            if (!known.count(st.task))
                fail(st.loc, "system task " + st.task + " is not supported");
            for (const auto& a : st.task_args) {
                if (!a)
                    t.task_args.emplace_back(std::nullopt);
                else if (st.task == "$dumpvars" || st.task == "$dumpfile")
                    continue;
                else
                    t.task_args.emplace_back(compile(*a, s, true));
            }
            em.emit(std::move(t));
            return;
        }
        }
    }

    // -- evaluation -------------------------------------------------------------------------------

    Value extract(const Signal& sig, unsigned offset, unsigned w) const
    {
        Value out{w, 0, 0};
        for (unsigned i = 0; i < w; ++i) {
            const unsigned b = offset + i;
            if (b >= sig.width) {
                out.unk |= 1ULL << i;
                continue;
            }
            out.val |= ((sig.value.val >> b) & 1ULL) << i;
            out.unk |= ((sig.value.unk >> b) & 1ULL) << i;
        }
        return out;
    }

    std::optional<long> index_value(const CExpr& e)
    {
        Value v = eval(e, e.width);
        if (!v.fully_known())
            return std::nullopt;
        return static_cast<long>(v.val);
    }

    Value eval(const CExpr& e, unsigned w)
    {
        switch (e.op) {
        case Op::Const:
            return e.constant.resized(w);
        case Op::String: {
            std::uint64_t v = 0;
            for (char ch : e.text)
                v = (v << 8) | static_cast<unsigned char>(ch);
            return Value::known(e.width, v).resized(w);
        }
        case Op::Time:
            return Value::known(64, time_).resized(w);
        case Op::Sig:
            return signals_[e.sig].value.resized(w);
        case Op::BitSel: {
            const Signal& sig = signals_[e.sig];
            auto idx = index_value(e.args[0]);
            std::optional<unsigned> off;
            if (idx)
                off = sig.offset(*idx);
            if (!off)
                return Value::all_x(1).resized(w);
            return extract(sig, *off, 1).resized(w);
        }
        case Op::PartSel:
            return extract(signals_[e.sig], e.offset, e.part_width).resized(w);
        case Op::IndexedPart: {
            const Signal& sig = signals_[e.sig];
            auto base = index_value(e.args[0]);
            if (!base)
                return Value::all_x(e.part_width).resized(w);
            long lo = e.ascending ? *base - static_cast<long>(e.part_width) + 1 : *base;
            long off = lo - sig.lsb;
            if (off < 0 || off >= static_cast<long>(sig.width))
                return Value::all_x(e.part_width).resized(w);
            return extract(sig, static_cast<unsigned>(off), e.part_width).resized(w);
        }
        case Op::Neg: {
            Value a = eval(e.args[0], w);
            if (!a.fully_known())
                return Value::all_x(w);
            return Value::known(w, ~a.val + 1);
        }
        case Op::Not:
            return bit_not(eval(e.args[0], w), w);
        case Op::Plus:
            return eval(e.args[0], w);
        case Op::LogNot: {
            Value t = truth(eval(e.args[0], e.args[0].width));
            if (!t.fully_known())
                return Value::all_x(1).resized(w);
            return bool_value(t.val == 0).resized(w);
        }
        case Op::RedAnd: case Op::RedNand: case Op::RedOr: case Op::RedNor: case Op::RedXor: case Op::RedXnor: {
            Value a = eval(e.args[0], e.args[0].width);
            const std::uint64_t m = Value::mask(a.width);
            Value r;
            if (e.op == Op::RedAnd || e.op == Op::RedNand) {
                if ((~a.val & ~a.unk & m) != 0)
                    r = bool_value(false);
                else if (a.unk == 0)
                    r = bool_value(true);
                else
                    r = Value::all_x(1);
                if (e.op == Op::RedNand)
                    r = bit_not(r, 1);
            } else if (e.op == Op::RedOr || e.op == Op::RedNor) {
                if ((a.val & ~a.unk & m) != 0)
                    r = bool_value(true);
                else if (a.unk == 0)
                    r = bool_value(false);
                else
                    r = Value::all_x(1);
                if (e.op == Op::RedNor)
                    r = bit_not(r, 1);
            } else {
                if (a.unk != 0)
                    r = Value::all_x(1);
                else
                    r = bool_value(__builtin_parityll(a.val & m) != 0);
                if (e.op == Op::RedXnor)
                    r = bit_not(r, 1);
            }
            return r.resized(w);
        }
        case Op::Add: case Op::Sub: case Op::Mul: case Op::Div: case Op::Mod: {
            Value a = eval(e.args[0], w);
            Value b = eval(e.args[1], w);
            if (!a.fully_known() || !b.fully_known())
                return Value::all_x(w);
            switch (e.op) {
            case Op::Add: return Value::known(w, a.val + b.val);
            case Op::Sub: return Value::known(w, a.val - b.val);
            case Op::Mul: return Value::known(w, a.val * b.val);
            case Op::Div: return b.val == 0 ? Value::all_x(w) : Value::known(w, a.val / b.val);
            default: return b.val == 0 ? Value::all_x(w) : Value::known(w, a.val % b.val);
            }
        }
        case Op::Pow: {
            Value a = eval(e.args[0], w);
            Value b = eval(e.args[1], e.args[1].width);
            if (!a.fully_known() || !b.fully_known())
                return Value::all_x(w);
            std::uint64_t r = 1;
            for (std::uint64_t i = 0; i < b.val && i < 128; ++i)
                r *= a.val;
            return Value::known(w, r);
        }
        case Op::And: return bit_and(eval(e.args[0], w), eval(e.args[1], w), w);
        case Op::Or: return bit_or(eval(e.args[0], w), eval(e.args[1], w), w);
        case Op::Xor: return bit_xor(eval(e.args[0], w), eval(e.args[1], w), w);
        case Op::Xnor: return bit_not(bit_xor(eval(e.args[0], w), eval(e.args[1], w), w), w);
        case Op::Eq: case Op::Ne: case Op::CaseEq: case Op::CaseNe:
        case Op::Lt: case Op::Le: case Op::Gt: case Op::Ge: {
            const unsigned ow = std::max(e.args[0].width, e.args[1].width);
            Value a = eval(e.args[0], ow);
            Value b = eval(e.args[1], ow);
            Value r;
            if (e.op == Op::CaseEq || e.op == Op::CaseNe) {
                bool same = a.identical(b);
                r = bool_value(e.op == Op::CaseEq ? same : !same);
            } else if (e.op == Op::Eq || e.op == Op::Ne) {
                const std::uint64_t known_both = ~a.unk & ~b.unk & Value::mask(ow);
                if (((a.val ^ b.val) & known_both) != 0)
                    r = bool_value(e.op == Op::Ne);
                else if ((a.unk | b.unk) != 0)
                    r = Value::all_x(1);
                else
                    r = bool_value(e.op == Op::Eq);
            } else {
                if (!a.fully_known() || !b.fully_known()) {
                    r = Value::all_x(1);
                } else {
                    bool res = e.op == Op::Lt ? a.val < b.val
                             : e.op == Op::Le ? a.val <= b.val
                             : e.op == Op::Gt ? a.val > b.val
                                              : a.val >= b.val;
                    r = bool_value(res);
                }
            }
            return r.resized(w);
        }
        case Op::LogAnd: case Op::LogOr: {
            Value a = truth(eval(e.args[0], e.args[0].width));
            Value b = truth(eval(e.args[1], e.args[1].width));
            Value r;
            if (e.op == Op::LogAnd) {
                if ((a.fully_known() && a.val == 0) || (b.fully_known() && b.val == 0))
                    r = bool_value(false);
                else if (a.fully_known() && b.fully_known())
                    r = bool_value(true);
                else
                    r = Value::all_x(1);
            } else {
                if ((a.fully_known() && a.val == 1) || (b.fully_known() && b.val == 1))
                    r = bool_value(true);
                else if (a.fully_known() && b.fully_known())
                    r = bool_value(false);
                else
                    r = Value::all_x(1);
            }
            return r.resized(w);
        }
        case Op::Shl: case Op::Shr: {
            Value a = eval(e.args[0], w);
            Value b = eval(e.args[1], e.args[1].width);
            if (!b.fully_known())
                return Value::all_x(w);
            if (b.val >= w)
                return Value::known(w, 0);
            const unsigned sh = static_cast<unsigned>(b.val);
            if (e.op == Op::Shl)
                return Value{w, (a.val << sh) & Value::mask(w), (a.unk << sh) & Value::mask(w)};
            return Value{w, a.val >> sh, a.unk >> sh};
        }
        case Op::Ternary: {
            Value c = truth(eval(e.args[0], e.args[0].width));
            if (c.fully_known())
                return c.val ? eval(e.args[1], w) : eval(e.args[2], w);
            Value a = eval(e.args[1], w);
            Value b = eval(e.args[2], w);
            const std::uint64_t m = Value::mask(w);
            const std::uint64_t differ = ((a.val ^ b.val) | a.unk | b.unk) & m;
            return Value{w, a.val & ~differ & m, differ};
        }
        case Op::Concat: case Op::Replicate: {
            Value out{0, 0, 0};
            const long reps = e.op == Op::Replicate ? e.count : 1;
            for (long r = 0; r < reps; ++r) {
                for (const auto& part : e.args) {
                    Value v = eval(part, part.width);
                    out.val = (part.width >= 64 ? 0 : out.val << part.width) | v.val;
                    out.unk = (part.width >= 64 ? 0 : out.unk << part.width) | v.unk;
                    out.width += part.width;
                }
            }
            out.width = e.width;
            return out.resized(w);
        }
        }
        return Value::all_x(w);
    }

    // -- writes -----------------------------------------------------------------------------------

    std::vector<std::optional<unsigned>> resolve(const CLval& lv)
    {
        std::vector<std::optional<unsigned>> offsets;
        for (const auto& p : lv.parts) {
            const Signal& sig = signals_[p.sig];
            switch (p.kind) {
            case LPart::Kind::Whole:
                offsets.emplace_back(0u);
                break;
            case LPart::Kind::Part:
                offsets.emplace_back(p.offset);
                break;
            case LPart::Kind::Bit: {
                auto idx = index_value(p.index[0]);
                offsets.push_back(idx ? sig.offset(*idx) : std::nullopt);
                break;
            }
            case LPart::Kind::Indexed: {
                auto base = index_value(p.index[0]);
                if (!base) {
                    offsets.emplace_back(std::nullopt);
                    break;
                }
                long lo = p.ascending ? *base - static_cast<long>(p.width) + 1 : *base;
                long off = lo - sig.lsb;
                if (off < 0 || off + static_cast<long>(p.width) > static_cast<long>(sig.width))
                    offsets.emplace_back(std::nullopt);
                else
                    offsets.emplace_back(static_cast<unsigned>(off));
                break;
            }
            }
        }
        return offsets;
    }

    void write_resolved(const CLval& lv, const std::vector<std::optional<unsigned>>& offsets, const Value& v)
    {
        unsigned consumed = 0;
        for (std::size_t i = lv.parts.size(); i-- > 0;) {
            const LPart& p = lv.parts[i];
            const Value slice{p.width, (v.val >> consumed) & Value::mask(p.width),
                              (v.unk >> consumed) & Value::mask(p.width)};
            consumed += p.width;
            if (!offsets[i])
                continue;
            Signal& sig = signals_[p.sig];
            const unsigned off = *offsets[i];
            const std::uint64_t field = Value::mask(p.width) << off;
            Value next = sig.value;
            next.val = (next.val & ~field) | ((slice.val << off) & field);
            next.unk = (next.unk & ~field) | ((slice.unk << off) & field);
            next = next.resized(sig.width);
            if (!next.identical(sig.value)) {
                sig.value = next;
                notify(p.sig);
            }
        }
    }

    void assign(const CLval& lv, const CExpr& rhs)
    {
        const unsigned w = std::max(lv.width, rhs.width);
        Value v = eval(rhs, w).resized(lv.width);
        write_resolved(lv, resolve(lv), v);
    }

    void notify(int sig_id)
    {
        Signal& sig = signals_[sig_id];
        for (int c : sig.continuous) {
            if (!continuous_[c].queued) {
                continuous_[c].queued = true;
                active_.push_back({true, c});
            }
        }
        if (sig.waiting.empty())
            return;
        std::vector<int> waiting = sig.waiting;
        for (int pid : waiting) {
            Process& p = processes_[pid];
            if (p.state != Process::State::Waiting)
                continue;
            bool fire = false;
            for (auto& ev : p.events) {
                if (std::find(ev.sigs.begin(), ev.sigs.end(), sig_id) == ev.sigs.end())
                    continue;
                Value now = eval(ev.expr, ev.expr.width);
                if (ev.edge == EventExpr::Edge::Any)
                    fire = fire || !now.identical(ev.last);
                else if (ev.edge == EventExpr::Edge::Pos)
                    fire = fire || posedge(ev.last.bit(0), now.bit(0));
                else
                    fire = fire || negedge(ev.last.bit(0), now.bit(0));
                ev.last = now;
            }
            if (fire)
                wake(pid);
        }
    }

    void wake(int pid)
    {
        Process& p = processes_[pid];
        for (const auto& ev : p.events) {
            for (int s : ev.sigs) {
                auto& w = signals_[s].waiting;
                w.erase(std::remove(w.begin(), w.end(), pid), w.end());
            }
        }
        p.events.clear();
        p.state = Process::State::Ready;
        active_.push_back({false, pid});
    }

    void run_continuous(int id)
    {
        Continuous& c = continuous_[id];
        c.queued = false;
        assign(c.lhs, c.rhs);
    }

    void run_process(int pid)
    {
        std::size_t steps = 0;
        while (!finished_) {
            Process& p = processes_[pid];
            if (p.state == Process::State::Done)
                return;
            if (++steps > kMaxInstrPerActivation)
                throw RuntimeError(p.where + ": process runs without blocking (missing timing control?)");
            Instr& in = p.code[p.pc];
            switch (in.kind) {
            case Instr::Kind::Assign:
                assign(in.lhs, in.expr);
                ++p.pc;
                break;
            case Instr::Kind::NBAssign: {
                const unsigned w = std::max(in.lhs.width, in.expr.width);
                Pending pend;
                pend.value = eval(in.expr, w).resized(in.lhs.width);
                pend.offsets = resolve(in.lhs);
                pend.lhs = in.lhs;
                nba_.push_back(std::move(pend));
                ++p.pc;
                break;
            }
            case Instr::Kind::JumpIfFalse: {
                Value t = truth(eval(in.expr, in.expr.width));
                p.pc = (t.fully_known() && t.val == 1) ? p.pc + 1 : in.target;
                break;
            }
            case Instr::Kind::Jump:
                p.pc = in.target;
                break;
            case Instr::Kind::Delay: {
                Value d = eval(in.expr, in.expr.width);
                if (!d.fully_known())
                    throw RuntimeError(in.loc.str() + ": delay value is unknown");
                ++p.pc;
                if (d.val == 0) {
                    active_.push_back({false, pid});
                } else {
                    p.state = Process::State::Delayed;
                    future_[time_ + d.val].push_back(pid);
                }
                return;
            }
            case Instr::Kind::Wait: {
                ++p.pc;
                if (in.events.empty())
                    break;
                p.events = in.events;
                for (auto& ev : p.events) {
                    ev.last = eval(ev.expr, ev.expr.width);
                    for (int s : ev.sigs)
                        signals_[s].waiting.push_back(pid);
                }
                p.state = Process::State::Waiting;
                return;
            }
            case Instr::Kind::SysTask:
                ++p.pc;
                system_task(in);
                break;
            case Instr::Kind::Case: {
                unsigned w = in.expr.width;
                for (const auto& arm : in.arms)
                    for (const auto& l : arm.first)
                        w = std::max(w, l.width);
                Value sel = eval(in.expr, w);
                std::size_t target = in.default_target;
                for (const auto& arm : in.arms) {
                    bool hit = false;
                    for (const auto& l : arm.first)
                        if (case_match(sel, eval(l, w), in.case_kind))
                            hit = true;
                    if (hit) {
                        target = arm.second;
                        break;
                    }
                }
                p.pc = target;
                break;
            }
            case Instr::Kind::SetCounter: {
                Value n = eval(in.expr, in.expr.width);
                p.counters[in.counter] = n.fully_known() ? static_cast<long long>(n.val) : 0;
                ++p.pc;
                break;
            }
            case Instr::Kind::LoopCounter:
                if (p.counters[in.counter] <= 0) {
                    p.pc = in.target;
                } else {
                    --p.counters[in.counter];
                    ++p.pc;
                }
                break;
            case Instr::Kind::Halt:
                p.state = Process::State::Done;
                return;
            }
        }
    }

    std::string format(const Instr& in, std::size_t first)
    {
        std::string out;
        std::size_t arg = first;
        auto next_value = [&](std::optional<CExpr>& slot) -> bool { return slot.has_value(); };
        (void)next_value;
        if (first < in.task_args.size() && in.task_args[first] && in.task_args[first]->op == Op::String) {
            const std::string& fmt = in.task_args[first]->text;
            ++arg;
            for (std::size_t i = 0; i < fmt.size(); ++i) {
                char c = fmt[i];
                if (c != '%') {
                    out.push_back(c);
                    continue;
                }
                ++i;
                if (i >= fmt.size())
                    break;
                bool pad = true;
                std::string width_spec;
                while (i < fmt.size() && std::isdigit(static_cast<unsigned char>(fmt[i]))) {
                    width_spec.push_back(fmt[i]);
                    ++i;
                }
                if (width_spec == "0")
                    pad = false;
                char spec = static_cast<char>(std::tolower(static_cast<unsigned char>(fmt[i])));
                if (spec == '%') {
                    out.push_back('%');
                    continue;
                }
                if (spec == 'm') {
                    out += in.scope;
                    continue;
                }
                if (arg >= in.task_args.size() || !in.task_args[arg])
                    throw RuntimeError(in.loc.str() + ": missing argument for format");
                const CExpr& e = *in.task_args[arg++];
                if (spec == 's') {
                    if (e.op == Op::String) {
                        out += e.text;
                    } else {
                        Value v = eval(e, e.width);
                        std::string s;
                        for (int b = static_cast<int>(e.width) - 8; b >= -7; b -= 8) {
                            unsigned shift = b < 0 ? 0 : static_cast<unsigned>(b);
                            char ch = static_cast<char>((v.val >> shift) & 0xff);
                            if (ch)
                                s.push_back(ch);
                        }
                        out += s;
                    }
                    continue;
                }
                Value v = eval(e, e.width);
                switch (spec) {
                case 'h': case 'x': out += format_hex(v, pad); break;
                case 'b': out += format_bin(v, pad); break;
                case 'o': out += format_oct(v, pad); break;
                case 'd': out += format_dec(v, pad); break;
                case 't': out += format_dec(v, pad); break;
                case 'c': out.push_back(static_cast<char>(v.val & 0xff)); break;
                default: throw RuntimeError(in.loc.str() + ": unsupported format %" + std::string(1, spec));
                }
            }
        }
        for (; arg < in.task_args.size(); ++arg) {
            if (!in.task_args[arg]) {
                out.push_back(' ');
                continue;
            }
            const CExpr& e = *in.task_args[arg];
            if (e.op == Op::String)
                out += e.text;
            else
                out += format_dec(eval(e, e.width), true);
        }
        return out;
    }

    void system_task(const Instr& in)
    {
        if (in.task == "$display" || in.task == "$strobe" || in.task == "$info" || in.task == "$warning" ||
            in.task == "$error") {
            out_ << format(in, 0) << '\n';
        } else if (in.task == "$write") {
            out_ << format(in, 0);
        } else if (in.task == "$finish" || in.task == "$stop") {
            finished_ = true;
        } else if (in.task == "$fatal") {
            std::size_t first = in.task_args.empty() ? 0 : 1;
            out_ << "FATAL: " << format(in, first) << '\n';
            finished_ = true;
        }
    }

    SimOptions options_;
    std::ostream& out_;
    std::map<std::string, Module> modules_;
    std::vector<Signal> signals_;
    std::vector<Continuous> continuous_;
    std::vector<Process> processes_;
    std::deque<Entry> active_;
    std::vector<Pending> nba_;
    std::map<std::uint64_t, std::vector<int>> future_;
    std::uint64_t time_ = 0;
    bool finished_ = false;
};

}  // namespace

SimReport simulate(const std::vector<SourceFile>& files, const SimOptions& options, std::ostream& out)
{
    Simulator sim(files, options, out);
    if (options.elaborate_only)
        return SimReport{};
    return sim.run();
}

}  // namespace poet::vsim
