#include "poet/core.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <sstream>

#include <fmt/format.h>

namespace poet {

std::string_view to_string(Errc code)
{
    switch (code) {
    case Errc::InvalidMetrics: return "InvalidMetrics";
    case Errc::InvalidDesign: return "InvalidDesign";
    case Errc::OriginalMetricZero: return "OriginalMetricZero";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::InsufficientPopulation: return "InsufficientPopulation";
    case Errc::UnselectedOperator: return "UnselectedOperator";
    case Errc::WrongArity: return "WrongArity";
    case Errc::IdenticalParents: return "IdenticalParents";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::NoModuleFound: return "NoModuleFound";
    case Errc::WrongModuleName: return "WrongModuleName";
    case Errc::TemplateError: return "TemplateError";
    case Errc::TransportError: return "TransportError";
    case Errc::FixtureExhausted: return "FixtureExhausted";
    case Errc::AuthError: return "AuthError";
    case Errc::SpecParseError: return "SpecParseError";
    case Errc::PortTableMismatch: return "PortTableMismatch";
    case Errc::VectorParseError: return "VectorParseError";
    case Errc::NoValidVectors: return "NoValidVectors";
    case Errc::SimCompileError: return "SimCompileError";
    case Errc::SimRuntimeError: return "SimRuntimeError";
    case Errc::UnknownValueInGolden: return "UnknownValueInGolden";
    case Errc::GoldenCoverageGap: return "GoldenCoverageGap";
    case Errc::TestbenchGenerationFailed: return "TestbenchGenerationFailed";
    case Errc::ToolNotFound: return "ToolNotFound";
    case Errc::Timeout: return "Timeout";
    case Errc::SynthesisFailed: return "SynthesisFailed";
    case Errc::ReportParseError: return "ReportParseError";
    case Errc::MissingKey: return "MissingKey";
    case Errc::InvalidValue: return "InvalidValue";
    case Errc::BaselineSynthesisFailed: return "BaselineSynthesisFailed";
    case Errc::ProviderExhausted: return "ProviderExhausted";
    case Errc::ConfigParseError: return "ConfigParseError";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::JournalParseError: return "JournalParseError";
    }
    return "Unknown";
}

// ---------------------------------------------------------------------------
// Metrics

PpaMetrics PpaMetrics::make(double power, double area, double delay)
{
    PpaMetrics m{power, area, delay};
    if (!m.valid()) {
        throw Error(Errc::InvalidMetrics,
                    fmt::format("metrics must be finite and positive (power={}, area={}, delay={})",
                                power, area, delay));
    }
    return m;
}

bool PpaMetrics::valid() const noexcept
{
    auto ok = [](double v) { return std::isfinite(v) && v > 0.0; };
    return ok(power) && ok(area) && ok(delay);
}

bool approx_equal(double x, double y) noexcept
{
    double scale = std::max({1.0, std::fabs(x), std::fabs(y)});
    return std::fabs(x - y) <= kMetricRelTol * scale;
}

bool definitely_less(double x, double y) noexcept { return x < y && !approx_equal(x, y); }

bool dominates(const PpaMetrics& a, const PpaMetrics& b) noexcept
{
    const std::array<double, 3> lhs{a.power, a.area, a.delay};
    const std::array<double, 3> rhs{b.power, b.area, b.delay};
    bool strictly_better = false;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        if (approx_equal(lhs[i], rhs[i]))
            continue;
        if (lhs[i] > rhs[i])
            return false;
        strictly_better = true;
    }
    return strictly_better;
}

std::string_view to_string(Metric metric)
{
    switch (metric) {
    case Metric::Power: return "power";
    case Metric::Area: return "area";
    case Metric::Delay: return "delay";
    }
    return "?";
}

MetricDelta metric_delta(const PpaMetrics& m, const PpaMetrics& m_orig)
{
    if (!(m_orig.power > 0.0) || !(m_orig.area > 0.0) || !(m_orig.delay > 0.0)) {
        throw Error(Errc::OriginalMetricZero, "baseline metrics must be strictly positive");
    }
    auto pct = [](double x, double base) { return 100.0 * (x - base) / base; };
    return MetricDelta{pct(m.power, m_orig.power), pct(m.area, m_orig.area), pct(m.delay, m_orig.delay)};
}

std::string render_percent(double percent)
{
    // Avoid "-0.0%".
    if (std::fabs(percent) < 0.05)
        percent = 0.0;
    return fmt::format("{:+.1f}%", percent);
}

std::string render_delta(const MetricDelta& delta)
{
    return fmt::format("power {} vs original, area {} vs original, delay {} vs original",
                       render_percent(delta.d_power), render_percent(delta.d_area),
                       render_percent(delta.d_delay));
}

// ---------------------------------------------------------------------------
// Dedup

std::string normalize_source(std::string_view source)
{
    std::string unified;
    unified.reserve(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
        char c = source[i];
        if (c == '\r') {
            unified.push_back('\n');
            if (i + 1 < source.size() && source[i + 1] == '\n')
                ++i;
        } else {
            unified.push_back(c);
        }
    }

    std::string out;
    out.reserve(unified.size());
    std::istringstream lines(unified);
    std::string line;
    while (std::getline(lines, line)) {
        std::string collapsed;
        bool in_blank = false;
        for (char c : line) {
            if (c == ' ' || c == '\t') {
                if (!in_blank)
                    collapsed.push_back(' ');
                in_blank = true;
            } else {
                collapsed.push_back(c);
                in_blank = false;
            }
        }
        while (!collapsed.empty() && collapsed.back() == ' ')
            collapsed.pop_back();
        out += collapsed;
        out.push_back('\n');
    }
    while (!out.empty() && out.back() == '\n')
        out.pop_back();
    return out;
}

std::string dedup_key(const Design& design)
{
    const std::string normalized = normalize_source(design.source);
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    EVP_DigestUpdate(ctx.get(), normalized.data(), normalized.size());
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i)
        hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

// ---------------------------------------------------------------------------
// Interface extraction

std::string_view to_string(PortDirection dir)
{
    switch (dir) {
    case PortDirection::Input: return "input";
    case PortDirection::Output: return "output";
    case PortDirection::Inout: return "inout";
    }
    return "?";
}

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

bool has_token(const std::string& name, std::string_view word)
{
    // Matches word as a whole '_'-separated component, e.g. "clk", "sys_clk", "clk_i".
    std::size_t pos = 0;
    while ((pos = name.find(word, pos)) != std::string::npos) {
        bool left = pos == 0 || name[pos - 1] == '_';
        std::size_t end = pos + word.size();
        std::string rest = name.substr(end);
        bool right = rest.empty() || rest[0] == '_' || rest == "n" || rest == "b";
        // "clk_en" and friends are enables, not clocks.
        bool enable = rest.rfind("_en", 0) == 0 || rest.rfind("en", 0) == 0;
        if (left && right && !enable)
            return true;
        pos = end;
    }
    return false;
}

struct Token {
    enum Kind { Ident, Number, Punct } kind;
    std::string text;
};

std::vector<Token> tokenize(std::string_view src)
{
    std::vector<Token> out;
    std::size_t i = 0;
    auto ident_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; };
    while (i < src.size()) {
        char c = src[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (src.substr(i, 2) == "//") {
            while (i < src.size() && src[i] != '\n')
                ++i;
        } else if (src.substr(i, 2) == "/*") {
            auto end = src.find("*/", i + 2);
            i = end == std::string_view::npos ? src.size() : end + 2;
        } else if (c == '"') {
            ++i;
            while (i < src.size() && src[i] != '"') {
                if (src[i] == '\\')
                    ++i;
                ++i;
            }
            ++i;
        } else if (c == '`') {
            // Compiler directive: skip the directive name only.
            ++i;
            while (i < src.size() && ident_char(src[i]))
                ++i;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$') {
            std::size_t start = i;
            while (i < src.size() && ident_char(src[i]))
                ++i;
            out.push_back({Token::Ident, std::string(src.substr(start, i - start))});
        } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '\'') {
            std::size_t start = i;
            while (i < src.size() && (std::isdigit(static_cast<unsigned char>(src[i])) || src[i] == '_'))
                ++i;
            if (i < src.size() && src[i] == '\'') {
                ++i;
                if (i < src.size() && (src[i] == 's' || src[i] == 'S'))
                    ++i;
                if (i < src.size())
                    ++i;  // base char
                while (i < src.size() && (std::isxdigit(static_cast<unsigned char>(src[i])) || src[i] == '_' ||
                                          src[i] == 'x' || src[i] == 'X' || src[i] == 'z' || src[i] == 'Z' ||
                                          src[i] == '?'))
                    ++i;
            }
            out.push_back({Token::Number, std::string(src.substr(start, i - start))});
        } else {
            std::string_view two = src.substr(i, 2);
            if (two == "<<" || two == ">>" || two == "**") {
                out.push_back({Token::Punct, std::string(two)});
                i += 2;
            } else {
                out.push_back({Token::Punct, std::string(1, c)});
                ++i;
            }
        }
    }
    return out;
}

long long parse_number(const std::string& text)
{
    std::string digits;
    auto tick = text.find('\'');
    int base = 10;
    std::string body = text;
    if (tick != std::string::npos) {
        std::size_t p = tick + 1;
        if (p < text.size() && (text[p] == 's' || text[p] == 'S'))
            ++p;
        char b = p < text.size() ? static_cast<char>(std::tolower(text[p])) : 'd';
        base = b == 'h' ? 16 : b == 'b' ? 2 : b == 'o' ? 8 : 10;
        body = text.substr(p + 1);
    }
    for (char c : body)
        if (c != '_')
            digits.push_back(c);
    if (digits.empty())
        throw Error(Errc::InvalidDesign, "malformed number '" + text + "'");
    try {
        return std::stoll(digits, nullptr, base);
    } catch (const std::exception&) {
        throw Error(Errc::InvalidDesign, "unsupported constant '" + text + "'");
    }
}

/// Constant expression evaluator for parameter and range expressions.
class ConstEval {
public:
    ConstEval(const std::vector<Token>& toks, std::size_t begin, std::size_t end,
              const std::map<std::string, long long>& params)
        : toks_(toks), pos_(begin), end_(end), params_(params)
    {
    }

    long long run()
    {
        long long v = ternary();
        if (pos_ != end_)
            throw Error(Errc::InvalidDesign, "unexpected token '" + toks_[pos_].text + "' in constant expression");
        return v;
    }

private:
    bool peek(std::string_view p) const { return pos_ < end_ && toks_[pos_].text == p; }
    bool accept(std::string_view p)
    {
        if (peek(p)) {
            ++pos_;
            return true;
        }
        return false;
    }
    long long ternary()
    {
        long long c = compare();
        if (accept("?")) {
            long long a = ternary();
            if (!accept(":"))
                throw Error(Errc::InvalidDesign, "expected ':' in constant expression");
            long long b = ternary();
            return c ? a : b;
        }
        return c;
    }
    long long compare()
    {
        long long v = shift();
        while (true) {
            if (peek("<") || peek(">") || peek("=")) {
                std::string op = toks_[pos_++].text;
                if (accept("="))
                    op += "=";
                long long r = shift();
                if (op == "<") v = v < r;
                else if (op == ">") v = v > r;
                else if (op == "<=") v = v <= r;
                else if (op == ">=") v = v >= r;
                else if (op == "==") v = v == r;
                else throw Error(Errc::InvalidDesign, "bad operator in constant expression");
            } else {
                return v;
            }
        }
    }
    long long shift()
    {
        long long v = additive();
        while (true) {
            if (accept("<<"))
                v <<= additive();
            else if (accept(">>"))
                v >>= additive();
            else
                return v;
        }
    }
    long long additive()
    {
        long long v = term();
        while (true) {
            if (accept("+"))
                v += term();
            else if (accept("-"))
                v -= term();
            else
                return v;
        }
    }
    long long term()
    {
        long long v = power();
        while (true) {
            if (accept("*")) {
                v *= power();
            } else if (accept("/")) {
                long long d = power();
                if (d == 0)
                    throw Error(Errc::InvalidDesign, "division by zero in constant expression");
                v /= d;
            } else if (accept("%")) {
                long long d = power();
                if (d == 0)
                    throw Error(Errc::InvalidDesign, "division by zero in constant expression");
                v %= d;
            } else {
                return v;
            }
        }
    }
    long long power()
    {
        long long base = unary();
        if (accept("**")) {
            long long e = power();
            long long r = 1;
            for (long long i = 0; i < e; ++i)
                r *= base;
            return r;
        }
        return base;
    }
    long long unary()
    {
        if (accept("-"))
            return -unary();
        if (accept("+"))
            return unary();
        return primary();
    }
    long long primary()
    {
        if (pos_ >= end_)
            throw Error(Errc::InvalidDesign, "truncated constant expression");
        const Token& t = toks_[pos_];
        if (accept("(")) {
            long long v = ternary();
            if (!accept(")"))
                throw Error(Errc::InvalidDesign, "expected ')' in constant expression");
            return v;
        }
        if (t.kind == Token::Number) {
            ++pos_;
            return parse_number(t.text);
        }
        if (t.kind == Token::Ident) {
            ++pos_;
            if (t.text == "$clog2") {
                if (!accept("("))
                    throw Error(Errc::InvalidDesign, "expected '(' after $clog2");
                long long x = ternary();
                if (!accept(")"))
                    throw Error(Errc::InvalidDesign, "expected ')' after $clog2 argument");
                long long r = 0;
                while ((1LL << r) < x)
                    ++r;
                return r;
            }
            auto it = params_.find(t.text);
            if (it == params_.end())
                throw Error(Errc::InvalidDesign, "unknown parameter '" + t.text + "' in width expression");
            return it->second;
        }
        throw Error(Errc::InvalidDesign, "unexpected token '" + t.text + "' in constant expression");
    }

    const std::vector<Token>& toks_;
    std::size_t pos_;
    std::size_t end_;
    const std::map<std::string, long long>& params_;
};

bool is_direction(const std::string& s) { return s == "input" || s == "output" || s == "inout"; }

PortDirection direction_of(const std::string& s)
{
    if (s == "input")
        return PortDirection::Input;
    if (s == "output")
        return PortDirection::Output;
    return PortDirection::Inout;
}

bool is_type_word(const std::string& s)
{
    return s == "wire" || s == "reg" || s == "logic" || s == "signed" || s == "unsigned" || s == "tri" ||
           s == "var";
}

std::size_t matching(const std::vector<Token>& toks, std::size_t open, std::string_view o, std::string_view c)
{
    int depth = 0;
    for (std::size_t i = open; i < toks.size(); ++i) {
        if (toks[i].text == o)
            ++depth;
        else if (toks[i].text == c && --depth == 0)
            return i;
    }
    throw Error(Errc::InvalidDesign, "unbalanced '" + std::string(o) + "'");
}

/// Parses `parameter|localparam [type] [range] NAME = expr {, NAME = expr}` starting after the keyword.
std::size_t parse_param_decl(const std::vector<Token>& toks, std::size_t i, std::size_t stop,
                             std::map<std::string, long long>& params)
{
    while (i < stop && (is_type_word(toks[i].text) || toks[i].text == "integer"))
        ++i;
    if (i < stop && toks[i].text == "[")
        i = matching(toks, i, "[", "]") + 1;
    while (i < stop) {
        if (toks[i].kind != Token::Ident)
            return i;
        std::string name = toks[i].text;
        ++i;
        if (i >= stop || toks[i].text != "=")
            return i;
        ++i;
        std::size_t start = i;
        int depth = 0;
        while (i < stop) {
            const std::string& t = toks[i].text;
            if (t == "(" || t == "[" || t == "{")
                ++depth;
            else if (t == ")" || t == "]" || t == "}") {
                if (depth == 0)
                    break;
                --depth;
            } else if ((t == "," || t == ";") && depth == 0)
                break;
            ++i;
        }
        try {
            params[name] = ConstEval(toks, start, i, params).run();
        } catch (const Error&) {
            // Non-integer parameters (strings, reals) are irrelevant for port widths.
        }
        if (i < stop && toks[i].text == ",") {
            ++i;
            // A following "parameter" keyword is handled by the caller loop.
            if (i < stop && (toks[i].text == "parameter" || toks[i].text == "localparam"))
                return i;
            continue;
        }
        return i;
    }
    return i;
}

int range_width(const std::vector<Token>& toks, std::size_t open, std::size_t close,
                const std::map<std::string, long long>& params)
{
    std::size_t colon = open + 1;
    int depth = 0;
    for (; colon < close; ++colon) {
        const std::string& t = toks[colon].text;
        if (t == "(" || t == "[")
            ++depth;
        else if (t == ")" || t == "]")
            --depth;
        else if (t == ":" && depth == 0)
            break;
    }
    if (colon >= close)
        throw Error(Errc::InvalidDesign, "port range without ':'");
    long long msb = ConstEval(toks, open + 1, colon, params).run();
    long long lsb = ConstEval(toks, colon + 1, close, params).run();
    long long w = (msb > lsb ? msb - lsb : lsb - msb) + 1;
    if (w < 1 || w > (1 << 20))
        throw Error(Errc::InvalidDesign, "unreasonable port width");
    return static_cast<int>(w);
}

}  // namespace

bool is_clock_name(std::string_view name)
{
    std::string n = lower(name);
    return has_token(n, "clk") || has_token(n, "clock");
}

bool is_reset_name(std::string_view name)
{
    std::string n = lower(name);
    return has_token(n, "rst") || has_token(n, "reset");
}

std::optional<std::string> first_module_name(std::string_view source)
{
    auto toks = tokenize(source);
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
        if (toks[i].text == "module" && toks[i + 1].kind == Token::Ident)
            return toks[i + 1].text;
    }
    return std::nullopt;
}

std::vector<PortDecl> parse_interface(std::string_view source, std::string_view module_name)
{
    auto toks = tokenize(source);
    std::size_t i = 0;
    for (; i + 1 < toks.size(); ++i) {
        if ((toks[i].text == "module" || toks[i].text == "macromodule") && toks[i + 1].text == module_name)
            break;
    }
    if (i + 1 >= toks.size())
        throw Error(Errc::InvalidDesign, "module '" + std::string(module_name) + "' not found");
    i += 2;

    std::size_t end_module = i;
    while (end_module < toks.size() && toks[end_module].text != "endmodule")
        ++end_module;

    std::map<std::string, long long> params;
    if (i < toks.size() && toks[i].text == "#") {
        std::size_t open = i + 1;
        std::size_t close = matching(toks, open, "(", ")");
        std::size_t j = open + 1;
        while (j < close) {
            if (toks[j].text == "parameter" || toks[j].text == "localparam")
                j = parse_param_decl(toks, j + 1, close, params);
            else if (toks[j].kind == Token::Ident && j + 1 < close && toks[j + 1].text == "=")
                j = parse_param_decl(toks, j, close, params);
            else
                ++j;
        }
        i = close + 1;
    }

    // Body parameters may size ports declared in non-ANSI style.
    for (std::size_t j = i; j < end_module; ++j) {
        if (toks[j].text == "parameter" || toks[j].text == "localparam")
            parse_param_decl(toks, j + 1, end_module, params);
    }

    std::vector<PortDecl> ports;
    std::vector<std::string> order;
    if (i < toks.size() && toks[i].text == "(") {
        std::size_t close = matching(toks, i, "(", ")");
        bool ansi = false;
        for (std::size_t j = i + 1; j < close; ++j)
            if (is_direction(toks[j].text))
                ansi = true;
        if (ansi) {
            PortDirection dir = PortDirection::Input;
            int width = 1;
            for (std::size_t j = i + 1; j < close;) {
                const std::string& t = toks[j].text;
                if (is_direction(t)) {
                    dir = direction_of(t);
                    width = 1;
                    ++j;
                    while (j < close && is_type_word(toks[j].text))
                        ++j;
                    if (j < close && toks[j].text == "[") {
                        std::size_t rc = matching(toks, j, "[", "]");
                        width = range_width(toks, j, rc, params);
                        j = rc + 1;
                    }
                } else if (t == ",") {
                    ++j;
                } else if (toks[j].kind == Token::Ident && !is_type_word(t)) {
                    ports.push_back({t, dir, width, false, false});
                    ++j;
                    if (j < close && toks[j].text == "[")  // unpacked dims
                        j = matching(toks, j, "[", "]") + 1;
                } else {
                    ++j;
                }
            }
        } else {
            for (std::size_t j = i + 1; j < close; ++j)
                if (toks[j].kind == Token::Ident)
                    order.push_back(toks[j].text);
        }
        i = close + 1;
    }

    if (!order.empty()) {
        std::map<std::string, PortDecl> declared;
        for (std::size_t j = i; j < end_module; ++j) {
            if (!is_direction(toks[j].text))
                continue;
            PortDirection dir = direction_of(toks[j].text);
            int width = 1;
            std::size_t k = j + 1;
            while (k < end_module && is_type_word(toks[k].text))
                ++k;
            if (k < end_module && toks[k].text == "[") {
                std::size_t rc = matching(toks, k, "[", "]");
                width = range_width(toks, k, rc, params);
                k = rc + 1;
            }
            while (k < end_module && toks[k].text != ";") {
                if (toks[k].kind == Token::Ident && !is_type_word(toks[k].text))
                    declared[toks[k].text] = PortDecl{toks[k].text, dir, width, false, false};
                ++k;
            }
            j = k;
        }
        for (const auto& name : order) {
            auto it = declared.find(name);
            if (it == declared.end())
                throw Error(Errc::InvalidDesign, "port '" + name + "' has no direction declaration");
            ports.push_back(it->second);
        }
    }

    for (auto& p : ports) {
        if (p.direction == PortDirection::Input) {
            p.is_clock = is_clock_name(p.name);
            p.is_reset = !p.is_clock && is_reset_name(p.name);
        }
    }
    return ports;
}

Design Design::from_source(std::string source, std::string_view module_name)
{
    if (source.find_first_not_of(" \t\r\n") == std::string::npos)
        throw Error(Errc::InvalidDesign, "design source is empty");
    std::string name(module_name);
    if (name.empty()) {
        auto first = first_module_name(source);
        if (!first)
            throw Error(Errc::InvalidDesign, "no module declaration in source");
        name = *first;
    }
    Design d;
    d.interface = parse_interface(source, name);
    d.module_name = std::move(name);
    d.source = std::move(source);
    return d;
}

}  // namespace poet
