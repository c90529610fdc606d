#include "poet/difftest.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "poet/error.hpp"

namespace poet::difftest {

using nlohmann::json;

std::string_view to_string(CircuitClass c)
{
    return c == CircuitClass::Sequential ? "sequential" : "combinational";
}

std::string_view to_string(SampleDiscipline d)
{
    return d == SampleDiscipline::ClockedNegedge ? "clocked-negedge" : "combinational-settle";
}

namespace {

std::string lower(std::string_view s)
{
    std::string out(s);
    for (char& c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_ws(std::string_view s)
{
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string w;
    while (in >> w)
        out.push_back(w);
    return out;
}

int hex_digits(int width) { return (width + 3) / 4; }

const PortDecl* find_port(const std::vector<PortDecl>& ports, std::string_view name)
{
    for (const auto& p : ports)
        if (p.name == name)
            return &p;
    return nullptr;
}

bool is_input(const PortDecl& p) { return p.direction == PortDirection::Input; }

/// Inputs the vectors may drive: every input except the clock.
std::vector<const PortDecl*> driven_inputs(const FunctionalSpec& spec)
{
    std::vector<const PortDecl*> out;
    for (const auto& p : spec.ports)
        if (is_input(p) && (!spec.clock || p.name != *spec.clock))
            out.push_back(&p);
    return out;
}

std::vector<const PortDecl*> outputs(const FunctionalSpec& spec)
{
    std::vector<const PortDecl*> out;
    for (const auto& p : spec.ports)
        if (p.direction == PortDirection::Output)
            out.push_back(&p);
    return out;
}

bool sequential(const FunctionalSpec& spec)
{
    return spec.circuit_class == CircuitClass::Sequential && spec.clock.has_value();
}

/// Reset polarity guessed from the name when the provider gives none.
bool active_low_name(std::string_view name)
{
    const std::string n = lower(name);
    for (std::string_view suffix : {"_n", "_b", "_l", "rstn", "resetn", "rstb", "resetb"})
        if (n.ends_with(suffix))
            return true;
    return n.starts_with("nrst") || n.starts_with("nreset") || n.starts_with("n_rst");
}

std::string sized_hex(int width, const std::string& hex) { return fmt::format("{}'h{}", width, hex); }

}  // namespace

std::optional<std::string> literal_to_hex(std::string_view text, int width)
{
    if (width < 1)
        return std::nullopt;
    std::string t;
    for (char c : text)
        if (c != '_')
            t.push_back(c);
    if (t.empty())
        return std::nullopt;

    std::vector<bool> bits;  // LSB first
    auto push_digits = [&](std::string_view digits, int base) -> bool {
        if (digits.empty())
            return false;
        const int per = base == 16 ? 4 : base == 8 ? 3 : 1;
        std::vector<bool> out;
        for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
            const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(*it)));
            int v;
            if (c >= '0' && c <= '9')
                v = c - '0';
            else if (c >= 'a' && c <= 'f')
                v = c - 'a' + 10;
            else
                return false;
            if (v >= base)
                return false;
            for (int b = 0; b < per; ++b)
                out.push_back((v >> b) & 1);
        }
        bits = std::move(out);
        return true;
    };
    auto push_decimal = [&](std::string_view digits) -> bool {
        if (digits.empty())
            return false;
        std::uint64_t v = 0;
        for (char c : digits) {
            if (c < '0' || c > '9')
                return false;
            const std::uint64_t d = static_cast<std::uint64_t>(c - '0');
            if (v > (UINT64_MAX - d) / 10)
                return false;
            v = v * 10 + d;
        }
        bits.clear();
        for (int b = 0; b < 64; ++b)
            bits.push_back((v >> b) & 1);
        return true;
    };

    bool ok = false;
    const auto tick = t.find('\'');
    if (tick != std::string::npos) {
        const std::string size = t.substr(0, tick);
        if (!size.empty() && !std::all_of(size.begin(), size.end(), ::isdigit))
            return std::nullopt;
        std::size_t i = tick + 1;
        if (i < t.size() && (t[i] == 's' || t[i] == 'S'))
            return std::nullopt;  // signed literals are not accepted as stimuli
        if (i >= t.size())
            return std::nullopt;
        const char base = static_cast<char>(std::tolower(static_cast<unsigned char>(t[i])));
        const std::string digits = t.substr(i + 1);
        switch (base) {
        case 'h': ok = push_digits(digits, 16); break;
        case 'o': ok = push_digits(digits, 8); break;
        case 'b': ok = push_digits(digits, 2); break;
        case 'd': ok = push_decimal(digits); break;
        default: return std::nullopt;
        }
        if (ok && !size.empty()) {
            const std::size_t declared = std::stoul(size);
            if (declared == 0)
                return std::nullopt;
            for (std::size_t b = declared; b < bits.size(); ++b)
                if (bits[b])
                    return std::nullopt;  // literal overflows its own size
        }
    } else if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
        ok = push_digits(t.substr(2), 16);
    } else if (t.size() > 2 && t[0] == '0' && (t[1] == 'b' || t[1] == 'B')) {
        ok = push_digits(t.substr(2), 2);
    } else {
        ok = push_decimal(t);
    }
    if (!ok)
        return std::nullopt;
    for (std::size_t b = static_cast<std::size_t>(width); b < bits.size(); ++b)
        if (bits[b])
            return std::nullopt;
    bits.resize(static_cast<std::size_t>(hex_digits(width)) * 4, false);
    std::string hex;
    for (int d = hex_digits(width) - 1; d >= 0; --d) {
        int v = 0;
        for (int b = 0; b < 4; ++b)
            v |= bits[static_cast<std::size_t>(d * 4 + b)] << b;
        hex.push_back("0123456789abcdef"[v]);
    }
    return hex;
}

// ---------------------------------------------------------------------------------------------

FunctionalSpec parse_spec_response(std::string_view response, const Design& orig)
{
    static const std::vector<std::string> required{"MODULE", "CLASS", "CLOCK", "RESET", "PORTS", "DESCRIPTION"};
    std::map<std::string, std::vector<std::string>> sections;
    std::string current;
    std::istringstream in{std::string(response)};
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.rfind("##", 0) == 0) {
            std::string heading = trim(std::string_view(t).substr(2));
            for (char& c : heading)
                c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            current = heading;
            sections[current];
            continue;
        }
        if (t.rfind("```", 0) == 0)
            continue;
        if (!current.empty() && !t.empty())
            sections[current].push_back(t);
    }
    std::vector<std::string> missing;
    for (const auto& h : required)
        if (!sections.count(h))
            missing.push_back("## " + h);
    if (!missing.empty()) {
        std::string list;
        for (const auto& m : missing)
            list += (list.empty() ? "" : ", ") + m;
        throw Error(Errc::SpecParseError, "response lacks headings: " + list);
    }
    auto first_line = [&](const std::string& h) -> std::string {
        const auto& lines = sections[h];
        if (lines.empty())
            throw Error(Errc::SpecParseError, "heading ## " + h + " is empty");
        return lines.front();
    };

    FunctionalSpec spec;
    spec.module_name = orig.module_name;
    spec.ports = orig.interface;

    const std::string claimed_module = split_ws(first_line("MODULE")).front();
    if (claimed_module != orig.module_name)
        spec.corrections.push_back(fmt::format("PortTableMismatch: module '{}' named '{}' by provider",
                                               orig.module_name, claimed_module));

    const std::string klass = lower(split_ws(first_line("CLASS")).front());
    if (klass != "combinational" && klass != "sequential")
        throw Error(Errc::SpecParseError, "## CLASS must be combinational or sequential, got '" + klass + "'");
    spec.circuit_class = klass == "sequential" ? CircuitClass::Sequential : CircuitClass::Combinational;

    // Port table: compare against the local parse, which wins.
    std::map<std::string, std::pair<std::string, int>> claimed;
    for (const auto& l : sections["PORTS"]) {
        auto w = split_ws(l);
        if (!w.empty() && (w[0] == "-" || w[0] == "*"))
            w.erase(w.begin());
        if (w.size() < 2)
            continue;
        const std::string dir = lower(w[0]);
        if (dir != "input" && dir != "output" && dir != "inout")
            throw Error(Errc::SpecParseError, "bad port line under ## PORTS: '" + l + "'");
        int width = 1;
        if (w.size() >= 3) {
            try {
                width = std::stoi(w[2]);
            } catch (const std::exception&) {
                throw Error(Errc::SpecParseError, "bad port width in '" + l + "'");
            }
        }
        claimed[w[1]] = {dir, width};
    }
    for (const auto& p : spec.ports) {
        auto it = claimed.find(p.name);
        if (it == claimed.end())
            spec.corrections.push_back(fmt::format("PortTableMismatch: port '{}' missing from provider table", p.name));
        else if (it->second.first != to_string(p.direction) || it->second.second != p.width)
            spec.corrections.push_back(fmt::format("PortTableMismatch: port '{}' is {} {}, provider said {} {}",
                                                   p.name, to_string(p.direction), p.width, it->second.first,
                                                   it->second.second));
    }
    for (const auto& [name, info] : claimed)
        if (!find_port(spec.ports, name))
            spec.corrections.push_back(fmt::format("PortTableMismatch: provider listed unknown port '{}'", name));

    // Clock.
    const std::string clock_word = split_ws(first_line("CLOCK")).front();
    std::optional<std::string> local_clock;
    for (const auto& p : spec.ports)
        if (p.is_clock && is_input(p) && !local_clock)
            local_clock = p.name;
    if (lower(clock_word) != "none") {
        const PortDecl* p = find_port(spec.ports, clock_word);
        if (p && is_input(*p) && p->width == 1) {
            spec.clock = clock_word;
        } else {
            spec.corrections.push_back(
                fmt::format("PortTableMismatch: clock '{}' is not a 1-bit input", clock_word));
            spec.clock = local_clock;
        }
    } else if (local_clock) {
        spec.corrections.push_back(
            fmt::format("PortTableMismatch: provider reported no clock, using input '{}'", *local_clock));
        spec.clock = local_clock;
    }
    for (auto& p : spec.ports)
        p.is_clock = spec.clock && p.name == *spec.clock;

    if (spec.clock && spec.circuit_class == CircuitClass::Combinational) {
        spec.corrections.push_back("PortTableMismatch: design has a clock input, treating it as sequential");
        spec.circuit_class = CircuitClass::Sequential;
    }
    if (!spec.clock && spec.circuit_class == CircuitClass::Sequential) {
        spec.corrections.push_back("PortTableMismatch: sequential without a clock input, treating as combinational");
        spec.circuit_class = CircuitClass::Combinational;
    }

    // Reset.
    const auto reset_words = split_ws(first_line("RESET"));
    std::optional<std::string> local_reset;
    for (const auto& p : spec.ports)
        if (p.is_reset && is_input(p) && !local_reset)
            local_reset = p.name;
    if (lower(reset_words.front()) != "none") {
        const PortDecl* p = find_port(spec.ports, reset_words.front());
        if (p && is_input(*p) && p->width == 1 && !p->is_clock) {
            ResetSpec r;
            r.port = p->name;
            r.active_high = !active_low_name(p->name);
            for (std::size_t i = 1; i < reset_words.size(); ++i) {
                const std::string w = lower(reset_words[i]);
                if (w == "active_high")
                    r.active_high = true;
                else if (w == "active_low")
                    r.active_high = false;
                else if (w == "sync")
                    r.synchronous = true;
                else if (w == "async")
                    r.synchronous = false;
            }
            spec.reset = r;
        } else {
            spec.corrections.push_back(
                fmt::format("PortTableMismatch: reset '{}' is not a 1-bit input", reset_words.front()));
        }
    }
    if (!spec.reset && local_reset) {
        spec.corrections.push_back(fmt::format(
            "PortTableMismatch: provider reported no usable reset, using input '{}'", *local_reset));
        spec.reset = ResetSpec{*local_reset, !active_low_name(*local_reset), true};
    }
    if (spec.circuit_class == CircuitClass::Combinational)
        spec.reset.reset();
    for (auto& p : spec.ports)
        p.is_reset = spec.reset && p.name == spec.reset->port;

    for (const auto& l : sections["DESCRIPTION"])
        spec.description += (spec.description.empty() ? "" : "\n") + l;
    for (const auto& l : sections["SCENARIOS"]) {
        std::string s = l;
        if (s.rfind("- ", 0) == 0 || s.rfind("* ", 0) == 0)
            s = s.substr(2);
        const auto colon = s.find(':');
        if (colon == std::string::npos)
            spec.scenarios.push_back({trim(s), ""});
        else
            spec.scenarios.push_back({trim(s.substr(0, colon)), trim(s.substr(colon + 1))});
    }
    return spec;
}

FunctionalSpec extract_spec(const Design& orig, const ops::PromptLibrary& lib, const GenerateFn& generate,
                            const std::string& attempt_tag)
{
    provider::GenerationRequest req;
    req.bundle.system_text = lib.raw("system_verification");
    req.bundle.user_text = lib.render("spec_extraction", {{"interface", ops::render_interface(orig.interface)},
                                                          {"source", orig.source},
                                                          {"module_name", orig.module_name}});
    req.bundle.kind = "spec";
    req.temperature = provider::kFidelityTemperature;
    req.attempt_tag = attempt_tag;
    return parse_spec_response(generate(req).text, orig);
}

// ---------------------------------------------------------------------------------------------

VectorSet parse_vectors(std::string_view response, const FunctionalSpec& spec, const Limits& limits)
{
    VectorSet out;
    bool saw_vector = false;
    std::optional<Vector> current;
    std::size_t total_seen = 0;

    auto close = [&]() {
        if (!current)
            return;
        const bool drives = std::any_of(current->cycles.begin(), current->cycles.end(),
                                        [](const auto& c) { return !c.empty(); });
        if (current->cycles.empty()) {
            out.warnings.push_back(fmt::format("vector '{}' has no cycles; dropped", current->scenario));
        } else if (!drives) {
            out.warnings.push_back(fmt::format("vector '{}' assigns no input; dropped", current->scenario));
        } else if (static_cast<int>(out.vectors.size()) >= limits.max_vectors) {
            out.warnings.push_back(fmt::format("vector '{}' beyond max_vectors={}; dropped", current->scenario,
                                               limits.max_vectors));
        } else {
            out.vectors.push_back(std::move(*current));
        }
        current.reset();
    };

    std::istringstream in{std::string(response)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (const auto c = t.find("//"); c != std::string::npos)
            t = trim(t.substr(0, c));
        if (t.empty() || t[0] == '#' || t.rfind("```", 0) == 0)
            continue;
        auto words = split_ws(t);
        const std::string head = lower(words[0]);
        if (head == "vector") {
            close();
            saw_vector = true;
            ++total_seen;
            current = Vector{words.size() > 1 ? words[1] : fmt::format("v{}", total_seen - 1), {}};
        } else if (head == "end") {
            close();
        } else if (head == "cycle") {
            if (!current) {
                out.warnings.push_back(fmt::format("line {}: cycle outside a vector; ignored", lineno));
                continue;
            }
            if (static_cast<int>(current->cycles.size()) >= limits.max_cycles) {
                out.warnings.push_back(fmt::format("vector '{}': cycles beyond max_cycles={} dropped",
                                                   current->scenario, limits.max_cycles));
                continue;
            }
            std::vector<Assignment> cycle;
            for (std::size_t i = 1; i < words.size(); ++i) {
                const auto eq = words[i].find('=');
                if (eq == std::string::npos) {
                    out.warnings.push_back(fmt::format("line {}: '{}' is not port=value; dropped", lineno, words[i]));
                    continue;
                }
                const std::string port = words[i].substr(0, eq);
                const std::string value = words[i].substr(eq + 1);
                const PortDecl* p = find_port(spec.ports, port);
                if (!p) {
                    out.warnings.push_back(fmt::format("line {}: unknown port '{}'; dropped", lineno, port));
                    continue;
                }
                if (!is_input(*p)) {
                    out.warnings.push_back(fmt::format("line {}: '{}' is not an input; dropped", lineno, port));
                    continue;
                }
                if (spec.clock && port == *spec.clock) {
                    out.warnings.push_back(fmt::format("line {}: clock '{}' is driven by the testbench; dropped",
                                                       lineno, port));
                    continue;
                }
                auto hex = literal_to_hex(value, p->width);
                if (!hex) {
                    out.warnings.push_back(
                        fmt::format("line {}: '{}' does not fit {} ({} bits); dropped", lineno, value, port, p->width));
                    continue;
                }
                auto same = std::find_if(cycle.begin(), cycle.end(), [&](const Assignment& a) { return a.port == port; });
                if (same != cycle.end())
                    same->hex = *hex;
                else
                    cycle.push_back({port, *hex});
            }
            current->cycles.push_back(std::move(cycle));
        } else {
            out.warnings.push_back(fmt::format("line {}: unrecognized '{}'; ignored", lineno, words[0]));
        }
    }
    close();
    if (!saw_vector)
        throw Error(Errc::VectorParseError, "response contains no 'vector' blocks");
    if (out.vectors.empty())
        throw Error(Errc::NoValidVectors, "no vector survived filtering");
    return out;
}

VectorSet generate_vectors(const FunctionalSpec& spec, const ops::PromptLibrary& lib, const GenerateFn& generate,
                           const Limits& limits, const std::string& attempt_tag)
{
    std::string inputs;
    for (const PortDecl* p : driven_inputs(spec))
        inputs += (inputs.empty() ? "" : ", ") + fmt::format("{} ({} bit{})", p->name, p->width, p->width == 1 ? "" : "s");
    std::string note;
    if (sequential(spec)) {
        note = fmt::format("- The testbench drives clock '{}' itself. Each cycle line is applied just after a "
                           "rising edge and outputs are observed before the next rising edge.",
                           *spec.clock);
        if (spec.reset)
            note += fmt::format(" Reset '{}' is asserted for two cycles before every vector, then released.",
                                spec.reset->port);
    }
    std::string spec_text = fmt::format("module {} ({})\n", spec.module_name, to_string(spec.circuit_class));
    spec_text += ops::render_interface(spec.ports);
    if (!spec.description.empty())
        spec_text += spec.description + "\n";
    for (const auto& s : spec.scenarios)
        spec_text += fmt::format("- {}: {}\n", s.id, s.text);

    provider::GenerationRequest req;
    req.bundle.system_text = lib.raw("system_verification");
    req.bundle.user_text = lib.render("vector_generation", {{"max_vectors", std::to_string(limits.max_vectors)},
                                                            {"max_cycles", std::to_string(limits.max_cycles)},
                                                            {"input_ports", inputs.empty() ? "(none)" : inputs},
                                                            {"sequential_note", note},
                                                            {"spec", spec_text}});
    req.bundle.kind = "vectors";
    req.temperature = provider::kOperatorTemperature;
    req.attempt_tag = attempt_tag;
    return parse_vectors(generate(req).text, spec, limits);
}

// ---------------------------------------------------------------------------------------------

namespace {

std::string declarations(const FunctionalSpec& spec)
{
    std::string out;
    for (const auto& p : spec.ports) {
        const std::string range = p.width > 1 ? fmt::format("[{}:0] ", p.width - 1) : "";
        if (is_input(p)) {
            if (spec.clock && p.name == *spec.clock)
                out += fmt::format("  reg {}{} = 1'b0;\n", range, p.name);
            else
                out += fmt::format("  reg {}{};\n", range, p.name);
        } else {
            out += fmt::format("  wire {}{};\n", range, p.name);
        }
    }
    out += "  integer poet_errors;\n\n";
    out += fmt::format("  {} dut (\n", spec.module_name);
    for (std::size_t i = 0; i < spec.ports.size(); ++i)
        out += fmt::format("    .{0}({0}){1}\n", spec.ports[i].name, i + 1 < spec.ports.size() ? "," : "");
    out += "  );\n\n";
    return out;
}

/// Emits the shared drive sequence; `sample` renders the statements at each sample point.
template <typename SampleFn>
std::string drive_body(const FunctionalSpec& spec, const VectorSet& v, SampleFn sample)
{
    const auto inputs = driven_inputs(spec);
    const bool seq = sequential(spec);
    std::string out;
    for (std::size_t vi = 0; vi < v.vectors.size(); ++vi) {
        const Vector& vec = v.vectors[vi];
        out += fmt::format("    // vector {}: {}\n", vi, vec.scenario);
        std::string zero;
        for (const PortDecl* p : inputs) {
            if (seq && spec.reset && p->name == spec.reset->port)
                continue;
            zero += fmt::format(" {} = {};", p->name, sized_hex(p->width, std::string(hex_digits(p->width), '0')));
        }
        if (!zero.empty())
            out += "   " + zero + "\n";
        if (seq) {
            if (spec.reset)
                out += fmt::format("    {} = 1'b{};\n", spec.reset->port, spec.reset->active_high ? 1 : 0);
            out += fmt::format("    @(posedge {0});\n    @(posedge {0});\n    #1;\n", *spec.clock);
            if (spec.reset)
                out += fmt::format("    {} = 1'b{};\n", spec.reset->port, spec.reset->active_high ? 0 : 1);
        }
        for (std::size_t ci = 0; ci < vec.cycles.size(); ++ci) {
            std::string drive;
            for (const auto& a : vec.cycles[ci]) {
                const PortDecl* p = find_port(spec.ports, a.port);
                drive += fmt::format(" {} = {};", a.port, sized_hex(p->width, a.hex));
            }
            if (!drive.empty())
                out += "   " + drive + "\n";
            if (seq)
                out += fmt::format("    @(negedge {});\n", *spec.clock);
            else
                out += "    #1;\n";
            out += sample(static_cast<int>(vi), static_cast<int>(ci));
            if (seq && ci + 1 < vec.cycles.size())
                out += fmt::format("    @(posedge {});\n    #1;\n", *spec.clock);
        }
    }
    return out;
}

std::string header(const FunctionalSpec& spec, const Limits& limits, std::string_view kind)
{
    std::string out = fmt::format("// {} testbench for {}\n`timescale 1ns/1ps\n\nmodule poet_tb;\n", kind,
                                  spec.module_name);
    out += declarations(spec);
    if (sequential(spec))
        out += fmt::format("  always #{} {} = ~{};\n\n", limits.clock_period / 2, *spec.clock, *spec.clock);
    return out;
}

}  // namespace

std::string assemble_stimulus_tb(const FunctionalSpec& spec, const VectorSet& v, const Limits& limits)
{
    const auto outs = outputs(spec);
    std::string out = header(spec, limits, "Stimulus");
    out += "  initial begin\n    poet_errors = 0;\n";
    out += drive_body(spec, v, [&](int vi, int ci) {
        std::string s;
        for (const PortDecl* p : outs)
            s += fmt::format("    $display(\"POET_SAMPLE v={} t={} {}=%h\", {});\n", vi, ci, p->name, p->name);
        return s;
    });
    out += "    $finish;\n  end\nendmodule\n";
    return out;
}

GoldenOutputs capture_golden(const Design& orig, const std::string& stimulus_source, const FunctionalSpec& spec,
                             const VectorSet& v, const SimFn& sim, const std::string& label)
{
    const tooling::SimResult r = sim(orig.source, stimulus_source, label);
    if (!r.compiled)
        throw Error(Errc::SimCompileError, fmt::format("original design does not compile with the stimulus "
                                                       "testbench: {}",
                                                       r.stderr_text.substr(0, 2000)));
    if (!r.ran || r.timed_out || r.exit_code != 0)
        throw Error(Errc::SimRuntimeError,
                    fmt::format("stimulus simulation failed ({}): {}", r.reason, r.stderr_text.substr(0, 2000)));

    GoldenOutputs g;
    g.discipline = sequential(spec) ? SampleDiscipline::ClockedNegedge : SampleDiscipline::CombinationalSettle;
    for (const auto& s : r.samples) {
        const PortDecl* p = find_port(spec.ports, s.port);
        if (!p || p->direction != PortDirection::Output)
            throw Error(Errc::SimRuntimeError, "sample for unknown output '" + s.port + "'");
        if (s.value.find_first_of("xXzZ") != std::string::npos)
            throw Error(Errc::UnknownValueInGolden,
                        fmt::format("v={} t={} {}={} is not fully known", s.vector, s.step, s.port, s.value));
        if (static_cast<int>(s.value.size()) != hex_digits(p->width))
            throw Error(Errc::SimRuntimeError, fmt::format("sample {}={} has the wrong width", s.port, s.value));
        g.values[{s.vector, s.step}][s.port] = lower(s.value);
    }
    const auto outs = outputs(spec);
    for (std::size_t vi = 0; vi < v.vectors.size(); ++vi)
        for (std::size_t ci = 0; ci < v.vectors[vi].cycles.size(); ++ci)
            for (const PortDecl* p : outs) {
                auto it = g.values.find({static_cast<int>(vi), static_cast<int>(ci)});
                if (it == g.values.end() || !it->second.count(p->name))
                    throw Error(Errc::SimRuntimeError,
                                fmt::format("simulation ended before sample v={} t={} {}", vi, ci, p->name));
            }
    return g;
}

std::string assemble_checking_tb(const FunctionalSpec& spec, const VectorSet& v, const GoldenOutputs& o,
                                 const Limits& limits)
{
    const auto outs = outputs(spec);
    for (std::size_t vi = 0; vi < v.vectors.size(); ++vi)
        for (std::size_t ci = 0; ci < v.vectors[vi].cycles.size(); ++ci)
            for (const PortDecl* p : outs) {
                auto it = o.values.find({static_cast<int>(vi), static_cast<int>(ci)});
                if (it == o.values.end() || !it->second.count(p->name))
                    throw Error(Errc::GoldenCoverageGap,
                                fmt::format("no golden value for v={} t={} {}", vi, ci, p->name));
            }

    std::string out = header(spec, limits, "Self-checking");
    out += "  initial begin\n    poet_errors = 0;\n";
    out += drive_body(spec, v, [&](int vi, int ci) {
        std::string s;
        const auto& row = o.values.at({vi, ci});
        for (const PortDecl* p : outs) {
            const std::string expected = sized_hex(p->width, row.at(p->name));
            s += fmt::format("    if ({0} !== {1}) begin\n"
                             "      poet_errors = poet_errors + 1;\n"
                             "      $display(\"POET_MISMATCH v={2} t={3} {0} expected=%h got=%h\", {1}, {0});\n"
                             "    end\n",
                             p->name, expected, vi, ci);
        }
        return s;
    });
    out += "    if (poet_errors == 0)\n      $display(\"POET_RESULT: PASS\");\n"
           "    else\n      $display(\"POET_RESULT: FAIL errors=%0d\", poet_errors);\n";
    out += "    $finish;\n  end\nendmodule\n";
    return out;
}

// ---------------------------------------------------------------------------------------------

Testbench generate_testbench(const Design& orig, const ops::PromptLibrary& lib, const GenerateFn& generate,
                             const SimFn& sim, const Limits& limits, const StepObserver& observe)
{
    if (limits.max_attempts < 1 || limits.max_vectors < 1 || limits.max_cycles < 1 || limits.clock_period < 2 ||
        limits.clock_period % 2 != 0)
        throw Error(Errc::PreconditionViolated, "difftest limits out of range");
    auto note = [&](json j) {
        if (observe)
            observe(j);
    };

    std::optional<FunctionalSpec> spec;
    std::vector<std::string> failures;
    for (int attempt = 1; attempt <= limits.max_attempts; ++attempt) {
        std::string step = "spec";
        try {
            if (!spec) {
                spec = extract_spec(orig, lib, generate, fmt::format("spec/{}", attempt));
                note({{"step", "spec"},
                      {"attempt", attempt},
                      {"class", to_string(spec->circuit_class)},
                      {"clock", spec->clock ? json(*spec->clock) : json(nullptr)},
                      {"reset", spec->reset ? json(spec->reset->port) : json(nullptr)},
                      {"corrections", spec->corrections}});
            }
            step = "vectors";
            VectorSet vectors = generate_vectors(*spec, lib, generate, limits, fmt::format("vectors/{}", attempt));
            std::size_t cycles = 0;
            for (const auto& vec : vectors.vectors)
                cycles += vec.cycles.size();
            note({{"step", "vectors"},
                  {"attempt", attempt},
                  {"vectors", vectors.vectors.size()},
                  {"cycles", cycles},
                  {"warnings", vectors.warnings}});

            step = "golden";
            const std::string stimulus = assemble_stimulus_tb(*spec, vectors, limits);
            GoldenOutputs golden =
                capture_golden(orig, stimulus, *spec, vectors, sim, fmt::format("capture-{}", attempt));
            note({{"step", "golden"}, {"attempt", attempt}, {"samples", golden.values.size()}});

            step = "validate";
            const std::string checking = assemble_checking_tb(*spec, vectors, golden, limits);
            const tooling::SimResult r = sim(orig.source, checking, fmt::format("validate-{}", attempt));
            note({{"step", "validate"},
                  {"attempt", attempt},
                  {"verdict", tooling::to_string(r.verdict)},
                  {"errors", r.error_count}});
            if (r.verdict != tooling::Verdict::Pass) {
                failures.push_back(fmt::format("attempt {}: original does not pass its own checking testbench "
                                               "({} {})",
                                               attempt, tooling::to_string(r.verdict), r.reason));
                continue;
            }
            Testbench tb;
            tb.spec = *spec;
            tb.vectors = std::move(vectors);
            tb.golden = std::move(golden);
            tb.stimulus_source = stimulus;
            tb.checking_source = checking;
            tb.validated = true;
            tb.attempts = attempt;
            return tb;
        } catch (const Error& e) {
            if (e.code() == Errc::AuthError || e.code() == Errc::ToolNotFound || e.code() == Errc::TemplateError)
                throw;
            note({{"step", step}, {"attempt", attempt}, {"error", e.what()}});
            failures.push_back(fmt::format("attempt {} ({}): {}", attempt, step, e.what()));
        }
    }
    std::string msg = fmt::format("no validated testbench after {} attempts", limits.max_attempts);
    for (const auto& f : failures)
        msg += "\n  " + f;
    throw Error(Errc::TestbenchGenerationFailed, msg);
}

// ---------------------------------------------------------------------------------------------

json to_json(const Testbench& tb)
{
    json ports = json::array();
    for (const auto& p : tb.spec.ports)
        ports.push_back({{"name", p.name},
                         {"direction", to_string(p.direction)},
                         {"width", p.width},
                         {"clock", p.is_clock},
                         {"reset", p.is_reset}});
    json scenarios = json::array();
    for (const auto& s : tb.spec.scenarios)
        scenarios.push_back({{"id", s.id}, {"text", s.text}});
    json spec{{"module", tb.spec.module_name},
              {"class", to_string(tb.spec.circuit_class)},
              {"clock", tb.spec.clock ? json(*tb.spec.clock) : json(nullptr)},
              {"ports", ports},
              {"description", tb.spec.description},
              {"scenarios", scenarios},
              {"corrections", tb.spec.corrections}};
    if (tb.spec.reset)
        spec["reset"] = {{"port", tb.spec.reset->port},
                         {"active_high", tb.spec.reset->active_high},
                         {"synchronous", tb.spec.reset->synchronous}};
    else
        spec["reset"] = nullptr;

    json vectors = json::array();
    for (const auto& v : tb.vectors.vectors) {
        json cycles = json::array();
        for (const auto& c : v.cycles) {
            json row = json::object();
            for (const auto& a : c)
                row[a.port] = a.hex;
            cycles.push_back(row);
        }
        vectors.push_back({{"scenario", v.scenario}, {"cycles", cycles}});
    }
    json golden = json::array();
    for (const auto& [key, row] : tb.golden.values)
        golden.push_back({{"v", key.first}, {"t", key.second}, {"outputs", row}});

    return {{"spec", spec},
            {"vectors", vectors},
            {"warnings", tb.vectors.warnings},
            {"discipline", to_string(tb.golden.discipline)},
            {"golden", golden},
            {"stimulus_source", tb.stimulus_source},
            {"checking_source", tb.checking_source},
            {"validated", tb.validated},
            {"attempts", tb.attempts}};
}

Testbench testbench_from_json(const json& j)
{
    try {
        Testbench tb;
        const json& s = j.at("spec");
        tb.spec.module_name = s.at("module").get<std::string>();
        tb.spec.circuit_class =
            s.at("class").get<std::string>() == "sequential" ? CircuitClass::Sequential : CircuitClass::Combinational;
        if (!s.at("clock").is_null())
            tb.spec.clock = s.at("clock").get<std::string>();
        for (const auto& p : s.at("ports")) {
            PortDecl d;
            d.name = p.at("name").get<std::string>();
            const std::string dir = p.at("direction").get<std::string>();
            d.direction = dir == "input" ? PortDirection::Input
                        : dir == "output" ? PortDirection::Output
                                          : PortDirection::Inout;
            d.width = p.at("width").get<int>();
            d.is_clock = p.at("clock").get<bool>();
            d.is_reset = p.at("reset").get<bool>();
            tb.spec.ports.push_back(d);
        }
        if (!s.at("reset").is_null())
            tb.spec.reset = ResetSpec{s["reset"].at("port").get<std::string>(),
                                      s["reset"].at("active_high").get<bool>(),
                                      s["reset"].at("synchronous").get<bool>()};
        tb.spec.description = s.value("description", "");
        for (const auto& sc : s.value("scenarios", json::array()))
            tb.spec.scenarios.push_back({sc.at("id").get<std::string>(), sc.at("text").get<std::string>()});
        tb.spec.corrections = s.value("corrections", std::vector<std::string>{});

        for (const auto& v : j.at("vectors")) {
            Vector vec;
            vec.scenario = v.at("scenario").get<std::string>();
            for (const auto& c : v.at("cycles")) {
                std::vector<Assignment> row;
                for (const auto& [port, hex] : c.items())
                    row.push_back({port, hex.get<std::string>()});
                vec.cycles.push_back(std::move(row));
            }
            tb.vectors.vectors.push_back(std::move(vec));
        }
        tb.vectors.warnings = j.value("warnings", std::vector<std::string>{});
        tb.golden.discipline = j.at("discipline").get<std::string>() == "clocked-negedge"
                                   ? SampleDiscipline::ClockedNegedge
                                   : SampleDiscipline::CombinationalSettle;
        for (const auto& g : j.at("golden"))
            tb.golden.values[{g.at("v").get<int>(), g.at("t").get<int>()}] =
                g.at("outputs").get<std::map<std::string, std::string>>();
        tb.stimulus_source = j.at("stimulus_source").get<std::string>();
        tb.checking_source = j.at("checking_source").get<std::string>();
        tb.validated = j.at("validated").get<bool>();
        tb.attempts = j.value("attempts", 0);
        return tb;
    } catch (const json::exception& e) {
        throw Error(Errc::JournalParseError, std::string("malformed testbench record: ") + e.what());
    }
}

}  // namespace poet::difftest
