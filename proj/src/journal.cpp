#include "poet/journal.hpp"

#include <chrono>

#include <fmt/chrono.h>
#include <fmt/format.h>

#include "poet/error.hpp"

namespace poet {

using nlohmann::json;

namespace {

std::string utc_now()
{
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), ms);
}

void zero_latency(json& j)
{
    if (j.is_object()) {
        for (auto& [key, value] : j.items()) {
            if (key == "latency_ms")
                value = 0;
            else
                zero_latency(value);
        }
    } else if (j.is_array()) {
        for (auto& v : j)
            zero_latency(v);
    }
}

}  // namespace

Journal::Journal() = default;

Journal::Journal(const std::filesystem::path& path, bool append, bool normalize_time)
    : to_file_(true), normalize_(normalize_time)
{
    if (append) {
        JournalRead prior = read_journal(path);
        for (const auto& e : prior.events)
            if (e.contains("seq") && e["seq"].is_number_integer())
                seq_ = std::max(seq_, e["seq"].get<long>() + 1);
    }
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_)
        throw Error(Errc::JournalParseError, "cannot open journal " + path.string() + " for writing");
}

void Journal::write(std::string_view kind, json data)
{
    std::lock_guard lock(mutex_);
    json event{{"seq", seq_++}, {"ts", normalize_ ? json(0) : json(utc_now())}, {"kind", kind}, {"data", std::move(data)}};
    if (normalize_)
        zero_latency(event);
    if (to_file_) {
        out_ << event.dump() << '\n';
        out_.flush();
    }
    events_.push_back(std::move(event));
}

std::vector<json> Journal::events() const
{
    std::lock_guard lock(mutex_);
    return events_;
}

long Journal::next_seq() const
{
    std::lock_guard lock(mutex_);
    return seq_;
}

JournalRead read_journal(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::JournalParseError, "cannot open journal " + path.string());
    JournalRead r;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            json j = json::parse(line);
            if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
                r.warnings.push_back(fmt::format("line {}: not a journal event; skipped", lineno));
                continue;
            }
            if (!j.contains("data"))
                j["data"] = json::object();
            r.events.push_back(std::move(j));
        } catch (const json::exception&) {
            r.warnings.push_back(fmt::format("line {}: malformed JSON; skipped", lineno));
        }
    }
    return r;
}

json normalize_event(json event)
{
    if (event.contains("ts"))
        event["ts"] = 0;
    zero_latency(event);
    return event;
}

std::string normalized_journal(const std::filesystem::path& path)
{
    std::string out;
    for (const auto& e : read_journal(path).events)
        out += normalize_event(e).dump() + "\n";
    return out;
}

}  // namespace poet
