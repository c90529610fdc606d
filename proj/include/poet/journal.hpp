#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace poet {

/// Append-only newline-delimited JSON event log. Each line is
/// {"seq": n, "ts": "<UTC ISO-8601>", "kind": "...", "data": {...}}.
/// Writes are serialized and flushed line by line.
class Journal {
public:
    /// In-memory only (events() still works).
    Journal();
    /// `normalize_time` writes ts=0 and latency_ms=0 so journals compare byte for byte.
    explicit Journal(const std::filesystem::path& path, bool append = false, bool normalize_time = false);

    void write(std::string_view kind, nlohmann::json data);
    std::vector<nlohmann::json> events() const;
    long next_seq() const;

private:
    mutable std::mutex mutex_;
    std::ofstream out_;
    bool to_file_ = false;
    bool normalize_ = false;
    long seq_ = 0;
    std::vector<nlohmann::json> events_;
};

struct JournalRead {
    std::vector<nlohmann::json> events;
    std::vector<std::string> warnings;  // skipped lines
};

/// Tolerant reader: malformed lines (typically a truncated last line) are skipped with a warning.
/// Throws JournalParseError when the file cannot be opened.
JournalRead read_journal(const std::filesystem::path& path);

/// Replaces "ts" and every "latency_ms" with 0.
nlohmann::json normalize_event(nlohmann::json event);

/// Normalized NDJSON text of a journal file, for determinism checks.
std::string normalized_journal(const std::filesystem::path& path);

}  // namespace poet
