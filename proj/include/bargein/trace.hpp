#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace bargein {

using ordered_json = nlohmann::ordered_json;

/// One timestamped record. `kind` names the event ("robot.word",
/// "engine.gate", ...) and doubles as the wire message type.
struct TraceEntry {
    double t = 0.0;  // session seconds
    std::string kind;
    ordered_json payload = ordered_json::object();
};

/// Ordered record of everything a session did. Timestamps never decrease.
class SessionTrace {
public:
    using Listener = std::function<void(const TraceEntry&)>;

    /// Throws ContractViolation if `t` precedes the last entry.
    const TraceEntry& add(double t, std::string kind, ordered_json payload);

    const std::vector<TraceEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    /// Called synchronously after every add().
    void set_listener(Listener listener) { listener_ = std::move(listener); }

    /// Newline-delimited JSON, one {"t","kind","payload"} object per line.
    std::string to_ndjson() const;

private:
    std::vector<TraceEntry> entries_;
    Listener listener_;
};

/// Single-line JSON for one entry; `t` is rounded to microseconds.
std::string to_ndjson_line(const TraceEntry& entry);

/// Parses one line produced by to_ndjson_line.
TraceEntry parse_ndjson_line(const std::string& line);

}  // namespace bargein
