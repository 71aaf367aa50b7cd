#include "bargein/trace.hpp"

#include "bargein/core_types.hpp"

namespace bargein {

const TraceEntry& SessionTrace::add(double t, std::string kind, ordered_json payload) {
    if (!entries_.empty() && t < entries_.back().t) {
        throw ContractViolation("trace entry '" + kind + "' at " + format_seconds(t) +
                                " s precedes last entry at " + format_seconds(entries_.back().t));
    }
    entries_.push_back(TraceEntry{t, std::move(kind), std::move(payload)});
    if (listener_) listener_(entries_.back());
    return entries_.back();
}

std::string SessionTrace::to_ndjson() const {
    std::string out;
    for (const auto& e : entries_) {
        out += to_ndjson_line(e);
        out += '\n';
    }
    return out;
}

std::string to_ndjson_line(const TraceEntry& entry) {
    ordered_json j;
    j["t"] = round_micro(entry.t);
    j["kind"] = entry.kind;
    j["payload"] = entry.payload;
    return j.dump();
}

TraceEntry parse_ndjson_line(const std::string& line) {
    const auto j = ordered_json::parse(line);
    return TraceEntry{j.at("t").get<double>(), j.at("kind").get<std::string>(), j.at("payload")};
}

}  // namespace bargein
