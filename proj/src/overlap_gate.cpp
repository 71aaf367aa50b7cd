#include "bargein/overlap_gate.hpp"

#include "bargein/speech_clock.hpp"

namespace bargein {

void WakewordConfig::validate() const {
    if (wakewords.empty()) throw InvalidInput("wakeword set must not be empty");
    for (const auto& w : wakewords) {
        if (w.empty() || split_words(w).size() != 1) {
            throw InvalidInput("wakeword '" + w + "' must be a single token");
        }
        if (w != to_lower(w)) throw InvalidInput("wakeword '" + w + "' must be lowercase");
    }
}

std::string_view to_string(const GateOutcome& outcome) {
    if (std::holds_alternative<gate_outcome::WakewordYield>(outcome)) return "wakeword_yield";
    if (std::holds_alternative<gate_outcome::FinishUp>(outcome)) return "finish_up";
    return "needs_classification";
}

bool contains_wakeword(std::string_view transcript, const WakewordConfig& cfg) {
    for (const auto& word : split_words(transcript)) {
        if (cfg.wakewords.count(strip_token(word)) != 0) return true;
    }
    return false;
}

GateOutcome gate(const OverlapEvent& overlap, double remaining_s, const WakewordConfig& cfg) {
    if (contains_wakeword(overlap.transcript, cfg)) return gate_outcome::WakewordYield{};
    if (remaining_s < kFinishUpThresholdS) return gate_outcome::FinishUp{};
    return gate_outcome::NeedsClassification{overlap};
}

GateOutcome gate(const OverlapEvent& overlap, const PlannedUtterance& plan, double elapsed_s,
                 const WakewordConfig& cfg) {
    if (!overlap.is_final) throw ContractViolation("only final transcripts may be gated");
    if (elapsed_s < 0.0 || elapsed_s >= plan.total_duration_s) {
        throw ContractViolation("gate called while the robot is not speaking");
    }
    return gate(overlap, remaining_duration(plan, elapsed_s), cfg);
}

}  // namespace bargein
