#pragma once

#include <set>
#include <string>
#include <string_view>
#include <variant>

#include "bargein/core_types.hpp"

namespace bargein {

struct WakewordConfig {
    std::set<std::string> wakewords{"luna", "stop"};

    /// Non-empty, lowercase, single-token entries.
    void validate() const;
};

/// Overlaps with less than this much planned speech left are not treated as
/// interruptions.
inline constexpr double kFinishUpThresholdS = 2.0;

namespace gate_outcome {
struct WakewordYield {};
struct FinishUp {};
struct NeedsClassification {
    OverlapEvent overlap;
};
}  // namespace gate_outcome

using GateOutcome = std::variant<gate_outcome::WakewordYield, gate_outcome::FinishUp,
                                 gate_outcome::NeedsClassification>;

/// "wakeword_yield", "finish_up", "needs_classification"
std::string_view to_string(const GateOutcome& outcome);

/// Whole-token, case-insensitive match after stripping punctuation.
bool contains_wakeword(std::string_view transcript, const WakewordConfig& cfg);

/// Wakeword check first, then the end-of-turn rule on `remaining_s`.
GateOutcome gate(const OverlapEvent& overlap, double remaining_s, const WakewordConfig& cfg);

/// Gate an overlap against a single plan. Throws ContractViolation if the
/// robot is not mid-utterance or the transcript is not final.
GateOutcome gate(const OverlapEvent& overlap, const PlannedUtterance& plan, double elapsed_s,
                 const WakewordConfig& cfg);

}  // namespace bargein
