#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "bargein/core_types.hpp"

namespace bargein {

struct SpeakingRateConfig {
    double rate_wpm = 150.0;
    double floor_s = 0.05;  // minimum per-word duration

    /// Throws InvalidInput unless both fields are positive.
    void validate() const;
};

/// Characters that mark a clause boundary when they end a token.
inline constexpr std::string_view kClausePunctuation = ".,!?;:";

bool ends_clause(std::string_view token);

/// Uniform word schedule: every word lasts max(60 / rate_wpm, floor_s).
/// Throws InvalidInput for empty or whitespace-only text.
PlannedUtterance plan_utterance(std::string_view text, const SpeakingRateConfig& cfg);

/// Number of tokens fully spoken by `elapsed_s`, in [0, n].
std::size_t estimated_spoken_index(const PlannedUtterance& plan, double elapsed_s);

/// Planned speech still ahead of `elapsed_s`, never negative.
double remaining_duration(const PlannedUtterance& plan, double elapsed_s);

/// Token index to restart from: just after the last clause-ending token among
/// those already spoken, or 0 when no clause has been completed.
std::size_t resume_point(const PlannedUtterance& plan, double elapsed_s);

/// Tokens [from_index, n) joined by single spaces. Throws InvalidInput when
/// from_index > n.
std::string remaining_text(const PlannedUtterance& plan, std::size_t from_index);

/// Tokens [0, to_index) joined by single spaces.
std::string spoken_text(const PlannedUtterance& plan, std::size_t to_index);

}  // namespace bargein
