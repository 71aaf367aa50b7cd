#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bargein/core_types.hpp"
#include "bargein/response_planner.hpp"

namespace bargein {

struct DispatchConfig {
    std::size_t backchannel_max_words = 2;
    double aggressive_window_s = 5.0;
    std::vector<std::string> agreement_ack_lexicon{"ya", "yes", "uhhum", "sure"};
    std::vector<std::string> assistance_ack_lexicon{"yeah", "yes", "thanks"};
    std::uint64_t ack_seed = 0;

    void validate() const;
};

/// Maps a classified overlap to a handling strategy. Both thresholds are
/// inclusive: two words is still a backchannel, and 5.000 s is still inside
/// the aggressive window.
HandlingDecision decide(IntentLabel label, std::size_t word_count, double elapsed_s,
                        const DispatchConfig& cfg);

/// Round-robin acknowledgement tokens, one counter per label. Owned by a
/// session so traces stay reproducible.
class AckPicker {
public:
    explicit AckPicker(DispatchConfig cfg) : cfg_(std::move(cfg)) {}

    /// Throws ContractViolation for labels other than Agreement/Assistance.
    std::string pick(IntentLabel label);

private:
    DispatchConfig cfg_;
    std::map<IntentLabel, std::uint64_t> counters_;
};

/// The utterance being interrupted and what the planner needs to know.
struct ExpandContext {
    const PlannedUtterance* plan = nullptr;
    double elapsed_s = 0.0;           // into `plan`
    IntentLabel label = IntentLabel::Disruptive;
    std::string overlap_text;
    std::string history_rendered;
    std::string queued_text;  // speech still queued after `plan`, for wrap-up summaries
};

struct Expansion {
    std::vector<RobotAction> actions;
    std::size_t spoken_index = 0;
    std::optional<std::size_t> resume_index;  // set when the plan is resumed
    std::optional<Failure> failure;           // planner failed; actions fell back to [Yield]
};

/// Turns a decision into the robot's next actions.
///
///   Continue           -> Speak(rest from resume point)
///   AckAndContinue     -> VerbalAck, Nod, Speak(rest from resume point)
///   ClarifyAndContinue -> AnswerClarification, Speak(rest from resume point)
///   AckAndWrapUp       -> WrapUpSummary, Yield
///   YieldImmediately   -> Yield, Speak(new response)
///   FinishUp           -> nothing
///
/// Planner failures collapse the sequence to [Yield].
Expansion expand(HandlingDecision decision, const ExpandContext& ctx, AckPicker& acks,
                 ResponsePlanner& planner);

}  // namespace bargein
