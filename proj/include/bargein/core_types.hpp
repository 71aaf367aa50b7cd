#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace bargein {

// ── Errors ──────────────────────────────────────────────────────

/// Malformed caller input (empty text, negative timing, unknown names).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation's precondition (wrong state, wrong label).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// History append with a timestamp earlier than the last entry.
class OrderingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Recoverable failure from a classifier or planner backend. Carried as a
/// value so the session engine can pick a fallback instead of unwinding.
struct Failure {
    std::string stage;
    std::string message;
};

template <typename T>
class Outcome {
public:
    Outcome(T value) : v_(std::move(value)) {}
    Outcome(Failure f) : v_(std::move(f)) {}

    bool ok() const { return std::holds_alternative<T>(v_); }
    explicit operator bool() const { return ok(); }

    const T& value() const { return std::get<T>(v_); }
    T& value() { return std::get<T>(v_); }
    const Failure& failure() const { return std::get<Failure>(v_); }

private:
    std::variant<T, Failure> v_;
};

// ── Utterances ──────────────────────────────────────────────────

struct WordToken {
    std::string text;
    std::size_t index = 0;
    double start_s = 0.0;
    double duration_s = 0.0;
    bool ends_clause = false;

    double end_s() const { return start_s + duration_s; }
};

struct PlannedUtterance {
    std::string full_text;
    std::vector<WordToken> tokens;
    double total_duration_s = 0.0;
    double rate_wpm = 0.0;

    std::size_t size() const { return tokens.size(); }
};

/// A finalized user transcript heard while the robot was speaking.
struct OverlapEvent {
    std::string transcript;
    double onset_s = 0.0;  // since the robot's current turn began
    std::size_t word_count = 0;
    bool is_final = true;
};

// ── Labels and decisions ────────────────────────────────────────

enum class IntentLabel { Agreement, Assistance, Clarification, Disruptive };

enum class HandlingDecision {
    FinishUp,
    YieldImmediately,
    Continue,
    AckAndContinue,
    ClarifyAndContinue,
    AckAndWrapUp,
};

inline constexpr IntentLabel kAllLabels[] = {
    IntentLabel::Agreement, IntentLabel::Assistance, IntentLabel::Clarification,
    IntentLabel::Disruptive};

inline constexpr HandlingDecision kAllDecisions[] = {
    HandlingDecision::FinishUp,       HandlingDecision::YieldImmediately,
    HandlingDecision::Continue,       HandlingDecision::AckAndContinue,
    HandlingDecision::ClarifyAndContinue, HandlingDecision::AckAndWrapUp};

/// Lowercase wire name: "agreement", "assistance", ...
std::string_view to_string(IntentLabel label);
/// Snake-case wire name: "finish_up", "yield_immediately", ...
std::string_view to_string(HandlingDecision decision);

std::optional<IntentLabel> label_from_string(std::string_view name);
std::optional<HandlingDecision> decision_from_string(std::string_view name);

// ── Conversation history ────────────────────────────────────────

enum class Speaker { User, Robot };

std::string_view to_string(Speaker speaker);

struct HistoryEntry {
    Speaker speaker = Speaker::User;
    std::string text;
    double start_s = 0.0;
    bool complete = true;  // false for robot turns cut off mid-utterance

    bool operator==(const HistoryEntry&) const = default;
};

/// Append-only record of who said what. Entries are never edited after they
/// are added.
class DialogueHistory {
public:
    DialogueHistory() = default;

    const std::vector<HistoryEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Returns a new history with one more entry. Throws OrderingError if
    /// start_s precedes the last recorded timestamp.
    DialogueHistory append(Speaker speaker, std::string text, double start_s,
                           bool complete = true) const;

    /// In-place variant for the single owning session loop.
    void push(Speaker speaker, std::string text, double start_s, bool complete = true);

private:
    std::vector<HistoryEntry> entries_;
};

inline constexpr std::string_view kTruncationMarker = "[interrupted]";

/// Last `max_turns` entries, one "Speaker: text" line each. Truncated robot
/// turns get the truncation marker appended. Empty history renders "".
std::string render_history(const DialogueHistory& history, std::size_t max_turns);

// ── Robot actions ───────────────────────────────────────────────

namespace action {
struct Speak {
    std::string text;
    std::optional<std::size_t> resume_token_index;  // set when resuming a plan
    bool operator==(const Speak&) const = default;
};
struct VerbalAck {
    std::string token;
    bool operator==(const VerbalAck&) const = default;
};
struct Nod {
    bool operator==(const Nod&) const = default;
};
struct Yield {
    bool operator==(const Yield&) const = default;
};
struct AnswerClarification {
    std::string text;
    bool operator==(const AnswerClarification&) const = default;
};
struct WrapUpSummary {
    std::string text;
    bool operator==(const WrapUpSummary&) const = default;
};
}  // namespace action

using RobotAction = std::variant<action::Speak, action::VerbalAck, action::Nod, action::Yield,
                                 action::AnswerClarification, action::WrapUpSummary>;

/// "speak", "verbal_ack", "nod", "yield", "answer_clarification", "wrap_up_summary"
std::string_view action_kind(const RobotAction& a);
/// Spoken text of the action, empty for Nod and Yield.
std::string action_text(const RobotAction& a);
bool is_speech(const RobotAction& a);

// ── Text helpers shared by several modules ──────────────────────

/// Whitespace tokenization. Fillers count as words.
std::vector<std::string> split_words(std::string_view text);
/// Collapses runs of whitespace to single spaces and trims both ends.
std::string normalize_whitespace(std::string_view text);
std::size_t count_words(std::string_view text);
std::string to_lower(std::string_view text);
/// Lowercases and removes leading/trailing punctuation, keeping inner
/// apostrophes and hyphens ("Luna," -> "luna", "don't" -> "don't").
std::string strip_token(std::string_view token);
/// Shortest decimal form after rounding to microseconds ("3.2", "0.4", "12").
std::string format_seconds(double seconds);
/// Seconds rounded to the nearest microsecond, for trace payloads.
double round_micro(double seconds);

}  // namespace bargein
