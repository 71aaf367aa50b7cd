#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "bargein/core_types.hpp"
#include "bargein/llm_client.hpp"

namespace bargein {

enum class PlannerKind { ClarifyAnswer, WrapUp, NewResponse };

std::string_view to_string(PlannerKind kind);

struct PlannerRequest {
    PlannerKind kind = PlannerKind::NewResponse;
    std::string history_rendered;
    std::string trigger_text;    // the interruption
    std::string remaining_text;  // planned content not yet delivered
    std::string current_text;    // full text of the interrupted utterance, if any
};

struct PlannerConfig {
    std::string hold_phrase = "Let me finish my thought.";
    std::size_t summary_max_words = 30;
};

/// Generates the extra robot speech some handling strategies need.
///
/// The public entry points check the request kind and preconditions, then
/// validate whatever the backend returned: output must be non-empty, a single
/// paragraph, and free of control characters. Anything else becomes a
/// Failure so it is never spoken.
class ResponsePlanner {
public:
    virtual ~ResponsePlanner() = default;

    /// Answer to a clarifying question. Never includes the resumed content.
    Outcome<std::string> clarify_answer(const PlannerRequest& req);
    /// Hold phrase followed by a short summary of the remaining content.
    Outcome<std::string> wrap_up(const PlannerRequest& req);
    /// Fresh reply to the interruption after the robot yields.
    Outcome<std::string> new_response(const PlannerRequest& req);

protected:
    virtual Outcome<std::string> do_clarify_answer(const PlannerRequest& req) = 0;
    virtual Outcome<std::string> do_wrap_up(const PlannerRequest& req) = 0;
    virtual Outcome<std::string> do_new_response(const PlannerRequest& req) = 0;
};

/// Checks that planner output is speakable; see ResponsePlanner.
Outcome<std::string> validate_planner_output(std::string text);

/// Deterministic text templates.
class TemplatePlanner final : public ResponsePlanner {
public:
    explicit TemplatePlanner(PlannerConfig cfg = {}) : cfg_(std::move(cfg)) {}

protected:
    Outcome<std::string> do_clarify_answer(const PlannerRequest& req) override;
    Outcome<std::string> do_wrap_up(const PlannerRequest& req) override;
    Outcome<std::string> do_new_response(const PlannerRequest& req) override;

private:
    PlannerConfig cfg_;
};

class ExternalPlanner final : public ResponsePlanner {
public:
    ExternalPlanner(std::shared_ptr<ChatClient> client, PlannerConfig cfg = {})
        : client_(std::move(client)), cfg_(std::move(cfg)) {}

protected:
    Outcome<std::string> do_clarify_answer(const PlannerRequest& req) override;
    Outcome<std::string> do_wrap_up(const PlannerRequest& req) override;
    Outcome<std::string> do_new_response(const PlannerRequest& req) override;

private:
    Outcome<std::string> ask(const std::string& instruction, const PlannerRequest& req);

    std::shared_ptr<ChatClient> client_;
    PlannerConfig cfg_;
};

// Text helpers used by the templates.

/// Text up to and including the first token ending in '.', '!' or '?'; the
/// whole text when there is no sentence terminator.
std::string first_sentence(std::string_view text);
/// Sentences of `text`, split after tokens ending in '.', '!' or '?'.
std::vector<std::string> sentences(std::string_view text);
/// First `max_words` words followed by "..." when the text is longer.
std::string truncate_words(std::string_view text, std::size_t max_words);

}  // namespace bargein
