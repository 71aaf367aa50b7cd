#include "bargein/response_planner.hpp"

#include <algorithm>
#include <set>

#include "bargein/intent_classifier.hpp"

namespace bargein {

namespace {

bool is_terminator(const std::string& word) {
    return !word.empty() && (word.back() == '.' || word.back() == '!' || word.back() == '?');
}

std::string last_word(const std::string& text) {
    const auto words = split_words(text);
    return words.empty() ? std::string{} : words.back();
}

/// Robot lines of a rendered history, most recent first, without the
/// "Robot: " prefix. A cut-off line loses its unfinished last sentence.
std::vector<std::string> robot_lines(std::string_view rendered) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= rendered.size()) {
        auto nl = rendered.find('\n', pos);
        if (nl == std::string_view::npos) nl = rendered.size();
        auto line = rendered.substr(pos, nl - pos);
        constexpr std::string_view prefix = "Robot: ";
        if (line.substr(0, prefix.size()) == prefix) {
            line.remove_prefix(prefix.size());
            const std::string marker = " " + std::string(kTruncationMarker);
            if (line.size() >= marker.size() &&
                line.substr(line.size() - marker.size()) == marker) {
                line.remove_suffix(marker.size());
                auto parts = sentences(line);
                if (!parts.empty() && !is_terminator(last_word(parts.back()))) parts.pop_back();
                std::string kept;
                for (const auto& p : parts) kept += (kept.empty() ? "" : " ") + p;
                out.push_back(std::move(kept));
            } else {
                out.emplace_back(line);
            }
        }
        pos = nl + 1;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

bool shares_content_word(std::string_view a, std::string_view b) {
    const auto wa = content_words(a);
    const auto wb = content_words(b);
    const std::set<std::string> sb(wb.begin(), wb.end());
    return std::any_of(wa.begin(), wa.end(), [&](const std::string& w) { return sb.count(w); });
}

void require_kind(const PlannerRequest& req, PlannerKind kind) {
    if (req.kind != kind) {
        throw ContractViolation("planner request kind " + std::string(to_string(req.kind)) +
                                " used for " + std::string(to_string(kind)));
    }
}

}  // namespace

std::string_view to_string(PlannerKind kind) {
    switch (kind) {
        case PlannerKind::ClarifyAnswer: return "clarify_answer";
        case PlannerKind::WrapUp: return "wrap_up";
        case PlannerKind::NewResponse: return "new_response";
    }
    return "unknown";
}

std::vector<std::string> sentences(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    for (const auto& w : split_words(text)) {
        if (!current.empty()) current += ' ';
        current += w;
        if (is_terminator(w)) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::string first_sentence(std::string_view text) {
    auto all = sentences(text);
    return all.empty() ? std::string{} : all.front();
}

std::string truncate_words(std::string_view text, std::size_t max_words) {
    auto words = split_words(text);
    if (words.size() <= max_words) return normalize_whitespace(text);
    std::string out;
    for (std::size_t i = 0; i < max_words; ++i) {
        if (!out.empty()) out += ' ';
        out += words[i];
    }
    return out + "...";
}

Outcome<std::string> validate_planner_output(std::string text) {
    for (unsigned char c : text) {
        if (c == '\n' || c == '\r') return Failure{"planner", "output spans several paragraphs"};
        if (c < 0x20 || c == 0x7f) return Failure{"planner", "output contains control characters"};
    }
    auto normalized = normalize_whitespace(text);
    if (normalized.empty()) return Failure{"planner", "empty output"};
    return normalized;
}

Outcome<std::string> ResponsePlanner::clarify_answer(const PlannerRequest& req) {
    require_kind(req, PlannerKind::ClarifyAnswer);
    if (normalize_whitespace(req.trigger_text).empty()) {
        throw ContractViolation("clarify_answer needs the clarifying question");
    }
    auto out = do_clarify_answer(req);
    return out ? validate_planner_output(std::move(out.value())) : out;
}

Outcome<std::string> ResponsePlanner::wrap_up(const PlannerRequest& req) {
    require_kind(req, PlannerKind::WrapUp);
    auto out = do_wrap_up(req);
    return out ? validate_planner_output(std::move(out.value())) : out;
}

Outcome<std::string> ResponsePlanner::new_response(const PlannerRequest& req) {
    require_kind(req, PlannerKind::NewResponse);
    if (normalize_whitespace(req.trigger_text).empty()) {
        throw ContractViolation("new_response needs the interruption text");
    }
    auto out = do_new_response(req);
    return out ? validate_planner_output(std::move(out.value())) : out;
}

// ── Templates ───────────────────────────────────────────────────

Outcome<std::string> TemplatePlanner::do_clarify_answer(const PlannerRequest& req) {
    for (const auto& s : sentences(req.current_text)) {
        if (shares_content_word(req.trigger_text, s)) return s;
    }
    const auto lines = robot_lines(req.history_rendered);
    for (const auto& line : lines) {
        for (const auto& s : sentences(line)) {
            if (shares_content_word(req.trigger_text, s)) return s;
        }
    }
    for (const auto& s : sentences(req.remaining_text)) {
        if (shares_content_word(req.trigger_text, s)) return s;
    }

    std::string context;
    if (!lines.empty() && !lines.front().empty()) {
        auto last = sentences(lines.front());
        if (!last.empty()) context = last.back();
    }
    if (context.empty()) context = first_sentence(req.remaining_text);
    std::string answer = "Good question \xE2\x80\x94 here is the context:";
    if (!context.empty()) answer += " " + context;
    return answer;
}

Outcome<std::string> TemplatePlanner::do_wrap_up(const PlannerRequest& req) {
    const auto summary = truncate_words(first_sentence(req.remaining_text), cfg_.summary_max_words);
    if (summary.empty()) return cfg_.hold_phrase;
    return cfg_.hold_phrase + " " + summary;
}

Outcome<std::string> TemplatePlanner::do_new_response(const PlannerRequest& req) {
    auto trigger = normalize_whitespace(req.trigger_text);
    if (!is_terminator(trigger)) trigger += '.';
    return "Okay. You said: " + trigger + " Tell me more.";
}

// ── External ────────────────────────────────────────────────────

Outcome<std::string> ExternalPlanner::ask(const std::string& instruction,
                                          const PlannerRequest& req) {
    static const std::string kSystem =
        "You are a conversational robot speaking aloud. Reply with plain spoken text only, "
        "one short paragraph, no lists or markup.";
    std::string prompt = "Conversation so far:\n";
    prompt += req.history_rendered.empty() ? "(no earlier turns)" : req.history_rendered;
    prompt += "\n\n";
    if (!req.current_text.empty()) {
        prompt += "The utterance you were in the middle of: \"" + req.current_text + "\"\n";
    }
    prompt += "What you still planned to say: \"" + req.remaining_text + "\"\n";
    prompt += "What the user just said: \"" + req.trigger_text + "\"\n\n";
    prompt += instruction;
    auto reply = client_->complete(kSystem, prompt);
    if (!reply) return Failure{"planner", reply.failure().message};
    return reply;
}

Outcome<std::string> ExternalPlanner::do_clarify_answer(const PlannerRequest& req) {
    return ask("Answer the user's question briefly. Do not repeat the rest of what you planned "
               "to say; you will continue with it afterwards.",
               req);
}

Outcome<std::string> ExternalPlanner::do_wrap_up(const PlannerRequest& req) {
    return ask("Begin with \"" + cfg_.hold_phrase +
                   "\", then summarize what you still planned to say in one or two sentences. "
                   "You will give the user the floor right after.",
               req);
}

Outcome<std::string> ExternalPlanner::do_new_response(const PlannerRequest& req) {
    return ask("Stop your previous point and reply directly to what the user just said.", req);
}

}  // namespace bargein
