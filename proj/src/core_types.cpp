#include "bargein/core_types.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

namespace bargein {

std::string_view to_string(IntentLabel label) {
    switch (label) {
        case IntentLabel::Agreement: return "agreement";
        case IntentLabel::Assistance: return "assistance";
        case IntentLabel::Clarification: return "clarification";
        case IntentLabel::Disruptive: return "disruptive";
    }
    return "unknown";
}

std::string_view to_string(HandlingDecision decision) {
    switch (decision) {
        case HandlingDecision::FinishUp: return "finish_up";
        case HandlingDecision::YieldImmediately: return "yield_immediately";
        case HandlingDecision::Continue: return "continue";
        case HandlingDecision::AckAndContinue: return "ack_and_continue";
        case HandlingDecision::ClarifyAndContinue: return "clarify_and_continue";
        case HandlingDecision::AckAndWrapUp: return "ack_and_wrap_up";
    }
    return "unknown";
}

std::optional<IntentLabel> label_from_string(std::string_view name) {
    for (auto l : kAllLabels) {
        if (to_string(l) == name) return l;
    }
    return std::nullopt;
}

std::optional<HandlingDecision> decision_from_string(std::string_view name) {
    for (auto d : kAllDecisions) {
        if (to_string(d) == name) return d;
    }
    return std::nullopt;
}

std::string_view to_string(Speaker speaker) {
    return speaker == Speaker::Robot ? "Robot" : "User";
}

DialogueHistory DialogueHistory::append(Speaker speaker, std::string text, double start_s,
                                        bool complete) const {
    DialogueHistory next = *this;
    next.push(speaker, std::move(text), start_s, complete);
    return next;
}

void DialogueHistory::push(Speaker speaker, std::string text, double start_s, bool complete) {
    if (!entries_.empty() && start_s < entries_.back().start_s) {
        std::ostringstream msg;
        msg << "history entry at " << start_s << " s precedes last entry at "
            << entries_.back().start_s << " s";
        throw OrderingError(msg.str());
    }
    entries_.push_back(HistoryEntry{speaker, std::move(text), start_s, complete});
}

std::string render_history(const DialogueHistory& history, std::size_t max_turns) {
    if (max_turns == 0) throw InvalidInput("max_turns must be at least 1");
    const auto& all = history.entries();
    const std::size_t first = all.size() > max_turns ? all.size() - max_turns : 0;
    std::string out;
    for (std::size_t i = first; i < all.size(); ++i) {
        const auto& e = all[i];
        if (!out.empty()) out += '\n';
        out += to_string(e.speaker);
        out += ": ";
        out += e.text;
        if (e.speaker == Speaker::Robot && !e.complete) {
            out += ' ';
            out += kTruncationMarker;
        }
    }
    return out;
}

std::string_view action_kind(const RobotAction& a) {
    struct Visitor {
        std::string_view operator()(const action::Speak&) const { return "speak"; }
        std::string_view operator()(const action::VerbalAck&) const { return "verbal_ack"; }
        std::string_view operator()(const action::Nod&) const { return "nod"; }
        std::string_view operator()(const action::Yield&) const { return "yield"; }
        std::string_view operator()(const action::AnswerClarification&) const {
            return "answer_clarification";
        }
        std::string_view operator()(const action::WrapUpSummary&) const {
            return "wrap_up_summary";
        }
    };
    return std::visit(Visitor{}, a);
}

std::string action_text(const RobotAction& a) {
    if (auto* s = std::get_if<action::Speak>(&a)) return s->text;
    if (auto* s = std::get_if<action::VerbalAck>(&a)) return s->token;
    if (auto* s = std::get_if<action::AnswerClarification>(&a)) return s->text;
    if (auto* s = std::get_if<action::WrapUpSummary>(&a)) return s->text;
    return {};
}

bool is_speech(const RobotAction& a) {
    return !std::holds_alternative<action::Nod>(a) && !std::holds_alternative<action::Yield>(a);
}

std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.emplace_back(text.substr(start, i - start));
    }
    return words;
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    for (const auto& w : split_words(text)) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

std::size_t count_words(std::string_view text) { return split_words(text).size(); }

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string strip_token(std::string_view token) {
    std::string t = to_lower(token);
    // typographic apostrophe (U+2019) -> ASCII
    for (std::size_t pos; (pos = t.find("\xE2\x80\x99")) != std::string::npos;) {
        t.replace(pos, 3, "'");
    }
    for (const char* quote : {"\xE2\x80\x9C", "\xE2\x80\x9D"}) {
        for (std::size_t pos; (pos = t.find(quote)) != std::string::npos;) t.erase(pos, 3);
    }
    auto is_word_char = [](unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; };
    std::size_t b = 0;
    std::size_t e = t.size();
    while (b < e && !is_word_char(static_cast<unsigned char>(t[b]))) ++b;
    while (e > b && !is_word_char(static_cast<unsigned char>(t[e - 1]))) --e;
    return t.substr(b, e - b);
}

double round_micro(double seconds) { return std::round(seconds * 1e6) / 1e6; }

std::string format_seconds(double seconds) {
    const double rounded = round_micro(seconds);
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), rounded);
    return std::string(buf, res.ptr);
}

}  // namespace bargein
