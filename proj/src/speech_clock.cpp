#include "bargein/speech_clock.hpp"

#include <algorithm>

namespace bargein {

namespace {
// Absorbs rounding in i * duration so a word ending exactly at `elapsed`
// counts as spoken.
constexpr double kTimeEpsilon = 1e-9;

std::string join_range(const PlannedUtterance& plan, std::size_t from, std::size_t to) {
    std::string out;
    for (std::size_t i = from; i < to; ++i) {
        if (!out.empty()) out += ' ';
        out += plan.tokens[i].text;
    }
    return out;
}
}  // namespace

void SpeakingRateConfig::validate() const {
    if (!(rate_wpm > 0.0)) throw InvalidInput("rate_wpm must be positive");
    if (!(floor_s > 0.0)) throw InvalidInput("floor_s must be positive");
}

bool ends_clause(std::string_view token) {
    return !token.empty() && kClausePunctuation.find(token.back()) != std::string_view::npos;
}

PlannedUtterance plan_utterance(std::string_view text, const SpeakingRateConfig& cfg) {
    cfg.validate();
    auto words = split_words(text);
    if (words.empty()) throw InvalidInput("cannot plan an empty utterance");

    const double word_s = std::max(60.0 / cfg.rate_wpm, cfg.floor_s);
    PlannedUtterance plan;
    plan.rate_wpm = cfg.rate_wpm;
    plan.tokens.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) {
        WordToken tok;
        tok.ends_clause = ends_clause(words[i]);
        tok.text = std::move(words[i]);
        tok.index = i;
        tok.start_s = static_cast<double>(i) * word_s;
        tok.duration_s = word_s;
        plan.tokens.push_back(std::move(tok));
    }
    plan.total_duration_s = static_cast<double>(plan.tokens.size()) * word_s;
    plan.full_text = join_range(plan, 0, plan.tokens.size());
    return plan;
}

std::size_t estimated_spoken_index(const PlannedUtterance& plan, double elapsed_s) {
    // Ends are increasing, so this is the first token still being spoken.
    auto it = std::partition_point(plan.tokens.begin(), plan.tokens.end(),
                                   [&](const WordToken& t) {
                                       return t.end_s() <= elapsed_s + kTimeEpsilon;
                                   });
    return static_cast<std::size_t>(it - plan.tokens.begin());
}

double remaining_duration(const PlannedUtterance& plan, double elapsed_s) {
    return std::max(0.0, plan.total_duration_s - elapsed_s);
}

std::size_t resume_point(const PlannedUtterance& plan, double elapsed_s) {
    const std::size_t spoken = estimated_spoken_index(plan, elapsed_s);
    for (std::size_t i = spoken; i > 0; --i) {
        if (plan.tokens[i - 1].ends_clause) return i;
    }
    return 0;
}

std::string remaining_text(const PlannedUtterance& plan, std::size_t from_index) {
    if (from_index > plan.size()) throw InvalidInput("resume index past end of utterance");
    return join_range(plan, from_index, plan.size());
}

std::string spoken_text(const PlannedUtterance& plan, std::size_t to_index) {
    return join_range(plan, 0, std::min(to_index, plan.size()));
}

}  // namespace bargein
