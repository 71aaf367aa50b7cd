#include "bargein/intent_classifier.hpp"

#include <algorithm>
#include <chrono>
#include <set>

namespace bargein {

namespace {

using WordSet = std::set<std::string, std::less<>>;

const WordSet kAgreementTokens = {
    "yeah", "yes",   "yep",    "yup",     "okay",     "ok",         "right",      "sure",
    "uh-huh", "mm-hmm", "mhm", "uhhum",  "alright",  "ya",         "yea",        "agreed",
    "exactly", "absolutely", "definitely", "true", "cool", "great", "perfect"};

const WordSet kFillers = {"uh", "um", "oh", "ah", "hmm", "mm", "well", "so", "er"};

const WordSet kNegations = {"not", "no", "nope", "nah", "never", "none", "nothing", "cannot"};

const WordSet kContrast = {"but", "however", "instead", "although", "though", "actually",
                           "rather"};

const WordSet kInterrogatives = {"what", "why",   "how",   "do",    "did",   "does",
                                 "is",   "are",   "can",   "could", "would", "which",
                                 "where", "when", "who",   "should", "will",  "shall"};

const std::vector<std::string_view> kApprovalPhrases = {
    "good idea", "great idea",  "nice idea",  "i agree",   "agree with", "sounds good",
    "makes sense", "good point", "fair point", "that's right", "that's true", "go ahead",
    "keep going", "i like that", "love that", "taking your suggestion"};

const WordSet kStopwords = {
    "what",   "when",   "where",  "which",   "while",    "whom",     "whose",  "that",
    "this",   "these",  "those",  "there",   "their",    "theirs",   "they",   "them",
    "then",   "than",   "with",   "without", "from",     "have",     "having", "been",
    "being",  "were",   "will",   "would",   "could",    "should",   "shall",  "might",
    "must",   "about",  "above",  "after",   "again",    "also",     "just",   "very",
    "really", "some",   "more",   "most",    "much",     "many",     "such",   "like",
    "into",   "onto",   "only",   "over",    "your",     "yours",    "ours",   "mine",
    "here",   "well",   "even",   "ever",    "each",     "both",     "other",  "another",
    "think",  "thinking", "thought", "know", "need",     "want",     "going",  "thing",
    "things", "something", "anything", "make", "does",   "doing",    "done",   "maybe",
    "okay",   "yeah",   "sure",   "right",   "please",   "said",     "tell",   "able",
    "because", "still", "upon",    "yourself", "myself",   "ourselves"};

bool is_negation(const std::string& w) {
    return kNegations.count(w) != 0 ||
           (w.size() > 3 && w.compare(w.size() - 3, 3, "n't") == 0);
}

std::vector<std::string> stripped_words(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& w : split_words(text)) {
        auto s = strip_token(w);
        if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
}

struct Features {
    std::vector<std::string> words;
    bool question = false;
    bool negated = false;
    bool contrast = false;
    std::string first_content;  // first non-filler token
};

Features extract(std::string_view transcript) {
    Features f;
    f.words = stripped_words(transcript);
    for (const auto& w : f.words) {
        if (kFillers.count(w) == 0) {
            f.first_content = w;
            break;
        }
    }
    const auto trimmed = normalize_whitespace(transcript);
    f.question = (!trimmed.empty() && trimmed.back() == '?') ||
                 kInterrogatives.count(f.first_content) != 0;
    f.negated = std::any_of(f.words.begin(), f.words.end(), is_negation);
    f.contrast = std::any_of(f.words.begin(), f.words.end(),
                             [](const std::string& w) { return kContrast.count(w) != 0; });
    return f;
}

bool agreement_only(const Features& f) {
    bool any_agreement = false;
    for (const auto& w : f.words) {
        if (kAgreementTokens.count(w) != 0) {
            any_agreement = true;
        } else if (kFillers.count(w) == 0) {
            return false;
        }
    }
    return any_agreement;
}

bool contains_phrase(const std::vector<std::string>& words, std::string_view phrase) {
    std::string joined;
    for (const auto& w : words) {
        joined += ' ';
        joined += w;
    }
    joined += ' ';
    return joined.find(" " + std::string(phrase) + " ") != std::string::npos;
}

bool approving_statement(const Features& f) {
    if (f.question || f.negated || f.contrast) return false;
    if (kAgreementTokens.count(f.first_content) != 0) return true;
    return std::any_of(kApprovalPhrases.begin(), kApprovalPhrases.end(),
                       [&](std::string_view p) { return contains_phrase(f.words, p); });
}

bool shares_content(std::string_view a, std::string_view b) {
    const auto wa = content_words(a);
    const auto wb = content_words(b);
    const std::set<std::string> sb(wb.begin(), wb.end());
    return std::any_of(wa.begin(), wa.end(), [&](const std::string& w) { return sb.count(w); });
}

}  // namespace

std::string_view to_string(ClassifierSource source) {
    switch (source) {
        case ClassifierSource::RuleBased: return "rule_based";
        case ClassifierSource::External: return "external";
        case ClassifierSource::OracleFixture: return "oracle";
    }
    return "unknown";
}

std::vector<std::string> content_words(std::string_view text) {
    std::vector<std::string> out;
    for (auto& w : stripped_words(text)) {
        if (w.size() < 4 || kStopwords.count(w) != 0) continue;
        if (w.find('\'') != std::string::npos) continue;
        if (w.size() > 4 && w.back() == 's' && w[w.size() - 2] != 's') w.pop_back();
        out.push_back(std::move(w));
    }
    return out;
}

IntentLabel rule_based_classify(const ClassifierRequest& req) {
    const Features f = extract(req.overlap_text);
    if (agreement_only(f) || approving_statement(f)) return IntentLabel::Agreement;

    const std::string robot_context = req.robot_spoken_text + ' ' + req.robot_remaining_text;
    const bool related = shares_content(req.overlap_text, robot_context);
    if (f.question) {
        return related ? IntentLabel::Clarification : IntentLabel::Disruptive;
    }
    if (related && !f.negated && !f.contrast) return IntentLabel::Assistance;
    return IntentLabel::Disruptive;
}

Outcome<ClassifierResult> RuleBasedClassifier::run(const ClassifierRequest& req) {
    return ClassifierResult{rule_based_classify(req), ClassifierSource::RuleBased, 0.0, {}};
}

Outcome<ClassifierResult> classify(const ClassifierRequest& req, IntentClassifier& impl) {
    if (normalize_whitespace(req.overlap_text).empty()) {
        throw InvalidInput("classifier request needs a non-empty overlap transcript");
    }
    const auto begin = std::chrono::steady_clock::now();
    auto out = impl.run(req);
    if (out.ok()) {
        out.value().latency_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    }
    return out;
}

// ── Prompting ───────────────────────────────────────────────────

std::string build_prompt(const ClassifierRequest& req) {
    std::string p;
    p += "A user spoke while a robot was still talking. Decide what the user intended.\n\n";
    p += "Labels:\n";
    p += "- agreement: the user signals attention, understanding or concurrence and wants the "
         "robot to keep going. Short acknowledgements such as \"yeah\" belong here.\n";
    p += "- assistance: the user supplies a word or idea the robot seems to be reaching for, "
         "helping it finish its point.\n";
    p += "- clarification: the user asks the robot to explain or expand on something it has "
         "said or is saying.\n";
    p += "- disruptive: the user wants the floor, for example to disagree, raise a different "
         "topic, push their own idea, or cut the robot short.\n\n";

    p += "Conversation so far:\n";
    p += req.history_rendered.empty() ? std::string("(no earlier turns)") : req.history_rendered;
    p += "\n\n";

    p += "Robot utterance in progress:\n";
    p += "  already spoken: \"" + req.robot_spoken_text + "\"\n";
    p += "  not yet spoken: \"" + req.robot_remaining_text + "\"\n\n";

    p += "Seconds since the robot started this turn: " + format_seconds(req.elapsed_s) + "\n\n";
    p += "User said: \"" + req.overlap_text + "\"\n\n";
    p += "Answer with exactly one word: agreement, assistance, clarification, or disruptive.";
    return p;
}

std::optional<IntentLabel> parse_label(std::string_view raw) {
    std::optional<IntentLabel> found;
    for (const auto& w : stripped_words(raw)) {
        const auto label = label_from_string(w);
        if (!label) continue;
        if (found && *found != *label) return std::nullopt;
        found = label;
    }
    return found;
}

Outcome<ClassifierResult> ExternalClassifier::run(const ClassifierRequest& req) {
    static const std::string kSystem =
        "You label interruptions in spoken conversations with a robot. Reply with one label.";
    auto reply = client_->complete(kSystem, build_prompt(req));
    if (!reply) return Failure{"classifier", reply.failure().message};
    const auto label = parse_label(reply.value());
    if (!label) return Failure{"classifier", "unrecognized label output: " + reply.value()};
    return ClassifierResult{*label, ClassifierSource::External, 0.0, client_->last_exchange()};
}

// ── Fixtures ────────────────────────────────────────────────────

void OracleClassifier::expect(std::string transcript, IntentLabel label) {
    std::lock_guard lock(mu_);
    labels_[normalize_whitespace(transcript)].push_back(label);
}

Outcome<ClassifierResult> OracleClassifier::run(const ClassifierRequest& req) {
    std::lock_guard lock(mu_);
    auto it = labels_.find(normalize_whitespace(req.overlap_text));
    if (it == labels_.end() || it->second.empty()) {
        return Failure{"classifier", "no oracle label for \"" + req.overlap_text + "\""};
    }
    const IntentLabel label = it->second.front();
    it->second.pop_front();
    return ClassifierResult{label, ClassifierSource::OracleFixture, 0.0, {}};
}

}  // namespace bargein
