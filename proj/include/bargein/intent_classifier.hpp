#pragma once

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "bargein/core_types.hpp"
#include "bargein/llm_client.hpp"

namespace bargein {

/// Everything a classifier may look at for one overlap.
struct ClassifierRequest {
    std::string history_rendered;
    std::string overlap_text;
    double elapsed_s = 0.0;  // since the robot's logical turn began
    std::string robot_spoken_text;
    std::string robot_remaining_text;
};

enum class ClassifierSource { RuleBased, External, OracleFixture };

std::string_view to_string(ClassifierSource source);

struct ClassifierResult {
    IntentLabel label = IntentLabel::Disruptive;
    ClassifierSource source = ClassifierSource::RuleBased;
    double latency_s = 0.0;
    std::optional<ChatExchange> exchange;  // external calls only
};

class IntentClassifier {
public:
    virtual ~IntentClassifier() = default;
    virtual ClassifierSource source() const = 0;
    /// Implementations report backend errors as Failure values; latency is
    /// filled in by classify().
    virtual Outcome<ClassifierResult> run(const ClassifierRequest& req) = 0;
};

/// Validates the request, runs the implementation and stamps its latency.
Outcome<ClassifierResult> classify(const ClassifierRequest& req, IntentClassifier& impl);

// ── Rule-based reference ────────────────────────────────────────

/// Deterministic lexical heuristics, checked in order: agreement vocabulary,
/// questions that touch the robot's content, declaratives that extend it,
/// and disruptive for everything else.
IntentLabel rule_based_classify(const ClassifierRequest& req);

/// Lowercased, punctuation-stripped words of length >= 4 that are not
/// stopwords or contractions, with a plural "s" folded away.
std::vector<std::string> content_words(std::string_view text);

class RuleBasedClassifier final : public IntentClassifier {
public:
    ClassifierSource source() const override { return ClassifierSource::RuleBased; }
    Outcome<ClassifierResult> run(const ClassifierRequest& req) override;
};

// ── External language model ─────────────────────────────────────

std::string build_prompt(const ClassifierRequest& req);

/// Returns the single label named in `raw`, or nullopt when no label or
/// more than one distinct label appears.
std::optional<IntentLabel> parse_label(std::string_view raw);

class ExternalClassifier final : public IntentClassifier {
public:
    explicit ExternalClassifier(std::shared_ptr<ChatClient> client) : client_(std::move(client)) {}
    ClassifierSource source() const override { return ClassifierSource::External; }
    Outcome<ClassifierResult> run(const ClassifierRequest& req) override;

private:
    std::shared_ptr<ChatClient> client_;
};

// ── Fixtures ────────────────────────────────────────────────────

/// Replays labels registered per transcript, first in first out. Used by the
/// scenario replayer when a script carries its own intent labels.
class OracleClassifier final : public IntentClassifier {
public:
    void expect(std::string transcript, IntentLabel label);
    ClassifierSource source() const override { return ClassifierSource::OracleFixture; }
    Outcome<ClassifierResult> run(const ClassifierRequest& req) override;

private:
    std::mutex mu_;
    std::map<std::string, std::deque<IntentLabel>> labels_;
};

/// Always fails. Exercises the engine's fallback path.
class FailingClassifier final : public IntentClassifier {
public:
    ClassifierSource source() const override { return ClassifierSource::External; }
    Outcome<ClassifierResult> run(const ClassifierRequest&) override {
        return Failure{"classifier", "classifier unavailable"};
    }
};

}  // namespace bargein
