#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

#include "bargein/core_types.hpp"
#include "bargein/intent_classifier.hpp"
#include "bargein/llm_client.hpp"
#include "bargein/overlap_gate.hpp"
#include "bargein/response_planner.hpp"
#include "bargein/speech_clock.hpp"
#include "bargein/strategy_dispatcher.hpp"

namespace bargein {

enum class ClassifierChoice { RuleBased, External, Oracle, Failing };
enum class PlannerChoice { Template, External };
enum class ClockMode { Virtual, Wall };

std::string_view to_string(ClassifierChoice c);
std::string_view to_string(PlannerChoice c);
std::string_view to_string(ClockMode c);

struct SessionConfig {
    SpeakingRateConfig rate;
    WakewordConfig wakewords;
    DispatchConfig dispatch;
    PlannerConfig planner;
    ClassifierChoice classifier = ClassifierChoice::RuleBased;
    PlannerChoice planner_choice = PlannerChoice::Template;
    ClockMode clock = ClockMode::Virtual;
    std::size_t history_window = 10;
    double classifier_timeout_s = 2.0;
    /// Simulated classifier delay on the virtual clock. Ignored on the wall
    /// clock, where the real call time applies.
    double classifier_latency_s = 0.0;
    /// Generate a robot reply to ordinary (non-overlapping) user turns.
    bool auto_respond = false;
    /// Copy raw external-model request/response bodies into the trace.
    bool log_exchanges = false;
    LlmConfig llm;

    void validate() const;
};

/// Schema violation located by JSON pointer ("/config/rate_wpm").
class SchemaError : public InvalidInput {
public:
    SchemaError(std::string pointer, const std::string& message)
        : InvalidInput(pointer + ": " + message), pointer_(std::move(pointer)) {}
    const std::string& pointer() const { return pointer_; }

private:
    std::string pointer_;
};

/// Applies the keys present in `j` on top of `cfg`. Unknown keys and wrong
/// types raise SchemaError rooted at `pointer`.
void apply_config_json(SessionConfig& cfg, const nlohmann::json& j,
                       const std::string& pointer = "");

nlohmann::json config_to_json(const SessionConfig& cfg);

/// Reads a config file (JSON object), then environment overrides for the
/// external model credentials.
SessionConfig load_config_file(const std::string& path);

std::shared_ptr<IntentClassifier> make_classifier(const SessionConfig& cfg);
std::shared_ptr<ResponsePlanner> make_planner(const SessionConfig& cfg);

}  // namespace bargein
