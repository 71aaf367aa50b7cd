#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bargein/config.hpp"
#include "bargein/core_types.hpp"
#include "bargein/trace.hpp"

namespace bargein {

// ── Scenario documents ──────────────────────────────────────────

namespace step {
struct RobotTurn {
    std::string text;
};
/// User speech at `at_s` seconds after the enclosing robot turn started.
struct UserEvent {
    double at_s = 0.0;
    std::string text;
    std::optional<IntentLabel> oracle_intent;
    bool is_final = true;
};
/// User speech once the robot has finished and nothing is pending.
struct UserTurn {
    std::string text;
};
}  // namespace step

using ScenarioStep = std::variant<step::RobotTurn, step::UserEvent, step::UserTurn>;

/// Golden expectations for one user step. Unset fields are not checked.
struct Expectation {
    std::size_t step = 0;
    std::optional<std::string> gate;  // gate outcome name, or "ignored"
    std::optional<IntentLabel> intent;
    std::optional<HandlingDecision> decision;
    std::optional<std::size_t> resume_index;
    std::optional<std::vector<std::string>> actions;  // action kinds in order
    std::optional<std::string> action_text_prefix;    // first spoken action
    std::optional<bool> fallback;
    std::size_t line = 0;  // source line, for reports
};

struct Scenario {
    std::string id;
    std::string description;
    std::string source;  // file path or label used in error messages
    SessionConfig config;
    std::vector<ScenarioStep> script;
    std::vector<Expectation> expectations;
};

/// Schema violation with the source line of the offending value.
class ScenarioError : public InvalidInput {
public:
    ScenarioError(const std::string& source, std::size_t line, const std::string& message)
        : InvalidInput(source + ":" + std::to_string(line) + ": " + message), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Parses and validates a scenario document. The document's "config" object
/// is applied on top of `base`. Throws ScenarioError.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>",
                        const SessionConfig& base = {});
Scenario load_scenario(const std::string& path, const SessionConfig& base = {});

/// JSON document parsed with the source line of every value, keyed by JSON
/// pointer ("" for the root, "/script/2/at_s" for a nested field).
struct LocatedJson {
    nlohmann::json value;
    std::map<std::string, std::size_t> lines;

    std::size_t line_of(const std::string& pointer) const;
};

/// Throws InvalidInput carrying the parser's line/column on syntax errors.
LocatedJson parse_located(const std::string& text);

// ── Replay ──────────────────────────────────────────────────────

/// Drives a fresh engine on the virtual clock through the scenario script.
/// The harness adds "scenario.step" markers so expectations can be matched
/// to overlaps. Engine contract violations end the trace with a fatal
/// failure entry instead of throwing.
SessionTrace run_scenario(const Scenario& s);

// ── Expectation checking ────────────────────────────────────────

struct ExpectationResult {
    std::size_t step = 0;
    std::size_t line = 0;
    std::string field;
    std::string expected;
    std::string actual;
    bool pass = false;
};

struct Report {
    std::string scenario_id;
    std::vector<ExpectationResult> results;
    std::size_t decisions_matched = 0;
    std::size_t decisions_total = 0;
    bool fatal = false;  // the trace ended in a fatal failure

    std::size_t passed_count() const;
    bool passed() const { return !fatal && passed_count() == results.size(); }
};

Report check_expectations(const SessionTrace& trace, const Scenario& s);

/// Human-readable report: one line per failed expectation plus a summary.
std::string format_report(const Report& r);

/// What happened to one user step's overlap, reconstructed from a trace.
struct OverlapSummary {
    std::optional<std::uint64_t> overlap_id;
    std::optional<std::string> gate;
    std::optional<std::string> intent;
    std::optional<std::string> decision;
    bool fallback = false;
    bool degraded = false;
    std::optional<std::size_t> resume_index;
    std::vector<std::string> actions;
    std::optional<std::string> first_spoken_action;
};

std::map<std::size_t, OverlapSummary> summarize_steps(const SessionTrace& trace);

}  // namespace bargein
