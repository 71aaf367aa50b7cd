#include <doctest.h>

#include <filesystem>

#include "bargein/scenario.hpp"
#include "engine_helpers.hpp"

using namespace bargein;

namespace {

const std::string kTurn =
    R"({ "type": "robot_turn", "text": "We have a flashlight and a map on our list. Next, I suggest a parachute, because it can be used as a shelter and for signaling. What do you think?" })";

std::string doc(const std::string& steps, const std::string& expect = "[]",
                const std::string& config = R"({ "classifier": "oracle" })") {
    return "{\n  \"id\": \"t\",\n  \"config\": " + config + ",\n  \"script\": [\n" + steps +
           "\n  ],\n  \"expect\": " + expect + "\n}\n";
}

std::size_t error_line(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const ScenarioError& e) {
        return e.line();
    }
    return 0;
}

std::string error_text(const std::string& text) {
    try {
        parse_scenario(text);
    } catch (const InvalidInput& e) {
        return e.what();
    }
    return "";
}

std::string scenario_dir() { return BARGEIN_SCENARIO_DIR; }

}  // namespace

TEST_CASE("minimal scenario") {
    const auto s = parse_scenario(R"({"id": "m", "script": [{"type": "robot_turn", "text": "Hello."}]})");
    CHECK(s.id == "m");
    CHECK(s.script.size() == 1);
    CHECK(std::holds_alternative<step::RobotTurn>(s.script[0]));
    CHECK(s.expectations.empty());
}

TEST_CASE("config overrides apply on top of the base") {
    SessionConfig base;
    base.rate.rate_wpm = 90;
    base.history_window = 4;
    const auto s = parse_scenario(doc(kTurn, "[]", R"({ "classifier": "oracle", "rate_wpm": 120 })"),
                                  "x", base);
    CHECK(s.config.rate.rate_wpm == 120);
    CHECK(s.config.history_window == 4);
    CHECK(s.config.classifier == ClassifierChoice::Oracle);
}

TEST_CASE("loader errors carry the offending line") {
    const auto negative = doc(kTurn + ",\n    { \"type\": \"user_event\", \"at_s\": -1, \"text\": \"hi\", \"oracle_intent\": \"agreement\" }");
    CHECK(error_line(negative) == 6);
    CHECK(error_text(negative).find("at_s") != std::string::npos);

    const auto sarcastic = doc(kTurn + ",\n    { \"type\": \"user_event\", \"at_s\": 1,\n      \"text\": \"hi\",\n      \"oracle_intent\": \"sarcastic\" }");
    CHECK(error_line(sarcastic) == 8);
    CHECK(error_text(sarcastic).find("oracle_intent") != std::string::npos);
    CHECK(error_text(sarcastic).find("sarcastic") != std::string::npos);

    const auto missing = doc(kTurn + ",\n    { \"type\": \"user_event\", \"text\": \"hi\" }");
    CHECK(error_line(missing) == 6);
    CHECK(error_text(missing).find("at_s") != std::string::npos);

    CHECK(error_text(doc("    { \"type\": \"dance\" }")).find("type") != std::string::npos);
    const std::string event = kTurn + ",\n    { \"type\": \"user_event\", \"at_s\": 1, \"text\": \"hi\", \"oracle_intent\": \"agreement\" }";
    CHECK(error_text(doc(event, "[ { \"step\": 1, \"decision\": \"shrug\" } ]")).find("/expect/0/decision") !=
          std::string::npos);
    CHECK(error_text(doc(event, "[ { \"step\": 0 } ]")).find("user steps") != std::string::npos);
    CHECK(error_text(doc(event, "[ { \"step\": 7 } ]")).find("outside the script") != std::string::npos);
    CHECK(error_text(doc(kTurn, "[]", R"({ "rate_wpm": -3 })")).find("rate_wpm") != std::string::npos);
    CHECK(error_text(doc(kTurn, "[]", R"({ "colour": 1 })")).find("colour") != std::string::npos);
    CHECK_THROWS_AS(parse_scenario("{ \"id\": "), InvalidInput);
}

TEST_CASE("oracle scenarios need a label on every event") {
    const auto s = doc(kTurn + ",\n    { \"type\": \"user_event\", \"at_s\": 1, \"text\": \"hi\" }");
    CHECK(error_line(s) == 6);
}

TEST_CASE("event before any robot turn is rejected") {
    CHECK_THROWS_AS(parse_scenario(doc("    { \"type\": \"user_event\", \"at_s\": 1, \"text\": \"hi\", \"oracle_intent\": \"agreement\" }")),
                    ScenarioError);
}

TEST_CASE("parse_located maps pointers to lines") {
    const auto j = parse_located("{\n  \"a\": [\n    1,\n    {\"b\": 2}\n  ]\n}");
    CHECK(j.line_of("/a/0") == 3);
    CHECK(j.line_of("/a/1/b") == 4);
    CHECK(j.line_of("/a") == 2);
}

TEST_CASE("replay and check a passing scenario") {
    const auto s = parse_scenario(doc(kTurn + ",\n    { \"type\": \"user_event\", \"at_s\": 4.4, \"text\": \"Okay\", \"oracle_intent\": \"agreement\" }",
                                      R"([{ "step": 1, "gate": "needs_classification", "intent": "agreement", "decision": "continue", "resume_index": 11, "actions": ["speak"] }])"));
    const auto trace = run_scenario(s);
    const auto r = check_expectations(trace, s);
    CHECK(r.passed());
    CHECK(r.decisions_total == 1);
    CHECK(r.decisions_matched == 1);
    CHECK(format_report(r).find("t") != std::string::npos);
    CHECK(trace.to_ndjson() == run_scenario(s).to_ndjson());
}

TEST_CASE("a mismatch names the step and both decisions") {
    const auto s = parse_scenario(doc(kTurn + ",\n    { \"type\": \"user_event\", \"at_s\": 4.4, \"text\": \"Okay\", \"oracle_intent\": \"agreement\" }",
                                      R"([{ "step": 1, "decision": "yield_immediately" }])"));
    const auto r = check_expectations(run_scenario(s), s);
    CHECK_FALSE(r.passed());
    CHECK(r.decisions_matched == 0);
    const auto text = format_report(r);
    CHECK(text.find("step 1") != std::string::npos);
    CHECK(text.find("yield_immediately") != std::string::npos);
    CHECK(text.find("continue") != std::string::npos);
}

TEST_CASE("replay errors end the trace instead of throwing") {
    // The second event lies before the first.
    const auto s = parse_scenario(doc(kTurn + ",\n    { \"type\": \"user_event\", \"at_s\": 4, \"text\": \"hm\", \"oracle_intent\": \"agreement\" },\n    { \"type\": \"user_event\", \"at_s\": 2, \"text\": \"hm\", \"oracle_intent\": \"agreement\" }",
                                      R"([{ "step": 1, "decision": "continue" }])"));
    SessionTrace trace;
    CHECK_NOTHROW(trace = run_scenario(s));
    REQUIRE(trace.size() > 0);
    CHECK(trace.entries().back().kind == "failure");
    CHECK(trace.entries().back().payload.at("fatal") == true);
    const auto r = check_expectations(trace, s);
    CHECK(r.fatal);
    CHECK_FALSE(r.passed());
}

TEST_CASE("scenario files in the repository pass and replay identically") {
    namespace fs = std::filesystem;
    std::size_t n = 0;
    for (const auto& e : fs::recursive_directory_iterator(scenario_dir())) {
        if (e.path().extension() != ".json") continue;
        ++n;
        const auto s = load_scenario(e.path().string());
        const auto a = run_scenario(s);
        const auto r = check_expectations(a, s);
        CAPTURE(e.path().string());
        CAPTURE(format_report(r));
        CHECK(r.passed());
        CHECK(a.to_ndjson() == run_scenario(s).to_ndjson());
    }
    CHECK(n >= 17);
}

TEST_CASE("load_scenario reports a missing file") {
    CHECK_THROWS_AS(load_scenario("/nonexistent/x.json"), InvalidInput);
}
