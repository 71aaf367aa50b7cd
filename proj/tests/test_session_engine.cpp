#include <doctest.h>

#include <random>

#include "bargein/session_engine.hpp"
#include "bargein/speech_clock.hpp"
#include "engine_helpers.hpp"

using namespace bargein;
using namespace testing_util;

namespace {

const char* kText =
    "We have a flashlight and a map on our list. Next, I suggest a parachute, because it can be "
    "used as a shelter and for signaling. What do you think?";

SessionEngine make_engine(SessionConfig cfg = quick_config()) {
    return SessionEngine(std::move(cfg), std::make_shared<TemplatePlanner>());
}

ClassifierResult label(IntentLabel l) { return ClassifierResult{l, ClassifierSource::OracleFixture, 0.0, {}}; }

std::string decision_of(const SessionTrace& t, std::uint64_t overlap_id) {
    for (const auto& e : of_kind(t, "engine.decision")) {
        if (e.payload.at("overlap_id") == overlap_id) return e.payload.at("decision");
    }
    return "";
}

}  // namespace

TEST_CASE("start_robot_turn from idle") {
    auto e = make_engine();
    CHECK(e.state() == SessionState::Idle);
    e.start_robot_turn(0.0, "Hello.");
    CHECK(e.state() == SessionState::RobotSpeaking);
    CHECK(of_kind(e.trace(), "robot.plan").size() == 1);
    CHECK(of_kind(e.trace(), "robot.word").size() == 1);
    e.tick(0.4);
    CHECK(e.state() == SessionState::AwaitingUser);
    REQUIRE(e.history().size() == 1);
    CHECK(e.history().entries()[0] == HistoryEntry{Speaker::Robot, "Hello.", 0.0, true});
}

TEST_CASE("a 20-word turn emits 20 words over 8 s of virtual time") {
    auto e = make_engine();
    std::string text;
    for (int i = 0; i < 20; ++i) text += "w" + std::to_string(i) + " ";
    e.start_robot_turn(0.0, text);
    e.tick(100.0);  // one jump
    const auto words = of_kind(e.trace(), "robot.word");
    REQUIRE(words.size() == 20);
    for (std::size_t i = 0; i < words.size(); ++i) {
        CHECK(words[i].payload.at("index") == i);
        CHECK(words[i].t == doctest::Approx(0.4 * static_cast<double>(i)));
    }
    const auto done = of_kind(e.trace(), "robot.done");
    REQUIRE(done.size() == 1);
    CHECK(done[0].t == doctest::Approx(8.0));
}

TEST_CASE("start_robot_turn errors") {
    auto e = make_engine();
    CHECK_THROWS_AS(e.start_robot_turn(0.0, "  "), InvalidInput);
    e.start_robot_turn(0.0, kText);
    CHECK_THROWS_AS(e.start_robot_turn(1.0, "again"), ContractViolation);
    CHECK_THROWS_AS(e.tick(0.5), ContractViolation);
}

TEST_CASE("backchannel continues without interrupting") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    const auto ticket = e.on_user_speech(4.4, {"Okay"});
    REQUIRE(ticket.has_value());
    CHECK(e.state() == SessionState::AwaitingClassification);
    CHECK(ticket->request.overlap_text == "Okay");
    CHECK(ticket->request.elapsed_s == doctest::Approx(4.4));
    e.on_classifier_result(4.4, ticket->overlap_id, classify(ticket->request, *std::make_shared<RuleBasedClassifier>()));
    CHECK(decision_of(e.trace(), ticket->overlap_id) == "continue");
    CHECK(action_types(e.trace()) == std::vector<std::string>{"speak"});
    const auto resume = of_kind(e.trace(), "engine.resume");
    REQUIRE(resume.size() == 1);
    CHECK(resume[0].payload.at("resume_index") == 11);
    e.tick(60.0);
    CHECK(e.state() == SessionState::AwaitingUser);
}

TEST_CASE("disruptive overlap 3 s in wraps up then yields") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    const auto t = e.on_user_speech(3.0, {"That is wrong"});
    REQUIRE(t);
    e.on_classifier_result(3.0, t->overlap_id, label(IntentLabel::Disruptive));
    CHECK(decision_of(e.trace(), t->overlap_id) == "ack_and_wrap_up");
    CHECK(action_types(e.trace()) == std::vector<std::string>{"wrap_up_summary"});
    CHECK(e.state() == SessionState::ExecutingActions);
    e.tick(60.0);
    CHECK(action_types(e.trace()) == std::vector<std::string>{"wrap_up_summary", "yield"});
    CHECK(e.state() == SessionState::AwaitingUser);
    const auto& first = e.history().entries()[0];
    CHECK(first.speaker == Speaker::Robot);
    CHECK_FALSE(first.complete);
    CHECK(first.text.size() < std::string(kText).size());
    CHECK(std::string(kText).rfind(first.text, 0) == 0);
}

TEST_CASE("ordinary user turn while awaiting user") {
    auto e = make_engine();
    e.start_robot_turn(0.0, "Hi.");
    e.tick(1.0);
    CHECK_FALSE(e.on_user_speech(2.0, {"hello there"}).has_value());
    const auto speech = of_kind(e.trace(), "user.speech");
    REQUIRE(speech.size() == 1);
    CHECK(speech[0].payload.at("overlap") == false);
    CHECK(of_kind(e.trace(), "engine.gate").empty());
    CHECK(e.history().entries().back().text == "hello there");
    CHECK(e.state() == SessionState::AwaitingUser);

    auto cfg = quick_config();
    cfg.auto_respond = true;
    auto r = make_engine(cfg);
    r.on_user_speech(0.0, {"Is the map useful?"});
    CHECK(r.state() == SessionState::RobotSpeaking);
    CHECK(of_kind(r.trace(), "engine.gate").empty());
}

TEST_CASE("words keep coming while classification is pending") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    const auto t = e.on_user_speech(2.0, {"is the parachute heavy?"});
    REQUIRE(t);
    const auto before = of_kind(e.trace(), "robot.word").size();
    e.tick(5.0);
    CHECK(e.state() == SessionState::AwaitingClassification);
    CHECK(of_kind(e.trace(), "robot.word").size() > before);
    CHECK(e.next_due().has_value());
}

TEST_CASE("results after the utterance ended are degraded") {
    SUBCASE("agreement becomes a no-op") {
        auto e = make_engine();
        e.start_robot_turn(0.0, kText);
        const auto t = e.on_user_speech(9.0, {"yeah that sounds right"});
        REQUIRE(t);
        e.tick(13.0);
        e.on_classifier_result(13.0, t->overlap_id, label(IntentLabel::Agreement));
        const auto d = of_kind(e.trace(), "engine.decision");
        REQUIRE(d.size() == 1);
        CHECK(d[0].payload.at("degraded") == true);
        CHECK(action_types(e.trace()).empty());
        CHECK(e.quiescent());
    }
    SUBCASE("clarification is answered as a fresh turn") {
        auto e = make_engine();
        e.start_robot_turn(0.0, kText);
        const auto t = e.on_user_speech(9.0, {"What is the parachute for?"});
        e.tick(13.0);
        e.on_classifier_result(13.0, t->overlap_id, label(IntentLabel::Clarification));
        CHECK(action_types(e.trace()) == std::vector<std::string>{"answer_clarification"});
    }
    SUBCASE("disruptive gets a new response") {
        auto e = make_engine();
        e.start_robot_turn(0.0, kText);
        const auto t = e.on_user_speech(9.0, {"I want the pistol"});
        e.tick(13.0);
        e.on_classifier_result(13.0, t->overlap_id, label(IntentLabel::Disruptive));
        CHECK(action_types(e.trace()) == std::vector<std::string>{"speak"});
        CHECK(of_kind(e.trace(), "robot.action")[0].payload["action"]["text"].get<std::string>().find(
                  "pistol") != std::string::npos);
    }
}

TEST_CASE("classifier failure falls back to yield and a new response") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    const auto t = e.on_user_speech(6.0, {"hmm the thing"});
    REQUIRE(t);
    e.on_classifier_result(6.0, t->overlap_id, Failure{"classifier", "down"});
    const auto d = of_kind(e.trace(), "engine.decision");
    REQUIRE(d.size() == 1);
    CHECK(d[0].payload.at("decision") == "yield_immediately");
    CHECK(d[0].payload.at("fallback") == true);
    CHECK(of_kind(e.trace(), "failure").size() == 1);
    CHECK(action_types(e.trace()) == std::vector<std::string>{"yield", "speak"});
}

TEST_CASE("non-final and empty transcripts") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    CHECK_FALSE(e.on_user_speech(1.0, {"wait I", false}).has_value());
    CHECK_FALSE(e.on_user_speech(1.0, {"   "}).has_value());
    CHECK(e.state() == SessionState::RobotSpeaking);
    CHECK(of_kind(e.trace(), "user.partial").size() == 1);
    CHECK(of_kind(e.trace(), "user.ignored").size() == 1);
    CHECK(of_kind(e.trace(), "engine.gate").empty());
}

TEST_CASE("gate early exits in the engine") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    CHECK_FALSE(e.on_user_speech(10.5, {"hmm wait"}).has_value());
    CHECK(decision_of(e.trace(), 1) == "finish_up");
    CHECK(action_types(e.trace()).empty());
    CHECK(e.state() == SessionState::RobotSpeaking);

    auto w = make_engine();
    w.start_robot_turn(0.0, kText);
    CHECK_FALSE(w.on_user_speech(6.0, {"Luna, wait."}).has_value());
    CHECK(decision_of(w.trace(), 1) == "yield_immediately");
    CHECK(action_types(w.trace()) == std::vector<std::string>{"yield", "speak"});
    CHECK_FALSE(w.history().entries()[0].complete);
}

TEST_CASE("wrap-up speech only yields to a wakeword") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    const auto t = e.on_user_speech(3.0, {"That is wrong"});
    e.on_classifier_result(3.0, t->overlap_id, label(IntentLabel::Disruptive));
    CHECK_FALSE(e.on_user_speech(3.5, {"no listen to me"}).has_value());
    const auto ignored = of_kind(e.trace(), "engine.ignored");
    REQUIRE(ignored.size() == 1);
    CHECK(ignored[0].payload.at("reason") == "wrap_up");
    CHECK_FALSE(e.on_user_speech(4.0, {"stop"}).has_value());
    CHECK(decision_of(e.trace(), 3) == "yield_immediately");
    e.tick(60.0);
    CHECK(action_types(e.trace()) == std::vector<std::string>{"wrap_up_summary", "yield", "speak"});
}

TEST_CASE("elapsed time is not reset by a resume") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    const auto a = e.on_user_speech(2.0, {"yes I agree with that"});
    e.on_classifier_result(2.0, a->overlap_id, label(IntentLabel::Agreement));
    CHECK(decision_of(e.trace(), a->overlap_id) == "ack_and_continue");
    const auto b = e.on_user_speech(6.0, {"that is wrong"});
    REQUIRE(b);
    CHECK(b->request.elapsed_s == doctest::Approx(6.0));
    e.on_classifier_result(6.0, b->overlap_id, label(IntentLabel::Disruptive));
    CHECK(decision_of(e.trace(), b->overlap_id) == "yield_immediately");
}

TEST_CASE("unknown classification ids are ignored") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    e.on_classifier_result(1.0, 42, label(IntentLabel::Agreement));
    const auto ig = of_kind(e.trace(), "engine.ignored");
    REQUIRE(ig.size() == 1);
    CHECK(ig[0].payload.at("reason") == "unknown_classification");
}

TEST_CASE("terminate stops processing") {
    auto e = make_engine();
    e.start_robot_turn(0.0, kText);
    e.terminate(1.0, "boom");
    CHECK(e.terminated());
    const auto n = e.trace().size();
    CHECK_FALSE(e.on_user_speech(2.0, {"hello"}).has_value());
    e.tick(50.0);
    CHECK(e.trace().size() == n);
}

TEST_CASE("property: random sessions keep the engine invariants") {
    std::mt19937_64 rng(424242);
    const std::vector<std::string> utterances{
        "Okay", "yeah yeah yeah", "What is the parachute for?", "Luna, stop.", "that is wrong",
        "another thing is the knife", "uh", "we don't have time", "stop", "is the map useful?"};
    std::uniform_real_distribution<double> gap(0.0, 4.0);
    std::uniform_real_distribution<double> latency(0.0, 3.0);
    RuleBasedClassifier rb;

    for (int trial = 0; trial < 200; ++trial) {
        auto cfg = quick_config();
        cfg.auto_respond = trial % 2 == 0;
        auto e = make_engine(cfg);
        double now = 0.0;
        std::vector<std::pair<double, ClassificationTicket>> inflight;
        e.start_robot_turn(now, kText);
        for (int step = 0; step < 12; ++step) {
            now += gap(rng);
            // deliver due results first
            for (auto it = inflight.begin(); it != inflight.end();) {
                if (it->first <= now) {
                    e.on_classifier_result(std::max(it->first, e.now()), it->second.overlap_id,
                                           rng() % 10 == 0 ? Outcome<ClassifierResult>{Failure{"classifier", "x"}}
                                                           : classify(it->second.request, rb));
                    it = inflight.erase(it);
                } else {
                    ++it;
                }
            }
            now = std::max(now, e.now());
            if (e.quiescent() && rng() % 3 == 0) {
                e.start_robot_turn(now, kText);
                continue;
            }
            const auto& u = utterances[rng() % utterances.size()];
            if (auto t = e.on_user_speech(now, {u})) inflight.emplace_back(now + latency(rng), *t);
        }
        for (auto& [at, ticket] : inflight) {
            now = std::max({now, at, e.now()});
            e.on_classifier_result(now, ticket.overlap_id, classify(ticket.request, rb));
        }
        e.tick(now + 200.0);

        const auto& entries = e.trace().entries();
        std::map<std::uint64_t, int> classified, decided;
        std::map<std::uint64_t, long> last_word;
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (i) CHECK(entries[i].t >= entries[i - 1].t);
            const auto& p = entries[i].payload;
            if (entries[i].kind == "engine.classify") ++classified[p.at("overlap_id").get<std::uint64_t>()];
            if (entries[i].kind == "engine.decision") ++decided[p.at("overlap_id").get<std::uint64_t>()];
            if (entries[i].kind == "robot.word") {
                const auto id = p.at("turn_id").get<std::uint64_t>();
                const long idx = p.at("index").get<long>();
                if (last_word.count(id)) CHECK(idx == last_word[id] + 1);
                last_word[id] = idx;
            }
        }
        for (const auto& [id, n] : classified) {
            CHECK(n == 1);
            CHECK(decided[id] == 1);
        }
        for (const auto& [id, n] : decided) CHECK(n == 1);
        for (std::size_t i = 1; i < e.history().size(); ++i) {
            CHECK(e.history().entries()[i].start_s >= e.history().entries()[i - 1].start_s);
        }
        CHECK(e.quiescent());
        CHECK_FALSE(e.terminated());
    }
}

TEST_CASE("same inputs give byte-identical traces") {
    auto run = [] {
        auto e = make_engine();
        RuleBasedClassifier rb;
        e.start_robot_turn(0.0, kText);
        auto t = e.on_user_speech(2.2, {"yeah sure"});
        e.on_classifier_result(2.7, t->overlap_id, classify(t->request, rb));
        t = e.on_user_speech(6.3, {"What is the parachute for?"});
        e.on_classifier_result(6.9, t->overlap_id, classify(t->request, rb));
        e.tick(100.0);
        // latency is wall time; blank it for the comparison
        std::string out;
        for (auto entry : e.trace().entries()) {
            if (entry.payload.contains("latency_s")) entry.payload["latency_s"] = 0;
            out += to_ndjson_line(entry) + "\n";
        }
        return out;
    };
    CHECK(run() == run());
}
