// Prints one PASS/FAIL line per acceptance criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>

#include "bargein/scenario.hpp"
#include "bargein/session_engine.hpp"
#include "bargein/speech_clock.hpp"
#include "interruption_corpus.hpp"

namespace fs = std::filesystem;
using namespace bargein;

namespace {

std::string g_dir = BARGEIN_SCENARIO_DIR;

std::vector<fs::path> files_under(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.path().extension() == ".json") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct Check {
    std::string name;
    std::function<std::string(bool&)> run;  // returns a detail string
};

std::string golden(bool& ok) {
    const auto begin = std::chrono::steady_clock::now();
    std::size_t passed = 0, n = 0;
    std::set<std::string> decisions;
    for (const auto& f : files_under(fs::path(g_dir) / "golden")) {
        const auto s = load_scenario(f.string());
        const auto trace = run_scenario(s);
        const auto r = check_expectations(trace, s);
        ++n;
        passed += r.passed() ? 1 : 0;
        for (const auto& [step, sum] : summarize_steps(trace)) {
            if (sum.decision) decisions.insert(*sum.decision);
        }
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();
    ok = n == 8 && passed == 8 && secs < 1.0 && decisions.size() == 6;
    return std::to_string(passed) + "/" + std::to_string(n) + " scenarios, " +
           std::to_string(decisions.size()) + " distinct decisions, " + format_seconds(secs) + " s";
}

std::string boundaries(bool& ok) {
    const WakewordConfig wake;
    const DispatchConfig d;
    auto ev = [](const char* t) { return OverlapEvent{t, 1.0, count_words(t), true}; };
    int good = 0;
    good += to_string(gate(ev("wait"), 2.000, wake)) == "needs_classification";
    good += to_string(gate(ev("wait"), 1.999, wake)) == "finish_up";
    good += decide(IntentLabel::Disruptive, 3, 5.000, d) == HandlingDecision::AckAndWrapUp;
    good += decide(IntentLabel::Disruptive, 3, 5.001, d) == HandlingDecision::YieldImmediately;
    good += decide(IntentLabel::Agreement, 2, 1.0, d) == HandlingDecision::Continue;
    good += decide(IntentLabel::Agreement, 3, 1.0, d) == HandlingDecision::AckAndContinue;
    // The same six boundaries driven through the engine on the virtual clock.
    const auto s = load_scenario((fs::path(g_dir) / "fixtures" / "boundaries.json").string());
    const auto r = check_expectations(run_scenario(s), s);
    ok = good == 6 && r.passed() && r.decisions_total == 6;
    return std::to_string(good) + "/6 direct, " + std::to_string(r.decisions_matched) + "/" +
           std::to_string(r.decisions_total) + " replayed";
}

std::string resumption(bool& ok) {
    std::mt19937_64 rng(1);
    const std::vector<std::string> vocab{"one", "two,", "three.", "four", "five?", "six",
                                         "seven;", "eight", "nine!", "ten:"};
    std::uniform_int_distribution<std::size_t> len(1, 50), pick(0, vocab.size() - 1);
    std::uniform_real_distribution<double> rate(80.0, 300.0);
    std::size_t cases = 0, bad = 0;
    for (int plan_i = 0; plan_i < 1000; ++plan_i) {
        std::string text;
        for (std::size_t k = len(rng); k > 0; --k) text += vocab[pick(rng)] + " ";
        const auto p = plan_utterance(text, {rate(rng), 0.05});
        std::uniform_real_distribution<double> at(0.0, p.total_duration_s * 1.1);
        std::vector<double> ts(5);
        for (auto& t : ts) t = at(rng);
        std::sort(ts.begin(), ts.end());
        std::size_t prev = 0;
        for (double t : ts) {
            ++cases;
            const auto k = estimated_spoken_index(p, t);
            const auto r = resume_point(p, t);
            bad += r > k;
            bad += r > 0 && !p.tokens[r - 1].ends_clause;
            const auto a = spoken_text(p, r), b = remaining_text(p, r);
            bad += (a.empty() ? b : b.empty() ? a : a + " " + b) != p.full_text;
            bad += k < prev;
            prev = k;
        }
    }
    ok = bad == 0 && cases >= 1000;
    return std::to_string(cases) + " cases, " + std::to_string(bad) + " violations";
}

std::string corpus(bool& ok) {
    std::size_t hits = 0;
    std::string misses;
    for (const auto& c : interruption_corpus()) {
        ClassifierRequest req;
        req.overlap_text = c.utterance;
        req.robot_spoken_text = c.robot_spoken;
        req.robot_remaining_text = c.robot_remaining;
        const auto got = std::string(to_string(rule_based_classify(req)));
        if (got == c.expected) {
            ++hits;
        } else {
            misses += " [" + c.utterance + " -> " + got + "]";
        }
    }
    ok = hits >= 9;
    return std::to_string(hits) + "/" + std::to_string(interruption_corpus().size()) + misses;
}

std::string fixtures(bool& ok) {
    std::string detail;
    ok = true;
    for (const char* name : {"wrap_up_hold.json", "parachute_resume.json"}) {
        const auto s = load_scenario((fs::path(g_dir) / "fixtures" / name).string());
        const auto a = run_scenario(s).to_ndjson();
        const auto b = run_scenario(s).to_ndjson();
        const auto r = check_expectations(run_scenario(s), s);
        const bool good = r.passed() && a == b;
        ok = ok && good;
        detail += std::string(detail.empty() ? "" : ", ") + name + (good ? " ok" : " failed");
    }
    return detail;
}

std::string wakeword(bool& ok) {
    std::mt19937_64 rng(9);
    const char* text =
        "We have a flashlight and a map on our list. Next, I suggest a parachute, because it can "
        "be used as a shelter and for signaling. What do you think?";
    const std::vector<std::string> calls{"Luna", "luna,", "STOP", "Stop!", "luna?"};
    const std::vector<std::string> lead{"", "uh ", "no no ", "wait ", "okay "};
    std::size_t n = 0, bad = 0;
    for (int i = 0; i < 500; ++i) {
        SessionConfig cfg;
        SessionEngine e(cfg, make_planner(cfg));
        e.start_robot_turn(0.0, text);
        double t = std::uniform_real_distribution<double>(0.0, 11.9)(rng);
        // Put the engine in a random state first: pending classification,
        // resumed speech, or wrap-up.
        const int setup = static_cast<int>(rng() % 4);
        if (setup > 0 && t > 0.5) {
            const double pre = t / 2;
            const char* earlier = setup == 1 ? "is the map useful?" : setup == 2 ? "yes sure I agree" : "that is wrong";
            auto ticket = e.on_user_speech(pre, {earlier});
            if (ticket && setup != 1) {
                const auto label = setup == 2 ? IntentLabel::Agreement : IntentLabel::Disruptive;
                e.on_classifier_result(pre, ticket->overlap_id,
                                       ClassifierResult{label, ClassifierSource::OracleFixture, 0.0, {}});
            }
        }
        const std::string said = lead[rng() % lead.size()] + calls[rng() % calls.size()];
        e.tick(t);
        const auto before = e.trace().size();
        if (e.quiescent()) continue;  // nothing is being said
        ++n;
        e.on_user_speech(t, {said});
        bool yielded = false;
        const auto& entries = e.trace().entries();
        for (std::size_t k = before; k < entries.size(); ++k) {
            if (entries[k].kind == "engine.gate") {
                yielded = entries[k].payload.at("outcome") == "wakeword_yield";
            }
        }
        e.tick(t + 120.0);
        bool yield_event = false;
        for (std::size_t k = before; k < entries.size(); ++k) {
            yield_event = yield_event || entries[k].kind == "robot.yield";
        }
        bad += !(yielded && yield_event);
    }
    const auto s = load_scenario((fs::path(g_dir) / "fixtures" / "wakeword_during_wrap_up.json").string());
    const bool wrap = check_expectations(run_scenario(s), s).passed();
    ok = bad == 0 && wrap && n > 0;
    return std::to_string(n) + " random states, " + std::to_string(bad) +
           " without a yield, wrap-up fixture " + (wrap ? "ok" : "failed");
}

std::string determinism(bool& ok) {
    std::size_t n = 0, diff = 0;
    for (const auto& f : files_under(g_dir)) {
        const auto s = load_scenario(f.string());
        ++n;
        diff += run_scenario(s).to_ndjson() != run_scenario(s).to_ndjson();
    }
    ok = n > 0 && diff == 0;
    return std::to_string(n) + " scenarios, " + std::to_string(diff) + " differing";
}

std::string fallback(bool& ok) {
    const auto s = load_scenario((fs::path(g_dir) / "fixtures" / "classifier_failure.json").string());
    const auto trace = run_scenario(s);
    bool marked = false, yield = false;
    for (const auto& e : trace.entries()) {
        if (e.kind == "engine.decision" && e.payload.value("fallback", false) &&
            e.payload.at("decision") == "yield_immediately") {
            marked = true;
        }
        if (e.kind == "robot.yield") yield = true;
    }
    const auto r = check_expectations(trace, s);
    ok = marked && yield && r.passed() && !r.fatal;
    return std::string("fallback entry ") + (marked ? "present" : "missing") + ", yield " +
           (yield ? "emitted" : "missing");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_dir = argv[1];
    const std::vector<Check> checks = {
        {"golden dispatch suite", golden},
        {"boundary thresholds", boundaries},
        {"resumption properties", resumption},
        {"interruption corpus", corpus},
        {"fixture replays", fixtures},
        {"wakeword dominance", wakeword},
        {"suite determinism", determinism},
        {"classifier-failure fallback", fallback},
    };
    int failed = 0;
    for (const auto& c : checks) {
        bool ok = false;
        std::string detail;
        try {
            detail = c.run(ok);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        failed += ok ? 0 : 1;
        std::cout << (ok ? "PASS " : "FAIL ") << c.name << ": " << detail << '\n';
    }
    return failed;
}
