#include <doctest.h>

#include <random>

#include "bargein/overlap_gate.hpp"
#include "bargein/speech_clock.hpp"

using namespace bargein;

namespace {

OverlapEvent overlap(const std::string& text) {
    return OverlapEvent{text, 1.0, count_words(text), true};
}

}  // namespace

TEST_CASE("contains_wakeword matches whole tokens") {
    WakewordConfig cfg;
    CHECK(contains_wakeword("Luna, what do you think", cfg));
    CHECK_FALSE(contains_wakeword("lunar eclipse tonight", cfg));
    CHECK(contains_wakeword("please STOP now", cfg));
    CHECK_FALSE(contains_wakeword("unstoppable", cfg));
    CHECK(contains_wakeword("\"Stop!\"", cfg));
}

TEST_CASE("gate outcomes") {
    const WakewordConfig cfg;
    CHECK(std::holds_alternative<gate_outcome::WakewordYield>(gate(overlap("stop"), 10.0, cfg)));
    CHECK(std::holds_alternative<gate_outcome::FinishUp>(gate(overlap("wait a second"), 1.5, cfg)));
    const auto need = gate(overlap("wait a second"), 6.0, cfg);
    REQUIRE(std::holds_alternative<gate_outcome::NeedsClassification>(need));
    CHECK(std::get<gate_outcome::NeedsClassification>(need).overlap.transcript == "wait a second");
    CHECK(std::holds_alternative<gate_outcome::WakewordYield>(gate(overlap("luna stop"), 1.0, cfg)));
    CHECK(to_string(gate(overlap("hm"), 1.0, cfg)) == "finish_up");
}

TEST_CASE("gate boundary at two seconds") {
    const WakewordConfig cfg;
    CHECK(to_string(gate(overlap("wait"), 2.000, cfg)) == "needs_classification");
    CHECK(to_string(gate(overlap("wait"), 1.999, cfg)) == "finish_up");

    // Same boundary computed from a plan: 20 words at 120 wpm last 10 s.
    const auto p = plan_utterance(
        "one two three four five six seven eight nine ten eleven twelve thirteen fourteen "
        "fifteen sixteen seventeen eighteen nineteen twenty",
        {120.0, 0.05});
    CHECK(to_string(gate(overlap("wait"), p, 8.0, cfg)) == "needs_classification");
    CHECK(to_string(gate(overlap("wait"), p, 8.001, cfg)) == "finish_up");
}

TEST_CASE("gate preconditions") {
    const WakewordConfig cfg;
    const auto p = plan_utterance("short one", {});
    CHECK_THROWS_AS(gate(overlap("hi"), p, p.total_duration_s, cfg), ContractViolation);
    auto partial = overlap("hi");
    partial.is_final = false;
    CHECK_THROWS_AS(gate(partial, p, 0.1, cfg), ContractViolation);
}

TEST_CASE("wakeword config validation") {
    CHECK_NOTHROW(WakewordConfig{}.validate());
    CHECK_THROWS_AS(WakewordConfig{{}}.validate(), InvalidInput);
    CHECK_THROWS_AS(WakewordConfig{{"Luna"}}.validate(), InvalidInput);
    CHECK_THROWS_AS(WakewordConfig{{"hey luna"}}.validate(), InvalidInput);
}

TEST_CASE("property: wakeword dominance and purity") {
    std::mt19937_64 rng(77);
    const std::vector<std::string> filler{"uh", "we", "really", "need", "to", "go", "okay",
                                          "what", "lunar", "stopping"};
    const std::vector<std::string> wake{"Luna", "luna,", "STOP", "stop!", "Luna?", "(stop)"};
    std::uniform_int_distribution<std::size_t> len(0, 8), f(0, filler.size() - 1),
        w(0, wake.size() - 1);
    std::uniform_real_distribution<double> rem(0.0, 30.0);
    const WakewordConfig cfg;
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<std::string> words;
        const std::size_t n = len(rng);
        for (std::size_t i = 0; i < n; ++i) words.push_back(filler[f(rng)]);
        words.insert(words.begin() + static_cast<long>(rng() % (words.size() + 1)), wake[w(rng)]);
        std::string text;
        for (const auto& x : words) text += (text.empty() ? "" : " ") + x;
        const double r = rem(rng);
        const auto out = gate(overlap(text), r, cfg);
        CHECK(std::holds_alternative<gate_outcome::WakewordYield>(out));
        CHECK(to_string(gate(overlap(text), r, cfg)) == to_string(out));
    }
}
