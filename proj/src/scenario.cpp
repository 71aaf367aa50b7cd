#include "bargein/scenario.hpp"

#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "bargein/session_engine.hpp"

namespace bargein {

using json = nlohmann::json;

// ── Located parsing ─────────────────────────────────────────────

namespace {

/// Input iterator that counts lines. The lexer may read one character past
/// the end of a number, so value positions use the line of the last
/// non-whitespace character consumed.
class LineCountingIterator {
public:
    using iterator_category = std::input_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char*;
    using reference = const char&;

    struct Lines {
        std::size_t current = 1;
        std::size_t last_token = 1;
    };

    LineCountingIterator(const char* p, Lines* lines) : p_(p), lines_(lines) {}

    reference operator*() const { return *p_; }
    LineCountingIterator& operator++() {
        const char c = *p_;
        if (c != ' ' && c != '\t' && c != '\r' && c != '\n') lines_->last_token = lines_->current;
        if (c == '\n') ++lines_->current;
        ++p_;
        return *this;
    }
    LineCountingIterator operator++(int) {
        auto copy = *this;
        ++*this;
        return copy;
    }
    bool operator==(const LineCountingIterator& o) const { return p_ == o.p_; }
    bool operator!=(const LineCountingIterator& o) const { return p_ != o.p_; }

private:
    const char* p_;
    Lines* lines_;
};

std::string escape_pointer_token(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') {
            out += "~0";
        } else if (c == '/') {
            out += "~1";
        } else {
            out += c;
        }
    }
    return out;
}

/// SAX consumer that builds a DOM and remembers where each value started.
class LocatingSax {
public:
    explicit LocatingSax(const LineCountingIterator::Lines* lines) : lines_(lines) {}

    LocatedJson result;

    bool null() { return place(nullptr); }
    bool boolean(bool v) { return place(v); }
    bool number_integer(json::number_integer_t v) { return place(v); }
    bool number_unsigned(json::number_unsigned_t v) { return place(v); }
    bool number_float(json::number_float_t v, const json::string_t&) { return place(v); }
    bool string(json::string_t& v) { return place(v); }
    bool binary(json::binary_t& v) { return place(json::binary(v)); }

    bool start_object(std::size_t) { return open(json::object()); }
    bool start_array(std::size_t) { return open(json::array()); }
    bool end_object() { return close(); }
    bool end_array() { return close(); }

    bool key(json::string_t& k) {
        pending_key_ = k;
        const auto ptr = stack_.back().pointer + "/" + escape_pointer_token(k);
        result.lines[ptr] = lines_->last_token;
        return true;
    }

    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception& ex) {
        throw InvalidInput(ex.what());
    }

private:
    struct Frame {
        json* node;
        std::string pointer;
    };

    std::pair<json*, std::string> insert(json v) {
        if (stack_.empty()) {
            result.value = std::move(v);
            result.lines.emplace("", lines_->last_token);
            return {&result.value, ""};
        }
        Frame& top = stack_.back();
        if (top.node->is_object()) {
            auto ptr = top.pointer + "/" + escape_pointer_token(pending_key_);
            auto& slot = (*top.node)[pending_key_];
            slot = std::move(v);
            return {&slot, ptr};
        }
        auto ptr = top.pointer + "/" + std::to_string(top.node->size());
        top.node->push_back(std::move(v));
        result.lines.emplace(ptr, lines_->last_token);
        return {&top.node->back(), ptr};
    }

    template <typename V>
    bool place(V&& v) {
        insert(json(std::forward<V>(v)));
        return true;
    }

    bool open(json container) {
        auto [node, ptr] = insert(std::move(container));
        stack_.push_back(Frame{node, std::move(ptr)});
        return true;
    }

    bool close() {
        stack_.pop_back();
        return true;
    }

    const LineCountingIterator::Lines* lines_;
    std::vector<Frame> stack_;
    std::string pending_key_;
};

}  // namespace

std::size_t LocatedJson::line_of(const std::string& pointer) const {
    std::string p = pointer;
    while (true) {
        auto it = lines.find(p);
        if (it != lines.end()) return it->second;
        if (p.empty()) return 1;
        p = p.substr(0, p.rfind('/'));
    }
}

LocatedJson parse_located(const std::string& text) {
    LineCountingIterator::Lines lines;
    LocatingSax sax(&lines);
    LineCountingIterator first(text.data(), &lines);
    LineCountingIterator last(text.data() + text.size(), &lines);
    json::sax_parse(first, last, &sax);
    return std::move(sax.result);
}

// ── Scenario schema ─────────────────────────────────────────────

namespace {

class Validator {
public:
    Validator(const LocatedJson& doc, std::string source)
        : doc_(doc), source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
        throw ScenarioError(source_, doc_.line_of(pointer),
                            (pointer.empty() ? std::string("/") : pointer) + ": " + message);
    }

    void only_keys(const json& obj, const std::string& pointer,
                   std::initializer_list<std::string_view> allowed) const {
        for (const auto& [k, v] : obj.items()) {
            bool ok = false;
            for (auto a : allowed) ok = ok || a == k;
            if (!ok) fail(pointer + "/" + escape_pointer_token(k), "unknown field");
        }
    }

    const json& require(const json& obj, const std::string& pointer, const std::string& key) const {
        if (!obj.contains(key)) fail(pointer, "missing required field '" + key + "'");
        return obj.at(key);
    }

    std::string text(const json& obj, const std::string& pointer, const std::string& key) const {
        const auto& v = require(obj, pointer, key);
        const auto at = pointer + "/" + key;
        if (!v.is_string()) fail(at, "expected a string");
        auto s = v.get<std::string>();
        if (normalize_whitespace(s).empty()) fail(at, "must not be empty");
        return s;
    }

    double seconds(const json& obj, const std::string& pointer, const std::string& key) const {
        const auto& v = require(obj, pointer, key);
        const auto at = pointer + "/" + key;
        if (!v.is_number()) fail(at, "expected a number of seconds");
        const double d = v.get<double>();
        if (d < 0.0) fail(at, "must be >= 0 (got " + format_seconds(d) + ")");
        return d;
    }

    IntentLabel label(const json& v, const std::string& at) const {
        if (!v.is_string()) fail(at, "expected an intent label string");
        auto l = label_from_string(to_lower(v.get<std::string>()));
        if (!l) {
            fail(at, "unknown intent label '" + v.get<std::string>() +
                         "' (expected agreement, assistance, clarification, disruptive)");
        }
        return *l;
    }

    HandlingDecision decision(const json& v, const std::string& at) const {
        if (!v.is_string()) fail(at, "expected a decision string");
        auto d = decision_from_string(v.get<std::string>());
        if (!d) fail(at, "unknown decision '" + v.get<std::string>() + "'");
        return *d;
    }

private:
    const LocatedJson& doc_;
    std::string source_;
};

ScenarioStep parse_step(const Validator& val, const json& j, const std::string& at) {
    if (!j.is_object()) val.fail(at, "expected a step object");
    const auto type_at = at + "/type";
    const auto& type = val.require(j, at, "type");
    if (!type.is_string()) val.fail(type_at, "expected a string");
    const auto t = type.get<std::string>();
    if (t == "robot_turn") {
        val.only_keys(j, at, {"type", "text"});
        return step::RobotTurn{val.text(j, at, "text")};
    }
    if (t == "user_turn") {
        val.only_keys(j, at, {"type", "text"});
        return step::UserTurn{val.text(j, at, "text")};
    }
    if (t == "user_event") {
        val.only_keys(j, at, {"type", "at_s", "text", "oracle_intent", "final"});
        step::UserEvent ev;
        ev.at_s = val.seconds(j, at, "at_s");
        ev.text = val.text(j, at, "text");
        if (j.contains("oracle_intent")) {
            ev.oracle_intent = val.label(j.at("oracle_intent"), at + "/oracle_intent");
        }
        if (j.contains("final")) {
            if (!j.at("final").is_boolean()) val.fail(at + "/final", "expected true or false");
            ev.is_final = j.at("final").get<bool>();
        }
        return ev;
    }
    val.fail(type_at, "unknown step type '" + t + "' (expected robot_turn, user_event, user_turn)");
}

Expectation parse_expectation(const Validator& val, const LocatedJson& doc, const json& j,
                              const std::string& at, const std::vector<ScenarioStep>& script) {
    if (!j.is_object()) val.fail(at, "expected an expectation object");
    val.only_keys(j, at, {"step", "gate", "intent", "decision", "resume_index", "actions",
                          "action_text_prefix", "fallback"});
    Expectation e;
    e.line = doc.line_of(at);
    const auto& st = val.require(j, at, "step");
    if (!st.is_number_unsigned()) val.fail(at + "/step", "expected a step index");
    e.step = st.get<std::size_t>();
    if (e.step >= script.size()) {
        val.fail(at + "/step", "step " + std::to_string(e.step) + " is outside the script (" +
                                   std::to_string(script.size()) + " steps)");
    }
    if (std::holds_alternative<step::RobotTurn>(script[e.step])) {
        val.fail(at + "/step", "expectations must refer to user steps");
    }
    if (j.contains("gate")) {
        static const std::set<std::string> kGates = {"wakeword_yield", "finish_up",
                                                     "needs_classification", "ignored"};
        const auto& g = j.at("gate");
        if (!g.is_string() || kGates.count(g.get<std::string>()) == 0) {
            val.fail(at + "/gate", "expected one of wakeword_yield, finish_up, "
                                   "needs_classification, ignored");
        }
        e.gate = g.get<std::string>();
    }
    if (j.contains("intent")) e.intent = val.label(j.at("intent"), at + "/intent");
    if (j.contains("decision")) e.decision = val.decision(j.at("decision"), at + "/decision");
    if (j.contains("resume_index")) {
        if (!j.at("resume_index").is_number_unsigned()) {
            val.fail(at + "/resume_index", "expected a token index");
        }
        e.resume_index = j.at("resume_index").get<std::size_t>();
    }
    if (j.contains("actions")) {
        static const std::set<std::string> kKinds = {"speak", "verbal_ack", "nod", "yield",
                                                     "answer_clarification", "wrap_up_summary"};
        const auto& a = j.at("actions");
        if (!a.is_array()) val.fail(at + "/actions", "expected an array of action kinds");
        std::vector<std::string> kinds;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const auto ai = at + "/actions/" + std::to_string(i);
            if (!a[i].is_string() || kKinds.count(a[i].get<std::string>()) == 0) {
                val.fail(ai, "unknown action kind");
            }
            kinds.push_back(a[i].get<std::string>());
        }
        e.actions = std::move(kinds);
    }
    if (j.contains("action_text_prefix")) {
        if (!j.at("action_text_prefix").is_string()) {
            val.fail(at + "/action_text_prefix", "expected a string");
        }
        e.action_text_prefix = j.at("action_text_prefix").get<std::string>();
    }
    if (j.contains("fallback")) {
        if (!j.at("fallback").is_boolean()) val.fail(at + "/fallback", "expected true or false");
        e.fallback = j.at("fallback").get<bool>();
    }
    return e;
}

}  // namespace

Scenario parse_scenario(const std::string& text, const std::string& source,
                        const SessionConfig& base) {
    LocatedJson doc;
    try {
        doc = parse_located(text);
    } catch (const InvalidInput& e) {
        throw InvalidInput(source + ": " + e.what());
    }
    const Validator val(doc, source);
    const json& root = doc.value;
    if (!root.is_object()) val.fail("", "scenario must be a JSON object");
    val.only_keys(root, "", {"id", "description", "config", "script", "expect"});

    Scenario s;
    s.source = source;
    s.config = base;
    s.id = val.text(root, "", "id");
    if (root.contains("description")) {
        if (!root.at("description").is_string()) val.fail("/description", "expected a string");
        s.description = root.at("description").get<std::string>();
    }
    if (root.contains("config")) {
        try {
            apply_config_json(s.config, root.at("config"), "/config");
            s.config.llm.apply_environment();
            s.config.validate();
        } catch (const SchemaError& e) {
            throw ScenarioError(source, doc.line_of(e.pointer()), e.what());
        } catch (const InvalidInput& e) {
            val.fail("/config", e.what());
        }
    }

    const auto& script = val.require(root, "", "script");
    if (!script.is_array() || script.empty()) val.fail("/script", "expected a non-empty array");
    for (std::size_t i = 0; i < script.size(); ++i) {
        const auto at = "/script/" + std::to_string(i);
        s.script.push_back(parse_step(val, script[i], at));
        const auto* ev = std::get_if<step::UserEvent>(&s.script.back());
        if (ev && s.config.classifier == ClassifierChoice::Oracle && !ev->oracle_intent) {
            val.fail(at, "oracle classifier selected but step has no oracle_intent");
        }
    }
    if (!std::holds_alternative<step::RobotTurn>(s.script.front()) &&
        !std::holds_alternative<step::UserTurn>(s.script.front())) {
        val.fail("/script/0", "a script must open with robot_turn or user_turn");
    }

    if (root.contains("expect")) {
        const auto& ex = root.at("expect");
        if (!ex.is_array()) val.fail("/expect", "expected an array");
        for (std::size_t i = 0; i < ex.size(); ++i) {
            s.expectations.push_back(
                parse_expectation(val, doc, ex[i], "/expect/" + std::to_string(i), s.script));
        }
    }
    return s;
}

Scenario load_scenario(const std::string& path, const SessionConfig& base) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open scenario " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path, base);
}

// ── Replay ──────────────────────────────────────────────────────

namespace {

class Replayer {
public:
    explicit Replayer(const Scenario& s)
        : s_(s),
          engine_(s.config, make_planner(s.config)),
          classifier_(make_classifier(s.config)),
          oracle_(std::dynamic_pointer_cast<OracleClassifier>(classifier_)) {}

    SessionTrace run() {
        try {
            for (std::size_t i = 0; i < s_.script.size() && !engine_.terminated(); ++i) {
                std::visit([&](const auto& st) { this->step(i, st); }, s_.script[i]);
            }
            if (!engine_.terminated()) settle();
        } catch (const std::exception& e) {
            engine_.terminate(engine_.now(), e.what());
        }
        return engine_.trace();
    }

private:
    struct Delivery {
        std::uint64_t overlap_id;
        Outcome<ClassifierResult> result;
    };

    void mark(std::size_t i, std::string_view type) {
        engine_.tick(now_);
        engine_.trace().add(engine_.now(), "scenario.step", {{"step", i}, {"type", type}});
    }

    void step(std::size_t i, const step::RobotTurn& st) {
        settle();
        mark(i, "robot_turn");
        engine_.start_robot_turn(now_, st.text);
        turn_start_ = now_;
    }

    void step(std::size_t i, const step::UserTurn& st) {
        settle();
        mark(i, "user_turn");
        engine_.on_user_speech(now_, {st.text, true});
    }

    void step(std::size_t i, const step::UserEvent& st) {
        const double target = turn_start_ + st.at_s;
        if (target + 1e-9 < now_) {
            throw InvalidInput("step " + std::to_string(i) + " at " + format_seconds(st.at_s) +
                               " s lies before the current time");
        }
        advance_to(target);
        mark(i, "user_event");
        if (oracle_ && st.oracle_intent) oracle_->expect(st.text, *st.oracle_intent);
        auto ticket = engine_.on_user_speech(now_, {st.text, st.is_final});
        if (!ticket) return;

        const auto& cfg = s_.config;
        auto result = classify(ticket->request, *classifier_);
        double delay = cfg.classifier_latency_s;
        if (delay > cfg.classifier_timeout_s) {
            delay = cfg.classifier_timeout_s;
            result = Failure{"classifier", "timed out after " +
                                               format_seconds(cfg.classifier_timeout_s) + " s"};
        } else if (result.ok()) {
            // Virtual time: report the simulated latency, not host time.
            result.value().latency_s = delay;
        }
        deliveries_.emplace(now_ + delay, Delivery{ticket->overlap_id, std::move(result)});
        deliver_due(now_);
    }

    void deliver_due(double t) {
        while (!deliveries_.empty() && deliveries_.begin()->first <= t + 1e-12) {
            auto node = deliveries_.extract(deliveries_.begin());
            now_ = std::max(now_, node.key());
            engine_.on_classifier_result(now_, node.mapped().overlap_id, node.mapped().result);
        }
    }

    void advance_to(double target) {
        deliver_due(target);
        now_ = std::max(now_, target);
        engine_.tick(now_);
    }

    void settle() {
        for (int guard = 0; guard < 1'000'000; ++guard) {
            if (engine_.terminated() || (engine_.quiescent() && deliveries_.empty())) return;
            std::optional<double> next = engine_.next_due();
            if (!deliveries_.empty()) {
                next = next ? std::min(*next, deliveries_.begin()->first)
                            : deliveries_.begin()->first;
            }
            if (!next) throw ContractViolation("session cannot settle: classification lost");
            advance_to(std::max(*next, now_));
        }
        throw ContractViolation("session did not settle");
    }

    const Scenario& s_;
    SessionEngine engine_;
    std::shared_ptr<IntentClassifier> classifier_;
    std::shared_ptr<OracleClassifier> oracle_;
    std::multimap<double, Delivery> deliveries_;
    double now_ = 0.0;
    double turn_start_ = 0.0;
};

}  // namespace

SessionTrace run_scenario(const Scenario& s) { return Replayer(s).run(); }

// ── Checking ────────────────────────────────────────────────────

std::map<std::size_t, OverlapSummary> summarize_steps(const SessionTrace& trace) {
    std::map<std::size_t, OverlapSummary> out;
    std::map<std::uint64_t, std::size_t> step_of;
    std::optional<std::size_t> current_step;

    auto summary_for = [&](const ordered_json& p) -> OverlapSummary* {
        if (!p.contains("overlap_id")) return nullptr;
        auto it = step_of.find(p.at("overlap_id").get<std::uint64_t>());
        return it == step_of.end() ? nullptr : &out[it->second];
    };

    for (const auto& e : trace.entries()) {
        const auto& p = e.payload;
        if (e.kind == "scenario.step") {
            current_step = p.at("step").get<std::size_t>();
            out[*current_step];
            continue;
        }
        if (e.kind == "user.speech" && current_step && p.contains("overlap_id")) {
            auto& s = out[*current_step];
            if (!s.overlap_id) {
                s.overlap_id = p.at("overlap_id").get<std::uint64_t>();
                step_of[*s.overlap_id] = *current_step;
            }
            continue;
        }
        OverlapSummary* s = summary_for(p);
        if (s == nullptr) continue;
        if (e.kind == "engine.gate" && !s->gate) {
            s->gate = p.at("outcome").get<std::string>();
        } else if (e.kind == "engine.ignored" && !s->gate) {
            s->gate = "ignored";
        } else if (e.kind == "engine.intent" && !s->intent) {
            s->intent = p.at("label").get<std::string>();
        } else if (e.kind == "engine.decision" && !s->decision) {
            s->decision = p.at("decision").get<std::string>();
            s->fallback = p.value("fallback", false);
            s->degraded = p.value("degraded", false);
        } else if (e.kind == "engine.resume" && !s->resume_index) {
            s->resume_index = p.at("resume_index").get<std::size_t>();
        } else if (e.kind == "robot.action") {
            const auto& a = p.at("action");
            s->actions.push_back(a.at("type").get<std::string>());
            if (!s->first_spoken_action && a.contains("text")) {
                s->first_spoken_action = a.at("text").get<std::string>();
            }
        }
    }
    return out;
}

namespace {
std::string join(const std::vector<std::string>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out + "]";
}
}  // namespace

std::size_t Report::passed_count() const {
    std::size_t n = 0;
    for (const auto& r : results) n += r.pass ? 1 : 0;
    return n;
}

Report check_expectations(const SessionTrace& trace, const Scenario& s) {
    Report report;
    report.scenario_id = s.id;
    for (const auto& e : trace.entries()) {
        if (e.kind == "failure" && e.payload.value("fatal", false)) report.fatal = true;
    }
    const auto steps = summarize_steps(trace);
    const std::string none = "(none)";

    for (const auto& ex : s.expectations) {
        const auto it = steps.find(ex.step);
        const OverlapSummary empty;
        const OverlapSummary& got = it == steps.end() ? empty : it->second;
        auto add = [&](std::string field, std::string expected, std::optional<std::string> actual) {
            ExpectationResult r;
            r.step = ex.step;
            r.line = ex.line;
            r.field = std::move(field);
            r.expected = std::move(expected);
            r.actual = actual.value_or(none);
            r.pass = actual && *actual == r.expected;
            report.results.push_back(std::move(r));
            return report.results.back().pass;
        };
        if (ex.gate) add("gate", *ex.gate, got.gate);
        if (ex.intent) add("intent", std::string(to_string(*ex.intent)), got.intent);
        if (ex.decision) {
            ++report.decisions_total;
            if (add("decision", std::string(to_string(*ex.decision)), got.decision)) {
                ++report.decisions_matched;
            }
        }
        if (ex.resume_index) {
            add("resume_index", std::to_string(*ex.resume_index),
                got.resume_index ? std::optional(std::to_string(*got.resume_index))
                                 : std::nullopt);
        }
        if (ex.actions) add("actions", join(*ex.actions), join(got.actions));
        if (ex.action_text_prefix) {
            std::optional<std::string> actual;
            if (got.first_spoken_action) {
                actual = got.first_spoken_action->substr(
                    0, std::min(got.first_spoken_action->size(), ex.action_text_prefix->size()));
            }
            add("action_text_prefix", *ex.action_text_prefix, actual);
        }
        if (ex.fallback) {
            add("fallback", *ex.fallback ? "true" : "false",
                got.decision ? std::optional(std::string(got.fallback ? "true" : "false"))
                             : std::nullopt);
        }
    }
    return report;
}

std::string format_report(const Report& r) {
    std::ostringstream out;
    for (const auto& x : r.results) {
        if (x.pass) continue;
        out << "  FAIL step " << x.step << " (line " << x.line << ") " << x.field
            << ": expected " << x.expected << ", got " << x.actual << '\n';
    }
    if (r.fatal) out << "  FAIL trace ended in a fatal failure\n";
    const double pct = r.results.empty()
                           ? 100.0
                           : 100.0 * static_cast<double>(r.passed_count()) /
                                 static_cast<double>(r.results.size());
    out << (r.passed() ? "PASS " : "FAIL ") << r.scenario_id << ": " << r.passed_count() << "/"
        << r.results.size() << " expectations (" << format_seconds(std::round(pct * 100) / 100)
        << "%), decisions " << r.decisions_matched << "/" << r.decisions_total << '\n';
    return out.str();
}

}  // namespace bargein
