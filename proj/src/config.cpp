#include "bargein/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bargein {

using json = nlohmann::json;

std::string_view to_string(ClassifierChoice c) {
    switch (c) {
        case ClassifierChoice::RuleBased: return "rule_based";
        case ClassifierChoice::External: return "external";
        case ClassifierChoice::Oracle: return "oracle";
        case ClassifierChoice::Failing: return "failing";
    }
    return "unknown";
}

std::string_view to_string(PlannerChoice c) {
    return c == PlannerChoice::External ? "external" : "template";
}

std::string_view to_string(ClockMode c) { return c == ClockMode::Wall ? "wall" : "virtual"; }

void SessionConfig::validate() const {
    rate.validate();
    wakewords.validate();
    dispatch.validate();
    if (history_window < 1) throw InvalidInput("history_window must be >= 1");
    if (!(classifier_timeout_s > 0.0)) throw InvalidInput("classifier_timeout_s must be positive");
    if (classifier_latency_s < 0.0) throw InvalidInput("classifier_latency_s must be >= 0");
    if (planner.hold_phrase.empty()) throw InvalidInput("hold_phrase must not be empty");
    if (planner.summary_max_words < 1) throw InvalidInput("summary_max_words must be >= 1");
    if ((classifier == ClassifierChoice::External || planner_choice == PlannerChoice::External) &&
        !llm.configured()) {
        throw InvalidInput("external classifier/planner selected but llm endpoint/model unset");
    }
}

namespace {

class Reader {
public:
    Reader(const json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {}

    std::string at(const std::string& key) const { return ptr_ + "/" + key; }

    double number(const std::string& key) const {
        const auto& v = j_.at(key);
        if (!v.is_number()) throw SchemaError(at(key), "expected a number");
        return v.get<double>();
    }
    std::size_t count(const std::string& key) const {
        const auto& v = j_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0) {
            throw SchemaError(at(key), "expected a non-negative integer");
        }
        return v.get<std::size_t>();
    }
    bool boolean(const std::string& key) const {
        const auto& v = j_.at(key);
        if (!v.is_boolean()) throw SchemaError(at(key), "expected true or false");
        return v.get<bool>();
    }
    std::string string(const std::string& key) const {
        const auto& v = j_.at(key);
        if (!v.is_string()) throw SchemaError(at(key), "expected a string");
        return v.get<std::string>();
    }
    std::vector<std::string> strings(const std::string& key) const {
        const auto& v = j_.at(key);
        if (!v.is_array()) throw SchemaError(at(key), "expected an array of strings");
        std::vector<std::string> out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_string()) {
                throw SchemaError(at(key) + "/" + std::to_string(i), "expected a string");
            }
            out.push_back(v[i].get<std::string>());
        }
        return out;
    }

private:
    const json& j_;
    std::string ptr_;
};

template <typename Enum>
Enum choose(const Reader& r, const std::string& key, std::string_view value,
            std::initializer_list<Enum> options) {
    std::string names;
    for (auto o : options) {
        if (to_string(o) == value) return o;
        names += names.empty() ? "" : ", ";
        names += to_string(o);
    }
    throw SchemaError(r.at(key), "unknown value '" + std::string(value) + "' (expected " +
                                     names + ")");
}

}  // namespace

void apply_config_json(SessionConfig& cfg, const json& j, const std::string& pointer) {
    if (!j.is_object()) throw SchemaError(pointer.empty() ? "/" : pointer, "expected an object");
    const Reader r(j, pointer);
    for (const auto& [key, value] : j.items()) {
        if (key == "rate_wpm") {
            cfg.rate.rate_wpm = r.number(key);
        } else if (key == "word_floor_s") {
            cfg.rate.floor_s = r.number(key);
        } else if (key == "wakewords") {
            cfg.wakewords.wakewords.clear();
            for (auto& w : r.strings(key)) cfg.wakewords.wakewords.insert(to_lower(w));
        } else if (key == "backchannel_max_words") {
            cfg.dispatch.backchannel_max_words = r.count(key);
        } else if (key == "aggressive_window_s") {
            cfg.dispatch.aggressive_window_s = r.number(key);
        } else if (key == "agreement_ack_lexicon") {
            cfg.dispatch.agreement_ack_lexicon = r.strings(key);
        } else if (key == "assistance_ack_lexicon") {
            cfg.dispatch.assistance_ack_lexicon = r.strings(key);
        } else if (key == "ack_seed") {
            cfg.dispatch.ack_seed = r.count(key);
        } else if (key == "hold_phrase") {
            cfg.planner.hold_phrase = r.string(key);
        } else if (key == "summary_max_words") {
            cfg.planner.summary_max_words = r.count(key);
        } else if (key == "classifier") {
            cfg.classifier = choose(r, key, r.string(key),
                                    {ClassifierChoice::RuleBased, ClassifierChoice::External,
                                     ClassifierChoice::Oracle, ClassifierChoice::Failing});
        } else if (key == "planner") {
            cfg.planner_choice = choose(r, key, r.string(key),
                                        {PlannerChoice::Template, PlannerChoice::External});
        } else if (key == "clock") {
            cfg.clock = choose(r, key, r.string(key), {ClockMode::Virtual, ClockMode::Wall});
        } else if (key == "history_window") {
            cfg.history_window = r.count(key);
        } else if (key == "classifier_timeout_s") {
            cfg.classifier_timeout_s = r.number(key);
        } else if (key == "classifier_latency_s") {
            cfg.classifier_latency_s = r.number(key);
        } else if (key == "auto_respond") {
            cfg.auto_respond = r.boolean(key);
        } else if (key == "log_exchanges") {
            cfg.log_exchanges = r.boolean(key);
        } else if (key == "llm") {
            if (!value.is_object()) throw SchemaError(r.at(key), "expected an object");
            const Reader lr(value, r.at(key));
            for (const auto& [lk, lv] : value.items()) {
                if (lk == "endpoint") {
                    cfg.llm.endpoint = lr.string(lk);
                } else if (lk == "model") {
                    cfg.llm.model = lr.string(lk);
                } else if (lk == "api_key") {
                    cfg.llm.api_key = lr.string(lk);
                } else if (lk == "timeout_s") {
                    cfg.llm.timeout_s = lr.number(lk);
                } else {
                    throw SchemaError(lr.at(lk), "unknown field");
                }
            }
        } else {
            throw SchemaError(r.at(key), "unknown field");
        }
    }
}

json config_to_json(const SessionConfig& cfg) {
    return json{
        {"rate_wpm", cfg.rate.rate_wpm},
        {"word_floor_s", cfg.rate.floor_s},
        {"wakewords", cfg.wakewords.wakewords},
        {"backchannel_max_words", cfg.dispatch.backchannel_max_words},
        {"aggressive_window_s", cfg.dispatch.aggressive_window_s},
        {"agreement_ack_lexicon", cfg.dispatch.agreement_ack_lexicon},
        {"assistance_ack_lexicon", cfg.dispatch.assistance_ack_lexicon},
        {"ack_seed", cfg.dispatch.ack_seed},
        {"hold_phrase", cfg.planner.hold_phrase},
        {"summary_max_words", cfg.planner.summary_max_words},
        {"classifier", to_string(cfg.classifier)},
        {"planner", to_string(cfg.planner_choice)},
        {"clock", to_string(cfg.clock)},
        {"history_window", cfg.history_window},
        {"classifier_timeout_s", cfg.classifier_timeout_s},
        {"classifier_latency_s", cfg.classifier_latency_s},
        {"auto_respond", cfg.auto_respond},
        {"log_exchanges", cfg.log_exchanges},
        {"llm", {{"endpoint", cfg.llm.endpoint}, {"model", cfg.llm.model},
                 {"timeout_s", cfg.llm.timeout_s}}},
    };
}

SessionConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const json j = json::parse(buf.str(), nullptr, false);
    if (j.is_discarded()) throw InvalidInput(path + ": not valid JSON");
    SessionConfig cfg;
    apply_config_json(cfg, j);
    cfg.llm.apply_environment();
    return cfg;
}

std::shared_ptr<IntentClassifier> make_classifier(const SessionConfig& cfg) {
    switch (cfg.classifier) {
        case ClassifierChoice::RuleBased: return std::make_shared<RuleBasedClassifier>();
        case ClassifierChoice::Oracle: return std::make_shared<OracleClassifier>();
        case ClassifierChoice::Failing: return std::make_shared<FailingClassifier>();
        case ClassifierChoice::External: {
            auto llm = cfg.llm;
            llm.timeout_s = std::min(llm.timeout_s, cfg.classifier_timeout_s);
            return std::make_shared<ExternalClassifier>(std::make_shared<HttpChatClient>(llm));
        }
    }
    return std::make_shared<RuleBasedClassifier>();
}

std::shared_ptr<ResponsePlanner> make_planner(const SessionConfig& cfg) {
    if (cfg.planner_choice == PlannerChoice::External) {
        return std::make_shared<ExternalPlanner>(std::make_shared<HttpChatClient>(cfg.llm),
                                                 cfg.planner);
    }
    return std::make_shared<TemplatePlanner>(cfg.planner);
}

}  // namespace bargein
