#include "bargein/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>

namespace bargein::gateway {

using json = nlohmann::json;

namespace {
// How often in-flight external classifications are checked.
constexpr double kInflightPollS = 0.01;

bool ready(const std::future<Outcome<ClassifierResult>>& f) {
    return f.wait_for(std::chrono::seconds(0)) == std::future_status::ready;
}
}  // namespace

bool valid_session_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    return std::all_of(id.begin(), id.end(), [](unsigned char c) {
        return std::isalnum(c) != 0 || c == '_' || c == '-' || c == '.';
    });
}

SessionHub::SessionHub(GatewayOptions options, Send send)
    : options_(std::move(options)), send_(std::move(send)) {}

SessionHub::~SessionHub() {
    // Outstanding HTTP calls are bounded by the client timeout.
    for (auto& s : sessions_) {
        for (auto& f : s.second->inflight) {
            if (f.result.valid()) f.result.wait();
        }
    }
    for (auto& f : abandoned_) f.wait();
}

void SessionHub::send_error(const std::string& session, const std::string& code,
                            const std::string& message) {
    ordered_json m;
    m["type"] = "error";
    if (!session.empty()) m["session"] = session;
    m["payload"] = {{"code", code}, {"message", message}};
    send_(m.dump());
}

void SessionHub::send_entry(const std::string& session, const TraceEntry& e) {
    ordered_json m;
    m["type"] = e.kind;
    m["session"] = session;
    m["t"] = round_micro(e.t);
    m["payload"] = e.payload;
    send_(m.dump());
}

// ── Inbound ─────────────────────────────────────────────────────

void SessionHub::handle_line(const std::string& line, double now) {
    json msg;
    try {
        msg = json::parse(line);
    } catch (const json::parse_error& e) {
        send_error("", error_code::kBadJson, e.what());
        return;
    }
    if (!msg.is_object() || !msg.contains("type") || !msg.at("type").is_string()) {
        send_error("", error_code::kBadMessage, "message needs a string 'type'");
        return;
    }
    if (!msg.contains("session") || !msg.at("session").is_string()) {
        send_error("", error_code::kBadMessage, "message needs a string 'session'");
        return;
    }
    const auto type = msg.at("type").get<std::string>();
    const auto id = msg.at("session").get<std::string>();
    const json payload = msg.value("payload", json::object());
    if (!payload.is_object()) {
        send_error(id, error_code::kBadMessage, "'payload' must be an object");
        return;
    }

    poll(now);
    if (type == "session.start") {
        start_session(id, payload, now);
        return;
    }
    auto it = sessions_.find(id);
    if (type != "user.speech" && type != "session.end") {
        send_error(id, error_code::kUnknownType, "unknown message type '" + type + "'");
        return;
    }
    if (it == sessions_.end()) {
        send_error(id, error_code::kUnknownSession, "no session '" + id + "'");
        return;
    }
    if (type == "session.end") {
        end_session(id, now);
    } else {
        user_speech(*it->second, payload, now);
    }
}

void SessionHub::start_session(const std::string& id, const json& payload, double now) {
    if (!valid_session_id(id)) {
        send_error(id, error_code::kBadMessage, "session ids are 1-64 characters of [A-Za-z0-9_.-]");
        return;
    }
    if (sessions_.count(id) != 0) {
        send_error(id, error_code::kSessionExists, "session '" + id + "' already started");
        return;
    }
    const auto version = payload.value("protocol", json(kProtocolVersion));
    if (!version.is_number_integer() || version.get<int>() != kProtocolVersion) {
        send_error(id, error_code::kProtocol,
                   "unsupported protocol version (server speaks " +
                       std::to_string(kProtocolVersion) + ")");
        return;
    }

    SessionConfig cfg = options_.base;
    std::string opening;
    try {
        if (payload.contains("config")) apply_config_json(cfg, payload.at("config"), "/payload/config");
        if (payload.contains("opening")) {
            if (!payload.at("opening").is_string()) {
                throw SchemaError("/payload/opening", "expected a string");
            }
            opening = payload.at("opening").get<std::string>();
        }
        cfg.clock = ClockMode::Wall;
        if (cfg.classifier == ClassifierChoice::Oracle) {
            throw InvalidInput("the oracle classifier is only available to scenario replays");
        }
        cfg.validate();
    } catch (const InvalidInput& e) {
        send_error(id, error_code::kBadConfig, e.what());
        return;
    }

    auto s = std::make_unique<Session>();
    s->id = id;
    s->origin = now;
    s->engine = std::make_unique<SessionEngine>(cfg, make_planner(cfg));
    s->classifier = make_classifier(cfg);
    s->engine->trace().set_listener(
        [this, id](const TraceEntry& e) { send_entry(id, e); });

    ordered_json ack;
    ack["type"] = "session.started";
    ack["session"] = id;
    ack["payload"] = {{"protocol", kProtocolVersion}, {"config", config_to_json(cfg)}};
    send_(ack.dump());

    Session& ref = *s;
    sessions_.emplace(id, std::move(s));
    if (!normalize_whitespace(opening).empty()) {
        try {
            ref.engine->start_robot_turn(0.0, opening);
        } catch (const std::exception& e) {
            send_error(id, error_code::kBadConfig, e.what());
        }
    }
}

void SessionHub::user_speech(Session& s, const json& payload, double now) {
    if (!payload.contains("text") || !payload.at("text").is_string()) {
        send_error(s.id, error_code::kBadMessage, "user.speech needs a string 'text'");
        return;
    }
    bool is_final = true;
    if (payload.contains("final")) {
        if (!payload.at("final").is_boolean()) {
            send_error(s.id, error_code::kBadMessage, "'final' must be true or false");
            return;
        }
        is_final = payload.at("final").get<bool>();
    }
    const double t = now - s.origin;
    try {
        auto ticket = s.engine->on_user_speech(t, {payload.at("text").get<std::string>(), is_final});
        if (ticket) dispatch(s, *ticket, now);
    } catch (const std::exception& e) {
        s.engine->terminate(t, e.what());
        send_error(s.id, error_code::kSessionFailed, e.what());
    }
}

void SessionHub::dispatch(Session& s, const ClassificationTicket& ticket, double now) {
    const double t = now - s.origin;
    if (s.engine->config().classifier != ClassifierChoice::External) {
        s.engine->on_classifier_result(t, ticket.overlap_id, classify(ticket.request, *s.classifier));
        return;
    }
    auto classifier = s.classifier;
    auto request = ticket.request;
    Inflight f;
    f.overlap_id = ticket.overlap_id;
    f.deadline = now + s.engine->config().classifier_timeout_s;
    f.result = std::async(std::launch::async, [classifier, request] {
        try {
            return classify(request, *classifier);
        } catch (const std::exception& e) {
            return Outcome<ClassifierResult>(Failure{"classifier", e.what()});
        }
    });
    s.inflight.push_back(std::move(f));
}

void SessionHub::end_session(const std::string& id, double now) {
    auto it = sessions_.find(id);
    Session& s = *it->second;
    poll_session(s, now);
    for (auto& f : s.inflight) abandoned_.push_back(std::move(f.result));
    s.inflight.clear();
    flush_trace(s);
    s.engine->trace().set_listener({});
    sessions_.erase(it);

    ordered_json m;
    m["type"] = "session.ended";
    m["session"] = id;
    m["payload"] = json::object();
    send_(m.dump());
}

// ── Time ────────────────────────────────────────────────────────

void SessionHub::poll(double now) {
    for (auto& [id, s] : sessions_) poll_session(*s, now);
    abandoned_.erase(std::remove_if(abandoned_.begin(), abandoned_.end(), ready),
                     abandoned_.end());
}

void SessionHub::poll_session(Session& s, double now) {
    const double t = now - s.origin;
    try {
        // Finished or expired classifications apply in the order they were
        // requested; the engine catches up on words before each one.
        for (auto it = s.inflight.begin(); it != s.inflight.end();) {
            if (ready(it->result)) {
                auto result = it->result.get();
                s.engine->on_classifier_result(t, it->overlap_id, result);
                it = s.inflight.erase(it);
            } else if (now >= it->deadline) {
                s.engine->on_classifier_result(
                    t, it->overlap_id,
                    Failure{"classifier", "timed out after " +
                                              format_seconds(s.engine->config().classifier_timeout_s) +
                                              " s"});
                abandoned_.push_back(std::move(it->result));
                it = s.inflight.erase(it);
            } else {
                ++it;
            }
        }
        s.engine->tick(t);
    } catch (const std::exception& e) {
        s.engine->terminate(t, e.what());
        send_error(s.id, error_code::kSessionFailed, e.what());
    }
}

std::optional<double> SessionHub::next_wakeup(double now) const {
    std::optional<double> out;
    auto take = [&](double t) { out = out ? std::min(*out, t) : t; };
    for (const auto& [id, s] : sessions_) {
        if (auto due = s->engine->next_due()) take(s->origin + *due);
        for (const auto& f : s->inflight) take(std::min(f.deadline, now + kInflightPollS));
    }
    return out;
}

void SessionHub::close_all(double now) {
    for (auto& [id, s] : sessions_) {
        poll_session(*s, now);
        s->engine->trace().set_listener({});
        for (auto& f : s->inflight) abandoned_.push_back(std::move(f.result));
        s->inflight.clear();
        flush_trace(*s);
    }
    sessions_.clear();
}

void SessionHub::flush_trace(const Session& s) const {
    if (options_.trace_dir.empty()) return;
    std::ofstream out(options_.trace_dir + "/" + s.id + ".ndjson", std::ios::trunc);
    out << s.engine->trace().to_ndjson();
}

}  // namespace bargein::gateway
