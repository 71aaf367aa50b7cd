#pragma once

#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bargein/config.hpp"
#include "bargein/session_engine.hpp"

namespace bargein::gateway {

inline constexpr int kProtocolVersion = 1;

struct GatewayOptions {
    /// Defaults for every session; session.start may override any field.
    SessionConfig base;
    /// When set, each session's trace is written to <dir>/<session>.ndjson
    /// on session.end or when the connection drops.
    std::string trace_dir;
};

/// Wire error codes.
namespace error_code {
inline constexpr const char* kBadJson = "bad_json";
inline constexpr const char* kBadMessage = "bad_message";
inline constexpr const char* kUnknownType = "unknown_type";
inline constexpr const char* kUnknownSession = "unknown_session";
inline constexpr const char* kSessionExists = "session_exists";
inline constexpr const char* kBadConfig = "bad_config";
inline constexpr const char* kProtocol = "protocol_version";
inline constexpr const char* kSessionFailed = "session_failed";
}  // namespace error_code

/// The sessions of one client connection.
///
/// The hub owns no clock and no socket. The transport feeds it inbound lines
/// and the current time (seconds on any monotone clock), calls poll() at
/// least by next_wakeup(), and receives outbound lines through `send`.
/// Every engine trace entry is mirrored to the client as one line, in trace
/// order. Not thread-safe; drive it from one loop.
class SessionHub {
public:
    using Send = std::function<void(const std::string& line)>;

    SessionHub(GatewayOptions options, Send send);
    ~SessionHub();

    SessionHub(const SessionHub&) = delete;
    SessionHub& operator=(const SessionHub&) = delete;

    void handle_line(const std::string& line, double now);

    /// Advances every session to `now` and applies finished classifications.
    void poll(double now);

    /// Latest time by which poll() must run again, if anything is scheduled.
    std::optional<double> next_wakeup(double now) const;

    /// Transport lost: flushes traces and drops every session.
    void close_all(double now);

    std::size_t session_count() const { return sessions_.size(); }

private:
    struct Inflight {
        std::uint64_t overlap_id = 0;
        double deadline = 0.0;
        std::future<Outcome<ClassifierResult>> result;
    };

    struct Session {
        std::string id;
        double origin = 0.0;  // hub time at session.start
        std::unique_ptr<SessionEngine> engine;
        std::shared_ptr<IntentClassifier> classifier;
        std::vector<Inflight> inflight;
    };

    void start_session(const std::string& id, const nlohmann::json& payload, double now);
    void end_session(const std::string& id, double now);
    void user_speech(Session& s, const nlohmann::json& payload, double now);
    void dispatch(Session& s, const ClassificationTicket& ticket, double now);
    void poll_session(Session& s, double now);
    void flush_trace(const Session& s) const;
    void send_error(const std::string& session, const std::string& code,
                    const std::string& message);
    void send_entry(const std::string& session, const TraceEntry& e);

    GatewayOptions options_;
    Send send_;
    std::map<std::string, std::unique_ptr<Session>> sessions_;
    // Timed-out classifier calls still running; reaped once they finish.
    std::vector<std::future<Outcome<ClassifierResult>>> abandoned_;
};

/// Session ids are 1-64 characters of [A-Za-z0-9_.-].
bool valid_session_id(const std::string& id);

}  // namespace bargein::gateway
