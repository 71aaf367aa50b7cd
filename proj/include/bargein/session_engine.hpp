#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "bargein/config.hpp"
#include "bargein/core_types.hpp"
#include "bargein/intent_classifier.hpp"
#include "bargein/overlap_gate.hpp"
#include "bargein/response_planner.hpp"
#include "bargein/strategy_dispatcher.hpp"
#include "bargein/trace.hpp"

namespace bargein {

enum class SessionState { Idle, RobotSpeaking, AwaitingClassification, ExecutingActions, AwaitingUser };

std::string_view to_string(SessionState s);

/// Why the robot is saying what it is saying.
enum class SegmentRole { Turn, Response, Resume, Ack, Clarification, WrapUp };

std::string_view to_string(SegmentRole r);

/// A user transcript arriving from the recognizer.
struct UserSpeech {
    std::string text;
    bool is_final = true;
};

/// Handed to the driver when an overlap needs intent classification. The
/// driver runs the classifier (synchronously or not) and reports back via
/// SessionEngine::on_classifier_result with the same overlap id.
struct ClassificationTicket {
    std::uint64_t overlap_id = 0;
    ClassifierRequest request;
};

/// Event-driven interruption-handling state machine for one session.
///
/// The engine owns no clock. Every entry point takes the current session time
/// in seconds; the driver guarantees it never decreases. Before handling an
/// event the engine catches up on the robot's word schedule, so a virtual
/// clock that jumps ahead still yields every intermediate word in order.
///
/// Interruption flow: an overlap heard while the robot speaks goes through the
/// gate (wakeword, then end-of-turn rule). Overlaps needing classification are
/// returned as tickets while the robot keeps talking; when the result arrives
/// the decision is taken against the robot's position at that moment.
///
/// All state transitions happen inside these calls; a session is not
/// thread-safe and must be driven from one loop.
class SessionEngine {
public:
    SessionEngine(SessionConfig cfg, std::shared_ptr<ResponsePlanner> planner);

    SessionState state() const;
    double now() const { return now_; }

    /// Starts a new logical robot turn. Requires Idle or AwaitingUser.
    void start_robot_turn(double now, std::string_view text);

    /// Routes a user transcript. Returns a ticket when classification is
    /// needed. Non-final transcripts are recorded and otherwise ignored.
    std::optional<ClassificationTicket> on_user_speech(double now, const UserSpeech& speech);

    /// Applies a classification (or its failure) for a pending overlap.
    void on_classifier_result(double now, std::uint64_t overlap_id,
                              const Outcome<ClassifierResult>& result);

    /// Emits due word events and completes finished utterances.
    void tick(double now);

    /// Time of the next scheduled word onset or utterance end, if any.
    std::optional<double> next_due() const;

    /// No speech in progress, nothing queued, no classification pending.
    bool quiescent() const;

    bool has_pending_classification() const { return !pending_.empty(); }

    /// Records a fatal error and stops processing further events.
    void terminate(double now, const std::string& message);
    bool terminated() const { return terminated_; }

    const SessionTrace& trace() const { return trace_; }
    SessionTrace& trace() { return trace_; }
    const DialogueHistory& history() const { return history_; }
    const SessionConfig& config() const { return cfg_; }

private:
    struct Segment {
        PlannedUtterance plan;
        SegmentRole role = SegmentRole::Turn;
        std::uint64_t id = 0;            // wire turn_id, one per utterance
        std::uint64_t logical_turn = 0;  // survives resumes and acknowledgements
        double started_at_s = 0.0;
        double turn_origin_s = 0.0;
        std::size_t next_word = 0;
        std::optional<std::uint64_t> overlap_id;  // decision that produced it
    };

    struct QueuedAction {
        RobotAction action;
        std::optional<std::uint64_t> overlap_id;
        bool new_turn = false;  // starts a new logical turn when executed
        std::uint64_t logical_turn = 0;
        double turn_origin_s = 0.0;
    };

    struct PendingOverlap {
        OverlapEvent overlap;
        std::uint64_t logical_turn = 0;
        double turn_origin_s = 0.0;
        double heard_at_s = 0.0;
    };

    void advance(double now);
    void emit_due_words(double now);
    void begin_segment(double t, PlannedUtterance plan, SegmentRole role,
                       std::uint64_t logical_turn, double turn_origin_s,
                       std::optional<std::uint64_t> overlap_id);
    /// Moves the current segment into history. `spoken` words are kept when
    /// the utterance was cut short.
    void finalize_segment(double t, bool complete, std::size_t spoken);
    void flush_deferred_users();
    void run_queue(double t);
    double queued_speech_s() const;
    std::string queued_text() const;

    void handle_overlap(double t, const std::string& text);
    void handle_user_turn(double t, const std::string& text);
    std::optional<ClassificationTicket> gate_overlap(double t, std::uint64_t overlap_id,
                                                     const OverlapEvent& overlap);
    void apply_decision(double t, std::uint64_t overlap_id, HandlingDecision decision,
                        IntentLabel label, const std::string& overlap_text,
                        ordered_json decision_payload);
    void apply_degraded(double t, std::uint64_t overlap_id, HandlingDecision decision,
                        const PendingOverlap& pending, ordered_json decision_payload);
    void start_response_turn(double t, std::optional<std::uint64_t> overlap_id,
                             const std::string& text, SegmentRole role);
    void record(double t, std::string kind, ordered_json payload);

    SessionConfig cfg_;
    std::shared_ptr<ResponsePlanner> planner_;
    AckPicker acks_;
    SessionTrace trace_;
    DialogueHistory history_;

    double now_ = 0.0;
    bool started_ = false;
    bool terminated_ = false;
    std::optional<Segment> current_;
    std::deque<QueuedAction> queue_;
    std::map<std::uint64_t, PendingOverlap> pending_;
    std::vector<std::pair<double, std::string>> deferred_users_;

    std::uint64_t next_segment_id_ = 1;
    std::uint64_t next_logical_turn_ = 1;
    std::uint64_t next_overlap_id_ = 1;
};

ordered_json action_to_json(const RobotAction& a);

}  // namespace bargein
