#include "bargein/session_engine.hpp"

#include <algorithm>

#include "bargein/speech_clock.hpp"

namespace bargein {

namespace {
// Scheduled times are sums of word durations; this absorbs their rounding
// when comparing against the driver's clock.
constexpr double kClockEpsilon = 1e-9;

SegmentRole role_for(const RobotAction& a) {
    if (auto* s = std::get_if<action::Speak>(&a)) {
        return s->resume_token_index ? SegmentRole::Resume : SegmentRole::Response;
    }
    if (std::holds_alternative<action::VerbalAck>(a)) return SegmentRole::Ack;
    if (std::holds_alternative<action::AnswerClarification>(a)) return SegmentRole::Clarification;
    return SegmentRole::WrapUp;
}
}  // namespace

std::string_view to_string(SessionState s) {
    switch (s) {
        case SessionState::Idle: return "idle";
        case SessionState::RobotSpeaking: return "robot_speaking";
        case SessionState::AwaitingClassification: return "awaiting_classification";
        case SessionState::ExecutingActions: return "executing_actions";
        case SessionState::AwaitingUser: return "awaiting_user";
    }
    return "unknown";
}

std::string_view to_string(SegmentRole r) {
    switch (r) {
        case SegmentRole::Turn: return "turn";
        case SegmentRole::Response: return "response";
        case SegmentRole::Resume: return "resume";
        case SegmentRole::Ack: return "ack";
        case SegmentRole::Clarification: return "clarification";
        case SegmentRole::WrapUp: return "wrap_up";
    }
    return "unknown";
}

ordered_json action_to_json(const RobotAction& a) {
    ordered_json j;
    j["type"] = action_kind(a);
    if (is_speech(a)) j["text"] = action_text(a);
    if (auto* s = std::get_if<action::Speak>(&a); s && s->resume_token_index) {
        j["resume_index"] = *s->resume_token_index;
    }
    return j;
}

SessionEngine::SessionEngine(SessionConfig cfg, std::shared_ptr<ResponsePlanner> planner)
    : cfg_(std::move(cfg)), planner_(std::move(planner)), acks_(cfg_.dispatch) {
    cfg_.validate();
    if (!planner_) planner_ = make_planner(cfg_);
}

SessionState SessionEngine::state() const {
    if (!pending_.empty()) return SessionState::AwaitingClassification;
    if (current_) {
        const bool plain = current_->role == SegmentRole::Turn ||
                           current_->role == SegmentRole::Response;
        return plain && queue_.empty() ? SessionState::RobotSpeaking
                                       : SessionState::ExecutingActions;
    }
    return started_ ? SessionState::AwaitingUser : SessionState::Idle;
}

bool SessionEngine::quiescent() const {
    return !current_ && queue_.empty() && pending_.empty();
}

std::optional<double> SessionEngine::next_due() const {
    if (!current_) return std::nullopt;
    const auto& seg = *current_;
    if (seg.next_word < seg.plan.size()) {
        return seg.started_at_s + seg.plan.tokens[seg.next_word].start_s;
    }
    return seg.started_at_s + seg.plan.total_duration_s;
}

void SessionEngine::record(double t, std::string kind, ordered_json payload) {
    if (!trace_.entries().empty()) {
        const double last = trace_.entries().back().t;
        if (t < last && last - t < 1e-6) t = last;
    }
    trace_.add(t, std::move(kind), std::move(payload));
}

// ── Clock ───────────────────────────────────────────────────────

void SessionEngine::tick(double now) { advance(now); }

void SessionEngine::advance(double now) {
    if (now + kClockEpsilon < now_) {
        throw ContractViolation("session clock moved backwards: " + format_seconds(now) +
                                " < " + format_seconds(now_));
    }
    now = std::max(now, now_);
    while (current_ && !terminated_) {
        emit_due_words(now);
        const double end = current_->started_at_s + current_->plan.total_duration_s;
        if (end > now + kClockEpsilon) break;
        const double t = std::min(end, now);
        finalize_segment(t, true, current_->plan.size());
        run_queue(t);
    }
    now_ = now;
}

void SessionEngine::emit_due_words(double now) {
    auto& seg = *current_;
    while (seg.next_word < seg.plan.size()) {
        const auto& tok = seg.plan.tokens[seg.next_word];
        const double onset = seg.started_at_s + tok.start_s;
        if (onset > now + kClockEpsilon) break;
        ordered_json p;
        p["turn_id"] = seg.id;
        p["index"] = tok.index;
        p["text"] = tok.text;
        record(std::min(onset, now), "robot.word", std::move(p));
        ++seg.next_word;
    }
}

// ── Segments and the action queue ───────────────────────────────

void SessionEngine::begin_segment(double t, PlannedUtterance plan, SegmentRole role,
                                  std::uint64_t logical_turn, double turn_origin_s,
                                  std::optional<std::uint64_t> overlap_id) {
    started_ = true;
    Segment seg;
    seg.plan = std::move(plan);
    seg.role = role;
    seg.id = next_segment_id_++;
    seg.logical_turn = logical_turn;
    seg.started_at_s = t;
    seg.turn_origin_s = turn_origin_s;
    seg.overlap_id = overlap_id;

    ordered_json p;
    p["turn_id"] = seg.id;
    p["role"] = to_string(role);
    p["logical_turn"] = logical_turn;
    p["full_text"] = seg.plan.full_text;
    p["n_words"] = seg.plan.size();
    p["duration_s"] = round_micro(seg.plan.total_duration_s);
    if (overlap_id) p["overlap_id"] = *overlap_id;
    record(t, "robot.plan", std::move(p));
    current_ = std::move(seg);
    emit_due_words(t);
}

void SessionEngine::finalize_segment(double t, bool complete, std::size_t spoken) {
    const Segment seg = std::move(*current_);
    current_.reset();
    std::string text = complete ? seg.plan.full_text : spoken_text(seg.plan, spoken);
    history_.push(Speaker::Robot, text, seg.started_at_s, complete);

    ordered_json p;
    p["turn_id"] = seg.id;
    if (!complete) {
        p["spoken_index"] = spoken;
        p["spoken_text"] = std::move(text);
    }
    record(t, complete ? "robot.done" : "robot.truncated", std::move(p));
    flush_deferred_users();
}

void SessionEngine::flush_deferred_users() {
    for (auto& [at, text] : deferred_users_) history_.push(Speaker::User, std::move(text), at);
    deferred_users_.clear();
}

double SessionEngine::queued_speech_s() const {
    const double word_s = std::max(60.0 / cfg_.rate.rate_wpm, cfg_.rate.floor_s);
    double total = 0.0;
    for (const auto& q : queue_) {
        if (is_speech(q.action)) total += word_s * static_cast<double>(count_words(action_text(q.action)));
    }
    return total;
}

std::string SessionEngine::queued_text() const {
    std::string out;
    for (const auto& q : queue_) {
        if (std::holds_alternative<action::Speak>(q.action)) {
            if (!out.empty()) out += ' ';
            out += action_text(q.action);
        }
    }
    return out;
}

void SessionEngine::run_queue(double t) {
    while (!current_ && !queue_.empty() && !terminated_) {
        QueuedAction q = std::move(queue_.front());
        queue_.pop_front();

        ordered_json p;
        if (q.overlap_id) p["overlap_id"] = *q.overlap_id;
        p["action"] = action_to_json(q.action);
        record(t, "robot.action", std::move(p));

        if (std::holds_alternative<action::Yield>(q.action)) {
            ordered_json y;
            if (q.overlap_id) y["overlap_id"] = *q.overlap_id;
            record(t, "robot.yield", std::move(y));
            continue;
        }
        if (!is_speech(q.action)) continue;

        std::uint64_t logical = q.logical_turn;
        double origin = q.turn_origin_s;
        if (q.new_turn) {
            logical = next_logical_turn_++;
            origin = t;
        }
        try {
            begin_segment(t, plan_utterance(action_text(q.action), cfg_.rate), role_for(q.action),
                          logical, origin, q.overlap_id);
        } catch (const InvalidInput& e) {
            ordered_json f;
            f["stage"] = "engine";
            f["message"] = e.what();
            record(t, "failure", std::move(f));
        }
    }
}

// ── Entry points ────────────────────────────────────────────────

void SessionEngine::start_robot_turn(double now, std::string_view text) {
    advance(now);
    if (terminated_) return;
    const auto s = state();
    if (s != SessionState::Idle && s != SessionState::AwaitingUser) {
        throw ContractViolation("start_robot_turn while " + std::string(to_string(s)));
    }
    auto plan = plan_utterance(text, cfg_.rate);
    begin_segment(now, std::move(plan), SegmentRole::Turn, next_logical_turn_++, now,
                  std::nullopt);
}

std::optional<ClassificationTicket> SessionEngine::on_user_speech(double now,
                                                                  const UserSpeech& speech) {
    advance(now);
    if (terminated_) return std::nullopt;
    const std::string text = normalize_whitespace(speech.text);
    if (!speech.is_final) {
        record(now, "user.partial", {{"text", text}});
        return std::nullopt;
    }
    if (text.empty()) {
        record(now, "user.ignored", {{"reason", "empty"}});
        return std::nullopt;
    }
    if (!current_) {
        handle_user_turn(now, text);
        advance(now);
        return std::nullopt;
    }

    const std::uint64_t id = next_overlap_id_++;
    const Segment& seg = *current_;
    // Timing thresholds are compared at microsecond resolution so that
    // boundary values do not depend on where the turn started.
    OverlapEvent overlap{text, round_micro(now - seg.turn_origin_s), count_words(text), true};

    ordered_json p;
    p["overlap_id"] = id;
    p["text"] = text;
    p["overlap"] = true;
    p["turn_id"] = seg.id;
    p["onset_s"] = overlap.onset_s;
    p["word_count"] = overlap.word_count;
    record(now, "user.speech", std::move(p));
    deferred_users_.emplace_back(now, text);

    auto ticket = gate_overlap(now, id, overlap);
    advance(now);
    return ticket;
}

void SessionEngine::handle_user_turn(double t, const std::string& text) {
    started_ = true;
    ordered_json p;
    p["text"] = text;
    p["overlap"] = false;
    record(t, "user.speech", std::move(p));
    history_.push(Speaker::User, text, t);
    if (!cfg_.auto_respond) return;

    auto reply = planner_->new_response(
        {PlannerKind::NewResponse, render_history(history_, cfg_.history_window), text, "", ""});
    if (!reply) {
        record(t, "failure", {{"stage", reply.failure().stage},
                              {"message", reply.failure().message}});
        return;
    }
    start_response_turn(t, std::nullopt, reply.value(), SegmentRole::Response);
}

std::optional<ClassificationTicket> SessionEngine::gate_overlap(double t, std::uint64_t id,
                                                                const OverlapEvent& overlap) {
    const Segment& seg = *current_;
    const double seg_elapsed = t - seg.started_at_s;

    if (seg.role == SegmentRole::WrapUp) {
        // The robot has already committed to yielding; only a wakeword cuts
        // the wrap-up short.
        if (!contains_wakeword(overlap.transcript, cfg_.wakewords)) {
            record(t, "engine.ignored", {{"overlap_id", id}, {"reason", "wrap_up"}});
            return std::nullopt;
        }
        ordered_json g;
        g["overlap_id"] = id;
        g["outcome"] = "wakeword_yield";
        g["during"] = "wrap_up";
        record(t, "engine.gate", std::move(g));
        ordered_json d;
        d["overlap_id"] = id;
        d["decision"] = to_string(HandlingDecision::YieldImmediately);
        d["via"] = "gate";
        apply_decision(t, id, HandlingDecision::YieldImmediately, IntentLabel::Disruptive,
                       overlap.transcript, std::move(d));
        return std::nullopt;
    }

    const double remaining =
        round_micro(remaining_duration(seg.plan, seg_elapsed) + queued_speech_s());
    const GateOutcome outcome = gate(overlap, remaining, cfg_.wakewords);

    ordered_json g;
    g["overlap_id"] = id;
    g["outcome"] = to_string(outcome);
    g["remaining_s"] = remaining;
    g["elapsed_s"] = overlap.onset_s;
    record(t, "engine.gate", std::move(g));

    if (std::holds_alternative<gate_outcome::NeedsClassification>(outcome)) {
        pending_[id] = PendingOverlap{overlap, seg.logical_turn, seg.turn_origin_s, t};
        const std::size_t spoken = estimated_spoken_index(seg.plan, seg_elapsed);
        std::string rest = remaining_text(seg.plan, spoken);
        const std::string queued = queued_text();
        if (!queued.empty()) rest += rest.empty() ? queued : " " + queued;

        ClassificationTicket ticket;
        ticket.overlap_id = id;
        ticket.request = ClassifierRequest{render_history(history_, cfg_.history_window),
                                           overlap.transcript, overlap.onset_s,
                                           spoken_text(seg.plan, spoken), std::move(rest)};
        record(t, "engine.classify", {{"overlap_id", id}});
        return ticket;
    }

    const auto decision = std::holds_alternative<gate_outcome::WakewordYield>(outcome)
                              ? HandlingDecision::YieldImmediately
                              : HandlingDecision::FinishUp;
    ordered_json d;
    d["overlap_id"] = id;
    d["decision"] = to_string(decision);
    d["via"] = "gate";
    apply_decision(t, id, decision, IntentLabel::Disruptive, overlap.transcript, std::move(d));
    return std::nullopt;
}

void SessionEngine::on_classifier_result(double now, std::uint64_t overlap_id,
                                         const Outcome<ClassifierResult>& result) {
    advance(now);
    if (terminated_) return;
    auto it = pending_.find(overlap_id);
    if (it == pending_.end()) {
        record(now, "engine.ignored",
               {{"overlap_id", overlap_id}, {"reason", "unknown_classification"}});
        return;
    }
    const PendingOverlap pending = std::move(it->second);
    pending_.erase(it);

    const double elapsed = round_micro(now - pending.turn_origin_s);
    HandlingDecision decision = HandlingDecision::YieldImmediately;
    IntentLabel label = IntentLabel::Disruptive;
    ordered_json d;
    d["overlap_id"] = overlap_id;

    if (result.ok()) {
        const auto& r = result.value();
        label = r.label;
        ordered_json p;
        p["overlap_id"] = overlap_id;
        p["label"] = to_string(r.label);
        p["source"] = to_string(r.source);
        p["latency_s"] = round_micro(r.latency_s);
        record(now, "engine.intent", std::move(p));
        if (cfg_.log_exchanges && r.exchange) {
            record(now, "engine.exchange", {{"overlap_id", overlap_id},
                                            {"request", r.exchange->request_body},
                                            {"response", r.exchange->response_body}});
        }
        decision = decide(label, pending.overlap.word_count, elapsed, cfg_.dispatch);
        d["decision"] = to_string(decision);
        d["label"] = to_string(label);
    } else {
        record(now, "failure", {{"overlap_id", overlap_id},
                                {"stage", result.failure().stage},
                                {"message", result.failure().message}});
        d["decision"] = to_string(decision);
        d["fallback"] = true;
    }
    d["word_count"] = pending.overlap.word_count;
    d["elapsed_s"] = elapsed;
    d["via"] = "classifier";

    const bool live = current_ && current_->logical_turn == pending.logical_turn &&
                      current_->role != SegmentRole::WrapUp;
    if (live) {
        apply_decision(now, overlap_id, decision, label, pending.overlap.transcript, std::move(d));
    } else {
        apply_degraded(now, overlap_id, decision, pending, std::move(d));
    }
    advance(now);
}

// ── Decisions ───────────────────────────────────────────────────

void SessionEngine::apply_decision(double t, std::uint64_t overlap_id, HandlingDecision decision,
                                   IntentLabel label, const std::string& overlap_text,
                                   ordered_json decision_payload) {
    record(t, "engine.decision", std::move(decision_payload));
    if (decision == HandlingDecision::FinishUp) return;

    const Segment seg = *current_;
    const double seg_elapsed = t - seg.started_at_s;
    const std::string queued = queued_text();
    finalize_segment(t, false, estimated_spoken_index(seg.plan, seg_elapsed));

    ExpandContext ctx;
    ctx.plan = &seg.plan;
    ctx.elapsed_s = seg_elapsed;
    ctx.label = label;
    ctx.overlap_text = overlap_text;
    ctx.history_rendered = render_history(history_, cfg_.history_window);
    ctx.queued_text = queued;
    Expansion ex = expand(decision, ctx, acks_, *planner_);

    if (ex.resume_index) {
        ordered_json r;
        r["overlap_id"] = overlap_id;
        r["turn_id"] = seg.id;
        r["spoken_index"] = ex.spoken_index;
        r["resume_index"] = *ex.resume_index;
        record(t, "engine.resume", std::move(r));
    }
    if (ex.failure) {
        ordered_json f;
        f["overlap_id"] = overlap_id;
        f["stage"] = ex.failure->stage;
        f["message"] = ex.failure->message;
        f["fallback"] = "yield";
        record(t, "failure", std::move(f));
    }

    const bool yields = std::any_of(ex.actions.begin(), ex.actions.end(), [](const auto& a) {
        return std::holds_alternative<action::Yield>(a);
    });
    if (yields) queue_.clear();

    std::vector<QueuedAction> next;
    bool after_yield = false;
    for (auto& a : ex.actions) {
        const bool is_yield = std::holds_alternative<action::Yield>(a);
        next.push_back(QueuedAction{std::move(a), overlap_id, after_yield && !is_yield,
                                    seg.logical_turn, seg.turn_origin_s});
        after_yield = after_yield || is_yield;
    }
    queue_.insert(queue_.begin(), std::make_move_iterator(next.begin()),
                  std::make_move_iterator(next.end()));
    run_queue(t);
}

void SessionEngine::apply_degraded(double t, std::uint64_t overlap_id, HandlingDecision decision,
                                   const PendingOverlap& pending, ordered_json decision_payload) {
    decision_payload["degraded"] = true;
    if (current_) {
        // The robot has moved on to another turn (or is wrapping up); the
        // late decision has nothing left to act on.
        decision_payload["superseded"] = true;
        record(t, "engine.decision", std::move(decision_payload));
        return;
    }
    record(t, "engine.decision", std::move(decision_payload));

    const std::string history = render_history(history_, cfg_.history_window);
    const std::string& trigger = pending.overlap.transcript;
    switch (decision) {
        case HandlingDecision::FinishUp:
        case HandlingDecision::Continue:
        case HandlingDecision::AckAndContinue:
            return;
        case HandlingDecision::ClarifyAndContinue: {
            auto answer = planner_->clarify_answer({PlannerKind::ClarifyAnswer, history, trigger, "", ""});
            if (!answer) break;
            start_response_turn(t, overlap_id, answer.value(), SegmentRole::Clarification);
            return;
        }
        case HandlingDecision::AckAndWrapUp:
        case HandlingDecision::YieldImmediately: {
            auto reply = planner_->new_response({PlannerKind::NewResponse, history, trigger, "", ""});
            if (!reply) break;
            start_response_turn(t, overlap_id, reply.value(), SegmentRole::Response);
            return;
        }
    }
    record(t, "failure", {{"overlap_id", overlap_id}, {"stage", "planner"},
                          {"message", "planner failed for late decision"}});
}

void SessionEngine::start_response_turn(double t, std::optional<std::uint64_t> overlap_id,
                                        const std::string& text, SegmentRole role) {
    RobotAction a = role == SegmentRole::Clarification
                        ? RobotAction{action::AnswerClarification{text}}
                        : RobotAction{action::Speak{text, std::nullopt}};
    queue_.push_back(QueuedAction{std::move(a), overlap_id, true, 0, t});
    run_queue(t);
}

void SessionEngine::terminate(double now, const std::string& message) {
    if (terminated_) return;
    record(std::max(now, now_), "failure",
           {{"stage", "engine"}, {"message", message}, {"fatal", true}});
    terminated_ = true;
    current_.reset();
    queue_.clear();
    pending_.clear();
}

}  // namespace bargein
