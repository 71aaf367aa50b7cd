#include "bargein/strategy_dispatcher.hpp"

#include "bargein/speech_clock.hpp"

namespace bargein {

void DispatchConfig::validate() const {
    if (backchannel_max_words < 1) throw InvalidInput("backchannel_max_words must be >= 1");
    if (!(aggressive_window_s > 0.0)) throw InvalidInput("aggressive_window_s must be positive");
    if (agreement_ack_lexicon.empty() || assistance_ack_lexicon.empty()) {
        throw InvalidInput("acknowledgement lexicons must not be empty");
    }
}

HandlingDecision decide(IntentLabel label, std::size_t word_count, double elapsed_s,
                        const DispatchConfig& cfg) {
    switch (label) {
        case IntentLabel::Agreement:
            return word_count <= cfg.backchannel_max_words ? HandlingDecision::Continue
                                                           : HandlingDecision::AckAndContinue;
        case IntentLabel::Assistance:
            return HandlingDecision::AckAndContinue;
        case IntentLabel::Clarification:
            return HandlingDecision::ClarifyAndContinue;
        case IntentLabel::Disruptive:
            return elapsed_s <= cfg.aggressive_window_s ? HandlingDecision::AckAndWrapUp
                                                        : HandlingDecision::YieldImmediately;
    }
    return HandlingDecision::YieldImmediately;
}

std::string AckPicker::pick(IntentLabel label) {
    const std::vector<std::string>* lexicon = nullptr;
    if (label == IntentLabel::Agreement) lexicon = &cfg_.agreement_ack_lexicon;
    if (label == IntentLabel::Assistance) lexicon = &cfg_.assistance_ack_lexicon;
    if (lexicon == nullptr) {
        throw ContractViolation("no acknowledgement lexicon for " +
                                std::string(to_string(label)));
    }
    const std::uint64_t n = counters_[label]++;
    return (*lexicon)[(cfg_.ack_seed + n) % lexicon->size()];
}

Expansion expand(HandlingDecision decision, const ExpandContext& ctx, AckPicker& acks,
                 ResponsePlanner& planner) {
    if (ctx.plan == nullptr) throw ContractViolation("expand needs the interrupted plan");
    const PlannedUtterance& plan = *ctx.plan;

    Expansion out;
    out.spoken_index = estimated_spoken_index(plan, ctx.elapsed_s);
    const std::size_t resume = resume_point(plan, ctx.elapsed_s);
    const std::string rest = remaining_text(plan, resume);

    auto push_resume = [&] {
        out.resume_index = resume;
        if (!rest.empty()) out.actions.push_back(action::Speak{rest, resume});
    };
    auto fail = [&](Failure f) {
        out.actions = {action::Yield{}};
        out.resume_index.reset();
        out.failure = std::move(f);
    };

    switch (decision) {
        case HandlingDecision::FinishUp:
            break;
        case HandlingDecision::Continue:
            push_resume();
            break;
        case HandlingDecision::AckAndContinue:
            out.actions.push_back(action::VerbalAck{acks.pick(ctx.label)});
            out.actions.push_back(action::Nod{});
            push_resume();
            break;
        case HandlingDecision::ClarifyAndContinue: {
            auto answer = planner.clarify_answer({PlannerKind::ClarifyAnswer,
                                                  ctx.history_rendered, ctx.overlap_text, rest,
                                                  plan.full_text});
            if (!answer) {
                fail(answer.failure());
                break;
            }
            out.actions.push_back(action::AnswerClarification{answer.value()});
            push_resume();
            break;
        }
        case HandlingDecision::AckAndWrapUp: {
            std::string remaining = rest;
            if (!ctx.queued_text.empty()) {
                remaining += remaining.empty() ? ctx.queued_text : " " + ctx.queued_text;
            }
            auto summary = planner.wrap_up(
                {PlannerKind::WrapUp, ctx.history_rendered, ctx.overlap_text, remaining, plan.full_text});
            if (!summary) {
                fail(summary.failure());
                break;
            }
            out.actions.push_back(action::WrapUpSummary{summary.value()});
            out.actions.push_back(action::Yield{});
            break;
        }
        case HandlingDecision::YieldImmediately: {
            auto reply = planner.new_response(
                {PlannerKind::NewResponse, ctx.history_rendered, ctx.overlap_text, rest, plan.full_text});
            if (!reply) {
                fail(reply.failure());
                break;
            }
            out.actions.push_back(action::Yield{});
            out.actions.push_back(action::Speak{reply.value(), std::nullopt});
            break;
        }
    }
    return out;
}

}  // namespace bargein
