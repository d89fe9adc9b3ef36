#include "speclab/gate.hpp"

#include <chrono>

namespace speclab {

namespace {
std::int64_t now_nanos() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}
}  // namespace

DecodeSession::DecodeSession(const TargetModel& target, Drafter* drafter, VerifyMode mode,
                             std::optional<GateConfig> gate, const std::vector<double>* relevance_trace,
                             CostModel cost, DecodeLimits limits, Rng rng, SequenceState initial)
    : target_(&target),
      drafter_(drafter),
      mode_(mode),
      gate_(gate),
      trace_(relevance_trace),
      cost_(cost),
      limits_(limits),
      rng_(rng),
      state_(std::move(initial)) {
    if (limits_.max_new_tokens < 1) throw std::invalid_argument("max_new_tokens must be >= 1");
    if (!state_.generated.empty()) throw std::invalid_argument("session must start with no generated tokens");
    if (drafter_) drafter_->reset(state_);
}

bool DecodeSession::done() const {
    return eos_seen_ || static_cast<int>(state_.generated.size()) >= limits_.max_new_tokens;
}

std::optional<double> DecodeSession::current_relevance() const {
    const RelevanceSource source = gate_ ? gate_->source : RelevanceSource::ModelAttention;
    if (source == RelevanceSource::TracePlayback) {
        if (!trace_) return 0.0;
        const std::size_t i = static_cast<std::size_t>(state_.step_index);
        return i < trace_->size() ? (*trace_)[i] : 0.0;
    }
    if (state_.prompt.empty()) return std::nullopt;
    return relevance_score(target_->attention_row(state_), state_.vision_span);
}

int DecodeSession::commit(std::span<const TokenId> tokens) {
    int appended = 0;
    for (TokenId t : tokens) {
        if (static_cast<int>(state_.generated.size()) >= limits_.max_new_tokens) break;
        state_.generated.push_back(t);
        ++appended;
        if (limits_.eos_token >= 0 && t == limits_.eos_token) {
            eos_seen_ = true;
            break;
        }
    }
    return appended;
}

StepRecord DecodeSession::step(int cost_share) {
    if (done()) throw std::logic_error("step() on a finished session");
    if (cost_share < 1) cost_share = 1;
    const std::int64_t t0 = now_nanos();

    StepRecord rec;
    rec.step_index = state_.step_index;
    rec.relevance_score = current_relevance();

    const bool fire = gate_ && rec.relevance_score && vision_indicator(*rec.relevance_score, gate_->tau);

    if (fire || !drafter_) {
        // Single target step: either the gate disabled drafting or this is
        // the plain autoregressive baseline.
        const TokenId tok = ar_step(*target_, state_, mode_, rng_);
        const TokenId committed[1] = {tok};
        commit(committed);
        if (drafter_) drafter_->commit(committed);
        rec.mode = fire ? StepMode::GreedyGate : StepMode::Speculative;
        rec.gate_fired = fire;
        rec.accepted_count = 0;
        rec.draft_cost_units = 0.0;
        rec.target_cost_units = cost_.target_call_cost / cost_share + cost_.per_node_cost;
    } else {
        ++draft_invocations_;
        DraftProposal proposal = drafter_->propose(state_, rng_);
        rec.mode = StepMode::Speculative;
        rec.draft_cost_units = cost_.draft_call_cost;
        if (proposal.empty()) {
            // No draft available: degrade to one plain step, still logged as
            // a speculative step that accepted nothing.
            const TokenId tok = ar_step(*target_, state_, mode_, rng_);
            const TokenId committed[1] = {tok};
            commit(committed);
            drafter_->commit(committed);
            rec.accepted_count = 0;
            rec.target_cost_units = cost_.target_call_cost / cost_share + cost_.per_node_cost;
        } else {
            if (!validate_proposal(proposal, target_->vocab_size())) {
                throw InvariantError("drafter emitted an invalid proposal");
            }
            const TokenId anchor =
                state_.context_size() > 0 ? state_.context_token(state_.context_size() - 1) : -1;
            const VerificationOutcome outcome = verify_proposal(*target_, state_, proposal, mode_, rng_);

            TokenSequence to_commit = outcome.accepted_tokens;
            to_commit.push_back(outcome.correction_token);
            const int appended = commit(to_commit);
            drafter_->observe_outcome(proposal, outcome, anchor);
            drafter_->commit({to_commit.data(), static_cast<std::size_t>(appended)});

            rec.accepted_count = outcome.accepted_count;
            rec.target_cost_units = cost_.target_call_cost / cost_share +
                                    cost_.per_node_cost * outcome.target_nodes_evaluated;
        }
    }

    state_.step_index += 1;
    rec.wall_nanos = now_nanos() - t0;
    wall_nanos_ += rec.wall_nanos;
    modeled_cost_ += rec.draft_cost_units + rec.target_cost_units;
    steps_.push_back(rec);
    return rec;
}

DecodeResult DecodeSession::take_result() {
    DecodeResult r;
    r.output = state_.generated;
    r.steps = std::move(steps_);
    r.wall_nanos = wall_nanos_;
    r.modeled_cost = modeled_cost_;
    r.draft_invocations = draft_invocations_;
    return r;
}

DecodeResult gated_decode(const TargetModel& target, Drafter* drafter, VerifyMode mode,
                          std::optional<GateConfig> gate, const std::vector<double>* relevance_trace,
                          CostModel cost, DecodeLimits limits, Rng rng, SequenceState initial) {
    DecodeSession session(target, drafter, mode, gate, relevance_trace, cost, limits, rng,
                          std::move(initial));
    while (!session.done()) session.step();
    return session.take_result();
}

}  // namespace speclab
