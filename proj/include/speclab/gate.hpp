#pragma once

// Vision-relevance gating. Each outer step scores how strongly the current
// state attends to the vision tokens; above the threshold the drafter is
// skipped entirely and the target decodes one token, below it the usual
// draft-then-verify step runs. In greedy mode the gate never changes the
// output, only the cost profile.

#include "speclab/core.hpp"
#include "speclab/drafters.hpp"
#include "speclab/model.hpp"
#include "speclab/verify.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace speclab {

enum class RelevanceSource { ModelAttention, TracePlayback };

struct GateConfig {
    double tau = 0.35;
    int draft_k = 0;  // > 0 overrides the model-linear draft length
    RelevanceSource source = RelevanceSource::ModelAttention;
};

inline double relevance_score(const std::vector<double>& attention, const SpanRange& vision_span) {
    return max_vision_attention(attention, vision_span);
}

// Strict inequality: a score exactly at the threshold is not vision-related
// and still takes the speculative branch.
inline bool vision_indicator(double score, double tau) {
    return score > tau;
}

struct CostModel {
    double target_call_cost = 1.0;
    double per_node_cost = 0.02;
    double draft_call_cost = 0.1;
};

struct DecodeLimits {
    int max_new_tokens = 1024;
    TokenId eos_token = -1;  // -1: never stop early
};

struct DecodeResult {
    TokenSequence output;
    std::vector<StepRecord> steps;
    std::int64_t wall_nanos = 0;
    double modeled_cost = 0.0;
    int draft_invocations = 0;
};

// One decoding session: target model, optional drafter (none = plain
// autoregressive baseline), optional gate, its own RNG stream. step() runs
// one outer loop iteration and commits at least one token.
class DecodeSession {
  public:
    DecodeSession(const TargetModel& target, Drafter* drafter, VerifyMode mode,
                  std::optional<GateConfig> gate, const std::vector<double>* relevance_trace,
                  CostModel cost, DecodeLimits limits, Rng rng, SequenceState initial);

    bool done() const;

    // cost_share divides the fixed per-call target cost across sequences
    // sharing one batched call; 1 for unbatched runs.
    StepRecord step(int cost_share = 1);

    const SequenceState& state() const { return state_; }
    const TokenSequence& output() const { return state_.generated; }
    const std::vector<StepRecord>& steps() const { return steps_; }
    int draft_invocations() const { return draft_invocations_; }
    double modeled_cost() const { return modeled_cost_; }
    std::int64_t wall_nanos() const { return wall_nanos_; }

    DecodeResult take_result();

  private:
    std::optional<double> current_relevance() const;
    int commit(std::span<const TokenId> tokens);

    const TargetModel* target_;
    Drafter* drafter_;
    VerifyMode mode_;
    std::optional<GateConfig> gate_;
    const std::vector<double>* trace_;
    CostModel cost_;
    DecodeLimits limits_;
    Rng rng_;
    SequenceState state_;
    std::vector<StepRecord> steps_;
    bool eos_seen_ = false;
    int draft_invocations_ = 0;
    double modeled_cost_ = 0.0;
    std::int64_t wall_nanos_ = 0;
};

// Runs a session to completion.
DecodeResult gated_decode(const TargetModel& target, Drafter* drafter, VerifyMode mode,
                          std::optional<GateConfig> gate, const std::vector<double>* relevance_trace,
                          CostModel cost, DecodeLimits limits, Rng rng, SequenceState initial);

}  // namespace speclab
