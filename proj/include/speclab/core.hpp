#pragma once

// Shared domain types. Values are plain data and immutable once built;
// they can be copied freely across threads.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace speclab {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// Thrown when a run detects a broken internal invariant (CLI exit code 3).
class InvariantError : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

// Half-open [begin, end) index range into a prompt.
struct SpanRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return begin >= end; }
    bool operator==(const SpanRange&) const = default;
};

// Prompt + everything committed so far. vision_span marks the contiguous
// block of prompt positions holding vision tokens (may be empty).
struct SequenceState {
    TokenSequence prompt;
    TokenSequence generated;
    SpanRange vision_span;
    int step_index = 0;

    std::size_t context_size() const { return prompt.size() + generated.size(); }

    TokenId context_token(std::size_t i) const {
        return i < prompt.size() ? prompt[i] : generated[i - prompt.size()];
    }

    // Last n context tokens (fewer if the context is shorter).
    TokenSequence context_tail(std::size_t n) const {
        const std::size_t total = context_size();
        const std::size_t take = n < total ? n : total;
        TokenSequence out;
        out.reserve(take);
        for (std::size_t i = total - take; i < total; ++i) out.push_back(context_token(i));
        return out;
    }

    TokenSequence context() const {
        TokenSequence out = prompt;
        out.insert(out.end(), generated.begin(), generated.end());
        return out;
    }

    bool valid_vision_span() const { return vision_span.begin <= vision_span.end && vision_span.end <= prompt.size(); }

    bool operator==(const SequenceState&) const = default;
};

// Probability vector over the vocabulary.
struct Distribution {
    std::vector<double> p;

    std::size_t size() const { return p.size(); }
    double operator[](std::size_t i) const { return p[i]; }

    bool valid(double tol = 1e-9) const {
        double sum = 0.0;
        for (double v : p) {
            if (v < 0.0) return false;
            sum += v;
        }
        return sum > 1.0 - tol && sum < 1.0 + tol;
    }
};

double total_variation(const Distribution& a, const Distribution& b);

enum class ProposalStructure { Linear, Tree };

// Candidate tokens hanging off the current context. parent == -1 attaches a
// node to the context root; parents always precede children in the node list.
// `claim` is the full distribution the token was drawn from, attached only
// when the drafter genuinely sampled it; empty means the token was proposed
// deterministically (a point-mass claim) and draft_prob is 1 of that mass.
struct DraftNode {
    TokenId token = 0;
    std::int32_t parent = -1;
    double draft_prob = 1.0;
    std::vector<double> claim;
};

struct DraftProposal {
    ProposalStructure structure = ProposalStructure::Linear;
    std::vector<DraftNode> nodes;
    int max_depth = 0;

    bool empty() const { return nodes.empty(); }
    std::size_t size() const { return nodes.size(); }
};

DraftProposal make_linear_proposal(std::span<const TokenId> chain);

// Depth of the deepest node (0 for an empty proposal).
int proposal_depth(const DraftProposal& p);

// True iff structural invariants hold and all tokens are < vocab.
bool validate_proposal(const DraftProposal& p, int vocab_size);

// Per-step verification result. The correction token is always present:
// a step commits accepted_tokens followed by correction_token.
struct VerificationOutcome {
    TokenSequence accepted_tokens;
    TokenId correction_token = 0;
    int accepted_count = 0;
    int target_calls = 1;
    int target_nodes_evaluated = 1;
    // Proposal nodes not on the accepted path, as (parent context token or
    // accepted predecessor, rejected node index) edges; consumed by recycling.
    std::vector<std::int32_t> rejected_nodes;
};

enum class StepMode { Speculative, GreedyGate };

struct StepRecord {
    int step_index = 0;
    StepMode mode = StepMode::Speculative;
    int accepted_count = 0;
    std::optional<double> relevance_score;
    bool gate_fired = false;
    double draft_cost_units = 0.0;
    double target_cost_units = 0.0;
    std::int64_t wall_nanos = 0;
};

const char* step_mode_name(StepMode m);

}  // namespace speclab
