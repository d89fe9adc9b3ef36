#pragma once

// Deterministic stand-ins for the target and draft models. Rows are pure
// functions of (seed, inputs): the same state always yields the same
// distribution and the same mock cross-attention row, which is what makes
// every experiment in the harness replayable.

#include "speclab/core.hpp"
#include "speclab/rng.hpp"

#include <cstdint>
#include <vector>

namespace speclab {

class TargetModel {
  public:
    virtual ~TargetModel() = default;
    virtual int vocab_size() const = 0;
    virtual Distribution next(const SequenceState& state) const = 0;
    // Attention over prompt positions; sums to 1. Restricting it to the
    // vision span gives the per-vision-token weights the gate consumes.
    virtual std::vector<double> attention_row(const SequenceState& state) const = 0;
};

struct TableModelConfig {
    std::uint64_t seed = 1234;
    int vocab_size = 64;
    int context_order = 3;
    double vision_influence = 0.5;
};

// Seeded logit table keyed by (hash of the last-k context tokens, hash of
// the vision tokens). No weights, no state; everything derives from the seed.
class TableTargetModel final : public TargetModel {
  public:
    explicit TableTargetModel(TableModelConfig cfg);

    int vocab_size() const override { return cfg_.vocab_size; }
    const TableModelConfig& config() const { return cfg_; }

    Distribution next(const SequenceState& state) const override;
    std::vector<double> attention_row(const SequenceState& state) const override;

  private:
    std::uint64_t context_hash(const SequenceState& state) const;
    std::uint64_t vision_hash(const SequenceState& state) const;
    void check_tokens(const SequenceState& state) const;

    TableModelConfig cfg_;
};

struct DraftModelConfig {
    double epsilon = 0.1;
    std::uint64_t noise_seed = 7;
    // Noise applied instead of epsilon on steps whose vision relevance is at
    // least epsilon_vision_threshold. Defaults keep the coupling inert.
    double epsilon_vision = -1.0;  // < 0 means "same as epsilon"
    double epsilon_vision_threshold = 0.35;

    double effective_epsilon_vision() const { return epsilon_vision < 0.0 ? epsilon : epsilon_vision; }
};

// Draft distribution = (1-eps) * target + eps * seeded perturbation.
// eps = 0 reproduces the target exactly; total variation from the target is
// bounded by eps for every state.
class SyntheticDraftModel {
  public:
    SyntheticDraftModel(const TableTargetModel& base, DraftModelConfig cfg);

    int vocab_size() const { return base_.vocab_size(); }
    const DraftModelConfig& config() const { return cfg_; }
    const TableTargetModel& base() const { return base_; }

    Distribution next(const SequenceState& state) const;
    double epsilon_for(const SequenceState& state) const;

  private:
    const TableTargetModel& base_;
    DraftModelConfig cfg_;
};

// Highest-probability token; ties break to the lowest token id.
TokenId argmax_token(const Distribution& d);

// Inverse-CDF draw from a seeded stream.
TokenId sample_token(const Distribution& d, Rng& rng);

// Logit-space temperature: p^(1/t) renormalized; t == 0 is a point mass at
// the argmax, t == 1 returns the input unchanged.
Distribution apply_temperature(const Distribution& d, double temperature);

// Max attention weight over the vision span; 0 when the span is empty.
double max_vision_attention(const std::vector<double>& attention, const SpanRange& vision_span);

}  // namespace speclab
