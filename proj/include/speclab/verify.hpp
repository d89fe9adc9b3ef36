#pragma once

// Lossless verification of draft proposals against the target model.
// Greedy mode accepts exactly the target's argmax path; sampling mode uses
// the min(1, p/q) rejection rule with residual renormalization, so committed
// tokens follow the target distribution no matter how bad the draft is.

#include "speclab/core.hpp"
#include "speclab/model.hpp"
#include "speclab/rng.hpp"

namespace speclab {

struct VerifyMode {
    bool sampling = false;
    double temperature = 0.0;

    static VerifyMode greedy() { return {false, 0.0}; }
    static VerifyMode sampling_at(double t) { return {true, t}; }

    // Sampling at temperature 0 is argmax by definition.
    bool greedy_like() const { return !sampling || temperature == 0.0; }
};

VerificationOutcome verify_linear(const TargetModel& target, const SequenceState& state,
                                  const DraftProposal& proposal, VerifyMode mode, Rng& rng);

VerificationOutcome verify_tree(const TargetModel& target, const SequenceState& state,
                                const DraftProposal& proposal, VerifyMode mode, Rng& rng);

// Dispatches on proposal structure; an empty proposal yields a plain step.
VerificationOutcome verify_proposal(const TargetModel& target, const SequenceState& state,
                                    const DraftProposal& proposal, VerifyMode mode, Rng& rng);

// One token straight from the target; the reference autoregressive step.
TokenId ar_step(const TargetModel& target, const SequenceState& state, VerifyMode mode, Rng& rng);

}  // namespace speclab
