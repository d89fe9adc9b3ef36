#include "speclab/verify.hpp"

#include <algorithm>
#include <cmath>

namespace speclab {

namespace {

// Residual after rejecting a token claimed from `claim` (or from a point
// mass on `token` when the claim is empty): normalize(max(p - q, 0)).
Distribution residual_after_reject(const Distribution& p, const std::vector<double>& claim, TokenId token) {
    Distribution r;
    r.p.resize(p.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = claim.empty() ? (static_cast<TokenId>(i) == token ? 1.0 : 0.0) : claim[i];
        r.p[i] = std::max(0.0, p.p[i] - q);
        sum += r.p[i];
    }
    if (sum <= 0.0) throw InvariantError("empty residual distribution after rejection");
    for (double& v : r.p) v /= sum;
    return r;
}

double claim_mass(const DraftNode& node, const Distribution& p) {
    (void)p;
    if (node.claim.empty()) return 1.0;  // deterministic proposal: point mass
    return node.claim[static_cast<std::size_t>(node.token)];
}

void require_valid(const TargetModel& target, const DraftProposal& proposal) {
    if (!validate_proposal(proposal, target.vocab_size())) {
        throw std::domain_error("invalid draft proposal");
    }
}

}  // namespace

VerificationOutcome verify_linear(const TargetModel& target, const SequenceState& state,
                                  const DraftProposal& proposal, VerifyMode mode, Rng& rng) {
    if (proposal.structure != ProposalStructure::Linear) {
        throw std::domain_error("verify_linear requires a linear proposal");
    }
    require_valid(target, proposal);

    VerificationOutcome out;
    out.target_calls = 1;
    out.target_nodes_evaluated = static_cast<int>(proposal.size()) + 1;

    SequenceState scratch = state;
    const bool greedy = mode.greedy_like();

    std::size_t i = 0;
    for (; i < proposal.size(); ++i) {
        const DraftNode& node = proposal.nodes[i];
        const Distribution base = target.next(scratch);
        if (greedy) {
            const TokenId am = argmax_token(base);
            if (am != node.token) {
                out.correction_token = am;
                break;
            }
        } else {
            const Distribution p = apply_temperature(base, mode.temperature);
            const double q = claim_mass(node, p);
            if (q <= 0.0) throw std::domain_error("draft token proposed with zero draft probability");
            const double accept = std::min(1.0, p.p[static_cast<std::size_t>(node.token)] / q);
            if (rng.next_unit() >= accept) {
                out.correction_token = sample_token(residual_after_reject(p, node.claim, node.token), rng);
                break;
            }
        }
        out.accepted_tokens.push_back(node.token);
        scratch.generated.push_back(node.token);
    }

    if (i == proposal.size()) {
        // Full acceptance: bonus token from the target at the next position.
        const Distribution base = target.next(scratch);
        if (greedy) {
            out.correction_token = argmax_token(base);
        } else {
            out.correction_token = sample_token(apply_temperature(base, mode.temperature), rng);
        }
    }

    out.accepted_count = static_cast<int>(out.accepted_tokens.size());
    for (std::size_t j = out.accepted_tokens.size(); j < proposal.size(); ++j) {
        out.rejected_nodes.push_back(static_cast<std::int32_t>(j));
    }
    return out;
}

VerificationOutcome verify_tree(const TargetModel& target, const SequenceState& state,
                                const DraftProposal& proposal, VerifyMode mode, Rng& rng) {
    require_valid(target, proposal);

    VerificationOutcome out;
    out.target_calls = 1;
    out.target_nodes_evaluated = static_cast<int>(proposal.size()) + 1;

    // Children in insertion order; index -1 is the context root.
    std::vector<std::vector<int>> kids(proposal.size());
    std::vector<int> root_children;
    for (std::size_t i = 0; i < proposal.size(); ++i) {
        const std::int32_t par = proposal.nodes[i].parent;
        if (par < 0) {
            root_children.push_back(static_cast<int>(i));
        } else {
            kids[static_cast<std::size_t>(par)].push_back(static_cast<int>(i));
        }
    }

    SequenceState scratch = state;
    const bool greedy = mode.greedy_like();
    std::vector<char> accepted(proposal.size(), 0);

    const std::vector<int>* level = &root_children;
    while (true) {
        const Distribution base = target.next(scratch);
        if (greedy) {
            const TokenId am = argmax_token(base);
            int match = -1;
            for (int c : *level) {
                if (proposal.nodes[static_cast<std::size_t>(c)].token == am) {
                    match = c;
                    break;
                }
            }
            if (match < 0) {
                out.correction_token = am;
                break;
            }
            accepted[static_cast<std::size_t>(match)] = 1;
            out.accepted_tokens.push_back(am);
            scratch.generated.push_back(am);
            level = &kids[static_cast<std::size_t>(match)];
        } else {
            Distribution residual = apply_temperature(base, mode.temperature);
            int chosen = -1;
            for (int c : *level) {
                const DraftNode& node = proposal.nodes[static_cast<std::size_t>(c)];
                const double q = claim_mass(node, residual);
                if (q <= 0.0) throw std::domain_error("draft token proposed with zero draft probability");
                const double accept = std::min(1.0, residual.p[static_cast<std::size_t>(node.token)] / q);
                if (rng.next_unit() < accept) {
                    chosen = c;
                    break;
                }
                residual = residual_after_reject(residual, node.claim, node.token);
            }
            if (chosen < 0) {
                out.correction_token = sample_token(residual, rng);
                break;
            }
            accepted[static_cast<std::size_t>(chosen)] = 1;
            out.accepted_tokens.push_back(proposal.nodes[static_cast<std::size_t>(chosen)].token);
            scratch.generated.push_back(out.accepted_tokens.back());
            level = &kids[static_cast<std::size_t>(chosen)];
        }
    }

    out.accepted_count = static_cast<int>(out.accepted_tokens.size());
    for (std::size_t i = 0; i < proposal.size(); ++i) {
        if (!accepted[i]) out.rejected_nodes.push_back(static_cast<std::int32_t>(i));
    }
    return out;
}

VerificationOutcome verify_proposal(const TargetModel& target, const SequenceState& state,
                                    const DraftProposal& proposal, VerifyMode mode, Rng& rng) {
    if (proposal.structure == ProposalStructure::Linear) {
        return verify_linear(target, state, proposal, mode, rng);
    }
    return verify_tree(target, state, proposal, mode, rng);
}

TokenId ar_step(const TargetModel& target, const SequenceState& state, VerifyMode mode, Rng& rng) {
    const Distribution base = target.next(state);
    if (mode.greedy_like()) return argmax_token(base);
    return sample_token(apply_temperature(base, mode.temperature), rng);
}

}  // namespace speclab
