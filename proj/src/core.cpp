#include "speclab/core.hpp"

#include <algorithm>
#include <cmath>

namespace speclab {

double total_variation(const Distribution& a, const Distribution& b) {
    const std::size_t n = std::max(a.size(), b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pa = i < a.size() ? a[i] : 0.0;
        const double pb = i < b.size() ? b[i] : 0.0;
        acc += std::abs(pa - pb);
    }
    return 0.5 * acc;
}

DraftProposal make_linear_proposal(std::span<const TokenId> chain) {
    DraftProposal p;
    p.structure = ProposalStructure::Linear;
    p.nodes.reserve(chain.size());
    for (std::size_t i = 0; i < chain.size(); ++i) {
        DraftNode n;
        n.token = chain[i];
        n.parent = static_cast<std::int32_t>(i) - 1;
        p.nodes.push_back(std::move(n));
    }
    p.max_depth = static_cast<int>(chain.size());
    return p;
}

int proposal_depth(const DraftProposal& p) {
    std::vector<int> depth(p.nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
        const std::int32_t par = p.nodes[i].parent;
        depth[i] = par < 0 ? 1 : depth[static_cast<std::size_t>(par)] + 1;
        best = std::max(best, depth[i]);
    }
    return best;
}

bool validate_proposal(const DraftProposal& p, int vocab_size) {
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
        const DraftNode& n = p.nodes[i];
        if (n.token < 0 || n.token >= vocab_size) return false;
        if (n.draft_prob < 0.0 || n.draft_prob > 1.0) return false;
        // Parents precede children; -1 is the context root. This also rules
        // out cycles and guarantees a root-first topological order.
        if (n.parent < -1 || n.parent >= static_cast<std::int32_t>(i)) return false;
        if (!n.claim.empty()) {
            Distribution d{n.claim};
            if (!d.valid()) return false;
        }
    }
    if (p.structure == ProposalStructure::Linear) {
        for (std::size_t i = 0; i < p.nodes.size(); ++i) {
            if (p.nodes[i].parent != static_cast<std::int32_t>(i) - 1) return false;
        }
    }
    return true;
}

const char* step_mode_name(StepMode m) {
    return m == StepMode::Speculative ? "speculative" : "greedy_gate";
}

}  // namespace speclab
