#include "speclab/drafters.hpp"

#include <algorithm>
#include <queue>

namespace speclab {

// ---------------------------------------------------------------------------
// SuffixAutomaton
// ---------------------------------------------------------------------------

void SuffixAutomaton::extend(TokenId token) {
    const int pos = static_cast<int>(text_.size());
    text_.push_back(token);

    const int cur = static_cast<int>(states_.size());
    State fresh;
    fresh.len = states_[static_cast<std::size_t>(last_)].len + 1;
    states_.push_back(std::move(fresh));

    int p = last_;
    while (p != -1 && !states_[static_cast<std::size_t>(p)].next.count(token)) {
        states_[static_cast<std::size_t>(p)].next[token] = cur;
        p = states_[static_cast<std::size_t>(p)].link;
    }
    if (p == -1) {
        states_[static_cast<std::size_t>(cur)].link = 0;
    } else {
        const int q = states_[static_cast<std::size_t>(p)].next[token];
        if (states_[static_cast<std::size_t>(p)].len + 1 == states_[static_cast<std::size_t>(q)].len) {
            states_[static_cast<std::size_t>(cur)].link = q;
        } else {
            const int clone = static_cast<int>(states_.size());
            State cl = states_[static_cast<std::size_t>(q)];
            cl.len = states_[static_cast<std::size_t>(p)].len + 1;
            states_.push_back(std::move(cl));
            while (p != -1) {
                auto it = states_[static_cast<std::size_t>(p)].next.find(token);
                if (it == states_[static_cast<std::size_t>(p)].next.end() || it->second != q) break;
                it->second = clone;
                p = states_[static_cast<std::size_t>(p)].link;
            }
            states_[static_cast<std::size_t>(q)].link = clone;
            states_[static_cast<std::size_t>(cur)].link = clone;
        }
    }
    last_ = cur;

    // Record this end position along the suffix-link chain: those states are
    // exactly the suffixes ending here. prev_end keeps the previous distinct
    // end so the drafter can skip the match's own terminal occurrence.
    for (int v = last_; v != -1; v = states_[static_cast<std::size_t>(v)].link) {
        State& s = states_[static_cast<std::size_t>(v)];
        if (s.last_end == pos) break;
        s.prev_end = s.last_end;
        s.last_end = pos;
    }
}

void SuffixAutomaton::normalize(Cursor& cur) const {
    if (cur.length == 0) {
        cur.state = 0;
        return;
    }
    // Clones can strand a cursor on a state that no longer covers its match
    // length; walk suffix links until [link.len+1, len] contains it again.
    while (cur.state != 0) {
        const int lnk = states_[static_cast<std::size_t>(cur.state)].link;
        if (lnk >= 0 && states_[static_cast<std::size_t>(lnk)].len >= cur.length) {
            cur.state = lnk;
        } else {
            break;
        }
    }
}

void SuffixAutomaton::advance(Cursor& cur, TokenId token) const {
    normalize(cur);
    while (true) {
        const State& st = states_[static_cast<std::size_t>(cur.state)];
        auto it = st.next.find(token);
        if (it != st.next.end()) {
            cur.state = it->second;
            cur.length += 1;
            return;
        }
        if (cur.state == 0) {
            cur.length = 0;
            return;
        }
        cur.state = st.link;
        cur.length = states_[static_cast<std::size_t>(cur.state)].len;
    }
}

bool SuffixAutomaton::contains(std::span<const TokenId> s) const {
    int node = 0;
    for (TokenId t : s) {
        const auto& next = states_[static_cast<std::size_t>(node)].next;
        auto it = next.find(t);
        if (it == next.end()) return false;
        node = it->second;
    }
    return true;
}

// ---------------------------------------------------------------------------
// NgramIndex
// ---------------------------------------------------------------------------

NgramIndex::NgramIndex(int order) : order_(order) {
    if (order_ < 1) order_ = 1;
    maps_.resize(static_cast<std::size_t>(order_));
}

void NgramIndex::sync(const TokenSequence& ctx) {
    if (ctx.size() < 2) return;
    const std::size_t upto = ctx.size() - 1;  // end positions [synced, upto)
    for (std::size_t e = synced_ends_; e < upto; ++e) {
        for (int j = 1; j <= order_ && static_cast<std::size_t>(j) <= e + 1; ++j) {
            TokenSequence key(ctx.begin() + static_cast<std::ptrdiff_t>(e + 1 - static_cast<std::size_t>(j)),
                              ctx.begin() + static_cast<std::ptrdiff_t>(e + 1));
            maps_[static_cast<std::size_t>(j - 1)][std::move(key)] = static_cast<int>(e);
        }
    }
    synced_ends_ = upto;
}

std::optional<int> NgramIndex::lookup(std::span<const TokenId> gram) const {
    if (gram.empty() || gram.size() > static_cast<std::size_t>(order_)) return std::nullopt;
    const auto& m = maps_[gram.size() - 1];
    auto it = m.find(TokenSequence(gram.begin(), gram.end()));
    if (it == m.end()) return std::nullopt;
    return it->second;
}

// ---------------------------------------------------------------------------
// ContinuationTrie
// ---------------------------------------------------------------------------

ContinuationTrie::ContinuationTrie(int branch_length) : branch_length_(branch_length) {
    if (branch_length_ < 1) branch_length_ = 1;
    nodes_.emplace_back();
}

void ContinuationTrie::push(TokenId token) {
    window_cursors_.push_back(0);
    for (int& c : window_cursors_) {
        Node& n = nodes_[static_cast<std::size_t>(c)];
        auto it = n.kids.find(token);
        int child;
        if (it == n.kids.end()) {
            child = static_cast<int>(nodes_.size());
            nodes_.emplace_back();
            nodes_[static_cast<std::size_t>(c)].kids.emplace(token, child);
        } else {
            child = it->second;
        }
        nodes_[static_cast<std::size_t>(child)].freq += 1;
        c = child;
    }
    if (window_cursors_.size() >= static_cast<std::size_t>(branch_length_)) {
        window_cursors_.pop_front();
    }
}

int ContinuationTrie::walk(std::span<const TokenId> path) const {
    int node = 0;
    for (TokenId t : path) {
        const auto& kids = nodes_[static_cast<std::size_t>(node)].kids;
        auto it = kids.find(t);
        if (it == kids.end()) return -1;
        node = it->second;
    }
    return node;
}

// ---------------------------------------------------------------------------
// RecyclePool
// ---------------------------------------------------------------------------

void RecyclePool::add(TokenId parent, TokenId rejected) {
    std::vector<TokenId>& v = edges_[parent];
    v.erase(std::remove(v.begin(), v.end(), rejected), v.end());
    v.insert(v.begin(), rejected);
    if (v.size() > static_cast<std::size_t>(top_k_)) v.resize(static_cast<std::size_t>(top_k_));
}

std::span<const TokenId> RecyclePool::successors(TokenId parent) const {
    auto it = edges_.find(parent);
    if (it == edges_.end()) return {};
    return {it->second.data(), it->second.size()};
}

// ---------------------------------------------------------------------------
// SamDrafter
// ---------------------------------------------------------------------------

void SamDrafter::reset(const SequenceState& state) {
    sam_ = SuffixAutomaton();
    cursor_ = SuffixAutomaton::Cursor{};
    if (!cfg_.generated_only) commit({state.prompt.data(), state.prompt.size()});
}

void SamDrafter::commit(std::span<const TokenId> tokens) {
    for (TokenId t : tokens) {
        sam_.advance(cursor_, t);  // match against the text indexed so far
        sam_.extend(t);
    }
}

DraftProposal SamDrafter::propose(const SequenceState& state, Rng& rng) {
    (void)state;
    (void)rng;
    SuffixAutomaton::Cursor cur = cursor_;
    sam_.normalize(cur);
    if (cur.length < cfg_.min_match) return {};

    const int n = static_cast<int>(sam_.text_size());
    if (n < 2) return {};
    const SuffixAutomaton::State& st = sam_.state(cur.state);
    const int e = st.last_end == n - 1 ? st.prev_end : st.last_end;
    if (e < 0 || e >= n - 1) return {};

    // Copy the continuation of the earlier occurrence. Positions past the
    // indexed text read from the draft itself, so periodic contexts
    // extrapolate their period instead of cutting off at the text end.
    TokenSequence chain;
    chain.reserve(static_cast<std::size_t>(cfg_.max_len));
    const TokenSequence& text = sam_.text();
    for (int k = 0; k < cfg_.max_len; ++k) {
        const int idx = e + 1 + k;
        chain.push_back(idx < n ? text[static_cast<std::size_t>(idx)]
                                : chain[static_cast<std::size_t>(idx - n)]);
    }
    return make_linear_proposal(chain);
}

// ---------------------------------------------------------------------------
// PldDrafter
// ---------------------------------------------------------------------------

void PldDrafter::reset(const SequenceState& state) {
    index_ = NgramIndex(cfg_.ngram);
    ctx_ = state.prompt;
    index_.sync(ctx_);
}

void PldDrafter::commit(std::span<const TokenId> tokens) {
    ctx_.insert(ctx_.end(), tokens.begin(), tokens.end());
    index_.sync(ctx_);
}

DraftProposal PldDrafter::propose(const SequenceState& state, Rng& rng) {
    (void)state;
    (void)rng;
    const std::size_t n = ctx_.size();
    if (n == 0) return {};

    // Cascade down n-gram orders; first hit wins. Indexing lags the context
    // end, so a hit always has at least one following token.
    const int max_order = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg_.ngram), n));
    for (int j = max_order; j >= 1; --j) {
        std::span<const TokenId> tail(ctx_.data() + (n - static_cast<std::size_t>(j)), static_cast<std::size_t>(j));
        const std::optional<int> hit = index_.lookup(tail);
        if (!hit) continue;
        const std::size_t from = static_cast<std::size_t>(*hit) + 1;
        const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(cfg_.n_pred), n - from);
        if (count == 0) return {};
        return make_linear_proposal({ctx_.data() + from, count});
    }
    return {};
}

// ---------------------------------------------------------------------------
// LookaheadDrafter
// ---------------------------------------------------------------------------

void LookaheadDrafter::reset(const SequenceState& state) {
    trie_ = ContinuationTrie(cfg_.branch_length);
    ctx_.clear();
    commit({state.prompt.data(), state.prompt.size()});
}

void LookaheadDrafter::commit(std::span<const TokenId> tokens) {
    for (TokenId t : tokens) {
        ctx_.push_back(t);
        trie_.push(t);
    }
}

DraftProposal LookaheadDrafter::propose(const SequenceState& state, Rng& rng) {
    (void)state;
    (void)rng;
    if (ctx_.empty()) return {};

    // Longest context tail that is a trie path with at least one child.
    int match = -1;
    const std::size_t max_tail =
        std::min<std::size_t>(ctx_.size(), static_cast<std::size_t>(cfg_.branch_length - 1));
    for (std::size_t len = max_tail; len >= 1; --len) {
        const int node = trie_.walk({ctx_.data() + (ctx_.size() - len), len});
        if (node >= 0 && !trie_.children(node).empty()) {
            match = node;
            break;
        }
        if (len == 1) break;
    }
    if (match < 0) return {};

    struct Cand {
        int freq;
        TokenId token;
        int seq;
        int parent;      // proposal node index, -1 for root
        int trie_node;
        int parent_freq;
    };
    auto worse = [](const Cand& a, const Cand& b) {
        if (a.freq != b.freq) return a.freq < b.freq;
        if (a.token != b.token) return a.token > b.token;
        return a.seq > b.seq;
    };
    std::priority_queue<Cand, std::vector<Cand>, decltype(worse)> heap(worse);

    int seq = 0;
    for (const auto& [tok, child] : trie_.children(match)) {
        heap.push({trie_.freq(child), tok, seq++, -1, child, trie_.freq(match)});
    }

    DraftProposal out;
    out.structure = ProposalStructure::Tree;
    while (!heap.empty() && static_cast<int>(out.nodes.size()) < cfg_.decoding_length) {
        const Cand c = heap.top();
        heap.pop();
        DraftNode node;
        node.token = c.token;
        node.parent = c.parent;
        node.draft_prob = c.parent_freq > 0 ? static_cast<double>(c.freq) / c.parent_freq : 1.0;
        const int idx = static_cast<int>(out.nodes.size());
        out.nodes.push_back(std::move(node));
        for (const auto& [tok, child] : trie_.children(c.trie_node)) {
            heap.push({trie_.freq(child), tok, seq++, idx, child, c.freq});
        }
    }
    out.max_depth = proposal_depth(out);
    return out;
}

// ---------------------------------------------------------------------------
// RecyclingDrafter
// ---------------------------------------------------------------------------

void RecyclingDrafter::reset(const SequenceState& state) {
    (void)state;
    pool_.clear();
}

void RecyclingDrafter::observe_outcome(const DraftProposal& proposal, const VerificationOutcome& outcome,
                                       TokenId anchor) {
    if (anchor < 0) return;
    for (std::int32_t idx : outcome.rejected_nodes) {
        const DraftNode& node = proposal.nodes[static_cast<std::size_t>(idx)];
        const TokenId parent_tok =
            node.parent < 0 ? anchor : proposal.nodes[static_cast<std::size_t>(node.parent)].token;
        pool_.add(parent_tok, node.token);
    }
}

DraftProposal RecyclingDrafter::propose(const SequenceState& state, Rng& rng) {
    (void)rng;
    if (state.context_size() == 0 || pool_.empty()) return {};
    const TokenId anchor = state.context_token(state.context_size() - 1);

    DraftProposal out;
    out.structure = ProposalStructure::Tree;

    // Breadth-first over the successor matrix, newest edges first.
    std::vector<std::pair<int, TokenId>> frontier{{-1, anchor}};
    for (int depth = 0; depth < cfg_.draft_len && !frontier.empty(); ++depth) {
        std::vector<std::pair<int, TokenId>> next;
        for (const auto& [parent_idx, tok] : frontier) {
            for (TokenId succ : pool_.successors(tok)) {
                if (static_cast<int>(out.nodes.size()) >= cfg_.node_budget) break;
                DraftNode node;
                node.token = succ;
                node.parent = parent_idx;
                const int idx = static_cast<int>(out.nodes.size());
                out.nodes.push_back(std::move(node));
                next.emplace_back(idx, succ);
            }
        }
        frontier = std::move(next);
    }
    out.max_depth = proposal_depth(out);
    return out;
}

// ---------------------------------------------------------------------------
// Model-based drafters
// ---------------------------------------------------------------------------

DraftProposal ModelLinearDrafter::propose(const SequenceState& state, Rng& rng) {
    DraftProposal out;
    out.structure = ProposalStructure::Linear;
    SequenceState scratch = state;
    for (int i = 0; i < cfg_.k; ++i) {
        const Distribution q = draft_->next(scratch);
        DraftNode node;
        node.parent = i - 1;
        if (mode_.greedy_like()) {
            node.token = argmax_token(q);
            node.draft_prob = q.p[static_cast<std::size_t>(node.token)];
        } else {
            const Distribution qt = apply_temperature(q, mode_.temperature);
            node.token = sample_token(qt, rng);
            node.draft_prob = qt.p[static_cast<std::size_t>(node.token)];
            node.claim = qt.p;  // verification needs the full sampling distribution
        }
        scratch.generated.push_back(node.token);
        out.nodes.push_back(std::move(node));
    }
    out.max_depth = static_cast<int>(out.nodes.size());
    return out;
}

DraftProposal ModelTreeDrafter::propose(const SequenceState& state, Rng& rng) {
    (void)rng;

    struct Cand {
        double cum;
        TokenId token;
        int seq;
        int parent;  // proposal node index, -1 for root
        int depth;
    };
    auto worse = [](const Cand& a, const Cand& b) {
        if (a.cum != b.cum) return a.cum < b.cum;
        if (a.token != b.token) return a.token > b.token;
        return a.seq > b.seq;
    };
    std::priority_queue<Cand, std::vector<Cand>, decltype(worse)> heap(worse);

    DraftProposal out;
    out.structure = ProposalStructure::Tree;

    int seq = 0;
    SequenceState scratch = state;
    const std::size_t base_len = scratch.generated.size();
    std::vector<double> node_cum;  // cumulative draft probability per added node

    auto push_children = [&](int parent_idx, double parent_cum, int depth) {
        if (depth > cfg_.depth) return;
        scratch.generated.resize(base_len);
        TokenSequence path;
        for (int at = parent_idx; at >= 0; at = out.nodes[static_cast<std::size_t>(at)].parent) {
            path.push_back(out.nodes[static_cast<std::size_t>(at)].token);
        }
        for (auto it = path.rbegin(); it != path.rend(); ++it) scratch.generated.push_back(*it);

        const Distribution q = draft_->next(scratch);
        const Distribution scored = mode_.greedy_like() ? q : apply_temperature(q, mode_.temperature);

        std::vector<TokenId> order(scored.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<TokenId>(i);
        std::sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
            const double pa = scored.p[static_cast<std::size_t>(a)];
            const double pb = scored.p[static_cast<std::size_t>(b)];
            if (pa != pb) return pa > pb;
            return a < b;
        });
        const int take = std::min<int>(cfg_.top_k, static_cast<int>(order.size()));
        for (int i = 0; i < take; ++i) {
            const TokenId tok = order[static_cast<std::size_t>(i)];
            const double cum = parent_cum * scored.p[static_cast<std::size_t>(tok)];
            if (cum >= cfg_.expand_threshold) heap.push({cum, tok, seq++, parent_idx, depth});
        }
    };

    push_children(-1, 1.0, 1);
    while (!heap.empty() && static_cast<int>(out.nodes.size()) < cfg_.total_token) {
        const Cand c = heap.top();
        heap.pop();
        const double parent_cum = c.parent < 0 ? 1.0 : node_cum[static_cast<std::size_t>(c.parent)];
        DraftNode node;
        node.token = c.token;
        node.parent = c.parent;
        node.draft_prob = parent_cum > 0.0 ? std::min(1.0, c.cum / parent_cum) : 0.0;
        const int idx = static_cast<int>(out.nodes.size());
        out.nodes.push_back(std::move(node));
        node_cum.push_back(c.cum);
        push_children(idx, c.cum, c.depth + 1);
    }
    out.max_depth = proposal_depth(out);
    return out;
}

}  // namespace speclab
