#pragma once

// Draft-proposal generators. Four retrieval drafters index the evolving
// context (suffix automaton, n-gram table, frequency trie, recycled rejects)
// and two draft from the synthetic model (linear chain, best-first tree).
// A drafter instance is bound to one decoding session: it keeps incremental
// state and must see every committed token exactly once, in order.

#include "speclab/core.hpp"
#include "speclab/model.hpp"
#include "speclab/rng.hpp"
#include "speclab/verify.hpp"

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace speclab {

// ---------------------------------------------------------------------------
// Index structures
// ---------------------------------------------------------------------------

// Online suffix automaton over the indexed token stream. Besides the classic
// (len, link, transitions) triple every state tracks its two most recent
// occurrence end positions, which is what lets the drafter find where the
// matched suffix occurred *before* the context end.
class SuffixAutomaton {
  public:
    struct State {
        int len = 0;
        int link = -1;
        int last_end = -1;
        int prev_end = -1;
        std::unordered_map<TokenId, int> next;
    };

    // Longest-suffix match cursor, advanced token by token against the
    // automaton as it existed before each extension.
    struct Cursor {
        int state = 0;
        int length = 0;
    };

    SuffixAutomaton() { states_.emplace_back(); }

    void extend(TokenId token);
    void advance(Cursor& cur, TokenId token) const;
    void normalize(Cursor& cur) const;

    bool contains(std::span<const TokenId> s) const;
    std::size_t state_count() const { return states_.size(); }
    std::size_t text_size() const { return text_.size(); }
    const TokenSequence& text() const { return text_; }
    const State& state(int i) const { return states_[static_cast<std::size_t>(i)]; }

  private:
    std::vector<State> states_;
    int last_ = 0;
    TokenSequence text_;
};

// Most recent end position per n-gram, for orders 1..n. Indexing lags the
// context by one position so the tail never matches itself.
class NgramIndex {
  public:
    explicit NgramIndex(int order);

    void sync(const TokenSequence& ctx);
    std::optional<int> lookup(std::span<const TokenId> gram) const;
    int order() const { return order_; }

  private:
    struct VecHash {
        std::size_t operator()(const TokenSequence& v) const { return static_cast<std::size_t>(hash_tokens(0x51ABu, v)); }
    };

    int order_;
    std::size_t synced_ends_ = 0;
    std::vector<std::unordered_map<TokenSequence, int, VecHash>> maps_;
};

// Frequency trie over all context windows of length branch_length. A path's
// frequency equals the number of occurrences of that token string in the
// harvested context.
class ContinuationTrie {
  public:
    explicit ContinuationTrie(int branch_length);

    void push(TokenId token);
    int walk(std::span<const TokenId> path) const;  // node index, -1 if absent
    const std::map<TokenId, int>& children(int node) const { return nodes_[static_cast<std::size_t>(node)].kids; }
    int freq(int node) const { return nodes_[static_cast<std::size_t>(node)].freq; }
    int branch_length() const { return branch_length_; }

  private:
    struct Node {
        std::map<TokenId, int> kids;
        int freq = 0;
    };

    std::vector<Node> nodes_;
    std::deque<int> window_cursors_;
    int branch_length_;
};

// token -> rejected successor tokens, most recent first, capped per key.
class RecyclePool {
  public:
    explicit RecyclePool(int top_k) : top_k_(top_k) {}

    void add(TokenId parent, TokenId rejected);
    std::span<const TokenId> successors(TokenId parent) const;
    bool empty() const { return edges_.empty(); }
    void clear() { edges_.clear(); }

  private:
    int top_k_;
    std::unordered_map<TokenId, std::vector<TokenId>> edges_;
};

// ---------------------------------------------------------------------------
// Drafter interface
// ---------------------------------------------------------------------------

class Drafter {
  public:
    virtual ~Drafter() = default;

    virtual std::string_view name() const = 0;

    // Called once per session before any commit; indexes the prompt.
    virtual void reset(const SequenceState& state) = 0;

    // Empty proposal means "no draft"; the engine then takes one plain step.
    virtual DraftProposal propose(const SequenceState& state, Rng& rng) = 0;

    // Tokens actually committed this step (accepted + correction, truncated).
    virtual void commit(std::span<const TokenId> tokens) = 0;

    // Verification feedback. anchor is the last context token before the
    // step's commits (-1 when the context was empty).
    virtual void observe_outcome(const DraftProposal& proposal, const VerificationOutcome& outcome,
                                 TokenId anchor) {
        (void)proposal;
        (void)outcome;
        (void)anchor;
    }
};

// ---------------------------------------------------------------------------
// Concrete drafters
// ---------------------------------------------------------------------------

struct SamDrafterConfig {
    int max_len = 30;
    int min_match = 1;
    bool generated_only = false;
};

class SamDrafter final : public Drafter {
  public:
    explicit SamDrafter(SamDrafterConfig cfg) : cfg_(cfg) {}

    std::string_view name() const override { return "sam"; }
    void reset(const SequenceState& state) override;
    DraftProposal propose(const SequenceState& state, Rng& rng) override;
    void commit(std::span<const TokenId> tokens) override;

    const SuffixAutomaton& automaton() const { return sam_; }
    SuffixAutomaton::Cursor cursor() const { return cursor_; }

  private:
    SamDrafterConfig cfg_;
    SuffixAutomaton sam_;
    SuffixAutomaton::Cursor cursor_;
};

struct PldDrafterConfig {
    int ngram = 4;
    int n_pred = 10;
};

class PldDrafter final : public Drafter {
  public:
    explicit PldDrafter(PldDrafterConfig cfg) : cfg_(cfg), index_(cfg.ngram) {}

    std::string_view name() const override { return "pld"; }
    void reset(const SequenceState& state) override;
    DraftProposal propose(const SequenceState& state, Rng& rng) override;
    void commit(std::span<const TokenId> tokens) override;

  private:
    PldDrafterConfig cfg_;
    NgramIndex index_;
    TokenSequence ctx_;
};

struct LookaheadDrafterConfig {
    int decoding_length = 64;
    int branch_length = 12;
};

class LookaheadDrafter final : public Drafter {
  public:
    explicit LookaheadDrafter(LookaheadDrafterConfig cfg) : cfg_(cfg), trie_(cfg.branch_length) {}

    std::string_view name() const override { return "lookahead"; }
    void reset(const SequenceState& state) override;
    DraftProposal propose(const SequenceState& state, Rng& rng) override;
    void commit(std::span<const TokenId> tokens) override;

  private:
    LookaheadDrafterConfig cfg_;
    ContinuationTrie trie_;
    TokenSequence ctx_;
};

struct RecyclingDrafterConfig {
    int matrix_top_k = 8;
    int draft_len = 10;
    int node_budget = 80;
};

class RecyclingDrafter final : public Drafter {
  public:
    explicit RecyclingDrafter(RecyclingDrafterConfig cfg) : cfg_(cfg), pool_(cfg.matrix_top_k) {}

    std::string_view name() const override { return "recycling"; }
    void reset(const SequenceState& state) override;
    DraftProposal propose(const SequenceState& state, Rng& rng) override;
    void commit(std::span<const TokenId> tokens) override { (void)tokens; }
    void observe_outcome(const DraftProposal& proposal, const VerificationOutcome& outcome,
                         TokenId anchor) override;

    const RecyclePool& pool() const { return pool_; }

  private:
    RecyclingDrafterConfig cfg_;
    RecyclePool pool_;
};

struct ModelLinearDrafterConfig {
    int k = 5;
};

class ModelLinearDrafter final : public Drafter {
  public:
    ModelLinearDrafter(const SyntheticDraftModel& draft, VerifyMode mode, ModelLinearDrafterConfig cfg)
        : draft_(&draft), mode_(mode), cfg_(cfg) {}

    std::string_view name() const override { return "model-linear"; }
    void reset(const SequenceState& state) override { (void)state; }
    DraftProposal propose(const SequenceState& state, Rng& rng) override;
    void commit(std::span<const TokenId> tokens) override { (void)tokens; }

  private:
    const SyntheticDraftModel* draft_;
    VerifyMode mode_;
    ModelLinearDrafterConfig cfg_;
};

struct ModelTreeDrafterConfig {
    int depth = 3;
    int top_k = 8;
    int total_token = 30;
    double expand_threshold = 0.3;
};

class ModelTreeDrafter final : public Drafter {
  public:
    ModelTreeDrafter(const SyntheticDraftModel& draft, VerifyMode mode, ModelTreeDrafterConfig cfg)
        : draft_(&draft), mode_(mode), cfg_(cfg) {}

    std::string_view name() const override { return "model-tree"; }
    void reset(const SequenceState& state) override { (void)state; }
    DraftProposal propose(const SequenceState& state, Rng& rng) override;
    void commit(std::span<const TokenId> tokens) override { (void)tokens; }

  private:
    const SyntheticDraftModel* draft_;
    VerifyMode mode_;
    ModelTreeDrafterConfig cfg_;
};

}  // namespace speclab
