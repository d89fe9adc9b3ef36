#include "speclab/model.hpp"

#include <cmath>
#include <stdexcept>

namespace speclab {

namespace {

constexpr std::uint64_t kLogitTag = 0xA5A5A5A500000001ULL;
constexpr std::uint64_t kVisionTag = 0xA5A5A5A500000002ULL;
constexpr std::uint64_t kAttnTag = 0xA5A5A5A500000003ULL;
constexpr std::uint64_t kNoiseTag = 0xA5A5A5A500000004ULL;

// Logit spreads. Sharper rows mean peakier distributions; attention rows are
// kept sharper than token rows so relevance scores cover the full [0,1] range.
constexpr double kLogitScale = 6.0;
constexpr double kAttnScale = 8.0;
constexpr double kNoiseScale = 6.0;

Distribution softmax_from_hash(std::uint64_t h, std::size_t n, double scale) {
    Distribution out;
    out.p.resize(n);
    double maxv = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = unit_from_bits(splitmix64(h + 0x632BE59BD9B4E019ULL * (i + 1)));
        out.p[i] = scale * u;
        if (out.p[i] > maxv) maxv = out.p[i];
    }
    double sum = 0.0;
    for (double& v : out.p) {
        v = std::exp(v - maxv);
        sum += v;
    }
    for (double& v : out.p) v /= sum;
    return out;
}

}  // namespace

TableTargetModel::TableTargetModel(TableModelConfig cfg) : cfg_(cfg) {
    if (cfg_.vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
    if (cfg_.context_order < 1) throw std::invalid_argument("context_order must be >= 1");
    if (cfg_.vision_influence < 0.0 || cfg_.vision_influence > 1.0) {
        throw std::invalid_argument("vision_influence must be in [0,1]");
    }
}

void TableTargetModel::check_tokens(const SequenceState& state) const {
    for (std::size_t i = 0; i < state.context_size(); ++i) {
        const TokenId t = state.context_token(i);
        if (t < 0 || t >= cfg_.vocab_size) throw std::domain_error("token out of vocabulary");
    }
    if (!state.valid_vision_span()) throw std::domain_error("vision span outside prompt");
}

std::uint64_t TableTargetModel::context_hash(const SequenceState& state) const {
    const TokenSequence tail = state.context_tail(static_cast<std::size_t>(cfg_.context_order));
    return hash_tokens(cfg_.seed, tail);
}

std::uint64_t TableTargetModel::vision_hash(const SequenceState& state) const {
    if (state.vision_span.empty()) return 0;
    std::span<const TokenId> vis(state.prompt.data() + state.vision_span.begin, state.vision_span.size());
    return hash_tokens(cfg_.seed ^ kVisionTag, vis);
}

Distribution TableTargetModel::next(const SequenceState& state) const {
    check_tokens(state);
    const std::uint64_t h = hash_combine(context_hash(state), kLogitTag);
    Distribution base = softmax_from_hash(h, static_cast<std::size_t>(cfg_.vocab_size), kLogitScale);
    if (cfg_.vision_influence <= 0.0 || state.vision_span.empty()) return base;

    // Blend in a vision-conditioned logit row: the result depends on the
    // vision tokens' content exactly when vision_influence > 0.
    const std::uint64_t vh = hash_combine(h, vision_hash(state));
    const std::size_t n = static_cast<std::size_t>(cfg_.vocab_size);
    Distribution vis = softmax_from_hash(vh, n, kLogitScale);
    Distribution out;
    out.p.resize(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double l = (1.0 - cfg_.vision_influence) * std::log(base.p[i]) +
                         cfg_.vision_influence * std::log(vis.p[i]);
        out.p[i] = std::exp(l);
        sum += out.p[i];
    }
    for (double& v : out.p) v /= sum;
    return out;
}

std::vector<double> TableTargetModel::attention_row(const SequenceState& state) const {
    check_tokens(state);
    if (state.prompt.empty()) throw std::domain_error("attention row needs a nonempty prompt");
    const std::uint64_t h = hash_combine(context_hash(state), kAttnTag);
    return softmax_from_hash(h, state.prompt.size(), kAttnScale).p;
}

SyntheticDraftModel::SyntheticDraftModel(const TableTargetModel& base, DraftModelConfig cfg)
    : base_(base), cfg_(cfg) {
    if (cfg_.epsilon < 0.0 || cfg_.epsilon > 1.0) throw std::invalid_argument("epsilon must be in [0,1]");
    const double ev = cfg_.effective_epsilon_vision();
    if (ev < 0.0 || ev > 1.0) throw std::invalid_argument("epsilon_vision must be in [0,1]");
}

double SyntheticDraftModel::epsilon_for(const SequenceState& state) const {
    const double ev = cfg_.effective_epsilon_vision();
    if (ev == cfg_.epsilon || state.vision_span.empty()) return cfg_.epsilon;
    const std::vector<double> att = base_.attention_row(state);
    const double s = max_vision_attention(att, state.vision_span);
    return s >= cfg_.epsilon_vision_threshold ? ev : cfg_.epsilon;
}

Distribution SyntheticDraftModel::next(const SequenceState& state) const {
    Distribution target = base_.next(state);
    const double eps = epsilon_for(state);
    if (eps <= 0.0) return target;

    // The perturbation depends on the noise seed and the context only, never
    // on the target's logit table, so eps = 1 decouples draft from target.
    const TokenSequence tail = state.context_tail(static_cast<std::size_t>(base_.config().context_order));
    const std::uint64_t h = hash_combine(hash_tokens(cfg_.noise_seed, tail), kNoiseTag);
    Distribution noise = softmax_from_hash(h, target.size(), kNoiseScale);

    Distribution out;
    out.p.resize(target.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        out.p[i] = (1.0 - eps) * target.p[i] + eps * noise.p[i];
        sum += out.p[i];
    }
    for (double& v : out.p) v /= sum;
    return out;
}

TokenId argmax_token(const Distribution& d) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < d.size(); ++i) {
        if (d.p[i] > d.p[best]) best = i;
    }
    return static_cast<TokenId>(best);
}

TokenId sample_token(const Distribution& d, Rng& rng) {
    const double u = rng.next_unit();
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.p[i] > 0.0) last_positive = i;
        cum += d.p[i];
        if (u < cum) return static_cast<TokenId>(i);
    }
    return static_cast<TokenId>(last_positive);
}

Distribution apply_temperature(const Distribution& d, double temperature) {
    if (temperature < 0.0) throw std::invalid_argument("temperature must be >= 0");
    if (temperature == 1.0) return d;
    Distribution out;
    out.p.assign(d.size(), 0.0);
    if (temperature == 0.0) {
        out.p[static_cast<std::size_t>(argmax_token(d))] = 1.0;
        return out;
    }
    const double inv = 1.0 / temperature;
    double sum = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.p[i] = d.p[i] > 0.0 ? std::pow(d.p[i], inv) : 0.0;
        sum += out.p[i];
    }
    for (double& v : out.p) v /= sum;
    return out;
}

double max_vision_attention(const std::vector<double>& attention, const SpanRange& vision_span) {
    double best = 0.0;
    const std::size_t end = vision_span.end < attention.size() ? vision_span.end : attention.size();
    for (std::size_t i = vision_span.begin; i < end; ++i) {
        if (attention[i] > best) best = attention[i];
    }
    return best;
}

}  // namespace speclab
