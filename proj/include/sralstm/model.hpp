#pragma once

// Social-relationship attention LSTM, one time step at a time.
//
// Per step and scene: every ordered pair (i, j) of present pedestrians
// embeds its displacement and advances a pair LSTM (the relationship state
// r_ij); each pedestrian scores its neighbors from [r_ij; h_i; h_j], softmax
// normalizes the scores and the neighbors' previous motion states are
// averaged under those weights into a social context; the motion LSTM then
// consumes [embedded offset; context] and a linear head predicts the next
// offset from the anchor frame.

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "data.hpp"
#include "diffcore.hpp"

namespace sralstm {

enum class AttentionStrategy { none, sa, ra, sra };

inline std::string_view to_string(AttentionStrategy s) {
    switch (s) {
        case AttentionStrategy::none: return "none";
        case AttentionStrategy::sa: return "sa";
        case AttentionStrategy::ra: return "ra";
        case AttentionStrategy::sra: return "sra";
    }
    return "?";
}

inline AttentionStrategy parse_strategy(std::string_view s) {
    for (auto k : {AttentionStrategy::none, AttentionStrategy::sa, AttentionStrategy::ra, AttentionStrategy::sra})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown attention strategy '" + std::string(s) + "' (expected none|sa|ra|sra)");
}

struct ModelConfig {
    std::size_t embed_dim = 32;
    std::size_t hidden_dim = 64;
    AttentionStrategy strategy = AttentionStrategy::sra;
    std::size_t obs_len = 8;
    std::size_t pred_len = 12;

    void validate() const {
        if (embed_dim == 0) throw std::invalid_argument("ModelConfig: embed_dim must be positive");
        if (hidden_dim == 0) throw std::invalid_argument("ModelConfig: hidden_dim must be positive");
        if (obs_len == 0) throw std::invalid_argument("ModelConfig: obs_len must be positive");
        if (pred_len == 0) throw std::invalid_argument("ModelConfig: pred_len must be positive");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

namespace pname {
inline constexpr const char* re_w = "W_re.weight";
inline constexpr const char* re_b = "W_re.bias";
inline constexpr const char* r_w = "W_r.weight";
inline constexpr const char* r_b = "W_r.bias";
inline constexpr const char* e_w = "W_e.weight";
inline constexpr const char* e_b = "W_e.bias";
inline constexpr const char* l_w = "W_l.weight";
inline constexpr const char* l_b = "W_l.bias";
inline constexpr const char* at = "W_at";
inline constexpr const char* p_w = "W_p.weight";
inline constexpr const char* p_b = "W_p.bias";
inline constexpr const char* sa = "W_sa";
inline constexpr const char* ra = "W_ra";
inline constexpr const char* rre_w = "W_rre.weight";
inline constexpr const char* rre_b = "W_rre.bias";
}  // namespace pname

struct ParamSpec {
    std::string name;
    Shape shape;
    double init_bound;  // weights drawn uniformly from [-bound, bound]
};

/// Every learnable tensor for a configuration. LSTM weights stack the four
/// gates (input, forget, candidate, output) column-wise; the motion LSTM reads
/// its input as [embedded offset; social context; previous hidden].
inline std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t E = cfg.embed_dim, H = cfg.hidden_dim;
    const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(H));
    const double pos_bound = 1.0 / std::sqrt(2.0);
    std::vector<ParamSpec> specs = {
        {pname::re_w, {2, E}, pos_bound},
        {pname::re_b, {1, E}, pos_bound},
        {pname::r_w, {E + H, 4 * H}, lstm_bound},
        {pname::r_b, {1, 4 * H}, lstm_bound},
        {pname::e_w, {2, E}, pos_bound},
        {pname::e_b, {1, E}, pos_bound},
        {pname::l_w, {E + 2 * H, 4 * H}, lstm_bound},
        {pname::l_b, {1, 4 * H}, lstm_bound},
        {pname::at, {3 * H, 1}, 1.0 / std::sqrt(3.0 * static_cast<double>(H))},
        {pname::p_w, {H, 2}, lstm_bound},
        {pname::p_b, {1, 2}, lstm_bound},
    };
    if (cfg.strategy == AttentionStrategy::sa)
        specs.push_back({pname::sa, {2 * H, 1}, 1.0 / std::sqrt(2.0 * static_cast<double>(H))});
    if (cfg.strategy == AttentionStrategy::ra) {
        specs.push_back({pname::ra, {E + 2 * H, 1}, 1.0 / std::sqrt(static_cast<double>(E + 2 * H))});
        specs.push_back({pname::rre_w, {2, E}, pos_bound});
        specs.push_back({pname::rre_b, {1, E}, pos_bound});
    }
    return specs;
}

inline std::size_t param_count(const ModelConfig& cfg) {
    std::size_t n = 0;
    for (const auto& s : param_specs(cfg)) n += numel(s.shape);
    return n;
}

class ModelParams {
public:
    ModelParams() = default;

    static ModelParams zeros(const ModelConfig& cfg) {
        ModelParams p;
        p.config_ = cfg;
        for (const auto& s : param_specs(cfg)) p.tensors_.emplace(s.name, Tensor(s.shape));
        return p;
    }

    /// Uniform initialization. Each tensor draws from its own stream keyed by
    /// (seed, name), so tensors shared between strategies start identical.
    static ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
        ModelParams p;
        p.config_ = cfg;
        for (const auto& s : param_specs(cfg)) {
            std::uint64_t h = 1469598103934665603ull;
            for (unsigned char ch : s.name) h = (h ^ ch) * 1099511628211ull;
            std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                              static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
            std::mt19937_64 rng(seq);
            std::uniform_real_distribution<double> dist(-s.init_bound, s.init_bound);
            Tensor t(s.shape);
            for (double& v : t.values) v = dist(rng);
            p.tensors_.emplace(s.name, std::move(t));
        }
        return p;
    }

    const ModelConfig& config() const { return config_; }
    NamedTensors& tensors() { return tensors_; }
    const NamedTensors& tensors() const { return tensors_; }

    Tensor& at(const std::string& name) {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) throw std::out_of_range("ModelParams: no tensor '" + name + "'");
        return it->second;
    }
    const Tensor& at(const std::string& name) const { return const_cast<ModelParams*>(this)->at(name); }
    bool contains(const std::string& name) const { return tensors_.count(name) > 0; }

    std::size_t count() const {
        std::size_t n = 0;
        for (const auto& [_, t] : tensors_) n += t.numel();
        return n;
    }

    void zero_grad() {
        for (auto& [_, t] : tensors_) {
            t.ensure_grad();
            t.zero_grad();
        }
    }

private:
    ModelConfig config_;
    NamedTensors tensors_;
};

/// Parameters bound into a computation. Binding mutable parameters makes them
/// gradient leaves; binding const parameters yields read-only views that are
/// safe to share across threads.
struct ParamVars {
    ModelConfig config;
    Var re_w, re_b, r_w, r_b, e_w, e_b, l_w, l_b, at, p_w, p_b;
    Var sa, ra, rre_w, rre_b;

    static ParamVars bind(ModelParams& p) {
        return bind_impl(p, [](const Tensor& t) { return Var::leaf(const_cast<Tensor&>(t)); });
    }
    static ParamVars bind(const ModelParams& p) {
        return bind_impl(p, [](const Tensor& t) { return Var::constant_view(t); });
    }

private:
    template <class F>
    static ParamVars bind_impl(const ModelParams& p, F wrap) {
        ParamVars v;
        v.config = p.config();
        auto get = [&](const char* n) { return wrap(p.at(n)); };
        v.re_w = get(pname::re_w);
        v.re_b = get(pname::re_b);
        v.r_w = get(pname::r_w);
        v.r_b = get(pname::r_b);
        v.e_w = get(pname::e_w);
        v.e_b = get(pname::e_b);
        v.l_w = get(pname::l_w);
        v.l_b = get(pname::l_b);
        v.at = get(pname::at);
        v.p_w = get(pname::p_w);
        v.p_b = get(pname::p_b);
        if (p.contains(pname::sa)) v.sa = get(pname::sa);
        if (p.contains(pname::ra)) {
            v.ra = get(pname::ra);
            v.rre_w = get(pname::rre_w);
            v.rre_b = get(pname::rre_b);
        }
        return v;
    }
};

// ---------------------------------------------------------------------------
// Building blocks

inline Var affine(Tape& tape, const Var& x, const Var& w, const Var& b) {
    return add_bias(tape, matmul(tape, x, w), b);
}

struct LstmState {
    Var h;
    Var c;
};

/// Standard LSTM cell over a batch of rows: x [m x in], h and c [m x H].
inline LstmState lstm_cell(Tape& tape, const Var& w, const Var& b, const Var& x, const Var& h, const Var& c) {
    if (h.shape().size() != 2 || h.shape() != c.shape() || x.shape().size() != 2 || x.shape()[0] != h.shape()[0])
        throw ShapeError("lstm_cell: inconsistent input " + shape_str(x.shape()) + ", hidden " + shape_str(h.shape()) +
                         ", cell " + shape_str(c.shape()));
    const std::size_t H = h.shape()[1];
    if (w.shape() != Shape{x.shape()[1] + H, 4 * H})
        throw ShapeError("lstm_cell: weight " + shape_str(w.shape()) + " does not fit input width " +
                         std::to_string(x.shape()[1]) + " and hidden " + std::to_string(H));
    const Var z = affine(tape, concat(tape, {x, h}, 1), w, b);
    const Var i = sigmoid(tape, slice(tape, z, 1, 0, H));
    const Var f = sigmoid(tape, slice(tape, z, 1, H, 2 * H));
    const Var g = tanh(tape, slice(tape, z, 1, 2 * H, 3 * H));
    const Var o = sigmoid(tape, slice(tape, z, 1, 3 * H, 4 * H));
    const Var c_next = add(tape, mul(tape, f, c), mul(tape, i, g));
    const Var h_next = mul(tape, o, tanh(tape, c_next));
    return {h_next, c_next};
}

inline Var zeros_row(std::size_t n) { return Var::constant(Tensor({1, n})); }

inline Var point(Vec2 p) { return Var::constant(Tensor::row({p.x, p.y})); }

// ---------------------------------------------------------------------------
// State

struct PairState {
    Var r;
    Var c;
};

using PairKey = std::pair<std::int64_t, std::int64_t>;

/// Recurrent state of one scene. Pair entries are directed: (i, j) and (j, i)
/// are separate states. Absent pedestrians keep their states frozen.
struct SceneState {
    std::vector<std::int64_t> ped_ids;
    std::vector<bool> present;
    std::vector<Var> h;
    std::vector<Var> c;
    std::map<PairKey, PairState> pairs;
    std::size_t hidden_dim = 0;

    static SceneState zeros(std::vector<std::int64_t> ids, std::size_t hidden_dim) {
        SceneState s;
        s.hidden_dim = hidden_dim;
        s.ped_ids = std::move(ids);
        s.present.assign(s.ped_ids.size(), true);
        for (std::size_t i = 0; i < s.ped_ids.size(); ++i) {
            s.h.push_back(zeros_row(hidden_dim));
            s.c.push_back(zeros_row(hidden_dim));
        }
        return s;
    }

    std::size_t size() const { return ped_ids.size(); }

    std::size_t index_of(std::int64_t id) const {
        for (std::size_t i = 0; i < ped_ids.size(); ++i)
            if (ped_ids[i] == id) return i;
        throw std::out_of_range("SceneState: unknown pedestrian " + std::to_string(id));
    }

    const PairState& pair(std::int64_t i, std::int64_t j) const {
        auto it = pairs.find({i, j});
        if (it == pairs.end())
            throw std::out_of_range("SceneState: unknown pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
        return it->second;
    }

    /// Zero-initializes the pair state if (i, j) has never been co-present.
    PairState& activate_pair(std::int64_t i, std::int64_t j) {
        auto [it, fresh] = pairs.try_emplace({i, j});
        if (fresh) it->second = {zeros_row(hidden_dim), zeros_row(hidden_dim)};
        return it->second;
    }
};

// ---------------------------------------------------------------------------
// Single-step operations

/// ReLU(W_re (p_j - p_i) + b). Depends on the displacement only.
inline Var embed_relative(Tape& tape, const ParamVars& pv, const Var& pos_i, const Var& pos_j) {
    return relu(tape, affine(tape, sub(tape, pos_j, pos_i), pv.re_w, pv.re_b));
}

/// Advances the relationship state of the ordered pair (i, j) with the
/// embedded displacement e_ij. Weights are shared by all pairs.
inline PairState relation_step(Tape& tape, const ParamVars& pv, SceneState& state, PairKey pair, const Var& e_ij) {
    auto it = state.pairs.find(pair);
    if (it == state.pairs.end())
        throw std::out_of_range("relation_step: unknown pair (" + std::to_string(pair.first) + ", " +
                                std::to_string(pair.second) + ")");
    auto [r, c] = lstm_cell(tape, pv.r_w, pv.r_b, e_ij, it->second.r, it->second.c);
    it->second = {r, c};
    return it->second;
}

/// Unnormalized attention score of neighbor j for pedestrian i. Rows of the
/// inputs are scored independently, so the same call scores a batch of pairs.
///   sra:  W_at [r_ij; h_i; h_j]
///   sa:   W_sa [h_i; h_j]
///   ra:   W_ra [e_rel; h_i; h_j], e_rel from the dedicated displacement embedding
///   none: 0 (ignored downstream)
inline Var attention_logits(Tape& tape, const ParamVars& pv, AttentionStrategy strategy, const Var& r_ij,
                            const Var& h_i, const Var& h_j, const Var& e_rel = {}) {
    const std::size_t H = pv.config.hidden_dim;
    if (h_i.shape() != h_j.shape() || h_i.shape().size() != 2 || h_i.shape()[1] != H)
        throw ShapeError("attention_logits: hidden states " + shape_str(h_i.shape()) + " and " +
                         shape_str(h_j.shape()) + " do not match hidden_dim " + std::to_string(H));
    const std::size_t rows = h_i.shape()[0];
    switch (strategy) {
        case AttentionStrategy::none: return Var::constant(Tensor({rows, 1}));
        case AttentionStrategy::sa: return matmul(tape, concat(tape, {h_i, h_j}, 1), pv.sa);
        case AttentionStrategy::ra:
            if (!e_rel.valid()) throw std::invalid_argument("attention_logits: ra strategy needs e_rel");
            return matmul(tape, concat(tape, {e_rel, h_i, h_j}, 1), pv.ra);
        case AttentionStrategy::sra:
            if (r_ij.shape() != h_i.shape())
                throw ShapeError("attention_logits: relationship state " + shape_str(r_ij.shape()) + " vs " +
                                 shape_str(h_i.shape()));
            return matmul(tape, concat(tape, {r_ij, h_i, h_j}, 1), pv.at);
    }
    throw std::logic_error("attention_logits: bad strategy");
}

/// Softmax of the neighbor logits restricted to the neighbor mask.
inline Var attention_weights(Tape& tape, const Var& logits, const std::vector<bool>& neighbor_mask) {
    return masked_softmax(tape, logits, neighbor_mask);
}

/// H_i = sum_j alpha_ij h_j over the neighbor rows. Zero when the strategy is
/// none or there are no neighbors.
inline Var social_context(Tape& tape, const Var& weights, const Var& neighbor_h, AttentionStrategy strategy,
                          std::size_t hidden_dim) {
    if (strategy == AttentionStrategy::none || !weights.valid() || !neighbor_h.valid()) return zeros_row(hidden_dim);
    return weighted_sum(tape, weights, neighbor_h);
}

/// ReLU(W_e (dx, dy) + b) for each row of offsets.
inline Var embed_position(Tape& tape, const ParamVars& pv, const Var& nabs) {
    return relu(tape, affine(tape, nabs, pv.e_w, pv.e_b));
}

/// Advances pedestrian i's motion state from [e_i; H_i].
inline LstmState motion_step(Tape& tape, const ParamVars& pv, SceneState& state, std::size_t i, const Var& e_i,
                             const Var& context) {
    if (i >= state.size()) throw std::out_of_range("motion_step: pedestrian index out of range");
    auto next = lstm_cell(tape, pv.l_w, pv.l_b, concat(tape, {e_i, context}, 1), state.h[i], state.c[i]);
    state.h[i] = next.h;
    state.c[i] = next.c;
    return next;
}

/// W_p h + b: the offset from the anchor frame at the next step.
inline Var predict_offset(Tape& tape, const ParamVars& pv, const Var& h) { return affine(tape, h, pv.p_w, pv.p_b); }

// ---------------------------------------------------------------------------
// Anchor-relative ("Nabs") coordinates

/// Offsets of a track from its position at `anchor`. `residuals` holds the
/// rounding error of each subtraction, so decoding with it is exact.
struct NabsTrack {
    std::vector<Vec2> offsets;
    std::vector<Vec2> residuals;
};

namespace detail {

// Error-free transformation: s + e == a + b exactly.
inline std::pair<double, double> two_sum(double a, double b) {
    const double s = a + b;
    const double bb = s - a;
    const double e = (a - (s - bb)) + (b - bb);
    return {s, e};
}

}  // namespace detail

inline NabsTrack nabs_encode(std::span<const Vec2> track, std::size_t anchor) {
    if (anchor >= track.size())
        throw std::out_of_range("nabs_encode: anchor " + std::to_string(anchor) + " outside track of length " +
                                std::to_string(track.size()));
    const Vec2 a = track[anchor];
    NabsTrack out;
    for (const Vec2& p : track) {
        auto [dx, ex] = detail::two_sum(p.x, -a.x);
        auto [dy, ey] = detail::two_sum(p.y, -a.y);
        out.offsets.push_back({dx, dy});
        out.residuals.push_back({ex, ey});
    }
    return out;
}

/// anchor + offset for each entry.
inline std::vector<Vec2> nabs_decode(std::span<const Vec2> offsets, Vec2 anchor) {
    std::vector<Vec2> out;
    out.reserve(offsets.size());
    for (const Vec2& d : offsets) out.push_back(anchor + d);
    return out;
}

/// Exact inverse of nabs_encode.
inline std::vector<Vec2> nabs_decode(const NabsTrack& nabs, Vec2 anchor) {
    std::vector<Vec2> out;
    out.reserve(nabs.offsets.size());
    for (std::size_t k = 0; k < nabs.offsets.size(); ++k) {
        auto [sx, ex] = detail::two_sum(anchor.x, nabs.offsets[k].x);
        auto [sy, ey] = detail::two_sum(anchor.y, nabs.offsets[k].y);
        out.push_back({sx + (ex + nabs.residuals[k].x), sy + (ey + nabs.residuals[k].y)});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Whole-scene step

/// Inputs at one step, indexed like SceneState::ped_ids. Entries of absent
/// pedestrians are ignored. positions feed the displacement embeddings;
/// nabs feeds the motion embedding. Each is a [1 x 2] row.
struct StepObservation {
    std::vector<Var> positions;
    std::vector<Var> nabs;
};

struct StepOutput {
    std::vector<Var> predictions;                 // [1 x 2] per pedestrian; invalid when absent
    std::vector<Var> context;                     // [1 x H] per pedestrian; invalid when absent
    std::vector<std::vector<double>> attention;   // attention[i][j]; zero off the neighbor sets
};

/// One full step for every present pedestrian in the order: relationship
/// update for all ordered pairs, attention, social context, motion update,
/// offset prediction. Neighbors of i are all other present pedestrians.
inline StepOutput scene_step(Tape& tape, const ParamVars& pv, SceneState& state, const StepObservation& obs) {
    const auto& cfg = pv.config;
    const std::size_t N = state.size();
    if (obs.positions.size() != N || obs.nabs.size() != N)
        throw std::invalid_argument("scene_step: observation does not cover every pedestrian");
    const std::size_t H = cfg.hidden_dim;
    const auto strategy = cfg.strategy;

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < N; ++i)
        if (state.present[i]) active.push_back(i);
    StepOutput out;
    out.predictions.resize(N);
    out.context.resize(N);
    out.attention.assign(N, std::vector<double>(N, 0.0));
    const std::size_t n = active.size();
    if (n == 0) return out;

    // Pairs grouped by observer: rows [pair_begin[a], pair_begin[a+1]) belong to active[a].
    std::vector<std::size_t> obs_row, nbr_row, pair_begin{0};
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b)
            if (a != b) {
                obs_row.push_back(a);
                nbr_row.push_back(b);
            }
        pair_begin.push_back(obs_row.size());
    }
    const std::size_t np = obs_row.size();

    std::vector<Var> h_prev_rows, c_prev_rows, pos_rows, nabs_rows;
    for (auto i : active) {
        h_prev_rows.push_back(state.h[i]);
        c_prev_rows.push_back(state.c[i]);
        pos_rows.push_back(obs.positions[i]);
        nabs_rows.push_back(obs.nabs[i]);
    }
    const Var h_prev = concat(tape, h_prev_rows, 0);
    const Var c_prev = concat(tape, c_prev_rows, 0);

    std::vector<Var> ctx_rows(n);
    if (np == 0 || strategy == AttentionStrategy::none) {
        for (auto& v : ctx_rows) v = zeros_row(H);
    } else {
        const Var pos = concat(tape, pos_rows, 0);
        const Var disp = sub(tape, gather_rows(tape, pos, nbr_row), gather_rows(tape, pos, obs_row));
        Var r_new, e_rel;
        if (strategy == AttentionStrategy::sra) {
            std::vector<Var> r_rows, cr_rows;
            for (std::size_t p = 0; p < np; ++p) {
                auto& ps = state.activate_pair(state.ped_ids[active[obs_row[p]]], state.ped_ids[active[nbr_row[p]]]);
                r_rows.push_back(ps.r);
                cr_rows.push_back(ps.c);
            }
            const Var e = relu(tape, affine(tape, disp, pv.re_w, pv.re_b));
            auto next = lstm_cell(tape, pv.r_w, pv.r_b, e, concat(tape, r_rows, 0), concat(tape, cr_rows, 0));
            r_new = next.h;
            for (std::size_t p = 0; p < np; ++p)
                state.pairs[{state.ped_ids[active[obs_row[p]]], state.ped_ids[active[nbr_row[p]]]}] = {
                    slice(tape, next.h, 0, p, p + 1), slice(tape, next.c, 0, p, p + 1)};
        } else if (strategy == AttentionStrategy::ra) {
            e_rel = relu(tape, affine(tape, disp, pv.rre_w, pv.rre_b));
        }
        const Var logits = attention_logits(tape, pv, strategy, r_new, gather_rows(tape, h_prev, obs_row),
                                            gather_rows(tape, h_prev, nbr_row), e_rel);
        for (std::size_t a = 0; a < n; ++a) {
            const std::size_t b0 = pair_begin[a], b1 = pair_begin[a + 1];
            if (b0 == b1) {
                ctx_rows[a] = zeros_row(H);
                continue;
            }
            const Var alpha = attention_weights(tape, slice(tape, logits, 0, b0, b1), std::vector<bool>(b1 - b0, true));
            const std::span<const std::size_t> nbrs(nbr_row.data() + b0, b1 - b0);
            ctx_rows[a] = social_context(tape, alpha, gather_rows(tape, h_prev, nbrs), strategy, H);
            for (std::size_t p = b0; p < b1; ++p)
                out.attention[active[a]][active[nbr_row[p]]] = alpha.value().values[p - b0];
        }
    }

    const Var context = concat(tape, ctx_rows, 0);
    const Var e = embed_position(tape, pv, concat(tape, nabs_rows, 0));
    const auto next = lstm_cell(tape, pv.l_w, pv.l_b, concat(tape, {e, context}, 1), h_prev, c_prev);
    const Var pred = predict_offset(tape, pv, next.h);
    for (std::size_t a = 0; a < n; ++a) {
        const std::size_t i = active[a];
        state.h[i] = slice(tape, next.h, 0, a, a + 1);
        state.c[i] = slice(tape, next.c, 0, a, a + 1);
        out.predictions[i] = slice(tape, pred, 0, a, a + 1);
        out.context[i] = ctx_rows[a];
    }
    return out;
}

}  // namespace sralstm
