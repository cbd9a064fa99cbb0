#pragma once

// Randomized single-step scenes and the checks built on them, shared by the
// unit tests and the acceptance runner.

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include <sralstm/model.hpp>
#include <sralstm/pipeline.hpp>

#include "oracles.hpp"

namespace fixture {

using namespace sralstm;

// A scene frozen mid-rollout: recurrent states, current inputs and targets.
struct StepScene {
    std::vector<std::int64_t> ids;
    std::vector<Vec2> positions;
    std::vector<Vec2> nabs;
    std::vector<Vec2> targets;
    std::vector<Tensor> h, c;
    std::map<PairKey, std::pair<Tensor, Tensor>> pairs;
};

inline StepScene random_step_scene(std::size_t n, std::size_t hidden, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-4.0, 4.0), off(-2.0, 2.0);
    StepScene s;
    for (std::size_t i = 0; i < n; ++i) {
        s.ids.push_back(static_cast<std::int64_t>(10 + 3 * i));
        s.positions.push_back({pos(rng), pos(rng)});
        s.nabs.push_back({off(rng), off(rng)});
        s.targets.push_back({off(rng), off(rng)});
        s.h.push_back(oracle::random_tensor({1, hidden}, rng, -0.8, 0.8));
        s.c.push_back(oracle::random_tensor({1, hidden}, rng, -1.5, 1.5));
    }
    for (auto i : s.ids)
        for (auto j : s.ids)
            if (i != j)
                s.pairs.emplace(PairKey{i, j}, std::pair{oracle::random_tensor({1, hidden}, rng, -0.8, 0.8),
                                                         oracle::random_tensor({1, hidden}, rng, -1.5, 1.5)});
    return s;
}

/// The same scene with pedestrians reordered by `perm` (new slot k holds old
/// pedestrian perm[k]) and ids replaced through `relabel`.
inline StepScene permuted(const StepScene& s, const std::vector<std::size_t>& perm,
                          const std::map<std::int64_t, std::int64_t>& relabel) {
    StepScene p;
    for (auto k : perm) {
        p.ids.push_back(relabel.at(s.ids[k]));
        p.positions.push_back(s.positions[k]);
        p.nabs.push_back(s.nabs[k]);
        p.targets.push_back(s.targets[k]);
        p.h.push_back(s.h[k]);
        p.c.push_back(s.c[k]);
    }
    for (const auto& [key, st] : s.pairs) p.pairs.emplace(PairKey{relabel.at(key.first), relabel.at(key.second)}, st);
    return p;
}

inline SceneState make_state(const StepScene& s, std::size_t hidden) {
    SceneState st = SceneState::zeros(s.ids, hidden);
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
        st.h[i] = Var::constant(s.h[i]);
        st.c[i] = Var::constant(s.c[i]);
    }
    for (const auto& [key, v] : s.pairs) st.pairs[key] = {Var::constant(v.first), Var::constant(v.second)};
    return st;
}

inline StepObservation make_obs(const StepScene& s) {
    StepObservation o;
    for (std::size_t i = 0; i < s.ids.size(); ++i) {
        o.positions.push_back(point(s.positions[i]));
        o.nabs.push_back(point(s.nabs[i]));
    }
    return o;
}

/// Mean squared error of one step's predictions against the targets.
inline Var step_loss(Tape& tape, const ParamVars& pv, const StepScene& s) {
    SceneState st = make_state(s, pv.config.hidden_dim);
    const auto out = scene_step(tape, pv, st, make_obs(s));
    std::vector<double> t;
    for (const auto& v : s.targets) {
        t.push_back(v.x);
        t.push_back(v.y);
    }
    const std::size_t n = s.ids.size();
    const Var diff = sub(tape, concat(tape, out.predictions, 0), Var::constant(Tensor({n, 2}, t)));
    return scale(tape, sum(tape, mul(tape, diff, diff)), 1.0 / static_cast<double>(n));
}

struct GradReport {
    std::size_t checked = 0;
    std::vector<oracle::GradMismatch> mismatches;
    double worst_rel = 0.0;
};

inline void note(GradReport& r, double a, double n) {
    const double d = std::abs(a - n);
    const double scale = std::max(std::abs(a), std::abs(n));
    if (scale > 1e-6) r.worst_rel = std::max(r.worst_rel, d / scale);
}

/// Checks d loss / d param for a `fraction` of every parameter's entries
/// (all of them when fraction >= 1). `loss` builds the scalar on a tape.
inline GradReport check_param_gradients(ModelParams& params, const std::function<Var(Tape&, const ParamVars&)>& loss,
                                        double rel, double fraction, std::uint64_t seed, double h = 1e-5) {
    params.zero_grad();
    {
        Tape tape;
        const ParamVars pv = ParamVars::bind(params);
        tape.backward(loss(tape, pv));
    }
    GradReport rep;
    std::mt19937_64 rng(seed);
    auto f = [&] {
        Tape t(false);
        const ParamVars pv = ParamVars::bind(std::as_const(params));
        return loss(t, pv).item();
    };
    for (auto& [name, t] : params.tensors()) {
        std::vector<std::size_t> idx = oracle::all_indices(t.numel());
        if (fraction < 1.0) {
            std::shuffle(idx.begin(), idx.end(), rng);
            idx.resize(std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(t.numel()))));
        }
        const auto grad = t.grad;
        for (auto i : idx) {
            const double n = oracle::central_difference(t.values, i, f, h);
            note(rep, grad[i], n);
            if (!oracle::grad_close(grad[i], n, rel)) rep.mismatches.push_back({name, i, grad[i], n});
        }
        rep.checked += idx.size();
    }
    params.zero_grad();
    return rep;
}

inline bool bit_equal(const Var& a, const Var& b) {
    if (!a.valid() || !b.valid()) return a.valid() == b.valid();
    return a.value().shape == b.value().shape && a.value().values == b.value().values;
}

/// Runs one step on `s` and on a random relabeling of it; true when every
/// output maps across bit for bit.
inline bool step_permutation_equivariant(const ModelParams& params, const StepScene& s, std::mt19937_64& rng) {
    const std::size_t n = s.ids.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::map<std::int64_t, std::int64_t> relabel;
    std::vector<std::int64_t> fresh;
    for (std::size_t i = 0; i < n; ++i) fresh.push_back(static_cast<std::int64_t>(1000 + 7 * i));
    std::shuffle(fresh.begin(), fresh.end(), rng);
    for (std::size_t i = 0; i < n; ++i) relabel[s.ids[i]] = fresh[i];
    const StepScene p = permuted(s, perm, relabel);

    const ParamVars pv = ParamVars::bind(params);
    const std::size_t H = params.config().hidden_dim;
    Tape t1(false), t2(false);
    SceneState st1 = make_state(s, H), st2 = make_state(p, H);
    const auto o1 = scene_step(t1, pv, st1, make_obs(s));
    const auto o2 = scene_step(t2, pv, st2, make_obs(p));
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = perm[k];
        if (!bit_equal(o1.predictions[i], o2.predictions[k]) || !bit_equal(o1.context[i], o2.context[k]) ||
            !bit_equal(st1.h[i], st2.h[k]) || !bit_equal(st1.c[i], st2.c[k]))
            return false;
        for (std::size_t l = 0; l < n; ++l)
            if (o1.attention[i][perm[l]] != o2.attention[k][l]) return false;
    }
    for (const auto& [key, ps] : st1.pairs) {
        const auto& q = st2.pair(relabel.at(key.first), relabel.at(key.second));
        if (!bit_equal(ps.r, q.r) || !bit_equal(ps.c, q.c)) return false;
    }
    return true;
}

/// Full free rollout on a window and on a reordered copy; true when the
/// predictions and attention traces map across bit for bit.
inline bool rollout_permutation_equivariant(const ModelParams& params, const TrajectoryWindow& w,
                                            std::mt19937_64& rng) {
    const std::size_t n = w.ped_ids.size();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    TrajectoryWindow q = w;
    for (std::size_t k = 0; k < n; ++k) q.ped_ids[k] = w.ped_ids[perm[k]] + 500;
    for (std::size_t f = 0; f < w.positions.size(); ++f)
        for (std::size_t k = 0; k < n; ++k) q.positions[f][k] = w.positions[f][perm[k]];
    const ParamVars pv = ParamVars::bind(params);
    Tape t1(false), t2(false);
    const auto r1 = rollout(t1, pv, w, RolloutMode::free, true);
    const auto r2 = rollout(t2, pv, q, RolloutMode::free, true);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = perm[k];
        for (std::size_t s = 0; s < r1.predicted_nabs[i].size(); ++s)
            if (r1.predicted_nabs[i][s].x != r2.predicted_nabs[k][s].x ||
                r1.predicted_nabs[i][s].y != r2.predicted_nabs[k][s].y)
                return false;
        for (std::size_t s = 0; s < r1.attention_trace.size(); ++s)
            for (std::size_t l = 0; l < n; ++l)
                if (r1.attention_trace[s][i][perm[l]] != r2.attention_trace[s][k][l]) return false;
    }
    return true;
}

inline ModelConfig small_config(AttentionStrategy s, std::size_t embed = 6, std::size_t hidden = 8) {
    ModelConfig c;
    c.embed_dim = embed;
    c.hidden_dim = hidden;
    c.strategy = s;
    return c;
}

}  // namespace fixture
