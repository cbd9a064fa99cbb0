#pragma once

// Observe-then-predict rollout over a trajectory window, the training loss
// and the per-window Adam training loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "data.hpp"
#include "diffcore.hpp"
#include "model.hpp"

namespace sralstm {

enum class RolloutMode {
    free,            // ground truth through the last observed frame, own predictions afterwards
    teacher_forced,  // ground truth at every step (one-step-ahead diagnostics)
};

struct RolloutResult {
    std::vector<std::int64_t> ped_ids;
    std::vector<Vec2> anchors;                            // last observed position per pedestrian
    std::vector<std::vector<Vec2>> predicted_nabs;        // [ped][k], k = 0..pred_len-1
    std::vector<std::vector<Vec2>> predicted_abs;         // anchor + predicted_nabs
    std::vector<std::vector<std::vector<double>>> attention_trace;  // [step][i][j] when traced
    std::vector<Var> prediction_rows;                     // [N x 2] per prediction step, differentiable
};

namespace detail {

inline RolloutResult rollout_frames(Tape& tape, const ParamVars& pv, const std::vector<std::int64_t>& ped_ids,
                                    const std::vector<std::vector<Vec2>>& frames, RolloutMode mode, bool trace) {
    const auto& cfg = pv.config;
    const std::size_t N = ped_ids.size();
    const std::size_t obs = cfg.obs_len, pred = cfg.pred_len, total = obs + pred;
    if (N == 0) throw std::invalid_argument("rollout: empty window");
    const std::size_t needed = mode == RolloutMode::teacher_forced ? total - 1 : obs;
    if (frames.size() < needed)
        throw std::invalid_argument("rollout: window has " + std::to_string(frames.size()) + " frames, needs " +
                                    std::to_string(needed));
    for (std::size_t f = 0; f < needed; ++f)
        if (frames[f].size() != N) throw std::invalid_argument("rollout: ragged frame " + std::to_string(f));

    RolloutResult res;
    res.ped_ids = ped_ids;
    std::vector<std::vector<Vec2>> offsets(N);  // [ped][frame]
    for (std::size_t p = 0; p < N; ++p) {
        std::vector<Vec2> track;
        for (std::size_t f = 0; f < needed; ++f) track.push_back(frames[f][p]);
        offsets[p] = nabs_encode(track, obs - 1).offsets;
        res.anchors.push_back(frames[obs - 1][p]);
    }

    SceneState state = SceneState::zeros(ped_ids, cfg.hidden_dim);
    std::vector<Var> anchor_rows;
    for (const auto& a : res.anchors) anchor_rows.push_back(point(a));
    std::vector<Var> fed_back(N);
    res.predicted_nabs.assign(N, {});

    for (std::size_t t = 0; t + 1 < total; ++t) {
        StepObservation in;
        const bool ground_truth = t < obs || mode == RolloutMode::teacher_forced;
        for (std::size_t p = 0; p < N; ++p) {
            if (ground_truth) {
                in.positions.push_back(point(frames[t][p]));
                in.nabs.push_back(point(offsets[p][t]));
            } else {
                in.nabs.push_back(fed_back[p]);
                in.positions.push_back(add(tape, anchor_rows[p], fed_back[p]));
            }
        }
        StepOutput out;
        try {
            out = scene_step(tape, pv, state, in);
        } catch (const NumericError& e) {
            throw NumericError("rollout step " + std::to_string(t) + ": " + e.what());
        }
        if (trace && cfg.strategy != AttentionStrategy::none) res.attention_trace.push_back(out.attention);
        fed_back = out.predictions;
        if (t + 1 >= obs) {
            res.prediction_rows.push_back(concat(tape, out.predictions, 0));
            for (std::size_t p = 0; p < N; ++p) {
                const auto& v = out.predictions[p].value().values;
                res.predicted_nabs[p].push_back({v[0], v[1]});
            }
        }
    }
    for (std::size_t p = 0; p < N; ++p) res.predicted_abs.push_back(nabs_decode(res.predicted_nabs[p], res.anchors[p]));
    return res;
}

}  // namespace detail

/// Runs the model over a window: steps before the anchor frame consume ground
/// truth; in free mode later steps consume the decoded predictions, which
/// feed both the displacement and the offset embeddings.
inline RolloutResult rollout(Tape& tape, const ParamVars& pv, const TrajectoryWindow& w,
                             RolloutMode mode = RolloutMode::free, bool trace = false) {
    if (w.obs_len != pv.config.obs_len || w.pred_len != pv.config.pred_len)
        throw std::invalid_argument("rollout: window horizon " + std::to_string(w.obs_len) + "+" +
                                    std::to_string(w.pred_len) + " does not match model config");
    return detail::rollout_frames(tape, pv, w.ped_ids, w.positions, mode, trace);
}

/// Prediction from observed frames alone (no ground-truth future).
inline RolloutResult rollout_observed(Tape& tape, const ParamVars& pv, const std::vector<std::int64_t>& ped_ids,
                                      const std::vector<std::vector<Vec2>>& observed, bool trace = false) {
    if (observed.size() != pv.config.obs_len)
        throw std::invalid_argument("rollout_observed: expected " + std::to_string(pv.config.obs_len) +
                                    " observed frames");
    return detail::rollout_frames(tape, pv, ped_ids, observed, RolloutMode::free, trace);
}

/// Ground-truth offsets from the anchor frame for the predicted frames, [ped][k].
inline std::vector<std::vector<Vec2>> future_nabs(const TrajectoryWindow& w) {
    std::vector<std::vector<Vec2>> out(w.num_peds());
    for (std::size_t p = 0; p < w.num_peds(); ++p) {
        const auto track = w.track(p);
        const auto nabs = nabs_encode(track, w.obs_len - 1);
        out[p].assign(nabs.offsets.begin() + static_cast<std::ptrdiff_t>(w.obs_len), nabs.offsets.end());
    }
    return out;
}

/// Ground-truth future positions, [ped][k].
inline std::vector<std::vector<Vec2>> future_positions(const TrajectoryWindow& w) {
    std::vector<std::vector<Vec2>> out(w.num_peds());
    for (std::size_t p = 0; p < w.num_peds(); ++p)
        for (std::size_t f = w.obs_len; f < w.length(); ++f) out[p].push_back(w.positions[f][p]);
    return out;
}

/// Mean over pedestrians and prediction steps of the squared distance between
/// predicted and true offsets.
inline Var l2_loss(Tape& tape, const RolloutResult& result, const std::vector<std::vector<Vec2>>& truth_nabs) {
    const std::size_t N = result.ped_ids.size();
    const std::size_t T = result.prediction_rows.size();
    if (truth_nabs.size() != N) throw std::invalid_argument("l2_loss: pedestrian count mismatch");
    for (const auto& t : truth_nabs)
        if (t.size() != T)
            throw std::invalid_argument("l2_loss: truth covers " + std::to_string(t.size()) + " steps, prediction " +
                                        std::to_string(T));
    if (T == 0) throw std::invalid_argument("l2_loss: no predicted steps");
    Tensor truth({N * T, 2});
    for (std::size_t k = 0; k < T; ++k)
        for (std::size_t p = 0; p < N; ++p) {
            truth((k * N) + p, 0) = truth_nabs[p][k].x;
            truth((k * N) + p, 1) = truth_nabs[p][k].y;
        }
    const Var pred = concat(tape, result.prediction_rows, 0);
    const Var diff = sub(tape, pred, Var::constant(std::move(truth)));
    return scale(tape, sum(tape, mul(tape, diff, diff)), 1.0 / static_cast<double>(N * T));
}

struct TrainConfig {
    AdamConfig adam;
    double clip_norm = 10.0;
    std::size_t epochs = 300;
    std::uint64_t seed = 0;
    bool augment_rotation = true;
};

struct EpochSummary {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    std::size_t windows = 0;
};

inline std::string window_label(const TrajectoryWindow& w) {
    return (w.scene.empty() ? std::string("<unnamed>") : w.scene) + "@" + std::to_string(w.start_frame);
}

/// One optimizer step on a single window (one mini-batch). Returns the loss.
inline double train_window(ModelParams& params, AdamState& adam, const TrajectoryWindow& window, double clip_norm) {
    Tape tape;
    params.zero_grad();
    const ParamVars pv = ParamVars::bind(params);
    const auto result = rollout(tape, pv, window, RolloutMode::free);
    const Var loss = l2_loss(tape, result, future_nabs(window));
    tape.backward(loss);
    clip_grad_norm(params.tensors(), clip_norm);
    adam_step(params.tensors(), adam);
    params.zero_grad();
    return loss.item();
}

/// Visits every window once in a seeded shuffled order, applying a random
/// rotation to each (when enabled) before the optimizer step.
inline EpochSummary train_epoch(ModelParams& params, AdamState& adam, std::span<const TrajectoryWindow> windows,
                                const TrainConfig& cfg, std::uint64_t epoch_seed) {
    if (windows.empty()) throw std::invalid_argument("train_epoch: no training windows");
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(epoch_seed), static_cast<std::uint32_t>(epoch_seed >> 32)};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> order(windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

    double total = 0.0;
    for (auto idx : order) {
        const auto& w = windows[idx];
        const double a = angle(rng);
        try {
            total += cfg.augment_rotation ? train_window(params, adam, rotate_window(w, a), cfg.clip_norm)
                                          : train_window(params, adam, w, cfg.clip_norm);
        } catch (const NumericError& e) {
            throw NumericError("window " + window_label(w) + ": " + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error("window " + window_label(w) + ": " + e.what());
        }
    }
    return {epoch_seed, total / static_cast<double>(windows.size()), windows.size()};
}

/// Runs cfg.epochs epochs starting after `first_epoch` completed ones.
inline std::vector<EpochSummary> train(ModelParams& params, AdamState& adam, std::span<const TrajectoryWindow> windows,
                                       const TrainConfig& cfg,
                                       const std::function<void(const EpochSummary&)>& on_epoch = {},
                                       std::size_t first_epoch = 0) {
    std::vector<EpochSummary> history;
    for (std::size_t e = first_epoch; e < first_epoch + cfg.epochs; ++e) {
        auto s = train_epoch(params, adam, windows, cfg, e + 1);
        history.push_back(s);
        if (on_epoch) on_epoch(s);
    }
    return history;
}

}  // namespace sralstm
