#pragma once

// Displacement metrics, dataset evaluation and the attention ablation runner.

#include <algorithm>
#include <chrono>
#include <functional>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "data.hpp"
#include "model.hpp"
#include "pipeline.hpp"

namespace sralstm {

using Trajectories = std::vector<std::vector<Vec2>>;  // [ped][step]

namespace detail {

inline void check_aligned(const Trajectories& pred, const Trajectories& truth, const char* who) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument(std::string(who) + ": pedestrian count mismatch (" + std::to_string(pred.size()) +
                                    " vs " + std::to_string(truth.size()) + ")");
    for (std::size_t p = 0; p < pred.size(); ++p)
        if (pred[p].size() != truth[p].size() || pred[p].empty())
            throw std::invalid_argument(std::string(who) + ": length mismatch for pedestrian " + std::to_string(p) +
                                        " (" + std::to_string(pred[p].size()) + " vs " +
                                        std::to_string(truth[p].size()) + ")");
}

}  // namespace detail

/// Euclidean error per pedestrian and step, [ped][step].
inline std::vector<std::vector<double>> displacements(const Trajectories& pred, const Trajectories& truth) {
    detail::check_aligned(pred, truth, "displacements");
    std::vector<std::vector<double>> out(pred.size());
    for (std::size_t p = 0; p < pred.size(); ++p)
        for (std::size_t k = 0; k < pred[p].size(); ++k) out[p].push_back(distance(pred[p][k], truth[p][k]));
    return out;
}

/// Mean Euclidean distance over pedestrians and predicted steps.
inline double ade(const Trajectories& pred, const Trajectories& truth) {
    detail::check_aligned(pred, truth, "ade");
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < pred.size(); ++p)
        for (std::size_t k = 0; k < pred[p].size(); ++k) {
            total += distance(pred[p][k], truth[p][k]);
            ++n;
        }
    return total / static_cast<double>(n);
}

/// Mean Euclidean distance over pedestrians at the final predicted step.
inline double fde(const Trajectories& pred, const Trajectories& truth) {
    detail::check_aligned(pred, truth, "fde");
    double total = 0.0;
    for (std::size_t p = 0; p < pred.size(); ++p) total += distance(pred[p].back(), truth[p].back());
    return total / static_cast<double>(pred.size());
}

struct WindowRecord {
    std::string scene;
    std::size_t start_frame = 0;
    std::vector<std::int64_t> ped_ids;
    std::vector<std::vector<double>> displacements;  // [ped][step], meters
};

struct EvalReport {
    std::string scene;
    std::size_t window_count = 0;
    std::size_t pedestrian_count = 0;
    double ade = 0.0;
    double fde = 0.0;
    std::vector<WindowRecord> windows;
    double seconds_per_step = 0.0;  // wall clock per model step, informational only
};

/// Free rollout of every window; ADE and FDE averaged over all pedestrians of
/// all windows. Windows are split across `threads` workers; the report does
/// not depend on the thread count.
inline EvalReport evaluate(const ModelParams& params, std::span<const TrajectoryWindow> windows,
                           std::string scene_name = {}, unsigned threads = 1) {
    EvalReport report;
    report.scene = std::move(scene_name);
    report.window_count = windows.size();
    report.windows.resize(windows.size());
    if (windows.empty()) return report;

    const ParamVars pv = ParamVars::bind(params);
    std::vector<std::string> errors(windows.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                Tape tape(false);
                const auto res = rollout(tape, pv, windows[i], RolloutMode::free);
                auto& rec = report.windows[i];
                rec.scene = windows[i].scene;
                rec.start_frame = windows[i].start_frame;
                rec.ped_ids = windows[i].ped_ids;
                rec.displacements = displacements(res.predicted_abs, future_positions(windows[i]));
            } catch (const std::exception& e) {
                errors[i] = "window " + window_label(windows[i]) + ": " + e.what();
            }
        }
    };
    const auto t0 = std::chrono::steady_clock::now();
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(windows.size())));
    if (threads == 1) {
        work(0, windows.size());
    } else {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (windows.size() + threads - 1) / threads;
        for (std::size_t b = 0; b < windows.size(); b += chunk)
            pool.emplace_back(work, b, std::min(windows.size(), b + chunk));
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& e : errors)
        if (!e.empty()) throw std::runtime_error("evaluate: " + e);

    double ade_sum = 0.0, fde_sum = 0.0;
    for (const auto& rec : report.windows)
        for (const auto& d : rec.displacements) {
            double s = 0.0;
            for (double v : d) s += v;
            ade_sum += s / static_cast<double>(d.size());
            fde_sum += d.back();
            ++report.pedestrian_count;
        }
    report.ade = ade_sum / static_cast<double>(report.pedestrian_count);
    report.fde = fde_sum / static_cast<double>(report.pedestrian_count);
    const std::size_t steps = windows.size() * (params.config().obs_len + params.config().pred_len - 1);
    report.seconds_per_step = elapsed / static_cast<double>(steps);
    return report;
}

struct AblationRow {
    AttentionStrategy strategy = AttentionStrategy::sra;
    std::size_t parameters = 0;
    double final_train_loss = 0.0;
    double ade = 0.0;
    double fde = 0.0;
};

/// Trains one model per strategy from the same seed, hyperparameters and data
/// order, then evaluates each on the test windows.
inline std::vector<AblationRow> ablate(std::span<const AttentionStrategy> strategies, const ModelConfig& base,
                                       const TrainConfig& train_cfg, std::span<const TrajectoryWindow> train_windows,
                                       std::span<const TrajectoryWindow> test_windows,
                                       const std::function<void(AttentionStrategy, const EpochSummary&)>& on_epoch = {}) {
    std::vector<AblationRow> rows;
    for (auto s : strategies) {
        ModelConfig cfg = base;
        cfg.strategy = s;
        ModelParams params = ModelParams::init(cfg, train_cfg.seed);
        AdamState adam(train_cfg.adam);
        std::function<void(const EpochSummary&)> cb;
        if (on_epoch) cb = [&](const EpochSummary& e) { on_epoch(s, e); };
        const auto history = train(params, adam, train_windows, train_cfg, cb);
        const auto report = evaluate(params, test_windows);
        rows.push_back({s, params.count(), history.empty() ? 0.0 : history.back().mean_loss, report.ade, report.fde});
    }
    return rows;
}

}  // namespace sralstm
