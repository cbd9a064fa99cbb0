#pragma once

// Synthetic crowd scenarios for tests and demos.
//
// parallel and following are kinematic constructions. merging, meeting and
// group_avoid integrate a small social-force model (goal-directed relaxation
// plus exponential pairwise repulsion) so that pedestrians visibly react to
// each other. Every generated scene is placed with a seeded random heading
// and offset, then optionally perturbed with Gaussian position noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "data.hpp"

namespace sralstm {

enum class ScenarioKind { parallel, merging, following, meeting, group_avoid };

inline std::string_view to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::parallel: return "parallel";
        case ScenarioKind::merging: return "merging";
        case ScenarioKind::following: return "following";
        case ScenarioKind::meeting: return "meeting";
        case ScenarioKind::group_avoid: return "group_avoid";
    }
    return "?";
}

inline ScenarioKind parse_scenario_kind(std::string_view s) {
    for (auto k : {ScenarioKind::parallel, ScenarioKind::merging, ScenarioKind::following, ScenarioKind::meeting,
                   ScenarioKind::group_avoid})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown scenario kind '" + std::string(s) + "'");
}

struct SynthParams {
    double speed = 1.2;        // m/s
    double spacing = 1.0;      // lateral offset (parallel, groups) or gap (following), m
    double noise = 0.0;        // std-dev of additive position noise, m
    std::size_t frames = 20;   // key frames to generate
    bool random_placement = true;
};

namespace detail {

struct Agent {
    Vec2 pos;
    Vec2 vel;
    Vec2 desired;          // desired velocity
    std::optional<Vec2> waypoint;  // steer toward this point until reached, then follow `desired`
    int group = -1;        // agents sharing a group id do not repel each other
};

// Social-force integration; returns positions sampled every key frame.
inline std::vector<std::vector<Vec2>> simulate(std::vector<Agent> agents, std::size_t frames) {
    constexpr double tau = 0.5, strength = 2.1, range = 0.3, radius = 0.6, lambda = 0.35;
    constexpr int substeps = 10;
    const double dt = kKeyFrameInterval / substeps;
    std::vector<std::vector<Vec2>> out(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        for (const auto& a : agents) out[f].push_back(a.pos);
        for (int s = 0; s < substeps; ++s) {
            std::vector<Vec2> acc(agents.size());
            for (std::size_t i = 0; i < agents.size(); ++i) {
                auto& a = agents[i];
                Vec2 goal = a.desired;
                if (a.waypoint) {
                    const Vec2 d = *a.waypoint - a.pos;
                    if (d.norm() < 0.3) {
                        a.waypoint.reset();
                    } else {
                        goal = (a.desired.norm() / d.norm()) * d;
                    }
                }
                acc[i] = (1.0 / tau) * (goal - a.vel);
                for (std::size_t j = 0; j < agents.size(); ++j) {
                    if (j == i || (a.group >= 0 && a.group == agents[j].group)) continue;
                    const Vec2 diff = a.pos - agents[j].pos;
                    const double d = diff.norm();
                    if (d < 1e-9) continue;
                    const Vec2 n = (1.0 / d) * diff;
                    const double speed = a.vel.norm();
                    const double cos_phi = speed > 1e-9 ? -(n.x * a.vel.x + n.y * a.vel.y) / speed : 1.0;
                    const double aniso = lambda + (1.0 - lambda) * 0.5 * (1.0 + cos_phi);
                    acc[i] = acc[i] + (strength * std::exp((radius - d) / range) * aniso) * n;
                }
            }
            for (std::size_t i = 0; i < agents.size(); ++i) {
                agents[i].vel = agents[i].vel + dt * acc[i];
                agents[i].pos = agents[i].pos + dt * agents[i].vel;
            }
        }
    }
    return out;
}

inline Vec2 heading(double angle) { return {std::cos(angle), std::sin(angle)}; }

}  // namespace detail

/// Deterministic scenario: the same (kind, params, seed) always yields the
/// same scene within a build. Pedestrian ids start at 1.
inline Scene synth_scenario(ScenarioKind kind, const SynthParams& params, std::uint64_t seed) {
    if (params.frames == 0) throw std::invalid_argument("synth_scenario: frames must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double v = params.speed;
    const double dt = kKeyFrameInterval;
    const auto n_frames = params.frames;
    const double horizon = dt * static_cast<double>(n_frames - 1);
    std::vector<std::vector<Vec2>> tracks;  // [frame][ped]

    switch (kind) {
        case ScenarioKind::parallel: {
            tracks.resize(n_frames);
            for (std::size_t f = 0; f < n_frames; ++f) {
                const double x = v * dt * static_cast<double>(f);
                tracks[f] = {{x, 0.0}, {x, params.spacing}};
            }
            break;
        }
        case ScenarioKind::following: {
            // Leader walks along +x, turns by a random angle around a random
            // time; the follower retraces the leader's path `spacing` behind.
            const double turn_at = (0.25 + 0.5 * unit(rng)) * horizon;
            const double turn = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + 0.7 * unit(rng));
            const double turn_duration = 1.2;
            const double delay = params.spacing / v;
            const double ds = 0.01;
            auto heading_at = [&](double t) {
                const double w = std::clamp((t - turn_at) / turn_duration, 0.0, 1.0);
                return turn * w;
            };
            auto leader_at = [&](double t) {
                // Integrate from t = -delay so that the follower's past is defined.
                Vec2 p{-v * delay, 0.0};
                for (double s = -delay; s < t - 1e-12; s += ds) {
                    const double h = std::min(ds, t - s);
                    p = p + (v * h) * detail::heading(heading_at(s + 0.5 * h));
                }
                return p;
            };
            tracks.resize(n_frames);
            for (std::size_t f = 0; f < n_frames; ++f) {
                const double t = dt * static_cast<double>(f);
                tracks[f] = {leader_at(t), leader_at(t - delay)};
            }
            break;
        }
        case ScenarioKind::meeting: {
            const double meet = (0.35 + 0.45 * unit(rng)) * horizon;
            const double lateral = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.05 + 0.3 * unit(rng));
            const double half = v * meet;
            std::vector<detail::Agent> agents = {
                {{-half, lateral / 2}, {v, 0.0}, {v, 0.0}, std::nullopt, -1},
                {{half, -lateral / 2}, {-v, 0.0}, {-v, 0.0}, std::nullopt, -1},
            };
            tracks = detail::simulate(std::move(agents), n_frames);
            break;
        }
        case ScenarioKind::merging: {
            const double merge_x = (0.4 + 0.3 * unit(rng)) * v * horizon;
            const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
            const double lag = params.spacing * (1.0 + unit(rng));
            std::vector<detail::Agent> agents = {
                {{0.0, 0.0}, {v, 0.0}, {v, 0.0}, std::nullopt, -1},
                {{merge_x - lag - merge_x * 0.7, side * merge_x * 0.7},
                 {v * 0.7071, -side * v * 0.7071},
                 {v, 0.0},
                 Vec2{merge_x - lag, 0.0},
                 -1},
            };
            tracks = detail::simulate(std::move(agents), n_frames);
            break;
        }
        case ScenarioKind::group_avoid: {
            const double meet = (0.35 + 0.45 * unit(rng)) * horizon;
            const double half = v * meet;
            const double lateral = (unit(rng) - 0.5) * params.spacing;
            std::vector<detail::Agent> agents = {
                {{-half, -params.spacing / 2}, {v, 0.0}, {v, 0.0}, std::nullopt, 0},
                {{-half, params.spacing / 2}, {v, 0.0}, {v, 0.0}, std::nullopt, 0},
                {{half, lateral}, {-v, 0.0}, {-v, 0.0}, std::nullopt, -1},
            };
            tracks = detail::simulate(std::move(agents), n_frames);
            break;
        }
    }

    double angle = 0.0;
    Vec2 offset{};
    if (params.random_placement) {
        angle = 2.0 * std::numbers::pi * unit(rng);
        offset = {20.0 * (unit(rng) - 0.5), 20.0 * (unit(rng) - 0.5)};
    }
    const double c = std::cos(angle), s = std::sin(angle);
    std::normal_distribution<double> gauss(0.0, params.noise > 0.0 ? params.noise : 1.0);

    Scene scene;
    scene.name = std::string(to_string(kind));
    scene.frames.resize(n_frames);
    for (std::size_t f = 0; f < n_frames; ++f)
        for (std::size_t p = 0; p < tracks[f].size(); ++p) {
            const Vec2 q = tracks[f][p];
            Vec2 r{c * q.x - s * q.y + offset.x, s * q.x + c * q.y + offset.y};
            if (params.noise > 0.0) r = r + Vec2{gauss(rng), gauss(rng)};
            scene.frames[f][static_cast<std::int64_t>(p + 1)] = r;
        }
    return scene;
}

/// Concatenates scenes back to back in time under one name. Pedestrian ids are
/// offset per part so they stay unique; since no pedestrian spans two parts,
/// windows never straddle a boundary.
inline Scene concat_scenes(const std::vector<Scene>& parts, std::string name) {
    Scene out;
    out.name = std::move(name);
    std::int64_t id_base = 0;
    for (const auto& part : parts) {
        std::int64_t max_id = 0;
        for (const auto& frame : part.frames) {
            auto& dst = out.frames.emplace_back();
            for (const auto& [id, p] : frame) {
                dst[id + id_base] = p;
                max_id = std::max(max_id, id);
            }
        }
        id_base += max_id;
    }
    return out;
}

}  // namespace sralstm
