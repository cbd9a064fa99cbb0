#pragma once

// Trajectory data: annotation parsing, regridding onto key frames, sliding
// windows, rotation augmentation and the leave-one-out split.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sralstm {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Vec2&, const Vec2&) = default;
    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

/// Key-frame spacing of every regridded scene, seconds.
inline constexpr double kKeyFrameInterval = 0.4;

inline constexpr std::array<std::string_view, 5> kEthUcyScenes = {"ETH-univ", "ETH-hotel", "UCY-zara01",
                                                                  "UCY-zara02", "UCY-univ"};

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RawAnnotation {
    std::int64_t frame_id = 0;
    std::int64_t ped_id = 0;
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const RawAnnotation&, const RawAnnotation&) = default;
};

/// A scene on a uniform key-frame grid. frames[k] holds the pedestrians
/// present at time origin_time + k * kKeyFrameInterval.
struct Scene {
    std::string name;
    double origin_time = 0.0;
    std::vector<std::map<std::int64_t, Vec2>> frames;
    std::size_t dropped_single_observation = 0;
};

/// obs_len + pred_len aligned frames for the pedestrians present in all of them.
/// positions[f][p] is pedestrian ped_ids[p] at frame start_frame + f.
struct TrajectoryWindow {
    std::string scene;
    std::size_t start_frame = 0;
    std::size_t obs_len = 8;
    std::size_t pred_len = 12;
    std::vector<std::int64_t> ped_ids;
    std::vector<std::vector<Vec2>> positions;

    std::size_t num_peds() const { return ped_ids.size(); }
    std::size_t length() const { return positions.size(); }
    std::vector<Vec2> track(std::size_t p) const {
        std::vector<Vec2> t;
        t.reserve(positions.size());
        for (const auto& f : positions) t.push_back(f.at(p));
        return t;
    }
};

namespace detail {

template <class T>
bool parse_number(std::string_view tok, T& out) {
    const char* b = tok.data();
    const char* e = b + tok.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc{} && p == e;
}

}  // namespace detail

/// Reads whitespace-separated `frame_id ped_id x y` lines. Blank lines and
/// lines whose first non-space character is '#' are skipped.
inline std::vector<RawAnnotation> parse_annotations(std::istream& in) {
    std::vector<RawAnnotation> out;
    std::set<std::pair<std::int64_t, std::int64_t>> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty() || tok[0][0] == '#') continue;
        if (tok.size() != 4)
            throw ParseError(lineno, "expected 4 fields `frame_id ped_id x y`, got " + std::to_string(tok.size()));
        RawAnnotation a;
        if (!detail::parse_number(tok[0], a.frame_id)) throw ParseError(lineno, "bad frame_id '" + tok[0] + "'");
        if (!detail::parse_number(tok[1], a.ped_id)) throw ParseError(lineno, "bad ped_id '" + tok[1] + "'");
        if (!detail::parse_number(tok[2], a.x) || !std::isfinite(a.x))
            throw ParseError(lineno, "bad x '" + tok[2] + "'");
        if (!detail::parse_number(tok[3], a.y) || !std::isfinite(a.y))
            throw ParseError(lineno, "bad y '" + tok[3] + "'");
        if (!seen.emplace(a.frame_id, a.ped_id).second)
            throw ParseError(lineno, "duplicate (frame " + tok[0] + ", ped " + tok[1] + ")");
        out.push_back(a);
    }
    return out;
}

/// Writes annotations in the format parse_annotations reads. Values are
/// printed with 17 significant digits so they survive a round trip.
inline void write_annotations(std::ostream& os, const std::vector<RawAnnotation>& rows) {
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%lld %lld %.17g %.17g\n", static_cast<long long>(r.frame_id),
                      static_cast<long long>(r.ped_id), r.x, r.y);
        os << buf;
    }
}

/// Annotations of a gridded scene, frame ids being key-frame indices.
inline std::vector<RawAnnotation> scene_annotations(const Scene& scene) {
    std::vector<RawAnnotation> rows;
    for (std::size_t f = 0; f < scene.frames.size(); ++f)
        for (const auto& [id, p] : scene.frames[f]) rows.push_back({static_cast<std::int64_t>(f), id, p.x, p.y});
    return rows;
}

/// Linearly interpolates every pedestrian track onto the key-frame grid.
///
/// frame_id * source_timestep gives an annotation's time. The grid starts at
/// the earliest annotated time. No pedestrian is extrapolated beyond its own
/// first or last observation; pedestrians seen only once are dropped and
/// counted in Scene::dropped_single_observation.
inline Scene regrid(const std::vector<RawAnnotation>& rows, double source_timestep, std::string name = {}) {
    if (!(source_timestep > 0.0)) throw DataError("regrid: source timestep must be positive");
    Scene scene;
    scene.name = std::move(name);
    if (rows.empty()) return scene;

    std::map<std::int64_t, std::vector<std::pair<std::int64_t, Vec2>>> tracks;
    std::int64_t first_frame = rows.front().frame_id;
    for (const auto& r : rows) {
        tracks[r.ped_id].emplace_back(r.frame_id, Vec2{r.x, r.y});
        first_frame = std::min(first_frame, r.frame_id);
    }
    const double t0 = static_cast<double>(first_frame) * source_timestep;
    scene.origin_time = t0;
    constexpr double tol = 1e-9;

    // Grid index k sits at t0 + k * interval; work in units of grid steps.
    auto to_grid = [&](std::int64_t frame) {
        return (static_cast<double>(frame) * source_timestep - t0) / kKeyFrameInterval;
    };

    for (auto& [id, obs] : tracks) {
        std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        if (obs.size() < 2) {
            ++scene.dropped_single_observation;
            continue;
        }
        const double g_first = to_grid(obs.front().first);
        const double g_last = to_grid(obs.back().first);
        const auto k_begin = static_cast<std::size_t>(std::max(0.0, std::ceil(g_first - tol)));
        const auto k_end = static_cast<std::size_t>(std::floor(g_last + tol));
        std::size_t seg = 0;
        for (std::size_t k = k_begin; k <= k_end; ++k) {
            const double g = static_cast<double>(k);
            while (seg + 2 < obs.size() && to_grid(obs[seg + 1].first) < g - tol) ++seg;
            const double ga = to_grid(obs[seg].first);
            const double gb = to_grid(obs[seg + 1].first);
            const Vec2 a = obs[seg].second;
            const Vec2 b = obs[seg + 1].second;
            Vec2 p;
            if (std::abs(g - ga) <= tol) {
                p = a;
            } else if (std::abs(g - gb) <= tol) {
                p = b;
            } else {
                const double w = (g - ga) / (gb - ga);
                p = {a.x + (b.x - a.x) * w, a.y + (b.y - a.y) * w};
            }
            if (scene.frames.size() <= k) scene.frames.resize(k + 1);
            scene.frames[k][id] = p;
        }
    }
    return scene;
}

/// One window per start frame (at the given stride) containing every
/// pedestrian present in all obs_len + pred_len frames. Windows without such
/// pedestrians are dropped.
inline std::vector<TrajectoryWindow> build_windows(const Scene& scene, std::size_t obs_len, std::size_t pred_len,
                                                   std::size_t stride = 1) {
    if (obs_len == 0 || pred_len == 0 || stride == 0)
        throw std::invalid_argument("build_windows: lengths and stride must be positive");
    const std::size_t len = obs_len + pred_len;
    std::vector<TrajectoryWindow> out;
    if (scene.frames.size() < len) return out;
    for (std::size_t s = 0; s + len <= scene.frames.size(); s += stride) {
        TrajectoryWindow w;
        w.scene = scene.name;
        w.start_frame = s;
        w.obs_len = obs_len;
        w.pred_len = pred_len;
        for (const auto& [id, _] : scene.frames[s]) {
            bool all = true;
            for (std::size_t f = s + 1; all && f < s + len; ++f) all = scene.frames[f].count(id) > 0;
            if (all) w.ped_ids.push_back(id);
        }
        if (w.ped_ids.empty()) continue;
        w.positions.resize(len);
        for (std::size_t f = 0; f < len; ++f)
            for (auto id : w.ped_ids) w.positions[f].push_back(scene.frames[s + f].at(id));
        out.push_back(std::move(w));
    }
    return out;
}

/// Rigid rotation of every position about the scene origin.
inline TrajectoryWindow rotate_window(const TrajectoryWindow& w, double angle) {
    TrajectoryWindow r = w;
    const double c = std::cos(angle), s = std::sin(angle);
    for (auto& frame : r.positions)
        for (auto& p : frame) p = {c * p.x - s * p.y, s * p.x + c * p.y};
    return r;
}

struct Split {
    std::vector<std::string> train_scenes;
    std::string test_scene;
    std::vector<TrajectoryWindow> train;
    std::vector<TrajectoryWindow> test;
};

/// Train on every scene except `held_out`, test on `held_out`. No augmentation
/// is applied here; training applies rotation per mini-batch.
inline Split leave_one_out(const std::vector<Scene>& scenes, const std::string& held_out, std::size_t obs_len,
                           std::size_t pred_len, std::size_t stride = 1) {
    const bool known = std::any_of(scenes.begin(), scenes.end(), [&](const Scene& s) { return s.name == held_out; });
    if (!known) throw DataError("leave_one_out: unknown scene '" + held_out + "'");
    std::set<std::string> names;
    for (const auto& s : scenes)
        if (!names.insert(s.name).second) throw DataError("leave_one_out: duplicate scene '" + s.name + "'");
    Split split;
    split.test_scene = held_out;
    for (const auto& s : scenes) {
        auto windows = build_windows(s, obs_len, pred_len, stride);
        if (s.name == held_out) {
            split.test = std::move(windows);
        } else {
            split.train_scenes.push_back(s.name);
            split.train.insert(split.train.end(), std::make_move_iterator(windows.begin()),
                               std::make_move_iterator(windows.end()));
        }
    }
    return split;
}

}  // namespace sralstm
