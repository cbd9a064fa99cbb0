#pragma once

// Command-line front end: train, eval, ablate, predict and synth.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "checkpoint.hpp"
#include "data.hpp"
#include "evalkit.hpp"
#include "model.hpp"
#include "pipeline.hpp"
#include "synth.hpp"

namespace sralstm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DataConfig {
    std::map<std::string, fs::path> scenes;  // scene name -> annotation file
    std::string held_out = "ETH-univ";
    double source_timestep = kKeyFrameInterval;
    std::size_t stride = 1;
};

struct RunConfig {
    ModelConfig model;
    bool model_from_file = false;
    TrainConfig train;
    std::size_t save_every = 10;
    DataConfig data;
    fs::path out_dir = "out";
    unsigned threads = 1;
};

/// Reads a run configuration. Relative scene paths resolve against the
/// directory holding the configuration file. Unknown keys are rejected.
inline RunConfig load_run_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const std::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    RunConfig rc;
    const fs::path base = path.parent_path();
    auto reject_unknown = [](const json& obj, std::initializer_list<const char*> keys, const char* where) {
        for (const auto& [k, _] : obj.items())
            if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
                throw ConfigError(std::string("config: unknown key '") + k + "' in " + where);
    };
    try {
        reject_unknown(j, {"model", "train", "data", "out", "threads"}, "top level");
        if (j.contains("model")) {
            const auto& m = j["model"];
            reject_unknown(m, {"embed_dim", "hidden_dim", "strategy", "obs_len", "pred_len"}, "model");
            rc.model_from_file = true;
            rc.model.embed_dim = m.value("embed_dim", rc.model.embed_dim);
            rc.model.hidden_dim = m.value("hidden_dim", rc.model.hidden_dim);
            if (m.contains("strategy")) rc.model.strategy = parse_strategy(m["strategy"].get<std::string>());
            rc.model.obs_len = m.value("obs_len", rc.model.obs_len);
            rc.model.pred_len = m.value("pred_len", rc.model.pred_len);
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            reject_unknown(t, {"learning_rate", "epochs", "seed", "clip_norm", "augment_rotation", "save_every"},
                           "train");
            rc.train.adam.learning_rate = t.value("learning_rate", rc.train.adam.learning_rate);
            rc.train.epochs = t.value("epochs", rc.train.epochs);
            rc.train.seed = t.value("seed", rc.train.seed);
            rc.train.clip_norm = t.value("clip_norm", rc.train.clip_norm);
            rc.train.augment_rotation = t.value("augment_rotation", rc.train.augment_rotation);
            rc.save_every = t.value("save_every", rc.save_every);
        }
        if (j.contains("data")) {
            const auto& d = j["data"];
            reject_unknown(d, {"scenes", "held_out", "source_timestep", "stride"}, "data");
            if (d.contains("scenes"))
                for (const auto& [name, p] : d["scenes"].items()) {
                    fs::path sp = p.get<std::string>();
                    rc.data.scenes[name] = sp.is_absolute() ? sp : base / sp;
                }
            rc.data.held_out = d.value("held_out", rc.data.held_out);
            rc.data.source_timestep = d.value("source_timestep", rc.data.source_timestep);
            rc.data.stride = d.value("stride", rc.data.stride);
        }
        if (j.contains("out")) {
            fs::path o = j["out"].get<std::string>();
            rc.out_dir = o.is_absolute() ? o : base / o;
        }
        rc.threads = j.value("threads", rc.threads);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    rc.model.validate();
    return rc;
}

inline void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot write " + tmp.string());
        os << content;
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline Scene load_scene(const fs::path& path, const std::string& name, double source_timestep) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open scene file " + path.string() + " for '" + name + "'");
    try {
        return regrid(parse_annotations(is), source_timestep, name);
    } catch (const ParseError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

inline std::vector<Scene> load_scenes(const DataConfig& dc) {
    if (dc.scenes.empty()) throw ConfigError("config: data.scenes is empty");
    if (!dc.scenes.count(dc.held_out)) throw ConfigError("config: held-out scene '" + dc.held_out + "' is not configured");
    std::vector<Scene> scenes;
    for (const auto& [name, p] : dc.scenes) scenes.push_back(load_scene(p, name, dc.source_timestep));
    return scenes;
}

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fixed4(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline json report_json(const EvalReport& r) {
    json windows = json::array();
    for (const auto& w : r.windows)
        windows.push_back({{"start_frame", w.start_frame}, {"ped_ids", w.ped_ids}, {"displacements", w.displacements}});
    return {{"scene", r.scene},
            {"window_count", r.window_count},
            {"pedestrian_count", r.pedestrian_count},
            {"ade", r.ade},
            {"fde", r.fde},
            {"windows", windows}};
}

inline std::string report_table(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << "scene\twindows\tpedestrians\tADE\tFDE\n";
    double ade_sum = 0.0, fde_sum = 0.0;
    for (const auto& r : reports) {
        os << r.scene << '\t' << r.window_count << '\t' << r.pedestrian_count << '\t' << fixed4(r.ade) << '\t'
           << fixed4(r.fde) << '\n';
        ade_sum += r.ade;
        fde_sum += r.fde;
    }
    if (reports.size() > 1) {
        const double n = static_cast<double>(reports.size());
        os << "AVG\t-\t-\t" << fixed4(ade_sum / n) << '\t' << fixed4(fde_sum / n) << '\n';
    }
    return os.str();
}

// Shared flag values; a flag overrides the configuration file when given.
struct Overrides {
    std::string config_path;
    std::string held_out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::string strategy;
    std::string out;
    std::vector<std::string> emit;
};

inline RunConfig resolve(const Overrides& o) {
    RunConfig rc = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
    if (!o.held_out.empty()) rc.data.held_out = o.held_out;
    if (o.seed) rc.train.seed = *o.seed;
    if (o.epochs) rc.train.epochs = *o.epochs;
    if (!o.strategy.empty()) rc.model.strategy = parse_strategy(o.strategy);
    if (!o.out.empty()) rc.out_dir = o.out;
    return rc;
}

inline bool emits(const Overrides& o, std::string_view what) {
    return std::find(o.emit.begin(), o.emit.end(), what) != o.emit.end();
}

inline int cmd_train(const Overrides& o, std::ostream& out) {
    RunConfig rc = resolve(o);
    const auto scenes = load_scenes(rc.data);
    const auto split = leave_one_out(scenes, rc.data.held_out, rc.model.obs_len, rc.model.pred_len, rc.data.stride);
    if (split.train.empty()) throw DataError("no training windows outside held-out scene '" + rc.data.held_out + "'");
    fs::create_directories(rc.out_dir);

    ModelParams params = ModelParams::init(rc.model, rc.train.seed);
    AdamState adam(rc.train.adam);
    std::string log;
    std::vector<double> losses;
    const auto partial_ckpt = rc.out_dir / "checkpoint.partial.bin";
    const auto partial_log = rc.out_dir / "loss.log.partial";
    auto on_epoch = [&](const EpochSummary& s) {
        losses.push_back(s.mean_loss);
        log += std::to_string(s.epoch) + "\t" + fmt_double(s.mean_loss) + "\n";
        if (emits(o, "loss")) out << "epoch " << s.epoch << " loss " << fmt_double(s.mean_loss) << '\n';
        if (rc.save_every > 0 && s.epoch % rc.save_every == 0) {
            save_checkpoint(partial_ckpt, make_checkpoint(params, &adam, {s.epoch, rc.train.seed, losses}));
            write_file_atomic(partial_log, log);
        }
    };
    train(params, adam, split.train, rc.train, on_epoch);
    save_checkpoint(rc.out_dir / "checkpoint.bin", make_checkpoint(params, &adam, {rc.train.epochs, rc.train.seed, losses}));
    write_file_atomic(rc.out_dir / "loss.log", log);
    fs::remove(partial_ckpt);
    fs::remove(partial_log);
    out << "trained " << to_string(rc.model.strategy) << " on " << split.train.size() << " windows from "
        << split.train_scenes.size() << " scenes for " << rc.train.epochs << " epochs; final loss "
        << (losses.empty() ? std::string("n/a") : fmt_double(losses.back())) << '\n';
    return kOk;
}

// The model shape comes from the configuration file when it has a model
// section, otherwise from the checkpoint; either way it must fit the stored
// tensors exactly.
inline ModelParams load_model(const fs::path& ckpt_path, const RunConfig& rc, const Overrides& o) {
    const Checkpoint ck = load_checkpoint(ckpt_path);
    ModelConfig mc = rc.model_from_file ? rc.model : ck.config;
    if (!o.strategy.empty()) mc.strategy = parse_strategy(o.strategy);
    ModelParams params = ModelParams::zeros(mc);
    restore_params(params, ck);
    return params;
}

inline int cmd_eval(const Overrides& o, const std::string& checkpoint, const std::string& split_name,
                    std::ostream& out) {
    RunConfig rc = resolve(o);
    const ModelParams params = load_model(checkpoint, rc, o);
    const auto& mc = params.config();
    const auto scenes = load_scenes(rc.data);
    const auto split = leave_one_out(scenes, rc.data.held_out, mc.obs_len, mc.pred_len, rc.data.stride);
    std::vector<EvalReport> reports;
    if (split_name == "test") {
        reports.push_back(evaluate(params, split.test, split.test_scene, rc.threads));
    } else {
        for (const auto& s : scenes) {
            if (s.name == rc.data.held_out) continue;
            const auto w = build_windows(s, mc.obs_len, mc.pred_len, rc.data.stride);
            reports.push_back(evaluate(params, w, s.name, rc.threads));
        }
    }
    json doc = {{"checkpoint", fs::path(checkpoint).filename().string()},
                {"split", split_name},
                {"config", detail::config_json(mc)},
                {"scenes", json::array()}};
    std::ostringstream timing;
    for (const auto& r : reports) {
        doc["scenes"].push_back(report_json(r));
        timing << r.scene << "\t" << r.seconds_per_step << " s per step (" << std::thread::hardware_concurrency()
               << " hardware threads)\n";
    }
    const std::string table = report_table(reports);
    write_file_atomic(rc.out_dir / "eval.txt", table);
    write_file_atomic(rc.out_dir / "eval.json", doc.dump(2) + "\n");
    write_file_atomic(rc.out_dir / "eval_timing.txt", timing.str());
    out << table;
    return kOk;
}

inline std::vector<AttentionStrategy> parse_strategy_list(const std::string& s) {
    std::vector<AttentionStrategy> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');)
        if (!tok.empty()) out.push_back(parse_strategy(tok));
    if (out.empty()) throw ConfigError("empty strategy list");
    return out;
}

inline int cmd_ablate(const Overrides& o, const std::string& strategies, std::ostream& out) {
    RunConfig rc = resolve(o);
    const auto list = parse_strategy_list(strategies);
    const auto scenes = load_scenes(rc.data);
    const auto split = leave_one_out(scenes, rc.data.held_out, rc.model.obs_len, rc.model.pred_len, rc.data.stride);
    if (split.train.empty() || split.test.empty()) throw DataError("ablate: empty train or test split");
    auto cb = [&](AttentionStrategy s, const EpochSummary& e) {
        if (emits(o, "loss")) out << to_string(s) << " epoch " << e.epoch << " loss " << fmt_double(e.mean_loss) << '\n';
    };
    const auto rows = ablate(list, rc.model, rc.train, split.train, split.test, cb);
    std::ostringstream table;
    table << "strategy\tparameters\tfinal_loss\tADE\tFDE\n";
    json doc = {{"held_out", rc.data.held_out},
                {"seed", rc.train.seed},
                {"epochs", rc.train.epochs},
                {"rows", json::array()}};
    for (const auto& r : rows) {
        table << to_string(r.strategy) << '\t' << r.parameters << '\t' << fixed4(r.final_train_loss) << '\t'
              << fixed4(r.ade) << '\t' << fixed4(r.fde) << '\n';
        doc["rows"].push_back({{"strategy", std::string(to_string(r.strategy))},
                               {"parameters", r.parameters},
                               {"final_train_loss", r.final_train_loss},
                               {"ade", r.ade},
                               {"fde", r.fde}});
    }
    write_file_atomic(rc.out_dir / "ablation.txt", table.str());
    write_file_atomic(rc.out_dir / "ablation.json", doc.dump(2) + "\n");
    out << table.str();
    return kOk;
}

struct PredictSource {
    std::string scene_file;
    std::string synth_kind;
    std::uint64_t synth_seed = 0;
    std::size_t synth_frames = 20;
    std::optional<std::size_t> window;
    bool future = false;
};

inline int cmd_predict(const Overrides& o, const std::string& checkpoint, const PredictSource& src, std::ostream& out) {
    RunConfig rc = resolve(o);
    const ModelParams params = load_model(checkpoint, rc, o);
    const auto& mc = params.config();
    Scene scene;
    if (!src.scene_file.empty() == !src.synth_kind.empty())
        throw ConfigError("predict: give exactly one of --scene or --synth");
    if (!src.scene_file.empty()) {
        scene = load_scene(src.scene_file, fs::path(src.scene_file).stem().string(), rc.data.source_timestep);
    } else {
        SynthParams sp;
        sp.frames = src.synth_frames;
        scene = synth_scenario(parse_scenario_kind(src.synth_kind), sp, src.synth_seed);
    }

    struct Job {
        std::size_t start = 0;
        std::vector<std::int64_t> ids;
        std::vector<std::vector<Vec2>> frames;  // obs only, or obs + pred with truth
        bool has_truth = false;
    };
    std::vector<Job> jobs;
    const std::size_t total = mc.obs_len + mc.pred_len;
    if (src.future || scene.frames.size() < total) {
        if (scene.frames.size() < mc.obs_len) throw DataError("predict: scene shorter than the observation length");
        const std::size_t start = scene.frames.size() - mc.obs_len;
        Job j;
        j.start = start;
        for (const auto& [id, _] : scene.frames[start]) {
            bool all = true;
            for (std::size_t f = start; all && f < scene.frames.size(); ++f) all = scene.frames[f].count(id) > 0;
            if (all) j.ids.push_back(id);
        }
        if (j.ids.empty()) throw DataError("predict: no pedestrian spans the last observed frames");
        for (std::size_t f = start; f < scene.frames.size(); ++f) {
            auto& row = j.frames.emplace_back();
            for (auto id : j.ids) row.push_back(scene.frames[f].at(id));
        }
        jobs.push_back(std::move(j));
    } else {
        auto windows = build_windows(scene, mc.obs_len, mc.pred_len, rc.data.stride);
        if (src.window) {
            if (*src.window >= windows.size())
                throw DataError("predict: window " + std::to_string(*src.window) + " out of range (" +
                                std::to_string(windows.size()) + " windows)");
            windows = {windows[*src.window]};
        }
        for (auto& w : windows) jobs.push_back({w.start_frame, w.ped_ids, w.positions, true});
    }

    const ParamVars pv = ParamVars::bind(params);
    const bool want_attention = emits(o, "attention");
    std::ostringstream traj, att;
    traj << "window\tped_id\tframe\tphase\tobs_x\tobs_y\ttrue_x\ttrue_y\tpred_x\tpred_y\n";
    att << "window\tstep\tframe\tped_id\tneighbor_id\tweight\n";
    for (std::size_t wi = 0; wi < jobs.size(); ++wi) {
        const auto& job = jobs[wi];
        Tape tape(false);
        std::vector<std::vector<Vec2>> observed(job.frames.begin(), job.frames.begin() + static_cast<std::ptrdiff_t>(mc.obs_len));
        const auto res = rollout_observed(tape, pv, job.ids, observed, want_attention);
        for (std::size_t p = 0; p < job.ids.size(); ++p) {
            for (std::size_t f = 0; f < total; ++f) {
                traj << wi << '\t' << job.ids[p] << '\t' << job.start + f << '\t';
                if (f < mc.obs_len) {
                    traj << "obs\t" << fmt_double(job.frames[f][p].x) << '\t' << fmt_double(job.frames[f][p].y)
                         << "\t\t\t\t\n";
                } else {
                    const Vec2 pr = res.predicted_abs[p][f - mc.obs_len];
                    traj << "pred\t\t\t";
                    if (job.has_truth) traj << fmt_double(job.frames[f][p].x) << '\t' << fmt_double(job.frames[f][p].y);
                    else traj << '\t';
                    traj << '\t' << fmt_double(pr.x) << '\t' << fmt_double(pr.y) << '\n';
                }
            }
        }
        for (std::size_t s = 0; s < res.attention_trace.size(); ++s)
            for (std::size_t i = 0; i < job.ids.size(); ++i)
                for (std::size_t j = 0; j < job.ids.size(); ++j)
                    if (i != j)
                        att << wi << '\t' << s << '\t' << job.start + s << '\t' << job.ids[i] << '\t' << job.ids[j]
                            << '\t' << fmt_double(res.attention_trace[s][i][j]) << '\n';
    }
    write_file_atomic(rc.out_dir / "predictions.tsv", traj.str());
    if (want_attention) write_file_atomic(rc.out_dir / "attention.tsv", att.str());
    out << "wrote " << jobs.size() << " window(s) to " << (rc.out_dir / "predictions.tsv").string() << '\n';
    return kOk;
}

struct SynthOptions {
    std::string kind;
    std::uint64_t seed = 0;
    std::size_t count = 1;
    SynthParams params;
    std::string out_file;
};

inline int cmd_synth(const SynthOptions& so, std::ostream& out) {
    const auto kind = parse_scenario_kind(so.kind);
    std::vector<Scene> parts;
    for (std::size_t i = 0; i < so.count; ++i) parts.push_back(synth_scenario(kind, so.params, so.seed + i));
    const Scene scene = concat_scenes(parts, std::string(to_string(kind)));
    std::ostringstream os;
    os << "# synthetic " << to_string(kind) << " seed " << so.seed << " count " << so.count
       << "; frame_id ped_id x y, key frames every 0.4 s\n";
    write_annotations(os, scene_annotations(scene));
    write_file_atomic(so.out_file, os.str());
    out << "wrote " << scene.frames.size() << " frames to " << so.out_file << '\n';
    return kOk;
}

/// Parses arguments and dispatches; never throws.
inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Social-relationship attention LSTM trajectory predictor"};
    app.require_subcommand(1);
    Overrides o;
    std::string checkpoint, split = "test", strategies = "none,sa,ra,sra";
    PredictSource ps;
    SynthOptions so;
    std::uint64_t seed_flag = 0;
    std::size_t epochs_flag = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "Run configuration (JSON)");
        sub->add_option("--held-out", o.held_out, "Scene held out for testing");
        sub->add_option("--seed", seed_flag, "Random seed");
        sub->add_option("--epochs", epochs_flag, "Training epochs");
        sub->add_option("--strategy", o.strategy, "Attention strategy")
            ->check(CLI::IsMember({"none", "sa", "ra", "sra"}));
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--emit", o.emit, "Extra outputs")->check(CLI::IsMember({"trajectories", "attention", "loss"}));
    };
    auto* train_cmd = app.add_subcommand("train", "Leave-one-out training");
    add_common(train_cmd);
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint (ADE/FDE)");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    eval_cmd->add_option("--split", split, "test (held-out scene) or train (one row per training scene)")
        ->check(CLI::IsMember({"test", "train"}));
    auto* ablate_cmd = app.add_subcommand("ablate", "Attention-strategy comparison");
    add_common(ablate_cmd);
    ablate_cmd->add_option("--strategies", strategies, "Comma-separated strategies");
    auto* predict_cmd = app.add_subcommand("predict", "Emit predicted trajectories as TSV");
    add_common(predict_cmd);
    predict_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    predict_cmd->add_option("--scene", ps.scene_file, "Annotation file");
    predict_cmd->add_option("--synth", ps.synth_kind, "Synthetic scenario kind");
    predict_cmd->add_option("--synth-seed", ps.synth_seed, "Synthetic scenario seed");
    predict_cmd->add_option("--frames", ps.synth_frames, "Synthetic scenario length in key frames");
    predict_cmd->add_option("--window", ps.window, "Only this window index");
    predict_cmd->add_flag("--future", ps.future, "Predict beyond the last frames (no ground truth)");
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scenario annotation file");
    synth_cmd->add_option("--kind", so.kind, "parallel|merging|following|meeting|group_avoid")->required();
    synth_cmd->add_option("--seed", so.seed, "Seed of the first instance");
    synth_cmd->add_option("--count", so.count, "Instances concatenated in time");
    synth_cmd->add_option("--frames", so.params.frames, "Key frames per instance");
    synth_cmd->add_option("--speed", so.params.speed, "Walking speed, m/s");
    synth_cmd->add_option("--spacing", so.params.spacing, "Lateral spacing or following gap, m");
    synth_cmd->add_option("--noise", so.params.noise, "Position noise std-dev, m");
    synth_cmd->add_option("--out", so.out_file, "Output annotation file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
    }
    for (auto* sub : {train_cmd, eval_cmd, ablate_cmd, predict_cmd}) {
        if (sub->count("--seed")) o.seed = seed_flag;
        if (sub->count("--epochs")) o.epochs = epochs_flag;
    }

    try {
        if (*train_cmd) return cmd_train(o, out);
        if (*eval_cmd) return cmd_eval(o, checkpoint, split, out);
        if (*ablate_cmd) return cmd_ablate(o, strategies, out);
        if (*predict_cmd) return cmd_predict(o, checkpoint, ps, out);
        if (*synth_cmd) return cmd_synth(so, out);
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << '\n';
        return kNumeric;
    } catch (const CheckpointError& e) {
        err << "error: " << e.what() << '\n';
        return e.kind() == CheckpointError::Kind::shape_mismatch ? kUsage : kData;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    } catch (const ParseError& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}

}  // namespace sralstm::cli
