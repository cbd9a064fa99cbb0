#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

std::vector<std::string> fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    for (;;) {
        const auto tab = line.find('\t', pos);
        out.push_back(line.substr(pos, tab - pos));
        if (tab == std::string::npos) return out;
        pos = tab + 1;
    }
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("sralstm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& args) const {
        const std::string cmd = std::string(SRALSTM_CLI) + " " + args + " >" + (dir_ / "stdout.txt").string() +
                                " 2>" + (dir_ / "stderr.txt").string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string out() const { return slurp(dir_ / "stdout.txt"); }
    std::string err() const { return slurp(dir_ / "stderr.txt"); }

    // Three small synthetic scenes and a compact model configuration.
    fs::path write_config(const std::string& held_out = "meeting") const {
        for (const char* kind : {"parallel", "following", "meeting"})
            EXPECT_EQ(run(std::string("synth --kind ") + kind + " --seed 1 --count 2 --out " +
                          (dir_ / (std::string(kind) + ".txt")).string()),
                      0)
                << err();
        nlohmann::json cfg = {
            {"model", {{"embed_dim", 8}, {"hidden_dim", 16}, {"strategy", "sra"}}},
            {"train", {{"epochs", 2}, {"seed", 7}, {"save_every", 1}}},
            {"data",
             {{"scenes", {{"parallel", "parallel.txt"}, {"following", "following.txt"}, {"meeting", "meeting.txt"}}},
              {"held_out", held_out}}},
        };
        const auto path = dir_ / "run.json";
        std::ofstream(path) << cfg.dump(2);
        return path;
    }

    std::string common(const fs::path& cfg, const std::string& out) const {
        return "--config " + cfg.string() + " --out " + (dir_ / out).string();
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, TrainWritesCheckpointAndDeterministicLog) {
    const auto cfg = write_config();
    ASSERT_EQ(run("train " + common(cfg, "a")), 0) << err();
    EXPECT_TRUE(fs::exists(dir_ / "a" / "checkpoint.bin"));
    EXPECT_FALSE(fs::exists(dir_ / "a" / "checkpoint.partial.bin"));
    const auto log = lines(slurp(dir_ / "a" / "loss.log"));
    ASSERT_EQ(log.size(), 2u);
    EXPECT_EQ(fields(log[0])[0], "1");
    EXPECT_EQ(fields(log[1])[0], "2");
    EXPECT_GT(std::stod(fields(log[1])[1]), 0.0);

    ASSERT_EQ(run("train " + common(cfg, "b") + " --emit loss"), 0) << err();
    EXPECT_EQ(slurp(dir_ / "a" / "loss.log"), slurp(dir_ / "b" / "loss.log"));
    EXPECT_EQ(slurp(dir_ / "a" / "checkpoint.bin"), slurp(dir_ / "b" / "checkpoint.bin"));
    EXPECT_NE(out().find("epoch"), std::string::npos);

    ASSERT_EQ(run("train " + common(cfg, "c") + " --seed 8 --epochs 1"), 0) << err();
    EXPECT_EQ(lines(slurp(dir_ / "c" / "loss.log")).size(), 1u);
}

TEST_F(Cli, MissingDataWritesNothing) {
    auto cfg = write_config();
    fs::remove(dir_ / "following.txt");
    EXPECT_EQ(run("train " + common(cfg, "a")), 2);
    EXPECT_NE(err().find("following"), std::string::npos) << err();
    EXPECT_FALSE(fs::exists(dir_ / "a" / "checkpoint.bin"));
}

TEST_F(Cli, EvalAndPredict) {
    const auto cfg = write_config();
    ASSERT_EQ(run("train " + common(cfg, "m")), 0) << err();
    const auto ckpt = (dir_ / "m" / "checkpoint.bin").string();

    ASSERT_EQ(run("eval --checkpoint " + ckpt + " --split train " + common(cfg, "e1")), 0) << err();
    const auto table = lines(slurp(dir_ / "e1" / "eval.txt"));
    int scene_rows = 0;
    for (const auto& l : table) scene_rows += l.rfind("parallel", 0) == 0 || l.rfind("following", 0) == 0;
    EXPECT_EQ(scene_rows, 2);
    ASSERT_EQ(run("eval --checkpoint " + ckpt + " --split train " + common(cfg, "e2")), 0) << err();
    EXPECT_EQ(slurp(dir_ / "e1" / "eval.txt"), slurp(dir_ / "e2" / "eval.txt"));
    EXPECT_EQ(slurp(dir_ / "e1" / "eval.json"), slurp(dir_ / "e2" / "eval.json"));
    const auto doc = nlohmann::json::parse(slurp(dir_ / "e1" / "eval.json"));
    EXPECT_EQ(doc["scenes"].size(), 2u);

    ASSERT_EQ(run("eval --checkpoint " + ckpt + " " + common(cfg, "e3")), 0) << err();
    const auto test_doc = nlohmann::json::parse(slurp(dir_ / "e3" / "eval.json"));
    ASSERT_EQ(test_doc["scenes"].size(), 1u);

    // One pedestrian in the parallel scenario means two walkers side by side.
    ASSERT_EQ(run("predict --checkpoint " + ckpt + " --synth parallel --synth-seed 3 --window 0 --emit attention " +
                  common(cfg, "p")),
              0)
        << err();
    const auto pred = lines(slurp(dir_ / "p" / "predictions.tsv"));
    ASSERT_EQ(pred.size(), 1u + 2 * 20);
    EXPECT_EQ(pred[0], "window\tped_id\tframe\tphase\tobs_x\tobs_y\ttrue_x\ttrue_y\tpred_x\tpred_y");
    for (std::size_t i = 1; i < pred.size(); ++i) {
        const auto f = fields(pred[i]);
        ASSERT_EQ(f.size(), 10u) << pred[i];
        if (f[3] == "pred") {
            EXPECT_FALSE(f[6].empty());
            EXPECT_FALSE(f[8].empty());
        }
    }
    const auto att = lines(slurp(dir_ / "p" / "attention.tsv"));
    std::map<std::pair<std::string, std::string>, double> sums;
    for (std::size_t i = 1; i < att.size(); ++i) {
        const auto f = fields(att[i]);
        sums[{f[1], f[3]}] += std::stod(f[5]);
    }
    ASSERT_FALSE(sums.empty());
    for (const auto& [k, s] : sums) EXPECT_NEAR(s, 1.0, 1e-12);

    ASSERT_EQ(run("predict --checkpoint " + ckpt + " --scene " + (dir_ / "meeting.txt").string() + " --future " +
                  common(cfg, "f")),
              0)
        << err();
    const auto fut = lines(slurp(dir_ / "f" / "predictions.tsv"));
    ASSERT_GT(fut.size(), 1u);
    for (std::size_t i = 1; i < fut.size(); ++i) {
        const auto f = fields(fut[i]);
        if (f[3] == "pred") {
            EXPECT_TRUE(f[6].empty() && f[7].empty());
            EXPECT_FALSE(f[8].empty());
        }
    }
    EXPECT_FALSE(fs::exists(dir_ / "f" / "attention.tsv"));
}

TEST_F(Cli, AblateRows) {
    const auto cfg = write_config();
    ASSERT_EQ(run("ablate --strategies sra --epochs 1 " + common(cfg, "one")), 0) << err();
    auto doc = nlohmann::json::parse(slurp(dir_ / "one" / "ablation.json"));
    EXPECT_EQ(doc["rows"].size(), 1u);
    ASSERT_EQ(run("ablate --epochs 1 " + common(cfg, "four")), 0) << err();
    doc = nlohmann::json::parse(slurp(dir_ / "four" / "ablation.json"));
    ASSERT_EQ(doc["rows"].size(), 4u);
    EXPECT_EQ(doc["rows"][0]["strategy"], "none");
    EXPECT_EQ(doc["rows"][3]["strategy"], "sra");
}

TEST_F(Cli, ExitCodes) {
    EXPECT_EQ(run(""), 1);
    EXPECT_EQ(run("train --strategy bogus"), 1);
    EXPECT_EQ(run("frobnicate"), 1);
    {
        std::ofstream(dir_ / "bad.json") << R"({"model": {"embed_dim": 8}, "trian": {}})";
    }
    EXPECT_EQ(run("train --config " + (dir_ / "bad.json").string()), 1);
    EXPECT_NE(err().find("trian"), std::string::npos) << err();

    const auto cfg = write_config("nowhere");
    EXPECT_EQ(run("train " + common(cfg, "x")), 1);

    EXPECT_EQ(run("eval --checkpoint " + (dir_ / "absent.bin").string()), 2);
    {
        std::ofstream(dir_ / "garbage.bin") << "not a checkpoint";
    }
    EXPECT_EQ(run("eval --checkpoint " + (dir_ / "garbage.bin").string()), 2);

    // Two walkers 2e308 apart overflow the relative geometry.
    {
        std::ofstream os(dir_ / "huge.txt");
        for (int f = 0; f < 40; ++f) {
            os << f << " 1 " << 1e308 << " 0\n";
            os << f << " 2 " << -1e308 << " 0\n";
        }
    }
    nlohmann::json bad = {
        {"model", {{"embed_dim", 4}, {"hidden_dim", 4}}},
        {"train", {{"epochs", 1}}},
        {"data", {{"scenes", {{"huge", "huge.txt"}, {"meeting", "meeting.txt"}}}, {"held_out", "meeting"}}},
    };
    std::ofstream(dir_ / "huge.json") << bad.dump();
    EXPECT_EQ(run("train --config " + (dir_ / "huge.json").string() + " --out " + (dir_ / "h").string()), 3) << err();
}
