#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "ssmdiff/error.hpp"
#include "ssmdiff/commands.hpp"
#include "ssmdiff/io.hpp"
#include "ssmdiff/mdp.hpp"
#include "test_support.hpp"

namespace ssmdiff {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Commands : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / (std::string("ssmdiff_cmd_") + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  json smoke() const { return json::parse(io::read_file(std::string(SSMDIFF_CONFIG_DIR) + "/smoke.json")); }

  std::string write_config(const json& j, const std::string& name = "config.json") const {
    const std::string p = (root_ / name).string();
    io::write_file(p, j.dump(2));
    return p;
  }
  std::string dir(const std::string& name) const { return (root_ / name).string(); }
  std::string file(const std::string& d, const std::string& name) const { return io::read_file((root_ / d / name).string()); }

  int train(const std::string& cfg, const std::string& out, const std::string& ckpt = "") {
    CommandOptions o;
    o.config_path = cfg;
    o.out_dir = dir(out);
    o.checkpoint_path = ckpt;
    return cmd_train(o, log_, err_);
  }
  int eval(const std::string& cfg, const std::string& out, const std::string& ckpt, std::optional<std::uint64_t> seed = {},
           bool override_digest = false) {
    CommandOptions o;
    o.config_path = cfg;
    o.out_dir = dir(out);
    o.checkpoint_path = ckpt;
    o.seed = seed;
    o.override_digest = override_digest;
    return cmd_eval(o, log_, err_);
  }
  int oracle(const std::string& cfg, const std::string& out) {
    CommandOptions o;
    o.config_path = cfg;
    o.out_dir = dir(out);
    return cmd_oracle(o, log_, err_);
  }

  fs::path root_;
  std::ostringstream log_;
  std::ostringstream err_;
};

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

TEST_F(Commands, TrainIsDeterministic) {
  const std::string cfg = write_config(smoke());
  ASSERT_EQ(train(cfg, "a"), exit_code::ok) << err_.str();
  ASSERT_EQ(train(cfg, "b"), exit_code::ok) << err_.str();
  EXPECT_EQ(file("a", "loss.csv"), file("b", "loss.csv"));
  EXPECT_EQ(file("a", "checkpoint.ckpt"), file("b", "checkpoint.ckpt"));
  EXPECT_EQ(lines(file("a", "loss.csv")).size(), 2u + 200 / 20);
  const json m = json::parse(file("a", "manifest.json"));
  EXPECT_EQ(m["version"], kVersion);
  EXPECT_EQ(m["steps"], 200);
  EXPECT_TRUE(fs::exists(root_ / "a" / "checkpoints" / "step_100.ckpt"));
}

TEST_F(Commands, ZeroStepsWritesInitialModel) {
  json j = smoke();
  j["training"]["steps"] = 0;
  const std::string cfg = write_config(j);
  ASSERT_EQ(train(cfg, "z"), exit_code::ok) << err_.str();
  EXPECT_EQ(lines(file("z", "loss.csv")).size(), 2u);
  EXPECT_TRUE(fs::exists(root_ / "z" / "checkpoint.ckpt"));
}

TEST_F(Commands, MissingKeyExitCode) {
  json j = smoke();
  j["training"].erase("batch_size");
  EXPECT_EQ(train(write_config(j), "m"), exit_code::config);
  EXPECT_NE(err_.str().find("training.batch_size"), std::string::npos);
  EXPECT_EQ(train(dir("no_such.json"), "m"), exit_code::config);
}

TEST_F(Commands, ResumeFromPeriodicCheckpointMatches) {
  const std::string cfg = write_config(smoke());
  ASSERT_EQ(train(cfg, "full"), exit_code::ok) << err_.str();
  ASSERT_EQ(train(cfg, "resumed", dir("full/checkpoints/step_100.ckpt")), exit_code::ok) << err_.str();
  const auto full = lines(file("full", "loss.csv"));
  const auto resumed = lines(file("resumed", "loss.csv"));
  ASSERT_EQ(resumed.size(), 2u + 100 / 20);
  for (std::size_t k = 2; k < resumed.size(); ++k) EXPECT_EQ(resumed[k], full[k + 5]);
  EXPECT_EQ(file("full", "checkpoint.ckpt"), file("resumed", "checkpoint.ckpt"));
}

TEST_F(Commands, EvalDeterministicAndDigestChecked) {
  const std::string cfg = write_config(smoke());
  ASSERT_EQ(train(cfg, "t"), exit_code::ok) << err_.str();
  const std::string ck = dir("t/checkpoint.ckpt");
  ASSERT_EQ(eval(cfg, "e1", ck), exit_code::ok) << err_.str();
  ASSERT_EQ(eval(cfg, "e2", ck), exit_code::ok) << err_.str();
  EXPECT_EQ(file("e1", "metrics.jsonl"), file("e2", "metrics.jsonl"));
  EXPECT_EQ(file("e1", "metrics.csv"), file("e2", "metrics.csv"));
  EXPECT_FALSE(fs::is_empty(root_ / "e1" / "heatmaps"));

  json other = smoke();
  other["training"]["seed"] = 999;
  const std::string cfg2 = write_config(other, "other.json");
  EXPECT_EQ(eval(cfg2, "e3", ck), exit_code::digest_mismatch);
  EXPECT_EQ(eval(cfg2, "e4", ck, {}, true), exit_code::ok) << err_.str();
}

TEST_F(Commands, EvalSeedChangesSamplesNotOracle) {
  const std::string cfg = write_config(smoke());
  ASSERT_EQ(train(cfg, "t"), exit_code::ok) << err_.str();
  const std::string ck = dir("t/checkpoint.ckpt");
  ASSERT_EQ(eval(cfg, "a", ck, 1), exit_code::ok);
  ASSERT_EQ(eval(cfg, "b", ck, 2), exit_code::ok);
  const auto la = lines(file("a", "metrics.jsonl"));
  const auto lb = lines(file("b", "metrics.jsonl"));
  ASSERT_EQ(la.size(), lb.size());
  bool any_diff = false;
  for (std::size_t k = 0; k + 1 < la.size(); ++k) {
    const json ja = json::parse(la[k]);
    const json jb = json::parse(lb[k]);
    EXPECT_EQ(ja["q_exact"], jb["q_exact"]);
    EXPECT_EQ(ja["oracle_pmf"], jb["oracle_pmf"]);
    any_diff = any_diff || ja["learned_pmf"] != jb["learned_pmf"];
  }
  EXPECT_TRUE(any_diff);
}

TEST_F(Commands, OracleDumpMatchesMatrixPowers) {
  const std::string cfg = write_config(smoke());
  ASSERT_EQ(oracle(cfg, "o"), exit_code::ok) << err_.str();
  const TabularMdp m = testing::grid(3, 3, 0.8, 4);
  const Policy pi = make_tour_policy(3, 3);
  std::map<std::tuple<int, int, int>, double> sums;
  const auto rows = lines(file("o", "ssm_oracle.csv"));
  ASSERT_EQ(rows[1], "s,a,n,x,probability");
  ASSERT_EQ(rows.size(), 2u + 9 * 4 * 4 * 9);
  for (std::size_t k = 2; k < rows.size(); ++k) {
    int s, a, n, x;
    double p;
    ASSERT_EQ(std::sscanf(rows[k].c_str(), "%d,%d,%d,%d,%lf", &s, &a, &n, &x, &p), 5);
    sums[{s, a, n}] += p;
    const auto powers = testing::k_step_distributions(m, pi, s, a, n);
    double want = 0.0;
    for (const auto& pk : powers) want += pk[static_cast<std::size_t>(x)] / n;
    EXPECT_NEAR(p, want, 1e-12);
  }
  for (const auto& [key, sum] : sums) EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_EQ(lines(file("o", "q_oracle.csv")).size(), 2u + 9 * 4 * 4);
}

TEST_F(Commands, OracleSingleCellIsPointMass) {
  json j = smoke();
  j["env"]["width"] = 1;
  j["env"]["height"] = 1;
  j["env"]["reward"]["goal"] = json::array({0, 0});
  ASSERT_EQ(oracle(write_config(j), "o"), exit_code::ok) << err_.str();
  const auto rows = lines(file("o", "ssm_oracle.csv"));
  for (std::size_t k = 2; k < rows.size(); ++k) EXPECT_EQ(rows[k].substr(rows[k].rfind(',') + 1), "1");
}

TEST_F(Commands, PointMassUnsupported) {
  json j = smoke();
  j["env"]["kind"] = "point_mass";
  const std::string cfg = write_config(j);
  EXPECT_EQ(oracle(cfg, "o"), exit_code::unsupported);
  EXPECT_EQ(train(cfg, "t"), exit_code::unsupported);
}

TEST_F(Commands, EveryOutputCarriesDigest) {
  const std::string cfg = write_config(smoke());
  ASSERT_EQ(train(cfg, "t"), exit_code::ok);
  ASSERT_EQ(eval(cfg, "e", dir("t/checkpoint.ckpt")), exit_code::ok);
  ASSERT_EQ(oracle(cfg, "o"), exit_code::ok);
  const std::string digest = json::parse(file("t", "manifest.json"))["config_digest"];
  for (const auto& [d, f] : std::vector<std::pair<std::string, std::string>>{
           {"t", "loss.csv"}, {"t", "checkpoint.ckpt"}, {"t", "manifest.json"}, {"e", "metrics.jsonl"},
           {"e", "metrics.csv"}, {"e", "manifest.json"}, {"o", "ssm_oracle.csv"}, {"o", "q_oracle.csv"},
           {"o", "manifest.json"}}) {
    EXPECT_NE(file(d, f).find(digest), std::string::npos) << d << "/" << f;
  }
  for (const auto& e : fs::directory_iterator(root_ / "e" / "heatmaps")) {
    EXPECT_NE(io::read_file(e.path().string()).find(digest), std::string::npos) << e.path();
  }
}

}  // namespace
}  // namespace ssmdiff
