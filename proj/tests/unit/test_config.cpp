#include <gtest/gtest.h>
#include <json.hpp>

#include "ssmdiff/config.hpp"
#include "ssmdiff/error.hpp"
#include "ssmdiff/io.hpp"

namespace ssmdiff {
namespace {

using nlohmann::json;

json base() { return json::parse(io::read_file(std::string(SSMDIFF_CONFIG_DIR) + "/smoke.json")); }

std::string message_for(const json& j) {
  try {
    parse_config(j.dump());
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"smoke.json", "gridworld_5x5.json"}) {
    const ExperimentConfig c = load_config(std::string(SSMDIFF_CONFIG_DIR) + "/" + name);
    EXPECT_EQ(c.env.kind, "gridworld");
    EXPECT_EQ(c.training.condition_on, ConditionOn::current);
  }
  const ExperimentConfig g = load_config(std::string(SSMDIFF_CONFIG_DIR) + "/gridworld_5x5.json");
  EXPECT_EQ(g.env.width, 5);
  EXPECT_EQ(g.env.horizon, 8);
  EXPECT_EQ(g.diffusion.steps, 32);
  EXPECT_EQ(g.model.hidden_sizes, (std::vector<std::size_t>{128, 128}));
  EXPECT_FALSE(g.env.start.has_value());
  EXPECT_TRUE(g.eval.eval_set.empty());
}

TEST(Config, MissingKeyNamed) {
  json j = base();
  j["training"].erase("learning_rate");
  EXPECT_NE(message_for(j).find("training.learning_rate"), std::string::npos);
  j = base();
  j["env"]["reward"].erase("goal_value");
  EXPECT_NE(message_for(j).find("env.reward.goal_value"), std::string::npos);
}

TEST(Config, UnknownKeyRejected) {
  json j = base();
  j["model"]["dropout"] = 0.1;
  EXPECT_NE(message_for(j).find("model.dropout"), std::string::npos);
  j = base();
  j["extra"] = json::object();
  EXPECT_NE(message_for(j).find("extra"), std::string::npos);
}

TEST(Config, FieldValidation) {
  auto bad = [](auto mutate) {
    json j = base();
    mutate(j);
    return !message_for(j).empty();
  };
  EXPECT_TRUE(bad([](json& j) { j["env"]["p_move"] = 0.0; }));
  EXPECT_TRUE(bad([](json& j) { j["env"]["width"] = 0; }));
  EXPECT_TRUE(bad([](json& j) { j["env"]["reward"]["goal"] = json::array({7, 0}); }));
  EXPECT_TRUE(bad([](json& j) { j["diffusion"]["beta_max"] = 1.0; }));
  EXPECT_TRUE(bad([](json& j) { j["diffusion"]["beta_max"] = 0.01; }));  // abar_K not small
  EXPECT_TRUE(bad([](json& j) { j["diffusion"]["eta_mode"] = "other"; }));
  EXPECT_TRUE(bad([](json& j) { j["model"]["activation"] = "gelu"; }));
  EXPECT_TRUE(bad([](json& j) { j["model"]["hidden_sizes"] = json::array({0}); }));
  EXPECT_TRUE(bad([](json& j) { j["training"]["batch_size"] = 0; }));
  EXPECT_TRUE(bad([](json& j) { j["training"]["learning_rate"] = "fast"; }));
  EXPECT_TRUE(bad([](json& j) { j["training"]["condition_on"] = "both"; }));
  EXPECT_TRUE(bad([](json& j) { j["training"]["sync"] = {{"mode", "polyak"}}; }));
  EXPECT_TRUE(bad([](json& j) { j["training"]["checkpoint_every"] = 30; }));
  EXPECT_TRUE(bad([](json& j) { j["training"]["offset_sampling"] = "geometric"; }));
  EXPECT_TRUE(bad([](json& j) { j["eval"]["eval_set"] = json::array({json::array({0, 0, 9})}); }));
  EXPECT_FALSE(bad([](json& j) { j["eval"]["eval_set"] = json::array({json::array({0, 1, 2})}); }));
  EXPECT_FALSE(bad([](json& j) {
    j["training"]["offset_sampling"] = "geometric";
    j["training"]["gamma"] = 0.9;
  }));
}

TEST(Config, MalformedJson) { EXPECT_THROW(parse_config("{\"env\": "), ConfigError); }

TEST(Config, CanonicalRoundTrip) {
  const ExperimentConfig c = parse_config(base().dump());
  const std::string canon = to_json(c);
  EXPECT_EQ(to_json(parse_config(canon)), canon);
  EXPECT_EQ(config_digest(parse_config(canon)), config_digest(c));
}

TEST(Config, DigestTracksTrainingButNotEval) {
  const ExperimentConfig c = parse_config(base().dump());
  json j = base();
  j["eval"]["seed"] = 12345;
  j["eval"]["num_samples"] = 17;
  EXPECT_EQ(config_digest(parse_config(j.dump())), config_digest(c));
  j = base();
  j["training"]["seed"] = 12345;
  EXPECT_NE(config_digest(parse_config(j.dump())), config_digest(c));
  j = base();
  j["diffusion"]["K"] = 20;
  EXPECT_NE(config_digest(parse_config(j.dump())), config_digest(c));
  EXPECT_EQ(config_digest(c).size(), 16u);
}

TEST(Config, PointMassRecognisedAtParseTime) {
  json j = base();
  j["env"]["kind"] = "point_mass";
  EXPECT_EQ(parse_config(j.dump()).env.kind, "point_mass");
  j["env"]["kind"] = "maze";
  EXPECT_FALSE(message_for(j).empty());
}

}  // namespace
}  // namespace ssmdiff
