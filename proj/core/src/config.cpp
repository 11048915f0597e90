#include "ssmdiff/config.hpp"

#include <cmath>
#include <set>

#include <json.hpp>

#include "ssmdiff/error.hpp"
#include "ssmdiff/io.hpp"

namespace ssmdiff {

using nlohmann::json;

namespace {

// Tracks which keys of one JSON object were read so leftovers can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError("missing config key '" + name(key) + "'");
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  T req(const std::string& key) {
    const json& v = raw(key);
    return convert<T>(v, key);
  }

  template <typename T>
  T opt(const std::string& key, T fallback) {
    if (!has(key)) return fallback;
    return req<T>(key);
  }

  Section sub(const std::string& key) { return Section(raw(key), name(key)); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      (void)v;
      if (!used_.count(k)) throw ConfigError("unknown config key '" + name(k) + "'");
    }
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  template <typename T>
  T convert(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("config key '" + name(key) + "' must be a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("config key '" + name(key) + "' must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<std::int64_t>() < 0) throw ConfigError("config key '" + name(key) + "' must be non-negative");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("config key '" + name(key) + "' must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("config key '" + name(key) + "' must be a string");
    }
    return v.get<T>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

template <typename F>
auto wrap_enum(const std::string& key, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

std::pair<int, int> cell_pair(const json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    throw ConfigError("config key '" + key + "' must be an [x, y] pair of integers");
  }
  return {v[0].get<int>(), v[1].get<int>()};
}

EnvConfig parse_env(Section s) {
  EnvConfig e;
  e.kind = s.req<std::string>("kind");
  require(e.kind == "gridworld" || e.kind == "point_mass",
          "config key 'env.kind' must be gridworld or point_mass");
  e.width = s.req<int>("width");
  e.height = s.req<int>("height");
  e.p_move = s.req<double>("p_move");
  e.horizon = s.req<int>("horizon");
  require(e.width >= 1 && e.height >= 1, "config keys 'env.width' and 'env.height' must be >= 1");
  require(e.p_move > 0.0 && e.p_move <= 1.0, "config key 'env.p_move' must lie in (0, 1]");
  require(e.horizon >= 1, "config key 'env.horizon' must be >= 1");

  Section r = s.sub("reward");
  std::tie(e.goal_x, e.goal_y) = cell_pair(r.raw("goal"), r.name("goal"));
  e.goal_value = r.req<double>("goal_value");
  e.other_value = r.req<double>("other_value");
  r.finish();
  require(e.goal_x >= 0 && e.goal_x < e.width && e.goal_y >= 0 && e.goal_y < e.height,
          "config key 'env.reward.goal' lies outside the grid");
  require(std::isfinite(e.goal_value) && std::isfinite(e.other_value), "rewards must be finite");

  const json& start = s.raw("start");
  if (start.is_string()) {
    require(start.get<std::string>() == "uniform", "config key 'env.start' must be \"uniform\" or [x, y]");
  } else {
    e.start = cell_pair(start, s.name("start"));
    require(e.start->first >= 0 && e.start->first < e.width && e.start->second >= 0 && e.start->second < e.height,
            "config key 'env.start' lies outside the grid");
  }

  e.policy = s.req<std::string>("policy");
  if (e.policy.rfind("table:", 0) == 0) {
    wrap_enum("env.policy", [&] { return parse_policy_table(e.policy.substr(6), e.width * e.height); });
  } else {
    require(e.policy == "tour" || e.policy == "toward_goal",
            "config key 'env.policy' must be tour, toward_goal or table:<actions>");
  }
  s.finish();
  return e;
}

DiffusionConfig parse_diffusion(Section s) {
  DiffusionConfig d;
  d.steps = s.req<int>("K");
  d.beta_min = s.req<double>("beta_min");
  d.beta_max = s.req<double>("beta_max");
  d.eta_mode = wrap_enum("diffusion.eta_mode", [&] { return parse_eta_mode(s.req<std::string>("eta_mode")); });
  d.sigma_mode =
      wrap_enum("diffusion.sigma_mode", [&] { return parse_sigma_mode(s.req<std::string>("sigma_mode")); });
  s.finish();
  const NoiseSchedule sched =
      wrap_enum("diffusion", [&] { return make_schedule(d.steps, d.beta_min, d.beta_max, BetaSpacing::linear); });
  require(sched.alpha_bar.back() < 0.05,
          "diffusion schedule leaves alpha_bar_K = " + io::format_double(sched.alpha_bar.back()) +
              " (must be < 0.05 so x_K is close to a unit Gaussian)");
  return d;
}

ModelConfig parse_model(Section s) {
  ModelConfig m;
  const json& hs = s.raw("hidden_sizes");
  require(hs.is_array(), "config key 'model.hidden_sizes' must be an array");
  m.hidden_sizes.clear();
  for (const auto& v : hs) {
    require(v.is_number_integer() && v.get<std::int64_t>() >= 1, "config key 'model.hidden_sizes' entries must be >= 1");
    m.hidden_sizes.push_back(v.get<std::size_t>());
  }
  m.activation = wrap_enum("model.activation", [&] { return parse_activation(s.req<std::string>("activation")); });
  m.step_embed_dim = s.req<std::size_t>("step_embed_dim");
  s.finish();
  return m;
}

TrainingConfig parse_training(Section s) {
  TrainingConfig t;
  t.steps = s.req<std::uint64_t>("steps");
  t.batch_size = s.req<std::size_t>("batch_size");
  t.learning_rate = s.req<double>("learning_rate");
  require(t.batch_size >= 1, "config key 'training.batch_size' must be >= 1");
  require(t.learning_rate > 0.0 && std::isfinite(t.learning_rate), "config key 'training.learning_rate' must be > 0");
  const std::string lr_schedule = s.opt<std::string>("lr_schedule", "constant");
  if (lr_schedule == "constant") {
    t.lr_schedule = LrSchedule::constant;
  } else if (lr_schedule == "cosine") {
    t.lr_schedule = LrSchedule::cosine;
    t.lr_final = s.req<double>("lr_final");
    require(t.lr_final >= 0.0 && t.lr_final <= t.learning_rate,
            "config key 'training.lr_final' must lie in [0, learning_rate]");
  } else {
    throw ConfigError("config key 'training.lr_schedule' must be constant or cosine");
  }
  t.optimizer = wrap_enum("training.optimizer", [&] { return parse_optimizer(s.req<std::string>("optimizer")); });
  t.adam_beta1 = s.opt<double>("adam_beta1", t.adam_beta1);
  t.adam_beta2 = s.opt<double>("adam_beta2", t.adam_beta2);
  t.adam_epsilon = s.opt<double>("adam_epsilon", t.adam_epsilon);
  require(t.adam_beta1 >= 0.0 && t.adam_beta1 < 1.0 && t.adam_beta2 >= 0.0 && t.adam_beta2 < 1.0 &&
              t.adam_epsilon > 0.0,
          "adam hyperparameters out of range");

  Section sync = s.sub("sync");
  t.sync.mode = wrap_enum("training.sync.mode", [&] { return parse_sync_mode(sync.req<std::string>("mode")); });
  if (t.sync.mode == SyncMode::hard) {
    t.sync.period = sync.req<std::uint64_t>("period");
    require(t.sync.period >= 1, "config key 'training.sync.period' must be >= 1");
  } else {
    t.sync.tau = sync.req<double>("tau");
    require(t.sync.tau >= 0.0 && t.sync.tau <= 1.0, "config key 'training.sync.tau' must lie in [0, 1]");
  }
  sync.finish();

  t.condition_on =
      wrap_enum("training.condition_on", [&] { return parse_condition_on(s.req<std::string>("condition_on")); });
  const std::string offsets = s.req<std::string>("offset_sampling");
  if (offsets == "uniform") {
    t.offset_sampling = OffsetSampling::uniform;
  } else if (offsets == "geometric") {
    t.offset_sampling = OffsetSampling::geometric;
    t.gamma = s.req<double>("gamma");
    require(t.gamma > 0.0 && t.gamma < 1.0, "config key 'training.gamma' must lie in (0, 1)");
  } else {
    throw ConfigError("config key 'training.offset_sampling' must be uniform or geometric");
  }
  t.seed = s.req<std::uint64_t>("seed");
  t.buffer_capacity = s.req<std::size_t>("buffer_capacity");
  t.initial_episodes = s.req<std::size_t>("initial_episodes");
  t.collect_every = s.req<std::uint64_t>("collect_every");
  t.episodes_per_collect = s.req<std::size_t>("episodes_per_collect");
  t.log_every = s.req<std::uint64_t>("log_every");
  t.checkpoint_every = s.opt<std::uint64_t>("checkpoint_every", 0);
  require(t.buffer_capacity >= 1, "config key 'training.buffer_capacity' must be >= 1");
  require(t.initial_episodes >= 1, "config key 'training.initial_episodes' must be >= 1");
  require(t.collect_every >= 1, "config key 'training.collect_every' must be >= 1");
  require(t.log_every >= 1, "config key 'training.log_every' must be >= 1");
  require(t.checkpoint_every % t.log_every == 0,
          "config key 'training.checkpoint_every' must be a multiple of training.log_every");
  s.finish();
  return t;
}

EvalConfig parse_eval(Section s, const EnvConfig& env) {
  EvalConfig e;
  e.num_samples = s.req<std::size_t>("num_samples");
  require(e.num_samples >= 1, "config key 'eval.num_samples' must be >= 1");
  const json& set = s.raw("eval_set");
  if (set.is_string()) {
    require(set.get<std::string>() == "default", "config key 'eval.eval_set' must be \"default\" or a list");
  } else {
    require(set.is_array() && !set.empty(), "config key 'eval.eval_set' must be \"default\" or a non-empty list");
    for (const auto& v : set) {
      require(v.is_array() && v.size() == 3 && v[0].is_number_integer() && v[1].is_number_integer() &&
                  v[2].is_number_integer(),
              "config key 'eval.eval_set' entries must be [s, a, n] integer triples");
      const int st = v[0].get<int>();
      const int a = v[1].get<int>();
      const int n = v[2].get<int>();
      require(st >= 0 && st < env.width * env.height && a >= 0 && a < kNumMoves && n >= 1 && n <= env.horizon,
              "config key 'eval.eval_set' entry out of range");
      e.eval_set.emplace_back(st, a, n);
    }
  }
  e.seed = s.req<std::uint64_t>("seed");
  e.heatmaps = s.opt<bool>("heatmaps", true);
  s.finish();
  return e;
}

json training_json(const TrainingConfig& t) {
  json j;
  j["steps"] = t.steps;
  j["batch_size"] = t.batch_size;
  j["learning_rate"] = t.learning_rate;
  j["lr_schedule"] = std::string(to_string(t.lr_schedule));
  if (t.lr_schedule == LrSchedule::cosine) j["lr_final"] = t.lr_final;
  j["optimizer"] = std::string(to_string(t.optimizer));
  j["adam_beta1"] = t.adam_beta1;
  j["adam_beta2"] = t.adam_beta2;
  j["adam_epsilon"] = t.adam_epsilon;
  json sync;
  sync["mode"] = std::string(to_string(t.sync.mode));
  if (t.sync.mode == SyncMode::hard) {
    sync["period"] = t.sync.period;
  } else {
    sync["tau"] = t.sync.tau;
  }
  j["sync"] = sync;
  j["condition_on"] = std::string(to_string(t.condition_on));
  j["offset_sampling"] = std::string(to_string(t.offset_sampling));
  if (t.offset_sampling == OffsetSampling::geometric) j["gamma"] = t.gamma;
  j["seed"] = t.seed;
  j["buffer_capacity"] = t.buffer_capacity;
  j["initial_episodes"] = t.initial_episodes;
  j["collect_every"] = t.collect_every;
  j["episodes_per_collect"] = t.episodes_per_collect;
  j["log_every"] = t.log_every;
  j["checkpoint_every"] = t.checkpoint_every;
  return j;
}

json model_sections(const ExperimentConfig& c) {
  json j;
  json env;
  env["kind"] = c.env.kind;
  env["width"] = c.env.width;
  env["height"] = c.env.height;
  env["p_move"] = c.env.p_move;
  env["horizon"] = c.env.horizon;
  env["reward"] = {{"goal", {c.env.goal_x, c.env.goal_y}},
                   {"goal_value", c.env.goal_value},
                   {"other_value", c.env.other_value}};
  if (c.env.start) {
    env["start"] = {c.env.start->first, c.env.start->second};
  } else {
    env["start"] = "uniform";
  }
  env["policy"] = c.env.policy;
  j["env"] = env;
  j["diffusion"] = {{"K", c.diffusion.steps},
                    {"beta_min", c.diffusion.beta_min},
                    {"beta_max", c.diffusion.beta_max},
                    {"eta_mode", std::string(to_string(c.diffusion.eta_mode))},
                    {"sigma_mode", std::string(to_string(c.diffusion.sigma_mode))}};
  j["model"] = {{"hidden_sizes", c.model.hidden_sizes},
                {"activation", std::string(to_string(c.model.activation))},
                {"step_embed_dim", c.model.step_embed_dim}};
  j["training"] = training_json(c.training);
  return j;
}

}  // namespace

std::string_view to_string(OffsetSampling o) { return o == OffsetSampling::uniform ? "uniform" : "geometric"; }
std::string_view to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

ExperimentConfig parse_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    Section top(root, "");
    ExperimentConfig c;
    c.env = parse_env(top.sub("env"));
    c.diffusion = parse_diffusion(top.sub("diffusion"));
    c.model = parse_model(top.sub("model"));
    c.training = parse_training(top.sub("training"));
    c.eval = parse_eval(top.sub("eval"), c.env);
    top.finish();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string to_json(const ExperimentConfig& cfg) {
  json j = model_sections(cfg);
  json ev;
  ev["num_samples"] = cfg.eval.num_samples;
  if (cfg.eval.eval_set.empty()) {
    ev["eval_set"] = "default";
  } else {
    json list = json::array();
    for (const auto& [s, a, n] : cfg.eval.eval_set) list.push_back({s, a, n});
    ev["eval_set"] = list;
  }
  ev["seed"] = cfg.eval.seed;
  ev["heatmaps"] = cfg.eval.heatmaps;
  j["eval"] = ev;
  return j.dump(2);
}

std::string config_digest(const ExperimentConfig& cfg) { return io::fnv1a_hex(model_sections(cfg).dump()); }

}  // namespace ssmdiff
