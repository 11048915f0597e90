#include "ssmdiff/commands.hpp"

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "ssmdiff/checkpoint.hpp"
#include "ssmdiff/config.hpp"
#include "ssmdiff/error.hpp"
#include "ssmdiff/eval.hpp"
#include "ssmdiff/experiment.hpp"
#include "ssmdiff/io.hpp"
#include "ssmdiff/oracle.hpp"

namespace ssmdiff {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

// Maps library exceptions onto exit codes; `body` returns the success code.
template <typename F>
int guarded(std::ostream& err, const char* command, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << command << ": config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const UnsupportedError& e) {
    err << command << ": unsupported: " << e.what() << '\n';
    return exit_code::unsupported;
  } catch (const NumericError& e) {
    err << command << ": numeric error: " << e.what() << '\n';
    return exit_code::numeric;
  } catch (const std::exception& e) {
    err << command << ": error: " << e.what() << '\n';
    return exit_code::failure;
  }
}

ExperimentConfig load_for(const CommandOptions& opts) {
  if (opts.config_path.empty()) throw ConfigError("--config is required");
  return load_config(opts.config_path);
}

void prepare_out(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  fs::create_directories(out);
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_manifest(const std::string& out, ordered_json body) {
  ordered_json m;
  m["tool"] = "ssmdiff";
  m["version"] = kVersion;
  m["checkpoint_format_version"] = kCheckpointFormatVersion;
  for (auto& [k, v] : body.items()) m[k] = v;
  io::write_file(path_in(out, "manifest.json"), m.dump(2) + "\n");
}

// Returns false (after reporting) when the digests differ and no override was given.
bool digest_ok(const Checkpoint& ck, const std::string& digest, const CommandOptions& opts, std::ostream& err,
               const char* command) {
  if (ck.config_digest == digest) return true;
  if (opts.override_digest) {
    err << command << ": warning: checkpoint digest " << ck.config_digest << " differs from config digest " << digest
        << " (overridden)\n";
    return true;
  }
  err << command << ": checkpoint digest " << ck.config_digest << " does not match config digest " << digest
      << " (pass --override-digest to force)\n";
  return false;
}

struct LossWindow {
  std::uint64_t steps = 0;
  double loss = 0.0;
  double l1_sum = 0.0;
  double l2_sum = 0.0;
  std::size_t n_l1 = 0;
  std::size_t n_l2 = 0;

  void add(const LossStats& s) {
    ++steps;
    loss += s.mean_loss;
    l1_sum += s.mean_l1 * static_cast<double>(s.n_l1);
    l2_sum += s.mean_l2 * static_cast<double>(s.n_l2);
    n_l1 += s.n_l1;
    n_l2 += s.n_l2;
  }
};

}  // namespace

int cmd_train(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, "train", [&]() -> int {
    ExperimentConfig cfg = load_for(opts);
    if (opts.seed) cfg.training.seed = *opts.seed;
    Experiment ex = make_experiment(cfg);
    if (!opts.checkpoint_path.empty()) {
      const Checkpoint ck = load_checkpoint(opts.checkpoint_path);
      if (!digest_ok(ck, ex.digest, opts, err, "train")) return exit_code::digest_mismatch;
      restore(ex, ck);
      log << "resumed from " << opts.checkpoint_path << " at step " << ex.trainer.step_count << '\n';
    }
    prepare_out(opts.out_dir);
    const TrainingConfig& t = cfg.training;
    if (t.checkpoint_every > 0) fs::create_directories(path_in(opts.out_dir, "checkpoints"));

    std::ostringstream csv;
    csv << "# config_digest=" << ex.digest << '\n';
    csv << "step,loss,l1_loss,l2_loss,l1_fraction,learning_rate\n";
    auto flush_csv = [&] { io::write_file(path_in(opts.out_dir, "loss.csv"), csv.str()); };

    LossWindow window;
    double last_loss = 0.0;
    try {
      while (ex.trainer.step_count < t.steps) {
        const double lr = learning_rate_at(t, ex.trainer.step_count);
        const LossStats st = advance(ex);
        window.add(st);
        last_loss = st.mean_loss;
        const std::uint64_t step = ex.trainer.step_count;
        if (step % t.log_every == 0) {
          const double n = static_cast<double>(window.steps);
          const double total = static_cast<double>(window.n_l1 + window.n_l2);
          csv << step << ',' << io::format_double(window.loss / n) << ','
              << io::format_double(window.n_l1 ? window.l1_sum / static_cast<double>(window.n_l1) : 0.0) << ','
              << io::format_double(window.n_l2 ? window.l2_sum / static_cast<double>(window.n_l2) : 0.0) << ','
              << io::format_double(static_cast<double>(window.n_l1) / total) << ',' << io::format_double(lr)
              << '\n';
          window = LossWindow{};
          if (step % (t.log_every * 10) == 0) log << "step " << step << " loss " << last_loss << '\n';
        }
        if (t.checkpoint_every > 0 && step % t.checkpoint_every == 0) {
          save_checkpoint(path_in(opts.out_dir, "checkpoints/step_" + std::to_string(step) + ".ckpt"), snapshot(ex));
        }
      }
    } catch (const NumericError&) {
      flush_csv();
      save_checkpoint(path_in(opts.out_dir, "checkpoint.partial.ckpt"), snapshot(ex));
      throw;
    }
    flush_csv();
    save_checkpoint(path_in(opts.out_dir, "checkpoint.ckpt"), snapshot(ex));
    ordered_json body;
    body["command"] = "train";
    body["config_digest"] = ex.digest;
    body["steps"] = ex.trainer.step_count;
    body["final_batch_loss"] = last_loss;
    body["outputs"] = {"loss.csv", "checkpoint.ckpt"};
    write_manifest(opts.out_dir, body);
    log << "trained " << ex.trainer.step_count << " steps; checkpoint written to "
        << path_in(opts.out_dir, "checkpoint.ckpt") << '\n';
    return exit_code::ok;
  });
}

int cmd_eval(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, "eval", [&]() -> int {
    ExperimentConfig cfg = load_for(opts);
    if (opts.seed) cfg.eval.seed = *opts.seed;
    if (opts.checkpoint_path.empty()) throw ConfigError("--checkpoint is required for eval");
    const std::string digest = config_digest(cfg);
    const TabularMdp mdp = build_mdp(cfg.env);
    const Policy policy = build_policy(cfg.env, mdp);
    const Checkpoint ck = load_checkpoint(opts.checkpoint_path);
    if (!digest_ok(ck, digest, opts, err, "eval")) return exit_code::digest_mismatch;
    if (ck.trainer.cfg.layout != tabular_layout(static_cast<std::size_t>(mdp.n_actions()), ck.trainer.cfg.layout.step_dim)) {
      throw FormatError("checkpoint network layout is incompatible with this environment");
    }
    prepare_out(opts.out_dir);

    const SsmTable oracle = exact_ssm(mdp, policy, mdp.horizon());
    std::vector<EvalCondition> set;
    if (cfg.eval.eval_set.empty()) {
      set = default_eval_set(mdp, policy, mdp.horizon());
    } else {
      for (const auto& [s, a, n] : cfg.eval.eval_set) set.push_back({s, a, n});
    }
    MetricsReport rep = eval_model(ck.trainer, mdp, oracle, set, cfg.eval.num_samples, cfg.eval.seed);
    rep.config_digest = ck.config_digest;
    io::write_file(path_in(opts.out_dir, "metrics.jsonl"), metrics_jsonl(rep));
    io::write_file(path_in(opts.out_dir, "metrics.csv"), metrics_csv(rep));
    if (cfg.eval.heatmaps) {
      fs::create_directories(path_in(opts.out_dir, "heatmaps"));
      for (const auto& m : rep.rows) {
        const std::string name = "heatmaps/s" + std::to_string(m.cond.s) + "_a" + std::to_string(m.cond.a) + "_n" +
                                 std::to_string(m.cond.n) + ".ppm";
        io::write_file(path_in(opts.out_dir, name), heatmap_ppm(mdp, m.learned, m.oracle, rep.config_digest));
      }
    }
    ordered_json body;
    body["command"] = "eval";
    body["config_digest"] = rep.config_digest;
    body["checkpoint_step"] = ck.trainer.step_count;
    body["seed"] = rep.seed;
    body["conditions"] = rep.rows.size();
    body["samples_per_condition"] = rep.samples_per_condition;
    body["mean_tv"] = rep.mean_tv;
    body["max_tv"] = rep.max_tv;
    body["mean_q_error"] = rep.mean_q_error;
    body["outputs"] = {"metrics.jsonl", "metrics.csv", "heatmaps/"};
    write_manifest(opts.out_dir, body);
    log << "evaluated " << rep.rows.size() << " conditions: mean TV " << rep.mean_tv << ", mean |Q error| "
        << rep.mean_q_error << '\n';
    return exit_code::ok;
  });
}

int cmd_oracle(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, "oracle", [&]() -> int {
    const ExperimentConfig cfg = load_for(opts);
    const std::string digest = config_digest(cfg);
    const TabularMdp mdp = build_mdp(cfg.env);
    const Policy policy = build_policy(cfg.env, mdp);
    prepare_out(opts.out_dir);
    const SsmTable table = exact_ssm(mdp, policy, mdp.horizon());
    const QTable q = exact_q(table, mdp);

    std::ostringstream ssm;
    ssm << "# config_digest=" << digest << '\n' << "s,a,n,x,probability\n";
    std::ostringstream qcsv;
    qcsv << "# config_digest=" << digest << '\n' << "s,a,n,q\n";
    for (StateIndex s = 0; s < table.n_states; ++s) {
      for (ActionIndex a = 0; a < table.n_actions; ++a) {
        for (int n = 1; n <= table.n_max; ++n) {
          auto row = table.row(s, a, n);
          for (StateIndex x = 0; x < table.n_states; ++x) {
            ssm << s << ',' << a << ',' << n << ',' << x << ',' << io::format_double(row[static_cast<std::size_t>(x)])
                << '\n';
          }
          qcsv << s << ',' << a << ',' << n << ',' << io::format_double(q.at(s, a, n)) << '\n';
        }
      }
    }
    io::write_file(path_in(opts.out_dir, "ssm_oracle.csv"), ssm.str());
    io::write_file(path_in(opts.out_dir, "q_oracle.csv"), qcsv.str());
    ordered_json body;
    body["command"] = "oracle";
    body["config_digest"] = digest;
    body["n_max"] = table.n_max;
    body["outputs"] = {"ssm_oracle.csv", "q_oracle.csv"};
    write_manifest(opts.out_dir, body);
    log << "wrote exact successor measure for " << table.n_states << " states, n_max " << table.n_max << '\n';
    return exit_code::ok;
  });
}

}  // namespace ssmdiff
