// ssmdiff: train, evaluate and inspect diffusion successor-measure models.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ssmdiff/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Diffusion models of finite-horizon successor state measures"};
  app.set_version_flag("--version", std::string(ssmdiff::kVersion));
  app.require_subcommand(1);

  ssmdiff::CommandOptions opts;
  std::uint64_t seed = 0;

  auto* train = app.add_subcommand("train", "Collect on-policy data and train the diffusion model");
  train->add_option("--config", opts.config_path, "Experiment config (JSON)")->required();
  train->add_option("--out", opts.out_dir, "Output directory")->required();
  train->add_option("--checkpoint", opts.checkpoint_path, "Resume from this checkpoint");
  auto* train_seed = train->add_option("--seed", seed, "Override training.seed");
  train->add_flag("--override-digest", opts.override_digest, "Resume even if the config digest differs");

  auto* eval = app.add_subcommand("eval", "Compare a trained model against the exact successor measure");
  eval->add_option("--config", opts.config_path, "Experiment config (JSON)")->required();
  eval->add_option("--out", opts.out_dir, "Output directory")->required();
  eval->add_option("--checkpoint", opts.checkpoint_path, "Checkpoint to evaluate")->required();
  auto* eval_seed = eval->add_option("--seed", seed, "Override eval.seed");
  eval->add_flag("--override-digest", opts.override_digest, "Evaluate even if the config digest differs");

  auto* oracle = app.add_subcommand("oracle", "Dump the exact successor measure and Q table as CSV");
  oracle->add_option("--config", opts.config_path, "Experiment config (JSON)")->required();
  oracle->add_option("--out", opts.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ssmdiff::exit_code::config;
  }

  if (train->parsed()) {
    if (*train_seed) opts.seed = seed;
    return ssmdiff::cmd_train(opts, std::cout, std::cerr);
  }
  if (eval->parsed()) {
    if (*eval_seed) opts.seed = seed;
    return ssmdiff::cmd_eval(opts, std::cout, std::cerr);
  }
  return ssmdiff::cmd_oracle(opts, std::cout, std::cerr);
}
