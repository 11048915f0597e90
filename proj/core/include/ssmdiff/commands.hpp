#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>

namespace ssmdiff {

inline constexpr const char* kVersion = "0.1.0";

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;         // IO, format and other runtime errors
inline constexpr int config = 2;          // invalid or incomplete config
inline constexpr int digest_mismatch = 3;  // checkpoint built from a different config
inline constexpr int numeric = 4;         // NaN/Inf during training or sampling
inline constexpr int unsupported = 5;     // operation not available for this environment
}  // namespace exit_code

struct CommandOptions {
  std::string config_path;
  std::string out_dir;
  std::string checkpoint_path;         // train: resume from; eval: model to evaluate
  std::optional<std::uint64_t> seed;   // train: training.seed, eval: eval.seed
  bool override_digest = false;
};

// Writes loss.csv, checkpoint.ckpt (plus checkpoints/step_<n>.ckpt when
// training.checkpoint_every > 0) and manifest.json into out_dir.
int cmd_train(const CommandOptions& opts, std::ostream& log, std::ostream& err);
// Writes metrics.jsonl, metrics.csv, heatmaps/*.ppm and manifest.json.
int cmd_eval(const CommandOptions& opts, std::ostream& log, std::ostream& err);
// Writes ssm_oracle.csv, q_oracle.csv and manifest.json.
int cmd_oracle(const CommandOptions& opts, std::ostream& log, std::ostream& err);

}  // namespace ssmdiff
