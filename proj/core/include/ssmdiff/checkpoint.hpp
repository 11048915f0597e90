#pragma once

#include <cstdint>
#include <string>

#include "ssmdiff/bellman_loss.hpp"
#include "ssmdiff/replay.hpp"

namespace ssmdiff {

struct Experiment;

inline constexpr int kCheckpointFormatVersion = 1;

// Text header (key=value lines, terminated by end_header) followed by
// little-endian blocks: online, target, adam moments, replay trajectories.
struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  std::string config_digest;
  Trainer trainer;
  ReplayBuffer buffer{1};
  std::string rng_state;
  std::uint64_t next_episode = 0;
};

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint snapshot(const Experiment& ex);
// Replaces the learned state of `ex`. The caller checks digests.
void restore(Experiment& ex, const Checkpoint& ck);

}  // namespace ssmdiff
