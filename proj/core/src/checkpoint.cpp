#include "ssmdiff/checkpoint.hpp"

#include <sstream>

#include "ssmdiff/error.hpp"
#include "ssmdiff/experiment.hpp"
#include "ssmdiff/io.hpp"

namespace ssmdiff {

namespace {

constexpr std::string_view kMagic = "ssmdiff-checkpoint";

void write_buffer(std::ostream& os, const ReplayBuffer& buf) {
  for (const Trajectory& t : buf.trajectories()) {
    io::write_u64_le(os, t.episode_id);
    io::write_u64_le(os, t.actions.size());
    for (StateIndex s : t.states) io::write_u64_le(os, static_cast<std::uint64_t>(s));
    for (ActionIndex a : t.actions) io::write_u64_le(os, static_cast<std::uint64_t>(a));
    io::write_u64_le(os, static_cast<std::uint64_t>(t.bootstrap_action));
  }
}

std::uint64_t parse_u64(const io::Header& h, const std::string& key) {
  const std::string& v = io::header_get(h, key);
  try {
    std::size_t used = 0;
    const auto out = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(key);
    return out;
  } catch (const std::exception&) {
    throw FormatError("header key '" + key + "' is not an unsigned integer");
  }
}

double parse_f64(const io::Header& h, const std::string& key) {
  const std::string& v = io::header_get(h, key);
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(key);
    return out;
  } catch (const std::exception&) {
    throw FormatError("header key '" + key + "' is not a number");
  }
}

template <typename F>
auto as_format_error(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid checkpoint header: ") + e.what());
  }
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  const Trainer& tr = ck.trainer;
  std::ostringstream data;
  write_params_data(data, tr.online);
  write_params_data(data, tr.target);
  if (tr.opt.optimizer == Optimizer::adam) {
    write_params_data(data, tr.opt.first_moment);
    write_params_data(data, tr.opt.second_moment);
  }
  write_buffer(data, ck.buffer);
  const std::string blob = data.str();

  const InputLayout& l = tr.cfg.layout;
  std::ostringstream os;
  os << kMagic << '\n';
  os << "format_version=" << kCheckpointFormatVersion << '\n';
  os << "config_digest=" << ck.config_digest << '\n';
  os << "step_count=" << tr.step_count << '\n';
  os << "next_episode=" << ck.next_episode << '\n';
  os << "schedule.K=" << tr.sched.steps << '\n';
  os << "schedule.beta_min=" << io::format_double(tr.sched.beta_min) << '\n';
  os << "schedule.beta_max=" << io::format_double(tr.sched.beta_max) << '\n';
  os << "schedule.sigma_mode=" << to_string(tr.sched.sigma_mode) << '\n';
  os << "schedule.eta_mode=" << to_string(tr.sched.eta_mode) << '\n';
  const std::size_t dims[] = {l.x_dim, l.state_dim, l.action_dim, l.step_dim, l.horizon_dim};
  os << "trainer.layout=" << io::join_sizes(dims) << '\n';
  os << "trainer.n_max=" << tr.cfg.n_max << '\n';
  os << "trainer.condition_on=" << to_string(tr.cfg.condition_on) << '\n';
  os << "trainer.eta_mode=" << to_string(tr.cfg.eta_mode) << '\n';
  os << "trainer.sync_mode=" << to_string(tr.cfg.sync.mode) << '\n';
  os << "trainer.sync_period=" << tr.cfg.sync.period << '\n';
  os << "trainer.sync_tau=" << io::format_double(tr.cfg.sync.tau) << '\n';
  os << "opt.optimizer=" << to_string(tr.opt.optimizer) << '\n';
  os << "opt.learning_rate=" << io::format_double(tr.opt.hyper.learning_rate) << '\n';
  os << "opt.beta1=" << io::format_double(tr.opt.hyper.beta1) << '\n';
  os << "opt.beta2=" << io::format_double(tr.opt.hyper.beta2) << '\n';
  os << "opt.epsilon=" << io::format_double(tr.opt.hyper.epsilon) << '\n';
  os << "opt.step_count=" << tr.opt.step_count << '\n';
  write_params_header(os, "online", tr.online);
  write_params_header(os, "target", tr.target);
  os << "buffer.capacity=" << ck.buffer.capacity() << '\n';
  os << "buffer.count=" << ck.buffer.size() << '\n';
  os << "rng.state=" << ck.rng_state << '\n';
  os << "data.bytes=" << blob.size() << '\n';
  os << "end_header\n";
  os << blob;
  return os.str();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  io::HeaderSplit split = io::parse_header(bytes, kMagic);
  const io::Header& h = split.header;
  if (io::header_get(h, "format_version") != std::to_string(kCheckpointFormatVersion)) {
    throw FormatError("unsupported checkpoint format version '" + io::header_get(h, "format_version") + "'");
  }
  const std::uint64_t data_bytes = parse_u64(h, "data.bytes");
  const std::size_t available = bytes.size() - split.data_offset;
  if (available < data_bytes) {
    throw FormatError("checkpoint truncated at byte offset " + std::to_string(bytes.size()) + ": expected " +
                      std::to_string(split.data_offset + data_bytes) + " bytes");
  }
  if (available > data_bytes) {
    throw FormatError("trailing bytes after checkpoint data at byte offset " +
                      std::to_string(split.data_offset + data_bytes));
  }

  Checkpoint ck;
  ck.config_digest = io::header_get(h, "config_digest");
  ck.next_episode = parse_u64(h, "next_episode");
  ck.rng_state = io::header_get(h, "rng.state");

  Trainer& tr = ck.trainer;
  tr.step_count = parse_u64(h, "step_count");
  tr.sched = as_format_error([&] {
    return make_schedule(static_cast<int>(parse_u64(h, "schedule.K")), parse_f64(h, "schedule.beta_min"),
                         parse_f64(h, "schedule.beta_max"), BetaSpacing::linear,
                         parse_sigma_mode(io::header_get(h, "schedule.sigma_mode")),
                         parse_eta_mode(io::header_get(h, "schedule.eta_mode")));
  });
  const auto dims = io::split_sizes(io::header_get(h, "trainer.layout"));
  if (dims.size() != 5) throw FormatError("trainer.layout must list five dimensions");
  tr.cfg.layout = InputLayout{dims[0], dims[1], dims[2], dims[3], dims[4]};
  tr.cfg.n_max = static_cast<int>(parse_u64(h, "trainer.n_max"));
  as_format_error([&] {
    tr.cfg.condition_on = parse_condition_on(io::header_get(h, "trainer.condition_on"));
    tr.cfg.eta_mode = parse_eta_mode(io::header_get(h, "trainer.eta_mode"));
    tr.cfg.sync.mode = parse_sync_mode(io::header_get(h, "trainer.sync_mode"));
    tr.opt.optimizer = parse_optimizer(io::header_get(h, "opt.optimizer"));
    return 0;
  });
  tr.cfg.sync.period = parse_u64(h, "trainer.sync_period");
  tr.cfg.sync.tau = parse_f64(h, "trainer.sync_tau");
  tr.opt.hyper.learning_rate = parse_f64(h, "opt.learning_rate");
  tr.opt.hyper.beta1 = parse_f64(h, "opt.beta1");
  tr.opt.hyper.beta2 = parse_f64(h, "opt.beta2");
  tr.opt.hyper.epsilon = parse_f64(h, "opt.epsilon");
  tr.opt.step_count = parse_u64(h, "opt.step_count");

  tr.online = params_from_header(h, "online");
  tr.target = params_from_header(h, "target");
  if (!same_shape(tr.online, tr.target)) throw FormatError("online and target networks differ in shape");
  if (tr.online.input_dim() != tr.cfg.layout.total() || tr.online.output_dim() != tr.cfg.layout.x_dim) {
    throw FormatError("network shape does not match trainer.layout");
  }

  io::ByteReader reader(bytes, split.data_offset);
  read_params_data(reader, tr.online);
  read_params_data(reader, tr.target);
  if (tr.opt.optimizer == Optimizer::adam) {
    tr.opt.first_moment = zeros_like(tr.online);
    tr.opt.second_moment = zeros_like(tr.online);
    read_params_data(reader, tr.opt.first_moment);
    read_params_data(reader, tr.opt.second_moment);
  }

  const std::uint64_t capacity = parse_u64(h, "buffer.capacity");
  const std::uint64_t count = parse_u64(h, "buffer.count");
  if (capacity == 0 || count > capacity) throw FormatError("invalid replay buffer size in header");
  ck.buffer = ReplayBuffer(static_cast<std::size_t>(capacity));
  for (std::uint64_t k = 0; k < count; ++k) {
    Trajectory t;
    t.episode_id = reader.read_u64();
    const std::uint64_t len = reader.read_u64();
    if (len == 0 || len > reader.remaining() / 8) {
      throw FormatError("invalid trajectory length at byte offset " + std::to_string(reader.offset() - 8));
    }
    t.states.resize(len + 1);
    t.actions.resize(len);
    for (auto& s : t.states) s = static_cast<StateIndex>(reader.read_u64());
    for (auto& a : t.actions) a = static_cast<ActionIndex>(reader.read_u64());
    t.bootstrap_action = static_cast<ActionIndex>(reader.read_u64());
    ck.buffer.push_trajectory(std::move(t));
  }
  if (reader.remaining() != 0) {
    throw FormatError("unexpected bytes after replay data at byte offset " + std::to_string(reader.offset()));
  }
  return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) { io::write_file(path, serialize_checkpoint(ck)); }

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(io::read_file(path)); }

Checkpoint snapshot(const Experiment& ex) {
  Checkpoint ck;
  ck.config_digest = ex.digest;
  ck.trainer = ex.trainer;
  ck.buffer = ex.buffer;
  ck.rng_state = rng_state(ex.rng);
  ck.next_episode = ex.next_episode;
  return ck;
}

void restore(Experiment& ex, const Checkpoint& ck) {
  if (!same_shape(ex.trainer.online, ck.trainer.online) || !(ex.trainer.cfg.layout == ck.trainer.cfg.layout)) {
    throw FormatError("checkpoint network does not match the configured model");
  }
  for (const Trajectory& t : ck.buffer.trajectories()) {
    try {
      check_trajectory(ex.mdp, t);
    } catch (const Error& e) {
      throw FormatError(std::string("checkpoint replay data invalid for this environment: ") + e.what());
    }
  }
  ex.trainer = ck.trainer;
  ex.buffer = ck.buffer;
  set_rng_state(ex.rng, ck.rng_state);
  ex.next_episode = ck.next_episode;
}

}  // namespace ssmdiff
