#include "ssmdiff/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ssmdiff/diffusion.hpp"
#include "ssmdiff/error.hpp"
#include "ssmdiff/io.hpp"

namespace ssmdiff {

ConditionalSampler diffusion_sampler(const Trainer& trainer, const TabularMdp& mdp) {
  return [&trainer, &mdp](const EvalCondition& c, std::size_t count, Rng& rng) {
    const auto s = encode_state(mdp, c.s);
    const auto a = encode_action(mdp, c.a);
    const Conditioning cond = make_conditioning(trainer.cfg, s, a, c.n);
    return sample(trainer.sched, trainer.online, trainer.cfg.layout, cond, count, rng);
  };
}

ConditionalSampler oracle_sampler(const SsmTable& table, const TabularMdp& mdp) {
  return [&table, &mdp](const EvalCondition& c, std::size_t count, Rng& rng) {
    auto row = table.row(c.s, c.a, c.n);
    std::vector<double> cdf(row.size());
    std::partial_sum(row.begin(), row.end(), cdf.begin());
    std::vector<std::vector<double>> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      const double u = uniform01(rng) * cdf.back();
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      auto x = static_cast<StateIndex>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
      out.push_back(encode_state(mdp, x));
    }
    return out;
  };
}

Pmf empirical_pmf(const std::vector<std::vector<double>>& samples, const TabularMdp& mdp) {
  if (samples.empty()) throw PreconditionError("empirical_pmf needs at least one sample");
  Pmf p(static_cast<std::size_t>(mdp.n_states()), 0.0);
  for (const auto& v : samples) p[static_cast<std::size_t>(decode_state(mdp, v))] += 1.0;
  for (double& x : p) x /= static_cast<double>(samples.size());
  return p;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("tv_distance: pmfs have different support sizes");
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) acc += std::abs(p[k] - q[k]);
  return 0.5 * acc;
}

std::vector<EvalCondition> default_eval_set(const TabularMdp& mdp, const Policy& policy, int n_max) {
  check_policy(mdp, policy);
  std::vector<int> ns{1, std::max(1, n_max / 2), n_max};
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  std::vector<EvalCondition> out;
  for (int n : ns) {
    for (StateIndex s = 0; s < mdp.n_states(); ++s) out.push_back({s, policy(s), n});
  }
  return out;
}

QEstimate q_estimate(const ConditionalSampler& sampler, const TabularMdp& mdp, const EvalCondition& cond,
                     std::size_t num_samples, Rng& rng) {
  if (num_samples == 0) throw PreconditionError("q_estimate needs at least one sample");
  const auto samples = sampler(cond, num_samples, rng);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& v : samples) {
    const double r = mdp.reward(decode_state(mdp, v));
    sum += r;
    sum_sq += r * r;
  }
  const double n = static_cast<double>(samples.size());
  QEstimate q;
  q.samples = samples.size();
  q.mean = sum / n;
  const double var = samples.size() > 1 ? std::max(0.0, (sum_sq - n * q.mean * q.mean) / (n - 1.0)) : 0.0;
  q.standard_error = std::sqrt(var / n);
  return q;
}

QEstimate q_estimate(const Trainer& trainer, const TabularMdp& mdp, StateIndex s, ActionIndex a, int n,
                     std::size_t num_samples, Rng& rng) {
  return q_estimate(diffusion_sampler(trainer, mdp), mdp, EvalCondition{s, a, n}, num_samples, rng);
}

MetricsReport eval_model(const ConditionalSampler& sampler, const TabularMdp& mdp, const SsmTable& oracle,
                         const std::vector<EvalCondition>& eval_set, std::size_t num_samples, std::uint64_t seed) {
  if (eval_set.empty()) throw PreconditionError("eval set must not be empty");
  if (num_samples == 0) throw PreconditionError("num_samples must be at least 1");
  const QTable q_exact = exact_q(oracle, mdp);
  Rng rng(seed);
  MetricsReport rep;
  rep.seed = seed;
  rep.samples_per_condition = num_samples;
  std::map<int, std::pair<double, int>> by_n;
  for (const EvalCondition& c : eval_set) {
    const auto samples = sampler(c, num_samples, rng);
    ConditionMetrics m;
    m.cond = c;
    m.samples = samples.size();
    m.learned = empirical_pmf(samples, mdp);
    auto orow = oracle.row(c.s, c.a, c.n);
    m.oracle.assign(orow.begin(), orow.end());
    m.tv = tv_distance(m.learned, m.oracle);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& v : samples) {
      const double r = mdp.reward(decode_state(mdp, v));
      sum += r;
      sum_sq += r * r;
    }
    const double n = static_cast<double>(samples.size());
    m.q_hat = sum / n;
    const double var = samples.size() > 1 ? std::max(0.0, (sum_sq - n * m.q_hat * m.q_hat) / (n - 1.0)) : 0.0;
    m.q_stderr = std::sqrt(var / n);
    m.q_exact = q_exact.at(c.s, c.a, c.n);
    m.q_abs_error = std::abs(m.q_hat - m.q_exact);

    rep.mean_tv += m.tv;
    rep.max_tv = std::max(rep.max_tv, m.tv);
    rep.mean_q_error += m.q_abs_error;
    rep.max_q_error = std::max(rep.max_q_error, m.q_abs_error);
    by_n[c.n].first += m.tv;
    by_n[c.n].second += 1;
    rep.rows.push_back(std::move(m));
  }
  rep.mean_tv /= static_cast<double>(rep.rows.size());
  rep.mean_q_error /= static_cast<double>(rep.rows.size());
  for (const auto& [n, acc] : by_n) rep.mean_tv_by_n[n] = acc.first / acc.second;
  return rep;
}

MetricsReport eval_model(const Trainer& trainer, const TabularMdp& mdp, const SsmTable& oracle,
                         const std::vector<EvalCondition>& eval_set, std::size_t num_samples, std::uint64_t seed) {
  return eval_model(diffusion_sampler(trainer, mdp), mdp, oracle, eval_set, num_samples, seed);
}

std::string metrics_jsonl(const MetricsReport& report) {
  std::string out;
  for (const auto& m : report.rows) {
    nlohmann::ordered_json j;
    j["record"] = "condition";
    j["s"] = m.cond.s;
    j["a"] = m.cond.a;
    j["n"] = m.cond.n;
    j["samples"] = m.samples;
    j["tv"] = m.tv;
    j["q_hat"] = m.q_hat;
    j["q_stderr"] = m.q_stderr;
    j["q_exact"] = m.q_exact;
    j["q_abs_error"] = m.q_abs_error;
    j["learned_pmf"] = m.learned;
    j["oracle_pmf"] = m.oracle;
    j["seed"] = report.seed;
    j["config_digest"] = report.config_digest;
    out += j.dump() + "\n";
  }
  nlohmann::ordered_json s;
  s["record"] = "summary";
  s["conditions"] = report.rows.size();
  s["samples_per_condition"] = report.samples_per_condition;
  s["mean_tv"] = report.mean_tv;
  s["max_tv"] = report.max_tv;
  s["mean_q_error"] = report.mean_q_error;
  s["max_q_error"] = report.max_q_error;
  nlohmann::ordered_json by_n = nlohmann::ordered_json::object();
  for (const auto& [n, tv] : report.mean_tv_by_n) by_n[std::to_string(n)] = tv;
  s["mean_tv_by_n"] = by_n;
  s["seed"] = report.seed;
  s["config_digest"] = report.config_digest;
  out += s.dump() + "\n";
  return out;
}

std::string metrics_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "# config_digest=" << report.config_digest << " seed=" << report.seed << '\n';
  os << "s,a,n,samples,tv,q_hat,q_stderr,q_exact,q_abs_error\n";
  for (const auto& m : report.rows) {
    os << m.cond.s << ',' << m.cond.a << ',' << m.cond.n << ',' << m.samples << ',' << io::format_double(m.tv) << ','
       << io::format_double(m.q_hat) << ',' << io::format_double(m.q_stderr) << ','
       << io::format_double(m.q_exact) << ',' << io::format_double(m.q_abs_error) << '\n';
  }
  os << "summary,,,," << io::format_double(report.mean_tv) << ",,,," << io::format_double(report.mean_q_error)
     << '\n';
  return os.str();
}

std::string heatmap_ppm(const TabularMdp& mdp, std::span<const double> learned, std::span<const double> oracle,
                        const std::string& config_digest, int cell_px) {
  const auto n = static_cast<std::size_t>(mdp.n_states());
  if (learned.size() != n || oracle.size() != n) throw ShapeError("heatmap pmfs must cover every state");
  if (cell_px < 1) throw PreconditionError("cell_px must be positive");
  const double peak = std::max({*std::max_element(learned.begin(), learned.end()),
                                *std::max_element(oracle.begin(), oracle.end()), 1e-12});
  constexpr int kGap = 4;
  const int panel_w = mdp.width() * cell_px;
  const int img_w = 2 * panel_w + kGap;
  const int img_h = mdp.height() * cell_px;
  std::string pixels(static_cast<std::size_t>(img_w * img_h * 3), static_cast<char>(128));
  auto put = [&](int px, int py, double v) {
    // White at zero mass, deep blue at the shared peak.
    const double t = std::clamp(v / peak, 0.0, 1.0);
    const auto idx = static_cast<std::size_t>((py * img_w + px) * 3);
    pixels[idx] = static_cast<char>(static_cast<int>(std::lround(255.0 * (1.0 - t))));
    pixels[idx + 1] = static_cast<char>(static_cast<int>(std::lround(255.0 * (1.0 - 0.8 * t))));
    pixels[idx + 2] = static_cast<char>(255);
  };
  for (int y = 0; y < mdp.height(); ++y) {
    for (int x = 0; x < mdp.width(); ++x) {
      const auto s = static_cast<std::size_t>(mdp.cell(x, y));
      for (int dy = 0; dy < cell_px; ++dy) {
        for (int dx = 0; dx < cell_px; ++dx) {
          put(x * cell_px + dx, y * cell_px + dy, learned[s]);
          put(panel_w + kGap + x * cell_px + dx, y * cell_px + dy, oracle[s]);
        }
      }
    }
  }
  std::ostringstream os;
  os << "P6\n# config_digest=" << config_digest << "\n" << img_w << ' ' << img_h << "\n255\n" << pixels;
  return os.str();
}

}  // namespace ssmdiff
