#include "rail/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "rail/config.hpp"
#include "rail/errors.hpp"

namespace rail {

ScoreNormalizer::ScoreNormalizer(double expert_return, double random_return)
    : expert_(expert_return), random_(random_return) {
  if (!std::isfinite(expert_) || !std::isfinite(random_) || !(expert_ > random_)) {
    throw ConfigError("degenerate score references: expert " + format_double(expert_) + ", random " +
                      format_double(random_) + " (expert must exceed random)");
  }
}

double ScoreNormalizer::operator()(double r) const { return 100.0 * ((r - random_) / (expert_ - random_)); }

double normalized_score(double agent_return, const ScoreNormalizer& normalizer) { return normalizer(agent_return); }

double stability_metric(std::span<const double> returns, double c) {
  if (returns.size() < 2) throw ConfigError("stability metric needs at least two returns");
  if (!(c > 0.0 && c <= 1.0)) throw ConfigError("EMA coefficient must lie in (0, 1]");
  double ema = returns[0];
  double total = 0.0;
  for (double r : returns) {
    ema = c * r + (1.0 - c) * ema;
    total += std::abs(r - ema);
  }
  return total / static_cast<double>(returns.size());
}

std::vector<double> evaluate_policy(const GaussianPolicy& policy, const EnvSpec& spec, double sigma, int episodes,
                                    std::uint64_t seed) {
  const NoiseWrapper noise(sigma);
  RngStream reset_rng(seed, "eval-reset");
  RngStream noise_rng(seed, "eval-noise");
  RngStream unused(seed, "eval-actions");
  std::vector<double> out;
  out.reserve(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    RngStream ep_reset = reset_rng.fork(static_cast<std::uint64_t>(ep));
    auto rec = run_episode(
        spec, [&](std::span<const double> obs) { return policy.sample_action(obs, unused, true); }, ep_reset, noise,
        noise_rng);
    out.push_back(rec.total_return);
  }
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<SummaryRow> SweepReport::summary() const {
  std::vector<SummaryRow> rows;
  for (const auto& c : cells) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& r) { return r.x == c.sigma && r.method == c.method; });
    if (it == rows.end()) {
      rows.push_back(SummaryRow{c.sigma, c.method, 0, 0.0, 0.0, {}});
      it = rows.end() - 1;
    }
    it->seeds.push_back(c.seed);
  }
  for (auto& r : rows) {
    const auto s = scores(r.method, r.x);
    r.runs = static_cast<int>(s.size());
    r.mean_score = mean(s);
    r.std_score = sample_std(s);
  }
  return rows;
}

std::vector<double> SweepReport::scores(const std::string& method, double sigma) const {
  std::vector<double> out;
  for (const auto& c : cells) {
    if (c.method == method && c.sigma == sigma) out.push_back(c.score);
  }
  return out;
}

SweepReport noise_sweep(const OfflineArtifacts& artifacts, const DemoSet* expert, const EnvSpec& spec,
                        const ScoreNormalizer& normalizer, const SweepOptions& options, const std::string& method) {
  if (options.seeds.empty()) throw ConfigError("noise sweep needs at least one seed");
  if (options.episodes <= 0) throw ConfigError("episodes must be positive");
  if (options.mode != AdaptMode::kOff && expert == nullptr) throw ConfigError("adaptive sweep needs the expert set");
  SweepReport report;
  const std::size_t ns = options.sigmas.size();
  report.cells.resize(ns * options.seeds.size());
  parallel_for(report.cells.size(), options.jobs, [&](std::size_t i) {
    const double sigma = options.sigmas[i / options.seeds.size()];
    const auto seed = options.seeds[i % options.seeds.size()];
    SweepCell cell{sigma, method, seed, 0.0, 0.0, 0};
    if (options.mode == AdaptMode::kOff) {
      cell.mean_return = mean(evaluate_policy(artifacts.policy, spec, sigma, options.episodes, seed));
    } else {
      auto cfg = options.online;
      cfg.sigma = sigma;
      cfg.seed = seed;
      cfg.episodes = options.episodes;
      cfg.mode = options.mode;
      const auto run = run_online(artifacts, *expert, spec, cfg);
      cell.mean_return = mean(run.episode_returns);
      cell.triggers = run.update_count;
    }
    cell.score = normalizer(cell.mean_return);
    report.cells[i] = cell;
  });
  return report;
}

std::vector<double> default_kth_candidates() {
  std::vector<double> out;
  for (int i = 0; i <= 10; ++i) out.push_back(i / 10.0);
  return out;
}

GridReport grid_search_kth(const OfflineArtifacts& artifacts, const DemoSet& expert, const EnvSpec& spec,
                           const ScoreNormalizer& normalizer, double sigma, std::span<const double> candidates,
                           std::span<const std::uint64_t> seeds, int episodes, const OnlineRunConfig& base, int jobs) {
  if (candidates.empty() || seeds.empty()) throw ConfigError("grid search needs candidates and seeds");
  GridReport report;
  report.sigma = sigma;
  report.rows.resize(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    report.rows[c].threshold = candidates[c];
    report.rows[c].seeds.assign(seeds.begin(), seeds.end());
    report.rows[c].scores.assign(seeds.size(), 0.0);
    report.rows[c].triggers.assign(seeds.size(), 0);
  }
  parallel_for(candidates.size() * seeds.size(), jobs, [&](std::size_t i) {
    const std::size_t c = i / seeds.size();
    const std::size_t s = i % seeds.size();
    auto cfg = base;
    cfg.sigma = sigma;
    cfg.seed = seeds[s];
    cfg.episodes = episodes;
    cfg.mode = AdaptMode::kOn;
    cfg.detector.kappa_threshold = candidates[c];
    const auto run = run_online(artifacts, expert, spec, cfg);
    report.rows[c].scores[s] = normalizer(mean(run.episode_returns));
    report.rows[c].triggers[s] = run.update_count;
  });
  double best = -INFINITY;
  for (auto& row : report.rows) {
    row.mean_score = mean(row.scores);
    row.std_score = sample_std(row.scores);
    if (row.mean_score > best) {
      best = row.mean_score;
      report.best_threshold = row.threshold;
    }
  }
  return report;
}

std::vector<TierMix> default_tier_mixes() {
  return {
      {"ME", {Tier::kExpert}},
      {"ME+M", {Tier::kExpert, Tier::kMedium}},
      {"ME+M+MR", {Tier::kExpert, Tier::kMedium, Tier::kMediumReplayLike}},
      {"ME+M+MR+R", {Tier::kExpert, Tier::kMedium, Tier::kMediumReplayLike, Tier::kRandom}},
  };
}

AblationReport tier_ablation(const EnvSpec& spec, std::span<const TierMix> mixes, const DemoSet& expert,
                             std::span<const DemoSet> tier_sets, int supp_episodes_per_tier,
                             const OfflineConfig& base, const ScoreNormalizer& normalizer,
                             std::span<const double> sigmas, std::span<const std::uint64_t> seeds, int episodes,
                             int jobs) {
  if (mixes.empty() || seeds.empty() || sigmas.empty()) throw ConfigError("tier ablation needs mixes, seeds and sigmas");
  std::vector<DemoSet> supp_sets;
  for (const auto& mix : mixes) {
    std::vector<DemoSet> parts;
    std::vector<double> props;
    for (Tier t : mix.tiers) {
      auto it = std::find_if(tier_sets.begin(), tier_sets.end(), [&](const DemoSet& d) {
        return d.header.tiers.size() == 1 && d.header.tiers[0].tier == t;
      });
      if (it == tier_sets.end()) throw DataError("tier ablation: no dataset for tier '" + to_string(t) + "'");
      const int n = it->header.episodes();
      if (n < supp_episodes_per_tier) {
        throw DataError("tier '" + to_string(t) + "' has " + std::to_string(n) + " episodes, need " +
                        std::to_string(supp_episodes_per_tier));
      }
      parts.push_back(*it);
      props.push_back(static_cast<double>(supp_episodes_per_tier) / n);
    }
    supp_sets.push_back(mix_supplementary(parts, props));
  }

  AblationReport report;
  for (const auto& m : mixes) report.mix_names.push_back(m.name);
  const std::size_t n_cells = mixes.size() * seeds.size();
  std::vector<std::vector<SweepCell>> per_cell(n_cells);
  parallel_for(n_cells, jobs, [&](std::size_t i) {
    const std::size_t m = i / seeds.size();
    auto cfg = base;
    cfg.seed = seeds[i % seeds.size()];
    const auto art = run_offline(cfg, expert, supp_sets[m]);
    for (double sigma : sigmas) {
      const double r = mean(evaluate_policy(art.policy, spec, sigma, episodes, cfg.seed));
      per_cell[i].push_back(SweepCell{sigma, mixes[m].name, cfg.seed, r, normalizer(r), 0});
    }
  });
  // Ordered by mix, then sigma, then seed.
  for (std::size_t m = 0; m < mixes.size(); ++m) {
    for (std::size_t k = 0; k < sigmas.size(); ++k) {
      for (std::size_t s = 0; s < seeds.size(); ++s) report.sweep.cells.push_back(per_cell[m * seeds.size() + s][k]);
    }
  }
  return report;
}

void write_sweep_records(const SweepReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot write '" + path.string() + "'");
  for (const auto& c : report.cells) {
    os << "sigma=" << format_double(c.sigma) << " method=" << c.method << " seed=" << c.seed
       << " mean_return=" << format_double(c.mean_return) << " score=" << format_double(c.score)
       << " triggers=" << c.triggers << " ema=" << format_double(report.ema_coefficient) << "\n";
  }
}

std::string format_summary_table(std::span<const SummaryRow> rows, const std::string& x_label) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-8s %-14s %5s %10s %10s  %s\n", x_label.c_str(), "method", "runs", "mean", "std",
                "seeds");
  os << buf;
  for (const auto& r : rows) {
    std::string seeds;
    for (std::size_t i = 0; i < r.seeds.size(); ++i) seeds += (i ? "," : "") + std::to_string(r.seeds[i]);
    std::snprintf(buf, sizeof buf, "%-8.3g %-14s %5d %10.3f %10.3f  ", r.x, r.method.c_str(), r.runs, r.mean_score,
                  r.std_score);
    os << buf << seeds << "\n";
  }
  return os.str();
}

void write_plot_data(std::span<const SummaryRow> rows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot write '" + path.string() + "'");
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  for (const auto& m : methods) {
    os << "# curve " << m << "\n# x y err\n";
    for (const auto& r : rows) {
      if (r.method == m) os << format_double(r.x) << " " << format_double(r.mean_score) << " " << format_double(r.std_score) << "\n";
    }
    os << "\n";
  }
}

std::vector<SummaryRow> grid_summary(const GridReport& report) {
  std::vector<SummaryRow> rows;
  for (const auto& g : report.rows) {
    rows.push_back(SummaryRow{g.threshold, "rail-online", static_cast<int>(g.scores.size()), g.mean_score, g.std_score, g.seeds});
  }
  return rows;
}

void write_grid_records(const GridReport& report, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot write '" + path.string() + "'");
  for (const auto& g : report.rows) {
    for (std::size_t i = 0; i < g.seeds.size(); ++i) {
      os << "sigma=" << format_double(report.sigma) << " kappa_threshold=" << format_double(g.threshold)
         << " seed=" << g.seeds[i] << " score=" << format_double(g.scores[i]) << " triggers=" << g.triggers[i] << "\n";
    }
  }
  os << "best_kappa_threshold=" << format_double(report.best_threshold) << "\n";
}

}  // namespace rail
