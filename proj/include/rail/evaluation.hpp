#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rail/datasets.hpp"
#include "rail/envs.hpp"
#include "rail/offline.hpp"
#include "rail/online.hpp"
#include "rail/policy.hpp"

namespace rail {

class ScoreNormalizer {
 public:
  // Throws ConfigError unless expert_return > random_return (both finite).
  ScoreNormalizer(double expert_return, double random_return);
  explicit ScoreNormalizer(const ReferenceReturns& ref) : ScoreNormalizer(ref.expert_return, ref.random_return) {}

  double expert_return() const { return expert_; }
  double random_return() const { return random_; }
  double operator()(double agent_return) const;

 private:
  double expert_;
  double random_;
};

double normalized_score(double agent_return, const ScoreNormalizer& normalizer);

// Mean |r_t - ema_t| with ema_0 = r_0 and ema_t = c r_t + (1 - c) ema_{t-1}.
// Throws ConfigError for fewer than two returns or c outside (0, 1].
double stability_metric(std::span<const double> returns, double ema_coefficient = 0.1);

// Deterministic (mean-action) rollouts under observation noise.
std::vector<double> evaluate_policy(const GaussianPolicy& policy, const EnvSpec& spec, double sigma, int episodes,
                                    std::uint64_t seed);

double mean(std::span<const double> v);
// Sample standard deviation (n - 1); zero for fewer than two values.
double sample_std(std::span<const double> v);

// Runs fn(i) for i in [0, n) on up to `jobs` worker threads. Each index is
// handled exactly once; results must be written to per-index slots.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

struct SweepCell {
  double sigma = 0.0;
  std::string method;
  std::uint64_t seed = 0;
  double mean_return = 0.0;
  double score = 0.0;
  int triggers = 0;
};

struct SummaryRow {
  double x = 0.0;  // sigma, or kappa threshold for grids
  std::string method;
  int runs = 0;
  double mean_score = 0.0;
  double std_score = 0.0;
  std::vector<std::uint64_t> seeds;
};

struct SweepReport {
  std::vector<SweepCell> cells;
  double ema_coefficient = 0.1;

  std::vector<SummaryRow> summary() const;
  // Scores of (method, sigma) cells in seed order.
  std::vector<double> scores(const std::string& method, double sigma) const;
};

struct SweepOptions {
  std::vector<double> sigmas{0.0, 0.05, 0.1, 0.2};
  std::vector<std::uint64_t> seeds;
  int episodes = 20;
  AdaptMode mode = AdaptMode::kOff;
  OnlineRunConfig online;  // used when mode != off (sigma/seed/episodes/mode are overwritten)
  int jobs = 1;
};

// Scores one policy (mode off) or the online adapter started from the
// artifacts (mode on/always) at every (sigma, seed) cell.
SweepReport noise_sweep(const OfflineArtifacts& artifacts, const DemoSet* expert, const EnvSpec& spec,
                        const ScoreNormalizer& normalizer, const SweepOptions& options, const std::string& method);

struct GridRow {
  double threshold = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> scores;
  std::vector<int> triggers;
  double mean_score = 0.0;
  double std_score = 0.0;
};

struct GridReport {
  double sigma = 0.0;
  std::vector<GridRow> rows;
  double best_threshold = 0.0;
};

std::vector<double> default_kth_candidates();

GridReport grid_search_kth(const OfflineArtifacts& artifacts, const DemoSet& expert, const EnvSpec& spec,
                           const ScoreNormalizer& normalizer, double sigma, std::span<const double> candidates,
                           std::span<const std::uint64_t> seeds, int episodes, const OnlineRunConfig& base,
                           int jobs = 1);

struct TierMix {
  std::string name;
  std::vector<Tier> tiers;
};

// The coverage ladder: expert-adjacent only up to all four tiers.
std::vector<TierMix> default_tier_mixes();

struct AblationReport {
  std::vector<std::string> mix_names;
  SweepReport sweep;  // method = mix name
};

// Trains one offline run per (mix, seed), with the supplementary set built
// from `supp_episodes_per_tier` episodes of every tier in the mix, then
// scores it at each sigma. Rows follow the order of `mixes`.
AblationReport tier_ablation(const EnvSpec& spec, std::span<const TierMix> mixes, const DemoSet& expert,
                             std::span<const DemoSet> tier_sets, int supp_episodes_per_tier,
                             const OfflineConfig& base, const ScoreNormalizer& normalizer,
                             std::span<const double> sigmas, std::span<const std::uint64_t> seeds, int episodes,
                             int jobs = 1);

// Output formats: one key=value record per line; aligned text table;
// "x y err" plot data with one "# curve" block per method.
void write_sweep_records(const SweepReport& report, const std::filesystem::path& path);
std::string format_summary_table(std::span<const SummaryRow> rows, const std::string& x_label);
void write_plot_data(std::span<const SummaryRow> rows, const std::filesystem::path& path);
void write_grid_records(const GridReport& report, const std::filesystem::path& path);
std::vector<SummaryRow> grid_summary(const GridReport& report);

}  // namespace rail
