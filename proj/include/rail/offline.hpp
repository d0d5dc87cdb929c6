#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rail/config.hpp"
#include "rail/demo_set.hpp"
#include "rail/density.hpp"
#include "rail/discriminator.hpp"
#include "rail/policy.hpp"

namespace rail {

struct OfflineConfig {
  std::string env_id = "pointmass2d";
  std::string expert_path;
  std::string supp_path;
  std::uint64_t seed = 0;

  int ref_steps = 5000;
  int disc_steps = 20000;
  int bc_steps = 30000;
  long long lambda_cutoff = 10000;
  int gmm_components = 8;
  double gmm_alpha = 0.05;
  double ratio_min = 0.1;
  double ratio_max = 10.0;
  double policy_lr = 5e-4;
  double disc_lr = 5e-4;
  int batch_size = 64;
  std::vector<int> policy_hidden{64, 64};
  std::vector<int> disc_hidden{64, 64};
  double held_out_fraction = 0.1;
  int log_every = 100;
  // Evaluate the discriminator on the held-out split every this many steps
  // (0: twenty evenly spaced points), and always at 25% of the budget.
  int disc_eval_every = 0;

  bool disable_reg = false;
  bool plain_bc = false;

  static OfflineConfig from(const KeyValueConfig& kv);
  KeyValueConfig to_kv() const;
  std::string hash() const;
  void validate() const;
};

struct MetricRecord {
  std::string stage;
  long long step = 0;
  double loss = 0.0;
  double lambda = 0.0;

  bool operator==(const MetricRecord&) const = default;
};

struct TimingRecord {
  std::string stage;
  long long step = 0;
  double wall_ms = 0.0;
};

struct OfflineArtifacts {
  std::string config_hash;
  std::uint64_t seed = 0;
  GaussianPolicy policy;
  std::optional<DiscriminatorModel> discriminator;
  std::shared_ptr<const GaussianPolicy> ref_expert;
  std::shared_ptr<const GaussianPolicy> ref_supp;
  std::shared_ptr<const GmmModel> gmm_expert;
  std::shared_ptr<const GmmModel> gmm_supp;
  std::vector<MetricRecord> metrics;
  std::vector<TimingRecord> timing;

  // Held-out discriminator evaluation loss recorded at `step`, if any.
  std::optional<double> disc_eval_at(long long step) const;
  std::optional<double> metric(const std::string& stage) const;
};

// Per-stage seeds derived from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, const std::string& stage);

// Weighted behavior cloning over a fixed sample list; samples are drawn
// uniformly with replacement. `policy` is trained in place.
void train_weighted_bc(GaussianPolicy& policy, std::span<const WeightedSample> samples, int steps, int batch_size,
                       double learning_rate, std::uint64_t seed, const std::string& stage,
                       std::vector<MetricRecord>* metrics, int log_every);

// Offline phase: reference policies, state GMMs, regularized discriminator,
// weighted BC. Under plain_bc only unit-weight BC on the expert set runs.
OfflineArtifacts run_offline(const OfflineConfig& config, const DemoSet& expert, const DemoSet& supp);

// Artifact directory layout.
namespace artifact_files {
inline constexpr const char* kPolicy = "policy.ckpt";
inline constexpr const char* kDiscriminator = "discriminator.ckpt";
inline constexpr const char* kRefExpert = "ref_expert.ckpt";
inline constexpr const char* kRefSupp = "ref_supp.ckpt";
inline constexpr const char* kGmmExpert = "gmm_expert.ckpt";
inline constexpr const char* kGmmSupp = "gmm_supp.ckpt";
inline constexpr const char* kMetrics = "metrics.log";
inline constexpr const char* kTiming = "timing.log";
inline constexpr const char* kExpertDemos = "expert.demo";
inline constexpr const char* kRefReturns = "ref_returns.txt";
inline constexpr const char* kConfig = "config.txt";
}  // namespace artifact_files

// Writes every artifact plus the metrics and timing logs; returns the list
// of files written.
std::vector<std::filesystem::path> write_artifacts(const OfflineArtifacts& artifacts,
                                                   const std::filesystem::path& dir);
// Files required by the online phase that are absent from `dir`.
std::vector<std::string> missing_online_artifacts(const std::filesystem::path& dir);
OfflineArtifacts load_artifacts(const std::filesystem::path& dir);

}  // namespace rail
