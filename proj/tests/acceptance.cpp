// Acceptance run: one PASS/FAIL line per criterion, tolerances fixed below.
//
//   rail_acceptance [--full-budget] [criterion ids...]
//
// Without ids every criterion runs. Exit status is 0 only if every criterion
// that ran passed.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdarg>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rail/datasets.hpp"
#include "rail/discriminator.hpp"
#include "rail/evaluation.hpp"
#include "rail/offline.hpp"
#include "rail/online.hpp"
#include "rail/oracles.hpp"

using namespace rail;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and protocol sizes ---------------------------------

constexpr int kSeeds = 10;
constexpr double kOracleSeconds = 5.0;         // criteria 1, 2
constexpr double kNormalizationSeconds = 30.0;  // criterion 3
constexpr double kGradientSeconds = 120.0;      // criterion 4
constexpr double kScheduleTol = 1e-9;           // criterion 5
constexpr int kStabilityWinsRequired = 8;       // criterion 6
constexpr double kStabilitySeconds = 600.0;
constexpr double kInDistributionScore = 80.0;  // criterion 7
constexpr double kOfflineSeconds = 45 * 60.0;
constexpr int kEvalEpisodes = 20;
constexpr int kAdaptEpisodes = 100;  // criterion 8
constexpr int kAdaptWinsRequired = 8;
constexpr double kStudentT975Df9 = 2.262;  // two-sided 5% critical value, 9 dof
constexpr double kAdaptSeconds = 30 * 60.0;
constexpr int kUtmEpisodes = 50;  // criterion 9
constexpr double kTierSeconds = 60 * 60.0;  // criterion 10
constexpr int kGateEpisodes = 20;  // criterion 11

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Budget {
  int ref_steps;
  int disc_steps;
  int bc_steps;
};

// Reduced budgets keep the whole suite near half an hour on one core; the
// full budget is the offline trainer's default configuration.
Budget g_budget{2000, 5000, 10000};
bool g_full_budget = false;

OfflineConfig offline_config(std::uint64_t seed) {
  OfflineConfig c;
  c.seed = seed;
  if (!g_full_budget) {
    c.ref_steps = g_budget.ref_steps;
    c.disc_steps = g_budget.disc_steps;
    c.bc_steps = g_budget.bc_steps;
  }
  return c;
}

// ---- shared pointmass workload (criteria 7-11) ----------------------------

struct SeedRun {
  DemoSet expert;
  OfflineArtifacts rail_all_tiers;   // supplementary: ME+M+MR+R
  OfflineArtifacts plain_bc;
  OfflineArtifacts rail_expert_tier;  // supplementary: ME only
};

struct Workload {
  EnvSpec spec = make_env_spec("pointmass2d");
  std::optional<ScoreNormalizer> norm;
  std::vector<SeedRun> runs;
  double data_and_main_seconds = 0.0;
  double expert_tier_seconds = 0.0;
  double kappa_threshold = 0.4;
  std::string kappa_detail;
  bool kappa_ready = false;
};

Workload& workload() {
  static Workload w;
  return w;
}

void ensure_offline_runs() {
  auto& w = workload();
  if (!w.runs.empty()) return;
  const auto t0 = Clock::now();
  w.norm.emplace(compute_reference_returns(w.spec, 1000, 424242));
  std::printf("  [setup] reference returns: expert %.3f random %.3f\n", w.norm->expert_return(), w.norm->random_return());
  std::fflush(stdout);
  double expert_tier_time = 0.0;
  for (int s = 0; s < kSeeds; ++s) {
    SeedRun r;
    TierOptions topt;
    topt.reference_policy_steps = offline_config(s).ref_steps;
    const std::uint64_t data_seed = 7000 + 10 * static_cast<std::uint64_t>(s);
    r.expert = generate_tier(w.spec, Tier::kExpert, 10, data_seed, topt);
    std::vector<DemoSet> tiers;
    for (Tier t : {Tier::kExpert, Tier::kMedium, Tier::kMediumReplayLike, Tier::kRandom}) {
      tiers.push_back(generate_tier(w.spec, t, 50, data_seed + 1 + static_cast<int>(t), topt));
    }
    const std::vector<double> all(4, 1.0);
    const auto supp_all = mix_supplementary(tiers, all);
    const std::vector<DemoSet> me_only{tiers[0]};
    const std::vector<double> one{1.0};
    const auto supp_me = mix_supplementary(me_only, one);

    auto cfg = offline_config(s);
    const auto t_run = Clock::now();
    r.rail_all_tiers = run_offline(cfg, r.expert, supp_all);
    const double rail_s = seconds_since(t_run);
    auto bc_cfg = cfg;
    bc_cfg.plain_bc = true;
    r.plain_bc = run_offline(bc_cfg, r.expert, supp_all);
    const auto t_me = Clock::now();
    r.rail_expert_tier = run_offline(cfg, r.expert, supp_me);
    expert_tier_time += seconds_since(t_me);
    std::printf("  [setup] seed %d: rail run %.1fs, omega expert %.2f vs random tier %.3f\n", s, rail_s,
                r.rail_all_tiers.metric("omega_expert_set").value_or(NAN),
                r.rail_all_tiers.metric("omega_supp_random").value_or(NAN));
    std::fflush(stdout);
    w.runs.push_back(std::move(r));
  }
  w.expert_tier_seconds = expert_tier_time;
  w.data_and_main_seconds = seconds_since(t0) - expert_tier_time;
}

// Shift threshold from the grid search on seed 0's artifacts, scored on
// rollout seeds disjoint from every seed used by the criteria.
void ensure_kappa_threshold() {
  auto& w = workload();
  if (w.kappa_ready) return;
  ensure_offline_runs();
  const auto cands = default_kth_candidates();
  const std::vector<std::uint64_t> grid_seeds{90001, 90002, 90003};
  const auto g = grid_search_kth(w.runs[0].rail_all_tiers, w.runs[0].expert, w.spec, *w.norm, 0.1, cands, grid_seeds, 30,
                                 OnlineRunConfig{});
  w.kappa_threshold = g.best_threshold;
  std::ostringstream os;
  for (const auto& row : g.rows) os << fmt(" %.1f:%.1f", row.threshold, row.mean_score);
  w.kappa_detail = os.str();
  w.kappa_ready = true;
  std::printf("  [setup] kappa grid (threshold:score)%s -> %.1f\n", w.kappa_detail.c_str(), w.kappa_threshold);
  std::fflush(stdout);
}

double score_of(const GaussianPolicy& p, double sigma, std::uint64_t seed) {
  auto& w = workload();
  return (*w.norm)(mean(evaluate_policy(p, w.spec, sigma, kEvalEpisodes, seed)));
}

// ---- criteria --------------------------------------------------------------

Outcome criterion_1() {
  const auto t0 = Clock::now();
  const auto r = check_biased_boundary(1, 100);
  const double t = seconds_since(t0);
  return {r.passed && t < kOracleSeconds, r.detail + fmt("; %.2fs (limit %.0fs)", t, kOracleSeconds)};
}

Outcome criterion_2() {
  const auto t0 = Clock::now();
  const auto r = check_monotone_interpolation(2);
  const double t = seconds_since(t0);
  return {r.passed && t < kOracleSeconds, r.detail + fmt("; %.2fs (limit %.0fs)", t, kOracleSeconds)};
}

Outcome criterion_3() {
  const auto t0 = Clock::now();
  const auto r = check_joint_normalization(3);
  const double t = seconds_since(t0);
  return {r.passed && t < kNormalizationSeconds, r.detail + fmt("; %.2fs (limit %.0fs)", t, kNormalizationSeconds)};
}

Outcome criterion_4() {
  const auto t0 = Clock::now();
  auto results = check_loss_gradients(4, 20);
  bool ok = true;
  std::string detail;
  for (const auto& r : results) {
    ok = ok && r.passed;
    detail += (detail.empty() ? "" : "; ") + r.name + ": " + r.detail;
  }
  const double t = seconds_since(t0);
  return {ok && t < kGradientSeconds, detail + fmt("; %.2fs (limit %.0fs)", t, kGradientSeconds)};
}

Outcome criterion_5() {
  bool ok = true;
  std::string detail;
  for (long long t : {1LL, 10000LL, 10001LL, 100000LL}) {
    const double expected = t <= 10000 ? 1.0 : 1.0 / (1.0 + std::log(static_cast<double>(t - 9999)));
    const double got = lambda_schedule(t);
    ok = ok && std::abs(got - expected) <= kScheduleTol;
    detail += fmt("lambda(%lld)=%.10f ", t, got);
  }
  const double w_half = bc_weight_from_output(0.5), w_hi = bc_weight_from_output(0.99), w_lo = bc_weight_from_output(0.01);
  ok = ok && std::abs(w_half - 1.0) <= kScheduleTol && std::abs(w_hi - 99.0) <= kScheduleTol &&
       std::abs(w_lo - 1.0 / 99.0) <= kScheduleTol;
  detail += fmt("omega(0.5)=%.12g omega(0.99)=%.12g omega(0.01)=%.12g ", w_half, w_hi, w_lo);
  bool exact = true;
  for (auto [re, rr] : {std::pair{-17.25, -146.5}, std::pair{1000.0, 3.0}, std::pair{-0.1, -0.3}}) {
    const ScoreNormalizer n(re, rr);
    exact = exact && n(rr) == 0.0 && n(re) == 100.0;
  }
  ok = ok && exact;
  detail += exact ? "score(random)=0 score(expert)=100 exactly" : "score endpoints not exact";
  return {ok, detail};
}

// Seeded 1-D task: expert states N(1,1), supplementary N(-1,1), 1:100 in
// sample count and in the supplementary weight. Posterior targets come from the
// true densities. Both arms share data, init and batches; only lambda differs.
struct ImbalanceTask {
  std::vector<std::vector<double>> expert, supp, held_expert, held_supp;
};

ImbalanceTask make_imbalance_task(std::uint64_t seed) {
  RngStream rng(seed, "imbalance-data");
  ImbalanceTask t;
  for (int i = 0; i < 20; ++i) t.expert.push_back({rng.normal(1.0, 1.0)});
  for (int i = 0; i < 2000; ++i) t.supp.push_back({rng.normal(-1.0, 1.0)});
  for (int i = 0; i < 1000; ++i) t.held_expert.push_back({rng.normal(1.0, 1.0)});
  for (int i = 0; i < 1000; ++i) t.held_supp.push_back({rng.normal(-1.0, 1.0)});
  return t;
}

double imbalance_eval_at_quarter(const ImbalanceTask& task, std::uint64_t seed, bool regularized) {
  constexpr int kSteps = 2000, kBatch = 64;
  constexpr double kImbalance = 100.0;
  const std::vector<double> zero{0.0};
  RngStream init(seed, "imbalance-init");
  DiscriminatorModel d(1, 1, {16}, init);
  AdamState opt(d.net().num_params(), AdamConfig{.learning_rate = 3e-3});
  RngStream batch(seed, "imbalance-batch");
  auto target = [](double x) { return reg_target(-0.5 * (x - 1) * (x - 1), -0.5 * (x + 1) * (x + 1)); };
  std::vector<DiscSample> eb(kBatch), sb(kBatch), mb(kBatch);
  for (int step = 1; step <= kSteps / 4; ++step) {
    for (int i = 0; i < kBatch; ++i) {
      const auto& e = task.expert[batch.index(task.expert.size())];
      const auto& s = task.supp[batch.index(task.supp.size())];
      eb[i] = {e, zero, 1.0};
      sb[i] = {s, zero, kImbalance};
      const auto& m = (i % 2 == 0) ? e : s;
      mb[i] = {m, zero, target(m[0])};
    }
    const double lambda = regularized ? lambda_schedule(step) : 0.0;
    adam_step(d.net().params(), combined_offline_loss(d, eb, sb, mb, lambda).grad, opt);
  }
  std::vector<DiscSample> he, hs;
  for (const auto& x : task.held_expert) he.push_back({x, zero, 1.0});
  for (const auto& x : task.held_supp) hs.push_back({x, zero, 1.0});
  return eval_discriminator(d, he, hs);
}

Outcome criterion_6() {
  const auto t0 = Clock::now();
  int wins = 0;
  std::string detail;
  for (int s = 0; s < kSeeds; ++s) {
    const std::uint64_t seed = 6000 + s;
    const auto task = make_imbalance_task(seed);
    const double lr = imbalance_eval_at_quarter(task, seed, true);
    const double lp = imbalance_eval_at_quarter(task, seed, false);
    wins += lr < lp;
    detail += fmt(" %.3f/%.3f", lr, lp);
  }
  const double t = seconds_since(t0);
  return {wins >= kStabilityWinsRequired && t < kStabilitySeconds,
          fmt("regularized lower in %d/%d seeds (need %d); held-out loss at 25%% reg/unreg:", wins, kSeeds,
              kStabilityWinsRequired) +
              detail + fmt("; %.1fs (limit %.0fs)", t, kStabilitySeconds)};
}

Outcome criterion_7() {
  const auto t0 = Clock::now();
  ensure_offline_runs();
  auto& w = workload();
  std::map<double, std::pair<std::vector<double>, std::vector<double>>> by_sigma;
  for (int s = 0; s < kSeeds; ++s) {
    for (double sigma : {0.0, 0.1, 0.2}) {
      const std::uint64_t eval_seed = 11000 + s;
      by_sigma[sigma].first.push_back(score_of(w.runs[s].rail_all_tiers.policy, sigma, eval_seed));
      by_sigma[sigma].second.push_back(score_of(w.runs[s].plain_bc.policy, sigma, eval_seed));
    }
  }
  const double eval_s = seconds_since(t0);
  const double total = w.data_and_main_seconds + eval_s;
  auto m = [&](double sigma, bool rail) { return mean(rail ? by_sigma[sigma].first : by_sigma[sigma].second); };
  const bool in_dist = m(0.0, true) > kInDistributionScore && m(0.0, false) > kInDistributionScore;
  const bool robust = m(0.1, true) > m(0.1, false) && m(0.2, true) > m(0.2, false);
  return {in_dist && robust && total < kOfflineSeconds,
          fmt("mean score rail/bc: sigma0 %.1f/%.1f, sigma0.1 %.1f/%.1f, sigma0.2 %.1f/%.1f (need rail>bc at 0.1,0.2; both>%.0f "
              "at 0); %.0fs incl. training (limit %.0fs)",
              m(0.0, true), m(0.0, false), m(0.1, true), m(0.1, false), m(0.2, true), m(0.2, false), kInDistributionScore,
              total, kOfflineSeconds)};
}

// Per-seed on/off online runs at sigma 0.1, kept for criterion 11.
std::vector<std::vector<TriggerRecord>> g_adapt_logs;

Outcome criterion_8() {
  ensure_offline_runs();
  ensure_kappa_threshold();
  const auto t0 = Clock::now();
  auto& w = workload();
  int wins_on = 0;
  std::vector<double> off_diffs;
  std::string detail;
  g_adapt_logs.clear();
  for (int s = 0; s < kSeeds; ++s) {
    OnlineRunConfig c;
    c.sigma = 0.1;
    c.episodes = kAdaptEpisodes;
    c.seed = 12000 + s;
    c.detector.kappa_threshold = w.kappa_threshold;
    c.mode = AdaptMode::kOn;
    const auto on = run_online(w.runs[s].rail_all_tiers, w.runs[s].expert, w.spec, c);
    c.mode = AdaptMode::kOff;
    const auto off = run_online(w.runs[s].rail_all_tiers, w.runs[s].expert, w.spec, c);
    auto diff = [](const std::vector<double>& r) {
      const std::span<const double> v(r);
      return mean(v.subspan(v.size() - 10, 10)) - mean(v.subspan(0, 10));
    };
    const double d_on = diff(on.episode_returns), d_off = diff(off.episode_returns);
    wins_on += d_on > 0.0;
    off_diffs.push_back(d_off);
    detail += fmt(" %+.2f/%+.2f(%d)", d_on, d_off, on.update_count);
    g_adapt_logs.push_back(on.trigger_log);
  }
  const double sd = sample_std(off_diffs);
  const double t_off = sd > 0.0 ? mean(off_diffs) / (sd / std::sqrt(static_cast<double>(kSeeds))) : 0.0;
  const bool control_flat = std::abs(t_off) < kStudentT975Df9;
  const double t = seconds_since(t0);
  return {wins_on >= kAdaptWinsRequired && control_flat && t < kAdaptSeconds,
          fmt("kappa_th %.1f (grid); on improved in %d/%d seeds (need %d); off paired t=%.2f (need |t|<%.3f); "
              "last10-first10 on/off(updates):",
              w.kappa_threshold, wins_on, kSeeds, kAdaptWinsRequired, t_off, kStudentT975Df9) +
              detail + fmt("; %.0fs (limit %.0fs)", t, kAdaptSeconds)};
}

Outcome criterion_9() {
  ensure_offline_runs();
  ensure_kappa_threshold();
  auto& w = workload();
  bool ok = true;
  std::string detail;
  for (int s = 0; s < kSeeds; ++s) {
    OnlineRunConfig c;
    c.sigma = 0.2;
    c.episodes = kUtmEpisodes;
    c.seed = 13000 + s;
    c.detector.kappa_threshold = w.kappa_threshold;
    c.mode = AdaptMode::kOn;
    const auto on = run_online(w.runs[s].rail_all_tiers, w.runs[s].expert, w.spec, c);
    c.mode = AdaptMode::kAlways;
    const auto always = run_online(w.runs[s].rail_all_tiers, w.runs[s].expert, w.spec, c);
    ok = ok && on.update_count < always.update_count && on.update_wall_ms < always.update_wall_ms;
    detail += fmt(" %d/%d(%.0f/%.0fms)", on.update_count, always.update_count, on.update_wall_ms, always.update_wall_ms);
  }
  return {ok, fmt("kappa_th %.1f; updates on/always per seed:", w.kappa_threshold) + detail};
}

Outcome criterion_10() {
  const auto t0 = Clock::now();
  ensure_offline_runs();
  auto& w = workload();
  std::vector<double> all, narrow, all0, narrow0;
  for (int s = 0; s < kSeeds; ++s) {
    const std::uint64_t eval_seed = 11000 + s;
    all.push_back(score_of(w.runs[s].rail_all_tiers.policy, 0.2, eval_seed));
    narrow.push_back(score_of(w.runs[s].rail_expert_tier.policy, 0.2, eval_seed));
    all0.push_back(score_of(w.runs[s].rail_all_tiers.policy, 0.0, eval_seed));
    narrow0.push_back(score_of(w.runs[s].rail_expert_tier.policy, 0.0, eval_seed));
  }
  const double total = w.expert_tier_seconds + seconds_since(t0);
  return {mean(all) >= mean(narrow) && total < kTierSeconds,
          fmt("sigma0.2 mean score ME+M+MR+R %.1f (+-%.1f) vs ME %.1f (+-%.1f); sigma0 %.1f vs %.1f; %.0fs (limit %.0fs)",
              mean(all), sample_std(all), mean(narrow), sample_std(narrow), mean(all0), mean(narrow0), total,
              kTierSeconds)};
}

Outcome criterion_11() {
  ensure_offline_runs();
  ensure_kappa_threshold();
  auto& w = workload();
  if (g_adapt_logs.empty()) criterion_8();
  std::size_t records = 0, violations = 0, triggers = 0;
  for (const auto& log : g_adapt_logs) {
    records += log.size();
    for (const auto& r : log) triggers += r.triggered;
    violations += gating_violations(log, ShiftDetectorConfig{w.kappa_threshold, 20, 2000}).size();
  }
  int zero_threshold_triggers = 0;
  for (int s = 0; s < kSeeds; ++s) {
    OnlineRunConfig c;
    c.sigma = 0.2;
    c.episodes = kGateEpisodes;
    c.seed = 14000 + s;
    c.detector.kappa_threshold = 0.0;
    const auto r = run_online(w.runs[s].rail_all_tiers, w.runs[s].expert, w.spec, c);
    for (const auto& t : r.trigger_log) zero_threshold_triggers += t.triggered;
    violations += gating_violations(r.trigger_log, c.detector).size();
  }
  return {violations == 0 && zero_threshold_triggers == 0 && triggers > 0,
          fmt("%zu replayed records, %zu triggers, %zu violations; kappa_th=0 triggers %d", records, triggers,
              violations, zero_threshold_triggers)};
}

// ---- criterion 12: rerun every subcommand through the CLI ------------------

int run_cli(const fs::path& cwd, const std::string& args, const fs::path& log) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" + std::string(RAIL_CLI_PATH) + "' " + args + " > '" +
                          log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Files that carry wall-clock measurements by design.
bool timing_file(const fs::path& p) {
  const auto name = p.filename().string();
  return name == "manifest.json" || name.ends_with(".manifest.json") || name == "timing.log" ||
         name == "update_timing.log";
}

Outcome criterion_12() {
  const fs::path root = fs::temp_directory_path() / "rail_acceptance_repro";
  fs::remove_all(root);
  const std::string tiny =
      " --set ref_steps=300 --set disc_steps=400 --set bc_steps=400 --set gmm_components=3"
      " --set policy_hidden=16 --set disc_hidden=16";
  std::vector<std::string> failures;
  std::size_t compared = 0;
  for (const char* rep : {"a", "b"}) {
    const fs::path d = root / rep;
    fs::create_directories(d);
    // relative paths: the config (and its hash) must not depend on the rep dir
    auto at = [](const std::string& x) { return x; };
    const std::vector<std::string> cmds{
        "gen-data --env pointmass2d --tier expert --episodes 4 --seed 5 --out " + at("expert.demo"),
        "gen-data --env pointmass2d --tier medium,medium_replay_like,random --episodes 5 --seed 6 --ref-steps 300 --out " +
            at("supp.demo"),
        "gen-data --env pointmass2d --tier expert --episodes 5 --seed 7 --out " + at("t_expert.demo"),
        "gen-data --env pointmass2d --tier medium --episodes 5 --seed 8 --out " + at("t_medium.demo"),
        "gen-data --env pointmass2d --tier medium_replay_like --episodes 5 --seed 10 --ref-steps 300 --out " +
            at("t_mr.demo"),
        "gen-data --env pointmass2d --tier random --episodes 5 --seed 11 --out " + at("t_random.demo"),
        "ref-returns --env pointmass2d --episodes 50 --seed 9 --out " + at("ref.txt"),
        "train-offline --set expert_path=" + at("expert.demo") + " --set supp_path=" + at("supp.demo") + tiny +
            " --set seed=3 --out " + at("art"),
        "run-online --artifacts " + at("art") + " --sigma 0.2 --episodes 4 --adapt on --kappa-threshold 0.9 --seed 4 --out " +
            at("online"),
        "evaluate --artifacts " + at("art") + " --sweep 0,0.2 --runs 2 --episodes 2 --out " + at("eval"),
        "grid-kth --artifacts " + at("art") + " --sigma 0.2 --runs 1 --episodes 1 --out " + at("grid"),
        "tier-ablation --expert " + at("expert.demo") + " --tier-data " + at("t_expert.demo") + " --tier-data " +
            at("t_medium.demo") + " --tier-data " + at("t_mr.demo") + " --tier-data " + at("t_random.demo") +
            " --episodes-per-tier 3 --sweep 0.2 --runs 1 --episodes 2" + tiny + " --out " +
            at("ablation"),
    };
    for (const auto& c : cmds) {
      if (run_cli(d, c, root / (std::string(rep) + ".log")) != 0) {
        failures.push_back("exit!=0: " + c.substr(0, c.find(' ')));
      }
    }
  }
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file() || timing_file(e.path())) continue;
    const auto rel = fs::relative(e.path(), root / "a");
    ++compared;
    if (slurp(e.path()) != slurp(root / "b" / rel)) failures.push_back("differs: " + rel.string());
  }
  std::string detail = fmt("%zu output files compared across two runs of 7 subcommands (manifest and timing logs excluded)",
                           compared);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty() && compared > 0, detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--full-budget") {
      g_full_budget = true;
    } else {
      only.insert(std::atoi(a.c_str()));
    }
  }
  const OfflineConfig shown = offline_config(0);
  std::printf("offline budgets: reference %d, discriminator %d, weighted BC %d steps%s\n", shown.ref_steps,
              shown.disc_steps, shown.bc_steps, g_full_budget ? " (full)" : " (reduced)");

  const std::vector<Criterion> criteria{
      {1, "biased boundary oracle", criterion_1},
      {2, "monotone interpolation oracle", criterion_2},
      {3, "joint density normalization", criterion_3},
      {4, "loss gradient suite", criterion_4},
      {5, "exact formulas", criterion_5},
      {6, "discriminator stability under imbalance", criterion_6},
      {7, "offline robustness trend", criterion_7},
      {8, "online adaptation trend", criterion_8},
      {9, "update time management efficiency", criterion_9},
      {10, "tier coverage trend", criterion_10},
      {11, "gating correctness", criterion_11},
      {12, "reproducibility", criterion_12},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.passed;
    std::printf("criterion %2d %s  %s: %s\n", c.id, o.passed ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
