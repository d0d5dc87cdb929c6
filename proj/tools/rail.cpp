// rail: command-line entry point for data generation, offline training,
// online adaptation, sweeps and the verification suite.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rail/config.hpp"
#include "rail/datasets.hpp"
#include "rail/demo_set.hpp"
#include "rail/envs.hpp"
#include "rail/errors.hpp"
#include "rail/evaluation.hpp"
#include "rail/offline.hpp"
#include "rail/online.hpp"
#include "rail/oracles.hpp"

namespace fs = std::filesystem;
using namespace rail;

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kReferenceEpisodes = 1000;

fs::path output_root() {
  const char* env = std::getenv("RAIL_OUTPUT_ROOT");
  return env != nullptr && *env != '\0' ? fs::path(env) : fs::path("runs");
}

fs::path resolve_out(const std::string& out, const std::string& subcommand) {
  return out.empty() ? output_root() / subcommand : fs::path(out);
}

// Fails with a usage error when `dir` already holds files and --force is off.
void prepare_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError("'" + dir.string() + "' exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw ConfigError("output directory '" + dir.string() + "' is not empty (use --force to overwrite)");
  }
  fs::create_directories(dir);
}

struct Manifest {
  std::string subcommand;
  std::vector<std::string> args;
  std::string config_path;
  std::string config_hash;
  std::uint64_t seed = 0;
  fs::path output_dir;
  std::vector<fs::path> artifacts;
  Clock::time_point start = Clock::now();

  // Written last, through a temporary file and a rename.
  void write(const fs::path& path) const {
    for (const auto& a : artifacts) {
      if (!fs::exists(a)) throw DataError("manifest lists missing file '" + a.string() + "'");
    }
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["args"] = args;
    j["config_path"] = config_path;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["output_dir"] = output_dir.string();
    j["wall_time_s"] = std::chrono::duration<double>(Clock::now() - start).count();
    std::vector<std::string> files;
    for (const auto& a : artifacts) files.push_back(a.string());
    j["artifacts"] = files;
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream os(tmp, std::ios::trunc);
      if (!os) throw LoadError(LoadError::Kind::kIo, "cannot write '" + tmp.string() + "'");
      os << j.dump(2) << "\n";
    }
    fs::rename(tmp, path);
  }
};

std::string args_hash(const std::vector<std::string>& args) {
  std::string joined;
  for (const auto& a : args) joined += a + "\n";
  return hash_hex(joined);
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid number '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<std::uint64_t> seed_list(std::uint64_t base, int runs) {
  if (runs < 1) throw ConfigError("--runs must be at least 1");
  std::vector<std::uint64_t> out;
  for (int i = 0; i < runs; ++i) out.push_back(base + static_cast<std::uint64_t>(i));
  return out;
}

std::vector<Tier> parse_tiers(const std::string& text) {
  std::vector<Tier> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(tier_from_string(item));
  if (out.empty()) throw ConfigError("no tier given");
  return out;
}

struct LoadedArtifacts {
  OfflineArtifacts artifacts;
  DemoSet expert;
  EnvSpec spec;
  ReferenceReturns refs;
};

LoadedArtifacts load_for_online(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("artifacts directory '" + dir.string() + "' does not exist");
  const auto missing = missing_online_artifacts(dir);
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += "\n  " + m;
    throw ConfigError("incomplete artifacts in '" + dir.string() + "'; missing:" + list);
  }
  LoadedArtifacts out{load_artifacts(dir), load_demoset(dir / artifact_files::kExpertDemos),
                      make_env_spec("pointmass2d"), load_reference_returns(dir / artifact_files::kRefReturns)};
  out.spec = make_env_spec(out.expert.header.env_id);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot write '" + path.string() + "'");
  os << text;
}

// ---------------------------------------------------------------------------

struct GenDataOpts {
  std::string env;
  std::string tiers;
  int episodes = 10;
  std::uint64_t seed = 0;
  std::string out;
  int ref_steps = 5000;
};

int cmd_gen_data(const GenDataOpts& o, Manifest& m) {
  const auto spec = make_env_spec(o.env);
  const auto tiers = parse_tiers(o.tiers);
  if (o.episodes < 1) throw ConfigError("--episodes must be at least 1");
  if (o.out.empty()) throw ConfigError("--out is required");
  TierOptions to;
  to.reference_policy_steps = o.ref_steps;
  std::vector<DemoSet> parts;
  for (Tier t : tiers) parts.push_back(generate_tier(spec, t, o.episodes, derive_seed(o.seed, "tier-" + to_string(t)), to));
  DemoSet set;
  if (parts.size() == 1) {
    set = std::move(parts[0]);
  } else {
    const std::vector<double> ones(parts.size(), 1.0);
    set = mix_supplementary(parts, ones);
  }
  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_demoset(set, out);
  const auto returns = episode_returns(set, spec);
  std::cout << "wrote " << out.string() << ": " << set.header.episodes() << " episodes, " << set.samples.size()
            << " samples, mean return " << mean(returns) << "\n";
  m.seed = o.seed;
  m.output_dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  m.artifacts = {out};
  m.write(fs::path(out.string() + ".manifest.json"));
  return 0;
}

struct RefOpts {
  std::string env;
  int episodes = kReferenceEpisodes;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_ref_returns(const RefOpts& o, Manifest& m) {
  const auto spec = make_env_spec(o.env);
  if (o.out.empty()) throw ConfigError("--out is required");
  const auto ref = compute_reference_returns(spec, o.episodes, o.seed);
  const fs::path out(o.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_reference_returns(ref, out);
  std::cout << "expert_return " << ref.expert_return << " random_return " << ref.random_return << "\n";
  m.seed = o.seed;
  m.output_dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  m.artifacts = {out};
  m.write(fs::path(out.string() + ".manifest.json"));
  return 0;
}

struct TrainOpts {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  bool force = false;
};

KeyValueConfig load_config(const std::string& path, const std::vector<std::string>& sets) {
  KeyValueConfig kv = path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
  for (const auto& s : sets) kv.apply_override(s);
  return kv;
}

int cmd_train_offline(const TrainOpts& o, Manifest& m) {
  const auto cfg = OfflineConfig::from(load_config(o.config, o.sets));
  if (cfg.expert_path.empty()) throw ConfigError("config key expert_path is required");
  if (!cfg.plain_bc && cfg.supp_path.empty()) throw ConfigError("config key supp_path is required");
  const auto expert = load_demoset(fs::path(cfg.expert_path));
  const DemoSet supp = cfg.supp_path.empty() ? DemoSet{} : load_demoset(fs::path(cfg.supp_path));
  const fs::path dir = resolve_out(o.out, "train-offline");
  prepare_dir(dir, o.force);

  const auto artifacts = run_offline(cfg, expert, cfg.plain_bc && supp.samples.empty() ? expert : supp);
  auto files = write_artifacts(artifacts, dir);
  save_demoset(expert, dir / artifact_files::kExpertDemos);
  files.push_back(dir / artifact_files::kExpertDemos);
  const auto spec = make_env_spec(cfg.env_id);
  save_reference_returns(compute_reference_returns(spec, kReferenceEpisodes, derive_seed(cfg.seed, "reference-returns")),
                         dir / artifact_files::kRefReturns);
  files.push_back(dir / artifact_files::kRefReturns);
  write_text(dir / artifact_files::kConfig, cfg.to_kv().canonical());
  files.push_back(dir / artifact_files::kConfig);

  std::cout << "trained " << (cfg.plain_bc ? "plain BC" : "RAIL") << " policy into " << dir.string() << " (config "
            << cfg.hash() << ")\n";
  m.config_path = o.config;
  m.config_hash = cfg.hash();
  m.seed = cfg.seed;
  m.output_dir = dir;
  m.artifacts = files;
  m.write(dir / "manifest.json");
  return 0;
}

struct OnlineOpts {
  std::string artifacts;
  double sigma = 0.0;
  int episodes = 100;
  std::string adapt = "on";
  std::uint64_t seed = 0;
  double kappa_threshold = 0.4;
  int consecutive = 20;
  std::string out;
  bool force = false;
};

OnlineRunConfig online_config(double kth, int consecutive) {
  OnlineRunConfig c;
  c.detector.kappa_threshold = kth;
  c.detector.consecutive_required = consecutive;
  return c;
}

int cmd_run_online(const OnlineOpts& o, Manifest& m) {
  const auto mode = adapt_mode_from_string(o.adapt);
  auto loaded = load_for_online(o.artifacts);
  const fs::path dir = resolve_out(o.out, "run-online");
  prepare_dir(dir, o.force);
  auto cfg = online_config(o.kappa_threshold, o.consecutive);
  cfg.sigma = o.sigma;
  cfg.episodes = o.episodes;
  cfg.mode = mode;
  cfg.seed = o.seed;
  const auto res = run_online(loaded.artifacts, loaded.expert, loaded.spec, cfg);

  std::vector<fs::path> files{dir / "returns.log", dir / "trigger.log", dir / "update_timing.log"};
  write_episode_returns(res.episode_returns, files[0]);
  write_trigger_log(res.trigger_log, files[1]);
  {
    std::ofstream os(files[2], std::ios::trunc);
    for (const auto& t : res.update_timing) os << "episode=" << t.episode << " step=" << t.step << " wall_ms=" << t.wall_ms << "\n";
    os << "total_updates=" << res.update_count << " total_wall_ms=" << res.update_wall_ms << "\n";
  }
  if (mode != AdaptMode::kOff) {
    files.push_back(dir / "adapted_policy.ckpt");
    std::ofstream os(files.back(), std::ios::binary | std::ios::trunc);
    res.final_policy.save(os);
  }
  const ScoreNormalizer norm(loaded.refs);
  std::cout << "episodes " << res.episode_returns.size() << "  mean score " << norm(mean(res.episode_returns))
            << "  updates " << res.update_count << " (aborted " << res.aborted_updates << ")\n";
  m.seed = o.seed;
  m.config_hash = args_hash(m.args);
  m.output_dir = dir;
  m.artifacts = files;
  m.write(dir / "manifest.json");
  return 0;
}

struct EvalOpts {
  std::string artifacts;
  std::string sweep = "0,0.05,0.1,0.2";
  int runs = 10;
  int episodes = 20;
  std::string adapt = "off";
  std::uint64_t seed = 0;
  double kappa_threshold = 0.4;
  int jobs = 1;
  std::string out;
  bool force = false;
};

int cmd_evaluate(const EvalOpts& o, Manifest& m) {
  auto loaded = load_for_online(o.artifacts);
  const fs::path dir = resolve_out(o.out, "evaluate");
  prepare_dir(dir, o.force);
  SweepOptions so;
  so.sigmas = parse_double_list(o.sweep);
  so.seeds = seed_list(o.seed, o.runs);
  so.episodes = o.episodes;
  so.mode = adapt_mode_from_string(o.adapt);
  so.online = online_config(o.kappa_threshold, 20);
  so.jobs = o.jobs;
  const ScoreNormalizer norm(loaded.refs);
  const std::string method = loaded.artifacts.discriminator ? "rail" : "bc";
  const auto report = noise_sweep(loaded.artifacts, &loaded.expert, loaded.spec, norm, so,
                                  so.mode == AdaptMode::kOff ? method : method + "-" + o.adapt);
  const auto rows = report.summary();
  const auto table = format_summary_table(rows, "sigma");
  std::vector<fs::path> files{dir / "sweep.records", dir / "summary.txt", dir / "plot.dat"};
  write_sweep_records(report, files[0]);
  write_text(files[1], table);
  write_plot_data(rows, files[2]);
  std::cout << table;
  m.seed = o.seed;
  m.config_hash = args_hash(m.args);
  m.output_dir = dir;
  m.artifacts = files;
  m.write(dir / "manifest.json");
  return 0;
}

struct GridOpts {
  std::string artifacts;
  double sigma = 0.1;
  int runs = 10;
  int episodes = 20;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
  bool force = false;
};

int cmd_grid_kth(const GridOpts& o, Manifest& m) {
  auto loaded = load_for_online(o.artifacts);
  const fs::path dir = resolve_out(o.out, "grid-kth");
  prepare_dir(dir, o.force);
  const auto candidates = default_kth_candidates();
  const auto seeds = seed_list(o.seed, o.runs);
  const ScoreNormalizer norm(loaded.refs);
  const auto grid = grid_search_kth(loaded.artifacts, loaded.expert, loaded.spec, norm, o.sigma, candidates, seeds,
                                    o.episodes, OnlineRunConfig{}, o.jobs);
  const auto rows = grid_summary(grid);
  const auto table = format_summary_table(rows, "k_th");
  std::vector<fs::path> files{dir / "grid.records", dir / "grid_summary.txt", dir / "grid_plot.dat"};
  write_grid_records(grid, files[0]);
  write_text(files[1], table + "best_kappa_threshold " + format_double(grid.best_threshold) + "\n");
  write_plot_data(rows, files[2]);
  std::cout << table << "best kappa threshold: " << grid.best_threshold << "\n";
  m.seed = o.seed;
  m.config_hash = args_hash(m.args);
  m.output_dir = dir;
  m.artifacts = files;
  m.write(dir / "manifest.json");
  return 0;
}

struct AblationOpts {
  std::string config;
  std::vector<std::string> sets;
  std::string expert;
  std::vector<std::string> tier_data;
  int episodes_per_tier = 50;
  std::string sweep = "0,0.2";
  int runs = 10;
  int episodes = 20;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
  bool force = false;
};

int cmd_tier_ablation(const AblationOpts& o, Manifest& m) {
  auto kv = load_config(o.config, o.sets);
  const auto base = OfflineConfig::from(kv);
  if (o.expert.empty()) throw ConfigError("--expert is required");
  if (o.tier_data.empty()) throw ConfigError("--tier-data is required");
  const auto expert = load_demoset(fs::path(o.expert));
  std::vector<DemoSet> tiers;
  for (const auto& p : o.tier_data) tiers.push_back(load_demoset(fs::path(p)));
  const fs::path dir = resolve_out(o.out, "tier-ablation");
  prepare_dir(dir, o.force);
  const auto spec = make_env_spec(base.env_id);
  const ScoreNormalizer norm(compute_reference_returns(spec, kReferenceEpisodes, derive_seed(o.seed, "reference-returns")));
  const auto mixes = default_tier_mixes();
  const auto sigmas = parse_double_list(o.sweep);
  const auto seeds = seed_list(o.seed, o.runs);
  const auto report = tier_ablation(spec, mixes, expert, tiers, o.episodes_per_tier, base, norm, sigmas, seeds,
                                    o.episodes, o.jobs);
  const auto rows = report.sweep.summary();
  const auto table = format_summary_table(rows, "sigma");
  std::vector<fs::path> files{dir / "ablation.records", dir / "ablation_summary.txt", dir / "ablation_plot.dat"};
  write_sweep_records(report.sweep, files[0]);
  write_text(files[1], table);
  write_plot_data(rows, files[2]);
  std::cout << table;
  m.config_path = o.config;
  m.config_hash = base.hash();
  m.seed = o.seed;
  m.output_dir = dir;
  m.artifacts = files;
  m.write(dir / "manifest.json");
  return 0;
}

int cmd_verify(std::uint64_t seed) {
  const auto t0 = Clock::now();
  bool all = true;
  for (const auto& r : run_oracle_suite(seed)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    all = all && r.passed;
  }
  std::cout << (all ? "all checks passed" : "verification FAILED") << " in "
            << std::chrono::duration<double>(Clock::now() - t0).count() << " s\n";
  return all ? 0 : static_cast<int>(ExitCode::kVerifyFailed);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RAIL imitation-learning toolkit"};
  app.require_subcommand(1);
  Manifest manifest;
  for (int i = 0; i < argc; ++i) manifest.args.emplace_back(argv[i]);

  GenDataOpts gen;
  auto* c_gen = app.add_subcommand("gen-data", "Generate a tiered demonstration set");
  c_gen->add_option("--env", gen.env, "Environment id")->required();
  c_gen->add_option("--tier", gen.tiers, "Tier name, or comma-separated tiers to mix")->required();
  c_gen->add_option("--episodes", gen.episodes, "Episodes per tier");
  c_gen->add_option("--seed", gen.seed, "Generator seed");
  c_gen->add_option("--out", gen.out, "Output demo file")->required();
  c_gen->add_option("--ref-steps", gen.ref_steps, "Reference policy budget (medium_replay_like uses 20%)");

  RefOpts ref;
  auto* c_ref = app.add_subcommand("ref-returns", "Compute expert/random reference returns");
  c_ref->add_option("--env", ref.env, "Environment id")->required();
  c_ref->add_option("--episodes", ref.episodes, "Episodes per policy");
  c_ref->add_option("--seed", ref.seed, "Seed");
  c_ref->add_option("--out", ref.out, "Output file")->required();

  TrainOpts train;
  auto* c_train = app.add_subcommand("train-offline", "Run the offline phase");
  c_train->add_option("--config", train.config, "key=value config file");
  c_train->add_option("--set", train.sets, "Override a config key (key=value), repeatable");
  c_train->add_option("--out", train.out, "Artifacts directory");
  c_train->add_flag("--force", train.force, "Overwrite a non-empty output directory");

  OnlineOpts onl;
  auto* c_onl = app.add_subcommand("run-online", "Online inference with shift-triggered adaptation");
  c_onl->add_option("--artifacts", onl.artifacts, "Artifacts directory from train-offline")->required();
  c_onl->add_option("--sigma", onl.sigma, "Observation noise std");
  c_onl->add_option("--episodes", onl.episodes, "Episodes");
  c_onl->add_option("--adapt", onl.adapt, "on | off | always");
  c_onl->add_option("--seed", onl.seed, "Seed");
  c_onl->add_option("--kappa-threshold", onl.kappa_threshold, "Shift threshold");
  c_onl->add_option("--consecutive", onl.consecutive, "Consecutive shifted steps required");
  c_onl->add_option("--out", onl.out, "Output directory");
  c_onl->add_flag("--force", onl.force, "Overwrite a non-empty output directory");

  EvalOpts ev;
  auto* c_ev = app.add_subcommand("evaluate", "Noise sweep over sigma values");
  c_ev->add_option("--artifacts", ev.artifacts, "Artifacts directory")->required();
  c_ev->add_option("--sweep", ev.sweep, "Comma-separated sigma values");
  c_ev->add_option("--runs", ev.runs, "Seeds per sigma");
  c_ev->add_option("--episodes", ev.episodes, "Episodes per run");
  c_ev->add_option("--adapt", ev.adapt, "on | off | always");
  c_ev->add_option("--seed", ev.seed, "First seed");
  c_ev->add_option("--kappa-threshold", ev.kappa_threshold, "Shift threshold (adaptive modes)");
  c_ev->add_option("--jobs", ev.jobs, "Worker threads");
  c_ev->add_option("--out", ev.out, "Output directory");
  c_ev->add_flag("--force", ev.force, "Overwrite a non-empty output directory");

  GridOpts grid;
  auto* c_grid = app.add_subcommand("grid-kth", "Grid search over the shift threshold");
  c_grid->add_option("--artifacts", grid.artifacts, "Artifacts directory")->required();
  c_grid->add_option("--sigma", grid.sigma, "Observation noise std");
  c_grid->add_option("--runs", grid.runs, "Seeds per candidate");
  c_grid->add_option("--episodes", grid.episodes, "Episodes per run");
  c_grid->add_option("--seed", grid.seed, "First seed");
  c_grid->add_option("--jobs", grid.jobs, "Worker threads");
  c_grid->add_option("--out", grid.out, "Output directory");
  c_grid->add_flag("--force", grid.force, "Overwrite a non-empty output directory");

  AblationOpts abl;
  auto* c_abl = app.add_subcommand("tier-ablation", "Train and sweep each supplementary tier mix");
  c_abl->add_option("--config", abl.config, "Base offline config");
  c_abl->add_option("--set", abl.sets, "Override a config key, repeatable");
  c_abl->add_option("--expert", abl.expert, "Expert demo file")->required();
  c_abl->add_option("--tier-data", abl.tier_data, "One single-tier demo file per tier, repeatable")->required();
  c_abl->add_option("--episodes-per-tier", abl.episodes_per_tier, "Supplementary episodes taken from each tier");
  c_abl->add_option("--sweep", abl.sweep, "Comma-separated sigma values");
  c_abl->add_option("--runs", abl.runs, "Seeds per mix");
  c_abl->add_option("--episodes", abl.episodes, "Evaluation episodes per run");
  c_abl->add_option("--seed", abl.seed, "First seed");
  c_abl->add_option("--jobs", abl.jobs, "Worker threads");
  c_abl->add_option("--out", abl.out, "Output directory");
  c_abl->add_flag("--force", abl.force, "Overwrite a non-empty output directory");

  std::uint64_t verify_seed = 0;
  auto* c_verify = app.add_subcommand("verify", "Run the numeric oracle suite");
  c_verify->add_option("--seed", verify_seed, "Seed for the synthetic instances");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*c_gen) manifest.subcommand = "gen-data";
    if (*c_ref) manifest.subcommand = "ref-returns";
    if (*c_train) manifest.subcommand = "train-offline";
    if (*c_onl) manifest.subcommand = "run-online";
    if (*c_ev) manifest.subcommand = "evaluate";
    if (*c_grid) manifest.subcommand = "grid-kth";
    if (*c_abl) manifest.subcommand = "tier-ablation";
    if (*c_gen) return cmd_gen_data(gen, manifest);
    if (*c_ref) return cmd_ref_returns(ref, manifest);
    if (*c_train) return cmd_train_offline(train, manifest);
    if (*c_onl) return cmd_run_online(onl, manifest);
    if (*c_ev) return cmd_evaluate(ev, manifest);
    if (*c_grid) return cmd_grid_kth(grid, manifest);
    if (*c_abl) return cmd_tier_ablation(abl, manifest);
    if (*c_verify) return cmd_verify(verify_seed);
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumericAbort);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  }
  return static_cast<int>(ExitCode::kUsage);
}
