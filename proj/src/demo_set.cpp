#include "rail/demo_set.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rail/binary_io.hpp"
#include "rail/errors.hpp"

namespace rail {
namespace {

const std::vector<std::pair<Tier, std::string>>& tier_names() {
  static const std::vector<std::pair<Tier, std::string>> names{
      {Tier::kExpert, "expert"},
      {Tier::kMedium, "medium"},
      {Tier::kMediumReplayLike, "medium_replay_like"},
      {Tier::kRandom, "random"},
  };
  return names;
}

std::int32_t read_i32(std::istream& is) {
  std::int32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (is.gcount() != static_cast<std::streamsize>(sizeof(v))) {
    throw LoadError(LoadError::Kind::kTruncated, "demo file truncated inside a row");
  }
  return io::to_little_endian(v);
}

}  // namespace

std::string to_string(Tier tier) {
  for (const auto& [t, name] : tier_names()) {
    if (t == tier) return name;
  }
  return "?";
}

Tier tier_from_string(const std::string& name) {
  std::string valid;
  for (const auto& [t, n] : tier_names()) {
    if (n == name) return t;
    valid += (valid.empty() ? "" : ", ") + n;
  }
  throw ConfigError("unknown tier '" + name + "' (valid: " + valid + ")");
}

int DemoHeader::episodes() const {
  int total = 0;
  for (const auto& tc : tiers) total += tc.episodes;
  return total;
}

Tier DemoHeader::tier_of_episode(int episode_id) const {
  int start = 0;
  for (const auto& tc : tiers) {
    if (episode_id < start + tc.episodes) return tc.tier;
    start += tc.episodes;
  }
  throw DataError("episode " + std::to_string(episode_id) + " outside the declared tier ranges");
}

std::vector<std::vector<double>> DemoSet::states() const {
  std::vector<std::vector<double>> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.state);
  return out;
}

std::pair<DemoSet, DemoSet> DemoSet::split_held_out(double fraction) const {
  // Per tier, episodes at or beyond `cut` are held out.
  std::map<int, bool> held;  // episode -> held out
  int start = 0;
  for (const auto& tc : header.tiers) {
    int n_held = static_cast<int>(std::floor(fraction * tc.episodes));
    if (n_held == 0 && tc.episodes >= 2 && fraction > 0.0) n_held = 1;
    for (int e = 0; e < tc.episodes; ++e) held[start + e] = e >= tc.episodes - n_held;
    start += tc.episodes;
  }
  DemoSet train, test;
  train.header = header;
  test.header = header;
  for (const auto& s : samples) (held[s.episode_id] ? test : train).samples.push_back(s);
  return {std::move(train), std::move(test)};
}

void save_demoset(const DemoSet& set, std::ostream& os) {
  const auto& h = set.header;
  os << "RAILDEMO env_id=" << h.env_id << " state_dim=" << h.state_dim << " action_dim=" << h.action_dim
     << " tiers=";
  for (std::size_t i = 0; i < h.tiers.size(); ++i) {
    os << (i ? "," : "") << to_string(h.tiers[i].tier) << ":" << h.tiers[i].episodes;
  }
  os << " episodes=" << h.episodes() << " samples=" << set.samples.size() << " seed=" << h.seed << "\n";
  for (const auto& s : set.samples) {
    io::write_i32(os, s.episode_id);
    io::write_i32(os, s.step_index);
    io::write_i32(os, static_cast<std::int32_t>(s.state.size()));
    io::write_i32(os, static_cast<std::int32_t>(s.action.size()));
    io::write_f64s(os, s.state);
    io::write_f64s(os, s.action);
  }
}

void save_demoset(const DemoSet& set, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw LoadError(LoadError::Kind::kIo, "cannot open '" + path.string() + "' for writing");
  save_demoset(set, os);
  if (!os) throw LoadError(LoadError::Kind::kIo, "write failed for '" + path.string() + "'");
}

DemoSet load_demoset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw LoadError(LoadError::Kind::kMalformedHeader, "empty demo file");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "RAILDEMO") throw LoadError(LoadError::Kind::kMalformedHeader, "missing RAILDEMO magic");
  std::map<std::string, std::string> kv;
  for (std::string tok; header >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw LoadError(LoadError::Kind::kMalformedHeader, "bad header token '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  for (const char* key : {"env_id", "state_dim", "action_dim", "tiers", "episodes", "samples", "seed"}) {
    if (!kv.contains(key)) throw LoadError(LoadError::Kind::kMalformedHeader, std::string("header lacks '") + key + "'");
  }

  DemoSet set;
  std::size_t declared_samples = 0;
  int declared_episodes = 0;
  try {
    set.header.env_id = kv["env_id"];
    set.header.state_dim = std::stoi(kv["state_dim"]);
    set.header.action_dim = std::stoi(kv["action_dim"]);
    set.header.seed = std::stoull(kv["seed"]);
    declared_samples = std::stoull(kv["samples"]);
    declared_episodes = std::stoi(kv["episodes"]);
    std::istringstream tiers(kv["tiers"]);
    for (std::string item; std::getline(tiers, item, ',');) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw LoadError(LoadError::Kind::kMalformedHeader, "bad tier entry '" + item + "'");
      set.header.tiers.push_back(TierCount{tier_from_string(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
    }
  } catch (const LoadError&) {
    throw;
  } catch (const std::exception& e) {
    throw LoadError(LoadError::Kind::kMalformedHeader, std::string("malformed demo header: ") + e.what());
  }
  if (set.header.state_dim <= 0 || set.header.action_dim <= 0) {
    throw LoadError(LoadError::Kind::kMalformedHeader, "header dimensions must be positive");
  }
  if (declared_episodes != set.header.episodes()) {
    throw LoadError(LoadError::Kind::kMalformedHeader, "episode count disagrees with tier mix");
  }

  const auto sd = static_cast<std::size_t>(set.header.state_dim);
  const auto ad = static_cast<std::size_t>(set.header.action_dim);
  const std::size_t row_bytes = 4 * sizeof(std::int32_t) + (sd + ad) * sizeof(double);
  const auto payload_start = is.tellg();
  is.seekg(0, std::ios::end);
  const auto payload_end = is.tellg();
  is.seekg(payload_start);
  const auto available = static_cast<std::size_t>(payload_end - payload_start);
  const std::size_t expected = declared_samples * row_bytes;
  if (available < expected) {
    throw LoadError(LoadError::Kind::kTruncated, "demo file truncated: missing " +
                                                     std::to_string(expected - available) + " bytes");
  }
  if (available > expected) {
    throw LoadError(LoadError::Kind::kDimension, std::to_string(available - expected) +
                                                     " trailing bytes after the declared " +
                                                     std::to_string(declared_samples) + " rows");
  }

  set.samples.reserve(declared_samples);
  for (std::size_t row = 0; row < declared_samples; ++row) {
    DemoSample s;
    s.episode_id = read_i32(is);
    s.step_index = read_i32(is);
    const auto row_sd = read_i32(is);
    const auto row_ad = read_i32(is);
    if (row_sd != set.header.state_dim || row_ad != set.header.action_dim) {
      throw LoadError(LoadError::Kind::kDimension,
                      "row " + std::to_string(row) + " has dims " + std::to_string(row_sd) + "/" +
                          std::to_string(row_ad) + ", header declares " + std::to_string(sd) + "/" +
                          std::to_string(ad));
    }
    s.state.resize(sd);
    s.action.resize(ad);
    const std::string what = "demo file row " + std::to_string(row);
    io::read_f64s(is, s.state, what);
    io::read_f64s(is, s.action, what);
    if (s.episode_id < 0 || s.episode_id >= declared_episodes) {
      throw LoadError(LoadError::Kind::kMalformedHeader,
                      "row " + std::to_string(row) + " episode id outside the declared range");
    }
    s.tier = set.header.tier_of_episode(s.episode_id);
    set.samples.push_back(std::move(s));
  }
  return set;
}

DemoSet load_demoset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError(LoadError::Kind::kIo, "cannot open '" + path.string() + "'");
  return load_demoset(is);
}

}  // namespace rail
