#include <cmath>

#include "doctest.h"
#include "rail/envs.hpp"
#include "rail/errors.hpp"
#include "support.hpp"

using namespace rail;
using test_support::for_all;

namespace {

ActionFn expert_of(const EnvSpec& spec) {
  return [spec](std::span<const double> obs) { return scripted_expert(spec, obs); };
}

}  // namespace

TEST_CASE("env specs") {
  const auto pm = make_env_spec("pointmass2d");
  CHECK(pm.state_dim == 4);
  CHECK(pm.action_dim == 2);
  CHECK(pm.horizon == 200);
  CHECK(pm.bounds == ActionBounds{{-1, -1}, {1, 1}});
  const auto pd = make_env_spec("pendulum1");
  CHECK(pd.state_dim == 3);
  CHECK(pd.action_dim == 1);
  CHECK(pd.bounds == ActionBounds{{-2}, {2}});
  CHECK_THROWS_AS(make_env_spec("hopper"), ConfigError);
}

TEST_CASE("reset is deterministic per seed and uniform") {
  const auto pm = make_env_spec("pointmass2d");
  RngStream a(5, "reset"), b(5, "reset");
  CHECK(reset(pm, a) == reset(pm, b));
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = reset(pm, a);
    CHECK(std::abs(s[0]) <= 1.0);
    CHECK(std::abs(s[1]) <= 1.0);
    CHECK(s[2] == 0.0);
    CHECK(s[3] == 0.0);
    mx += s[0];
    my += s[1];
  }
  CHECK(std::abs(mx / 1000) < 0.1);
  CHECK(std::abs(my / 1000) < 0.1);

  const auto pd = make_env_spec("pendulum1");
  for (int i = 0; i < 100; ++i) {
    const auto s = reset(pd, a);
    CHECK(s[0] * s[0] + s[1] * s[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::abs(s[2]) <= 1.0);
  }
}

TEST_CASE("pointmass step examples") {
  const auto pm = make_env_spec("pointmass2d");
  const std::vector<double> at_goal{pointmass::kGoalX, pointmass::kGoalY, 0.0, 0.0};
  const auto r = step(pm, at_goal, std::vector<double>{0.0, 0.0});
  CHECK(r.done);
  CHECK(r.reward >= -0.05);
  const std::vector<double> rest{-0.3, 0.5, 0.0, 0.0};
  const auto r2 = step(pm, rest, std::vector<double>{0.0, 0.0});
  CHECK(r2.next_state == rest);
  CHECK_FALSE(r2.done);
  CHECK(r2.reward == doctest::Approx(-std::hypot(-0.3 - 0.8, 0.5 - 0.8)));
  CHECK_THROWS_AS(step(pm, std::vector<double>{NAN, 0, 0, 0}, std::vector<double>{0.0, 0.0}), NumericError);
}

TEST_CASE("pendulum upright equilibrium") {
  const auto pd = make_env_spec("pendulum1");
  const std::vector<double> up{1.0, 0.0, 0.0};
  const auto r = step(pd, up, std::vector<double>{0.0});
  for (int i = 0; i < 3; ++i) CHECK(std::abs(r.next_state[i] - up[i]) < 1e-6);
  CHECK(r.reward == 0.0);
}

TEST_CASE("property: dynamics are deterministic and bounded") {
  for (const char* id : {"pointmass2d", "pendulum1"}) {
    const auto spec = make_env_spec(id);
    for_all(7, 100, id, [&](RngStream& rng, int) {
      const auto s = reset(spec, rng);
      std::vector<double> a(spec.action_dim);
      for (auto& x : a) x = rng.uniform(-3.0, 3.0);
      const auto r1 = step(spec, s, a), r2 = step(spec, s, a);
      CHECK(r1.next_state == r2.next_state);
      CHECK(r1.reward == r2.reward);
      if (spec.id == EnvId::kPendulum1) CHECK(std::abs(r1.next_state[2]) <= pendulum::kMaxSpeed);
    });
  }
}

TEST_CASE("observation noise") {
  const std::vector<double> s{0.1, -0.2, 0.3, 0.0};
  RngStream rng(8, "noise");
  CHECK(NoiseWrapper(0.0).observe(s, rng) == s);
  const NoiseWrapper w(0.1);
  double sum[4] = {}, sq[4] = {};
  for (int i = 0; i < 10000; ++i) {
    const auto o = w.observe(s, rng);
    for (int k = 0; k < 4; ++k) {
      sum[k] += o[k] - s[k];
      sq[k] += (o[k] - s[k]) * (o[k] - s[k]);
    }
  }
  for (int k = 0; k < 4; ++k) {
    const double mean = sum[k] / 10000;
    const double sd = std::sqrt((sq[k] - 10000 * mean * mean) / 9999);
    CHECK(sd >= 0.095);
    CHECK(sd <= 0.105);
  }
  const NoiseWrapper w2(0.2);
  CHECK(w2.observe(s, rng) != w2.observe(s, rng));
}

TEST_CASE("noise never changes the true trajectory") {
  const auto pm = make_env_spec("pointmass2d");
  // Open-loop action sequence so that only the observation channel differs.
  std::vector<std::vector<double>> actions;
  RngStream arng(9, "actions");
  for (int t = 0; t < 200; ++t) actions.push_back({arng.uniform(-1, 1), arng.uniform(-1, 1)});
  auto rollout = [&](double sigma) {
    int t = 0;
    RngStream reset_rng(10, "reset"), noise_rng(11, "noise");
    return run_episode(pm, [&](std::span<const double>) { return actions[t++]; }, reset_rng, NoiseWrapper(sigma),
                       noise_rng);
  };
  const auto clean = rollout(0.0), noisy = rollout(0.2);
  REQUIRE(clean.transitions.size() == noisy.transitions.size());
  for (std::size_t i = 0; i < clean.transitions.size(); ++i) {
    CHECK(clean.transitions[i].true_state == noisy.transitions[i].true_state);
    CHECK(clean.transitions[i].observed_state == clean.transitions[i].true_state);
  }
  CHECK(noisy.transitions[3].observed_state != noisy.transitions[3].true_state);
  CHECK(clean.total_return == noisy.total_return);
}

TEST_CASE("pointmass expert reaches the goal") {
  const auto pm = make_env_spec("pointmass2d");
  CHECK(scripted_expert(pm, std::vector<double>{pointmass::kGoalX, pointmass::kGoalY, 0.0, 0.0}) ==
        std::vector<double>{0.0, 0.0});
  RngStream reset_rng(12, "reset"), noise_rng(13, "noise");
  int reached = 0;
  for (int i = 0; i < 500; ++i) {
    const auto ep = run_episode(pm, expert_of(pm), reset_rng, NoiseWrapper(0.0), noise_rng);
    reached += ep.terminated_early;
    double sum = 0.0;
    for (const auto& t : ep.transitions) sum += t.reward;
    CHECK(ep.total_return == doctest::Approx(sum).epsilon(1e-12));
    CHECK(ep.total_return <= 0.0);
    CHECK(ep.total_return >= -pm.horizon * std::sqrt(8.0));
    CHECK(static_cast<int>(ep.transitions.size()) <= pm.horizon);
  }
  CHECK(reached >= 495);
}

TEST_CASE("random pointmass actions stay inside the return bound") {
  const auto pm = make_env_spec("pointmass2d");
  RngStream reset_rng(14, "reset"), noise_rng(15, "noise"), act_rng(16, "act");
  for (int i = 0; i < 50; ++i) {
    const auto ep = run_episode(pm, [&](std::span<const double>) {
      return std::vector<double>{act_rng.uniform(-5, 5), act_rng.uniform(-5, 5)};
    }, reset_rng, NoiseWrapper(0.0), noise_rng);
    CHECK(ep.total_return >= -pm.horizon * std::sqrt(8.0));
    for (const auto& t : ep.transitions) {
      CHECK(std::abs(t.action[0]) <= 1.0);
      CHECK(std::abs(t.action[1]) <= 1.0);
    }
  }
}

TEST_CASE("pendulum expert swings up") {
  const auto pd = make_env_spec("pendulum1");
  RngStream reset_rng(17, "reset"), noise_rng(18, "noise");
  double total = 0.0;
  for (int i = 0; i < 100; ++i) total += run_episode(pd, expert_of(pd), reset_rng, NoiseWrapper(0.0), noise_rng).total_return;
  CHECK(total / 100 > -200.0);
}
