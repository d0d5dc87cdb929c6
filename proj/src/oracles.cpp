#include "rail/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "rail/demo_set.hpp"
#include "rail/density.hpp"
#include "rail/discriminator.hpp"
#include "rail/evaluation.hpp"
#include "rail/mlp.hpp"
#include "rail/policy.hpp"
#include "rail/rng.hpp"

namespace rail {
namespace {

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<double> random_vec(RngStream& rng, int n, double sd = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, sd);
  return v;
}

struct Pool {
  std::vector<std::vector<double>> states, actions;
  std::vector<double> values;
};

Pool random_pool(RngStream& rng, int n, int sd, int ad, double vlo, double vhi) {
  Pool p;
  for (int i = 0; i < n; ++i) {
    p.states.push_back(random_vec(rng, sd));
    p.actions.push_back(random_vec(rng, ad));
    p.values.push_back(rng.uniform(vlo, vhi));
  }
  return p;
}

std::vector<DiscSample> disc_batch(const Pool& p) {
  std::vector<DiscSample> out;
  for (std::size_t i = 0; i < p.states.size(); ++i) out.push_back(DiscSample{p.states[i], p.actions[i], p.values[i]});
  return out;
}

// Small weights keep outputs away from the clip; nonzero biases keep
// pre-activations off the ReLU kink (zero biases put dead-input units at 0).
DiscriminatorModel small_disc(RngStream& rng, int sd, int ad) {
  DiscriminatorModel d(sd, ad, {6, 5}, rng);
  for (auto& w : d.net().params()) w *= 0.5;
  for (int l = 0; l < d.net().num_layers(); ++l) {
    for (auto& b : d.net().biases(l)) b = rng.uniform(0.05, 0.3) * (rng.index(2) ? 1.0 : -1.0);
  }
  return d;
}

CheckResult disc_grad_check(const std::string& name, std::uint64_t seed, int instances,
                            const std::function<DiscLoss(const DiscriminatorModel&, RngStream&, Pool&, Pool&)>& loss) {
  double worst = 0.0;
  int checked = 0;
  for (int k = 0; k < instances; ++k) {
    RngStream rng(seed, name + "-" + std::to_string(k));
    const int sd = 2 + static_cast<int>(rng.index(3));
    const int ad = 1 + static_cast<int>(rng.index(2));
    auto disc = small_disc(rng, sd, ad);
    Pool a = random_pool(rng, 5, sd, ad, 0.1, 2.0);
    Pool b = random_pool(rng, 6, sd, ad, 0.1, 2.0);
    const auto analytic = loss(disc, rng, a, b).grad;
    auto probe = disc;
    const auto fd = numeric_gradient(
        [&](std::span<const double> p) {
          std::copy(p.begin(), p.end(), probe.net().params().begin());
          return loss(probe, rng, a, b).loss;
        },
        disc.net().params());
    worst = std::max(worst, relative_error(analytic, fd));
    ++checked;
  }
  return CheckResult{"gradient: " + name, worst < 1e-4,
                     fmt("max relative error %.3g over %.0f instances", worst, checked)};
}

}  // namespace

std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h) {
  std::vector<double> p(x.begin(), x.end());
  std::vector<double> g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p[i];
    p[i] = orig + h;
    const double up = f(p);
    p[i] = orig - h;
    const double down = f(p);
    p[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  f(p);
  return g;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

CheckResult check_biased_boundary(std::uint64_t seed, int triples) {
  RngStream rng(seed, "oracle-biased-boundary");
  double worst0 = 0.0, worst_inf = 0.0;
  for (int i = 0; i < triples; ++i) {
    const double pe = std::exp(rng.uniform(-3.0, 3.0));
    const double ps = std::exp(rng.uniform(-3.0, 3.0));
    const double beta = std::exp(rng.uniform(-2.0, 5.0));
    const double closed = pe / (pe + beta * ps);
    const double eta = pe / (pe + ps);
    worst0 = std::max(worst0, std::abs(pointwise_optimum(pe, ps, 1.0, beta, 0.0, 1.0) - closed));
    worst_inf = std::max(worst_inf, std::abs(pointwise_optimum(pe, ps, 1.0, beta, 1e8, 1.0) - eta));
  }
  return CheckResult{"biased boundary (lambda=0 closed form, lambda=1e8 -> posterior)",
                     worst0 < 1e-9 && worst_inf < 1e-4,
                     fmt("max |d-closed| %.3g (tol 1e-9), max |d-eta| %.3g (tol 1e-4)", worst0, worst_inf)};
}

CheckResult check_monotone_interpolation(std::uint64_t seed) {
  RngStream rng(seed, "oracle-monotone");
  const double lambdas[] = {0.0, 1.0, 10.0, 100.0, 1e4};
  int violations = 0, cases = 0;
  for (double beta : {2.0, 9.0, 100.0}) {
    for (int k = 0; k < 20; ++k) {
      const double pe = std::exp(rng.uniform(-2.0, 2.0));
      const double ps = std::exp(rng.uniform(-2.0, 2.0));
      const double biased = pe / (pe + beta * ps);
      const double eta = pe / (pe + ps);
      double prev = -1.0;
      for (double lam : lambdas) {
        const double d = pointwise_optimum(pe, ps, 1.0, beta, lam, 1.0);
        ++cases;
        if (d < prev) ++violations;
        if (lam > 0.0 && !(d > biased && d < eta)) ++violations;
        prev = d;
      }
    }
  }
  return CheckResult{"monotone interpolation between biased optimum and posterior", violations == 0,
                     fmt("%.0f violations in %.0f cases", violations, cases)};
}

CheckResult check_joint_normalization(std::uint64_t seed) {
  RngStream rng(seed, "oracle-normalization");
  // Bimodal 1-D states, actions linear in state plus noise.
  DemoSet demos;
  demos.header.env_id = "synthetic1d";
  demos.header.state_dim = 1;
  demos.header.action_dim = 1;
  demos.header.tiers = {TierCount{Tier::kExpert, 1}};
  for (int i = 0; i < 600; ++i) {
    const double s = (i % 2 == 0 ? -1.0 : 1.5) + rng.normal(0.0, 0.4);
    const double a = 0.7 * s + rng.normal(0.0, 0.3);
    demos.samples.push_back(DemoSample{{s}, {a}, 0, i, Tier::kExpert});
  }
  PolicyTrainConfig pc;
  pc.hidden = {16};
  pc.steps = 1500;
  pc.batch_size = 32;
  pc.learning_rate = 3e-3;
  auto policy = std::make_shared<GaussianPolicy>(train_reference_policy(demos, pc, seed));
  policy->set_label("expert");
  GmmFitOptions go;
  go.components = 3;
  auto gmm = std::make_shared<GmmModel>(fit_gmm(demos.states(), go, seed));
  gmm->label = "expert";
  const JointDensityModel joint(policy, gmm);

  double s_lo = 1e300, s_hi = -1e300;
  for (const auto& c : gmm->components) {
    const double sd = std::sqrt(c.variance[0]);
    s_lo = std::min(s_lo, c.mean[0] - 6.0 * sd);
    s_hi = std::max(s_hi, c.mean[0] + 6.0 * sd);
  }
  const double a_sd = std::exp(policy->log_std()[0]);
  const int ns = 1200, na = 400;
  const double hs = (s_hi - s_lo) / ns;
  double total = 0.0;
  for (int i = 0; i <= ns; ++i) {
    const double s = s_lo + i * hs;
    const double mu = policy->mean(std::vector<double>{s})[0];
    const double a_lo = mu - 6.0 * a_sd, ha = 12.0 * a_sd / na;
    double inner = 0.0;
    for (int j = 0; j <= na; ++j) {
      const double a = a_lo + j * ha;
      const double w = (j == 0 || j == na) ? 0.5 : 1.0;
      inner += w * std::exp(joint.log_density(std::vector<double>{s}, std::vector<double>{a}));
    }
    total += ((i == 0 || i == ns) ? 0.5 : 1.0) * inner * ha;
  }
  total *= hs;
  return CheckResult{"joint density integrates to one", std::abs(total - 1.0) <= 2e-2,
                     fmt("integral %.6f (tol 1 +- 2e-2)", total)};
}

std::vector<CheckResult> check_loss_gradients(std::uint64_t seed, int instances) {
  std::vector<CheckResult> out;
  // Weighted BC: mean network and log-std jointly.
  {
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
      RngStream rng(seed, "grad-bc-" + std::to_string(k));
      const int sd = 2 + static_cast<int>(rng.index(3));
      const int ad = 1 + static_cast<int>(rng.index(2));
      const double inf = INFINITY;
      GaussianPolicy pol(sd, ad, {5, 4}, ActionBounds{std::vector<double>(ad, -inf), std::vector<double>(ad, inf)}, rng,
                         rng.uniform(-1.0, 0.5));
      Pool p = random_pool(rng, 7, sd, ad, 0.0, 3.0);
      std::vector<WeightedSample> batch;
      for (int i = 0; i < 7; ++i) batch.push_back(WeightedSample{p.states[i], p.actions[i], p.values[i]});
      const auto res = weighted_bc_loss(pol, batch);
      std::vector<double> flat(pol.mean_net().params().begin(), pol.mean_net().params().end());
      flat.insert(flat.end(), pol.log_std().begin(), pol.log_std().end());
      std::vector<double> analytic = res.grad.mean_net;
      analytic.insert(analytic.end(), res.grad.log_std.begin(), res.grad.log_std.end());
      auto probe = pol;
      const std::size_t nm = pol.mean_net().num_params();
      const auto fd = numeric_gradient(
          [&](std::span<const double> x) {
            std::copy(x.begin(), x.begin() + nm, probe.mean_net().params().begin());
            std::copy(x.begin() + nm, x.end(), probe.log_std().begin());
            return weighted_bc_loss(probe, batch).loss;
          },
          flat);
      worst = std::max(worst, relative_error(analytic, fd));
    }
    out.push_back(CheckResult{"gradient: weighted BC", worst < 1e-4, fmt("max relative error %.3g over %.0f instances", worst, instances)});
  }
  out.push_back(disc_grad_check(
      "offline discriminator loss", seed, instances,
      [](const DiscriminatorModel& d, RngStream&, Pool& e, Pool& s) {
        return offline_disc_loss(d, disc_batch(e), disc_batch(s));
      }));
  out.push_back(disc_grad_check(
      "posterior regularizer", seed, instances,
      [](const DiscriminatorModel& d, RngStream&, Pool& e, Pool&) {
        auto m = disc_batch(e);
        for (auto& x : m) x.value = std::fmod(x.value, 1.0);
        return reg_loss(d, m);
      }));
  out.push_back(disc_grad_check(
      "combined offline loss", seed, instances,
      [](const DiscriminatorModel& d, RngStream&, Pool& e, Pool& s) {
        auto m = disc_batch(s);
        for (auto& x : m) x.value = std::fmod(x.value, 1.0);
        return combined_offline_loss(d, disc_batch(e), disc_batch(s), m, 0.7);
      }));
  out.push_back(disc_grad_check(
      "online discriminator loss", seed, instances,
      [](const DiscriminatorModel& d, RngStream&, Pool& e, Pool& s) {
        auto x = disc_batch(s);
        for (auto& v : x) v.value = std::fmod(v.value, 1.0);
        return online_disc_loss(d, disc_batch(e), x);
      }));
  return out;
}

CheckResult check_mlp_gradients(std::uint64_t seed, int instances) {
  double worst = 0.0;
  for (int k = 0; k < instances; ++k) {
    RngStream rng(seed, "grad-mlp-" + std::to_string(k));
    const Activation act = static_cast<Activation>(rng.index(3));
    auto net = MlpNetwork::initialized({3, 5, 4, 2}, act, rng);
    const auto x = random_vec(rng, 3);
    const auto up = random_vec(rng, 2);
    const auto g = backward(net, x, up);
    auto probe = net;
    const auto fd = numeric_gradient(
        [&](std::span<const double> p) {
          std::copy(p.begin(), p.end(), probe.params().begin());
          const auto y = probe.forward(x);
          return y[0] * up[0] + y[1] * up[1];
        },
        net.params());
    const auto fdx = numeric_gradient(
        [&](std::span<const double> xi) {
          const auto y = net.forward(xi);
          return y[0] * up[0] + y[1] * up[1];
        },
        x);
    worst = std::max({worst, relative_error(g.params, fd), relative_error(g.input, fdx)});
  }
  return CheckResult{"gradient: mlp backprop", worst < 1e-4, fmt("max relative error %.3g over %.0f instances", worst, instances)};
}

CheckResult check_lambda_schedule() {
  struct Case {
    long long t;
    double expected;
  };
  const Case cases[] = {{1, 1.0}, {10000, 1.0}, {10001, 1.0 / (1.0 + std::log(2.0))}, {100000, 1.0 / (1.0 + std::log(90001.0))}};
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, std::abs(lambda_schedule(c.t) - c.expected));
  return CheckResult{"lambda schedule", worst <= 1e-9,
                     fmt("lambda(10001) = %.4f, lambda(100000) = %.6f, max error %.3g", lambda_schedule(10001),
                         lambda_schedule(100000), worst)};
}

CheckResult check_bc_weights() {
  const double w05 = bc_weight_from_output(0.5), w99 = bc_weight_from_output(0.99), w01 = bc_weight_from_output(0.01);
  const bool exact = w05 == 1.0 && std::abs(w99 - 99.0) < 1e-9 && std::abs(w01 - 1.0 / 99.0) < 1e-12;
  bool bounded = true;
  for (double d = -0.5; d <= 1.5; d += 0.001) {
    const double w = bc_weight_from_output(d);
    bounded = bounded && w >= 1.0 / 99.0 - 1e-12 && w <= 99.0 + 1e-9;
  }
  return CheckResult{"bc weight values and bounds", exact && bounded,
                     fmt("w(0.5)=%.6g w(0.99)=%.6g w(0.01)=%.6g", w05, w99, w01)};
}

CheckResult check_normalized_score() {
  const ScoreNormalizer n(-15.0, -250.0);
  const double lo = n(-250.0), hi = n(-15.0), mid = n(-132.5);
  return CheckResult{"normalized score endpoints", lo == 0.0 && hi == 100.0 && std::abs(mid - 50.0) < 1e-12,
                     fmt("random -> %.17g, expert -> %.17g, midway -> %.17g", lo, hi, mid)};
}

CheckResult check_em_monotone(std::uint64_t seed) {
  RngStream rng(seed, "oracle-em");
  std::vector<std::vector<double>> states;
  for (int i = 0; i < 800; ++i) {
    const int c = static_cast<int>(rng.index(3));
    states.push_back({c * 2.0 + rng.normal(0.0, 0.5), -c + rng.normal(0.0, 0.3)});
  }
  GmmFitOptions go;
  go.components = 4;
  GmmFitReport rep;
  fit_gmm(states, go, seed, &rep);
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < rep.log_likelihood_trace.size(); ++i) {
    worst_drop = std::max(worst_drop, rep.log_likelihood_trace[i - 1] - rep.log_likelihood_trace[i]);
  }
  return CheckResult{"EM log-likelihood non-decreasing", worst_drop <= 1e-9,
                     fmt("%.0f iterations, largest decrease %.3g", rep.iterations, worst_drop)};
}

CheckResult check_closed_form_optimum() {
  const double d = pointwise_optimum(1.0, 1.0, 1.0, 9.0, 0.0, 1.0);
  return CheckResult{"beta=9, lambda=0 optimum", std::abs(d - 0.1) <= 1e-9, fmt("d = %.10f (expected 0.1)", d)};
}

std::vector<CheckResult> run_oracle_suite(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(check_mlp_gradients(seed));
  for (auto& r : check_loss_gradients(seed)) out.push_back(std::move(r));
  out.push_back(check_em_monotone(seed));
  out.push_back(check_joint_normalization(seed));
  out.push_back(check_closed_form_optimum());
  out.push_back(check_biased_boundary(seed));
  out.push_back(check_monotone_interpolation(seed));
  out.push_back(check_lambda_schedule());
  out.push_back(check_bc_weights());
  out.push_back(check_normalized_score());
  return out;
}

}  // namespace rail
