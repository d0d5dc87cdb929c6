#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rail {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Central differences of f around x with step h.
std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::span<const double> x, double h = 1e-5);
// ||a - b|| / max(||a||, ||b||, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-12);

// Self-contained numeric checks on synthetic data; each returns one result.
CheckResult check_biased_boundary(std::uint64_t seed, int triples = 100);
CheckResult check_monotone_interpolation(std::uint64_t seed);
CheckResult check_joint_normalization(std::uint64_t seed);
// One result per loss family; `instances` seeded problems each.
std::vector<CheckResult> check_loss_gradients(std::uint64_t seed, int instances = 20);
CheckResult check_mlp_gradients(std::uint64_t seed, int instances = 20);
CheckResult check_lambda_schedule();
CheckResult check_bc_weights();
CheckResult check_normalized_score();
CheckResult check_em_monotone(std::uint64_t seed);
CheckResult check_closed_form_optimum();

// The full suite run by `rail verify`.
std::vector<CheckResult> run_oracle_suite(std::uint64_t seed = 0);

}  // namespace rail
