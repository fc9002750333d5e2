#ifndef PVSN_GRADCHECK_HPP
#define PVSN_GRADCHECK_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pvsn/tensor.hpp"

namespace pvsn {

/// Central-difference gradient of a scalar function, one coordinate at a time.
/// `at` is perturbed in place and restored; `fn` must read it afresh each call.
Tensor<double> finite_diff_grad(const std::function<double(const Tensor<double>&)>& fn,
                                Tensor<double> at, double h = 1e-6);

/// ||a - b|| / max(||a||, ||b||, 1e-12) in the Euclidean norm.
double relative_error(std::span<const double> a, std::span<const double> b);

struct GradCheckResult {
  std::string op;
  double max_relative_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_relative_error < tolerance; }
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  double step = 1e-6;
  double op_tolerance = 1e-5;
  double network_tolerance = 1e-3;
  /// Scales the analytic gradient of the named check by 1.01; a negative control.
  std::optional<std::string> perturb;
};

/// The self-test suite: every differentiable operator plus the composed
/// siamese loss on the reduced architecture, all at 64-bit.
std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& options);

}  // namespace pvsn

#endif  // PVSN_GRADCHECK_HPP
