#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stcgan/tensor.hpp"

namespace stcgan {

struct GradCheckOptions {
  double eps = 1e-3;
  // Entries probed per leaf tensor; 0 probes every entry.
  std::size_t max_samples_per_leaf = 0;
  std::uint64_t seed = 0;
  // Times a step that crosses a kink is divided by ten before the probe is
  // skipped.
  std::size_t kink_refinements = 3;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::size_t refined = 0;  // probes that needed a smaller step
  std::size_t kinked = 0;   // probes skipped because every step crossed a kink
  std::string worst_leaf;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares tape gradients of a scalar loss against central finite
// differences. The error of a probed entry is |analytic - numeric| divided by
// max(largest |gradient| of its leaf over analytic and numeric, 1e-8); the
// result carries the maximum over all probes.
//
// Steps that move any relu, leaky relu, l1 or bce clamp input across its kink
// are shrunk (see KinkMonitor); such probes do not measure a derivative.
//
// `loss` must rebuild the computation from the current leaf values on every
// call. Leaf values are perturbed in place and restored.
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& loss,
                           std::vector<std::pair<std::string, Tensor<T>>> leaves,
                           const GradCheckOptions& options = {});

// A 64-bit replica of a 32-bit check. `leaves` mirror the 32-bit leaves in
// order and shape, and `loss` must compute the same function from them.
struct GradCheckReference {
  std::function<Tensor<double>()> loss;
  std::vector<std::pair<std::string, Tensor<double>>> leaves;
};

// Checks the 32-bit tape gradient against central differences of the 64-bit
// replica. The replica's leaves are first set to the 32-bit values, and every
// probe perturbs them by the same float-representable steps as the plain
// form. Rounding of a 32-bit loss puts a floor of roughly n * 6e-8 / eps on
// the error of a mean over n elements; the replica removes that floor.
GradCheckResult grad_check(const std::function<Tensor<float>()>& loss,
                           std::vector<std::pair<std::string, Tensor<float>>> leaves,
                           GradCheckReference reference, const GradCheckOptions& options = {});

// Single-input form: f(x) must return a scalar.
template <typename T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T> x, double eps);

extern template GradCheckResult grad_check<float>(
    const std::function<Tensor<float>()>&, std::vector<std::pair<std::string, Tensor<float>>>,
    const GradCheckOptions&);
extern template GradCheckResult grad_check<double>(
    const std::function<Tensor<double>()>&, std::vector<std::pair<std::string, Tensor<double>>>,
    const GradCheckOptions&);

}  // namespace stcgan
