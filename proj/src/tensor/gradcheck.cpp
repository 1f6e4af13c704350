#include "stcgan/gradcheck.hpp"
#include "stcgan/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace stcgan {

namespace {

template <typename T>
double eval_loss(const std::function<Tensor<T>()>& loss) {
  NoGradScope<T> off;
  const Tensor<T> value = loss();
  const double v = value.item();
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return v;
}

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

// Analytic gradients of every leaf, from one recorded pass.
template <typename T>
std::vector<std::vector<double>> analytic_gradients(
    const std::function<Tensor<T>()>& loss,
    std::vector<std::pair<std::string, Tensor<T>>>& leaves) {
  for (auto& [name, leaf] : leaves) {
    if (!leaf.requires_grad()) throw ConfigError("grad_check: leaf '" + name + "' is frozen");
    if (!leaf.all_finite()) throw NumericError("grad_check: leaf '" + name + "' is not finite");
    leaf.zero_grad();
  }
  {
    Tape<T> tape;
    TapeScope<T> scope(tape);
    const Tensor<T> value = loss();
    if (!std::isfinite(static_cast<double>(value.item()))) {
      throw NumericError("grad_check: loss is not finite");
    }
    tape.backward(value);
  }
  std::vector<std::vector<double>> out;
  for (auto& [name, leaf] : leaves) {
    std::vector<double> g(leaf.numel(), 0.0);
    if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), g.begin());
    out.push_back(std::move(g));
  }
  return out;
}

struct Evaluation {
  double loss;
  std::uint64_t signature;
};

template <typename T>
Evaluation evaluate(const std::function<Tensor<T>()>& loss) {
  KinkMonitor monitor;
  const double v = eval_loss(loss);
  return {v, monitor.signature()};
}

// `at(k, i, value)` evaluates the loss with element i of leaf k set to `value`
// and restores it afterwards. A probe whose two evaluations leave the linear
// pieces of the unperturbed point is retried with a ten times smaller step;
// if no step stays inside, the point sits on a kink and the probe is skipped.
template <typename T, typename At>
GradCheckResult compare(const std::vector<std::pair<std::string, Tensor<T>>>& leaves,
                        const std::vector<std::vector<double>>& analytic,
                        const GradCheckOptions& options, std::uint64_t base, At&& at) {
  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const auto& [name, leaf] = leaves[k];
    const auto indices = probe_indices(leaf.numel(), options.max_samples_per_leaf, rng);
    std::vector<std::size_t> kept;
    std::vector<double> numeric;
    const auto values = leaf.data();
    for (const std::size_t i : indices) {
      const T original = values[i];
      double h = options.eps;
      for (std::size_t r = 0; r <= options.kink_refinements; ++r, h /= 10) {
        // Divide by the step actually representable in T, not the nominal one.
        const T up = static_cast<T>(original + h);
        const T down = static_cast<T>(original - h);
        if (up == original || down == original) break;
        const Evaluation plus = at(k, i, up);
        const Evaluation minus = at(k, i, down);
        if (plus.signature == base && minus.signature == base) {
          kept.push_back(i);
          numeric.push_back((plus.loss - minus.loss) /
                            (static_cast<double>(up) - static_cast<double>(down)));
          if (r > 0) ++result.refined;
          break;
        }
      }
      if (kept.empty() || kept.back() != i) ++result.kinked;
    }

    double scale = 1e-8;
    for (std::size_t j = 0; j < kept.size(); ++j) {
      scale = std::max({scale, std::abs(analytic[k][kept[j]]), std::abs(numeric[j])});
    }
    for (std::size_t j = 0; j < kept.size(); ++j) {
      const double a = analytic[k][kept[j]];
      const double err = std::abs(a - numeric[j]) / scale;
      if (result.probes == 0 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_leaf = name;
        result.worst_index = kept[j];
        result.worst_analytic = a;
        result.worst_numeric = numeric[j];
      }
      ++result.probes;
    }
  }
  return result;
}

}  // namespace

template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& loss,
                           std::vector<std::pair<std::string, Tensor<T>>> leaves,
                           const GradCheckOptions& options) {
  const auto analytic = analytic_gradients(loss, leaves);
  const std::uint64_t base = evaluate(loss).signature;
  return compare(leaves, analytic, options, base, [&](std::size_t k, std::size_t i, T value) {
    auto values = leaves[k].second.mutable_data();
    const T original = values[i];
    values[i] = value;
    const Evaluation e = evaluate(loss);
    values[i] = original;
    return e;
  });
}

GradCheckResult grad_check(const std::function<Tensor<float>()>& loss,
                           std::vector<std::pair<std::string, Tensor<float>>> leaves,
                           GradCheckReference reference, const GradCheckOptions& options) {
  if (reference.leaves.size() != leaves.size()) {
    throw ConfigError("grad_check: reference has a different number of leaves");
  }
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    if (reference.leaves[k].second.shape() != leaves[k].second.shape()) {
      throw ConfigError("grad_check: reference leaf '" + reference.leaves[k].first +
                        "' differs in shape");
    }
    const auto src = leaves[k].second.data();
    auto dst = reference.leaves[k].second.mutable_data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  }
  const auto analytic = analytic_gradients(loss, leaves);
  const std::uint64_t base = evaluate(reference.loss).signature;
  return compare(leaves, analytic, options, base, [&](std::size_t k, std::size_t i, float value) {
    auto values = reference.leaves[k].second.mutable_data();
    const double original = values[i];
    values[i] = value;
    const Evaluation e = evaluate(reference.loss);
    values[i] = original;
    return e;
  });
}

template <typename T>
double grad_check(const std::function<Tensor<T>(const Tensor<T>&)>& f, Tensor<T> x, double eps) {
  x.set_requires_grad(true);
  GradCheckOptions options;
  options.eps = eps;
  return grad_check<T>([&]() { return f(x); }, {{"x", x}}, options).max_rel_error;
}

template GradCheckResult grad_check<float>(const std::function<Tensor<float>()>&,
                                           std::vector<std::pair<std::string, Tensor<float>>>,
                                           const GradCheckOptions&);
template GradCheckResult grad_check<double>(const std::function<Tensor<double>()>&,
                                            std::vector<std::pair<std::string, Tensor<double>>>,
                                            const GradCheckOptions&);
template double grad_check<float>(const std::function<Tensor<float>(const Tensor<float>&)>&,
                                  Tensor<float>, double);
template double grad_check<double>(const std::function<Tensor<double>(const Tensor<double>&)>&,
                                   Tensor<double>, double);

}  // namespace stcgan
