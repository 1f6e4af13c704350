#include <cstdio>
#include <memory>
#include <random>
#include <sstream>

#include "stcgan/gradcheck.hpp"
#include "stcgan/harness.hpp"
#include "stcgan/rng.hpp"

namespace stcgan {

namespace {

// Values are rounded through float so that the 32-bit case and its 64-bit
// replica start from identical numbers.
template <typename T>
Tensor<T> uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(static_cast<float>(dist(rng)));
  return Tensor<T>(std::move(shape), std::move(v));
}

// Projection weights with alternating signs; they keep the scalarized loss O(1).
template <typename T>
Tensor<T> signed_weights(const Shape& shape, std::mt19937_64& rng) {
  auto r = uniform<T>(shape, rng, 0.5, 1.5);
  auto d = r.mutable_data();
  for (std::size_t i = 0; i < d.size(); i += 2) d[i] = -d[i];
  return r;
}

// 2x in the forward pass, 3x in the backward pass.
template <typename T>
Tensor<T> faulty_double(const Tensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (T& v : out) v *= T(2);
  Tensor<T> result(x.shape(), std::move(out));
  if (needs_record<T>({&x})) {
    result.set_requires_grad(true);
    Tape<T>::active()->record("faulty_double", {x}, result, [x, result]() {
      auto dx = x.grad_buffer();
      auto dy = result.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += T(3) * dy[i];
    });
  }
  return result;
}

template <typename T>
struct Case {
  std::function<Tensor<T>()> loss;
  NamedTensors<T> leaves;
  std::shared_ptr<ModelSet<T>> models;  // keeps network cases alive
};

const std::vector<std::string>& case_names() {
  static const std::vector<std::string> names = {
      "conv2d", "conv_transpose2d", "batch_norm(train)", "batch_norm(eval)", "relu",
      "leaky_relu", "tanh", "sigmoid", "concat_channels+slice_channels", "affine+add+mul+sum",
      "mean", "bce_loss", "l1_loss", "bce(sigmoid(conv2d))", "faulty_double (injected)",
      "objective(generators)", "objective(discriminators)"};
  return names;
}

template <typename T>
Case<T> build_case(const std::string& name, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, fnv1a64(name)));
  auto leaf = [&](Shape s, double lo = -1.0, double hi = 1.0) {
    auto t = uniform<T>(std::move(s), rng, lo, hi);
    t.set_requires_grad(true);
    return t;
  };
  Case<T> c;
  if (name == "conv2d") {
    auto x = leaf({2, 3, 6, 6}), w = leaf({4, 3, 4, 4}), b = leaf({4});
    auto r = signed_weights<T>({2, 4, 3, 3}, rng);
    c.loss = [=] { return sum(mul(conv2d(x, w, b, 2, 1), r)); };
    c.leaves = {{"x", x}, {"weight", w}, {"bias", b}};
  } else if (name == "conv_transpose2d") {
    auto x = leaf({2, 3, 3, 3}), w = leaf({3, 2, 4, 4}), b = leaf({2});
    auto r = signed_weights<T>({2, 2, 6, 6}, rng);
    c.loss = [=] { return sum(mul(conv_transpose2d(x, w, b, 2, 1), r)); };
    c.leaves = {{"x", x}, {"weight", w}, {"bias", b}};
  } else if (name == "batch_norm(train)" || name == "batch_norm(eval)") {
    const Mode mode = name == "batch_norm(train)" ? Mode::Train : Mode::Eval;
    auto x = leaf({2, 3, 3, 3}), g = leaf({3}), b = leaf({3});
    auto stats = RunningStats<T>::init(3);
    auto r = signed_weights<T>({2, 3, 3, 3}, rng);
    c.loss = [=]() mutable { return sum(mul(batch_norm(x, g, b, stats, mode), r)); };
    c.leaves = {{"x", x}, {"gamma", g}, {"beta", b}};
  } else if (name == "relu" || name == "leaky_relu" || name == "tanh" || name == "sigmoid") {
    Activation kind = Activation::Relu;
    for (Activation a :
         {Activation::Relu, Activation::LeakyRelu, Activation::Tanh, Activation::Sigmoid}) {
      if (activation_name(a) == name) kind = a;
    }
    // Inputs stay at least 0.1 away from the kink of relu / leaky_relu.
    auto x = uniform<T>({2, 2, 3, 3}, rng, 0.1, 1.0);
    auto d = x.mutable_data();
    for (std::size_t i = 0; i < d.size(); i += 2) d[i] = -d[i];
    x.set_requires_grad(true);
    auto r = signed_weights<T>({2, 2, 3, 3}, rng);
    c.loss = [=] { return sum(mul(activation(x, kind), r)); };
    c.leaves = {{"x", x}};
  } else if (name == "concat_channels+slice_channels") {
    auto a = leaf({1, 2, 3, 3}), b = leaf({1, 1, 3, 3});
    auto r = signed_weights<T>({1, 2, 3, 3}, rng);
    c.loss = [=] { return sum(mul(slice_channels(concat_channels(a, b), 1, 2), r)); };
    c.leaves = {{"a", a}, {"b", b}};
  } else if (name == "affine+add+mul+sum") {
    auto a = leaf({3, 4}), b = leaf({3, 4});
    c.loss = [=] { return sum(affine(add(mul(a, b), a), 0.5, 0.0)); };
    c.leaves = {{"a", a}, {"b", b}};
  } else if (name == "mean") {
    auto a = leaf({2, 5});
    c.loss = [=] { return mean(mul(a, a)); };
    c.leaves = {{"a", a}};
  } else if (name == "bce_loss") {
    auto p = leaf({2, 1, 3, 3}, 0.05, 0.95);
    auto t = uniform<T>({2, 1, 3, 3}, rng, 0.0, 1.0);
    c.loss = [=] { return bce_loss(p, t); };
    c.leaves = {{"pred", p}};
  } else if (name == "l1_loss") {
    // Targets sit at least 0.1 away from the prediction, clear of the kink.
    auto p = leaf({2, 3, 3, 3});
    auto t = uniform<T>({2, 3, 3, 3}, rng, 0.1, 1.0);
    auto pd = p.data();
    auto td = t.mutable_data();
    for (std::size_t i = 0; i < td.size(); ++i) td[i] = pd[i] + (i % 2 ? td[i] : -td[i]);
    c.loss = [=] { return l1_loss(p, t); };
    c.leaves = {{"pred", p}};
  } else if (name == "bce(sigmoid(conv2d))") {
    auto x = leaf({1, 1, 4, 4}), w = uniform<T>({1, 1, 3, 3}, rng);
    auto t = uniform<T>({1, 1, 2, 2}, rng, 0.0, 1.0);
    c.loss = [=] { return bce_loss(sigmoid(conv2d(x, w, Tensor<T>{}, 1, 0)), t); };
    c.leaves = {{"x", x}};
  } else if (name == "faulty_double (injected)") {
    auto x = leaf({2, 3});
    c.loss = [=] { return sum(faulty_double(x)); };
    c.leaves = {{"x", x}};
  } else {
    // Full objective on a small stacked model.
    const NetConfig cfg{16, 4, 4};
    c.models = std::make_shared<ModelSet<T>>(build_topology<T>(cfg, Variant::Full, seed));
    for (auto& [n, t] : c.models->state()) {
      for (T& v : t.mutable_data()) v = static_cast<T>(static_cast<float>(v));
    }
    Batch<T> batch;
    batch.shadow = uniform<T>({2, 3, 16, 16}, rng);
    batch.shadow_free = uniform<T>({2, 3, 16, 16}, rng);
    batch.mask = uniform<T>({2, 1, 16, 16}, rng);
    for (T& v : batch.mask.mutable_data()) v = v >= T(0) ? T(1) : T(-1);
    const bool generators = name == "objective(generators)";
    auto& models = *c.models;
    // The other team stays frozen for the lifetime of the case.
    for (auto& [n, p] : generators ? models.discriminator_parameters()
                                   : models.generator_parameters()) {
      p.set_requires_grad(false);
    }
    ModelSet<T>* m = c.models.get();
    if (generators) {
      c.loss = [m, batch] {
        const auto out = m->generate(batch.shadow, Mode::Train);
        return generator_objective(*m, batch, out, LossWeights{}, Mode::Train).total;
      };
      c.leaves = models.generator_parameters();
    } else {
      c.loss = [m, batch] {
        const auto out = m->generate(batch.shadow, Mode::Train);
        LossBreakdown parts;
        return discriminator_objective(*m, batch, out, parts, Mode::Train);
      };
      c.leaves = models.discriminator_parameters();
    }
  }
  return c;
}

std::vector<GradCheckRow> run_suite(const GradCheckSuiteOptions& o) {
  const double tol = o.f64 ? 1e-6 : 1e-3;
  std::vector<GradCheckRow> rows;
  for (const auto& name : case_names()) {
    if (name == "faulty_double (injected)" && !o.inject_fault) continue;
    GradCheckOptions opt;
    opt.eps = o.f64 ? 1e-6 : 1e-3;
    opt.seed = o.seed;
    if (name.rfind("objective", 0) == 0) {
      // 64-bit central differences of the network settle at 1e-5; at 1e-6
      // the loss roundoff already shows.
      if (o.f64) opt.eps = 1e-5;
      opt.max_samples_per_leaf = o.objective_samples;
    }

    GradCheckResult r;
    if (o.f64) {
      auto c = build_case<double>(name, o.seed);
      r = grad_check<double>(c.loss, c.leaves, opt);
    } else {
      auto c = build_case<float>(name, o.seed);
      auto replica = build_case<double>(name, o.seed);
      r = grad_check(c.loss, c.leaves, GradCheckReference{replica.loss, replica.leaves}, opt);
    }
    GradCheckRow row;
    row.name = name;
    row.max_rel_error = r.max_rel_error;
    row.tolerance = tol;
    row.worst = r.worst_leaf + "[" + std::to_string(r.worst_index) + "]";
    row.probes = r.probes;
    row.kinked = r.kinked;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

std::vector<GradCheckRow> gradcheck_suite(const GradCheckSuiteOptions& options) {
  return run_suite(options);
}

std::string format_gradcheck(const std::vector<GradCheckRow>& rows) {
  std::ostringstream os;
  for (const auto& r : rows) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-32s %.3e  (tol %.0e)  %s  worst %-22s %zu probes",
                  r.name.c_str(), r.max_rel_error, r.tolerance, r.pass() ? "ok  " : "FAIL",
                  r.worst.c_str(), r.probes);
    os << buf;
    if (r.kinked > 0) os << ", " << r.kinked << " skipped at kinks";
    os << "\n";
  }
  return os.str();
}

}  // namespace stcgan
