#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "doctest.h"
#include "stcgan/data.hpp"
#include "stcgan/optim.hpp"

using namespace stcgan;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

void set_grad(const Tensor<double>& p, const std::vector<double>& g) {
  auto buf = p.grad_buffer();
  std::copy(g.begin(), g.end(), buf.begin());
}

template <typename T>
std::vector<std::vector<T>> values_of(const NamedTensors<T>& tensors) {
  std::vector<std::vector<T>> out;
  for (const auto& [n, t] : tensors) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

Batch<float> synthetic_batch(std::size_t n, std::size_t size, std::uint64_t seed) {
  const auto triplets = synth_triplets(n, size, seed);
  std::vector<const Triplet*> ptrs;
  for (const auto& t : triplets) ptrs.push_back(&t);
  return make_batch<float>(ptrs);
}

TrainState<float> state_with(const NetConfig& cfg, Variant v, AdamConfig g, AdamConfig d,
                             LossWeights w = {}) {
  TrainState<float> s;
  s.models = build_topology<float>(cfg, v, 1);
  s.opt_g = Adam<float>(s.models.generator_parameters(), g);
  s.opt_d = Adam<float>(s.models.discriminator_parameters(), d);
  s.weights = w;
  return s;
}

// Plain bias-corrected Adam recurrence for one scalar.
struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, const AdamConfig& c) {
    ++t;
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    const double mh = m / (1 - std::pow(c.beta1, t)), vh = v / (1 - std::pow(c.beta2, t));
    return theta - c.lr * mh / (std::sqrt(vh) + c.eps);
  }
};

}  // namespace

TEST_CASE("adam first step from theta = 0, g = 1") {
  Tensor<double> p({1}, {0.0}, true);
  Adam<double> opt({{"p", p}});
  set_grad(p, {1.0});
  opt.step();
  CHECK(p.data()[0] == doctest::Approx(-2e-4).epsilon(1e-6));
  CHECK(opt.steps() == 1);
}

TEST_CASE("adam follows the scalar recurrence") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dist(-2, 2);
  AdamConfig cfg;
  cfg.lr = 1e-2;
  auto p = random_tensor<double>({7}, rng);
  p.set_requires_grad(true);
  std::vector<double> theta(p.data().begin(), p.data().end());
  std::vector<ScalarAdam> oracle(7);
  Adam<double> opt({{"p", p}}, cfg);
  for (int step = 0; step < 25; ++step) {
    std::vector<double> g(7);
    for (auto& x : g) x = dist(rng);
    opt.zero_grad();
    set_grad(p, g);
    opt.step();
    for (std::size_t i = 0; i < 7; ++i) theta[i] = oracle[i].step(theta[i], g[i], cfg);
  }
  for (std::size_t i = 0; i < 7; ++i) CHECK(p.data()[i] == doctest::Approx(theta[i]).epsilon(1e-12));
  for (double v : opt.second_moments().front().second.data()) CHECK(v >= 0.0);
}

TEST_CASE("adam edge cases") {
  SUBCASE("zero gradient leaves parameters, counts the step") {
    Tensor<double> p({3}, {1.0, -2.0, 3.0}, true);
    Adam<double> opt({{"p", p}});
    set_grad(p, {0.0, 0.0, 0.0});
    opt.step();
    opt.step();
    CHECK(std::vector<double>(p.data().begin(), p.data().end()) == std::vector<double>{1.0, -2.0, 3.0});
    CHECK(opt.steps() == 2);
  }
  SUBCASE("lr = 0 is the identity") {
    AdamConfig cfg;
    cfg.lr = 0.0;
    Tensor<double> p({2}, {0.5, 0.25}, true);
    Adam<double> opt({{"p", p}}, cfg);
    set_grad(p, {3.0, -1.0});
    opt.step();
    CHECK(p.data()[0] == 0.5);
    CHECK(p.data()[1] == 0.25);
  }
  SUBCASE("non-finite gradient aborts before any change") {
    Tensor<double> a({2}, {1.0, 2.0}, true), b({1}, {3.0}, true);
    Adam<double> opt({{"a", a}, {"b", b}});
    set_grad(a, {0.5, 0.5});
    set_grad(b, {std::numeric_limits<double>::quiet_NaN()});
    CHECK_THROWS_AS(opt.step(), NumericError);
    CHECK(a.data()[0] == 1.0);
    CHECK(a.data()[1] == 2.0);
    CHECK(b.data()[0] == 3.0);
    CHECK(opt.steps() == 0);
    for (double m : opt.first_moments().front().second.data()) CHECK(m == 0.0);
  }
  SUBCASE("parameter order does not matter") {
    std::mt19937_64 rng(2);
    auto a1 = random_tensor<double>({4}, rng), b1 = random_tensor<double>({3}, rng);
    auto a2 = a1.clone(), b2 = b1.clone();
    for (auto* t : {&a1, &b1, &a2, &b2}) t->set_requires_grad(true);
    Adam<double> fwd({{"a", a1}, {"b", b1}}), rev({{"b", b2}, {"a", a2}});
    for (int step = 0; step < 3; ++step) {
      const std::vector<double> ga = {0.1, -0.2, 0.3 * step, 1.0}, gb = {-1.0, 0.5, 2.0};
      fwd.zero_grad();
      rev.zero_grad();
      set_grad(a1, ga);
      set_grad(a2, ga);
      set_grad(b1, gb);
      set_grad(b2, gb);
      fwd.step();
      rev.step();
    }
    CHECK(std::equal(a1.data().begin(), a1.data().end(), a2.data().begin()));
    CHECK(std::equal(b1.data().begin(), b1.data().end(), b2.data().begin()));
  }
  CHECK_THROWS_AS((AdamConfig{2e-4, 1.0, 0.999, 1e-8}.validate()), ConfigError);
  CHECK_THROWS_AS((AdamConfig{-1.0, 0.5, 0.999, 1e-8}.validate()), ConfigError);
}

TEST_CASE("phase isolation for every topology") {
  const NetConfig cfg{16, 4, 4};
  const Batch<float> batch = synthetic_batch(2, 16, 3);
  AdamConfig frozen;
  frozen.lr = 0.0;
  for (Variant v : {Variant::Full, Variant::NoD1, Variant::NoD2, Variant::NoG1D1, Variant::NoG2D2,
                    Variant::MultiBranch}) {
    CAPTURE(variant_name(v));
    {
      // Only the D-phase may move anything: generators stay bit-identical.
      auto s = state_with(cfg, v, frozen, AdamConfig{});
      const auto before_g = values_of(s.models.generator_parameters());
      const auto before_d = values_of(s.models.discriminator_parameters());
      alternating_update(s, batch);
      CHECK(values_of(s.models.generator_parameters()) == before_g);
      CHECK(values_of(s.models.discriminator_parameters()) != before_d);
      CHECK(s.step == 1);
    }
    {
      // Only the G-phase may move anything: discriminators stay bit-identical.
      auto s = state_with(cfg, v, AdamConfig{}, frozen);
      const auto before_g = values_of(s.models.generator_parameters());
      const auto before_d = values_of(s.models.discriminator_parameters());
      alternating_update(s, batch);
      CHECK(values_of(s.models.discriminator_parameters()) == before_d);
      CHECK(values_of(s.models.generator_parameters()) != before_g);
    }
  }
}

TEST_CASE("alternating update breakdown") {
  const NetConfig cfg{16, 4, 4};
  const Batch<float> batch = synthetic_batch(2, 16, 4);
  auto s = make_train_state<float>(cfg, Variant::Full, 2);
  const LossBreakdown p = alternating_update(s, batch);
  CHECK(p.d1_loss > 0);
  CHECK(p.d2_loss > 0);
  CHECK(p.total_g == doctest::Approx(total_generator_loss(p, s.weights)).epsilon(1e-5));

  // Without discriminators and with zero adversarial weights the G-phase is
  // purely supervised.
  LossWeights w;
  w.lambda2 = w.lambda3 = 0.0;
  auto sup = make_train_state<float>(cfg, Variant::NoD1, 2, AdamConfig{}, w);
  const LossBreakdown q = alternating_update(sup, batch);
  CHECK(q.total_g == doctest::Approx(q.data1 + w.lambda1 * q.data2).epsilon(1e-5));
}

TEST_CASE("alternating update is reproducible") {
  const NetConfig cfg{16, 4, 4};
  const Batch<float> batch = synthetic_batch(2, 16, 5);
  auto a = make_train_state<float>(cfg, Variant::Full, 9);
  auto b = make_train_state<float>(cfg, Variant::Full, 9);
  for (int i = 0; i < 3; ++i) {
    const auto pa = alternating_update(a, batch), pb = alternating_update(b, batch);
    CHECK(pa.total_g == pb.total_g);
    CHECK(pa.d1_loss == pb.d1_loss);
    CHECK(pa.d2_loss == pb.d2_loss);
  }
  CHECK(values_of(a.models.state()) == values_of(b.models.state()));
}

TEST_CASE("a failed update rolls everything back") {
  const NetConfig cfg{16, 4, 4};
  Batch<float> batch = synthetic_batch(2, 16, 6);
  auto s = make_train_state<float>(cfg, Variant::Full, 3);
  alternating_update(s, batch);  // non-trivial optimizer state first
  const auto before = values_of(s.models.state());
  const auto m_g = values_of(s.opt_g.first_moments()), v_d = values_of(s.opt_d.second_moments());

  // The target only enters the G-phase, so the D-phase has already stepped
  // when the l1 loss turns non-finite.
  batch.shadow_free = batch.shadow_free.clone();
  batch.shadow_free.mutable_data()[0] = std::numeric_limits<float>::infinity();
  CHECK_THROWS_AS(alternating_update(s, batch), NumericError);
  CHECK(values_of(s.models.state()) == before);
  CHECK(values_of(s.opt_g.first_moments()) == m_g);
  CHECK(values_of(s.opt_d.second_moments()) == v_d);
  CHECK(s.opt_d.steps() == 1);
  CHECK(s.opt_g.steps() == 1);
  CHECK(s.step == 1);
}

// The frozen batch is the whole 8-triplet, 64x64 overfit set used by the
// acceptance run.
TEST_CASE("supervised terms halve within 200 steps on a frozen batch") {
  const NetConfig cfg{64, 8, 6};
  const Batch<float> batch = synthetic_batch(8, 64, 7);
  auto s = make_train_state<float>(cfg, Variant::Full, 7);
  double first = 0, last = 0;
  for (int i = 0; i < 200; ++i) {
    const auto p = alternating_update(s, batch);
    const double supervised = p.data1 + s.weights.lambda1 * p.data2;
    if (i == 0) first = supervised;
    last = supervised;
  }
  MESSAGE("supervised loss " << first << " -> " << last);
  CHECK(last <= 0.5 * first);
}
