#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "stcgan/losses.hpp"

using namespace stcgan;

namespace {

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

Tensor<double> signs(Shape shape, std::mt19937_64& rng) {
  auto t = random_tensor<double>(std::move(shape), rng);
  for (double& v : t.mutable_data()) v = v >= 0 ? 1.0 : -1.0;
  return t;
}

Tensor<double> values(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>({n}, std::move(v));
}

// Last layer all zero: every patch reads sigmoid(0) = 0.5.
void make_constant_half(Discriminator<double>& d) {
  for (auto& [name, p] : d.parameters("")) {
    if (name.rfind("conv4.", 0) == 0) std::fill(p.mutable_data().begin(), p.mutable_data().end(), 0.0);
  }
}

// Positive weights only, so an input whose only non-zero channel is the mask
// (+1 real, -1 fake) saturates the sigmoid at 1 or 0. Used in eval mode, where
// BN with fresh statistics is the identity up to 1/sqrt(1 + 1e-5).
void make_mask_sign_detector(Discriminator<double>& d) {
  for (auto& [name, p] : d.parameters("")) {
    auto v = p.mutable_data();
    if (name.find(".weight") != std::string::npos) std::fill(v.begin(), v.end(), 1.0);
    else if (name.find(".gamma") != std::string::npos) std::fill(v.begin(), v.end(), 1.0);
    else std::fill(v.begin(), v.end(), 0.0);
  }
}

bool any_nonzero_grad(const NamedTensors<float>& params) {
  for (const auto& [n, p] : params) {
    if (!p.has_grad()) continue;
    for (float g : p.grad()) {
      if (g != 0.f) return true;
    }
  }
  return false;
}

Batch<float> random_batch(std::size_t n, std::size_t s, std::mt19937_64& rng) {
  Batch<float> b;
  b.shadow = random_tensor<float>({n, 3, s, s}, rng);
  b.shadow_free = random_tensor<float>({n, 3, s, s}, rng);
  b.mask = random_tensor<float>({n, 1, s, s}, rng);
  for (float& v : b.mask.mutable_data()) v = v >= 0 ? 1.f : -1.f;
  return b;
}

}  // namespace

TEST_CASE("bce_loss examples") {
  CHECK(bce_loss(values({0.5}), values({1.0})).item() == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(values({0.9, 0.1}), values({1.0, 0.0})).item() ==
        doctest::Approx(0.10536).epsilon(1e-4));
  CHECK(bce_loss(values({kBceEps, 1 - kBceEps}), values({0.0, 1.0})).item() ==
        doctest::Approx(0.0).epsilon(1e-6));
  // Clamped far outside (0,1) still evaluates at the clamp.
  CHECK(bce_loss(values({-3.0}), values({1.0})).item() == doctest::Approx(-std::log(kBceEps)));
  CHECK_THROWS_AS(bce_loss(values({0.5, 0.5}), values({1.0})), ConfigError);
}

TEST_CASE("l1_loss examples and scalar-loop oracle") {
  CHECK(l1_loss(values({0.0, 2.0}), values({1.0, 1.0})).item() == 1.0);
  CHECK(l1_loss(values({0.3, -2.0}), values({0.3, -2.0})).item() == 0.0);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto a = random_tensor<float>({2, 3, 5, 5}, rng), b = random_tensor<float>({2, 3, 5, 5}, rng);
    double acc = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(double(a.data()[i]) - b.data()[i]);
    CHECK(l1_loss(a, b).item() == doctest::Approx(acc / double(a.numel())).epsilon(1e-6));
    CHECK(data_loss_2(a, b).item() == doctest::Approx(acc / double(a.numel())).epsilon(1e-6));
  }
}

TEST_CASE("bce and l1 are non-negative") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_tensor<double>({16}, rng, 0.0, 1.0), t = random_tensor<double>({16}, rng, 0.0, 1.0);
    CHECK(bce_loss(p, t).item() >= 0.0);
    CHECK(l1_loss(p, t).item() >= 0.0);
  }
}

TEST_CASE("data_loss_1 on the [-1,1] mask scale") {
  std::mt19937_64 rng(1);
  const auto y = signs({1, 1, 8, 8}, rng);
  CHECK(data_loss_1(y, y).item() == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(data_loss_1(affine(y, -1.0, 0.0), y).item() == doctest::Approx(-std::log(kBceEps)));
  CHECK(data_loss_1(Tensor<double>::zeros({1, 1, 8, 8}), y).item() == doctest::Approx(std::log(2.0)));
}

TEST_CASE("adversarial terms at D = 0.5") {
  const NetConfig cfg{16, 2, 4};
  std::mt19937_64 rng(2);
  auto d1 = build_discriminator<double>(cfg, Role::D1);
  auto d2 = build_discriminator<double>(cfg, Role::D2);
  make_constant_half(d1);
  make_constant_half(d2);
  auto x = random_tensor<double>({2, 3, 16, 16}, rng), r = random_tensor<double>({2, 3, 16, 16}, rng);
  auto r_hat = random_tensor<double>({2, 3, 16, 16}, rng);
  auto y = signs({2, 1, 16, 16}, rng), m_hat = random_tensor<double>({2, 1, 16, 16}, rng);
  const double ln2 = std::log(2.0);
  CHECK(d1_loss(d1, x, y, m_hat).item() == doctest::Approx(2 * ln2));
  CHECK(g1_adv(d1, x, m_hat).item() == doctest::Approx(ln2));
  CHECK(d2_loss(d2, x, y, r, m_hat, r_hat).item() == doctest::Approx(2 * ln2));
  CHECK(g_adv_2(d2, x, m_hat, r_hat).item() == doctest::Approx(ln2));
  CHECK_THROWS_AS(d1_loss(d2, x, y, m_hat), ConfigError);
}

TEST_CASE("a perfect discriminator scores near zero") {
  const NetConfig cfg{16, 2, 4};
  auto d1 = build_discriminator<double>(cfg, Role::D1);
  make_mask_sign_detector(d1);
  const auto x = Tensor<double>::zeros({1, 3, 16, 16});
  const auto real = concat_channels(x, Tensor<double>::full({1, 1, 16, 16}, 1.0));
  const auto fake = concat_channels(x, Tensor<double>::full({1, 1, 16, 16}, -1.0));
  const auto p_real = d1.forward(real, Mode::Eval), p_fake = d1.forward(fake, Mode::Eval);
  for (double p : p_real.data()) CHECK(p > 1 - 1e-9);
  for (double p : p_fake.data()) CHECK(p < 1e-9);
  CHECK(discriminator_loss(d1, real, fake, Mode::Eval).item() < 1e-6);
}

TEST_CASE("total_generator_loss") {
  const LossWeights w;
  LossBreakdown p;
  p.data1 = p.data2 = p.adv_g1 = p.adv_g2 = 1.0;
  CHECK(total_generator_loss(p, w) == doctest::Approx(6.2));
  p = LossBreakdown{0.5, 0.2, std::log(2.0), std::log(2.0)};
  CHECK(total_generator_loss(p, w) == doctest::Approx(1.6386).epsilon(1e-4));
  CHECK(total_generator_loss(p, LossWeights{0, 0, 0}) == 0.5);

  // Affine in each part with the declared coefficients.
  const double coeff[] = {1.0, w.lambda1, w.lambda2, w.lambda3};
  for (int k = 0; k < 4; ++k) {
    LossBreakdown up = p, down = p;
    double* fields_up[] = {&up.data1, &up.data2, &up.adv_g1, &up.adv_g2};
    double* fields_down[] = {&down.data1, &down.data2, &down.adv_g1, &down.adv_g2};
    *fields_up[k] += 0.25;
    *fields_down[k] -= 0.25;
    CHECK((total_generator_loss(up, w) - total_generator_loss(down, w)) / 0.5 ==
          doctest::Approx(coeff[k]));
  }

  // Tensor form agrees and skips undefined terms.
  const auto t = total_generator_loss(values({0.5}), values({0.2}), values({std::log(2.0)}),
                                      Tensor<double>(), w);
  CHECK(t.item() == doctest::Approx(0.5 + 1.0 + 0.1 * std::log(2.0)));
  CHECK_THROWS_AS(total_generator_loss(Tensor<double>(), Tensor<double>(), Tensor<double>(),
                                       Tensor<double>(), w),
                  ConfigError);
  CHECK_THROWS_AS((LossWeights{-1, 0, 0}.validate()), ConfigError);
}

TEST_CASE("generator objective parts match the breakdown") {
  std::mt19937_64 rng(4);
  auto m = build_topology<float>(NetConfig{16, 4, 4}, Variant::Full, 1);
  const auto batch = random_batch(2, 16, rng);
  const auto out = m.generate(batch.shadow, Mode::Train);
  const auto obj = generator_objective(m, batch, out, LossWeights{}, Mode::Train);
  CHECK(obj.parts.total_g == doctest::Approx(total_generator_loss(obj.parts, LossWeights{})).epsilon(1e-5));
  CHECK(obj.parts.data1 > 0);
  CHECK(obj.parts.data2 > 0);
  CHECK(obj.parts.adv_g1 > 0);
  CHECK(obj.parts.adv_g2 > 0);
}

TEST_CASE("stacked coupling: G1 learns through G2 and D2 alone") {
  std::mt19937_64 rng(6);
  auto m = build_topology<float>(NetConfig{16, 4, 4}, Variant::Full, 2);
  const auto batch = random_batch(2, 16, rng);
  LossWeights w;
  w.lambda2 = 0.0;
  {
    Tape<float> tape;
    TapeScope<float> scope(tape);
    const auto out = m.generate(batch.shadow, Mode::Train);
    tape.backward(generator_objective(m, batch, out, w, Mode::Train, 0.0).total);
  }
  CHECK(any_nonzero_grad(m.g1->parameters("g1.")));
}

TEST_CASE("discriminator losses leave generators without gradient") {
  std::mt19937_64 rng(7);
  for (Variant v : {Variant::Full, Variant::NoG1D1, Variant::MultiBranch}) {
    auto m = build_topology<float>(NetConfig{16, 4, 4}, v, 3);
    const auto batch = random_batch(2, 16, rng);
    {
      Tape<float> tape;
      TapeScope<float> scope(tape);
      const auto out = m.generate(batch.shadow, Mode::Train);
      LossBreakdown parts;
      tape.backward(discriminator_objective(m, batch, out, parts, Mode::Train));
    }
    CHECK_FALSE(any_nonzero_grad(m.generator_parameters()));
    CHECK(any_nonzero_grad(m.discriminator_parameters()));
  }
}
