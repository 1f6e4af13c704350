#pragma once

#include "stcgan/nets.hpp"

namespace stcgan {

struct LossWeights {
  double lambda1 = 5.0;  // data2
  double lambda2 = 0.1;  // adversarial term of the detection pair
  double lambda3 = 0.1;  // adversarial term of the removal pair

  void validate() const;
};

// Per-step scalars. Terms absent from a topology stay 0.
struct LossBreakdown {
  double data1 = 0, data2 = 0, adv_g1 = 0, adv_g2 = 0, d1_loss = 0, d2_loss = 0, total_g = 0;
};

// data1 + lambda1*data2 + lambda2*adv_g1 + lambda3*adv_g2.
double total_generator_loss(const LossBreakdown& parts, const LossWeights& w);

// One training batch in model space.
template <typename T>
struct Batch {
  Tensor<T> shadow;       // x, [N,3,S,S] in [-1,1]
  Tensor<T> mask;         // y, [N,1,S,S] in {-1,1}
  Tensor<T> shadow_free;  // r, [N,3,S,S] in [-1,1]
};

// Maps a Tanh mask output (or a {-1,1} mask) onto [0,1].
template <typename T>
Tensor<T> mask_probability(const Tensor<T>& mask);

// BCE between the mask probabilities of the G1 output and of y, both given in [-1,1].
template <typename T>
Tensor<T> data_loss_1(const Tensor<T>& g1_out, const Tensor<T>& y);

// L1 between the reconstruction and the shadow-free target.
template <typename T>
Tensor<T> data_loss_2(const Tensor<T>& g2_out, const Tensor<T>& r);

// BCE(D(real), 1) + BCE(D(fake), 0). `fake` is detached here.
template <typename T>
Tensor<T> discriminator_loss(Discriminator<T>& d, const Tensor<T>& real, const Tensor<T>& fake,
                             Mode mode = Mode::Train);

// Non-saturating generator term BCE(D(fake), 1); gradient reaches every
// generator that produced `fake`.
template <typename T>
Tensor<T> generator_adversarial_loss(Discriminator<T>& d, const Tensor<T>& fake,
                                     Mode mode = Mode::Train);

// Inputs are model space; y is {-1,1}, mask_hat the raw G1 output.
template <typename T>
Tensor<T> d1_loss(Discriminator<T>& d1, const Tensor<T>& x, const Tensor<T>& y,
                  const Tensor<T>& mask_hat);
template <typename T>
Tensor<T> g1_adv(Discriminator<T>& d1, const Tensor<T>& x, const Tensor<T>& mask_hat);
template <typename T>
Tensor<T> d2_loss(Discriminator<T>& d2, const Tensor<T>& x, const Tensor<T>& y,
                  const Tensor<T>& r, const Tensor<T>& mask_hat, const Tensor<T>& r_hat);
template <typename T>
Tensor<T> g_adv_2(Discriminator<T>& d2, const Tensor<T>& x, const Tensor<T>& mask_hat,
                  const Tensor<T>& r_hat);

// Weighted sum of whichever parts are defined.
template <typename T>
Tensor<T> total_generator_loss(const Tensor<T>& data1, const Tensor<T>& data2,
                               const Tensor<T>& adv_g1, const Tensor<T>& adv_g2,
                               const LossWeights& w);

template <typename T>
struct GeneratorObjective {
  Tensor<T> total;
  LossBreakdown parts;
};

// Generator-team objective for the topology in `models`, given outputs
// already produced by models.generate(). data1_weight scales the
// detection data term (1 in training).
template <typename T>
GeneratorObjective<T> generator_objective(ModelSet<T>& models, const Batch<T>& batch,
                                          const Generated<T>& out, const LossWeights& w,
                                          Mode mode, double data1_weight = 1.0);

// Discriminator-team objective d1_loss + d2_loss on detached generator outputs.
template <typename T>
Tensor<T> discriminator_objective(ModelSet<T>& models, const Batch<T>& batch,
                                  const Generated<T>& out, LossBreakdown& parts, Mode mode);

}  // namespace stcgan
