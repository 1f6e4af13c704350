#include "stcgan/losses.hpp"

#include <cmath>

namespace stcgan {

void LossWeights::validate() const {
  for (double v : {lambda1, lambda2, lambda3}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and >= 0");
  }
}

double total_generator_loss(const LossBreakdown& p, const LossWeights& w) {
  return p.data1 + w.lambda1 * p.data2 + w.lambda2 * p.adv_g1 + w.lambda3 * p.adv_g2;
}

template <typename T>
Tensor<T> mask_probability(const Tensor<T>& mask) {
  return affine(mask, 0.5, 0.5);
}

template <typename T>
Tensor<T> data_loss_1(const Tensor<T>& g1_out, const Tensor<T>& y) {
  return bce_loss(mask_probability(g1_out), mask_probability(y.detach()));
}

template <typename T>
Tensor<T> data_loss_2(const Tensor<T>& g2_out, const Tensor<T>& r) {
  return l1_loss(g2_out, r);
}

template <typename T>
Tensor<T> discriminator_loss(Discriminator<T>& d, const Tensor<T>& real, const Tensor<T>& fake,
                             Mode mode) {
  const Tensor<T> p_real = d.forward(real, mode);
  const Tensor<T> p_fake = d.forward(fake.detach(), mode);
  return add(bce_loss(p_real, Tensor<T>::full(p_real.shape(), T(1))),
             bce_loss(p_fake, Tensor<T>::zeros(p_fake.shape())));
}

template <typename T>
Tensor<T> generator_adversarial_loss(Discriminator<T>& d, const Tensor<T>& fake, Mode mode) {
  const Tensor<T> p_fake = d.forward(fake, mode);
  return bce_loss(p_fake, Tensor<T>::full(p_fake.shape(), T(1)));
}

template <typename T>
Tensor<T> d1_loss(Discriminator<T>& d1, const Tensor<T>& x, const Tensor<T>& y,
                  const Tensor<T>& mask_hat) {
  return discriminator_loss(d1, concat_channels(x, y), concat_channels(x, mask_hat.detach()));
}

template <typename T>
Tensor<T> g1_adv(Discriminator<T>& d1, const Tensor<T>& x, const Tensor<T>& mask_hat) {
  return generator_adversarial_loss(d1, concat_channels(x, mask_hat));
}

namespace {

template <typename T>
Tensor<T> join(const Tensor<T>& x, const Tensor<T>& mask, const Tensor<T>& image) {
  return mask.defined() ? concat_channels(concat_channels(x, mask), image)
                        : concat_channels(x, image);
}

}  // namespace

template <typename T>
Tensor<T> d2_loss(Discriminator<T>& d2, const Tensor<T>& x, const Tensor<T>& y,
                  const Tensor<T>& r, const Tensor<T>& mask_hat, const Tensor<T>& r_hat) {
  const Tensor<T> fake_mask = mask_hat.defined() ? mask_hat.detach() : Tensor<T>();
  return discriminator_loss(d2, join(x, mask_hat.defined() ? y : Tensor<T>(), r),
                            join(x, fake_mask, r_hat.detach()));
}

template <typename T>
Tensor<T> g_adv_2(Discriminator<T>& d2, const Tensor<T>& x, const Tensor<T>& mask_hat,
                  const Tensor<T>& r_hat) {
  return generator_adversarial_loss(d2, join(x, mask_hat, r_hat));
}

template <typename T>
Tensor<T> total_generator_loss(const Tensor<T>& data1, const Tensor<T>& data2,
                               const Tensor<T>& adv_g1, const Tensor<T>& adv_g2,
                               const LossWeights& w) {
  Tensor<T> total;
  auto accumulate = [&total](const Tensor<T>& part, double weight) {
    if (!part.defined()) return;
    const Tensor<T> scaled = weight == 1.0 ? part : affine(part, weight, 0.0);
    total = total.defined() ? add(total, scaled) : scaled;
  };
  accumulate(data1, 1.0);
  accumulate(data2, w.lambda1);
  accumulate(adv_g1, w.lambda2);
  accumulate(adv_g2, w.lambda3);
  if (!total.defined()) throw ConfigError("total_generator_loss: no loss terms");
  return total;
}

template <typename T>
GeneratorObjective<T> generator_objective(ModelSet<T>& models, const Batch<T>& batch,
                                          const Generated<T>& out, const LossWeights& w,
                                          Mode mode, double data1_weight) {
  GeneratorObjective<T> result;
  Tensor<T> data1, data2, adv1, adv2;
  if (out.mask.defined()) {
    data1 = data_loss_1(out.mask, batch.mask);
    result.parts.data1 = data1.item();
    if (data1_weight != 1.0) data1 = affine(data1, data1_weight, 0.0);
  }
  if (out.image.defined()) {
    data2 = data_loss_2(out.image, batch.shadow_free);
    result.parts.data2 = data2.item();
  }
  if (models.d1 && out.mask.defined()) {
    adv1 = generator_adversarial_loss(*models.d1, models.d1_input(batch.shadow, out.mask), mode);
    result.parts.adv_g1 = adv1.item();
  }
  if (models.d2 && out.image.defined()) {
    adv2 = generator_adversarial_loss(
        *models.d2, models.d2_input(batch.shadow, out.mask, out.image), mode);
    result.parts.adv_g2 = adv2.item();
  }
  result.total = total_generator_loss(data1, data2, adv1, adv2, w);
  result.parts.total_g = result.total.item();
  return result;
}

template <typename T>
Tensor<T> discriminator_objective(ModelSet<T>& models, const Batch<T>& batch,
                                  const Generated<T>& out, LossBreakdown& parts, Mode mode) {
  Tensor<T> total;
  if (models.d1 && out.mask.defined()) {
    const Tensor<T> l = discriminator_loss(*models.d1, models.d1_input(batch.shadow, batch.mask),
                                           models.d1_input(batch.shadow, out.mask.detach()), mode);
    parts.d1_loss = l.item();
    total = l;
  }
  if (models.d2 && out.image.defined()) {
    const Tensor<T> fake_mask = out.mask.defined() ? out.mask.detach() : Tensor<T>();
    const Tensor<T> real_mask = out.mask.defined() ? batch.mask : Tensor<T>();
    const Tensor<T> l = discriminator_loss(
        *models.d2, models.d2_input(batch.shadow, real_mask, batch.shadow_free),
        models.d2_input(batch.shadow, fake_mask, out.image.detach()), mode);
    parts.d2_loss = l.item();
    total = total.defined() ? add(total, l) : l;
  }
  if (!total.defined()) throw ConfigError("topology has no discriminator");
  return total;
}

#define STCGAN_INSTANTIATE(T)                                                                  \
  template Tensor<T> mask_probability(const Tensor<T>&);                                       \
  template Tensor<T> data_loss_1(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> data_loss_2(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> discriminator_loss(Discriminator<T>&, const Tensor<T>&, const Tensor<T>&, \
                                        Mode);                                                 \
  template Tensor<T> generator_adversarial_loss(Discriminator<T>&, const Tensor<T>&, Mode);    \
  template Tensor<T> d1_loss(Discriminator<T>&, const Tensor<T>&, const Tensor<T>&,            \
                             const Tensor<T>&);                                                \
  template Tensor<T> g1_adv(Discriminator<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> d2_loss(Discriminator<T>&, const Tensor<T>&, const Tensor<T>&,            \
                             const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);            \
  template Tensor<T> g_adv_2(Discriminator<T>&, const Tensor<T>&, const Tensor<T>&,            \
                             const Tensor<T>&);                                                \
  template Tensor<T> total_generator_loss(const Tensor<T>&, const Tensor<T>&,                  \
                                          const Tensor<T>&, const Tensor<T>&,                  \
                                          const LossWeights&);                                 \
  template GeneratorObjective<T> generator_objective(ModelSet<T>&, const Batch<T>&,            \
                                                     const Generated<T>&, const LossWeights&,  \
                                                     Mode, double);                            \
  template Tensor<T> discriminator_objective(ModelSet<T>&, const Batch<T>&,                    \
                                             const Generated<T>&, LossBreakdown&, Mode);

STCGAN_INSTANTIATE(float)
STCGAN_INSTANTIATE(double)

#undef STCGAN_INSTANTIATE

}  // namespace stcgan
