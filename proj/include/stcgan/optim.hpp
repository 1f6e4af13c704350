#pragma once

#include <cstdint>
#include <vector>

#include "stcgan/checkpoint.hpp"
#include "stcgan/losses.hpp"

namespace stcgan {

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

// Bias-corrected Adam over a fixed list of parameters. Each parameter is
// updated from its own moments only, so the list order does not matter.
template <typename T>
class Adam {
 public:
  struct Snapshot {
    std::vector<std::vector<T>> m, v;
    std::uint64_t t = 0;
  };

  Adam() = default;
  explicit Adam(NamedTensors<T> params, AdamConfig cfg = {});

  // One update from the accumulated gradients; a parameter without a gradient
  // buffer is treated as having zero gradient. Non-finite gradients raise
  // NumericError before anything is modified.
  void step();
  void zero_grad() const;

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  const AdamConfig& config() const { return cfg_; }
  const NamedTensors<T>& params() const { return params_; }
  // Moment tensors named after their parameters.
  const NamedTensors<T>& first_moments() const { return m_; }
  const NamedTensors<T>& second_moments() const { return v_; }

  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  NamedTensors<T> params_;
  NamedTensors<T> m_, v_;
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
};

// Models plus one optimizer per team.
template <typename T>
struct TrainState {
  ModelSet<T> models;
  Adam<T> opt_g;
  Adam<T> opt_d;
  LossWeights weights;
  std::uint64_t step = 0;
};

template <typename T>
TrainState<T> make_train_state(const NetConfig& cfg, Variant variant, std::uint64_t seed,
                               const AdamConfig& adam = {}, const LossWeights& weights = {});

// One discriminator-team step followed by one generator-team step. The
// generator forward pass is taken once; the D-phase sees detached outputs and
// the G-phase runs with discriminator parameters frozen. On any exception all
// parameters, BN statistics and optimizer state are rolled back.
template <typename T>
LossBreakdown alternating_update(TrainState<T>& state, const Batch<T>& batch);

template <typename T>
Checkpoint make_checkpoint(const TrainState<T>& state);
// Restores models, optimizer moments and the step counter.
template <typename T>
void restore_checkpoint(TrainState<T>& state, const Checkpoint& ckpt);

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace stcgan
