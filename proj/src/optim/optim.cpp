#include "stcgan/optim.hpp"

#include <cmath>

namespace stcgan {

void AdamConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("adam eps must be > 0");
}

template <typename T>
Adam<T>::Adam(NamedTensors<T> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  for (const auto& [name, p] : params_) {
    m_.emplace_back(name, Tensor<T>::zeros(p.shape()));
    v_.emplace_back(name, Tensor<T>::zeros(p.shape()));
  }
}

template <typename T>
void Adam<T>::step() {
  for (const auto& [name, p] : params_) {
    if (!p.has_grad()) continue;
    for (T g : p.grad()) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NumericError("non-finite gradient for '" + name + "'");
      }
    }
  }
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor<T> p = params_[k].second;
    auto theta = p.mutable_data();
    auto m = m_[k].second.mutable_data();
    auto v = v_[k].second.mutable_data();
    const bool has = p.has_grad();
    const auto grad = has ? p.grad() : std::span<const T>{};
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = has ? static_cast<double>(grad[i]) : 0.0;
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      theta[i] = static_cast<T>(theta[i] - cfg_.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() const {
  for (const auto& [name, p] : params_) p.clear_grad();
}

template <typename T>
typename Adam<T>::Snapshot Adam<T>::snapshot() const {
  Snapshot s;
  s.t = t_;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    s.m.emplace_back(m_[k].second.data().begin(), m_[k].second.data().end());
    s.v.emplace_back(v_[k].second.data().begin(), v_[k].second.data().end());
  }
  return s;
}

template <typename T>
void Adam<T>::restore(const Snapshot& s) {
  t_ = s.t;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    std::copy(s.m[k].begin(), s.m[k].end(), m_[k].second.mutable_data().begin());
    std::copy(s.v[k].begin(), s.v[k].end(), v_[k].second.mutable_data().begin());
  }
}

template <typename T>
TrainState<T> make_train_state(const NetConfig& cfg, Variant variant, std::uint64_t seed,
                               const AdamConfig& adam, const LossWeights& weights) {
  weights.validate();
  TrainState<T> s;
  s.models = build_topology<T>(cfg, variant, seed);
  s.opt_g = Adam<T>(s.models.generator_parameters(), adam);
  s.opt_d = Adam<T>(s.models.discriminator_parameters(), adam);
  s.weights = weights;
  return s;
}

namespace {

template <typename T>
class Rollback {
 public:
  explicit Rollback(TrainState<T>& s)
      : state_(s), g_(s.opt_g.snapshot()), d_(s.opt_d.snapshot()), step_(s.step) {
    for (const auto& [name, t] : s.models.state()) {
      values_.emplace_back(t.data().begin(), t.data().end());
    }
  }

  void restore() {
    auto tensors = state_.models.state();
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      std::copy(values_[k].begin(), values_[k].end(), tensors[k].second.mutable_data().begin());
    }
    state_.opt_g.restore(g_);
    state_.opt_d.restore(d_);
    state_.opt_g.zero_grad();
    state_.opt_d.zero_grad();
    state_.step = step_;
  }

 private:
  TrainState<T>& state_;
  std::vector<std::vector<T>> values_;
  typename Adam<T>::Snapshot g_, d_;
  std::uint64_t step_;
};

template <typename T>
class FreezeScope {
 public:
  explicit FreezeScope(const NamedTensors<T>& params) : params_(params) {
    for (auto& [name, p] : params_) p.set_requires_grad(false);
  }
  ~FreezeScope() {
    for (auto& [name, p] : params_) p.set_requires_grad(true);
  }
  FreezeScope(const FreezeScope&) = delete;
  FreezeScope& operator=(const FreezeScope&) = delete;

 private:
  NamedTensors<T> params_;
};

}  // namespace

template <typename T>
LossBreakdown alternating_update(TrainState<T>& state, const Batch<T>& batch) {
  Rollback<T> rollback(state);
  try {
    ModelSet<T>& models = state.models;
    state.opt_g.zero_grad();
    state.opt_d.zero_grad();

    Tape<T> gen_tape;
    Generated<T> out;
    {
      TapeScope<T> scope(gen_tape);
      out = models.generate(batch.shadow, Mode::Train);
    }

    LossBreakdown parts;
    {
      Tape<T> d_tape;
      TapeScope<T> scope(d_tape);
      const Tensor<T> d_total = discriminator_objective(models, batch, out, parts, Mode::Train);
      d_tape.backward(d_total);
    }
    state.opt_d.step();

    {
      FreezeScope<T> frozen(state.opt_d.params());
      TapeScope<T> scope(gen_tape);
      const auto objective =
          generator_objective(models, batch, out, state.weights, Mode::Train);
      gen_tape.backward(objective.total);
      const double d1 = parts.d1_loss, d2 = parts.d2_loss;
      parts = objective.parts;
      parts.d1_loss = d1;
      parts.d2_loss = d2;
    }
    state.opt_g.step();
    state.opt_d.zero_grad();
    state.opt_g.zero_grad();
    ++state.step;
    return parts;
  } catch (...) {
    rollback.restore();
    throw;
  }
}

template <typename T>
Checkpoint make_checkpoint(const TrainState<T>& state) {
  Checkpoint ckpt;
  append_records(ckpt, state.models.state());
  for (const Adam<T>* opt : {&state.opt_g, &state.opt_d}) {
    append_records(ckpt, opt->first_moments(), ".adam.m");
    append_records(ckpt, opt->second_moments(), ".adam.v");
  }
  ckpt.step = state.step;
  return ckpt;
}

template <typename T>
void restore_checkpoint(TrainState<T>& state, const Checkpoint& ckpt) {
  restore_records(ckpt, state.models.state());
  for (Adam<T>* opt : {&state.opt_g, &state.opt_d}) {
    restore_records(ckpt, opt->first_moments(), ".adam.m");
    restore_records(ckpt, opt->second_moments(), ".adam.v");
    opt->set_steps(ckpt.step);
  }
  state.step = ckpt.step;
}

template class Adam<float>;
template class Adam<double>;

#define STCGAN_INSTANTIATE(T)                                                               \
  template TrainState<T> make_train_state(const NetConfig&, Variant, std::uint64_t,        \
                                          const AdamConfig&, const LossWeights&);          \
  template LossBreakdown alternating_update(TrainState<T>&, const Batch<T>&);              \
  template Checkpoint make_checkpoint(const TrainState<T>&);                               \
  template void restore_checkpoint(TrainState<T>&, const Checkpoint&);

STCGAN_INSTANTIATE(float)
STCGAN_INSTANTIATE(double)

#undef STCGAN_INSTANTIATE

}  // namespace stcgan
