#include "stcgan/nets.hpp"

#include <algorithm>
#include <cctype>
#include <random>

#include "stcgan/rng.hpp"

namespace stcgan {

void NetConfig::validate() const {
  if (depth < 2) throw ConfigError("depth must be at least 2, got " + std::to_string(depth));
  if (depth >= 8 * sizeof(std::size_t) || (std::size_t{1} << depth) != image_size) {
    throw ConfigError("image_size must equal 2^depth (size " + std::to_string(image_size) +
                      ", depth " + std::to_string(depth) + ")");
  }
  if (base_width < 1) throw ConfigError("base_width must be at least 1");
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoD1: return "no_d1";
    case Variant::NoD2: return "no_d2";
    case Variant::NoG1D1: return "no_g1d1";
    case Variant::NoG2D2: return "no_g2d2";
    case Variant::MultiBranch: return "multi_branch";
  }
  return "?";
}

Variant parse_variant(const std::string& text) {
  std::string key = text;
  std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) {
    return c == '-' ? '_' : static_cast<char>(std::tolower(c));
  });
  for (Variant v : {Variant::Full, Variant::NoD1, Variant::NoD2, Variant::NoG1D1,
                    Variant::NoG2D2, Variant::MultiBranch}) {
    if (key == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant '" + text +
                    "' (expected full, no_d1, no_d2, no_g1d1, no_g2d2 or multi_branch)");
}

bool has_detection(Variant v) { return v != Variant::NoG1D1; }
bool has_removal(Variant v) { return v != Variant::NoG2D2; }
bool has_d1(Variant v) { return v != Variant::NoD1 && v != Variant::NoG1D1; }
bool has_d2(Variant v) { return v != Variant::NoD2 && v != Variant::NoG2D2; }

std::size_t default_in_channels(Role role) {
  switch (role) {
    case Role::G1: return 3;
    case Role::G2: return 4;
    case Role::D1: return 4;
    case Role::D2: return 7;
  }
  return 0;
}

std::size_t default_out_channels(Role role) {
  switch (role) {
    case Role::G1: return 1;
    case Role::G2: return 3;
    case Role::D1:
    case Role::D2: return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Layer

template <typename T>
Layer<T>::Layer(LayerSpec spec, std::uint64_t seed, double init_std) : spec_(std::move(spec)) {
  const std::size_t k = spec_.kernel;
  Shape wshape = spec_.transposed ? Shape{spec_.in_channels, spec_.out_channels, k, k}
                                  : Shape{spec_.out_channels, spec_.in_channels, k, k};
  std::vector<T> w(shape_numel(wshape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, init_std);
  for (T& v : w) v = static_cast<T>(normal(rng));
  weight_ = Tensor<T>(std::move(wshape), std::move(w), true);
  if (spec_.bias) bias_ = Tensor<T>::zeros({spec_.out_channels}, true);
  if (spec_.batch_norm) {
    gamma_ = Tensor<T>::full({spec_.out_channels}, T(1), true);
    beta_ = Tensor<T>::zeros({spec_.out_channels}, true);
    stats_ = RunningStats<T>::init(spec_.out_channels);
  }
}

template <typename T>
Tensor<T> Layer<T>::forward(const Tensor<T>& input, Mode mode) {
  Tensor<T> h = spec_.before == Activation::None ? input : activation(input, spec_.before);
  h = spec_.transposed ? conv_transpose2d(h, weight_, bias_, spec_.stride, spec_.pad)
                       : conv2d(h, weight_, bias_, spec_.stride, spec_.pad);
  if (spec_.batch_norm) h = batch_norm(h, gamma_, beta_, stats_, mode);
  if (spec_.after != Activation::None) h = activation(h, spec_.after);
  return h;
}

template <typename T>
void Layer<T>::collect_parameters(const std::string& prefix, NamedTensors<T>& out) const {
  out.emplace_back(prefix + "weight", weight_);
  if (bias_.defined()) out.emplace_back(prefix + "bias", bias_);
  if (gamma_.defined()) {
    out.emplace_back(prefix + "gamma", gamma_);
    out.emplace_back(prefix + "beta", beta_);
  }
}

template <typename T>
void Layer<T>::collect_buffers(const std::string& prefix, NamedTensors<T>& out) const {
  if (!spec_.batch_norm) return;
  out.emplace_back(prefix + "running_mean", stats_.mean);
  out.emplace_back(prefix + "running_var", stats_.var);
}

// ---------------------------------------------------------------------------
// U-Net

namespace {

std::size_t encoder_width(const NetConfig& cfg, std::size_t i) {
  return cfg.base_width * (i >= 3 ? 8 : (std::size_t{1} << i));
}

std::string encoder_label(std::size_t i, std::size_t depth) {
  if (i + 1 == depth) return "Cv5";
  return "Cv" + std::to_string(std::min<std::size_t>(i, 4));
}

// Decoder layer j mirrors encoder layer depth-1-j; the innermost one has no skip.
std::string decoder_label(std::size_t j, std::size_t depth) {
  if (j == 0) return "CvT6";
  const std::size_t e = depth - 1 - j;
  return "CvT" + std::to_string(e >= 4 ? 7 : 11 - e);
}

template <typename T>
void collect(const std::vector<Layer<T>>& layers, const std::string& prefix,
             const std::string& stem, NamedTensors<T>& out, bool buffers) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string p = prefix + stem + std::to_string(i) + ".";
    if (buffers) {
      layers[i].collect_buffers(p, out);
    } else {
      layers[i].collect_parameters(p, out);
    }
  }
}

template <typename T>
std::vector<LayerSpec> specs_of(const std::vector<Layer<T>>& layers) {
  std::vector<LayerSpec> out;
  out.reserve(layers.size());
  for (const auto& l : layers) out.push_back(l.spec());
  return out;
}

}  // namespace

template <typename T>
Encoder<T>::Encoder(const NetConfig& cfg, std::size_t in_channels, std::uint64_t seed) {
  cfg.validate();
  std::size_t in = in_channels;
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    LayerSpec s;
    s.name = "enc" + std::to_string(i);
    s.label = encoder_label(i, cfg.depth);
    s.in_channels = in;
    s.out_channels = encoder_width(cfg, i);
    const bool outer = i == 0, inner = i + 1 == cfg.depth;
    s.before = outer ? Activation::None : Activation::LeakyRelu;
    s.batch_norm = !outer && !inner;
    // A bias in front of BN is cancelled by the mean subtraction.
    s.bias = !s.batch_norm;
    layers_.emplace_back(std::move(s), mix_seed(seed, 1, i), kInitStd);
    in = encoder_width(cfg, i);
  }
}

template <typename T>
std::vector<Tensor<T>> Encoder<T>::forward(const Tensor<T>& input, Mode mode) {
  if (input.rank() != 4 || input.dim(1) != in_channels()) {
    throw ConfigError("encoder expects [N, " + std::to_string(in_channels()) +
                      ", S, S] input, got " + shape_str(input.shape()));
  }
  std::vector<Tensor<T>> features;
  features.reserve(layers_.size());
  Tensor<T> h = input;
  for (auto& layer : layers_) {
    h = layer.forward(h, mode);
    features.push_back(h);
  }
  return features;
}

template <typename T>
std::vector<LayerSpec> Encoder<T>::specs() const { return specs_of(layers_); }

template <typename T>
void Encoder<T>::collect_parameters(const std::string& prefix, NamedTensors<T>& out) const {
  collect(layers_, prefix, "enc", out, false);
}

template <typename T>
void Encoder<T>::collect_buffers(const std::string& prefix, NamedTensors<T>& out) const {
  collect(layers_, prefix, "enc", out, true);
}

template <typename T>
Decoder<T>::Decoder(const NetConfig& cfg, std::size_t out_channels, std::uint64_t seed) {
  cfg.validate();
  const std::size_t d = cfg.depth;
  std::size_t prev = encoder_width(cfg, d - 1);
  for (std::size_t j = 0; j < d; ++j) {
    LayerSpec s;
    s.name = "dec" + std::to_string(j);
    s.label = decoder_label(j, d);
    s.transposed = true;
    s.skip_from = j == 0 ? -1 : static_cast<int>(d - 1 - j);
    s.in_channels = j == 0 ? prev : prev + encoder_width(cfg, d - 1 - j);
    const bool last = j + 1 == d;
    s.out_channels = last ? out_channels : encoder_width(cfg, d - 2 - j);
    s.before = Activation::Relu;
    s.batch_norm = !last;
    s.after = last ? Activation::Tanh : Activation::None;
    s.bias = last;
    prev = s.out_channels;
    layers_.emplace_back(std::move(s), mix_seed(seed, 2, j), kInitStd);
  }
}

template <typename T>
Tensor<T> Decoder<T>::forward(const std::vector<Tensor<T>>& features, Mode mode) {
  if (features.size() != layers_.size()) {
    throw ConfigError("decoder expects " + std::to_string(layers_.size()) + " encoder features");
  }
  Tensor<T> h = features.back();
  for (auto& layer : layers_) {
    const int skip = layer.spec().skip_from;
    if (skip >= 0) h = concat_channels(h, features[static_cast<std::size_t>(skip)]);
    h = layer.forward(h, mode);
  }
  return h;
}

template <typename T>
std::vector<LayerSpec> Decoder<T>::specs() const { return specs_of(layers_); }

template <typename T>
void Decoder<T>::collect_parameters(const std::string& prefix, NamedTensors<T>& out) const {
  collect(layers_, prefix, "dec", out, false);
}

template <typename T>
void Decoder<T>::collect_buffers(const std::string& prefix, NamedTensors<T>& out) const {
  collect(layers_, prefix, "dec", out, true);
}

template <typename T>
Generator<T>::Generator(const NetConfig& cfg, std::size_t in_channels, std::size_t out_channels,
                        std::uint64_t seed)
    : cfg_(cfg), encoder_(cfg, in_channels, seed), decoder_(cfg, out_channels, seed) {}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& input, Mode mode) {
  if (input.rank() != 4 || input.dim(2) != cfg_.image_size || input.dim(3) != cfg_.image_size) {
    throw ConfigError("generator expects " + std::to_string(cfg_.image_size) +
                      "x" + std::to_string(cfg_.image_size) + " input, got " +
                      shape_str(input.shape()));
  }
  return decoder_.forward(encoder_.forward(input, mode), mode);
}

template <typename T>
std::vector<LayerSpec> Generator<T>::layers() const {
  auto out = encoder_.specs();
  auto dec = decoder_.specs();
  out.insert(out.end(), dec.begin(), dec.end());
  return out;
}

template <typename T>
NamedTensors<T> Generator<T>::parameters(const std::string& prefix) const {
  NamedTensors<T> out;
  encoder_.collect_parameters(prefix, out);
  decoder_.collect_parameters(prefix, out);
  return out;
}

template <typename T>
NamedTensors<T> Generator<T>::buffers(const std::string& prefix) const {
  NamedTensors<T> out;
  encoder_.collect_buffers(prefix, out);
  decoder_.collect_buffers(prefix, out);
  return out;
}

// ---------------------------------------------------------------------------
// Discriminator

std::size_t discriminator_downsamples(std::size_t image_size) {
  for (std::size_t n = 3;; --n) {
    std::size_t s = image_size;
    bool ok = true;
    for (std::size_t i = 0; i < 5 && ok; ++i) {
      const std::size_t stride = i < n ? 2 : 1;
      if (s + 2 < 4) {
        ok = false;
        break;
      }
      s = conv_out_size(s, 4, stride, 1);
      ok = s >= 1;
    }
    if (ok) return n;
    if (n == 0) break;
  }
  throw ConfigError("image_size " + std::to_string(image_size) +
                    " is too small for the discriminator");
}

template <typename T>
Discriminator<T>::Discriminator(const NetConfig& cfg, std::size_t in_channels,
                                std::uint64_t seed) {
  cfg.validate();
  const std::size_t down = discriminator_downsamples(cfg.image_size);
  const std::size_t b = cfg.base_width;
  const std::size_t widths[5] = {b, 2 * b, 4 * b, 8 * b, 1};
  std::size_t in = in_channels;
  std::size_t s = cfg.image_size;
  for (std::size_t i = 0; i < 5; ++i) {
    LayerSpec spec;
    spec.name = "conv" + std::to_string(i);
    spec.label = "Cv" + std::to_string(i);
    spec.in_channels = in;
    spec.out_channels = widths[i];
    spec.stride = i < down ? 2 : 1;
    spec.before = i == 0 ? Activation::None : Activation::LeakyRelu;
    spec.batch_norm = i >= 1 && i <= 3;
    spec.after = i == 4 ? Activation::Sigmoid : Activation::None;
    spec.bias = !spec.batch_norm;
    s = conv_out_size(s, spec.kernel, spec.stride, spec.pad);
    in = widths[i];
    layers_.emplace_back(std::move(spec), mix_seed(seed, 3, i), kInitStd);
  }
  patch_ = s;
}

template <typename T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& input, Mode mode) {
  if (input.rank() != 4 || input.dim(1) != in_channels()) {
    throw ConfigError("discriminator expects [N, " + std::to_string(in_channels()) +
                      ", S, S] input, got " + shape_str(input.shape()));
  }
  Tensor<T> h = input;
  for (auto& layer : layers_) h = layer.forward(h, mode);
  return h;
}

template <typename T>
std::vector<LayerSpec> Discriminator<T>::layers() const { return specs_of(layers_); }

template <typename T>
NamedTensors<T> Discriminator<T>::parameters(const std::string& prefix) const {
  NamedTensors<T> out;
  collect(layers_, prefix, "conv", out, false);
  return out;
}

template <typename T>
NamedTensors<T> Discriminator<T>::buffers(const std::string& prefix) const {
  NamedTensors<T> out;
  collect(layers_, prefix, "conv", out, true);
  return out;
}

template <typename T>
Generator<T> build_generator(const NetConfig& cfg, Role role, std::uint64_t seed) {
  if (role != Role::G1 && role != Role::G2) throw ConfigError("build_generator: not a generator role");
  return Generator<T>(cfg, default_in_channels(role), default_out_channels(role),
                      mix_seed(seed, fnv1a64(role == Role::G1 ? "g1" : "g2")));
}

template <typename T>
Discriminator<T> build_discriminator(const NetConfig& cfg, Role role, std::uint64_t seed) {
  if (role != Role::D1 && role != Role::D2) {
    throw ConfigError("build_discriminator: not a discriminator role");
  }
  return Discriminator<T>(cfg, default_in_channels(role),
                          mix_seed(seed, fnv1a64(role == Role::D1 ? "d1" : "d2")));
}

// ---------------------------------------------------------------------------
// ModelSet

template <typename T>
Generated<T> ModelSet<T>::generate(const Tensor<T>& x, Mode mode) {
  Generated<T> out;
  if (variant == Variant::MultiBranch) {
    const auto features = trunk->forward(x, mode);
    out.mask = mask_head->forward(features, mode);
    out.image = image_head->forward(features, mode);
    return out;
  }
  if (g1) out.mask = g1->forward(x, mode);
  if (g2) out.image = g2->forward(out.mask.defined() ? concat_channels(x, out.mask) : x, mode);
  return out;
}

template <typename T>
Tensor<T> ModelSet<T>::d1_input(const Tensor<T>& x, const Tensor<T>& mask) const {
  return concat_channels(x, mask);
}

template <typename T>
Tensor<T> ModelSet<T>::d2_input(const Tensor<T>& x, const Tensor<T>& mask,
                                const Tensor<T>& image) const {
  return mask.defined() ? concat_channels(concat_channels(x, mask), image)
                        : concat_channels(x, image);
}

template <typename T>
NamedTensors<T> ModelSet<T>::generator_parameters() const {
  NamedTensors<T> out;
  auto append = [&out](NamedTensors<T> more) {
    out.insert(out.end(), std::make_move_iterator(more.begin()),
               std::make_move_iterator(more.end()));
  };
  if (g1) append(g1->parameters("g1."));
  if (g2) append(g2->parameters("g2."));
  if (trunk) trunk->collect_parameters("trunk.", out);
  if (mask_head) mask_head->collect_parameters("mask_head.", out);
  if (image_head) image_head->collect_parameters("image_head.", out);
  return out;
}

template <typename T>
NamedTensors<T> ModelSet<T>::discriminator_parameters() const {
  NamedTensors<T> out;
  if (d1) out = d1->parameters("d1.");
  if (d2) {
    auto more = d2->parameters("d2.");
    out.insert(out.end(), more.begin(), more.end());
  }
  return out;
}

template <typename T>
NamedTensors<T> ModelSet<T>::buffers() const {
  NamedTensors<T> out;
  auto append = [&out](const NamedTensors<T>& more) {
    out.insert(out.end(), more.begin(), more.end());
  };
  if (g1) append(g1->buffers("g1."));
  if (g2) append(g2->buffers("g2."));
  if (trunk) trunk->collect_buffers("trunk.", out);
  if (mask_head) mask_head->collect_buffers("mask_head.", out);
  if (image_head) image_head->collect_buffers("image_head.", out);
  if (d1) append(d1->buffers("d1."));
  if (d2) append(d2->buffers("d2."));
  return out;
}

template <typename T>
NamedTensors<T> ModelSet<T>::state() const {
  NamedTensors<T> out = generator_parameters();
  auto d = discriminator_parameters();
  auto b = buffers();
  out.insert(out.end(), d.begin(), d.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

template <typename T>
std::size_t ModelSet<T>::parameter_count() const {
  return count_elements(generator_parameters()) + count_elements(discriminator_parameters());
}

template <typename T>
ModelSet<T> build_topology(const NetConfig& cfg, Variant variant, std::uint64_t seed) {
  cfg.validate();
  ModelSet<T> m;
  m.variant = variant;
  m.cfg = cfg;
  if (variant == Variant::MultiBranch) {
    m.trunk.emplace(cfg, 3, mix_seed(seed, fnv1a64("trunk")));
    m.mask_head.emplace(cfg, 1, mix_seed(seed, fnv1a64("mask_head")));
    m.image_head.emplace(cfg, 3, mix_seed(seed, fnv1a64("image_head")));
  } else {
    if (has_detection(variant)) m.g1 = build_generator<T>(cfg, Role::G1, seed);
    if (has_removal(variant)) {
      m.g2 = variant == Variant::NoG1D1
                 ? Generator<T>(cfg, 3, 3, mix_seed(seed, fnv1a64("g2")))
                 : build_generator<T>(cfg, Role::G2, seed);
    }
  }
  if (has_d1(variant)) m.d1 = build_discriminator<T>(cfg, Role::D1, seed);
  if (has_d2(variant)) {
    m.d2 = variant == Variant::NoG1D1 ? Discriminator<T>(cfg, 6, mix_seed(seed, fnv1a64("d2")))
                                      : build_discriminator<T>(cfg, Role::D2, seed);
  }
  return m;
}

template <typename T>
static std::size_t count_impl(const NamedTensors<T>& tensors) {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors) n += t.numel();
  return n;
}

std::size_t count_elements(const NamedTensors<float>& tensors) { return count_impl(tensors); }
std::size_t count_elements(const NamedTensors<double>& tensors) { return count_impl(tensors); }

template class Layer<float>;
template class Layer<double>;
template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;
template class Generator<float>;
template class Generator<double>;
template class Discriminator<float>;
template class Discriminator<double>;
template struct ModelSet<float>;
template struct ModelSet<double>;
template Generator<float> build_generator(const NetConfig&, Role, std::uint64_t);
template Generator<double> build_generator(const NetConfig&, Role, std::uint64_t);
template Discriminator<float> build_discriminator(const NetConfig&, Role, std::uint64_t);
template Discriminator<double> build_discriminator(const NetConfig&, Role, std::uint64_t);
template ModelSet<float> build_topology(const NetConfig&, Variant, std::uint64_t);
template ModelSet<double> build_topology(const NetConfig&, Variant, std::uint64_t);

}  // namespace stcgan
