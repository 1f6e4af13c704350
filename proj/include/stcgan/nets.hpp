#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stcgan/ops.hpp"

namespace stcgan {

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

struct NetConfig {
  std::size_t image_size = 64;
  std::size_t base_width = 8;
  std::size_t depth = 6;

  // Throws ConfigError unless image_size == 2^depth, depth >= 2 and base_width >= 1.
  void validate() const;
  static NetConfig full_scale() { return {256, 64, 8}; }
};

enum class Role { G1, G2, D1, D2 };

enum class Variant { Full, NoD1, NoD2, NoG1D1, NoG2D2, MultiBranch };

const char* variant_name(Variant v);
// Accepts the CLI spellings (full, no_d1, ..., multi_branch); throws ConfigError otherwise.
Variant parse_variant(const std::string& text);

bool has_detection(Variant v);
bool has_removal(Variant v);
bool has_d1(Variant v);
bool has_d2(Variant v);

// Static description of one conv block: pre-activation, conv, optional BN, post-activation.
struct LayerSpec {
  std::string name;   // registry key, e.g. "enc3" or "dec0"
  std::string label;  // architecture-table label, e.g. "Cv4" or "CvT7"
  bool transposed = false;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t pad = 1;
  Activation before = Activation::None;
  bool batch_norm = false;
  Activation after = Activation::None;
  bool bias = false;
  // Encoder index whose output is concatenated onto this layer's input; -1 for none.
  int skip_from = -1;
};

template <typename T>
class Layer {
 public:
  Layer() = default;
  Layer(LayerSpec spec, std::uint64_t seed, double init_std);

  Tensor<T> forward(const Tensor<T>& input, Mode mode);

  const LayerSpec& spec() const { return spec_; }
  void collect_parameters(const std::string& prefix, NamedTensors<T>& out) const;
  void collect_buffers(const std::string& prefix, NamedTensors<T>& out) const;

 private:
  LayerSpec spec_;
  Tensor<T> weight_, bias_, gamma_, beta_;
  RunningStats<T> stats_;
};

// Encoder half of the U-Net. forward() returns every stage output, outermost first.
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const NetConfig& cfg, std::size_t in_channels, std::uint64_t seed);

  std::vector<Tensor<T>> forward(const Tensor<T>& input, Mode mode);

  std::size_t in_channels() const { return layers_.front().spec().in_channels; }
  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::vector<LayerSpec> specs() const;
  void collect_parameters(const std::string& prefix, NamedTensors<T>& out) const;
  void collect_buffers(const std::string& prefix, NamedTensors<T>& out) const;

 private:
  std::vector<Layer<T>> layers_;
};

template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const NetConfig& cfg, std::size_t out_channels, std::uint64_t seed);

  Tensor<T> forward(const std::vector<Tensor<T>>& features, Mode mode);

  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::vector<LayerSpec> specs() const;
  void collect_parameters(const std::string& prefix, NamedTensors<T>& out) const;
  void collect_buffers(const std::string& prefix, NamedTensors<T>& out) const;

 private:
  std::vector<Layer<T>> layers_;
};

template <typename T>
class Generator {
 public:
  Generator() = default;
  Generator(const NetConfig& cfg, std::size_t in_channels, std::size_t out_channels,
            std::uint64_t seed);

  // [N, in, S, S] -> [N, out, S, S] with values in [-1, 1].
  Tensor<T> forward(const Tensor<T>& input, Mode mode);

  const NetConfig& config() const { return cfg_; }
  std::size_t in_channels() const { return encoder_.in_channels(); }
  std::vector<LayerSpec> layers() const;
  NamedTensors<T> parameters(const std::string& prefix) const;
  NamedTensors<T> buffers(const std::string& prefix) const;

  Encoder<T>& encoder() { return encoder_; }
  Decoder<T>& decoder() { return decoder_; }

 private:
  NetConfig cfg_;
  Encoder<T> encoder_;
  Decoder<T> decoder_;
};

template <typename T>
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const NetConfig& cfg, std::size_t in_channels, std::uint64_t seed);

  // [N, in, S, S] -> [N, 1, P, P] patch probabilities in (0, 1).
  Tensor<T> forward(const Tensor<T>& input, Mode mode);

  std::size_t in_channels() const { return layers_.front().spec().in_channels; }
  std::size_t patch_size() const { return patch_; }
  std::vector<LayerSpec> layers() const;
  NamedTensors<T> parameters(const std::string& prefix) const;
  NamedTensors<T> buffers(const std::string& prefix) const;

 private:
  std::vector<Layer<T>> layers_;
  std::size_t patch_ = 0;
};

// Standard deviation of the zero-mean normal used for every conv weight.
inline constexpr double kInitStd = 0.2;

// Stride-2 layer count of the discriminator: 3 (strides 2,2,2,1,1) unless the
// input is too small to keep a non-empty patch map.
std::size_t discriminator_downsamples(std::size_t image_size);

std::size_t default_in_channels(Role role);
std::size_t default_out_channels(Role role);

template <typename T>
Generator<T> build_generator(const NetConfig& cfg, Role role, std::uint64_t seed = 0);
template <typename T>
Discriminator<T> build_discriminator(const NetConfig& cfg, Role role, std::uint64_t seed = 0);

// Network outputs in model space. mask is the raw Tanh output in [-1, 1];
// either member is undefined when the topology lacks that task.
template <typename T>
struct Generated {
  Tensor<T> mask;
  Tensor<T> image;
};

// The networks of one topology variant. Stacked variants use g1/g2;
// multi_branch uses a shared trunk with mask and image decoders.
template <typename T>
struct ModelSet {
  Variant variant = Variant::Full;
  NetConfig cfg;
  std::optional<Generator<T>> g1, g2;
  std::optional<Encoder<T>> trunk;
  std::optional<Decoder<T>> mask_head, image_head;
  std::optional<Discriminator<T>> d1, d2;

  // x is the shadow image in model space, [N, 3, S, S].
  Generated<T> generate(const Tensor<T>& x, Mode mode);

  // D1 input: x ++ mask. D2 input: x ++ mask ++ image, or x ++ image when no mask exists.
  Tensor<T> d1_input(const Tensor<T>& x, const Tensor<T>& mask) const;
  Tensor<T> d2_input(const Tensor<T>& x, const Tensor<T>& mask, const Tensor<T>& image) const;

  NamedTensors<T> generator_parameters() const;
  NamedTensors<T> discriminator_parameters() const;
  // BN running statistics of every network.
  NamedTensors<T> buffers() const;
  // Parameters then buffers, in checkpoint order.
  NamedTensors<T> state() const;

  std::size_t parameter_count() const;
};

template <typename T>
ModelSet<T> build_topology(const NetConfig& cfg, Variant variant, std::uint64_t seed = 0);

std::size_t count_elements(const NamedTensors<float>& tensors);
std::size_t count_elements(const NamedTensors<double>& tensors);

extern template class Layer<float>;
extern template class Layer<double>;
extern template class Encoder<float>;
extern template class Encoder<double>;
extern template class Decoder<float>;
extern template class Decoder<double>;
extern template class Generator<float>;
extern template class Generator<double>;
extern template class Discriminator<float>;
extern template class Discriminator<double>;
extern template struct ModelSet<float>;
extern template struct ModelSet<double>;

}  // namespace stcgan
