#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stcgan/losses.hpp"

namespace stcgan {

// 8-bit raster, row-major with interleaved channels (1 = gray, 3 = RGB).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), pixels(w * h * c, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c = 0) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool empty() const { return pixels.empty(); }
  bool operator==(const Image& o) const = default;
};

struct Triplet {
  std::string id;
  Image shadow;       // x
  Image mask;         // y, gray {0,255}
  Image shadow_free;  // r

  // Throws ConfigError unless the images agree in size, the channel counts are
  // 3/1/3 and the mask is two-valued.
  void validate() const;
};

// Codec: binary PNM (P5/P6) and PNG. encode_image picks the format from the
// extension (.png, otherwise PNM). Errors are IoError.
Image decode_image(const std::string& path);
void encode_image(const std::string& path, const Image& image);
std::vector<std::uint8_t> encode_pnm(const Image& image);
Image decode_pnm(const std::vector<std::uint8_t>& bytes);

// Collapses RGB to gray (first channel) if needed and thresholds at 128.
Image binarize_mask(const Image& mask);

// <root>/<split>_A (shadow), _B (mask), _C (shadow-free), matched by file stem
// and returned in lexicographic order.
std::vector<Triplet> load_dataset(const std::string& root, const std::string& split);
// Writes PNG files in the same layout; creates the directories.
void write_dataset(const std::string& root, const std::string& split,
                   const std::vector<Triplet>& triplets);

// Procedural shadow triplets: smooth textured background, one convex polygon
// shadow darkened by a single factor in [0.3, 0.7] with a half-strength edge.
std::vector<Triplet> synth_triplets(std::size_t n, std::size_t size, std::uint64_t seed);

struct AugmentSpec {
  std::size_t load_size = 72;
  std::size_t crop_size = 64;
  double hflip_prob = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
  // load_size = round(crop * 286 / 256).
  static std::size_t default_load_size(std::size_t crop);
};

// Seed for one sample's augmentation draw.
std::uint64_t augment_seed(std::uint64_t run_seed, const std::string& id, std::uint64_t epoch);

// Half-pixel-centre bilinear resampling, rounded half-up.
Image resize_bilinear(const Image& image, std::size_t width, std::size_t height);
Image resize_nearest(const Image& image, std::size_t width, std::size_t height);
// RGB bilinear, mask nearest then re-binarized.
Triplet resize_triplet(const Triplet& t, std::size_t size);
Image horizontal_flip(const Image& image);
Image crop(const Image& image, std::size_t top, std::size_t left, std::size_t height,
           std::size_t width);

// Resize to load_size, one shared crop and one shared flip draw.
Triplet augment(const Triplet& t, const AugmentSpec& spec);

struct Lab {
  double L = 0, a = 0, b = 0;
};

// sRGB (IEC 61966-2-1) -> linear -> XYZ (D65) -> CIELAB.
Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

struct LabImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;  // L, a, b per pixel
};

LabImage rgb_to_lab(const Image& rgb);

// [0,255] <-> [-1,1].
double to_model_value(std::uint8_t v);
// Clamps to [-1,1], then rounds half-up.
std::uint8_t from_model_value(double v);

// Stacks same-sized images into [N, C, H, W].
template <typename T>
Tensor<T> to_model_space(const std::vector<const Image*>& images);
template <typename T>
Tensor<T> to_model_space(const Image& image);
// Image `index` of an [N, C, H, W] tensor.
template <typename T>
Image from_model_space(const Tensor<T>& tensor, std::size_t index = 0);

template <typename T>
Batch<T> make_batch(const std::vector<const Triplet*>& triplets);

}  // namespace stcgan
