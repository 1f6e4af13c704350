#include <algorithm>
#include <cmath>
#include <random>

#include "stcgan/data.hpp"
#include "stcgan/rng.hpp"

namespace stcgan {

void AugmentSpec::validate() const {
  if (crop_size == 0 || load_size < crop_size) {
    throw ConfigError("augment: need load_size >= crop_size > 0");
  }
  if (!(hflip_prob >= 0.0 && hflip_prob <= 1.0)) throw ConfigError("augment: hflip_prob not in [0,1]");
}

std::size_t AugmentSpec::default_load_size(std::size_t crop) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(crop) * 286.0 / 256.0 + 0.5));
}

std::uint64_t augment_seed(std::uint64_t run_seed, const std::string& id, std::uint64_t epoch) {
  return mix_seed(run_seed, fnv1a64(id), epoch);
}

Image resize_bilinear(const Image& image, std::size_t width, std::size_t height) {
  if (image.width == width && image.height == height) return image;
  Image out(width, height, image.channels);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  const double max_x = static_cast<double>(image.width - 1);
  const double max_y = static_cast<double>(image.height - 1);
  for (std::size_t y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, max_y);
    const std::size_t y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, max_x);
      const std::size_t x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      for (std::size_t c = 0; c < image.channels; ++c) {
        const double top = image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
        const double bottom = image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
        const double v = top * (1 - wy) + bottom * wy;
        out.at(y, x, c) = static_cast<std::uint8_t>(std::min(255.0, std::floor(v + 0.5)));
      }
    }
  }
  return out;
}

Image resize_nearest(const Image& image, std::size_t width, std::size_t height) {
  if (image.width == width && image.height == height) return image;
  Image out(width, height, image.channels);
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = std::min(image.height - 1, y * image.height / height);
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = std::min(image.width - 1, x * image.width / width);
      for (std::size_t c = 0; c < image.channels; ++c) out.at(y, x, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

Triplet resize_triplet(const Triplet& t, std::size_t size) {
  Triplet out;
  out.id = t.id;
  out.shadow = resize_bilinear(t.shadow, size, size);
  out.shadow_free = resize_bilinear(t.shadow_free, size, size);
  out.mask = binarize_mask(resize_nearest(t.mask, size, size));
  return out;
}

Image horizontal_flip(const Image& image) {
  Image out(image.width, image.height, image.channels);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < image.channels; ++c) {
        out.at(y, x, c) = image.at(y, image.width - 1 - x, c);
      }
    }
  }
  return out;
}

Image crop(const Image& image, std::size_t top, std::size_t left, std::size_t height,
           std::size_t width) {
  if (top + height > image.height || left + width > image.width) {
    throw ConfigError("crop window exceeds the image");
  }
  Image out(width, height, image.channels);
  for (std::size_t y = 0; y < height; ++y) {
    const auto* src = &image.pixels[((top + y) * image.width + left) * image.channels];
    std::copy_n(src, width * image.channels, &out.pixels[y * width * image.channels]);
  }
  return out;
}

Triplet augment(const Triplet& t, const AugmentSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const std::size_t span = spec.load_size - spec.crop_size;
  std::uniform_int_distribution<std::size_t> offset(0, span);
  const std::size_t top = offset(rng);
  const std::size_t left = offset(rng);
  const bool flip = std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.hflip_prob;

  const Triplet loaded = resize_triplet(t, spec.load_size);
  auto finish = [&](const Image& img) {
    Image out = crop(img, top, left, spec.crop_size, spec.crop_size);
    return flip ? horizontal_flip(out) : out;
  };
  Triplet out;
  out.id = t.id;
  out.shadow = finish(loaded.shadow);
  out.mask = finish(loaded.mask);
  out.shadow_free = finish(loaded.shadow_free);
  return out;
}

}  // namespace stcgan
