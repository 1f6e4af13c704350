#include <algorithm>
#include <cmath>

#include "stcgan/data.hpp"

namespace stcgan {

double to_model_value(std::uint8_t v) { return v / 127.5 - 1.0; }

std::uint8_t from_model_value(double v) {
  const double c = std::clamp(v, -1.0, 1.0);
  return static_cast<std::uint8_t>(std::floor((c + 1.0) * 127.5 + 0.5));
}

template <typename T>
Tensor<T> to_model_space(const std::vector<const Image*>& images) {
  if (images.empty()) throw ConfigError("to_model_space: no images");
  const Image& first = *images.front();
  const std::size_t c = first.channels, h = first.height, w = first.width;
  std::vector<T> data(images.size() * c * h * w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = *images[n];
    if (img.channels != c || img.height != h || img.width != w) {
      throw ConfigError("to_model_space: images differ in shape");
    }
    T* dst = data.data() + n * c * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          dst[(ch * h + y) * w + x] = static_cast<T>(to_model_value(img.at(y, x, ch)));
        }
      }
    }
  }
  return Tensor<T>({images.size(), c, h, w}, std::move(data));
}

template <typename T>
Tensor<T> to_model_space(const Image& image) {
  return to_model_space<T>(std::vector<const Image*>{&image});
}

template <typename T>
Image from_model_space(const Tensor<T>& tensor, std::size_t index) {
  if (tensor.rank() != 4 || index >= tensor.dim(0)) {
    throw ConfigError("from_model_space: expected [N, C, H, W] with N > index");
  }
  const std::size_t c = tensor.dim(1), h = tensor.dim(2), w = tensor.dim(3);
  if (c != 1 && c != 3) throw ConfigError("from_model_space: expected 1 or 3 channels");
  Image img(w, h, c);
  const T* src = tensor.data().data() + index * c * h * w;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        img.at(y, x, ch) = from_model_value(static_cast<double>(src[(ch * h + y) * w + x]));
      }
    }
  }
  return img;
}

template <typename T>
Batch<T> make_batch(const std::vector<const Triplet*>& triplets) {
  std::vector<const Image*> x, y, r;
  for (const Triplet* t : triplets) {
    x.push_back(&t->shadow);
    y.push_back(&t->mask);
    r.push_back(&t->shadow_free);
  }
  return {to_model_space<T>(x), to_model_space<T>(y), to_model_space<T>(r)};
}

#define STCGAN_INSTANTIATE(T)                                                  \
  template Tensor<T> to_model_space(const std::vector<const Image*>&);        \
  template Tensor<T> to_model_space(const Image&);                            \
  template Image from_model_space(const Tensor<T>&, std::size_t);             \
  template Batch<T> make_batch(const std::vector<const Triplet*>&);

STCGAN_INSTANTIATE(float)
STCGAN_INSTANTIATE(double)

#undef STCGAN_INSTANTIATE

}  // namespace stcgan
