#include <cmath>

#include "stcgan/data.hpp"

namespace stcgan {

namespace {

double srgb_to_linear(std::uint8_t v) {
  const double c = v / 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta * delta * delta ? std::cbrt(t) : t / (3.0 * delta * delta) + 4.0 / 29.0;
}

// sRGB primaries to XYZ, D65.
constexpr double kM[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                             {0.2126729, 0.7151522, 0.0721750},
                             {0.0193339, 0.1191920, 0.9503041}};
// Reference white: the XYZ of RGB (1,1,1), so white maps to a = b = 0 exactly.
constexpr double kWhite[3] = {kM[0][0] + kM[0][1] + kM[0][2], kM[1][0] + kM[1][1] + kM[1][2],
                              kM[2][0] + kM[2][1] + kM[2][2]};

}  // namespace

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double rgb[3] = {srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)};
  double f[3];
  for (int i = 0; i < 3; ++i) {
    const double xyz = kM[i][0] * rgb[0] + kM[i][1] * rgb[1] + kM[i][2] * rgb[2];
    f[i] = lab_f(xyz / kWhite[i]);
  }
  return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

LabImage rgb_to_lab(const Image& rgb) {
  if (rgb.channels != 3) throw ConfigError("rgb_to_lab: expected an RGB image");
  LabImage out;
  out.width = rgb.width;
  out.height = rgb.height;
  out.values.resize(rgb.width * rgb.height * 3);
  for (std::size_t i = 0; i < rgb.width * rgb.height; ++i) {
    const Lab lab = srgb_to_lab(rgb.pixels[3 * i], rgb.pixels[3 * i + 1], rgb.pixels[3 * i + 2]);
    out.values[3 * i] = lab.L;
    out.values[3 * i + 1] = lab.a;
    out.values[3 * i + 2] = lab.b;
  }
  return out;
}

}  // namespace stcgan
