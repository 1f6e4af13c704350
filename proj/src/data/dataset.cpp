#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>

#include "stcgan/data.hpp"
#include "stcgan/rng.hpp"

namespace fs = std::filesystem;

namespace stcgan {

void Triplet::validate() const {
  auto fail = [this](const std::string& why) {
    throw ConfigError("triplet '" + id + "': " + why);
  };
  if (shadow.channels != 3 || shadow_free.channels != 3) fail("shadow images must be RGB");
  if (mask.channels != 1) fail("mask must be single-channel");
  for (const Image* img : {&mask, &shadow_free}) {
    if (img->width != shadow.width || img->height != shadow.height) fail("image sizes differ");
  }
  for (std::uint8_t v : mask.pixels) {
    if (v != 0 && v != 255) fail("mask is not binary");
  }
}

Image binarize_mask(const Image& mask) {
  Image out(mask.width, mask.height, 1);
  for (std::size_t i = 0; i < mask.width * mask.height; ++i) {
    out.pixels[i] = mask.pixels[i * mask.channels] >= 128 ? 255 : 0;
  }
  return out;
}

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

// stem -> path for every image file in `dir`.
std::map<std::string, fs::path> index_folder(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("missing dataset folder '" + dir.string() + "'");
  std::map<std::string, fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_image_file(entry.path())) continue;
    const std::string stem = entry.path().stem().string();
    if (!files.emplace(stem, entry.path()).second) {
      throw ConfigError("'" + dir.string() + "' holds two images with stem '" + stem + "'");
    }
  }
  return files;
}

}  // namespace

std::vector<Triplet> load_dataset(const std::string& root, const std::string& split) {
  const fs::path base(root);
  const auto a = index_folder(base / (split + "_A"));
  const auto b = index_folder(base / (split + "_B"));
  const auto c = index_folder(base / (split + "_C"));
  auto require = [&](const std::map<std::string, fs::path>& from, const char* from_name,
                     const std::map<std::string, fs::path>& to, const char* to_name) {
    for (const auto& [stem, path] : from) {
      if (!to.count(stem)) {
        throw ConfigError("dataset: '" + stem + "' is in " + split + from_name + " but has no " +
                          "counterpart in " + split + to_name);
      }
    }
  };
  require(a, "_A", b, "_B");
  require(a, "_A", c, "_C");
  require(b, "_B", a, "_A");
  require(c, "_C", a, "_A");

  std::vector<Triplet> out;
  out.reserve(a.size());
  for (const auto& [stem, path] : a) {
    Triplet t;
    t.id = stem;
    t.shadow = decode_image(path.string());
    t.mask = binarize_mask(decode_image(b.at(stem).string()));
    t.shadow_free = decode_image(c.at(stem).string());
    if (t.shadow.channels != 3 || t.shadow_free.channels != 3) {
      throw ConfigError("dataset: '" + stem + "' shadow images must be RGB");
    }
    t.validate();
    out.push_back(std::move(t));
  }
  return out;
}

void write_dataset(const std::string& root, const std::string& split,
                   const std::vector<Triplet>& triplets) {
  const fs::path base(root);
  std::error_code ec;
  for (const char* suffix : {"_A", "_B", "_C"}) {
    fs::create_directories(base / (split + suffix), ec);
    if (ec) throw IoError("cannot create '" + (base / (split + suffix)).string() + "'");
  }
  for (const auto& t : triplets) {
    const std::string name = t.id + ".png";
    encode_image((base / (split + "_A") / name).string(), t.shadow);
    encode_image((base / (split + "_B") / name).string(), t.mask);
    encode_image((base / (split + "_C") / name).string(), t.shadow_free);
  }
}

// ---------------------------------------------------------------------------
// Synthetic triplets

namespace {

struct Point {
  double x, y;
};

bool inside_convex(const std::vector<Point>& poly, double x, double y) {
  // Vertices are in counter-clockwise angular order.
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& p = poly[i];
    const Point& q = poly[(i + 1) % poly.size()];
    if ((q.x - p.x) * (y - p.y) - (q.y - p.y) * (x - p.x) < 0) return false;
  }
  return true;
}

Image shadow_free_background(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> base(90.0, 200.0), slope(-40.0, 40.0),
      phase(0.0, 6.283185307179586), freq(1.0, 4.0), jitter(-4.0, 4.0);
  Image img(size, size, 3);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const double c0 = base(rng), gx = slope(rng), gy = slope(rng);
    const double fx = freq(rng), fy = freq(rng), px = phase(rng), py = phase(rng);
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double u = (x + 0.5) / size, v = (y + 0.5) / size;
        double val = c0 + gx * (u - 0.5) + gy * (v - 0.5) +
                     6.0 * std::sin(6.283185307179586 * fx * u + px) *
                         std::cos(6.283185307179586 * fy * v + py) +
                     jitter(rng);
        val = std::clamp(val, 60.0, 230.0);
        img.at(y, x, ch) = static_cast<std::uint8_t>(std::floor(val + 0.5));
      }
    }
  }
  return img;
}

Image polygon_mask(std::size_t size, std::mt19937_64& rng) {
  const std::size_t total = size * size;
  for (;;) {
    std::uniform_int_distribution<int> vertices(3, 8);
    std::uniform_real_distribution<double> centre(0.3 * size, 0.7 * size),
        radius(0.15 * size, 0.35 * size), angle(0.0, 6.283185307179586);
    const int k = vertices(rng);
    const double cx = centre(rng), cy = centre(rng), rx = radius(rng), ry = radius(rng);
    std::vector<double> angles(static_cast<std::size_t>(k));
    for (double& a : angles) a = angle(rng);
    std::sort(angles.begin(), angles.end());
    std::vector<Point> poly;
    for (double a : angles) poly.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});

    Image mask(size, size, 1);
    std::size_t area = 0;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        if (inside_convex(poly, x + 0.5, y + 0.5)) {
          mask.at(y, x) = 255;
          ++area;
        }
      }
    }
    // Reject slivers so every image has a usable shadow and lit region.
    if (area * 20 >= total && area * 10 <= total * 6) return mask;
  }
}

bool on_boundary(const Image& mask, std::size_t y, std::size_t x) {
  const std::size_t s = mask.width;
  if (y == 0 || x == 0 || y + 1 == s || x + 1 == s) return false;
  return mask.at(y - 1, x) == 0 || mask.at(y + 1, x) == 0 || mask.at(y, x - 1) == 0 ||
         mask.at(y, x + 1) == 0;
}

}  // namespace

std::vector<Triplet> synth_triplets(std::size_t n, std::size_t size, std::uint64_t seed) {
  if (n < 1) throw ConfigError("synth: n must be at least 1");
  if (size < 16) throw ConfigError("synth: size must be at least 16");
  constexpr double kFeather = 0.5;
  std::vector<Triplet> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(mix_seed(seed, i));
    Triplet& t = out[i];
    char id[32];
    std::snprintf(id, sizeof id, "synth_%05zu", i);
    t.id = id;
    t.shadow_free = shadow_free_background(size, rng);
    t.mask = polygon_mask(size, rng);
    const double a = std::uniform_real_distribution<double>(0.3, 0.7)(rng);
    t.shadow = t.shadow_free;
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        if (t.mask.at(y, x) == 0) continue;
        const double f = on_boundary(t.mask, y, x) ? 1.0 - kFeather * (1.0 - a) : a;
        for (std::size_t ch = 0; ch < 3; ++ch) {
          t.shadow.at(y, x, ch) =
              static_cast<std::uint8_t>(std::floor(t.shadow_free.at(y, x, ch) * f + 0.5));
        }
      }
    }
  }
  return out;
}

}  // namespace stcgan
