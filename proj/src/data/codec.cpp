#include <png.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "stcgan/data.hpp"

namespace stcgan {

namespace {

std::string lower_extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return "";
  std::string ext = path.substr(dot);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool is_png(const std::vector<std::uint8_t>& bytes) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  return bytes.size() >= 8 && std::equal(sig, sig + 8, bytes.begin());
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw IoError("'" + path + "': " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Image out(img.width, img.height, color ? 3 : 1);
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("'" + path + "': " + msg);
  }
  return out;
}

void encode_png(const std::string& path, const Image& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write '" + path + "': " + img.message);
  }
}

class PnmHeader {
 public:
  explicit PnmHeader(const std::vector<std::uint8_t>& b) : b_(b) {}

  // Next whitespace-delimited token, skipping '#' comments.
  std::string token() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
    std::string t;
    while (pos_ < b_.size() && !std::isspace(b_[pos_]) && b_[pos_] != '#') {
      t.push_back(static_cast<char>(b_[pos_++]));
    }
    if (t.empty()) throw IoError("PNM header truncated");
    return t;
  }

  std::size_t number() {
    const std::string t = token();
    std::size_t v = 0;
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c))) throw IoError("PNM header: bad number");
      v = v * 10 + static_cast<std::size_t>(c - '0');
      if (v > (1u << 24)) throw IoError("PNM header: value out of range");
    }
    return v;
  }

  // The single whitespace byte that ends the header.
  std::size_t data_offset() {
    if (pos_ >= b_.size() || !std::isspace(b_[pos_])) throw IoError("PNM header truncated");
    return pos_ + 1;
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_pnm(const Image& image) {
  if (image.channels != 1 && image.channels != 3) throw IoError("PNM supports 1 or 3 channels");
  const std::string header = std::string(image.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(image.width) + " " + std::to_string(image.height) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

Image decode_pnm(const std::vector<std::uint8_t>& bytes) {
  PnmHeader h(bytes);
  const std::string magic = h.token();
  if (magic != "P5" && magic != "P6") throw IoError("unsupported PNM type '" + magic + "'");
  const std::size_t w = h.number(), ht = h.number(), maxval = h.number();
  if (w == 0 || ht == 0) throw IoError("PNM has zero size");
  if (maxval != 255) throw IoError("only 8-bit PNM (maxval 255) is supported");
  const std::size_t off = h.data_offset();
  Image img(w, ht, magic == "P6" ? 3 : 1);
  if (bytes.size() - off < img.pixels.size()) throw IoError("PNM pixel data truncated");
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(off), img.pixels.size(),
              img.pixels.begin());
  return img;
}

Image decode_image(const std::string& path) {
  const auto bytes = read_file(path);
  if (is_png(bytes)) return decode_png(bytes, path);
  try {
    return decode_pnm(bytes);
  } catch (const IoError& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

void encode_image(const std::string& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw IoError("cannot write '" + path + "': images need 1 or 3 channels");
  }
  if (image.pixels.size() != image.width * image.height * image.channels || image.empty()) {
    throw IoError("cannot write '" + path + "': inconsistent image buffer");
  }
  if (lower_extension(path) == ".png") {
    encode_png(path, image);
    return;
  }
  const auto bytes = encode_pnm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path + "'");
}

}  // namespace stcgan
