#include "pvsn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace pvsn {

float sample_bilinear(const Image& image, double x, double y) {
  const double max_x = static_cast<double>(image.width - 1);
  const double max_y = static_cast<double>(image.height - 1);
  x = std::clamp(x, 0.0, max_x);
  y = std::clamp(y, 0.0, max_y);
  const auto x0 = static_cast<std::size_t>(x);
  const auto y0 = static_cast<std::size_t>(y);
  const std::size_t x1 = std::min(x0 + 1, image.width - 1);
  const std::size_t y1 = std::min(y0 + 1, image.height - 1);
  const double fx = x - static_cast<double>(x0), fy = y - static_cast<double>(y0);
  const double top = image.at(x0, y0) * (1 - fx) + image.at(x1, y0) * fx;
  const double bottom = image.at(x0, y1) * (1 - fx) + image.at(x1, y1) * fx;
  return static_cast<float>(top * (1 - fy) + bottom * fy);
}

Image roi_preprocess(const Image& raw, double max_value) {
  if (raw.empty() || raw.width == 0 || raw.height == 0) throw std::invalid_argument("roi_preprocess: empty image");
  if (!(max_value > 0)) throw std::invalid_argument("roi_preprocess: max_value must be positive");
  const std::size_t side = std::min(raw.width, raw.height);
  const std::size_t x0 = (raw.width - side) / 2;
  const std::size_t y0 = (raw.height - side) / 2;
  Image out(kRoiSize, kRoiSize);
  if (side == kRoiSize) {
    for (std::size_t y = 0; y < kRoiSize; ++y)
      for (std::size_t x = 0; x < kRoiSize; ++x) out.at(x, y) = static_cast<float>(raw.at(x0 + x, y0 + y) / max_value);
    return out;
  }
  Image crop(side, side);
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x) crop.at(x, y) = raw.at(x0 + x, y0 + y);
  const double scale = static_cast<double>(side) / static_cast<double>(kRoiSize);
  for (std::size_t y = 0; y < kRoiSize; ++y) {
    const double sy = (static_cast<double>(y) + 0.5) * scale - 0.5;
    for (std::size_t x = 0; x < kRoiSize; ++x) {
      const double sx = (static_cast<double>(x) + 0.5) * scale - 0.5;
      out.at(x, y) = static_cast<float>(sample_bilinear(crop, sx, sy) / max_value);
    }
  }
  return out;
}

Image quantize8(const Image& image) {
  // Same arithmetic as reading the PNG back through roi_preprocess.
  Image out = image;
  for (auto& v : out.pixels) v = static_cast<float>(static_cast<double>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0);
  return out;
}

namespace {

RawImage read_pgm(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open image " + path.string());
  std::string magic;
  f >> magic;
  if (magic != "P5" && magic != "P2") throw std::runtime_error("not a PGM file: " + path.string());
  auto next_int = [&]() {
    std::string tok;
    while (f >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(f, rest);
        continue;
      }
      return std::stol(tok);
    }
    throw std::runtime_error("truncated PGM header: " + path.string());
  };
  const long w = next_int(), h = next_int(), maxval = next_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw std::runtime_error("bad PGM header: " + path.string());
  RawImage r{Image(static_cast<std::size_t>(w), static_cast<std::size_t>(h)), static_cast<double>(maxval)};
  if (magic == "P2") {
    for (auto& v : r.image.pixels) v = static_cast<float>(next_int());
    return r;
  }
  f.get();  // single whitespace after maxval
  const std::size_t bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> buf(r.image.pixels.size() * bytes);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("truncated PGM data: " + path.string());
  for (std::size_t i = 0; i < r.image.pixels.size(); ++i) {
    r.image.pixels[i] = bytes == 1 ? buf[i] : static_cast<float>((buf[2 * i] << 8) | buf[2 * i + 1]);
  }
  return r;
}

RawImage read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("cannot decode PNG " + path.string() + ": " + img.message);
  }
  RawImage r{Image(img.width, img.height), 255.0};
  for (std::size_t i = 0; i < buf.size(); ++i) r.image.pixels[i] = buf[i];
  return r;
}

}  // namespace

RawImage read_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pgm") return read_pgm(path);
  return read_png(path);
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::vector<png_byte> buf(image.pixels.size());
  for (std::size_t i = 0; i < buf.size(); ++i) {
    buf[i] = static_cast<png_byte>(std::lround(std::clamp(image.pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace pvsn
