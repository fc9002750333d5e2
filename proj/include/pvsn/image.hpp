#ifndef PVSN_IMAGE_HPP
#define PVSN_IMAGE_HPP

#include <cstddef>
#include <filesystem>
#include <vector>

namespace pvsn {

/// Single-channel image, row-major.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), pixels(w * h, fill) {}

  float& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  float at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool empty() const { return pixels.empty(); }

  bool operator==(const Image&) const = default;
};

inline constexpr std::size_t kRoiSize = 128;

/// Largest centered square, bilinear resize to 128x128 (half-pixel centers),
/// values divided by `max_value`. 128x128 inputs are only rescaled.
Image roi_preprocess(const Image& raw, double max_value = 255.0);

/// Bilinear sample with coordinates clamped to the image.
float sample_bilinear(const Image& image, double x, double y);

struct RawImage {
  Image image;  // raw intensities, 0..max_value
  double max_value = 255.0;
};

/// Reads 8-bit or 16-bit PNG (converted to gray) and binary/ASCII PGM.
RawImage read_image(const std::filesystem::path& path);

/// Writes an 8-bit grayscale PNG; values in [0, 1] are scaled by 255 and rounded.
void write_png(const std::filesystem::path& path, const Image& image);

/// round(clamp(v, 0, 1) * 255) / 255, the values a written PNG reads back as.
Image quantize8(const Image& image);

}  // namespace pvsn

#endif  // PVSN_IMAGE_HPP
