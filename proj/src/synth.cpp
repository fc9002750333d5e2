#include "pvsn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace pvsn {

namespace {

constexpr double kStep = 3.0;
constexpr double kMaxTurn = 0.12;  // radians per step
constexpr double kVesselContrast = 0.38;

std::mt19937_64 derived_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint64_t> words{seed};
  words.insert(words.end(), path.begin(), path.end());
  std::vector<std::uint32_t> halves;
  for (auto w : words) {
    halves.push_back(static_cast<std::uint32_t>(w));
    halves.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  std::seed_seq seq(halves.begin(), halves.end());
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void stamp_disc(Image& darkness, double cx, double cy, double radius) {
  const double reach = radius + 1.0;
  const auto x0 = static_cast<long>(std::floor(cx - reach)), x1 = static_cast<long>(std::ceil(cx + reach));
  const auto y0 = static_cast<long>(std::floor(cy - reach)), y1 = static_cast<long>(std::ceil(cy + reach));
  for (long y = std::max(0L, y0); y <= std::min<long>(y1, static_cast<long>(darkness.height) - 1); ++y) {
    for (long x = std::max(0L, x0); x <= std::min<long>(x1, static_cast<long>(darkness.width) - 1); ++x) {
      const double d = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
      const double v = std::clamp(radius + 0.5 - d, 0.0, 1.0);  // one-pixel soft edge
      float& px = darkness.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
      px = std::max(px, static_cast<float>(v));
    }
  }
}

void grow_vessel(Image& darkness, double x, double y, double heading, double width, int steps, int depth,
                 std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 0.05);
  double turn = uniform(rng, -kMaxTurn, kMaxTurn) * 0.5;
  const double size = static_cast<double>(darkness.width);
  for (int s = 0; s < steps; ++s) {
    stamp_disc(darkness, x, y, width / 2.0);
    turn = std::clamp(0.85 * turn + jitter(rng), -kMaxTurn, kMaxTurn);
    heading += turn;
    x += kStep * std::cos(heading);
    y += kStep * std::sin(heading);
    if (x < -4 || y < -4 || x > size + 4 || y > size + 4) return;
    if (depth < 2 && uniform(rng, 0, 1) < 0.035) {
      const double side = uniform(rng, 0, 1) < 0.5 ? -1.0 : 1.0;
      grow_vessel(darkness, x, y, heading + side * uniform(rng, 0.45, 1.0), std::max(2.0, width * 0.7),
                  (steps - s) / 2 + 8, depth + 1, rng);
    }
  }
}

Image gaussian_blur(const Image& in, double sigma) {
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  double total = 0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= total;
  const auto w = static_cast<long>(in.width), h = static_cast<long>(in.height);
  Image tmp(in.width, in.height), out(in.width, in.height);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * in.at(static_cast<std::size_t>(std::clamp(x + i, 0L, w - 1)), static_cast<std::size_t>(y));
      }
      tmp.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = static_cast<float>(acc);
    }
  }
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp.at(static_cast<std::size_t>(x), static_cast<std::size_t>(std::clamp(y + i, 0L, h - 1)));
      }
      out.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace

Image render_vein_pattern(std::mt19937_64& rng) {
  const double size = static_cast<double>(kSynthCanvas);
  Image darkness(kSynthCanvas, kSynthCanvas);
  const int vessels = std::uniform_int_distribution<int>(3, 6)(rng);
  for (int v = 0; v < vessels; ++v) {
    // Start near one edge, heading roughly inward.
    const int edge = std::uniform_int_distribution<int>(0, 3)(rng);
    const double along = uniform(rng, 0.15, 0.85) * size;
    double x = 0, y = 0, heading = 0;
    switch (edge) {
      case 0: x = along, y = 2, heading = std::numbers::pi / 2; break;
      case 1: x = size - 2, y = along, heading = std::numbers::pi; break;
      case 2: x = along, y = size - 2, heading = -std::numbers::pi / 2; break;
      default: x = 2, y = along, heading = 0; break;
    }
    heading += uniform(rng, -0.6, 0.6);
    grow_vessel(darkness, x, y, heading, uniform(rng, 2.0, 5.0), std::uniform_int_distribution<int>(45, 95)(rng),
                0, rng);
  }
  // Uneven illumination: a soft linear ramp plus radial falloff.
  const double gx = uniform(rng, -0.08, 0.08), gy = uniform(rng, -0.08, 0.08);
  const double level = uniform(rng, 0.68, 0.78);
  Image img(kSynthCanvas, kSynthCanvas);
  for (std::size_t y = 0; y < kSynthCanvas; ++y) {
    for (std::size_t x = 0; x < kSynthCanvas; ++x) {
      const double u = static_cast<double>(x) / size - 0.5, v = static_cast<double>(y) / size - 0.5;
      const double bg = level + gx * u + gy * v - 0.15 * (u * u + v * v);
      img.at(x, y) = static_cast<float>(bg - kVesselContrast * darkness.at(x, y));
    }
  }
  return gaussian_blur(img, 1.5);
}

Image perturb_capture(const Image& base, std::mt19937_64& rng) {
  const double angle = uniform(rng, -5.0, 5.0) * std::numbers::pi / 180.0;
  const double tx = uniform(rng, -6.0, 6.0), ty = uniform(rng, -6.0, 6.0);
  const double gain = 1.0 + uniform(rng, -0.10, 0.10);
  std::normal_distribution<double> noise(0.0, 0.02);
  const double cx = (static_cast<double>(base.width) - 1) / 2, cy = (static_cast<double>(base.height) - 1) / 2;
  const double c = std::cos(angle), s = std::sin(angle);
  Image out(base.width, base.height);
  for (std::size_t y = 0; y < base.height; ++y) {
    for (std::size_t x = 0; x < base.width; ++x) {
      // Inverse map: output pixel -> source pixel of the rotated, shifted capture.
      const double dx = static_cast<double>(x) - cx - tx, dy = static_cast<double>(y) - cy - ty;
      const double sx = c * dx + s * dy + cx, sy = -s * dx + c * dy + cy;
      const double v = sample_bilinear(base, sx, sy) * gain + noise(rng);
      out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

Dataset synth_generate(const SynthConfig& config, const std::optional<std::filesystem::path>& out) {
  if (config.subjects == 0 || config.sessions == 0 || config.instances == 0) {
    throw std::invalid_argument("synth_generate: subjects, sessions and instances must all be >= 1");
  }
  Dataset d;
  d.provenance = "synthetic:" + std::to_string(config.seed);
  const int width = std::max<int>(3, static_cast<int>(std::to_string(config.subjects).size()));
  for (std::size_t subj = 0; subj < config.subjects; ++subj) {
    std::string id = std::to_string(subj + 1);
    id = "s" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(id.size(), width), '0') + id;
    auto left_rng = derived_rng(config.seed, {subj, 0});
    auto right_rng = derived_rng(config.seed, {subj, 1});
    const Image left_base = render_vein_pattern(left_rng);
    const Image right_base = render_vein_pattern(right_rng);
    for (std::size_t sess = 0; sess < config.sessions; ++sess) {
      for (std::size_t inst = 0; inst < config.instances; ++inst) {
        auto rng = derived_rng(config.seed, {subj, sess, inst, 2});
        Sample s;
        s.subject_id = id;
        s.session = static_cast<int>(sess + 1);
        s.instance = static_cast<int>(inst + 1);
        s.left = quantize8(roi_preprocess(perturb_capture(left_base, rng), 1.0));
        s.right = quantize8(roi_preprocess(perturb_capture(right_base, rng), 1.0));
        d.samples.push_back(std::move(s));
      }
    }
  }
  if (out) write_dataset(d, *out);
  return d;
}

}  // namespace pvsn
