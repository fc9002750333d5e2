#ifndef PVSN_SYNTH_HPP
#define PVSN_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>

#include "pvsn/data.hpp"
#include "pvsn/image.hpp"

namespace pvsn {

struct SynthConfig {
  std::size_t subjects = 20;
  std::size_t sessions = 2;
  std::size_t instances = 3;
  std::uint64_t seed = 7;
};

inline constexpr std::size_t kSynthCanvas = 256;

/// A subject's palm: 3-6 branching, curvature-bounded vessels (2-5 px wide)
/// drawn dark on a light, unevenly lit background and Gaussian blurred.
Image render_vein_pattern(std::mt19937_64& rng);

/// One capture of a base pattern: rotation within +-5 degrees, translation
/// within +-6 px, brightness within +-10 %, additive noise sigma 0.02.
Image perturb_capture(const Image& base, std::mt19937_64& rng);

/// Generates subjects x sessions x instances samples, each palm passed
/// through roi_preprocess and 8-bit quantized, so the in-memory result equals
/// what load_dataset reads back. Writes to `out` when given.
Dataset synth_generate(const SynthConfig& config,
                       const std::optional<std::filesystem::path>& out = std::nullopt);

}  // namespace pvsn

#endif  // PVSN_SYNTH_HPP
