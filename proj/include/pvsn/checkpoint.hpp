#ifndef PVSN_CHECKPOINT_HPP
#define PVSN_CHECKPOINT_HPP

#include <filesystem>
#include <stdexcept>
#include <string>

#include "pvsn/model.hpp"

namespace pvsn {

// Binary layout, all integers little-endian:
//   "PVSN" | u32 version (1) | u32 count |
//   count x { u16 name_len | name | u8 dtype (0 = f32) | u8 rank | rank x u32 extent | f32 values }
// Entries follow SiameseParams::state() order.

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, UnsupportedVersion, Truncated, UnsupportedDtype, ShapeMismatch, MissingParameter };

  CheckpointError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void save_checkpoint(const SiameseParams<float>& params, const std::filesystem::path& path);

/// Parameters are validated against `arch`; any missing, mis-shaped or
/// unreadable entry is an error.
SiameseParams<float> load_checkpoint(const std::filesystem::path& path,
                                     const Architecture& arch = Architecture::full());

}  // namespace pvsn

#endif  // PVSN_CHECKPOINT_HPP
