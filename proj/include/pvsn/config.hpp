#ifndef PVSN_CONFIG_HPP
#define PVSN_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "pvsn/train.hpp"

namespace pvsn {

/// Flat `key = value` settings; `#` starts a comment line.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config(const std::string& text);
KeyValues read_config(const std::filesystem::path& path);
/// Keys sorted, one per line.
std::string format_config(const KeyValues& values);
void write_config(const std::filesystem::path& path, const KeyValues& values);

/// Everything a training run needs besides the dataset itself.
struct RunConfig {
  TrainConfig train;
  double train_fraction = 0.70;
  double val_fraction = 0.25;  // of the training subjects
  /// Seeds the subject split and the test pair draw, independently of the
  /// training seed, so runs that differ only in training share a test set.
  std::uint64_t split_seed = 1;
  std::size_t test_pairs_per_class = 500;
  std::string data;
  std::string out;
};

/// Applies recognized keys over `base`; unknown keys are an error.
RunConfig apply_config(const KeyValues& values, RunConfig base = {});
KeyValues to_key_values(const RunConfig& config);

}  // namespace pvsn

#endif  // PVSN_CONFIG_HPP
