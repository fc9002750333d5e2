#ifndef PVSN_DATA_HPP
#define PVSN_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pvsn/image.hpp"

namespace pvsn {

/// One enrollment: both palms of a subject captured together.
struct Sample {
  std::string subject_id;
  int session = 0;
  int instance = 0;
  Image left;
  Image right;

  bool operator==(const Sample&) const = default;
};

/// Samples ordered by (subject, session, instance). Immutable once built.
struct Dataset {
  std::string provenance = "real";  // "real" or "synthetic:<seed>"
  std::vector<Sample> samples;
  std::vector<std::string> warnings;

  /// Sorted unique subject ids.
  std::vector<std::string> subjects() const;
  /// Sample indices per subject, aligned with subjects().
  std::vector<std::vector<std::size_t>> groups() const;
  /// The samples of the listed subjects, order preserved.
  Dataset subset(const std::vector<std::string>& subject_ids) const;
  std::optional<std::uint64_t> synthetic_seed() const;
};

/// Indices into one Dataset's samples. genuine <=> same subject.
struct PairExample {
  std::size_t a = 0;
  std::size_t b = 0;
  bool genuine = false;

  bool operator==(const PairExample&) const = default;
};

struct SplitSpec {
  double train_fraction = 0.70;
  std::uint64_t seed = 1;
};

/// Subject-level split: shuffled subjects, first ceil(fraction * count) train.
std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec);

struct Partition {
  Dataset fit;         // optimizer steps
  Dataset validation;  // head calibration, LR schedule, early stopping
  Dataset test;        // held-out subjects, never seen during training
};

/// Train/test split, then the training subjects are split again: the fit
/// set keeps ceil((1 - val_fraction) * count), the rest validate. All three
/// are subject-disjoint.
Partition partition(const Dataset& dataset, const SplitSpec& spec, double val_fraction);

/// n genuine pairs (subjects drawn with replacement, two distinct samples
/// each) and n imposter pairs (two distinct subjects), shuffled.
std::vector<PairExample> sample_episode(const Dataset& dataset, std::size_t n, std::mt19937_64& rng);

/// Balanced query set: per_class genuine then per_class imposter pairs,
/// shuffled. Same rules as sample_episode.
std::vector<PairExample> sample_query_pairs(const Dataset& dataset, std::size_t per_class,
                                            std::uint64_t seed);

/// Reads root/<subject>/<session>/<L|R>_<instance>.{png,pgm}. Incomplete
/// samples and subjects with fewer than two samples are skipped with a
/// warning; no usable subject is an error.
Dataset load_dataset(const std::filesystem::path& root);

/// Writes the dataset in the loader layout plus manifest.txt.
void write_dataset(const Dataset& dataset, const std::filesystem::path& root);

}  // namespace pvsn

#endif  // PVSN_DATA_HPP
