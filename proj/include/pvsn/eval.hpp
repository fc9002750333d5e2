#ifndef PVSN_EVAL_HPP
#define PVSN_EVAL_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pvsn/data.hpp"
#include "pvsn/losses.hpp"
#include "pvsn/model.hpp"

namespace pvsn {

enum class Decision { Imposter, Genuine };

/// Genuine iff p >= threshold; threshold must lie in (0, 1).
Decision classify(double probability, double threshold = 0.5);

/// Positive class is genuine.
struct ConfusionCounts {
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::size_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const std::vector<Decision>& predictions, const std::vector<bool>& genuine);

struct MetricsReport {
  double accuracy = 0, precision = 0, recall = 0, specificity = 0, f1 = 0;
  ConfusionCounts counts;
  /// Set when a ratio had a zero denominator and was reported as 0.
  bool degenerate = false;
  double threshold = 0.5;
  LossKind loss = LossKind::Contrastive;
  std::size_t n = 0;

  bool operator==(const MetricsReport&) const = default;
};

MetricsReport metrics(const ConfusionCounts& counts);

/// Distance, probability and label of one evaluated pair.
struct PairScore {
  double distance = 0;
  double probability = 0;
  bool genuine = false;
};

/// Fused 2E-wide embedding of every sample, inference mode, fixed batching.
Tensor<float> embed_dataset(SiameseParams<float>& params, const Dataset& dataset);

std::vector<PairScore> score_pairs(SiameseParams<float>& params, const Dataset& dataset,
                                   const std::vector<PairExample>& pairs);
/// Same, from precomputed embed_dataset() rows.
std::vector<PairScore> score_pairs(const SiameseParams<float>& params, const Tensor<float>& embeddings,
                                   const std::vector<PairExample>& pairs);

MetricsReport report_from_scores(const std::vector<PairScore>& scores, double threshold);

struct EvalOptions {
  std::size_t pairs_per_class = 500;
  double threshold = 0.5;
  std::uint64_t seed = 1;
};

/// Balanced seeded query pairs from `test`, inference-mode forward passes.
MetricsReport evaluate(SiameseParams<float>& params, const Dataset& test, const EvalOptions& options);

/// One report per threshold on a single fixed pair set.
std::vector<MetricsReport> threshold_sweep(SiameseParams<float>& params, const Dataset& test,
                                           const std::vector<double>& thresholds, const EvalOptions& options);

struct VerifyResult {
  double distance = 0;
  double probability = 0;
  Decision decision = Decision::Imposter;
};

/// Four-image check: user A's palms against user B's. Each image is
/// embedded on its own, so argument order cannot change the distance.
VerifyResult verify(SiameseParams<float>& params, const Image& left_a, const Image& right_a, const Image& left_b,
                    const Image& right_b, double threshold = 0.5);

/// "lo:hi:step", inclusive of hi within half a step.
std::vector<double> parse_sweep(const std::string& spec);

inline constexpr const char* kMetricsCsvHeader = "loss,k,n,threshold,accuracy,recall,precision,specificity,f1";
/// One CSV row, three decimals, no trailing newline.
std::string metrics_csv_row(const MetricsReport& report);

}  // namespace pvsn

#endif  // PVSN_EVAL_HPP
