#include "pvsn/eval.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace pvsn {

Decision classify(double probability, double threshold) {
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("classify: threshold must be in (0, 1)");
  return probability >= threshold ? Decision::Genuine : Decision::Imposter;
}

ConfusionCounts confusion(const std::vector<Decision>& predictions, const std::vector<bool>& genuine) {
  if (predictions.size() != genuine.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                                std::to_string(genuine.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool said_genuine = predictions[i] == Decision::Genuine;
    if (genuine[i]) {
      said_genuine ? ++c.tp : ++c.fn;
    } else {
      said_genuine ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

MetricsReport metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw std::invalid_argument("metrics: no evaluated pairs");
  MetricsReport r;
  r.counts = c;
  auto ratio = [&r](std::size_t num, std::size_t den) {
    if (den == 0) {
      r.degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.specificity = ratio(c.tn, c.tn + c.fp);
  r.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return r;
}

Tensor<float> embed_dataset(SiameseParams<float>& params, const Dataset& dataset) {
  constexpr std::size_t kBatch = 16;
  NoGradGuard no_grad;
  const std::size_t side = params.arch.input_size;
  const std::size_t image = side * side;
  const std::size_t e = params.arch.embedding;
  std::vector<float> out(dataset.samples.size() * 2 * e);
  for (std::size_t start = 0; start < dataset.samples.size(); start += kBatch) {
    const std::size_t count = std::min(kBatch, dataset.samples.size() - start);
    std::vector<float> pix(2 * count * image);
    for (std::size_t i = 0; i < count; ++i) {
      const Sample& s = dataset.samples[start + i];
      if (s.left.pixels.size() != image || s.right.pixels.size() != image) {
        throw std::invalid_argument("embed_dataset: sample images must be " + std::to_string(side) + "x" +
                                    std::to_string(side));
      }
      std::copy(s.left.pixels.begin(), s.left.pixels.end(), pix.begin() + static_cast<std::ptrdiff_t>(i * image));
      std::copy(s.right.pixels.begin(), s.right.pixels.end(),
                pix.begin() + static_cast<std::ptrdiff_t>((count + i) * image));
    }
    const auto feats = extract_features(params, Tensor<float>({2 * count, 1, side, side}, std::move(pix)), ForwardMode{});
    const auto f = feats.values();
    for (std::size_t i = 0; i < count; ++i) {
      float* row = out.data() + (start + i) * 2 * e;
      std::copy_n(f.data() + i * e, e, row);
      std::copy_n(f.data() + (count + i) * e, e, row + e);
    }
  }
  return Tensor<float>({dataset.samples.size(), 2 * e}, std::move(out));
}

std::vector<PairScore> score_pairs(const SiameseParams<float>& params, const Tensor<float>& embeddings,
                                   const std::vector<PairExample>& pairs) {
  const std::size_t width = embeddings.dim(1);
  const auto v = embeddings.values();
  const double t0 = params.theta0.item(), t1 = params.theta1.item();
  std::vector<PairScore> scores;
  scores.reserve(pairs.size());
  for (const auto& p : pairs) {
    // Same summation as l1_distance on the fused rows.
    float d = 0;
    for (std::size_t j = 0; j < width; ++j) d += std::abs(v[p.a * width + j] - v[p.b * width + j]);
    scores.push_back({d, probability_value(d, t0, t1), p.genuine});
  }
  return scores;
}

std::vector<PairScore> score_pairs(SiameseParams<float>& params, const Dataset& dataset,
                                   const std::vector<PairExample>& pairs) {
  return score_pairs(params, embed_dataset(params, dataset), pairs);
}

MetricsReport report_from_scores(const std::vector<PairScore>& scores, double threshold) {
  std::vector<Decision> pred;
  std::vector<bool> labels;
  for (const auto& s : scores) {
    pred.push_back(classify(s.probability, threshold));
    labels.push_back(s.genuine);
  }
  MetricsReport r = metrics(confusion(pred, labels));
  r.threshold = threshold;
  return r;
}

MetricsReport evaluate(SiameseParams<float>& params, const Dataset& test, const EvalOptions& options) {
  if (test.samples.empty()) throw std::invalid_argument("evaluate: empty test split");
  const auto pairs = sample_query_pairs(test, options.pairs_per_class, options.seed);
  return report_from_scores(score_pairs(params, test, pairs), options.threshold);
}

std::vector<MetricsReport> threshold_sweep(SiameseParams<float>& params, const Dataset& test,
                                           const std::vector<double>& thresholds, const EvalOptions& options) {
  if (thresholds.empty()) throw std::invalid_argument("threshold_sweep: empty grid");
  const auto pairs = sample_query_pairs(test, options.pairs_per_class, options.seed);
  const auto scores = score_pairs(params, test, pairs);
  std::vector<MetricsReport> out;
  for (double t : thresholds) out.push_back(report_from_scores(scores, t));
  return out;
}

VerifyResult verify(SiameseParams<float>& params, const Image& left_a, const Image& right_a, const Image& left_b,
                    const Image& right_b, double threshold) {
  NoGradGuard no_grad;
  const std::size_t side = params.arch.input_size;
  auto embed = [&](const Image& img) {
    if (img.width != side || img.height != side) {
      throw std::invalid_argument("verify: images must be preprocessed to " + std::to_string(side) + "x" +
                                  std::to_string(side));
    }
    return extract_features(params, Tensor<float>({1, 1, side, side}, img.pixels), ForwardMode{});
  };
  const auto fa = fuse(embed(left_a), embed(right_a));
  const auto fb = fuse(embed(left_b), embed(right_b));
  VerifyResult r;
  r.distance = pair_distance(fa, fb).item();
  r.probability = probability_value(r.distance, params.theta0.item(), params.theta1.item());
  r.decision = classify(r.probability, threshold);
  return r;
}

std::vector<double> parse_sweep(const std::string& spec) {
  double lo, hi, step;
  char c1, c2;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0) || hi < lo) {
    throw std::invalid_argument("sweep must look like lo:hi:step, got '" + spec + "'");
  }
  std::vector<double> grid;
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5));
  for (std::size_t i = 0; i <= count; ++i) grid.push_back(lo + static_cast<double>(i) * step);
  return grid;
}

std::string metrics_csv_row(const MetricsReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,2,%zu,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f", loss_name(r.loss), r.n, r.threshold,
                r.accuracy, r.recall, r.precision, r.specificity, r.f1);
  return buf;
}

}  // namespace pvsn
