#include <gtest/gtest.h>

#include <random>

#include "pvsn/eval.hpp"
#include "pvsn/synth.hpp"

using namespace pvsn;

namespace {

const Dataset& small_data() {
  static const Dataset data = synth_generate({6, 1, 2, 13});
  return data;
}

ConfusionCounts counts(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  ConfusionCounts c;
  c.tp = tp, c.fp = fp, c.fn = fn, c.tn = tn;
  return c;
}

}  // namespace

TEST(Classify, BoundaryIsGenuine) {
  EXPECT_EQ(classify(0.7, 0.5), Decision::Genuine);
  EXPECT_EQ(classify(0.5, 0.5), Decision::Genuine);
  EXPECT_EQ(classify(0.49, 0.5), Decision::Imposter);
  EXPECT_THROW(classify(0.5, 0.0), std::invalid_argument);
  EXPECT_THROW(classify(0.5, 1.0), std::invalid_argument);
}

TEST(Classify, MonotoneInThreshold) {
  for (double p = 0.0; p <= 1.0; p += 0.05) {
    for (double t = 0.05; t < 0.95; t += 0.05) {
      if (classify(p, t) == Decision::Imposter) EXPECT_EQ(classify(p, t + 0.05), Decision::Imposter);
    }
  }
}

TEST(Confusion, AllCorrectAndInverted) {
  std::vector<bool> labels{true, true, true, true, true, false, false, false, false, false};
  std::vector<Decision> right, wrong;
  for (bool g : labels) {
    right.push_back(g ? Decision::Genuine : Decision::Imposter);
    wrong.push_back(g ? Decision::Imposter : Decision::Genuine);
  }
  EXPECT_EQ(confusion(right, labels), counts(5, 0, 0, 5));
  EXPECT_EQ(confusion(wrong, labels), counts(0, 5, 5, 0));
  EXPECT_THROW(confusion(right, {true}), std::invalid_argument);
}

TEST(Metrics, WorkedExample) {
  const auto r = metrics(counts(9, 1, 2, 8));
  EXPECT_DOUBLE_EQ(r.accuracy, 17.0 / 20);
  EXPECT_DOUBLE_EQ(r.precision, 0.9);
  EXPECT_DOUBLE_EQ(r.recall, 9.0 / 11);
  EXPECT_DOUBLE_EQ(r.specificity, 8.0 / 9);
  EXPECT_DOUBLE_EQ(r.f1, 18.0 / 21);
  EXPECT_FALSE(r.degenerate);
}

TEST(Metrics, PerfectClassifier) {
  const auto r = metrics(counts(1, 0, 0, 1));
  for (double v : {r.accuracy, r.precision, r.recall, r.specificity, r.f1}) EXPECT_EQ(v, 1.0);
}

TEST(Metrics, ZeroDenominatorsFlagged) {
  const auto r = metrics(counts(0, 0, 3, 2));  // nothing called genuine
  EXPECT_EQ(r.precision, 0.0);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_TRUE(r.degenerate);
  EXPECT_THROW(metrics({}), std::invalid_argument);
}

TEST(Metrics, AgreesWithBruteForceRecount) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t len = 1 + rng() % 200;
    std::vector<bool> labels(len);
    std::vector<Decision> pred(len);
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < len; ++i) {
      labels[i] = rng() & 1;
      pred[i] = (rng() & 1) ? Decision::Genuine : Decision::Imposter;
      const bool g = pred[i] == Decision::Genuine;
      tp += g && labels[i], fp += g && !labels[i], fn += !g && labels[i], tn += !g && !labels[i];
    }
    const auto c = confusion(pred, labels);
    ASSERT_EQ(c, counts(tp, fp, fn, tn));
    const auto r = metrics(c);
    const double P = double(tp + fn), N = double(tn + fp);
    EXPECT_NEAR(r.accuracy, double(tp + tn) / len, 1e-12);
    if (P > 0) EXPECT_NEAR(r.accuracy, (r.recall * P + r.specificity * N) / (P + N), 1e-12);
    if (tp + fp > 0) EXPECT_NEAR(r.precision, tp / double(tp + fp), 1e-12);
    if (r.precision + r.recall > 0 && tp + fp > 0 && P > 0) {
      EXPECT_NEAR(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall), 1e-12);
    }
  }
}

TEST(ReportFromScores, CountsAtThreshold) {
  std::vector<PairScore> s{{0, 0.9, true}, {0, 0.4, true}, {0, 0.6, false}, {0, 0.1, false}};
  const auto r = report_from_scores(s, 0.5);
  EXPECT_EQ(r.counts, counts(1, 1, 1, 1));
  EXPECT_EQ(r.threshold, 0.5);
}

TEST(ParseSweep, InclusiveGrid) {
  const auto g = parse_sweep("0.1:0.9:0.1");
  ASSERT_EQ(g.size(), 9u);
  EXPECT_NEAR(g.front(), 0.1, 1e-12);
  EXPECT_NEAR(g.back(), 0.9, 1e-12);
  EXPECT_THROW(parse_sweep("0.1:0.9"), std::invalid_argument);
  EXPECT_THROW(parse_sweep("0.9:0.1:0.1"), std::invalid_argument);
}

TEST(MetricsCsv, ThreeDecimals) {
  auto r = metrics(counts(9, 1, 2, 8));
  r.n = 5;
  EXPECT_EQ(metrics_csv_row(r), "contrastive,2,5,0.500,0.850,0.818,0.900,0.889,0.857");
}

TEST(Evaluate, DeterministicPerSeed) {
  auto params = init_params<float>(3);
  const EvalOptions opt{40, 0.5, 2};
  EXPECT_EQ(evaluate(params, small_data(), opt), evaluate(params, small_data(), opt));
}

TEST(Evaluate, UntrainedModelIsAtChance) {
  auto params = init_params<float>(5);
  const auto r = evaluate(params, small_data(), {500, 0.5, 1});
  EXPECT_EQ(r.counts.total(), 1000u);
  EXPECT_GE(r.accuracy, 0.40);
  EXPECT_LE(r.accuracy, 0.60);
}

TEST(ThresholdSweep, RecallFallsAndSpecificityRises) {
  auto params = init_params<float>(5);
  // Spread the probabilities over (0, 1) so the sweep crosses them.
  params.theta1.values()[0] = -0.05f;
  params.theta0.values()[0] = 2.0f;
  std::vector<double> grid;
  for (double t = 0.01; t < 1.0; t += 0.07) grid.push_back(t);
  const auto reports = threshold_sweep(params, small_data(), grid, {100, 0.5, 1});
  ASSERT_EQ(reports.size(), grid.size());
  for (std::size_t i = 1; i < reports.size(); ++i) {
    EXPECT_LE(reports[i].recall, reports[i - 1].recall);
    EXPECT_GE(reports[i].specificity, reports[i - 1].specificity);
    EXPECT_EQ(reports[i].counts.total(), 200u);
  }
  const auto low = threshold_sweep(params, small_data(), {1e-9}, {100, 0.5, 1});
  EXPECT_EQ(low[0].recall, 1.0);
  const auto high = threshold_sweep(params, small_data(), {1 - 1e-9}, {100, 0.5, 1});
  EXPECT_EQ(high[0].specificity, 1.0);
}

TEST(Verify, IdenticalCapturesAreGenuineAndOrderFree) {
  auto params = init_params<float>(8);
  const auto& d = small_data();
  const auto& s = d.samples;
  const auto same = verify(params, s[0].left, s[0].right, s[0].left, s[0].right);
  EXPECT_EQ(same.distance, 0.0);
  EXPECT_EQ(same.decision, Decision::Genuine);
  const auto ab = verify(params, s[0].left, s[0].right, s[5].left, s[5].right);
  const auto ba = verify(params, s[5].left, s[5].right, s[0].left, s[0].right);
  EXPECT_EQ(ab.distance, ba.distance);
  EXPECT_GT(ab.distance, 0.0);
  EXPECT_THROW(verify(params, Image(10, 10), s[0].right, s[0].left, s[0].right), std::invalid_argument);
}

TEST(ScorePairs, MatchesPerPairVerify) {
  auto params = init_params<float>(8);
  const auto& d = small_data();
  const std::vector<PairExample> pairs{{0, 1, true}, {0, 4, false}};
  const auto scores = score_pairs(params, d, pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& a = d.samples[pairs[i].a];
    const auto& b = d.samples[pairs[i].b];
    const auto v = verify(params, a.left, a.right, b.left, b.right);
    EXPECT_NEAR(scores[i].distance, v.distance, 1e-4 * std::max(1.0, v.distance));
    EXPECT_EQ(scores[i].genuine, pairs[i].genuine);
  }
}
