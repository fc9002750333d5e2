#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pvsn/losses.hpp"
#include "pvsn/optim.hpp"
#include "pvsn/synth.hpp"
#include "pvsn/train.hpp"

using namespace pvsn;

namespace {

double contrastive(double d, bool genuine, double m) {
  return genuine ? 0.5 * d * d : 0.5 * std::pow(std::max(0.0, m - d), 2);
}

double bce(double p, bool genuine) {
  p = std::min(std::max(p, 1e-7), 1 - 1e-7);
  return genuine ? -std::log(p) : -std::log1p(-p);
}

double contrastive_at(double d, bool genuine, double m) {
  return contrastive_loss(Tensor<double>::scalar(d), genuine, m).item();
}

double bce_at(double p, bool genuine) { return bce_loss(Tensor<double>::scalar(p), genuine).item(); }

// Small dataset for training-loop tests: the loop runs in seconds.
const Dataset& tiny_data() {
  static const Dataset data = synth_generate({6, 1, 2, 11});
  return data;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.n = 1;
  c.episodes_per_epoch = 2;
  c.max_epochs = 2;
  c.val_pairs_per_class = 4;
  c.calibration_pairs_per_class = 4;
  c.margin = 60;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(ContrastiveLoss, Examples) {
  EXPECT_EQ(contrastive_at(0.0, true, 1.0), 0.0);
  EXPECT_EQ(contrastive_at(1.0, false, 1.0), 0.0);
  EXPECT_EQ(contrastive_at(2.5, false, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(contrastive_at(0.5, false, 1.0), 0.125);
}

TEST(ContrastiveLoss, MatchesClosedFormOnRandomGrid) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> dd(0.0, 3.0), mm(0.1, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double d = dd(rng), m = mm(rng);
    const bool g = rng() & 1;
    const double v = contrastive_at(d, g, m);
    EXPECT_NEAR(v, contrastive(d, g, m), 1e-12);
    EXPECT_GE(v, 0.0);
    if (v == 0.0) EXPECT_TRUE((g && d == 0.0) || (!g && d >= m));
  }
}

TEST(ContrastiveLoss, GradientMatchesFiniteDifferenceAwayFromMargin) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dd(0.0, 2.0);
  const double m = 1.0, h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    const double d = dd(rng);
    if (std::abs(d - m) < 1e-3) continue;
    const bool g = i % 2 == 0;
    auto t = Tensor<double>::scalar(d, true);
    contrastive_loss(t, g, m).backward();
    const double fd = (contrastive(d + h, g, m) - contrastive(d - h, g, m)) / (2 * h);
    EXPECT_NEAR(t.grad()[0], fd, 1e-7) << "d=" << d << " genuine=" << g;
  }
}

TEST(BceLoss, Examples) {
  EXPECT_NEAR(bce_at(1 - 1e-9, true), 0.0, 1e-6);
  EXPECT_NEAR(bce_at(0.5, true), 0.6931471805599453, 1e-12);
  EXPECT_NEAR(bce_at(0.9, false), 2.302585092994046, 1e-12);
}

TEST(BceLoss, MatchesClosedFormAndIsMonotone) {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> pp(1e-6, 1 - 1e-6);
  for (int i = 0; i < 1000; ++i) {
    const double p = pp(rng);
    const bool g = rng() & 1;
    EXPECT_NEAR(bce_at(p, g), bce(p, g), 1e-12);
    EXPECT_GE(bce_at(p, g), 0.0);
  }
  for (double p = 0.01; p < 0.99; p += 0.01) {
    EXPECT_GT(bce_at(p, true), bce_at(p + 0.01, true));
    EXPECT_LT(bce_at(p, false), bce_at(p + 0.01, false));
  }
}

TEST(BceLoss, ClampStopsGradient) {
  auto p = Tensor<double>::scalar(0.0, true);
  const double v = bce_loss(p, true).item();
  EXPECT_NEAR(v, -std::log(1e-7), 1e-9);
  bce_loss(p, true).backward();
  EXPECT_TRUE(!p.has_grad() || p.grad()[0] == 0.0);
}

TEST(BceLoss, LogitFormAgreesAndKeepsGradient) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> zz(-12.0, 12.0);
  for (int i = 0; i < 500; ++i) {
    const double z = zz(rng);
    const bool g = i % 2 == 0;
    const double p = 1 / (1 + std::exp(-z));
    auto t = Tensor<double>::scalar(z, true);
    const auto loss = bce_with_logits_loss(t, g);
    EXPECT_NEAR(loss.item(), bce(p, g), 1e-9 * std::max(1.0, bce(p, g)));
    loss.backward();
    EXPECT_NEAR(t.grad()[0], g ? p - 1 : p, 1e-12);
  }
  auto far = Tensor<double>::scalar(-80.0, true);
  const auto loss = bce_with_logits_loss(far, true);
  EXPECT_NEAR(loss.item(), 80.0, 1e-12);
  loss.backward();
  EXPECT_NEAR(far.grad()[0], -1.0, 1e-12);
}

TEST(ParseLoss, NamesAndErrors) {
  EXPECT_EQ(parse_loss("contrastive"), LossKind::Contrastive);
  EXPECT_EQ(parse_loss("bce"), LossKind::CrossEntropy);
  EXPECT_EQ(parse_loss("cross-entropy"), LossKind::CrossEntropy);
  EXPECT_THROW(parse_loss("triplet"), std::invalid_argument);
}

TEST(Adam, ConvergesOnScalarQuadratic) {
  Adam<double> adam({.lr = 0.1});
  std::vector<Adam<double>::Named> params{{"w", Tensor<double>::scalar(0.0, true)}};
  auto& w = params[0].second;
  for (int i = 0; i < 200; ++i) {
    w.zero_grad();
    w.grad_buffer()[0] = 2 * (w.item() - 3);
    adam.step(params);
  }
  EXPECT_LT(std::abs(w.item() - 3), 0.05);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {1e-3, -2.0, 50.0}) {
    Adam<double> adam({.lr = 0.01});
    std::vector<Adam<double>::Named> params{{"w", Tensor<double>::scalar(1.0, true)}};
    params[0].second.grad_buffer()[0] = g;
    adam.step(params);
    EXPECT_NEAR(params[0].second.item(), 1.0 - 0.01 * (g > 0 ? 1 : -1), 1e-6) << g;
  }
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  Adam<float> adam({.lr = 0.5});
  std::vector<Adam<float>::Named> params{{"a", Tensor<float>({3}, {1, -2, 3}, true)},
                                         {"b", Tensor<float>({2}, {0.5f, 7}, true)}};
  for (auto& [n, t] : params) t.grad_buffer();
  const auto before_a = std::vector<float>(params[0].second.values().begin(), params[0].second.values().end());
  for (int i = 0; i < 10; ++i) adam.step(params);
  EXPECT_EQ(std::vector<float>(params[0].second.values().begin(), params[0].second.values().end()), before_a);
  EXPECT_EQ(params[1].second.values()[1], 7.0f);
}

TEST(Adam, MissingGradientNamesParameter) {
  Adam<float> adam;
  std::vector<Adam<float>::Named> params{{"fc6.weight", Tensor<float>::scalar(1, true)}};
  try {
    adam.step(params);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("fc6.weight"), std::string::npos);
  }
}

TEST(Plateau, ImprovingSequenceKeepsLearningRate) {
  PlateauScheduler s(1e-3, 3, 0.5);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(s.step(10.0 - i), 1e-3);
}

TEST(Plateau, FlatSequenceHalvesAtEpochFour) {
  PlateauScheduler s(1e-3, 3, 0.5);
  EXPECT_EQ(s.step(1.0), 1e-3);  // epoch 1 sets the best
  EXPECT_EQ(s.step(1.0), 1e-3);
  EXPECT_EQ(s.step(1.0), 1e-3);
  EXPECT_EQ(s.step(1.0), 5e-4);  // epoch 4
}

TEST(Plateau, StaysAtFloor) {
  PlateauScheduler s(4e-6, 1, 0.5, 1e-4, 1e-6);
  s.step(1.0);
  for (int i = 0; i < 10; ++i) s.step(1.0);
  EXPECT_EQ(s.lr(), 1e-6);
}

TEST(Plateau, RejectsBadSettings) {
  EXPECT_THROW(PlateauScheduler(0.0), std::invalid_argument);
  EXPECT_THROW(PlateauScheduler(1e-3, 3, 1.0), std::invalid_argument);
}

TEST(EarlyStop, ImprovingNeverStops) {
  EarlyStopper s(2);
  for (int i = 0; i < 50; ++i) EXPECT_FALSE(s.step(100.0 - i));
  EXPECT_EQ(s.best_epoch(), 50u);
}

TEST(EarlyStop, FlatFromFirstEpochStopsAfterSix) {
  EarlyStopper s(5);
  int epoch = 0;
  bool stop = false;
  while (!stop) stop = s.step(1.0), ++epoch;
  EXPECT_EQ(epoch, 6);
  EXPECT_EQ(s.best_epoch(), 1u);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.margin = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.adam.lr = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.plateau_factor = 1.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Train, RejectsEmptyOverlappingAndOversizedInputs) {
  const auto& data = tiny_data();
  const auto [tr, va] = split(data, {0.5, 1});
  auto c = tiny_config();
  EXPECT_THROW(train(c, Dataset{}, va), std::invalid_argument);
  EXPECT_THROW(train(c, tr, tr), std::invalid_argument);
  c.n = 4;  // three subjects with two samples each: three genuine pairs
  try {
    train(c, tr, va);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("genuine pairs"), std::string::npos);
  }
}

TEST(Train, SameSeedGivesIdenticalHistoryAndParameters) {
  const auto [tr, va] = split(tiny_data(), {0.5, 1});
  const auto c = tiny_config();
  std::vector<EpochRecord> seen;
  const auto a = train(c, tr, va, [&](const EpochRecord& r) { seen.push_back(r); });
  const auto b = train(c, tr, va);
  EXPECT_EQ(a.history.epochs, b.history.epochs);
  EXPECT_EQ(seen, a.history.epochs);
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  const auto pa = a.params.state();
  const auto pb = b.params.state();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(std::equal(pa[i].second.values().begin(), pa[i].second.values().end(),
                           pb[i].second.values().begin()))
        << pa[i].first;
  }
  ASSERT_EQ(a.history.epochs.size(), 2u);
  EXPECT_GE(a.history.best_epoch, 1u);
  for (std::size_t i = 1; i < a.history.epochs.size(); ++i) {
    EXPECT_LE(a.history.epochs[i].lr, a.history.epochs[i - 1].lr);
  }
}

TEST(Train, CrossEntropyPathRuns) {
  const auto [tr, va] = split(tiny_data(), {0.5, 1});
  auto c = tiny_config();
  c.loss = LossKind::CrossEntropy;
  c.max_epochs = 1;
  const auto r = train(c, tr, va);
  ASSERT_EQ(r.history.epochs.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.history.epochs[0].train_loss));
  EXPECT_EQ(r.history.stop_reason, "max_epochs");
}

TEST(HistoryCsv, SixDecimalFormat) {
  TrainHistory h;
  h.epochs.push_back({1, 0.5, 0.25, 0.875, 1e-4});
  EXPECT_EQ(history_csv(h), "epoch,train_loss,val_loss,val_accuracy,lr\n1,0.500000,0.250000,0.875000,0.000100\n");
}
