#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include "pvsn/checkpoint.hpp"
#include "pvsn/model.hpp"

using namespace pvsn;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const std::string& name) {
  fs::path p = fs::path(PVSN_TEST_TMP) / ("model_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary | std::ios::trunc).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Tensor<float> random_images(std::size_t n, std::size_t side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<float> v(n * side * side);
  for (auto& x : v) x = u(rng);
  return Tensor<float>({n, 1, side, side}, std::move(v));
}

bool same_values(const Tensor<float>& a, const Tensor<float>& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

}  // namespace

TEST(Architecture, FullSizeShapeChain) {
  const auto a = Architecture::full();
  EXPECT_EQ(a.spatial_chain(), (std::vector<std::size_t>{126, 63, 61, 30, 30, 15, 15, 7}));
  EXPECT_EQ(a.flatten_size(), 3136u);
}

TEST(Architecture, ForwardTraceMatchesChain) {
  auto p = init_params<float>(7);
  const auto trace = trace_shapes(p, random_images(1, 128, 1));
  const std::vector<Shape> expected{{1, 64, 126, 126}, {1, 64, 63, 63}, {1, 64, 61, 61}, {1, 64, 30, 30},
                                    {1, 64, 30, 30},   {1, 64, 15, 15}, {1, 64, 15, 15}, {1, 64, 7, 7},
                                    {1, 3136},         {1, 1000},       {1, 128}};
  EXPECT_EQ(trace, expected);
}

TEST(Architecture, TooSmallInputIsRejected) {
  Architecture a = Architecture::reduced();
  a.input_size = 16;
  EXPECT_THROW(a.spatial_chain(), std::invalid_argument);
}

TEST(InitParams, SameSeedIdenticalDifferentSeedDiffers) {
  auto a = init_params<float>(7), b = init_params<float>(7), c = init_params<float>(8);
  const auto sa = a.state(), sb = b.state(), sc = c.state();
  ASSERT_EQ(sa.size(), sb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    EXPECT_EQ(sa[i].first, sb[i].first);
    EXPECT_TRUE(same_values(sa[i].second, sb[i].second)) << sa[i].first;
    any_diff |= !same_values(sa[i].second, sc[i].second);
  }
  EXPECT_TRUE(any_diff);
}

TEST(InitParams, HeNormalScaleOfConv1) {
  auto p = init_params<double>(7);
  double m = 0, sq = 0;
  const auto w = p.conv_weight[0].values();
  for (double v : w) m += v;
  m /= static_cast<double>(w.size());
  for (double v : w) sq += (v - m) * (v - m);
  const double sd = std::sqrt(sq / static_cast<double>(w.size()));
  EXPECT_NEAR(sd / std::sqrt(2.0 / 9.0), 1.0, 0.2);
  EXPECT_EQ(p.theta0.item(), 0.0);
  EXPECT_EQ(p.theta1.item(), -1.0);
}

TEST(InitParams, CheckpointNamesAreStable) {
  std::vector<std::string> names;
  for (const auto& [n, t] : init_params<float>(1, Architecture::reduced()).state()) names.push_back(n);
  const std::vector<std::string> expected{
      "conv1.weight", "conv1.bias", "bn1.gamma", "bn1.beta", "bn1.running_mean", "bn1.running_var",
      "conv2.weight", "conv2.bias", "bn2.gamma", "bn2.beta", "bn2.running_mean", "bn2.running_var",
      "conv3.weight", "conv3.bias", "bn3.gamma", "bn3.beta", "bn3.running_mean", "bn3.running_var",
      "conv4.weight", "conv4.bias", "bn4.gamma", "bn4.beta", "bn4.running_mean", "bn4.running_var",
      "fc5.weight",   "fc5.bias",   "fc6.weight", "fc6.bias", "head.theta0", "head.theta1", "loss.margin"};
  EXPECT_EQ(names, expected);
}

TEST(ExtractFeatures, OutputsInsideOpenUnitInterval) {
  auto p = init_params<float>(3, Architecture::reduced());
  auto x = random_images(6, 24, 2);
  for (auto& v : x.values()) v *= 50.0f;  // push pre-activations far out
  const auto f = extract_features(p, x, ForwardMode{});
  ASSERT_EQ(f.shape(), (Shape{6, 8}));
  for (float v : f.values()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(ExtractFeatures, InferenceIsPureAndDeterministic) {
  auto p = init_params<float>(3, Architecture::reduced());
  const auto before = p.state();
  auto x = random_images(2, 24, 4);
  const auto a = extract_features(p, x, ForwardMode{});
  const auto b = extract_features(p, x, ForwardMode{});
  EXPECT_TRUE(same_values(a, b));
  const auto after = p.state();
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_TRUE(same_values(before[i].second, after[i].second));
}

TEST(ExtractFeatures, TrainingModeUpdatesRunningStatistics) {
  auto p = init_params<float>(3, Architecture::reduced());
  std::mt19937_64 rng(1);
  ForwardMode mode;
  mode.training = true;
  mode.rng = &rng;
  extract_features(p, random_images(4, 24, 5), mode);
  EXPECT_NE(p.bn_state[0].running_mean[0], 0.0f);
}

TEST(ExtractFeatures, OneExtractorServesEveryImagePath) {
  // The same image in any batch slot gets the same embedding, and gradients
  // from separate image paths accumulate into one set of weights.
  auto p = init_params<double>(5, Architecture::reduced());
  auto image = [](double freq) {
    std::vector<double> v(24 * 24);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(freq * static_cast<double>(i));
    return v;
  };
  auto a = image(0.05), b = image(0.11);
  std::vector<double> twice(a);
  twice.insert(twice.end(), a.begin(), a.end());
  const auto f = extract_features(p, Tensor<double>({2, 1, 24, 24}, twice), ForwardMode{});
  for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(f.values()[j], f.values()[8 + j]);

  auto path = [&](const std::vector<double>& img) {
    return sum(extract_features(p, Tensor<double>({1, 1, 24, 24}, img), ForwardMode{}));
  };
  path(a).backward();
  const std::vector<double> ga(p.conv_weight[1].grad().begin(), p.conv_weight[1].grad().end());
  p.zero_grad();
  path(b).backward();
  const std::vector<double> gb(p.conv_weight[1].grad().begin(), p.conv_weight[1].grad().end());
  p.zero_grad();
  add(path(a), path(b)).backward();
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_NEAR(p.conv_weight[1].grad()[i], ga[i] + gb[i], 1e-12);
  EXPECT_EQ(p.extractor_parameters().size(), 20u);
}

TEST(Fusion, ConcatenatesLeftThenRight) {
  Tensor<float> l({1, 2}, {0.1f, 0.2f}), r({1, 2}, {0.3f, 0.4f});
  const auto f = fuse(l, r);
  EXPECT_EQ(std::vector<float>(f.values().begin(), f.values().end()), (std::vector<float>{0.1f, 0.2f, 0.3f, 0.4f}));
}

TEST(Fusion, DistanceSeparatesOverPalms) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0, 1);
  auto vec = [&] {
    std::vector<double> v(128);
    for (auto& x : v) x = u(rng);
    return Tensor<double>({1, 128}, v);
  };
  for (int t = 0; t < 20; ++t) {
    auto l1 = vec(), r1 = vec(), l2 = vec(), r2 = vec();
    const double d = pair_distance(fuse(l1, r1), fuse(l2, r2)).item();
    const double parts = l1_distance(l1, l2).item() + l1_distance(r1, r2).item();
    EXPECT_NEAR(d, parts, 1e-12);
    EXPECT_LT(d, 256.0);
    double brute = 0;
    for (std::size_t i = 0; i < 128; ++i) {
      brute += std::abs(l1.values()[i] - l2.values()[i]) + std::abs(r1.values()[i] - r2.values()[i]);
    }
    EXPECT_NEAR(d, brute, 1e-11);
    EXPECT_EQ(pair_distance(fuse(l1, r1), fuse(l1, r1)).item(), 0.0);
    // Symmetry and the triangle inequality of the L1 metric.
    EXPECT_EQ(d, pair_distance(fuse(l2, r2), fuse(l1, r1)).item());
    const double via = pair_distance(fuse(l1, r1), fuse(l1, r2)).item() + pair_distance(fuse(l1, r2), fuse(l2, r2)).item();
    EXPECT_LE(d, via + 1e-12);
  }
}

TEST(Probability, ClosedForms) {
  EXPECT_DOUBLE_EQ(probability_value(0.0, 0.0, -1.0), 0.5);
  EXPECT_NEAR(probability_value(std::log(3.0), 0.0, -1.0), 0.25, 1e-15);
  double prev = 1.0;
  for (double d = 0; d < 50; d += 0.5) {
    const double p = probability_value(d, 3.0, -0.7);
    EXPECT_LT(p, prev);
    prev = p;
  }
  const auto t = probability(Tensor<double>::scalar(std::log(3.0)), Tensor<double>::scalar(0), Tensor<double>::scalar(-1));
  EXPECT_NEAR(t.item(), 0.25, 1e-15);
}

TEST(Checkpoint, ResaveIsByteIdentical) {
  const auto dir = tmp_dir("resave");
  save_checkpoint(init_params<float>(7), dir / "a.pvsn");
  save_checkpoint(load_checkpoint(dir / "a.pvsn"), dir / "b.pvsn");
  EXPECT_EQ(slurp(dir / "a.pvsn"), slurp(dir / "b.pvsn"));
  EXPECT_EQ(slurp(dir / "a.pvsn").substr(0, 4), "PVSN");
}

TEST(Checkpoint, RoundTripPreservesForwardBitwise) {
  const auto dir = tmp_dir("forward");
  auto p = init_params<float>(7);
  p.theta0.values()[0] = 12.5f;
  p.bn_state[2].running_var[3] = 1.75f;
  save_checkpoint(p, dir / "m.pvsn");
  auto q = load_checkpoint(dir / "m.pvsn");
  auto x = random_images(2, 128, 9);
  EXPECT_TRUE(same_values(extract_features(p, x, ForwardMode{}), extract_features(q, x, ForwardMode{})));
  EXPECT_EQ(q.theta0.item(), 12.5f);
  EXPECT_EQ(q.bn_state[2].running_var[3], 1.75f);
  EXPECT_EQ(q.margin, p.margin);
}

TEST(Checkpoint, CorruptionIsReported) {
  const auto dir = tmp_dir("corrupt");
  save_checkpoint(init_params<float>(1, Architecture::reduced()), dir / "m.pvsn");
  const auto good = slurp(dir / "m.pvsn");
  auto expect_kind = [&](const std::string& bytes, CheckpointError::Kind kind, const std::string& text) {
    spit(dir / "bad.pvsn", bytes);
    try {
      load_checkpoint(dir / "bad.pvsn", Architecture::reduced());
      ADD_FAILURE() << "no error for " << text;
    } catch (const CheckpointError& e) {
      EXPECT_EQ(e.kind(), kind);
      EXPECT_NE(std::string(e.what()).find(text), std::string::npos) << e.what();
    }
  };
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  expect_kind(bad_magic, CheckpointError::Kind::BadMagic, "bad magic");
  expect_kind("PV", CheckpointError::Kind::BadMagic, "bad magic");
  expect_kind(good.substr(0, good.size() - 3), CheckpointError::Kind::Truncated, "truncated checkpoint");
  std::string version = good;
  version[4] = 2;
  expect_kind(version, CheckpointError::Kind::UnsupportedVersion, "unsupported version 2");

  // A reduced checkpoint does not fit the full architecture.
  EXPECT_THROW(load_checkpoint(dir / "m.pvsn"), CheckpointError);
  try {
    load_checkpoint(dir / "m.pvsn");
  } catch (const CheckpointError& e) {
    EXPECT_EQ(e.kind(), CheckpointError::Kind::ShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("conv1.weight"), std::string::npos);
  }
  EXPECT_THROW(load_checkpoint(dir / "missing.pvsn"), CheckpointError);
}
