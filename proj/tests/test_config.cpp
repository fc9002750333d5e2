#include <gtest/gtest.h>

#include "pvsn/config.hpp"

using namespace pvsn;

TEST(Config, ParsesKeyValuesAndComments) {
  const auto kv = parse_config("# run\nn = 3\n\n  loss=bce  \nmargin = 2.5\n");
  EXPECT_EQ(kv.at("n"), "3");
  EXPECT_EQ(kv.at("loss"), "bce");
  EXPECT_EQ(kv.at("margin"), "2.5");
  EXPECT_EQ(kv.size(), 3u);
  EXPECT_THROW(parse_config("just words\n"), std::invalid_argument);
}

TEST(Config, AppliesRecognizedKeys) {
  const auto rc = apply_config(parse_config("n = 4\nloss = bce\nseed = 9\nval_fraction = 0.2\ndata = d/\n"));
  EXPECT_EQ(rc.train.n, 4u);
  EXPECT_EQ(rc.train.loss, LossKind::CrossEntropy);
  EXPECT_EQ(rc.train.seed, 9u);
  EXPECT_EQ(rc.val_fraction, 0.2);
  EXPECT_EQ(rc.data, "d/");
  EXPECT_EQ(rc.train.margin, 1.0);  // untouched default
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(apply_config({{"batch_size", "8"}}), std::invalid_argument);
  EXPECT_THROW(apply_config({{"n", "-1"}}), std::invalid_argument);
  EXPECT_THROW(apply_config({{"lr", "fast"}}), std::invalid_argument);
  EXPECT_THROW(apply_config({{"k", "3"}}), std::invalid_argument);
}

TEST(Config, ResolvedConfigRoundTrips) {
  RunConfig rc;
  rc.train.n = 2;
  rc.train.adam.lr = 3.7e-4;
  rc.train.margin = 60;
  rc.split_seed = 12;
  rc.data = "x";
  rc.out = "y";
  const auto text = format_config(to_key_values(rc));
  const auto back = apply_config(parse_config(text));
  EXPECT_EQ(format_config(to_key_values(back)), text);
  EXPECT_EQ(back.train.adam.lr, 3.7e-4);
  EXPECT_EQ(back.split_seed, 12u);
  // Defaults are written out too.
  EXPECT_NE(text.find("early_stop_patience = 7"), std::string::npos);
}
