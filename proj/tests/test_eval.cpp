#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hoso/eval.hpp"

using namespace hoso;

namespace {

bank::FeatureBank bank_of(double noise, std::size_t classes = 5, std::uint64_t seed = 2) {
  eval::SyntheticSpec s;
  s.num_classes = classes;
  s.dim = 16;
  s.within_class_noise = noise;
  s.train_per_class = 4;
  s.test_per_class = 20;
  s.logit_scale = 10.0;
  s.seed = seed;
  return eval::make_synthetic_bank(s);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Pearson, MatchesDirectFormula) {
  const std::vector<double> x{1, 2, 3, 4, 6}, y{2, 1, 4, 3, 7};
  long double mx = 3.2L, my = 3.4L, sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  EXPECT_NEAR(*eval::pearson(x, y), static_cast<double>(sxy / std::sqrt(sxx * syy)), 1e-14);
}

TEST(Pearson, PerfectAndDegenerate) {
  const std::vector<double> x{1, 2, 3}, y{-2, -4, -6}, flat{5, 5, 5};
  EXPECT_NEAR(*eval::pearson(x, y), -1.0, 1e-15);
  EXPECT_FALSE(eval::pearson(x, flat).has_value());
  EXPECT_THROW(eval::pearson(x, std::vector<double>{1, 2}), ShapeError);
}

TEST(Correlation, OneShotAccuracyOnLatticeAndFullColumnConstant) {
  const auto b = bank_of(1.5);
  const auto r = eval::one_shot_correlation(b, 30, 4);
  ASSERT_EQ(r.one_shot_acc.size(), 30u);
  for (double a : r.one_shot_acc) EXPECT_NEAR(a * 5, std::round(a * 5), 1e-12);
  for (double f : r.full_acc) EXPECT_EQ(f, r.full_acc.front());
  EXPECT_FALSE(r.r.has_value());
  EXPECT_THROW(eval::one_shot_correlation(b, 1, 4), ConfigError);
}

TEST(Correlation, PooledAcrossBanksTracksDifficulty) {
  std::vector<bank::FeatureBank> banks;
  for (double n : {0.3, 1.5, 2.5, 4.0}) banks.push_back(bank_of(n, 10));
  const auto r = eval::pooled_correlation(banks, 10, 1);
  ASSERT_EQ(r.one_shot_acc.size(), 40u);
  ASSERT_TRUE(r.r.has_value());
  EXPECT_GT(*r.r, 0.5);
}

TEST(Correlation, FamilySpansDifficulty) {
  const auto family = eval::correlation_family(8, 1);
  ASSERT_EQ(family.size(), 8u);
  EXPECT_DOUBLE_EQ(family.front().within_class_noise, 1.6);
  EXPECT_DOUBLE_EQ(family.back().within_class_noise, 4.3);
}

TEST(Grid, ZeroAlphaRowIsZeroShotAndBestIsOracleTagged) {
  const auto b = bank_of(2.0);
  train::TrainConfig cfg;
  cfg.shots = 4;
  cfg.epochs = 5;
  const std::vector<double> grid{0.0, 0.5, 0.8};
  const auto g = eval::grid_search_alpha(b, cfg, grid, 2);
  EXPECT_EQ(g.rows[0].accuracy, eval::evaluate(b, eval::zero_shot_classifier(b)).accuracy);
  double best = 0;
  for (const auto& r : g.rows) best = std::max(best, r.accuracy);
  EXPECT_EQ(g.best_accuracy, best);
  EXPECT_STREQ(eval::GridResult::kLabel, "ORACLE");
}

TEST(Grid, ParallelMatchesSerial) {
  const auto b = bank_of(2.0);
  train::TrainConfig cfg;
  cfg.shots = 4;
  cfg.epochs = 5;
  const std::vector<double> grid{0.1, 0.3, 0.7};
  const auto a = eval::grid_search_alpha(b, cfg, grid, 1);
  const auto c = eval::grid_search_alpha(b, cfg, grid, 3);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(a.rows[i].accuracy, c.rows[i].accuracy);
}

TEST(Grid, TiesGoToLowestAlpha) {
  auto b = bank_of(0.0);
  train::TrainConfig cfg;
  cfg.shots = 1;
  cfg.epochs = 1;
  cfg.adapter_lr = 0.0;
  const std::vector<double> grid{0.3, 0.0, 0.2};
  const auto g = eval::grid_search_alpha(b, cfg, grid);
  EXPECT_EQ(g.best_alpha, 0.0);
}

TEST(Grid, RejectsBadCandidates) {
  const auto b = bank_of(1.0);
  train::TrainConfig cfg;
  EXPECT_THROW(eval::grid_search_alpha(b, cfg, std::vector<double>{}), ConfigError);
  EXPECT_THROW(eval::grid_search_alpha(b, cfg, std::vector<double>{1.2}), ConfigError);
}

TEST(PerClass, CountWeightedMeanIsOverall) {
  const auto b = bank_of(2.0);
  train::TrainConfig cfg;
  cfg.shots = 4;
  cfg.epochs = 5;
  const std::vector<double> alphas{0.0, 0.4, 0.8};
  const auto s = eval::per_class_alpha_sweep(b, cfg, alphas);
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    double weighted = 0;
    std::size_t total = 0;
    for (std::size_t c = 0; c < b.num_classes; ++c) {
      weighted += s.accuracy(c, a) * static_cast<double>(s.class_counts[c]);
      total += s.class_counts[c];
    }
    EXPECT_NEAR(weighted / static_cast<double>(total), s.overall[a], 1e-12);
  }
}

TEST(Gap, DifferenceAndShapeCheck) {
  const std::vector<double> tr{1.0, 0.9}, te{0.5, 0.6};
  const auto g = eval::overfit_gap(tr, te);
  EXPECT_DOUBLE_EQ(g[0], 0.5);
  EXPECT_DOUBLE_EQ(g[1], 0.9 - 0.6);
  EXPECT_THROW(eval::overfit_gap(tr, std::vector<double>{0.1}), ShapeError);
}

TEST(Synthetic, NoiselessBankIsPerfectNoisyBankIsChance) {
  const auto clean = bank_of(0.0, 5);
  EXPECT_EQ(eval::evaluate(clean, eval::zero_shot_classifier(clean)).accuracy, 1.0);
  eval::SyntheticSpec s;
  s.num_classes = 10;
  s.dim = 32;
  s.within_class_noise = 200.0;
  s.test_per_class = 400;
  const auto noisy = eval::make_synthetic_bank(s);
  EXPECT_NEAR(eval::evaluate(noisy, eval::zero_shot_classifier(noisy)).accuracy, 0.1, 0.02);
}

TEST(Evaluate, ConfusionAndPerClass) {
  const auto b = bank_of(2.0);
  const auto r = eval::evaluate(b, eval::zero_shot_classifier(b));
  EXPECT_EQ(r.total, b.test.size());
  std::size_t diag = 0, all = 0;
  for (std::size_t i = 0; i < b.num_classes; ++i) {
    for (std::size_t j = 0; j < b.num_classes; ++j) {
      all += r.confusion(i, j);
      if (i == j) diag += r.confusion(i, j);
    }
    EXPECT_NEAR(r.per_class[i], static_cast<double>(r.confusion(i, i)) / r.class_counts[i], 1e-15);
  }
  EXPECT_EQ(all, r.total);
  EXPECT_EQ(diag, r.correct());
  EXPECT_THROW(eval::evaluate_items(b.test, std::vector<std::size_t>{}, b.num_classes, eval::zero_shot_classifier(b)),
               ConfigError);
}

TEST(Csv, HeadersAndRows) {
  const auto dir = std::filesystem::temp_directory_path() / "hoso_csv_test";
  std::filesystem::remove_all(dir);
  eval::GridResult g;
  g.rows = {{0.0, 0.5, {}}, {0.5, 0.75, {}}};
  eval::write_grid_csv(g, dir / "grid.csv");
  EXPECT_EQ(slurp(dir / "grid.csv"), "alpha,accuracy\n0,0.5\n0.5,0.75\n");
  const std::vector<double> gap{0.25};
  eval::write_gap_csv(gap, dir / "gap.csv");
  EXPECT_EQ(slurp(dir / "gap.csv"), "epoch,gap\n0,0.25\n");
  eval::CorrelationResult c{{0.5}, {0.6}, std::nullopt};
  eval::write_corr_csv(c, dir / "corr.csv");
  EXPECT_EQ(slurp(dir / "corr.csv"), "run,one_shot_acc,full_acc\n0,0.5,0.59999999999999998\n");
  std::filesystem::remove_all(dir);
}
