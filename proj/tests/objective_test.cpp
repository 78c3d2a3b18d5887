#include <cmath>
#include <random>
#include <vector>

#include "gtest/gtest.h"

#include "dpmn/objective.hpp"
#include "oracles.hpp"

namespace dpmn {
namespace {

using testing::OracleNeighbor;

DatasetShard noiseless_regression(std::mt19937_64& gen, const std::vector<double>& w, std::size_t n) {
  auto s = testing::random_shard(gen, n, w.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) y += w[k] * s.features[i * w.size() + k];
    s.labels[i] = y;
  }
  return s;
}

TEST(LossTest, QuadraticIsZeroAtShardOptimum) {
  std::mt19937_64 gen(1);
  const auto w = testing::random_vector(gen, 6);
  const auto shard = noiseless_regression(gen, w, 30);
  LossModel m{LossKind::quadratic, 6, 0, 0};
  EXPECT_NEAR(local_loss(m, ParamVector(w), shard), 0.0, 1e-12);
}

TEST(LossTest, LogisticAtZeroIsLn2OnBalancedBinaryShard) {
  std::mt19937_64 gen(2);
  auto shard = testing::random_shard(gen, 40, 5, 2);
  for (std::size_t i = 0; i < shard.size(); ++i) shard.labels[i] = static_cast<double>(i % 2);
  LossModel m{LossKind::logistic, 5, 2, 0};
  EXPECT_NEAR(local_loss(m, ParamVector(m.param_count()), shard), std::log(2.0), 1e-9);
}

TEST(LossTest, MlpMatchesStraightLineEvaluation) {
  std::mt19937_64 gen(0);
  const auto shard = testing::random_shard(gen, 20, 4, 3);
  LossModel m{LossKind::mlp, 4, 3, 5};
  const auto x = testing::random_vector(gen, m.param_count(), 0.7);
  EXPECT_NEAR(local_loss(m, ParamVector(x), shard), testing::oracle_loss<double>(m, x, shard), 1e-12);
}

TEST(LossTest, ParameterCounts) {
  EXPECT_EQ((LossModel{LossKind::quadratic, 7, 0, 0}.param_count()), 7u);
  EXPECT_EQ((LossModel{LossKind::logistic, 784, 10, 0}.param_count()), 7850u);
  EXPECT_EQ((LossModel{LossKind::mlp, 4, 3, 5}.param_count()), 5u * 4 + 5 + 3 * 5 + 3);
}

TEST(LossTest, ErrorPaths) {
  LossModel m{LossKind::quadratic, 3, 0, 0};
  DatasetShard empty;
  empty.feature_dim = 3;
  EXPECT_THROW(local_loss(m, ParamVector(3), empty), PreconditionError);
  std::mt19937_64 gen(3);
  const auto shard = testing::random_shard(gen, 5, 3, 0, 9);
  EXPECT_THROW(local_loss(m, ParamVector(4), shard), DimensionError);
  try {
    local_loss(m, ParamVector{std::nan(""), 0.0, 0.0}, shard);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_EQ(e.device(), 9);
  }
}

TEST(RegularizerTest, PlainExamples) {
  const ParamVector x{0.0, 0.0};
  const std::vector<ParamVector> nbrs{ParamVector{1.0, 0.0}, ParamVector{0.0, 2.0}};
  EXPECT_DOUBLE_EQ(plain_regularizer(x, nbrs), 2.5);
  const std::vector<ParamVector> same{x, x, x};
  EXPECT_EQ(plain_regularizer(x, same), 0.0);
  EXPECT_EQ(plain_regularizer(x, std::span<const ParamVector>{}), 0.0);
}

TEST(RegularizerTest, PrunedExamples) {
  const ParamVector x{1.0, 2.0, 3.0};
  const PruneMask m{1, 1, 0};
  std::vector<NeighborModel> same{{1, x, m}, {2, x, PruneMask::ones(3)}};
  EXPECT_EQ(pruned_regularizer(x, m, same), 0.0);
  // One neighbor at masked squared distance ln 2.
  std::vector<NeighborModel> one{{1, ParamVector{1.0 + std::sqrt(std::log(2.0)), 2.0, 50.0}, PruneMask::ones(3)}};
  EXPECT_NEAR(pruned_regularizer(x, m, one), 0.5, 1e-15);
  EXPECT_EQ(pruned_regularizer(x, m, {}), 0.0);
  std::vector<NeighborModel> bad{{1, ParamVector(2), PruneMask::ones(2)}};
  EXPECT_THROW(pruned_regularizer(x, m, bad), DimensionError);
}

TEST(RegularizerTest, MatchesBruteForce) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 16;
    const ParamVector x(testing::random_vector(gen, d));
    const auto mask = testing::random_mask(gen, d);
    std::vector<NeighborModel> nbrs;
    std::vector<std::vector<double>> plain;
    std::vector<OracleNeighbor> pruned;
    for (int j = 0; j < 5; ++j) {
      NeighborModel nb{j, ParamVector(testing::random_vector(gen, d, 0.3)), testing::random_mask(gen, d)};
      plain.push_back(nb.x.values());
      pruned.push_back({nb.x.values(), testing::mask_bits(nb.mask)});
      nbrs.push_back(std::move(nb));
    }
    EXPECT_NEAR(plain_regularizer(x, nbrs), testing::brute_plain_regularizer(x.values(), plain), 1e-12);
    EXPECT_NEAR(pruned_regularizer(x, mask, nbrs),
                testing::brute_pruned_regularizer(x.values(), testing::mask_bits(mask), pruned), 1e-12);
  }
}

TEST(RegularizerTest, PermutationInvariantToTheLastBit) {
  std::mt19937_64 gen(12);
  const std::size_t d = 24;
  const ParamVector x(testing::random_vector(gen, d));
  const auto mask = testing::random_mask(gen, d);
  std::vector<NeighborModel> nbrs;
  for (int j = 0; j < 6; ++j)
    nbrs.push_back({j * 3 + 1, ParamVector(testing::random_vector(gen, d, 0.4)), testing::random_mask(gen, d)});
  const double ref = pruned_regularizer(x, mask, nbrs);
  const double ref_plain = plain_regularizer(x, nbrs);
  for (int trial = 0; trial < 50; ++trial) {
    std::shuffle(nbrs.begin(), nbrs.end(), gen);
    ASSERT_EQ(pruned_regularizer(x, mask, nbrs), ref);
    ASSERT_EQ(plain_regularizer(x, nbrs), ref_plain);
  }
}

TEST(RegularizerTest, InsensitiveOutsideOverlap) {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 20;
    const auto mi = testing::random_mask(gen, d);
    ParamVector x = apply_mask(ParamVector(testing::random_vector(gen, d)), mi);
    std::vector<NeighborModel> nbrs;
    for (int j = 0; j < 3; ++j)
      nbrs.push_back({j, ParamVector(testing::random_vector(gen, d, 0.5)), testing::random_mask(gen, d)});
    const double ref = pruned_regularizer(x, mi, nbrs);
    // Perturb x wherever no neighbor overlaps, and each neighbor outside its own overlap.
    for (std::size_t k = 0; k < d; ++k) {
      bool any = false;
      for (const auto& nb : nbrs) any = any || (mi[k] && nb.mask[k]);
      if (!any) x[k] += 3.25;
    }
    for (auto& nb : nbrs)
      for (std::size_t k = 0; k < d; ++k)
        if (!(mi[k] && nb.mask[k])) nb.x[k] -= 1.5;
    ASSERT_EQ(pruned_regularizer(x, mi, nbrs), ref);
  }
}

TEST(CouplingTest, BoundedAndStrictlyIncreasing) {
  std::mt19937_64 gen(14);
  std::uniform_real_distribution<double> ud(0.0, 30.0);
  EXPECT_EQ(coupling(0.0), 0.0);
  for (int trial = 0; trial < 10000; ++trial) {
    double a = ud(gen), b = ud(gen);
    if (a > b) std::swap(a, b);
    ASSERT_GE(coupling(a), 0.0);
    ASSERT_LT(coupling(b), 1.0);
    if (b - a > 1e-9) {
      ASSERT_LT(coupling(a), coupling(b)) << a << " " << b;
    }
  }
}

TEST(ObjectiveTest, LambdaZeroAndIdenticalNeighbors) {
  std::mt19937_64 gen(15);
  auto inst = testing::random_instance(gen, LossKind::logistic, 3);
  const double f = local_loss(inst.model, inst.x, inst.data);
  EXPECT_EQ(local_objective(inst.model, inst.x, inst.mask, inst.data, {0.0, RegularizerForm::pruned}, inst.neighbors).total, f);
  std::vector<NeighborModel> same{{1, inst.x, inst.mask}, {2, inst.x, inst.mask}};
  EXPECT_EQ(local_objective(inst.model, inst.x, inst.mask, inst.data, {1.0, RegularizerForm::pruned}, same).total, f);
  EXPECT_EQ(local_objective(inst.model, inst.x, inst.mask, inst.data, {1.0, RegularizerForm::plain}, same).total, f);
}

TEST(ObjectiveTest, MatchesOracleSum) {
  std::mt19937_64 gen(16);
  for (int trial = 0; trial < 60; ++trial) {
    const auto kind = static_cast<LossKind>(trial % 3);
    auto inst = testing::random_instance(gen, kind, 1 + trial % 4);
    for (auto form : {RegularizerForm::plain, RegularizerForm::pruned}) {
      const double lambda = 0.37;
      const double got = local_objective(inst.model, inst.x, inst.mask, inst.data, {lambda, form}, inst.neighbors).total;
      const double want = testing::oracle_objective<double>(inst.model, inst.x.values(), testing::mask_bits(inst.mask),
                                                            inst.data, lambda, form, inst.oracle_neighbors);
      ASSERT_NEAR(got, want, 1e-12);
    }
  }
}

TEST(GradientTest, ZeroAtQuadraticOptimumWithIdenticalNeighbors) {
  std::mt19937_64 gen(17);
  const auto w = testing::random_vector(gen, 8);
  const auto shard = noiseless_regression(gen, w, 40);
  LossModel m{LossKind::quadratic, 8, 0, 0};
  const ParamVector x(w);
  std::vector<NeighborModel> same{{1, x, PruneMask::ones(8)}, {2, x, PruneMask::ones(8)}};
  for (auto form : {RegularizerForm::plain, RegularizerForm::pruned}) {
    const auto g = local_gradient(m, x, PruneMask::ones(8), shard, {0.5, form}, same);
    for (double v : g) EXPECT_NEAR(v, 0.0, 1e-10);
  }
}

TEST(GradientTest, MaskedCoordinatesReceiveExactlyZero) {
  std::mt19937_64 gen(18);
  for (int trial = 0; trial < 90; ++trial) {
    auto inst = testing::random_instance(gen, static_cast<LossKind>(trial % 3), 3);
    const auto g = local_gradient(inst.model, inst.x, inst.mask, inst.data, {1.0, RegularizerForm::pruned}, inst.neighbors);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!inst.mask[k]) {
        ASSERT_EQ(g[k], 0.0);
      }
    }
  }
}

// Relative error per coordinate, absolute below 1e-8.
void expect_matches_finite_differences(const testing::RandomInstance& inst, RegularizerForm form, double lambda) {
  const auto g = local_gradient(inst.model, inst.x, inst.mask, inst.data, {lambda, form}, inst.neighbors);
  const auto bits = testing::mask_bits(inst.mask);
  const auto fd = testing::finite_difference_gradient(
      [&](const std::vector<long double>& x) {
        return testing::oracle_objective<long double>(inst.model, x, bits, inst.data, lambda, form, inst.oracle_neighbors);
      },
      inst.x.values());
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (std::abs(fd[k]) < 1e-8 && std::abs(g[k]) < 1e-8) {
      ASSERT_LE(std::abs(g[k] - fd[k]), 1e-8) << "coordinate " << k;
    } else {
      ASSERT_LE(std::abs(g[k] - fd[k]) / std::max(std::abs(fd[k]), std::abs(g[k])), 1e-5) << "coordinate " << k;
    }
  }
}

TEST(GradientTest, MatchesFiniteDifferencesAcrossKinds) {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = testing::random_instance(gen, static_cast<LossKind>(trial % 3), trial % 5);
    expect_matches_finite_differences(inst, RegularizerForm::pruned, 0.8);
    expect_matches_finite_differences(inst, RegularizerForm::plain, 0.3);
  }
}

TEST(GradientTest, SmallStepDoesNotIncreaseObjective) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 gen(seed);
    auto inst = testing::random_instance(gen, static_cast<LossKind>(seed % 3), 1 + seed % 4);
    const RegularizerParams params{0.5, RegularizerForm::pruned};
    const auto before = local_objective(inst.model, inst.x, inst.mask, inst.data, params, inst.neighbors).total;
    const auto g = local_gradient(inst.model, inst.x, inst.mask, inst.data, params, inst.neighbors);
    ParamVector next = inst.x;
    for (std::size_t k = 0; k < next.size(); ++k) next[k] -= 1e-4 * g[k];
    const auto after = local_objective(inst.model, next, inst.mask, inst.data, params, inst.neighbors).total;
    ASSERT_LE(after, before) << "seed " << seed;
  }
}

TEST(GlobalObjectiveTest, Examples) {
  const std::vector<double> f1{0.7}, h1{0.0};
  const auto g1 = global_objective(f1, h1, 0.1);
  EXPECT_EQ(g1.F, 0.7);
  EXPECT_EQ(g1.H, 0.0);
  EXPECT_EQ(g1.R, 0.7);

  const std::vector<double> f{0.5, 1.5, 2.0, 0.25}, h{0.1, 0.0, 0.4, 0.3};
  const auto g = global_objective(f, h, 0.2);
  double F = 0, H = 0;
  for (int i = 0; i < 4; ++i) {
    F += f[i] / 4;
    H += h[i] / 4;
  }
  EXPECT_NEAR(g.F, F, 1e-12);
  EXPECT_NEAR(g.H, H, 1e-12);
  EXPECT_EQ(g.R, g.F + 0.2 * g.H);
  EXPECT_THROW(global_objective({}, {}, 0.1), PreconditionError);
}

}  // namespace
}  // namespace dpmn
