#include <random>

#include "gtest/gtest.h"

#include "dpmn/param.hpp"
#include "oracles.hpp"

namespace dpmn {
namespace {

TEST(ParamTest, ApplyMaskKeepsRetainedCoordinates) {
  EXPECT_EQ(apply_mask(ParamVector{1.5, -2.0, 3.0}, PruneMask{1, 0, 1}), (ParamVector{1.5, 0.0, 3.0}));
}

TEST(ParamTest, ApplyMaskIdentityAndAnnihilator) {
  const ParamVector x{0.25, -7.0, 1e300, -0.0};
  EXPECT_EQ(apply_mask(x, PruneMask::ones(4)), x);
  EXPECT_EQ(apply_mask(x, PruneMask::zeros(4)), ParamVector(4));
}

TEST(ParamTest, ApplyMaskRejectsLengthMismatch) {
  EXPECT_THROW(apply_mask(ParamVector{1.0, 2.0}, PruneMask{1, 0, 1}), DimensionError);
  EXPECT_THROW(overlap(PruneMask{1, 0}, PruneMask{1, 0, 1}), DimensionError);
}

TEST(ParamTest, OverlapTruthTable) {
  EXPECT_EQ(overlap(PruneMask{1, 1, 0}, PruneMask{1, 0, 1}), (PruneMask{1, 0, 0}));
  const PruneMask m{1, 0, 1, 1, 0};
  EXPECT_EQ(overlap(m, PruneMask::ones(5)), m);
  EXPECT_EQ(overlap(m, PruneMask::zeros(5)), PruneMask::zeros(5));
}

TEST(ParamTest, Sparsity) {
  EXPECT_DOUBLE_EQ(sparsity(PruneMask{1, 1, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(sparsity(PruneMask{0, 0, 0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(sparsity(PruneMask{1, 0, 1, 0}), 0.5);
}

TEST(ParamTest, MaskAlgebraProperties) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const std::size_t d = 1 + gen() % 40;
    const ParamVector x(testing::random_vector(gen, d));
    const auto a = testing::random_mask(gen, d, 0.5);
    const auto b = testing::random_mask(gen, d, 0.5);
    const auto c = testing::random_mask(gen, d, 0.5);
    const auto xa = apply_mask(x, a);
    ASSERT_EQ(apply_mask(xa, a), xa);
    ASSERT_EQ(apply_mask(x, overlap(a, b)), apply_mask(xa, b));
    ASSERT_EQ(overlap(a, b), overlap(b, a));
    ASSERT_EQ(overlap(overlap(a, b), c), overlap(a, overlap(b, c)));
    ASSERT_EQ(overlap(a, a), a);
    const double s = sparsity(a);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
    ASSERT_TRUE(xa.all_finite());
  }
}

}  // namespace
}  // namespace dpmn
