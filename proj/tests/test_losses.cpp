#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "aerogs/losses.hpp"

using namespace aerogs;

TEST(Anisotropy, Examples) {
  const std::vector<std::array<double, 2>> mild{{1.05, 1.0}};
  EXPECT_EQ(anisotropy_loss(mild, 1.1).value, 0.0);
  EXPECT_EQ(anisotropy_loss(mild, 1.1).gradient[0], (std::array<double, 2>{0.0, 0.0}));
  const std::vector<std::array<double, 2>> elongated{{1.5, 1.0}};
  EXPECT_NEAR(anisotropy_loss(elongated, 1.1).value, 0.4, 1e-15);
  const std::vector<std::array<double, 2>> both{{1.05, 1.0}, {1.5, 1.0}};
  EXPECT_NEAR(anisotropy_loss(both, 1.1).value, 0.2, 1e-15);
  EXPECT_EQ(anisotropy_loss({}, 1.1).value, 0.0);
}

TEST(Entropy, Examples) {
  const std::vector<double> half{0.5};
  EXPECT_NEAR(entropy_loss(half).value, 0.5 * std::numbers::ln2, 1e-15);
  const std::vector<double> ends{0.0, 1.0};
  EXPECT_EQ(entropy_loss(ends).value, 0.0);
  EXPECT_EQ(entropy_loss(ends).gradient[0], 0.0);
}

TEST(Entropy, PeaksAtInverseE) {
  const double peak = 1.0 / std::numbers::e;
  const std::vector<double> at{peak};
  EXPECT_NEAR(entropy_loss(at).value, peak, 1e-15);
  EXPECT_NEAR(entropy_loss(at).gradient[0], 0.0, 1e-15);
  for (double s = 0.01; s < 1.0; s += 0.01) {
    const std::vector<double> v{s};
    ASSERT_LE(entropy_loss(v).value, peak + 1e-15);
  }
}

TEST(Size, Examples) {
  const std::vector<double> big{0.01};
  EXPECT_NEAR(size_loss(big, 0.008).value, 0.002, 1e-16);
  const std::vector<double> exact{0.008};
  EXPECT_EQ(size_loss(exact, 0.008).value, 0.0);
  EXPECT_EQ(size_loss(exact, 0.008).gradient[0], 0.0);
}

TEST(Total, WeightedSum) {
  EXPECT_NEAR(total_regularizer(0.4, 0.5 * std::numbers::ln2, 0.002), 4.0 + 0.01 * 0.5 * std::numbers::ln2 + 0.00002,
              1e-14);
  EXPECT_NEAR(total_regularizer(0.4, 0.5 * std::numbers::ln2, 0.002), 4.00349, 1e-5);
  const std::vector<std::array<double, 2>> sc{{1.5, 1.0}};
  const std::vector<double> op{0.5};
  const std::vector<double> s1{0.01};
  EXPECT_NEAR(total_regularizer(RegularizerInputs{sc, op, s1}), 4.00349, 1e-5);
}

// Central differences away from the hinge kinks.
TEST(Gradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> s(0.5, 2.0), o(0.02, 0.98), big(0.001, 0.02);
  constexpr double h = 1e-6;
  const double a = 1.1, b = 0.008;
  for (int k = 0; k < 100; ++k) {
    std::vector<std::array<double, 2>> sc(4);
    std::vector<double> op(4), s1(4);
    for (auto& p : sc) {
      do p = {s(rng), s(rng)};
      while (std::abs(p[0] / p[1] - a) < 1e-3);
    }
    for (double& x : op) x = o(rng);
    for (double& x : s1) {
      do x = big(rng);
      while (std::abs(x - b) < 1e-5);
    }
    const auto an = anisotropy_loss(sc, a);
    const auto en = entropy_loss(op);
    const auto sz = size_loss(s1, b);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t c = 0; c < 2; ++c) {
        auto up = sc, dn = sc;
        up[i][c] += h;
        dn[i][c] -= h;
        const double fd = (anisotropy_loss(up, a).value - anisotropy_loss(dn, a).value) / (2 * h);
        ASSERT_NEAR(an.gradient[i][c], fd, 1e-6);
      }
      auto up = op, dn = op;
      up[i] += h;
      dn[i] -= h;
      ASSERT_NEAR(en.gradient[i], (entropy_loss(up).value - entropy_loss(dn).value) / (2 * h), 1e-6);
      up = s1;
      dn = s1;
      up[i] += h;
      dn[i] -= h;
      ASSERT_NEAR(sz.gradient[i], (size_loss(up, b).value - size_loss(dn, b).value) / (2 * h), 1e-6);
    }
  }
}
