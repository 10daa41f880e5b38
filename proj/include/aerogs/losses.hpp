#pragma once

// Shape regularisers for surface-aligned Gaussians, each returning its value
// and analytic gradient. Means are taken over the n inputs.

#include <array>
#include <cmath>
#include <span>
#include <vector>

namespace aerogs {

struct LossParams {
  double anisotropy_cap = 1.1;  // a
  double size_cap = 0.008;      // b, m
  double w_anisotropy = 10.0;   // lambda_1
  double w_entropy = 0.01;      // lambda_2
  double w_size = 0.01;         // lambda_3
};

template <typename Grad>
struct LossResult {
  double value = 0.0;
  std::vector<Grad> gradient;
};

// mean max(S1/S2 - a, 0) over (S1, S2) pairs.
inline LossResult<std::array<double, 2>> anisotropy_loss(std::span<const std::array<double, 2>> scalings, double a) {
  LossResult<std::array<double, 2>> r;
  r.gradient.assign(scalings.size(), {0.0, 0.0});
  if (scalings.empty()) return r;
  const double inv_n = 1.0 / static_cast<double>(scalings.size());
  for (std::size_t i = 0; i < scalings.size(); ++i) {
    const auto [s1, s2] = scalings[i];
    const double h = s1 / s2 - a;
    if (h > 0.0) {
      r.value += h;
      r.gradient[i] = {inv_n / s2, -inv_n * s1 / (s2 * s2)};
    }
  }
  r.value *= inv_n;
  return r;
}

// -(1/n) sum sigma ln sigma, with 0 ln 0 = 0. At sigma = 0 the gradient is
// reported as 0.
inline LossResult<double> entropy_loss(std::span<const double> opacities) {
  LossResult<double> r;
  r.gradient.assign(opacities.size(), 0.0);
  if (opacities.empty()) return r;
  const double inv_n = 1.0 / static_cast<double>(opacities.size());
  for (std::size_t i = 0; i < opacities.size(); ++i) {
    const double s = opacities[i];
    if (s > 0.0) {
      r.value -= s * std::log(s);
      r.gradient[i] = -(1.0 + std::log(s)) * inv_n;
    }
  }
  r.value *= inv_n;
  return r;
}

// mean max(S1 - b, 0).
inline LossResult<double> size_loss(std::span<const double> s1, double b) {
  LossResult<double> r;
  r.gradient.assign(s1.size(), 0.0);
  if (s1.empty()) return r;
  const double inv_n = 1.0 / static_cast<double>(s1.size());
  for (std::size_t i = 0; i < s1.size(); ++i) {
    const double h = s1[i] - b;
    if (h > 0.0) {
      r.value += h;
      r.gradient[i] = inv_n;
    }
  }
  r.value *= inv_n;
  return r;
}

inline double total_regularizer(double anisotropy, double entropy, double size, const LossParams& p = {}) {
  return p.w_anisotropy * anisotropy + p.w_entropy * entropy + p.w_size * size;
}

// Evaluates all three losses on a set of Gaussians.
struct RegularizerInputs {
  std::span<const std::array<double, 2>> scalings;  // (S1, S2)
  std::span<const double> opacities;
  std::span<const double> largest_scalings;          // S1
};

inline double total_regularizer(const RegularizerInputs& in, const LossParams& p = {}) {
  return total_regularizer(anisotropy_loss(in.scalings, p.anisotropy_cap).value, entropy_loss(in.opacities).value,
                           size_loss(in.largest_scalings, p.size_cap).value, p);
}

}  // namespace aerogs
