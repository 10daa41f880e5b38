#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <string_view>

#include "aerogs/error.hpp"
#include "aerogs/tensor.hpp"

namespace aerogs {

enum class ConstitutiveModel { FixedCorotated, DruckerPrager };

inline std::string_view to_string(ConstitutiveModel m) {
  return m == ConstitutiveModel::FixedCorotated ? "fixed_corotated" : "drucker_prager";
}

struct MaterialParams {
  ConstitutiveModel model = ConstitutiveModel::FixedCorotated;
  double youngs_modulus = 1e4;  // Pa
  double poisson_ratio = 0.3;
  double density = 100.0;        // kg/m^3
  double friction_angle = 30.0;  // degrees, Drucker-Prager only

  friend bool operator==(const MaterialParams&, const MaterialParams&) = default;
};

inline void validate(const MaterialParams& p) {
  if (!(p.youngs_modulus > 0.0)) throw DomainError("material: Young's modulus must be positive");
  if (!(p.poisson_ratio >= 0.0 && p.poisson_ratio < 0.5))
    throw DomainError("material: Poisson ratio must lie in [0, 0.5)");
  if (!(p.density > 0.0)) throw DomainError("material: density must be positive");
  if (p.model == ConstitutiveModel::DruckerPrager && !(p.friction_angle > 0.0 && p.friction_angle < 90.0))
    throw DomainError("material: friction angle must lie in (0, 90) degrees");
}

struct LameParams {
  double mu = 0.0;
  double lambda = 0.0;
};

inline LameParams lame_from_E_nu(double youngs_modulus, double poisson_ratio) {
  if (!(youngs_modulus > 0.0)) throw DomainError("lame_from_E_nu: E must be positive");
  if (!(poisson_ratio >= 0.0 && poisson_ratio < 0.5))
    throw DomainError("lame_from_E_nu: nu must lie in [0, 0.5)");
  return {youngs_modulus / (2.0 * (1.0 + poisson_ratio)),
          youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio))};
}

inline LameParams lame_from(const MaterialParams& p) {
  return lame_from_E_nu(p.youngs_modulus, p.poisson_ratio);
}

// Kirchhoff stress of fixed corotated elasticity:
//   tau = 2 mu (F - R) Fᵀ + lambda (J - 1) J I
inline Mat3 fixed_corotated_kirchhoff(const Mat3& fe, const LameParams& lame) {
  const double j = determinant(fe);
  if (!(j > 0.0)) throw DomainError("fixed_corotated_kirchhoff: det(F_E) must be positive");
  const Mat3 r = polar_rotation(fe);
  return 2.0 * lame.mu * (fe - r) * transpose(fe) + Mat3::identity() * (lame.lambda * (j - 1.0) * j);
}

// Friction coefficient of the Drucker-Prager cone, friction angle in degrees.
inline double drucker_prager_alpha(double friction_angle_deg) {
  const double s = std::sin(friction_angle_deg * std::numbers::pi / 180.0);
  return std::sqrt(2.0 / 3.0) * 2.0 * s / (3.0 - s);
}

inline constexpr double kSingularValueFloor = 1e-6;

// Projects F_E onto the Drucker-Prager yield surface in log-strain space.
// Singular values must already be clamped above zero; callers use
// clamp_singular_values() first.
inline Mat3 drucker_prager_return_map(const Mat3& fe, const LameParams& lame, double alpha) {
  if (!(determinant(fe) > 0.0)) throw DomainError("drucker_prager_return_map: det(F_E) must be positive");
  const Svd3 d = svd3(fe);
  for (std::size_t i = 0; i < 3; ++i)
    if (!(d.sigma[i] > 0.0)) throw DomainError("drucker_prager_return_map: zero singular value");

  constexpr double dim = 3.0;
  const Vec3 eps{std::log(d.sigma[0]), std::log(d.sigma[1]), std::log(d.sigma[2])};
  const double tr = eps[0] + eps[1] + eps[2];
  if (tr > 0.0) return d.u * transpose(d.v);  // Σ -> I

  const Vec3 dev = eps - Vec3{1, 1, 1} * (tr / dim);
  const double dev_norm = norm(dev);
  const double dgamma = dev_norm + alpha * (dim * lame.lambda + 2.0 * lame.mu) * tr / (2.0 * lame.mu);
  if (dgamma <= 0.0 || dev_norm == 0.0) return fe;

  const Vec3 h = eps - dev * (dgamma / dev_norm);
  return d.u * Mat3::diag(std::exp(h[0]), std::exp(h[1]), std::exp(h[2])) * transpose(d.v);
}

// Raises singular values below `floor` to `floor` (no-op when none are).
inline Mat3 clamp_singular_values(const Mat3& fe, double floor = kSingularValueFloor) {
  const Svd3 d = svd3(fe);
  if (d.sigma[2] >= floor) return fe;
  Vec3 s = d.sigma;
  for (std::size_t i = 0; i < 3; ++i) s[i] = std::max(s[i], floor);
  return d.u * Mat3::diag(s) * transpose(d.v);
}

}  // namespace aerogs
