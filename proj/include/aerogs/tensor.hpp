#pragma once

// Small fixed-size linear algebra: Vec3, Mat3 and the 3x3 decompositions the
// solver needs (SVD, polar rotation, inverse transpose).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <utility>

#include "aerogs/error.hpp"

namespace aerogs {

struct Vec3 {
  std::array<double, 3> v{0.0, 0.0, 0.0};

  constexpr Vec3() = default;
  constexpr Vec3(double x, double y, double z) : v{x, y, z} {}

  constexpr double& operator[](std::size_t i) { return v[i]; }
  constexpr double operator[](std::size_t i) const { return v[i]; }
  constexpr double x() const { return v[0]; }
  constexpr double y() const { return v[1]; }
  constexpr double z() const { return v[2]; }

  constexpr Vec3& operator+=(const Vec3& o) {
    for (std::size_t i = 0; i < 3; ++i) v[i] += o.v[i];
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    for (std::size_t i = 0; i < 3; ++i) v[i] -= o.v[i];
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    for (auto& e : v) e *= s;
    return *this;
  }

  friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a[0], -a[1], -a[2]}; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator/(const Vec3& a, double s) { return {a[0] / s, a[1] / s, a[2] / s}; }

constexpr double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
constexpr double squared_norm(const Vec3& a) { return dot(a, a); }
inline Vec3 normalized(const Vec3& a) { return a / norm(a); }
inline bool is_finite(const Vec3& a) {
  return std::isfinite(a[0]) && std::isfinite(a[1]) && std::isfinite(a[2]);
}

inline std::ostream& operator<<(std::ostream& os, const Vec3& a) {
  return os << '(' << a[0] << ", " << a[1] << ", " << a[2] << ')';
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  constexpr Mat3() = default;
  constexpr Mat3(double a00, double a01, double a02, double a10, double a11, double a12, double a20,
                 double a21, double a22)
      : m{a00, a01, a02, a10, a11, a12, a20, a21, a22} {}

  static constexpr Mat3 identity() { return {1, 0, 0, 0, 1, 0, 0, 0, 1}; }
  static constexpr Mat3 zero() { return {}; }
  static constexpr Mat3 diag(double a, double b, double c) { return {a, 0, 0, 0, b, 0, 0, 0, c}; }
  static constexpr Mat3 diag(const Vec3& d) { return diag(d[0], d[1], d[2]); }
  static constexpr Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    return {c0[0], c1[0], c2[0], c0[1], c1[1], c2[1], c0[2], c1[2], c2[2]};
  }

  constexpr double& operator()(std::size_t r, std::size_t c) { return m[3 * r + c]; }
  constexpr double operator()(std::size_t r, std::size_t c) const { return m[3 * r + c]; }

  constexpr Vec3 col(std::size_t c) const { return {m[c], m[3 + c], m[6 + c]}; }
  constexpr Vec3 row(std::size_t r) const { return {m[3 * r], m[3 * r + 1], m[3 * r + 2]}; }
  constexpr void set_col(std::size_t c, const Vec3& v) {
    m[c] = v[0];
    m[3 + c] = v[1];
    m[6 + c] = v[2];
  }

  constexpr Mat3& operator+=(const Mat3& o) {
    for (std::size_t i = 0; i < 9; ++i) m[i] += o.m[i];
    return *this;
  }
  constexpr Mat3& operator-=(const Mat3& o) {
    for (std::size_t i = 0; i < 9; ++i) m[i] -= o.m[i];
    return *this;
  }
  constexpr Mat3& operator*=(double s) {
    for (auto& e : m) e *= s;
    return *this;
  }

  friend constexpr bool operator==(const Mat3&, const Mat3&) = default;
};

constexpr Mat3 operator+(Mat3 a, const Mat3& b) { return a += b; }
constexpr Mat3 operator-(Mat3 a, const Mat3& b) { return a -= b; }
constexpr Mat3 operator*(Mat3 a, double s) { return a *= s; }
constexpr Mat3 operator*(double s, Mat3 a) { return a *= s; }

constexpr Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return r;
}

constexpr Vec3 operator*(const Mat3& a, const Vec3& x) {
  return {a(0, 0) * x[0] + a(0, 1) * x[1] + a(0, 2) * x[2],
          a(1, 0) * x[0] + a(1, 1) * x[1] + a(1, 2) * x[2],
          a(2, 0) * x[0] + a(2, 1) * x[1] + a(2, 2) * x[2]};
}

constexpr Mat3 transpose(const Mat3& a) {
  return {a(0, 0), a(1, 0), a(2, 0), a(0, 1), a(1, 1), a(2, 1), a(0, 2), a(1, 2), a(2, 2)};
}

// a bᵀ
constexpr Mat3 outer(const Vec3& a, const Vec3& b) {
  return {a[0] * b[0], a[0] * b[1], a[0] * b[2], a[1] * b[0], a[1] * b[1],
          a[1] * b[2], a[2] * b[0], a[2] * b[1], a[2] * b[2]};
}

constexpr double trace(const Mat3& a) { return a(0, 0) + a(1, 1) + a(2, 2); }

constexpr double determinant(const Mat3& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

inline double frobenius_norm(const Mat3& a) {
  double s = 0.0;
  for (double e : a.m) s += e * e;
  return std::sqrt(s);
}

inline bool is_finite(const Mat3& a) {
  return std::all_of(a.m.begin(), a.m.end(), [](double e) { return std::isfinite(e); });
}

inline std::ostream& operator<<(std::ostream& os, const Mat3& a) {
  os << '[';
  for (std::size_t r = 0; r < 3; ++r) os << (r ? "; " : "") << a(r, 0) << ' ' << a(r, 1) << ' ' << a(r, 2);
  return os << ']';
}

// Cofactor matrix: cof(M) = det(M) M⁻ᵀ.
constexpr Mat3 cofactor(const Mat3& a) {
  return {a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1), a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2),
          a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0), a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2),
          a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0), a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1),
          a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1), a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2),
          a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)};
}

inline constexpr double kDefaultSingularFloor = 1e-12;

// M⁻ᵀ via the adjugate. Throws DomainError when |det M| <= floor.
inline Mat3 inv_transpose(const Mat3& a, double singular_floor = kDefaultSingularFloor) {
  const double det = determinant(a);
  if (!(std::abs(det) > singular_floor)) throw DomainError("inv_transpose: singular matrix");
  return cofactor(a) * (1.0 / det);
}

inline Mat3 inverse(const Mat3& a, double singular_floor = kDefaultSingularFloor) {
  return transpose(inv_transpose(a, singular_floor));
}

struct Svd3 {
  Mat3 u;
  Vec3 sigma;
  Mat3 v;
};

namespace detail {

inline Vec3 any_orthogonal(const Vec3& a) {
  // Cross with the axis least aligned with a.
  std::size_t k = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(a[i]) < std::abs(a[k])) k = i;
  Vec3 e;
  e[k] = 1.0;
  return normalized(cross(a, e));
}

}  // namespace detail

// One-sided (Hestenes) Jacobi SVD. Returns proper rotations U, V
// (det = +1) and singular values sorted descending; a negative determinant
// of M shows up as a negative smallest singular value.
inline Svd3 svd3(const Mat3& input) {
  Mat3 a = input;
  Mat3 v = Mat3::identity();
  constexpr double eps = 1e-15;
  constexpr std::pair<std::size_t, std::size_t> pairs[3] = {{0, 1}, {0, 2}, {1, 2}};

  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (auto [p, q] : pairs) {
      const Vec3 ap = a.col(p), aq = a.col(q);
      const double alpha = dot(ap, ap), beta = dot(aq, aq), gamma = dot(ap, aq);
      if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
      rotated = true;
      const double zeta = (beta - alpha) / (2.0 * gamma);
      const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
      const double c = 1.0 / std::sqrt(1.0 + t * t);
      const double s = c * t;
      a.set_col(p, c * ap - s * aq);
      a.set_col(q, s * ap + c * aq);
      const Vec3 vp = v.col(p), vq = v.col(q);
      v.set_col(p, c * vp - s * vq);
      v.set_col(q, s * vp + c * vq);
    }
    if (!rotated) break;
  }

  std::array<std::size_t, 3> order{0, 1, 2};
  Vec3 s{norm(a.col(0)), norm(a.col(1)), norm(a.col(2))};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return s[i] > s[j]; });

  Svd3 out;
  Mat3 us;
  for (std::size_t k = 0; k < 3; ++k) {
    out.sigma[k] = s[order[k]];
    out.v.set_col(k, v.col(order[k]));
    us.set_col(k, a.col(order[k]));
  }

  // Columns with negligible norm carry no information; complete U to an
  // orthonormal basis instead.
  const double tiny = std::max(out.sigma[0], 1.0) * 1e-300;
  const double rank_tol = out.sigma[0] * 1e-13;
  std::size_t rank = 0;
  for (std::size_t k = 0; k < 3; ++k)
    if (out.sigma[k] > rank_tol && out.sigma[k] > tiny) rank = k + 1;
  for (std::size_t k = 0; k < rank; ++k) out.u.set_col(k, us.col(k) / out.sigma[k]);
  if (rank == 0) {
    out.u = Mat3::identity();
  } else if (rank == 1) {
    const Vec3 u1 = detail::any_orthogonal(out.u.col(0));
    out.u.set_col(1, u1);
    out.u.set_col(2, cross(out.u.col(0), u1));
  } else if (rank == 2) {
    out.u.set_col(2, cross(out.u.col(0), out.u.col(1)));
  }

  if (determinant(out.v) < 0.0) {
    out.v.set_col(2, -out.v.col(2));
    out.u.set_col(2, -out.u.col(2));
  }
  if (determinant(out.u) < 0.0) {
    out.u.set_col(2, -out.u.col(2));
    out.sigma[2] = -out.sigma[2];
  }
  if (out.sigma[2] == 0.0) out.sigma[2] = 0.0;  // drop a negative zero
  return out;
}

// Rotation part R = U Vᵀ of the polar decomposition F = R S.
inline Mat3 polar_rotation(const Mat3& f) {
  if (!(determinant(f) > 0.0)) throw DomainError("polar_rotation: det(F) must be positive");
  const Svd3 d = svd3(f);
  return d.u * transpose(d.v);
}

// Rotation of `angle` radians about unit `axis` (Rodrigues).
inline Mat3 axis_angle(const Vec3& axis, double angle) {
  const Vec3 k = normalized(axis);
  const double c = std::cos(angle), s = std::sin(angle);
  const Mat3 kx{0, -k[2], k[1], k[2], 0, -k[0], -k[1], k[0], 0};
  return Mat3::identity() + s * kx + (1.0 - c) * (kx * kx);
}

}  // namespace aerogs
