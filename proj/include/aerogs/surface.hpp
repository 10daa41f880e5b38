#pragma once

// Gaussian surface patches: oriented anisotropic Gaussians treated as flat
// surface elements with an area and a normal along their thinnest axis.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerogs/error.hpp"
#include "aerogs/io.hpp"
#include "aerogs/tensor.hpp"

namespace aerogs {

struct GaussianPatch {
  Vec3 position;                       // rest position X, m
  Vec3 scaling;                        // S1 >= S2 >= S3 > 0, m
  Mat3 rest_rotation = Mat3::identity();
  double opacity = 1.0;
  Vec3 color{1.0, 1.0, 1.0};           // intrinsic RGB
  Vec3 rest_normal{0.0, 0.0, 1.0};
  double area = 0.0;                   // m^2
};

struct PatchWorldState {
  Vec3 x;
  Mat3 cov;
  Vec3 n;
  Vec3 color;
};

inline double patch_area(const Vec3& s) {
  if (!(s[0] >= s[1] && s[1] >= s[2] && s[2] > 0.0))
    throw DomainError("patch_area: scalings must satisfy S1 >= S2 >= S3 > 0");
  return std::numbers::pi * s[0] * s[1];
}

// Column of the rest rotation belonging to the smallest scaling. Ties go to
// the later column, so equal S2 == S3 selects the third axis.
inline Vec3 rest_normal(const Mat3& rest_rotation, const Vec3& s) {
  std::size_t k = 2;
  for (std::size_t i = 2; i-- > 0;)
    if (s[i] < s[k]) k = i;
  return normalized(rest_rotation.col(k));
}

inline GaussianPatch make_patch(const Vec3& position, const Vec3& scaling, const Mat3& rotation, double opacity,
                                const Vec3& color) {
  if (!(opacity >= 0.0 && opacity <= 1.0)) throw DomainError("make_patch: opacity must lie in [0, 1]");
  GaussianPatch p;
  p.position = position;
  p.scaling = scaling;
  p.rest_rotation = rotation;
  p.opacity = opacity;
  p.color = color;
  p.area = patch_area(scaling);
  p.rest_normal = rest_normal(rotation, scaling);
  return p;
}

// Rest covariance R diag(S^2) Rᵀ.
inline Mat3 rest_covariance(const GaussianPatch& p) {
  const Vec3& s = p.scaling;
  return p.rest_rotation * Mat3::diag(s[0] * s[0], s[1] * s[1], s[2] * s[2]) * transpose(p.rest_rotation);
}

inline Mat3 symmetrized(const Mat3& a) { return (a + transpose(a)) * 0.5; }

// Moves a patch under the local affine map (F, phi(X)). Covariance goes as
// F A Fᵀ, the normal as F⁻ᵀ N renormalised. When `previous_normal` is given
// the result is flipped onto its hemisphere so normals do not jump sign
// between frames.
inline PatchWorldState transport_patch(const GaussianPatch& patch, const Mat3& f, const Vec3& phi_x,
                                       std::optional<Vec3> previous_normal = std::nullopt) {
  if (!(determinant(f) > 0.0)) throw DomainError("transport_patch: det(F) must be positive");
  PatchWorldState w;
  w.x = phi_x;
  w.cov = symmetrized(f * rest_covariance(patch) * transpose(f));
  const Vec3 n = inv_transpose(f) * patch.rest_normal;
  const double len = norm(n);
  if (!(len > 0.0) || !std::isfinite(len)) throw DomainError("transport_patch: degenerate normal");
  w.n = n / len;
  if (previous_normal && dot(w.n, *previous_normal) < 0.0) w.n = -w.n;
  w.color = patch.color;
  return w;
}

// Current area under F by Nanson's relation, A J |F⁻ᵀ N|.
inline double world_area(const GaussianPatch& patch, const Mat3& f) {
  return patch.area * determinant(f) * norm(inv_transpose(f) * patch.rest_normal);
}

// Indices of patches with opacity >= threshold, in input order.
inline std::vector<std::size_t> opacity_filter(std::span<const GaussianPatch> patches, double threshold) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < patches.size(); ++i)
    if (patches[i].opacity >= threshold) keep.push_back(i);
  return keep;
}

// Patch dump: '#' header lines, then "x y z nx ny nz r g b opacity" per
// patch. Colours are the intrinsic (unshaded) colours.
inline constexpr std::string_view kPatchDumpHeader =
    "# aerogs patch dump v1\n"
    "# columns: x y z nx ny nz r g b opacity  (m, unit normal, linear RGB in [0,1], [0,1])\n";

struct PatchRecord {
  Vec3 x;
  Vec3 n;
  Vec3 color;
  double opacity = 1.0;
};

inline void write_patch_dump(const std::filesystem::path& path, std::span<const PatchRecord> records) {
  std::string out(kPatchDumpHeader);
  for (const auto& r : records) {
    const double row[10] = {r.x[0], r.x[1], r.x[2], r.n[0], r.n[1], r.n[2], r.color[0], r.color[1], r.color[2], r.opacity};
    append_row(out, row);
  }
  write_file_atomic(path, out);
}

inline std::vector<PatchRecord> read_patch_dump(const std::filesystem::path& path) {
  std::vector<PatchRecord> out;
  for (const auto& r : read_numeric_table(path, 10))
    out.push_back({{r[0], r[1], r[2]}, {r[3], r[4], r[5]}, {r[6], r[7], r[8]}, r[9]});
  return out;
}

}  // namespace aerogs
