#pragma once

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <limits>
#include <span>
#include <vector>

#include "aerogs/error.hpp"
#include "aerogs/parallel.hpp"
#include "aerogs/render.hpp"
#include "aerogs/tensor.hpp"

namespace aerogs {

using PointSet = std::vector<Vec3>;

// Returned by psnr() when the images agree to MSE < 1e-12.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

inline double mean_squared_error(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw DomainError("image dimensions differ");
  if (a.pixels.empty()) throw DomainError("empty image");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) sum += squared_norm(a.pixels[i] - b.pixels[i]);
  return sum / (3.0 * static_cast<double>(a.pixels.size()));
}

// 10 log10(1 / MSE) for images with unit peak value.
inline double psnr(const Image& pred, const Image& ref) {
  const double mse = mean_squared_error(pred, ref);
  if (mse < 1e-12) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline double mean_nearest_sq(std::span<const Vec3> from, std::span<const Vec3> to, unsigned threads) {
  std::vector<double> nearest(from.size());
  parallel_chunks(from.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec3& b : to) best = std::min(best, squared_norm(from[i] - b));
      nearest[i] = best;
    }
  });
  double sum = 0.0;
  for (double d : nearest) sum += d;
  return sum / static_cast<double>(from.size());
}

}  // namespace detail

// Positions from a particle dump (6 columns) or a patch dump (10 columns);
// the first three columns are x y z either way.
inline PointSet read_point_set(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    for (std::string tok; fields >> tok;) ++columns;
    break;
  }
  if (columns != 6 && columns != 10)
    throw IoError("'" + path.string() + "' is neither a particle dump (6 columns) nor a patch dump (10 columns)");
  PointSet points;
  for (const auto& r : read_numeric_table(path, columns)) points.push_back({r[0], r[1], r[2]});
  return points;
}

// Symmetric Chamfer distance with squared distances, averaged per direction
// and summed:
//   CD = mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2
// The two terms are always added in the same order, so CD(A,B) == CD(B,A)
// bit for bit.
inline double chamfer(std::span<const Vec3> a, std::span<const Vec3> b, unsigned threads = 1) {
  if (a.empty() || b.empty()) throw DomainError("chamfer: point sets must be nonempty");
  double ab = detail::mean_nearest_sq(a, b, threads);
  double ba = detail::mean_nearest_sq(b, a, threads);
  if (ba < ab) std::swap(ab, ba);
  return ab + ba;
}

}  // namespace aerogs
