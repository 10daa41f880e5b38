#pragma once

// CPU splat rasteriser: per-patch shading, pinhole projection of Gaussian
// footprints, and front-to-back alpha compositing onto a black background.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "aerogs/error.hpp"
#include "aerogs/io.hpp"
#include "aerogs/parallel.hpp"
#include "aerogs/surface.hpp"
#include "aerogs/tensor.hpp"

namespace aerogs {

struct Camera {
  Vec3 position{0.0, -3.0, 0.0};
  Vec3 look_at{0.0, 0.0, 0.0};
  Vec3 up{0.0, 0.0, 1.0};
  double fov_y = 45.0;  // degrees
  int width = 640;
  int height = 360;

  friend bool operator==(const Camera&, const Camera&) = default;
};

inline void validate(const Camera& c) {
  if (c.width <= 0 || c.height <= 0) throw DomainError("camera: image size must be positive");
  if (!(c.fov_y > 0.0 && c.fov_y < 180.0)) throw DomainError("camera: field of view must lie in (0, 180)");
  const Vec3 f = c.look_at - c.position;
  if (!(norm(f) > 0.0) || !(norm(cross(f, c.up)) > 0.0)) throw DomainError("camera: degenerate view basis");
}

// Focal length in pixels.
inline double focal_length(const Camera& c) {
  return 0.5 * c.height / std::tan(0.5 * c.fov_y * std::numbers::pi / 180.0);
}

// Rows: right, image-down, forward.
inline Mat3 view_rotation(const Camera& c) {
  const Vec3 f = normalized(c.look_at - c.position);
  const Vec3 r = normalized(cross(f, c.up));
  const Vec3 d = cross(f, r);
  return {r[0], r[1], r[2], d[0], d[1], d[2], f[0], f[1], f[2]};
}

enum class ShadingMode { Diffuse, Phong };

struct LightConfig {
  Vec3 direction{0.0, -1.0, 0.0};  // unit, from surface towards the light
  double ambient = 0.1;            // k_a
  double diffuse = 0.8;            // k_d
  double specular = 0.1;           // k_s
  double shininess = 16.0;         // alpha_s
  double ambient_radiance = 1.0;   // L_a
  double incident_radiance = 1.0;  // L_i

  friend bool operator==(const LightConfig&, const LightConfig&) = default;
};

inline void validate(const LightConfig& l) {
  if (std::abs(norm(l.direction) - 1.0) > 1e-12) throw DomainError("light: direction must be a unit vector");
  if (l.ambient < 0 || l.diffuse < 0 || l.specular < 0 || l.shininess < 0 || l.ambient_radiance < 0 ||
      l.incident_radiance < 0)
    throw DomainError("light: coefficients must be non-negative");
}

inline double diffuse_shade(const Vec3& n, const Vec3& light) { return std::max(0.0, dot(n, light)); }

// Mirror of the incident direction about n: 2 (n . wi) n - wi.
inline Vec3 reflect(const Vec3& n, const Vec3& wi) { return n * (2.0 * dot(n, wi)) - wi; }

inline Vec3 shade_patch(const Vec3& n, const Vec3& intrinsic_color, ShadingMode mode, const LightConfig& light,
                        const Vec3& view_dir) {
  if (mode == ShadingMode::Diffuse) return intrinsic_color * diffuse_shade(n, light.direction);
  const Vec3& wi = light.direction;
  const double n_dot_l = std::max(0.0, dot(n, wi));
  const double r_dot_v = std::max(0.0, dot(reflect(n, wi), view_dir));
  const double ambient = light.ambient * light.ambient_radiance;
  const double spec = light.specular * std::pow(r_dot_v, light.shininess);
  return Vec3{ambient, ambient, ambient} + intrinsic_color * (light.diffuse * n_dot_l * light.incident_radiance) +
         Vec3{spec, spec, spec};
}

// A splat in image space. cov2d holds (xx, xy, yy) in px^2.
struct ProjectedSplat {
  double u = 0.0, v = 0.0;
  std::array<double, 3> cov2d{1.0, 0.0, 1.0};
  double depth = 0.0;
  Vec3 color;
  double opacity = 1.0;
};

struct RenderOptions {
  double near_plane = 0.01;        // m
  double cov_floor = 0.3;          // px^2 added to both diagonal entries
  double max_alpha = 0.99;
  double transmittance_cutoff = 1e-4;
  unsigned threads = 1;
};

inline double max_eigenvalue(const std::array<double, 3>& c) {
  const double mid = 0.5 * (c[0] + c[2]);
  const double rad = std::sqrt(std::max(0.0, 0.25 * (c[0] - c[2]) * (c[0] - c[2]) + c[1] * c[1]));
  return mid + rad;
}

// Pinhole projection with the footprint linearised at the centre. Returns
// nullopt when the patch is behind the near plane or its 3-sigma footprint
// misses the image.
inline std::optional<ProjectedSplat> project_patch(const Vec3& x, const Mat3& cov, const Camera& cam,
                                                   const RenderOptions& opt = {}) {
  const Mat3 w = view_rotation(cam);
  const Vec3 pc = w * (x - cam.position);
  const double z = pc[2];
  if (!(z > opt.near_plane)) return std::nullopt;
  const double f = focal_length(cam);
  ProjectedSplat s;
  s.u = 0.5 * cam.width + f * pc[0] / z;
  s.v = 0.5 * cam.height + f * pc[1] / z;
  s.depth = z;
  const Mat3 jac{f / z, 0.0, -f * pc[0] / (z * z), 0.0, f / z, -f * pc[1] / (z * z), 0.0, 0.0, 0.0};
  const Mat3 t = jac * w;
  const Mat3 c2 = t * cov * transpose(t);
  s.cov2d = {c2(0, 0) + opt.cov_floor, 0.5 * (c2(0, 1) + c2(1, 0)), c2(1, 1) + opt.cov_floor};
  const double r = 3.0 * std::sqrt(max_eigenvalue(s.cov2d));
  if (s.u + r < 0.0 || s.u - r > cam.width || s.v + r < 0.0 || s.v - r > cam.height) return std::nullopt;
  return s;
}

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Vec3> pixels;

  Image() = default;
  Image(int w, int h, Vec3 fill = {}) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}
  Vec3& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  const Vec3& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline auto splat_key(const ProjectedSplat& s) {
  return std::tie(s.depth, s.u, s.v, s.cov2d, s.color.v, s.opacity);
}

}  // namespace detail

// Front-to-back compositing C = sum c_i a_i prod_{j<i} (1 - a_j) in
// increasing depth. Input order does not matter: splats are sorted on a
// full lexicographic key. Pixel centres sit at half-integer coordinates.
inline Image composite(std::span<const ProjectedSplat> splats, int width, int height, const RenderOptions& opt = {}) {
  if (width <= 0 || height <= 0) throw DomainError("composite: image size must be positive");
  std::vector<std::size_t> order(splats.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return detail::splat_key(splats[a]) < detail::splat_key(splats[b]); });

  struct Prepared {
    double u, v, ia, ib, ic;  // inverse covariance (conic)
    int x0, x1, y0, y1;
    Vec3 color;
    double opacity;
  };
  std::vector<Prepared> prep;
  prep.reserve(order.size());
  for (std::size_t i : order) {
    const ProjectedSplat& s = splats[i];
    if (!(s.opacity > 0.0)) continue;
    const double det = s.cov2d[0] * s.cov2d[2] - s.cov2d[1] * s.cov2d[1];
    if (!(det > 0.0)) continue;
    const double r = 3.0 * std::sqrt(max_eigenvalue(s.cov2d));
    Prepared p;
    p.u = s.u;
    p.v = s.v;
    p.ia = s.cov2d[2] / det;
    p.ib = -s.cov2d[1] / det;
    p.ic = s.cov2d[0] / det;
    p.x0 = std::max(0, static_cast<int>(std::floor(s.u - r)));
    p.x1 = std::min(width - 1, static_cast<int>(std::ceil(s.u + r)));
    p.y0 = std::max(0, static_cast<int>(std::floor(s.v - r)));
    p.y1 = std::min(height - 1, static_cast<int>(std::ceil(s.v + r)));
    if (p.x0 > p.x1 || p.y0 > p.y1) continue;
    p.color = s.color;
    p.opacity = s.opacity;
    prep.push_back(p);
  }

  Image img(width, height);
  std::vector<double> trans(static_cast<std::size_t>(width) * height, 1.0);
  parallel_chunks(static_cast<std::size_t>(height), opt.threads, [&](std::size_t, std::size_t row0, std::size_t row1) {
    for (const Prepared& p : prep) {
      const int y0 = std::max<int>(p.y0, static_cast<int>(row0));
      const int y1 = std::min<int>(p.y1, static_cast<int>(row1) - 1);
      for (int y = y0; y <= y1; ++y) {
        const double dy = y + 0.5 - p.v;
        for (int x = p.x0; x <= p.x1; ++x) {
          const std::size_t idx = static_cast<std::size_t>(y) * width + x;
          double& t = trans[idx];
          if (t < opt.transmittance_cutoff) continue;
          const double dx = x + 0.5 - p.u;
          const double power = -0.5 * (p.ia * dx * dx + 2.0 * p.ib * dx * dy + p.ic * dy * dy);
          const double alpha = std::min(opt.max_alpha, p.opacity * std::exp(power));
          if (!(alpha > 0.0)) continue;
          img.pixels[idx] += p.color * (alpha * t);
          t *= 1.0 - alpha;
        }
      }
    }
  });
  return img;
}

// A patch ready to draw: world centre/covariance, shaded colour, opacity.
struct RenderPatch {
  Vec3 x;
  Mat3 cov;
  Vec3 color;
  double opacity = 1.0;
};

inline Image render_patches(std::span<const RenderPatch> patches, const Camera& cam, const RenderOptions& opt = {}) {
  std::vector<ProjectedSplat> splats;
  splats.reserve(patches.size());
  for (const auto& p : patches) {
    if (auto s = project_patch(p.x, p.cov, cam, opt)) {
      s->color = p.color;
      s->opacity = p.opacity;
      splats.push_back(*s);
    }
  }
  return composite(splats, cam.width, cam.height, opt);
}

inline std::uint8_t to_byte(double c) {
  const double clamped = std::clamp(std::isfinite(c) ? c : 0.0, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(255.0 * clamped));
}

inline std::string encode_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.reserve(out.size() + img.pixels.size() * 3);
  for (const Vec3& p : img.pixels)
    for (std::size_t c = 0; c < 3; ++c) out += static_cast<char>(to_byte(p[c]));
  return out;
}

// Binary P6 pixmap, channels mapped by round(255 clamp(c, 0, 1)).
inline void write_frame(const Image& img, const std::filesystem::path& path) {
  if (img.width <= 0 || img.height <= 0 || img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
    throw DomainError("write_frame: invalid image");
  write_file_atomic(path, encode_ppm(img));
}

// Reads a binary P6 pixmap with maxval 255 into [0,1] channels.
inline Image read_ppm(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < data.size()) {
      if (data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(data[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (next_token() != "P6") throw IoError("'" + path.string() + "' is not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError("'" + path.string() + "': malformed PPM header");
  }
  if (w <= 0 || h <= 0 || maxval != 255) throw IoError("'" + path.string() + "': unsupported PPM header");
  ++pos;  // single whitespace before the raster
  const std::size_t need = static_cast<std::size_t>(w) * h * 3;
  if (data.size() < pos + need) throw IoError("'" + path.string() + "': truncated PPM raster");
  Image img(w, h);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    for (std::size_t c = 0; c < 3; ++c)
      img.pixels[i][c] = static_cast<unsigned char>(data[pos + 3 * i + c]) / 255.0;
  return img;
}

inline std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.ppm", index);
  return buf;
}

// Sidecar describing the frame sequence for downstream video tools.
inline void write_frame_metadata(const std::filesystem::path& dir, std::size_t frame_count, double fps,
                                 double frame_dt) {
  std::string out = "# aerogs frame sequence\n";
  out += "frames = " + std::to_string(frame_count) + "\n";
  out += "fps = " + format_double(fps) + "\n";
  out += "frame_dt = " + format_double(frame_dt) + " s\n";
  out += "pattern = frame_%04d.ppm\n";
  write_file_atomic(dir / "frames.txt", out);
}

}  // namespace aerogs
