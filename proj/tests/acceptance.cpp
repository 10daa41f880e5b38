// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "aerogs/aero.hpp"
#include "aerogs/config.hpp"
#include "aerogs/constitutive.hpp"
#include "aerogs/losses.hpp"
#include "aerogs/metrics.hpp"
#include "aerogs/mpm.hpp"
#include "aerogs/render.hpp"
#include "aerogs/scene.hpp"
#include "aerogs/surface.hpp"
#include "test_util.hpp"

using namespace aerogs;
using aerogs::test::random_matrix;
using aerogs::test::random_rotation;
using aerogs::test::random_vec;
using aerogs::test::ScratchDir;

namespace {

const std::filesystem::path kPresets = AEROGS_TEST_PRESET_DIR;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Each check returns an empty string on success or a failure description.
using Check = std::function<std::string()>;

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

Mat3 random_deformation(std::mt19937_64& rng, double spread) {
  for (;;) {
    Mat3 f = Mat3::identity() + random_matrix(rng, -spread, spread);
    if (determinant(f) > 0.1) return f;
  }
}

std::string conservation() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  double worst_p = 0.0, worst_m = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    GridState grid({16, 16, 16}, 0.1, Vec3{}, 3);
    std::vector<ParticleState> ps(20);
    std::vector<Mat3> tau(ps.size(), Mat3::zero());
    Vec3 p_expected;
    double m_expected = 0.0;
    for (auto& p : ps) {
      p.x = random_vec(rng, 0.4, 1.1);
      p.v = random_vec(rng, -2.0, 2.0);
      p.c = random_matrix(rng, -20.0, 20.0);
      p.mass = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
      p.volume0 = 1e-3;
      p_expected += p.v * p.mass;
      m_expected += p.mass;
    }
    p2g(ps, grid, tau);
    Vec3 p_grid;
    double m_grid = 0.0;
    for (std::uint32_t i : grid.active_nodes()) {
      p_grid += grid.momentum(i);
      m_grid += grid.mass(i);
    }
    worst_p = std::max(worst_p, norm(p_grid - p_expected) / norm(p_expected));
    worst_m = std::max(worst_m, std::abs(m_grid - m_expected) / m_expected);
  }
  const double elapsed = seconds_since(t0);
  if (worst_p > 1e-12) return fmt("momentum relative error %.3g", worst_p);
  // Kernel weight products do not sum to one bit for bit; allow rounding.
  if (worst_m > 1e-14) return fmt("mass relative error %.3g", worst_m);
  if (elapsed > 5.0) return fmt("took %.2f s", elapsed);
  return {};
}

std::string ballistics() {
  GridState g({8, 8, 48}, 0.25, Vec3{-1.0, -1.0, -6.5}, 3);
  ParticleState p;
  p.mass = 1e-3;
  p.volume0 = 1e-3;
  StepConfig step;
  step.dt = 1e-3;
  step.substeps_per_frame = 1000;
  step.frame_dt = 1.0;
  MpmSolver solver(g, {p}, MaterialParams{}, step);
  solver.step_frame();
  const double drop = -solver.particles()[0].x[2];
  if (std::abs(drop - 4.9) > 0.049) return fmt("dropped %.6f m", drop);
  return {};
}

std::string constitutive() {
  const LameParams soft = lame_from_E_nu(3e3, 0.3);
  if (const double r = frobenius_norm(fixed_corotated_kirchhoff(Mat3::identity(), soft)); r > 1e-14)
    return fmt("tau(I) = %.3g", r);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const Mat3 f = random_deformation(rng, 0.3);
    const Mat3 q = random_rotation(rng);
    const Mat3 rhs = q * fixed_corotated_kirchhoff(f, soft) * transpose(q);
    const double err = frobenius_norm(fixed_corotated_kirchhoff(q * f, soft) - rhs);
    if (err > 1e-8 * std::max(1.0, frobenius_norm(rhs))) return fmt("equivariance error %.3g", err);
  }
  const LameParams sand = lame_from_E_nu(5e5, 0.3);
  const double alpha = drucker_prager_alpha(30.0);
  for (int i = 0; i < 1000; ++i) {
    const Mat3 z1 = drucker_prager_return_map(random_deformation(rng, 0.4), sand, alpha);
    const double err = frobenius_norm(drucker_prager_return_map(z1, sand, alpha) - z1);
    if (err > 1e-10) return fmt("return map not idempotent (%.3g)", err);
  }
  for (int i = 0; i < 100; ++i) {
    std::uniform_real_distribution<double> grow(1.01, 1.5);
    const Mat3 q = random_rotation(rng);
    const Mat3 z = drucker_prager_return_map(q * Mat3::diag(grow(rng), grow(rng), grow(rng)), sand, alpha);
    if (const double err = frobenius_norm(z - q); err > 1e-12) return fmt("expansion not projected to the tip (%.3g)", err);
  }
  return {};
}

std::string surface_transport() {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const GaussianPatch p = make_patch({}, {0.03, 0.02, 0.002}, random_rotation(rng), 1.0, {1, 1, 1});
    const PatchWorldState w = transport_patch(p, random_deformation(rng, 0.5), {});
    if (std::abs(norm(w.n) - 1.0) > 1e-10) return fmt("normal length %.17g", norm(w.n));
  }
  GaussianPatch p = make_patch({}, {0.02, 0.01, 0.001}, Mat3::identity(), 1.0, {1, 1, 1});
  p.rest_normal = {1, 0, 0};
  const Mat3 shear = Mat3::identity() + outer(Vec3{1, 0, 0}, Vec3{0, 1, 0});
  const double err = norm(transport_patch(p, shear, {}).n - Vec3{1, -1, 0} / std::sqrt(2.0));
  if (err > 1e-12) return fmt("shear example off by %.3g", err);
  if (patch_area({0.02, 0.01, 0.001}) != std::numbers::pi * 0.02 * 0.01) return "area is not pi S1 S2";
  return {};
}

std::string aerodynamics() {
  const Vec3 f = patch_force({1, 0, 0}, 1.0, {}, {2, 0, 0}, 1.0, {.drag = 0.5});
  if (std::abs(norm(f) - 1.0) > 1e-12) return fmt("headwind force %.17g N", norm(f));
  std::mt19937_64 rng(4);
  for (int i = 0; i < 100; ++i) {
    const Vec3 v = random_vec(rng);
    if (patch_force(normalized(random_vec(rng)), 0.01, v, v, 1.225, {.drag = 0.1, .friction = 0.3, .lift = 0.005}) !=
        Vec3{})
      return "nonzero force at zero relative velocity";
  }
  GridState grid({16, 16, 16}, 0.1, Vec3{}, 3);
  std::vector<GaussianPatch> patches;
  std::vector<PatchWorldState> world;
  std::vector<ParticleState> particles;
  for (std::size_t i = 0; i < 100; ++i) {
    const GaussianPatch g = make_patch(random_vec(rng, 0.5, 1.0), {0.02, 0.01, 0.001},
                                       axis_angle(normalized(random_vec(rng)), 1.0), 1.0, {1, 1, 1});
    patches.push_back(g);
    world.push_back(transport_patch(g, Mat3::identity(), g.position));
    ParticleState p;
    p.x = g.position;
    p.v = random_vec(rng, -0.2, 0.2);
    p.mass = 1e-3;
    p.volume0 = 1e-6;
    p.patch_index = i;
    particles.push_back(p);
  }
  const auto forces =
      apply_aero_to_grid(patches, world, particles, grid, {2.5, 0.5, 0}, 1.225, {.drag = 0.1, .friction = 0.3, .lift = 0.005});
  Vec3 expected, injected;
  for (const Vec3& x : forces) expected += x;
  for (std::uint32_t i : grid.active_nodes()) injected += grid.force(i);
  if (norm(injected - expected) > 1e-12 * norm(expected))
    return fmt("grid force differs from patch sum by %.3g", norm(injected - expected));
  return {};
}

std::string flow_statistics() {
  FlowField f;
  f.base_velocity = {2.5, 0.5, 0.0};
  f.sine_amplitude = {1.25, 0.0, 0.0};
  f.sine_frequency = std::numbers::pi;
  f.gaussian_sigma = 0.3;
  f.uniform_delta = 0.3;
  std::mt19937_64 rng(5);
  const double t = 0.3;
  constexpr int n = 100000;
  Vec3 sum, sum_sq;
  for (int i = 0; i < n; ++i) {
    const Vec3 v = sample_flow(f, t, rng);
    sum += v;
    for (std::size_t a = 0; a < 3; ++a) sum_sq[a] += v[a] * v[a];
  }
  const Vec3 expected = mean_flow(f, t);
  for (std::size_t a = 0; a < 3; ++a) {
    const double mean = sum[a] / n;
    const double sd = std::sqrt(sum_sq[a] / n - mean * mean);
    if (std::abs(mean - expected[a]) > 3.0 * sd / std::sqrt(double(n)))
      return fmt("axis mean %.6f vs %.6f", mean, expected[a]);
  }
  return {};
}

std::string losses() {
  const std::vector<std::array<double, 2>> sc{{1.5, 1.0}};
  const std::vector<double> half{0.5}, big{0.01};
  if (std::abs(anisotropy_loss(sc, 1.1).value - 0.4) > 1e-12) return "anisotropy example";
  if (std::abs(entropy_loss(half).value - 0.5 * std::numbers::ln2) > 1e-12) return "entropy example";
  if (std::abs(size_loss(big, 0.008).value - 0.002) > 1e-12) return "size example";

  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> s(0.5, 2.0), o(0.02, 0.98), l(0.001, 0.02);
  constexpr double h = 1e-6;
  auto close = [](double analytic, double fd) { return std::abs(analytic - fd) <= 1e-5 * std::max(std::abs(fd), 1e-3); };
  for (int k = 0; k < 100; ++k) {
    std::array<double, 2> p;
    do p = {s(rng), s(rng)};
    while (std::abs(p[0] / p[1] - 1.1) < 1e-3);
    double op = o(rng), s1;
    do s1 = l(rng);
    while (std::abs(s1 - 0.008) < 1e-5);

    const std::vector<std::array<double, 2>> v{p};
    const auto an = anisotropy_loss(v, 1.1);
    for (std::size_t c = 0; c < 2; ++c) {
      auto up = v, dn = v;
      up[0][c] += h;
      dn[0][c] -= h;
      const double fd = (anisotropy_loss(up, 1.1).value - anisotropy_loss(dn, 1.1).value) / (2 * h);
      if (!close(an.gradient[0][c], fd)) return fmt("anisotropy gradient %.9g vs %.9g", an.gradient[0][c], fd);
    }
    const std::vector<double> ov{op}, ou{op + h}, od{op - h};
    const double efd = (entropy_loss(ou).value - entropy_loss(od).value) / (2 * h);
    if (!close(entropy_loss(ov).gradient[0], efd)) return fmt("entropy gradient %.9g vs %.9g", entropy_loss(ov).gradient[0], efd);
    const std::vector<double> sv{s1}, su{s1 + h}, sd{s1 - h};
    const double sfd = (size_loss(su, 0.008).value - size_loss(sd, 0.008).value) / (2 * h);
    if (!close(size_loss(sv, 0.008).gradient[0], sfd)) return fmt("size gradient %.9g vs %.9g", size_loss(sv, 0.008).gradient[0], sfd);
  }
  return {};
}

ProjectedSplat centred(double depth, Vec3 color, double opacity) {
  ProjectedSplat s;
  s.u = 0.5;
  s.v = 0.5;
  s.depth = depth;
  s.color = color;
  s.opacity = opacity;
  return s;
}

std::string rendering() {
  const std::vector<ProjectedSplat> two{centred(1.0, {1, 0, 0}, 0.5), centred(2.0, {0, 1, 0}, 0.5)};
  const Vec3 c = composite(two, 1, 1).at(0, 0);
  if (norm(c - Vec3{0.5, 0.25, 0.0}) > 1e-12) return fmt("two-splat composite (%.17g, %.17g, ...)", c[0], c[1]);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ProjectedSplat> many(400);
  for (auto& p : many) {
    p.u = 64 * u(rng);
    p.v = 48 * u(rng);
    p.depth = 1 + u(rng);
    p.cov2d = {2 + 20 * u(rng), 3 * u(rng), 2 + 20 * u(rng)};
    p.color = {u(rng), u(rng), u(rng)};
    p.opacity = u(rng);
  }
  const Image ref = composite(many, 64, 48);
  for (int k = 0; k < 5; ++k) {
    std::shuffle(many.begin(), many.end(), rng);
    if (composite(many, 64, 48).pixels != ref.pixels) return "composite depends on input order";
  }
  for (auto& p : many) p.opacity = 0.0;
  if (composite(many, 64, 48).pixels != Image(64, 48).pixels) return "transparent scene is not background";
  return {};
}

std::string end_to_end() {
  SceneConfig c = load_preset("flag-pattern-2", kPresets);
  c.threads = 1;
  const auto t0 = Clock::now();
  Simulation sim(c, kPresets);
  std::vector<Vec3> start;
  for (const auto& p : sim.particles()) start.push_back(p.x);
  double min_det = 1.0, mean_dx = 0.0;
  for (int f = 0; f < c.frames; ++f) {
    const FrameDiagnostics d = sim.advance_frame();
    min_det = std::min(min_det, d.min_det_fe);
    sim.render();
    if (f + 1 == 50) {
      std::size_t n = 0;
      for (std::size_t i = 0; i < start.size(); ++i)
        if (sim.particles()[i].patch_index) {
          mean_dx += sim.particles()[i].x[0] - start[i][0];
          ++n;
        }
      mean_dx /= static_cast<double>(n);
    }
  }
  const double elapsed = seconds_since(t0);
  double pinned_move = 0.0;
  for (std::size_t i = 0; i < start.size(); ++i) {
    const auto& p = sim.particles()[i];
    for (std::size_t a = 0; a < 3; ++a)
      if (!std::isfinite(p.x[a]) || !std::isfinite(p.v[a])) return "non-finite particle state";
    if (p.is_pinned) pinned_move = std::max(pinned_move, norm(p.x - start[i]));
  }
  std::printf("      pattern-2: %d frames in %.1f s, mean +x shift after 50 frames %.4g m, min det(F) %.4f\n", c.frames,
              elapsed, mean_dx, min_det);
  if (!(min_det > 0.0)) return fmt("det(F) reached %.3g", min_det);
  if (!(mean_dx > 0.0)) return fmt("mean +x displacement %.3g m", mean_dx);
  if (pinned_move >= 1e-9) return fmt("pinned particle moved %.3g m", pinned_move);
  if (elapsed > 600.0) return fmt("run took %.1f s", elapsed);
  return {};
}

std::string surface_only_ablation() {
  for (bool surface_only : {true, false}) {
    SceneConfig c = load_preset("sand", kPresets);
    c.aero.surface_only = surface_only;
    Simulation sim(c, kPresets);
    sim.advance_frame();
    std::size_t interior = 0, pushed = 0;
    for (std::size_t i = 0; i < sim.particles().size(); ++i) {
      if (sim.particles()[i].is_surface) continue;
      ++interior;
      if (sim.last_forces()[i] != Vec3{}) ++pushed;
    }
    if (interior == 0) return "sand block has no interior particles";
    if (surface_only && pushed != 0) return fmt("%.0f interior particles received aero force", double(pushed));
    if (!surface_only && pushed == 0) return "all-Gaussian mode applied no interior force";
  }
  return {};
}

std::string metrics() {
  const Image a(8, 8, {0.5, 0.5, 0.5});
  if (psnr(a, a) != kPsnrIdentical) return "identical frames are not infinite PSNR";
  const Image b(8, 8, {0.6, 0.6, 0.6});
  if (std::abs(psnr(a, b) - 20.0) > 1e-9) return fmt("MSE 0.01 gives %.12f dB", psnr(a, b));
  const PointSet p{{0, 0, 0}}, q{{1, 0, 0}};
  if (chamfer(p, q) != 2.0) return fmt("one-point chamfer %.17g", chamfer(p, q));
  std::mt19937_64 rng(8);
  double prev = kPsnrIdentical;
  for (double sigma : {0.01, 0.05, 0.1}) {
    std::normal_distribution<double> n(0.0, sigma);
    Image noisy = a;
    for (Vec3& px : noisy.pixels)
      for (std::size_t ch = 0; ch < 3; ++ch) px[ch] += n(rng);
    const double v = psnr(noisy, a);
    if (!(v < prev)) return "PSNR not monotone in noise";
    prev = v;
  }
  PointSet cloud(300);
  for (auto& x : cloud) x = random_vec(rng);
  double prev_cd = 0.0;
  for (double sigma : {0.01, 0.05, 0.1}) {
    std::normal_distribution<double> n(0.0, sigma);
    PointSet moved = cloud;
    for (auto& x : moved) x += Vec3{n(rng), n(rng), n(rng)};
    const double cd = chamfer(moved, cloud);
    if (!(cd > prev_cd)) return "Chamfer not monotone in noise";
    prev_cd = cd;
  }
  return {};
}

std::string determinism() {
  ScratchDir dir("determinism");
  SceneConfig c = load_preset("flag-pattern-2", kPresets);
  c.frames = 10;
  c.threads = 1;
  c.dump_particles = true;
  for (const char* run : {"a", "b"}) {
    c.output_dir = (dir.path() / run).string();
    run_simulation(c, kPresets);
  }
  for (int f = 0; f < c.frames; ++f) {
    const std::string name = frame_name(static_cast<std::size_t>(f));
    if (read_file(dir.path() / "a" / name) != read_file(dir.path() / "b" / name)) return "frame " + name + " differs";
  }
  return {};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Check>> criteria{
      {"conservation", conservation},
      {"ballistics", ballistics},
      {"constitutive", constitutive},
      {"surface transport", surface_transport},
      {"aerodynamics", aerodynamics},
      {"flow statistics", flow_statistics},
      {"losses", losses},
      {"rendering", rendering},
      {"end-to-end pattern 2", end_to_end},
      {"surface-only ablation", surface_only_ablation},
      {"metrics", metrics},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string why;
    try {
      why = criteria[i].second();
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    if (why.empty()) {
      std::printf("PASS %2zu %s\n", i + 1, criteria[i].first);
    } else {
      std::printf("FAIL %2zu %s: %s\n", i + 1, criteria[i].first, why.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
