#pragma once

// Incident-flow sampling and the per-patch dynamic-pressure force
//   f = 1/2 rho |v_rel|^2 A (C_D n + C_F d_t + C_L d x n)
// coupled into the MPM grid through the particle kernel stencil.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "aerogs/error.hpp"
#include "aerogs/mpm.hpp"
#include "aerogs/surface.hpp"
#include "aerogs/tensor.hpp"

namespace aerogs {

// Base velocity replaced at `time` (a mid-run change of wind direction).
struct FlowSwitch {
  double time = 0.0;  // s
  Vec3 base_velocity;  // m/s

  friend bool operator==(const FlowSwitch&, const FlowSwitch&) = default;
};

struct FlowField {
  double rho_fluid = 1.225;  // kg/m^3
  Vec3 base_velocity;        // m/s
  Vec3 sine_amplitude;       // m/s
  double sine_frequency = 0.0;  // rad/s
  double gaussian_sigma = 0.3;  // m/s, per axis
  double uniform_delta = 0.3;   // relative magnitude perturbation
  std::uint64_t seed = 0;
  std::optional<FlowSwitch> change;

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

inline void validate(const FlowField& f) {
  if (!(f.rho_fluid > 0.0)) throw DomainError("flow: fluid density must be positive");
  // delta >= 1 could scale a sample by zero or flip it upstream.
  if (!(f.uniform_delta >= 0.0 && f.uniform_delta < 1.0))
    throw DomainError("flow: uniform perturbation must lie in [0, 1)");
  if (!(f.gaussian_sigma >= 0.0)) throw DomainError("flow: gaussian sigma must be non-negative");
}

struct AeroCoefficients {
  double drag = 0.0;
  double friction = 0.0;
  double lift = 0.0;

  friend bool operator==(const AeroCoefficients&, const AeroCoefficients&) = default;
};

inline void validate(const AeroCoefficients& c) {
  if (!(c.drag >= 0.0 && c.friction >= 0.0 && c.lift >= 0.0))
    throw DomainError("aero coefficients must be non-negative");
}

// Mean flow at time t: active base velocity plus the sine sway term.
inline Vec3 mean_flow(const FlowField& flow, double t) {
  const Vec3& base = (flow.change && t >= flow.change->time) ? flow.change->base_velocity : flow.base_velocity;
  return base + flow.sine_amplitude * std::sin(flow.sine_frequency * t);
}

// One flow sample: (mean + N(0, sigma^2) per axis) * (1 + U(-delta, delta)).
// Random draws are skipped for zero sigma or delta.
template <typename Rng>
Vec3 sample_flow(const FlowField& flow, double t, Rng& rng) {
  Vec3 v = mean_flow(flow, t);
  if (flow.gaussian_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, flow.gaussian_sigma);
    for (std::size_t a = 0; a < 3; ++a) v[a] += noise(rng);
  }
  if (flow.uniform_delta > 0.0) {
    std::uniform_real_distribution<double> eps(-flow.uniform_delta, flow.uniform_delta);
    v *= 1.0 + eps(rng);
  }
  return v;
}

// Seeded flow source; the sequence of samples depends only on the seed and
// the call order.
class FlowSampler {
 public:
  explicit FlowSampler(FlowField flow) : flow_(std::move(flow)), rng_(flow_.seed) { validate(flow_); }
  Vec3 operator()(double t) { return sample_flow(flow_, t, rng_); }
  const FlowField& flow() const { return flow_; }

 private:
  FlowField flow_;
  std::mt19937_64 rng_;
};

// Unit projection of d onto the plane with normal n; zero when d is
// (numerically) parallel to n.
inline Vec3 tangential_direction(const Vec3& d, const Vec3& n) {
  const Vec3 t = d - n * dot(d, n);
  const double len = norm(t);
  return len > 1e-9 ? t / len : Vec3{};
}

struct AeroOptions {
  bool surface_only = true;      // interior particles receive no force
  bool projected_area = false;   // scale area by |n . d|
  bool track_world_area = false; // use the deformed area instead of the rest area

  friend bool operator==(const AeroOptions&, const AeroOptions&) = default;
};

// Force on one patch. `normal` is flipped internally to face downstream.
inline Vec3 patch_force(const Vec3& normal, double area, const Vec3& patch_velocity, const Vec3& flow_velocity,
                        double rho_fluid, const AeroCoefficients& coeffs, bool projected_area = false) {
  const Vec3 rel = flow_velocity - patch_velocity;
  const double speed = norm(rel);
  if (speed < 1e-9) return {};
  const Vec3 d = rel / speed;
  const Vec3 n = dot(normal, d) < 0.0 ? -normal : normal;
  double a = area;
  if (projected_area) a *= std::abs(dot(n, d));
  const double q = 0.5 * rho_fluid * speed * speed * a;
  return (n * coeffs.drag + tangential_direction(d, n) * coeffs.friction + cross(d, n) * coeffs.lift) * q;
}

// Per-particle aerodynamic forces. Particle p receives the force of the patch
// it links to; particles without a patch, and non-surface particles in
// surface-only mode, receive exactly zero.
inline std::vector<Vec3> compute_aero_forces(std::span<const GaussianPatch> patches,
                                             std::span<const PatchWorldState> world,
                                             std::span<const ParticleState> particles, const Vec3& flow_velocity,
                                             double rho_fluid, const AeroCoefficients& coeffs,
                                             const AeroOptions& options = {}) {
  if (world.size() != patches.size()) throw DomainError("compute_aero_forces: patch/world state size mismatch");
  std::vector<Vec3> forces(particles.size());
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const ParticleState& particle = particles[p];
    if (!particle.patch_index) continue;
    if (options.surface_only && !particle.is_surface) continue;
    const std::size_t k = *particle.patch_index;
    if (k >= patches.size()) throw DomainError("compute_aero_forces: patch index out of range");
    const double area = options.track_world_area ? world_area(patches[k], particle.fe) : patches[k].area;
    forces[p] = patch_force(world[k].n, area, particle.v, flow_velocity, rho_fluid, coeffs, options.projected_area);
  }
  return forces;
}

// Computes the patch forces and scatters them onto the grid force
// accumulators with each particle's kernel weights. Returns the
// per-particle forces that were applied.
inline std::vector<Vec3> apply_aero_to_grid(std::span<const GaussianPatch> patches,
                                            std::span<const PatchWorldState> world,
                                            std::span<const ParticleState> particles, GridState& grid,
                                            const Vec3& flow_velocity, double rho_fluid,
                                            const AeroCoefficients& coeffs, const AeroOptions& options = {}) {
  std::vector<Vec3> forces =
      compute_aero_forces(patches, world, particles, flow_velocity, rho_fluid, coeffs, options);
  scatter_external_forces(particles, grid, forces);
  return forces;
}

}  // namespace aerogs
