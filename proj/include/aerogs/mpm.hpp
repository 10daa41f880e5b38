#pragma once

// Explicit APIC material point solver on a uniform background grid with
// quadratic B-spline kernels.
//
// One substep is: zero grid -> particle-to-grid (mass, affine momentum,
// internal stress force) -> inject external particle forces -> grid velocity
// update (gravity, pins, boundary) -> grid-to-particle (velocity, affine
// matrix, position, elastic deformation gradient with plastic projection).

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerogs/constitutive.hpp"
#include "aerogs/error.hpp"
#include "aerogs/io.hpp"
#include "aerogs/parallel.hpp"
#include "aerogs/tensor.hpp"

namespace aerogs {

struct ParticleState {
  Vec3 x;                           // m
  Vec3 v;                           // m/s
  double mass = 0.0;                // kg
  double volume0 = 0.0;             // m^3
  Mat3 fe = Mat3::identity();       // elastic deformation gradient
  Mat3 c = Mat3::zero();            // affine velocity matrix, 1/s
  bool is_surface = true;
  bool is_pinned = false;
  std::optional<std::size_t> patch_index;
};

enum class NodeTag : std::uint8_t { Free, Sticky, Pinned };

class GridState {
 public:
  GridState() = default;

  // `dims` node counts per axis, spacing dx, node (0,0,0) at `origin`.
  // Nodes within `boundary_band` layers of a face are tagged Sticky.
  GridState(std::array<int, 3> dims, double dx, Vec3 origin, int boundary_band = 3)
      : dims_(dims), dx_(dx), origin_(origin) {
    if (!(dx > 0.0)) throw DomainError("grid: spacing must be positive");
    for (int d : dims)
      if (d < 3) throw DomainError("grid: need at least 3 nodes per axis");
    const std::size_t n = node_count();
    mass_.assign(n, 0.0);
    momentum_.assign(n, Vec3{});
    velocity_.assign(n, Vec3{});
    force_.assign(n, Vec3{});
    tag_.assign(n, NodeTag::Free);
    touched_.assign(n, 0);
    band_ = boundary_band;
    for (int i = 0; i < dims[0]; ++i)
      for (int j = 0; j < dims[1]; ++j)
        for (int k = 0; k < dims[2]; ++k)
          if (in_band({i, j, k})) tag_[index(i, j, k)] = NodeTag::Sticky;
  }

  const std::array<int, 3>& dims() const { return dims_; }
  double dx() const { return dx_; }
  const Vec3& origin() const { return origin_; }
  int boundary_band() const { return band_; }
  std::size_t node_count() const {
    return static_cast<std::size_t>(dims_[0]) * static_cast<std::size_t>(dims_[1]) *
           static_cast<std::size_t>(dims_[2]);
  }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(dims_[1]) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims_[2]) +
           static_cast<std::size_t>(k);
  }
  std::array<int, 3> coords(std::size_t idx) const {
    const int k = static_cast<int>(idx % static_cast<std::size_t>(dims_[2]));
    idx /= static_cast<std::size_t>(dims_[2]);
    const int j = static_cast<int>(idx % static_cast<std::size_t>(dims_[1]));
    const int i = static_cast<int>(idx / static_cast<std::size_t>(dims_[1]));
    return {i, j, k};
  }
  Vec3 node_position(int i, int j, int k) const { return origin_ + Vec3{double(i), double(j), double(k)} * dx_; }
  Vec3 node_position(std::size_t idx) const {
    const auto c = coords(idx);
    return node_position(c[0], c[1], c[2]);
  }

  // Upper corner of the node lattice.
  Vec3 extent_max() const {
    return node_position(dims_[0] - 1, dims_[1] - 1, dims_[2] - 1);
  }

  double& mass(std::size_t i) { return mass_[i]; }
  double mass(std::size_t i) const { return mass_[i]; }
  Vec3& momentum(std::size_t i) { return momentum_[i]; }
  const Vec3& momentum(std::size_t i) const { return momentum_[i]; }
  Vec3& velocity(std::size_t i) { return velocity_[i]; }
  const Vec3& velocity(std::size_t i) const { return velocity_[i]; }
  Vec3& force(std::size_t i) { return force_[i]; }
  const Vec3& force(std::size_t i) const { return force_[i]; }
  NodeTag tag(std::size_t i) const { return tag_[i]; }
  void set_tag(std::size_t i, NodeTag t) { tag_[i] = t; }

  // Marks a node as carrying data this substep; zero() only clears these.
  void touch(std::size_t i) {
    if (!touched_[i]) {
      touched_[i] = 1;
      active_.push_back(static_cast<std::uint32_t>(i));
    }
  }
  const std::vector<std::uint32_t>& active_nodes() const { return active_; }

  void zero() {
    for (std::uint32_t i : active_) {
      mass_[i] = 0.0;
      momentum_[i] = Vec3{};
      velocity_[i] = Vec3{};
      force_[i] = Vec3{};
      touched_[i] = 0;
    }
    active_.clear();
  }

  bool in_band(std::array<int, 3> c) const {
    for (int a = 0; a < 3; ++a)
      if (c[a] < band_ || c[a] >= dims_[a] - band_) return true;
    return false;
  }

  // Pins every node within `radius` metres of any anchor.
  void pin_nodes_near(std::span<const Vec3> anchors, double radius) {
    const int reach = static_cast<int>(std::ceil(radius / dx_)) + 1;
    for (const Vec3& p : anchors) {
      std::array<int, 3> lo{}, hi{};
      for (int a = 0; a < 3; ++a) {
        const int c = static_cast<int>(std::floor((p[a] - origin_[a]) / dx_));
        lo[a] = std::max(0, c - reach);
        hi[a] = std::min(dims_[a] - 1, c + reach + 1);
      }
      for (int i = lo[0]; i <= hi[0]; ++i)
        for (int j = lo[1]; j <= hi[1]; ++j)
          for (int k = lo[2]; k <= hi[2]; ++k)
            if (squared_norm(node_position(i, j, k) - p) <= radius * radius) tag_[index(i, j, k)] = NodeTag::Pinned;
    }
  }

 private:
  std::array<int, 3> dims_{0, 0, 0};
  double dx_ = 1.0;
  Vec3 origin_;
  int band_ = 3;
  std::vector<double> mass_;
  std::vector<Vec3> momentum_;
  std::vector<Vec3> velocity_;
  std::vector<Vec3> force_;
  std::vector<NodeTag> tag_;
  std::vector<std::uint8_t> touched_;
  std::vector<std::uint32_t> active_;
};

struct StepConfig {
  double dt = 2e-4;                 // s
  Vec3 gravity{0.0, 0.0, -9.8};     // m/s^2
  int substeps_per_frame = 200;
  double frame_dt = 0.04;           // s

  friend bool operator==(const StepConfig&, const StepConfig&) = default;
};

inline void validate(const StepConfig& s) {
  if (!(s.dt > 0.0)) throw DomainError("step: dt must be positive");
  if (s.substeps_per_frame < 1) throw DomainError("step: substeps_per_frame must be >= 1");
  if (std::abs(s.substeps_per_frame * s.dt - s.frame_dt) > 1e-9)
    throw DomainError("step: substeps_per_frame * dt must equal frame_dt");
}

struct SolverOptions {
  double mass_floor = 1e-12;        // kg
  double velocity_ceiling = 1e3;    // m/s
  double singular_value_floor = kSingularValueFloor;
  unsigned threads = 1;
};

// 1-D quadratic B-spline weights and derivatives for the three nodes
// base, base+1, base+2 along each axis. Derivatives are per cell; divide by
// dx for spatial gradients.
struct Stencil {
  std::array<int, 3> base{};
  std::array<std::array<double, 3>, 3> w{};
  std::array<std::array<double, 3>, 3> dw{};
};

inline Stencil bspline_weights(const Vec3& xp, const GridState& grid) {
  Stencil s;
  const double inv_dx = 1.0 / grid.dx();
  for (std::size_t a = 0; a < 3; ++a) {
    const double xi = (xp[a] - grid.origin()[a]) * inv_dx;
    if (!std::isfinite(xi)) throw OutOfDomainError("bspline_weights: non-finite particle position");
    const int base = static_cast<int>(std::floor(xi - 0.5));
    if (base < 0 || base + 2 > grid.dims()[a] - 1)
      throw OutOfDomainError("bspline_weights: stencil leaves the grid");
    const double fx = xi - base;
    s.base[a] = base;
    s.w[a] = {0.5 * (1.5 - fx) * (1.5 - fx), 0.75 - (fx - 1.0) * (fx - 1.0), 0.5 * (fx - 0.5) * (fx - 0.5)};
    s.dw[a] = {fx - 1.5, -2.0 * (fx - 1.0), fx - 0.5};
  }
  return s;
}

// Calls fn(node_index, weight, weight_gradient, node_position) for the 27
// stencil nodes.
template <typename Fn>
void for_each_stencil_node(const Stencil& s, const GridState& grid, Fn&& fn) {
  const double inv_dx = 1.0 / grid.dx();
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        const int i = s.base[0] + a, j = s.base[1] + b, k = s.base[2] + c;
        const double wa = s.w[0][a], wb = s.w[1][b], wc = s.w[2][c];
        const Vec3 grad{s.dw[0][a] * wb * wc * inv_dx, wa * s.dw[1][b] * wc * inv_dx, wa * wb * s.dw[2][c] * inv_dx};
        fn(grid.index(i, j, k), wa * wb * wc, grad, grid.node_position(i, j, k));
      }
}

namespace detail {

struct NodeContribution {
  std::uint32_t node;
  double mass;
  Vec3 momentum;
  Vec3 force;
};

template <typename Sink>
void particle_to_grid_one(const ParticleState& p, const Mat3& stress, const GridState& grid, Sink&& sink) {
  const Stencil s = bspline_weights(p.x, grid);
  const Mat3 stress_vol = stress * p.volume0;
  for_each_stencil_node(s, grid, [&](std::size_t idx, double w, const Vec3& grad, const Vec3& xi) {
    const Vec3 affine = p.c * (xi - p.x);
    sink(NodeContribution{static_cast<std::uint32_t>(idx), w * p.mass, (p.v + affine) * (w * p.mass),
                          -(stress_vol * grad)});
  });
}

inline void accumulate(GridState& grid, const NodeContribution& c) {
  grid.touch(c.node);
  grid.mass(c.node) += c.mass;
  grid.momentum(c.node) += c.momentum;
  grid.force(c.node) += c.force;
}

}  // namespace detail

// Scatters particle mass, APIC momentum and the internal force
// -tau V0 grad(w) onto the grid. The grid must have been zeroed. Parallel
// chunks buffer their contributions and merge in particle order, so results
// do not depend on the thread count.
inline void p2g(std::span<const ParticleState> particles, GridState& grid, std::span<const Mat3> stresses,
                unsigned threads = 1) {
  if (stresses.size() != particles.size()) throw DomainError("p2g: one stress per particle required");
  const std::size_t chunks = chunk_count(particles.size(), threads);
  if (chunks <= 1) {
    for (std::size_t p = 0; p < particles.size(); ++p)
      detail::particle_to_grid_one(particles[p], stresses[p], grid,
                                   [&](const detail::NodeContribution& c) { detail::accumulate(grid, c); });
    return;
  }
  std::vector<std::vector<detail::NodeContribution>> buffers(chunks);
  parallel_chunks(particles.size(), threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& buf = buffers[chunk];
    buf.reserve((end - begin) * 27);
    for (std::size_t p = begin; p < end; ++p)
      detail::particle_to_grid_one(particles[p], stresses[p], grid,
                                   [&](const detail::NodeContribution& c) { buf.push_back(c); });
  });
  for (const auto& buf : buffers)
    for (const auto& c : buf) detail::accumulate(grid, c);
}

// Adds per-particle external forces (N) to the grid through each particle's
// kernel weights.
inline void scatter_external_forces(std::span<const ParticleState> particles, GridState& grid,
                                    std::span<const Vec3> forces) {
  if (forces.size() != particles.size()) throw DomainError("scatter_external_forces: one force per particle required");
  for (std::size_t p = 0; p < particles.size(); ++p) {
    const Vec3& f = forces[p];
    if (f == Vec3{}) continue;
    const Stencil s = bspline_weights(particles[p].x, grid);
    for_each_stencil_node(s, grid, [&](std::size_t idx, double w, const Vec3&, const Vec3&) {
      grid.touch(idx);
      grid.force(idx) += f * w;
    });
  }
}

// Momentum update on every touched node:
//   v_new = p/m + dt (f + m g) / m
// Pinned nodes are held at rest; sticky boundary nodes lose the velocity
// component normal to the faces they sit against.
inline void grid_update(GridState& grid, const StepConfig& step, double mass_floor = 1e-12) {
  const auto& dims = grid.dims();
  const int band = grid.boundary_band();
  for (std::uint32_t idx : grid.active_nodes()) {
    const double m = grid.mass(idx);
    if (!(m > mass_floor)) {
      grid.velocity(idx) = Vec3{};
      continue;
    }
    Vec3 v = grid.momentum(idx) / m + (grid.force(idx) / m + step.gravity) * step.dt;
    switch (grid.tag(idx)) {
      case NodeTag::Pinned:
        v = Vec3{};
        break;
      case NodeTag::Sticky: {
        const auto c = grid.coords(idx);
        for (std::size_t a = 0; a < 3; ++a)
          if (c[a] < band || c[a] >= dims[a] - band) v[a] = 0.0;
        break;
      }
      case NodeTag::Free:
        break;
    }
    grid.velocity(idx) = v;
  }
}

// Gathers grid velocities back to particles and advances them by dt.
// Throws SolverBlowUp when a particle speed exceeds the ceiling, the state
// goes non-finite, or an element inverts.
inline void g2p(std::span<ParticleState> particles, const GridState& grid, const StepConfig& step,
                const MaterialParams& material, const SolverOptions& options = {}) {
  const LameParams lame = lame_from(material);
  const bool plastic = material.model == ConstitutiveModel::DruckerPrager;
  const double alpha = plastic ? drucker_prager_alpha(material.friction_angle) : 0.0;
  const double apic_scale = 4.0 / (grid.dx() * grid.dx());  // 12 / (dx^2 (b + 1)), b = 2
  const double dt = step.dt;

  parallel_chunks(particles.size(), options.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t pi = begin; pi < end; ++pi) {
      ParticleState& p = particles[pi];
      if (p.is_pinned) {
        p.v = Vec3{};
        p.c = Mat3::zero();
        continue;
      }
      const Stencil s = bspline_weights(p.x, grid);
      Vec3 v;
      Mat3 b = Mat3::zero();
      Mat3 grad_v = Mat3::zero();
      for_each_stencil_node(s, grid, [&](std::size_t idx, double w, const Vec3& grad, const Vec3& xi) {
        const Vec3& vi = grid.velocity(idx);
        v += vi * w;
        b += outer(vi * w, xi - p.x);
        grad_v += outer(vi, grad);
      });
      const double speed = norm(v);
      if (!(speed <= options.velocity_ceiling))
        throw SolverBlowUp("g2p: particle " + std::to_string(pi) + " speed " + format_double(speed) +
                           " m/s exceeds ceiling");
      p.v = v;
      p.c = b * apic_scale;
      p.x += v * dt;
      Mat3 fe = (Mat3::identity() + grad_v * dt) * p.fe;
      if (plastic) {
        fe = clamp_singular_values(fe, options.singular_value_floor);
        fe = drucker_prager_return_map(fe, lame, alpha);
      }
      if (!is_finite(fe) || !(determinant(fe) > 0.0))
        throw SolverBlowUp("g2p: particle " + std::to_string(pi) + " deformation gradient inverted");
      p.fe = fe;
    }
  });
}

inline std::vector<Mat3> compute_stresses(std::span<const ParticleState> particles, const MaterialParams& material,
                                          unsigned threads = 1) {
  const LameParams lame = lame_from(material);
  std::vector<Mat3> tau(particles.size());
  parallel_chunks(particles.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) tau[p] = fixed_corotated_kirchhoff(particles[p].fe, lame);
  });
  return tau;
}

struct FrameDiagnostics {
  double max_speed = 0.0;
  Vec3 total_momentum;
  std::size_t particle_count = 0;
  double min_det_fe = 1.0;
};

inline FrameDiagnostics diagnose(std::span<const ParticleState> particles) {
  FrameDiagnostics d;
  d.particle_count = particles.size();
  d.min_det_fe = particles.empty() ? 1.0 : determinant(particles.front().fe);
  for (const auto& p : particles) {
    d.max_speed = std::max(d.max_speed, norm(p.v));
    d.total_momentum += p.v * p.mass;
    d.min_det_fe = std::min(d.min_det_fe, determinant(p.fe));
  }
  return d;
}

// Owns particle and grid state and advances it substep by substep.
class MpmSolver {
 public:
  MpmSolver(GridState grid, std::vector<ParticleState> particles, MaterialParams material, StepConfig step,
            SolverOptions options = {})
      : grid_(std::move(grid)),
        particles_(std::move(particles)),
        material_(material),
        step_(step),
        options_(options) {
    validate(material_);
    validate(step_);
    for (const auto& p : particles_)
      if (!(p.mass > 0.0) || !(p.volume0 > 0.0)) throw DomainError("particle mass and rest volume must be positive");
    for (auto& p : particles_)
      if (p.is_pinned) p.v = Vec3{};
  }

  // Pins grid nodes within `radius` of every pinned particle.
  void pin_grid_nodes(double radius) {
    std::vector<Vec3> anchors;
    for (const auto& p : particles_)
      if (p.is_pinned) anchors.push_back(p.x);
    grid_.pin_nodes_near(anchors, radius);
  }

  void substep(std::span<const Vec3> external_forces) {
    if (!external_forces.empty() && external_forces.size() != particles_.size())
      throw DomainError("substep: external force count does not match particle count");
    grid_.zero();
    const std::vector<Mat3> tau = compute_stresses(particles_, material_, options_.threads);
    p2g(particles_, grid_, tau, options_.threads);
    if (!external_forces.empty()) scatter_external_forces(particles_, grid_, external_forces);
    grid_update(grid_, step_, options_.mass_floor);
    g2p(particles_, grid_, step_, material_, options_);
    time_ += step_.dt;
  }

  // Runs substeps_per_frame substeps with the given external forces held
  // constant. An empty span means no external forces.
  FrameDiagnostics step_frame(std::span<const Vec3> external_forces = {}) {
    for (int s = 0; s < step_.substeps_per_frame; ++s) substep(external_forces);
    return diagnose(particles_);
  }

  const GridState& grid() const { return grid_; }
  GridState& grid() { return grid_; }
  std::span<const ParticleState> particles() const { return particles_; }
  std::span<ParticleState> particles() { return particles_; }
  const MaterialParams& material() const { return material_; }
  const StepConfig& step() const { return step_; }
  const SolverOptions& options() const { return options_; }
  double time() const { return time_; }

 private:
  GridState grid_;
  std::vector<ParticleState> particles_;
  MaterialParams material_;
  StepConfig step_;
  SolverOptions options_;
  double time_ = 0.0;
};

// Particle dump: header lines starting with '#', then one particle per line
// as "x y z vx vy vz" in metres and metres per second.
inline constexpr std::string_view kParticleDumpHeader =
    "# aerogs particle dump v1\n"
    "# columns: x y z vx vy vz  (m, m/s)\n";

inline void write_particle_dump(const std::filesystem::path& path, std::span<const ParticleState> particles) {
  std::string out(kParticleDumpHeader);
  for (const auto& p : particles) {
    const double row[6] = {p.x[0], p.x[1], p.x[2], p.v[0], p.v[1], p.v[2]};
    append_row(out, row);
  }
  write_file_atomic(path, out);
}

struct ParticleRecord {
  Vec3 x;
  Vec3 v;
};

inline std::vector<ParticleRecord> read_particle_dump(const std::filesystem::path& path) {
  std::vector<ParticleRecord> out;
  for (const auto& r : read_numeric_table(path, 6)) out.push_back({{r[0], r[1], r[2]}, {r[3], r[4], r[5]}});
  return out;
}

}  // namespace aerogs
