#pragma once

// Procedural scenes, object edits, and the simulate -> shade -> render frame
// loop.

#include <algorithm>
#include <functional>
#include <cmath>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "aerogs/aero.hpp"
#include "aerogs/config.hpp"
#include "aerogs/error.hpp"
#include "aerogs/mpm.hpp"
#include "aerogs/render.hpp"
#include "aerogs/surface.hpp"

namespace aerogs {

// Patches and the MPM particles that carry them. particles[i].patch_index
// refers into patches.
struct Scene {
  MaterialParams material;
  std::vector<GaussianPatch> patches;
  std::vector<ParticleState> particles;
};

// Planar nx x ny sheet in the x-z plane with its bottom-left corner at
// `origin`; columns run along +x, rows along +z. Rest normals point along -y.
// Pin selectors: left-edge, right-edge, top-edge, bottom-edge, top-left,
// top-right, bottom-left, bottom-right. A corner selector holds the 2x2
// block of particles at that corner; a single pinned particle concentrates
// the load on one grid cell and tears soft sheets.
inline Scene build_flag(const FlagGeometry& geo, const Vec3& origin, double thickness, double particle_thickness,
                        const MaterialParams& material, std::span<const std::string> pins,
                        const Vec3& color = {1.0, 1.0, 1.0}) {
  if (geo.nx < 2 || geo.ny < 2) throw ConfigError("build_flag: nx and ny must be at least 2");
  const int nx = geo.nx, ny = geo.ny;
  auto selector = [&](const std::string& name) -> std::function<bool(int, int)> {
    if (name == "left-edge") return [](int i, int) { return i == 0; };
    if (name == "right-edge") return [nx](int i, int) { return i == nx - 1; };
    if (name == "top-edge") return [ny](int, int j) { return j == ny - 1; };
    if (name == "bottom-edge") return [](int, int j) { return j == 0; };
    if (name == "top-left") return [ny](int i, int j) { return i <= 1 && j >= ny - 2; };
    if (name == "top-right") return [nx, ny](int i, int j) { return i >= nx - 2 && j >= ny - 2; };
    if (name == "bottom-left") return [](int i, int j) { return i <= 1 && j <= 1; };
    if (name == "bottom-right") return [nx](int i, int j) { return i >= nx - 2 && j <= 1; };
    throw ConfigError("unknown flag pin selector '" + name + "'");
  };
  std::vector<std::function<bool(int, int)>> pinned;
  for (const auto& p : pins) pinned.push_back(selector(p));

  const double sx = geo.width / (nx - 1), sz = geo.height / (ny - 1);
  const Vec3 scaling{0.5 * std::max(sx, sz), 0.5 * std::min(sx, sz), thickness};
  if (!(scaling[1] > thickness)) throw ConfigError("build_flag: thickness must be below half the patch spacing");
  // Longer in-plane axis first so the scalings stay sorted.
  const Vec3 ex{1, 0, 0}, ez{0, 0, 1};
  const Mat3 rot = sx >= sz ? Mat3::from_columns(ex, ez, cross(ex, ez)) : Mat3::from_columns(ez, ex, cross(ez, ex));
  const double slab = particle_thickness > 0.0 ? particle_thickness : 2.0 * thickness;

  const int layers = std::max(geo.layers, 1);
  const double layer_gap = geo.layer_spacing > 0.0 ? geo.layer_spacing : std::min(sx, sz);

  Scene s;
  s.material = material;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Vec3 x = origin + Vec3{i * sx, 0.0, j * sz};
      GaussianPatch patch = make_patch(x, scaling, rot, 1.0, color);
      // Keep every rest normal facing -y regardless of axis order.
      if (patch.rest_normal[1] > 0.0) {
        patch.rest_rotation.set_col(2, -patch.rest_rotation.col(2));
        patch.rest_rotation.set_col(1, -patch.rest_rotation.col(1));
        patch.rest_normal = -patch.rest_normal;
      }
      const bool pin = std::any_of(pinned.begin(), pinned.end(), [&](const auto& f) { return f(i, j); });
      // The slab volume is split over the layers, so mass and membrane
      // stiffness do not depend on the layer count.
      for (int k = 0; k < layers; ++k) {
        ParticleState p;
        p.x = x + Vec3{0.0, k * layer_gap, 0.0};
        p.volume0 = patch.area * slab / layers;
        p.mass = material.density * p.volume0;
        p.is_pinned = pin;
        p.is_surface = k == 0;
        if (k == 0) p.patch_index = s.patches.size();
        s.particles.push_back(p);
      }
      s.patches.push_back(patch);
    }
  return s;
}

// Regular lattice fill of dims[0] x dims[1] x dims[2] particles. Lattice
// boundary particles are surface particles with a flat patch facing out of
// the block; interior particles carry an unoriented patch and no aero force.
// Pin selector: bottom-face.
inline Scene build_sand_block(const BlockGeometry& geo, const Vec3& origin, double thickness,
                              const MaterialParams& material, std::span<const std::string> pins,
                              const Vec3& color = {0.76, 0.70, 0.50}) {
  for (int d : geo.dims)
    if (d < 1) throw ConfigError("build_sand_block: dimensions must be positive");
  bool pin_bottom = false;
  for (const auto& p : pins) {
    if (p == "bottom-face") pin_bottom = true;
    else throw ConfigError("unknown block pin selector '" + p + "'");
  }
  const double h = geo.spacing;
  const double half = 0.5 * h;
  if (!(thickness > 0.0 && thickness < half)) throw ConfigError("build_sand_block: thickness must lie in (0, spacing/2)");
  const Vec3 scaling{half, half, thickness};
  const auto [nx, ny, nz] = geo.dims;

  Scene s;
  s.material = material;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) {
        // First matching face in this order sets the patch orientation.
        Vec3 outward;
        if (k == nz - 1) outward = {0, 0, 1};
        else if (k == 0) outward = {0, 0, -1};
        else if (i == nx - 1) outward = {1, 0, 0};
        else if (i == 0) outward = {-1, 0, 0};
        else if (j == ny - 1) outward = {0, 1, 0};
        else if (j == 0) outward = {0, -1, 0};
        const bool surface = outward != Vec3{};
        Mat3 rot = Mat3::identity();
        if (surface) {
          const Vec3 t0 = detail::any_orthogonal(outward);
          rot = Mat3::from_columns(t0, cross(outward, t0), outward);
        }
        const Vec3 x = origin + Vec3{i * h, j * h, k * h};
        GaussianPatch patch = make_patch(x, scaling, rot, 1.0, color);
        ParticleState p;
        p.x = x;
        p.volume0 = h * h * h;
        p.mass = material.density * p.volume0;
        p.is_surface = surface;
        p.is_pinned = pin_bottom && k == 0;
        p.patch_index = s.patches.size();
        s.patches.push_back(patch);
        s.particles.push_back(p);
      }
  return s;
}

// Replaces material and/or intrinsic colours. Particle masses follow the new
// density; geometry and particle count are unchanged.
inline Scene apply_edit(const EditOverrides& edit, Scene scene,
                        const std::filesystem::path& preset_dir = default_preset_dir()) {
  if (edit.empty()) return scene;
  MaterialParams m = scene.material;
  if (edit.material_preset) m = load_preset(*edit.material_preset, preset_dir).material;
  if (edit.model) m.model = *edit.model;
  if (edit.youngs_modulus) m.youngs_modulus = *edit.youngs_modulus;
  if (edit.poisson_ratio) m.poisson_ratio = *edit.poisson_ratio;
  if (edit.density) m.density = *edit.density;
  if (edit.friction_angle) m.friction_angle = *edit.friction_angle;
  try {
    validate(m);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("edit: ") + e.what());
  }
  scene.material = m;
  for (auto& p : scene.particles) p.mass = m.density * p.volume0;
  if (edit.color)
    for (auto& patch : scene.patches) patch.color = *edit.color;
  return scene;
}

// Drops patches (and their particles) whose opacity is below the threshold.
inline Scene filter_by_opacity(Scene scene, double threshold) {
  const auto keep = opacity_filter(scene.patches, threshold);
  if (keep.size() == scene.patches.size()) return scene;
  std::vector<std::size_t> remap(scene.patches.size(), std::numeric_limits<std::size_t>::max());
  Scene out;
  out.material = scene.material;
  for (std::size_t k : keep) {
    remap[k] = out.patches.size();
    out.patches.push_back(scene.patches[k]);
  }
  for (auto p : scene.particles) {
    if (p.patch_index) {
      if (remap[*p.patch_index] == std::numeric_limits<std::size_t>::max()) continue;
      p.patch_index = remap[*p.patch_index];
    }
    out.particles.push_back(p);
  }
  return out;
}

inline Scene build_scene(const SceneConfig& c, const std::filesystem::path& preset_dir = default_preset_dir()) {
  Scene s = c.kind == SceneKind::Flag
                ? build_flag(c.flag, c.origin, c.thickness, c.particle_thickness, c.material, c.pins, c.color)
                : build_sand_block(c.block, c.origin, c.thickness, c.material, c.pins, c.color);
  s = apply_edit(c.edit, std::move(s), preset_dir);
  return filter_by_opacity(std::move(s), c.opacity_threshold);
}

// Cubic grid of `resolution` nodes per axis centred on the padded scene
// bounds, with `margin` spare cells on every side.
inline GridState make_grid(const SceneConfig& c, std::span<const ParticleState> particles) {
  if (particles.empty()) throw ConfigError("scene has no particles");
  Vec3 lo = particles.front().x, hi = lo;
  for (const auto& p : particles)
    for (std::size_t a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p.x[a]);
      hi[a] = std::max(hi[a], p.x[a]);
    }
  double extent = 0.0;
  for (std::size_t a = 0; a < 3; ++a) extent = std::max(extent, hi[a] - lo[a] + 2.0 * c.grid_padding);
  const int n = c.grid_resolution;
  const int usable = n - 1 - 2 * c.grid_margin;
  if (usable < 2) throw ConfigError("grid resolution too small for its margin");
  if (!(extent > 0.0)) throw ConfigError("scene bounds are degenerate; increase grid padding");
  const double dx = extent / usable;
  Vec3 origin;
  for (std::size_t a = 0; a < 3; ++a) origin[a] = 0.5 * (lo[a] + hi[a]) - 0.5 * dx * (n - 1);
  return GridState({n, n, n}, dx, origin, c.boundary_band);
}

// Disk-shaped covariance for a patch known only by centre and normal.
inline Mat3 disk_covariance(const Vec3& n, double radius, double thickness) {
  const Mat3 nn = outer(n, n);
  return (Mat3::identity() - nn) * (radius * radius) + nn * (thickness * thickness);
}

// Nominal in-plane radius of a scene's patches (used when rendering dumps).
inline double nominal_patch_radius(const SceneConfig& c) {
  if (c.kind == SceneKind::Block) return 0.5 * c.block.spacing;
  return 0.5 * std::max(c.flag.width / (c.flag.nx - 1), c.flag.height / (c.flag.ny - 1));
}

// Stateful simulate/render loop for one scene.
class Simulation {
 public:
  explicit Simulation(SceneConfig config, const std::filesystem::path& preset_dir = default_preset_dir())
      : config_(std::move(config)),
        scene_((validate(config_), build_scene(config_, preset_dir))),
        solver_(make_grid(config_, scene_.particles), scene_.particles, scene_.material, config_.step,
                SolverOptions{.velocity_ceiling = config_.velocity_ceiling, .threads = config_.threads}),
        sampler_(config_.flow),
        previous_normals_(scene_.patches.size()) {
    for (std::size_t k = 0; k < scene_.patches.size(); ++k) previous_normals_[k] = scene_.patches[k].rest_normal;
    solver_.pin_grid_nodes(config_.pin_node_radius * solver_.grid().dx());
    render_options_.threads = config_.threads;
  }

  // Current world state of every patch. Normals are kept on the hemisphere
  // of the previous call.
  std::vector<PatchWorldState> transport() {
    std::vector<PatchWorldState> world(scene_.patches.size());
    for (const auto& p : solver_.particles()) {
      if (!p.patch_index) continue;
      const std::size_t k = *p.patch_index;
      world[k] = transport_patch(scene_.patches[k], p.fe, p.x, previous_normals_[k]);
      previous_normals_[k] = world[k].n;
    }
    return world;
  }

  // Samples the flow, computes patch forces from the current state and
  // advances one frame with those forces held over the substeps.
  FrameDiagnostics advance_frame() {
    const Vec3 flow = sampler_(solver_.time());
    last_flow_ = flow;
    const auto world = transport();
    last_forces_ = compute_aero_forces(scene_.patches, world, solver_.particles(), flow, config_.flow.rho_fluid,
                                       config_.coeffs, config_.aero);
    try {
      const FrameDiagnostics d = solver_.step_frame(last_forces_);
      ++frame_;
      return d;
    } catch (const SolverBlowUp& e) {
      throw SolverBlowUp("frame " + std::to_string(frame_) + ": " + e.what(), static_cast<long>(frame_));
    } catch (const OutOfDomainError& e) {
      throw SolverBlowUp("frame " + std::to_string(frame_) + ": " + e.what(), static_cast<long>(frame_));
    }
  }

  std::vector<RenderPatch> shaded_patches() {
    const auto world = transport();
    std::vector<RenderPatch> out;
    out.reserve(world.size());
    for (std::size_t k = 0; k < world.size(); ++k) {
      const Vec3 view = normalized(config_.camera.position - world[k].x);
      out.push_back({world[k].x, world[k].cov,
                     shade_patch(world[k].n, scene_.patches[k].color, config_.shading, config_.light, view),
                     scene_.patches[k].opacity});
    }
    return out;
  }

  Image render() {
    const auto patches = shaded_patches();
    return render_patches(patches, config_.camera, render_options_);
  }

  std::vector<PatchRecord> patch_records() {
    const auto world = transport();
    std::vector<PatchRecord> out;
    for (std::size_t k = 0; k < world.size(); ++k)
      out.push_back({world[k].x, world[k].n, scene_.patches[k].color, scene_.patches[k].opacity});
    return out;
  }

  const SceneConfig& config() const { return config_; }
  const Scene& scene() const { return scene_; }
  const MpmSolver& solver() const { return solver_; }
  std::span<const ParticleState> particles() const { return solver_.particles(); }
  std::span<const Vec3> last_forces() const { return last_forces_; }
  const Vec3& last_flow() const { return last_flow_; }
  std::size_t frame() const { return frame_; }
  RenderOptions& render_options() { return render_options_; }

 private:
  SceneConfig config_;
  Scene scene_;
  MpmSolver solver_;
  FlowSampler sampler_;
  std::vector<Vec3> previous_normals_;
  std::vector<Vec3> last_forces_;
  Vec3 last_flow_;
  RenderOptions render_options_;
  std::size_t frame_ = 0;
};

struct RunSummary {
  std::filesystem::path output_dir;
  std::vector<FrameDiagnostics> diagnostics;
  std::vector<Vec3> initial_positions;
  std::vector<Vec3> final_positions;
};

// Runs config.frames frames. Frame k is rendered after the k-th physics
// frame; dumps use the same numbering. A copy of the effective config is
// written next to the frames.
inline RunSummary run_simulation(const SceneConfig& config,
                                 const std::filesystem::path& preset_dir = default_preset_dir()) {
  Simulation sim(config, preset_dir);
  RunSummary summary;
  summary.output_dir = config.output_dir;
  ensure_directory(summary.output_dir);
  write_file_atomic(summary.output_dir / "config.cfg", serialize_config(config));
  for (const auto& p : sim.particles()) summary.initial_positions.push_back(p.x);
  for (int f = 0; f < config.frames; ++f) {
    summary.diagnostics.push_back(sim.advance_frame());
    write_frame(sim.render(), summary.output_dir / frame_name(static_cast<std::size_t>(f)));
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_%04d.txt", f);
    if (config.dump_particles) write_particle_dump(summary.output_dir / (std::string("particles") + suffix), sim.particles());
    if (config.dump_patches) {
      const auto records = sim.patch_records();
      write_patch_dump(summary.output_dir / (std::string("patches") + suffix), records);
    }
  }
  write_frame_metadata(summary.output_dir, static_cast<std::size_t>(config.frames), config.fps, config.step.frame_dt);
  for (const auto& p : sim.particles()) summary.final_positions.push_back(p.x);
  return summary;
}

}  // namespace aerogs
