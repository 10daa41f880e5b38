// Command-line front end: simulate, render, metrics, presets.
//
// Exit codes: 0 success, 2 config error, 3 solver blow-up, 4 I/O error.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "aerogs/config.hpp"
#include "aerogs/metrics.hpp"
#include "aerogs/render.hpp"
#include "aerogs/scene.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitIo = 4;

int cmd_simulate(const std::string& config_path, const std::filesystem::path& preset_dir, int frames,
                 long long seed, const std::string& out, unsigned threads, bool dump_particles, bool dump_patches) {
  aerogs::SceneConfig cfg = aerogs::load_config(config_path, preset_dir);
  if (frames > 0) cfg.frames = frames;
  if (seed >= 0) cfg.flow.seed = static_cast<std::uint64_t>(seed);
  if (!out.empty()) cfg.output_dir = out;
  if (threads > 0) cfg.threads = threads;
  cfg.dump_particles |= dump_particles;
  cfg.dump_patches |= dump_patches;

  const aerogs::RunSummary run = aerogs::run_simulation(cfg, preset_dir);
  const auto& last = run.diagnostics.back();
  std::printf("wrote %d frames to %s (max |v| %.6g m/s, particles %zu)\n", cfg.frames, run.output_dir.c_str(),
              last.max_speed, last.particle_count);
  return 0;
}

int cmd_render(const std::string& patches_path, const std::string& config_path,
               const std::filesystem::path& preset_dir, const std::string& out) {
  const aerogs::SceneConfig cfg = aerogs::load_config(config_path, preset_dir);
  aerogs::validate(cfg);
  const double radius = aerogs::nominal_patch_radius(cfg);
  std::vector<aerogs::RenderPatch> patches;
  for (const auto& r : aerogs::read_patch_dump(patches_path)) {
    if (r.opacity < cfg.opacity_threshold) continue;
    const aerogs::Vec3 n = aerogs::normalized(r.n);
    const aerogs::Vec3 view = aerogs::normalized(cfg.camera.position - r.x);
    patches.push_back({r.x, aerogs::disk_covariance(n, radius, cfg.thickness),
                       aerogs::shade_patch(n, r.color, cfg.shading, cfg.light, view), r.opacity});
  }
  aerogs::RenderOptions opt;
  opt.threads = cfg.threads;
  aerogs::write_frame(aerogs::render_patches(patches, cfg.camera, opt), out);
  std::printf("rendered %zu patches to %s\n", patches.size(), out.c_str());
  return 0;
}

int cmd_metrics(const std::string& kind, const std::string& pred, const std::string& ref) {
  if (kind == "psnr") {
    const double db = aerogs::psnr(aerogs::read_ppm(pred), aerogs::read_ppm(ref));
    if (std::isinf(db)) std::printf("psnr inf\n");
    else std::printf("psnr %.10g dB\n", db);
  } else {
    const double cd = aerogs::chamfer(aerogs::read_point_set(pred), aerogs::read_point_set(ref));
    std::printf("chamfer %.10g m^2\n", cd);
  }
  return 0;
}

int cmd_presets(const std::string& action, const std::string& name, const std::filesystem::path& preset_dir) {
  if (action == "list") {
    for (const auto& p : aerogs::list_presets(preset_dir)) std::printf("%-16s %s\n", p.name.c_str(), p.description.c_str());
    return 0;
  }
  if (name.empty()) throw aerogs::ConfigError("presets show: missing preset name");
  std::fputs(aerogs::serialize_config(aerogs::load_preset(name, preset_dir)).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aerogs: Gaussian surface patches in wind, simulated with MPM and splat-rendered"};
  app.require_subcommand(1);
  std::string preset_dir = aerogs::default_preset_dir().string();
  app.add_option("--preset-dir", preset_dir, "Directory holding <name>.cfg presets");

  auto* sim = app.add_subcommand("simulate", "Run a scene and write frames");
  std::string sim_config, sim_out;
  int sim_frames = 0;
  long long sim_seed = -1;
  unsigned sim_threads = 0;
  bool dump_particles = false, dump_patches = false;
  sim->add_option("--config", sim_config, "Scene config file")->required();
  sim->add_option("--frames", sim_frames, "Frame count override")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Flow RNG seed override")->check(CLI::NonNegativeNumber);
  sim->add_option("--out", sim_out, "Output directory override");
  sim->add_option("--threads", sim_threads, "Worker threads (1 = deterministic reference mode)")->check(CLI::PositiveNumber);
  sim->add_flag("--dump-particles", dump_particles, "Write particles_NNNN.txt per frame");
  sim->add_flag("--dump-patches", dump_patches, "Write patches_NNNN.txt per frame");

  auto* render = app.add_subcommand("render", "Render a patch dump with a scene's camera and light");
  std::string r_patches, r_config, r_out;
  render->add_option("--patches", r_patches, "Patch dump file")->required();
  render->add_option("--config", r_config, "Scene config file")->required();
  render->add_option("--out", r_out, "Output PPM path")->required();

  auto* metrics = app.add_subcommand("metrics", "Compare frames (psnr) or point dumps (chamfer)");
  std::string m_kind, m_pred, m_ref;
  metrics->add_option("kind", m_kind, "psnr | chamfer")->required()->check(CLI::IsMember({"psnr", "chamfer"}));
  metrics->add_option("--pred", m_pred, "Predicted frame or dump")->required();
  metrics->add_option("--ref", m_ref, "Reference frame or dump")->required();

  auto* presets = app.add_subcommand("presets", "List or show shipped scene presets");
  std::string p_action, p_name;
  presets->add_option("action", p_action, "list | show")->required()->check(CLI::IsMember({"list", "show"}));
  presets->add_option("name", p_name, "Preset name for show");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*sim)
      return cmd_simulate(sim_config, preset_dir, sim_frames, sim_seed, sim_out, sim_threads, dump_particles, dump_patches);
    if (*render) return cmd_render(r_patches, r_config, preset_dir, r_out);
    if (*metrics) return cmd_metrics(m_kind, m_pred, m_ref);
    if (*presets) return cmd_presets(p_action, p_name, preset_dir);
  } catch (const aerogs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const aerogs::SolverBlowUp& e) {
    std::cerr << "solver blow-up: " << e.what() << '\n';
    return kExitSolver;
  } catch (const aerogs::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const aerogs::DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
