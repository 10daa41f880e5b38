#pragma once

// Scene configuration and its text format.
//
// The format is line oriented:
//
//   # comment
//   preset = flag-pattern-2        (optional, before any section: start from a preset)
//   [section]
//   key = value [unit]
//
// Dimensional values must carry exactly the unit listed in the schema
// (e.g. "youngs_modulus = 3e3 Pa", "base_velocity = 2.5 0.5 0 m/s").
// Dimensionless values carry none. Vectors are three whitespace-separated
// numbers. Unknown sections or keys are errors.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aerogs/aero.hpp"
#include "aerogs/constitutive.hpp"
#include "aerogs/error.hpp"
#include "aerogs/io.hpp"
#include "aerogs/mpm.hpp"
#include "aerogs/render.hpp"

#ifndef AEROGS_DEFAULT_PRESET_DIR
#define AEROGS_DEFAULT_PRESET_DIR "presets"
#endif

namespace aerogs {

enum class SceneKind { Flag, Block };

struct FlagGeometry {
  int nx = 20;               // columns along +x
  int ny = 30;               // rows along +z
  double width = 1.0;        // m
  double height = 1.5;       // m
  // Particle layers through the thickness. Extra layers sit behind the patch
  // layer along +y and give the sheet bending resistance.
  int layers = 1;
  double layer_spacing = 0.0; // m; 0 selects the smaller in-plane spacing

  friend bool operator==(const FlagGeometry&, const FlagGeometry&) = default;
};

struct BlockGeometry {
  std::array<int, 3> dims{4, 4, 4};
  double spacing = 0.05;     // m

  friend bool operator==(const BlockGeometry&, const BlockGeometry&) = default;
};

// Optional replacements applied to a built scene before simulation.
struct EditOverrides {
  std::optional<std::string> material_preset;
  std::optional<ConstitutiveModel> model;
  std::optional<double> youngs_modulus;
  std::optional<double> poisson_ratio;
  std::optional<double> density;
  std::optional<double> friction_angle;
  std::optional<Vec3> color;

  bool empty() const {
    return !material_preset && !model && !youngs_modulus && !poisson_ratio && !density && !friction_angle && !color;
  }
  friend bool operator==(const EditOverrides&, const EditOverrides&) = default;
};

struct SceneConfig {
  std::string name = "scene";
  std::string description;
  SceneKind kind = SceneKind::Flag;
  FlagGeometry flag;
  BlockGeometry block;
  Vec3 origin;                     // flag bottom-left corner / block min corner, m
  double thickness = 0.002;        // patch S3, m
  double particle_thickness = 0.0; // m; 0 selects 2 * thickness
  Vec3 color{1.0, 1.0, 1.0};
  double opacity_threshold = 0.1;
  std::vector<std::string> pins;

  MaterialParams material;
  AeroCoefficients coeffs;
  AeroOptions aero;
  FlowField flow;
  StepConfig step;

  int grid_resolution = 64;        // nodes per axis
  double grid_padding = 0.5;       // m around the scene bounds
  int grid_margin = 4;             // extra cells beyond the padding
  int boundary_band = 3;
  double pin_node_radius = 1.5;    // cells
  double velocity_ceiling = 1e3;   // m/s

  Camera camera;
  LightConfig light;
  ShadingMode shading = ShadingMode::Diffuse;

  std::string output_dir = "out";
  int frames = 250;
  double fps = 25.0;
  bool dump_particles = false;
  bool dump_patches = false;
  unsigned threads = 1;

  EditOverrides edit;

  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

inline std::filesystem::path default_preset_dir() {
  if (const char* env = std::getenv("AEROGS_PRESET_DIR"); env && *env) return env;
  return AEROGS_DEFAULT_PRESET_DIR;
}

namespace config_detail {

enum class ValueKind { Number, Integer, Vector, Bool, Text, TextList };

struct Field {
  std::string_view section;
  std::string_view key;
  std::string_view unit;
  ValueKind kind;
  // Parsed tokens (unit stripped) -> config; returns an error message or "".
  std::function<std::string(SceneConfig&, const std::vector<std::string>&)> set;
  // Serialised value without unit; nullopt means "omit".
  std::function<std::optional<std::string>(const SceneConfig&)> get;
};

inline std::string vec_text(const Vec3& v) {
  return format_double(v[0]) + " " + format_double(v[1]) + " " + format_double(v[2]);
}

inline std::string parse_number(const std::vector<std::string>& t, double& out) {
  if (t.size() != 1) return "expected one number";
  if (!parse_double(t[0], out) || !std::isfinite(out)) return "bad number '" + t[0] + "'";
  return {};
}

inline std::string parse_vec(const std::vector<std::string>& t, Vec3& out) {
  if (t.size() != 3) return "expected three numbers";
  for (std::size_t i = 0; i < 3; ++i)
    if (!parse_double(t[i], out[i]) || !std::isfinite(out[i])) return "bad number '" + t[i] + "'";
  return {};
}

inline std::string parse_int(const std::vector<std::string>& t, long long& out) {
  if (t.size() != 1) return "expected one integer";
  char* end = nullptr;
  out = std::strtoll(t[0].c_str(), &end, 10);
  if (t[0].empty() || *end != '\0') return "bad integer '" + t[0] + "'";
  return {};
}

inline std::string parse_bool(const std::vector<std::string>& t, bool& out) {
  if (t.size() == 1 && (t[0] == "true" || t[0] == "yes" || t[0] == "on")) return out = true, std::string{};
  if (t.size() == 1 && (t[0] == "false" || t[0] == "no" || t[0] == "off")) return out = false, std::string{};
  return "expected true or false";
}

inline std::string parse_model(const std::string& s, ConstitutiveModel& out) {
  if (s == "fixed_corotated") return out = ConstitutiveModel::FixedCorotated, std::string{};
  if (s == "drucker_prager") return out = ConstitutiveModel::DruckerPrager, std::string{};
  return "unknown constitutive model '" + s + "' (fixed_corotated | drucker_prager)";
}

template <typename T>
Field number(std::string_view sec, std::string_view key, std::string_view unit, T SceneConfig::*member) {
  return {sec, key, unit, ValueKind::Number,
          [member](SceneConfig& c, const std::vector<std::string>& t) { return parse_number(t, c.*member); },
          [member](const SceneConfig& c) -> std::optional<std::string> { return format_double(c.*member); }};
}

// Number field reached through an accessor.
inline Field number_at(std::string_view sec, std::string_view key, std::string_view unit,
                       std::function<double&(SceneConfig&)> ref) {
  return {sec, key, unit, ValueKind::Number,
          [ref](SceneConfig& c, const std::vector<std::string>& t) { return parse_number(t, ref(c)); },
          [ref](const SceneConfig& c) -> std::optional<std::string> {
            return format_double(ref(const_cast<SceneConfig&>(c)));
          }};
}

inline Field vector_at(std::string_view sec, std::string_view key, std::string_view unit,
                       std::function<Vec3&(SceneConfig&)> ref) {
  return {sec, key, unit, ValueKind::Vector,
          [ref](SceneConfig& c, const std::vector<std::string>& t) { return parse_vec(t, ref(c)); },
          [ref](const SceneConfig& c) -> std::optional<std::string> {
            return vec_text(ref(const_cast<SceneConfig&>(c)));
          }};
}

template <typename Int>
Field integer_at(std::string_view sec, std::string_view key, std::function<Int&(SceneConfig&)> ref, long long lo,
                 long long hi) {
  return {sec, key, "", ValueKind::Integer,
          [ref, lo, hi](SceneConfig& c, const std::vector<std::string>& t) {
            long long v = 0;
            if (auto e = parse_int(t, v); !e.empty()) return e;
            if (v < lo || v > hi) return "value out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
            ref(c) = static_cast<Int>(v);
            return std::string{};
          },
          [ref](const SceneConfig& c) -> std::optional<std::string> {
            return std::to_string(ref(const_cast<SceneConfig&>(c)));
          }};
}

inline Field boolean_at(std::string_view sec, std::string_view key, std::function<bool&(SceneConfig&)> ref) {
  return {sec, key, "", ValueKind::Bool,
          [ref](SceneConfig& c, const std::vector<std::string>& t) { return parse_bool(t, ref(c)); },
          [ref](const SceneConfig& c) -> std::optional<std::string> {
            return ref(const_cast<SceneConfig&>(c)) ? "true" : "false";
          }};
}

template <typename T>
Field optional_number(std::string_view sec, std::string_view key, std::string_view unit,
                      std::optional<T> EditOverrides::*member) {
  return {sec, key, unit, ValueKind::Number,
          [member](SceneConfig& c, const std::vector<std::string>& t) {
            double v = 0.0;
            if (auto e = parse_number(t, v); !e.empty()) return e;
            c.edit.*member = v;
            return std::string{};
          },
          [member](const SceneConfig& c) -> std::optional<std::string> {
            if (!(c.edit.*member)) return std::nullopt;
            return format_double(*(c.edit.*member));
          }};
}

inline const std::vector<Field>& schema() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    // [scene]
    f.push_back({"scene", "name", "", ValueKind::Text,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (t.size() != 1) return std::string("expected a single word");
                   c.name = t[0];
                   return std::string{};
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> { return c.name; }});
    f.push_back({"scene", "description", "", ValueKind::Text,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   std::string s;
                   for (const auto& w : t) s += (s.empty() ? "" : " ") + w;
                   c.description = s;
                   return std::string{};
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> {
                   if (c.description.empty()) return std::nullopt;
                   return c.description;
                 }});
    f.push_back({"scene", "kind", "", ValueKind::Text,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (t.size() == 1 && t[0] == "flag") return c.kind = SceneKind::Flag, std::string{};
                   if (t.size() == 1 && t[0] == "block") return c.kind = SceneKind::Block, std::string{};
                   return std::string("expected flag or block");
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> {
                   return c.kind == SceneKind::Flag ? "flag" : "block";
                 }});
    f.push_back(integer_at<int>("scene", "nx", [](SceneConfig& c) -> int& { return c.flag.nx; }, 2, 100000));
    f.push_back(integer_at<int>("scene", "ny", [](SceneConfig& c) -> int& { return c.flag.ny; }, 2, 100000));
    f.push_back(number_at("scene", "width", "m", [](SceneConfig& c) -> double& { return c.flag.width; }));
    f.push_back(number_at("scene", "height", "m", [](SceneConfig& c) -> double& { return c.flag.height; }));
    f.push_back(integer_at<int>("scene", "layers", [](SceneConfig& c) -> int& { return c.flag.layers; }, 1, 64));
    f.push_back(number_at("scene", "layer_spacing", "m", [](SceneConfig& c) -> double& { return c.flag.layer_spacing; }));
    f.push_back({"scene", "block_dims", "", ValueKind::Vector,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (t.size() != 3) return std::string("expected three integers");
                   for (std::size_t i = 0; i < 3; ++i) {
                     long long v = 0;
                     if (auto e = parse_int({t[i]}, v); !e.empty()) return e;
                     if (v < 1 || v > 10000) return std::string("block dimension out of range");
                     c.block.dims[i] = static_cast<int>(v);
                   }
                   return std::string{};
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> {
                   return std::to_string(c.block.dims[0]) + " " + std::to_string(c.block.dims[1]) + " " +
                          std::to_string(c.block.dims[2]);
                 }});
    f.push_back(number_at("scene", "block_spacing", "m", [](SceneConfig& c) -> double& { return c.block.spacing; }));
    f.push_back(vector_at("scene", "origin", "m", [](SceneConfig& c) -> Vec3& { return c.origin; }));
    f.push_back(number("scene", "thickness", "m", &SceneConfig::thickness));
    f.push_back(number("scene", "particle_thickness", "m", &SceneConfig::particle_thickness));
    f.push_back(vector_at("scene", "color", "", [](SceneConfig& c) -> Vec3& { return c.color; }));
    f.push_back(number("scene", "opacity_threshold", "", &SceneConfig::opacity_threshold));
    f.push_back({"scene", "pins", "", ValueKind::TextList,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   c.pins.clear();
                   for (const auto& w : t)
                     if (w != "none") c.pins.push_back(w);
                   return std::string{};
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> {
                   if (c.pins.empty()) return "none";
                   std::string s;
                   for (const auto& p : c.pins) s += (s.empty() ? "" : " ") + p;
                   return s;
                 }});
    // [material]
    f.push_back({"material", "model", "", ValueKind::Text,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (t.size() != 1) return std::string("expected a model name");
                   return parse_model(t[0], c.material.model);
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> { return std::string(to_string(c.material.model)); }});
    f.push_back(number_at("material", "youngs_modulus", "Pa", [](SceneConfig& c) -> double& { return c.material.youngs_modulus; }));
    f.push_back(number_at("material", "poisson_ratio", "", [](SceneConfig& c) -> double& { return c.material.poisson_ratio; }));
    f.push_back(number_at("material", "density", "kg/m^3", [](SceneConfig& c) -> double& { return c.material.density; }));
    f.push_back(number_at("material", "friction_angle", "deg", [](SceneConfig& c) -> double& { return c.material.friction_angle; }));
    // [aero]
    f.push_back(number_at("aero", "drag", "", [](SceneConfig& c) -> double& { return c.coeffs.drag; }));
    f.push_back(number_at("aero", "friction", "", [](SceneConfig& c) -> double& { return c.coeffs.friction; }));
    f.push_back(number_at("aero", "lift", "", [](SceneConfig& c) -> double& { return c.coeffs.lift; }));
    f.push_back(boolean_at("aero", "surface_only", [](SceneConfig& c) -> bool& { return c.aero.surface_only; }));
    f.push_back(boolean_at("aero", "projected_area", [](SceneConfig& c) -> bool& { return c.aero.projected_area; }));
    f.push_back(boolean_at("aero", "track_world_area", [](SceneConfig& c) -> bool& { return c.aero.track_world_area; }));
    // [flow]
    f.push_back(number_at("flow", "fluid_density", "kg/m^3", [](SceneConfig& c) -> double& { return c.flow.rho_fluid; }));
    f.push_back(vector_at("flow", "base_velocity", "m/s", [](SceneConfig& c) -> Vec3& { return c.flow.base_velocity; }));
    f.push_back(vector_at("flow", "sine_amplitude", "m/s", [](SceneConfig& c) -> Vec3& { return c.flow.sine_amplitude; }));
    f.push_back(number_at("flow", "sine_frequency", "rad/s", [](SceneConfig& c) -> double& { return c.flow.sine_frequency; }));
    f.push_back(number_at("flow", "gaussian_sigma", "m/s", [](SceneConfig& c) -> double& { return c.flow.gaussian_sigma; }));
    f.push_back(number_at("flow", "uniform_delta", "", [](SceneConfig& c) -> double& { return c.flow.uniform_delta; }));
    f.push_back({"flow", "change_time", "s", ValueKind::Number,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (!c.flow.change) c.flow.change = FlowSwitch{};
                   return parse_number(t, c.flow.change->time);
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> {
                   if (!c.flow.change) return std::nullopt;
                   return format_double(c.flow.change->time);
                 }});
    f.push_back({"flow", "change_velocity", "m/s", ValueKind::Vector,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (!c.flow.change) c.flow.change = FlowSwitch{};
                   return parse_vec(t, c.flow.change->base_velocity);
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> {
                   if (!c.flow.change) return std::nullopt;
                   return vec_text(c.flow.change->base_velocity);
                 }});
    // [step]
    f.push_back(number_at("step", "frame_dt", "s", [](SceneConfig& c) -> double& { return c.step.frame_dt; }));
    f.push_back(integer_at<int>("step", "substeps_per_frame", [](SceneConfig& c) -> int& { return c.step.substeps_per_frame; }, 1, 100000000));
    f.push_back(vector_at("step", "gravity", "m/s^2", [](SceneConfig& c) -> Vec3& { return c.step.gravity; }));
    f.push_back(number("step", "velocity_ceiling", "m/s", &SceneConfig::velocity_ceiling));
    // [grid]
    f.push_back(integer_at<int>("grid", "resolution", [](SceneConfig& c) -> int& { return c.grid_resolution; }, 8, 4096));
    f.push_back(number("grid", "padding", "m", &SceneConfig::grid_padding));
    f.push_back(integer_at<int>("grid", "margin", [](SceneConfig& c) -> int& { return c.grid_margin; }, 0, 64));
    f.push_back(integer_at<int>("grid", "boundary_band", [](SceneConfig& c) -> int& { return c.boundary_band; }, 0, 64));
    f.push_back(number("grid", "pin_node_radius", "", &SceneConfig::pin_node_radius));
    // [camera]
    f.push_back(vector_at("camera", "position", "m", [](SceneConfig& c) -> Vec3& { return c.camera.position; }));
    f.push_back(vector_at("camera", "look_at", "m", [](SceneConfig& c) -> Vec3& { return c.camera.look_at; }));
    f.push_back(vector_at("camera", "up", "", [](SceneConfig& c) -> Vec3& { return c.camera.up; }));
    f.push_back(number_at("camera", "fov", "deg", [](SceneConfig& c) -> double& { return c.camera.fov_y; }));
    f.push_back(integer_at<int>("camera", "width", [](SceneConfig& c) -> int& { return c.camera.width; }, 1, 16384));
    f.push_back(integer_at<int>("camera", "height", [](SceneConfig& c) -> int& { return c.camera.height; }, 1, 16384));
    // [light]
    f.push_back(vector_at("light", "direction", "", [](SceneConfig& c) -> Vec3& { return c.light.direction; }));
    f.push_back({"light", "shading", "", ValueKind::Text,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (t.size() == 1 && t[0] == "diffuse") return c.shading = ShadingMode::Diffuse, std::string{};
                   if (t.size() == 1 && t[0] == "phong") return c.shading = ShadingMode::Phong, std::string{};
                   return std::string("expected diffuse or phong");
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> {
                   return c.shading == ShadingMode::Diffuse ? "diffuse" : "phong";
                 }});
    f.push_back(number_at("light", "ambient", "", [](SceneConfig& c) -> double& { return c.light.ambient; }));
    f.push_back(number_at("light", "diffuse", "", [](SceneConfig& c) -> double& { return c.light.diffuse; }));
    f.push_back(number_at("light", "specular", "", [](SceneConfig& c) -> double& { return c.light.specular; }));
    f.push_back(number_at("light", "shininess", "", [](SceneConfig& c) -> double& { return c.light.shininess; }));
    f.push_back(number_at("light", "ambient_radiance", "", [](SceneConfig& c) -> double& { return c.light.ambient_radiance; }));
    f.push_back(number_at("light", "incident_radiance", "", [](SceneConfig& c) -> double& { return c.light.incident_radiance; }));
    // [output]
    f.push_back({"output", "directory", "", ValueKind::Text,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (t.size() != 1) return std::string("expected a path without spaces");
                   c.output_dir = t[0];
                   return std::string{};
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> { return c.output_dir; }});
    f.push_back(integer_at<int>("output", "frames", [](SceneConfig& c) -> int& { return c.frames; }, 1, 10000000));
    f.push_back(number("output", "fps", "", &SceneConfig::fps));
    f.push_back({"output", "seed", "", ValueKind::Integer,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (t.size() != 1) return std::string("expected one integer");
                   char* end = nullptr;
                   const unsigned long long v = std::strtoull(t[0].c_str(), &end, 10);
                   if (t[0].empty() || *end != '\0' || t[0][0] == '-') return "bad seed '" + t[0] + "'";
                   c.flow.seed = v;
                   return std::string{};
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> { return std::to_string(c.flow.seed); }});
    f.push_back(boolean_at("output", "dump_particles", [](SceneConfig& c) -> bool& { return c.dump_particles; }));
    f.push_back(boolean_at("output", "dump_patches", [](SceneConfig& c) -> bool& { return c.dump_patches; }));
    f.push_back(integer_at<unsigned>("output", "threads", [](SceneConfig& c) -> unsigned& { return c.threads; }, 1, 1024));
    // [edit]
    f.push_back({"edit", "material_preset", "", ValueKind::Text,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (t.size() != 1) return std::string("expected a preset name");
                   c.edit.material_preset = t[0];
                   return std::string{};
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> { return c.edit.material_preset; }});
    f.push_back({"edit", "model", "", ValueKind::Text,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   if (t.size() != 1) return std::string("expected a model name");
                   ConstitutiveModel m{};
                   if (auto e = parse_model(t[0], m); !e.empty()) return e;
                   c.edit.model = m;
                   return std::string{};
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> {
                   if (!c.edit.model) return std::nullopt;
                   return std::string(to_string(*c.edit.model));
                 }});
    f.push_back(optional_number("edit", "youngs_modulus", "Pa", &EditOverrides::youngs_modulus));
    f.push_back(optional_number("edit", "poisson_ratio", "", &EditOverrides::poisson_ratio));
    f.push_back(optional_number("edit", "density", "kg/m^3", &EditOverrides::density));
    f.push_back(optional_number("edit", "friction_angle", "deg", &EditOverrides::friction_angle));
    f.push_back({"edit", "color", "", ValueKind::Vector,
                 [](SceneConfig& c, const std::vector<std::string>& t) {
                   Vec3 v;
                   if (auto e = parse_vec(t, v); !e.empty()) return e;
                   c.edit.color = v;
                   return std::string{};
                 },
                 [](const SceneConfig& c) -> std::optional<std::string> {
                   if (!c.edit.color) return std::nullopt;
                   return vec_text(*c.edit.color);
                 }});
    return f;
  }();
  return fields;
}

inline const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : schema())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

}  // namespace config_detail

// Checks cross-field invariants; throws ConfigError.
inline void validate(const SceneConfig& c) {
  auto fail = [&](const std::string& m) { throw ConfigError("config '" + c.name + "': " + m); };
  try {
    validate(c.material);
    validate(c.coeffs);
    validate(c.flow);
    validate(c.step);
    validate(c.camera);
    validate(c.light);
  } catch (const DomainError& e) {
    fail(e.what());
  }
  if (c.frames <= 0) fail("frame count must be positive");
  if (!(c.thickness > 0.0)) fail("thickness must be positive");
  if (c.particle_thickness < 0.0) fail("particle_thickness must be non-negative");
  if (!(c.opacity_threshold >= 0.0 && c.opacity_threshold <= 1.0)) fail("opacity_threshold must lie in [0, 1]");
  if (c.kind == SceneKind::Flag) {
    if (c.flag.nx < 2 || c.flag.ny < 2) fail("flag needs nx, ny >= 2");
    if (!(c.flag.width > 0.0 && c.flag.height > 0.0)) fail("flag width and height must be positive");
    if (c.flag.layer_spacing < 0.0) fail("flag layer_spacing must be non-negative");
  } else {
    if (!(c.block.spacing > 0.0)) fail("block_spacing must be positive");
  }
  if (c.grid_padding < 0.0) fail("grid padding must be non-negative");
  if (c.boundary_band >= c.grid_resolution / 2) fail("boundary band too wide for the grid");
  if (c.pin_node_radius < 0.0) fail("pin_node_radius must be non-negative");
  if (!(c.velocity_ceiling > 0.0)) fail("velocity_ceiling must be positive");
  if (!(c.fps > 0.0)) fail("fps must be positive");
  for (std::size_t i = 0; i < 3; ++i)
    if (c.color[i] < 0.0 || c.color[i] > 1.0) fail("color channels must lie in [0, 1]");
}

inline SceneConfig load_config(const std::filesystem::path& path, const std::filesystem::path& preset_dir,
                               int depth = 0);

inline std::filesystem::path preset_path(const std::filesystem::path& preset_dir, const std::string& name) {
  return preset_dir / (name + ".cfg");
}

// Applies the text of a config on top of `base`. `origin` names the source
// in error messages.
inline SceneConfig parse_config(std::string_view text, SceneConfig base, const std::string& origin,
                                const std::filesystem::path& preset_dir, int depth = 0) {
  using namespace config_detail;
  std::istringstream in{std::string(text)};
  std::string line, section;
  std::size_t line_no = 0;
  bool seen_section = false;
  auto fail = [&](const std::string& m) {
    throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + m);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string content = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (content.empty()) continue;
    if (content.front() == '[') {
      if (content.back() != ']') fail("malformed section header");
      section = trim(std::string_view(content).substr(1, content.size() - 2));
      bool known = false;
      for (const auto& f : schema()) known |= f.section == section;
      if (!known) fail("unknown section [" + section + "]");
      seen_section = true;
      continue;
    }
    const auto eq = content.find('=');
    if (eq == std::string::npos) fail("expected 'key = value'");
    const std::string key = trim(std::string_view(content).substr(0, eq));
    std::vector<std::string> tokens = split_words(content.substr(eq + 1));
    if (!seen_section) {
      if (key != "preset") fail("only 'preset' may appear before the first section");
      if (tokens.size() != 1) fail("expected a preset name");
      if (depth > 8) fail("preset nesting too deep");
      const auto path = preset_path(preset_dir, tokens[0]);
      if (!std::filesystem::exists(path)) fail("unknown preset '" + tokens[0] + "'");
      base = load_config(path, preset_dir, depth + 1);
      continue;
    }
    const Field* field = find_field(section, key);
    if (!field) fail("unknown key '" + key + "' in [" + section + "]");
    if (tokens.empty()) fail("missing value for '" + key + "'");
    if (!field->unit.empty()) {
      if (tokens.back() != field->unit) fail("'" + key + "' needs unit '" + std::string(field->unit) + "'");
      tokens.pop_back();
    }
    if (const std::string err = field->set(base, tokens); !err.empty()) fail(key + ": " + err);
  }
  base.step.dt = base.step.frame_dt / base.step.substeps_per_frame;
  return base;
}

inline SceneConfig load_config(const std::filesystem::path& path, const std::filesystem::path& preset_dir, int depth) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, SceneConfig{}, path.string(), preset_dir, depth);
}

inline SceneConfig load_config(const std::filesystem::path& path) { return load_config(path, default_preset_dir()); }

inline SceneConfig load_preset(const std::string& name, const std::filesystem::path& preset_dir = default_preset_dir()) {
  const auto path = preset_path(preset_dir, name);
  if (!std::filesystem::exists(path)) throw ConfigError("unknown preset '" + name + "'");
  return load_config(path, preset_dir);
}

// Full textual form; parse_config(serialize_config(c)) == c.
inline std::string serialize_config(const SceneConfig& c) {
  std::string out;
  std::string_view section;
  for (const auto& f : config_detail::schema()) {
    const auto value = f.get(c);
    if (!value) continue;
    if (f.section != section) {
      if (!out.empty()) out += '\n';
      out += "[" + std::string(f.section) + "]\n";
      section = f.section;
    }
    out += std::string(f.key) + " = " + *value;
    if (!f.unit.empty()) out += " " + std::string(f.unit);
    out += '\n';
  }
  return out;
}

struct PresetInfo {
  std::string name;
  std::string description;
};

inline std::vector<PresetInfo> list_presets(const std::filesystem::path& preset_dir = default_preset_dir()) {
  std::vector<PresetInfo> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(preset_dir, ec)) throw IoError("preset directory '" + preset_dir.string() + "' not found");
  for (const auto& entry : std::filesystem::directory_iterator(preset_dir)) {
    if (entry.path().extension() != ".cfg") continue;
    const std::string name = entry.path().stem().string();
    out.push_back({name, load_config(entry.path(), preset_dir).description});
  }
  std::sort(out.begin(), out.end(), [](const PresetInfo& a, const PresetInfo& b) { return a.name < b.name; });
  return out;
}

}  // namespace aerogs
