#include <string>

#include <gtest/gtest.h>

#include "aerogs/config.hpp"
#include "test_util.hpp"

using namespace aerogs;
using aerogs::test::ScratchDir;

namespace {

const std::filesystem::path kPresets = AEROGS_TEST_PRESET_DIR;

SceneConfig parse(std::string_view text) { return parse_config(text, SceneConfig{}, "test", kPresets); }

}  // namespace

TEST(Presets, AllTenLoadAndValidate) {
  const auto list = list_presets(kPresets);
  ASSERT_EQ(list.size(), 10u);
  for (const auto& p : list) {
    SCOPED_TRACE(p.name);
    const SceneConfig c = load_preset(p.name, kPresets);
    EXPECT_NO_THROW(validate(c));
    EXPECT_EQ(c.name, p.name);
    EXPECT_FALSE(p.description.empty());
  }
}

TEST(Presets, SerializationRoundTrips) {
  for (const auto& p : list_presets(kPresets)) {
    SCOPED_TRACE(p.name);
    const SceneConfig c = load_preset(p.name, kPresets);
    EXPECT_EQ(parse(serialize_config(c)), c);
  }
}

TEST(Presets, FlagPatternTwoValues) {
  const SceneConfig c = load_preset("flag-pattern-2", kPresets);
  EXPECT_EQ(c.kind, SceneKind::Flag);
  EXPECT_EQ(c.material.model, ConstitutiveModel::FixedCorotated);
  EXPECT_EQ(c.material.youngs_modulus, 3e3);
  EXPECT_EQ(c.material.poisson_ratio, 0.3);
  EXPECT_EQ(c.material.density, 30.0);
  EXPECT_EQ(c.coeffs.drag, 0.1);
  EXPECT_EQ(c.coeffs.friction, 0.3);
  EXPECT_EQ(c.coeffs.lift, 0.005);
  EXPECT_EQ(c.flow.base_velocity, (Vec3{2.5, 0.5, 0.0}));
  EXPECT_EQ(c.grid_resolution, 64);
  EXPECT_EQ(c.frames, 250);
  EXPECT_EQ(c.pins, (std::vector<std::string>{"top-left", "top-right", "bottom-right"}));
  EXPECT_DOUBLE_EQ(c.step.dt, 0.04 / c.step.substeps_per_frame);
}

TEST(Parse, PresetBaseWithOverrides) {
  const SceneConfig c = parse("preset = flag-pattern-2\n[material]\nyoungs_modulus = 5e3 Pa\n[output]\nframes = 3\n");
  EXPECT_EQ(c.material.youngs_modulus, 5e3);
  EXPECT_EQ(c.frames, 3);
  EXPECT_EQ(c.material.density, 30.0);
}

TEST(Parse, EditSection) {
  const SceneConfig c = parse("preset = sand\n[edit]\nmaterial_preset = foam\ncolor = 1 1 1\n");
  ASSERT_TRUE(c.edit.material_preset);
  EXPECT_EQ(*c.edit.material_preset, "foam");
  EXPECT_EQ(c.edit.color, (Vec3{1, 1, 1}));
  EXPECT_EQ(parse(serialize_config(c)), c);
}

TEST(Parse, CommentsAndBlankLines) {
  const SceneConfig c = parse("# top\n\n[output]  # trailing\nframes = 7   # seven\n");
  EXPECT_EQ(c.frames, 7);
}

TEST(Parse, Errors) {
  EXPECT_THROW(parse("[nowhere]\n"), ConfigError);
  EXPECT_THROW(parse("[material]\nstiffness = 3\n"), ConfigError);
  EXPECT_THROW(parse("[material]\nyoungs_modulus = 3e3\n"), ConfigError);       // missing unit
  EXPECT_THROW(parse("[material]\nyoungs_modulus = 3e3 GPa\n"), ConfigError);   // wrong unit
  EXPECT_THROW(parse("[material]\nyoungs_modulus = abc Pa\n"), ConfigError);
  EXPECT_THROW(parse("[output]\nframes = 2.5\n"), ConfigError);
  EXPECT_THROW(parse("frames = 2\n"), ConfigError);
  EXPECT_THROW(parse("preset = no-such-scene\n"), ConfigError);
  EXPECT_THROW(parse("[material\n"), ConfigError);
  EXPECT_THROW(parse("[output]\nframes\n"), ConfigError);
}

TEST(Parse, ErrorNamesTheLine) {
  try {
    parse("[output]\nframes = 2\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test:3"), std::string::npos) << e.what();
  }
}

TEST(Validate, RejectsBadValues) {
  SceneConfig c = load_preset("flag-pattern-2", kPresets);
  c.material.poisson_ratio = 0.5;
  EXPECT_THROW(validate(c), ConfigError);
  c = load_preset("flag-pattern-2", kPresets);
  c.frames = 0;
  EXPECT_THROW(validate(c), ConfigError);
  c = load_preset("flag-pattern-2", kPresets);
  c.flow.uniform_delta = 1.0;
  EXPECT_THROW(validate(c), ConfigError);
  c = load_preset("flag-pattern-2", kPresets);
  c.color = {1.5, 0, 0};
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Load, MissingFileIsConfigError) {
  ScratchDir dir("cfg");
  EXPECT_THROW(load_config(dir.path() / "absent.cfg", kPresets), ConfigError);
  EXPECT_THROW(load_preset("absent", kPresets), ConfigError);
}
