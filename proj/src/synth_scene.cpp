#include "wristloc/errors.hpp"
#include "wristloc/synthworld.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace wristloc::synth {

double snap6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return std::strtod(buf, nullptr);
}

std::string_view to_string(Shape shape) {
  switch (shape) {
    case Shape::Box: return "box";
    case Shape::Cylinder: return "cylinder";
    case Shape::Sphere: return "sphere";
    case Shape::Composite: return "composite";
  }
  return "box";
}

std::vector<std::string> TagSet::names() const {
  std::vector<std::string> out;
  if (vertical) out.emplace_back("vertical");
  if (wide) out.emplace_back("wide");
  if (irregular) out.emplace_back("irregular");
  if (unusual_design) out.emplace_back("unusual_design");
  return out;
}

TagSet TagSet::from_names(const std::vector<std::string>& names) {
  TagSet t;
  for (const auto& n : names) {
    if (n == "vertical") {
      t.vertical = true;
    } else if (n == "wide") {
      t.wide = true;
    } else if (n == "irregular") {
      t.irregular = true;
    } else if (n == "unusual_design") {
      t.unusual_design = true;
    } else {
      fail(ErrorCode::SchemaError, "unknown tag \"" + n + "\"");
    }
  }
  return t;
}

TagSet geometric_tags(double width, double depth, double height, bool unusual, bool irregular) {
  const double side = std::max(width, depth);
  TagSet t;
  t.vertical = height > side;
  t.wide = side > 2.0 * height;
  t.unusual_design = unusual;
  t.irregular = irregular;
  return t;
}

void SceneObject::place_at(double x, double y) {
  top_center = Vec3(snap6(x), snap6(y), height);
}

void LightingSpec::validate() const {
  if (!(brightness >= 0.3 && brightness <= 1.7)) {
    fail(ErrorCode::InvalidArgument, "brightness outside [0.3, 1.7]");
  }
  for (double c : tint) {
    if (!(c >= 0.5 && c <= 1.5)) fail(ErrorCode::InvalidArgument, "tint outside [0.5, 1.5]");
  }
}

bool LightingSpec::unusual() const {
  if (brightness < 0.7 || brightness > 1.3) return true;
  return std::any_of(tint.begin(), tint.end(), [](double c) { return c < 0.8 || c > 1.2; });
}

namespace {

struct NamedColor {
  const char* name;
  Rgb rgb;
};

constexpr std::array<NamedColor, 10> kPalette{{
    {"red", {0.85, 0.15, 0.12}},
    {"green", {0.15, 0.65, 0.20}},
    {"blue", {0.15, 0.30, 0.85}},
    {"yellow", {0.92, 0.85, 0.15}},
    {"orange", {0.95, 0.50, 0.10}},
    {"purple", {0.55, 0.20, 0.70}},
    {"white", {0.93, 0.93, 0.91}},
    {"black", {0.10, 0.10, 0.12}},
    {"cyan", {0.10, 0.75, 0.80}},
    {"pink", {0.95, 0.50, 0.70}},
}};

Rgb jitter(Rng& rng, const Rgb& c) {
  Rgb out;
  for (int k = 0; k < 3; ++k) out[k] = snap6(std::clamp(c[k] + rng.uniform(-0.04, 0.04), 0.0, 1.0));
  return out;
}

Rgb darken(const Rgb& c, double f) { return {c[0] * f, c[1] * f, c[2] * f}; }

double dim(Rng& rng, double lo, double hi) { return snap6(rng.uniform(lo, hi)); }

std::string noun_for(Shape shape, Rng& rng) {
  static constexpr std::array<const char*, 2> box{"box", "block"};
  static constexpr std::array<const char*, 2> cyl{"cylinder", "can"};
  switch (shape) {
    case Shape::Box: return box[rng.below(box.size())];
    case Shape::Cylinder: return cyl[rng.below(cyl.size())];
    case Shape::Sphere: return "ball";
    case Shape::Composite: break;
  }
  return "object";
}

// Second word of "<size> <color> <noun>".
std::string color_word(const std::string& name) {
  const auto a = name.find(' ');
  if (a == std::string::npos) return {};
  const auto b = name.find(' ', a + 1);
  return name.substr(a + 1, b == std::string::npos ? std::string::npos : b - a - 1);
}

// Height class of the object, so that a name pins its top to a ~15 mm band.
std::string size_word(double height) {
  static constexpr std::array<std::pair<double, const char*>, 6> bands{
      {{20.0, "flat"}, {35.0, "low"}, {50.0, "squat"}, {65.0, "medium"}, {80.0, "high"}, {95.0, "tall"}}};
  for (const auto& [limit, word] : bands) {
    if (height < limit) return word;
  }
  return "towering";
}

ShapePart single_part(Primitive p, double w, double d, double h, const Rgb& color) {
  ShapePart part;
  part.primitive = p;
  part.width = w;
  part.depth = d;
  part.height = h;
  part.color = color;
  return part;
}

}  // namespace

SceneObject sample_object(Rng& rng, ObjectProfile profile) {
  SceneObject obj;
  const auto& base_color = kPalette[rng.below(kPalette.size())];
  obj.color = jitter(rng, base_color.rgb);
  std::string noun;

  switch (profile) {
    case ObjectProfile::Regular: {
      const auto pick = rng.below(3);
      if (pick == 2) {
        obj.shape = Shape::Sphere;
        obj.width = obj.depth = obj.height = dim(rng, 30.0, 60.0);
        obj.parts = {single_part(Primitive::Sphere, obj.width, obj.depth, obj.height, obj.color)};
      } else {
        obj.shape = pick == 0 ? Shape::Box : Shape::Cylinder;
        obj.width = dim(rng, 30.0, 65.0);
        obj.depth = obj.shape == Shape::Box ? dim(rng, 30.0, 65.0) : obj.width;
        const double side = std::max(obj.width, obj.depth);
        obj.height = dim(rng, 0.55 * side, 0.95 * side);
        obj.parts = {single_part(obj.shape == Shape::Box ? Primitive::Box : Primitive::Cylinder,
                                 obj.width, obj.depth, obj.height, obj.color)};
      }
      break;
    }
    case ObjectProfile::Vertical: {
      obj.shape = rng.bernoulli(0.5) ? Shape::Box : Shape::Cylinder;
      obj.width = dim(rng, 20.0, 40.0);
      obj.depth = obj.shape == Shape::Box ? dim(rng, 20.0, 40.0) : obj.width;
      const double side = std::max(obj.width, obj.depth);
      obj.height = dim(rng, std::max(1.3 * side, 50.0), 120.0);
      obj.parts = {single_part(obj.shape == Shape::Box ? Primitive::Box : Primitive::Cylinder,
                               obj.width, obj.depth, obj.height, obj.color)};
      break;
    }
    case ObjectProfile::Wide: {
      obj.shape = rng.bernoulli(0.5) ? Shape::Box : Shape::Cylinder;
      obj.width = dim(rng, 55.0, 85.0);
      obj.depth = obj.shape == Shape::Box ? dim(rng, 45.0, 85.0) : obj.width;
      const double side = std::max(obj.width, obj.depth);
      obj.height = dim(rng, 10.0, 0.4 * side);
      obj.parts = {single_part(obj.shape == Shape::Box ? Primitive::Box : Primitive::Cylinder,
                               obj.width, obj.depth, obj.height, obj.color)};
      break;
    }
    case ObjectProfile::UnusualDesign: {
      // Symmetric stack: a base primitive with a smaller, contrasting top piece.
      obj.shape = Shape::Composite;
      obj.width = dim(rng, 35.0, 65.0);
      obj.depth = dim(rng, 35.0, 65.0);
      const double base_h = dim(rng, 15.0, 40.0);
      const double top_h = dim(rng, 15.0, 40.0);
      obj.height = snap6(base_h + top_h);
      const auto& contrast = kPalette[(rng.below(kPalette.size() - 1) + 1 +
                                       static_cast<std::size_t>(&base_color - kPalette.data())) %
                                      kPalette.size()];
      const Rgb top_color = jitter(rng, contrast.rgb);
      const double shrink = rng.uniform(0.45, 0.75);
      ShapePart base = single_part(Primitive::Box, obj.width, obj.depth, base_h, obj.color);
      ShapePart top = single_part(rng.bernoulli(0.5) ? Primitive::Cylinder : Primitive::Box,
                                  snap6(obj.width * shrink), snap6(obj.depth * shrink), top_h,
                                  top_color);
      if (top.primitive == Primitive::Cylinder) top.depth = top.width = std::min(top.width, top.depth);
      top.base_z = base_h;
      obj.parts = {base, top};
      break;
    }
    case ObjectProfile::Irregular: {
      // Asymmetric: the tallest piece sits off-center on a low base.
      obj.shape = Shape::Composite;
      obj.width = dim(rng, 40.0, 75.0);
      obj.depth = dim(rng, 35.0, 70.0);
      const double base_h = dim(rng, 8.0, 20.0);
      const double top_h = dim(rng, 15.0, 45.0);
      obj.height = snap6(base_h + top_h);
      const double tw = snap6(obj.width * rng.uniform(0.3, 0.45));
      const double td = snap6(obj.depth * rng.uniform(0.3, 0.45));
      const double sx = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double sy = rng.bernoulli(0.5) ? 1.0 : -1.0;
      ShapePart base = single_part(Primitive::Box, obj.width, obj.depth, base_h, obj.color);
      ShapePart top = single_part(Primitive::Box, tw, td, top_h, darken(obj.color, 0.8));
      top.offset_x = snap6(sx * (obj.width - tw) / 2.0 * rng.uniform(0.6, 1.0));
      top.offset_y = snap6(sy * (obj.depth - td) / 2.0 * rng.uniform(0.6, 1.0));
      top.base_z = base_h;
      ShapePart nub = single_part(Primitive::Cylinder, snap6(tw * 0.8), snap6(tw * 0.8),
                                  snap6(base_h * 0.7), darken(obj.color, 0.9));
      nub.offset_x = snap6(-top.offset_x * 0.8);
      nub.offset_y = snap6(top.offset_y * 0.5);
      nub.base_z = base_h;
      obj.parts = {base, top, nub};
      break;
    }
  }

  const bool unusual = profile == ObjectProfile::UnusualDesign;
  const bool irregular = profile == ObjectProfile::Irregular;
  obj.tags = geometric_tags(obj.width, obj.depth, obj.height, unusual, irregular);
  if (obj.shape == Shape::Composite) {
    static constexpr std::array<const char*, 2> unusual_nouns{"figurine", "tower"};
    static constexpr std::array<const char*, 2> irregular_nouns{"gadget", "cluster"};
    noun = unusual ? unusual_nouns[rng.below(2)] : irregular_nouns[rng.below(2)];
  } else {
    noun = noun_for(obj.shape, rng);
  }
  obj.name = size_word(obj.height) + " " + base_color.name + " " +
             noun;
  obj.top_center = Vec3(0.0, 0.0, obj.height);
  return obj;
}

SceneObject sample_object(Rng& rng) {
  return sample_object(rng, static_cast<ObjectProfile>(rng.below(kProfileCount)));
}

namespace {

bool overlaps(const SceneObject& a, const SceneObject& b, double gap) {
  return std::abs(a.top_center.x() - b.top_center.x()) < (a.width + b.width) / 2.0 + gap &&
         std::abs(a.top_center.y() - b.top_center.y()) < (a.depth + b.depth) / 2.0 + gap;
}

void place_randomly(Rng& rng, const Workspace& ws, SceneObject& obj,
                    const std::vector<SceneObject>& placed) {
  constexpr int kAttempts = 100;
  constexpr double kGap = 5.0;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const double hx = obj.width / 2.0;
    const double hy = obj.depth / 2.0;
    if (ws.extent().x() <= 2.0 * hx || ws.extent().y() <= 2.0 * hy) break;
    obj.place_at(rng.uniform(ws.min_corner.x() + hx, ws.max_corner.x() - hx),
                 rng.uniform(ws.min_corner.y() + hy, ws.max_corner.y() - hy));
    const bool clear = std::none_of(placed.begin(), placed.end(),
                                    [&](const SceneObject& o) { return overlaps(o, obj, kGap); });
    if (clear) return;
  }
  fail(ErrorCode::PlacementFailure,
       "could not place \"" + obj.name + "\" without overlap in 100 attempts");
}

}  // namespace

Scene sample_scene_with_target(Rng& rng, const Workspace& workspace, double multi_object_prob,
                               SceneObject target) {
  if (!(multi_object_prob >= 0.0 && multi_object_prob <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "multi_object_prob must be in [0, 1]");
  }
  Scene scene;
  scene.workspace = workspace;
  place_randomly(rng, workspace, target, scene.objects);
  scene.objects.push_back(std::move(target));
  scene.target_index = 0;

  if (rng.bernoulli(multi_object_prob)) {
    const auto distractors = 1 + rng.below(3);
    for (std::uint64_t i = 0; i < distractors; ++i) {
      // A distractor never shares the target's color word, so the prompt
      // always singles out one object.
      SceneObject d = sample_object(rng);
      for (int retry = 0; color_word(d.name) == color_word(scene.objects[0].name) && retry < 256; ++retry) {
        d = sample_object(rng);
      }
      if (d.name == scene.objects[0].name) d.name = "other " + d.name;
      d.group = "distractor";
      place_randomly(rng, workspace, d, scene.objects);
      scene.objects.push_back(std::move(d));
    }
  }
  return scene;
}

LightingSpec sample_lighting(Rng& rng, double unusual_prob) {
  LightingSpec light;
  if (!rng.bernoulli(unusual_prob)) {
    light.brightness = snap6(rng.uniform(0.8, 1.2));
    for (auto& c : light.tint) c = snap6(rng.uniform(0.9, 1.1));
    return light;
  }
  // Either a strong brightness change or a strong colour cast (or both).
  const auto mode = rng.below(3);
  light.brightness = snap6(rng.uniform(0.8, 1.2));
  for (auto& c : light.tint) c = snap6(rng.uniform(0.9, 1.1));
  if (mode != 1) {
    light.brightness = snap6(rng.bernoulli(0.5) ? rng.uniform(0.3, 0.6) : rng.uniform(1.4, 1.7));
  }
  if (mode != 0) {
    const auto channel = rng.below(3);
    light.tint[channel] = snap6(rng.bernoulli(0.5) ? rng.uniform(0.5, 0.7) : rng.uniform(1.3, 1.5));
  }
  return light;
}

Scene sample_scene(std::uint64_t rng_seed, const Workspace& workspace, double multi_object_prob) {
  Rng rng(rng_seed);
  SceneObject target = sample_object(rng);
  target.group = "target";
  Scene scene = sample_scene_with_target(rng, workspace, multi_object_prob, std::move(target));
  scene.lighting = sample_lighting(rng, 0.3);
  return scene;
}

}  // namespace wristloc::synth
