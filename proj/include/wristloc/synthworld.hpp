#pragma once

#include "wristloc/geometry.hpp"
#include "wristloc/image.hpp"
#include "wristloc/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace wristloc::synth {

enum class Shape { Box, Cylinder, Sphere, Composite };
enum class Primitive { Box, Cylinder, Sphere };

std::string_view to_string(Shape shape);

/// Property flags used by the error analysis. vertical and wide are derived
/// from the footprint/height; unusual_design and irregular mark the two
/// composite variants.
struct TagSet {
  bool vertical = false;
  bool wide = false;
  bool irregular = false;
  bool unusual_design = false;

  std::vector<std::string> names() const;
  static TagSet from_names(const std::vector<std::string>& names);
  friend bool operator==(const TagSet&, const TagSet&) = default;
};

/// One primitive of an object, in object-local coordinates: offset is
/// relative to the footprint center, base_z is the bottom height.
struct ShapePart {
  Primitive primitive = Primitive::Box;
  double offset_x = 0.0;
  double offset_y = 0.0;
  double base_z = 0.0;
  double width = 0.0;
  double depth = 0.0;
  double height = 0.0;
  Rgb color{};
};

struct SceneObject {
  Shape shape = Shape::Box;
  double width = 0.0;   // footprint along base x, mm
  double depth = 0.0;   // footprint along base y, mm
  double height = 0.0;  // mm
  Rgb color{};
  Vec3 top_center = Vec3::Zero();
  TagSet tags;
  std::string name;  // name used in prompts, e.g. "tall red cylinder"
  std::string group;
  std::vector<ShapePart> parts;

  double footprint_x() const { return top_center.x(); }
  double footprint_y() const { return top_center.y(); }
  void place_at(double x, double y);
};

/// Tags recomputed from geometry; vertical iff height > max footprint side,
/// wide iff max footprint side > 2 * height.
TagSet geometric_tags(double width, double depth, double height, bool unusual, bool irregular);

struct LightingSpec {
  double brightness = 1.0;
  Rgb tint{1.0, 1.0, 1.0};

  void validate() const;
  /// Unusual when brightness is outside [0.7, 1.3] or any tint component is
  /// outside [0.8, 1.2].
  bool unusual() const;
};

/// Mostly mild lighting; with probability unusual_prob a strong brightness
/// change and/or colour cast that trips LightingSpec::unusual().
LightingSpec sample_lighting(Rng& rng, double unusual_prob);

struct Scene {
  std::vector<SceneObject> objects;
  std::size_t target_index = 0;
  LightingSpec lighting;
  Workspace workspace = Workspace::default_workspace();

  const SceneObject& target() const { return objects.at(target_index); }
  bool multi_object() const { return objects.size() > 1; }
};

enum class ObjectProfile { Regular, Vertical, Wide, UnusualDesign, Irregular };
constexpr int kProfileCount = 5;

/// Samples a fresh object (not yet placed). Dimensions are snapped to the
/// 1e-6 mm serialization grid so metadata round-trips exactly.
SceneObject sample_object(Rng& rng, ObjectProfile profile);
SceneObject sample_object(Rng& rng);

/// Places `target` (and, with probability multi_object_prob, 1-3 distractors
/// whose names differ from the target's) without footprint overlap.
/// Throws PlacementFailure after 100 failed attempts for one object.
Scene sample_scene_with_target(Rng& rng, const Workspace& workspace, double multi_object_prob,
                               SceneObject target);

Scene sample_scene(std::uint64_t rng_seed, const Workspace& workspace, double multi_object_prob);

enum class TrajectoryKind { Linear, Curved, Triangular };
std::string_view to_string(TrajectoryKind kind);

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::Linear;
  Pose start_pose;
  double hover_height = 80.0;
  double frames_per_second = 4.0;
  double duration = 3.0;
  /// Lateral displacement of the arc control point / corner waypoint as a
  /// signed fraction of the start-end distance. Ignored for linear.
  double bend = 0.3;
};

/// TCP poses from start_pose to the hover point above target.top_center.
/// Frame count is max(2, round(duration * fps)); all poses look down.
std::vector<Pose> generate_trajectory(const TrajectorySpec& spec, const SceneObject& target);

/// Flat-shaded painter's-algorithm render of the scene from a camera pose,
/// with the gripper fingers drawn in a fixed image region and lighting
/// applied as a per-pixel multiply.
Raster render_frame(const Scene& scene, const Pose& camera_pose, const CameraModel& cam);

Rgb table_color();
Rgb gripper_color();
/// True for pixels covered by the gripper stub in a width x height image.
bool in_gripper_region(int row, int col, int width, int height);

struct DatasetConfig {
  Workspace workspace = Workspace::default_workspace();
  CameraModel camera = CameraModel::wrist_default();
  double multi_object_prob = 0.4;
  double unusual_lighting_prob = 0.3;
  double hover_height = 80.0;
  double min_duration = 2.5;
  double max_duration = 5.0;
  int jobs = 1;

  void validate() const;
};

/// One frame as written to frames.jsonl.
struct FrameMeta {
  double t = 0.0;
  std::string image;  // relative to the dataset root
  Pose tcp_pose;
  Vec3 target = Vec3::Zero();
  std::string group;
  std::string sequence_id;
  TagSet tags;
  bool multi_object = false;
  bool lighting_unusual = false;
  std::string prompt_object;

  friend bool operator==(const FrameMeta&, const FrameMeta&) = default;
};

struct SequenceEntry {
  std::string id;
  std::string path;  // relative directory
  std::size_t frames = 0;
  TrajectoryKind kind = TrajectoryKind::Linear;
};

struct GroupEntry {
  std::string group;
  std::string prompt_object;
  TagSet tags;
  std::vector<SequenceEntry> sequences;
};

inline constexpr const char* kFormatVersion = "1";

struct DatasetManifest {
  std::string format_version = kFormatVersion;
  std::uint64_t seed = 0;
  std::size_t sequences_per_object = 5;
  DatasetConfig config;
  std::vector<GroupEntry> groups;
  std::size_t sequence_count = 0;
  std::size_t frame_count = 0;
  /// In-memory copy of every emitted frame row, in file order. Not part of
  /// manifest.json.
  std::vector<FrameMeta> frames;
};

DatasetManifest emit_dataset(const std::filesystem::path& out_dir, std::size_t n_objects,
                             std::size_t sequences_per_object, std::uint64_t rng_seed,
                             const DatasetConfig& config);

/// Snap a value to the 6-decimal serialization grid: parse(format("%.6f", v)).
double snap6(double v);

}  // namespace wristloc::synth
