#include "wristloc/synth_format.hpp"

#include "wristloc/errors.hpp"

#include <string>

namespace wristloc::synth {

namespace {

const nlohmann::json& require(const nlohmann::json& obj, const char* field) {
  if (!obj.is_object() || !obj.contains(field)) {
    fail(ErrorCode::SchemaError, std::string("missing field \"") + field + "\"");
  }
  return obj.at(field);
}

template <typename T>
T get_as(const nlohmann::json& obj, const char* field) {
  const auto& v = require(obj, field);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::SchemaError, std::string("field \"") + field + "\" has the wrong type");
  }
}

Vec3 vec3_from(const nlohmann::json& obj, const char* field) {
  const auto& v = require(obj, field);
  if (!v.is_array() || v.size() != 3) {
    fail(ErrorCode::SchemaError, std::string("field \"") + field + "\" must be a 3-element array");
  }
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) fail(ErrorCode::SchemaError, std::string("field \"") + field + "\" must be numeric");
    out[i] = v[i].get<double>();
  }
  if (!out.allFinite()) fail(ErrorCode::SchemaError, std::string("field \"") + field + "\" is not finite");
  return out;
}

ordered_json vec3_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

Pose pose_from(const nlohmann::json& obj, const char* field) {
  const auto& p = require(obj, field);
  const Vec3 pos = vec3_from(p, "pos");
  const auto& q = require(p, "quat");
  if (!q.is_array() || q.size() != 4 || !q[0].is_number() || !q[1].is_number() ||
      !q[2].is_number() || !q[3].is_number()) {
    fail(ErrorCode::SchemaError, "field \"quat\" must be a 4-element numeric array");
  }
  try {
    return Pose(pos, q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>());
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, std::string("bad quaternion in \"") + field + "\": " + e.what());
  }
}

ordered_json pose_json(const Pose& pose) {
  const auto& q = pose.orientation();
  ordered_json j;
  j["pos"] = vec3_json(pose.position());
  j["quat"] = ordered_json::array({q.w(), q.x(), q.y(), q.z()});
  return j;
}

TrajectoryKind kind_from(const std::string& s) {
  if (s == "linear") return TrajectoryKind::Linear;
  if (s == "curved") return TrajectoryKind::Curved;
  if (s == "triangular") return TrajectoryKind::Triangular;
  fail(ErrorCode::SchemaError, "unknown trajectory kind \"" + s + "\"");
}

}  // namespace

ordered_json frame_to_json(const FrameMeta& f) {
  ordered_json j;
  j["t"] = f.t;
  j["image"] = f.image;
  j["tcp_pose"] = pose_json(f.tcp_pose);
  j["target"] = vec3_json(f.target);
  j["group"] = f.group;
  j["sequence_id"] = f.sequence_id;
  j["tags"] = f.tags.names();
  j["multi_object"] = f.multi_object;
  j["lighting_unusual"] = f.lighting_unusual;
  j["prompt_object"] = f.prompt_object;
  return j;
}

FrameMeta frame_from_json(const nlohmann::json& row) {
  FrameMeta f;
  f.t = get_as<double>(row, "t");
  if (!(f.t >= 0.0)) fail(ErrorCode::SchemaError, "field \"t\" must be non-negative");
  f.image = get_as<std::string>(row, "image");
  f.tcp_pose = pose_from(row, "tcp_pose");
  f.target = vec3_from(row, "target");
  f.group = get_as<std::string>(row, "group");
  if (f.group.empty()) fail(ErrorCode::SchemaError, "field \"group\" must be non-empty");
  f.sequence_id = row.contains("sequence_id") ? get_as<std::string>(row, "sequence_id") : "";
  f.tags = TagSet::from_names(get_as<std::vector<std::string>>(row, "tags"));
  f.multi_object = get_as<bool>(row, "multi_object");
  f.lighting_unusual = get_as<bool>(row, "lighting_unusual");
  f.prompt_object = get_as<std::string>(row, "prompt_object");
  return f;
}

ordered_json camera_to_json(const CameraModel& cam) {
  ordered_json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["mount_offset"] = pose_json(cam.mount_offset);
  return j;
}

CameraModel camera_from_json(const nlohmann::json& doc) {
  CameraModel cam;
  cam.fx = get_as<double>(doc, "fx");
  cam.fy = get_as<double>(doc, "fy");
  cam.cx = get_as<double>(doc, "cx");
  cam.cy = get_as<double>(doc, "cy");
  cam.width = get_as<int>(doc, "width");
  cam.height = get_as<int>(doc, "height");
  cam.mount_offset = pose_from(doc, "mount_offset");
  try {
    cam.validate();
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, std::string("invalid camera: ") + e.what());
  }
  return cam;
}

ordered_json manifest_to_json(const DatasetManifest& m) {
  ordered_json j;
  j["format_version"] = m.format_version;
  j["seed"] = m.seed;
  j["n_objects"] = m.groups.size();
  j["sequences_per_object"] = m.sequences_per_object;
  j["sequence_count"] = m.sequence_count;
  j["frame_count"] = m.frame_count;
  ordered_json cfg;
  cfg["workspace"] = {{"min", vec3_json(m.config.workspace.min_corner)},
                      {"max", vec3_json(m.config.workspace.max_corner)}};
  cfg["camera"] = camera_to_json(m.config.camera);
  cfg["multi_object_prob"] = m.config.multi_object_prob;
  cfg["unusual_lighting_prob"] = m.config.unusual_lighting_prob;
  cfg["hover_height"] = m.config.hover_height;
  cfg["min_duration"] = m.config.min_duration;
  cfg["max_duration"] = m.config.max_duration;
  j["config"] = cfg;
  ordered_json groups = ordered_json::array();
  for (const auto& g : m.groups) {
    ordered_json gj;
    gj["group"] = g.group;
    gj["prompt_object"] = g.prompt_object;
    gj["tags"] = g.tags.names();
    ordered_json seqs = ordered_json::array();
    for (const auto& s : g.sequences) {
      seqs.push_back({{"id", s.id},
                      {"path", s.path},
                      {"frames", s.frames},
                      {"trajectory", std::string(to_string(s.kind))}});
    }
    gj["sequences"] = seqs;
    groups.push_back(gj);
  }
  j["groups"] = groups;
  return j;
}

DatasetManifest manifest_from_json(const nlohmann::json& doc) {
  DatasetManifest m;
  const auto version = get_as<std::string>(doc, "format_version");
  if (version != kFormatVersion) {
    fail(ErrorCode::VersionError, "unsupported dataset format version \"" + version + "\"");
  }
  m.format_version = version;
  m.seed = get_as<std::uint64_t>(doc, "seed");
  m.sequences_per_object = get_as<std::size_t>(doc, "sequences_per_object");
  m.sequence_count = get_as<std::size_t>(doc, "sequence_count");
  m.frame_count = get_as<std::size_t>(doc, "frame_count");
  const auto& cfg = require(doc, "config");
  const auto& ws = require(cfg, "workspace");
  try {
    m.config.workspace = Workspace(vec3_from(ws, "min"), vec3_from(ws, "max"));
  } catch (const Error& e) {
    fail(ErrorCode::SchemaError, std::string("invalid workspace: ") + e.what());
  }
  m.config.camera = camera_from_json(require(cfg, "camera"));
  m.config.multi_object_prob = get_as<double>(cfg, "multi_object_prob");
  m.config.unusual_lighting_prob = get_as<double>(cfg, "unusual_lighting_prob");
  m.config.hover_height = get_as<double>(cfg, "hover_height");
  m.config.min_duration = get_as<double>(cfg, "min_duration");
  m.config.max_duration = get_as<double>(cfg, "max_duration");
  const auto& groups = require(doc, "groups");
  if (!groups.is_array()) fail(ErrorCode::SchemaError, "field \"groups\" must be an array");
  for (const auto& gj : groups) {
    GroupEntry g;
    g.group = get_as<std::string>(gj, "group");
    g.prompt_object = get_as<std::string>(gj, "prompt_object");
    g.tags = TagSet::from_names(get_as<std::vector<std::string>>(gj, "tags"));
    const auto& seqs = require(gj, "sequences");
    if (!seqs.is_array()) fail(ErrorCode::SchemaError, "field \"sequences\" must be an array");
    for (const auto& sj : seqs) {
      SequenceEntry s;
      s.id = get_as<std::string>(sj, "id");
      s.path = get_as<std::string>(sj, "path");
      s.frames = get_as<std::size_t>(sj, "frames");
      s.kind = kind_from(get_as<std::string>(sj, "trajectory"));
      g.sequences.push_back(std::move(s));
    }
    m.groups.push_back(std::move(g));
  }
  return m;
}

}  // namespace wristloc::synth
