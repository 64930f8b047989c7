#include "wristloc/errors.hpp"
#include "wristloc/synth_format.hpp"
#include "wristloc/synthworld.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

namespace wristloc::synth {

namespace fs = std::filesystem;

void DatasetConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::InvalidConfig, msg); };
  if (!(multi_object_prob >= 0.0 && multi_object_prob <= 1.0)) bad("multi_object_prob must be in [0, 1]");
  if (!(unusual_lighting_prob >= 0.0 && unusual_lighting_prob <= 1.0)) {
    bad("unusual_lighting_prob must be in [0, 1]");
  }
  if (!(hover_height > 0.0)) bad("hover_height must be positive");
  if (!(min_duration > 0.0 && min_duration <= max_duration)) bad("need 0 < min_duration <= max_duration");
  if (jobs < 1) bad("jobs must be >= 1");
  try {
    camera.validate();
  } catch (const Error& e) {
    bad(std::string("camera: ") + e.what());
  }
}

namespace {

std::string slug(const std::string& name) {
  std::string out;
  for (char c : name) {
    out += std::isalnum(static_cast<unsigned char>(c)) ? static_cast<char>(std::tolower(c)) : '_';
  }
  return out;
}

std::string padded(std::size_t value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, value);
  return buf;
}

Pose snapped(const Pose& p) {
  const Vec3 pos(snap6(p.position().x()), snap6(p.position().y()), snap6(p.position().z()));
  return Pose(pos, p.orientation());
}

struct ObjectOutput {
  GroupEntry entry;
  std::vector<FrameMeta> frames;
};

// Streams per object / sequence are derived from the dataset seed so that the
// content does not depend on worker scheduling.
constexpr std::uint64_t kObjectStream = 0x0B1EC7ULL << 32;
constexpr std::uint64_t kSequenceStream = 0x5E9ULL << 48;

// A crowded draw can fail to place; redraw from the same stream a few times
// before giving up, so large datasets do not abort on one unlucky scene.
Scene scene_with_retries(Rng& rng, const Workspace& ws, double multi_object_prob, const SceneObject& obj) {
  constexpr int kSceneAttempts = 16;
  for (int attempt = 1;; ++attempt) {
    try {
      return sample_scene_with_target(rng, ws, multi_object_prob, obj);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::PlacementFailure || attempt == kSceneAttempts) throw;
    }
  }
}

ObjectOutput emit_object(const fs::path& root, std::size_t index, std::size_t sequences,
                         std::uint64_t seed, const DatasetConfig& cfg) {
  Rng object_rng(derive_seed(seed, kObjectStream + index));
  const auto profile_offset = derive_seed(seed, 17) % kProfileCount;
  const auto profile = static_cast<ObjectProfile>((index + profile_offset) % kProfileCount);
  SceneObject obj = sample_object(object_rng, profile);
  obj.group = slug(obj.name) + "_" + padded(index, 3);

  ObjectOutput out;
  out.entry.group = obj.group;
  out.entry.prompt_object = obj.name;
  out.entry.tags = obj.tags;

  const auto& ws = cfg.workspace;
  for (std::size_t j = 0; j < sequences; ++j) {
    Rng rng(derive_seed(seed, kSequenceStream + (index << 16) + j));
    Scene scene = scene_with_retries(rng, ws, cfg.multi_object_prob, obj);
    scene.lighting = sample_lighting(rng, cfg.unusual_lighting_prob);

    TrajectorySpec spec;
    spec.kind = static_cast<TrajectoryKind>(rng.below(3));
    // Whole-millisecond frame interval in [167, 500] ms keeps timestamps exact
    // in decimal and the rate within 2-6 fps.
    const auto interval_ms = 167 + rng.below(334);
    spec.frames_per_second = 1000.0 / static_cast<double>(interval_ms);
    spec.duration = snap6(rng.uniform(cfg.min_duration, cfg.max_duration));
    spec.hover_height = cfg.hover_height;
    spec.bend = snap6((rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.15, 0.4));
    const double mid_z = 0.5 * (ws.min_corner.z() + ws.max_corner.z());
    const double z_lo = std::max(mid_z, scene.target().top_center.z() + cfg.hover_height);
    const Vec3 start(snap6(rng.uniform(ws.min_corner.x(), ws.max_corner.x())),
                     snap6(rng.uniform(ws.min_corner.y(), ws.max_corner.y())),
                     snap6(rng.uniform(z_lo, std::max(z_lo, ws.max_corner.z()))));
    spec.start_pose = Pose(start, down_looking());

    const auto poses = generate_trajectory(spec, scene.target());

    SequenceEntry seq;
    seq.id = "seq_" + std::to_string(j);
    seq.path = "objects/" + obj.group + "/" + seq.id;
    seq.frames = poses.size();
    seq.kind = spec.kind;
    const fs::path seq_dir = root / seq.path;
    std::error_code ec;
    fs::create_directories(seq_dir, ec);
    if (ec) fail(ErrorCode::IOFailure, "cannot create " + seq_dir.string() + ": " + ec.message());

    std::ofstream jsonl(seq_dir / "frames.jsonl", std::ios::binary);
    if (!jsonl) fail(ErrorCode::IOFailure, "cannot write " + (seq_dir / "frames.jsonl").string());
    for (std::size_t k = 0; k < poses.size(); ++k) {
      FrameMeta f;
      f.t = snap6(static_cast<double>(k * interval_ms) / 1000.0);
      f.image = seq.path + "/frame_" + padded(k, 3) + ".png";
      f.tcp_pose = snapped(poses[k]);
      f.target = scene.target().top_center;
      f.group = obj.group;
      f.sequence_id = seq.id;
      f.tags = obj.tags;
      f.multi_object = scene.multi_object();
      f.lighting_unusual = scene.lighting.unusual();
      f.prompt_object = obj.name;

      const Raster image = render_frame(scene, cfg.camera.camera_pose(f.tcp_pose), cfg.camera);
      write_png(root / f.image, image);
      jsonl << frame_to_json(f).dump() << '\n';
      out.frames.push_back(std::move(f));
    }
    if (!jsonl) fail(ErrorCode::IOFailure, "failed writing " + (seq_dir / "frames.jsonl").string());
    out.entry.sequences.push_back(std::move(seq));
  }
  return out;
}

}  // namespace

DatasetManifest emit_dataset(const fs::path& out_dir, std::size_t n_objects,
                             std::size_t sequences_per_object, std::uint64_t rng_seed,
                             const DatasetConfig& config) {
  config.validate();
  if (n_objects < 1) fail(ErrorCode::InvalidConfig, "n_objects must be >= 1");
  if (sequences_per_object < 1) fail(ErrorCode::InvalidConfig, "sequences_per_object must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IOFailure, "cannot create " + out_dir.string() + ": " + ec.message());

  std::vector<ObjectOutput> outputs(n_objects);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n_objects; i = next++) {
      try {
        outputs[i] = emit_object(out_dir, i, sequences_per_object, rng_seed, config);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n_objects;
      }
    }
  };
  const auto jobs = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), n_objects);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  DatasetManifest manifest;
  manifest.seed = rng_seed;
  manifest.sequences_per_object = sequences_per_object;
  manifest.config = config;
  for (auto& o : outputs) {
    manifest.sequence_count += o.entry.sequences.size();
    manifest.frame_count += o.frames.size();
    manifest.groups.push_back(std::move(o.entry));
    manifest.frames.insert(manifest.frames.end(), std::make_move_iterator(o.frames.begin()),
                           std::make_move_iterator(o.frames.end()));
  }

  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out) fail(ErrorCode::IOFailure, "cannot write " + (out_dir / "manifest.json").string());
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) fail(ErrorCode::IOFailure, "failed writing manifest.json");
  return manifest;
}

}  // namespace wristloc::synth
