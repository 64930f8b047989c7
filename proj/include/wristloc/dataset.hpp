#pragma once

#include "wristloc/geometry.hpp"
#include "wristloc/synthworld.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace wristloc::data {

inline constexpr int kPromptTemplateVersion = 1;

struct FrameRecord {
  std::filesystem::path image_ref;  // absolute path of the PNG
  std::string image_rel;            // path relative to the dataset root
  std::string prompt;
  Pose gripper_pose;
  Vec3 target = Vec3::Zero();
  std::string group;
  std::string sequence_id;
  double timestamp = 0.0;
  synth::TagSet tags;
  bool multi_object = false;
  bool lighting_unusual = false;
  std::string prompt_object;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

/// "Locate the <name>. Gripper position (mm): x, y, z. Gripper orientation
/// (wxyz): w, x, y, z." with one decimal place. Throws InvalidName for an
/// empty name or one containing the routing signifier.
std::string build_prompt(const std::string& object_name, const Pose& gripper_pose);

FrameRecord record_from_meta(const synth::FrameMeta& meta, const std::filesystem::path& root);

struct Dataset {
  synth::DatasetManifest manifest;
  std::vector<FrameRecord> records;
};

/// Reads manifest.json and every listed frames.jsonl. Errors: VersionError,
/// SchemaError (naming the offending field and file), IOFailure.
Dataset load_dataset_with_manifest(const std::filesystem::path& root);
std::vector<FrameRecord> load_dataset(const std::filesystem::path& root);

struct SplitResult {
  std::vector<FrameRecord> train_val;
  std::vector<FrameRecord> test;
  std::set<std::string> test_groups;
};

/// Shuffles distinct groups (sorted, then Rng(seed) Fisher-Yates) and moves
/// the smallest prefix whose cumulative frame count reaches
/// test_fraction * total into the test set. At least one group always stays
/// on each side. Throws TooFewGroups with fewer than two groups.
SplitResult group_split(const std::vector<FrameRecord>& records, double test_fraction,
                        std::uint64_t rng_seed);

struct Fold {
  std::vector<FrameRecord> train;
  std::vector<FrameRecord> validation;
  std::set<std::string> validation_groups;
};

struct Folds {
  std::vector<Fold> folds;
};

/// Shuffled groups dealt round-robin into k folds. Throws TooFewGroups when
/// there are fewer distinct groups than k.
Folds group_kfold(const std::vector<FrameRecord>& records, int k, std::uint64_t rng_seed);

std::set<std::string> groups_of(const std::vector<FrameRecord>& records);

/// {"test_groups": [...], "folds": [{"val_groups": [...]}, ...]}
nlohmann::ordered_json split_to_json(const SplitResult& split, const Folds& folds);

struct SplitPlan {
  SplitResult split;
  Folds folds;
};

/// Rebuilds a split written by split_to_json over `records`, keeping record
/// order. Throws SchemaError for a malformed document or a group that does
/// not occur in `records`.
SplitPlan split_from_json(const std::vector<FrameRecord>& records, const nlohmann::json& j);

}  // namespace wristloc::data
