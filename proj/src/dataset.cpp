#include "wristloc/dataset.hpp"

#include "wristloc/errors.hpp"
#include "wristloc/routing.hpp"
#include "wristloc/rng.hpp"
#include "wristloc/synth_format.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace wristloc::data {

namespace fs = std::filesystem;

namespace {

std::string fmt1(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

}  // namespace

std::string build_prompt(const std::string& object_name, const Pose& gripper_pose) {
  if (object_name.empty()) fail(ErrorCode::InvalidName, "object name must be non-empty");
  if (contains_word(object_name, kDefaultSignifier)) {
    fail(ErrorCode::InvalidName, "object name \"" + object_name + "\" contains the routing signifier");
  }
  const auto& p = gripper_pose.position();
  const auto& q = gripper_pose.orientation();
  return "Locate the " + object_name + ". Gripper position (mm): " + fmt1(p.x()) + ", " +
         fmt1(p.y()) + ", " + fmt1(p.z()) + ". Gripper orientation (wxyz): " + fmt1(q.w()) + ", " +
         fmt1(q.x()) + ", " + fmt1(q.y()) + ", " + fmt1(q.z()) + ".";
}

FrameRecord record_from_meta(const synth::FrameMeta& meta, const fs::path& root) {
  FrameRecord r;
  r.image_ref = root / meta.image;
  r.image_rel = meta.image;
  r.prompt = build_prompt(meta.prompt_object, meta.tcp_pose);
  r.gripper_pose = meta.tcp_pose;
  r.target = meta.target;
  r.group = meta.group;
  r.sequence_id = meta.sequence_id;
  r.timestamp = meta.t;
  r.tags = meta.tags;
  r.multi_object = meta.multi_object;
  r.lighting_unusual = meta.lighting_unusual;
  r.prompt_object = meta.prompt_object;
  return r;
}

Dataset load_dataset_with_manifest(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorCode::IOFailure, "cannot open " + manifest_path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::SchemaError, manifest_path.string() + ": " + e.what());
  }

  Dataset ds;
  ds.manifest = synth::manifest_from_json(doc);
  std::size_t sequences = 0;
  for (const auto& g : ds.manifest.groups) {
    for (const auto& s : g.sequences) {
      ++sequences;
      const fs::path jsonl = root / s.path / "frames.jsonl";
      std::ifstream rows(jsonl);
      if (!rows) fail(ErrorCode::IOFailure, "cannot open " + jsonl.string());
      std::string line;
      std::size_t line_no = 0;
      std::size_t count = 0;
      while (std::getline(rows, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
          const auto row = nlohmann::json::parse(line);
          auto meta = synth::frame_from_json(row);
          if (meta.sequence_id.empty()) meta.sequence_id = s.id;
          ds.records.push_back(record_from_meta(meta, root));
          ++count;
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorCode::SchemaError, jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
          if (e.code() != ErrorCode::SchemaError && e.code() != ErrorCode::InvalidName) throw;
          fail(ErrorCode::SchemaError, jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
      }
      if (count != s.frames) {
        fail(ErrorCode::SchemaError, jsonl.string() + ": expected " + std::to_string(s.frames) +
                                         " frames, found " + std::to_string(count));
      }
    }
  }
  if (sequences != ds.manifest.sequence_count || ds.records.size() != ds.manifest.frame_count) {
    fail(ErrorCode::SchemaError, "manifest counts do not match the listed sequences");
  }
  ds.manifest.frames.clear();
  return ds;
}

std::vector<FrameRecord> load_dataset(const fs::path& root) {
  return load_dataset_with_manifest(root).records;
}

std::set<std::string> groups_of(const std::vector<FrameRecord>& records) {
  std::set<std::string> out;
  for (const auto& r : records) out.insert(r.group);
  return out;
}

namespace {

std::vector<std::string> shuffled_groups(const std::vector<FrameRecord>& records, std::uint64_t seed) {
  const auto set = groups_of(records);
  std::vector<std::string> groups(set.begin(), set.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(groups));
  return groups;
}

}  // namespace

SplitResult group_split(const std::vector<FrameRecord>& records, double test_fraction,
                        std::uint64_t rng_seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorCode::InvalidArgument, "test_fraction must be in (0, 1)");
  }
  const auto groups = shuffled_groups(records, rng_seed);
  if (groups.size() < 2) {
    fail(ErrorCode::TooFewGroups, "group_split needs at least 2 groups, got " + std::to_string(groups.size()));
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[r.group];

  SplitResult split;
  // Relative slack so that e.g. 0.1 * 30 (= 3.0000000000000004) is met by 3 frames.
  const double needed = test_fraction * static_cast<double>(records.size()) * (1.0 - 1e-12);
  std::size_t cumulative = 0;
  for (std::size_t i = 0; i + 1 < groups.size(); ++i) {
    split.test_groups.insert(groups[i]);
    cumulative += counts[groups[i]];
    if (static_cast<double>(cumulative) >= needed) break;
  }
  for (const auto& r : records) {
    (split.test_groups.contains(r.group) ? split.test : split.train_val).push_back(r);
  }
  return split;
}

Folds group_kfold(const std::vector<FrameRecord>& records, int k, std::uint64_t rng_seed) {
  if (k < 2) fail(ErrorCode::InvalidArgument, "k must be at least 2");
  const auto groups = shuffled_groups(records, rng_seed);
  if (groups.size() < static_cast<std::size_t>(k)) {
    fail(ErrorCode::TooFewGroups, "group_kfold needs at least " + std::to_string(k) + " groups, got " +
                                      std::to_string(groups.size()));
  }
  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < groups.size(); ++i) fold_of[groups[i]] = static_cast<int>(i % k);

  Folds out;
  out.folds.resize(static_cast<std::size_t>(k));
  for (const auto& [g, f] : fold_of) out.folds[f].validation_groups.insert(g);
  for (const auto& r : records) {
    const int f = fold_of.at(r.group);
    for (int i = 0; i < k; ++i) {
      (i == f ? out.folds[i].validation : out.folds[i].train).push_back(r);
    }
  }
  return out;
}

nlohmann::ordered_json split_to_json(const SplitResult& split, const Folds& folds) {
  nlohmann::ordered_json j;
  j["test_groups"] = std::vector<std::string>(split.test_groups.begin(), split.test_groups.end());
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : folds.folds) {
    nlohmann::ordered_json fj;
    fj["val_groups"] = std::vector<std::string>(f.validation_groups.begin(), f.validation_groups.end());
    arr.push_back(fj);
  }
  j["folds"] = arr;
  return j;
}

SplitPlan split_from_json(const std::vector<FrameRecord>& records, const nlohmann::json& j) {
  const auto present = groups_of(records);
  auto group_list = [&](const nlohmann::json& arr, const std::string& where) {
    if (!arr.is_array()) fail(ErrorCode::SchemaError, "split: " + where + " must be an array");
    std::set<std::string> out;
    for (const auto& g : arr) {
      if (!g.is_string()) fail(ErrorCode::SchemaError, "split: " + where + " entries must be strings");
      const auto name = g.get<std::string>();
      if (!present.contains(name)) fail(ErrorCode::SchemaError, "split: unknown group \"" + name + "\" in " + where);
      out.insert(name);
    }
    return out;
  };
  if (!j.is_object() || !j.contains("test_groups") || !j.contains("folds") || !j["folds"].is_array()) {
    fail(ErrorCode::SchemaError, "split: expected test_groups and folds");
  }
  SplitPlan plan;
  plan.split.test_groups = group_list(j["test_groups"], "test_groups");
  for (const auto& r : records) {
    (plan.split.test_groups.contains(r.group) ? plan.split.test : plan.split.train_val).push_back(r);
  }
  for (std::size_t k = 0; k < j["folds"].size(); ++k) {
    const auto& fj = j["folds"][k];
    if (!fj.is_object() || !fj.contains("val_groups")) fail(ErrorCode::SchemaError, "split: fold without val_groups");
    Fold fold;
    fold.validation_groups = group_list(fj["val_groups"], "folds[" + std::to_string(k) + "]");
    for (const auto& r : plan.split.train_val) {
      (fold.validation_groups.contains(r.group) ? fold.validation : fold.train).push_back(r);
    }
    plan.folds.folds.push_back(std::move(fold));
  }
  return plan;
}

}  // namespace wristloc::data
