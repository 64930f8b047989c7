#include "support.hpp"

#include "wristloc/dataset.hpp"
#include "wristloc/routing.hpp"
#include "wristloc/synth_format.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace wristloc;
using namespace wristloc::data;
namespace fs = std::filesystem;

namespace {

const fs::path& shared_dataset() {
  static testing::TempDir dir("dataset");
  static const bool made = [] {
    synth::emit_dataset(dir.path(), 20, 5, 21, synth::DatasetConfig{});
    return true;
  }();
  (void)made;
  return dir.path();
}

// n groups of `sizes[i]` frames each, named g00, g01, ...
std::vector<FrameRecord> synthetic_records(const std::vector<int>& sizes) {
  std::vector<FrameRecord> out;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    for (int k = 0; k < sizes[g]; ++k) {
      FrameRecord r;
      r.group = (g < 10 ? "g0" : "g") + std::to_string(g);
      r.image_rel = r.group + "/" + std::to_string(k);
      r.sequence_id = "seq_0";
      out.push_back(r);
    }
  }
  return out;
}

std::set<std::string> groups_in(const std::vector<FrameRecord>& rs) {
  std::set<std::string> s;
  for (const auto& r : rs) s.insert(r.group);
  return s;
}

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a) {
    if (b.contains(x)) return false;
  }
  return true;
}

void copy_tree(const fs::path& from, const fs::path& to) {
  fs::copy(from, to, fs::copy_options::recursive);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("build_prompt template") {
  const Pose pose(Vec3(100, 200, 300), 1, 0, 0, 0);
  const auto p = build_prompt("red cup", pose);
  CHECK(p == "Locate the red cup. Gripper position (mm): 100.0, 200.0, 300.0. "
             "Gripper orientation (wxyz): 1.0, 0.0, 0.0, 0.0.");
  CHECK(p.find("100.0, 200.0, 300.0") != std::string::npos);
  CHECK(p.find("1.0, 0.0, 0.0, 0.0") != std::string::npos);
  CHECK(build_prompt("red cup", pose) == p);
  CHECK(route(p).path == RoutePath::RegressionPath);

  CHECK(build_prompt("box", Pose(Vec3(-0.04, 12.35, 7.25), 1, 0, 0, 0)).find("-0.0, 12.3, 7.2") != std::string::npos);
  CHECK_ERROR(build_prompt("question mark sign", pose), ErrorCode::InvalidName);
  CHECK_ERROR(build_prompt("", pose), ErrorCode::InvalidName);
}

TEST_CASE("load_dataset round trip against the emitted manifest") {
  const auto ds = load_dataset_with_manifest(shared_dataset());
  CHECK(ds.records.size() == ds.manifest.frame_count);
  CHECK(ds.manifest.sequence_count == 100);
  for (const auto& r : ds.records) {
    CHECK(r.target.allFinite());
    CHECK_FALSE(r.group.empty());
    CHECK(r.timestamp >= 0.0);
    CHECK(route(r.prompt).path == RoutePath::RegressionPath);
    CHECK(fs::exists(r.image_ref));
    CHECK(r.prompt == build_prompt(r.prompt_object, r.gripper_pose));
  }
  CHECK(load_dataset(shared_dataset()) == ds.records);
}

TEST_CASE("serialize then reload is a fixed point") {
  const auto records = load_dataset(shared_dataset());
  for (std::size_t i = 0; i < records.size(); i += 7) {
    const auto& r = records[i];
    synth::FrameMeta m;
    m.t = r.timestamp;
    m.image = r.image_rel;
    m.tcp_pose = r.gripper_pose;
    m.target = r.target;
    m.group = r.group;
    m.sequence_id = r.sequence_id;
    m.tags = r.tags;
    m.multi_object = r.multi_object;
    m.lighting_unusual = r.lighting_unusual;
    m.prompt_object = r.prompt_object;
    const auto again = synth::frame_from_json(nlohmann::json::parse(synth::frame_to_json(m).dump()));
    CHECK(record_from_meta(again, shared_dataset()) == r);
  }
}

TEST_CASE("load_dataset errors") {
  CHECK_ERROR(load_dataset("/nonexistent/wristloc"), ErrorCode::IOFailure);

  testing::TempDir dir("bad");
  const fs::path v2 = dir / "v2";
  copy_tree(shared_dataset(), v2);
  auto manifest = nlohmann::json::parse(slurp(v2 / "manifest.json"));
  manifest["format_version"] = "2";
  std::ofstream(v2 / "manifest.json") << manifest.dump();
  CHECK_ERROR(load_dataset(v2), ErrorCode::VersionError);

  const fs::path missing = dir / "missing";
  copy_tree(shared_dataset(), missing);
  const auto first_seq = nlohmann::json::parse(slurp(missing / "manifest.json"));
  fs::path jsonl;
  for (const auto& e : fs::recursive_directory_iterator(missing)) {
    if (e.path().filename() == "frames.jsonl") {
      jsonl = e.path();
      break;
    }
  }
  REQUIRE_FALSE(jsonl.empty());
  std::istringstream lines(slurp(jsonl));
  std::string out, line;
  bool first = true;
  while (std::getline(lines, line)) {
    auto row = nlohmann::json::parse(line);
    if (first) row.erase("target");
    first = false;
    out += row.dump() + "\n";
  }
  std::ofstream(jsonl) << out;
  CHECK_ERROR(load_dataset(missing), ErrorCode::SchemaError);
  CHECK(testing::error_message_of([&] { load_dataset(missing); }).find("target") != std::string::npos);

  const fs::path badquat = dir / "badquat";
  copy_tree(shared_dataset(), badquat);
  std::istringstream l2(slurp(badquat / fs::relative(jsonl, missing)));
  out.clear();
  first = true;
  while (std::getline(l2, line)) {
    auto row = nlohmann::json::parse(line);
    if (first) row["tcp_pose"]["quat"] = {0.5, 0.0, 0.0, 0.0};
    first = false;
    out += row.dump() + "\n";
  }
  std::ofstream(badquat / fs::relative(jsonl, missing)) << out;
  CHECK_ERROR(load_dataset(badquat), ErrorCode::SchemaError);
}

TEST_CASE("group_split examples") {
  const auto ten = synthetic_records(std::vector<int>(10, 12));
  const auto s = group_split(ten, 0.1, 3);
  CHECK(s.test_groups.size() == 1);
  CHECK(s.test.size() == 12);
  CHECK(s.train_val.size() == 108);
  CHECK_ERROR(group_split(synthetic_records({30}), 0.1, 1), ErrorCode::TooFewGroups);
  CHECK_ERROR(group_split(ten, 0.0, 1), ErrorCode::InvalidArgument);
  CHECK_ERROR(group_split(ten, 1.0, 1), ErrorCode::InvalidArgument);
}

TEST_CASE("group_split property over 100 seeds and uneven groups") {
  Rng rng(17);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<int> sizes;
    const int n = 3 + static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) sizes.push_back(1 + static_cast<int>(rng.below(40)));
    const auto records = synthetic_records(sizes);
    const auto s = group_split(records, 0.1, seed);
    REQUIRE(s.train_val.size() + s.test.size() == records.size());
    CHECK(groups_in(s.test) == s.test_groups);
    CHECK(disjoint(groups_in(s.train_val), groups_in(s.test)));
    const int largest = *std::max_element(sizes.begin(), sizes.end());
    const double target = 0.1 * static_cast<double>(records.size());
    CHECK(std::abs(static_cast<double>(s.test.size()) - target) <= largest);
    CHECK_FALSE(s.train_val.empty());
  }
}

TEST_CASE("group_split shuffles groups, not frames, and keeps order") {
  const auto records = synthetic_records({5, 5, 5, 5, 5, 5});
  const auto a = group_split(records, 0.3, 9);
  const auto b = group_split(records, 0.3, 9);
  CHECK(a.test == b.test);
  // Relative order of records within each side is the input order.
  for (const auto* side : {&a.test, &a.train_val}) {
    for (std::size_t i = 1; i < side->size(); ++i) {
      CHECK(((*side)[i - 1].group < (*side)[i].group ||
             ((*side)[i - 1].group == (*side)[i].group && (*side)[i - 1].image_rel < (*side)[i].image_rel)));
    }
  }
}

TEST_CASE("group_kfold examples and partition") {
  const auto five = synthetic_records({4, 4, 4, 4, 4});
  const auto f = group_kfold(five, 5, 2);
  REQUIRE(f.folds.size() == 5);
  std::set<std::string> seen;
  for (const auto& fold : f.folds) {
    CHECK(fold.validation_groups.size() == 1);
    for (const auto& g : fold.validation_groups) CHECK(seen.insert(g).second);
  }
  CHECK(seen == groups_of(five));
  CHECK_ERROR(group_kfold(synthetic_records({3, 3, 3}), 5, 1), ErrorCode::TooFewGroups);
  CHECK_ERROR(group_kfold(five, 1, 1), ErrorCode::InvalidArgument);
}

TEST_CASE("group_kfold property over 100 seeds") {
  Rng rng(23);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<int> sizes;
    const int n = 5 + static_cast<int>(rng.below(25));
    for (int i = 0; i < n; ++i) sizes.push_back(1 + static_cast<int>(rng.below(20)));
    const auto records = synthetic_records(sizes);
    const auto folds = group_kfold(records, 5, seed);
    std::map<std::string, int> times;
    for (const auto& fold : folds.folds) {
      CHECK(fold.train.size() + fold.validation.size() == records.size());
      CHECK(groups_in(fold.validation) == fold.validation_groups);
      CHECK(disjoint(groups_in(fold.train), groups_in(fold.validation)));
      for (const auto& g : fold.validation_groups) ++times[g];
      // Round-robin dealing keeps fold sizes (in groups) within one.
      CHECK(fold.validation_groups.size() >= static_cast<std::size_t>(n / 5));
      CHECK(fold.validation_groups.size() <= static_cast<std::size_t>((n + 4) / 5));
    }
    CHECK(times.size() == static_cast<std::size_t>(n));
    for (const auto& [g, t] : times) CHECK(t == 1);
  }
}

TEST_CASE("split JSON round trip") {
  const auto records = load_dataset(shared_dataset());
  const auto split = group_split(records, 0.1, 4);
  const auto folds = group_kfold(split.train_val, 5, 4);
  const auto j = split_to_json(split, folds);
  CHECK(j["test_groups"].size() == split.test_groups.size());
  CHECK(j["folds"].size() == 5);
  const auto plan = split_from_json(records, nlohmann::json::parse(j.dump()));
  CHECK(plan.split.test == split.test);
  CHECK(plan.split.train_val == split.train_val);
  REQUIRE(plan.folds.folds.size() == 5);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(plan.folds.folds[k].train == folds.folds[k].train);
    CHECK(plan.folds.folds[k].validation == folds.folds[k].validation);
  }
  auto bad = nlohmann::json::parse(j.dump());
  bad["test_groups"].push_back("no_such_group");
  CHECK_ERROR(split_from_json(records, bad), ErrorCode::SchemaError);
  CHECK_ERROR(split_from_json(records, nlohmann::json::object()), ErrorCode::SchemaError);
}
