#include "run_config.hpp"

#include "wristloc/errors.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace wristloc::cli {

namespace {

constexpr std::array kKeys = {
    ConfigKey{"seed", "0", "seed for every random stage"},
    ConfigKey{"out", "out", "output directory"},
    ConfigKey{"jobs", "1", "worker threads for data generation and feature extraction"},
    ConfigKey{"data", "", "dataset directory (input)"},
    ConfigKey{"split", "", "split.json to use instead of recomputing the split from the seed"},
    ConfigKey{"checkpoint", "", "model checkpoint (input)"},
    ConfigKey{"errors", "", "error table CSV (input)"},
    ConfigKey{"objects", "40", "objects to generate; each is one group"},
    ConfigKey{"sequences", "5", "sequences per object"},
    ConfigKey{"multi_object_prob", "0.4", "probability that a scene has distractors"},
    ConfigKey{"unusual_lighting_prob", "0.3", "probability of unusual lighting per sequence"},
    ConfigKey{"test_fraction", "0.1", "fraction of frames held out as the test split"},
    ConfigKey{"folds", "5", "cross-validation folds over the remaining groups"},
    ConfigKey{"fold", "0", "fold index trained by train and train-baseline"},
    ConfigKey{"epochs", "40", "maximum training epochs"},
    ConfigKey{"learning_rate", "0.001", "SGD learning rate"},
    ConfigKey{"momentum", "0.9", "SGD momentum"},
    ConfigKey{"huber_delta", "10", "Huber loss knee, mm"},
    ConfigKey{"batch_size", "16", "mini-batch size"},
    ConfigKey{"plateau_patience", "5", "epochs without improvement before stopping"},
    ConfigKey{"plateau_min_delta", "0", "absolute improvement floor, loss units"},
    ConfigKey{"plateau_relative_delta", "0.01", "improvement floor relative to the best loss"},
    ConfigKey{"max_grad_norm", "10", "global gradient norm clip, 0 disables"},
    ConfigKey{"weight_decay", "0", "L2 coefficient"},
    ConfigKey{"lora_rank", "8", "adapter rank"},
    ConfigKey{"lora_alpha", "16", "adapter scale numerator"},
    ConfigKey{"hidden", "128", "regression head hidden units"},
    ConfigKey{"outlier_threshold", "40", "per-frame mae above which a frame is an outlier, mm"},
    ConfigKey{"alpha", "0.05", "significance level on Bonferroni-corrected p"},
    ConfigKey{"cdf_marker", "10", "reference threshold drawn on the CDF plot, mm"},
    ConfigKey{"histogram_bins", "24", "bins per coordinate in the spread report"},
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, const std::string& value, std::string_view what) {
  fail(ErrorCode::InvalidConfig, std::string(key) + " = \"" + value + "\": " + std::string(what));
}

template <typename T>
T parse_number(std::string_view key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc() || ptr != end) bad_value(key, value, "not a valid number");
  return out;
}

}  // namespace

std::span<const ConfigKey> config_keys() { return kKeys; }

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_.emplace(std::string(k.key), std::string(k.default_value));
}

void RunConfig::set(std::string_view key, std::string value) {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::InvalidConfig, "unknown config key \"" + std::string(key) + "\"");
  it->second = std::move(value);
}

void RunConfig::load_text(std::string_view text, std::string_view origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(n) + ": ";
    if (eq == std::string_view::npos) fail(ErrorCode::InvalidConfig, where + "expected key = value");
    const auto key = trim(t.substr(0, eq));
    if (!values_.contains(key)) fail(ErrorCode::InvalidConfig, where + "unknown key \"" + std::string(key) + "\"");
    set(key, std::string(trim(t.substr(eq + 1))));
  }
}

void RunConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IOFailure, "cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  load_text(buf.str(), path.string());
}

const std::string& RunConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorCode::InvalidConfig, "unknown config key \"" + std::string(key) + "\"");
  return it->second;
}

std::uint64_t RunConfig::get_u64(std::string_view key) const { return parse_number<std::uint64_t>(key, get(key)); }

int RunConfig::get_int(std::string_view key) const { return parse_number<int>(key, get(key)); }

double RunConfig::get_double(std::string_view key) const {
  const auto& v = get(key);
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad_value(key, v, "not a valid number");
  }
  if (used != v.size() || !std::isfinite(out)) bad_value(key, v, "not a valid number");
  return out;
}

train::TrainConfig RunConfig::train_config() const {
  train::TrainConfig c;
  c.epochs = get_int("epochs");
  c.learning_rate = get_double("learning_rate");
  c.momentum = get_double("momentum");
  c.huber_delta = get_double("huber_delta");
  c.batch_size = get_int("batch_size");
  c.seed = get_u64("seed");
  c.plateau_patience = get_int("plateau_patience");
  c.plateau_min_delta = get_double("plateau_min_delta");
  c.plateau_relative_delta = get_double("plateau_relative_delta");
  c.max_grad_norm = get_double("max_grad_norm");
  c.weight_decay = get_double("weight_decay");
  c.validate();
  return c;
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig c;
  c.seed = get_u64("seed");
  c.lora_rank = get_int("lora_rank");
  c.lora_alpha = get_double("lora_alpha");
  c.hidden = get_int("hidden");
  if (c.lora_rank < 1) bad_value("lora_rank", get("lora_rank"), "must be >= 1");
  if (!(c.lora_alpha > 0.0)) bad_value("lora_alpha", get("lora_alpha"), "must be > 0");
  if (c.hidden < 1) bad_value("hidden", get("hidden"), "must be >= 1");
  return c;
}

synth::DatasetConfig RunConfig::dataset_config() const {
  synth::DatasetConfig c;
  c.multi_object_prob = get_double("multi_object_prob");
  c.unusual_lighting_prob = get_double("unusual_lighting_prob");
  c.jobs = get_int("jobs");
  c.validate();
  return c;
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& k : kKeys) out += std::string(k.key) + " = " + values_.at(std::string(k.key)) + "\n";
  return out;
}

}  // namespace wristloc::cli
