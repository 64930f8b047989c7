#pragma once

#include "wristloc/model.hpp"
#include "wristloc/synthworld.hpp"
#include "wristloc/training.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

namespace wristloc::cli {

struct ConfigKey {
  std::string_view key;
  std::string_view default_value;
  std::string_view help;
};

/// Every configurable key with its default. Flags are the same names with
/// '_' replaced by '-'.
std::span<const ConfigKey> config_keys();

/// Config file grammar, one entry per line:
///
///   line    := blank | comment | entry
///   comment := optional spaces, '#', anything
///   entry   := key spaces? '=' spaces? value
///
/// Keys are the names in config_keys(). Values run to the end of the line
/// with surrounding spaces trimmed; a trailing "# ..." is not stripped.
/// Later lines override earlier ones; command-line flags override the file.
class RunConfig {
 public:
  RunConfig();

  /// InvalidConfig for an unknown key.
  void set(std::string_view key, std::string value);
  /// IOFailure when unreadable, InvalidConfig naming the line otherwise.
  void load_file(const std::filesystem::path& path);
  void load_text(std::string_view text, std::string_view origin = "config");

  const std::string& get(std::string_view key) const;
  std::uint64_t get_u64(std::string_view key) const;
  int get_int(std::string_view key) const;
  double get_double(std::string_view key) const;

  /// Parsed views. Each throws InvalidConfig for a malformed or out-of-range
  /// value, naming the key.
  train::TrainConfig train_config() const;
  model::ModelConfig model_config() const;
  synth::DatasetConfig dataset_config() const;

  /// "key = value" lines in config_keys() order; parseable by load_text.
  std::string echo() const;
  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace wristloc::cli
