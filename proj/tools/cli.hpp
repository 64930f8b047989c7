#pragma once

#include "run_config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace wristloc::cli {

/// Runs one command line. Returns 0 on success, 1 on a domain error (printed
/// as "error[<Code>]: <message>"), 2 on a usage error (message and usage
/// text on `err`).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a byte string or a file.
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// The full chain: gen-data, split, k-fold training of model and baseline,
/// test evaluation and analysis, all under config.get("out"). Returns the
/// manifest path.
std::filesystem::path cmd_pipeline(const RunConfig& config, std::ostream& log);

}  // namespace wristloc::cli
