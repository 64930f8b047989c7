#pragma once

#include "wristloc/errors.hpp"
#include "wristloc/synthworld.hpp"

#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <unistd.h>

namespace testing {

/// Directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("wristloc_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

/// Runs `f` and returns the wristloc error code it threw. Fails the check if
/// nothing (or something else) was thrown.
template <typename F>
std::optional<wristloc::ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const wristloc::Error& e) {
    return e.code();
  } catch (...) {
    return std::nullopt;
  }
  return std::nullopt;
}

template <typename F>
std::string error_message_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace testing

#define CHECK_ERROR(expr, code_value) CHECK(::testing::error_code_of([&] { (void)(expr); }) == (code_value))
