#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace wristloc {

using Rgb = std::array<double, 3>;

/// Row-major height x width x 3 raster of linear values in [0, 1].
class Raster {
 public:
  Raster() = default;
  Raster(int height, int width, const Rgb& fill = {0.0, 0.0, 0.0});

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int row, int col, int channel) {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }
  double at(int row, int col, int channel) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * 3 + channel];
  }

  Rgb pixel(int row, int col) const;
  void set_pixel(int row, int col, const Rgb& c);

  const std::vector<double>& data() const noexcept { return data_; }

  /// 8-bit quantization used by the PNG writer: round(clamp(v) * 255).
  std::vector<std::uint8_t> to_bytes() const;
  static Raster from_bytes(int height, int width, const std::vector<std::uint8_t>& bytes);

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

void write_png(const std::filesystem::path& path, const Raster& image);
Raster read_png(const std::filesystem::path& path);

}  // namespace wristloc
