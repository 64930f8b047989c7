#include "wristloc/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

namespace wristloc::synth {

Rgb table_color() { return {0.62, 0.55, 0.45}; }
Rgb gripper_color() { return {0.35, 0.35, 0.38}; }

bool in_gripper_region(int row, int col, int width, int height) {
  // Two fingers and the palm edge at the bottom center, scaled with the image.
  const double r = static_cast<double>(row) / height;
  const double c = static_cast<double>(col) / width;
  const bool left = c >= 0.36 && c < 0.44 && r >= 0.84;
  const bool right = c >= 0.56 && c < 0.64 && r >= 0.84;
  const bool palm = c >= 0.36 && c < 0.64 && r >= 0.95;
  return left || right || palm;
}

namespace {

constexpr int kCircleSegments = 20;
constexpr int kSphereSlices = 6;
constexpr double kSideShade = 0.7;

using Polygon = std::vector<Pixel>;

struct Canvas {
  Raster& image;
  const Pose& camera_pose;
  const CameraModel& cam;

  std::optional<Polygon> project(const std::vector<Vec3>& pts) const {
    Polygon out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
      const auto px = project_point(p, camera_pose, cam);
      if (!px) return std::nullopt;
      out.push_back(*px);
    }
    return out;
  }

  // Fills a convex polygon. Pixel (row, col) is sampled at its center, which
  // sits at image coordinates (u, v) = (col, row).
  void fill(const Polygon& poly, const Rgb& color) {
    double umin = poly[0].u, umax = poly[0].u, vmin = poly[0].v, vmax = poly[0].v;
    double area = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& a = poly[i];
      const auto& b = poly[(i + 1) % poly.size()];
      area += a.u * b.v - b.u * a.v;
      umin = std::min(umin, a.u);
      umax = std::max(umax, a.u);
      vmin = std::min(vmin, a.v);
      vmax = std::max(vmax, a.v);
    }
    if (std::abs(area) < 1e-12) return;
    const double sign = area > 0 ? 1.0 : -1.0;
    const int c0 = std::max(0, static_cast<int>(std::ceil(umin)));
    const int c1 = std::min(image.width() - 1, static_cast<int>(std::floor(umax)));
    const int r0 = std::max(0, static_cast<int>(std::ceil(vmin)));
    const int r1 = std::min(image.height() - 1, static_cast<int>(std::floor(vmax)));
    for (int row = r0; row <= r1; ++row) {
      for (int col = c0; col <= c1; ++col) {
        bool inside = true;
        for (std::size_t i = 0; i < poly.size() && inside; ++i) {
          const auto& a = poly[i];
          const auto& b = poly[(i + 1) % poly.size()];
          const double edge = (b.u - a.u) * (row - a.v) - (b.v - a.v) * (col - a.u);
          inside = sign * edge >= 0.0;
        }
        if (inside) image.set_pixel(row, col, color);
      }
    }
  }

  void fill_world(const std::vector<Vec3>& pts, const Rgb& color) {
    if (auto poly = project(pts)) fill(*poly, color);
  }
};

Rgb shade(const Rgb& c, double f) { return {c[0] * f, c[1] * f, c[2] * f}; }

std::vector<Vec3> ring(double x, double y, double z, double rx, double ry, bool box) {
  std::vector<Vec3> pts;
  if (box) {
    pts = {{x - rx, y - ry, z}, {x + rx, y - ry, z}, {x + rx, y + ry, z}, {x - rx, y + ry, z}};
    return pts;
  }
  pts.reserve(kCircleSegments);
  for (int i = 0; i < kCircleSegments; ++i) {
    const double a = 2.0 * std::numbers::pi * i / kCircleSegments;
    pts.emplace_back(x + rx * std::cos(a), y + ry * std::sin(a), z);
  }
  return pts;
}

// Prism from z0 to z1: side quads first, then the top face.
void draw_prism(Canvas& canvas, double x, double y, double z0, double z1, double rx, double ry,
                bool box, const Rgb& side_color, const Rgb& top_color) {
  const auto bottom = ring(x, y, z0, rx, ry, box);
  const auto top = ring(x, y, z1, rx, ry, box);
  for (std::size_t i = 0; i < bottom.size(); ++i) {
    const std::size_t j = (i + 1) % bottom.size();
    canvas.fill_world({bottom[i], bottom[j], top[j], top[i]}, side_color);
  }
  canvas.fill_world(top, top_color);
}

void draw_part(Canvas& canvas, const SceneObject& obj, const ShapePart& part) {
  const double x = obj.top_center.x() + part.offset_x;
  const double y = obj.top_center.y() + part.offset_y;
  const double z0 = part.base_z;
  const double rx = part.width / 2.0;
  const double ry = part.depth / 2.0;
  switch (part.primitive) {
    case Primitive::Box:
    case Primitive::Cylinder:
      draw_prism(canvas, x, y, z0, z0 + part.height, rx, ry, part.primitive == Primitive::Box,
                 shade(part.color, kSideShade), part.color);
      break;
    case Primitive::Sphere: {
      // Stacked slices; each slice is a prism at the sphere's radius for that
      // band, with its top shaded by the band's surface normal.
      const double radius = part.height / 2.0;
      const double zc = z0 + radius;
      for (int s = 0; s < kSphereSlices; ++s) {
        const double lo = -radius + 2.0 * radius * s / kSphereSlices;
        const double hi = -radius + 2.0 * radius * (s + 1) / kSphereSlices;
        const double widest = (lo < 0.0 && hi > 0.0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
        const double r = std::sqrt(std::max(0.0, radius * radius - widest * widest));
        const double nz = std::clamp(hi / radius, 0.0, 1.0);
        const double top_shade = s + 1 == kSphereSlices ? 1.0 : 0.6 + 0.4 * nz;
        draw_prism(canvas, x, y, zc + lo, zc + hi, r * rx / radius, r * ry / radius, false,
                   shade(part.color, kSideShade), shade(part.color, top_shade));
      }
      break;
    }
  }
}

}  // namespace

Raster render_frame(const Scene& scene, const Pose& camera_pose, const CameraModel& cam) {
  Raster image(cam.height, cam.width, table_color());
  Canvas canvas{image, camera_pose, cam};

  // Painter's order: farthest object first, by camera-frame depth of its
  // footprint center at mid height.
  std::vector<std::size_t> order(scene.objects.size());
  std::vector<double> depth(scene.objects.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
    const auto& o = scene.objects[i];
    const Vec3 mid(o.top_center.x(), o.top_center.y(), o.height / 2.0);
    depth[i] = transform_base_to_camera(mid, camera_pose).norm();
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return depth[a] > depth[b]; });

  for (std::size_t idx : order) {
    const auto& obj = scene.objects[idx];
    std::vector<const ShapePart*> parts;
    for (const auto& p : obj.parts) parts.push_back(&p);
    std::stable_sort(parts.begin(), parts.end(),
                     [](const ShapePart* a, const ShapePart* b) { return a->base_z < b->base_z; });
    for (const auto* p : parts) draw_part(canvas, obj, *p);
  }

  const Rgb grip = gripper_color();
  for (int row = 0; row < image.height(); ++row) {
    for (int col = 0; col < image.width(); ++col) {
      if (in_gripper_region(row, col, image.width(), image.height())) image.set_pixel(row, col, grip);
    }
  }

  const auto& light = scene.lighting;
  for (int row = 0; row < image.height(); ++row) {
    for (int col = 0; col < image.width(); ++col) {
      for (int k = 0; k < 3; ++k) {
        double& v = image.at(row, col, k);
        v = std::clamp(v * light.brightness * light.tint[k], 0.0, 1.0);
      }
    }
  }
  return image;
}

}  // namespace wristloc::synth
