#include "wristloc/geometry.hpp"

#include "wristloc/errors.hpp"

#include <cmath>
#include <string>

namespace wristloc {

namespace {

Eigen::Quaterniond normalized_or_throw(const Eigen::Quaterniond& q) {
  const double n = q.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-3) {
    fail(ErrorCode::InvalidArgument,
         "quaternion norm " + std::to_string(n) + " is not within 1e-3 of 1");
  }
  if (std::abs(n - 1.0) <= 1e-15) return q;
  return Eigen::Quaterniond(q.coeffs() / n);
}

}  // namespace

Pose::Pose() : position_(Vec3::Zero()), orientation_(Eigen::Quaterniond::Identity()) {}

Pose::Pose(const Vec3& position, const Eigen::Quaterniond& orientation)
    : position_(position), orientation_(normalized_or_throw(orientation)) {
  if (!position_.allFinite()) fail(ErrorCode::InvalidArgument, "pose position is not finite");
}

Pose::Pose(const Vec3& position, double w, double x, double y, double z)
    : Pose(position, Eigen::Quaterniond(w, x, y, z)) {}

Vec3 Pose::to_parent(const Vec3& local) const { return orientation_ * local + position_; }

Vec3 Pose::to_local(const Vec3& parent) const {
  return orientation_.conjugate() * (parent - position_);
}

Pose Pose::compose(const Pose& child) const {
  Eigen::Quaterniond q = orientation_ * child.orientation_;
  q.normalize();
  return Pose(to_parent(child.position_), q);
}

Eigen::Quaterniond down_looking() { return Eigen::Quaterniond(0.0, 1.0, 0.0, 0.0); }

Workspace::Workspace(const Vec3& lo, const Vec3& hi) : min_corner(lo), max_corner(hi) {
  if (!(lo.array() < hi.array()).all()) {
    fail(ErrorCode::InvalidArgument, "workspace min_corner must be below max_corner");
  }
}

Workspace Workspace::default_workspace() {
  return Workspace(Vec3(270.0, -130.0, 0.0), Vec3(530.0, 130.0, 300.0));
}

bool Workspace::contains(const Vec3& p) const {
  return (p.array() >= min_corner.array()).all() && (p.array() <= max_corner.array()).all();
}

CameraModel CameraModel::wrist_default() {
  CameraModel cam;
  cam.mount_offset = Pose(Vec3(0.0, 30.0, -60.0), Eigen::Quaterniond::Identity());
  return cam;
}

void CameraModel::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) fail(ErrorCode::InvalidArgument, "focal lengths must be positive");
  if (width <= 0 || height <= 0) fail(ErrorCode::InvalidArgument, "image size must be positive");
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    fail(ErrorCode::InvalidArgument, "principal point outside the image");
  }
}

Vec3 transform_base_to_camera(const Vec3& point, const Pose& camera_pose) {
  return camera_pose.to_local(point);
}

Vec3 transform_camera_to_base(const Vec3& point, const Pose& camera_pose) {
  return camera_pose.to_parent(point);
}

std::optional<Pixel> project_point(const Vec3& point_base, const Pose& camera_pose,
                                   const CameraModel& cam) {
  const Vec3 pc = transform_base_to_camera(point_base, camera_pose);
  if (pc.z() <= kBehindCameraEpsilon) return std::nullopt;
  return Pixel{cam.cx + cam.fx * (pc.x() / pc.z()), cam.cy + cam.fy * (pc.y() / pc.z())};
}

}  // namespace wristloc
