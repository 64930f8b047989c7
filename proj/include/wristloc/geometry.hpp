#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <optional>

namespace wristloc {

using Vec3 = Eigen::Vector3d;

/// Rigid pose in the robot-base frame. Position in millimeters, orientation
/// as a unit quaternion stored (w, x, y, z).
///
/// Quaternions are normalized on construction. Inputs whose norm is within
/// 1e-3 of one are renormalized; anything further off is rejected with
/// InvalidArgument, as are non-finite positions.
class Pose {
 public:
  Pose();
  Pose(const Vec3& position, const Eigen::Quaterniond& orientation);
  Pose(const Vec3& position, double w, double x, double y, double z);

  static Pose identity() { return Pose(); }

  const Vec3& position() const noexcept { return position_; }
  const Eigen::Quaterniond& orientation() const noexcept { return orientation_; }

  Eigen::Matrix3d rotation() const { return orientation_.toRotationMatrix(); }

  /// Maps a point expressed in this pose's local frame into the parent frame.
  Vec3 to_parent(const Vec3& local) const;
  /// Maps a parent-frame point into this pose's local frame.
  Vec3 to_local(const Vec3& parent) const;

  /// this ∘ child: the child pose (given relative to this one) in the parent frame.
  Pose compose(const Pose& child) const;

  friend bool operator==(const Pose& a, const Pose& b) {
    return a.position_ == b.position_ && a.orientation_.coeffs() == b.orientation_.coeffs();
  }

 private:
  Vec3 position_;
  Eigen::Quaterniond orientation_;
};

/// The fixed down-looking orientation used for the gripper and its wrist
/// camera: a 180 degree rotation about base x. Camera +z is base -z, camera +x
/// is base +x, camera +y is base -y.
Eigen::Quaterniond down_looking();

struct Workspace {
  Vec3 min_corner;
  Vec3 max_corner;

  Workspace(const Vec3& lo, const Vec3& hi);
  static Workspace default_workspace();

  bool contains(const Vec3& p) const;
  Vec3 extent() const { return max_corner - min_corner; }
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

struct CameraModel {
  double fx = 40.0;
  double fy = 40.0;
  double cx = 32.0;
  double cy = 32.0;
  int width = 64;
  int height = 64;
  /// Camera pose relative to the tool center point.
  Pose mount_offset;

  /// Default wrist camera: 64x64, mounted 60 mm above the TCP and 30 mm
  /// towards base -y so the gripper fingers stay in the lower image rows.
  static CameraModel wrist_default();
  void validate() const;

  Pose camera_pose(const Pose& tcp_pose) const { return tcp_pose.compose(mount_offset); }
};

constexpr double kBehindCameraEpsilon = 1e-6;

Vec3 transform_base_to_camera(const Vec3& point, const Pose& camera_pose);
Vec3 transform_camera_to_base(const Vec3& point, const Pose& camera_pose);

/// Pinhole projection of a base-frame point. Returns nullopt when the point's
/// camera-frame depth is at or below kBehindCameraEpsilon.
std::optional<Pixel> project_point(const Vec3& point_base, const Pose& camera_pose,
                                   const CameraModel& cam);

}  // namespace wristloc
