#include "wristloc/errors.hpp"
#include "wristloc/synthworld.hpp"

#include <cmath>
#include <numbers>

namespace wristloc::synth {

std::string_view to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Linear: return "linear";
    case TrajectoryKind::Curved: return "curved";
    case TrajectoryKind::Triangular: return "triangular";
  }
  return "linear";
}

namespace {

Vec3 lateral_direction(const Vec3& d) {
  const Vec3 horizontal(d.x(), d.y(), 0.0);
  if (horizontal.norm() < 1e-6) return Vec3::UnitX();
  return Vec3(-d.y(), d.x(), 0.0).normalized();
}

// Circle through a, b, c (non-collinear); samples the arc a -> b -> c at
// angle fractions s in [0, 1].
class Arc {
 public:
  Arc(const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 u = b - a;
    const Vec3 v = c - a;
    const Vec3 w = u.cross(v);
    center_ = a + (u.squaredNorm() * v.cross(w) + v.squaredNorm() * w.cross(u)) /
                      (2.0 * w.squaredNorm());
    radius_ = (a - center_).norm();
    e1_ = (a - center_) / radius_;
    const Vec3 pb = b - center_;
    e2_ = (pb - pb.dot(e1_) * e1_).normalized();
    const Vec3 pc = c - center_;
    sweep_ = std::atan2(pc.dot(e2_), pc.dot(e1_));
    const double through = std::atan2(pb.dot(e2_), pb.dot(e1_));
    if (sweep_ < through) sweep_ += 2.0 * std::numbers::pi;
  }

  Vec3 at(double s) const {
    const double theta = s * sweep_;
    return center_ + radius_ * (std::cos(theta) * e1_ + std::sin(theta) * e2_);
  }

 private:
  Vec3 center_;
  Vec3 e1_;
  Vec3 e2_;
  double radius_ = 0.0;
  double sweep_ = 0.0;
};

}  // namespace

std::vector<Pose> generate_trajectory(const TrajectorySpec& spec, const SceneObject& target) {
  if (!(spec.duration > 0.0)) fail(ErrorCode::InvalidSpec, "trajectory duration must be positive");
  if (!(spec.frames_per_second >= 2.0 && spec.frames_per_second <= 6.0)) {
    fail(ErrorCode::InvalidSpec, "frames_per_second must be in [2, 6]");
  }
  if (!(spec.hover_height > 0.0)) fail(ErrorCode::InvalidSpec, "hover_height must be positive");
  const Vec3 start = spec.start_pose.position();
  if (!(start.z() > target.top_center.z())) {
    fail(ErrorCode::InvalidSpec, "start position must be above the object top");
  }
  const Eigen::Quaterniond down = down_looking();
  if (spec.start_pose.orientation().angularDistance(down) > 1e-9) {
    fail(ErrorCode::InvalidSpec, "start pose must use the down-looking orientation");
  }
  const bool bent = spec.kind != TrajectoryKind::Linear;
  if (bent && std::abs(spec.bend) < 1e-3) {
    fail(ErrorCode::InvalidSpec, "curved and triangular trajectories need a non-zero bend");
  }

  const Vec3 end(target.top_center.x(), target.top_center.y(),
                 target.top_center.z() + spec.hover_height);
  const auto frames = static_cast<std::size_t>(
      std::max<long long>(2, std::llround(spec.duration * spec.frames_per_second)));

  const Vec3 delta = end - start;
  const Vec3 via = 0.5 * (start + end) + lateral_direction(delta) * (spec.bend * delta.norm());

  std::vector<Pose> poses;
  poses.reserve(frames);
  poses.push_back(spec.start_pose);
  for (std::size_t k = 1; k + 1 < frames; ++k) {
    const double s = static_cast<double>(k) / static_cast<double>(frames - 1);
    Vec3 p;
    switch (spec.kind) {
      case TrajectoryKind::Linear:
        p = start + s * delta;
        break;
      case TrajectoryKind::Curved:
        p = Arc(start, via, end).at(s);
        break;
      case TrajectoryKind::Triangular: {
        const double first = (via - start).norm();
        const double second = (end - via).norm();
        const double along = s * (first + second);
        p = along <= first ? start + (via - start) * (along / first)
                           : via + (end - via) * ((along - first) / second);
        break;
      }
    }
    poses.emplace_back(p, down);
  }
  poses.emplace_back(end, down);
  return poses;
}

}  // namespace wristloc::synth
