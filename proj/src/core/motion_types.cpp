#include "gazehead/motion_types.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gazehead/error.hpp"

namespace gazehead {
namespace {

void require_finite(const AngularPose& p) {
  if (!std::isfinite(p.pitch) || !std::isfinite(p.yaw)) {
    fail(ErrorCode::InvalidInput, "non-finite angular pose");
  }
}

}  // namespace

Vec3 to_direction_vector(const AngularPose& pose) {
  require_finite(pose);
  const double cp = std::cos(pose.pitch);
  return {cp * std::sin(pose.yaw), std::sin(pose.pitch), cp * std::cos(pose.yaw)};
}

AngularPose canonicalize(const AngularPose& pose) {
  require_finite(pose);
  constexpr double half_pi = kPi / 2.0;
  const double pitch = std::clamp(pose.pitch, -half_pi, half_pi);
  double yaw = pose.yaw;
  if (yaw <= -kPi || yaw > kPi) {
    yaw = std::remainder(yaw, 2.0 * kPi);  // [-pi, pi]
    if (yaw <= -kPi) yaw += 2.0 * kPi;
  }
  return {pitch, yaw};
}

bool is_canonical(const AngularPose& p) {
  return std::isfinite(p.pitch) && std::isfinite(p.yaw) && p.pitch >= -kPi / 2.0 &&
         p.pitch <= kPi / 2.0 && p.yaw > -kPi && p.yaw <= kPi;
}

const char* motion_kind_name(MotionKind kind) {
  return kind == MotionKind::Gaze ? "gaze" : "head";
}

MotionSequence::MotionSequence(std::vector<AngularPose> frames, double fps, MotionKind kind)
    : frames_(std::move(frames)), fps_(fps), kind_(kind) {
  require(!frames_.empty(), ErrorCode::InvalidInput, "motion sequence must not be empty");
  require(std::isfinite(fps_) && fps_ > 0.0, ErrorCode::InvalidInput,
          "motion sequence fps must be positive");
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    if (!is_canonical(frames_[i])) {
      fail(ErrorCode::InvalidInput,
           "frame " + std::to_string(i) + " of " + motion_kind_name(kind_) +
               " sequence is not a canonical pose");
    }
  }
}

MotionSequence MotionSequence::slice(std::size_t begin, std::size_t count) const {
  require(begin + count <= frames_.size() && count > 0, ErrorCode::Contract,
          "slice out of range");
  return MotionSequence({frames_.begin() + static_cast<std::ptrdiff_t>(begin),
                         frames_.begin() + static_cast<std::ptrdiff_t>(begin + count)},
                        fps_, kind_);
}

void MotionWindow::validate(std::size_t expected_length) const {
  require(gaze.size() == expected_length, ErrorCode::Contract,
          "window gaze length " + std::to_string(gaze.size()) + " != " +
              std::to_string(expected_length));
  require(head.empty() || head.size() == expected_length, ErrorCode::Contract,
          "window head length " + std::to_string(head.size()) + " != " +
              std::to_string(expected_length));
  if (!has_context) {
    require(context[0] == AngularPose{} && context[1] == AngularPose{}, ErrorCode::Contract,
            "window without context must carry zero context poses");
  }
}

}  // namespace gazehead
