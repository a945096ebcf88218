#pragma once

#include <array>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

namespace gazehead {

inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Pitch (up/down) and yaw (left/right) in radians.
///
/// Direction convention: pitch is applied first, then yaw, to the forward
/// axis +z. The resulting unit vector is
///   (cos(pitch) * sin(yaw), sin(pitch), cos(pitch) * cos(yaw)).
struct AngularPose {
  double pitch = 0.0;
  double yaw = 0.0;

  friend bool operator==(const AngularPose&, const AngularPose&) = default;
};

using Vec3 = std::array<double, 3>;

/// Throws InvalidInput on non-finite angles.
Vec3 to_direction_vector(const AngularPose& pose);

/// Wraps yaw into (-pi, pi] and clamps pitch to [-pi/2, pi/2].
/// Throws InvalidInput on non-finite angles.
AngularPose canonicalize(const AngularPose& pose);

bool is_canonical(const AngularPose& pose);

enum class MotionKind { Gaze, Head };

const char* motion_kind_name(MotionKind kind);

/// An ordered, non-empty run of canonical poses sampled at a fixed rate.
class MotionSequence {
 public:
  MotionSequence(std::vector<AngularPose> frames, double fps, MotionKind kind);

  std::span<const AngularPose> frames() const { return frames_; }
  const AngularPose& operator[](std::size_t i) const { return frames_[i]; }
  std::size_t size() const { return frames_.size(); }
  double fps() const { return fps_; }
  MotionKind kind() const { return kind_; }

  /// Frames [begin, begin + count) as a new sequence.
  MotionSequence slice(std::size_t begin, std::size_t count) const;

  friend bool operator==(const MotionSequence&, const MotionSequence&) = default;

 private:
  std::vector<AngularPose> frames_;
  double fps_;
  MotionKind kind_;
};

/// One T-frame unit: gaze, optional real head, and the two-pose context
/// carried over from the preceding window.
struct MotionWindow {
  std::vector<AngularPose> gaze;
  std::vector<AngularPose> head;  // empty at inference
  std::array<AngularPose, 2> context{};
  bool has_context = false;

  std::size_t length() const { return gaze.size(); }
  bool has_head() const { return !head.empty(); }

  /// Throws Contract when lengths disagree or a context-less window carries a
  /// non-zero context.
  void validate(std::size_t expected_length) const;

  friend bool operator==(const MotionWindow&, const MotionWindow&) = default;
};

}  // namespace gazehead
