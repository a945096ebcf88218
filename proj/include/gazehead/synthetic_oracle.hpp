#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gazehead/data_pipeline.hpp"
#include "gazehead/motion_types.hpp"
#include "gazehead/random.hpp"

namespace gazehead::oracle {

/// Parametric gaze-head coordination law. Angles are radians, durations
/// seconds. `lag_alpha` is the follow rate per frame at `reference_fps`;
/// other rates use the equivalent per-frame rate 1 - (1 - alpha)^(ref / fps).
struct OracleParams {
  double gain_mean = 0.6;
  double gain_std = 0.1;
  double lag_alpha = 0.35;
  double bias_std = deg_to_rad(5.0);
  double noise_std = deg_to_rad(0.3);
  double fixation_min_s = 0.4;
  double fixation_max_s = 1.6;
  double saccade_min = deg_to_rad(8.0);
  double saccade_max = deg_to_rad(40.0);
  double saccade_duration_s = 0.1;
  double pitch_limit = deg_to_rad(25.0);
  double yaw_limit = deg_to_rad(50.0);
  double reference_fps = 5.0;
  std::uint64_t seed = 0;

  /// Throws Config on out-of-range parameters.
  void validate() const;
};

struct GazeSegment {
  enum class Kind { Fixation, Transition };
  Kind kind;
  std::size_t start;
  std::size_t length;
};

struct GazeTrajectory {
  MotionSequence gaze;
  std::vector<GazeSegment> segments;
  std::vector<AngularPose> targets;
};

/// Fixations on piecewise-constant targets joined by raised-cosine
/// transitions. Deterministic given the generator state.
GazeTrajectory sample_gaze_trajectory(const OracleParams& params, std::size_t length, double fps,
                                      Rng& rng);

/// Per-sequence draw of the coordination law.
struct CoordinationDraw {
  double gain = 0.0;
  AngularPose bias;
};

CoordinationDraw draw_coordination(const OracleParams& params, Rng& rng);

double follow_rate(const OracleParams& params, double fps);

/// The head recursion
///   h_0 = g * gaze_0 + b  (or `initial_head` when given)
///   h_t = h_{t-1} + alpha * (g * gaze_t + b - h_{t-1}) + eps_t
/// with eps_t white noise passed through the same first-order filter.
/// `noise` supplies the white draws (pitch, yaw per frame); empty means none.
std::vector<AngularPose> apply_coordination_law(std::span<const AngularPose> gaze,
                                                const CoordinationDraw& draw, double alpha,
                                                std::span<const AngularPose> white_noise,
                                                std::optional<AngularPose> initial_head = std::nullopt);

MotionSequence simulate_head(const MotionSequence& gaze, const OracleParams& params, Rng& rng);

struct SequencePair {
  MotionSequence gaze;
  MotionSequence head;
};

/// Sequence i uses the generator seeded with derive_seed(params.seed, i).
std::vector<SequencePair> generate_dataset(const OracleParams& params, std::size_t num_sequences,
                                           std::size_t frames_per_sequence, double fps);

/// Clean frame records for each pair; video i is "<prefix>_<i>" with its
/// own subject "<prefix>_subj_<i>", frame indices counting from 0.
std::vector<data::VideoFrames> to_videos(const std::vector<SequencePair>& pairs,
                                         const std::string& prefix = "synth");

/// Head sequences for a fixed gaze trajectory under independent law draws.
std::vector<MotionSequence> simulate_heads_for_gaze(const MotionSequence& gaze, const OracleParams& params,
                                                    std::size_t count);

}  // namespace gazehead::oracle
