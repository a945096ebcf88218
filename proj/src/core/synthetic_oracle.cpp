#include "gazehead/synthetic_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "gazehead/error.hpp"

namespace gazehead::oracle {
namespace {

double reflect_into(double x, double limit) {
  if (limit <= 0.0) return 0.0;
  for (int i = 0; i < 4 && (x > limit || x < -limit); ++i) {
    if (x > limit) x = 2.0 * limit - x;
    if (x < -limit) x = -2.0 * limit - x;
  }
  return std::clamp(x, -limit, limit);
}

std::size_t frames_for(double seconds, double fps) {
  return static_cast<std::size_t>(std::max(1.0, std::round(seconds * fps)));
}

}  // namespace

void OracleParams::validate() const {
  auto check = [](bool ok, const char* what) { require(ok, ErrorCode::Config, what); };
  check(gain_mean >= 0.0 && gain_mean <= 1.0, "gain_mean must lie in [0, 1]");
  check(lag_alpha > 0.0 && lag_alpha <= 1.0, "lag_alpha must lie in (0, 1]");
  check(gain_std >= 0.0 && bias_std >= 0.0 && noise_std >= 0.0, "standard deviations must be >= 0");
  check(fixation_min_s > 0.0 && fixation_max_s >= fixation_min_s, "invalid fixation duration range");
  check(saccade_min >= 0.0 && saccade_max >= saccade_min, "invalid saccade amplitude range");
  check(saccade_duration_s > 0.0, "saccade duration must be positive");
  check(pitch_limit >= 0.0 && pitch_limit < kPi / 2.0, "pitch limit must lie in [0, pi/2)");
  check(yaw_limit >= 0.0 && yaw_limit < kPi, "yaw limit must lie in [0, pi)");
  check(reference_fps > 0.0, "reference fps must be positive");
}

GazeTrajectory sample_gaze_trajectory(const OracleParams& params, std::size_t length, double fps,
                                      Rng& rng) {
  params.validate();
  require(length >= 1, ErrorCode::Contract, "gaze trajectory length must be >= 1");
  require(fps > 0.0, ErrorCode::Contract, "fps must be positive");

  std::vector<AngularPose> frames;
  frames.reserve(length);
  std::vector<GazeSegment> segments;
  std::vector<AngularPose> targets;

  AngularPose current{rng.uniform(-0.5, 0.5) * params.pitch_limit,
                      rng.uniform(-0.5, 0.5) * params.yaw_limit};
  targets.push_back(current);
  const std::size_t transition_frames = frames_for(params.saccade_duration_s, fps);

  while (true) {
    const std::size_t fixation = std::min(
        frames_for(rng.uniform(params.fixation_min_s, params.fixation_max_s), fps), length - frames.size());
    segments.push_back({GazeSegment::Kind::Fixation, frames.size(), fixation});
    frames.insert(frames.end(), fixation, current);
    if (frames.size() >= length) break;

    const double amplitude = rng.uniform(params.saccade_min, params.saccade_max);
    const double direction = rng.uniform(0.0, 2.0 * kPi);
    const AngularPose next{reflect_into(current.pitch + amplitude * std::sin(direction), params.pitch_limit),
                           reflect_into(current.yaw + amplitude * std::cos(direction), params.yaw_limit)};
    targets.push_back(next);

    const std::size_t span = std::min(transition_frames, length - frames.size());
    segments.push_back({GazeSegment::Kind::Transition, frames.size(), span});
    for (std::size_t k = 1; k <= span; ++k) {
      const double w =
          0.5 * (1.0 - std::cos(kPi * static_cast<double>(k) / static_cast<double>(transition_frames + 1)));
      frames.push_back({current.pitch + w * (next.pitch - current.pitch),
                        current.yaw + w * (next.yaw - current.yaw)});
    }
    current = next;
    if (frames.size() >= length) break;
  }
  return {MotionSequence(std::move(frames), fps, MotionKind::Gaze), std::move(segments), std::move(targets)};
}

CoordinationDraw draw_coordination(const OracleParams& params, Rng& rng) {
  CoordinationDraw draw;
  draw.gain = std::clamp(rng.normal(params.gain_mean, params.gain_std), 0.0, 1.0);
  draw.bias.pitch = rng.normal(0.0, params.bias_std);
  draw.bias.yaw = rng.normal(0.0, params.bias_std);
  return draw;
}

double follow_rate(const OracleParams& params, double fps) {
  return 1.0 - std::pow(1.0 - params.lag_alpha, params.reference_fps / fps);
}

std::vector<AngularPose> apply_coordination_law(std::span<const AngularPose> gaze,
                                                const CoordinationDraw& draw, double alpha,
                                                std::span<const AngularPose> white_noise,
                                                std::optional<AngularPose> initial_head) {
  require(!gaze.empty(), ErrorCode::Contract, "gaze must not be empty");
  require(white_noise.empty() || white_noise.size() == gaze.size(), ErrorCode::Contract,
          "noise length must match gaze length");
  const double g = draw.gain;
  std::vector<AngularPose> head(gaze.size());
  head[0] = initial_head.value_or(
      AngularPose{g * gaze[0].pitch + draw.bias.pitch, g * gaze[0].yaw + draw.bias.yaw});
  AngularPose smooth_noise{};
  for (std::size_t t = 1; t < gaze.size(); ++t) {
    if (!white_noise.empty()) {
      smooth_noise.pitch += alpha * (white_noise[t].pitch - smooth_noise.pitch);
      smooth_noise.yaw += alpha * (white_noise[t].yaw - smooth_noise.yaw);
    }
    const AngularPose& prev = head[t - 1];
    head[t].pitch = prev.pitch + alpha * (g * gaze[t].pitch + draw.bias.pitch - prev.pitch) + smooth_noise.pitch;
    head[t].yaw = prev.yaw + alpha * (g * gaze[t].yaw + draw.bias.yaw - prev.yaw) + smooth_noise.yaw;
  }
  return head;
}

MotionSequence simulate_head(const MotionSequence& gaze, const OracleParams& params, Rng& rng) {
  params.validate();
  const CoordinationDraw draw = draw_coordination(params, rng);
  std::vector<AngularPose> noise;
  if (params.noise_std > 0.0) {
    noise.resize(gaze.size());
    for (auto& n : noise) {
      n.pitch = rng.normal(0.0, params.noise_std);
      n.yaw = rng.normal(0.0, params.noise_std);
    }
  }
  auto head = apply_coordination_law(gaze.frames(), draw, follow_rate(params, gaze.fps()), noise);
  for (auto& h : head) h = canonicalize(h);
  return MotionSequence(std::move(head), gaze.fps(), MotionKind::Head);
}

std::vector<SequencePair> generate_dataset(const OracleParams& params, std::size_t num_sequences,
                                           std::size_t frames_per_sequence, double fps) {
  require(num_sequences > 0 && frames_per_sequence > 0, ErrorCode::Contract,
          "sequence and frame counts must be positive");
  std::vector<SequencePair> out;
  out.reserve(num_sequences);
  for (std::size_t i = 0; i < num_sequences; ++i) {
    Rng rng(derive_seed(params.seed, i));
    auto traj = sample_gaze_trajectory(params, frames_per_sequence, fps, rng);
    auto head = simulate_head(traj.gaze, params, rng);
    out.push_back({std::move(traj.gaze), std::move(head)});
  }
  return out;
}

std::vector<data::VideoFrames> to_videos(const std::vector<SequencePair>& pairs, const std::string& prefix) {
  std::vector<data::VideoFrames> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    char id[32];
    std::snprintf(id, sizeof(id), "%05zu", i);
    data::VideoFrames video;
    video.video_id = prefix + "_" + id;
    video.subject_id = prefix + "_subj_" + id;
    const auto& pair = pairs[i];
    require(pair.gaze.size() == pair.head.size(), ErrorCode::Contract, "gaze/head length mismatch");
    for (std::size_t t = 0; t < pair.gaze.size(); ++t) {
      data::FrameRecord r;
      r.video_id = video.video_id;
      r.subject_id = video.subject_id;
      r.frame_index = static_cast<std::int64_t>(t);
      r.gaze = pair.gaze[t];
      r.head = pair.head[t];
      video.frames.push_back(std::move(r));
    }
    out.push_back(std::move(video));
  }
  return out;
}

std::vector<MotionSequence> simulate_heads_for_gaze(const MotionSequence& gaze, const OracleParams& params,
                                                    std::size_t count) {
  std::vector<MotionSequence> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(derive_seed(params.seed ^ 0xA5A5A5A5ULL, i));
    out.push_back(simulate_head(gaze, params, rng));
  }
  return out;
}

}  // namespace gazehead::oracle
