#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gazehead/cvae.hpp"
#include "gazehead/motion_types.hpp"

namespace gazehead::generation {

enum class Method { Cvae, CvaeNoTemporal, ConstantHead, MirrorGaze };

const char* method_name(Method method);
/// Accepts "cvae", "no-temporal", "constant", "mirror" (and the long forms
/// "cvae_no_temporal", "constant_head", "mirror_gaze").
Method parse_method(const std::string& name);

struct GenerationRequest {
  MotionSequence gaze;
  int num_samples = 30;
  std::uint64_t seed = 0;
  Method method = Method::Cvae;
  /// Pose the constant baseline holds; (0, 0) when absent.
  std::optional<AngularPose> initial_head;
};

using Context = std::array<AngularPose, 2>;

/// Decodes a single T-frame window with an explicit latent. A missing
/// context means the initial window (zero context).
MotionSequence generate_window(const cvae::Model& model, const MotionSequence& gaze,
                               const std::optional<Context>& context, const cvae::Vector& z);

struct LongOptions {
  /// Ignore the previous window and decode every window with zero context.
  bool force_zero_context = false;
};

/// Autoregressive generation over floor(N / T) consecutive windows; window
/// k > 0 is conditioned on the last two generated poses of window k - 1.
/// A fresh latent is drawn from N(0, I) per window.
MotionSequence generate_long(const cvae::Model& model, const MotionSequence& gaze, std::uint64_t seed,
                             const LongOptions& options = {});

/// K independent long generations with seeds derived from `seed`.
std::vector<MotionSequence> generate_diverse(const cvae::Model& model, const MotionSequence& gaze, int k,
                                             std::uint64_t seed, const LongOptions& options = {});

MotionSequence constant_head_baseline(const MotionSequence& gaze, const AngularPose& initial_head);
MotionSequence mirror_gaze_baseline(const MotionSequence& gaze);

/// Dispatches on request.method. `model` is required for the cVAE methods
/// and must match the requested variant.
std::vector<MotionSequence> generate(const GenerationRequest& request, const cvae::Model* model);

}  // namespace gazehead::generation
