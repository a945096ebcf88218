#include "gazehead/generation.hpp"

#include <cmath>

#include "gazehead/error.hpp"

namespace gazehead::generation {

using cvae::Matrix;

const char* method_name(Method method) {
  switch (method) {
    case Method::Cvae: return "cvae";
    case Method::CvaeNoTemporal: return "no-temporal";
    case Method::ConstantHead: return "constant";
    case Method::MirrorGaze: return "mirror";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "cvae") return Method::Cvae;
  if (name == "no-temporal" || name == "cvae_no_temporal") return Method::CvaeNoTemporal;
  if (name == "constant" || name == "constant_head") return Method::ConstantHead;
  if (name == "mirror" || name == "mirror_gaze") return Method::MirrorGaze;
  fail(ErrorCode::Config, "unknown generation method '" + name + "'");
}

MotionSequence generate_window(const cvae::Model& model, const MotionSequence& gaze,
                               const std::optional<Context>& context, const cvae::Vector& z) {
  const auto frames = model.decode(z, gaze.frames(), context.value_or(Context{}), context.has_value());
  return MotionSequence(frames, gaze.fps(), MotionKind::Head);
}

namespace {

// Runs one long generation per seed, all samples sharing the gaze input.
std::vector<MotionSequence> generate_long_batch(const cvae::Model& model, const MotionSequence& gaze,
                                                const std::vector<std::uint64_t>& seeds, const LongOptions& options) {
  const auto T = static_cast<std::size_t>(model.config().window);
  require(gaze.size() >= T, ErrorCode::Contract,
          "gaze sequence of " + std::to_string(gaze.size()) + " frames is shorter than the window (" +
              std::to_string(T) + ")");
  const auto K = static_cast<Eigen::Index>(seeds.size());
  const Eigen::Index d = model.latent_dim();
  const std::size_t num_windows = gaze.size() / T;
  const bool use_context = model.config().temporal_modeling && !options.force_zero_context;
  const auto& norm = model.norm_stats();
  const auto gaze_norm = data::normalize(gaze.frames(), norm, MotionKind::Gaze);

  std::vector<Rng> rngs;
  rngs.reserve(seeds.size());
  for (auto s : seeds) rngs.emplace_back(s);
  std::vector<std::vector<AngularPose>> out(seeds.size());

  for (std::size_t k = 0; k < num_windows; ++k) {
    std::vector<Matrix> frames(T);
    for (std::size_t t = 0; t < T; ++t) frames[t] = gaze_norm.col(static_cast<Eigen::Index>(k * T + t));
    Matrix z(d, K);
    for (Eigen::Index b = 0; b < K; ++b) {
      for (Eigen::Index i = 0; i < d; ++i) z(i, b) = rngs[static_cast<std::size_t>(b)].normal();
    }
    Matrix ctx = Matrix::Zero(4, K);
    Eigen::RowVectorXd has = Eigen::RowVectorXd::Zero(K);
    if (k > 0 && use_context) {
      for (Eigen::Index b = 0; b < K; ++b) {
        const auto& prev = out[static_cast<std::size_t>(b)];
        const std::array<AngularPose, 2> c{prev[prev.size() - 2], prev[prev.size() - 1]};
        const auto cn = data::normalize(c, norm, MotionKind::Head);
        ctx.col(b) << cn(0, 0), cn(1, 0), cn(0, 1), cn(1, 1);
        has(b) = 1.0;
      }
    }
    const auto decoded = model.decode_normalized(z, frames, ctx, has);
    for (Eigen::Index b = 0; b < K; ++b) {
      data::PoseMatrix column(2, static_cast<Eigen::Index>(T));
      for (std::size_t t = 0; t < T; ++t) column.col(static_cast<Eigen::Index>(t)) = decoded[t].col(b);
      for (const auto& p : data::denormalize(column, norm, MotionKind::Head)) {
        require(std::isfinite(p.pitch) && std::isfinite(p.yaw), ErrorCode::Numeric, "generation produced non-finite pose");
        out[static_cast<std::size_t>(b)].push_back(canonicalize(p));
      }
    }
  }
  std::vector<MotionSequence> result;
  result.reserve(out.size());
  for (auto& frames : out) result.emplace_back(std::move(frames), gaze.fps(), MotionKind::Head);
  return result;
}

}  // namespace

MotionSequence generate_long(const cvae::Model& model, const MotionSequence& gaze, std::uint64_t seed,
                             const LongOptions& options) {
  return generate_long_batch(model, gaze, {seed}, options).front();
}

std::vector<MotionSequence> generate_diverse(const cvae::Model& model, const MotionSequence& gaze, int k,
                                             std::uint64_t seed, const LongOptions& options) {
  require(k >= 1, ErrorCode::Contract, "number of samples must be >= 1");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = derive_seed(seed, i);
  return generate_long_batch(model, gaze, seeds, options);
}

MotionSequence constant_head_baseline(const MotionSequence& gaze, const AngularPose& initial_head) {
  return MotionSequence(std::vector<AngularPose>(gaze.size(), canonicalize(initial_head)), gaze.fps(),
                        MotionKind::Head);
}

MotionSequence mirror_gaze_baseline(const MotionSequence& gaze) {
  return MotionSequence({gaze.frames().begin(), gaze.frames().end()}, gaze.fps(), MotionKind::Head);
}

std::vector<MotionSequence> generate(const GenerationRequest& request, const cvae::Model* model) {
  require(request.num_samples >= 1, ErrorCode::Contract, "num_samples must be >= 1");
  const auto k = static_cast<std::size_t>(request.num_samples);
  switch (request.method) {
    case Method::ConstantHead:
      return std::vector<MotionSequence>(
          k, constant_head_baseline(request.gaze, request.initial_head.value_or(AngularPose{})));
    case Method::MirrorGaze:
      return std::vector<MotionSequence>(k, mirror_gaze_baseline(request.gaze));
    case Method::Cvae:
    case Method::CvaeNoTemporal: {
      require(model != nullptr, ErrorCode::Config, "method requires a checkpoint");
      const bool wants_temporal = request.method == Method::Cvae;
      require(model->config().temporal_modeling == wants_temporal, ErrorCode::Config,
              std::string("checkpoint variant does not match method '") + method_name(request.method) + "'");
      return generate_diverse(*model, request.gaze, request.num_samples, request.seed);
    }
  }
  fail(ErrorCode::Config, "unknown method");
}

}  // namespace gazehead::generation
