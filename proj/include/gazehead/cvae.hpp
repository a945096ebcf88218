#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gazehead/data_pipeline.hpp"
#include "gazehead/motion_types.hpp"
#include "gazehead/nn.hpp"
#include "gazehead/random.hpp"

namespace gazehead::cvae {

using nn::Matrix;
using nn::Vector;

/// Architecture and training hyperparameters. Full-scale defaults: window 12
/// at 5 FPS, latent 128, batch 64, 60k Adam steps at 5e-5.
struct ModelConfig {
  int window = 12;
  int latent_dim = 128;
  double model_fps = 5.0;
  int encoder_hidden = 256;
  int decoder_hidden = 256;
  int feature_dim = 64;
  double kl_weight_max = 0.1;
  int kl_anneal_steps = 12000;
  double context_dropout_prob = 0.5;
  double feature_dropout_prob = 0.1;
  int batch_size = 64;
  int train_steps = 60000;
  double learning_rate = 5e-5;
  bool temporal_modeling = true;
  std::uint64_t seed = 0;

  /// Throws Config when an invariant is violated.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LatentDistribution {
  Vector mu;
  Vector log_var;
};

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// KL(N(mu, exp(log_var)) || N(0, I)) in nats.
double kl_divergence(const LatentDistribution& dist);

/// z = mu + exp(log_var / 2) * noise.
Vector reparameterize(const LatentDistribution& dist, const Vector& noise);

struct LossComponents {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

/// Reconstruction is the L2 norm of the stacked T x 2 residual (not its
/// square); total = reconstruction + lambda * kl.
LossComponents loss(const data::PoseMatrix& predicted, const data::PoseMatrix& target,
                    const LatentDistribution& dist, double kl_weight);

/// Linear warm-up of the KL weight to kl_weight_max over kl_anneal_steps.
double kl_anneal(std::int64_t step, const ModelConfig& config);

/// Normalized-space mini-batch. Each entry of `gaze`/`head` is 2 x B for one
/// frame; `context` is 4 x B holding (c1 pitch, c1 yaw, c2 pitch, c2 yaw).
struct Batch {
  std::vector<Matrix> gaze;
  std::vector<Matrix> head;
  Matrix context;
  Eigen::RowVectorXd has_context;

  Eigen::Index size() const { return context.cols(); }
  std::size_t length() const { return gaze.size(); }
};

/// Randomness consumed by one training forward pass. Empty masks disable
/// the corresponding dropout; masks hold 0 or 1 / (1 - p).
struct StochasticInputs {
  Matrix latent_noise;               // d x B
  std::vector<Matrix> gaze_masks;    // per frame, F x B
  std::vector<Matrix> head_masks;    // per frame, F x B
  Matrix context_mask;               // F x B
};

class Model {
 public:
  /// Randomly initialized from config.seed.
  explicit Model(ModelConfig config, data::NormStats norm = {});
  /// Adopts an existing parameter vector (e.g. from a checkpoint).
  Model(ModelConfig config, data::NormStats norm, const Vector& parameters);

  const ModelConfig& config() const { return config_; }
  const data::NormStats& norm_stats() const { return norm_; }
  void set_norm_stats(const data::NormStats& norm) { norm_ = norm; }

  nn::ParameterSet& parameter_set() { return params_; }
  const nn::ParameterSet& parameter_set() const { return params_; }
  Vector& parameters() { return params_.values(); }
  const Vector& parameters() const { return params_.values(); }
  Eigen::Index parameter_count() const { return params_.size(); }

  /// Width of the per-frame encoder feature vector.
  Eigen::Index feature_width() const;
  Eigen::Index latent_dim() const { return config_.latent_dim; }

  /// Per-frame preprocessed features for normalized inputs, dropout off.
  /// Missing head contributes zero features.
  Vector preprocess(const Eigen::Vector2d& gaze, const std::optional<Eigen::Vector2d>& head,
                    const Eigen::Vector4d& context, bool has_context,
                    const Vector* dropout_mask = nullptr) const;

  /// Posterior parameters for a window carrying a real head sequence.
  LatentDistribution encode(const MotionWindow& window) const;

  /// Decodes one window: raw angles in, canonical raw angles out.
  std::vector<AngularPose> decode(const Vector& z, std::span<const AngularPose> gaze,
                                  const std::array<AngularPose, 2>& context, bool has_context) const;

  /// Decodes B windows that share one gaze sequence; column b of `z`,
  /// `context` and `has_context` belong to sample b. Returns per-frame
  /// normalized outputs (2 x B each).
  std::vector<Matrix> decode_normalized(const Matrix& z, const std::vector<Matrix>& gaze,
                                        const Matrix& context, const Eigen::RowVectorXd& has_context) const;

  /// Normalized-space encoder for a batch (dropout off).
  LatentDistribution encode_normalized(const Batch& batch, Eigen::Index column) const;

  /// Batch-mean loss of one forward pass; fills `gradient` (same layout as
  /// parameters()) when non-null.
  LossComponents loss_and_gradient(const Batch& batch, const StochasticInputs& noise, double kl_weight,
                                   Vector* gradient) const;

  /// Builds a normalized batch from windows (real head required).
  Batch make_batch(std::span<const MotionWindow* const> windows) const;

  // Implementation details (parameter slot ids and cached activations).
  struct Slots;
  struct Pass;

 private:
  void build_layout();
  void initialize();
  void run_forward(const Batch& batch, const StochasticInputs& noise, Pass& pass) const;

  ModelConfig config_;
  data::NormStats norm_;
  nn::ParameterSet params_;
  std::shared_ptr<const Slots> slots_;
};

/// Hidden widths the frame-local variant uses so that its parameter count
/// tracks the recurrent model's.
std::pair<int, int> ablation_hidden_widths(const ModelConfig& config);

/// Parameter count of the model `config` would build.
Eigen::Index parameter_count(const ModelConfig& config);

// --- checkpoints -------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
  ModelConfig config;
  data::NormStats norm;
  Vector parameters;
  std::int64_t step = 0;
  std::string rng_state;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Byte form of the checkpoint (the file contents).
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

Model model_from_checkpoint(const Checkpoint& checkpoint);

// --- training ----------------------------------------------------------------

struct StepRecord {
  std::int64_t step = 0;
  double kl_weight = 0.0;
  LossComponents loss;
};

class Trainer {
 public:
  Trainer(const data::DatasetManifest& manifest, ModelConfig config);

  /// One Adam update on the given window indices.
  StepRecord train_step(std::span<const std::size_t> batch_indices);
  /// One Adam update on a uniformly drawn batch.
  StepRecord step();

  std::int64_t current_step() const { return step_; }
  const Model& model() const { return model_; }
  Checkpoint checkpoint() const;

  /// Draws the dropout masks and latent noise for a batch of size B.
  StochasticInputs draw_noise(Eigen::Index batch_size);

 private:
  const data::DatasetManifest& manifest_;
  Model model_;
  nn::Adam optimizer_;
  Rng rng_;
  std::int64_t step_ = 0;
  Vector gradient_;
};

struct TrainOptions {
  int checkpoint_every = 0;  // 0 disables periodic checkpoints
  int log_every = 500;
  std::function<void(const Checkpoint&)> on_checkpoint;
  std::function<void(const StepRecord&)> on_step;
};

/// Runs config.train_steps updates and returns the final checkpoint.
Checkpoint train(const data::DatasetManifest& manifest, const ModelConfig& config,
                 const TrainOptions& options = {});

}  // namespace gazehead::cvae
