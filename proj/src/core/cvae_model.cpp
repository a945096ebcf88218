#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

#include "gazehead/cvae.hpp"
#include "gazehead/error.hpp"
#include "gazehead/log.hpp"

namespace gazehead::cvae {

using nn::affine;
using nn::affine_backward;
using nn::tanh_of;

// ---------------------------------------------------------------------------
// Free functions

void ModelConfig::validate() const {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::Config, what); };
  check(window >= 3, "window must be at least 3 frames");
  check(latent_dim >= 1, "latent_dim must be >= 1");
  check(model_fps > 0.0, "model_fps must be positive");
  check(encoder_hidden >= 1 && decoder_hidden >= 1, "hidden sizes must be >= 1");
  check(feature_dim >= 1, "feature_dim must be >= 1");
  check(kl_weight_max >= 0.0, "kl_weight_max must be >= 0");
  check(kl_anneal_steps >= 0, "kl_anneal_steps must be >= 0");
  check(context_dropout_prob >= 0.0 && context_dropout_prob <= 1.0, "context_dropout_prob must lie in [0, 1]");
  check(feature_dropout_prob >= 0.0 && feature_dropout_prob <= 1.0, "feature_dropout_prob must lie in [0, 1]");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(train_steps >= 0, "train_steps must be >= 0");
  check(learning_rate > 0.0, "learning_rate must be positive");
}

double kl_divergence(const LatentDistribution& dist) {
  require(dist.mu.size() == dist.log_var.size(), ErrorCode::Contract, "mu/log_var size mismatch");
  require(dist.mu.allFinite() && dist.log_var.allFinite(), ErrorCode::InvalidInput,
          "latent distribution must be finite");
  return 0.5 * (dist.mu.array().square() + dist.log_var.array().exp() - dist.log_var.array() - 1.0).sum();
}

Vector reparameterize(const LatentDistribution& dist, const Vector& noise) {
  require(noise.size() == dist.mu.size() && dist.log_var.size() == dist.mu.size(), ErrorCode::Contract,
          "noise length must equal latent dimension");
  return dist.mu + ((0.5 * dist.log_var.array()).exp() * noise.array()).matrix();
}

LossComponents loss(const data::PoseMatrix& predicted, const data::PoseMatrix& target,
                    const LatentDistribution& dist, double kl_weight) {
  require(predicted.cols() == target.cols(), ErrorCode::Contract,
          "prediction and target lengths differ");
  LossComponents out;
  out.reconstruction = (predicted - target).norm();
  out.kl = kl_divergence(dist);
  out.total = out.reconstruction + kl_weight * out.kl;
  return out;
}

double kl_anneal(std::int64_t step, const ModelConfig& config) {
  require(step >= 0, ErrorCode::Contract, "step must be non-negative");
  if (config.kl_anneal_steps <= 0) return config.kl_weight_max;
  const double ramp = std::min(1.0, static_cast<double>(step) / static_cast<double>(config.kl_anneal_steps));
  return config.kl_weight_max * ramp;
}

std::pair<int, int> ablation_hidden_widths(const ModelConfig& c) {
  const double F = c.feature_dim, d = c.latent_dim, He = c.encoder_hidden, Hd = c.decoder_hidden;
  // Match each recurrent block with a two-layer per-frame stack:
  //   w^2 + w * (in + 2) = 3H * in_gru + 3H^2 + 6H
  auto solve = [](double target, double in) {
    const double b = in + 2.0;
    return std::max(1, static_cast<int>(std::lround((-b + std::sqrt(b * b + 4.0 * target)) / 2.0)));
  };
  const double enc_target = 3.0 * He * (3.0 * F) + 3.0 * He * He + 6.0 * He;
  const double dec_target = 3.0 * Hd * (2.0 * F + d + 2.0) + 3.0 * Hd * Hd + 6.0 * Hd;
  return {solve(enc_target, 2.0 * F), solve(dec_target, F + d)};
}

// ---------------------------------------------------------------------------
// Layout

struct Model::Slots {
  bool temporal = true;
  Eigen::Index F = 0, d = 0, enc_h = 0, dec_h = 0;
  int gaze_w = -1, gaze_b = -1, head_w = -1, head_b = -1, ctx_w = -1, ctx_b = -1;
  nn::GruSlots enc_gru, dec_gru;
  int enc1_w = -1, enc1_b = -1, enc2_w = -1, enc2_b = -1;
  int dec1_w = -1, dec1_b = -1, dec2_w = -1, dec2_b = -1;
  int mu_w = -1, mu_b = -1, lv_w = -1, lv_b = -1, out_w = -1, out_b = -1;
};

namespace {

std::shared_ptr<Model::Slots> make_layout(const ModelConfig& c, nn::ParameterSet& p);

}  // namespace

// Forward activations kept for the backward pass.
struct Model::Pass {
  Eigen::Index B = 0, T = 0;
  std::vector<Matrix> gf, hf, gfm, hfm;
  Matrix cin, cf, cfm;
  std::vector<nn::GruStepCache> enc_cache, dec_cache;
  std::vector<Matrix> e_in, e1, e2;
  std::vector<Matrix> a_in, a1, a2;
  std::vector<Matrix> dec_states, outputs;
  Matrix summary;  // final encoder state or pooled frame features
  Matrix mu, lv_raw, lv, sigma, z;
};

namespace {

Matrix vstack(std::initializer_list<const Matrix*> parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = (*parts.begin())->cols();
  for (const Matrix* p : parts) rows += p->rows();
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Matrix* p : parts) {
    out.middleRows(r, p->rows()) = *p;
    r += p->rows();
  }
  return out;
}

Matrix tanh_grad(const Matrix& upstream, const Matrix& activated) {
  return upstream.cwiseProduct((1.0 - activated.array().square()).matrix());
}

Matrix broadcast_cols(const Matrix& m, Eigen::Index cols) {
  if (m.cols() == cols) return m;
  require(m.cols() == 1, ErrorCode::Contract, "cannot broadcast input to batch size");
  return m.replicate(1, cols);
}

}  // namespace

namespace {

std::shared_ptr<Model::Slots> make_layout(const ModelConfig& c, nn::ParameterSet& p) {
  auto s = std::make_shared<Model::Slots>();
  s->temporal = c.temporal_modeling;
  s->F = c.feature_dim;
  s->d = c.latent_dim;
  s->gaze_w = p.add("gaze_fc.weight", s->F, 2);
  s->gaze_b = p.add("gaze_fc.bias", s->F, 1);
  s->head_w = p.add("head_fc.weight", s->F, 2);
  s->head_b = p.add("head_fc.bias", s->F, 1);
  if (s->temporal) {
    s->enc_h = c.encoder_hidden;
    s->dec_h = c.decoder_hidden;
    s->ctx_w = p.add("context_fc.weight", s->F, 5);
    s->ctx_b = p.add("context_fc.bias", s->F, 1);
    s->enc_gru = nn::GruSlots::add(p, "encoder.gru", 3 * s->F, s->enc_h);
    s->dec_gru = nn::GruSlots::add(p, "decoder.gru", 2 * s->F + s->d + 2, s->dec_h);
  } else {
    const auto [enc_w, dec_w] = ablation_hidden_widths(c);
    s->enc_h = enc_w;
    s->dec_h = dec_w;
    s->enc1_w = p.add("encoder.ff1.weight", s->enc_h, 2 * s->F);
    s->enc1_b = p.add("encoder.ff1.bias", s->enc_h, 1);
    s->enc2_w = p.add("encoder.ff2.weight", s->enc_h, s->enc_h);
    s->enc2_b = p.add("encoder.ff2.bias", s->enc_h, 1);
    s->dec1_w = p.add("decoder.ff1.weight", s->dec_h, s->F + s->d);
    s->dec1_b = p.add("decoder.ff1.bias", s->dec_h, 1);
    s->dec2_w = p.add("decoder.ff2.weight", s->dec_h, s->dec_h);
    s->dec2_b = p.add("decoder.ff2.bias", s->dec_h, 1);
  }
  s->mu_w = p.add("encoder.mu.weight", s->d, s->enc_h);
  s->mu_b = p.add("encoder.mu.bias", s->d, 1);
  s->lv_w = p.add("encoder.log_var.weight", s->d, s->enc_h);
  s->lv_b = p.add("encoder.log_var.bias", s->d, 1);
  s->out_w = p.add("decoder.out.weight", 2, s->dec_h);
  s->out_b = p.add("decoder.out.bias", 2, 1);
  p.finalize();
  return s;
}

}  // namespace

Eigen::Index parameter_count(const ModelConfig& config) {
  nn::ParameterSet p;
  make_layout(config, p);
  return p.size();
}

Model::Model(ModelConfig config, data::NormStats norm) : config_(std::move(config)), norm_(norm) {
  config_.validate();
  build_layout();
  initialize();
}

Model::Model(ModelConfig config, data::NormStats norm, const Vector& parameters)
    : config_(std::move(config)), norm_(norm) {
  config_.validate();
  build_layout();
  require(parameters.size() == params_.size(), ErrorCode::Validation,
          "parameter vector holds " + std::to_string(parameters.size()) + " values, model needs " +
              std::to_string(params_.size()));
  params_.values() = parameters;
}

void Model::build_layout() { slots_ = make_layout(config_, params_); }

void Model::initialize() {
  const Slots& s = *slots_;
  Rng rng(derive_seed(config_.seed, 0));
  nn::xavier_uniform(params_.mat(s.gaze_w), rng);
  nn::xavier_uniform(params_.mat(s.head_w), rng);
  if (s.temporal) {
    nn::xavier_uniform(params_.mat(s.ctx_w), rng);
    s.enc_gru.init(params_, rng);
    s.dec_gru.init(params_, rng);
  } else {
    nn::xavier_uniform(params_.mat(s.enc1_w), rng);
    nn::xavier_uniform(params_.mat(s.enc2_w), rng);
    nn::xavier_uniform(params_.mat(s.dec1_w), rng);
    nn::xavier_uniform(params_.mat(s.dec2_w), rng);
  }
  nn::xavier_uniform(params_.mat(s.mu_w), rng);
  nn::xavier_uniform(params_.mat(s.lv_w), rng, 0.1);
  nn::xavier_uniform(params_.mat(s.out_w), rng);
}

Eigen::Index Model::feature_width() const {
  return (slots_->temporal ? 3 : 2) * slots_->F;
}

Vector Model::preprocess(const Eigen::Vector2d& gaze, const std::optional<Eigen::Vector2d>& head,
                         const Eigen::Vector4d& context, bool has_context, const Vector* dropout_mask) const {
  const Slots& s = *slots_;
  const double largest = std::max({gaze.cwiseAbs().maxCoeff(), head ? head->cwiseAbs().maxCoeff() : 0.0,
                                   has_context ? context.cwiseAbs().maxCoeff() : 0.0});
  if (largest > 10.0) {
    log::warn("preprocess: input magnitude " + std::to_string(largest) +
              " exceeds 10 standard deviations; are inputs normalized?");
  }
  Vector out = Vector::Zero(feature_width());
  out.head(s.F) = tanh_of(affine(params_.mat(s.gaze_w), params_.mat(s.gaze_b), Matrix(gaze)));
  if (head) out.segment(s.F, s.F) = tanh_of(affine(params_.mat(s.head_w), params_.mat(s.head_b), Matrix(*head)));
  if (s.temporal) {
    Matrix cin(5, 1);
    cin << (has_context ? context : Eigen::Vector4d::Zero()), (has_context ? 1.0 : 0.0);
    out.tail(s.F) = tanh_of(affine(params_.mat(s.ctx_w), params_.mat(s.ctx_b), cin));
  }
  if (dropout_mask) {
    require(dropout_mask->size() == out.size(), ErrorCode::Contract, "dropout mask width mismatch");
    out = out.cwiseProduct(*dropout_mask);
  }
  return out;
}

Batch Model::make_batch(std::span<const MotionWindow* const> windows) const {
  require(!windows.empty(), ErrorCode::Contract, "empty batch");
  const auto T = static_cast<std::size_t>(config_.window);
  const auto B = static_cast<Eigen::Index>(windows.size());
  Batch batch;
  batch.gaze.assign(T, Matrix(2, B));
  batch.head.assign(T, Matrix(2, B));
  batch.context = Matrix::Zero(4, B);
  batch.has_context = Eigen::RowVectorXd::Zero(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const MotionWindow& w = *windows[static_cast<std::size_t>(b)];
    w.validate(T);
    require(w.has_head(), ErrorCode::Contract, "training window lacks a real head sequence");
    const auto g = data::normalize(w.gaze, norm_, MotionKind::Gaze);
    const auto h = data::normalize(w.head, norm_, MotionKind::Head);
    for (std::size_t t = 0; t < T; ++t) {
      batch.gaze[t].col(b) = g.col(static_cast<Eigen::Index>(t));
      batch.head[t].col(b) = h.col(static_cast<Eigen::Index>(t));
    }
    if (w.has_context) {
      const auto c = data::normalize(w.context, norm_, MotionKind::Head);
      batch.context.col(b) << c(0, 0), c(1, 0), c(0, 1), c(1, 1);
      batch.has_context(b) = 1.0;
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Forward

void Model::run_forward(const Batch& batch, const StochasticInputs& noise, Pass& p) const {
  const Slots& s = *slots_;
  p.T = static_cast<Eigen::Index>(batch.length());
  p.B = batch.size();
  require(p.T == config_.window, ErrorCode::Contract,
          "batch length " + std::to_string(p.T) + " != window " + std::to_string(config_.window));
  require(batch.head.size() == batch.gaze.size(), ErrorCode::Contract, "batch lacks head sequences");
  const auto T = static_cast<std::size_t>(p.T);
  const bool masked = !noise.gaze_masks.empty();

  p.gf.resize(T);
  p.hf.resize(T);
  p.gfm.resize(T);
  p.hfm.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    p.gf[t] = tanh_of(affine(params_.mat(s.gaze_w), params_.mat(s.gaze_b), batch.gaze[t]));
    p.hf[t] = tanh_of(affine(params_.mat(s.head_w), params_.mat(s.head_b), batch.head[t]));
    p.gfm[t] = masked ? Matrix(p.gf[t].cwiseProduct(noise.gaze_masks[t])) : p.gf[t];
    p.hfm[t] = masked ? Matrix(p.hf[t].cwiseProduct(noise.head_masks[t])) : p.hf[t];
  }

  if (s.temporal) {
    p.cin = Matrix(5, p.B);
    p.cin.topRows(4) = batch.context;
    p.cin.row(4) = batch.has_context;
    p.cf = tanh_of(affine(params_.mat(s.ctx_w), params_.mat(s.ctx_b), p.cin));
    p.cfm = masked ? Matrix(p.cf.cwiseProduct(noise.context_mask)) : p.cf;

    p.enc_cache.resize(T);
    Matrix state = Matrix::Zero(s.enc_h, p.B);
    for (std::size_t t = 0; t < T; ++t) {
      state = nn::gru_step(params_, s.enc_gru, vstack({&p.gfm[t], &p.hfm[t], &p.cfm}), state, &p.enc_cache[t]);
    }
    p.summary = std::move(state);
  } else {
    p.e_in.resize(T);
    p.e1.resize(T);
    p.e2.resize(T);
    p.summary = Matrix::Zero(s.enc_h, p.B);
    for (std::size_t t = 0; t < T; ++t) {
      p.e_in[t] = vstack({&p.gfm[t], &p.hfm[t]});
      p.e1[t] = tanh_of(affine(params_.mat(s.enc1_w), params_.mat(s.enc1_b), p.e_in[t]));
      p.e2[t] = tanh_of(affine(params_.mat(s.enc2_w), params_.mat(s.enc2_b), p.e1[t]));
      p.summary += p.e2[t];
    }
    p.summary /= static_cast<double>(p.T);
  }

  p.mu = affine(params_.mat(s.mu_w), params_.mat(s.mu_b), p.summary);
  p.lv_raw = affine(params_.mat(s.lv_w), params_.mat(s.lv_b), p.summary);
  p.lv = p.lv_raw.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
  p.sigma = (0.5 * p.lv.array()).exp().matrix();
  if (noise.latent_noise.size() == 0) {
    p.z = p.mu;
  } else {
    require(noise.latent_noise.rows() == s.d && noise.latent_noise.cols() == p.B, ErrorCode::Contract,
            "latent noise shape mismatch");
    p.z = p.mu + p.sigma.cwiseProduct(noise.latent_noise);
  }

  // Decoder
  p.outputs.resize(T);
  p.dec_states.resize(T);
  if (s.temporal) {
    p.dec_cache.resize(T);
    Matrix prev = batch.context.bottomRows(2);
    Matrix state = Matrix::Zero(s.dec_h, p.B);
    for (std::size_t t = 0; t < T; ++t) {
      state = nn::gru_step(params_, s.dec_gru, vstack({&p.gfm[t], &p.z, &p.cfm, &prev}), state, &p.dec_cache[t]);
      p.dec_states[t] = state;
      p.outputs[t] = affine(params_.mat(s.out_w), params_.mat(s.out_b), state);
      prev = p.outputs[t];
    }
  } else {
    p.a_in.resize(T);
    p.a1.resize(T);
    p.a2.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      p.a_in[t] = vstack({&p.gfm[t], &p.z});
      p.a1[t] = tanh_of(affine(params_.mat(s.dec1_w), params_.mat(s.dec1_b), p.a_in[t]));
      p.a2[t] = tanh_of(affine(params_.mat(s.dec2_w), params_.mat(s.dec2_b), p.a1[t]));
      p.dec_states[t] = p.a2[t];
      p.outputs[t] = affine(params_.mat(s.out_w), params_.mat(s.out_b), p.a2[t]);
    }
  }
}

LatentDistribution Model::encode_normalized(const Batch& batch, Eigen::Index column) const {
  Pass p;
  run_forward(batch, {}, p);
  return {p.mu.col(column), p.lv.col(column)};
}

LatentDistribution Model::encode(const MotionWindow& window) const {
  require(window.has_head(), ErrorCode::Contract, "encode requires a window with a real head sequence");
  const MotionWindow* ptr = &window;
  const Batch batch = make_batch(std::span<const MotionWindow* const>(&ptr, 1));
  return encode_normalized(batch, 0);
}

std::vector<Matrix> Model::decode_normalized(const Matrix& z, const std::vector<Matrix>& gaze,
                                             const Matrix& context, const Eigen::RowVectorXd& has_context) const {
  const Slots& s = *slots_;
  require(static_cast<int>(gaze.size()) == config_.window, ErrorCode::Contract,
          "gaze length " + std::to_string(gaze.size()) + " != window " + std::to_string(config_.window));
  require(z.rows() == s.d, ErrorCode::Contract, "latent length " + std::to_string(z.rows()) +
                                                    " != latent_dim " + std::to_string(s.d));
  const Eigen::Index B = z.cols();
  require(context.rows() == 4 && context.cols() == B && has_context.cols() == B, ErrorCode::Contract,
          "context shape mismatch");
  std::vector<Matrix> out(gaze.size());
  std::vector<Matrix> gf(gaze.size());
  for (std::size_t t = 0; t < gaze.size(); ++t) {
    gf[t] = tanh_of(affine(params_.mat(s.gaze_w), params_.mat(s.gaze_b), broadcast_cols(gaze[t], B)));
  }
  if (s.temporal) {
    Matrix cin(5, B);
    for (Eigen::Index b = 0; b < B; ++b) {
      cin.col(b).head(4) = has_context(b) != 0.0 ? Eigen::Vector4d(context.col(b)) : Eigen::Vector4d::Zero();
    }
    cin.row(4) = has_context;
    const Matrix cf = tanh_of(affine(params_.mat(s.ctx_w), params_.mat(s.ctx_b), cin));
    Matrix prev = cin.middleRows(2, 2);
    Matrix state = Matrix::Zero(s.dec_h, B);
    for (std::size_t t = 0; t < gaze.size(); ++t) {
      state = nn::gru_step(params_, s.dec_gru, vstack({&gf[t], &z, &cf, &prev}), state, nullptr);
      out[t] = affine(params_.mat(s.out_w), params_.mat(s.out_b), state);
      prev = out[t];
    }
  } else {
    for (std::size_t t = 0; t < gaze.size(); ++t) {
      const Matrix a_in = vstack({&gf[t], &z});
      const Matrix a1 = tanh_of(affine(params_.mat(s.dec1_w), params_.mat(s.dec1_b), a_in));
      const Matrix a2 = tanh_of(affine(params_.mat(s.dec2_w), params_.mat(s.dec2_b), a1));
      out[t] = affine(params_.mat(s.out_w), params_.mat(s.out_b), a2);
    }
  }
  return out;
}

std::vector<AngularPose> Model::decode(const Vector& z, std::span<const AngularPose> gaze,
                                       const std::array<AngularPose, 2>& context, bool has_context) const {
  require(static_cast<int>(gaze.size()) == config_.window, ErrorCode::Contract,
          "gaze length " + std::to_string(gaze.size()) + " != window " + std::to_string(config_.window));
  const auto g = data::normalize(gaze, norm_, MotionKind::Gaze);
  std::vector<Matrix> frames(gaze.size());
  for (std::size_t t = 0; t < gaze.size(); ++t) frames[t] = g.col(static_cast<Eigen::Index>(t));
  Matrix ctx = Matrix::Zero(4, 1);
  if (has_context) {
    const auto c = data::normalize(context, norm_, MotionKind::Head);
    ctx << c(0, 0), c(1, 0), c(0, 1), c(1, 1);
  }
  Eigen::RowVectorXd has(1);
  has(0) = has_context ? 1.0 : 0.0;
  const auto out = decode_normalized(Matrix(z), frames, ctx, has);
  data::PoseMatrix stacked(2, static_cast<Eigen::Index>(out.size()));
  for (std::size_t t = 0; t < out.size(); ++t) stacked.col(static_cast<Eigen::Index>(t)) = out[t].col(0);
  auto poses = data::denormalize(stacked, norm_, MotionKind::Head);
  for (auto& p : poses) {
    require(std::isfinite(p.pitch) && std::isfinite(p.yaw), ErrorCode::Numeric, "decoder produced non-finite pose");
    p = canonicalize(p);
  }
  return poses;
}

// ---------------------------------------------------------------------------
// Loss and backward

LossComponents Model::loss_and_gradient(const Batch& batch, const StochasticInputs& noise, double kl_weight,
                                        Vector* gradient) const {
  const Slots& s = *slots_;
  Pass p;
  run_forward(batch, noise, p);
  const auto T = static_cast<std::size_t>(p.T);
  const Eigen::Index B = p.B;
  const double inv_b = 1.0 / static_cast<double>(B);

  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(B);
  for (std::size_t t = 0; t < T; ++t) sq += (p.outputs[t] - batch.head[t]).colwise().squaredNorm();
  const Eigen::RowVectorXd recon = sq.array().sqrt().matrix();
  const Eigen::RowVectorXd kl =
      0.5 * (p.mu.array().square() + p.lv.array().exp() - p.lv.array() - 1.0).colwise().sum().matrix();

  LossComponents out;
  out.reconstruction = recon.mean();
  out.kl = kl.mean();
  out.total = out.reconstruction + kl_weight * out.kl;
  if (!gradient) return out;

  Vector& grad = *gradient;
  grad = Vector::Zero(params_.size());
  auto g = [&](int id) { return params_.view(grad, id); };
  auto w = [&](int id) { return params_.mat(id); };

  Eigen::RowVectorXd recon_scale(B);
  for (Eigen::Index b = 0; b < B; ++b) recon_scale(b) = recon(b) > 0.0 ? inv_b / recon(b) : 0.0;

  std::vector<Matrix> d_gfm(T, Matrix::Zero(s.F, B));
  std::vector<Matrix> d_hfm(T, Matrix::Zero(s.F, B));
  Matrix d_cfm = Matrix::Zero(s.F, B);
  Matrix dz = Matrix::Zero(s.d, B);

  // Decoder
  if (s.temporal) {
    Matrix d_state = Matrix::Zero(s.dec_h, B);
    Matrix d_prev = Matrix::Zero(2, B);
    for (std::size_t ti = T; ti-- > 0;) {
      Matrix dy = (p.outputs[ti] - batch.head[ti]) * recon_scale.asDiagonal();
      dy += d_prev;
      Matrix d_out_state;
      affine_backward(dy, p.dec_states[ti], w(s.out_w), g(s.out_w), g(s.out_b), &d_out_state);
      const Matrix d_total = d_out_state + d_state;
      Matrix du;
      nn::gru_step_backward(params_, s.dec_gru, p.dec_cache[ti], d_total, grad, du, d_state);
      d_gfm[ti] += du.topRows(s.F);
      dz += du.middleRows(s.F, s.d);
      d_cfm += du.middleRows(s.F + s.d, s.F);
      d_prev = du.bottomRows(2);
    }
  } else {
    for (std::size_t ti = 0; ti < T; ++ti) {
      const Matrix dy = (p.outputs[ti] - batch.head[ti]) * recon_scale.asDiagonal();
      Matrix da2, da1, d_in;
      affine_backward(dy, p.a2[ti], w(s.out_w), g(s.out_w), g(s.out_b), &da2);
      affine_backward(tanh_grad(da2, p.a2[ti]), p.a1[ti], w(s.dec2_w), g(s.dec2_w), g(s.dec2_b), &da1);
      affine_backward(tanh_grad(da1, p.a1[ti]), p.a_in[ti], w(s.dec1_w), g(s.dec1_w), g(s.dec1_b), &d_in);
      d_gfm[ti] += d_in.topRows(s.F);
      dz += d_in.bottomRows(s.d);
    }
  }

  // Latent
  const Matrix d_mu = dz + kl_weight * inv_b * p.mu;
  Matrix d_lv = kl_weight * inv_b * 0.5 * (p.lv.array().exp() - 1.0).matrix();
  if (noise.latent_noise.size() != 0) {
    d_lv += (dz.array() * noise.latent_noise.array() * 0.5 * p.sigma.array()).matrix();
  }
  for (Eigen::Index i = 0; i < d_lv.size(); ++i) {
    const double raw = p.lv_raw.data()[i];
    if (raw < kLogVarMin || raw > kLogVarMax) d_lv.data()[i] = 0.0;
  }
  Matrix d_summary, d_summary_lv;
  affine_backward(d_mu, p.summary, w(s.mu_w), g(s.mu_w), g(s.mu_b), &d_summary);
  affine_backward(d_lv, p.summary, w(s.lv_w), g(s.lv_w), g(s.lv_b), &d_summary_lv);
  d_summary += d_summary_lv;

  // Encoder
  if (s.temporal) {
    Matrix d_state = d_summary;
    for (std::size_t ti = T; ti-- > 0;) {
      Matrix dx;
      nn::gru_step_backward(params_, s.enc_gru, p.enc_cache[ti], d_state, grad, dx, d_state);
      d_gfm[ti] += dx.topRows(s.F);
      d_hfm[ti] += dx.middleRows(s.F, s.F);
      d_cfm += dx.bottomRows(s.F);
    }
  } else {
    const Matrix de2 = d_summary / static_cast<double>(p.T);
    for (std::size_t ti = 0; ti < T; ++ti) {
      Matrix de1, d_in;
      affine_backward(tanh_grad(de2, p.e2[ti]), p.e1[ti], w(s.enc2_w), g(s.enc2_w), g(s.enc2_b), &de1);
      affine_backward(tanh_grad(de1, p.e1[ti]), p.e_in[ti], w(s.enc1_w), g(s.enc1_w), g(s.enc1_b), &d_in);
      d_gfm[ti] += d_in.topRows(s.F);
      d_hfm[ti] += d_in.bottomRows(s.F);
    }
  }

  // Preprocessing
  const bool masked = !noise.gaze_masks.empty();
  for (std::size_t ti = 0; ti < T; ++ti) {
    Matrix dgf = masked ? Matrix(d_gfm[ti].cwiseProduct(noise.gaze_masks[ti])) : d_gfm[ti];
    Matrix dhf = masked ? Matrix(d_hfm[ti].cwiseProduct(noise.head_masks[ti])) : d_hfm[ti];
    affine_backward(tanh_grad(dgf, p.gf[ti]), batch.gaze[ti], w(s.gaze_w), g(s.gaze_w), g(s.gaze_b), nullptr);
    affine_backward(tanh_grad(dhf, p.hf[ti]), batch.head[ti], w(s.head_w), g(s.head_w), g(s.head_b), nullptr);
  }
  if (s.temporal) {
    Matrix dcf = masked ? Matrix(d_cfm.cwiseProduct(noise.context_mask)) : d_cfm;
    affine_backward(tanh_grad(dcf, p.cf), p.cin, w(s.ctx_w), g(s.ctx_w), g(s.ctx_b), nullptr);
  }
  return out;
}

}  // namespace gazehead::cvae
