#pragma once

#include <vector>

#include "gazehead/cvae.hpp"
#include "gazehead/random.hpp"

namespace gazehead::testing {

// Small model used by gradient and round-trip checks.
inline cvae::ModelConfig tiny_config(bool temporal) {
  cvae::ModelConfig c;
  c.window = 3;
  c.latent_dim = 2;
  c.encoder_hidden = 4;
  c.decoder_hidden = 4;
  c.feature_dim = 3;
  c.batch_size = 4;
  c.temporal_modeling = temporal;
  c.seed = 7;
  return c;
}

inline cvae::Batch random_batch(const cvae::ModelConfig& c, Eigen::Index batch_size, Rng& rng) {
  cvae::Batch b;
  for (int t = 0; t < c.window; ++t) {
    cvae::Matrix g(2, batch_size), h(2, batch_size);
    for (Eigen::Index j = 0; j < batch_size; ++j) {
      g(0, j) = rng.normal();
      g(1, j) = rng.normal();
      h(0, j) = rng.normal();
      h(1, j) = rng.normal();
    }
    b.gaze.push_back(g);
    b.head.push_back(h);
  }
  b.context = cvae::Matrix::Zero(4, batch_size);
  b.has_context = Eigen::RowVectorXd::Zero(batch_size);
  for (Eigen::Index j = 0; j < batch_size; ++j) {
    if (c.temporal_modeling && j % 2 == 0) {
      for (int i = 0; i < 4; ++i) b.context(i, j) = rng.normal();
      b.has_context(j) = 1.0;
    }
  }
  return b;
}

inline cvae::StochasticInputs random_noise(const cvae::ModelConfig& c, Eigen::Index batch_size, Rng& rng) {
  cvae::StochasticInputs n;
  n.latent_noise.resize(c.latent_dim, batch_size);
  for (Eigen::Index j = 0; j < batch_size; ++j) {
    for (Eigen::Index i = 0; i < c.latent_dim; ++i) n.latent_noise(i, j) = rng.normal();
  }
  const double keep = 1.0 / (1.0 - c.feature_dropout_prob);
  auto mask = [&] {
    cvae::Matrix m(c.feature_dim, batch_size);
    for (Eigen::Index j = 0; j < batch_size; ++j) {
      for (Eigen::Index i = 0; i < c.feature_dim; ++i) m(i, j) = rng.bernoulli(0.2) ? 0.0 : keep;
    }
    return m;
  };
  for (int t = 0; t < c.window; ++t) {
    n.gaze_masks.push_back(mask());
    n.head_masks.push_back(mask());
  }
  n.context_mask = mask();
  return n;
}

struct GradientCheckResult {
  double worst_relative = 0.0;
  Eigen::Index worst_index = -1;
  Eigen::Index checked = 0;
};

// Central differences of the total loss against the analytic gradient for
// every parameter. Relative error uses max(|a|, |n|, floor) as denominator.
inline GradientCheckResult gradient_check(const cvae::ModelConfig& c, std::uint64_t seed, double step = 1e-5,
                                          double floor = 1e-6) {
  cvae::Model model(c);
  Rng rng(seed);
  // Move parameters off the initialization so the check sees generic values.
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i) model.parameters()(i) += 0.3 * rng.normal();
  const auto batch = random_batch(c, 4, rng);
  const auto noise = random_noise(c, 4, rng);
  const double lambda = 0.37;
  cvae::Vector analytic;
  model.loss_and_gradient(batch, noise, lambda, &analytic);
  GradientCheckResult r;
  for (Eigen::Index i = 0; i < model.parameters().size(); ++i) {
    const double saved = model.parameters()(i);
    model.parameters()(i) = saved + step;
    const double plus = model.loss_and_gradient(batch, noise, lambda, nullptr).total;
    model.parameters()(i) = saved - step;
    const double minus = model.loss_and_gradient(batch, noise, lambda, nullptr).total;
    model.parameters()(i) = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), floor});
    const double rel = std::abs(analytic(i) - numeric) / denom;
    if (rel > r.worst_relative) {
      r.worst_relative = rel;
      r.worst_index = i;
    }
    ++r.checked;
  }
  return r;
}

}  // namespace gazehead::testing
