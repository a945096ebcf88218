#include "gazehead/nn.hpp"

#include <cmath>

#include "gazehead/error.hpp"

namespace gazehead::nn {

int ParameterSet::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  require(values_.size() == 0, ErrorCode::Contract, "parameter set already finalized");
  Eigen::Index offset = 0;
  if (!slots_.empty()) offset = slots_.back().offset + slots_.back().rows * slots_.back().cols;
  slots_.push_back({std::move(name), rows, cols, offset});
  return static_cast<int>(slots_.size()) - 1;
}

void ParameterSet::finalize() {
  Eigen::Index total = 0;
  for (const auto& s : slots_) total += s.rows * s.cols;
  values_ = Vector::Zero(total);
}

MatrixMap ParameterSet::view(Vector& buffer, int id) const {
  const Slot& s = slot(id);
  return MatrixMap(buffer.data() + s.offset, s.rows, s.cols);
}

ConstMatrixMap ParameterSet::view(const Vector& buffer, int id) const {
  const Slot& s = slot(id);
  return ConstMatrixMap(buffer.data() + s.offset, s.rows, s.cols);
}

void xavier_uniform(MatrixMap w, Rng& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  uniform_fill(w, rng, bound);
}

void uniform_fill(MatrixMap w, Rng& rng, double bound) {
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
  }
}

void affine_backward(const Matrix& dy, const Matrix& x, const ConstMatrixMap& w, MatrixMap dw,
                     MatrixMap db, Matrix* dx) {
  dw.noalias() += dy * x.transpose();
  db.col(0) += dy.rowwise().sum();
  if (dx) {
    dx->resize(w.cols(), dy.cols());
    dx->noalias() = w.transpose() * dy;
  }
}

GruSlots GruSlots::add(ParameterSet& params, const std::string& prefix, Eigen::Index input,
                       Eigen::Index hidden) {
  GruSlots s;
  s.input = input;
  s.hidden = hidden;
  s.w_input = params.add(prefix + ".w_input", 3 * hidden, input);
  s.w_hidden = params.add(prefix + ".w_hidden", 3 * hidden, hidden);
  s.b_input = params.add(prefix + ".b_input", 3 * hidden, 1);
  s.b_hidden = params.add(prefix + ".b_hidden", 3 * hidden, 1);
  return s;
}

void GruSlots::init(ParameterSet& params, Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  uniform_fill(params.mat(w_input), rng, bound);
  uniform_fill(params.mat(w_hidden), rng, bound);
  params.mat(b_input).setZero();
  params.mat(b_hidden).setZero();
}

Matrix gru_step(const ParameterSet& params, const GruSlots& s, const Matrix& x, const Matrix& h,
                GruStepCache* cache) {
  const Eigen::Index H = s.hidden;
  const Matrix gi = affine(params.mat(s.w_input), params.mat(s.b_input), x);
  const Matrix gh = affine(params.mat(s.w_hidden), params.mat(s.b_hidden), h);
  Matrix r = sigmoid_of(gi.topRows(H) + gh.topRows(H));
  Matrix u = sigmoid_of(gi.middleRows(H, H) + gh.middleRows(H, H));
  Matrix hn = gh.bottomRows(H);
  Matrix n = tanh_of(gi.bottomRows(H) + r.cwiseProduct(hn));
  Matrix out = n + u.cwiseProduct(h - n);
  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->r = std::move(r);
    cache->u = std::move(u);
    cache->n = std::move(n);
    cache->hn = std::move(hn);
  }
  return out;
}

void gru_step_backward(const ParameterSet& params, const GruSlots& s, const GruStepCache& c,
                       const Matrix& dh_next, Vector& grad, Matrix& dx, Matrix& dh_prev) {
  const Eigen::Index H = s.hidden;
  const Eigen::Index B = dh_next.cols();
  const auto one = [](const Matrix& m) { return Matrix::Ones(m.rows(), m.cols()); };

  const Matrix dn = dh_next.cwiseProduct(one(c.u) - c.u);
  const Matrix du = dh_next.cwiseProduct(c.h_prev - c.n);
  const Matrix da_n = dn.cwiseProduct(one(c.n) - c.n.cwiseProduct(c.n));
  const Matrix dr = da_n.cwiseProduct(c.hn);
  const Matrix da_u = du.cwiseProduct(c.u.cwiseProduct(one(c.u) - c.u));
  const Matrix da_r = dr.cwiseProduct(c.r.cwiseProduct(one(c.r) - c.r));

  Matrix dgi(3 * H, B), dgh(3 * H, B);
  dgi << da_r, da_u, da_n;
  dgh << da_r, da_u, da_n.cwiseProduct(c.r);

  affine_backward(dgi, c.x, params.mat(s.w_input), params.view(grad, s.w_input),
                  params.view(grad, s.b_input), &dx);
  Matrix dh_from_gates;
  affine_backward(dgh, c.h_prev, params.mat(s.w_hidden), params.view(grad, s.w_hidden),
                  params.view(grad, s.b_hidden), &dh_from_gates);
  dh_prev = dh_next.cwiseProduct(c.u) + dh_from_gates;
}

Adam::Adam(Eigen::Index size, double beta1, double beta2, double eps)
    : m_(Vector::Zero(size)), v_(Vector::Zero(size)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(Vector& params, const Vector& grad, double learning_rate) {
  require(params.size() == m_.size() && grad.size() == m_.size(), ErrorCode::Contract,
          "optimizer size mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace gazehead::nn
