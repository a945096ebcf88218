#pragma once

// Minimal dense building blocks with hand-written backward passes. Batches are
// stored column-major: one column per sample.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gazehead/random.hpp"

namespace gazehead::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

/// Named tensors packed into one flat buffer. Gradients and optimizer
/// moments reuse the same layout.
class ParameterSet {
 public:
  struct Slot {
    std::string name;
    Eigen::Index rows;
    Eigen::Index cols;
    Eigen::Index offset;
  };

  int add(std::string name, Eigen::Index rows, Eigen::Index cols);

  Eigen::Index size() const { return static_cast<Eigen::Index>(values_.size()); }
  const std::vector<Slot>& slots() const { return slots_; }
  const Slot& slot(int id) const { return slots_[static_cast<std::size_t>(id)]; }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }

  MatrixMap mat(int id) { return view(values_, id); }
  ConstMatrixMap mat(int id) const { return view(values_, id); }

  MatrixMap view(Vector& buffer, int id) const;
  ConstMatrixMap view(const Vector& buffer, int id) const;

  /// Allocates storage after all slots are added; values start at zero.
  void finalize();

 private:
  std::vector<Slot> slots_;
  Vector values_;
};

/// Weights U(-a, a) with a = gain * sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(MatrixMap w, Rng& rng, double gain = 1.0);
void uniform_fill(MatrixMap w, Rng& rng, double bound);

inline Matrix tanh_of(const Matrix& x) { return x.array().tanh().matrix(); }
inline Matrix sigmoid_of(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

/// y = W x + b for every column of x.
inline Matrix affine(const ConstMatrixMap& w, const ConstMatrixMap& b, const Matrix& x) {
  Matrix y(w.rows(), x.cols());
  y.noalias() = w * x;
  y.colwise() += b.col(0);
  return y;
}

/// Accumulates dW, db and returns dx (when requested).
void affine_backward(const Matrix& dy, const Matrix& x, const ConstMatrixMap& w, MatrixMap dw,
                     MatrixMap db, Matrix* dx);

/// Slot ids of one gated recurrent unit (reset, update, candidate gates
/// stacked in that order).
struct GruSlots {
  int w_input = -1;   // 3H x in
  int w_hidden = -1;  // 3H x H
  int b_input = -1;   // 3H
  int b_hidden = -1;  // 3H
  Eigen::Index hidden = 0;
  Eigen::Index input = 0;

  static GruSlots add(ParameterSet& params, const std::string& prefix, Eigen::Index input,
                      Eigen::Index hidden);
  void init(ParameterSet& params, Rng& rng) const;
};

struct GruStepCache {
  Matrix x, h_prev, r, u, n, hn;
};

/// One step h' = (1 - u) * n + u * h. Fills `cache` when non-null.
Matrix gru_step(const ParameterSet& params, const GruSlots& slots, const Matrix& x, const Matrix& h,
                GruStepCache* cache);

/// Given dL/dh', accumulates parameter gradients into `grad` and returns
/// dL/dx and dL/dh.
void gru_step_backward(const ParameterSet& params, const GruSlots& slots, const GruStepCache& cache,
                       const Matrix& dh_next, Vector& grad, Matrix& dx, Matrix& dh_prev);

class Adam {
 public:
  Adam() = default;
  Adam(Eigen::Index size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(Vector& params, const Vector& grad, double learning_rate);
  std::int64_t steps() const { return t_; }

 private:
  Vector m_, v_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::int64_t t_ = 0;
};

}  // namespace gazehead::nn
