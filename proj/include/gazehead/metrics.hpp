#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gazehead/motion_types.hpp"

namespace gazehead::metrics {

/// Angle between the two direction vectors, degrees.
double frame_angle_deg(const AngularPose& a, const AngularPose& b);

/// Mean per-frame 3D angle between generated and real head directions,
/// degrees. Throws Contract on length mismatch.
double angular_error(const MotionSequence& generated, const MotionSequence& real);

enum class Dimension { Pitch, Yaw };

struct Correlation {
  double value = 0.0;
  bool degenerate = false;  // a constant input; value is then 0
};

/// Pearson correlation over time of one angle.
Correlation correlation(const MotionSequence& generated, const MotionSequence& real, Dimension dim);

/// Mean over pitch/yaw of |Var(generated) - Var(real)|, population
/// variance, degrees^2.
double ave(const MotionSequence& generated, const MotionSequence& real);

/// Mean |third forward difference| over frames and both angles, degrees per
/// frame^3. Throws Contract for fewer than 4 frames.
double smoothness(const MotionSequence& sequence);

/// Mean over unordered pairs of the L2 norm of the flattened difference,
/// degrees. Throws Contract for fewer than 2 samples or unequal lengths.
double apd(std::span<const MotionSequence> samples);

struct EvalInput {
  std::string id;
  MotionSequence real;
  std::vector<MotionSequence> samples;  // K generations, same length as real
  double weight = 1.0;
};

struct EvalReport {
  std::string method;
  double angular_error_avg = 0.0;
  double angular_error_best = 0.0;
  double correlation_pitch_best = 0.0;
  double correlation_yaw_best = 0.0;
  double ave_avg = 0.0;
  double smoothness_avg = 0.0;
  double apd = 0.0;
  int k = 0;
  int num_inputs = 0;
};

/// Per input: mean/min over samples for angular error, max for correlation,
/// mean for AVE and smoothness, APD over the sample set (0 when only one
/// sample). Inputs are combined by weighted mean.
EvalReport evaluate(const std::string& method, std::span<const EvalInput> inputs);

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports);
std::vector<EvalReport> read_report_csv(std::istream& in);

}  // namespace gazehead::metrics
