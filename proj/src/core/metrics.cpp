#include "gazehead/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "gazehead/error.hpp"
#include "gazehead/log.hpp"

namespace gazehead::metrics {
namespace {

void require_same_length(const MotionSequence& a, const MotionSequence& b) {
  require(a.size() == b.size(), ErrorCode::Contract,
          "sequence lengths differ (" + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

double component(const AngularPose& p, Dimension dim) {
  return rad_to_deg(dim == Dimension::Pitch ? p.pitch : p.yaw);
}

double population_variance(const MotionSequence& s, Dimension dim) {
  double mean = 0.0;
  for (const auto& p : s.frames()) mean += component(p, dim);
  mean /= static_cast<double>(s.size());
  double acc = 0.0;
  for (const auto& p : s.frames()) acc += (component(p, dim) - mean) * (component(p, dim) - mean);
  return acc / static_cast<double>(s.size());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

double frame_angle_deg(const AngularPose& a, const AngularPose& b) {
  const Vec3 u = to_direction_vector(a);
  const Vec3 v = to_direction_vector(b);
  const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  const double cx = u[1] * v[2] - u[2] * v[1];
  const double cy = u[2] * v[0] - u[0] * v[2];
  const double cz = u[0] * v[1] - u[1] * v[0];
  // atan2 of (|u x v|, u . v) is the arccos of the clamped dot product,
  // without its loss of precision near 0 and 180 degrees.
  return rad_to_deg(std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot));
}

double angular_error(const MotionSequence& generated, const MotionSequence& real) {
  require_same_length(generated, real);
  double sum = 0.0;
  for (std::size_t t = 0; t < real.size(); ++t) sum += frame_angle_deg(generated[t], real[t]);
  return sum / static_cast<double>(real.size());
}

Correlation correlation(const MotionSequence& generated, const MotionSequence& real, Dimension dim) {
  require_same_length(generated, real);
  const auto n = static_cast<double>(real.size());
  if (real.size() < 2) return {0.0, true};
  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t < real.size(); ++t) {
    mx += component(generated[t], dim);
    my += component(real[t], dim);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < real.size(); ++t) {
    const double dx = component(generated[t], dim) - mx;
    const double dy = component(real[t], dim) - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 1e-24 || syy <= 1e-24) return {0.0, true};
  return {std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

double ave(const MotionSequence& generated, const MotionSequence& real) {
  require_same_length(generated, real);
  require(real.size() >= 2, ErrorCode::Contract, "AVE needs at least 2 frames");
  double sum = 0.0;
  for (Dimension dim : {Dimension::Pitch, Dimension::Yaw}) {
    sum += std::abs(population_variance(generated, dim) - population_variance(real, dim));
  }
  return sum / 2.0;
}

double smoothness(const MotionSequence& s) {
  require(s.size() >= 4, ErrorCode::Contract, "smoothness needs at least 4 frames");
  double sum = 0.0;
  for (std::size_t t = 0; t + 3 < s.size(); ++t) {
    for (Dimension dim : {Dimension::Pitch, Dimension::Yaw}) {
      const double jerk = (component(s[t + 3], dim) - component(s[t], dim)) -
                          3.0 * (component(s[t + 2], dim) - component(s[t + 1], dim));
      sum += std::abs(jerk);
    }
  }
  return sum / (2.0 * static_cast<double>(s.size() - 3));
}

double apd(std::span<const MotionSequence> samples) {
  require(samples.size() >= 2, ErrorCode::Contract, "APD needs at least 2 samples");
  for (const auto& s : samples) require_same_length(s, samples.front());
  const std::size_t n = samples.front().size();
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) {
      double sq = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double dp = rad_to_deg(samples[i][t].pitch) - rad_to_deg(samples[j][t].pitch);
        const double dy = rad_to_deg(samples[i][t].yaw) - rad_to_deg(samples[j][t].yaw);
        sq += dp * dp + dy * dy;
      }
      total += std::sqrt(sq);
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

EvalReport evaluate(const std::string& method, std::span<const EvalInput> inputs) {
  require(!inputs.empty(), ErrorCode::Validation, "evaluation needs at least one input");
  EvalReport report;
  report.method = method;
  report.k = static_cast<int>(inputs.front().samples.size());
  report.num_inputs = static_cast<int>(inputs.size());
  double weight_sum = 0.0;
  std::size_t degenerate = 0, correlations = 0;
  for (const auto& in : inputs) {
    require(!in.samples.empty(), ErrorCode::Validation, "input '" + in.id + "' has no generations");
    require(in.weight > 0.0, ErrorCode::Validation, "input '" + in.id + "' has non-positive weight");
    // Running means stay exact when all K samples score the same.
    double n = 0.0;
    double ang_mean = 0.0, ang_min = std::numeric_limits<double>::infinity();
    double corr_pitch = -std::numeric_limits<double>::infinity();
    double corr_yaw = -std::numeric_limits<double>::infinity();
    double ave_mean = 0.0, smooth_mean = 0.0;
    for (const auto& s : in.samples) {
      n += 1.0;
      const double ang = angular_error(s, in.real);
      ang_mean += (ang - ang_mean) / n;
      ang_min = std::min(ang_min, ang);
      const Correlation cp = correlation(s, in.real, Dimension::Pitch);
      const Correlation cy = correlation(s, in.real, Dimension::Yaw);
      degenerate += static_cast<std::size_t>(cp.degenerate) + static_cast<std::size_t>(cy.degenerate);
      correlations += 2;
      corr_pitch = std::max(corr_pitch, cp.value);
      corr_yaw = std::max(corr_yaw, cy.value);
      ave_mean += (ave(s, in.real) - ave_mean) / n;
      smooth_mean += (smoothness(s) - smooth_mean) / n;
    }
    const double w = in.weight;
    weight_sum += w;
    report.angular_error_avg += w * ang_mean;
    report.angular_error_best += w * ang_min;
    report.correlation_pitch_best += w * corr_pitch;
    report.correlation_yaw_best += w * corr_yaw;
    report.ave_avg += w * ave_mean;
    report.smoothness_avg += w * smooth_mean;
    report.apd += in.samples.size() >= 2 ? w * apd(in.samples) : 0.0;
  }
  for (double* v : {&report.angular_error_avg, &report.angular_error_best, &report.correlation_pitch_best,
                    &report.correlation_yaw_best, &report.ave_avg, &report.smoothness_avg, &report.apd}) {
    *v /= weight_sum;
  }
  if (degenerate > 0) {
    log::warn("evaluate(" + method + "): " + std::to_string(degenerate) + " of " + std::to_string(correlations) +
              " correlations were degenerate (constant sequence) and scored 0");
  }
  return report;
}

void write_report_csv(std::ostream& out, std::span<const EvalReport> reports) {
  out << "method,angular_error_avg,angular_error_best,correlation_pitch_best,correlation_yaw_best,"
         "ave_avg,smoothness_avg,apd,k,num_inputs\n";
  for (const auto& r : reports) {
    out << r.method << ',' << format_double(r.angular_error_avg) << ',' << format_double(r.angular_error_best)
        << ',' << format_double(r.correlation_pitch_best) << ',' << format_double(r.correlation_yaw_best) << ','
        << format_double(r.ave_avg) << ',' << format_double(r.smoothness_avg) << ',' << format_double(r.apd)
        << ',' << r.k << ',' << r.num_inputs << '\n';
  }
}

std::vector<EvalReport> read_report_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::Parse, "report is empty");
  require(line.rfind("method,angular_error_avg", 0) == 0, ErrorCode::Parse, "unexpected report header");
  std::vector<EvalReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(cells.size() == 10, ErrorCode::Parse, "report line " + std::to_string(line_no) + " has " +
                                                      std::to_string(cells.size()) + " columns, expected 10");
    try {
      EvalReport r;
      r.method = cells[0];
      r.angular_error_avg = std::stod(cells[1]);
      r.angular_error_best = std::stod(cells[2]);
      r.correlation_pitch_best = std::stod(cells[3]);
      r.correlation_yaw_best = std::stod(cells[4]);
      r.ave_avg = std::stod(cells[5]);
      r.smoothness_avg = std::stod(cells[6]);
      r.apd = std::stod(cells[7]);
      r.k = std::stoi(cells[8]);
      r.num_inputs = std::stoi(cells[9]);
      out.push_back(r);
    } catch (const std::exception& e) {
      fail(ErrorCode::Parse, "report line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace gazehead::metrics
