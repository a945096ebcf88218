#include <doctest.h>

#include <array>
#include <cmath>
#include <sstream>

#include "../support/generators.hpp"
#include "../support/oracles.hpp"
#include "gazehead/error.hpp"
#include "gazehead/metrics.hpp"

using namespace gazehead;
using namespace gazehead::metrics;
using testing::degrees;

namespace {

MotionSequence yaw_only(const std::vector<double>& yaw_deg) {
  std::vector<std::pair<double, double>> py;
  for (double y : yaw_deg) py.emplace_back(0.0, y);
  return degrees(py);
}

}  // namespace

// --- angular error --------------------------------------------------------------

TEST_CASE("angular error of identical and orthogonal sequences") {
  Rng rng(1);
  const auto s = testing::random_sequence(rng, 20);
  CHECK(angular_error(s, s) == 0.0);
  const auto a = degrees({{0, 0}, {0, 0}});
  const auto b = degrees({{0, 90}, {0, 90}});
  CHECK(angular_error(a, b) == doctest::Approx(90.0).epsilon(1e-12));
}

TEST_CASE("angular error matches the rotation-matrix oracle") {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    const auto a = testing::random_pose(rng);
    const auto b = testing::random_pose(rng);
    CHECK(std::abs(frame_angle_deg(a, b) - testing::rotation_angle_deg(a, b)) < 1e-9);
  }
}

TEST_CASE("angular error is symmetric and obeys the triangle inequality per frame") {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto a = testing::random_pose(rng);
    const auto b = testing::random_pose(rng);
    const auto c = testing::random_pose(rng);
    CHECK(frame_angle_deg(a, b) == doctest::Approx(frame_angle_deg(b, a)).epsilon(1e-14));
    CHECK(frame_angle_deg(a, c) <= frame_angle_deg(a, b) + frame_angle_deg(b, c) + 1e-9);
  }
}

TEST_CASE("angular error is accurate for tiny angles") {
  const AngularPose a{0.1, 0.2};
  const AngularPose b{0.1, 0.2 + 1e-9};
  CHECK(frame_angle_deg(a, b) == doctest::Approx(rad_to_deg(1e-9 * std::cos(0.1))).epsilon(1e-6));
}

TEST_CASE("length mismatch is a contract violation") {
  Rng rng(4);
  const auto a = testing::random_sequence(rng, 5);
  const auto b = testing::random_sequence(rng, 6);
  CHECK_THROWS_AS(angular_error(a, b), Error);
  CHECK_THROWS_AS(ave(a, b), Error);
}

// --- correlation ----------------------------------------------------------------

TEST_CASE("correlation of equal and negated sequences") {
  const auto s = degrees({{1, -3}, {4, 2}, {-2, 7}, {5, 1}});
  const auto neg = degrees({{-1, 3}, {-4, -2}, {2, -7}, {-5, -1}});
  CHECK(correlation(s, s, Dimension::Pitch).value == doctest::Approx(1.0));
  CHECK(correlation(s, neg, Dimension::Yaw).value == doctest::Approx(-1.0));
}

TEST_CASE("five-frame correlation matches hand arithmetic") {
  // x = 1..5, y = (2, 4, 5, 4, 5): sxy = 6, sxx = 10, syy = 6.
  const auto gen = degrees({{1, 0}, {2, 0}, {3, 0}, {4, 0}, {5, 0}});
  const auto real = degrees({{2, 0}, {4, 0}, {5, 0}, {4, 0}, {5, 0}});
  CHECK(correlation(gen, real, Dimension::Pitch).value == doctest::Approx(6.0 / std::sqrt(60.0)).epsilon(1e-12));
}

TEST_CASE("constant input gives a flagged zero correlation") {
  const auto flat = degrees({{3, 3}, {3, 3}, {3, 3}});
  const auto moving = degrees({{1, 0}, {2, 1}, {3, 5}});
  const auto c = correlation(flat, moving, Dimension::Pitch);
  CHECK(c.degenerate);
  CHECK(c.value == 0.0);
}

// --- AVE ------------------------------------------------------------------------

TEST_CASE("AVE examples") {
  Rng rng(5);
  const auto s = testing::random_sequence(rng, 10);
  CHECK(ave(s, s) == 0.0);
  // generated variances (4, 9), real (1, 1)
  const auto gen = degrees({{-2, -3}, {2, 3}});
  const auto real = degrees({{-1, -1}, {1, 1}});
  CHECK(ave(gen, real) == doctest::Approx(5.5));
  // real constant, generated per-dim variance v
  const auto flat = degrees({{0, 0}, {0, 0}});
  CHECK(ave(real, flat) == doctest::Approx(1.0));
}

// --- smoothness -----------------------------------------------------------------

TEST_CASE("smoothness of constant, affine and quadratic sequences is zero") {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    std::vector<std::pair<double, double>> py;
    const double p0 = rng.uniform(-20, 20), p1 = rng.uniform(-2, 2), p2 = rng.uniform(-0.1, 0.1);
    const double y0 = rng.uniform(-40, 40), y1 = rng.uniform(-3, 3), y2 = rng.uniform(-0.1, 0.1);
    const bool quadratic = i % 2 == 1;
    for (int t = 0; t < 12; ++t) {
      py.emplace_back(p0 + p1 * t + (quadratic ? p2 * t * t : 0.0), y0 + y1 * t + (quadratic ? y2 * t * t : 0.0));
    }
    CHECK(smoothness(degrees(py)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  }
  CHECK(smoothness(degrees({{4, 4}, {4, 4}, {4, 4}, {4, 4}, {4, 4}})) == 0.0);
}

TEST_CASE("smoothness of t^3 is 6 per frame^3") {
  std::vector<std::pair<double, double>> py;
  for (int t = 0; t <= 4; ++t) py.emplace_back(t * t * t, t * t * t);
  CHECK(smoothness(degrees(py)) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("smoothness is invariant to added quadratics") {
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto base = testing::random_poses(rng, 10, 30, 60);
    std::vector<AngularPose> shifted = base;
    const double a = rng.uniform(-0.05, 0.05), b = rng.uniform(-0.01, 0.01), c = rng.uniform(-0.001, 0.001);
    for (std::size_t t = 0; t < shifted.size(); ++t) {
      const double q = a + b * static_cast<double>(t) + c * static_cast<double>(t * t);
      shifted[t].pitch += q;
      shifted[t].yaw -= q;
    }
    const MotionSequence x(base, 5.0, MotionKind::Head), y(shifted, 5.0, MotionKind::Head);
    CHECK(smoothness(y) == doctest::Approx(smoothness(x)).epsilon(1e-9));
  }
}

TEST_CASE("smoothness needs four frames") {
  CHECK_THROWS_AS(smoothness(degrees({{0, 0}, {1, 1}, {2, 2}})), Error);
}

// --- APD ------------------------------------------------------------------------

TEST_CASE("APD examples") {
  std::vector<std::pair<double, double>> zero(12, {0.0, 0.0}), one(12, {1.0, 1.0});
  const std::vector<MotionSequence> two{degrees(zero), degrees(one)};
  CHECK(apd(two) == doctest::Approx(std::sqrt(24.0)).epsilon(1e-12));
  const std::vector<MotionSequence> same(4, degrees(one));
  CHECK(apd(same) == 0.0);
  CHECK_THROWS_AS(apd(std::vector<MotionSequence>{degrees(one)}), Error);
}

TEST_CASE("APD matches the brute-force double loop") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t k = 2 + rng.below(7);
    const std::size_t n = 1 + rng.below(15);
    std::vector<MotionSequence> samples;
    for (std::size_t i = 0; i < k; ++i) samples.push_back(testing::random_sequence(rng, n));
    CHECK(apd(samples) == doctest::Approx(testing::brute_force_apd(samples)).epsilon(1e-12));
  }
}

TEST_CASE("APD is invariant to permutation and common offsets") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<MotionSequence> samples;
    for (int i = 0; i < 5; ++i) samples.push_back(testing::random_sequence(rng, 8));
    std::vector<MotionSequence> permuted(samples.rbegin(), samples.rend());
    CHECK(apd(permuted) == doctest::Approx(apd(samples)).epsilon(1e-12));
    const double dp = rng.uniform(-0.1, 0.1), dy = rng.uniform(-0.1, 0.1);
    std::vector<MotionSequence> offset;
    for (const auto& s : samples) {
      std::vector<AngularPose> f(s.frames().begin(), s.frames().end());
      for (auto& p : f) p = {p.pitch + dp, p.yaw + dy};
      offset.emplace_back(f, 5.0, MotionKind::Head);
    }
    CHECK(apd(offset) == doctest::Approx(apd(samples)).epsilon(1e-9));
  }
}

// --- evaluate -------------------------------------------------------------------

TEST_CASE("three-input toy corpus matches hand aggregation") {
  std::vector<EvalInput> inputs{
      {"A", yaw_only({0, 10, 20, 30}), {yaw_only({0, 10, 20, 30}), yaw_only({5, 15, 25, 35})}, 1.0},
      {"B", yaw_only({0, 0, 0, 0}), {yaw_only({0, 0, 0, 0}), yaw_only({0, 0, 0, 8})}, 1.0},
      {"C", yaw_only({10, 20, 10, 20}), {yaw_only({20, 10, 20, 10}), yaw_only({10, 20, 10, 20})}, 1.0},
  };
  // Per input (avg, best) angular error: A (2.5, 0), B (1, 0), C (5, 0).
  // Yaw correlation best: A 1, B 0 (constant real), C 1. Pitch is constant: 0.
  // AVE avg: A 0, B (0 + 6) / 2, C 0. Smoothness avg: A 0, B (0 + 4) / 2, C 20.
  // APD: A sqrt(4 * 25), B 8, C sqrt(4 * 100).
  const auto r = evaluate("toy", inputs);
  CHECK(r.angular_error_avg == doctest::Approx(8.5 / 3.0));
  CHECK(r.angular_error_best == doctest::Approx(0.0).scale(1.0));
  CHECK(r.correlation_pitch_best == 0.0);
  CHECK(r.correlation_yaw_best == doctest::Approx(2.0 / 3.0));
  CHECK(r.ave_avg == doctest::Approx(1.0));
  CHECK(r.smoothness_avg == doctest::Approx(22.0 / 3.0));
  CHECK(r.apd == doctest::Approx(38.0 / 3.0));
  CHECK(r.k == 2);
  CHECK(r.num_inputs == 3);

  inputs[1].weight = 2.0;
  const auto w = evaluate("toy", inputs);
  CHECK(w.angular_error_avg == doctest::Approx((2.5 + 2.0 * 1.0 + 5.0) / 4.0));
  CHECK(w.apd == doctest::Approx((10.0 + 16.0 + 20.0) / 4.0));
}

TEST_CASE("deterministic and perfect methods") {
  Rng rng(10);
  std::vector<EvalInput> same, perfect;
  for (int i = 0; i < 5; ++i) {
    const auto real = testing::random_sequence(rng, 12);
    const auto fixed = testing::random_sequence(rng, 12);
    same.push_back({"x", real, std::vector<MotionSequence>(4, fixed), 1.0});
    perfect.push_back({"x", real, std::vector<MotionSequence>(3, real), 1.0});
  }
  const auto d = evaluate("fixed", same);
  CHECK(d.angular_error_avg == d.angular_error_best);
  CHECK(d.apd == 0.0);
  const auto p = evaluate("perfect", perfect);
  CHECK(p.angular_error_avg == 0.0);
  CHECK(p.correlation_pitch_best == doctest::Approx(1.0));
  CHECK(p.correlation_yaw_best == doctest::Approx(1.0));
  CHECK(p.ave_avg == 0.0);
}

TEST_CASE("identical samples give avg exactly equal to best") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EvalInput> inputs;
    for (int i = 0; i < 4; ++i) {
      const auto s = testing::random_sequence(rng, 12);
      inputs.push_back({"x", testing::random_sequence(rng, 12), std::vector<MotionSequence>(30, s),
                        1.0 + static_cast<double>(rng.below(4))});
    }
    const auto r = evaluate("copies", inputs);
    CHECK(r.angular_error_avg == r.angular_error_best);
    CHECK(r.apd == 0.0);
  }
}

TEST_CASE("best never exceeds average") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<EvalInput> inputs;
    for (int i = 0; i < 3; ++i) {
      EvalInput in{"x", testing::random_sequence(rng, 8), {}, 1.0 + static_cast<double>(rng.below(3))};
      for (int k = 0; k < 4; ++k) in.samples.push_back(testing::random_sequence(rng, 8));
      inputs.push_back(std::move(in));
    }
    const auto r = evaluate("rand", inputs);
    CHECK(r.angular_error_best <= r.angular_error_avg);
    CHECK(r.correlation_pitch_best >= -1.0);
    CHECK(r.correlation_yaw_best <= 1.0);
  }
}

TEST_CASE("inputs without generations are rejected") {
  Rng rng(12);
  std::vector<EvalInput> inputs{{"x", testing::random_sequence(rng, 6), {}, 1.0}};
  CHECK_THROWS_AS(evaluate("none", inputs), Error);
  CHECK_THROWS_AS(evaluate("none", std::vector<EvalInput>{}), Error);
}

TEST_CASE("report CSV round-trips with the report columns") {
  EvalReport r{"cvae", 16.5, 10.8, 0.5, 0.6, 89.9, 6.98, 264.4, 30, 12};
  std::ostringstream out;
  write_report_csv(out, std::vector<EvalReport>{r});
  CHECK(out.str().rfind(
            "method,angular_error_avg,angular_error_best,correlation_pitch_best,correlation_yaw_best,ave_avg,"
            "smoothness_avg,apd,k,num_inputs\n",
            0) == 0);
  std::istringstream in(out.str());
  const auto back = read_report_csv(in);
  REQUIRE(back.size() == 1);
  CHECK(back[0].method == "cvae");
  CHECK(back[0].angular_error_best == 10.8);
  CHECK(back[0].apd == 264.4);
  CHECK(back[0].k == 30);
  CHECK(back[0].num_inputs == 12);
}
