#include <doctest.h>

#include <cmath>
#include <limits>

#include "../support/generators.hpp"
#include "gazehead/error.hpp"
#include "gazehead/motion_types.hpp"

using namespace gazehead;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidInput;
}

}  // namespace

TEST_CASE("direction vector of known poses") {
  auto v = to_direction_vector({0.0, 0.0});
  CHECK(v[0] == doctest::Approx(0.0));
  CHECK(v[1] == doctest::Approx(0.0));
  CHECK(v[2] == doctest::Approx(1.0));
  v = to_direction_vector({0.0, kPi / 2});
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[2] == doctest::Approx(0.0).epsilon(1e-12));
  v = to_direction_vector({kPi / 2, 0.3});
  CHECK(v[1] == doctest::Approx(1.0));
}

TEST_CASE("direction vectors are unit length") {
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto v = to_direction_vector(testing::random_pose(rng));
    CHECK(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("canonicalize wraps yaw and clamps pitch") {
  const auto p = canonicalize({deg_to_rad(100.0), deg_to_rad(190.0)});
  CHECK(p.pitch == doctest::Approx(kPi / 2));
  CHECK(rad_to_deg(p.yaw) == doctest::Approx(-170.0));
  CHECK(canonicalize({0.0, -3 * kPi}).yaw == doctest::Approx(kPi));
  CHECK(is_canonical(canonicalize({-7.0, 11.0})));
}

TEST_CASE("canonicalize is idempotent and preserves direction for in-range pitch") {
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    const AngularPose raw{rng.uniform(-1.5, 1.5), rng.uniform(-20.0, 20.0)};
    const auto c = canonicalize(raw);
    CHECK(canonicalize(c) == c);
    const auto a = to_direction_vector(raw);
    const auto b = to_direction_vector(c);
    for (int k = 0; k < 3; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
  }
}

TEST_CASE("non-finite angles are rejected") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { canonicalize({nan, 0.0}); }) == ErrorCode::InvalidInput);
  CHECK(code_of([&] { to_direction_vector({0.0, std::numeric_limits<double>::infinity()}); }) ==
        ErrorCode::InvalidInput);
}

TEST_CASE("motion sequence invariants") {
  CHECK_THROWS_AS(MotionSequence({}, 5.0, MotionKind::Head), Error);
  CHECK_THROWS_AS(MotionSequence({{0.0, 0.0}}, 0.0, MotionKind::Head), Error);
  CHECK_THROWS_AS(MotionSequence({{0.0, 4.0}}, 5.0, MotionKind::Head), Error);
  const MotionSequence s({{0.0, 0.1}, {0.1, 0.2}, {0.2, 0.3}}, 5.0, MotionKind::Gaze);
  CHECK(s.size() == 3);
  CHECK(s.kind() == MotionKind::Gaze);
  const auto tail = s.slice(1, 2);
  CHECK(tail.size() == 2);
  CHECK(tail[0] == s[1]);
  CHECK_THROWS_AS(s.slice(2, 2), Error);
}

TEST_CASE("window validation") {
  MotionWindow w;
  w.gaze.assign(3, AngularPose{});
  w.head.assign(3, AngularPose{});
  CHECK_NOTHROW(w.validate(3));
  CHECK(code_of([&] { w.validate(4); }) == ErrorCode::Contract);
  w.context[0] = {0.1, 0.0};
  CHECK(code_of([&] { w.validate(3); }) == ErrorCode::Contract);
  w.has_context = true;
  CHECK_NOTHROW(w.validate(3));
  w.head.pop_back();
  CHECK(code_of([&] { w.validate(3); }) == ErrorCode::Contract);
}
