#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "graspforce/geometry.hpp"

using namespace graspforce;

namespace {

std::mt19937_64 rng(0x5eed);

Vec3 random_unit() {
  std::normal_distribution<double> g;
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), g(rng));
  } while (v.norm() < 1e-6);
  return v.normalized();
}

Mat3 random_rotation() {
  std::uniform_real_distribution<double> u(0.0, M_PI);
  return Eigen::AngleAxisd(u(rng), random_unit()).toRotationMatrix();
}

Pose random_pose(const std::string& from = "B", const std::string& to = "EE") {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Pose(random_rotation(), Vec3(u(rng), u(rng), u(rng)), from, to);
}

Twist6 random_twist(const std::string& frame) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return Twist6{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)),
                frame};
}

Wrench6 random_wrench(const std::string& frame) {
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  return Wrench6{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)),
                 frame};
}

}  // namespace

TEST_CASE("pose construction validates rotation and frames") {
  CHECK_NOTHROW(Pose(Mat3::Identity(), Vec3::Zero(), "B", "EE"));
  Mat3 bad = Mat3::Identity();
  bad(0, 0) = 1.1;
  CHECK_THROWS_AS(Pose(bad, Vec3::Zero(), "B", "EE"), std::invalid_argument);
  Mat3 mirror = Mat3::Identity();
  mirror(2, 2) = -1.0;  // det -1
  CHECK_THROWS_AS(Pose(mirror, Vec3::Zero(), "B", "EE"),
                  std::invalid_argument);
  CHECK_THROWS_AS(Pose(Mat3::Identity(), Vec3::Zero(), "", "EE"),
                  FrameMismatch);
}

TEST_CASE("compose identity and inverse") {
  const Pose t = random_pose("B", "EE");
  const Pose id_ee = Pose::identity("EE");
  const Pose ti = compose(t, id_ee);
  CHECK((ti.rotation() - t.rotation()).norm() < 1e-12);
  CHECK((ti.translation() - t.translation()).norm() < 1e-12);

  const Pose round = compose(t, t.inverse());
  CHECK((round.rotation() - Mat3::Identity()).norm() < 1e-9);
  CHECK(round.translation().norm() < 1e-9);
  CHECK(round.from_frame() == "B");
  CHECK(round.to_frame() == "B");
}

TEST_CASE("compose rejects frame mismatch and propagates labels") {
  const Pose a = random_pose("B", "EE");
  const Pose b = random_pose("TCP", "CoP");
  CHECK_THROWS_AS(compose(a, b), FrameMismatch);
  const Pose c = random_pose("EE", "TCP");
  const Pose ac = compose(a, c);
  CHECK(ac.from_frame() == "B");
  CHECK(ac.to_frame() == "TCP");
}

TEST_CASE("compose rotation matches direct 3x3 product oracle") {
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose("B", "EE");
    const Pose b = random_pose("EE", "TCP");
    const Mat3 expected = a.rotation() * b.rotation();  // oracle
    CHECK((compose(a, b).rotation() - expected).norm() < 1e-12);
    const Vec3 p_expected = a.rotation() * b.translation() + a.translation();
    CHECK((compose(a, b).translation() - p_expected).norm() < 1e-12);
  }
}

TEST_CASE("rotation stays orthonormal over long composition chains") {
  Pose acc = Pose::identity("B");
  for (int i = 0; i < 100000; ++i) {
    acc = compose(acc, random_pose("B", "B"));
  }
  const double residual =
      (acc.rotation().transpose() * acc.rotation() - Mat3::Identity()).norm();
  CHECK(residual < 1e-8);
  CHECK(std::abs(acc.rotation().determinant() - 1.0) < 1e-8);
}

TEST_CASE("rotation_from_approach_orientation axis-aligned cases") {
  // a=(0,0,1), o=(0,1,0) -> identity
  const Mat3 r1 =
      rotation_from_approach_orientation(Vec3::UnitZ(), Vec3::UnitY());
  CHECK((r1 - Mat3::Identity()).norm() < 1e-12);

  // a=(0,0,-1), o=(0,1,0) -> n=(-1,0,0), o=(0,1,0), a=(0,0,-1)
  const Mat3 r2 =
      rotation_from_approach_orientation(-Vec3::UnitZ(), Vec3::UnitY());
  CHECK((r2.col(0) - Vec3(-1, 0, 0)).norm() < 1e-12);
  CHECK((r2.col(1) - Vec3(0, 1, 0)).norm() < 1e-12);
  CHECK((r2.col(2) - Vec3(0, 0, -1)).norm() < 1e-12);
}

TEST_CASE("rotation_from_approach_orientation rejects parallel inputs") {
  CHECK_THROWS_AS(
      rotation_from_approach_orientation(Vec3::UnitZ(), Vec3::UnitZ()),
      DegenerateOrientation);
  CHECK_THROWS_AS(
      rotation_from_approach_orientation(Vec3::UnitZ(), -Vec3::UnitZ()),
      DegenerateOrientation);
}

TEST_CASE("rotation_from_approach_orientation orthonormality oracle") {
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a = random_unit();
    Vec3 o = random_unit();
    if (std::abs(a.dot(o)) >= 1.0 - 1e-3) continue;
    const Mat3 r = rotation_from_approach_orientation(a, o);
    CHECK((r.transpose() * r - Mat3::Identity()).norm() < 1e-9);
    CHECK(std::abs(r.determinant() - 1.0) < 1e-9);
    CHECK((r.col(2) - a).norm() == 0.0);  // third column is a_hat exactly
  }
}

TEST_CASE("desired_tcp_pose hand-evaluated example") {
  ObjectEstimate est;
  est.center = Vec3(0.4, 0.0, 0.1);
  est.normal = Vec3::UnitZ();
  est.dims = Vec2(0.10, 0.04);
  const Pose goal = desired_tcp_pose(est);
  CHECK((goal.translation() - Vec3(0.4, 0.0, 0.1)).norm() < 1e-12);
  // approach down, orientation along x (longer dim)
  CHECK((goal.rotation().col(2) - Vec3(0, 0, -1)).norm() < 1e-12);
  CHECK((goal.rotation().col(1) - Vec3::UnitX()).norm() < 1e-12);
  CHECK(goal.from_frame() == "B");
  CHECK(goal.to_frame() == "TCP");
}

TEST_CASE("desired_tcp_pose tie breaks toward x axis") {
  ObjectEstimate est;
  est.normal = Vec3::UnitZ();
  est.dims = Vec2(0.05, 0.05);
  const Pose goal = desired_tcp_pose(est);
  CHECK((goal.rotation().col(1) - Vec3::UnitX()).norm() < 1e-12);
}

TEST_CASE("desired_tcp_pose with exact estimate hits the object center") {
  ObjectEstimate est;
  est.center = Vec3(0.31, -0.22, 0.045);
  est.normal = Vec3::UnitZ();
  est.dims = Vec2(0.06, 0.12);
  CHECK((desired_tcp_pose(est).translation() - est.center).norm() == 0.0);
}

TEST_CASE("pre_pose offsets translation only") {
  const Pose goal = random_pose("B", "TCP");
  const Pose same = pre_pose(goal, Vec3::UnitZ(), 0.0);
  CHECK((same.translation() - goal.translation()).norm() == 0.0);

  const Pose up = pre_pose(goal, Vec3::UnitZ(), 0.1);
  CHECK(up.translation().z() == doctest::Approx(goal.translation().z() + 0.1)
                                    .epsilon(1e-12));
  CHECK((up.rotation() - goal.rotation()).norm() == 0.0);

  for (int i = 0; i < 50; ++i) {
    const Pose g = random_pose("B", "TCP");
    const Pose p = pre_pose(g, random_unit(), 0.08);
    CHECK((p.rotation() - g.rotation()).norm() == 0.0);
  }
  CHECK_THROWS_AS(pre_pose(goal, Vec3::UnitZ(), -0.01), std::invalid_argument);
}

TEST_CASE("adjoint identity and structure") {
  CHECK((adjoint(Pose::identity("B")) - Mat6::Identity()).norm() < 1e-12);

  // pure rotation: block diagonal, zero coupling
  const Pose rot(random_rotation(), Vec3::Zero(), "B", "EE");
  const Mat6 ad = adjoint(rot);
  CHECK(ad.bottomLeftCorner<3, 3>().norm() < 1e-12);
  CHECK(ad.topRightCorner<3, 3>().norm() < 1e-12);
}

TEST_CASE("adjoint round trip") {
  for (int i = 0; i < 500; ++i) {
    const Pose t = random_pose();
    const Mat6 prod = adjoint(t) * adjoint(t.inverse());
    CHECK((prod - Mat6::Identity()).norm() < 1e-9);
  }
}

TEST_CASE("transform_twist and transform_wrench identity case") {
  const Pose idp = Pose::identity("EE");
  const Twist6 v = random_twist("EE");
  const Wrench6 w = random_wrench("EE");
  const Twist6 v2 = transform_twist(idp, v);
  const Wrench6 w2 = transform_wrench(idp, w);
  CHECK((v2.stacked() - v.stacked()).norm() < 1e-12);
  CHECK((w2.stacked() - w.stacked()).norm() < 1e-12);
}

TEST_CASE("wrench transport gains the p x f moment") {
  // EE-to-TCP offset 0.2 m along z; 10 N force along x at the TCP produces
  // a (0, 2, 0) N*m torque at the EE. Oracle: moment = p x f.
  const Pose ee_tcp(Mat3::Identity(), Vec3(0, 0, 0.2), "EE", "TCP");
  const Wrench6 at_tcp{Vec3(10, 0, 0), Vec3::Zero(), "TCP"};
  const Wrench6 at_ee = transform_wrench(ee_tcp, at_tcp);
  const Vec3 oracle = Vec3(0, 0, 0.2).cross(Vec3(10, 0, 0));
  CHECK((at_ee.torque - oracle).norm() < 1e-12);
  CHECK((at_ee.torque - Vec3(0, 2, 0)).norm() < 1e-12);
  CHECK((at_ee.force - Vec3(10, 0, 0)).norm() < 1e-12);
  CHECK(at_ee.frame == "EE");
}

TEST_CASE("power is invariant under simultaneous frame change") {
  for (int i = 0; i < 1000; ++i) {
    const Pose t = random_pose("B", "EE");
    const Twist6 v = random_twist("EE");
    const Wrench6 w = random_wrench("EE");
    const double before = power(v, w);
    const double after = power(transform_twist(t, v), transform_wrench(t, w));
    CHECK(std::abs(before - after) < 1e-9);
  }
}

TEST_CASE("twist transform round trip") {
  for (int i = 0; i < 500; ++i) {
    const Pose t = random_pose("B", "EE");
    const Twist6 v = random_twist("EE");
    const Twist6 back = transform_twist(t.inverse(), transform_twist(t, v));
    CHECK((back.stacked() - v.stacked()).norm() < 1e-9);
    CHECK(back.frame == "EE");
  }
}

TEST_CASE("frame mismatch raised by twist/wrench transforms") {
  const Pose t = random_pose("B", "EE");
  CHECK_THROWS_AS(transform_twist(t, random_twist("TCP")), FrameMismatch);
  CHECK_THROWS_AS(transform_wrench(t, random_wrench("B")), FrameMismatch);
}

TEST_CASE("object estimate validation") {
  ObjectEstimate est;
  CHECK_NOTHROW(est.validate());
  est.normal = Vec3(0, 0, 2);
  CHECK_THROWS_AS(est.validate(), std::invalid_argument);
  est.normal = Vec3::UnitZ();
  est.dims = Vec2(0.0, 0.1);
  CHECK_THROWS_AS(est.validate(), std::invalid_argument);
}
