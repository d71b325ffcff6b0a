#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "graspforce/control.hpp"

using namespace graspforce;

namespace {

ControllerParams base_params() {
  ControllerParams p;
  p.gain = Mat6::Identity() * 0.01;
  p.max_twist = Twist6{Vec3::Constant(1.0), Vec3::Constant(0.25), kEEFrame};
  p.desired_wrench = Wrench6::zero(kEEFrame);
  p.dt = 0.002;
  return p;
}

// 1-D spring along z: the tool presses on a surface below it. Returns the
// wrench the tool exerts on the environment (EE frame, identity rotation).
struct SpringPlant {
  double surface_z = 0.0;
  double k = 1e4;
  double f_cap = 1e9;
  Wrench6 operator()(const Pose& ee, double) const {
    const double pen = surface_z - ee.translation().z();
    Wrench6 w = Wrench6::zero(kEEFrame);
    if (pen > 0.0) w.force.z() = -std::min(k * pen, f_cap);
    return w;
  }
};

EEState start_state(double z) {
  return EEState{Pose(Mat3::Identity(), Vec3(0, 0, z), kBaseFrame, kEEFrame),
                 Wrench6::zero(kEEFrame)};
}

}  // namespace

TEST_CASE("selection matrices reject doubly selected axes") {
  SelectionMatrices s;
  s.vel_axes[kVz] = true;
  s.frc_axes[kVz] = true;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK_NOTHROW(SelectionMatrices::force_on({kVz}, true).validate());
}

TEST_CASE("controller params validation") {
  ControllerParams p = base_params();
  CHECK_NOTHROW(p.validate());
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = base_params();
  p.scaling[0] = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = base_params();
  p.gain(0, 0) = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("pure velocity mode passes the scaled max twist through") {
  ControllerParams p = base_params();
  p.scaling[kVx] = 0.5;
  p.scaling[kWz] = -0.25;
  const Twist6 u = hybrid_command(SelectionMatrices::all_velocity(), p,
                                  Wrench6::zero(kEEFrame));
  CHECK(u.linear.x() == 0.5 * 0.25);
  CHECK(u.angular.z() == -0.25 * 1.0);
  CHECK(u.linear.y() == 0.0);
}

TEST_CASE("force equilibrium yields zero command") {
  ControllerParams p = base_params();
  p.desired_wrench = Wrench6{Vec3(1, -2, 3), Vec3(0.1, 0, -0.2), kEEFrame};
  SelectionMatrices sel;
  sel.frc_axes.fill(true);
  const Twist6 u = hybrid_command(sel, p, p.desired_wrench);
  CHECK(u.stacked().norm() == 0.0);
}

TEST_CASE("hand-evaluated force term") {
  // z force-controlled, K_P = 0.01 I, desired -10 N, measured -4 N:
  // u_z = 0.01 * (-10 - (-4)) = -0.06 m/s.
  ControllerParams p = base_params();
  p.desired_wrench.force.z() = -10.0;
  Wrench6 meas = Wrench6::zero(kEEFrame);
  meas.force.z() = -4.0;
  const Twist6 u = hybrid_command(SelectionMatrices::force_on({kVz}), p, meas);
  CHECK(u.linear.z() == doctest::Approx(-0.06).epsilon(1e-12));
  CHECK(u.linear.x() == 0.0);
  CHECK(u.angular.norm() == 0.0);
}

TEST_CASE("axis exclusivity: no cross-term leakage") {
  ControllerParams p = base_params();
  p.scaling[kVx] = 1.0;
  p.desired_wrench.force.z() = -10.0;
  SelectionMatrices sel = SelectionMatrices::force_on({kVz}, true);

  // zero the velocity input: force axis output unchanged
  ControllerParams p_novel = p;
  p_novel.scaling = Vec6::Zero();
  Wrench6 meas = Wrench6::zero(kEEFrame);
  meas.force.z() = -4.0;
  CHECK(hybrid_command(sel, p, meas).linear.z() ==
        hybrid_command(sel, p_novel, meas).linear.z());

  // zero the force input: velocity axis output unchanged
  ControllerParams p_nofrc = p;
  p_nofrc.desired_wrench = Wrench6::zero(kEEFrame);
  CHECK(hybrid_command(sel, p, meas).linear.x() ==
        hybrid_command(sel, p_nofrc, Wrench6::zero(kEEFrame)).linear.x());
}

TEST_CASE("step integrates translation and leaves zero command fixed") {
  const EEState s0 = start_state(0.0);
  const EEState same = step(s0, Twist6::zero(kBaseFrame), 0.01);
  CHECK((same.pose.translation() - s0.pose.translation()).norm() == 0.0);
  CHECK((same.pose.rotation() - s0.pose.rotation()).norm() == 0.0);

  Twist6 u = Twist6::zero(kBaseFrame);
  u.linear.x() = 0.1;
  const EEState moved = step(s0, u, 0.01);
  CHECK(moved.pose.translation().x() == 0.1 * 0.01);
}

TEST_CASE("rotation integration closes a full turn") {
  // Integrate a constant angular rate for one full revolution in 1e4 steps;
  // the rotation must come back near identity.
  const int n = 10000;
  const Vec3 omega(0.3, -0.2, 0.9);
  const double total_t = 2.0 * M_PI / omega.norm();
  const double dt = total_t / n;
  EEState s = start_state(0.0);
  Twist6 u = Twist6::zero(kBaseFrame);
  u.angular = omega;
  for (int i = 0; i < n; ++i) s = step(s, u, dt);
  CHECK((s.pose.rotation() - Mat3::Identity()).norm() < 1e-3);
}

TEST_CASE("step is deterministic bit for bit") {
  auto run = [] {
    EEState s = start_state(0.1);
    Twist6 u{Vec3(0.01, 0.02, -0.03), Vec3(0.05, -0.04, 0.03), kBaseFrame};
    for (int i = 0; i < 1000; ++i) s = step(s, u, 0.002);
    return s.pose;
  };
  const Pose a = run();
  const Pose b = run();
  CHECK(std::memcmp(a.translation().data(), b.translation().data(),
                    3 * sizeof(double)) == 0);
  CHECK(std::memcmp(a.rotation().data(), b.rotation().data(),
                    9 * sizeof(double)) == 0);
}

TEST_CASE("velocity-mode axes move at exactly the commanded rate per step") {
  ControllerParams p = base_params();
  p.scaling[kVx] = 0.5;
  const Twist6 u = hybrid_command(SelectionMatrices::all_velocity(), p,
                                  Wrench6::zero(kEEFrame));
  CHECK(u.linear.x() == 0.5 * p.max_twist.linear.x());
  const EEState s1 = step(start_state(0.0), ee_twist_to_base(
      start_state(0.0).pose, u), p.dt);
  CHECK(s1.pose.translation().x() == u.linear.x() * p.dt);
}

TEST_CASE("steady-state force regulation in a 1-D spring contact") {
  // Convergence bound: |F_z - F_des| < 0.01 |F_des| within 5/(k Kp dt) steps.
  const double k = 1e4, kp = 0.01, dt = 0.002;
  ControllerParams p = base_params();
  p.gain = Mat6::Identity() * kp;
  p.dt = dt;
  p.desired_wrench.force.z() = -10.0;
  const SelectionMatrices sel = SelectionMatrices::force_on({kVz});
  SpringPlant plant{0.0, k};

  EEState s = start_state(0.0);  // starts exactly at the surface
  const int budget = static_cast<int>(5.0 / (k * kp * dt));
  double f = 0.0;
  for (int i = 0; i < budget; ++i) {
    const Wrench6 meas = plant(s.pose, dt);
    const Twist6 u = hybrid_command(sel, p, meas);
    s = step(s, ee_twist_to_base(s.pose, u), dt);
    f = plant(s.pose, dt).force.z();
  }
  CHECK(std::abs(f - (-10.0)) < 0.01 * 10.0);
}

TEST_CASE("guarded move contacts a surface at the expected depth") {
  // Surface 5 cm below the start; 2 N threshold on a 1e4 N/m spring stops
  // within a sub-millimeter penetration bound.
  ControllerParams p = base_params();
  SpringPlant plant{-0.05, 1e4};
  GuardedMoveSpec spec;
  spec.direction = -Vec3::UnitZ();
  spec.speed = 0.05;
  spec.contact_threshold = 2.0;
  spec.max_distance = 0.2;
  const ContactEvent ev = guarded_move(
      spec, start_state(0.0), p,
      [&](const Pose& ee, double dt) { return plant(ee, dt); });
  CHECK(ev.kind == ContactEvent::Kind::Contact);
  CHECK(ev.traveled >= 0.0499);
  CHECK(ev.traveled <= 0.051);  // 5 cm + penetration bound
}

TEST_CASE("guarded move through free space covers max_distance") {
  ControllerParams p = base_params();
  GuardedMoveSpec spec;
  spec.direction = Vec3::UnitX();
  spec.speed = 0.1;
  spec.contact_threshold = 2.0;
  spec.max_distance = 0.08;
  const ContactEvent ev =
      guarded_move(spec, start_state(0.0), p,
                   [](const Pose&, double) { return Wrench6::zero(kEEFrame); });
  CHECK(ev.kind == ContactEvent::Kind::NoContact);
  CHECK(std::abs(ev.traveled - 0.08) <= spec.speed * p.dt + 1e-12);
}

TEST_CASE("threshold above the force cap never reports contact") {
  // The plant caps its contact force below the threshold, so the move runs
  // its full distance despite touching.
  ControllerParams p = base_params();
  SpringPlant plant{-0.02, 1e4, /*f_cap=*/4.0};
  GuardedMoveSpec spec;
  spec.direction = -Vec3::UnitZ();
  spec.speed = 0.05;
  spec.contact_threshold = 5.0;  // above the 4 N cap
  spec.max_distance = 0.05;
  const ContactEvent ev = guarded_move(
      spec, start_state(0.0), p,
      [&](const Pose& ee, double dt) { return plant(ee, dt); });
  CHECK(ev.kind == ContactEvent::Kind::NoContact);
}

TEST_CASE("guarded move honors the governor halt") {
  ControllerParams p = base_params();
  GuardedMoveSpec spec;
  spec.direction = Vec3::UnitX();
  spec.speed = 0.1;
  spec.contact_threshold = 2.0;
  spec.max_distance = 1.0;
  int cycles = 0;
  const ContactEvent ev = guarded_move(
      spec, start_state(0.0), p,
      [](const Pose&, double) { return Wrench6::zero(kEEFrame); },
      [&](double, const Twist6& u) {
        CycleDecision d{u, ++cycles > 10};
        return d;
      });
  CHECK(ev.kind == ContactEvent::Kind::SafetyHalt);
  CHECK(ev.traveled <= 0.1 * p.dt * 11);
}

TEST_CASE("wrench filter settles on a constant input") {
  WrenchFilter f(50.0, 0.002);
  Wrench6 w = Wrench6::zero(kEEFrame);
  w.force.z() = -8.0;
  Wrench6 y = f.apply(w);
  CHECK(y.force.z() == -8.0);  // first sample passes through
  for (int i = 0; i < 200; ++i) y = f.apply(w);
  CHECK(y.force.z() == doctest::Approx(-8.0).epsilon(1e-9));
}
