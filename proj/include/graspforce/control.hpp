#pragma once

#include <array>
#include <functional>
#include <optional>

#include "graspforce/geometry.hpp"

namespace graspforce {

// Axis indices into 6-vectors: [wx wy wz vx vy vz].
enum Axis : int { kWx = 0, kWy = 1, kWz = 2, kVx = 3, kVy = 4, kVz = 5 };

/// Per-axis binary mode selection. Each axis may be velocity controlled,
/// force controlled, or idle -- never both.
struct SelectionMatrices {
  std::array<bool, 6> vel_axes{};
  std::array<bool, 6> frc_axes{};

  void validate() const;

  static SelectionMatrices all_velocity();
  /// Velocity on every axis except the listed force-controlled ones.
  static SelectionMatrices force_on(std::initializer_list<int> axes,
                                    bool velocity_elsewhere = false);
};

/// Gains and limits of the hybrid force-velocity law.
struct ControllerParams {
  Mat6 gain = Mat6::Identity() * 0.01;          // (m/s)/N, (rad/s)/(N*m)
  Vec6 scaling = Vec6::Zero();                  // s, in [-1, 1]
  Twist6 max_twist = Twist6::zero(kEEFrame);    // per-axis magnitude limits
  Wrench6 desired_wrench = Wrench6::zero(kEEFrame);
  double dt = 0.002;                            // s

  void validate() const;
};

/// End-effector state: pose in the base frame plus the latest wrench.
struct EEState {
  Pose pose = Pose(Mat3::Identity(), Vec3::Zero(), kBaseFrame, kEEFrame);
  Wrench6 measured_wrench = Wrench6::zero(kEEFrame);
};

/// Hybrid force-velocity law: u = S_vel (s o V_max) + S_frc K_P (F_des - F).
/// All quantities are expressed in the EE frame; the measured wrench is the
/// wrench the tool currently exerts on the environment.
Twist6 hybrid_command(const SelectionMatrices& sel, const ControllerParams& p,
                      const Wrench6& measured);

/// Forward-integrate one control period. The command is expressed in the
/// base frame: translation integrates u.linear * dt, rotation applies the
/// exponential of u.angular * dt on the left.
EEState step(const EEState& state, const Twist6& u, double dt);

/// Express an EE-frame twist in the base frame for integration by step().
Twist6 ee_twist_to_base(const Pose& b_T_ee, const Twist6& u_ee);

/// Clamp each axis of a twist to the given per-axis magnitudes.
Twist6 saturate_twist(const Twist6& u, const Twist6& limits);

/// Single-pole low-pass for the measured wrench. alpha = dt / (tau + dt)
/// with tau = 1 / (2 pi f_cutoff); the first sample passes through.
class WrenchFilter {
 public:
  WrenchFilter(double cutoff_hz, double dt);
  Wrench6 apply(const Wrench6& raw);
  void reset() { initialized_ = false; }

 private:
  double alpha_;
  Vec6 state_ = Vec6::Zero();
  std::string frame_;
  bool initialized_ = false;
};

/// Outcome of a guarded move.
struct ContactEvent {
  enum class Kind { Contact, NoContact, SafetyHalt };
  Kind kind = Kind::NoContact;
  Pose pose = Pose(Mat3::Identity(), Vec3::Zero(), kBaseFrame, kEEFrame);
  Wrench6 wrench = Wrench6::zero(kEEFrame);
  double traveled = 0.0;  // m
};

struct GuardedMoveSpec {
  Vec3 direction = -Vec3::UnitZ();  // unit, base frame
  double speed = 0.05;              // m/s
  double contact_threshold = 2.0;   // N, along direction
  double max_distance = 0.1;        // m
};

/// Advances the plant one period and returns the wrench the tool exerts on
/// the environment at the new state, expressed in the EE frame.
using PlantFn = std::function<Wrench6(const Pose& b_T_ee, double dt)>;

/// Hook applied to the proposed EE-frame command each cycle (safety caps,
/// observers). Returning halt=true ends the move with SafetyHalt.
struct CycleDecision {
  Twist6 command;
  bool halt = false;
};
using CycleGovernor = std::function<CycleDecision(double t, const Twist6& u)>;

/// Velocity-mode move along a fixed base-frame direction, terminated when
/// the measured force along that direction exceeds the threshold or the
/// travel budget is exhausted. Orientation is held.
ContactEvent guarded_move(const GuardedMoveSpec& spec, EEState state,
                          const ControllerParams& params, const PlantFn& plant,
                          const CycleGovernor& governor = {},
                          double filter_cutoff_hz = 50.0,
                          double* t_inout = nullptr);

}  // namespace graspforce
