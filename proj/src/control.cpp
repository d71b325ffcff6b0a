#include "graspforce/control.hpp"

#include <cmath>

namespace graspforce {

void SelectionMatrices::validate() const {
  for (int i = 0; i < 6; ++i) {
    if (vel_axes[i] && frc_axes[i])
      throw std::invalid_argument(
          "SelectionMatrices: axis " + std::to_string(i) +
          " selected by both velocity and force modes");
  }
}

SelectionMatrices SelectionMatrices::all_velocity() {
  SelectionMatrices s;
  s.vel_axes.fill(true);
  return s;
}

SelectionMatrices SelectionMatrices::force_on(std::initializer_list<int> axes,
                                              bool velocity_elsewhere) {
  SelectionMatrices s;
  if (velocity_elsewhere) s.vel_axes.fill(true);
  for (int a : axes) {
    s.frc_axes[a] = true;
    s.vel_axes[a] = false;
  }
  return s;
}

void ControllerParams::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("ControllerParams: dt <= 0");
  if ((gain - gain.transpose()).norm() > 1e-9)
    throw std::invalid_argument("ControllerParams: gain not symmetric");
  Eigen::LLT<Mat6> llt(gain);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("ControllerParams: gain not positive definite");
  for (int i = 0; i < 6; ++i) {
    if (std::abs(scaling[i]) > 1.0 + 1e-12)
      throw std::invalid_argument("ControllerParams: |scaling| > 1");
  }
}

Twist6 hybrid_command(const SelectionMatrices& sel, const ControllerParams& p,
                      const Wrench6& measured) {
  sel.validate();
  p.validate();
  if (measured.frame != kEEFrame || p.desired_wrench.frame != kEEFrame ||
      p.max_twist.frame != kEEFrame)
    throw FrameMismatch("hybrid_command: all inputs must be in the EE frame");

  const Vec6 vmax = p.max_twist.stacked();
  const Vec6 vel_term = p.scaling.cwiseProduct(vmax);
  const Vec6 frc_term =
      p.gain * (p.desired_wrench.stacked() - measured.stacked());

  Vec6 u = Vec6::Zero();
  for (int i = 0; i < 6; ++i) {
    if (sel.vel_axes[i]) u[i] = vel_term[i];
    if (sel.frc_axes[i]) u[i] += frc_term[i];
  }
  return Twist6::from_stacked(u, kEEFrame);
}

EEState step(const EEState& state, const Twist6& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt <= 0");
  if (u.frame != state.pose.from_frame())
    throw FrameMismatch("step: command must be expressed in '" +
                        state.pose.from_frame() + "'");
  if (!u.finite()) throw std::invalid_argument("step: non-finite command");
  EEState next = state;
  const Mat3 dr = so3_exp(u.angular * dt);
  next.pose = Pose(dr * state.pose.rotation(),
                   state.pose.translation() + u.linear * dt,
                   state.pose.from_frame(), state.pose.to_frame());
  return next;
}

Twist6 ee_twist_to_base(const Pose& b_T_ee, const Twist6& u_ee) {
  if (u_ee.frame != b_T_ee.to_frame())
    throw FrameMismatch("ee_twist_to_base: command not in the EE frame");
  // Point-velocity mapping of the EE origin: rotate both components. This is
  // exactly the body-twist integration T * exp(u dt) written as a base-frame
  // step.
  return Twist6{b_T_ee.rotation() * u_ee.angular,
                b_T_ee.rotation() * u_ee.linear, b_T_ee.from_frame()};
}

Twist6 saturate_twist(const Twist6& u, const Twist6& limits) {
  Vec6 v = u.stacked();
  const Vec6 lim = limits.stacked().cwiseAbs();
  for (int i = 0; i < 6; ++i) {
    if (lim[i] > 0.0) v[i] = std::clamp(v[i], -lim[i], lim[i]);
  }
  return Twist6::from_stacked(v, u.frame);
}

WrenchFilter::WrenchFilter(double cutoff_hz, double dt) {
  if (cutoff_hz <= 0.0) {
    alpha_ = 1.0;  // filter disabled
  } else {
    const double tau = 1.0 / (2.0 * M_PI * cutoff_hz);
    alpha_ = dt / (tau + dt);
  }
}

Wrench6 WrenchFilter::apply(const Wrench6& raw) {
  if (!initialized_) {
    state_ = raw.stacked();
    frame_ = raw.frame;
    initialized_ = true;
  } else {
    state_ += alpha_ * (raw.stacked() - state_);
  }
  return Wrench6::from_stacked(state_, raw.frame);
}

ContactEvent guarded_move(const GuardedMoveSpec& spec, EEState state,
                          const ControllerParams& params, const PlantFn& plant,
                          const CycleGovernor& governor,
                          double filter_cutoff_hz, double* t_inout) {
  if (!(spec.speed > 0.0) || !(spec.contact_threshold > 0.0) ||
      !(spec.max_distance > 0.0))
    throw std::invalid_argument("guarded_move: speed, threshold and distance "
                                "must be positive");
  params.validate();

  // Pure velocity mode. The scaling vector realizes the requested base-frame
  // direction in EE coordinates; orientation is held so it stays constant.
  const Vec3 dir = spec.direction.normalized();
  const Vec3 dir_ee = state.pose.rotation().transpose() * dir;
  ControllerParams p = params;
  p.scaling = Vec6::Zero();
  const Vec6 vmax = p.max_twist.stacked();
  for (int i = 0; i < 3; ++i) {
    const double want = dir_ee[i] * spec.speed;
    if (std::abs(want) > std::abs(vmax[kVx + i]) + 1e-12)
      throw std::invalid_argument("guarded_move: speed exceeds max twist");
    p.scaling[kVx + i] =
        std::abs(vmax[kVx + i]) > 0.0 ? want / vmax[kVx + i] : 0.0;
  }
  const SelectionMatrices sel = SelectionMatrices::all_velocity();

  WrenchFilter filter(filter_cutoff_hz, p.dt);
  double t = t_inout ? *t_inout : 0.0;
  double traveled = 0.0;

  ContactEvent out;
  while (true) {
    const Wrench6 raw = plant(state.pose, p.dt);
    const Wrench6 meas = filter.apply(raw);
    state.measured_wrench = meas;

    const Vec3 f_base = state.pose.rotation() * meas.force;
    if (f_base.dot(dir) >= spec.contact_threshold) {
      out.kind = ContactEvent::Kind::Contact;
      break;
    }
    if (traveled >= spec.max_distance) {
      out.kind = ContactEvent::Kind::NoContact;
      break;
    }

    Twist6 u = hybrid_command(sel, p, meas);
    if (governor) {
      CycleDecision d = governor(t, u);
      if (d.halt) {
        out.kind = ContactEvent::Kind::SafetyHalt;
        break;
      }
      u = d.command;
    }
    const Twist6 u_base = ee_twist_to_base(state.pose, u);
    state = step(state, u_base, p.dt);
    traveled += u_base.linear.norm() * p.dt;
    t += p.dt;
  }
  if (t_inout) *t_inout = t;
  out.pose = state.pose;
  out.wrench = state.measured_wrench;
  out.traveled = traveled;
  return out;
}

}  // namespace graspforce
