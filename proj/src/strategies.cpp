#include "graspforce/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

namespace graspforce {

using nlohmann::json;

namespace {
constexpr double kPosTol = 5e-4;    // m, move convergence
constexpr double kAngTol = 5e-3;    // rad
constexpr double kAngSpeed = 0.6;   // rad/s, transport rotations
}  // namespace

const char* to_string(SkillPhase p) {
  switch (p) {
    case SkillPhase::ToolChange: return "ToolChange";
    case SkillPhase::MoveSafe: return "MoveSafe";
    case SkillPhase::MovePrePose: return "MovePrePose";
    case SkillPhase::ToolStrategy: return "ToolStrategy";
    case SkillPhase::Deliver: return "Deliver";
    case SkillPhase::ReturnSafe: return "ReturnSafe";
    case SkillPhase::ReportFail: return "ReportFail";
  }
  return "?";
}

const char* to_string(FailReason r) {
  switch (r) {
    case FailReason::None: return "none";
    case FailReason::NoContact: return "no_contact";
    case FailReason::NothingGrasped: return "nothing_grasped";
    case FailReason::WeightCheckFailed: return "weight_check_failed";
    case FailReason::FixtureUnreleasable: return "fixture_unreleasable";
    case FailReason::Timeout: return "timeout";
    case FailReason::SafetyAbort: return "safety_abort";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ControlSession
// ---------------------------------------------------------------------------

ControlSession::ControlSession(World& world, const Scene& scene,
                               const SkillRunOptions& opts,
                               std::vector<PhaseRecord>& log)
    : world_(world),
      scene_(scene),
      opts_(opts),
      log_(log),
      params_(scene.controller.params()),
      filter_(scene.controller.filter_cutoff, scene.controller.dt),
      t_(world.time()) {
  state_.pose = world.ee();
  state_.measured_wrench = Wrench6::zero(kEEFrame);
}

void ControlSession::phase(SkillPhase p) {
  phase_ = p;
  log_.push_back(PhaseRecord{t_, p, "", state_.pose, wrench_,
                             std::numeric_limits<double>::quiet_NaN()});
}

void ControlSession::event(const std::string& name, double value) {
  log_.push_back(PhaseRecord{t_, phase_, name, state_.pose, wrench_, value});
}

bool ControlSession::cycle(
    const std::function<Twist6(const Wrench6&)>& make_command) {
  if (stopped_) return false;
  world_.set_ee(state_.pose);
  world_.tick(params_.dt);
  wrench_ = filter_.apply(world_.sensed_wrench());
  state_.measured_wrench = wrench_;

  const SafetyStatus status = opts_.safety.status_at(t_);
  Twist6 u = make_command(wrench_);
  u = saturate_twist(u, params_.max_twist);
  u = apply_safety(status, u, opts_.alert_cap, params_.max_twist);
  if (opts_.observer) opts_.observer(t_, u, status);
  if (status == SafetyStatus::Stop) {
    stopped_ = true;
    world_.freeze(true);
    t_ += params_.dt;
    return false;
  }
  state_ = step(state_, ee_twist_to_base(state_.pose, u), params_.dt);
  t_ += params_.dt;
  return true;
}

bool ControlSession::cycle_idle() {
  return cycle([](const Wrench6&) { return Twist6::zero(kEEFrame); });
}

bool ControlSession::move_to(const Pose& ee_target, double lin_speed,
                             double timeout_s) {
  const double deadline = t_ + timeout_s;
  while (t_ < deadline) {
    const Vec3 dp = ee_target.translation() - state_.pose.translation();
    const Vec3 rv = [&] {
      const Eigen::AngleAxisd aa(ee_target.rotation() *
                                 state_.pose.rotation().transpose());
      return Vec3(aa.angle() * aa.axis());
    }();
    const double dist = dp.norm();
    const double ang = rv.norm();
    if (dist < kPosTol && ang < kAngTol) return true;

    Twist6 u_base = Twist6::zero(kBaseFrame);
    if (dist > 1e-12)
      u_base.linear = dp / dist * std::min(lin_speed, dist / params_.dt);
    if (ang > 1e-12)
      u_base.angular = rv / ang * std::min(kAngSpeed, ang / params_.dt);
    const Mat3 rt = state_.pose.rotation().transpose();
    const Twist6 u_ee{rt * u_base.angular, rt * u_base.linear, kEEFrame};
    if (!cycle([&](const Wrench6&) { return u_ee; })) return false;
  }
  return false;
}

ContactEvent ControlSession::guarded_line(const Vec3& dir, double speed,
                                          double threshold, double max_dist) {
  ContactEvent out;
  const Vec3 d = dir.normalized();
  const Vec3 start = state_.pose.translation();
  while (true) {
    const Vec3 f_base = state_.pose.rotation() * wrench_.force;
    out.traveled = (state_.pose.translation() - start).dot(d);
    if (f_base.dot(d) >= threshold) {
      out.kind = ContactEvent::Kind::Contact;
      break;
    }
    if (out.traveled >= max_dist) {
      out.kind = ContactEvent::Kind::NoContact;
      break;
    }
    const Vec3 d_ee = state_.pose.rotation().transpose() * d;
    const Twist6 u_ee{Vec3::Zero(), d_ee * speed, kEEFrame};
    if (!cycle([&](const Wrench6&) { return u_ee; })) {
      out.kind = ContactEvent::Kind::SafetyHalt;
      break;
    }
  }
  out.pose = state_.pose;
  out.wrench = wrench_;
  return out;
}

bool ControlSession::open_fingers(double width) {
  world_.begin_open(width);
  const int budget = static_cast<int>(world_.gripper().max_opening /
                                      (world_.params().finger_speed *
                                       params_.dt)) +
                     100;
  for (int i = 0; i < budget && !world_.actuation_done(); ++i)
    if (!cycle_idle()) return false;
  return !stopped_;
}

bool ControlSession::close_plain(double grasp_force) {
  world_.begin_close(grasp_force);
  const int budget = static_cast<int>(world_.gripper().max_opening /
                                      (world_.params().finger_speed *
                                       params_.dt)) +
                     100;
  for (int i = 0; i < budget && !world_.actuation_done(); ++i)
    if (!cycle_idle()) return false;
  return !stopped_;
}

ControlSession::CloseOutcome ControlSession::compliant_close(
    double grasp_force) {
  const SkillConfig& cfg = scene_.skill;
  // compliance on x, y and rotation about z, desired wrench zero
  const SelectionMatrices sel =
      SelectionMatrices::force_on({kVx, kVy, kWz});
  ControllerParams p = params_;
  p.desired_wrench = Wrench6::zero(kEEFrame);
  auto compliance = [&](const Wrench6& w) { return hybrid_command(sel, p, w); };

  world_.begin_close(grasp_force);
  const int budget = static_cast<int>(world_.gripper().max_opening /
                                      (world_.params().finger_speed *
                                       params_.dt)) +
                     100;
  for (int i = 0; i < budget && !world_.actuation_done(); ++i)
    if (!cycle(compliance)) return {};

  CloseOutcome out;
  out.grasped = world_.held_object().has_value();
  if (!out.grasped) return out;

  // hold the compliance until the finger loads and the lateral FT force
  // settle, Fig. 6 closing criterion
  const double deadline = t_ + cfg.settle_time;
  while (t_ < deadline) {
    const double diff = finger_force_difference(world_.finger_pair());
    const double lateral =
        std::hypot(wrench_.force.x(), wrench_.force.y());
    if (diff <= cfg.force_diff_max && lateral <= cfg.lateral_force_max) {
      out.balanced = true;
      break;
    }
    if (!cycle(compliance)) return out;
  }
  return out;
}

std::optional<CoP> ControlSession::combined_cop() const {
  const FingerPair& fp = world_.finger_pair();
  const auto l = compute_cop(fp.left);
  const auto r = compute_cop(fp.right);
  if (!l && !r) return std::nullopt;
  if (l && !r) return l;
  if (r && !l) return r;
  const double total = l->total_force + r->total_force;
  CoP c;
  c.total_force = total;
  c.position_in_finger = (l->position_in_finger * l->total_force +
                          r->position_in_finger * r->total_force) /
                         total;
  c.z_offset_tcp =
      (l->z_offset_tcp * l->total_force + r->z_offset_tcp * r->total_force) /
      total;
  c.y_offset_tcp =
      (l->y_offset_tcp * l->total_force + r->y_offset_tcp * r->total_force) /
      total;
  return c;
}

ControlSession::RotateOutcome ControlSession::rotate_about_cop(
    double max_angle, double step_angle, double speed) {
  const SkillConfig& cfg = scene_.skill;
  RotateOutcome out;
  const auto held = world_.held_object();
  if (!held) return out;

  CoP last_cop;
  last_cop.z_offset_tcp = 0.0;
  while (out.rotated < max_angle - 1e-9) {
    const double inc =
        std::min(step_angle, max_angle - out.rotated);
    const int cycles = std::max(1, static_cast<int>(inc / (speed * params_.dt)));
    for (int i = 0; i < cycles; ++i) {
      // the rotation point follows the pressure distribution
      auto cop = combined_cop();
      if (cop) last_cop = *cop;
      const Pose ee_T_cop = cop_frame(tcp_z(), last_cop);
      const Twist6 v_cop{Vec3(0, speed, 0), Vec3::Zero(), kCoPFrame};
      const Twist6 u_ee = transform_twist(ee_T_cop, v_cop);
      if (!cycle([&](const Wrench6&) { return u_ee; })) return out;
      out.rotated += speed * params_.dt;

      if (!world_.fixture_engaged(*held)) {
        out.released = true;
        return out;
      }
      const double jam = std::abs(wrench_.torque.y());
      if (jam >= cfg.jam_torque) {
        out.jammed = true;
        return out;
      }
    }
  }
  return out;
}

bool ControlSession::orient_to(const Mat3& rotation, double ang_speed,
                               double timeout_s) {
  const Pose target(rotation, state_.pose.translation(), kBaseFrame, kEEFrame);
  (void)ang_speed;
  return move_to(target, scene_.skill.transport_speed, timeout_s);
}

// ---------------------------------------------------------------------------
// Skill wrapper and strategies
// ---------------------------------------------------------------------------

namespace {

struct StrategyContext {
  ControlSession& s;
  World& w;
  const Scene& scene;
  const GraspRequest& req;
  Pose goal_tcp;  // ^B T_TCP,des
  Pose goal_ee;   // ^B T_EE,des
  Pose pre_ee;
  Vec3 approach;  // unit, base frame
};

Pose ee_goal_from_tcp(const Pose& goal_tcp, const GripperModel& g) {
  return compose(goal_tcp, g.tcp_offset.inverse());
}

Pose down_pose_at(const Vec3& p) {
  return Pose(Scene::down_orientation(), p, kBaseFrame, kEEFrame);
}

// Fig. 6 procedure: guarded approach, compliant close, tip recovery,
// lift with pull monitoring, rotation about the CoP while a fixture holds.
FailReason run_strategy_a(StrategyContext& ctx) {
  ControlSession& s = ctx.s;
  World& w = ctx.w;
  const SkillConfig& cfg = ctx.scene.skill;
  const GripperModel& g = w.gripper();
  const double deadline = s.now() + cfg.timeout;

  const double open_w =
      std::min(ctx.req.hints.initial_opening.value_or(g.max_opening),
               g.max_opening);
  if (!s.open_fingers(open_w)) return FailReason::SafetyAbort;

  const double approach_dist =
      (ctx.pre_ee.translation() - ctx.goal_ee.translation()).norm() +
      cfg.epsilon_overshoot;
  ContactEvent ev = s.guarded_line(ctx.approach, cfg.approach_speed,
                                   cfg.contact_force, approach_dist);
  if (ev.kind == ContactEvent::Kind::SafetyHalt) return FailReason::SafetyAbort;
  s.event(ev.kind == ContactEvent::Kind::Contact ? "approach_contact"
                                                 : "approach_goal",
          ev.traveled);

  const double tip_band = cfg.tip_band_rows * g.array_pitch;
  for (int attempt = 0;; ++attempt) {
    auto close = s.compliant_close(cfg.grasp_force);
    if (s.stopped()) return FailReason::SafetyAbort;
    if (!close.grasped) return FailReason::NothingGrasped;
    const auto cop = s.combined_cop();
    if (!cop || !cop_at_tip(*cop, tip_band)) break;
    if (attempt >= cfg.tip_retries) break;
    // contact only at the fingertips: open slightly, advance, close again
    s.event("tip_readvance", cfg.readvance);
    if (!s.open_fingers(w.opening_width() + cfg.reopen_delta))
      return FailReason::SafetyAbort;
    ev = s.guarded_line(ctx.approach, cfg.approach_speed, cfg.contact_force,
                        cfg.readvance);
    if (ev.kind == ContactEvent::Kind::SafetyHalt)
      return FailReason::SafetyAbort;
  }

  const Vec3 lift_dir = -ctx.approach;
  const Mat3 upright = s.state().pose.rotation();
  int rotation_attempts = 0;
  while (true) {
    if (s.now() > deadline) return FailReason::Timeout;
    const double lift_dist =
        (ctx.pre_ee.translation() - s.state().pose.translation())
            .dot(lift_dir);
    if (lift_dist > 1e-4) {
      ev = s.guarded_line(lift_dir, cfg.approach_speed, cfg.pull_force,
                          lift_dist);
      if (ev.kind == ContactEvent::Kind::SafetyHalt)
        return FailReason::SafetyAbort;
    } else {
      ev.kind = ContactEvent::Kind::NoContact;
    }

    if (ev.kind == ContactEvent::Kind::NoContact) {
      // reached the pre-pose height without resistance
      if (!w.held_object()) return FailReason::NothingGrasped;
      const bool ok = w.lift_weight_check(ctx.req.expected_min_mass);
      s.event("weight_check", ok ? 1.0 : 0.0);
      return ok ? FailReason::None : FailReason::WeightCheckFailed;
    }

    // high pulling force: the object is still in a fixture
    s.event("high_pull", (s.state().pose.rotation() * s.wrench().force).z());
    s.event("rotation_attempt", ++rotation_attempts);
    auto rot = s.rotate_about_cop(cfg.rotation_max, cfg.rotation_step,
                                  cfg.rotation_speed);
    if (s.stopped()) return FailReason::SafetyAbort;
    if (rot.jammed) {
      s.event("rotation_jammed", rot.rotated);
      return FailReason::FixtureUnreleasable;
    }
    if (rot.released) {
      s.event("fixture_released", rot.rotated);
      continue;  // lift again
    }
    // rotated the full budget without release: reopen, return upright,
    // close again and retry until the timeout
    if (!s.open_fingers(open_w)) return FailReason::SafetyAbort;
    if (!s.orient_to(upright, kAngSpeed, cfg.move_timeout))
      return s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout;
    auto close = s.compliant_close(cfg.grasp_force);
    if (s.stopped()) return FailReason::SafetyAbort;
    if (!close.grasped) return FailReason::NothingGrasped;
  }
}

// Fig. 7 procedure: grasp at the estimate; on failure search for the true
// edge from either side at 1.2 * opening width and retry.
FailReason run_strategy_b(StrategyContext& ctx) {
  ControlSession& s = ctx.s;
  World& w = ctx.w;
  const SkillConfig& cfg = ctx.scene.skill;
  const GripperModel& g = w.gripper();
  const double deadline = s.now() + cfg.timeout;

  const double l_width =
      std::min(ctx.req.hints.initial_opening.value_or(g.max_opening),
               g.max_opening);
  s.event("l_width", l_width);

  // closing axis of the tool in the base frame
  const Vec3 close_axis = ctx.goal_tcp.rotation().col(0);
  const double est_halfwidth =
      std::min(ctx.req.estimate.dims.x(), ctx.req.estimate.dims.y()) / 2;
  const double probe_half = g.finger_thickness;

  Pose goal_ee = ctx.goal_ee;
  Pose pre_ee = ctx.pre_ee;

  auto attempt = [&]() -> FailReason {
    auto close = s.compliant_close(cfg.grasp_force);
    if (s.stopped()) return FailReason::SafetyAbort;
    if (!close.grasped) return FailReason::NothingGrasped;
    const double lift_dist =
        (pre_ee.translation() - s.state().pose.translation()).dot(-ctx.approach);
    const ContactEvent ev = s.guarded_line(-ctx.approach, cfg.approach_speed,
                                           cfg.pull_force, lift_dist);
    if (ev.kind == ContactEvent::Kind::SafetyHalt)
      return FailReason::SafetyAbort;
    if (ev.kind == ContactEvent::Kind::Contact) {
      s.event("high_pull");
      return FailReason::WeightCheckFailed;  // held back: not a removable part
    }
    if (!w.held_object()) return FailReason::NothingGrasped;
    const bool ok = w.lift_weight_check(ctx.req.expected_min_mass);
    s.event("weight_check", ok ? 1.0 : 0.0);
    return ok ? FailReason::None : FailReason::WeightCheckFailed;
  };

  // first attempt straight at the estimate
  if (!s.open_fingers(l_width)) return FailReason::SafetyAbort;
  ContactEvent ev =
      s.guarded_line(ctx.approach, cfg.approach_speed, cfg.contact_force,
                     (pre_ee.translation() - goal_ee.translation()).norm() +
                         cfg.epsilon_overshoot);
  if (ev.kind == ContactEvent::Kind::SafetyHalt) return FailReason::SafetyAbort;
  FailReason last = attempt();
  if (last == FailReason::None || last == FailReason::SafetyAbort) return last;

  // the grasp failed: a more precise goal position is needed
  const double offset = cfg.search_offset_factor * l_width;
  int legs_without_contact = 0;
  for (const double side : {+1.0, -1.0}) {
    if (s.now() > deadline) return FailReason::Timeout;
    s.event("search_leg", side);
    s.event("search_offset", offset);

    // release, retract, move beside the estimated position
    if (w.held_object()) s.open_fingers(l_width);
    if (!s.move_to(pre_ee, cfg.transport_speed, cfg.move_timeout))
      return s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout;
    const Pose beside(pre_ee.rotation(),
                      pre_ee.translation() + side * offset * close_axis,
                      kBaseFrame, kEEFrame);
    if (!s.move_to(beside, cfg.transport_speed, cfg.move_timeout))
      return s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout;
    if (!s.close_plain(cfg.grasp_force)) return FailReason::SafetyAbort;

    // descend next to the object, then probe toward the estimate
    const double descend =
        (pre_ee.translation() - goal_ee.translation()).norm();
    ev = s.guarded_line(ctx.approach, cfg.approach_speed, cfg.contact_force,
                        descend);
    if (ev.kind == ContactEvent::Kind::SafetyHalt)
      return FailReason::SafetyAbort;
    if (ev.kind == ContactEvent::Kind::Contact) {
      s.event("search_descent_blocked");
      ++legs_without_contact;
      continue;  // something solid here: try the other side
    }

    const double travel_budget = offset + est_halfwidth;
    ev = s.guarded_line(-side * close_axis, cfg.search_speed,
                        cfg.contact_force, travel_budget);
    if (ev.kind == ContactEvent::Kind::SafetyHalt)
      return FailReason::SafetyAbort;
    if (ev.kind != ContactEvent::Kind::Contact) {
      s.event("search_no_contact");
      ++legs_without_contact;
      continue;
    }

    // contact fixes the object's near edge along the closing axis
    const Pose tcp_now = compose(s.state().pose, g.tcp_offset);
    const double edge =
        tcp_now.translation().dot(close_axis) - side * probe_half;
    const double refined_center = edge - side * est_halfwidth;
    s.event("edge_found", edge);

    const double old_center = ctx.goal_tcp.translation().dot(close_axis);
    const Vec3 shift = (refined_center - old_center) * close_axis;
    goal_ee = Pose(ctx.goal_ee.rotation(), ctx.goal_ee.translation() + shift,
                   kBaseFrame, kEEFrame);
    pre_ee = Pose(ctx.pre_ee.rotation(), ctx.pre_ee.translation() + shift,
                  kBaseFrame, kEEFrame);

    // retry the grasp at the refined position
    if (!s.move_to(pre_ee, cfg.transport_speed, cfg.move_timeout))
      return s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout;
    if (!s.open_fingers(l_width)) return FailReason::SafetyAbort;
    ev = s.guarded_line(ctx.approach, cfg.approach_speed, cfg.contact_force,
                        (pre_ee.translation() - goal_ee.translation()).norm() +
                            cfg.epsilon_overshoot);
    if (ev.kind == ContactEvent::Kind::SafetyHalt)
      return FailReason::SafetyAbort;
    last = attempt();
    if (last == FailReason::None || last == FailReason::SafetyAbort)
      return last;
  }
  if (legs_without_contact == 2) return FailReason::NoContact;
  return last;
}

// Fig. 8 procedure: cup selection from the estimated dimensions, guarded
// descent, vacuum, weight check; on failure rotate 45 degrees about the
// center (both cups) or the selected cup and retry.
FailReason run_strategy_c(StrategyContext& ctx) {
  ControlSession& s = ctx.s;
  World& w = ctx.w;
  const SkillConfig& cfg = ctx.scene.skill;
  const GripperModel& g = w.gripper();
  const double deadline = s.now() + cfg.timeout;

  const double d_long =
      std::max(ctx.req.estimate.dims.x(), ctx.req.estimate.dims.y());
  const double d_short =
      std::min(ctx.req.estimate.dims.x(), ctx.req.estimate.dims.y());
  const bool both = g.cup_count == 2 &&
                    d_long >= g.cup_spacing + g.cup_diameter &&
                    d_short >= g.cup_diameter;
  const CupSelection cups =
      both ? CupSelection::both() : CupSelection::single(0);
  s.event(both ? "cups_both" : "cups_single");

  // in single-cup mode the target shifts so the selected cup sits on the
  // estimated center; the pivot of later reorientations is that cup's axis
  const Vec3 cup_off = both ? Vec3::Zero() : w.cup_offset_tcp(0);
  const Mat3 goal_rot = ctx.goal_tcp.rotation();
  const Vec3 pivot = ctx.req.estimate.center;
  const int max_reorient =
      both ? cfg.max_reorient_both : cfg.max_reorient_single;

  int reorients = 0;
  while (true) {
    if (s.now() > deadline) return FailReason::Timeout;

    const double total_angle = reorients * cfg.reorient_angle;
    const Mat3 spin = so3_exp(Vec3::UnitZ() * total_angle);
    const Mat3 rot = spin * goal_rot;
    const Vec3 tcp_p = pivot - rot * cup_off;
    const Pose goal_tcp(rot, tcp_p, kBaseFrame, kTCPFrame);
    const Pose goal_ee = ee_goal_from_tcp(goal_tcp, g);
    const Pose pre_ee = ee_goal_from_tcp(
        pre_pose(goal_tcp, ctx.req.estimate.normal, cfg.d_safety.at(g.kind)),
        g);

    if (!s.move_to(pre_ee, cfg.transport_speed, cfg.move_timeout))
      return s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout;

    // descend until the cups seat; the travel budget reaches the table
    const double max_down = s.state().pose.translation().z() + 0.02;
    const ContactEvent ev = s.guarded_line(
        ctx.approach, cfg.approach_speed, cfg.press_force, max_down);
    if (ev.kind == ContactEvent::Kind::SafetyHalt)
      return FailReason::SafetyAbort;

    const ContactState cs = w.vacuum(true, cups);
    const bool sealed = cs.attachment == Attachment::Vacuum;
    s.event("vacuum_on", sealed ? 1.0 : 0.0);
    if (sealed) {
      if (!s.move_to(pre_ee, cfg.approach_speed, cfg.move_timeout))
        return s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout;
      const bool ok =
          w.held_object() && w.lift_weight_check(ctx.req.expected_min_mass);
      s.event("weight_check", ok ? 1.0 : 0.0);
      if (ok) return FailReason::None;
    }

    w.vacuum(false, cups);
    if (reorients >= max_reorient) return FailReason::WeightCheckFailed;
    ++reorients;
    s.event("reorient", cfg.reorient_angle);
  }
}

}  // namespace

std::vector<char> select_strategy(const ObjectProps& props) {
  using Size = ObjectProps::Size;
  const bool flat_top = props.top_surface == SurfaceKind::Flat;

  // heavy parts need the surface gripper regardless of anything else
  if (props.heavy) {
    if (!flat_top)
      throw NoApplicableStrategy("heavy object without a flat surface");
    return {'C'};
  }
  // delicate parts need the sensitive fingers
  if (props.delicate) return {'A'};
  // cluttered surroundings need the slim fingers
  if (props.clutter) return {'B'};
  // small/medium parts with laminated sides: fingers, or suction from above
  if (props.laminated_sides && props.size != Size::Large && flat_top)
    return {'A', 'C'};
  if (props.size == Size::Large) {
    if (flat_top) return {'C'};
    throw NoApplicableStrategy("large object without a flat surface");
  }
  if (props.size == Size::Small) return {'A', 'B'};
  // medium
  if (flat_top) return {'A', 'C'};
  return {'A'};
}

GraspResult run_skill(const GraspRequest& req, World& world, const Scene& scene,
                      const SkillRunOptions& opts,
                      const PlannerCallbacks& callbacks) {
  GraspResult res;
  req.estimate.validate();
  const GripperKind kind = gripper_from_letter(req.strategy);

  ControlSession s(world, scene, opts, res.log);
  auto enter = [&](SkillPhase p) {
    s.phase(p);
    if (callbacks.on_phase) callbacks.on_phase(p);
  };
  auto finish = [&](FailReason r) -> GraspResult& {
    res.succeeded = r == FailReason::None;
    res.reason = r;
    if (!res.succeeded) {
      enter(SkillPhase::ReportFail);
      if (r != FailReason::SafetyAbort) {
        // return to the safe pose and await the next call
        enter(SkillPhase::ReturnSafe);
        s.move_to(down_pose_at(scene.safe_position), scene.skill.transport_speed,
                  scene.skill.move_timeout);
      }
    }
    if (callbacks.on_result) callbacks.on_result(res);
    return res;
  };

  if (world.mounted() != kind) {
    enter(SkillPhase::ToolChange);  // instantaneous tool-change model
    world.mount(kind);
  }

  enter(SkillPhase::MoveSafe);
  if (!s.move_to(down_pose_at(scene.safe_position), scene.skill.transport_speed,
                 scene.skill.move_timeout))
    return finish(s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout);

  StrategyContext ctx{s, world, scene, req,
                      desired_tcp_pose(req.estimate),
                      Pose(),
                      Pose(),
                      -req.estimate.normal};
  ctx.goal_ee = ee_goal_from_tcp(ctx.goal_tcp, world.gripper());
  ctx.pre_ee = ee_goal_from_tcp(
      pre_pose(ctx.goal_tcp, req.estimate.normal,
               scene.skill.d_safety.at(kind)),
      world.gripper());

  enter(SkillPhase::MovePrePose);
  if (!s.move_to(ctx.pre_ee, scene.skill.transport_speed,
                 scene.skill.move_timeout))
    return finish(s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout);

  enter(SkillPhase::ToolStrategy);
  FailReason r = FailReason::None;
  switch (req.strategy) {
    case 'A': r = run_strategy_a(ctx); break;
    case 'B': r = run_strategy_b(ctx); break;
    case 'C': r = run_strategy_c(ctx); break;
    default: throw std::invalid_argument("run_skill: unknown strategy");
  }
  if (r != FailReason::None) return finish(r);

  enter(SkillPhase::Deliver);
  const Vec3 here = s.state().pose.translation();
  if (!s.move_to(down_pose_at(Vec3(here.x(), here.y(), scene.transport_height)),
                 scene.skill.transport_speed, scene.skill.move_timeout) ||
      !s.move_to(down_pose_at(Vec3(scene.release_position.x(),
                                   scene.release_position.y(),
                                   scene.transport_height)),
                 scene.skill.transport_speed, scene.skill.move_timeout) ||
      !s.move_to(down_pose_at(scene.release_position),
                 scene.skill.transport_speed, scene.skill.move_timeout))
    return finish(s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout);
  world.deliver_held();
  if (world.mounted() == GripperKind::C) {
    world.vacuum(false, CupSelection::both());
  } else {
    s.open_fingers(world.gripper().max_opening);
  }
  s.event("delivered", 1.0);

  enter(SkillPhase::ReturnSafe);
  if (!s.move_to(down_pose_at(scene.safe_position), scene.skill.transport_speed,
                 scene.skill.move_timeout))
    return finish(s.stopped() ? FailReason::SafetyAbort : FailReason::Timeout);

  res.succeeded = true;
  res.reason = FailReason::None;
  if (callbacks.on_result) callbacks.on_result(res);
  return res;
}

GraspResult strategy_a(const GraspRequest& req, World& world,
                       const Scene& scene, const SkillRunOptions& opts) {
  GraspRequest r = req;
  r.strategy = 'A';
  return run_skill(r, world, scene, opts);
}

GraspResult strategy_b(const GraspRequest& req, World& world,
                       const Scene& scene, const SkillRunOptions& opts) {
  GraspRequest r = req;
  r.strategy = 'B';
  return run_skill(r, world, scene, opts);
}

GraspResult strategy_c(const GraspRequest& req, World& world,
                       const Scene& scene, const SkillRunOptions& opts) {
  GraspRequest r = req;
  r.strategy = 'C';
  return run_skill(r, world, scene, opts);
}

ScheduleStats schedule_stats(const std::vector<PhaseRecord>& log) {
  ScheduleStats st;
  for (const auto& rec : log) {
    if (rec.event == "reorient") {
      ++st.reorientations;
      st.reorient_angles.push_back(rec.value);
    } else if (rec.event == "search_offset") {
      st.search_offsets.push_back(rec.value);
    } else if (rec.event == "l_width") {
      st.l_width = rec.value;
    } else if (rec.event == "tip_readvance") {
      st.readvances.push_back(rec.value);
    } else if (rec.event == "rotation_attempt") {
      ++st.rotation_attempts;
    } else if (rec.event == "weight_check") {
      st.weight_check_passed = rec.value > 0.5;
    } else if (rec.event == "delivered") {
      st.delivered = true;
    }
  }
  return st;
}

bool phase_grammar_ok(const std::vector<PhaseRecord>& log, bool aborted) {
  std::vector<SkillPhase> seq;
  for (const auto& rec : log)
    if (rec.event.empty()) seq.push_back(rec.phase);

  size_t i = 0;
  auto accept = [&](SkillPhase p) {
    if (i < seq.size() && seq[i] == p) {
      ++i;
      return true;
    }
    return false;
  };

  accept(SkillPhase::ToolChange);  // optional
  const bool prefix_ok[3] = {accept(SkillPhase::MoveSafe),
                             accept(SkillPhase::MovePrePose),
                             accept(SkillPhase::ToolStrategy)};
  std::string tail;
  if (accept(SkillPhase::Deliver)) {
    if (!accept(SkillPhase::ReturnSafe)) tail = "bad";
  } else if (accept(SkillPhase::ReportFail)) {
    if (!accept(SkillPhase::ReturnSafe) && !aborted) tail = "bad";
  } else if (!aborted) {
    tail = "bad";
  }
  if (aborted) {
    // a stop may cut the sequence anywhere; what was logged must still be a
    // valid prefix
    return i == seq.size() && tail != "bad";
  }
  return prefix_ok[0] && prefix_ok[1] && prefix_ok[2] && tail != "bad" &&
         i == seq.size();
}

std::string telemetry_to_jsonl(const std::vector<PhaseRecord>& log) {
  std::ostringstream out;
  for (const auto& rec : log) {
    json j;
    j["t"] = rec.t;
    j["phase"] = to_string(rec.phase);
    if (!rec.event.empty()) j["event"] = rec.event;
    if (!std::isnan(rec.value)) j["value"] = rec.value;
    j["pose"] = {rec.ee.translation().x(), rec.ee.translation().y(),
                 rec.ee.translation().z()};
    j["wrench"] = {rec.wrench.force.x(),  rec.wrench.force.y(),
                   rec.wrench.force.z(),  rec.wrench.torque.x(),
                   rec.wrench.torque.y(), rec.wrench.torque.z()};
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace graspforce
