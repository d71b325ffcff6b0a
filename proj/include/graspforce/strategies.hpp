#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "graspforce/control.hpp"
#include "graspforce/orchestrator.hpp"
#include "graspforce/scene.hpp"
#include "graspforce/sensing.hpp"
#include "graspforce/world.hpp"

namespace graspforce {

// ---------------------------------------------------------------------------
// Skill result types
// ---------------------------------------------------------------------------

enum class SkillPhase {
  ToolChange,
  MoveSafe,
  MovePrePose,
  ToolStrategy,
  Deliver,
  ReturnSafe,
  ReportFail,
};
const char* to_string(SkillPhase p);

enum class FailReason {
  None,
  NoContact,
  NothingGrasped,
  WeightCheckFailed,
  FixtureUnreleasable,
  Timeout,
  SafetyAbort,
};
const char* to_string(FailReason r);

/// One telemetry record: phase entries carry an empty event string, events
/// carry a name and an optional numeric payload.
struct PhaseRecord {
  double t = 0.0;
  SkillPhase phase = SkillPhase::ToolChange;
  std::string event;
  Pose ee = Pose(Mat3::Identity(), Vec3::Zero(), kBaseFrame, kEEFrame);
  Wrench6 wrench = Wrench6::zero(kEEFrame);
  double value = std::numeric_limits<double>::quiet_NaN();
};

struct GraspRequest {
  char strategy = 'A';  // A | B | C
  ObjectEstimate estimate;
  double expected_min_mass = 0.0;  // kg
  struct Hints {
    std::optional<double> initial_opening;  // m
    std::optional<bool> expect_rotary;
  } hints;
};

struct GraspResult {
  bool succeeded = false;
  FailReason reason = FailReason::None;
  std::vector<PhaseRecord> log;
};

/// Per-cycle hook: the commanded twist after the safety policy was applied.
using CycleObserver =
    std::function<void(double t, const Twist6& commanded, SafetyStatus status)>;

struct SkillRunOptions {
  SafetyFeed safety;
  double alert_cap = 0.25;  // fraction of max twist under Alert
  CycleObserver observer;
};

/// Hooks back to the task planner (both optional).
struct PlannerCallbacks {
  std::function<void(SkillPhase)> on_phase;
  std::function<void(const GraspResult&)> on_result;
};

// ---------------------------------------------------------------------------
// Control session: one skill's control loop over one world
// ---------------------------------------------------------------------------

/// Binds a world, the scene configuration, the safety feed and the telemetry
/// log into one fixed-rate control loop. All motion primitives run through a
/// single cycle path: tick the world, read the filtered wrench, compute the
/// command, apply the safety policy, integrate.
class ControlSession {
 public:
  ControlSession(World& world, const Scene& scene, const SkillRunOptions& opts,
                 std::vector<PhaseRecord>& log);

  double now() const { return t_; }
  bool stopped() const { return stopped_; }
  World& world() { return world_; }
  const Scene& scene() const { return scene_; }
  const EEState& state() const { return state_; }
  const Wrench6& wrench() const { return wrench_; }

  void phase(SkillPhase p);
  SkillPhase current_phase() const { return phase_; }
  void event(const std::string& name,
             double value = std::numeric_limits<double>::quiet_NaN());

  /// Velocity servo to a pose; true when converged.
  bool move_to(const Pose& ee_target, double lin_speed, double timeout_s);
  /// Straight guarded move along a base-frame direction.
  ContactEvent guarded_line(const Vec3& dir, double speed, double threshold,
                            double max_dist);
  bool open_fingers(double width);
  bool close_plain(double grasp_force);

  struct CloseOutcome {
    bool grasped = false;
    bool balanced = false;
  };
  /// Close with force mode on EE x, y and rotation about z (desired wrench
  /// zero), then hold compliance until the finger loads balance.
  CloseOutcome compliant_close(double grasp_force);

  struct RotateOutcome {
    bool released = false;
    bool jammed = false;
    double rotated = 0.0;  // rad
  };
  /// Incremental rotation about the current center of pressure, the rotation
  /// point rebuilt every cycle from the tactile images.
  RotateOutcome rotate_about_cop(double max_angle, double step_angle,
                                 double speed);
  /// Rotate in place back to a stored orientation.
  bool orient_to(const Mat3& rotation, double ang_speed, double timeout_s);

  std::optional<CoP> combined_cop() const;
  double tcp_z() const { return world_.gripper().tcp_offset.translation().z(); }

 private:
  bool cycle(const std::function<Twist6(const Wrench6&)>& make_command);
  bool cycle_idle();

  World& world_;
  const Scene& scene_;
  const SkillRunOptions& opts_;
  std::vector<PhaseRecord>& log_;
  ControllerParams params_;
  WrenchFilter filter_;
  EEState state_;
  Wrench6 wrench_ = Wrench6::zero(kEEFrame);
  SkillPhase phase_ = SkillPhase::ToolChange;
  double t_ = 0.0;
  bool stopped_ = false;
};

// ---------------------------------------------------------------------------
// Skills
// ---------------------------------------------------------------------------

/// Full grasp skill: tool change, safe pose, pre-pose, the tool-dependent
/// strategy, delivery on success, return to safe. On failure the robot
/// reports and returns to safe; a safety stop ends the skill with no further
/// motion.
GraspResult run_skill(const GraspRequest& req, World& world, const Scene& scene,
                      const SkillRunOptions& opts = {},
                      const PlannerCallbacks& callbacks = {});

GraspResult strategy_a(const GraspRequest& req, World& world,
                       const Scene& scene, const SkillRunOptions& opts = {});
GraspResult strategy_b(const GraspRequest& req, World& world,
                       const Scene& scene, const SkillRunOptions& opts = {});
GraspResult strategy_c(const GraspRequest& req, World& world,
                       const Scene& scene, const SkillRunOptions& opts = {});

// ---------------------------------------------------------------------------
// Strategy selection (device/object property mapping)
// ---------------------------------------------------------------------------

struct NoApplicableStrategy : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ObjectProps {
  enum class Size { Small, Medium, Large };
  Size size = Size::Small;
  SurfaceKind top_surface = SurfaceKind::Flat;
  bool laminated_sides = false;
  bool clutter = false;
  bool delicate = false;
  bool heavy = false;
};

/// Ordered set of applicable strategies for an object's properties.
std::vector<char> select_strategy(const ObjectProps& props);

// ---------------------------------------------------------------------------
// Telemetry helpers
// ---------------------------------------------------------------------------

struct ScheduleStats {
  int reorientations = 0;
  std::vector<double> reorient_angles;  // rad, commanded
  std::vector<double> search_offsets;   // m, commanded
  double l_width = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> readvances;  // m, commanded
  int rotation_attempts = 0;
  bool weight_check_passed = false;
  bool delivered = false;
};
ScheduleStats schedule_stats(const std::vector<PhaseRecord>& log);

/// Check the phase-entry sequence against the skill grammar:
///   ToolChange? MoveSafe MovePrePose ToolStrategy
///     (Deliver ReturnSafe | ReportFail ReturnSafe)
/// Safety-aborted logs may end early, at or before ReportFail.
bool phase_grammar_ok(const std::vector<PhaseRecord>& log, bool aborted);

/// Append-only JSON-lines serialization of a phase log.
std::string telemetry_to_jsonl(const std::vector<PhaseRecord>& log);

}  // namespace graspforce
