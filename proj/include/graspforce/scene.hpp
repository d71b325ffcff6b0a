#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graspforce/control.hpp"
#include "graspforce/world.hpp"

namespace graspforce {

/// Raised by the scene loader with a field path / line diagnostic.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One scene body plus the grasp metadata the task planner would supply.
struct SceneObject {
  ObjectSpec spec;
  std::string strategies;  // applicable strategy letters, e.g. "AC"
  double expected_min_mass = 0.0;  // kg, for the weight check
  std::optional<double> initial_opening;  // hint, m
  bool expect_rotary = false;             // hint
};

/// Control-loop constants shared by all skills in a scene.
struct ControllerConfig {
  double dt = 0.002;           // s
  double gain_linear = 0.01;   // (m/s)/N
  double gain_angular = 0.05;  // (rad/s)/(N*m)
  Twist6 max_twist =
      Twist6{Vec3::Constant(1.0), Vec3::Constant(0.25), kEEFrame};
  double filter_cutoff = 50.0;  // Hz

  Mat6 gain() const;
  ControllerParams params() const;
};

/// Named thresholds and schedule constants of the grasp skills. The schedule
/// values (re-advance step, search offset factor, reorientation angle and
/// counts) are the published procedure parameters.
struct SkillConfig {
  std::map<GripperKind, double> d_safety = {{GripperKind::A, 0.12},
                                            {GripperKind::B, 0.10},
                                            {GripperKind::C, 0.10}};
  double epsilon_overshoot = 0.005;  // m past the goal when no contact
  double contact_force = 2.0;        // N, guarded-move threshold
  double press_force = 8.0;          // N, suction-cup seating force
  double grasp_force = 6.0;          // N, per-finger closing target
  double force_diff_max = 0.5;       // N, finger balance criterion
  double lateral_force_max = 0.8;    // N, FT criterion while closing
  double pull_force = 8.0;           // N, fixture detection on lift
  double jam_torque = 0.5;           // N*m, rotation blocked detection
  double rotation_step = 2.0 * M_PI / 180.0;   // rad per increment
  double rotation_max = 30.0 * M_PI / 180.0;   // rad per attempt
  double rotation_speed = 0.35;                // rad/s
  int tip_retries = 3;
  double tip_band_rows = 1.0;   // at-tip band, in tactile row pitches
  double readvance = 0.01;      // m, tip-recovery advance
  double reopen_delta = 0.02;   // m, slight reopen before a re-advance
  double search_offset_factor = 1.2;  // of the opening width
  double reorient_angle = 45.0 * M_PI / 180.0;
  int max_reorient_both = 3;
  int max_reorient_single = 7;
  double timeout = 30.0;         // s per strategy attempt
  double approach_speed = 0.05;  // m/s
  double search_speed = 0.01;    // m/s
  double transport_speed = 0.25; // m/s
  double check_height = 0.05;    // m, retract before the weight check
  double settle_time = 1.5;      // s, compliance budget after closing
  double move_timeout = 20.0;    // s, transport move budget
};

/// Full scene description: bodies, available tools, the vision noise model,
/// controller and skill configuration, and the named robot poses.
struct Scene {
  int schema_version = 1;
  std::string name;
  std::vector<SceneObject> objects;
  std::map<GripperKind, GripperModel> grippers;
  NoiseModel noise;
  SimParams sim;
  ControllerConfig controller;
  SkillConfig skill;
  Vec3 safe_position = Vec3(0.30, -0.35, 0.35);
  Vec3 release_position = Vec3(0.55, -0.35, 0.25);
  double transport_height = 0.30;  // m, clearance for lateral transport

  const SceneObject* find_object(const std::string& name) const;
  /// Downward-pointing EE orientation used for the safe and release poses.
  static Mat3 down_orientation();
};

void validate_scene(const Scene& scene);

/// Parse a scene from JSON text; diagnostics carry the offending field path
/// (or parse position).
Scene parse_scene_text(const std::string& text);
Scene load_scene(const std::string& path);

/// Default gripper set used by the shipped scenes.
std::map<GripperKind, GripperModel> default_grippers();

}  // namespace graspforce
