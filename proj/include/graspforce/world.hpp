#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "graspforce/geometry.hpp"
#include "graspforce/sensing.hpp"

namespace graspforce {

struct Scene;

/// Deterministic, portable random stream (splitmix64-based). Used for every
/// stochastic draw so that a trial is a pure function of its seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}
  uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);
  double gaussian();                      // standard normal
  /// Order-insensitive seed derivation for child streams.
  static uint64_t mix(uint64_t a, uint64_t b);

 private:
  uint64_t state_;
};

enum class Shape { Box, Cylinder };
enum class SurfaceKind { Flat, Laminated, Curved };

struct FixtureSpec {
  enum class Kind { None, Rotary, Rigid };
  Kind kind = Kind::None;
  Vec3 axis = Vec3::UnitY();    // rotary release axis, world
  double release_angle = 0.0;   // rad, in (0, pi] for rotary
  void validate() const;
};

/// Ground-truth description of one scene body. Contact geometry treats both
/// shapes as their bounding box; the planar dims are the x/y extents and
/// height the z extent. Bodies with a rigid fixture double as obstacles.
struct ObjectSpec {
  std::string name;
  Vec3 true_center = Vec3::Zero();   // m, world
  Vec3 true_normal = Vec3::UnitZ();  // unit
  Vec2 true_dims = Vec2::Constant(0.1);  // m, x/y extents
  double height = 0.05;              // m, z extent
  double mass = 0.1;                 // kg
  Shape shape = Shape::Box;
  SurfaceKind surface = SurfaceKind::Flat;
  FixtureSpec fixture;
  void validate() const;
};

/// Vision-channel uncertainty: center offset, normal tilt (angle about a
/// random in-plane axis, which keeps the normal unit length) and dimension
/// error. The uniform option draws from +-sigma*sqrt(3) (equal variance).
struct NoiseModel {
  Vec3 sigma_x = Vec3::Zero();   // m
  double sigma_n = 0.0;          // rad
  Vec2 sigma_d = Vec2::Zero();   // m
  enum class Dist { Gaussian, Uniform };
  Dist distribution = Dist::Gaussian;
  uint64_t seed = 0;
  void validate() const;
  NoiseModel scaled(double factor) const;
};

enum class GripperKind { A, B, C };
char gripper_letter(GripperKind k);
GripperKind gripper_from_letter(char c);

/// Tool geometry. Finger fields apply to kinds A and B, cup fields to C.
/// Kind A carries a tactile array on each finger's inner face, rows along
/// the finger with the last row at the tip.
struct GripperModel {
  GripperKind kind = GripperKind::A;
  double max_opening = 0.0;       // m
  double finger_length = 0.0;     // m, along approach
  double finger_thickness = 0.0;  // m, along closing axis
  double finger_breadth = 0.0;    // m, across
  double payload = 0.0;           // kg
  int cup_count = 0;
  double cup_spacing = 0.0;   // m, cup centers along tool y
  double cup_diameter = 0.0;  // m
  double cup_height = 0.02;   // m, compliant bellows section
  Pose tcp_offset = Pose(Mat3::Identity(), Vec3(0, 0, 0.2), kEEFrame,
                         kTCPFrame);  // ^EE T_TCP
  int array_rows = 8;
  int array_cols = 4;
  double array_pitch = 0.004;  // m
  void validate() const;
};

enum class Attachment { None, Fingers, Vacuum };

struct ContactState {
  bool touching = false;
  double penetration = 0.0;  // m, max over contacts
  Wrench6 wrench = Wrench6::zero(kEEFrame);  // tool-on-environment
  std::optional<size_t> held_object;
  Attachment attachment = Attachment::None;
};

/// Contact-model and sensor constants shared by one world instance.
struct SimParams {
  double dt = 0.002;                 // s, world tick
  double contact_stiffness = 1e4;    // N/m
  double force_cap = 50.0;           // N
  double bellows_stiffness = 500.0;  // N/m, suction-cup compliance
  double bellows_travel = 0.02;      // m
  double seal_gap = 5e-4;            // m, rim-to-surface tolerance
  double seal_tilt_max = 0.30;       // rad
  double leak_flat = 1.0;            // attach probability by surface kind
  double leak_laminated = 0.0;
  double leak_curved = 0.3;
  double fixture_stiffness = 2e4;    // N/m beyond the slack radius
  double fixture_slack = 0.005;      // m
  double fixture_rot_stiffness = 50.0;  // N*m/rad beyond the slack angle
  double fixture_rot_slack = 0.10;      // rad
  double grip_slip_force = 25.0;     // N, grasp strain limit
  double finger_speed = 0.05;        // m/s, opening-width rate
  double sensor_sigma_force = 0.1;   // N per axis
  double sensor_sigma_torque = 0.01; // N*m per axis
  double gravity = 9.81;             // m/s^2
  double weight_tol = 0.3;           // N
};

/// Which suction cups participate in a vacuum grasp.
struct CupSelection {
  std::array<bool, 2> use{false, false};
  static CupSelection both() { return {{true, true}}; }
  static CupSelection single(int idx) {
    CupSelection s;
    s.use[idx] = true;
    return s;
  }
  int count() const { return (use[0] ? 1 : 0) + (use[1] ? 1 : 0); }
};

/// Draw a noisy observation of an object per the vision uncertainty model.
ObjectEstimate observe(const ObjectSpec& obj, const NoiseModel& noise,
                       Rng& rng);

/// Quasi-static manipulation scene: objects with fixtures on a table at
/// z = 0, one mounted gripper, penalty contacts, vacuum attachment. A world
/// instance is stepped by exactly one control loop; the tool wrench reported
/// is the wrench the tool exerts on the environment.
class World {
 public:
  World(const Scene& scene, uint64_t seed);

  // --- tool -----------------------------------------------------------
  void mount(GripperKind kind);
  GripperKind mounted() const { return gripper_.kind; }
  const GripperModel& gripper() const { return gripper_; }
  void set_ee(const Pose& b_T_ee);
  const Pose& ee() const { return ee_; }
  Pose tcp() const { return compose(ee_, gripper_.tcp_offset); }
  double time() const { return time_; }

  /// Advance one period: finger servo, object pushing, fixture and
  /// attachment kinematics, contact recomputation.
  void tick(double dt);

  // --- finger actuation (kinds A and B) --------------------------------
  void begin_close(double target_force);
  void begin_open(double target_width);
  bool actuation_done() const;
  /// Blocking variants with the EE held in place.
  ContactState close_fingers(double target_force);
  ContactState open_fingers(double target_width);
  double opening_width() const { return width_; }
  const FingerPair& finger_pair() const { return finger_pair_; }
  double finger_force(int side) const;  // 0 = left, 1 = right

  // --- vacuum (kind C) --------------------------------------------------
  ContactState vacuum(bool on, const CupSelection& cups);
  Vec3 cup_offset_tcp(int idx) const;  // cup center in the TCP frame

  // --- queries ----------------------------------------------------------
  ContactState contact_query(const Pose& b_T_ee) const;
  ContactState contact_state() const;
  /// Noiseless tool-on-environment wrench in the EE frame.
  Wrench6 tool_wrench() const;
  /// Noisy sensor wrench; consumes the sensor noise stream.
  Wrench6 sensed_wrench();
  bool lift_weight_check(double expected_min_mass);

  // --- objects and fixtures ----------------------------------------------
  size_t object_count() const { return objects_.size(); }
  const ObjectSpec& object_spec(size_t i) const { return objects_[i].spec; }
  Vec3 object_center(size_t i) const { return objects_[i].center; }
  bool object_removed(size_t i) const { return objects_[i].removed; }
  bool fixture_engaged(size_t i) const { return objects_[i].fixture_engaged; }
  double fixture_angle(size_t i) const { return objects_[i].fixture_angle; }
  /// Rotary fixtures accumulate the EE rotation about their axis and release
  /// at the release angle; rigid fixtures never release.
  void fixture_update(size_t idx, const Pose& ee_before, const Pose& ee_after);

  std::optional<size_t> held_object() const { return held_; }
  /// Remove the held object from the scene (successful delivery).
  bool deliver_held();
  /// Safety stop: actuation and object kinematics freeze.
  void freeze(bool on) { frozen_ = on; }
  bool frozen() const { return frozen_; }

  Rng& noise_rng() { return rng_; }
  const SimParams& params() const { return sim_; }

 private:
  struct ObjState {
    ObjectSpec spec;
    Vec3 center;
    bool fixture_engaged = false;
    double fixture_angle = 0.0;  // rad, accumulated about the fixture axis
    bool removed = false;
  };

  struct ToolElement {
    Vec3 lo, hi;  // box in TCP frame
    int finger = -1;  // 0 left / 1 right
    int cup = -1;     // 0 / 1
  };

  struct ContactRecord {
    size_t object;       // index, or SIZE_MAX for the table
    int element;
    int axis;            // TCP axis of minimum overlap (0..2), -1 for table
    double overlap;      // m
    double force;        // N, env-on-tool magnitude
    Vec3 normal_world;   // env-on-tool direction
    Vec3 point_world;
  };

  struct ContactSet {
    std::vector<ContactRecord> records;
    double max_penetration = 0.0;
    double finger_force[2] = {0.0, 0.0};  // closing-axis load per finger
    std::optional<size_t> finger_obj[2];
    PressureImage images[2];
  };

  std::vector<ToolElement> tool_elements(double width) const;
  ContactSet compute_contacts(const Pose& b_T_ee, double width) const;
  Wrench6 assemble_wrench(const Pose& b_T_ee, const ContactSet& cs) const;
  void resolve_pushing(double dt);
  bool box_overlaps_others(size_t idx, const Vec3& center) const;
  void refresh_cache();
  void drop_object(size_t idx);
  double cup_contact_force(double pen) const;
  Mat3 object_rotation(size_t idx) const;
  void attach(size_t idx, Attachment kind);

  SimParams sim_;
  std::map<GripperKind, GripperModel> gripper_models_;
  GripperModel gripper_;
  std::vector<ObjState> objects_;
  Rng rng_;

  Pose ee_;
  Pose prev_ee_;
  double time_ = 0.0;
  bool frozen_ = false;

  // finger actuation
  double width_ = 0.0;
  enum class FingerMode { Idle, Closing, Opening } finger_mode_ =
      FingerMode::Idle;
  double close_target_force_ = 0.0;
  double open_target_width_ = 0.0;

  // attachment
  std::optional<size_t> held_;
  Attachment attachment_ = Attachment::None;
  Vec3 grip_local_ = Vec3::Zero();   // object center in the EE frame
  Mat3 grip_rot_local_ = Mat3::Identity();
  Vec3 anchor_center_ = Vec3::Zero();
  Mat3 anchor_rot_ = Mat3::Identity();
  std::vector<double> rest_z_;  // spawn heights, for suspension detection
  double strain_force_ = 0.0;   // N, current anchor-spring load

  // caches refreshed each tick
  ContactSet cache_;
  Wrench6 wrench_cache_ = Wrench6::zero(kEEFrame);
  FingerPair finger_pair_;
};

}  // namespace graspforce
