#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace graspforce {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

/// Thrown when frame labels of an operation's arguments disagree.
struct FrameMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when the approach and orientation vectors are (anti)parallel.
struct DegenerateOrientation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Canonical frame labels used throughout the library.
inline constexpr const char* kBaseFrame = "B";
inline constexpr const char* kEEFrame = "EE";
inline constexpr const char* kTCPFrame = "TCP";
inline constexpr const char* kCoPFrame = "CoP";

/// Skew-symmetric matrix such that skew(a) * b == a x b.
Mat3 skew(const Vec3& a);

/// Rotation exponential exp([w]x) via axis-angle (Rodrigues).
Mat3 so3_exp(const Vec3& w);

/// Rigid transform between two labeled frames.
///
/// A Pose with from_frame "B" and to_frame "EE" maps coordinates expressed
/// in {EE} into {B}:  x_B = R * x_EE + p.  Rotation validity (orthonormal,
/// det +1, tolerance 1e-9) is checked at construction and never silently
/// repaired.
class Pose {
 public:
  /// Identity transform between two equal (or explicitly given) frames.
  Pose() : Pose(Mat3::Identity(), Vec3::Zero(), kBaseFrame, kBaseFrame) {}

  Pose(const Mat3& rotation, const Vec3& translation, std::string from_frame,
       std::string to_frame);

  static Pose identity(const std::string& frame) {
    return Pose(Mat3::Identity(), Vec3::Zero(), frame, frame);
  }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  const std::string& from_frame() const { return from_frame_; }
  const std::string& to_frame() const { return to_frame_; }

  /// Map a point expressed in to_frame into from_frame.
  Vec3 apply(const Vec3& x) const { return rotation_ * x + translation_; }

  /// Inverse transform; frame labels swap.
  Pose inverse() const;

  /// Same transform, new labels. Used when a pose is reinterpreted at a
  /// module boundary (e.g. a TCP-relative offset reused as a CoP frame).
  Pose relabeled(std::string from_frame, std::string to_frame) const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
  std::string from_frame_;
  std::string to_frame_;
};

/// Spatial velocity, stacked [angular; linear], tagged with the frame it is
/// expressed in.
struct Twist6 {
  Vec3 angular = Vec3::Zero();  // rad/s
  Vec3 linear = Vec3::Zero();   // m/s
  std::string frame = kBaseFrame;

  Vec6 stacked() const {
    Vec6 v;
    v << angular, linear;
    return v;
  }
  static Twist6 from_stacked(const Vec6& v, std::string frame) {
    return Twist6{v.head<3>(), v.tail<3>(), std::move(frame)};
  }
  static Twist6 zero(std::string frame) {
    return Twist6{Vec3::Zero(), Vec3::Zero(), std::move(frame)};
  }
  bool finite() const {
    return angular.allFinite() && linear.allFinite();
  }
};

/// Force/torque pair, stacked [torque; force] so that <twist, wrench> is the
/// mechanical power, tagged with its frame.
struct Wrench6 {
  Vec3 force = Vec3::Zero();   // N
  Vec3 torque = Vec3::Zero();  // N*m
  std::string frame = kEEFrame;

  Vec6 stacked() const {
    Vec6 w;
    w << torque, force;
    return w;
  }
  static Wrench6 from_stacked(const Vec6& w, std::string frame) {
    return Wrench6{w.tail<3>(), w.head<3>(), std::move(frame)};
  }
  static Wrench6 zero(std::string frame) {
    return Wrench6{Vec3::Zero(), Vec3::Zero(), std::move(frame)};
  }
  bool finite() const { return force.allFinite() && torque.allFinite(); }
};

/// Mechanical power of a twist/wrench pair expressed in the same frame.
double power(const Twist6& v, const Wrench6& w);

/// Noisy object data as delivered by the vision channel: center position,
/// surface normal and the two planar dimensions.
struct ObjectEstimate {
  Vec3 center = Vec3::Zero();       // m
  Vec3 normal = Vec3::UnitZ();      // unit
  Vec2 dims = Vec2::Constant(0.1);  // m

  void validate() const;
};

/// Chain two transforms; requires a.to_frame == b.from_frame.
Pose compose(const Pose& a, const Pose& b);

/// Build a rotation from an approach vector (tool z-axis) and an orientation
/// vector. Columns are [n o a] with n = normalize(o_hat x a_hat), a = a_hat,
/// o = a x n; the third column therefore equals a_hat exactly.
Mat3 rotation_from_approach_orientation(const Vec3& a_hat, const Vec3& o_hat);

/// Desired tool-tip pose for grasping an estimated object: translation at the
/// estimated center, approach opposite to the estimated normal, orientation
/// vector along the table axis of the longer planar dimension (ties go to x).
Pose desired_tcp_pose(const ObjectEstimate& est);

/// Goal pose shifted by d_safety along the given normal; rotation unchanged.
Pose pre_pose(const Pose& goal, const Vec3& normal, double d_safety);

/// 6x6 adjoint of a transform T = (R, p):
///   [ R        0 ]
///   [ [p]x R   R ]
Mat6 adjoint(const Pose& T);

/// Map a twist expressed in T.to_frame into T.from_frame.
Twist6 transform_twist(const Pose& T, const Twist6& v);

/// Map a wrench expressed in T.to_frame into T.from_frame. Uses the
/// transposed adjoint of the inverse direction so that power is invariant
/// under a simultaneous frame change of twist and wrench.
Wrench6 transform_wrench(const Pose& T, const Wrench6& w);

}  // namespace graspforce
