#include "graspforce/geometry.hpp"

#include <cmath>

namespace graspforce {

namespace {
constexpr double kRotationTol = 1e-9;
constexpr double kParallelTol = 1e-6;
}  // namespace

Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0, -a.z(), a.y(),  //
      a.z(), 0, -a.x(),   //
      -a.y(), a.x(), 0;
  return s;
}

Mat3 so3_exp(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) return Mat3::Identity();
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

Pose::Pose(const Mat3& rotation, const Vec3& translation,
           std::string from_frame, std::string to_frame)
    : rotation_(rotation),
      translation_(translation),
      from_frame_(std::move(from_frame)),
      to_frame_(std::move(to_frame)) {
  if (from_frame_.empty() || to_frame_.empty())
    throw FrameMismatch("Pose: frame labels must be non-empty");
  const double ortho =
      (rotation_.transpose() * rotation_ - Mat3::Identity()).norm();
  if (!(ortho < kRotationTol))
    throw std::invalid_argument("Pose: rotation not orthonormal (residual " +
                                std::to_string(ortho) + ")");
  if (!(std::abs(rotation_.determinant() - 1.0) < kRotationTol))
    throw std::invalid_argument("Pose: rotation determinant != +1");
  if (!translation_.allFinite())
    throw std::invalid_argument("Pose: non-finite translation");
}

Pose Pose::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return Pose(rt, -(rt * translation_), to_frame_, from_frame_);
}

Pose Pose::relabeled(std::string from_frame, std::string to_frame) const {
  return Pose(rotation_, translation_, std::move(from_frame),
              std::move(to_frame));
}

double power(const Twist6& v, const Wrench6& w) {
  if (v.frame != w.frame)
    throw FrameMismatch("power: twist in '" + v.frame + "', wrench in '" +
                        w.frame + "'");
  return v.angular.dot(w.torque) + v.linear.dot(w.force);
}

void ObjectEstimate::validate() const {
  if (!center.allFinite() || !normal.allFinite() || !dims.allFinite())
    throw std::invalid_argument("ObjectEstimate: non-finite field");
  if (std::abs(normal.norm() - 1.0) > kRotationTol)
    throw std::invalid_argument("ObjectEstimate: normal not unit length");
  if (!(dims.x() > 0.0) || !(dims.y() > 0.0))
    throw std::invalid_argument("ObjectEstimate: dims must be positive");
}

Pose compose(const Pose& a, const Pose& b) {
  if (a.to_frame() != b.from_frame())
    throw FrameMismatch("compose: '" + a.to_frame() + "' vs '" +
                        b.from_frame() + "'");
  return Pose(a.rotation() * b.rotation(),
              a.rotation() * b.translation() + a.translation(), a.from_frame(),
              b.to_frame());
}

Mat3 rotation_from_approach_orientation(const Vec3& a_hat, const Vec3& o_hat) {
  if (std::abs(a_hat.norm() - 1.0) > kParallelTol ||
      std::abs(o_hat.norm() - 1.0) > kParallelTol)
    throw std::invalid_argument(
        "rotation_from_approach_orientation: inputs must be unit vectors");
  if (std::abs(a_hat.dot(o_hat)) >= 1.0 - kParallelTol)
    throw DegenerateOrientation(
        "rotation_from_approach_orientation: approach and orientation "
        "vectors are (anti)parallel");
  const Vec3 n = o_hat.cross(a_hat).normalized();
  const Vec3 o = a_hat.cross(n);
  Mat3 r;
  r.col(0) = n;
  r.col(1) = o;
  r.col(2) = a_hat;
  return r;
}

Pose desired_tcp_pose(const ObjectEstimate& est) {
  est.validate();
  const Vec3 approach = -est.normal;
  // Grasp across the shorter planar span: orientation vector along the axis
  // of the longer dimension; ties break toward x.
  const Vec3 orient =
      est.dims.x() >= est.dims.y() ? Vec3::UnitX() : Vec3::UnitY();
  const Mat3 r = rotation_from_approach_orientation(approach, orient);
  return Pose(r, est.center, kBaseFrame, kTCPFrame);
}

Pose pre_pose(const Pose& goal, const Vec3& normal, double d_safety) {
  if (d_safety < 0.0)
    throw std::invalid_argument("pre_pose: d_safety must be >= 0");
  return Pose(goal.rotation(), goal.translation() + d_safety * normal,
              goal.from_frame(), goal.to_frame());
}

Mat6 adjoint(const Pose& T) {
  Mat6 ad = Mat6::Zero();
  ad.topLeftCorner<3, 3>() = T.rotation();
  ad.bottomRightCorner<3, 3>() = T.rotation();
  ad.bottomLeftCorner<3, 3>() = skew(T.translation()) * T.rotation();
  return ad;
}

Twist6 transform_twist(const Pose& T, const Twist6& v) {
  if (v.frame != T.to_frame())
    throw FrameMismatch("transform_twist: twist in '" + v.frame +
                        "', transform maps from '" + T.to_frame() + "'");
  const Vec3 w = T.rotation() * v.angular;
  const Vec3 lin =
      T.translation().cross(w) + T.rotation() * v.linear;
  return Twist6{w, lin, T.from_frame()};
}

Wrench6 transform_wrench(const Pose& T, const Wrench6& w) {
  if (w.frame != T.to_frame())
    throw FrameMismatch("transform_wrench: wrench in '" + w.frame +
                        "', transform maps from '" + T.to_frame() + "'");
  const Vec3 f = T.rotation() * w.force;
  const Vec3 m = T.rotation() * w.torque + T.translation().cross(f);
  return Wrench6{f, m, T.from_frame()};
}

}  // namespace graspforce
