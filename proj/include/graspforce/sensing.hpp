#pragma once

#include <optional>

#include <Eigen/Dense>

#include "graspforce/geometry.hpp"

namespace graspforce {

class World;

/// Pressure distribution on one finger's tactile array. Cell (r, c) has its
/// center at (r * cell_pitch, c * cell_pitch) in array coordinates; the row
/// axis runs along the finger with the last row at the fingertip.
struct PressureImage {
  int rows = 8;
  int cols = 4;
  double cell_pitch = 0.004;  // m
  Eigen::MatrixXd pressures;  // rows x cols, N per cell, >= 0

  PressureImage() : pressures(Eigen::MatrixXd::Zero(8, 4)) {}
  PressureImage(int r, int c, double pitch)
      : rows(r), cols(c), cell_pitch(pitch),
        pressures(Eigen::MatrixXd::Zero(r, c)) {}

  void validate() const;
  double total() const { return pressures.sum(); }
  double array_length() const { return (rows - 1) * cell_pitch; }
};

/// Center of pressure of one array.
struct CoP {
  Vec2 position_in_finger = Vec2::Zero();  // (along, across) array coords, m
  double total_force = 0.0;                // N
  double z_offset_tcp = 0.0;  // distance from the fingertip along the finger
  double y_offset_tcp = 0.0;  // across offset from the array centerline
};

/// Both finger arrays plus the current opening width.
struct FingerPair {
  PressureImage left;
  PressureImage right;
  double opening_width = 0.0;  // m
};

/// Pressure-weighted centroid of the active cells. Returns nullopt when no
/// cell carries load.
std::optional<CoP> compute_cop(const PressureImage& img);

/// Frame of the current rotation point: a pure translation from the EE along
/// its z-axis by z_tcp_ee - cop.z_offset_tcp, plus the in-plane CoP offset.
/// Rebuilt every cycle while the contact moves.
Pose cop_frame(double z_tcp_ee, const CoP& cop);

/// |sum(left) - sum(right)| of the finger loads.
double finger_force_difference(const FingerPair& fp);

/// True when the CoP sits within tip_band of the fingertip.
bool cop_at_tip(const CoP& cop, double tip_band);

/// Simulated wrist sensor: the wrench the tool currently exerts on the
/// environment, expressed in the EE frame, with zero-mean sensor noise from
/// the world's noise stream.
Wrench6 ft_read(World& world, const Pose& ee_pose);

}  // namespace graspforce
