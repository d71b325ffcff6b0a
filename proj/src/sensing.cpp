#include "graspforce/sensing.hpp"

#include <cmath>

#include "graspforce/world.hpp"

namespace graspforce {

void PressureImage::validate() const {
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("PressureImage: need at least 1x1 cells");
  if (pressures.rows() != rows || pressures.cols() != cols)
    throw std::invalid_argument("PressureImage: matrix shape mismatch");
  if (!(cell_pitch > 0.0))
    throw std::invalid_argument("PressureImage: cell_pitch must be > 0");
  if ((pressures.array() < 0.0).any())
    throw std::invalid_argument("PressureImage: negative cell pressure");
}

std::optional<CoP> compute_cop(const PressureImage& img) {
  img.validate();
  const double total = img.total();
  if (!(total > 0.0)) return std::nullopt;

  double along = 0.0;
  double across = 0.0;
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const double p = img.pressures(r, c);
      if (p <= 0.0) continue;
      along += p * (r * img.cell_pitch);
      across += p * (c * img.cell_pitch);
    }
  }
  along /= total;
  across /= total;

  CoP cop;
  cop.position_in_finger = Vec2(along, across);
  cop.total_force = total;
  cop.z_offset_tcp = img.array_length() - along;
  cop.y_offset_tcp = across - (img.cols - 1) * img.cell_pitch / 2.0;
  return cop;
}

Pose cop_frame(double z_tcp_ee, const CoP& cop) {
  const double z = z_tcp_ee - cop.z_offset_tcp;
  return Pose(Mat3::Identity(), Vec3(0.0, cop.y_offset_tcp, z), kEEFrame,
              kCoPFrame);
}

double finger_force_difference(const FingerPair& fp) {
  return std::abs(fp.left.total() - fp.right.total());
}

bool cop_at_tip(const CoP& cop, double tip_band) {
  return cop.z_offset_tcp <= tip_band;
}

Wrench6 ft_read(World& world, const Pose& ee_pose) {
  // The world keeps its wrench cache for the commanded EE pose; readings at
  // another pose are contact-only queries plus noise.
  Wrench6 w;
  if ((ee_pose.translation() - world.ee().translation()).norm() < 1e-12 &&
      (ee_pose.rotation() - world.ee().rotation()).norm() < 1e-12) {
    w = world.sensed_wrench();
  } else {
    w = world.contact_query(ee_pose).wrench;
    Rng& rng = world.noise_rng();
    for (int i = 0; i < 3; ++i) {
      w.force[i] += world.params().sensor_sigma_force * rng.gaussian();
      w.torque[i] += world.params().sensor_sigma_torque * rng.gaussian();
    }
  }
  return w;
}

}  // namespace graspforce
