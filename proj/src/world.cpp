#include "graspforce/world.hpp"

#include <algorithm>
#include <cmath>

#include "graspforce/scene.hpp"

namespace graspforce {

namespace {
constexpr size_t kTableId = static_cast<size_t>(-1);
constexpr double kRestEps = 1e-3;   // m, suspension detection
constexpr double kDimFloor = 1e-3;  // m, clamp for noisy dimensions

Vec3 any_perpendicular(const Vec3& n) {
  const Vec3 trial =
      std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  return n.cross(trial).normalized();
}

Vec3 rotation_vector(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}
}  // namespace

uint64_t Rng::next_u64() {
  // splitmix64
  state_ += 0x9E3779B97f4A7C15ull;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
  // Box-Muller, one value per call for a stable draw count.
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t Rng::mix(uint64_t a, uint64_t b) {
  Rng r(a ^ (b + 0x9E3779B97f4A7C15ull + (a << 6) + (a >> 2)));
  return r.next_u64();
}

void FixtureSpec::validate() const {
  if (kind == Kind::Rotary) {
    if (!(release_angle > 0.0) || release_angle > M_PI)
      throw std::invalid_argument(
          "FixtureSpec: rotary release_angle must be in (0, pi]");
    if (std::abs(axis.norm() - 1.0) > 1e-6)
      throw std::invalid_argument("FixtureSpec: axis must be unit length");
  }
}

void ObjectSpec::validate() const {
  if (!(mass > 0.0)) throw std::invalid_argument(name + ": mass must be > 0");
  if (!(true_dims.x() > 0.0) || !(true_dims.y() > 0.0) || !(height > 0.0))
    throw std::invalid_argument(name + ": dims and height must be > 0");
  if (std::abs(true_normal.norm() - 1.0) > 1e-6)
    throw std::invalid_argument(name + ": normal must be unit length");
  fixture.validate();
}

void NoiseModel::validate() const {
  if (sigma_x.minCoeff() < 0.0 || sigma_n < 0.0 || sigma_d.minCoeff() < 0.0)
    throw std::invalid_argument("NoiseModel: sigmas must be >= 0");
}

NoiseModel NoiseModel::scaled(double factor) const {
  if (factor < 0.0)
    throw std::invalid_argument("NoiseModel: scale must be >= 0");
  NoiseModel n = *this;
  n.sigma_x *= factor;
  n.sigma_n *= factor;
  n.sigma_d *= factor;
  return n;
}

char gripper_letter(GripperKind k) {
  switch (k) {
    case GripperKind::A: return 'A';
    case GripperKind::B: return 'B';
    case GripperKind::C: return 'C';
  }
  return '?';
}

GripperKind gripper_from_letter(char c) {
  switch (c) {
    case 'A': return GripperKind::A;
    case 'B': return GripperKind::B;
    case 'C': return GripperKind::C;
  }
  throw std::invalid_argument(std::string("unknown gripper '") + c + "'");
}

void GripperModel::validate() const {
  if (kind == GripperKind::C) {
    if (cup_count < 1 || cup_count > 2)
      throw std::invalid_argument("GripperModel: cup_count must be 1 or 2");
    if (!(cup_diameter > 0.0) || !(cup_height > 0.0))
      throw std::invalid_argument("GripperModel: cup geometry must be > 0");
    if (cup_count == 2 && !(cup_spacing > cup_diameter))
      throw std::invalid_argument(
          "GripperModel: cup_spacing must exceed cup_diameter");
    if (max_opening != 0.0 || finger_length != 0.0)
      throw std::invalid_argument(
          "GripperModel: finger fields must be zero for kind C");
  } else {
    if (!(max_opening > 0.0) || !(finger_length > 0.0) ||
        !(finger_thickness > 0.0) || !(finger_breadth > 0.0))
      throw std::invalid_argument(
          "GripperModel: finger geometry must be > 0 for kinds A/B");
    if (cup_count != 0)
      throw std::invalid_argument(
          "GripperModel: cup fields must be zero for kinds A/B");
    if (array_rows < 1 || array_cols < 1 || !(array_pitch > 0.0))
      throw std::invalid_argument("GripperModel: bad tactile array");
    if ((array_rows - 1) * array_pitch > finger_length + 1e-9)
      throw std::invalid_argument(
          "GripperModel: tactile array longer than the finger");
  }
  if (!(payload > 0.0))
    throw std::invalid_argument("GripperModel: payload must be > 0");
}

ObjectEstimate observe(const ObjectSpec& obj, const NoiseModel& noise,
                       Rng& rng) {
  obj.validate();
  noise.validate();
  const bool gaussian = noise.distribution == NoiseModel::Dist::Gaussian;
  auto draw = [&](double sigma) {
    return gaussian ? sigma * rng.gaussian()
                    : rng.uniform(-sigma * std::sqrt(3.0),
                                  sigma * std::sqrt(3.0));
  };

  ObjectEstimate est;
  for (int i = 0; i < 3; ++i)
    est.center[i] = obj.true_center[i] + draw(noise.sigma_x[i]);

  const double tilt = draw(noise.sigma_n);
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  const Vec3 e1 = any_perpendicular(obj.true_normal);
  const Vec3 e2 = obj.true_normal.cross(e1);
  const Vec3 tilt_axis = std::cos(phi) * e1 + std::sin(phi) * e2;
  est.normal = (so3_exp(tilt_axis * tilt) * obj.true_normal).normalized();

  for (int i = 0; i < 2; ++i)
    est.dims[i] = std::max(kDimFloor, obj.true_dims[i] + draw(noise.sigma_d[i]));
  return est;
}

World::World(const Scene& scene, uint64_t seed)
    : sim_(scene.sim),
      gripper_models_(scene.grippers),
      rng_(seed),
      ee_(Mat3::Identity(), Vec3(0, 0, 0.5), kBaseFrame, kEEFrame),
      prev_ee_(ee_) {
  if (gripper_models_.empty())
    throw std::invalid_argument("World: scene declares no grippers");
  for (const auto& [kind, model] : gripper_models_) model.validate();
  objects_.reserve(scene.objects.size());
  for (const auto& so : scene.objects) {
    so.spec.validate();
    ObjState st;
    st.spec = so.spec;
    st.center = so.spec.true_center;
    st.fixture_engaged = so.spec.fixture.kind != FixtureSpec::Kind::None;
    rest_z_.push_back(so.spec.true_center.z());
    objects_.push_back(std::move(st));
  }
  mount(gripper_models_.begin()->first);
}

void World::mount(GripperKind kind) {
  auto it = gripper_models_.find(kind);
  if (it == gripper_models_.end())
    throw std::invalid_argument("World: gripper not available in this scene");
  if (held_) {
    // tool change drops whatever was held
    drop_object(*held_);
    held_.reset();
    attachment_ = Attachment::None;
  }
  gripper_ = it->second;
  width_ = gripper_.kind == GripperKind::C ? 0.0 : gripper_.max_opening;
  finger_mode_ = FingerMode::Idle;
  refresh_cache();
}

void World::set_ee(const Pose& b_T_ee) {
  if (b_T_ee.from_frame() != kBaseFrame || b_T_ee.to_frame() != kEEFrame)
    throw FrameMismatch("World::set_ee expects a B->EE pose");
  ee_ = b_T_ee;
}

std::vector<World::ToolElement> World::tool_elements(double width) const {
  std::vector<ToolElement> els;
  const GripperModel& g = gripper_;
  if (g.kind == GripperKind::C) {
    for (int i = 0; i < g.cup_count; ++i) {
      const Vec3 off = cup_offset_tcp(i);
      const Vec3 half(g.cup_diameter / 2, g.cup_diameter / 2,
                      g.cup_height / 2);
      const Vec3 c = off + Vec3(0, 0, -g.cup_height / 2);
      ToolElement el{c - half, c + half, -1, i};
      els.push_back(el);
    }
  } else {
    const double w2 = width / 2;
    const double b2 = g.finger_breadth / 2;
    // left finger (0) on -x, right finger (1) on +x; tips at TCP z = 0
    els.push_back(ToolElement{Vec3(-w2 - g.finger_thickness, -b2,
                                   -g.finger_length),
                              Vec3(-w2, b2, 0.0), 0, -1});
    els.push_back(ToolElement{Vec3(w2, -b2, -g.finger_length),
                              Vec3(w2 + g.finger_thickness, b2, 0.0), 1, -1});
  }
  return els;
}

Vec3 World::cup_offset_tcp(int idx) const {
  if (gripper_.cup_count < 2) return Vec3::Zero();
  return Vec3(0.0, idx == 0 ? gripper_.cup_spacing / 2
                            : -gripper_.cup_spacing / 2, 0.0);
}

double World::cup_contact_force(double pen) const {
  const double soft = std::min(pen, sim_.bellows_travel);
  const double hard = std::max(0.0, pen - sim_.bellows_travel);
  return std::min(sim_.force_cap, sim_.bellows_stiffness * soft +
                                      sim_.contact_stiffness * hard);
}

World::ContactSet World::compute_contacts(const Pose& b_T_ee,
                                          double width) const {
  ContactSet cs;
  const GripperModel& g = gripper_;
  if (g.kind != GripperKind::C) {
    cs.images[0] = PressureImage(g.array_rows, g.array_cols, g.array_pitch);
    cs.images[1] = PressureImage(g.array_rows, g.array_cols, g.array_pitch);
  }

  const Pose tcp = compose(b_T_ee, g.tcp_offset);
  const Mat3& R = tcp.rotation();
  const Vec3& p = tcp.translation();
  const Mat3 Rt = R.transpose();

  const auto elements = tool_elements(width);
  for (size_t ei = 0; ei < elements.size(); ++ei) {
    const ToolElement& el = elements[ei];
    const Vec3 ec = 0.5 * (el.lo + el.hi);
    const Vec3 eh = 0.5 * (el.hi - el.lo);

    // table (z = 0 plane)
    {
      const Vec3 wc = p + R * ec;
      const double whz = R.row(2).cwiseAbs().dot(eh);
      const double pen = -(wc.z() - whz);
      if (pen > 0.0) {
        const double f = el.cup >= 0
                             ? cup_contact_force(pen)
                             : std::min(sim_.force_cap,
                                        sim_.contact_stiffness * pen);
        ContactRecord rec;
        rec.object = kTableId;
        rec.element = static_cast<int>(ei);
        rec.axis = -1;
        rec.overlap = pen;
        rec.force = f;
        rec.normal_world = Vec3::UnitZ();
        rec.point_world = Vec3(wc.x(), wc.y(), 0.0);
        cs.records.push_back(rec);
        cs.max_penetration = std::max(cs.max_penetration, pen);
      }
    }

    for (size_t oi = 0; oi < objects_.size(); ++oi) {
      const ObjState& ob = objects_[oi];
      if (ob.removed) continue;
      const Vec3 half(ob.spec.true_dims.x() / 2, ob.spec.true_dims.y() / 2,
                      ob.spec.height / 2);
      // object hull in the TCP frame (conservative box of the rotated body)
      const Mat3 rel = Rt * object_rotation(oi);
      const Vec3 oc_t = Rt * (ob.center - p);
      Vec3 hh;
      for (int i = 0; i < 3; ++i) hh[i] = rel.row(i).cwiseAbs().dot(half);

      Vec3 lo, hi;
      bool overlap = true;
      for (int i = 0; i < 3; ++i) {
        lo[i] = std::max(el.lo[i], oc_t[i] - hh[i]);
        hi[i] = std::min(el.hi[i], oc_t[i] + hh[i]);
        if (!(hi[i] > lo[i])) {
          overlap = false;
          break;
        }
      }
      if (!overlap) continue;

      const Vec3 ov = hi - lo;
      int axis = 0;
      if (ov[1] < ov[axis]) axis = 1;
      if (ov[2] < ov[axis]) axis = 2;
      const double sign = ec[axis] > oc_t[axis] ? 1.0 : -1.0;

      double f;
      if (el.cup >= 0 && axis == 2) {
        f = cup_contact_force(ov[axis]);
      } else {
        f = std::min(sim_.force_cap, sim_.contact_stiffness * ov[axis]);
      }

      ContactRecord rec;
      rec.object = oi;
      rec.element = static_cast<int>(ei);
      rec.axis = axis;
      rec.overlap = ov[axis];
      rec.force = f;
      rec.normal_world = sign * R.col(axis);
      rec.point_world = p + R * (0.5 * (lo + hi));
      cs.records.push_back(rec);
      cs.max_penetration = std::max(cs.max_penetration, ov[axis]);

      // tactile patch: closing-axis contacts on a finger inner face
      if (el.finger >= 0 && axis == 0 && g.kind != GripperKind::C) {
        const int side = el.finger;
        PressureImage& img = cs.images[side];
        const double l_arr = img.array_length();
        std::vector<std::pair<int, int>> active;
        for (int r = 0; r < img.rows; ++r) {
          const double zc = -(img.rows - 1 - r) * img.cell_pitch;
          if (zc < lo[2] - img.cell_pitch / 2 ||
              zc > hi[2] + img.cell_pitch / 2)
            continue;
          for (int c = 0; c < img.cols; ++c) {
            const double yc = (c - (img.cols - 1) / 2.0) * img.cell_pitch;
            if (yc < lo[1] - img.cell_pitch / 2 ||
                yc > hi[1] + img.cell_pitch / 2)
              continue;
            active.emplace_back(r, c);
          }
        }
        if (!active.empty()) {
          const double share = f / active.size();
          for (const auto& [r, c] : active) img.pressures(r, c) += share;
        } else {
          // patch smaller than a cell: nearest cell takes the load
          const double zm = 0.5 * (lo[2] + hi[2]);
          const double ym = 0.5 * (lo[1] + hi[1]);
          const int rb = static_cast<int>(
              std::clamp(std::round((zm + l_arr) / img.cell_pitch), 0.0,
                         double(img.rows - 1)));
          const int cb = static_cast<int>(
              std::clamp(std::round(ym / img.cell_pitch + (img.cols - 1) / 2.0),
                         0.0, double(img.cols - 1)));
          img.pressures(rb, cb) += f;
        }
      }
    }
  }

  // per-finger closing-axis load and the dominant body on each finger
  double best[2] = {0.0, 0.0};
  for (const auto& rec : cs.records) {
    if (rec.object == kTableId || rec.axis != 0) continue;
    const int fi = elements[rec.element].finger;
    if (fi < 0) continue;
    cs.finger_force[fi] += rec.force;
    if (rec.force > best[fi]) {
      best[fi] = rec.force;
      cs.finger_obj[fi] = rec.object;
    }
  }
  return cs;
}

Wrench6 World::assemble_wrench(const Pose& b_T_ee, const ContactSet& cs) const {
  Vec3 f_env_on_tool = Vec3::Zero();
  Vec3 m_env_on_tool = Vec3::Zero();
  for (const auto& rec : cs.records) {
    const Vec3 f = rec.force * rec.normal_world;
    f_env_on_tool += f;
    m_env_on_tool += (rec.point_world - b_T_ee.translation()).cross(f);
  }
  const Mat3 Rt = b_T_ee.rotation().transpose();
  return Wrench6{Rt * (-f_env_on_tool), Rt * (-m_env_on_tool), kEEFrame};
}

void World::resolve_pushing(double dt) {
  (void)dt;
  if (gripper_.kind == GripperKind::C) return;
  const Pose t = tcp();
  const Mat3& R = t.rotation();
  const Vec3& p = t.translation();
  const Mat3 Rt = R.transpose();
  const double w2 = width_ / 2;

  for (size_t oi = 0; oi < objects_.size(); ++oi) {
    ObjState& ob = objects_[oi];
    if (ob.removed || ob.fixture_engaged) continue;
    if (held_ && *held_ == oi) continue;

    const Vec3 half(ob.spec.true_dims.x() / 2, ob.spec.true_dims.y() / 2,
                    ob.spec.height / 2);
    const Mat3 rel = Rt * object_rotation(oi);
    const Vec3 oc_t = Rt * (ob.center - p);
    Vec3 hh;
    for (int i = 0; i < 3; ++i) hh[i] = rel.row(i).cwiseAbs().dot(half);

    // finger overlap requires y/z overlap with the slabs
    const double b2 = gripper_.finger_breadth / 2;
    const bool y_ov = oc_t[1] + hh[1] > -b2 && oc_t[1] - hh[1] < b2;
    const bool z_ov =
        oc_t[2] + hh[2] > -gripper_.finger_length && oc_t[2] - hh[2] < 0.0;
    if (!y_ov || !z_ov) continue;

    const double a = oc_t[0] - hh[0];
    const double b = oc_t[0] + hh[0];
    double delta = 0.0;
    const bool left_in = a < -w2 && b > -w2 - gripper_.finger_thickness;
    const bool right_in = b > w2 && a < w2 + gripper_.finger_thickness;
    if (left_in && right_in) {
      delta = -0.5 * (a + b);  // squeeze: center between the faces
    } else if (left_in) {
      delta = -w2 - a;
    } else if (right_in) {
      delta = w2 - b;
    } else {
      continue;
    }

    // push direction: closing axis projected on the table plane
    Vec3 dir = R.col(0);
    dir.z() = 0.0;
    if (dir.norm() < 1e-9) continue;
    dir.normalize();
    const double along = std::max(R.col(0).dot(dir), 0.5);
    const Vec3 candidate = ob.center + (delta / along) * dir;
    if (!box_overlaps_others(oi, candidate)) ob.center = candidate;
  }
}

Mat3 World::object_rotation(size_t idx) const {
  const ObjState& ob = objects_[idx];
  if (ob.spec.fixture.kind == FixtureSpec::Kind::Rotary &&
      std::abs(ob.fixture_angle) > 0.0)
    return so3_exp(ob.spec.fixture.axis * ob.fixture_angle);
  return Mat3::Identity();
}

bool World::box_overlaps_others(size_t idx, const Vec3& center) const {
  const ObjState& me = objects_[idx];
  const Vec3 half_raw(me.spec.true_dims.x() / 2, me.spec.true_dims.y() / 2,
                      me.spec.height / 2);
  const Mat3 rot = object_rotation(idx);
  Vec3 half;
  for (int i = 0; i < 3; ++i) half[i] = rot.row(i).cwiseAbs().dot(half_raw);

  for (size_t oi = 0; oi < objects_.size(); ++oi) {
    if (oi == idx) continue;
    const ObjState& ob = objects_[oi];
    if (ob.removed) continue;
    const Vec3 oh_raw(ob.spec.true_dims.x() / 2, ob.spec.true_dims.y() / 2,
                      ob.spec.height / 2);
    const Mat3 orot = object_rotation(oi);
    Vec3 oh;
    for (int i = 0; i < 3; ++i) oh[i] = orot.row(i).cwiseAbs().dot(oh_raw);
    bool ov = true;
    for (int i = 0; i < 3; ++i) {
      if (std::abs(center[i] - ob.center[i]) >= half[i] + oh[i]) {
        ov = false;
        break;
      }
    }
    if (ov) return true;
  }
  return false;
}

void World::refresh_cache() {
  cache_ = compute_contacts(ee_, width_);
  Wrench6 w = assemble_wrench(ee_, cache_);

  // attachment terms: anchor springs while a fixture holds the object,
  // weight while the object hangs free
  if (held_) {
    const ObjState& ob = objects_[*held_];
    const Vec3 p_follow = ee_.apply(grip_local_);
    if (ob.fixture_engaged) {
      const Vec3 d = p_follow - anchor_center_;
      const double r = d.norm();
      Vec3 f_world = Vec3::Zero();
      if (r > sim_.fixture_slack) {
        f_world = sim_.fixture_stiffness * (r - sim_.fixture_slack) *
                  (d / r);
      }
      const Mat3 r_follow = ee_.rotation() * grip_rot_local_;
      Vec3 err = rotation_vector(r_follow * anchor_rot_.transpose());
      double slack = 0.0;
      if (ob.spec.fixture.kind == FixtureSpec::Kind::Rotary) {
        const Vec3& ax = ob.spec.fixture.axis;
        err -= err.dot(ax) * ax;  // on-axis rotation is a free DOF
        slack = sim_.fixture_rot_slack;
      }
      Vec3 m_world = Vec3::Zero();
      const double e = err.norm();
      if (e > slack)
        m_world = sim_.fixture_rot_stiffness * (e - slack) * (err / e);

      strain_force_ = f_world.norm();
      const Mat3 Rt = ee_.rotation().transpose();
      w.force += Rt * f_world;
      w.torque += Rt * (m_world +
                        (p_follow - ee_.translation()).cross(f_world));
    } else {
      strain_force_ = 0.0;
      if (ob.center.z() > rest_z_[*held_] + kRestEps) {
        const Vec3 f_world(0, 0, ob.spec.mass * sim_.gravity);
        const Mat3 Rt = ee_.rotation().transpose();
        w.force += Rt * f_world;
        w.torque += Rt * (ob.center - ee_.translation()).cross(f_world);
      }
    }
  } else {
    strain_force_ = 0.0;
  }

  wrench_cache_ = w;
  finger_pair_.left = cache_.images[0];
  finger_pair_.right = cache_.images[1];
  finger_pair_.opening_width = width_;
}

void World::tick(double dt) {
  if (frozen_) {  // safety stop: robot and tool actuation halted
    time_ += dt;
    prev_ee_ = ee_;
    return;
  }

  if (finger_mode_ == FingerMode::Closing) {
    width_ = std::max(0.0, width_ - sim_.finger_speed * dt);
  } else if (finger_mode_ == FingerMode::Opening) {
    width_ = std::min(gripper_.max_opening, width_ + sim_.finger_speed * dt);
    if (width_ >= open_target_width_ - 1e-9 ||
        width_ >= gripper_.max_opening - 1e-9)
      finger_mode_ = FingerMode::Idle;
  }

  resolve_pushing(dt);

  if (held_) {
    ObjState& ob = objects_[*held_];
    if (ob.fixture_engaged) {
      fixture_update(*held_, prev_ee_, ee_);
    }
    if (held_ && !objects_[*held_].fixture_engaged) {
      objects_[*held_].center = ee_.apply(grip_local_);
    }
  }

  refresh_cache();

  // attachment by closing: both fingers loaded on the same object
  if (finger_mode_ == FingerMode::Closing) {
    const bool both = cache_.finger_force[0] >= close_target_force_ &&
                      cache_.finger_force[1] >= close_target_force_;
    if (both && cache_.finger_obj[0] && cache_.finger_obj[1] &&
        *cache_.finger_obj[0] == *cache_.finger_obj[1]) {
      attach(*cache_.finger_obj[0], Attachment::Fingers);
      finger_mode_ = FingerMode::Idle;
    } else if (width_ <= 0.0) {
      finger_mode_ = FingerMode::Idle;  // fingers met: nothing grasped
    }
  }

  // grasp strain and payload limits
  if (held_) {
    const ObjState& ob = objects_[*held_];
    const bool suspended =
        !ob.fixture_engaged && ob.center.z() > rest_z_[*held_] + kRestEps;
    if (strain_force_ > sim_.grip_slip_force ||
        (suspended && ob.spec.mass > gripper_.payload)) {
      held_.reset();
      attachment_ = Attachment::None;
      refresh_cache();
    }
  }

  prev_ee_ = ee_;
  time_ += dt;
}

void World::attach(size_t idx, Attachment kind) {
  held_ = idx;
  attachment_ = kind;
  grip_local_ = ee_.rotation().transpose() *
                (objects_[idx].center - ee_.translation());
  grip_rot_local_ = ee_.rotation().transpose() * object_rotation(idx);
  anchor_center_ = objects_[idx].center;
  anchor_rot_ = object_rotation(idx);
}

void World::fixture_update(size_t idx, const Pose& ee_before,
                           const Pose& ee_after) {
  ObjState& ob = objects_[idx];
  if (!ob.fixture_engaged) return;
  if (ob.spec.fixture.kind != FixtureSpec::Kind::Rotary) return;  // rigid: never
  if (!held_ || *held_ != idx) return;  // rotation transmits through the grasp

  const Mat3 dr = ee_after.rotation() * ee_before.rotation().transpose();
  const double delta = rotation_vector(dr).dot(ob.spec.fixture.axis);
  ob.fixture_angle += delta;
  if (std::abs(ob.fixture_angle) >= ob.spec.fixture.release_angle) {
    ob.fixture_engaged = false;
    // the object starts following the grasp from its anchored pose
    grip_local_ = ee_after.rotation().transpose() *
                  (ob.center - ee_after.translation());
    grip_rot_local_ = ee_after.rotation().transpose() * object_rotation(idx);
    anchor_center_ = ob.center;
    anchor_rot_ = object_rotation(idx);
  }
}

void World::begin_close(double target_force) {
  if (gripper_.kind == GripperKind::C)
    throw std::logic_error("begin_close: not a finger gripper");
  if (!(target_force > 0.0))
    throw std::invalid_argument("begin_close: target force must be > 0");
  if (frozen_) return;
  close_target_force_ = target_force;
  finger_mode_ = FingerMode::Closing;
}

void World::begin_open(double target_width) {
  if (gripper_.kind == GripperKind::C)
    throw std::logic_error("begin_open: not a finger gripper");
  if (frozen_) return;
  if (held_ && attachment_ == Attachment::Fingers) {
    const size_t idx = *held_;
    held_.reset();
    attachment_ = Attachment::None;
    drop_object(idx);
  }
  open_target_width_ = std::min(target_width, gripper_.max_opening);
  finger_mode_ = width_ < open_target_width_ ? FingerMode::Opening
                                             : FingerMode::Idle;
}

bool World::actuation_done() const { return finger_mode_ == FingerMode::Idle; }

ContactState World::close_fingers(double target_force) {
  begin_close(target_force);
  const int budget =
      static_cast<int>(gripper_.max_opening / (sim_.finger_speed * sim_.dt)) +
      100;
  for (int i = 0; i < budget && !actuation_done(); ++i) tick(sim_.dt);
  return contact_state();
}

ContactState World::open_fingers(double target_width) {
  begin_open(target_width);
  const int budget =
      static_cast<int>(gripper_.max_opening / (sim_.finger_speed * sim_.dt)) +
      100;
  for (int i = 0; i < budget && !actuation_done(); ++i) tick(sim_.dt);
  return contact_state();
}

double World::finger_force(int side) const {
  return cache_.finger_force[side];
}

ContactState World::vacuum(bool on, const CupSelection& cups) {
  if (gripper_.kind != GripperKind::C)
    throw std::logic_error("vacuum: not a suction gripper");
  if (!on) {
    if (held_ && attachment_ == Attachment::Vacuum) {
      const size_t idx = *held_;
      held_.reset();
      attachment_ = Attachment::None;
      drop_object(idx);
    }
    refresh_cache();
    return contact_state();
  }
  if (frozen_) return contact_state();

  const Pose t = tcp();
  const double tilt =
      std::acos(std::clamp(-t.rotation()(2, 2), -1.0, 1.0));
  std::optional<size_t> target;
  bool all_sealed = cups.count() > 0 && tilt <= sim_.seal_tilt_max;
  for (int i = 0; i < 2 && all_sealed; ++i) {
    if (!cups.use[i]) continue;
    if (i >= gripper_.cup_count) {
      all_sealed = false;
      break;
    }
    const Vec3 rim = t.apply(cup_offset_tcp(i));
    const double r_cup = gripper_.cup_diameter / 2;
    bool sealed = false;
    for (size_t oi = 0; oi < objects_.size(); ++oi) {
      const ObjState& ob = objects_[oi];
      if (ob.removed) continue;
      const double top = ob.center.z() + ob.spec.height / 2;
      if (rim.z() > top + sim_.seal_gap || rim.z() < top - 0.05) continue;
      if (std::abs(rim.x() - ob.center.x()) >
              ob.spec.true_dims.x() / 2 - r_cup ||
          std::abs(rim.y() - ob.center.y()) >
              ob.spec.true_dims.y() / 2 - r_cup)
        continue;
      double p_attach;
      switch (ob.spec.surface) {
        case SurfaceKind::Flat: p_attach = sim_.leak_flat; break;
        case SurfaceKind::Laminated: p_attach = sim_.leak_laminated; break;
        case SurfaceKind::Curved: p_attach = sim_.leak_curved; break;
      }
      bool ok = true;
      if (p_attach < 1.0) ok = rng_.uniform() < p_attach;
      if (!ok) continue;
      if (target && *target != oi) {
        ok = false;  // cups must share one body
        continue;
      }
      target = oi;
      sealed = true;
      break;
    }
    all_sealed = all_sealed && sealed;
  }

  if (all_sealed && target) attach(*target, Attachment::Vacuum);
  refresh_cache();
  return contact_state();
}

ContactState World::contact_query(const Pose& b_T_ee) const {
  const ContactSet cs = compute_contacts(b_T_ee, width_);
  ContactState st;
  st.touching = !cs.records.empty();
  st.penetration = cs.max_penetration;
  st.wrench = assemble_wrench(b_T_ee, cs);
  st.held_object = held_;
  st.attachment = attachment_;
  return st;
}

ContactState World::contact_state() const {
  ContactState st;
  st.touching = !cache_.records.empty();
  st.penetration = cache_.max_penetration;
  st.wrench = wrench_cache_;
  st.held_object = held_;
  st.attachment = attachment_;
  return st;
}

Wrench6 World::tool_wrench() const { return wrench_cache_; }

Wrench6 World::sensed_wrench() {
  Wrench6 w = wrench_cache_;
  for (int i = 0; i < 3; ++i) {
    w.force[i] += sim_.sensor_sigma_force * rng_.gaussian();
    w.torque[i] += sim_.sensor_sigma_torque * rng_.gaussian();
  }
  return w;
}

bool World::lift_weight_check(double expected_min_mass) {
  const Wrench6 w = sensed_wrench();
  const double f_up = (ee_.rotation() * w.force).z();
  return f_up >= expected_min_mass * sim_.gravity - sim_.weight_tol;
}

bool World::deliver_held() {
  if (!held_) return false;
  objects_[*held_].removed = true;
  held_.reset();
  attachment_ = Attachment::None;
  refresh_cache();
  return true;
}

void World::drop_object(size_t idx) {
  ObjState& ob = objects_[idx];
  if (ob.fixture_engaged) return;  // still fixtured: stays put
  ob.center.z() = ob.spec.height / 2;
}

}  // namespace graspforce
