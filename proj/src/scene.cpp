#include "graspforce/scene.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace graspforce {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

const json& member(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required field");
  return *it;
}

double get_num(const json& j, const std::string& path, const char* key) {
  const json& v = member(j, path, key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

double opt_num(const json& j, const std::string& path, const char* key,
               double dflt) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

int opt_int(const json& j, const std::string& path, const char* key,
            int dflt) {
  if (!j.is_object() || !j.contains(key)) return dflt;
  const json& v = j.at(key);
  if (!v.is_number_integer()) fail(path + "." + key, "expected an integer");
  return v.get<int>();
}

std::string get_str(const json& j, const std::string& path, const char* key) {
  const json& v = member(j, path, key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

Vec3 get_vec3(const json& j, const std::string& path, const char* key) {
  const json& v = member(j, path, key);
  if (!v.is_array() || v.size() != 3) fail(path + "." + key, "expected [x,y,z]");
  for (const auto& e : v)
    if (!e.is_number()) fail(path + "." + key, "expected numbers");
  return Vec3(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

Vec2 get_vec2(const json& j, const std::string& path, const char* key) {
  const json& v = member(j, path, key);
  if (!v.is_array() || v.size() != 2) fail(path + "." + key, "expected [a,b]");
  for (const auto& e : v)
    if (!e.is_number()) fail(path + "." + key, "expected numbers");
  return Vec2(v[0].get<double>(), v[1].get<double>());
}

SceneObject parse_object(const json& j, const std::string& path) {
  SceneObject so;
  so.spec.name = get_str(j, path, "name");
  const std::string shape = get_str(j, path, "shape");
  if (shape == "box")
    so.spec.shape = Shape::Box;
  else if (shape == "cylinder")
    so.spec.shape = Shape::Cylinder;
  else
    fail(path + ".shape", "expected box|cylinder, got '" + shape + "'");
  so.spec.true_center = get_vec3(j, path, "center");
  if (j.contains("normal")) {
    so.spec.true_normal = get_vec3(j, path, "normal").normalized();
  }
  so.spec.true_dims = get_vec2(j, path, "dims");
  so.spec.height = get_num(j, path, "height");
  so.spec.mass = get_num(j, path, "mass");
  const std::string surf =
      j.contains("surface") ? get_str(j, path, "surface") : "flat";
  if (surf == "flat")
    so.spec.surface = SurfaceKind::Flat;
  else if (surf == "laminated")
    so.spec.surface = SurfaceKind::Laminated;
  else if (surf == "curved")
    so.spec.surface = SurfaceKind::Curved;
  else
    fail(path + ".surface", "expected flat|laminated|curved");

  if (j.contains("fixture")) {
    const json& f = j.at("fixture");
    const std::string fp = path + ".fixture";
    const std::string kind = get_str(f, fp, "kind");
    if (kind == "none") {
      so.spec.fixture.kind = FixtureSpec::Kind::None;
    } else if (kind == "rotary") {
      so.spec.fixture.kind = FixtureSpec::Kind::Rotary;
      so.spec.fixture.axis = get_vec3(f, fp, "axis").normalized();
      so.spec.fixture.release_angle =
          get_num(f, fp, "release_angle_deg") * M_PI / 180.0;
    } else if (kind == "rigid") {
      so.spec.fixture.kind = FixtureSpec::Kind::Rigid;
    } else {
      fail(fp + ".kind", "expected none|rotary|rigid");
    }
  }

  if (j.contains("strategies")) so.strategies = get_str(j, path, "strategies");
  so.expected_min_mass =
      opt_num(j, path, "expected_min_mass", 0.5 * so.spec.mass);
  if (j.contains("hints")) {
    const json& h = j.at("hints");
    if (h.contains("initial_opening"))
      so.initial_opening = get_num(h, path + ".hints", "initial_opening");
    if (h.contains("expect_rotary"))
      so.expect_rotary = h.at("expect_rotary").get<bool>();
  }
  try {
    so.spec.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return so;
}

GripperModel parse_gripper(const json& j, const std::string& path,
                           GripperKind kind) {
  GripperModel g;
  g.kind = kind;
  g.payload = get_num(j, path, "payload");
  const double tcp_z = opt_num(j, path, "tcp_z", 0.2);
  g.tcp_offset =
      Pose(Mat3::Identity(), Vec3(0, 0, tcp_z), kEEFrame, kTCPFrame);
  if (kind == GripperKind::C) {
    g.cup_count = opt_int(j, path, "cup_count", 2);
    g.cup_spacing = opt_num(j, path, "cup_spacing", 0.06);
    g.cup_diameter = get_num(j, path, "cup_diameter");
    g.cup_height = opt_num(j, path, "cup_height", 0.02);
    g.max_opening = g.finger_length = g.finger_thickness = g.finger_breadth =
        0.0;
    g.array_rows = g.array_cols = 1;  // unused for suction
    g.array_pitch = 0.004;
  } else {
    g.max_opening = get_num(j, path, "max_opening");
    g.finger_length = get_num(j, path, "finger_length");
    g.finger_thickness = get_num(j, path, "finger_thickness");
    g.finger_breadth = get_num(j, path, "finger_breadth");
    g.array_rows = opt_int(j, path, "array_rows", 8);
    g.array_cols = opt_int(j, path, "array_cols", 4);
    g.array_pitch = opt_num(j, path, "array_pitch", 0.004);
  }
  try {
    g.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return g;
}

NoiseModel parse_noise(const json& j, const std::string& path) {
  NoiseModel n;
  n.sigma_x = get_vec3(j, path, "sigma_x");
  n.sigma_n = get_num(j, path, "sigma_n_deg") * M_PI / 180.0;
  n.sigma_d = get_vec2(j, path, "sigma_d");
  const std::string dist =
      j.contains("distribution") ? get_str(j, path, "distribution") : "gaussian";
  if (dist == "gaussian")
    n.distribution = NoiseModel::Dist::Gaussian;
  else if (dist == "uniform")
    n.distribution = NoiseModel::Dist::Uniform;
  else
    fail(path + ".distribution", "expected gaussian|uniform");
  n.seed = static_cast<uint64_t>(opt_num(j, path, "seed", 0));
  try {
    n.validate();
  } catch (const std::exception& e) {
    fail(path, e.what());
  }
  return n;
}

}  // namespace

Mat6 ControllerConfig::gain() const {
  Mat6 g = Mat6::Identity();
  g.topLeftCorner<3, 3>() *= gain_angular;
  g.bottomRightCorner<3, 3>() *= gain_linear;
  return g;
}

ControllerParams ControllerConfig::params() const {
  ControllerParams p;
  p.gain = gain();
  p.scaling = Vec6::Zero();
  p.max_twist = max_twist;
  p.desired_wrench = Wrench6::zero(kEEFrame);
  p.dt = dt;
  return p;
}

const SceneObject* Scene::find_object(const std::string& n) const {
  for (const auto& o : objects)
    if (o.spec.name == n) return &o;
  return nullptr;
}

Mat3 Scene::down_orientation() {
  return rotation_from_approach_orientation(-Vec3::UnitZ(), Vec3::UnitX());
}

void validate_scene(const Scene& scene) {
  if (scene.schema_version != 1)
    throw ConfigError("schema_version: unsupported version " +
                      std::to_string(scene.schema_version));
  if (scene.objects.empty()) throw ConfigError("objects: scene has no objects");
  if (scene.grippers.empty())
    throw ConfigError("grippers: scene declares no grippers");
  for (const auto& [k, g] : scene.grippers) g.validate();
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    scene.objects[i].spec.validate();
    for (char c : scene.objects[i].strategies) {
      if (c != 'A' && c != 'B' && c != 'C')
        throw ConfigError("objects[" + std::to_string(i) +
                          "].strategies: unknown strategy '" + c + "'");
      if (!scene.grippers.count(gripper_from_letter(c)))
        throw ConfigError("objects[" + std::to_string(i) +
                          "].strategies: gripper " + c +
                          " not declared in the scene");
    }
  }
  scene.noise.validate();
  if (!(scene.controller.dt > 0.0)) throw ConfigError("controller.dt: must be > 0");
  if (!(scene.skill.timeout > 0.0)) throw ConfigError("skill.timeout: must be > 0");
}

Scene parse_scene_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("parse error at byte ") +
                      std::to_string(e.byte) + ": " + e.what());
  }

  Scene s;
  s.schema_version = opt_int(j, "", "schema_version", -1);
  if (s.schema_version == -1) fail("schema_version", "missing required field");
  if (j.contains("name")) s.name = get_str(j, "", "name");

  const json& objs = member(j, "", "objects");
  if (!objs.is_array()) fail("objects", "expected an array");
  for (size_t i = 0; i < objs.size(); ++i)
    s.objects.push_back(
        parse_object(objs[i], "objects[" + std::to_string(i) + "]"));

  if (j.contains("grippers")) {
    const json& g = j.at("grippers");
    if (!g.is_object()) fail("grippers", "expected an object");
    for (auto it = g.begin(); it != g.end(); ++it) {
      if (it.key().size() != 1) fail("grippers." + it.key(), "expected A|B|C");
      const GripperKind kind = gripper_from_letter(it.key()[0]);
      s.grippers[kind] =
          parse_gripper(it.value(), "grippers." + it.key(), kind);
    }
  } else {
    s.grippers = default_grippers();
  }

  if (j.contains("noise")) s.noise = parse_noise(j.at("noise"), "noise");

  if (j.contains("sim")) {
    const json& v = j.at("sim");
    SimParams& p = s.sim;
    p.dt = opt_num(v, "sim", "dt", p.dt);
    p.contact_stiffness =
        opt_num(v, "sim", "contact_stiffness", p.contact_stiffness);
    p.force_cap = opt_num(v, "sim", "force_cap", p.force_cap);
    p.bellows_stiffness =
        opt_num(v, "sim", "bellows_stiffness", p.bellows_stiffness);
    p.bellows_travel = opt_num(v, "sim", "bellows_travel", p.bellows_travel);
    p.seal_gap = opt_num(v, "sim", "seal_gap", p.seal_gap);
    p.seal_tilt_max = opt_num(v, "sim", "seal_tilt_max", p.seal_tilt_max);
    p.leak_flat = opt_num(v, "sim", "leak_flat", p.leak_flat);
    p.leak_laminated = opt_num(v, "sim", "leak_laminated", p.leak_laminated);
    p.leak_curved = opt_num(v, "sim", "leak_curved", p.leak_curved);
    p.fixture_stiffness =
        opt_num(v, "sim", "fixture_stiffness", p.fixture_stiffness);
    p.fixture_slack = opt_num(v, "sim", "fixture_slack", p.fixture_slack);
    p.fixture_rot_stiffness =
        opt_num(v, "sim", "fixture_rot_stiffness", p.fixture_rot_stiffness);
    p.fixture_rot_slack =
        opt_num(v, "sim", "fixture_rot_slack", p.fixture_rot_slack);
    p.grip_slip_force = opt_num(v, "sim", "grip_slip_force", p.grip_slip_force);
    p.finger_speed = opt_num(v, "sim", "finger_speed", p.finger_speed);
    p.sensor_sigma_force =
        opt_num(v, "sim", "sensor_sigma_force", p.sensor_sigma_force);
    p.sensor_sigma_torque =
        opt_num(v, "sim", "sensor_sigma_torque", p.sensor_sigma_torque);
    p.weight_tol = opt_num(v, "sim", "weight_tol", p.weight_tol);
  }

  if (j.contains("controller")) {
    const json& v = j.at("controller");
    ControllerConfig& c = s.controller;
    c.dt = opt_num(v, "controller", "dt", c.dt);
    c.gain_linear = opt_num(v, "controller", "gain_linear", c.gain_linear);
    c.gain_angular = opt_num(v, "controller", "gain_angular", c.gain_angular);
    c.filter_cutoff =
        opt_num(v, "controller", "filter_cutoff", c.filter_cutoff);
    if (v.contains("max_linear"))
      c.max_twist.linear =
          Vec3::Constant(get_num(v, "controller", "max_linear"));
    if (v.contains("max_angular"))
      c.max_twist.angular =
          Vec3::Constant(get_num(v, "controller", "max_angular"));
  }
  s.sim.dt = s.controller.dt;  // one clock for plant and loop

  if (j.contains("skill")) {
    const json& v = j.at("skill");
    SkillConfig& k = s.skill;
    for (auto kind : {GripperKind::A, GripperKind::B, GripperKind::C}) {
      const std::string key =
          std::string("d_safety_") + static_cast<char>(
              std::tolower(gripper_letter(kind)));
      k.d_safety[kind] = opt_num(v, "skill", key.c_str(), k.d_safety[kind]);
    }
    k.epsilon_overshoot =
        opt_num(v, "skill", "epsilon_overshoot", k.epsilon_overshoot);
    k.contact_force = opt_num(v, "skill", "contact_force", k.contact_force);
    k.press_force = opt_num(v, "skill", "press_force", k.press_force);
    k.grasp_force = opt_num(v, "skill", "grasp_force", k.grasp_force);
    k.force_diff_max = opt_num(v, "skill", "force_diff_max", k.force_diff_max);
    k.lateral_force_max =
        opt_num(v, "skill", "lateral_force_max", k.lateral_force_max);
    k.pull_force = opt_num(v, "skill", "pull_force", k.pull_force);
    k.jam_torque = opt_num(v, "skill", "jam_torque", k.jam_torque);
    k.rotation_step =
        opt_num(v, "skill", "rotation_step_deg", k.rotation_step * 180.0 / M_PI) *
        M_PI / 180.0;
    k.rotation_max =
        opt_num(v, "skill", "rotation_max_deg", k.rotation_max * 180.0 / M_PI) *
        M_PI / 180.0;
    k.rotation_speed = opt_num(v, "skill", "rotation_speed", k.rotation_speed);
    k.tip_retries = opt_int(v, "skill", "tip_retries", k.tip_retries);
    k.tip_band_rows = opt_num(v, "skill", "tip_band_rows", k.tip_band_rows);
    k.readvance = opt_num(v, "skill", "readvance", k.readvance);
    k.reopen_delta = opt_num(v, "skill", "reopen_delta", k.reopen_delta);
    k.search_offset_factor =
        opt_num(v, "skill", "search_offset_factor", k.search_offset_factor);
    k.reorient_angle =
        opt_num(v, "skill", "reorient_angle_deg",
                k.reorient_angle * 180.0 / M_PI) *
        M_PI / 180.0;
    k.max_reorient_both =
        opt_int(v, "skill", "max_reorient_both", k.max_reorient_both);
    k.max_reorient_single =
        opt_int(v, "skill", "max_reorient_single", k.max_reorient_single);
    k.timeout = opt_num(v, "skill", "timeout", k.timeout);
    k.approach_speed = opt_num(v, "skill", "approach_speed", k.approach_speed);
    k.search_speed = opt_num(v, "skill", "search_speed", k.search_speed);
    k.transport_speed =
        opt_num(v, "skill", "transport_speed", k.transport_speed);
    k.check_height = opt_num(v, "skill", "check_height", k.check_height);
    k.settle_time = opt_num(v, "skill", "settle_time", k.settle_time);
  }

  if (j.contains("poses")) {
    const json& v = j.at("poses");
    if (v.contains("safe")) s.safe_position = get_vec3(v, "poses", "safe");
    if (v.contains("release"))
      s.release_position = get_vec3(v, "poses", "release");
    s.transport_height =
        opt_num(v, "poses", "transport_height", s.transport_height);
  }

  validate_scene(s);
  return s;
}

Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scene_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::map<GripperKind, GripperModel> default_grippers() {
  std::map<GripperKind, GripperModel> out;

  GripperModel a;
  a.kind = GripperKind::A;
  a.max_opening = 0.085;
  a.finger_length = 0.045;
  a.finger_thickness = 0.020;
  a.finger_breadth = 0.030;
  a.payload = 3.0;
  a.array_rows = 8;
  a.array_cols = 4;
  a.array_pitch = 0.004;
  a.tcp_offset = Pose(Mat3::Identity(), Vec3(0, 0, 0.22), kEEFrame, kTCPFrame);
  out[GripperKind::A] = a;

  GripperModel b;
  b.kind = GripperKind::B;
  b.max_opening = 0.045;
  b.finger_length = 0.050;
  b.finger_thickness = 0.004;
  b.finger_breadth = 0.016;
  b.payload = 1.0;
  b.array_rows = 8;
  b.array_cols = 4;
  b.array_pitch = 0.004;
  b.tcp_offset = Pose(Mat3::Identity(), Vec3(0, 0, 0.18), kEEFrame, kTCPFrame);
  out[GripperKind::B] = b;

  GripperModel c;
  c.kind = GripperKind::C;
  c.cup_count = 2;
  c.cup_spacing = 0.06;
  c.cup_diameter = 0.03;
  c.cup_height = 0.02;
  c.payload = 8.0;
  c.array_rows = 1;
  c.array_cols = 1;
  c.tcp_offset = Pose(Mat3::Identity(), Vec3(0, 0, 0.15), kEEFrame, kTCPFrame);
  out[GripperKind::C] = c;

  return out;
}

}  // namespace graspforce
