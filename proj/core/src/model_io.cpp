#include "loom/model_io.hpp"

#include <algorithm>
#include <complex>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace loom {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw SchemaError(path + "." + it.key(), "unknown field");
    }
  }
}

const json& require(const json& obj, const std::string& path, const std::string& key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "." + key, "missing required field");
  return *it;
}

double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw SchemaError(path, "expected a string");
  return v.get<std::string>();
}

bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) throw SchemaError(path, "expected a boolean");
  return v.get<bool>();
}

Vec3 as_vec3(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) throw SchemaError(path, "expected an array of 3 numbers");
  return Vec3(as_number(v[0], path), as_number(v[1], path), as_number(v[2], path));
}

Placement placement_from(const Vec3& xyz, const Vec3& rpy) {
  Mat3 R = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
            Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
               .toRotationMatrix();
  return Placement(R, xyz);
}

BodyEntry parse_body(const json& j, const std::string& path) {
  check_keys(j, path, {"name", "mass", "com", "inertia"});
  BodyEntry b;
  b.name = as_string(require(j, path, "name"), path + ".name");
  b.mass = as_number(require(j, path, "mass"), path + ".mass");
  if (b.mass < 0) throw SchemaError(path + ".mass", "mass must be nonnegative");
  b.com = as_vec3(require(j, path, "com"), path + ".com");
  const json& in = require(j, path, "inertia");
  if (!in.is_array() || in.size() != 6) {
    throw SchemaError(path + ".inertia", "expected [ixx, iyy, izz, ixy, ixz, iyz]");
  }
  for (int k = 0; k < 6; ++k) b.inertia[k] = as_number(in[k], path + ".inertia");
  return b;
}

JointEntry parse_joint(const json& j, const std::string& path) {
  check_keys(j, path,
             {"name", "kind", "parent", "child", "origin", "axis", "axis2", "limits", "actuated",
              "independent", "mimic"});
  JointEntry e;
  e.name = as_string(require(j, path, "name"), path + ".name");
  e.kind = as_string(require(j, path, "kind"), path + ".kind");
  joint_kind_from_string(e.kind);  // validates
  e.parent = as_string(require(j, path, "parent"), path + ".parent");
  e.child = as_string(require(j, path, "child"), path + ".child");
  if (j.contains("origin")) {
    const json& o = j["origin"];
    check_keys(o, path + ".origin", {"xyz", "rpy"});
    if (o.contains("xyz")) e.origin_xyz = as_vec3(o["xyz"], path + ".origin.xyz");
    if (o.contains("rpy")) e.origin_rpy = as_vec3(o["rpy"], path + ".origin.rpy");
  }
  if (j.contains("axis")) e.axis = as_vec3(j["axis"], path + ".axis");
  if (j.contains("axis2")) e.axis2 = as_vec3(j["axis2"], path + ".axis2");
  if (j.contains("limits")) {
    const json& l = j["limits"];
    check_keys(l, path + ".limits", {"lower", "upper", "velocity", "effort"});
    if (l.contains("lower")) e.lower = as_number(l["lower"], path + ".limits.lower");
    if (l.contains("upper")) e.upper = as_number(l["upper"], path + ".limits.upper");
    if (l.contains("velocity")) e.velocity = as_number(l["velocity"], path + ".limits.velocity");
    if (l.contains("effort")) e.effort = as_number(l["effort"], path + ".limits.effort");
    if (e.lower && e.upper && *e.lower > *e.upper) {
      throw SchemaError(path + ".limits", "lower exceeds upper");
    }
  }
  if (j.contains("actuated")) e.actuated = as_bool(j["actuated"], path + ".actuated");
  if (j.contains("independent")) e.independent = as_bool(j["independent"], path + ".independent");
  if (j.contains("mimic")) {
    const json& m = j["mimic"];
    check_keys(m, path + ".mimic", {"joint", "multiplier", "offset"});
    JointEntry::Mimic mimic;
    mimic.joint = as_string(require(m, path + ".mimic", "joint"), path + ".mimic.joint");
    if (m.contains("multiplier")) mimic.multiplier = as_number(m["multiplier"], path + ".mimic.multiplier");
    if (m.contains("offset")) mimic.offset = as_number(m["offset"], path + ".mimic.offset");
    e.mimic = mimic;
  }
  return e;
}

FrameEntry parse_frame(const json& j, const std::string& path) {
  check_keys(j, path, {"name", "body", "xyz", "rpy"});
  FrameEntry f;
  f.name = as_string(require(j, path, "name"), path + ".name");
  f.body = as_string(require(j, path, "body"), path + ".body");
  if (j.contains("xyz")) f.xyz = as_vec3(j["xyz"], path + ".xyz");
  if (j.contains("rpy")) f.rpy = as_vec3(j["rpy"], path + ".rpy");
  return f;
}

SubmechanismEntry parse_submechanism(const json& j, const std::string& path) {
  check_keys(j, path, {"name", "type", "resolver", "joints", "cuts", "reference", "geometry"});
  SubmechanismEntry s;
  s.name = as_string(require(j, path, "name"), path + ".name");
  s.type = as_string(require(j, path, "type"), path + ".type");
  static const std::set<std::string> kTypes{"stewart_6ups", "knee_slidercrank", "hip_ankle_3r2us",
                                            "custom"};
  if (!kTypes.count(s.type)) throw SchemaError(path + ".type", "unknown submechanism type " + s.type);
  s.resolver = as_string(require(j, path, "resolver"), path + ".resolver");
  if (s.resolver != "analytical" && s.resolver != "numerical") {
    throw SchemaError(path + ".resolver", "resolver must be 'analytical' or 'numerical'");
  }
  const json& joints = require(j, path, "joints");
  if (!joints.is_array()) throw SchemaError(path + ".joints", "expected an array");
  for (const auto& name : joints) s.joints.push_back(as_string(name, path + ".joints"));
  if (j.contains("cuts")) {
    const json& cuts = j["cuts"];
    if (!cuts.is_array()) throw SchemaError(path + ".cuts", "expected an array");
    for (size_t i = 0; i < cuts.size(); ++i) {
      std::string cpath = path + ".cuts[" + std::to_string(i) + "]";
      check_keys(cuts[i], cpath, {"name", "frame_a", "frame_b"});
      CutEntry c;
      c.name = as_string(require(cuts[i], cpath, "name"), cpath + ".name");
      c.frame_a = as_string(require(cuts[i], cpath, "frame_a"), cpath + ".frame_a");
      c.frame_b = as_string(require(cuts[i], cpath, "frame_b"), cpath + ".frame_b");
      s.cuts.push_back(c);
    }
  }
  if (j.contains("reference")) {
    const json& r = j["reference"];
    if (!r.is_object()) throw SchemaError(path + ".reference", "expected an object");
    for (auto it = r.begin(); it != r.end(); ++it) {
      s.reference[it.key()] = as_number(it.value(), path + ".reference." + it.key());
    }
  }
  if (j.contains("geometry")) {
    const json& g = j["geometry"];
    if (!g.is_object()) throw SchemaError(path + ".geometry", "expected an object");
    for (auto it = g.begin(); it != g.end(); ++it) {
      std::vector<double> vals;
      if (it.value().is_number()) {
        vals.push_back(it.value().get<double>());
      } else if (it.value().is_array()) {
        for (const auto& v : it.value()) vals.push_back(as_number(v, path + ".geometry." + it.key()));
      } else {
        throw SchemaError(path + ".geometry." + it.key(), "expected a number or array");
      }
      s.geometry[it.key()] = vals;
    }
  }
  return s;
}

}  // namespace

ModelDocument parse_model(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("$", std::string("JSON syntax error: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("$", "document root must be an object");
  check_keys(root, "$",
             {"schema_version", "name", "gravity", "bodies", "joints", "frames", "submechanisms",
              "feet", "actuators"});

  ModelDocument doc;
  doc.schema_version = as_string(require(root, "$", "schema_version"), "$.schema_version");
  if (doc.schema_version != "1") {
    throw SchemaError("$.schema_version", "unsupported schema version " + doc.schema_version);
  }
  doc.name = as_string(require(root, "$", "name"), "$.name");
  if (root.contains("gravity")) doc.gravity = as_vec3(root["gravity"], "$.gravity");

  const json& bodies = require(root, "$", "bodies");
  if (!bodies.is_array()) throw SchemaError("$.bodies", "expected an array");
  std::set<std::string> body_names;
  for (size_t i = 0; i < bodies.size(); ++i) {
    auto b = parse_body(bodies[i], "$.bodies[" + std::to_string(i) + "]");
    if (!body_names.insert(b.name).second) {
      throw SchemaError("$.bodies[" + std::to_string(i) + "]", "duplicate body name '" + b.name + "'");
    }
    doc.bodies.push_back(std::move(b));
  }

  const json& joints = require(root, "$", "joints");
  if (!joints.is_array()) throw SchemaError("$.joints", "expected an array");
  std::set<std::string> joint_names;
  for (size_t i = 0; i < joints.size(); ++i) {
    auto e = parse_joint(joints[i], "$.joints[" + std::to_string(i) + "]");
    if (!joint_names.insert(e.name).second) {
      throw SchemaError("$.joints[" + std::to_string(i) + "]", "duplicate joint name '" + e.name + "'");
    }
    doc.joints.push_back(std::move(e));
  }

  if (root.contains("frames")) {
    const json& frames = root["frames"];
    if (!frames.is_array()) throw SchemaError("$.frames", "expected an array");
    std::set<std::string> frame_names;
    for (size_t i = 0; i < frames.size(); ++i) {
      auto f = parse_frame(frames[i], "$.frames[" + std::to_string(i) + "]");
      if (!frame_names.insert(f.name).second) {
        throw SchemaError("$.frames[" + std::to_string(i) + "]", "duplicate frame name '" + f.name + "'");
      }
      doc.frames.push_back(std::move(f));
    }
  }

  if (root.contains("submechanisms")) {
    const json& subs = root["submechanisms"];
    if (!subs.is_array()) throw SchemaError("$.submechanisms", "expected an array");
    for (size_t i = 0; i < subs.size(); ++i) {
      doc.submechanisms.push_back(
          parse_submechanism(subs[i], "$.submechanisms[" + std::to_string(i) + "]"));
    }
  }

  if (root.contains("feet")) {
    const json& feet = root["feet"];
    if (!feet.is_array()) throw SchemaError("$.feet", "expected an array");
    for (size_t i = 0; i < feet.size(); ++i) {
      std::string fpath = "$.feet[" + std::to_string(i) + "]";
      check_keys(feet[i], fpath, {"frame", "half_extents"});
      FootEntry f;
      f.frame = as_string(require(feet[i], fpath, "frame"), fpath + ".frame");
      const json& he = require(feet[i], fpath, "half_extents");
      if (!he.is_array() || he.size() != 2) throw SchemaError(fpath + ".half_extents", "expected [x, y]");
      f.half_length = as_number(he[0], fpath + ".half_extents");
      f.half_width = as_number(he[1], fpath + ".half_extents");
      doc.feet.push_back(f);
    }
  }

  if (root.contains("actuators")) {
    const json& acts = root["actuators"];
    if (!acts.is_array()) throw SchemaError("$.actuators", "expected an array");
    for (const auto& a : acts) doc.actuators.push_back(as_string(a, "$.actuators"));
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Serialization (canonical field order)
// ---------------------------------------------------------------------------

namespace {

ordered_json vec3_json(const Vec3& v) { return ordered_json::array({v.x(), v.y(), v.z()}); }

}  // namespace

std::string serialize_model(const ModelDocument& doc) {
  ordered_json root;
  root["schema_version"] = doc.schema_version;
  root["name"] = doc.name;
  root["gravity"] = vec3_json(doc.gravity);
  root["bodies"] = ordered_json::array();
  for (const auto& b : doc.bodies) {
    ordered_json j;
    j["name"] = b.name;
    j["mass"] = b.mass;
    j["com"] = vec3_json(b.com);
    j["inertia"] = b.inertia;
    root["bodies"].push_back(j);
  }
  root["joints"] = ordered_json::array();
  for (const auto& e : doc.joints) {
    ordered_json j;
    j["name"] = e.name;
    j["kind"] = e.kind;
    j["parent"] = e.parent;
    j["child"] = e.child;
    j["origin"] = {{"xyz", vec3_json(e.origin_xyz)}, {"rpy", vec3_json(e.origin_rpy)}};
    j["axis"] = vec3_json(e.axis);
    if (e.axis2) j["axis2"] = vec3_json(*e.axis2);
    if (e.lower || e.upper || e.velocity || e.effort) {
      ordered_json l;
      if (e.lower) l["lower"] = *e.lower;
      if (e.upper) l["upper"] = *e.upper;
      if (e.velocity) l["velocity"] = *e.velocity;
      if (e.effort) l["effort"] = *e.effort;
      j["limits"] = l;
    }
    if (e.actuated) j["actuated"] = true;
    if (e.independent) j["independent"] = true;
    if (e.mimic) {
      j["mimic"] = {{"joint", e.mimic->joint},
                    {"multiplier", e.mimic->multiplier},
                    {"offset", e.mimic->offset}};
    }
    root["joints"].push_back(j);
  }
  root["frames"] = ordered_json::array();
  for (const auto& f : doc.frames) {
    ordered_json j;
    j["name"] = f.name;
    j["body"] = f.body;
    j["xyz"] = vec3_json(f.xyz);
    j["rpy"] = vec3_json(f.rpy);
    root["frames"].push_back(j);
  }
  root["submechanisms"] = ordered_json::array();
  for (const auto& s : doc.submechanisms) {
    ordered_json j;
    j["name"] = s.name;
    j["type"] = s.type;
    j["resolver"] = s.resolver;
    j["joints"] = s.joints;
    j["cuts"] = ordered_json::array();
    for (const auto& c : s.cuts) {
      j["cuts"].push_back({{"name", c.name}, {"frame_a", c.frame_a}, {"frame_b", c.frame_b}});
    }
    ordered_json ref = ordered_json::object();
    for (const auto& [k, v] : s.reference) ref[k] = v;
    j["reference"] = ref;
    ordered_json geo = ordered_json::object();
    for (const auto& [k, v] : s.geometry) geo[k] = v;
    j["geometry"] = geo;
    root["submechanisms"].push_back(j);
  }
  root["feet"] = ordered_json::array();
  for (const auto& f : doc.feet) {
    root["feet"].push_back(
        {{"frame", f.frame}, {"half_extents", ordered_json::array({f.half_length, f.half_width})}});
  }
  root["actuators"] = doc.actuators;
  return root.dump(2) + "\n";
}

ModelDocument load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

bool documents_equal(const ModelDocument& a, const ModelDocument& b) {
  return serialize_model(a) == serialize_model(b);
}

// ---------------------------------------------------------------------------
// Document -> model
// ---------------------------------------------------------------------------

namespace {

struct DocumentIndex {
  std::map<std::string, const BodyEntry*> bodies;
  std::map<std::string, const JointEntry*> joints;
  std::map<std::string, const JointEntry*> joint_by_child;
  std::map<std::string, const FrameEntry*> frames;
};

DocumentIndex index_document(const ModelDocument& doc) {
  DocumentIndex idx;
  for (const auto& b : doc.bodies) idx.bodies[b.name] = &b;
  for (const auto& j : doc.joints) {
    idx.joints[j.name] = &j;
    if (!idx.bodies.count(j.parent) && j.parent != "world") {
      throw TopologyError("joint '" + j.name + "' references unknown parent body '" + j.parent + "'");
    }
    if (!idx.bodies.count(j.child)) {
      throw TopologyError("joint '" + j.name + "' references unknown child body '" + j.child + "'");
    }
    if (!idx.joint_by_child.emplace(j.child, &j).second) {
      throw TopologyError("joint graph is not a tree: body '" + j.child +
                          "' is the child of joints '" + idx.joint_by_child[j.child]->name +
                          "' and '" + j.name + "' (cycle not marked as cut)");
    }
  }
  for (const auto& f : doc.frames) {
    if (!idx.bodies.count(f.body)) {
      throw TopologyError("frame '" + f.name + "' references unknown body '" + f.body + "'");
    }
    idx.frames[f.name] = &f;
  }
  return idx;
}

SpatialInertia inertia_from_entry(const BodyEntry& b) {
  Mat3 I;
  I << b.inertia[0], b.inertia[3], b.inertia[4],
       b.inertia[3], b.inertia[1], b.inertia[5],
       b.inertia[4], b.inertia[5], b.inertia[2];
  return SpatialInertia(b.mass, b.com, I);
}

JointModel joint_model_from_entry(const JointEntry& e) {
  Placement X = placement_from(e.origin_xyz, e.origin_rpy);
  JointKind kind = joint_kind_from_string(e.kind);
  JointModel j;
  switch (kind) {
    case JointKind::revolute: j = JointModel::revolute(e.axis.normalized(), X); break;
    case JointKind::prismatic: j = JointModel::prismatic(e.axis.normalized(), X); break;
    case JointKind::spherical: j = JointModel::spherical(X); break;
    case JointKind::universal:
      j = JointModel::universal(e.axis.normalized(),
                                e.axis2.value_or(Vec3::UnitY()).normalized(), X);
      break;
    case JointKind::floating_base: j = JointModel::floating(X); break;
  }
  if (e.lower && e.upper && j.nq() == 1) {
    j.limits.lower = VecX::Constant(1, *e.lower);
    j.limits.upper = VecX::Constant(1, *e.upper);
  }
  if (e.velocity) j.limits.velocity = *e.velocity;
  if (e.effort) j.limits.effort = *e.effort;
  return j;
}

/// Order the document's bodies root-first along the joint tree; throws on
/// unreachable bodies (disconnected or cyclic graphs).
std::vector<std::string> topological_bodies(const ModelDocument& doc, const DocumentIndex& idx,
                                            std::string* root_out) {
  std::vector<std::string> roots;
  for (const auto& b : doc.bodies) {
    if (!idx.joint_by_child.count(b.name)) roots.push_back(b.name);
  }
  if (roots.size() != 1) {
    throw TopologyError("expected exactly one root body, found " + std::to_string(roots.size()));
  }
  *root_out = roots[0];
  std::map<std::string, std::vector<std::string>> children;
  for (const auto& j : doc.joints) children[j.parent].push_back(j.child);
  std::vector<std::string> order;
  std::vector<std::string> stack{roots[0]};
  while (!stack.empty()) {
    std::string b = stack.back();
    stack.pop_back();
    order.push_back(b);
    auto it = children.find(b);
    if (it != children.end()) {
      for (auto rit = it->second.rbegin(); rit != it->second.rend(); ++rit) stack.push_back(*rit);
    }
  }
  if (order.size() != doc.bodies.size()) {
    throw TopologyError("joint graph does not reach every body (disconnected branch or cycle)");
  }
  return order;
}

// Analytic resolver factories ------------------------------------------------

std::vector<double> geo_get(const SubmechanismEntry& s, const std::string& key, size_t size) {
  auto it = s.geometry.find(key);
  if (it == s.geometry.end()) {
    throw Error("submechanism '" + s.name + "': missing geometry key '" + key + "'");
  }
  if (it->second.size() != size) {
    throw Error("submechanism '" + s.name + "': geometry key '" + key + "' must have " +
                std::to_string(size) + " values");
  }
  return it->second;
}

/// Planar rotation about the +y axis acting on (x, z): complex representation
/// u = x + i z with Ry(theta) == multiplication by exp(-i theta).
std::complex<double> rot_y(double theta, std::complex<double> u) {
  return std::polar(1.0, -theta) * u;
}

Submechanism::AnalyticPosition make_stewart_resolver(const SubmechanismEntry& s) {
  struct Leg {
    Vec3 base;
    Mat3 orient;
    double retracted;
    Vec3 anchor;
  };
  std::vector<Leg> legs;
  for (int i = 0; i < 6; ++i) {
    Leg leg;
    auto base = geo_get(s, "leg" + std::to_string(i) + "_base_xyz", 3);
    auto rpy = geo_get(s, "leg" + std::to_string(i) + "_base_rpy", 3);
    leg.base = Vec3(base[0], base[1], base[2]);
    leg.orient = placement_from(Vec3::Zero(), Vec3(rpy[0], rpy[1], rpy[2])).rotation;
    leg.retracted = geo_get(s, "leg" + std::to_string(i) + "_retracted_length", 1)[0];
    auto anchor = geo_get(s, "anchor" + std::to_string(i), 3);
    leg.anchor = Vec3(anchor[0], anchor[1], anchor[2]);
    legs.push_back(leg);
  }
  Vec3 chain_origin(geo_get(s, "virtual_origin", 3).data());
  double lead = geo_get(s, "screw_lead", 1)[0];
  double gear = geo_get(s, "rotor_gear", 1)[0];

  return [legs, chain_origin, lead, gear](const VecX& y, VecX& q) {
    // Virtual pose joints: x, y, z translation then roll, pitch, yaw.
    Placement platform =
        Placement::from_translation(chain_origin + Vec3(y[0], y[1], y[2])) *
        Placement::from_rotation((Eigen::AngleAxisd(y[3], Vec3::UnitX()) *
                                  Eigen::AngleAxisd(y[4], Vec3::UnitY()) *
                                  Eigen::AngleAxisd(y[5], Vec3::UnitZ()))
                                     .toRotationMatrix());
    for (int i = 0; i < 6; ++i) {
      Vec3 w = platform.act_point(legs[i].anchor) - legs[i].base;
      double len = w.norm();
      Vec3 wl = legs[i].orient.transpose() * w / len;
      double sx = std::clamp(wl.x(), -1.0, 1.0);
      double beta = std::asin(sx);
      double alpha = std::atan2(-wl.y(), wl.z());
      double ext = len - legs[i].retracted;
      q[6 + 3 * i + 0] = alpha;
      q[6 + 3 * i + 1] = beta;
      q[6 + 3 * i + 2] = ext;
      q[24 + 2 * i + 0] = ext * (2.0 * M_PI / lead);
      q[24 + 2 * i + 1] = ext * (2.0 * M_PI / lead) * gear;
    }
  };
}

Submechanism::AnalyticPosition make_knee_resolver(const SubmechanismEntry& s) {
  using cplx = std::complex<double>;
  auto rail = geo_get(s, "rail_origin", 2);
  double rod_len = geo_get(s, "rod_length", 1)[0];
  auto pin = geo_get(s, "crank_pin", 2);
  auto seat_pivot = geo_get(s, "seat_pivot", 2);
  double seat_len = geo_get(s, "seat_length", 1)[0];
  auto support_pivot = geo_get(s, "support_pivot", 2);
  double support_len = geo_get(s, "support_length", 1)[0];
  int branch = geo_get(s, "branch", 1)[0] >= 0 ? 1 : -1;
  int seat_branch = geo_get(s, "seat_branch", 1)[0] >= 0 ? 1 : -1;
  double lead = geo_get(s, "screw_lead", 1)[0];
  double gear = geo_get(s, "rotor_gear", 1)[0];
  double seat_ratio = geo_get(s, "seat_ratio", 1)[0];
  std::string name = s.name;

  return [=](const VecX& y, VecX& q) {
    double d = y[0];
    // Drive loop: law-of-cosines triangle between the hinge, the slider pin,
    // and the crank pin. All in the sagittal (x, z) plane of the root frame.
    cplx S(rail[0], rail[1] - d);  // slider axis points down the thigh
    cplx beta(pin[0], pin[1]);
    double rs = std::abs(S), rb = std::abs(beta);
    double cpsi = (rb * rb + rs * rs - rod_len * rod_len) / (2.0 * rb * rs);
    if (cpsi < -1.0 || cpsi > 1.0) {
      throw ResolutionError(name, std::abs(cpsi) - 1.0, 0);
    }
    double theta = std::arg(beta) - std::arg(S) + branch * std::acos(cpsi);
    cplx P = rot_y(theta, beta);
    double phi = -std::arg((P - S) / rod_len);
    q[1] = phi;
    q[2] = theta;

    // Seat four-bar: circle intersection between the shank-side and
    // root-side pivots.
    cplx P1 = rot_y(theta, cplx(seat_pivot[0], seat_pivot[1]));
    cplx P2(support_pivot[0], support_pivot[1]);
    cplx delta = P2 - P1;
    double dist = std::abs(delta);
    double a = (seat_len * seat_len - support_len * support_len + dist * dist) / (2.0 * dist);
    double h2 = seat_len * seat_len - a * a;
    if (h2 < 0.0 || dist < 1e-12) {
      throw ResolutionError(name + "/seat", -h2, 0);
    }
    cplx mid = P1 + a * delta / dist;
    cplx perp = cplx(0, 1) * delta / dist;
    cplx D = mid + double(seat_branch) * std::sqrt(h2) * perp;
    q[3] = -std::arg((D - P1) / seat_len) - theta;  // seat link, relative to shank
    q[4] = -std::arg((D - P2) / support_len);       // support link, on the root
    q[5] = d * (2.0 * M_PI / lead);
    q[6] = d * (2.0 * M_PI / lead) * gear;
    q[7] = theta * seat_ratio;
  };
}

// Serial abstraction -----------------------------------------------------

/// Builds the floating-base serial model over the independent joints.
/// Joint frames are taken from the full model's reference kinematics, and
/// every spanning-tree body's inertia is lumped rigidly into the segment of
/// its nearest segment ancestor (pelvis, or a block's output body).
void build_abstraction(const ModelDocument& doc, const DocumentIndex& idx, const std::string& root_name,
                       HybridModel& model) {
  const RigidBodyTree& full = model.full_tree;
  VecX q_ref = model.closure.reference();
  auto X_ref = forward_kinematics(full, q_ref);
  auto world_of = [&](const std::string& body) -> Placement {
    if (body == root_name) return Placement::Identity();
    return X_ref[full.body_index(body)];
  };

  // Identify each block's output body and the abstraction joints to chain.
  struct ChainedJoint {
    const JointEntry* entry;
    Placement pre;       // world placement of the joint frame at reference
    bool knee_override;  // replace by a +z prismatic at the hinge
    Placement knee_pre;
  };
  struct BlockPlan {
    std::string root_body;
    std::string output_body;
    std::vector<ChainedJoint> joints;
  };
  std::vector<BlockPlan> plans;
  for (const auto& sub : doc.submechanisms) {
    BlockPlan plan;
    const JointEntry* last_indep = nullptr;
    for (const auto& jname : sub.joints) {
      const JointEntry* je = idx.joints.at(jname);
      if (plan.root_body.empty()) plan.root_body = je->parent;  // first joint hangs off the block root
      if (!je->independent) continue;
      ChainedJoint cj;
      cj.entry = je;
      cj.pre = world_of(je->parent) * placement_from(je->origin_xyz, je->origin_rpy);
      cj.knee_override = false;
      plan.joints.push_back(cj);
      last_indep = je;
    }
    if (sub.type == "knee_slidercrank") {
      // The slider coordinate drives the abstraction directly, but as a leg
      // shortening along the thigh axis at the knee center: +d flexes.
      const JointEntry* hinge = idx.joints.at(sub.joints[2]);
      plan.output_body = hinge->child;
      if (plan.joints.size() != 1) {
        throw TopologyError("submechanism '" + sub.name + "': expected exactly one independent joint");
      }
      plan.joints[0].knee_override = true;
      plan.joints[0].knee_pre = world_of(hinge->parent) * placement_from(hinge->origin_xyz, hinge->origin_rpy);
    } else {
      if (last_indep == nullptr) {
        throw TopologyError("submechanism '" + sub.name + "' has no independent joints");
      }
      plan.output_body = last_indep->child;
    }
    // The block root must be a segment body (pelvis or an upstream output).
    plans.push_back(std::move(plan));
  }

  // Segment bodies: the root plus each block's output body.
  std::map<std::string, int> segment_of_body;  // doc body -> abstraction body index

  RigidBodyTree& abs = model.abstraction;
  abs.set_gravity(doc.gravity);
  int base = abs.add_body(root_name, -1, JointModel::floating(), SpatialInertia::Zero());
  segment_of_body[root_name] = base;

  std::map<int, Placement> segment_world;
  segment_world[base] = Placement::Identity();

  for (size_t bi = 0; bi < plans.size(); ++bi) {
    const BlockPlan& plan = plans[bi];
    auto host_it = segment_of_body.find(plan.root_body);
    if (host_it == segment_of_body.end()) {
      throw TopologyError("submechanism '" + doc.submechanisms[bi].name + "' is rooted on '" +
                          plan.root_body + "', which is not the base or an upstream output body");
    }
    int parent = host_it->second;
    Placement parent_world = segment_world.at(parent);
    for (size_t k = 0; k < plan.joints.size(); ++k) {
      const ChainedJoint& cj = plan.joints[k];
      bool last = (k + 1 == plan.joints.size());
      std::string body_name = last ? plan.output_body : (plan.output_body + "_" + cj.entry->name);
      JointModel jm;
      if (cj.knee_override) {
        jm = JointModel::prismatic(Vec3::UnitZ(), parent_world.inverse() * cj.knee_pre);
        jm.limits = joint_model_from_entry(*cj.entry).limits;
      } else {
        jm = joint_model_from_entry(*cj.entry);
        jm.parent_frame = parent_world.inverse() * cj.pre;
      }
      // Reuse the independent joint's name so trajectories can be labelled.
      parent = abs.add_body(cj.entry->name + "@abs", parent, jm, SpatialInertia::Zero());
      if (last) abs.add_frame(plan.output_body, parent);
      // Reference placement of the abstraction body equals the mirrored
      // document body's reference placement.
      parent_world = cj.knee_override ? world_of(plan.output_body) : world_of(cj.entry->child);
    }
    segment_of_body[plan.output_body] = parent;
    segment_world[parent] = world_of(plan.output_body);
  }

  // Inertia lumping: nearest segment ancestor at the reference posture.
  std::map<int, SpatialInertia> lumped;  // abstraction body -> inertia in segment frame
  {
    const BodyEntry* rootb = idx.bodies.at(root_name);
    lumped[base] = inertia_from_entry(*rootb);
  }
  for (int i = 0; i < full.num_bodies(); ++i) {
    std::string name = full.body(i).name;
    // Walk up the document tree to the nearest segment body.
    std::string cursor = name;
    while (!segment_of_body.count(cursor)) {
      cursor = idx.joint_by_child.at(cursor)->parent;
    }
    int seg = segment_of_body.at(cursor);
    Placement seg_world = (seg == base) ? Placement::Identity() : world_of(cursor);
    Placement rel = seg_world.inverse() * X_ref[i];
    SpatialInertia contribution = transform_inertia(rel, full.body(i).inertia);
    auto it = lumped.find(seg);
    if (it == lumped.end()) {
      lumped[seg] = contribution;
    } else {
      it->second = it->second + contribution;
    }
  }
  // RigidBodyTree bodies are immutable; rebuild with the lumped inertias.
  {
    RigidBodyTree rebuilt;
    rebuilt.set_gravity(doc.gravity);
    for (int i = 0; i < abs.num_bodies(); ++i) {
      const Body& b = abs.body(i);
      SpatialInertia inertia = lumped.count(i) ? lumped.at(i) : SpatialInertia::Zero();
      rebuilt.add_body(b.name, b.parent, b.joint, inertia);
    }
    for (int f = 0; f < abs.num_frames(); ++f) {
      const Frame& fr = abs.frame(f);
      if (!rebuilt.has_frame(fr.name)) rebuilt.add_frame(fr.name, fr.body, fr.local);
    }
    abs = std::move(rebuilt);
  }

  // Foot frames, expressed in their owning segments.
  double lowest_sole = 0.0;
  for (const auto& foot : doc.feet) {
    auto fit = idx.frames.find(foot.frame);
    if (fit == idx.frames.end()) throw TopologyError("foot frame '" + foot.frame + "' is not defined");
    std::string cursor = fit->second->body;
    while (!segment_of_body.count(cursor)) cursor = idx.joint_by_child.at(cursor)->parent;
    int seg = segment_of_body.at(cursor);
    Placement seg_world = (seg == base) ? Placement::Identity() : world_of(cursor);
    Placement frame_world = world_of(fit->second->body) * placement_from(fit->second->xyz, fit->second->rpy);
    abs.add_frame(foot.frame, seg, seg_world.inverse() * frame_world);
    lowest_sole = std::min(lowest_sole, frame_world.translation.z());
    model.feet.push_back(FootGeometry{foot.frame, foot.half_length, foot.half_width});
  }

  model.abstraction_q0 = abs.neutral_configuration();
  model.abstraction_q0[2] = -lowest_sole;  // soles on the ground plane
  // Independent joints at their reference values.
  VecX y_ref = model.closure.extract_independent(q_ref);
  model.abstraction_q0.tail(model.closure.m()) = y_ref;
}

}  // namespace

HybridModel build_model(const ModelDocument& doc) {
  DocumentIndex idx = index_document(doc);

  HybridModel model;
  model.name = doc.name;

  // -- Full spanning tree ---------------------------------------------------
  std::string root_name;
  std::vector<std::string> order = topological_bodies(doc, idx, &root_name);

  // Joints must be listed grouped by submechanism in document order so the
  // global coordinate layout matches the closure map's block layout.
  std::map<std::string, int> joint_block;
  std::map<std::string, int> joint_local_pos;
  for (size_t b = 0; b < doc.submechanisms.size(); ++b) {
    const auto& sub = doc.submechanisms[b];
    for (size_t k = 0; k < sub.joints.size(); ++k) {
      if (!idx.joints.count(sub.joints[k])) {
        throw TopologyError("submechanism '" + sub.name + "' references unknown joint '" +
                            sub.joints[k] + "'");
      }
      if (joint_block.count(sub.joints[k])) {
        throw TopologyError("joint '" + sub.joints[k] + "' appears in more than one submechanism");
      }
      joint_block[sub.joints[k]] = static_cast<int>(b);
      joint_local_pos[sub.joints[k]] = static_cast<int>(k);
    }
  }
  for (const auto& j : doc.joints) {
    if (!joint_block.count(j.name)) {
      throw TopologyError("joint '" + j.name + "' does not belong to any submechanism");
    }
  }

  // Global body order: by (block, local position) of the attaching joint.
  std::vector<const JointEntry*> joint_order;
  for (const auto& sub : doc.submechanisms) {
    for (const auto& jname : sub.joints) joint_order.push_back(idx.joints.at(jname));
  }

  RigidBodyTree& full = model.full_tree;
  full.set_gravity(doc.gravity);
  std::map<std::string, int> body_index;

  // The root body is rigidly attached to the world and carries no
  // coordinates; bodies whose parent is the root attach at parent index -1.
  // Its inertia rides on the abstraction's floating base instead.
  for (const JointEntry* je : joint_order) {
    int parent;
    if (je->parent == root_name) {
      parent = -1;
    } else {
      auto it = body_index.find(je->parent);
      if (it == body_index.end() || it->second < 0) {
        throw TopologyError("joint '" + je->name + "': parent body '" + je->parent +
                            "' is not yet placed (joints must be listed parent-first within blocks)");
      }
      parent = it->second;
    }
    const BodyEntry* child = idx.bodies.at(je->child);
    int bidx = full.add_body(je->child, parent, joint_model_from_entry(*je), inertia_from_entry(*child));
    body_index[je->child] = bidx;
  }
  for (const auto& f : doc.frames) {
    if (f.body == root_name) continue;  // frames on the fixed base are not used downstream
    full.add_frame(f.name, body_index.at(f.body), placement_from(f.xyz, f.rpy));
  }

  // -- Submechanism blocks ----------------------------------------------------
  std::vector<Submechanism> blocks;
  for (const auto& sub : doc.submechanisms) {
    RigidBodyTree local;
    std::map<std::string, int> local_body;
    std::set<std::string> block_bodies;
    std::string block_root;
    for (const auto& jname : sub.joints) block_bodies.insert(idx.joints.at(jname)->child);
    std::vector<int> independent;
    std::vector<CoupledCoordinate> couplings;
    int qpos = 0;
    std::map<std::string, int> local_qpos;
    for (const auto& jname : sub.joints) {
      const JointEntry* je = idx.joints.at(jname);
      int parent;
      if (block_bodies.count(je->parent)) {
        auto it = local_body.find(je->parent);
        if (it == local_body.end()) {
          throw TopologyError("submechanism '" + sub.name + "': joint '" + jname +
                              "' listed before its parent body '" + je->parent + "'");
        }
        parent = it->second;
      } else {
        if (block_root.empty()) block_root = je->parent;
        if (je->parent != block_root) {
          throw TopologyError("submechanism '" + sub.name + "' has two root attachments: '" +
                              block_root + "' and '" + je->parent + "'");
        }
        parent = -1;
      }
      JointModel jm = joint_model_from_entry(*je);
      const BodyEntry* child = idx.bodies.at(je->child);
      int bidx = local.add_body(je->child, parent, jm, inertia_from_entry(*child));
      local_body[je->child] = bidx;
      local_qpos[jname] = qpos;
      if (je->independent) independent.push_back(qpos);
      qpos += jm.nq();
      if (jm.nq() != jm.nv()) {
        throw TopologyError("submechanism '" + sub.name + "': joint '" + jname +
                            "' has quaternion coordinates; model cut joints as frame pairs instead");
      }
    }
    for (const auto& jname : sub.joints) {
      const JointEntry* je = idx.joints.at(jname);
      if (je->mimic) {
        if (!local_qpos.count(je->mimic->joint)) {
          throw TopologyError("joint '" + jname + "' mimics '" + je->mimic->joint +
                              "' which is outside its submechanism");
        }
        couplings.push_back(CoupledCoordinate{local_qpos.at(jname), local_qpos.at(je->mimic->joint),
                                              je->mimic->multiplier, je->mimic->offset});
      }
    }
    // Local frames used by cut joints.
    std::vector<CutJoint> cuts;
    for (const auto& c : sub.cuts) {
      auto add_local_frame = [&](const std::string& fname) -> FrameId {
        if (local.has_frame(fname)) return local.frame_index(fname);
        auto it = idx.frames.find(fname);
        if (it == idx.frames.end()) {
          throw TopologyError("cut '" + c.name + "': unknown frame '" + fname + "'");
        }
        if (!local_body.count(it->second->body)) {
          throw TopologyError("cut '" + c.name + "': frame '" + fname +
                              "' is not on a body of submechanism '" + sub.name + "'");
        }
        return local.add_frame(fname, local_body.at(it->second->body),
                               placement_from(it->second->xyz, it->second->rpy));
      };
      FrameId fa = add_local_frame(c.frame_a);
      FrameId fb = add_local_frame(c.frame_b);
      cuts.push_back(CutJoint{c.name, fa, fb});
    }
    VecX reference = VecX::Zero(local.nq());
    for (const auto& [jname, value] : sub.reference) {
      auto it = local_qpos.find(jname);
      if (it == local_qpos.end()) {
        throw TopologyError("submechanism '" + sub.name + "': reference names unknown joint '" +
                            jname + "'");
      }
      reference[it->second] = value;
    }
    ResolverKind kind =
        (sub.resolver == "analytical") ? ResolverKind::analytical : ResolverKind::numerical;
    Submechanism block(sub.name, kind, std::move(local), independent, cuts, couplings, reference);
    if (kind == ResolverKind::analytical) {
      if (sub.type == "stewart_6ups") {
        block.set_analytic_position(make_stewart_resolver(sub));
      } else if (sub.type == "knee_slidercrank") {
        block.set_analytic_position(make_knee_resolver(sub));
      } else if (!block.passive_coords().empty()) {
        throw TopologyError("submechanism '" + sub.name + "' of type '" + sub.type +
                            "' has no analytical resolver");
      }
    }
    blocks.push_back(std::move(block));
  }
  model.closure = ExplicitClosureMap(std::move(blocks));
  if (model.closure.n() != model.full_tree.nq()) {
    throw TopologyError("submechanism coordinates (" + std::to_string(model.closure.n()) +
                        ") do not cover the spanning tree (" + std::to_string(model.full_tree.nq()) + ")");
  }

  // -- Independent joint info -------------------------------------------------
  for (const auto& sub : doc.submechanisms) {
    for (const auto& jname : sub.joints) {
      const JointEntry* je = idx.joints.at(jname);
      if (!je->independent) continue;
      IndependentJointInfo info;
      info.name = jname;
      if (je->lower) info.lower = *je->lower;
      if (je->upper) info.upper = *je->upper;
      model.independent.push_back(info);
    }
  }
  if (static_cast<int>(model.independent.size()) != model.closure.m()) {
    throw TopologyError("independent joint bookkeeping mismatch");
  }

  // -- Actuation map ----------------------------------------------------------
  for (const auto& aname : doc.actuators) {
    auto it = idx.joints.find(aname);
    if (it == idx.joints.end()) throw TopologyError("actuator list names unknown joint '" + aname + "'");
    const JointEntry* je = it->second;
    if (!je->actuated) throw TopologyError("actuator '" + aname + "' is not flagged actuated");
    int block = joint_block.at(aname);
    int local = 0;
    {
      const auto& sub = doc.submechanisms[block];
      int qpos = 0;
      for (const auto& jn : sub.joints) {
        if (jn == aname) break;
        qpos += joint_model_from_entry(*idx.joints.at(jn)).nq();
      }
      local = qpos;
    }
    model.actuation.names.push_back(aname);
    model.actuation.coords.push_back(model.closure.q_offset(block) + local);
    auto push = [](VecX& v, double x) {
      v.conservativeResize(v.size() + 1);
      v[v.size() - 1] = x;
    };
    push(model.actuation.rom_lower, je->lower.value_or(-std::numeric_limits<double>::infinity()));
    push(model.actuation.rom_upper, je->upper.value_or(std::numeric_limits<double>::infinity()));
    push(model.actuation.velocity_limit, je->velocity.value_or(std::numeric_limits<double>::infinity()));
    push(model.actuation.effort_limit, je->effort.value_or(std::numeric_limits<double>::infinity()));
  }

  // Calibration check: the stored reference must close every loop.
  {
    VecX y_ref = model.closure.extract_independent(model.closure.reference());
    VecX q_ref = model.closure.gamma(y_ref);
    double res = model.closure.constraint_residual(q_ref).lpNorm<Eigen::Infinity>();
    if (res > 1e-8) {
      throw TopologyError("reference posture does not satisfy the loop closures (residual " +
                          std::to_string(res) + ")");
    }
  }

  // -- Serial abstraction over the independent joints --------------------------
  build_abstraction(doc, idx, root_name, model);
  return model;
}

// ---------------------------------------------------------------------------
// Validation report
// ---------------------------------------------------------------------------

std::string to_string(Severity s) {
  switch (s) {
    case Severity::info: return "info";
    case Severity::warning: return "warning";
    case Severity::violation: return "violation";
  }
  return "unknown";
}

void ValidationReport::add(Severity sev, const std::string& location, const std::string& message,
                           double value, double bound) {
  entries.push_back(ReportEntry{sev, location, message, value, bound});
}

void ValidationReport::sort() {
  std::stable_sort(entries.begin(), entries.end(), [](const ReportEntry& a, const ReportEntry& b) {
    if (a.location != b.location) return a.location < b.location;
    return a.message < b.message;
  });
}

int ValidationReport::violations() const {
  int n = 0;
  for (const auto& e : entries) {
    if (e.severity == Severity::violation) ++n;
  }
  return n;
}

std::string ValidationReport::to_json() const {
  ordered_json root = ordered_json::array();
  for (const auto& e : entries) {
    root.push_back({{"severity", to_string(e.severity)},
                    {"location", e.location},
                    {"message", e.message},
                    {"value", e.value},
                    {"bound", e.bound}});
  }
  return root.dump(2) + "\n";
}

VecX HybridModel::independent_from_configuration(const VecX& q) const {
  // Abstraction layout: floating base (nq 7) then one coordinate per
  // independent joint.
  if (q.size() != abstraction.nq()) throw DimensionError("abstraction configuration size mismatch");
  return q.tail(q.size() - 7);
}

VecX HybridModel::independent_lower() const {
  VecX lo(independent.size());
  for (size_t i = 0; i < independent.size(); ++i) lo[i] = independent[i].lower;
  return lo;
}

VecX HybridModel::independent_upper() const {
  VecX hi(independent.size());
  for (size_t i = 0; i < independent.size(); ++i) hi[i] = independent[i].upper;
  return hi;
}

HybridModel build_synthetic_recupera() { return build_model(synthetic_recupera_document()); }

}  // namespace loom
