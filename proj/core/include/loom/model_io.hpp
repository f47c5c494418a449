#ifndef LOOM_MODEL_IO_HPP
#define LOOM_MODEL_IO_HPP

#include <map>
#include <optional>

#include "loom/loop_closure.hpp"

namespace loom {

class ParseError : public Error {
public:
  ParseError(const std::string& path, const std::string& message)
      : Error(path + ": " + message), path_(path) {}
  const std::string& path() const { return path_; }

private:
  std::string path_;
};

class SchemaError : public ParseError {
public:
  using ParseError::ParseError;
};

class TopologyError : public Error {
public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Model document: the on-disk mechanism description. SI units, radians.
// ---------------------------------------------------------------------------

struct BodyEntry {
  std::string name;
  double mass = 0.0;
  Vec3 com = Vec3::Zero();
  // ixx, iyy, izz, ixy, ixz, iyz about the CoM
  std::array<double, 6> inertia{0, 0, 0, 0, 0, 0};
};

struct JointEntry {
  std::string name;
  std::string kind;  // revolute | prismatic | spherical | universal | floating_base
  std::string parent;
  std::string child;
  Vec3 origin_xyz = Vec3::Zero();
  Vec3 origin_rpy = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  std::optional<Vec3> axis2;
  std::optional<double> lower, upper, velocity, effort;
  bool actuated = false;
  bool independent = false;
  struct Mimic {
    std::string joint;
    double multiplier = 1.0;
    double offset = 0.0;
  };
  std::optional<Mimic> mimic;
};

struct FrameEntry {
  std::string name;
  std::string body;
  Vec3 xyz = Vec3::Zero();
  Vec3 rpy = Vec3::Zero();
};

struct CutEntry {
  std::string name;
  std::string frame_a;
  std::string frame_b;
};

struct SubmechanismEntry {
  std::string name;
  std::string type;      // stewart_6ups | knee_slidercrank | hip_ankle_3r2us | custom
  std::string resolver;  // analytical | numerical
  std::vector<std::string> joints;  // local coordinate order
  std::vector<CutEntry> cuts;
  std::map<std::string, double> reference;  // joint name -> value
  // Type-specific closed-form parameters, stored as opaque scalars/vectors.
  std::map<std::string, std::vector<double>> geometry;
};

struct FootEntry {
  std::string frame;
  double half_length = 0.0;  // x extent
  double half_width = 0.0;   // y extent
};

struct ModelDocument {
  std::string schema_version = "1";
  std::string name;
  Vec3 gravity{0.0, 0.0, -9.81};
  std::vector<BodyEntry> bodies;
  std::vector<JointEntry> joints;
  std::vector<FrameEntry> frames;
  std::vector<SubmechanismEntry> submechanisms;
  std::vector<FootEntry> feet;
  std::vector<std::string> actuators;  // joint names, actuation order
};

/// Strict parse: unknown fields, bad types, duplicate names, and non-tree
/// joint graphs are all rejected with the offending document path.
ModelDocument parse_model(const std::string& text);
std::string serialize_model(const ModelDocument& doc);
ModelDocument load_model_file(const std::string& path);

bool documents_equal(const ModelDocument& a, const ModelDocument& b);

// ---------------------------------------------------------------------------
// Built model
// ---------------------------------------------------------------------------

struct IndependentJointInfo {
  std::string name;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
};

struct FootGeometry {
  std::string frame;  // frame name, present in both full tree and abstraction
  double half_length = 0.0;
  double half_width = 0.0;
};

/// Everything downstream consumers need: the full spanning tree with its
/// closure map, and the serial abstraction over the independent joints
/// (floating base + one joint per independent coordinate).
struct HybridModel {
  std::string name;
  RigidBodyTree full_tree;
  ExplicitClosureMap closure;
  ActuationMap actuation;
  std::vector<IndependentJointInfo> independent;  // size closure.m()

  RigidBodyTree abstraction;  // floating base + m single-dof joints
  VecX abstraction_q0;        // reference standing configuration
  std::vector<FootGeometry> feet;

  int m() const { return closure.m(); }
  /// Map abstraction configuration -> independent coordinates (strips base).
  VecX independent_from_configuration(const VecX& q) const;
  VecX independent_lower() const;
  VecX independent_upper() const;
};

HybridModel build_model(const ModelDocument& doc);

/// Bundled synthetic topology: reproduces the published joint counts,
/// range-of-motion tables, actuator ratings, and total mass; link geometry
/// is a documented stand-in, not the physical robot.
ModelDocument synthetic_recupera_document();
HybridModel build_synthetic_recupera();

// ---------------------------------------------------------------------------
// Validation report
// ---------------------------------------------------------------------------

enum class Severity { info, warning, violation };
std::string to_string(Severity s);

struct ReportEntry {
  Severity severity = Severity::info;
  std::string location;  // joint/actuator/phase identifier
  std::string message;
  double value = 0.0;
  double bound = 0.0;
};

struct ValidationReport {
  std::vector<ReportEntry> entries;

  void add(Severity sev, const std::string& location, const std::string& message, double value,
           double bound);
  /// Deterministic ordering by location then message.
  void sort();
  int violations() const;
  std::string to_json() const;
};

}  // namespace loom

#endif
