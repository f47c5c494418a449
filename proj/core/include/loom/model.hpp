#ifndef LOOM_MODEL_HPP
#define LOOM_MODEL_HPP

#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "loom/spatial.hpp"

namespace loom {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class UnknownFrameError : public Error {
public:
  using Error::Error;
};

enum class JointKind { revolute, prismatic, spherical, universal, floating_base };

std::string to_string(JointKind kind);
JointKind joint_kind_from_string(const std::string& s);

struct JointLimits {
  VecX lower;  // one entry per position coordinate; empty means unbounded
  VecX upper;
  double velocity = std::numeric_limits<double>::infinity();
  double effort = std::numeric_limits<double>::infinity();
};

struct JointModel {
  JointKind kind = JointKind::revolute;
  Vec3 axis = Vec3::UnitZ();    // revolute/prismatic; first axis of universal
  Vec3 axis2 = Vec3::UnitY();   // second axis of universal, in the rotated frame
  Placement parent_frame;       // joint frame in the parent body frame
  JointLimits limits;

  int nq() const;
  int nv() const;

  static JointModel revolute(const Vec3& axis, const Placement& X = Placement::Identity());
  static JointModel prismatic(const Vec3& axis, const Placement& X = Placement::Identity());
  static JointModel spherical(const Placement& X = Placement::Identity());
  static JointModel universal(const Vec3& a1, const Vec3& a2,
                              const Placement& X = Placement::Identity());
  static JointModel floating(const Placement& X = Placement::Identity());
};

struct Body {
  std::string name;
  int parent = -1;  // -1: attached to the fixed world base
  JointModel joint;
  SpatialInertia inertia;
};

/// Named frame rigidly attached to a body.
struct Frame {
  std::string name;
  int body = -1;
  Placement local;
};

using FrameId = int;

/// Topologically sorted rigid-body tree. Immutable once built; all
/// per-state quantities live in caller-owned buffers.
class RigidBodyTree {
public:
  RigidBodyTree() = default;

  /// Append a body; parent must already exist (or be -1 for a root).
  int add_body(const std::string& name, int parent, const JointModel& joint,
               const SpatialInertia& inertia);

  FrameId add_frame(const std::string& name, int body,
                    const Placement& local = Placement::Identity());

  int num_bodies() const { return static_cast<int>(bodies_.size()); }
  int num_frames() const { return static_cast<int>(frames_.size()); }
  int nq() const { return nq_; }
  int nv() const { return nv_; }

  const Body& body(int i) const { return bodies_[i]; }
  const std::vector<Body>& bodies() const { return bodies_; }
  const Frame& frame(FrameId i) const { return frames_[i]; }

  int body_index(const std::string& name) const;
  FrameId frame_index(const std::string& name) const;
  bool has_frame(const std::string& name) const;

  /// First position / velocity coordinate of body i's joint.
  int idx_q(int i) const { return idx_q_[i]; }
  int idx_v(int i) const { return idx_v_[i]; }

  const Vec3& gravity() const { return gravity_; }
  void set_gravity(const Vec3& g) { gravity_ = g; }

  double total_mass() const;

  /// Neutral configuration: zeros, identity quaternions.
  VecX neutral_configuration() const;

  void check_configuration(const VecX& q) const;
  void check_velocity(const VecX& v) const;

private:
  std::vector<Body> bodies_;
  std::vector<Frame> frames_;
  std::vector<int> idx_q_, idx_v_;
  std::map<std::string, int> body_by_name_;
  std::map<std::string, int> frame_by_name_;
  Vec3 gravity_{0.0, 0.0, -9.81};
  int nq_ = 0;
  int nv_ = 0;
};

struct TreeState {
  VecX q;
  VecX v;
  VecX a;

  TreeState() = default;
  explicit TreeState(const RigidBodyTree& tree)
      : q(tree.neutral_configuration()), v(VecX::Zero(tree.nv())), a(VecX::Zero(tree.nv())) {}
};

/// Local placement of a joint for the given coordinate segment.
Placement joint_placement(const JointModel& joint, const Eigen::Ref<const VecX>& q_seg);

/// Motion subspace S (6 x nv) in the child frame, and the velocity-product
/// bias term c = S'(q) qdot (nonzero only for the universal joint).
void joint_motion_subspace(const JointModel& joint, const Eigen::Ref<const VecX>& q_seg,
                           Eigen::Ref<MatX> S);
Motion joint_bias(const JointModel& joint, const Eigen::Ref<const VecX>& q_seg,
                  const Eigen::Ref<const VecX>& v_seg);

/// Configuration-space retraction q+ = q (+) dq with dq in velocity space.
VecX integrate_configuration(const RigidBodyTree& tree, const VecX& q, const VecX& dq);

/// Velocity-space difference: integrate_configuration(tree, q0, result) == q1.
VecX difference_configuration(const RigidBodyTree& tree, const VecX& q0, const VecX& q1);

}  // namespace loom

#endif
