#include "loom/model.hpp"

#include <cmath>

namespace loom {

std::string to_string(JointKind kind) {
  switch (kind) {
    case JointKind::revolute: return "revolute";
    case JointKind::prismatic: return "prismatic";
    case JointKind::spherical: return "spherical";
    case JointKind::universal: return "universal";
    case JointKind::floating_base: return "floating_base";
  }
  return "unknown";
}

JointKind joint_kind_from_string(const std::string& s) {
  if (s == "revolute") return JointKind::revolute;
  if (s == "prismatic") return JointKind::prismatic;
  if (s == "spherical") return JointKind::spherical;
  if (s == "universal") return JointKind::universal;
  if (s == "floating_base") return JointKind::floating_base;
  throw Error("unknown joint kind: " + s);
}

int JointModel::nq() const {
  switch (kind) {
    case JointKind::revolute:
    case JointKind::prismatic: return 1;
    case JointKind::universal: return 2;
    case JointKind::spherical: return 4;
    case JointKind::floating_base: return 7;
  }
  return 0;
}

int JointModel::nv() const {
  switch (kind) {
    case JointKind::revolute:
    case JointKind::prismatic: return 1;
    case JointKind::universal: return 2;
    case JointKind::spherical: return 3;
    case JointKind::floating_base: return 6;
  }
  return 0;
}

static Vec3 checked_axis(const Vec3& axis) {
  double n = axis.norm();
  if (std::abs(n - 1.0) > 1e-10) {
    throw Error("joint axis must be unit length");
  }
  return axis;
}

JointModel JointModel::revolute(const Vec3& axis, const Placement& X) {
  JointModel j;
  j.kind = JointKind::revolute;
  j.axis = checked_axis(axis);
  j.parent_frame = X;
  return j;
}

JointModel JointModel::prismatic(const Vec3& axis, const Placement& X) {
  JointModel j;
  j.kind = JointKind::prismatic;
  j.axis = checked_axis(axis);
  j.parent_frame = X;
  return j;
}

JointModel JointModel::spherical(const Placement& X) {
  JointModel j;
  j.kind = JointKind::spherical;
  j.parent_frame = X;
  return j;
}

JointModel JointModel::universal(const Vec3& a1, const Vec3& a2, const Placement& X) {
  JointModel j;
  j.kind = JointKind::universal;
  j.axis = checked_axis(a1);
  j.axis2 = checked_axis(a2);
  j.parent_frame = X;
  return j;
}

JointModel JointModel::floating(const Placement& X) {
  JointModel j;
  j.kind = JointKind::floating_base;
  j.parent_frame = X;
  return j;
}

int RigidBodyTree::add_body(const std::string& name, int parent, const JointModel& joint,
                            const SpatialInertia& inertia) {
  if (parent >= static_cast<int>(bodies_.size())) {
    throw Error("body '" + name + "': parent index " + std::to_string(parent) +
                " is not yet in the tree");
  }
  if (parent < -1) {
    throw Error("body '" + name + "': invalid parent index");
  }
  if (body_by_name_.count(name)) {
    throw Error("duplicate body name: " + name);
  }
  if (joint.limits.lower.size() > 0 &&
      (joint.limits.lower.size() != joint.nq() || joint.limits.upper.size() != joint.nq())) {
    throw DimensionError("body '" + name + "': position limit size mismatch");
  }
  for (int k = 0; k < joint.limits.lower.size(); ++k) {
    if (joint.limits.lower[k] > joint.limits.upper[k]) {
      throw Error("body '" + name + "': position limit lower > upper");
    }
  }
  Body b;
  b.name = name;
  b.parent = parent;
  b.joint = joint;
  b.inertia = inertia;
  idx_q_.push_back(nq_);
  idx_v_.push_back(nv_);
  nq_ += joint.nq();
  nv_ += joint.nv();
  bodies_.push_back(std::move(b));
  int idx = static_cast<int>(bodies_.size()) - 1;
  body_by_name_[name] = idx;
  // Every body carries an implicit frame at its origin.
  add_frame(name, idx);
  return idx;
}

FrameId RigidBodyTree::add_frame(const std::string& name, int body, const Placement& local) {
  if (body < 0 || body >= static_cast<int>(bodies_.size())) {
    throw Error("frame '" + name + "': body index out of range");
  }
  if (frame_by_name_.count(name)) {
    throw Error("duplicate frame name: " + name);
  }
  frames_.push_back(Frame{name, body, local});
  int idx = static_cast<int>(frames_.size()) - 1;
  frame_by_name_[name] = idx;
  return idx;
}

int RigidBodyTree::body_index(const std::string& name) const {
  auto it = body_by_name_.find(name);
  if (it == body_by_name_.end()) throw UnknownFrameError("unknown body: " + name);
  return it->second;
}

FrameId RigidBodyTree::frame_index(const std::string& name) const {
  auto it = frame_by_name_.find(name);
  if (it == frame_by_name_.end()) throw UnknownFrameError("unknown frame: " + name);
  return it->second;
}

bool RigidBodyTree::has_frame(const std::string& name) const {
  return frame_by_name_.count(name) > 0;
}

double RigidBodyTree::total_mass() const {
  double m = 0.0;
  for (const auto& b : bodies_) m += b.inertia.mass;
  return m;
}

VecX RigidBodyTree::neutral_configuration() const {
  VecX q = VecX::Zero(nq_);
  for (int i = 0; i < num_bodies(); ++i) {
    const auto& j = bodies_[i].joint;
    if (j.kind == JointKind::spherical) {
      q[idx_q_[i] + 3] = 1.0;  // unit quaternion, w last
    } else if (j.kind == JointKind::floating_base) {
      q[idx_q_[i] + 6] = 1.0;
    }
  }
  return q;
}

void RigidBodyTree::check_configuration(const VecX& q) const {
  if (q.size() != nq_) {
    throw DimensionError("configuration size " + std::to_string(q.size()) + ", expected " +
                         std::to_string(nq_));
  }
  for (int i = 0; i < num_bodies(); ++i) {
    const auto& j = bodies_[i].joint;
    int off = -1;
    if (j.kind == JointKind::spherical) off = idx_q_[i];
    if (j.kind == JointKind::floating_base) off = idx_q_[i] + 3;
    if (off >= 0) {
      double n = q.segment<4>(off).norm();
      if (std::abs(n - 1.0) > 1e-8) {
        throw Error("quaternion block of body '" + bodies_[i].name + "' is not unit (norm " +
                    std::to_string(n) + ")");
      }
    }
  }
}

void RigidBodyTree::check_velocity(const VecX& v) const {
  if (v.size() != nv_) {
    throw DimensionError("velocity size " + std::to_string(v.size()) + ", expected " +
                         std::to_string(nv_));
  }
}

static Quat quat_from_segment(const Eigen::Ref<const VecX>& q, int off) {
  return Quat(q[off + 3], q[off], q[off + 1], q[off + 2]);  // stored x,y,z,w
}

Placement joint_placement(const JointModel& joint, const Eigen::Ref<const VecX>& q_seg) {
  switch (joint.kind) {
    case JointKind::revolute:
      return Placement::from_rotation(Eigen::AngleAxisd(q_seg[0], joint.axis).toRotationMatrix());
    case JointKind::prismatic:
      return Placement::from_translation(joint.axis * q_seg[0]);
    case JointKind::universal: {
      Mat3 R = Eigen::AngleAxisd(q_seg[0], joint.axis).toRotationMatrix() *
               Eigen::AngleAxisd(q_seg[1], joint.axis2).toRotationMatrix();
      return Placement::from_rotation(R);
    }
    case JointKind::spherical: {
      Quat quat = quat_from_segment(q_seg, 0);
      return Placement::from_quaternion(quat, Vec3::Zero());
    }
    case JointKind::floating_base: {
      Quat quat = quat_from_segment(q_seg, 3);
      return Placement::from_quaternion(quat, q_seg.head<3>());
    }
  }
  return Placement::Identity();
}

void joint_motion_subspace(const JointModel& joint, const Eigen::Ref<const VecX>& q_seg,
                           Eigen::Ref<MatX> S) {
  S.setZero();
  switch (joint.kind) {
    case JointKind::revolute:
      S.col(0).head<3>() = joint.axis;
      break;
    case JointKind::prismatic:
      S.col(0).tail<3>() = joint.axis;
      break;
    case JointKind::universal: {
      // First axis expressed in the child frame: undo the second rotation.
      Mat3 R2t = Eigen::AngleAxisd(-q_seg[1], joint.axis2).toRotationMatrix();
      S.col(0).head<3>() = R2t * joint.axis;
      S.col(1).head<3>() = joint.axis2;
      break;
    }
    case JointKind::spherical:
      S.topLeftCorner<3, 3>().setIdentity();
      break;
    case JointKind::floating_base:
      S.setIdentity();
      break;
  }
}

Motion joint_bias(const JointModel& joint, const Eigen::Ref<const VecX>& q_seg,
                  const Eigen::Ref<const VecX>& v_seg) {
  if (joint.kind != JointKind::universal) return Motion::Zero();
  // d/dt of the first column of S: -qdot2 * a2 x (R2^T a1), times qdot1.
  Mat3 R2t = Eigen::AngleAxisd(-q_seg[1], joint.axis2).toRotationMatrix();
  Vec3 s1 = R2t * joint.axis;
  Vec3 ang = -v_seg[1] * joint.axis2.cross(s1) * v_seg[0];
  return Motion(ang, Vec3::Zero());
}

VecX integrate_configuration(const RigidBodyTree& tree, const VecX& q, const VecX& dq) {
  tree.check_configuration(q);
  tree.check_velocity(dq);
  VecX out(q.size());
  for (int i = 0; i < tree.num_bodies(); ++i) {
    const auto& j = tree.body(i).joint;
    int iq = tree.idx_q(i), iv = tree.idx_v(i);
    switch (j.kind) {
      case JointKind::revolute:
      case JointKind::prismatic:
        out[iq] = q[iq] + dq[iv];
        break;
      case JointKind::universal:
        out.segment<2>(iq) = q.segment<2>(iq) + dq.segment<2>(iv);
        break;
      case JointKind::spherical: {
        Quat quat = quat_from_segment(q, iq);
        Quat next = quat * quat_exp(dq.segment<3>(iv));
        next.normalize();
        out.segment<4>(iq) << next.x(), next.y(), next.z(), next.w();
        break;
      }
      case JointKind::floating_base: {
        Quat quat = quat_from_segment(q, iq + 3);
        // Local-frame increment, angular-first to match the motion convention.
        out.segment<3>(iq) = q.segment<3>(iq) + quat.toRotationMatrix() * dq.segment<3>(iv + 3);
        Quat next = quat * quat_exp(dq.segment<3>(iv));
        next.normalize();
        out.segment<4>(iq + 3) << next.x(), next.y(), next.z(), next.w();
        break;
      }
    }
  }
  return out;
}

VecX difference_configuration(const RigidBodyTree& tree, const VecX& q0, const VecX& q1) {
  tree.check_configuration(q0);
  tree.check_configuration(q1);
  VecX out(tree.nv());
  for (int i = 0; i < tree.num_bodies(); ++i) {
    const auto& j = tree.body(i).joint;
    int iq = tree.idx_q(i), iv = tree.idx_v(i);
    switch (j.kind) {
      case JointKind::revolute:
      case JointKind::prismatic:
        out[iv] = q1[iq] - q0[iq];
        break;
      case JointKind::universal:
        out.segment<2>(iv) = q1.segment<2>(iq) - q0.segment<2>(iq);
        break;
      case JointKind::spherical: {
        Quat a = quat_from_segment(q0, iq), b = quat_from_segment(q1, iq);
        out.segment<3>(iv) = log3((a.conjugate() * b).toRotationMatrix());
        break;
      }
      case JointKind::floating_base: {
        Quat a = quat_from_segment(q0, iq + 3), b = quat_from_segment(q1, iq + 3);
        Mat3 Ra = a.toRotationMatrix();
        out.segment<3>(iv) = log3((a.conjugate() * b).toRotationMatrix());
        out.segment<3>(iv + 3) = Ra.transpose() * (q1.segment<3>(iq) - q0.segment<3>(iq));
        break;
      }
    }
  }
  return out;
}

}  // namespace loom
