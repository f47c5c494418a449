#include "loom/kinematics.hpp"

namespace loom {

std::vector<Placement> forward_kinematics(const RigidBodyTree& tree, const VecX& q) {
  tree.check_configuration(q);
  std::vector<Placement> X(tree.num_bodies());
  for (int i = 0; i < tree.num_bodies(); ++i) {
    const Body& b = tree.body(i);
    Placement local = b.joint.parent_frame * joint_placement(b.joint, q.segment(tree.idx_q(i), b.joint.nq()));
    X[i] = (b.parent >= 0) ? X[b.parent] * local : local;
  }
  return X;
}

Placement frame_placement(const RigidBodyTree& tree, const std::vector<Placement>& body_X,
                          FrameId frame) {
  const Frame& f = tree.frame(frame);
  return body_X[f.body] * f.local;
}

Placement frame_placement(const RigidBodyTree& tree, const VecX& q, FrameId frame) {
  return frame_placement(tree, forward_kinematics(tree, q), frame);
}

void frame_jacobian(const RigidBodyTree& tree, const VecX& q, const std::vector<Placement>& body_X,
                    FrameId frame, Eigen::Ref<MatX> J) {
  if (frame < 0 || frame >= tree.num_frames()) {
    throw UnknownFrameError("frame id " + std::to_string(frame) + " out of range");
  }
  const Frame& f = tree.frame(frame);
  Vec3 p_f = (body_X[f.body] * f.local).translation;

  J.setZero();
  MatX S(6, 6);
  for (int b = f.body; b >= 0; b = tree.body(b).parent) {
    const JointModel& joint = tree.body(b).joint;
    int nvj = joint.nv();
    joint_motion_subspace(joint, q.segment(tree.idx_q(b), joint.nq()), S.leftCols(nvj));
    const Mat3& R = body_X[b].rotation;
    const Vec3& p_b = body_X[b].translation;
    for (int k = 0; k < nvj; ++k) {
      Vec3 ang = R * S.col(k).head<3>();
      Vec3 lin = R * S.col(k).tail<3>() + ang.cross(p_f - p_b);
      J.col(tree.idx_v(b) + k).head<3>() = ang;
      J.col(tree.idx_v(b) + k).tail<3>() = lin;
    }
  }
}

MatX frame_jacobian(const RigidBodyTree& tree, const VecX& q, FrameId frame) {
  auto X = forward_kinematics(tree, q);
  MatX J(6, tree.nv());
  frame_jacobian(tree, q, X, frame, J);
  return J;
}

MotionCache propagate_motion(const RigidBodyTree& tree, const VecX& q, const VecX& v) {
  tree.check_configuration(q);
  tree.check_velocity(v);
  MotionCache d;
  d.X.resize(tree.num_bodies());
  d.v.resize(tree.num_bodies());
  d.a_bias.resize(tree.num_bodies());
  MatX S(6, 6);
  for (int i = 0; i < tree.num_bodies(); ++i) {
    const Body& b = tree.body(i);
    const auto q_seg = q.segment(tree.idx_q(i), b.joint.nq());
    const auto v_seg = v.segment(tree.idx_v(i), b.joint.nv());
    Placement local = b.joint.parent_frame * joint_placement(b.joint, q_seg);
    joint_motion_subspace(b.joint, q_seg, S.leftCols(b.joint.nv()));
    Motion vj = Motion::from_vector(S.leftCols(b.joint.nv()) * v_seg);
    Motion cj = joint_bias(b.joint, q_seg, v_seg);
    if (b.parent >= 0) {
      d.X[i] = d.X[b.parent] * local;
      Motion vp = transform_motion_inverse(local, d.v[b.parent]);
      Motion ap = transform_motion_inverse(local, d.a_bias[b.parent]);
      d.v[i] = vp + vj;
      d.a_bias[i] = ap + cj + motion_cross(d.v[i], vj);
    } else {
      d.X[i] = local;
      d.v[i] = vj;
      d.a_bias[i] = cj;  // base at rest; drift is purely kinematic
    }
  }
  return d;
}

namespace {

/// Express a body-coordinates spatial vector in world axes with reference
/// point p_ref.
Motion to_world_aligned(const Placement& X_body, const Vec3& p_ref, const Motion& m_body) {
  Vec3 ang = X_body.rotation * m_body.angular;
  Vec3 lin = X_body.rotation * m_body.linear + ang.cross(p_ref - X_body.translation);
  return {ang, lin};
}

}  // namespace

Motion frame_velocity(const RigidBodyTree& tree, const MotionCache& cache, FrameId frame) {
  const Frame& f = tree.frame(frame);
  Vec3 p_f = (cache.X[f.body] * f.local).translation;
  return to_world_aligned(cache.X[f.body], p_f, cache.v[f.body]);
}

Motion frame_velocity(const RigidBodyTree& tree, const VecX& q, const VecX& v, FrameId frame) {
  return frame_velocity(tree, propagate_motion(tree, q, v), frame);
}

Motion frame_drift(const RigidBodyTree& tree, const MotionCache& cache, FrameId frame) {
  const Frame& f = tree.frame(frame);
  Vec3 p_f = (cache.X[f.body] * f.local).translation;
  Motion vel = to_world_aligned(cache.X[f.body], p_f, cache.v[f.body]);
  Motion acc = to_world_aligned(cache.X[f.body], p_f, cache.a_bias[f.body]);
  // Classical acceleration of the material point at the frame origin.
  return {acc.angular, acc.linear + vel.angular.cross(vel.linear)};
}

Motion frame_drift(const RigidBodyTree& tree, const VecX& q, const VecX& v, FrameId frame) {
  return frame_drift(tree, propagate_motion(tree, q, v), frame);
}

Vec3 com_position(const RigidBodyTree& tree, const VecX& q) {
  double mass = tree.total_mass();
  if (mass <= 0.0) throw Error("com_position: total mass is zero");
  auto X = forward_kinematics(tree, q);
  Vec3 weighted = Vec3::Zero();
  for (int i = 0; i < tree.num_bodies(); ++i) {
    weighted += tree.body(i).inertia.mass * X[i].act_point(tree.body(i).inertia.com);
  }
  return weighted / mass;
}

MatX com_jacobian(const RigidBodyTree& tree, const VecX& q) {
  double mass = tree.total_mass();
  if (mass <= 0.0) throw Error("com_jacobian: total mass is zero");
  auto X = forward_kinematics(tree, q);
  MatX J = MatX::Zero(3, tree.nv());
  MatX S(6, 6);
  for (int i = 0; i < tree.num_bodies(); ++i) {
    double m = tree.body(i).inertia.mass;
    if (m == 0.0) continue;
    Vec3 p_c = X[i].act_point(tree.body(i).inertia.com);
    for (int b = i; b >= 0; b = tree.body(b).parent) {
      const JointModel& joint = tree.body(b).joint;
      int nvj = joint.nv();
      joint_motion_subspace(joint, q.segment(tree.idx_q(b), joint.nq()), S.leftCols(nvj));
      const Mat3& R = X[b].rotation;
      const Vec3& p_b = X[b].translation;
      for (int k = 0; k < nvj; ++k) {
        Vec3 ang = R * S.col(k).head<3>();
        Vec3 lin = R * S.col(k).tail<3>() + ang.cross(p_c - p_b);
        J.col(tree.idx_v(b) + k) += (m / mass) * lin;
      }
    }
  }
  return J;
}

}  // namespace loom
