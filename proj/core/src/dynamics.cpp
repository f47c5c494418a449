#include "loom/dynamics.hpp"

namespace loom {

VecX rnea(const RigidBodyTree& tree, const VecX& q, const VecX& v, const VecX& a,
          const ExternalForces& external) {
  tree.check_configuration(q);
  tree.check_velocity(v);
  tree.check_velocity(a);
  if (!external.empty() && static_cast<int>(external.size()) != tree.num_bodies()) {
    throw DimensionError("external force list must have one entry per body");
  }

  const int nb = tree.num_bodies();
  std::vector<Placement> X_up(nb), X_w(nb);
  std::vector<Motion> vel(nb), acc(nb);
  std::vector<Force> f(nb);
  std::vector<MatX> S(nb);

  // Propagating -gravity as the base acceleration folds gravity into the result.
  const Motion a_base(Vec3::Zero(), -tree.gravity());

  for (int i = 0; i < nb; ++i) {
    const Body& b = tree.body(i);
    const auto q_seg = q.segment(tree.idx_q(i), b.joint.nq());
    const auto v_seg = v.segment(tree.idx_v(i), b.joint.nv());
    const auto a_seg = a.segment(tree.idx_v(i), b.joint.nv());

    X_up[i] = b.joint.parent_frame * joint_placement(b.joint, q_seg);
    X_w[i] = (b.parent >= 0) ? X_w[b.parent] * X_up[i] : X_up[i];
    S[i].resize(6, b.joint.nv());
    joint_motion_subspace(b.joint, q_seg, S[i]);

    Motion vj = Motion::from_vector(S[i] * v_seg);
    Motion aj = Motion::from_vector(S[i] * a_seg) + joint_bias(b.joint, q_seg, v_seg);

    const Motion& vp = (b.parent >= 0) ? vel[b.parent] : Motion::Zero();
    const Motion ap = (b.parent >= 0) ? acc[b.parent] : a_base;

    vel[i] = transform_motion_inverse(X_up[i], vp) + vj;
    acc[i] = transform_motion_inverse(X_up[i], ap) + aj + motion_cross(vel[i], vj);

    f[i] = inertia_apply(b.inertia, acc[i]) + force_cross(vel[i], inertia_apply(b.inertia, vel[i]));
    if (!external.empty()) {
      // External forces arrive in world axes at the body origin.
      Placement rot_only(X_w[i].rotation, Vec3::Zero());
      f[i] = f[i] - transform_force_inverse(rot_only, external[i]);
    }
  }

  VecX tau(tree.nv());
  for (int i = nb - 1; i >= 0; --i) {
    const Body& b = tree.body(i);
    tau.segment(tree.idx_v(i), b.joint.nv()) = S[i].transpose() * f[i].vector();
    if (b.parent >= 0) {
      f[b.parent] = f[b.parent] + transform_force(X_up[i], f[i]);
    }
  }
  return tau;
}

VecX bias_forces(const RigidBodyTree& tree, const VecX& q, const VecX& v) {
  return rnea(tree, q, v, VecX::Zero(tree.nv()));
}

MatX crba(const RigidBodyTree& tree, const VecX& q) {
  tree.check_configuration(q);
  const int nb = tree.num_bodies();
  std::vector<Mat6> X_down(nb);  // motion transform parent -> body coordinates
  std::vector<Mat6> Ic(nb);
  std::vector<MatX> S(nb);

  for (int i = 0; i < nb; ++i) {
    const Body& b = tree.body(i);
    const auto q_seg = q.segment(tree.idx_q(i), b.joint.nq());
    Placement X_up = b.joint.parent_frame * joint_placement(b.joint, q_seg);
    X_down[i] = motion_transform_matrix_inverse(X_up);
    Ic[i] = b.inertia.matrix();
    S[i].resize(6, b.joint.nv());
    joint_motion_subspace(b.joint, q_seg, S[i]);
  }

  MatX M = MatX::Zero(tree.nv(), tree.nv());
  for (int i = nb - 1; i >= 0; --i) {
    const Body& b = tree.body(i);
    if (b.parent >= 0) {
      Ic[b.parent] += X_down[i].transpose() * Ic[i] * X_down[i];
    }
    MatX F = Ic[i] * S[i];
    int iv = tree.idx_v(i), nvi = b.joint.nv();
    M.block(iv, iv, nvi, nvi) = S[i].transpose() * F;
    int j = i;
    while (tree.body(j).parent >= 0) {
      F = X_down[j].transpose() * F;
      j = tree.body(j).parent;
      int jv = tree.idx_v(j), nvj = tree.body(j).joint.nv();
      M.block(jv, iv, nvj, nvi) = S[j].transpose() * F;
      M.block(iv, jv, nvi, nvj) = M.block(jv, iv, nvj, nvi).transpose();
    }
  }
  return M;
}

}  // namespace loom
