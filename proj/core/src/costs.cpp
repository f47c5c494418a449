#include "loom/costs.hpp"

namespace loom {

CostTerm CostTerm::com(double w, const Vec3& ref, std::vector<int> dims) {
  CostTerm t;
  t.kind = CostKind::com_target;
  t.weight = w;
  t.com_reference = ref;
  t.activation_dims = std::move(dims);
  return t;
}

CostTerm CostTerm::torque(double w) {
  CostTerm t;
  t.kind = CostKind::torque_reg;
  t.weight = w;
  return t;
}

CostTerm CostTerm::posture(double w, const VecX& q_ref, std::vector<int> dims) {
  CostTerm t;
  t.kind = CostKind::posture_reg;
  t.weight = w;
  t.posture_reference = q_ref;
  t.activation_dims = std::move(dims);
  return t;
}

CostTerm CostTerm::frame_position(double w, FrameId frame, const Vec3& ref) {
  CostTerm t;
  t.kind = CostKind::frame_tracking;
  t.weight = w;
  t.frame = frame;
  t.frame_reference = ref;
  return t;
}

void CostModel::validate() const {
  for (const auto& t : terms) {
    if (t.weight < 0.0) throw Error("cost weights must be nonnegative");
    if (is_terminal && t.kind == CostKind::torque_reg) {
      throw Error("terminal cost models exclude torque regularization");
    }
  }
}

namespace {

/// Accumulate w * ||sel(r)||^2 with residual Jacobian J (rows x nv) acting on
/// the configuration tangent block.
void accumulate_q_term(double w, const VecX& r, const MatX& J, const std::vector<int>& dims,
                       double& value, Eigen::Ref<VecX> lx_q, Eigen::Ref<MatX> lxx_qq) {
  if (dims.empty()) {
    value += w * r.squaredNorm();
    lx_q.noalias() += 2.0 * w * J.transpose() * r;
    lxx_qq.noalias() += 2.0 * w * J.transpose() * J;
  } else {
    for (int d : dims) {
      value += w * r[d] * r[d];
      lx_q.noalias() += 2.0 * w * r[d] * J.row(d).transpose();
      lxx_qq.noalias() += 2.0 * w * J.row(d).transpose() * J.row(d);
    }
  }
}

}  // namespace

CostEvaluation evaluate_cost(const RigidBodyTree& tree, const CostModel& model, const VecX& q,
                             const VecX& v, const VecX& u) {
  model.validate();
  tree.check_configuration(q);
  tree.check_velocity(v);
  const int nv = tree.nv();
  const int ndx = 2 * nv;
  const int nu = static_cast<int>(u.size());

  CostEvaluation out;
  out.lx = VecX::Zero(ndx);
  out.lu = VecX::Zero(nu);
  out.lxx = MatX::Zero(ndx, ndx);
  out.lux = MatX::Zero(nu, ndx);
  out.luu = MatX::Zero(nu, nu);

  auto lx_q = out.lx.head(nv);
  auto lxx_qq = out.lxx.topLeftCorner(nv, nv);

  for (const auto& term : model.terms) {
    switch (term.kind) {
      case CostKind::com_target: {
        VecX r = com_position(tree, q) - term.com_reference;
        MatX J = com_jacobian(tree, q);
        accumulate_q_term(term.weight, r, J, term.activation_dims, out.value, lx_q, lxx_qq);
        break;
      }
      case CostKind::torque_reg: {
        if (model.is_terminal) throw Error("torque term in a terminal model");
        out.value += term.weight * u.squaredNorm();
        out.lu.noalias() += 2.0 * term.weight * u;
        out.luu.diagonal().array() += 2.0 * term.weight;
        break;
      }
      case CostKind::posture_reg: {
        if (term.posture_reference.size() != tree.nq()) {
          throw DimensionError("posture reference size mismatch");
        }
        VecX r = difference_configuration(tree, term.posture_reference, q);
        VecX r_sel = r;
        if (!term.activation_dims.empty()) {
          r_sel.setZero();
          for (int d : term.activation_dims) r_sel[d] = r[d];
        }
        out.value += term.weight * r_sel.squaredNorm();
        // Rotation rows: grad ||log||^2 is exactly 2 log (the log direction
        // is a fixed vector of the right Jacobian). Translation rows of a
        // floating base are expressed in the reference frame, so the local
        // increment sees R^T R_ref.
        VecX grad = r_sel;
        for (int i = 0; i < tree.num_bodies(); ++i) {
          if (tree.body(i).joint.kind != JointKind::floating_base) continue;
          int iq = tree.idx_q(i), iv = tree.idx_v(i);
          Quat cur(q[iq + 6], q[iq + 3], q[iq + 4], q[iq + 5]);
          Quat ref(term.posture_reference[iq + 6], term.posture_reference[iq + 3],
                   term.posture_reference[iq + 4], term.posture_reference[iq + 5]);
          Mat3 J_t = cur.toRotationMatrix().transpose() * ref.toRotationMatrix();
          grad.segment<3>(iv + 3) = J_t * r_sel.segment<3>(iv + 3);
        }
        lx_q.noalias() += 2.0 * term.weight * grad;
        if (term.activation_dims.empty()) {
          lxx_qq.diagonal().array() += 2.0 * term.weight;
        } else {
          for (int d : term.activation_dims) lxx_qq(d, d) += 2.0 * term.weight;
        }
        break;
      }
      case CostKind::frame_tracking: {
        VecX r = frame_placement(tree, q, term.frame).translation - term.frame_reference;
        MatX J = frame_jacobian(tree, q, term.frame).bottomRows<3>();
        accumulate_q_term(term.weight, r, J, term.activation_dims, out.value, lx_q, lxx_qq);
        break;
      }
    }
  }
  return out;
}

}  // namespace loom
