#include "loom/contact.hpp"

namespace loom {

MatX contact_jacobian(const RigidBodyTree& tree, const VecX& q, const ContactSet& contacts) {
  auto X = forward_kinematics(tree, q);
  MatX Jc(contacts.stacked_rows(), tree.nv());
  MatX J(6, tree.nv());
  int row = 0;
  for (const auto& c : contacts.contacts) {
    frame_jacobian(tree, q, X, c.frame, J);
    Jc.middleRows(row, 3) = J.bottomRows<3>();
    if (c.kind == ContactKind::flat_foot_6d) {
      Jc.middleRows(row + 3, 3) = J.topRows<3>();
    }
    row += c.rows();
  }
  return Jc;
}

VecX contact_drift(const RigidBodyTree& tree, const VecX& q, const VecX& v,
                   const ContactSet& contacts) {
  auto cache = propagate_motion(tree, q, v);
  VecX drift(contacts.stacked_rows());
  int row = 0;
  for (const auto& c : contacts.contacts) {
    Motion d = frame_drift(tree, cache, c.frame);
    drift.segment<3>(row) = d.linear;
    if (c.kind == ContactKind::flat_foot_6d) {
      drift.segment<3>(row + 3) = d.angular;
    }
    row += c.rows();
  }
  return drift;
}

VecX contact_position_error(const RigidBodyTree& tree, const VecX& q, const ContactSet& contacts) {
  auto X = forward_kinematics(tree, q);
  VecX err(contacts.stacked_rows());
  int row = 0;
  for (const auto& c : contacts.contacts) {
    Placement Xf = frame_placement(tree, X, c.frame);
    err.segment<3>(row) = Xf.translation - c.anchor.translation;
    if (c.kind == ContactKind::flat_foot_6d) {
      err.segment<3>(row + 3) = log3(Xf.rotation * c.anchor.rotation.transpose());
    }
    row += c.rows();
  }
  return err;
}

ConstrainedAccelResult constrained_forward_dynamics(const RigidBodyTree& tree, const VecX& q,
                                                    const VecX& v, const VecX& tau_gen,
                                                    const ContactSet& contacts) {
  tree.check_velocity(tau_gen);
  const int nv = tree.nv();
  const int nc = contacts.stacked_rows();

  MatX M = crba(tree, q);
  VecX b = bias_forces(tree, q, v);

  ConstrainedAccelResult out;
  if (nc == 0) {
    Eigen::LDLT<MatX> ldlt(M);
    out.qdd = ldlt.solve(tau_gen - b);
    out.lambdas = VecX::Zero(0);
    out.kkt_condition = 1.0;
    return out;
  }

  MatX Jc = contact_jacobian(tree, q, contacts);
  VecX rhs_top = tau_gen - b;
  VecX rhs_bottom = -contact_drift(tree, q, v, contacts);

  // Baumgarte feedback (off inside the optimal-control loop, where drift has
  // no time to accumulate; on for long rollouts).
  bool any_gain = false;
  for (const auto& c : contacts.contacts) any_gain |= (c.kp > 0.0 || c.kd > 0.0);
  if (any_gain) {
    VecX pos_err = contact_position_error(tree, q, contacts);
    VecX vel = Jc * v;
    int row = 0;
    for (const auto& c : contacts.contacts) {
      rhs_bottom.segment(row, c.rows()) -=
          c.kp * pos_err.segment(row, c.rows()) + c.kd * vel.segment(row, c.rows());
      row += c.rows();
    }
  }

  MatX kkt = MatX::Zero(nv + nc, nv + nc);
  kkt.topLeftCorner(nv, nv) = M;
  kkt.topRightCorner(nv, nc) = Jc.transpose();
  kkt.bottomLeftCorner(nc, nv) = Jc;
  VecX rhs(nv + nc);
  rhs << rhs_top, rhs_bottom;

  Eigen::PartialPivLU<MatX> lu(kkt);
  VecX sol = lu.solve(rhs);
  double rcond = lu.rcond();
  out.kkt_condition = (rcond > 0.0) ? 1.0 / rcond : std::numeric_limits<double>::infinity();

  VecX residual = kkt * sol - rhs;
  double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  if (!sol.allFinite() || residual.lpNorm<Eigen::Infinity>() > 1e-6 * scale) {
    // Singular Jc with an inconsistent right-hand side has no solution.
    throw ContactError("contact constraints are infeasible (KKT residual " +
                       std::to_string(residual.lpNorm<Eigen::Infinity>()) + ")");
  }
  if (out.kkt_condition > 1e12) {
    throw IllConditionedError("contact KKT system is ill-conditioned (estimate " +
                              std::to_string(out.kkt_condition) + ")");
  }

  out.qdd = sol.head(nv);
  out.lambdas = -sol.tail(nc);
  return out;
}

VecX constrained_inverse_dynamics(const RigidBodyTree& tree, const VecX& q, const VecX& v,
                                  const VecX& qdd, const ContactSet& contacts,
                                  const VecX& lambdas) {
  if (lambdas.size() != contacts.stacked_rows()) {
    throw DimensionError("constrained_inverse_dynamics: lambda size mismatch");
  }
  VecX tau = rnea(tree, q, v, qdd);
  if (contacts.stacked_rows() > 0) {
    tau -= contact_jacobian(tree, q, contacts).transpose() * lambdas;
  }
  return tau;
}

}  // namespace loom
