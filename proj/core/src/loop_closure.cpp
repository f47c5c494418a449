#include "loom/loop_closure.hpp"

#include <algorithm>

namespace loom {

Submechanism::Submechanism(std::string name, ResolverKind kind, RigidBodyTree local_tree,
                           std::vector<int> independent, std::vector<CutJoint> cuts,
                           std::vector<CoupledCoordinate> couplings, VecX reference)
    : name_(std::move(name)),
      kind_(kind),
      tree_(std::move(local_tree)),
      independent_(std::move(independent)),
      cuts_(std::move(cuts)),
      couplings_(std::move(couplings)) {
  if (tree_.nq() != tree_.nv()) {
    throw Error("submechanism '" + name_ + "': local tree must have nq == nv "
                "(quaternion joints belong on cut joints, not the spanning tree)");
  }
  std::vector<bool> taken(tree_.nq(), false);
  for (int idx : independent_) {
    if (idx < 0 || idx >= tree_.nq()) throw Error("submechanism '" + name_ + "': independent index out of range");
    if (taken[idx]) throw Error("submechanism '" + name_ + "': duplicate independent index");
    taken[idx] = true;
  }
  for (const auto& c : couplings_) {
    if (c.follower < 0 || c.follower >= tree_.nq() || c.source < 0 || c.source >= tree_.nq()) {
      throw Error("submechanism '" + name_ + "': coupling index out of range");
    }
    if (taken[c.follower]) throw Error("submechanism '" + name_ + "': coupled coordinate already assigned");
    taken[c.follower] = true;
  }
  for (const auto& c : couplings_) {
    for (const auto& o : couplings_) {
      if (c.source == o.follower) {
        throw Error("submechanism '" + name_ + "': coupling source may not itself be coupled");
      }
    }
  }
  for (int i = 0; i < tree_.nq(); ++i) {
    if (!taken[i]) passive_.push_back(i);
  }
  for (const auto& cut : cuts_) {
    if (cut.frame_a < 0 || cut.frame_a >= tree_.num_frames() || cut.frame_b < 0 ||
        cut.frame_b >= tree_.num_frames()) {
      throw Error("submechanism '" + name_ + "': cut joint frame out of range");
    }
  }
  reference_ = (reference.size() == tree_.nq()) ? std::move(reference) : VecX::Zero(tree_.nq());
}

VecX Submechanism::constraint_residual(const VecX& q_local) const {
  auto X = forward_kinematics(tree_, q_local);
  VecX phi(num_constraints());
  for (size_t c = 0; c < cuts_.size(); ++c) {
    Vec3 pa = frame_placement(tree_, X, cuts_[c].frame_a).translation;
    Vec3 pb = frame_placement(tree_, X, cuts_[c].frame_b).translation;
    phi.segment<3>(3 * static_cast<int>(c)) = pa - pb;
  }
  return phi;
}

MatX Submechanism::constraint_jacobian(const VecX& q_local) const {
  auto X = forward_kinematics(tree_, q_local);
  MatX K = MatX::Zero(num_constraints(), tree_.nv());
  MatX Ja(6, tree_.nv()), Jb(6, tree_.nv());
  for (size_t c = 0; c < cuts_.size(); ++c) {
    frame_jacobian(tree_, q_local, X, cuts_[c].frame_a, Ja);
    frame_jacobian(tree_, q_local, X, cuts_[c].frame_b, Jb);
    K.middleRows<3>(3 * static_cast<int>(c)) = Ja.bottomRows<3>() - Jb.bottomRows<3>();
  }
  return K;
}

VecX Submechanism::constraint_drift(const VecX& q_local, const VecX& v_local) const {
  auto cache = propagate_motion(tree_, q_local, v_local);
  VecX k(num_constraints());
  for (size_t c = 0; c < cuts_.size(); ++c) {
    Motion da = frame_drift(tree_, cache, cuts_[c].frame_a);
    Motion db = frame_drift(tree_, cache, cuts_[c].frame_b);
    k.segment<3>(3 * static_cast<int>(c)) = -(da.linear - db.linear);
  }
  return k;
}

ImplicitConstraint Submechanism::implicit() const {
  ImplicitConstraint c;
  c.rows = num_constraints();
  c.residual = [this](const VecX& q) { return constraint_residual(q); };
  c.jacobian = [this](const VecX& q) { return constraint_jacobian(q); };
  c.drift = [this](const VecX& q, const VecX& v) { return constraint_drift(q, v); };
  return c;
}

void Submechanism::apply_couplings(VecX& q_local) const {
  for (const auto& c : couplings_) {
    q_local[c.follower] = c.multiplier * q_local[c.source] + c.offset;
  }
}

int Submechanism::resolve(const VecX& y_local, VecX& q_local, const VecX* q_guess) const {
  if (y_local.size() != num_independent()) {
    throw DimensionError("submechanism '" + name_ + "': independent vector size mismatch");
  }
  if (q_guess != nullptr && q_guess->size() == tree_.nq()) {
    q_local = *q_guess;
  } else if (q_local.size() != tree_.nq()) {
    q_local = reference_;
  }
  for (int k = 0; k < num_independent(); ++k) q_local[independent_[k]] = y_local[k];

  int iterations = 0;
  if (analytic_) {
    analytic_(y_local, q_local);
    for (int k = 0; k < num_independent(); ++k) q_local[independent_[k]] = y_local[k];
  } else if (!passive_.empty()) {
    if (kind_ == ResolverKind::analytical) {
      throw Error("submechanism '" + name_ + "' declared analytical but has no position solver");
    }
    iterations = resolve_numerical(q_local);
  }
  apply_couplings(q_local);
  return iterations;
}

int Submechanism::resolve_numerical(VecX& q_local) const {
  const int np = static_cast<int>(passive_.size());
  if (np == 0) return 0;

  VecX phi = constraint_residual(q_local);
  double norm = phi.lpNorm<Eigen::Infinity>();
  int iter = 0;
  for (; iter < newton_.max_iterations && norm > newton_.tolerance; ++iter) {
    MatX K = constraint_jacobian(q_local);
    MatX Kp(K.rows(), np);
    for (int j = 0; j < np; ++j) Kp.col(j) = K.col(passive_[j]);

    Eigen::CompleteOrthogonalDecomposition<MatX> cod(Kp);
    cod.setThreshold(newton_.rank_threshold);
    if (cod.rank() < np) {
      throw SingularityError("submechanism '" + name_ + "': constraint Jacobian is rank-deficient (" +
                             std::to_string(cod.rank()) + " < " + std::to_string(np) + ")");
    }
    VecX step = cod.solve(-phi);

    // Backtracking: halve the step until the residual decreases.
    double alpha = 1.0;
    VecX q_try = q_local;
    VecX phi_try;
    double norm_try = norm;
    while (true) {
      for (int j = 0; j < np; ++j) q_try[passive_[j]] = q_local[passive_[j]] + alpha * step[j];
      phi_try = constraint_residual(q_try);
      norm_try = phi_try.lpNorm<Eigen::Infinity>();
      if (norm_try < norm || alpha <= newton_.min_step) break;
      alpha *= 0.5;
    }
    q_local = q_try;
    phi = phi_try;
    norm = norm_try;
  }
  if (norm > newton_.tolerance) {
    throw ResolutionError(name_, norm, iter);
  }

  // Polish to machine precision with undamped steps; downstream derivative
  // checks difference gamma with steps of 1e-6 and would otherwise see the
  // truncated Newton tolerance as noise.
  for (int polish = 0; polish < 2 && norm > 5e-15; ++polish) {
    MatX K = constraint_jacobian(q_local);
    MatX Kp(K.rows(), np);
    for (int j = 0; j < np; ++j) Kp.col(j) = K.col(passive_[j]);
    Eigen::CompleteOrthogonalDecomposition<MatX> cod(Kp);
    VecX step = cod.solve(-phi);
    VecX q_try = q_local;
    for (int j = 0; j < np; ++j) q_try[passive_[j]] += step[j];
    VecX phi_try = constraint_residual(q_try);
    if (phi_try.lpNorm<Eigen::Infinity>() >= norm) break;
    q_local = q_try;
    phi = phi_try;
    norm = phi.lpNorm<Eigen::Infinity>();
  }
  return iter;
}

MatX Submechanism::explicit_jacobian(const VecX& q_local) const {
  const int mi = num_independent();
  MatX G = MatX::Zero(dim(), mi);
  for (int k = 0; k < mi; ++k) G(independent_[k], k) = 1.0;

  const int np = static_cast<int>(passive_.size());
  if (np > 0) {
    MatX K = constraint_jacobian(q_local);
    MatX Kp(K.rows(), np), Ki(K.rows(), mi);
    for (int j = 0; j < np; ++j) Kp.col(j) = K.col(passive_[j]);
    for (int k = 0; k < mi; ++k) Ki.col(k) = K.col(independent_[k]);
    // Implicit function theorem: Kp * Gp = -Ki (least squares on consistent
    // overdetermined planar blocks).
    Eigen::CompleteOrthogonalDecomposition<MatX> cod(Kp);
    cod.setThreshold(newton_.rank_threshold);
    if (cod.rank() < np) {
      throw SingularityError("submechanism '" + name_ + "': singular closure while forming G");
    }
    MatX Gp = cod.solve(-Ki);
    for (int j = 0; j < np; ++j) G.row(passive_[j]) = Gp.row(j);
  }
  for (const auto& c : couplings_) {
    G.row(c.follower) = c.multiplier * G.row(c.source);
  }
  return G;
}

ExplicitClosureMap::ExplicitClosureMap(std::vector<Submechanism> blocks)
    : blocks_(std::move(blocks)) {
  for (const auto& b : blocks_) {
    q_offset_.push_back(n_);
    y_offset_.push_back(m_);
    c_offset_.push_back(nc_);
    n_ += b.dim();
    m_ += b.num_independent();
    nc_ += b.num_constraints();
  }
}

VecX ExplicitClosureMap::extract_independent(const VecX& q) const {
  if (q.size() != n_) throw DimensionError("extract_independent: configuration size mismatch");
  VecX y(m_);
  for (int i = 0; i < num_blocks(); ++i) {
    const auto& idx = blocks_[i].independent_coords();
    for (size_t k = 0; k < idx.size(); ++k) y[y_offset_[i] + static_cast<int>(k)] = q[q_offset_[i] + idx[k]];
  }
  return y;
}

VecX ExplicitClosureMap::gamma(const VecX& y, ClosureContext* ctx) const {
  if (y.size() != m_) throw DimensionError("gamma: independent vector size mismatch");
  VecX q(n_);
  if (ctx != nullptr) ctx->last_iterations.assign(blocks_.size(), 0);
  for (int i = 0; i < num_blocks(); ++i) {
    const Submechanism& b = blocks_[i];
    VecX q_local;
    const VecX* guess = nullptr;
    VecX warm;
    if (ctx != nullptr && ctx->warm && ctx->q.size() == n_) {
      warm = ctx->q.segment(q_offset_[i], b.dim());
      guess = &warm;
    }
    int iters = b.resolve(y.segment(y_offset_[i], b.num_independent()), q_local, guess);
    q.segment(q_offset_[i], b.dim()) = q_local;
    if (ctx != nullptr) ctx->last_iterations[i] = iters;
  }
  if (ctx != nullptr) {
    ctx->q = q;
    ctx->warm = true;
  }
  return q;
}

MatX ExplicitClosureMap::G_matrix(const VecX& y, ClosureContext* ctx) const {
  ClosureContext local;
  ClosureContext* use = (ctx != nullptr) ? ctx : &local;
  VecX q = gamma(y, use);
  MatX G = MatX::Zero(n_, m_);
  for (int i = 0; i < num_blocks(); ++i) {
    const Submechanism& b = blocks_[i];
    G.block(q_offset_[i], y_offset_[i], b.dim(), b.num_independent()) =
        b.explicit_jacobian(q.segment(q_offset_[i], b.dim()));
  }
  return G;
}

VecX ExplicitClosureMap::g_drift(const VecX& y, const VecX& ydot, ClosureContext* ctx) const {
  if (ydot.size() != m_) throw DimensionError("g_drift: velocity size mismatch");
  VecX g = VecX::Zero(n_);
  double speed = ydot.norm();
  if (speed < 1e-14) return g;  // g = Gdot ydot vanishes at ydot = 0

  // Directional central difference of G along ydot; each evaluation is
  // warm-started from the converged closure at y.
  ClosureContext local;
  ClosureContext* use = (ctx != nullptr) ? ctx : &local;
  gamma(y, use);
  ClosureContext side = *use;
  VecX u = ydot / speed;
  const double h = kDriftStep;
  MatX Gp = G_matrix(y + h * u, &side);
  side = *use;
  MatX Gm = G_matrix(y - h * u, &side);
  g = speed * ((Gp - Gm) / (2.0 * h)) * ydot;
  return g;
}

VecX ExplicitClosureMap::constraint_residual(const VecX& q) const {
  if (q.size() != n_) throw DimensionError("constraint_residual: configuration size mismatch");
  VecX phi(nc_);
  for (int i = 0; i < num_blocks(); ++i) {
    phi.segment(c_offset_[i], blocks_[i].num_constraints()) =
        blocks_[i].constraint_residual(q.segment(q_offset_[i], blocks_[i].dim()));
  }
  return phi;
}

VecX ExplicitClosureMap::reference() const {
  VecX q(n_);
  for (int i = 0; i < num_blocks(); ++i) {
    q.segment(q_offset_[i], blocks_[i].dim()) = blocks_[i].reference();
  }
  return q;
}

VecX actuator_positions(const ExplicitClosureMap& map, const ActuationMap& amap, const VecX& y,
                        ClosureContext* ctx) {
  VecX q = map.gamma(y, ctx);
  VecX out(amap.p());
  for (int i = 0; i < amap.p(); ++i) out[i] = q[amap.coords[i]];
  return out;
}

namespace {

MatX selected_G(const ExplicitClosureMap& map, const ActuationMap& amap, const VecX& y,
                ClosureContext* ctx) {
  MatX G = map.G_matrix(y, ctx);
  MatX SG(amap.p(), map.m());
  for (int i = 0; i < amap.p(); ++i) SG.row(i) = G.row(amap.coords[i]);
  return SG;
}

}  // namespace

VecX actuator_velocities(const ExplicitClosureMap& map, const ActuationMap& amap, const VecX& y,
                         const VecX& ydot, ClosureContext* ctx) {
  return selected_G(map, amap, y, ctx) * ydot;
}

VecX actuator_forces(const ExplicitClosureMap& map, const ActuationMap& amap, const VecX& y,
                     const VecX& tau_y, ClosureContext* ctx) {
  if (tau_y.size() != map.m()) throw DimensionError("actuator_forces: torque size mismatch");
  MatX SGt = selected_G(map, amap, y, ctx).transpose();
  Eigen::CompleteOrthogonalDecomposition<MatX> cod(SGt);
  cod.setThreshold(1e-12);
  if (cod.rank() < std::min<Eigen::Index>(SGt.rows(), SGt.cols())) {
    throw ActuationSingularityError("actuation map is rank-deficient at this posture (rank " +
                                    std::to_string(cod.rank()) + ")");
  }
  return cod.solve(tau_y);
}

}  // namespace loom
