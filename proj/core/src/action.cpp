#include "loom/action.hpp"

#include <thread>

namespace loom {

VecX StateSpace::integrate(const VecX& x, const VecX& dx) const {
  const int nq = tree_->nq(), nv = tree_->nv();
  if (x.size() != nq + nv || dx.size() != 2 * nv) {
    throw DimensionError("StateSpace::integrate: size mismatch");
  }
  VecX out(nq + nv);
  out.head(nq) = integrate_configuration(*tree_, x.head(nq), dx.head(nv));
  out.tail(nv) = x.tail(nv) + dx.tail(nv);
  return out;
}

VecX StateSpace::difference(const VecX& x0, const VecX& x1) const {
  const int nq = tree_->nq(), nv = tree_->nv();
  VecX out(2 * nv);
  out.head(nv) = difference_configuration(*tree_, x0.head(nq), x1.head(nq));
  out.tail(nv) = x1.tail(nv) - x0.tail(nv);
  return out;
}

void ActionData::allocate(int ndx, int nu) {
  fx = MatX::Zero(ndx, ndx);
  fu = MatX::Zero(ndx, nu);
  lx = VecX::Zero(ndx);
  lu = VecX::Zero(nu);
  lxx = MatX::Zero(ndx, ndx);
  lux = MatX::Zero(nu, ndx);
  luu = MatX::Zero(nu, nu);
}

void ActionModel::set_control_bounds(const VecX& lower, const VecX& upper) {
  if (lower.size() != upper.size()) throw DimensionError("control bound size mismatch");
  for (int i = 0; i < lower.size(); ++i) {
    if (lower[i] > upper[i]) throw Error("control lower bound exceeds upper bound");
  }
  u_lower_ = lower;
  u_upper_ = upper;
}

ContactAction::ContactAction(const RigidBodyTree* tree, ContactSet contacts, CostModel cost,
                             double dt, int nu)
    : tree_(tree), state_(tree), contacts_(std::move(contacts)), cost_(std::move(cost)), dt_(dt), nu_(nu) {
  if (dt <= 0.0 && !cost_.is_terminal) throw Error("action timestep must be positive");
  cost_.validate();
}

VecX ContactAction::generalized_force(const VecX& u) const {
  // Selection: the floating base is unactuated, every joint carries a motor.
  VecX tau = VecX::Zero(tree_->nv());
  tau.tail(nu_) = u;
  return tau;
}

VecX ContactAction::step(const VecX& x, const VecX& u, VecX* lambdas) const {
  const int nq = tree_->nq(), nv = tree_->nv();
  VecX q = x.head(nq), v = x.tail(nv);
  auto res = constrained_forward_dynamics(*tree_, q, v, generalized_force(u), contacts_);
  if (lambdas != nullptr) *lambdas = res.lambdas;
  // Semi-implicit Euler: update velocity first, then advance the
  // configuration with the new velocity through the retraction.
  VecX v_next = v + res.qdd * dt_;
  VecX q_next = integrate_configuration(*tree_, q, v_next * dt_);
  VecX xnext(nq + nv);
  xnext << q_next, v_next;
  return xnext;
}

void ContactAction::calc(const VecX& x, const VecX& u, ActionData& data) const {
  data.xnext = step(x, u, &data.lambdas);
  CostEvaluation c = evaluate_cost(*tree_, cost_, x.head(tree_->nq()), x.tail(tree_->nv()), u);
  data.cost = c.value * dt_;
}

void ContactAction::calc(const VecX& x, ActionData& data) const {
  CostEvaluation c =
      evaluate_cost(*tree_, cost_, x.head(tree_->nq()), x.tail(tree_->nv()), VecX::Zero(nu_));
  data.cost = c.value;
  data.xnext = x;
}

void ContactAction::calc_diff(const VecX& x, const VecX& u, ActionData& data) const {
  const int ndx = state_.ndx();
  data.allocate(ndx, nu_);

  CostEvaluation c = evaluate_cost(*tree_, cost_, x.head(tree_->nq()), x.tail(tree_->nv()), u);
  data.lx = c.lx * dt_;
  data.lu = c.lu * dt_;
  data.lxx = c.lxx * dt_;
  data.lux = c.lux * dt_;
  data.luu = c.luu * dt_;

  // Central differences in the state chart around the nominal prediction.
  VecX xn = step(x, u, nullptr);
  const double h = kFdStep;
  for (int k = 0; k < ndx; ++k) {
    VecX dx = VecX::Zero(ndx);
    dx[k] = h;
    VecX xp = step(state_.integrate(x, dx), u, nullptr);
    dx[k] = -h;
    VecX xm = step(state_.integrate(x, dx), u, nullptr);
    data.fx.col(k) = (state_.difference(xn, xp) - state_.difference(xn, xm)) / (2.0 * h);
  }
  for (int k = 0; k < nu_; ++k) {
    VecX du = VecX::Zero(nu_);
    du[k] = h;
    VecX xp = step(x, u + du, nullptr);
    VecX xm = step(x, u - du, nullptr);
    data.fu.col(k) = (state_.difference(xn, xp) - state_.difference(xn, xm)) / (2.0 * h);
  }
}

void ContactAction::calc_diff(const VecX& x, ActionData& data) const {
  data.allocate(state_.ndx(), 0);
  CostEvaluation c =
      evaluate_cost(*tree_, cost_, x.head(tree_->nq()), x.tail(tree_->nv()), VecX::Zero(0));
  data.lx = c.lx;
  data.lxx = c.lxx;
}

double ShootingProblem::calc(const std::vector<VecX>& xs, const std::vector<VecX>& us,
                             std::vector<ActionData>& data) const {
  const int N = horizon();
  if (static_cast<int>(xs.size()) != N + 1 || static_cast<int>(us.size()) != N) {
    throw DimensionError("trajectory length does not match the problem horizon");
  }
  if (static_cast<int>(data.size()) != N + 1) data.resize(N + 1);
  double total = 0.0;
  for (int t = 0; t < N; ++t) {
    running[t]->calc(xs[t], us[t], data[t]);
    total += data[t].cost;
  }
  terminal->calc(xs[N], data[N]);
  total += data[N].cost;
  return total;
}

void ShootingProblem::calc_diff(const std::vector<VecX>& xs, const std::vector<VecX>& us,
                                std::vector<ActionData>& data) const {
  const int N = horizon();
  if (static_cast<int>(data.size()) != N + 1) data.resize(N + 1);

  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(N + 1));
  if (workers <= 1) {
    for (int t = 0; t < N; ++t) running[t]->calc_diff(xs[t], us[t], data[t]);
    terminal->calc_diff(xs[N], data[N]);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int t = static_cast<int>(w); t <= N; t += static_cast<int>(workers)) {
          if (t < N) {
            running[t]->calc_diff(xs[t], us[t], data[t]);
          } else {
            terminal->calc_diff(xs[N], data[N]);
          }
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<VecX> ShootingProblem::rollout(const std::vector<VecX>& us) const {
  std::vector<VecX> xs(horizon() + 1);
  xs[0] = x0;
  ActionData data;
  for (int t = 0; t < horizon(); ++t) {
    running[t]->calc(xs[t], us[t], data);
    xs[t + 1] = data.xnext;
  }
  return xs;
}

void ShootingProblem::allocate(std::vector<ActionData>& data) const {
  data.resize(horizon() + 1);
}

}  // namespace loom
