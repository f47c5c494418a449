#include "loom/box_fddp.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

namespace loom {

BoxFddp::BoxFddp(const ShootingProblem& problem, SolverSettings settings)
    : problem_(&problem), settings_(settings), N_(problem.horizon()) {
  if (N_ < 1) throw Error("shooting problem needs at least one running node");
  data_.resize(N_ + 1);
  xs_.resize(N_ + 1);
  us_.resize(N_);
  xs_try_.resize(N_ + 1);
  us_try_.resize(N_);
  fs_.resize(N_ + 1);
  Vx_.resize(N_ + 1);
  Vxx_.resize(N_ + 1);
  Qx_.resize(N_);
  Qu_.resize(N_);
  Qxx_.resize(N_);
  Qxu_.resize(N_);
  Quu_.resize(N_);
  k_.resize(N_);
  K_.resize(N_);
}

void BoxFddp::set_candidate(const std::vector<VecX>& xs, const std::vector<VecX>& us) {
  const auto& space = problem_->state();
  if (xs.empty()) {
    for (auto& x : xs_) x = problem_->x0;
  } else {
    if (static_cast<int>(xs.size()) != N_ + 1) throw DimensionError("state guess length mismatch");
    xs_ = xs;
  }
  if (us.empty()) {
    for (int t = 0; t < N_; ++t) us_[t] = VecX::Zero(problem_->running[t]->nu());
  } else {
    if (static_cast<int>(us.size()) != N_) throw DimensionError("control guess length mismatch");
    us_ = us;
  }
  (void)space;
}

void BoxFddp::compute_gaps() {
  const auto& space = problem_->state();
  // Defects point from the candidate state to the model prediction.
  fs_[0] = space.difference(xs_[0], problem_->x0);
  ActionData tmp;
  for (int t = 0; t < N_; ++t) {
    problem_->running[t]->calc(xs_[t], us_[t], tmp);
    fs_[t + 1] = space.difference(xs_[t + 1], tmp.xnext);
  }
}

double BoxFddp::total_gap() const {
  double g = 0.0;
  for (const auto& f : fs_) g = std::max(g, f.lpNorm<Eigen::Infinity>());
  return g;
}

void BoxFddp::calc_derivatives() {
  cost_ = problem_->calc(xs_, us_, data_);
  problem_->calc_diff(xs_, us_, data_);
}

void BoxFddp::prepare(const std::vector<VecX>& xs, const std::vector<VecX>& us) {
  set_candidate(xs, us);
  compute_gaps();
  is_feasible_ = total_gap() <= settings_.gap_tolerance;
  was_feasible_ = is_feasible_;
  calc_derivatives();
}

bool BoxFddp::backward_pass(double regularization) {
  const auto& space = problem_->state();
  const int ndx = space.ndx();

  Vxx_[N_] = data_[N_].lxx;
  Vx_[N_] = data_[N_].lx;
  Vxx_[N_].diagonal().array() += regularization;
  if (!is_feasible_) Vx_[N_] += Vxx_[N_] * fs_[N_];

  dg_ = 0.0;
  dq_ = 0.0;
  if (!is_feasible_) {
    dg_ -= Vx_[N_].dot(fs_[N_]);
    // The Vx term above already folds the gap in; mirror the reference
    // bookkeeping used by feasibility-driven solvers.
    dq_ += fs_[N_].dot(Vxx_[N_] * fs_[N_]);
  }

  for (int t = N_ - 1; t >= 0; --t) {
    const ActionData& d = data_[t];
    const int nu = problem_->running[t]->nu();

    Qx_[t] = d.lx + d.fx.transpose() * Vx_[t + 1];
    Qu_[t] = d.lu + d.fu.transpose() * Vx_[t + 1];
    MatX FxTVxx = d.fx.transpose() * Vxx_[t + 1];
    MatX FuTVxx = d.fu.transpose() * Vxx_[t + 1];
    Qxx_[t] = d.lxx + FxTVxx * d.fx;
    Qxu_[t] = d.lux.transpose() + FxTVxx * d.fu;
    Quu_[t] = d.luu + FuTVxx * d.fu;
    Quu_[t].diagonal().array() += regularization;
    if (!Quu_[t].allFinite() || !Qu_[t].allFinite()) {
      throw SolverFailure("numerical failure: non-finite derivatives at node " + std::to_string(t));
    }

    const ActionModel& model = *problem_->running[t];
    if (model.has_control_bounds()) {
      VecX lb = model.control_lower() - us_[t];
      VecX ub = model.control_upper() - us_[t];
      auto qp = solve_box_qp(Quu_[t], Qu_[t], lb, ub, VecX::Zero(nu));
      if (qp.failed) return false;
      k_[t] = -qp.du;  // stored so that u_try = u - alpha k - K dx
      // Feedback only on the free rows.
      std::vector<int> free_idx;
      for (int i = 0; i < nu; ++i) {
        if (!qp.clamped[i]) free_idx.push_back(i);
      }
      K_[t] = MatX::Zero(nu, ndx);
      if (!free_idx.empty()) {
        MatX Quu_ff(free_idx.size(), free_idx.size());
        MatX Qxu_f(ndx, free_idx.size());
        for (size_t a = 0; a < free_idx.size(); ++a) {
          Qxu_f.col(a) = Qxu_[t].col(free_idx[a]);
          for (size_t b = 0; b < free_idx.size(); ++b) {
            Quu_ff(a, b) = Quu_[t](free_idx[a], free_idx[b]);
          }
        }
        Eigen::LLT<MatX> llt(Quu_ff);
        if (llt.info() != Eigen::Success) return false;
        MatX Kf = llt.solve(Qxu_f.transpose());
        for (size_t a = 0; a < free_idx.size(); ++a) K_[t].row(free_idx[a]) = Kf.row(a);
      }
    } else {
      Eigen::LLT<MatX> llt(Quu_[t]);
      if (llt.info() != Eigen::Success) return false;
      k_[t] = llt.solve(Qu_[t]);
      K_[t] = llt.solve(Qxu_[t].transpose());
    }

    dg_ += Qu_[t].dot(k_[t]);
    VecX Quuk = Quu_[t] * k_[t];
    dq_ -= k_[t].dot(Quuk);

    Vx_[t] = Qx_[t] + K_[t].transpose() * Quuk - 2.0 * (K_[t].transpose() * Qu_[t]);
    Vxx_[t] = Qxx_[t] - Qxu_[t] * K_[t];
    Vxx_[t] = 0.5 * (Vxx_[t] + Vxx_[t].transpose()).eval();
    Vxx_[t].diagonal().array() += regularization;

    if (!is_feasible_) {
      Vx_[t] += Vxx_[t] * fs_[t];
      dg_ -= Vx_[t].dot(fs_[t]);
      dq_ += fs_[t].dot(Vxx_[t] * fs_[t]);
    }
    if (!Vx_[t].allFinite() || !Vxx_[t].allFinite()) {
      throw SolverFailure("numerical failure: non-finite value function at node " + std::to_string(t));
    }
  }
  return true;
}

double BoxFddp::forward_pass(double step) {
  const auto& space = problem_->state();
  cost_try_ = 0.0;
  dv_ = 0.0;

  VecX xnext = problem_->x0;
  ActionData tmp;
  for (int t = 0; t < N_; ++t) {
    if (is_feasible_ || step == 1.0) {
      xs_try_[t] = xnext;
    } else {
      // Feasibility-driven rollout: the remaining fraction of each defect is
      // kept, so gaps scale by (1 - step) along the pass.
      xs_try_[t] = space.integrate(xnext, fs_[t] * (step - 1.0));
    }
    VecX dx = space.difference(xs_[t], xs_try_[t]);
    us_try_[t] = us_[t] - step * k_[t] - K_[t] * dx;
    const ActionModel& model = *problem_->running[t];
    if (model.has_control_bounds()) {
      us_try_[t] = us_try_[t].cwiseMax(model.control_lower()).cwiseMin(model.control_upper());
    }
    model.calc(xs_try_[t], us_try_[t], tmp);
    xnext = tmp.xnext;
    cost_try_ += tmp.cost;
    if (!std::isfinite(cost_try_) || !xnext.allFinite()) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (is_feasible_ || step == 1.0) {
    xs_try_[N_] = xnext;
  } else {
    xs_try_[N_] = space.integrate(xnext, fs_[N_] * (step - 1.0));
  }
  problem_->terminal->calc(xs_try_[N_], tmp);
  cost_try_ += tmp.cost;
  if (!std::isfinite(cost_try_)) return std::numeric_limits<double>::quiet_NaN();

  if (!is_feasible_) {
    for (int t = 0; t <= N_; ++t) {
      VecX dx = space.difference(xs_try_[t], xs_[t]);
      dv_ -= fs_[t].dot(Vxx_[t] * dx);
    }
  }
  return cost_try_;
}

double BoxFddp::expected_improvement_at(double step) const {
  double d1 = dg_ + dv_;
  double d2 = dq_ - 2.0 * dv_;
  return step * (d1 + 0.5 * step * d2);
}

SolveResult BoxFddp::solve(const std::vector<VecX>& xs_init, const std::vector<VecX>& us_init) {
  set_candidate(xs_init, us_init);
  compute_gaps();
  is_feasible_ = total_gap() <= settings_.gap_tolerance;
  was_feasible_ = is_feasible_;

  double reg = std::max(settings_.reg_min, settings_.reg_initial);
  SolveResult result;
  result.cost_trace.reserve(settings_.max_iters + 1);

  if (settings_.log != nullptr) {
    (*settings_.log) << "iteration,cost,max_gap,step_length,regularization\n";
  }

  bool recalc = true;
  double expected_full = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < settings_.max_iters; ++iter) {
    if (recalc) {
      calc_derivatives();
      if (!is_feasible_) {
        compute_gaps();
      } else if (!was_feasible_) {
        for (auto& f : fs_) f.setZero();
      }
      if (result.cost_trace.empty()) result.cost_trace.push_back(cost_);
    }

    while (!backward_pass(reg)) {
      reg *= settings_.reg_factor;
      if (reg > settings_.reg_max) {
        throw SolverFailure("no progress: regularization exceeded its maximum in the backward pass");
      }
    }

    bool accepted = false;
    double step = 1.0;
    for (int ls = 0; ls < settings_.line_search_steps; ++ls, step *= 0.5) {
      double cost_candidate = forward_pass(step);
      if (std::isnan(cost_candidate)) continue;
      double dV = cost_ - cost_candidate;
      double dV_expected = expected_improvement_at(step);

      bool ok;
      if (dV_expected >= 0.0) {
        ok = dV > settings_.accept_ratio * dV_expected;
      } else {
        // Uphill step that still contracts the defects.
        ok = dV > settings_.accept_negative_ratio * dV_expected;
      }
      if (!ok) continue;

      was_feasible_ = is_feasible_;
      xs_ = xs_try_;
      us_ = us_try_;
      cost_ = cost_candidate;
      is_feasible_ = was_feasible_ || step == 1.0;
      accepted = true;
      break;
    }

    expected_full = expected_improvement_at(1.0);
    result.cost_trace.push_back(cost_);
    compute_gaps();
    {
      double gap_sum = 0.0;
      for (const auto& f : fs_) gap_sum += f.lpNorm<Eigen::Infinity>();
      result.merit_trace.push_back(cost_ + gap_sum);
    }

    if (settings_.log != nullptr) {
      (*settings_.log) << iter + 1 << ',' << std::setprecision(12) << cost_ << ',' << total_gap()
                       << ',' << (accepted ? step : 0.0) << ',' << reg << '\n';
    }

    if (!accepted) {
      reg *= settings_.reg_factor;
      if (reg > settings_.reg_max) {
        throw SolverFailure("no progress: no acceptable step at maximum regularization");
      }
      recalc = false;
      continue;
    }
    recalc = true;

    if (accepted && step > settings_.reg_decrease_step) {
      reg = std::max(settings_.reg_min, reg / settings_.reg_factor);
    }
    if (accepted && step <= settings_.reg_increase_step) {
      reg *= settings_.reg_factor;
      if (reg > settings_.reg_max) {
        throw SolverFailure("no progress: regularization exceeded its maximum");
      }
    }

    if (is_feasible_ && total_gap() <= settings_.gap_tolerance &&
        std::abs(expected_full) < settings_.convergence_tol) {
      result.converged = true;
      ++iter;
      break;
    }
  }

  result.xs = xs_;
  result.us = us_;
  result.cost = cost_;
  result.iterations = iter;
  compute_gaps();
  result.gaps.resize(N_ + 1);
  for (int t = 0; t <= N_; ++t) result.gaps[t] = fs_[t].lpNorm<Eigen::Infinity>();
  if (!result.converged) {
    double g = total_gap();
    result.converged = is_feasible_ && g <= settings_.gap_tolerance &&
                       std::abs(expected_full) < settings_.convergence_tol;
  }
  return result;
}

BoxFddp::BoxQpResult BoxFddp::solve_box_qp(const MatX& Quu, const VecX& Qu, const VecX& lb,
                                           const VecX& ub, const VecX& warm_start) {
  const int n = static_cast<int>(Qu.size());
  BoxQpResult out;
  out.clamped.assign(n, false);
  VecX x = warm_start.cwiseMax(lb).cwiseMin(ub);

  auto objective = [&](const VecX& z) { return 0.5 * z.dot(Quu * z) + Qu.dot(z); };
  const double grad_tol = 1e-12;

  for (int iter = 0; iter < 20; ++iter) {
    VecX g = Qu + Quu * x;
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i) {
      bool at_lower = (x[i] <= lb[i] + 1e-15) && g[i] > 0.0;
      bool at_upper = (x[i] >= ub[i] - 1e-15) && g[i] < 0.0;
      out.clamped[i] = at_lower || at_upper;
      if (!out.clamped[i]) free_idx.push_back(i);
    }
    if (free_idx.empty()) break;
    double gfree_norm = 0.0;
    for (int i : free_idx) gfree_norm = std::max(gfree_norm, std::abs(g[i]));
    if (gfree_norm < grad_tol) break;

    MatX Hff(free_idx.size(), free_idx.size());
    VecX gf(free_idx.size());
    for (size_t a = 0; a < free_idx.size(); ++a) {
      gf[a] = g[free_idx[a]];
      for (size_t b = 0; b < free_idx.size(); ++b) Hff(a, b) = Quu(free_idx[a], free_idx[b]);
    }
    Eigen::LLT<MatX> llt(Hff);
    if (llt.info() != Eigen::Success) {
      out.failed = true;
      return out;
    }
    VecX df = -llt.solve(gf);

    // Projected backtracking on the quadratic objective.
    double f0 = objective(x);
    double alpha = 1.0;
    VecX x_try;
    bool improved = false;
    for (int bt = 0; bt < 12; ++bt, alpha *= 0.5) {
      x_try = x;
      for (size_t a = 0; a < free_idx.size(); ++a) x_try[free_idx[a]] += alpha * df[a];
      x_try = x_try.cwiseMax(lb).cwiseMin(ub);
      if (objective(x_try) < f0 - 1e-14) {
        improved = true;
        break;
      }
    }
    if (!improved) break;
    x = x_try;
  }

  // Final clamp classification at the solution.
  VecX g = Qu + Quu * x;
  for (int i = 0; i < n; ++i) {
    bool at_lower = (x[i] <= lb[i] + 1e-12) && g[i] >= 0.0;
    bool at_upper = (x[i] >= ub[i] - 1e-12) && g[i] <= 0.0;
    out.clamped[i] = at_lower || at_upper;
  }
  out.du = x;
  return out;
}

}  // namespace loom
